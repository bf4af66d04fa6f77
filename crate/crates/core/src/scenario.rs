//! TOML scenarios: one file fixes metrics, target, boundary data, parameters
//! and the kind of run. Bundled presets are compiled into the library.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certify::{certify, epsilon_sweep, CertifyConfig, SweepConfig};
use crate::energy::{DerivedFields, EnergyParams, Metrics};
use crate::error::{Error, Result};
use crate::geodesic::{
    ball_convexity_check, increasing_distance_check, Contraction, DistanceGrowth, GeodesicBall, Geodesics, SmallRadius,
};
use crate::grid::{build_disc_grid, DomainGrid, MapField};
use crate::homotopy::{continuation_run, uniform_bounds_report, HomotopyConfig};
use crate::metric::ConformalMetric;
use crate::solver::{smallness, solve_dirichlet, standard_inits, uniqueness_probe, SolveConfig};
use crate::target::{BoundaryKind, BoundaryLoop, TargetRegion};

const BUNDLED: &[(&str, &str)] = &[
    ("flat-identity", include_str!("../scenarios/flat-identity.toml")),
    ("ellipse-p3-solve", include_str!("../scenarios/ellipse-p3-solve.toml")),
    ("ellipse-p3-homotopy", include_str!("../scenarios/ellipse-p3-homotopy.toml")),
    ("ellipse-p4-certify", include_str!("../scenarios/ellipse-p4-certify.toml")),
    ("ellipse-p4-sweep", include_str!("../scenarios/ellipse-p4-sweep.toml")),
    ("hexagon-sphere-certify", include_str!("../scenarios/hexagon-sphere-certify.toml")),
    ("sphere-geodesics", include_str!("../scenarios/sphere-geodesics.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Solve,
    Homotopy,
    Certify,
    Sweep,
    Geodesics,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default)]
    pub domain: ConformalMetric,
    #[serde(default)]
    pub target: ConformalMetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub weight: f64,
    #[serde(flatten)]
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub components: Vec<BoundaryComponent>,
}

impl BoundarySpec {
    pub fn single(kind: BoundaryKind) -> Self {
        BoundarySpec {
            components: vec![BoundaryComponent { weight: 1.0, kind }],
        }
    }

    pub fn build(&self, target: &TargetRegion, key: &str) -> Result<BoundaryLoop> {
        BoundaryLoop::mixed(
            target.clone(),
            self.components.iter().map(|c| (c.weight, c.kind)).collect(),
            &format!("{key}.components"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub p: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSpec {
    /// Also solve from the standard alternative starts and compare.
    pub probe_uniqueness: bool,
    pub uniqueness_tol: f64,
    pub seed: u64,
}

impl Default for SolveSpec {
    fn default() -> Self {
        SolveSpec {
            probe_uniqueness: false,
            uniqueness_tol: 1e-5,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicSpec {
    pub center: [f64; 2],
    pub ball_radius: f64,
    pub triangles: usize,
    pub round_trips: usize,
    /// Inner radius of the contraction; it leaves the ball of radius `r0`.
    pub contraction_r: f64,
    pub contraction_r0: f64,
    pub lipschitz_pairs: usize,
    pub distance_pairs: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for GeodesicSpec {
    fn default() -> Self {
        GeodesicSpec {
            center: [0.0, 0.0],
            ball_radius: 0.2,
            triangles: 100,
            round_trips: 100,
            contraction_r: 0.15,
            contraction_r0: 0.3,
            lipschitz_pairs: 1000,
            distance_pairs: 100,
            seed: 5,
            tol: 1e-4,
        }
    }
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub run: RunKind,
    #[serde(default)]
    pub metrics: MetricSpec,
    pub target: TargetRegion,
    pub boundary: BoundarySpec,
    /// Starting parametrization for homotopy runs; defaults to constant speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_start: Option<BoundarySpec>,
    pub params: ParamSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub homotopy: HomotopyConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub geodesics: GeodesicSpec,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::UnknownScenario(name.to_string()))
            .and_then(|(_, text)| Self::parse(text))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::param("name", "must be a nonempty file-name-safe string"));
        }
        self.metrics.domain.validate("metrics.domain")?;
        self.metrics.target.validate("metrics.target")?;
        if self.run == RunKind::Geodesics {
            return Ok(());
        }
        self.target.validate("target")?;
        self.boundary.build(&self.target, "boundary")?;
        if let Some(b) = &self.boundary_start {
            b.build(&self.target, "boundary_start")?;
        }
        EnergyParams { p: self.params.p, eps: self.params.eps }.validate("params")?;
        if let Some(list) = &self.params.eps_list {
            if list.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                return Err(Error::param("params.eps_list", "entries must be finite and nonnegative"));
            }
        }
        if self.run == RunKind::Sweep && self.params.eps_list.is_none() {
            return Err(Error::param("params.eps_list", "required for sweep runs"));
        }
        if self.run == RunKind::Homotopy && !(self.params.eps > 0.0) {
            return Err(Error::param("params.eps", "continuation needs eps > 0"));
        }
        if self.grid.n < 8 {
            return Err(Error::param("grid.n", "must be at least 8"));
        }
        self.solver.validate("solver")?;
        Ok(())
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::new(self.metrics.domain, self.metrics.target)
    }

    pub fn energy(&self) -> EnergyParams {
        EnergyParams {
            p: self.params.p,
            eps: self.params.eps,
        }
    }
}

pub fn list_scenarios() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// Resolved configuration of a bundled scenario, with every default filled in.
pub fn describe(name: &str) -> Result<String> {
    Scenario::bundled(name)?.to_toml()
}

/// Everything a run produces; [`RunOutput::write`] turns it into files.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Value,
    pub field: Option<MapField>,
    /// Extra per-node columns for `fields.csv`.
    pub columns: Vec<(String, Vec<f64>)>,
    pub trace: Vec<Value>,
    pub success: bool,
}

impl RunOutput {
    /// Writes `report.json`, `fields.csv` (when a field exists) and
    /// `trace.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut report = serde_json::to_string_pretty(&self.report)?;
        report.push('\n');
        fs::write(dir.join("report.json"), report)?;
        if let Some(field) = &self.field {
            let cols: Vec<(&str, &[f64])> = self.columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
            field.write_csv(BufWriter::new(fs::File::create(dir.join("fields.csv"))?), &cols)?;
        }
        let mut out = BufWriter::new(fs::File::create(dir.join("trace.jsonl"))?);
        for line in &self.trace {
            writeln!(out, "{}", serde_json::to_string(line)?)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn field_columns(field: &MapField, params: &EnergyParams, m: &Metrics) -> Vec<(String, Vec<f64>)> {
    let d = DerivedFields::compute(field, params, m);
    vec![
        ("du_norm_sq".into(), d.du_norm_sq),
        ("jacobian".into(), d.jacobian),
        ("lambda".into(), d.lambda),
        ("t".into(), d.t),
        ("j_v".into(), d.j_v),
    ]
}

fn header(s: &Scenario) -> Value {
    json!({ "scenario": s.name, "run": s.run, "grid_n": s.grid.n })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut base, extra) {
        a.extend(b);
    }
    base
}

pub fn run_scenario(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    if s.run == RunKind::Geodesics {
        return run_geodesics(s);
    }
    let grid = Arc::new(build_disc_grid(s.grid.n)?);
    match s.run {
        RunKind::Solve => run_solve(s, &grid),
        RunKind::Homotopy => run_homotopy(s, &grid),
        RunKind::Certify => run_certify(s, &grid),
        RunKind::Sweep => run_sweep(s, &grid),
        RunKind::Geodesics => unreachable!(),
    }
}

fn run_solve(s: &Scenario, grid: &Arc<DomainGrid>) -> Result<RunOutput> {
    let m = s.metrics();
    let params = s.energy();
    let lp = s.boundary.build(&s.target, "boundary")?;
    let trace = lp.trace(grid);
    let sol = solve_dirichlet(grid, &m, &params, &trace, &s.solver)?;
    let d = DerivedFields::compute(&sol.field, &params, &m);
    let min_interior_j = grid.interior().map(|k| d.jacobian[k]).fold(f64::INFINITY, f64::min);
    let min_boundary_j = grid.boundary.iter().map(|&k| d.jacobian[k]).fold(f64::INFINITY, f64::min);
    let uniqueness = if s.solve.probe_uniqueness {
        let inits = standard_inits(grid, &trace, s.solve.seed)?;
        let cfg = SolveConfig {
            init: crate::solver::InitKind::Given,
            ..s.solver
        };
        Some(uniqueness_probe(&m, &params, &inits, &cfg, s.solve.uniqueness_tol)?)
    } else {
        None
    };
    let success = sol.converged && uniqueness.as_ref().is_none_or(|u| u.passed != Some(false));
    let report = merge(
        header(s),
        json!({
            "params": params,
            "converged": sol.converged,
            "iterations": sol.iterations,
            "newton_iterations": sol.newton_iterations,
            "final_grad_norm": sol.final_grad_norm,
            "grad_tol": sol.grad_tol,
            "final_energy": sol.final_energy,
            "min_interior_jacobian": min_interior_j,
            "min_boundary_jacobian": min_boundary_j,
            "smallness": smallness(&m, &trace)?,
            "uniqueness": uniqueness,
        }),
    );
    let trace_lines = sol
        .energy_history
        .iter()
        .enumerate()
        .map(|(i, e)| json!({ "iteration": i, "energy": e }))
        .collect();
    Ok(RunOutput {
        report,
        columns: field_columns(&sol.field, &params, &m),
        field: Some(sol.field),
        trace: trace_lines,
        success,
    })
}

fn run_homotopy(s: &Scenario, grid: &Arc<DomainGrid>) -> Result<RunOutput> {
    let m = s.metrics();
    let end = s.boundary.build(&s.target, "boundary")?;
    let start = match &s.boundary_start {
        Some(b) => b.build(&s.target, "boundary_start")?,
        None => BoundarySpec::single(BoundaryKind::ConstantSpeed).build(&s.target, "boundary_start")?,
    };
    let cfg = HomotopyConfig {
        solver: s.solver,
        ..s.homotopy
    };
    match continuation_run(grid, &m, s.params.p, s.params.eps, &start, &end, &cfg) {
        Ok(states) => {
            let bounds = uniform_bounds_report(&states)?;
            let last = states.last().expect("nonempty");
            let all_positive = states.iter().all(|st| st.min_interior_j > 0.0);
            let report = merge(
                header(s),
                json!({
                    "p_final": s.params.p,
                    "eps": s.params.eps,
                    "steps": cfg.steps,
                    "complete": true,
                    "all_min_interior_j_positive": all_positive,
                    "start": states[0].record(),
                    "uniform_bounds": bounds,
                }),
            );
            let params = EnergyParams { p: last.p_t, eps: s.params.eps };
            Ok(RunOutput {
                report,
                columns: field_columns(&last.solution.field, &params, &m),
                field: Some(last.solution.field.clone()),
                trace: states[1..].iter().map(|st| json!(st.record())).collect(),
                success: all_positive,
            })
        }
        Err(Error::Continuation { t, bisections, state }) => {
            let report = merge(
                header(s),
                json!({
                    "complete": false,
                    "failed_at": t,
                    "bisections": bisections,
                    "last_attempt": state.record(),
                }),
            );
            let params = EnergyParams { p: state.p_t, eps: s.params.eps };
            Ok(RunOutput {
                report,
                columns: field_columns(&state.solution.field, &params, &m),
                field: Some(state.solution.field.clone()),
                trace: vec![json!(state.record())],
                success: false,
            })
        }
        Err(e) => Err(e),
    }
}

fn run_certify(s: &Scenario, grid: &Arc<DomainGrid>) -> Result<RunOutput> {
    let m = s.metrics();
    let params = s.energy();
    let lp = s.boundary.build(&s.target, "boundary")?;
    let sol = solve_dirichlet(grid, &m, &params, &lp.trace(grid), &s.solver)?;
    let rep = certify(&sol.field, &params, &m, &s.target, &s.certify)?;
    let success = sol.converged && rep.passed.all;
    let report = merge(
        header(s),
        json!({
            "params": params,
            "converged": sol.converged,
            "iterations": sol.iterations,
            "certificate": rep,
        }),
    );
    Ok(RunOutput {
        report,
        columns: field_columns(&sol.field, &params, &m),
        field: Some(sol.field),
        trace: Vec::new(),
        success,
    })
}

fn run_sweep(s: &Scenario, grid: &Arc<DomainGrid>) -> Result<RunOutput> {
    let m = s.metrics();
    let lp = s.boundary.build(&s.target, "boundary")?;
    let eps_list = s.params.eps_list.clone().expect("validated");
    let cfg = SweepConfig {
        solver: s.solver,
        ..s.sweep.clone()
    };
    let rep = epsilon_sweep(grid, &m, s.params.p, &lp.trace(grid), &eps_list, &cfg)?;
    let success = rep.complete && rep.lp_decreasing && rep.jv_decreasing && rep.final_below_floor;
    let trace = rep.entries.iter().map(|e| json!(e)).collect();
    let report = merge(header(s), json!({ "sweep": rep }));
    Ok(RunOutput {
        report,
        field: None,
        columns: Vec::new(),
        trace,
        success,
    })
}

fn run_geodesics(s: &Scenario) -> Result<RunOutput> {
    let spec = &s.geodesics;
    let geo = Geodesics::new(s.metrics.target);
    let center = Complex64::new(spec.center[0], spec.center[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit_distance = geo.distance(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)).ok();
    let mut round_trip = 0.0f64;
    for _ in 0..spec.round_trips {
        let q = center + Complex64::from_polar(0.3 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let v = Complex64::from_polar(0.3 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let w = geo.log(q, geo.exp(q, v)?)?;
        round_trip = round_trip.max((w - v).norm());
    }
    let ball = GeodesicBall::new(&geo, center, spec.ball_radius, 64)?;
    let triangles = ball_convexity_check(&geo, &ball, spec.triangles, spec.seed, SmallRadius::default(), spec.tol)?;
    let contraction = Contraction::new(geo, center, spec.contraction_r, spec.contraction_r0, SmallRadius::default())?;
    let lipschitz = contraction.sample_lipschitz(spec.lipschitz_pairs, spec.contraction_r0, spec.seed)?;
    let (mut measured, mut increasing) = (0, 0);
    for _ in 0..spec.distance_pairs {
        let p = center + Complex64::from_polar(0.2 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let a = Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>());
        let b = Complex64::from_polar(1.0, 2.0 * PI * rng.random::<f64>());
        if let DistanceGrowth::Measured { strictly_increasing, .. } = increasing_distance_check(&geo, p, a, b, 0.5, 16)? {
            measured += 1;
            increasing += strictly_increasing as usize;
        }
    }
    let success = triangles.passed && lipschitz < 1.0 && increasing == measured && round_trip <= 1e-8;
    let report = merge(
        header(s),
        json!({
            "metric": s.metrics.target,
            "unit_distance": unit_distance,
            "exp_log_round_trip": round_trip,
            "triangles": triangles,
            "contraction_lipschitz": lipschitz,
            "distance_pairs_measured": measured,
            "distance_pairs_increasing": increasing,
            "passed": success,
        }),
    );
    Ok(RunOutput {
        report,
        field: None,
        columns: Vec::new(),
        trace: Vec::new(),
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_round_trip() {
        for name in list_scenarios() {
            let s = Scenario::bundled(name).unwrap();
            assert_eq!(s.name, name);
            let back = Scenario::parse(&describe(name).unwrap()).unwrap();
            assert_eq!(back, s, "{name}");
        }
        assert!(list_scenarios().contains(&"flat-identity"));
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(describe("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn validation_names_key() {
        let text = describe("flat-identity").unwrap().replace("p = 4.0", "p = -1.0");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("params.p"), "{err}");
        let text = describe("flat-identity").unwrap().replace("n = 32", "n = 4");
        assert!(Scenario::parse(&text).unwrap_err().to_string().contains("grid.n"));
    }

    #[test]
    fn nonconvex_polygon_rejected() {
        let mut s = Scenario::bundled("hexagon-sphere-certify").unwrap();
        s.target = TargetRegion::Polygon {
            vertices: vec![[0.5, -0.5], [0.5, 0.5], [0.05, 0.0], [-0.5, 0.5], [-0.5, -0.5]],
        };
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("target.vertices"), "{err}");
    }

    #[test]
    fn flat_identity_certifies() {
        let out = run_scenario(&Scenario::bundled("flat-identity").unwrap()).unwrap();
        assert!(out.success, "{}", out.report);
        assert_eq!(out.report["certificate"]["passed"]["all"], true);
    }
}
