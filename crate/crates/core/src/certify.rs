//! Numerical certificate for injectivity of a computed map: maximum
//! principles, the convex-composition operator, boundary and interior
//! Jacobians, superharmonicity of `−T^{−N}`, the minimum principle for `T`,
//! and the `ε → 0` sweep.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{subharmonicity_exponent_for, DerivedFields, EnergyParams, Metrics};
use crate::error::{Error, Result};
use crate::geodesic::Geodesics;
use crate::grid::{DomainGrid, MapField};
use crate::solver::{radial_extension, solve_dirichlet, solve_from, weighted_dirichlet, InitKind, SolveConfig};
use crate::target::TargetRegion;

/// Scale of the superharmonicity tolerance `c_tol·h`, from the flat `p = 2`
/// case where the continuous quantity is nonpositive.
pub const SUPERHARMONICITY_C_TOL: f64 = 1.0;

/// A convex function on the target chart whose composition with a solution
/// obeys a maximum principle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexGauge {
    /// Signed distance to the region boundary, negative inside.
    SignedDistance { target: TargetRegion },
    /// Chart distance to a center point.
    CenterDistance { center: [f64; 2] },
    /// `scale·|u − center|²`; a negative scale gives a concave control.
    Quadratic { center: [f64; 2], scale: f64 },
}

impl ConvexGauge {
    pub fn eval(&self, u: Complex64) -> f64 {
        match self {
            ConvexGauge::SignedDistance { target } => target.signed_distance(u),
            ConvexGauge::CenterDistance { center } => (u - Complex64::new(center[0], center[1])).norm(),
            ConvexGauge::Quadratic { center, scale } => {
                scale * (u - Complex64::new(center[0], center[1])).norm_sqr()
            }
        }
    }

    /// Largest `g(mid) − (g(a) + g(b))/2` over seeded geodesic segments with
    /// endpoints in `region` (positive means a convexity violation).
    pub fn midpoint_convexity(
        &self,
        geo: &Geodesics,
        region: &TargetRegion,
        samples: usize,
        seed: u64,
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = region.outer_radius();
        let pick = |rng: &mut ChaCha8Rng| loop {
            let q = Complex64::new(rng.random_range(-r..r), rng.random_range(-r..r));
            if region.contains(q) {
                break q;
            }
        };
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            let mid = geo.exp(a, 0.5 * geo.log(a, b)?)?;
            worst = worst.max(self.eval(mid) - 0.5 * (self.eval(a) + self.eval(b)));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaxPrinciple {
    pub boundary_sup: f64,
    pub interior_sup: f64,
    /// `interior_sup − boundary_sup`; nonpositive when the principle holds.
    pub margin: f64,
    pub passed: bool,
}

pub fn max_principle_check(field: &MapField, gauge: &ConvexGauge, tol: f64) -> MaxPrinciple {
    let g = &field.grid;
    let vals: Vec<f64> = field.values.iter().map(|&u| gauge.eval(u)).collect();
    let boundary_sup = g.boundary.iter().map(|&k| vals[k]).fold(f64::NEG_INFINITY, f64::max);
    let interior_sup = g.interior().map(|k| vals[k]).fold(f64::NEG_INFINITY, f64::max);
    MaxPrinciple {
        boundary_sup,
        interior_sup,
        margin: interior_sup - boundary_sup,
        passed: interior_sup <= boundary_sup + tol,
    }
}

/// `L G = ½ div(λ∇G)` on the 5-point stencil with face-averaged `λ`.
fn composition_operator(grid: &DomainGrid, lambda: &[f64], f: &[f64], k: usize) -> Option<f64> {
    let nb = grid.full_stencil[k]?;
    let h2 = grid.h * grid.h;
    Some(
        nb.iter()
            .map(|&j| 0.5 * (lambda[j] + lambda[k]) * (f[j] - f[k]))
            .sum::<f64>()
            / (2.0 * h2),
    )
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvexComposition {
    /// Smallest discrete `L(g∘u)` over tested nodes.
    pub worst: f64,
    pub worst_node: usize,
    pub tested: usize,
    pub passed: bool,
}

/// Evaluates `L(g∘u)` at full-stencil nodes with `|z| ≤ 1 − buffer` whose
/// image stays at least `kink_band` away from the gauge's zero level.
pub fn convex_composition_check(
    field: &MapField,
    params: &EnergyParams,
    m: &Metrics,
    gauge: &ConvexGauge,
    buffer: f64,
    kink_band: f64,
    tol: f64,
) -> ConvexComposition {
    let g = &field.grid;
    let d = DerivedFields::compute(field, params, m);
    let gu: Vec<f64> = field.values.iter().map(|&u| gauge.eval(u)).collect();
    let mut worst = f64::INFINITY;
    let mut worst_node = 0;
    let mut tested = 0;
    for k in tested_nodes(g, buffer) {
        let near_kink = matches!(gauge, ConvexGauge::SignedDistance { .. }) && gu[k].abs() < kink_band;
        if near_kink {
            continue;
        }
        if let Some(v) = composition_operator(g, &d.lambda, &gu, k) {
            if v < worst {
                worst = v;
                worst_node = k;
            }
            tested += 1;
        }
    }
    ConvexComposition {
        worst,
        worst_node,
        tested,
        passed: worst >= -tol,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryJacobian {
    pub min: f64,
    pub max: f64,
    pub positively_oriented: bool,
}

/// Jacobian at the boundary ring from one-sided stencils.
pub fn boundary_jacobian_check(field: &MapField, m: &Metrics) -> BoundaryJacobian {
    let g = &field.grid;
    let (uz, uzb) = field.wirtinger();
    let vals = g
        .boundary
        .iter()
        .map(|&k| m.ratio(g.nodes[k], field.values[k]) * (uz[k].norm_sqr() - uzb[k].norm_sqr()));
    let (min, max) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    BoundaryJacobian {
        min,
        max,
        positively_oriented: min > 0.0,
    }
}

/// Curvature signs required by the superharmonicity statement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvatureHypothesis {
    pub domain_max_curvature: f64,
    pub image_min_curvature: f64,
    pub met: bool,
}

pub fn curvature_hypothesis(field: &MapField, m: &Metrics) -> Result<CurvatureHypothesis> {
    let g = &field.grid;
    let mut kd = f64::NEG_INFINITY;
    let mut ki = f64::INFINITY;
    for k in 0..g.len() {
        kd = kd.max(m.sigma.gauss_curvature(g.nodes[k])?);
        ki = ki.min(m.rho.gauss_curvature(field.values[k])?);
    }
    Ok(CurvatureHypothesis {
        domain_max_curvature: kd,
        image_min_curvature: ki,
        met: kd <= 1e-12 && ki >= -1e-12,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Superharmonicity {
    pub exponent: f64,
    /// Largest 5-point Laplacian of `−T^{−N}`.
    pub worst_laplacian: f64,
    /// Node where `worst_laplacian` occurs.
    pub worst_node: usize,
    /// Largest `(T ΔT − (N+1)|∇T|²)/(4σ)`.
    pub worst_combination: f64,
    pub tested: usize,
    pub tolerance: f64,
    pub hypothesis: CurvatureHypothesis,
    pub passed: bool,
}

/// Full-stencil nodes with `|z| ≤ 1 − buffer`.
pub fn tested_nodes(grid: &DomainGrid, buffer: f64) -> Vec<usize> {
    grid.full_stencil_nodes()
        .filter(|&k| grid.nodes[k].norm() <= 1.0 - buffer)
        .collect()
}

pub fn superharmonicity_check(
    field: &MapField,
    params: &EnergyParams,
    m: &Metrics,
    exponent: f64,
    buffer: f64,
    tolerance: f64,
) -> Result<Superharmonicity> {
    let g = &field.grid;
    let d = DerivedFields::compute(field, params, m);
    if let Some(k) = g.interior().find(|&k| !(d.jacobian[k] > 0.0)) {
        return Err(Error::NonPositiveJacobian {
            node: k,
            value: d.jacobian[k],
        });
    }
    let hypothesis = curvature_hypothesis(field, m)?;
    let neg_pow: Vec<f64> = d.t.iter().map(|&t| if t > 0.0 { -t.powf(-exponent) } else { f64::NAN }).collect();
    let mut worst_laplacian = f64::NEG_INFINITY;
    let mut worst_node = 0;
    let mut worst_combination = f64::NEG_INFINITY;
    let nodes = tested_nodes(g, buffer);
    for &k in &nodes {
        let Some(lap) = g.laplacian_at(&neg_pow, k) else { continue };
        if lap > worst_laplacian {
            worst_laplacian = lap;
            worst_node = k;
        }
        let lt = g.laplacian_at(&d.t, k).expect("full stencil");
        let (tx, ty) = g.gradient_at(&d.t, k);
        let comb = (d.t[k] * lt - (exponent + 1.0) * (tx * tx + ty * ty)) / (4.0 * m.sigma.eval(g.nodes[k]));
        worst_combination = worst_combination.max(comb);
    }
    Ok(Superharmonicity {
        exponent,
        worst_laplacian,
        worst_node,
        worst_combination,
        tested: nodes.len(),
        tolerance,
        hypothesis,
        passed: worst_laplacian <= tolerance,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MinimumPrincipleLevel {
    pub radius: f64,
    pub inf_interior: f64,
    pub inf_boundary: f64,
    /// `inf_K T − inf_∂K T`.
    pub margin: f64,
}

/// Node sets `K = {|z| ≤ r}`, with `∂K` the nodes of `K` sharing a mesh edge
/// with a node outside `K`.
pub fn minimum_principle_check(
    field: &MapField,
    params: &EnergyParams,
    m: &Metrics,
    radii: &[f64],
) -> Vec<MinimumPrincipleLevel> {
    let g = &field.grid;
    let t = DerivedFields::compute(field, params, m).t;
    radii
        .iter()
        .map(|&r| {
            let inside: Vec<bool> = g.nodes.iter().map(|z| z.norm() <= r).collect();
            let mut rim = vec![false; g.len()];
            for tri in &g.triangles {
                for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                    if inside[a] && !inside[b] {
                        rim[a] = true;
                    }
                    if inside[b] && !inside[a] {
                        rim[b] = true;
                    }
                }
            }
            if r >= 1.0 {
                for &k in &g.boundary {
                    rim[k] = true;
                }
            }
            let inf_interior = (0..g.len()).filter(|&k| inside[k]).map(|k| t[k]).fold(f64::INFINITY, f64::min);
            let inf_boundary = (0..g.len()).filter(|&k| rim[k]).map(|k| t[k]).fold(f64::INFINITY, f64::min);
            MinimumPrincipleLevel {
                radius: r,
                inf_interior,
                inf_boundary,
                margin: inf_interior - inf_boundary,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    /// `None` derives the exponent from the energy.
    pub exponent: Option<f64>,
    pub c_tol: f64,
    pub interior_buffer: f64,
    pub min_principle_radii: Vec<f64>,
    /// Relative to `sup T`.
    pub min_principle_tol: f64,
    pub image_tol: f64,
    /// Geodesic segments sampled to confirm the gauge is convex for the
    /// target metric.
    pub gauge_samples: usize,
    pub gauge_seed: u64,
    pub gauge_tol: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            exponent: None,
            c_tol: SUPERHARMONICITY_C_TOL,
            interior_buffer: 0.15,
            min_principle_radii: vec![0.9, 0.7, 0.5, 0.3],
            min_principle_tol: 1e-3,
            image_tol: 1e-9,
            gauge_samples: 200,
            gauge_seed: 3,
            gauge_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFlags {
    pub image_in_target: bool,
    pub boundary_jacobian: bool,
    pub interior_jacobian: bool,
    /// `None` when the curvature hypothesis fails or `J ≤ 0` somewhere.
    pub superharmonicity: Option<bool>,
    pub minimum_principle: bool,
    /// `None` when the gauge fails the sampled geodesic convexity test.
    pub convex_composition: Option<bool>,
    pub all: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Largest signed distance from the image of a node to the target boundary.
    pub image_in_target_margin: f64,
    pub max_principle: MaxPrinciple,
    pub boundary_jacobian_min: f64,
    pub interior_jacobian_min: f64,
    pub superharmonicity: Option<Superharmonicity>,
    pub superharmonicity_worst: Option<f64>,
    pub minimum_principle: Vec<MinimumPrincipleLevel>,
    pub minimum_principle_margin: f64,
    pub convex_composition_worst: f64,
    /// Largest sampled midpoint excess of the gauge along target geodesics.
    pub gauge_convexity_excess: f64,
    pub passed: CertificateFlags,
    pub notes: Vec<String>,
}

pub fn certify(
    field: &MapField,
    params: &EnergyParams,
    m: &Metrics,
    target: &TargetRegion,
    config: &CertifyConfig,
) -> Result<CertificateReport> {
    let g = &field.grid;
    let gauge = ConvexGauge::SignedDistance { target: target.clone() };
    let mut notes = Vec::new();
    let image_margin = field.values.iter().map(|&u| target.signed_distance(u)).fold(f64::NEG_INFINITY, f64::max);
    let max_principle = max_principle_check(field, &gauge, config.image_tol);
    let bj = boundary_jacobian_check(field, m);
    let d = DerivedFields::compute(field, params, m);
    let interior_jacobian_min = g.interior().map(|k| d.jacobian[k]).fold(f64::INFINITY, f64::min);
    let exponent = match config.exponent {
        Some(n) => n,
        None => subharmonicity_exponent_for(params)?,
    };
    let tol = config.c_tol * g.h;
    let sh = match superharmonicity_check(field, params, m, exponent, config.interior_buffer, tol) {
        Ok(s) => Some(s),
        Err(Error::NonPositiveJacobian { node, value }) => {
            notes.push(format!("superharmonicity not applicable: J = {value:e} at node {node}"));
            None
        }
        Err(e) => return Err(e),
    };
    let sh_flag = sh.as_ref().and_then(|s| {
        if s.hypothesis.met {
            Some(s.passed)
        } else {
            notes.push("superharmonicity hypothesis unmet (curvature signs)".into());
            None
        }
    });
    let levels = minimum_principle_check(field, params, m, &config.min_principle_radii);
    let t_sup = d.t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mp_margin = levels.iter().map(|l| l.margin).fold(f64::INFINITY, f64::min);
    let cc = convex_composition_check(field, params, m, &gauge, config.interior_buffer, 2.0 * g.h, tol);
    let excess = gauge.midpoint_convexity(&Geodesics::new(m.rho), target, config.gauge_samples, config.gauge_seed)?;
    let cc_flag = if excess <= config.gauge_tol {
        Some(cc.passed)
    } else {
        notes.push(format!("convex composition not applicable: gauge midpoint excess {excess:e} along target geodesics"));
        None
    };
    let flags = CertificateFlags {
        image_in_target: image_margin <= config.image_tol && max_principle.passed,
        boundary_jacobian: bj.min > 0.0,
        interior_jacobian: interior_jacobian_min > 0.0,
        superharmonicity: sh_flag,
        minimum_principle: mp_margin >= -config.min_principle_tol * t_sup.abs(),
        convex_composition: cc_flag,
        all: false,
    };
    let all = flags.image_in_target
        && flags.boundary_jacobian
        && flags.interior_jacobian
        && flags.superharmonicity.unwrap_or(true)
        && flags.minimum_principle
        && flags.convex_composition.unwrap_or(true);
    Ok(CertificateReport {
        image_in_target_margin: image_margin,
        max_principle,
        boundary_jacobian_min: bj.min,
        interior_jacobian_min,
        superharmonicity_worst: sh.as_ref().map(|s| s.worst_laplacian),
        superharmonicity: sh,
        minimum_principle: levels,
        minimum_principle_margin: mp_margin,
        convex_composition_worst: cc.worst,
        gauge_convexity_excess: excess,
        passed: CertificateFlags { all, ..flags },
        notes,
    })
}

/// `(∫ |D(u − v)|^p dV)^{1/p}` with `|Dw|² = (ρ(u)/σ)(|w_z|² + |w_z̄|²)` on P1
/// triangles.
pub fn gradient_lp_distance(u: &MapField, v: &MapField, p: f64, m: &Metrics) -> f64 {
    let g = &u.grid;
    let mut acc = 0.0;
    for (t, tri) in g.triangles.iter().enumerate() {
        let gr = &g.tri_grad[t];
        let (mut dx, mut dy) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for i in 0..3 {
            let w = u.values[tri[i]] - v.values[tri[i]];
            dx += w * gr[i][0];
            dy += w * gr[i][1];
        }
        let zc = (g.nodes[tri[0]] + g.nodes[tri[1]] + g.nodes[tri[2]]) / 3.0;
        let uc = (u.values[tri[0]] + u.values[tri[1]] + u.values[tri[2]]) / 3.0;
        let sigma = m.sigma.eval(zc);
        let d2 = m.rho.eval(uc) / sigma * 0.5 * (dx.norm_sqr() + dy.norm_sqr());
        acc += g.tri_area[t] * sigma * d2.powf(0.5 * p);
    }
    acc.powf(1.0 / p)
}

/// Gap between the two gradient reconstructions of one field: P1 triangle
/// gradients against the nodal stencil gradients averaged over each
/// triangle, in the same norm as [`gradient_lp_distance`].
pub fn gradient_reconstruction_gap(u: &MapField, p: f64, m: &Metrics) -> f64 {
    let g = &u.grid;
    let nodal: Vec<(Complex64, Complex64)> = (0..g.len()).map(|k| g.gradient_at(&u.values, k)).collect();
    let mut acc = 0.0;
    for (t, tri) in g.triangles.iter().enumerate() {
        let gr = &g.tri_grad[t];
        let (mut dx, mut dy) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for i in 0..3 {
            dx += u.values[tri[i]] * gr[i][0];
            dy += u.values[tri[i]] * gr[i][1];
            dx -= nodal[tri[i]].0 / 3.0;
            dy -= nodal[tri[i]].1 / 3.0;
        }
        let zc = (g.nodes[tri[0]] + g.nodes[tri[1]] + g.nodes[tri[2]]) / 3.0;
        let uc = (u.values[tri[0]] + u.values[tri[1]] + u.values[tri[2]]) / 3.0;
        let sigma = m.sigma.eval(zc);
        let d2 = m.rho.eval(uc) / sigma * 0.5 * (dx.norm_sqr() + dy.norm_sqr());
        acc += g.tri_area[t] * sigma * d2.powf(0.5 * p);
    }
    acc.powf(1.0 / p)
}

/// `∫_{B_{R/2}} |DV|² dV` and `R^{−2} ∫_{B_R} |V − V̄_{B_R}|² dV`.
fn caccioppoli_v(grid: &DomainGrid, v: &[[Complex64; 2]], radius: f64) -> (f64, f64) {
    let mut lhs = 0.0;
    let (mut mass, mut mean) = (0.0, [Complex64::new(0.0, 0.0); 2]);
    let c0: Vec<Complex64> = v.iter().map(|x| x[0]).collect();
    let c1: Vec<Complex64> = v.iter().map(|x| x[1]).collect();
    for k in 0..grid.len() {
        let r = grid.nodes[k].norm();
        let w = grid.weights[k];
        if r <= 0.5 * radius {
            let (ax, ay) = grid.gradient_at(&c0, k);
            let (bx, by) = grid.gradient_at(&c1, k);
            lhs += w * (ax.norm_sqr() + ay.norm_sqr() + bx.norm_sqr() + by.norm_sqr());
        }
        if r <= radius {
            mass += w;
            mean[0] += w * v[k][0];
            mean[1] += w * v[k][1];
        }
    }
    mean[0] /= mass;
    mean[1] /= mass;
    let mut rhs = 0.0;
    for k in 0..grid.len() {
        if grid.nodes[k].norm() <= radius {
            rhs += grid.weights[k] * ((v[k][0] - mean[0]).norm_sqr() + (v[k][1] - mean[1]).norm_sqr());
        }
    }
    (lhs, rhs / (radius * radius))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub converged: bool,
    pub iterations: usize,
    pub energy: f64,
    /// `‖Du^ε − Du⁰‖_{L^p}`.
    pub lp_distance: f64,
    /// Sup over `|z| ≤ compact_radius` of `|J_{V_ε} − J_{V_0}|`, without and
    /// with the `ρ/σ` factor.
    pub jv_sup: f64,
    pub jv_scaled_sup: f64,
    pub caccioppoli_v_lhs: f64,
    pub caccioppoli_v_rhs: f64,
    /// Weighted Dirichlet integral of `u^ε` over that of the cone competitor.
    pub caccioppoli_ratio: f64,
    /// Energy of the competitor over its weighted Dirichlet integral; by
    /// minimality this bounds `caccioppoli_ratio`.
    pub caccioppoli_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub p: f64,
    pub reference_converged: bool,
    pub entries: Vec<SweepEntry>,
    /// Gradient reconstruction gap of the `ε = 0` reference.
    pub noise_floor: f64,
    /// `L^p` distance between `ε = 0` solves from two different starts.
    pub solver_noise: f64,
    pub lp_decreasing: bool,
    pub jv_decreasing: bool,
    pub final_below_floor: bool,
    pub complete: bool,
    /// The `ε = 0` minimizer.
    #[serde(skip)]
    pub reference_field: Option<MapField>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub compact_radius: f64,
    pub caccioppoli_radius: f64,
    /// Allowed relative increase between consecutive entries.
    pub slack: f64,
    pub floor_factor: f64,
    pub jobs: usize,
    pub solver: SolveConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            compact_radius: 0.7,
            caccioppoli_radius: 0.8,
            slack: 0.1,
            floor_factor: 3.0,
            jobs: 1,
            solver: SolveConfig {
                grad_tol: Some(1e-12),
                ..SolveConfig::default()
            },
        }
    }
}

fn decreasing(vals: &[f64], slack: f64) -> bool {
    vals.windows(2).all(|w| w[1] < w[0] * (1.0 + slack) || w[0] == 0.0 && w[1] == 0.0)
}

/// Solves at every `ε` of `eps_list` (which must contain 0) and compares each
/// solution with the `ε = 0` reference.
pub fn epsilon_sweep(
    grid: &Arc<DomainGrid>,
    m: &Metrics,
    p: f64,
    boundary: &[Complex64],
    eps_list: &[f64],
    config: &SweepConfig,
) -> Result<SweepReport> {
    EnergyParams::new(p, 0.0)?;
    if !eps_list.contains(&0.0) {
        return Err(Error::param("params.eps_list", "must contain 0"));
    }
    let mut eps_sorted: Vec<f64> = eps_list.iter().copied().filter(|&e| e > 0.0).collect();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    for &e in &eps_sorted {
        EnergyParams::new(p, e).map_err(|_| Error::param("params.eps_list", format!("invalid eps {e}")))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut all_eps = vec![0.0];
    all_eps.extend(&eps_sorted);
    let solves: Vec<Result<crate::solver::SolveResult>> = pool.install(|| {
        all_eps
            .par_iter()
            .map(|&eps| solve_dirichlet(grid, m, &EnergyParams { p, eps }, boundary, &config.solver))
            .collect()
    });
    let mut solves = solves.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = solves.remove(0);
    let zero = EnergyParams { p, eps: 0.0 };
    let alt = solve_from(
        radial_extension(grid, boundary)?,
        m,
        &zero,
        &SolveConfig {
            init: InitKind::Given,
            ..config.solver
        },
    )?;
    let solver_noise = gradient_lp_distance(&alt.field, &reference.field, p, m);
    let noise_floor = gradient_reconstruction_gap(&reference.field, p, m);
    let d0 = DerivedFields::compute(&reference.field, &zero, m);
    let competitor = radial_extension(grid, boundary)?;
    let compact: Vec<usize> = (0..grid.len()).filter(|&k| grid.nodes[k].norm() <= config.compact_radius).collect();
    let mut entries = Vec::with_capacity(eps_sorted.len());
    for (eps, sol) in eps_sorted.iter().zip(&solves) {
        let params = EnergyParams { p, eps: *eps };
        let d = DerivedFields::compute(&sol.field, &params, m);
        let jv_sup = compact.iter().map(|&k| (d.j_v[k] - d0.j_v[k]).abs()).fold(0.0, f64::max);
        let jv_scaled_sup = compact
            .iter()
            .map(|&k| (d.j_v_scaled[k] - d0.j_v_scaled[k]).abs())
            .fold(0.0, f64::max);
        let (cl, cr) = caccioppoli_v(grid, &d.v, config.caccioppoli_radius);
        let rhs0 = weighted_dirichlet(&competitor, &params, m);
        entries.push(SweepEntry {
            eps: *eps,
            converged: sol.converged,
            iterations: sol.iterations,
            energy: sol.final_energy,
            lp_distance: gradient_lp_distance(&sol.field, &reference.field, p, m),
            jv_sup,
            jv_scaled_sup,
            caccioppoli_v_lhs: cl,
            caccioppoli_v_rhs: cr,
            caccioppoli_ratio: weighted_dirichlet(&sol.field, &params, m) / rhs0,
            caccioppoli_bound: crate::energy::energy_value(&competitor, &params, m) / rhs0,
        });
    }
    let lp: Vec<f64> = entries.iter().map(|e| e.lp_distance).collect();
    let jv: Vec<f64> = entries.iter().map(|e| e.jv_sup).collect();
    let final_below_floor = lp.last().is_none_or(|&v| v <= config.floor_factor * noise_floor);
    let complete = reference.converged && entries.iter().all(|e| e.converged);
    Ok(SweepReport {
        p,
        reference_converged: reference.converged,
        lp_decreasing: decreasing(&lp, config.slack),
        jv_decreasing: decreasing(&jv, config.slack),
        final_below_floor,
        noise_floor,
        solver_noise,
        entries,
        complete,
        reference_field: Some(reference.field),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_disc_grid;
    use crate::metric::ConformalMetric;
    use crate::solver::harmonic_extension;
    use crate::target::{BoundaryKind, BoundaryLoop};
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Arc<DomainGrid> {
        Arc::new(build_disc_grid(n).unwrap())
    }

    fn disc_gauge() -> ConvexGauge {
        ConvexGauge::SignedDistance {
            target: TargetRegion::unit_disc(),
        }
    }

    #[test]
    fn max_principle_examples() {
        let g = grid(16);
        let id = MapField::from_fn(&g, |z| z);
        let r = max_principle_check(&id, &disc_gauge(), 1e-12);
        assert_abs_diff_eq!(r.boundary_sup, 0.0, epsilon = 1e-15);
        assert!(r.interior_sup < 0.0 && r.passed);
        let b: Vec<Complex64> = g
            .boundary_angle
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t + 0.3 * t.sin()))
            .collect();
        let u = harmonic_extension(&g, &b).unwrap();
        let r = max_principle_check(&u, &disc_gauge(), 1e-12);
        assert!(r.interior_sup < 0.0);
        let c = Complex64::new(0.2, -0.1);
        let u = harmonic_extension(&g, &vec![c; g.boundary.len()]).unwrap();
        assert!(u.values.iter().all(|v| (v - c).norm() < 1e-12));
        let r = max_principle_check(&u, &disc_gauge(), 1e-12);
        assert_abs_diff_eq!(r.margin, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn convex_composition_examples() {
        let g = grid(24);
        let p2 = EnergyParams::new(2.0, 0.0).unwrap();
        let b: Vec<Complex64> = g.boundary_angle.iter().map(|&t| Complex64::new(t.cos(), 0.5 * (2.0 * t).sin())).collect();
        let u = harmonic_extension(&g, &b).unwrap();
        let affine = ConvexGauge::Quadratic { center: [0.0, 0.0], scale: 0.0 };
        let r = convex_composition_check(&u, &p2, &Metrics::flat(), &affine, 0.0, 0.0, 1e-12);
        assert_abs_diff_eq!(r.worst, 0.0, epsilon = 1e-12);
        let id = MapField::from_fn(&g, |z| z);
        let sq = ConvexGauge::Quadratic { center: [0.0, 0.0], scale: 1.0 };
        let r = convex_composition_check(&id, &p2, &Metrics::flat(), &sq, 0.0, 0.0, 1e-12);
        // L|z|² = Δ|z|²/2 = 2
        assert_abs_diff_eq!(r.worst, 2.0, epsilon = 1e-9);
        let neg = ConvexGauge::Quadratic { center: [0.0, 0.0], scale: -1.0 };
        assert!(!convex_composition_check(&id, &p2, &Metrics::flat(), &neg, 0.0, 0.0, 1e-6).passed);
    }

    #[test]
    fn boundary_jacobian_examples() {
        let g = grid(16);
        let id = MapField::from_fn(&g, |z| z);
        let r = boundary_jacobian_check(&id, &Metrics::flat());
        assert_abs_diff_eq!(r.min, 1.0, epsilon = 1e-10);
        let r = boundary_jacobian_check(&id.conj(), &Metrics::flat());
        assert_abs_diff_eq!(r.max, -1.0, epsilon = 1e-10);
        assert!(!r.positively_oriented);
    }

    #[test]
    fn superharmonicity_examples() {
        let g = grid(24);
        let id = MapField::from_fn(&g, |z| z);
        for p in [2.0, 3.0, 4.0] {
            let r = superharmonicity_check(&id, &EnergyParams::new(p, 0.0).unwrap(), &Metrics::flat(), 2.0, 0.0, 0.0).unwrap();
            assert_abs_diff_eq!(r.worst_laplacian, 0.0, epsilon = 1e-8);
        }
        let flip = id.conj();
        assert!(matches!(
            superharmonicity_check(&flip, &EnergyParams::new(2.0, 0.0).unwrap(), &Metrics::flat(), 1.0, 0.0, 0.0),
            Err(Error::NonPositiveJacobian { .. })
        ));
        let m = Metrics::new(ConformalMetric::Flat, ConformalMetric::hyperbolic());
        let small = MapField::from_fn(&g, |z| 0.3 * z);
        let r = superharmonicity_check(&small, &EnergyParams::new(2.0, 0.0).unwrap(), &m, 1.0, 0.0, 0.0).unwrap();
        assert!(!r.hypothesis.met);
    }

    #[test]
    fn minimum_principle_examples() {
        let g = grid(16);
        let id = MapField::from_fn(&g, |z| z);
        let levels = minimum_principle_check(&id, &EnergyParams::new(4.0, 0.0).unwrap(), &Metrics::flat(), &[0.9, 0.5]);
        for l in levels {
            assert_abs_diff_eq!(l.margin, 0.0, epsilon = 1e-9);
        }
        let c = MapField::from_fn(&g, |z| 2.0 * z + 0.5 * z.conj());
        let levels = minimum_principle_check(&c, &EnergyParams::new(3.0, 0.1).unwrap(), &Metrics::flat(), &[0.6]);
        assert_abs_diff_eq!(levels[0].margin, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn identity_certificate_passes() {
        let g = grid(24);
        let id = MapField::from_fn(&g, |z| z);
        let rep = certify(
            &id,
            &EnergyParams::new(3.0, 0.0).unwrap(),
            &Metrics::flat(),
            &TargetRegion::unit_disc(),
            &CertifyConfig::default(),
        )
        .unwrap();
        assert!(rep.passed.all, "{rep:?}");
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("image_in_target_margin").is_some());
    }

    #[test]
    fn gauge_midpoint_convexity() {
        let geo = Geodesics::new(ConformalMetric::Flat);
        let e = TargetRegion::Ellipse { a: 1.0, b: 0.6 };
        let g = ConvexGauge::SignedDistance { target: e.clone() };
        assert!(g.midpoint_convexity(&geo, &e, 200, 1).unwrap() <= 1e-12);
        let neg = ConvexGauge::Quadratic { center: [0.0, 0.0], scale: -1.0 };
        assert!(neg.midpoint_convexity(&geo, &e, 50, 1).unwrap() > 0.0);
    }

    #[test]
    fn identity_sweep_is_trivial() {
        let g = grid(16);
        let lp = BoundaryLoop::new(TargetRegion::unit_disc(), BoundaryKind::ConstantSpeed).unwrap();
        let r = epsilon_sweep(&g, &Metrics::flat(), 4.0, &lp.trace(&g), &[0.4, 0.1, 0.0], &SweepConfig::default()).unwrap();
        assert_eq!(r.entries.len(), 2);
        for e in &r.entries {
            assert!(e.lp_distance < 1e-8, "{e:?}");
        }
        let r = epsilon_sweep(&g, &Metrics::flat(), 4.0, &lp.trace(&g), &[0.0], &SweepConfig::default()).unwrap();
        assert!(r.entries.is_empty());
        assert!(epsilon_sweep(&g, &Metrics::flat(), 4.0, &lp.trace(&g), &[0.1], &SweepConfig::default()).is_err());
    }
}
