//! Continuation in `t ∈ [0, 1]`: the boundary parametrization moves from
//! `φ⁰` to `φ¹` while the exponent moves from 2 to `p`, with the Jacobian
//! tracked along the way.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{DerivedFields, EnergyParams, Metrics};
use crate::error::{Error, Result};
use crate::grid::{DomainGrid, MapField};
use crate::solver::{harmonic_extension, solve_dirichlet, solve_from, SolveConfig, SolveResult};
use crate::target::{boundary_homotopy, BoundaryLoop};

/// `p_t = 2(1−t) + p t`.
pub fn exponent_path(p: f64, t: f64) -> f64 {
    2.0 * (1.0 - t) + p * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomotopyConfig {
    pub steps: usize,
    pub bisection_cap: usize,
    /// Keep the boundary at `φ¹` and move the exponent only.
    pub exponent_only: bool,
    pub holder_beta: f64,
    pub holder_pairs: usize,
    pub seed: u64,
    pub solver: SolveConfig,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        HomotopyConfig {
            steps: 16,
            bisection_cap: 6,
            exponent_only: false,
            holder_beta: 0.5,
            holder_pairs: 4000,
            seed: 7,
            solver: SolveConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HomotopyState {
    pub t: f64,
    pub p_t: f64,
    pub boundary: BoundaryLoop,
    pub solution: SolveResult,
    pub min_interior_j: f64,
    pub min_boundary_j: f64,
    /// Smallest Jacobian of the piecewise-linear map over triangles.
    pub min_triangle_j: f64,
    pub holder_proxy: f64,
    pub gradient_holder_proxy: f64,
    /// Bisections spent reaching this state from the previous one.
    pub bisections: usize,
}

/// One line of the continuation trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub p_t: f64,
    pub energy: f64,
    #[serde(rename = "minInteriorJ")]
    pub min_interior_j: f64,
    #[serde(rename = "minBoundaryJ")]
    pub min_boundary_j: f64,
    pub iterations: usize,
}

impl HomotopyState {
    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            t: self.t,
            p_t: self.p_t,
            energy: self.solution.final_energy,
            min_interior_j: self.min_interior_j,
            min_boundary_j: self.min_boundary_j,
            iterations: self.solution.iterations,
        }
    }
}

/// Largest `|f(a) − f(b)| / |a − b|^β` over seeded random node pairs.
pub fn holder_quotient<T: Copy>(
    grid: &DomainGrid,
    f: &[T],
    dist: impl Fn(T, T) -> f64,
    beta: f64,
    pairs: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let d = (grid.nodes[a] - grid.nodes[b]).norm();
        if d > 0.0 {
            worst = worst.max(dist(f[a], f[b]) / d.powf(beta));
        }
    }
    worst
}

/// Smallest Jacobian `(ρ/σ)·det Du` of the piecewise-linear map.
pub fn min_triangle_jacobian(field: &MapField, m: &Metrics) -> f64 {
    let g = &field.grid;
    let u = &field.values;
    let mut worst = f64::INFINITY;
    for (t, tri) in g.triangles.iter().enumerate() {
        let gr = &g.tri_grad[t];
        let (mut ux, mut uy) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for i in 0..3 {
            ux += u[tri[i]] * gr[i][0];
            uy += u[tri[i]] * gr[i][1];
        }
        let zc = (g.nodes[tri[0]] + g.nodes[tri[1]] + g.nodes[tri[2]]) / 3.0;
        let uc = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        worst = worst.min(m.ratio(zc, uc) * (ux.re * uy.im - ux.im * uy.re));
    }
    worst
}

fn build_state(
    t: f64,
    p_t: f64,
    boundary: BoundaryLoop,
    solution: SolveResult,
    eps: f64,
    m: &Metrics,
    config: &HomotopyConfig,
    bisections: usize,
) -> HomotopyState {
    let field = &solution.field;
    let g = &field.grid;
    let params = EnergyParams { p: p_t, eps };
    let d = DerivedFields::compute(field, &params, m);
    let min_interior_j = g.interior().map(|k| d.jacobian[k]).fold(f64::INFINITY, f64::min);
    let min_boundary_j = g.boundary.iter().map(|&k| d.jacobian[k]).fold(f64::INFINITY, f64::min);
    let (uz, uzb) = field.wirtinger();
    let du: Vec<[Complex64; 2]> = uz.into_iter().zip(uzb).map(|(a, b)| [a, b]).collect();
    let holder_proxy = holder_quotient(
        g,
        &field.values,
        |a, b| (a - b).norm(),
        config.holder_beta,
        config.holder_pairs,
        config.seed,
    );
    let gradient_holder_proxy = holder_quotient(
        g,
        &du,
        |a, b| ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt(),
        config.holder_beta,
        config.holder_pairs,
        config.seed,
    );
    HomotopyState {
        t,
        p_t,
        boundary,
        min_triangle_j: min_triangle_jacobian(field, m),
        solution,
        min_interior_j,
        min_boundary_j,
        holder_proxy,
        gradient_holder_proxy,
        bisections,
    }
}

/// Runs the continuation and returns the accepted states, `t = 0` first.
///
/// The start is the `p = 2` solve with boundary `φ⁰`, whose Jacobian is
/// checked rather than assumed. Each step warm-starts from the previous field
/// plus the harmonic extension of the boundary change, and a step whose
/// solve fails or loses `J > 0` is halved up to `bisection_cap` times.
#[allow(clippy::too_many_arguments)]
pub fn continuation_run(
    grid: &Arc<DomainGrid>,
    m: &Metrics,
    p_final: f64,
    eps: f64,
    phi_start: &BoundaryLoop,
    phi_end: &BoundaryLoop,
    config: &HomotopyConfig,
) -> Result<Vec<HomotopyState>> {
    if !(eps > 0.0) {
        return Err(Error::param("params.eps", "continuation needs eps > 0"));
    }
    EnergyParams::new(p_final, eps)?;
    if config.steps == 0 {
        return Err(Error::param("homotopy.steps", "must be positive"));
    }
    let loop_at = |t: f64| -> Result<BoundaryLoop> {
        if config.exponent_only {
            Ok(phi_end.clone())
        } else {
            boundary_homotopy(phi_start, phi_end, t)
        }
    };
    let start_loop = loop_at(0.0)?;
    let start = solve_dirichlet(
        grid,
        m,
        &EnergyParams { p: 2.0, eps },
        &start_loop.trace(grid),
        &config.solver,
    )?;
    let state0 = build_state(0.0, 2.0, start_loop, start, eps, m, config, 0);
    if !(state0.solution.converged && state0.min_interior_j > 0.0) {
        return Err(Error::Continuation {
            t: 0.0,
            bisections: 0,
            state: Box::new(state0),
        });
    }
    let mut states = vec![state0];
    for k in 1..=config.steps {
        let target_t = k as f64 / config.steps as f64;
        let mut bisections = 0;
        loop {
            let prev = states.last().expect("start state");
            let mut t = target_t;
            let state = loop {
                let lp = loop_at(t)?;
                let trace = lp.trace(grid);
                let prev_trace = prev.solution.field.trace();
                let delta: Vec<Complex64> = trace.iter().zip(&prev_trace).map(|(a, b)| a - b).collect();
                let shift = harmonic_extension(grid, &delta)?;
                let mut init = prev.solution.field.clone();
                for (v, d) in init.values.iter_mut().zip(&shift.values) {
                    *v += d;
                }
                for (&node, &b) in grid.boundary.iter().zip(&trace) {
                    init.values[node] = b;
                }
                let p_t = exponent_path(p_final, t);
                let params = EnergyParams { p: p_t, eps };
                let solved = match solve_from(init, m, &params, &config.solver) {
                    Ok(s) => s,
                    Err(Error::LineSearch { last, .. }) => SolveResult {
                        final_energy: crate::energy::energy_value(&last, &params, m),
                        field: *last,
                        iterations: 0,
                        newton_iterations: 0,
                        final_grad_norm: f64::INFINITY,
                        grad_tol: 0.0,
                        converged: false,
                        energy_history: Vec::new(),
                    },
                    Err(e) => return Err(e),
                };
                let st = build_state(t, p_t, lp, solved, eps, m, config, bisections);
                if st.solution.converged && st.min_interior_j > 0.0 {
                    break st;
                }
                bisections += 1;
                if bisections > config.bisection_cap {
                    return Err(Error::Continuation {
                        t,
                        bisections: config.bisection_cap,
                        state: Box::new(st),
                    });
                }
                t = 0.5 * (prev.t + t);
            };
            let reached = state.t;
            states.push(state);
            if reached >= target_t {
                break;
            }
        }
    }
    Ok(states)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformBounds {
    pub states: usize,
    pub sup_holder: f64,
    pub sup_gradient_holder: f64,
    /// `c₁ = min_t min_∂M J`.
    pub min_boundary_j: f64,
    pub min_interior_j: f64,
    pub min_triangle_j: f64,
    pub total_bisections: usize,
}

pub fn uniform_bounds_report(states: &[HomotopyState]) -> Result<UniformBounds> {
    if states.is_empty() {
        return Err(Error::param("states", "need at least one state"));
    }
    let fold_max = |f: fn(&HomotopyState) -> f64| states.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |f: fn(&HomotopyState) -> f64| states.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(UniformBounds {
        states: states.len(),
        sup_holder: fold_max(|s| s.holder_proxy),
        sup_gradient_holder: fold_max(|s| s.gradient_holder_proxy),
        min_boundary_j: fold_min(|s| s.min_boundary_j),
        min_interior_j: fold_min(|s| s.min_interior_j),
        min_triangle_j: fold_min(|s| s.min_triangle_j),
        total_bisections: states.iter().map(|s| s.bisections).sum(),
    })
}
