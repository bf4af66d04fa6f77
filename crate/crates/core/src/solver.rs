//! Dirichlet minimization of the discrete energy: Laplace-preconditioned
//! nonlinear conjugate gradients, then damped Newton once the gradient has
//! dropped.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    energy_gradient_values, energy_hessian_triplets, energy_terms, EnergyParams, Metrics,
};
use crate::error::{Error, Result};
use crate::geodesic::Geodesics;
use crate::grid::{DomainGrid, MapField};

/// Flat P1 stiffness split into the interior block (factored) and the
/// interior–boundary coupling.
pub struct LaplaceSystem {
    chol: CscCholesky<f64>,
    coupling: Vec<(usize, usize, f64)>,
}

impl LaplaceSystem {
    fn build(grid: &DomainGrid) -> Result<Self> {
        let n = grid.n_interior;
        let mut coo = CooMatrix::new(n, n);
        let mut coupling = Vec::new();
        for (t, tri) in grid.triangles.iter().enumerate() {
            let gr = &grid.tri_grad[t];
            let a = grid.tri_area[t];
            for i in 0..3 {
                if tri[i] >= n {
                    continue;
                }
                for j in 0..3 {
                    let v = a * (gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1]);
                    if tri[j] < n {
                        coo.push(tri[i], tri[j], v);
                    } else {
                        coupling.push((tri[i], tri[j], v));
                    }
                }
            }
        }
        let chol = CscCholesky::factor(&CscMatrix::from(&coo))
            .map_err(|e| Error::LinearSolve(format!("Laplace factorization: {e:?}")))?;
        Ok(LaplaceSystem { chol, coupling })
    }

    fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = rhs.len();
        let b = DMatrix::from_fn(n, 2, |i, j| if j == 0 { rhs[i].re } else { rhs[i].im });
        let x = self.chol.solve(&b);
        (0..n).map(|i| Complex64::new(x[(i, 0)], x[(i, 1)])).collect()
    }
}

fn laplace(grid: &DomainGrid) -> Result<&LaplaceSystem> {
    if let Some(s) = grid.laplace.get() {
        return Ok(s);
    }
    let sys = LaplaceSystem::build(grid)?;
    Ok(grid.laplace.get_or_init(|| sys))
}

/// Discrete harmonic (flat P1) extension of boundary values.
pub fn harmonic_extension(grid: &Arc<DomainGrid>, boundary: &[Complex64]) -> Result<MapField> {
    check_boundary(grid, boundary)?;
    let sys = laplace(grid)?;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (&k, &b) in grid.boundary.iter().zip(boundary) {
        values[k] = b;
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); grid.n_interior];
    for &(i, j, v) in &sys.coupling {
        rhs[i] -= v * values[j];
    }
    let interior = sys.solve(&rhs);
    values[..grid.n_interior].copy_from_slice(&interior);
    MapField::new(Arc::clone(grid), values)
}

/// Cone extension `c + |z|(φ(z/|z|) − c)` towards the mean boundary value.
pub fn radial_extension(grid: &Arc<DomainGrid>, boundary: &[Complex64]) -> Result<MapField> {
    check_boundary(grid, boundary)?;
    let m = boundary.len();
    let c: Complex64 = boundary.iter().sum::<Complex64>() / m as f64;
    let values = grid
        .nodes
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            if grid.is_boundary(k) {
                return boundary[k - grid.n_interior];
            }
            let r = z.norm();
            if r == 0.0 {
                return c;
            }
            let x = z.arg().rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
            let i0 = x.floor() as usize % m;
            let f = x - x.floor();
            let phi = boundary[i0] * (1.0 - f) + boundary[(i0 + 1) % m] * f;
            c + r * (phi - c)
        })
        .collect();
    MapField::new(Arc::clone(grid), values)
}

fn check_boundary(grid: &DomainGrid, boundary: &[Complex64]) -> Result<()> {
    if boundary.len() != grid.boundary.len() {
        return Err(Error::param(
            "boundary",
            format!("{} values for {} boundary nodes", boundary.len(), grid.boundary.len()),
        ));
    }
    if let Some(k) = boundary.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::param("boundary", format!("non-finite value at loop index {k}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    #[default]
    Harmonic,
    RadialBlend,
    /// Use the field passed to [`solve_from`].
    Given,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub max_iters: usize,
    /// Absolute gradient tolerance; `None` means `1e-9·(‖g₀‖ + 1)`.
    pub grad_tol: Option<f64>,
    pub line_search: LineSearch,
    pub init: InitKind,
    /// Switch to Newton once the gradient has dropped by this factor.
    pub newton_switch: f64,
    /// Largest exponent for which the Newton phase is used.
    pub newton_max_p: f64,
    /// Conjugate-gradient iterations forced before Newton is tried.
    pub ncg_warmup: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 20000,
            grad_tol: None,
            line_search: LineSearch::default(),
            init: InitKind::Harmonic,
            newton_switch: 1e-2,
            newton_max_p: 6.0,
            ncg_warmup: 30,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if let Some(t) = self.grad_tol {
            if !(t > 0.0) {
                return Err(Error::param(&format!("{prefix}.grad_tol"), "must be positive"));
            }
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::param(&format!("{prefix}.line_search.shrink"), "must lie in (0, 1)"));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0) {
            return Err(Error::param(
                &format!("{prefix}.line_search.sufficient_decrease"),
                "must lie in (0, 1)",
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::param(&format!("{prefix}.max_iters"), "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: MapField,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub final_grad_norm: f64,
    pub grad_tol: f64,
    pub final_energy: f64,
    pub converged: bool,
    /// Energy after every accepted step, starting with the initial field.
    pub energy_history: Vec<f64>,
}

pub fn solve_dirichlet(
    grid: &Arc<DomainGrid>,
    m: &Metrics,
    params: &EnergyParams,
    boundary: &[Complex64],
    config: &SolveConfig,
) -> Result<SolveResult> {
    let init = match config.init {
        InitKind::Harmonic => harmonic_extension(grid, boundary)?,
        InitKind::RadialBlend => radial_extension(grid, boundary)?,
        InitKind::Given => {
            return Err(Error::param("solver.init", "a given initial field needs solve_from"))
        }
    };
    solve_from(init, m, params, config)
}

fn norm(g: &[Complex64]) -> f64 {
    g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

struct Problem<'a> {
    grid: &'a DomainGrid,
    m: &'a Metrics,
    params: &'a EnergyParams,
}

impl Problem<'_> {
    fn energy(&self, u: &[Complex64]) -> (f64, f64) {
        energy_terms(self.grid, u, self.params, self.m)
    }

    fn gradient(&self, u: &[Complex64]) -> Vec<Complex64> {
        energy_gradient_values(self.grid, u, self.params, self.m)
    }

    fn newton_direction(&self, u: &[Complex64], g: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = self.grid.n_interior;
        let trip = energy_hessian_triplets(self.grid, u, self.params, self.m);
        let mut coo = CooMatrix::new(2 * n, 2 * n);
        let mut diag_max = 0.0f64;
        for &(i, j, v) in &trip {
            coo.push(i, j, v);
        }
        let csc = CscMatrix::from(&coo);
        for (i, j, v) in csc.triplet_iter() {
            if i == j {
                diag_max = diag_max.max(*v);
            }
        }
        let mut shift = 0.0;
        for _ in 0..6 {
            let mut mat = csc.clone();
            if shift > 0.0 {
                let mut d = CooMatrix::new(2 * n, 2 * n);
                for i in 0..2 * n {
                    d.push(i, i, shift);
                }
                mat = &mat + &CscMatrix::from(&d);
            }
            if let Ok(chol) = CscCholesky::factor(&mat) {
                let b = DMatrix::from_fn(2 * n, 1, |i, _| if i % 2 == 0 { -g[i / 2].re } else { -g[i / 2].im });
                let x = chol.solve(&b);
                let d: Vec<Complex64> = (0..n).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
                if d.iter().all(|v| v.re.is_finite() && v.im.is_finite()) && dot(&d, g) < 0.0 {
                    return Some(d);
                }
            }
            shift = if shift == 0.0 { 1e-10 * diag_max } else { shift * 100.0 };
        }
        None
    }
}

/// Minimizes the energy over interior values starting from `init`; the
/// boundary values of `init` are kept bit-for-bit.
pub fn solve_from(init: MapField, m: &Metrics, params: &EnergyParams, config: &SolveConfig) -> Result<SolveResult> {
    params.validate("params")?;
    config.validate("solver")?;
    let grid = Arc::clone(&init.grid);
    let prob = Problem {
        grid: &grid,
        m,
        params,
    };
    let n = grid.n_interior;
    let pre = laplace(&grid)?;
    let mut u = init.values;
    let (mut e, mut scale) = prob.energy(&u);
    let mut g = prob.gradient(&u);
    let g0 = norm(&g);
    let tol = config.grad_tol.unwrap_or(1e-9 * (g0 + 1.0));
    let mut history = vec![e];
    let mut z = pre.solve(&g);
    let mut d: Vec<Complex64> = z.iter().map(|v| -v).collect();
    let mut iterations = 0;
    let mut newton_iterations = 0;
    let mut newton = false;
    let use_newton = params.p <= config.newton_max_p;
    let mut trial = u.clone();
    while norm(&g) > tol && iterations < config.max_iters {
        iterations += 1;
        if use_newton && !newton && (norm(&g) <= config.newton_switch * g0 || iterations > config.ncg_warmup) {
            newton = true;
        }
        let mut dir_is_newton = false;
        if newton {
            if let Some(nd) = prob.newton_direction(&u, &g) {
                d = nd;
                dir_is_newton = true;
            }
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = z.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let slack = 8.0 * f64::EPSILON * scale;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=config.line_search.max_backtracks {
            for k in 0..n {
                trial[k] = u[k] + alpha * d[k];
            }
            let (et, st) = prob.energy(&trial);
            if et.is_finite() && et <= e + config.line_search.sufficient_decrease * alpha * slope + slack {
                accepted = Some((et, st));
                break;
            }
            alpha *= config.line_search.shrink;
        }
        let Some((et, st)) = accepted else {
            let grad_norm = norm(&g);
            let last = MapField::new(Arc::clone(&grid), u)?;
            return Err(Error::LineSearch {
                iterations,
                grad_norm,
                last: Box::new(last),
            });
        };
        std::mem::swap(&mut u, &mut trial);
        trial.copy_from_slice(&u);
        e = et;
        scale = st;
        history.push(e);
        if dir_is_newton {
            newton_iterations += 1;
        }
        let g_new = prob.gradient(&u);
        let z_new = pre.solve(&g_new);
        // Polak–Ribière with restart
        let beta = (dot(&g_new, &z_new) - dot(&g_new, &z)) / dot(&g, &z).max(f64::MIN_POSITIVE);
        let beta = if dir_is_newton { 0.0 } else { beta.max(0.0) };
        for k in 0..n {
            d[k] = -z_new[k] + beta * d[k];
        }
        g = g_new;
        z = z_new;
    }
    let final_grad_norm = norm(&g);
    Ok(SolveResult {
        field: MapField::new(grid, u)?,
        iterations,
        newton_iterations,
        final_grad_norm,
        grad_tol: tol,
        final_energy: e,
        converged: final_grad_norm <= tol,
        energy_history: history,
    })
}

/// Uniqueness radius gate: the boundary image must lie in a ball of radius
/// below `π/(2√κ)`, `κ` the largest sampled curvature of the target metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Smallness {
    pub image_radius: f64,
    pub max_curvature: f64,
    pub radius_bound: f64,
    pub satisfied: bool,
}

pub fn smallness(m: &Metrics, boundary: &[Complex64]) -> Result<Smallness> {
    let geo = Geodesics::new(m.rho);
    let center: Complex64 = boundary.iter().sum::<Complex64>() / boundary.len() as f64;
    let mut max_curvature = f64::NEG_INFINITY;
    let mut image_radius = 0.0f64;
    let stride = (boundary.len() / 64).max(1);
    for &b in boundary.iter().step_by(stride) {
        max_curvature = max_curvature.max(m.rho.gauss_curvature(b)?);
        image_radius = image_radius.max(geo.distance(center, b)?);
    }
    max_curvature = max_curvature.max(m.rho.gauss_curvature(center)?);
    let radius_bound = if max_curvature > 0.0 {
        PI / (2.0 * max_curvature.sqrt())
    } else {
        f64::INFINITY
    };
    Ok(Smallness {
        image_radius,
        max_curvature,
        radius_bound,
        satisfied: image_radius < radius_bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub smallness: Smallness,
    pub inits: usize,
    pub all_converged: bool,
    pub max_pairwise_sup: f64,
    pub tolerance: f64,
    /// `None` when the smallness gate fails and no claim is made.
    pub passed: Option<bool>,
}

/// Solves from several initial fields and compares the results pairwise.
pub fn uniqueness_probe(
    m: &Metrics,
    params: &EnergyParams,
    inits: &[MapField],
    config: &SolveConfig,
    tolerance: f64,
) -> Result<UniquenessReport> {
    let first = inits.first().ok_or_else(|| Error::param("inits", "need at least one field"))?;
    let trace = first.trace();
    for f in inits {
        let dev = f
            .trace()
            .iter()
            .zip(&trace)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if dev > 0.0 {
            return Err(Error::TraceMismatch { deviation: dev });
        }
    }
    let small = smallness(m, &trace)?;
    if !small.satisfied {
        return Ok(UniquenessReport {
            smallness: small,
            inits: inits.len(),
            all_converged: false,
            max_pairwise_sup: f64::NAN,
            tolerance,
            passed: None,
        });
    }
    let mut sols = Vec::with_capacity(inits.len());
    for f in inits {
        sols.push(solve_from(f.clone(), m, params, config)?);
    }
    let mut worst = 0.0f64;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            worst = worst.max(sols[i].field.sup_distance(&sols[j].field));
        }
    }
    let all_converged = sols.iter().all(|s| s.converged);
    Ok(UniquenessReport {
        smallness: small,
        inits: inits.len(),
        all_converged,
        max_pairwise_sup: worst,
        tolerance,
        passed: Some(all_converged && worst <= tolerance),
    })
}

/// The three standard starts: harmonic, cone towards the mean, and the
/// harmonic field with a seeded interior perturbation.
pub fn standard_inits(grid: &Arc<DomainGrid>, boundary: &[Complex64], seed: u64) -> Result<Vec<MapField>> {
    let harmonic = harmonic_extension(grid, boundary)?;
    let radial = radial_extension(grid, boundary)?;
    let mut perturbed = harmonic.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..grid.n_interior {
        let r = 1.0 - grid.nodes[k].norm();
        perturbed.values[k] += 0.05 * r * Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    Ok(vec![harmonic, radial, perturbed])
}

/// P1 integral of `w(|Du|²)` per triangle with `|Du|² = κ s`.
fn triangle_integral(field: &MapField, m: &Metrics, f: impl Fn(usize, f64, f64) -> f64) -> f64 {
    let g = &field.grid;
    let u = &field.values;
    let mut total = 0.0;
    for (t, tri) in g.triangles.iter().enumerate() {
        let gr = &g.tri_grad[t];
        let zc = (g.nodes[tri[0]] + g.nodes[tri[1]] + g.nodes[tri[2]]) / 3.0;
        let uc = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        let mut du = [Complex64::new(0.0, 0.0); 2];
        for i in 0..3 {
            du[0] += u[tri[i]] * gr[i][0];
            du[1] += u[tri[i]] * gr[i][1];
        }
        let sigma = m.sigma.eval(zc);
        let s = 0.5 * (du[0].norm_sqr() + du[1].norm_sqr());
        let du2 = m.rho.eval(uc) / sigma * s;
        total += g.tri_area[t] * sigma * f(t, du2, sigma);
    }
    total
}

/// `∫ (ε²+|Du|²)^{(p−2)/2} |Du|² dV`.
pub fn weighted_dirichlet(field: &MapField, params: &EnergyParams, m: &Metrics) -> f64 {
    triangle_integral(field, m, |_, du2, _| params.lambda(du2) * du2)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CaccioppoliRatio {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Weighted Dirichlet integral of the solution over that of a competitor with
/// the same trace.
pub fn caccioppoli_ratio(
    solution: &MapField,
    params: &EnergyParams,
    m: &Metrics,
    competitor: &MapField,
) -> Result<CaccioppoliRatio> {
    let dev = solution
        .trace()
        .iter()
        .zip(competitor.trace())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if dev > 1e-12 {
        return Err(Error::TraceMismatch { deviation: dev });
    }
    let lhs = weighted_dirichlet(solution, params, m);
    let rhs = weighted_dirichlet(competitor, params, m);
    Ok(CaccioppoliRatio {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WeightedTest {
    pub lhs: f64,
    pub rhs: f64,
    /// Largest chart distance from the ball center to the image.
    pub image_radius: f64,
    pub image_inside: bool,
    /// `None` when the image leaves the ball.
    pub holds: Option<bool>,
}

/// `∫ λ|Du|²η² dV` against `16r² ∫ λ|∇η|² dV` (intrinsic gradient of `η`).
pub fn weighted_test_inequality(
    field: &MapField,
    params: &EnergyParams,
    m: &Metrics,
    center: Complex64,
    r: f64,
    eta: &[f64],
) -> Result<WeightedTest> {
    let g = &field.grid;
    if eta.len() != g.len() {
        return Err(Error::param("eta", "one value per node required"));
    }
    if g.boundary.iter().any(|&k| eta[k] != 0.0) {
        return Err(Error::param("eta", "must vanish on the boundary"));
    }
    let image_radius = field.values.iter().map(|u| (u - center).norm()).fold(0.0, f64::max);
    let lhs = triangle_integral(field, m, |t, du2, _| {
        let tri = g.triangles[t];
        let eta2 = tri.iter().map(|&k| eta[k] * eta[k]).sum::<f64>() / 3.0;
        params.lambda(du2) * du2 * eta2
    });
    let rhs = 16.0
        * r
        * r
        * triangle_integral(field, m, |t, du2, sigma| {
            let tri = g.triangles[t];
            let gr = &g.tri_grad[t];
            let mut ge = [0.0; 2];
            for i in 0..3 {
                ge[0] += eta[tri[i]] * gr[i][0];
                ge[1] += eta[tri[i]] * gr[i][1];
            }
            params.lambda(du2) * (ge[0] * ge[0] + ge[1] * ge[1]) / sigma
        });
    let image_inside = image_radius <= r;
    Ok(WeightedTest {
        lhs,
        rhs,
        image_radius,
        image_inside,
        holds: image_inside.then_some(lhs <= rhs),
    })
}
