//! The ε-perturbed p-energy and the pointwise quantities built from a map:
//! `|Du|²`, `J`, `λ`, `T = λJ` and the `V` field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainGrid, MapField};
use crate::metric::ConformalMetric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub p: f64,
    pub eps: f64,
}

impl EnergyParams {
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        let params = EnergyParams { p, eps };
        params.validate("params")?;
        Ok(params)
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::param(&format!("{prefix}.p"), format!("need p >= 2, got {}", self.p)));
        }
        if !(self.eps >= 0.0 && self.eps < 1.0) {
            return Err(Error::param(
                &format!("{prefix}.eps"),
                format!("need 0 <= eps < 1, got {}", self.eps),
            ));
        }
        Ok(())
    }

    /// `λ = (ε² + |Du|²)^{(p−2)/2}` as a function of `|Du|²`.
    pub fn lambda(&self, du2: f64) -> f64 {
        if self.p == 2.0 {
            1.0
        } else {
            (self.eps * self.eps + du2).powf(0.5 * (self.p - 2.0))
        }
    }

    /// Range of `α = t E″(t)/E′(t)` for `E(t) = (ε² + t)^{p/2}`.
    pub fn alpha_bounds(&self) -> (f64, f64) {
        let a = 0.5 * (self.p - 2.0);
        if self.eps == 0.0 {
            (a, a)
        } else {
            (0.0, a)
        }
    }
}

/// Domain factor `σ` and target factor `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub sigma: ConformalMetric,
    pub rho: ConformalMetric,
}

impl Metrics {
    pub fn flat() -> Self {
        Metrics::default()
    }

    pub fn new(sigma: ConformalMetric, rho: ConformalMetric) -> Self {
        Metrics { sigma, rho }
    }

    /// `ρ(u)/σ(z)`.
    pub fn ratio(&self, z: Complex64, u: Complex64) -> f64 {
        self.rho.eval(u) / self.sigma.eval(z)
    }
}

pub fn du_norm_sq(field: &MapField, m: &Metrics) -> Vec<f64> {
    let (uz, uzb) = field.wirtinger();
    let g = &field.grid;
    (0..g.len())
        .map(|k| m.ratio(g.nodes[k], field.values[k]) * (uz[k].norm_sqr() + uzb[k].norm_sqr()))
        .collect()
}

pub fn jacobian(field: &MapField, m: &Metrics) -> Vec<f64> {
    let (uz, uzb) = field.wirtinger();
    let g = &field.grid;
    (0..g.len())
        .map(|k| m.ratio(g.nodes[k], field.values[k]) * (uz[k].norm_sqr() - uzb[k].norm_sqr()))
        .collect()
}

pub fn lambda_field(field: &MapField, params: &EnergyParams, m: &Metrics) -> Vec<f64> {
    du_norm_sq(field, m).into_iter().map(|d| params.lambda(d)).collect()
}

pub fn t_field(field: &MapField, params: &EnergyParams, m: &Metrics) -> Vec<f64> {
    DerivedFields::compute(field, params, m).t
}

/// Pointwise fields derived from one map, computed in a single pass.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedFields {
    pub params: EnergyParams,
    pub du_norm_sq: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t: Vec<f64>,
    /// `(ε² + |Du|²)^{(p−2)/4}·(u_z, u_z̄)`.
    pub v: Vec<[Complex64; 2]>,
    /// Determinant of the `V` pair, `|V₁|² − |V₂|²`.
    pub j_v: Vec<f64>,
    /// `j_v` scaled by `ρ/σ`.
    pub j_v_scaled: Vec<f64>,
}

impl DerivedFields {
    pub fn compute(field: &MapField, params: &EnergyParams, m: &Metrics) -> Self {
        let (uz, uzb) = field.wirtinger();
        let g = &field.grid;
        let n = g.len();
        let mut out = DerivedFields {
            params: *params,
            du_norm_sq: Vec::with_capacity(n),
            jacobian: Vec::with_capacity(n),
            lambda: Vec::with_capacity(n),
            t: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            j_v: Vec::with_capacity(n),
            j_v_scaled: Vec::with_capacity(n),
        };
        for k in 0..n {
            let kappa = m.ratio(g.nodes[k], field.values[k]);
            let (a, b) = (uz[k].norm_sqr(), uzb[k].norm_sqr());
            let du2 = kappa * (a + b);
            let j = kappa * (a - b);
            let lam = params.lambda(du2);
            let s = lam.sqrt();
            let v = [s * uz[k], s * uzb[k]];
            let jv = v[0].norm_sqr() - v[1].norm_sqr();
            out.du_norm_sq.push(du2);
            out.jacobian.push(j);
            out.lambda.push(lam);
            out.t.push(lam * j);
            out.v.push(v);
            out.j_v.push(jv);
            out.j_v_scaled.push(kappa * jv);
        }
        out
    }
}

/// Per-triangle P1 data shared by the energy, its gradient and Hessian.
struct TriState {
    w: f64,
    kappa: f64,
    s: f64,
    grad1: [f64; 2],
    grad2: [f64; 2],
    log_rho: [f64; 2],
}

fn tri_state(grid: &DomainGrid, t: usize, u: &[Complex64], m: &Metrics) -> TriState {
    let tri = grid.triangles[t];
    let gr = &grid.tri_grad[t];
    let zc = (grid.nodes[tri[0]] + grid.nodes[tri[1]] + grid.nodes[tri[2]]) / 3.0;
    let uc = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
    let mut grad1 = [0.0; 2];
    let mut grad2 = [0.0; 2];
    for (i, &k) in tri.iter().enumerate() {
        grad1[0] += u[k].re * gr[i][0];
        grad1[1] += u[k].re * gr[i][1];
        grad2[0] += u[k].im * gr[i][0];
        grad2[1] += u[k].im * gr[i][1];
    }
    let sigma = m.sigma.eval(zc);
    TriState {
        w: grid.tri_area[t] * sigma,
        kappa: m.rho.eval(uc) / sigma,
        s: 0.5 * (grad1[0] * grad1[0] + grad1[1] * grad1[1] + grad2[0] * grad2[0] + grad2[1] * grad2[1]),
        grad1,
        grad2,
        log_rho: m.rho.log_grad(uc),
    }
}

/// Discrete energy: P1 elements, metric factors at the triangle centroid and
/// `ρ` at the mean vertex image.
pub fn energy_value(field: &MapField, params: &EnergyParams, m: &Metrics) -> f64 {
    energy_terms(&field.grid, &field.values, params, m).0
}

/// Energy and the sum of absolute triangle contributions (a rounding scale).
pub(crate) fn energy_terms(grid: &DomainGrid, u: &[Complex64], params: &EnergyParams, m: &Metrics) -> (f64, f64) {
    let e2 = params.eps * params.eps;
    let mut total = 0.0;
    let mut scale = 0.0;
    for t in 0..grid.triangles.len() {
        let st = tri_state(grid, t, u, m);
        let f = st.w * (e2 + st.kappa * st.s).powf(0.5 * params.p);
        total += f;
        scale += f.abs();
    }
    (total, scale)
}

/// Gradient of [`energy_value`] in the interior unknowns, `∂E/∂x + i ∂E/∂y`
/// per node.
pub fn energy_gradient(field: &MapField, params: &EnergyParams, m: &Metrics) -> Vec<Complex64> {
    energy_gradient_values(&field.grid, &field.values, params, m)
}

pub(crate) fn energy_gradient_values(
    grid: &DomainGrid,
    u: &[Complex64],
    params: &EnergyParams,
    m: &Metrics,
) -> Vec<Complex64> {
    let e2 = params.eps * params.eps;
    let mut g = vec![Complex64::new(0.0, 0.0); grid.n_interior];
    for t in 0..grid.triangles.len() {
        let st = tri_state(grid, t, u, m);
        let base = e2 + st.kappa * st.s;
        let dphi = 0.5 * params.p * if params.p == 2.0 { 1.0 } else { base.powf(0.5 * params.p - 1.0) };
        let c = st.w * dphi;
        // derivative of κ through ρ(u_c): each vertex moves u_c by a third
        let rk = Complex64::new(st.log_rho[0], st.log_rho[1]) * (st.kappa * st.s / 3.0);
        let gr = &grid.tri_grad[t];
        for (i, &k) in grid.triangles[t].iter().enumerate() {
            if k >= grid.n_interior {
                continue;
            }
            let d1 = gr[i][0] * st.grad1[0] + gr[i][1] * st.grad1[1];
            let d2 = gr[i][0] * st.grad2[0] + gr[i][1] * st.grad2[1];
            g[k] += c * (st.kappa * Complex64::new(d1, d2) + rk);
        }
    }
    g
}

/// Hessian of the energy in the interior unknowns with `ρ(u_c)` frozen, as
/// triplets over real indices `2k` (real part) and `2k + 1` (imaginary part).
pub(crate) fn energy_hessian_triplets(
    grid: &DomainGrid,
    u: &[Complex64],
    params: &EnergyParams,
    m: &Metrics,
) -> Vec<(usize, usize, f64)> {
    let e2 = params.eps * params.eps;
    let p = params.p;
    let mut out = Vec::with_capacity(grid.triangles.len() * 36);
    for t in 0..grid.triangles.len() {
        let st = tri_state(grid, t, u, m);
        let mut base = e2 + st.kappa * st.s;
        if e2 == 0.0 {
            base += 1e-30;
        }
        let d1phi = 0.5 * p * base.powf(0.5 * p - 1.0);
        let d2phi = 0.5 * p * (0.5 * p - 1.0) * base.powf(0.5 * p - 2.0);
        let tri = grid.triangles[t];
        let gr = &grid.tri_grad[t];
        let a1: [f64; 3] = std::array::from_fn(|i| gr[i][0] * st.grad1[0] + gr[i][1] * st.grad1[1]);
        let a2: [f64; 3] = std::array::from_fn(|i| gr[i][0] * st.grad2[0] + gr[i][1] * st.grad2[1]);
        let k2 = st.kappa * st.kappa;
        for i in 0..3 {
            if tri[i] >= grid.n_interior {
                continue;
            }
            for j in 0..3 {
                if tri[j] >= grid.n_interior {
                    continue;
                }
                let gg = gr[i][0] * gr[j][0] + gr[i][1] * gr[j][1];
                let (ri, rj) = (2 * tri[i], 2 * tri[j]);
                out.push((ri, rj, st.w * (d1phi * st.kappa * gg + d2phi * k2 * a1[i] * a1[j])));
                out.push((ri + 1, rj + 1, st.w * (d1phi * st.kappa * gg + d2phi * k2 * a2[i] * a2[j])));
                out.push((ri, rj + 1, st.w * d2phi * k2 * a1[i] * a2[j]));
                out.push((ri + 1, rj, st.w * d2phi * k2 * a2[i] * a1[j]));
            }
        }
    }
    out
}

/// Strong-form Euler–Lagrange residual
/// `[λu_z]_z̄ + [λu_z̄]_z + 2λ (∂_u log ρ) u_z u_z̄` at full-stencil nodes.
pub fn el_residual(field: &MapField, params: &EnergyParams, m: &Metrics) -> Vec<Option<Complex64>> {
    let g = &field.grid;
    let (uz, uzb) = field.wirtinger();
    let d = DerivedFields::compute(field, params, m);
    let pz: Vec<Complex64> = (0..g.len()).map(|k| d.lambda[k] * uz[k]).collect();
    let pzb: Vec<Complex64> = (0..g.len()).map(|k| d.lambda[k] * uzb[k]).collect();
    let i = Complex64::i();
    (0..g.len())
        .map(|k| {
            g.full_stencil[k]?;
            let (px, py) = g.gradient_at(&pz, k);
            let (qx, qy) = g.gradient_at(&pzb, k);
            let a = m.rho.log_deriv(field.values[k]);
            Some(0.5 * (px + i * py) + 0.5 * (qx - i * qy) + 2.0 * d.lambda[k] * a * uz[k] * uzb[k])
        })
        .collect()
}

/// `C(α) = |α| / (2 + 2α − |α|)`.
pub fn c_of_alpha(alpha: f64) -> f64 {
    alpha.abs() / (2.0 + 2.0 * alpha - alpha.abs())
}

/// Integer exponent `N_E = ⌈max C²/(1−C²)⌉ + 1` over the two α bounds.
pub fn subharmonicity_exponent(alpha_lo: f64, alpha_hi: f64) -> Result<f64> {
    if !(alpha_lo >= -0.49) {
        return Err(Error::param("alphaLo", format!("must be >= -0.49, got {alpha_lo}")));
    }
    if !(alpha_hi >= alpha_lo && alpha_hi.is_finite()) {
        return Err(Error::param("alphaHi", "must be finite and >= alphaLo"));
    }
    let bound = [alpha_lo, alpha_hi]
        .iter()
        .map(|&a| {
            let c2 = c_of_alpha(a).powi(2);
            c2 / (1.0 - c2)
        })
        .fold(0.0, f64::max);
    Ok(bound.ceil() + 1.0)
}

pub fn subharmonicity_exponent_for(params: &EnergyParams) -> Result<f64> {
    let (lo, hi) = params.alpha_bounds();
    subharmonicity_exponent(lo, hi)
}

/// Both sides of the monotonicity inequality for a pair of complex pairs
/// (real 4-vectors), plus the Lipschitz quotient of `X ↦ (ε²+|X|²)^q X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityGap {
    /// `((ε²+|X|²)^{(p−2)/2}X − (ε²+|Y|²)^{(p−2)/2}Y)·(X−Y)`.
    pub lhs: f64,
    /// `(ε²+|X|²+|Y|²)^{(p−2)/2}|X−Y|²`.
    pub rhs_unit: f64,
    /// `|F(X)−F(Y)| / (((ε²+|X|²)^q + (ε²+|Y|²)^q)|X−Y|)` with `q = (p−2)/2`.
    pub lipschitz_quotient: f64,
}

pub fn monotonicity_gap(x: [Complex64; 2], y: [Complex64; 2], params: &EnergyParams) -> MonotonicityGap {
    let q = 0.5 * (params.p - 2.0);
    let e2 = params.eps * params.eps;
    let nx = x[0].norm_sqr() + x[1].norm_sqr();
    let ny = y[0].norm_sqr() + y[1].norm_sqr();
    let wx = (e2 + nx).powf(q);
    let wy = (e2 + ny).powf(q);
    let d = [x[0] - y[0], x[1] - y[1]];
    let f = [wx * x[0] - wy * y[0], wx * x[1] - wy * y[1]];
    let dot = |a: [Complex64; 2], b: [Complex64; 2]| (a[0].conj() * b[0] + a[1].conj() * b[1]).re;
    let dn = dot(d, d);
    let lhs = dot(f, d);
    let rhs_unit = (e2 + nx + ny).powf(q) * dn;
    let lipschitz_quotient = if dn == 0.0 {
        0.0
    } else {
        dot(f, f).sqrt() / ((wx + wy) * dn.sqrt())
    };
    MonotonicityGap {
        lhs,
        rhs_unit,
        lipschitz_quotient,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    use crate::grid::build_disc_grid;

    fn grid(n: usize) -> Arc<DomainGrid> {
        Arc::new(build_disc_grid(n).unwrap())
    }

    fn at_all(v: &[f64], expect: f64, tol: f64) {
        for x in v {
            assert_abs_diff_eq!(*x, expect, epsilon = tol);
        }
    }

    #[test]
    fn params_validation_names_keys() {
        match EnergyParams::new(-1.0, 0.0) {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "params.p"),
            other => panic!("{other:?}"),
        }
        match EnergyParams::new(3.0, 1.0) {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "params.eps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pointwise_examples() {
        let g = grid(16);
        let flat = Metrics::flat();
        let id = MapField::from_fn(&g, |z| z);
        at_all(&du_norm_sq(&id, &flat), 1.0, 1e-10);
        at_all(&jacobian(&id, &flat), 1.0, 1e-10);
        at_all(&jacobian(&id.conj(), &flat), -1.0, 1e-10);
        let sphere = Metrics::new(ConformalMetric::Flat, ConformalMetric::sphere());
        let k = g.center_node();
        assert_abs_diff_eq!(du_norm_sq(&id, &sphere)[k], 4.0, epsilon = 1e-10);
        let mix = MapField::from_fn(&g, |z| z + 0.5 * z.conj());
        at_all(&du_norm_sq(&mix, &flat), 1.25, 1e-10);
        at_all(&jacobian(&mix, &flat), 0.75, 1e-10);
    }

    #[test]
    fn lambda_and_t_examples() {
        let g = grid(16);
        let flat = Metrics::flat();
        let mix = MapField::from_fn(&g, |z| z + 0.5 * z.conj());
        at_all(&lambda_field(&mix, &EnergyParams::new(2.0, 0.7).unwrap(), &flat), 1.0, 0.0);
        let two = MapField::from_fn(&g, |z| 2.0 * z);
        at_all(&lambda_field(&two, &EnergyParams::new(4.0, 0.0).unwrap(), &flat), 4.0, 1e-9);
        assert_abs_diff_eq!(EnergyParams::new(3.0, 0.5).unwrap().lambda(0.0), 0.5, epsilon = 1e-15);
        let p2 = EnergyParams::new(2.0, 0.3).unwrap();
        let d = DerivedFields::compute(&mix, &p2, &flat);
        assert_eq!(d.t, d.jacobian);
        let p4 = EnergyParams::new(4.0, 0.0).unwrap();
        at_all(&t_field(&MapField::from_fn(&g, |z| z), &p4, &flat), 1.0, 1e-9);
        let d = DerivedFields::compute(&mix, &p4, &flat);
        at_all(&d.lambda, 1.25, 1e-9);
        at_all(&d.t, 0.9375, 1e-9);
    }

    #[test]
    fn v_field_examples() {
        let g = grid(16);
        let flat = Metrics::flat();
        let id = MapField::from_fn(&g, |z| z);
        let d = DerivedFields::compute(&id, &EnergyParams::new(4.0, 0.0).unwrap(), &flat);
        for v in &d.v {
            assert!((v[0] - 1.0).norm() < 1e-9 && v[1].norm() < 1e-9);
        }
        let u = MapField::from_fn(&g, |z| z * z + 0.3 * z.conj());
        let (uz, uzb) = u.wirtinger();
        let d = DerivedFields::compute(&u, &EnergyParams::new(2.0, 0.2).unwrap(), &flat);
        for k in 0..g.len() {
            assert_eq!(d.v[k], [uz[k], uzb[k]]);
        }
        let params = EnergyParams::new(3.0, 0.4).unwrap();
        let d = DerivedFields::compute(&u, &params, &flat);
        for k in 0..g.len() {
            let pair = uz[k].norm_sqr() + uzb[k].norm_sqr();
            let expect = (0.16 + pair).powf(0.5) * pair;
            assert_abs_diff_eq!(d.v[k][0].norm_sqr() + d.v[k][1].norm_sqr(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn energy_examples() {
        let g = grid(48);
        let flat = Metrics::flat();
        let id = MapField::from_fn(&g, |z| z);
        for (p, eps, e) in [(2.0, 0.0, PI), (4.0, 0.0, PI), (2.0, 0.5, 1.25 * PI)] {
            let v = energy_value(&id, &EnergyParams::new(p, eps).unwrap(), &flat);
            assert!((v - e).abs() <= 3.0 * g.h, "{p} {eps}: {v}");
        }
    }

    fn random_field(g: &Arc<DomainGrid>, seed: u64) -> MapField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = g
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                let base = 0.5 * z + 0.2 * z * z.conj() + 0.1 * z * z;
                if k < g.n_interior {
                    base + Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 0.05
                } else {
                    base
                }
            })
            .collect();
        MapField::new(Arc::clone(g), values).unwrap()
    }

    fn directional_check(params: EnergyParams, m: Metrics) {
        let g = grid(12);
        let u = random_field(&g, 11);
        let grad = energy_gradient(&u, &params, &m);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let delta: Vec<Complex64> = (0..g.n_interior)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let t = 1e-6;
        let shifted = |s: f64| {
            let mut v = u.clone();
            for k in 0..g.n_interior {
                v.values[k] += s * delta[k];
            }
            energy_value(&v, &params, &m)
        };
        let fd = (shifted(t) - shifted(-t)) / (2.0 * t);
        let an: f64 = grad.iter().zip(&delta).map(|(a, d)| a.re * d.re + a.im * d.im).sum();
        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {fd} analytic {an}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sphere = Metrics::new(ConformalMetric::Flat, ConformalMetric::sphere());
        let both = Metrics::new(ConformalMetric::hyperbolic(), ConformalMetric::sphere());
        for (p, eps) in [(2.0, 0.0), (3.0, 0.2), (4.0, 0.0)] {
            let params = EnergyParams::new(p, eps).unwrap();
            directional_check(params, Metrics::flat());
            directional_check(params, sphere);
        }
        directional_check(EnergyParams::new(3.5, 0.1).unwrap(), both);
    }

    #[test]
    fn gradient_examples() {
        let g = grid(16);
        let flat = Metrics::flat();
        let p2 = EnergyParams::new(2.0, 0.0).unwrap();
        let id = MapField::from_fn(&g, |z| z);
        assert!(energy_gradient(&id, &p2, &flat).iter().all(|v| v.norm() < 1e-12));
        let u = random_field(&g, 3);
        let mut u2 = u.clone();
        u2.values.iter_mut().for_each(|v| *v *= 2.0);
        let (g1, g2) = (energy_gradient(&u, &p2, &flat), energy_gradient(&u2, &p2, &flat));
        for (a, b) in g1.iter().zip(&g2) {
            assert_abs_diff_eq!((2.0 * a - b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let g = grid(10);
        let u = random_field(&g, 8);
        let m = Metrics::flat();
        let params = EnergyParams::new(3.0, 0.3).unwrap();
        let trip = energy_hessian_triplets(&g, &u.values, &params, &m);
        let k = 3;
        let t = 1e-6;
        let mut up = u.clone();
        up.values[k] += t;
        let mut dn = u.clone();
        dn.values[k] -= t;
        let (gp, gm) = (energy_gradient(&up, &params, &m), energy_gradient(&dn, &params, &m));
        let mut col = vec![0.0; 2 * g.n_interior];
        for (i, j, v) in trip {
            if j == 2 * k {
                col[i] += v;
            }
        }
        for node in 0..g.n_interior {
            let fd = (gp[node] - gm[node]) / (2.0 * t);
            assert_abs_diff_eq!(col[2 * node], fd.re, epsilon = 1e-5);
            assert_abs_diff_eq!(col[2 * node + 1], fd.im, epsilon = 1e-5);
        }
    }

    #[test]
    fn el_residual_examples() {
        let g = grid(32);
        let flat = Metrics::flat();
        let aff = MapField::from_fn(&g, |z| 1.5 * z + 0.3 * z.conj() + Complex64::new(0.1, -0.2));
        for (p, eps) in [(2.0, 0.0), (3.0, 0.3), (4.0, 0.0)] {
            let r = el_residual(&aff, &EnergyParams::new(p, eps).unwrap(), &flat);
            assert!(r.iter().flatten().all(|v| v.norm() < 1e-10));
        }
        let sph = Metrics::new(ConformalMetric::Flat, ConformalMetric::sphere());
        let id = MapField::from_fn(&g, |z| z);
        let r = el_residual(&id, &EnergyParams::new(2.0, 0.0).unwrap(), &sph);
        assert!(r.iter().flatten().all(|v| v.norm() < 1e-10));
        // z² at p = 4: λ = 4|z|², residual 2z·∂_z̄λ = 8z²
        let sq = MapField::from_fn(&g, |z| z * z);
        let r = el_residual(&sq, &EnergyParams::new(4.0, 0.0).unwrap(), &flat);
        for k in g.full_stencil_nodes() {
            let z = g.nodes[k];
            assert!((r[k].unwrap() - 8.0 * z * z).norm() <= 20.0 * g.h * g.h, "{z}");
        }
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(subharmonicity_exponent(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(subharmonicity_exponent(1.0, 1.0).unwrap(), 2.0);
        assert_abs_diff_eq!(c_of_alpha(1.0), 1.0 / 3.0, epsilon = 1e-15);
        // the two closing conditions of the exponent argument hold at N = 2
        let c2 = 1.0f64 / 9.0;
        let n = 2.0;
        assert!(c2 - n < 0.0);
        assert!(c2 - 1.0 <= c2 * c2 / (c2 - n));
        assert!(subharmonicity_exponent(-0.495, 0.0).is_err());
        assert!(subharmonicity_exponent(-0.49, 0.0).unwrap() > 5.0);
        let p4 = EnergyParams::new(4.0, 0.1).unwrap();
        assert_eq!(subharmonicity_exponent_for(&p4).unwrap(), 2.0);
    }

    #[test]
    fn monotonicity_examples() {
        let x = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)];
        let y = [Complex64::new(0.1, -0.4), Complex64::new(0.7, 0.2)];
        let same = monotonicity_gap(x, x, &EnergyParams::new(3.0, 0.2).unwrap());
        assert_eq!((same.lhs, same.rhs_unit), (0.0, 0.0));
        let lin = monotonicity_gap(x, y, &EnergyParams::new(2.0, 0.0).unwrap());
        assert_abs_diff_eq!(lin.lhs, lin.rhs_unit, epsilon = 1e-15);
        assert_abs_diff_eq!(lin.lipschitz_quotient, 0.5, epsilon = 1e-15);
    }
}
