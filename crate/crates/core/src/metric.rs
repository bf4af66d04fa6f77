//! Conformal metrics `f(q)|dq|²` on a single chart.
//!
//! Every preset is radially symmetric about the chart origin and supplies its
//! logarithmic derivatives in closed form, so curvature and the geodesic
//! nonlinearity never go through numerical differentiation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named analytic factors available under the `custom` preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CustomFactor {
    /// `exp(rate·|q|²)`; curvature `-2·rate·exp(-rate·|q|²)`.
    ExpRadial { rate: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConformalMetric {
    #[default]
    Flat,
    /// `4/(1+κ|q|²)²`, constant curvature `κ`.
    Sphere {
        #[serde(default = "one")]
        curvature: f64,
    },
    /// `4/(1-κ|q|²)²`, constant curvature `-κ`, chart `|q| < 1/√κ`.
    Hyperbolic {
        #[serde(default = "one")]
        curvature: f64,
    },
    Custom { factor: CustomFactor },
}

impl ConformalMetric {
    pub fn sphere() -> Self {
        ConformalMetric::Sphere { curvature: 1.0 }
    }

    pub fn hyperbolic() -> Self {
        ConformalMetric::Hyperbolic { curvature: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConformalMetric::Flat => "flat",
            ConformalMetric::Sphere { .. } => "sphere",
            ConformalMetric::Hyperbolic { .. } => "hyperbolic",
            ConformalMetric::Custom { .. } => "custom",
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let bad = |r: &str| Err(Error::param(key, r));
        match *self {
            ConformalMetric::Flat => Ok(()),
            ConformalMetric::Sphere { curvature } | ConformalMetric::Hyperbolic { curvature } => {
                if curvature.is_finite() && curvature > 0.0 {
                    Ok(())
                } else {
                    bad("curvature must be positive and finite")
                }
            }
            ConformalMetric::Custom {
                factor: CustomFactor::ExpRadial { rate },
            } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    bad("rate must be finite")
                }
            }
        }
    }

    /// Radius of the disc `|q| < R` on which the chart formula is valid.
    pub fn chart_radius(&self) -> f64 {
        match *self {
            ConformalMetric::Flat => 1.0e6,
            ConformalMetric::Sphere { curvature } => 1.0e4 / curvature.sqrt(),
            ConformalMetric::Hyperbolic { curvature } => 1.0 / curvature.sqrt(),
            ConformalMetric::Custom { .. } => 1.0e3,
        }
    }

    pub fn in_chart(&self, q: Complex64) -> bool {
        q.norm() < self.chart_radius() && q.re.is_finite() && q.im.is_finite()
    }

    pub fn eval(&self, q: Complex64) -> f64 {
        let r2 = q.norm_sqr();
        match *self {
            ConformalMetric::Flat => 1.0,
            ConformalMetric::Sphere { curvature: k } => 4.0 / (1.0 + k * r2).powi(2),
            ConformalMetric::Hyperbolic { curvature: k } => 4.0 / (1.0 - k * r2).powi(2),
            ConformalMetric::Custom {
                factor: CustomFactor::ExpRadial { rate },
            } => (rate * r2).exp(),
        }
    }

    /// Real gradient `(∂x, ∂y)` of `log f`.
    pub fn log_grad(&self, q: Complex64) -> [f64; 2] {
        let (x, y) = (q.re, q.im);
        let r2 = q.norm_sqr();
        let c = match *self {
            ConformalMetric::Flat => 0.0,
            ConformalMetric::Sphere { curvature: k } => -4.0 * k / (1.0 + k * r2),
            ConformalMetric::Hyperbolic { curvature: k } => 4.0 * k / (1.0 - k * r2),
            ConformalMetric::Custom {
                factor: CustomFactor::ExpRadial { rate },
            } => 2.0 * rate,
        };
        [c * x, c * y]
    }

    /// Complex derivative `∂ log f / ∂q = (∂x − i∂y) log f / 2`.
    ///
    /// This is the coefficient `A(q)` of the geodesic equation `γ̈ = −A(γ) γ̇²`
    /// and of the target nonlinearity in the Euler–Lagrange system.
    pub fn log_deriv(&self, q: Complex64) -> Complex64 {
        let [gx, gy] = self.log_grad(q);
        Complex64::new(0.5 * gx, -0.5 * gy)
    }

    /// Second partials of `log f` as `[xx, xy, yx, yy]`.
    pub fn log_hessian(&self, q: Complex64) -> [f64; 4] {
        let (x, y) = (q.re, q.im);
        let r2 = q.norm_sqr();
        let (a, b) = match *self {
            ConformalMetric::Flat => (0.0, 0.0),
            ConformalMetric::Sphere { curvature: k } => {
                let d = 1.0 + k * r2;
                (-4.0 * k / d, 8.0 * k * k / (d * d))
            }
            ConformalMetric::Hyperbolic { curvature: k } => {
                let d = 1.0 - k * r2;
                (4.0 * k / d, 8.0 * k * k / (d * d))
            }
            ConformalMetric::Custom {
                factor: CustomFactor::ExpRadial { rate },
            } => (2.0 * rate, 0.0),
        };
        // log f = F(r²) gives ∂ij = a δij + b xi xj
        let xy = b * x * y;
        [a + b * x * x, xy, xy, a + b * y * y]
    }

    /// Gaussian curvature `K = −Δ(log f) / (2f)`.
    pub fn gauss_curvature(&self, q: Complex64) -> Result<f64> {
        let f = self.eval(q);
        let h = self.log_hessian(q);
        let k = -(h[0] + h[3]) / (2.0 * f);
        if f.is_finite() && f > 0.0 && k.is_finite() {
            Ok(k)
        } else {
            Err(Error::MetricEvaluation { point: q })
        }
    }

    /// `A(q) = ∂ log f / ∂q`, returned with evaluation checks.
    pub fn christoffel_a(&self, q: Complex64) -> Result<Complex64> {
        let a = self.log_deriv(q);
        if a.re.is_finite() && a.im.is_finite() && self.in_chart(q) {
            Ok(a)
        } else {
            Err(Error::MetricEvaluation { point: q })
        }
    }

    /// Lower and upper bounds of the factor on the closed disc `|q| ≤ radius`.
    pub fn bounds_on_disc(&self, radius: f64) -> (f64, f64) {
        let a = self.eval(Complex64::new(0.0, 0.0));
        let b = self.eval(Complex64::new(radius, 0.0));
        (a.min(b), a.max(b))
    }

    /// Geodesic distance from the chart origin to any point with `|q| = r`.
    ///
    /// Radial lines through the origin are geodesics for every preset, so the
    /// distance is `∫₀ʳ √f(t) dt`.
    pub fn radial_distance(&self, r: f64) -> f64 {
        match *self {
            ConformalMetric::Flat => r,
            ConformalMetric::Sphere { curvature: k } => 2.0 * (k.sqrt() * r).atan() / k.sqrt(),
            ConformalMetric::Hyperbolic { curvature: k } => 2.0 * (k.sqrt() * r).atanh() / k.sqrt(),
            ConformalMetric::Custom { .. } => {
                let panels = 256;
                let dt = r / panels as f64;
                let g = |t: f64| self.eval(Complex64::new(t, 0.0)).sqrt();
                let mut acc = 0.0;
                for i in 0..panels {
                    let a = i as f64 * dt;
                    acc += (g(a) + 4.0 * g(a + 0.5 * dt) + g(a + dt)) * dt / 6.0;
                }
                acc
            }
        }
    }

    /// Metric length of a tangent vector `v` at `q`.
    pub fn norm(&self, q: Complex64, v: Complex64) -> f64 {
        self.eval(q).sqrt() * v.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn presets() -> Vec<ConformalMetric> {
        vec![
            ConformalMetric::Flat,
            ConformalMetric::sphere(),
            ConformalMetric::Sphere { curvature: 2.5 },
            ConformalMetric::Hyperbolic { curvature: 0.5 },
            ConformalMetric::Custom {
                factor: CustomFactor::ExpRadial { rate: 0.7 },
            },
        ]
    }

    #[test]
    fn curvature_examples() {
        assert_eq!(ConformalMetric::Flat.gauss_curvature(c(0.3, -0.2)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            ConformalMetric::sphere().gauss_curvature(c(0.0, 0.0)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            ConformalMetric::hyperbolic().gauss_curvature(c(0.0, 0.0)).unwrap(),
            -1.0,
            epsilon = 1e-14
        );
        // constant curvature away from the origin too
        assert_abs_diff_eq!(
            ConformalMetric::Sphere { curvature: 2.5 }
                .gauss_curvature(c(0.7, 1.1))
                .unwrap(),
            2.5,
            epsilon = 1e-12
        );
        let k = ConformalMetric::Custom {
            factor: CustomFactor::ExpRadial { rate: 0.7 },
        }
        .gauss_curvature(c(0.5, 0.5))
        .unwrap();
        assert_abs_diff_eq!(k, -1.4 * (-0.35f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn curvature_rejects_non_finite() {
        let m = ConformalMetric::hyperbolic();
        assert!(matches!(
            m.gauss_curvature(c(1.0, 0.0)),
            Err(Error::MetricEvaluation { .. })
        ));
    }

    #[test]
    fn christoffel_examples() {
        assert_eq!(ConformalMetric::Flat.christoffel_a(c(0.4, 0.1)).unwrap(), c(0.0, 0.0));
        let s = ConformalMetric::sphere();
        assert_eq!(s.christoffel_a(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let a = s.christoffel_a(c(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(a.re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-14);
        // −2 conj(q) / (1+|q|²) off the axis
        let q = c(0.3, -0.8);
        let want = -2.0 * q.conj() / (1.0 + q.norm_sqr());
        assert_abs_diff_eq!((s.log_deriv(q) - want).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn log_derivatives_match_finite_differences() {
        let h = 1e-4;
        for m in presets() {
            for q in [c(0.1, 0.2), c(-0.5, 0.3), c(0.6, -0.6)] {
                let lf = |z: Complex64| m.eval(z).ln();
                let gx = (lf(q + h) - lf(q - h)) / (2.0 * h);
                let gy = (lf(q + c(0.0, h)) - lf(q - c(0.0, h))) / (2.0 * h);
                let [ax, ay] = m.log_grad(q);
                assert!((gx - ax).abs() < 1e-7, "{m:?}");
                assert!((gy - ay).abs() < 1e-7, "{m:?}");
                let hess = m.log_hessian(q);
                let gxx = (lf(q + h) - 2.0 * lf(q) + lf(q - h)) / (h * h);
                let gyy = (lf(q + c(0.0, h)) - 2.0 * lf(q) + lf(q - c(0.0, h))) / (h * h);
                let gxy = (lf(q + c(h, h)) - lf(q + c(h, -h)) - lf(q + c(-h, h)) + lf(q + c(-h, -h)))
                    / (4.0 * h * h);
                assert!((gxx - hess[0]).abs() < 1e-5);
                assert!((gyy - hess[3]).abs() < 1e-5);
                assert!((gxy - hess[1]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn bounds_contain_samples() {
        for m in presets() {
            let (lo, hi) = m.bounds_on_disc(0.9);
            for k in 0..50 {
                let r = 0.9 * k as f64 / 49.0;
                let q = Complex64::from_polar(r, 0.37 * k as f64);
                let f = m.eval(q);
                assert!(f >= lo * (1.0 - 1e-12) && f <= hi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn radial_distance_closed_forms() {
        let s = ConformalMetric::sphere();
        assert_abs_diff_eq!(s.radial_distance(1.0), std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let e = ConformalMetric::Custom {
            factor: CustomFactor::ExpRadial { rate: 0.0 },
        };
        assert_abs_diff_eq!(e.radial_distance(0.8), 0.8, epsilon = 1e-14);
    }
}
