//! Geodesics of a conformal metric: shooting, exponential and logarithm maps,
//! distance, and the small-ball geometry used by the contraction construction.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ConformalMetric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub time: f64,
    pub position: Complex64,
    pub velocity: Complex64,
}

#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    pub metric: ConformalMetric,
}

impl GeodesicPath {
    pub fn start(&self) -> &GeodesicSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &GeodesicSample {
        self.samples.last().expect("paths hold at least two samples")
    }

    pub fn speeds(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .iter()
            .map(|s| self.metric.norm(s.position, s.velocity))
    }

    /// Largest deviation of the metric speed from its initial value.
    pub fn speed_deviation(&self) -> f64 {
        let v0 = self.metric.norm(self.start().position, self.start().velocity);
        self.speeds().map(|v| (v - v0).abs()).fold(0.0, f64::max)
    }

    /// Metric length by Simpson's rule on the samples (odd sample count) or the
    /// trapezoid rule otherwise.
    pub fn length(&self) -> f64 {
        let speeds: Vec<f64> = self.speeds().collect();
        let dt = self.samples[1].time - self.samples[0].time;
        integrate_uniform(&speeds, dt)
    }
}

/// Composite Simpson on uniformly spaced values, trapezoid fallback for an
/// even number of values.
pub(crate) fn integrate_uniform(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if n % 2 == 1 && n >= 3 {
        let mut acc = values[0] + values[n - 1];
        for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
            acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        acc * dt / 3.0
    } else {
        let inner: f64 = values[1..n - 1].iter().sum();
        (inner + 0.5 * (values[0] + values[n - 1])) * dt
    }
}

fn accel(metric: &ConformalMetric, q: Complex64, v: Complex64) -> Complex64 {
    -metric.log_deriv(q) * v * v
}

/// Integrates `γ̈ = −A(γ) γ̇²` with classical fixed-step RK4.
pub fn geodesic_shoot(
    metric: &ConformalMetric,
    q0: Complex64,
    v0: Complex64,
    t_end: f64,
    steps: usize,
) -> Result<GeodesicPath> {
    if steps < 2 {
        return Err(Error::param("steps", "at least two steps are required"));
    }
    if !(v0.re.is_finite() && v0.im.is_finite()) {
        return Err(Error::param("v0", "initial velocity must be finite"));
    }
    if !metric.in_chart(q0) {
        return Err(Error::OutsideChart { point: q0 });
    }
    let dt = t_end / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let (mut q, mut v) = (q0, v0);
    samples.push(GeodesicSample {
        time: 0.0,
        position: q,
        velocity: v,
    });
    for k in 0..steps {
        let k1q = v;
        let k1v = accel(metric, q, v);
        let k2q = v + 0.5 * dt * k1v;
        let k2v = accel(metric, q + 0.5 * dt * k1q, k2q);
        let k3q = v + 0.5 * dt * k2v;
        let k3v = accel(metric, q + 0.5 * dt * k2q, k3q);
        let k4q = v + dt * k3v;
        let k4v = accel(metric, q + dt * k3q, k4q);
        q += dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        let time = (k + 1) as f64 * dt;
        if !metric.in_chart(q) || !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::ChartExit { time });
        }
        samples.push(GeodesicSample {
            time,
            position: q,
            velocity: v,
        });
    }
    Ok(GeodesicPath {
        samples,
        metric: *metric,
    })
}

/// Exponential map, logarithm and distance with a fixed integrator resolution.
#[derive(Debug, Clone, Copy)]
pub struct Geodesics {
    pub metric: ConformalMetric,
    /// RK4 steps over the unit time interval.
    pub steps: usize,
    /// Endpoint residual accepted by the logarithm's Newton iteration.
    pub tol: f64,
    pub max_newton: usize,
    pub injectivity_radius: f64,
}

impl Geodesics {
    pub fn new(metric: ConformalMetric) -> Self {
        let injectivity_radius = match metric {
            ConformalMetric::Sphere { curvature } => PI / curvature.sqrt(),
            _ => f64::INFINITY,
        };
        Geodesics {
            metric,
            steps: 256,
            tol: 1e-13,
            max_newton: 60,
            injectivity_radius,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn shoot(&self, q0: Complex64, v0: Complex64, t_end: f64) -> Result<GeodesicPath> {
        geodesic_shoot(&self.metric, q0, v0, t_end, self.steps)
    }

    pub fn exp(&self, q0: Complex64, v0: Complex64) -> Result<Complex64> {
        if v0 == Complex64::new(0.0, 0.0) {
            return Ok(q0);
        }
        Ok(self.shoot(q0, v0, 1.0)?.end().position)
    }

    /// Inverse of [`Geodesics::exp`] by damped Newton shooting. Starts from the
    /// chart chord and falls back to perturbed starts.
    pub fn log(&self, q0: Complex64, q1: Complex64) -> Result<Complex64> {
        if !self.metric.in_chart(q0) {
            return Err(Error::OutsideChart { point: q0 });
        }
        if !self.metric.in_chart(q1) {
            return Err(Error::OutsideChart { point: q1 });
        }
        let chord = q1 - q0;
        if chord.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let starts = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(1.5, 0.0),
            Complex64::from_polar(1.0, 0.2),
            Complex64::from_polar(1.0, -0.2),
        ];
        let mut best = f64::INFINITY;
        for s in starts {
            match self.newton_log(q0, q1, chord * s) {
                Ok(v) => {
                    let d = self.metric.norm(q0, v);
                    if d > self.injectivity_radius {
                        return Err(Error::param(
                            "q1",
                            format!("distance {d} exceeds the injectivity radius"),
                        ));
                    }
                    return Ok(v);
                }
                Err(Error::NoConvergence { residual }) => best = best.min(residual),
                Err(Error::ChartExit { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Err(Error::NoConvergence { residual: best })
    }

    fn newton_log(&self, q0: Complex64, q1: Complex64, guess: Complex64) -> Result<Complex64> {
        let scale = 1.0 + q1.norm();
        let mut v = guess;
        let mut f = self.exp(q0, v)? - q1;
        for _ in 0..self.max_newton {
            if f.norm() <= self.tol * scale {
                return Ok(v);
            }
            let d = 1e-7 * v.norm().max(1e-3);
            let jx = (self.exp(q0, v + d)? - self.exp(q0, v - d)?) / (2.0 * d);
            let jy = (self.exp(q0, v + Complex64::new(0.0, d))?
                - self.exp(q0, v - Complex64::new(0.0, d))?)
                / (2.0 * d);
            // solve [jx jy] δ = −f as a real 2×2 system
            let det = jx.re * jy.im - jy.re * jx.im;
            if det.abs() < 1e-300 {
                break;
            }
            let dx = (-f.re * jy.im + jy.re * f.im) / det;
            let dy = (-jx.re * f.im + f.re * jx.im) / det;
            let step = Complex64::new(dx, dy);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-6 {
                let trial = v + t * step;
                if let Ok(q) = self.exp(q0, trial) {
                    let ft = q - q1;
                    if ft.norm() < f.norm() {
                        v = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if f.norm() <= self.tol * scale {
            Ok(v)
        } else {
            Err(Error::NoConvergence { residual: f.norm() })
        }
    }

    pub fn distance(&self, q0: Complex64, q1: Complex64) -> Result<f64> {
        Ok(self.metric.norm(q0, self.log(q0, q1)?))
    }

    /// Unit metric-speed tangent in the chart direction of `dir`.
    pub fn unit(&self, q: Complex64, dir: Complex64) -> Complex64 {
        dir / self.metric.norm(q, dir)
    }

    /// Angle at `a` of the geodesic triangle `abc`. Conformal charts preserve
    /// angles, so this is the Euclidean angle between the two logarithms.
    pub fn angle(&self, a: Complex64, b: Complex64, c: Complex64) -> Result<f64> {
        let u = self.log(a, b)?;
        let w = self.log(a, c)?;
        Ok((w / u).arg().abs())
    }

    /// `∫_T K dV` over the geodesic triangle `abc` from the flux of `∇ log f`
    /// through its boundary (`K f = −Δ log f / 2`).
    pub fn curvature_integral(&self, a: Complex64, b: Complex64, c: Complex64) -> Result<f64> {
        let mut flux = 0.0;
        for (p, q) in [(a, b), (b, c), (c, a)] {
            let v = self.log(p, q)?;
            let path = self.shoot(p, v, 1.0)?;
            let vals: Vec<f64> = path
                .samples
                .iter()
                .map(|s| {
                    let [gx, gy] = self.metric.log_grad(s.position);
                    gx * s.velocity.im - gy * s.velocity.re
                })
                .collect();
            flux += integrate_uniform(&vals, 1.0 / self.steps as f64);
        }
        let orientation = ((b - a).conj() * (c - a)).im.signum();
        Ok(-0.5 * flux * orientation)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicBall {
    pub center: Complex64,
    pub radius: f64,
    pub boundary_samples: Vec<Complex64>,
}

impl GeodesicBall {
    pub fn new(geo: &Geodesics, center: Complex64, radius: f64, samples: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", "must be positive"));
        }
        let boundary_samples = (0..samples)
            .map(|k| {
                let dir = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / samples as f64);
                geo.exp(center, radius * geo.unit(center, dir))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GeodesicBall {
            center,
            radius,
            boundary_samples,
        })
    }

    /// Largest `|d(center, b) − radius|` over the boundary samples.
    pub fn boundary_error(&self, geo: &Geodesics) -> Result<f64> {
        let mut worst = 0.0f64;
        for &b in &self.boundary_samples {
            worst = worst.max((geo.distance(self.center, b)? - self.radius).abs());
        }
        Ok(worst)
    }
}

/// Thresholds standing in for the unquantified "small enough radius".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallRadius {
    pub max_radius: f64,
}

impl Default for SmallRadius {
    fn default() -> Self {
        SmallRadius { max_radius: 0.25 }
    }
}

impl SmallRadius {
    fn check(&self, key: &str, r: f64) -> Result<()> {
        if r <= self.max_radius {
            Ok(())
        } else {
            Err(Error::param(
                key,
                format!("radius {r} exceeds the small-radius threshold {}", self.max_radius),
            ))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriangleReport {
    pub trials: usize,
    pub evaluated: usize,
    pub degenerate: usize,
    /// Largest sum of two angles over all evaluated triangles.
    pub max_pair_sum: f64,
    /// Largest `|(π − θ₂ − θ₃) − (θ₁ − ∫_T K)|`.
    pub max_gauss_bonnet_residual: f64,
    pub passed: bool,
}

/// Angles of a triangle, or `None` when it is degenerate.
fn triangle_angles(geo: &Geodesics, p: [Complex64; 3]) -> Result<Option<[f64; 3]>> {
    let min_side = (p[0] - p[1]).norm().min((p[1] - p[2]).norm()).min((p[2] - p[0]).norm());
    if min_side < 1e-9 {
        return Ok(None);
    }
    let th = [
        geo.angle(p[0], p[1], p[2])?,
        geo.angle(p[1], p[2], p[0])?,
        geo.angle(p[2], p[0], p[1])?,
    ];
    let eps = 1e-6;
    if th.iter().any(|&t| t < eps || t > PI - eps) {
        return Ok(None);
    }
    Ok(Some(th))
}

/// Samples geodesic triangles with vertices inside `ball` and checks that any
/// two angles sum to less than π, together with the Gauss–Bonnet identity.
pub fn ball_convexity_check(
    geo: &Geodesics,
    ball: &GeodesicBall,
    trials: usize,
    seed: u64,
    limits: SmallRadius,
    tol: f64,
) -> Result<TriangleReport> {
    limits.check("ball.radius", ball.radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut tri = [Complex64::new(0.0, 0.0); 3];
        for v in tri.iter_mut() {
            let rad = ball.radius * rng.random::<f64>().sqrt() * (1.0 - 1e-9);
            let dir = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
            *v = geo.exp(ball.center, rad * geo.unit(ball.center, dir))?;
        }
        pts.push(tri);
    }
    triangle_report(geo, &pts, tol)
}

pub fn triangle_report(geo: &Geodesics, triangles: &[[Complex64; 3]], tol: f64) -> Result<TriangleReport> {
    let mut report = TriangleReport {
        trials: triangles.len(),
        evaluated: 0,
        degenerate: 0,
        max_pair_sum: 0.0,
        max_gauss_bonnet_residual: 0.0,
        passed: true,
    };
    for tri in triangles {
        let Some(th) = triangle_angles(geo, *tri)? else {
            report.degenerate += 1;
            continue;
        };
        report.evaluated += 1;
        let pair = (th[0] + th[1]).max(th[1] + th[2]).max(th[0] + th[2]);
        report.max_pair_sum = report.max_pair_sum.max(pair);
        let k = geo.curvature_integral(tri[0], tri[1], tri[2])?;
        let resid = ((PI - th[1] - th[2]) - (th[0] - k)).abs();
        report.max_gauss_bonnet_residual = report.max_gauss_bonnet_residual.max(resid);
    }
    report.passed = report.max_pair_sum < PI && report.max_gauss_bonnet_residual <= tol;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TangentReport {
    pub samples: usize,
    /// `min over s ≠ 0 of d(center, γ(s)) − r`.
    pub min_margin: f64,
    /// `|d(center, γ(0)) − r|`.
    pub tangency_error: f64,
    pub passed: bool,
}

/// Shoots the geodesic tangent to `∂B_r` at the boundary point in direction
/// `angle` both ways and checks that it stays outside the ball.
pub fn tangent_geodesic_check(
    geo: &Geodesics,
    ball: &GeodesicBall,
    angle: f64,
    s_max: f64,
    samples: usize,
    limits: SmallRadius,
) -> Result<TangentReport> {
    limits.check("ball.radius", ball.radius)?;
    let dir = geo.unit(ball.center, Complex64::from_polar(1.0, angle));
    let radial = geo.shoot(ball.center, dir * ball.radius, 1.0)?;
    let p0 = radial.end().position;
    let tangent = geo.unit(p0, radial.end().velocity * Complex64::i());
    let mut min_margin = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let path = geo.shoot(p0, sign * tangent * s_max, 1.0)?;
        let stride = (path.samples.len() - 1) / samples.max(1);
        for s in path.samples.iter().step_by(stride.max(1)).skip(1) {
            let d = geo.distance(ball.center, s.position)?;
            min_margin = min_margin.min(d - ball.radius);
        }
    }
    let tangency_error = (geo.distance(ball.center, p0)? - ball.radius).abs();
    Ok(TangentReport {
        samples,
        min_margin,
        tangency_error,
        passed: min_margin > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistanceGrowth {
    /// Directions coincide; the distance is identically zero.
    Excluded,
    Measured {
        distances: Vec<f64>,
        min_increment: f64,
        strictly_increasing: bool,
    },
}

/// Distance between two unit-speed geodesics leaving `p` in directions
/// `dir_a`, `dir_b`, sampled at `steps` equally spaced times in `(0, t_max]`.
pub fn increasing_distance_check(
    geo: &Geodesics,
    p: Complex64,
    dir_a: Complex64,
    dir_b: Complex64,
    t_max: f64,
    steps: usize,
) -> Result<DistanceGrowth> {
    let a = geo.unit(p, dir_a);
    let b = geo.unit(p, dir_b);
    if (a - b).norm() < 1e-12 {
        return Ok(DistanceGrowth::Excluded);
    }
    let mut distances = Vec::with_capacity(steps);
    for k in 1..=steps {
        let t = t_max * k as f64 / steps as f64;
        let qa = geo.exp(p, a * t)?;
        let qb = geo.exp(p, b * t)?;
        distances.push(geo.distance(qa, qb)?);
    }
    let mut min_increment = distances[0];
    for w in distances.windows(2) {
        min_increment = min_increment.min(w[1] - w[0]);
    }
    Ok(DistanceGrowth::Measured {
        strictly_increasing: min_increment > 0.0,
        min_increment,
        distances,
    })
}

/// Identity on `B̄_r`, radial geodesic projection onto `∂B_r` on the annulus,
/// and `τ∘ψ` outside `B_{r0}`, where `ψ` projects radially onto `B̄_{r0}` and
/// `τ` dilates geodesics from the center by `r/r0`.
#[derive(Debug, Clone, Copy)]
pub struct Contraction {
    pub geo: Geodesics,
    pub center: Complex64,
    pub r: f64,
    pub r0: f64,
}

impl Contraction {
    pub fn new(geo: Geodesics, center: Complex64, r: f64, r0: f64, limits: SmallRadius) -> Result<Self> {
        if !(r > 0.0 && r < r0) {
            return Err(Error::param("r", "require 0 < r < r0"));
        }
        limits.check("r", r)?;
        if r0 >= 0.5 * geo.injectivity_radius {
            return Err(Error::param("r0", "must stay below half the injectivity radius"));
        }
        Ok(Contraction { geo, center, r, r0 })
    }

    pub fn apply(&self, q: Complex64) -> Result<Complex64> {
        if !self.geo.metric.in_chart(q) {
            return Err(Error::OutsideChart { point: q });
        }
        let v = self.geo.log(self.center, q)?;
        let d = self.geo.metric.norm(self.center, v);
        if d <= self.r {
            Ok(q)
        } else if d < self.r0 {
            self.geo.exp(self.center, v * (self.r / d))
        } else {
            let psi = self.geo.exp(self.center, v * (self.r0 / d))?;
            self.dilate(psi)
        }
    }

    fn dilate(&self, q: Complex64) -> Result<Complex64> {
        let v = self.geo.log(self.center, q)?;
        self.geo.exp(self.center, v * (self.r / self.r0))
    }

    /// Largest `d(Ψq₁, Ψq₂) / d(q₁, q₂)` over random pairs with both points at
    /// distance in `(r, outer]` from the center.
    pub fn sample_lipschitz(&self, pairs: usize, outer: f64, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let point = |rng: &mut ChaCha8Rng| -> Result<Complex64> {
            let rad = self.r + (outer - self.r) * rng.random::<f64>().max(1e-6);
            let dir = Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI);
            self.geo.exp(self.center, rad * self.geo.unit(self.center, dir))
        };
        for _ in 0..pairs {
            let q1 = point(&mut rng)?;
            let q2 = point(&mut rng)?;
            let d = self.geo.distance(q1, q2)?;
            if d < 1e-10 {
                continue;
            }
            let dp = self.geo.distance(self.apply(q1)?, self.apply(q2)?)?;
            worst = worst.max(dp / d);
        }
        Ok(worst)
    }
}
