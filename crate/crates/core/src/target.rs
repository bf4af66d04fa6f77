//! Convex target regions in the target chart and boundary parametrizations
//! of their boundary curves by the domain circle.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::DomainGrid;

/// Five-point Gauss–Legendre rule on `[-1, 1]`.
const GL_X: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];
const ELLIPSE_PANELS: usize = 2048;

fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_X.iter().zip(GL_W).map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetRegion {
    Disc {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    /// Axis-aligned ellipse centered at the origin.
    Ellipse { a: f64, b: f64 },
    /// Convex polygon with counterclockwise vertices.
    Polygon { vertices: Vec<[f64; 2]> },
}

fn c(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// Cumulative arclength table of an ellipse at panel ends.
#[derive(Debug)]
struct EllipseTable {
    a: f64,
    b: f64,
    cumulative: Vec<f64>,
}

fn ellipse_table(a: f64, b: f64) -> &'static EllipseTable {
    // tables are tiny and shapes few; keep one per distinct ellipse
    static TABLES: OnceLock<std::sync::Mutex<Vec<&'static EllipseTable>>> = OnceLock::new();
    let lock = TABLES.get_or_init(Default::default);
    let mut tables = lock.lock().expect("ellipse table lock");
    if let Some(t) = tables.iter().find(|t| t.a == a && t.b == b) {
        return t;
    }
    let speed = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
    let dt = 2.0 * PI / ELLIPSE_PANELS as f64;
    let mut cumulative = Vec::with_capacity(ELLIPSE_PANELS + 1);
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 0..ELLIPSE_PANELS {
        acc += gauss(speed, i as f64 * dt, (i + 1) as f64 * dt);
        cumulative.push(acc);
    }
    let table: &'static EllipseTable = Box::leak(Box::new(EllipseTable { a, b, cumulative }));
    tables.push(table);
    table
}

impl EllipseTable {
    fn speed(&self, t: f64) -> f64 {
        (self.a * self.a * t.sin().powi(2) + self.b * self.b * t.cos().powi(2)).sqrt()
    }

    fn length(&self) -> f64 {
        self.cumulative[ELLIPSE_PANELS]
    }

    /// Arclength from parameter 0 to `t ∈ [0, 2π]`.
    fn arclength(&self, t: f64) -> f64 {
        let dt = 2.0 * PI / ELLIPSE_PANELS as f64;
        let i = ((t / dt).floor() as usize).min(ELLIPSE_PANELS - 1);
        self.cumulative[i] + gauss(|x| self.speed(x), i as f64 * dt, t)
    }

    fn parameter(&self, s: f64) -> f64 {
        let i = self.cumulative.partition_point(|&c| c <= s).clamp(1, ELLIPSE_PANELS) - 1;
        let dt = 2.0 * PI / ELLIPSE_PANELS as f64;
        let s0 = self.cumulative[i];
        let mut t = i as f64 * dt + (s - s0) / self.speed(i as f64 * dt + 0.5 * dt);
        for _ in 0..20 {
            let r = self.arclength(t) - s;
            t -= r / self.speed(t);
            if r.abs() < 1e-15 * self.length() {
                break;
            }
        }
        t
    }
}

impl TargetRegion {
    pub fn unit_disc() -> Self {
        TargetRegion::Disc {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        match self {
            TargetRegion::Disc { radius, center } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::param(&format!("{key}.radius"), "must be positive"));
                }
                if c(*center).norm() >= *radius {
                    return Err(Error::param(&format!("{key}.center"), "origin must lie inside the disc"));
                }
            }
            TargetRegion::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(Error::param(&format!("{key}.a"), "semi-axes must be positive"));
                }
            }
            TargetRegion::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::param(&format!("{key}.vertices"), "need at least three vertices"));
                }
                if !self.is_convex() {
                    return Err(Error::param(
                        &format!("{key}.vertices"),
                        "polygon must be convex and counterclockwise",
                    ));
                }
                if self.signed_distance(Complex64::new(0.0, 0.0)) >= 0.0 {
                    return Err(Error::param(&format!("{key}.vertices"), "origin must lie inside"));
                }
            }
        }
        Ok(())
    }

    /// Turning test on a dense boundary polyline: every turn is a strict
    /// left turn.
    pub fn is_convex(&self) -> bool {
        let pts = self.polyline(512);
        let n = pts.len();
        (0..n).all(|i| {
            let (a, b, d) = (pts[i], pts[(i + 1) % n], pts[(i + 2) % n]);
            ((b - a).conj() * (d - b)).im > -1e-12 * (b - a).norm() * (d - b).norm()
        }) && {
            let area: f64 = (0..n).map(|i| (pts[i].conj() * pts[(i + 1) % n]).im).sum();
            area > 0.0
        }
    }

    pub fn perimeter(&self) -> f64 {
        match self {
            TargetRegion::Disc { radius, .. } => 2.0 * PI * radius,
            TargetRegion::Ellipse { a, b } => ellipse_table(*a, *b).length(),
            TargetRegion::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| (c(vertices[(i + 1) % n]) - c(vertices[i])).norm()).sum()
            }
        }
    }

    /// Boundary point at arclength `s` (taken modulo the perimeter) from the
    /// base point, counterclockwise.
    pub fn point_at_arclength(&self, s: f64) -> Complex64 {
        let l = self.perimeter();
        let s = s.rem_euclid(l);
        match self {
            TargetRegion::Disc { center, radius } => c(*center) + Complex64::from_polar(*radius, s / radius),
            TargetRegion::Ellipse { a, b } => {
                let t = ellipse_table(*a, *b).parameter(s);
                Complex64::new(a * t.cos(), b * t.sin())
            }
            TargetRegion::Polygon { vertices } => {
                let n = vertices.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let (p, q) = (c(vertices[i]), c(vertices[(i + 1) % n]));
                    let e = (q - p).norm();
                    if s <= acc + e || i == n - 1 {
                        return p + (q - p) * ((s - acc) / e).clamp(0.0, 1.0);
                    }
                    acc += e;
                }
                unreachable!()
            }
        }
    }

    /// Unit tangent at arclength `s`.
    pub fn tangent_at_arclength(&self, s: f64) -> Complex64 {
        let d = 1e-6 * self.perimeter();
        let v = self.point_at_arclength(s + d) - self.point_at_arclength(s - d);
        v / v.norm()
    }

    /// Where the ray from the origin at angle `theta` meets the boundary, and
    /// the arclength of that point.
    pub fn radial_point(&self, theta: f64) -> (Complex64, f64) {
        let dir = Complex64::from_polar(1.0, theta);
        match self {
            TargetRegion::Disc { center, radius } => {
                let cc = c(*center);
                // |r·dir − c| = R
                let bq = (dir.conj() * cc).re;
                let r = bq + (bq * bq - cc.norm_sqr() + radius * radius).sqrt();
                let q = r * dir;
                let ang = (q - cc).arg().rem_euclid(2.0 * PI);
                (q, radius * ang)
            }
            TargetRegion::Ellipse { a, b } => {
                let r = a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2)).sqrt();
                let t = (a * theta.sin()).atan2(b * theta.cos()).rem_euclid(2.0 * PI);
                (r * dir, ellipse_table(*a, *b).arclength(t))
            }
            TargetRegion::Polygon { vertices } => {
                let n = vertices.len();
                let mut acc = 0.0;
                for i in 0..n {
                    let (p, q) = (c(vertices[i]), c(vertices[(i + 1) % n]));
                    let e = q - p;
                    // solve r·dir = p + u·e
                    let det = (dir.conj() * (-e)).im;
                    if det.abs() > 1e-300 {
                        let r = (p.conj() * (-e)).im / det;
                        let u = (dir.conj() * p).im / det;
                        if r > 0.0 && (-1e-14..=1.0 + 1e-14).contains(&u) {
                            return (r * dir, acc + u.clamp(0.0, 1.0) * e.norm());
                        }
                    }
                    acc += e.norm();
                }
                (Complex64::new(0.0, 0.0), f64::NAN)
            }
        }
    }

    /// `d/dθ` of the arclength of the radial point.
    pub fn radial_speed(&self, theta: f64) -> f64 {
        match self {
            TargetRegion::Ellipse { a, b } => {
                let t = (a * theta.sin()).atan2(b * theta.cos());
                let dt = a * b / ((b * theta.cos()).powi(2) + (a * theta.sin()).powi(2));
                ellipse_table(*a, *b).speed(t) * dt
            }
            _ => {
                let d = 1e-5;
                let l = self.perimeter();
                let (_, s1) = self.radial_point(theta + d);
                let (_, s0) = self.radial_point(theta - d);
                ((s1 - s0 + 0.5 * l).rem_euclid(l) - 0.5 * l) / (2.0 * d)
            }
        }
    }

    pub fn polyline(&self, n: usize) -> Vec<Complex64> {
        match self {
            TargetRegion::Polygon { vertices } => vertices.iter().map(|&v| c(v)).collect(),
            _ => {
                let l = self.perimeter();
                (0..n).map(|k| self.point_at_arclength(l * k as f64 / n as f64)).collect()
            }
        }
    }

    pub fn contains(&self, q: Complex64) -> bool {
        self.signed_distance(q) < 0.0
    }

    /// Euclidean chart distance to the boundary curve, negative inside.
    pub fn signed_distance(&self, q: Complex64) -> f64 {
        match self {
            TargetRegion::Disc { center, radius } => (q - c(*center)).norm() - radius,
            TargetRegion::Ellipse { a, b } => {
                let (a, b) = (*a, *b);
                let n = 1024;
                let mut t = (0..n)
                    .map(|k| 2.0 * PI * k as f64 / n as f64)
                    .min_by(|&s, &u| {
                        let ds = (Complex64::new(a * s.cos(), b * s.sin()) - q).norm_sqr();
                        let du = (Complex64::new(a * u.cos(), b * u.sin()) - q).norm_sqr();
                        ds.total_cmp(&du)
                    })
                    .unwrap();
                // Newton on (P(t) − q)·P′(t) = 0
                for _ in 0..30 {
                    let p = Complex64::new(a * t.cos(), b * t.sin());
                    let dp = Complex64::new(-a * t.sin(), b * t.cos());
                    let ddp = -Complex64::new(a * t.cos(), b * t.sin());
                    let f = ((p - q).conj() * dp).re;
                    let df = dp.norm_sqr() + ((p - q).conj() * ddp).re;
                    if df <= 0.0 {
                        break;
                    }
                    let step = f / df;
                    t -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                let d = (Complex64::new(a * t.cos(), b * t.sin()) - q).norm();
                if (q.re / a).powi(2) + (q.im / b).powi(2) < 1.0 {
                    -d
                } else {
                    d
                }
            }
            TargetRegion::Polygon { vertices } => {
                let n = vertices.len();
                let mut d = f64::INFINITY;
                let mut inside = true;
                for i in 0..n {
                    let (p, r) = (c(vertices[i]), c(vertices[(i + 1) % n]));
                    let e = r - p;
                    let u = (((q - p).conj() * e).re / e.norm_sqr()).clamp(0.0, 1.0);
                    d = d.min((p + u * e - q).norm());
                    inside &= (e.conj() * (q - p)).im > 0.0;
                }
                if inside {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Largest distance from the origin to the boundary.
    pub fn outer_radius(&self) -> f64 {
        self.polyline(1024).iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// A named parametrization of the target boundary by the domain angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Constant speed `L/2π` from the base point (the identity on the unit
    /// disc).
    ConstantSpeed,
    /// Radial projection of the domain angle onto the target boundary.
    Radial,
    /// Speed `(L/2π)(1 + amplitude·cos(frequency·θ))`.
    SpeedProfile { amplitude: f64, frequency: u32 },
}

impl BoundaryKind {
    fn validate(&self, key: &str) -> Result<()> {
        if let BoundaryKind::SpeedProfile { amplitude, frequency } = self {
            if !(amplitude.abs() < 1.0) {
                return Err(Error::param(&format!("{key}.amplitude"), "speed must stay positive (|amplitude| < 1)"));
            }
            if *frequency == 0 {
                return Err(Error::param(&format!("{key}.frequency"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Lifted arclength and its derivative at domain angle `theta`.
    fn arclength(&self, target: &TargetRegion, theta: f64) -> (f64, f64) {
        let l = target.perimeter();
        match *self {
            BoundaryKind::ConstantSpeed => (l * theta / (2.0 * PI), l / (2.0 * PI)),
            BoundaryKind::Radial => {
                let turns = (theta / (2.0 * PI)).floor();
                let reduced = theta - 2.0 * PI * turns;
                let (_, s) = target.radial_point(reduced);
                let (_, s0) = target.radial_point(0.0);
                // lift continuously from s(0); the guess only picks the branch
                let mut d = (s - s0).rem_euclid(l);
                if d - reduced * l / (2.0 * PI) > 0.5 * l {
                    d -= l;
                }
                let lifted = s0 + d + turns * l;
                (lifted, target.radial_speed(theta))
            }
            BoundaryKind::SpeedProfile { amplitude, frequency } => {
                let k = frequency as f64;
                let f = l / (2.0 * PI);
                (f * (theta + amplitude * (k * theta).sin() / k), f * (1.0 + amplitude * (k * theta).cos()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSample {
    pub s: f64,
    pub arclength: f64,
    pub point: Complex64,
    pub speed: f64,
}

/// A parametrization `θ ↦ γ(σ(θ))` of the target boundary, where `σ` is a
/// convex combination of named arclength functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub target: TargetRegion,
    pub components: Vec<(f64, BoundaryKind)>,
    pub total_length: f64,
}

impl BoundaryLoop {
    pub fn new(target: TargetRegion, kind: BoundaryKind) -> Result<Self> {
        target.validate("target")?;
        kind.validate("boundary")?;
        let total_length = target.perimeter();
        Ok(BoundaryLoop {
            target,
            components: vec![(1.0, kind)],
            total_length,
        })
    }

    /// Convex combination of several parametrizations; `key` names the
    /// component list in validation errors.
    pub fn mixed(target: TargetRegion, components: Vec<(f64, BoundaryKind)>, key: &str) -> Result<Self> {
        target.validate("target")?;
        if components.is_empty() {
            return Err(Error::param(key, "need at least one component"));
        }
        for (i, (w, k)) in components.iter().enumerate() {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::param(&format!("{key}[{i}].weight"), "must be nonnegative"));
            }
            k.validate(&format!("{key}[{i}]"))?;
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(key, format!("weights sum to {total}, expected 1")));
        }
        let total_length = target.perimeter();
        let lp = BoundaryLoop {
            target,
            components,
            total_length,
        };
        if !(lp.min_speed(4096) > 0.0) {
            return Err(Error::param(key, "boundary speed must stay positive"));
        }
        Ok(lp)
    }

    /// Lifted arclength `σ(θ)` and speed `σ′(θ)`.
    pub fn arclength(&self, theta: f64) -> (f64, f64) {
        self.components.iter().fold((0.0, 0.0), |(s, v), (w, k)| {
            let (sk, vk) = k.arclength(&self.target, theta);
            (s + w * sk, v + w * vk)
        })
    }

    pub fn eval(&self, theta: f64) -> Complex64 {
        self.target.point_at_arclength(self.arclength(theta).0)
    }

    pub fn speed(&self, theta: f64) -> f64 {
        self.arclength(theta).1
    }

    pub fn samples(&self, n: usize) -> Vec<LoopSample> {
        (0..n)
            .map(|k| {
                let s = 2.0 * PI * k as f64 / n as f64;
                let (arclength, speed) = self.arclength(s);
                LoopSample {
                    s,
                    arclength,
                    point: self.target.point_at_arclength(arclength),
                    speed,
                }
            })
            .collect()
    }

    /// Values at the boundary nodes of `grid`, in loop order.
    pub fn trace(&self, grid: &DomainGrid) -> Vec<Complex64> {
        grid.boundary_angle.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn min_speed(&self, n: usize) -> f64 {
        self.samples(n).iter().map(|s| s.speed).fold(f64::INFINITY, f64::min)
    }
}

/// Interpolates speeds linearly between two parametrizations of the same
/// curve. Both lifts start from their own base values, so the arclength
/// interpolates linearly too and the total length is preserved.
pub fn boundary_homotopy(loop0: &BoundaryLoop, loop1: &BoundaryLoop, t: f64) -> Result<BoundaryLoop> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", "must lie in [0, 1]"));
    }
    if (loop0.total_length - loop1.total_length).abs() > 1e-12 * loop0.total_length {
        return Err(Error::LoopMismatch(format!(
            "lengths {} and {}",
            loop0.total_length, loop1.total_length
        )));
    }
    if loop0.target != loop1.target {
        return Err(Error::LoopMismatch("loops trace different curves".into()));
    }
    if t == 0.0 {
        return Ok(loop0.clone());
    }
    if t == 1.0 || loop0 == loop1 {
        return Ok(loop1.clone());
    }
    let mut components: Vec<(f64, BoundaryKind)> = Vec::new();
    let parts = loop0
        .components
        .iter()
        .map(|&(w, k)| ((1.0 - t) * w, k))
        .chain(loop1.components.iter().map(|&(w, k)| (t * w, k)));
    for (w, k) in parts {
        match components.iter_mut().find(|(_, kk)| *kk == k) {
            Some(entry) => entry.0 += w,
            None => components.push((w, k)),
        }
    }
    Ok(BoundaryLoop {
        target: loop0.target.clone(),
        components,
        total_length: loop0.total_length,
    })
}
