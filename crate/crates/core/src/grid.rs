//! Disc-chart discretization: a clipped Cartesian lattice plus a ring of nodes
//! on the unit circle, triangulated so that P1 elements reproduce the 5-point
//! Laplacian away from the boundary.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use delaunator::{triangulate, Point};
use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::ConformalMetric;

/// Interior lattice nodes closer than `CLIP·h` to the circle are dropped so
/// that no element degenerates against the boundary ring.
const CLIP: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Interior,
    Boundary,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::Boundary => "boundary",
        }
    }
}

/// One row of a derivative stencil: `∂f ≈ Σ f[index]·(wx, wy)`.
#[derive(Debug, Clone, Copy)]
struct StencilTerm {
    index: usize,
    wx: f64,
    wy: f64,
}

pub struct DomainGrid {
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<Complex64>,
    pub kinds: Vec<NodeKind>,
    /// Interior nodes occupy `0..n_interior`; boundary nodes follow in loop order.
    pub n_interior: usize,
    /// Boundary node indices, counterclockwise from angle 0.
    pub boundary: Vec<usize>,
    /// Angle (= arc length on the unit circle) of each boundary loop entry.
    pub boundary_angle: Vec<f64>,
    /// Lattice coordinates of interior nodes.
    pub lattice: Vec<Option<(i64, i64)>>,
    /// East, west, north, south neighbors where all four are interior.
    pub full_stencil: Vec<Option<[usize; 4]>>,
    pub triangles: Vec<[usize; 3]>,
    pub tri_area: Vec<f64>,
    /// Gradients of the three P1 hat functions of each triangle.
    pub tri_grad: Vec<[[f64; 2]; 3]>,
    /// Lumped quadrature weights (a third of the adjacent triangle areas).
    pub weights: Vec<f64>,
    stencils: Vec<Vec<StencilTerm>>,
    pub(crate) laplace: OnceLock<crate::solver::LaplaceSystem>,
}

impl fmt::Debug for DomainGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DomainGrid")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("interior", &self.n_interior)
            .field("boundary", &self.boundary.len())
            .field("triangles", &self.triangles.len())
            .finish()
    }
}

pub fn build_disc_grid(n: usize) -> Result<DomainGrid> {
    if n < 8 {
        return Err(Error::param("grid.n", format!("need n >= 8, got {n}")));
    }
    let h = 2.0 / n as f64;
    let reach = (1.0 / h).ceil() as i64 + 1;
    let mut nodes = Vec::new();
    let mut lattice = Vec::new();
    let mut index_of = HashMap::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            let z = Complex64::new(i as f64 * h, j as f64 * h);
            if z.norm() < 1.0 - CLIP * h {
                index_of.insert((i, j), nodes.len());
                nodes.push(z);
                lattice.push(Some((i, j)));
            }
        }
    }
    let n_interior = nodes.len();
    let m = (2.0 * PI / h).ceil() as usize;
    let mut boundary = Vec::with_capacity(m);
    let mut boundary_angle = Vec::with_capacity(m);
    for k in 0..m {
        let th = 2.0 * PI * k as f64 / m as f64;
        boundary.push(nodes.len());
        boundary_angle.push(th);
        nodes.push(Complex64::from_polar(1.0, th));
        lattice.push(None);
    }
    let mut kinds = vec![NodeKind::Interior; n_interior];
    kinds.resize(nodes.len(), NodeKind::Boundary);

    let full_stencil: Vec<Option<[usize; 4]>> = lattice
        .iter()
        .map(|c| {
            let (i, j) = (*c)?;
            Some([
                *index_of.get(&(i + 1, j))?,
                *index_of.get(&(i - 1, j))?,
                *index_of.get(&(i, j + 1))?,
                *index_of.get(&(i, j - 1))?,
            ])
        })
        .collect();

    let triangles = triangulate_disc(&nodes, &lattice, &index_of)?;
    let mut tri_area = Vec::with_capacity(triangles.len());
    let mut tri_grad = Vec::with_capacity(triangles.len());
    let mut weights = vec![0.0; nodes.len()];
    for t in &triangles {
        let [a, b, c] = t.map(|k| nodes[k]);
        let area = 0.5 * ((b - a).conj() * (c - a)).im;
        let g = |p: Complex64, q: Complex64| [(p.im - q.im) / (2.0 * area), (q.re - p.re) / (2.0 * area)];
        tri_grad.push([g(b, c), g(c, a), g(a, b)]);
        tri_area.push(area);
        for &k in t {
            weights[k] += area / 3.0;
        }
    }

    let mut grid = DomainGrid {
        n,
        h,
        nodes,
        kinds,
        n_interior,
        boundary,
        boundary_angle,
        lattice,
        full_stencil,
        triangles,
        tri_area,
        tri_grad,
        weights,
        stencils: Vec::new(),
        laplace: OnceLock::new(),
    };
    grid.validate()?;
    grid.stencils = build_stencils(&grid)?;
    Ok(grid)
}

fn triangulate_disc(
    nodes: &[Complex64],
    lattice: &[Option<(i64, i64)>],
    index_of: &HashMap<(i64, i64), usize>,
) -> Result<Vec<[usize; 3]>> {
    let pts: Vec<Point> = nodes.iter().map(|z| Point { x: z.re, y: z.im }).collect();
    let tri = triangulate(&pts);
    if tri.is_empty() {
        return Err(Error::Mesh("empty triangulation".into()));
    }
    let mut out = Vec::with_capacity(tri.len());
    // Delaunay picks an arbitrary diagonal in each co-circular lattice
    // square; collect those squares and re-split them uniformly.
    let mut squares: HashMap<(i64, i64), Vec<[usize; 3]>> = HashMap::new();
    for t in tri.triangles.chunks(3) {
        let ll = t.iter().map(|&k| lattice[k]).collect::<Option<Vec<_>>>();
        if let Some(ll) = ll {
            let i0 = ll.iter().map(|c| c.0).min().unwrap();
            let j0 = ll.iter().map(|c| c.1).min().unwrap();
            let in_square = ll.iter().all(|c| c.0 - i0 <= 1 && c.1 - j0 <= 1);
            if in_square {
                squares.entry((i0, j0)).or_default().push([t[0], t[1], t[2]]);
                continue;
            }
        }
        out.push([t[0], t[1], t[2]]);
    }
    for (&(i, j), halves) in &squares {
        let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)].map(|c| index_of.get(&c).copied());
        match (halves.len(), corners) {
            (2, [Some(a), Some(b), Some(c), Some(d)]) => {
                out.push([a, b, c]);
                out.push([a, c, d]);
            }
            // half of the square meets a boundary node; keep Delaunay's choice
            _ => out.extend_from_slice(halves),
        }
    }
    for t in out.iter_mut() {
        let [a, b, c] = t.map(|k| nodes[k]);
        if ((b - a).conj() * (c - a)).im < 0.0 {
            t.swap(1, 2);
        }
    }
    out.sort_unstable();
    Ok(out)
}

impl DomainGrid {
    fn validate(&self) -> Result<()> {
        let min_area = self.tri_area.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_area > 1e-6 * self.h * self.h) {
            return Err(Error::Mesh(format!("degenerate triangle (area {min_area:e})")));
        }
        let m = self.boundary.len() as f64;
        let polygon = 0.5 * m * (2.0 * PI / m).sin();
        let total: f64 = self.tri_area.iter().sum();
        if (total - polygon).abs() > 1e-9 {
            return Err(Error::Mesh(format!("triangles cover {total}, boundary polygon {polygon}")));
        }
        let mut edges: HashMap<(usize, usize), u8> = HashMap::new();
        for t in &self.triangles {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edges.entry((e.0.min(e.1), e.0.max(e.1))).or_default() += 1;
            }
        }
        if let Some((e, _)) = edges.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Mesh(format!("edge {e:?} shared by more than two triangles")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        k >= self.n_interior
    }

    pub fn interior(&self) -> std::ops::Range<usize> {
        0..self.n_interior
    }

    /// Total area covered by the quadrature.
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Node closest to the chart origin.
    pub fn center_node(&self) -> usize {
        (0..self.n_interior)
            .min_by(|&a, &b| self.nodes[a].norm().total_cmp(&self.nodes[b].norm()))
            .expect("grid has interior nodes")
    }

    /// `∫ f σ dx dy` with the lumped weights.
    pub fn integrate(&self, f: &[f64], sigma: &ConformalMetric) -> f64 {
        self.nodes
            .iter()
            .zip(f)
            .zip(&self.weights)
            .map(|((&z, &v), &w)| w * v * sigma.eval(z))
            .sum()
    }

    /// `(∂x f, ∂y f)` at node `k` for a real or complex nodal field.
    pub fn gradient_at<T>(&self, f: &[T], k: usize) -> (T, T)
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let mut gx = T::default();
        let mut gy = T::default();
        for s in &self.stencils[k] {
            gx = gx + f[s.index] * s.wx;
            gy = gy + f[s.index] * s.wy;
        }
        (gx, gy)
    }

    /// `(u_z, u_z̄)` at every node.
    pub fn wirtinger_values(&self, u: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let i = Complex64::i();
        (0..self.len())
            .map(|k| {
                let (ux, uy) = self.gradient_at(u, k);
                (0.5 * (ux - i * uy), 0.5 * (ux + i * uy))
            })
            .unzip()
    }

    pub fn wirtinger(&self, field: &MapField) -> (Vec<Complex64>, Vec<Complex64>) {
        self.wirtinger_values(&field.values)
    }

    /// 5-point Laplacian at `k`, if `k` has a full stencil.
    pub fn laplacian_at(&self, f: &[f64], k: usize) -> Option<f64> {
        let [e, w, n, s] = self.full_stencil[k]?;
        Some((f[e] + f[w] + f[n] + f[s] - 4.0 * f[k]) / (self.h * self.h))
    }

    pub fn discrete_laplacian(&self, f: &[f64]) -> Vec<Option<f64>> {
        (0..self.len()).map(|k| self.laplacian_at(f, k)).collect()
    }

    /// Nodes that carry a 5-point Laplacian.
    pub fn full_stencil_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_interior).filter(|&k| self.full_stencil[k].is_some())
    }

    /// Interpolates `f` linearly at chart point `z` (`None` outside the mesh).
    pub fn interpolate<T>(&self, f: &[T], z: Complex64) -> Option<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        for t in &self.triangles {
            let [a, b, c] = t.map(|k| self.nodes[k]);
            let d = ((b - a).conj() * (c - a)).im;
            let l1 = ((z - a).conj() * (c - a)).im / d;
            let l2 = ((b - a).conj() * (z - a)).im / d;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
                return Some(f[t[0]] * l0 + f[t[1]] * l1 + f[t[2]] * l2);
            }
        }
        None
    }
}

/// Central differences on full-stencil nodes, weighted least-squares
/// quadratic fits elsewhere (exact on quadratics).
fn build_stencils(grid: &DomainGrid) -> Result<Vec<Vec<StencilTerm>>> {
    let h = grid.h;
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let cell = |z: Complex64| ((z.re / h).floor() as i64, (z.im / h).floor() as i64);
    for (k, &z) in grid.nodes.iter().enumerate() {
        buckets.entry(cell(z)).or_default().push(k);
    }
    let mut out = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        if let Some([e, w, n, s]) = grid.full_stencil[k] {
            let c = 0.5 / h;
            out.push(vec![
                StencilTerm { index: e, wx: c, wy: 0.0 },
                StencilTerm { index: w, wx: -c, wy: 0.0 },
                StencilTerm { index: n, wx: 0.0, wy: c },
                StencilTerm { index: s, wx: 0.0, wy: -c },
            ]);
            continue;
        }
        let z0 = grid.nodes[k];
        let (ci, cj) = cell(z0);
        let mut radius = 2.5 * h;
        let fitted = loop {
            let reach = (radius / h).ceil() as i64 + 1;
            let mut nbrs = Vec::new();
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    if let Some(b) = buckets.get(&(ci + di, cj + dj)) {
                        nbrs.extend(b.iter().copied().filter(|&q| {
                            q != k && (grid.nodes[q] - z0).norm() <= radius
                        }));
                    }
                }
            }
            if let Some(st) = quadratic_fit(grid, k, &nbrs) {
                break st;
            }
            radius *= 1.25;
            if radius > 6.0 * h {
                return Err(Error::Mesh(format!("no derivative stencil at node {k}")));
            }
        };
        out.push(fitted);
    }
    Ok(out)
}

fn quadratic_fit(grid: &DomainGrid, k: usize, nbrs: &[usize]) -> Option<Vec<StencilTerm>> {
    if nbrs.len() < 7 {
        return None;
    }
    let h = grid.h;
    let z0 = grid.nodes[k];
    let rows: Vec<(Vector5<f64>, f64)> = nbrs
        .iter()
        .map(|&q| {
            let d = (grid.nodes[q] - z0) / h;
            let v = Vector5::new(d.re, d.im, d.re * d.re, d.re * d.im, d.im * d.im);
            (v, 1.0 / d.norm_sqr())
        })
        .collect();
    let mut normal = Matrix5::zeros();
    for (v, w) in &rows {
        normal += *w * v * v.transpose();
    }
    let chol = normal.cholesky()?;
    let scale = normal.diagonal().max();
    let min_pivot = chol.l().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-8 * scale {
        return None;
    }
    let mut terms = Vec::with_capacity(nbrs.len() + 1);
    let (mut sx, mut sy) = (0.0, 0.0);
    for (&q, (v, w)) in nbrs.iter().zip(&rows) {
        let c = chol.solve(&(*w * v));
        let (wx, wy) = (c[0] / h, c[1] / h);
        sx += wx;
        sy += wy;
        terms.push(StencilTerm { index: q, wx, wy });
    }
    terms.push(StencilTerm { index: k, wx: -sx, wy: -sy });
    Some(terms)
}

/// Nodal values of a map in the target chart.
#[derive(Clone)]
pub struct MapField {
    pub grid: Arc<DomainGrid>,
    pub values: Vec<Complex64>,
}

impl fmt::Debug for MapField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapField")
            .field("nodes", &self.values.len())
            .field("grid", &self.grid)
            .finish()
    }
}

impl MapField {
    pub fn new(grid: Arc<DomainGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "field",
                format!("{} values for {} nodes", values.len(), grid.len()),
            ));
        }
        if let Some(k) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::param("field", format!("non-finite value at node {k}")));
        }
        Ok(MapField { grid, values })
    }

    pub fn from_fn(grid: &Arc<DomainGrid>, f: impl Fn(Complex64) -> Complex64) -> Self {
        let values = grid.nodes.iter().map(|&z| f(z)).collect();
        MapField {
            grid: Arc::clone(grid),
            values,
        }
    }

    /// Boundary values in loop order.
    pub fn trace(&self) -> Vec<Complex64> {
        self.grid.boundary.iter().map(|&k| self.values[k]).collect()
    }

    pub fn conj(&self) -> Self {
        MapField {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn sup_distance(&self, other: &MapField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn wirtinger(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        self.grid.wirtinger(self)
    }

    /// Writes `x, y, kind, re_u, im_u` plus any extra named columns as CSV.
    pub fn write_csv<W: Write>(&self, mut out: W, extra: &[(&str, &[f64])]) -> Result<()> {
        write!(out, "x,y,kind,re_u,im_u")?;
        for (name, _) in extra {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (k, z) in self.grid.nodes.iter().enumerate() {
            let u = self.values[k];
            write!(out, "{},{},{},{},{}", z.re, z.im, self.grid.kinds[k].as_str(), u.re, u.im)?;
            for (_, col) in extra {
                write!(out, ",{}", col[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(n: usize) -> Arc<DomainGrid> {
        Arc::new(build_disc_grid(n).unwrap())
    }

    #[test]
    fn small_grid_counts() {
        let g = grid(8);
        assert_eq!(g.h, 0.25);
        assert!((16..=40).contains(&g.boundary.len()), "{}", g.boundary.len());
        assert!(matches!(build_disc_grid(4), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn interior_count_matches_area() {
        let g = grid(64);
        let expect = PI / (g.h * g.h);
        assert!((g.n_interior as f64 - expect).abs() < 0.05 * expect);
    }

    #[test]
    fn boundary_loop_is_closed_and_positive() {
        let g = grid(24);
        let pts: Vec<Complex64> = g.boundary.iter().map(|&k| g.nodes[k]).collect();
        let mut signed = 0.0;
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            signed += 0.5 * (a.conj() * b).im;
            let gap = (b - a).norm();
            assert!(gap > 0.0 && gap <= 2.0 * g.h);
            assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-15);
        }
        assert!(signed > 0.0);
    }

    #[test]
    fn lattice_squares_use_one_diagonal() {
        let g = grid(16);
        // an interior lattice node touches six triangles of total area 3h²
        let k = g.center_node();
        assert_abs_diff_eq!(g.weights[k], g.h * g.h, epsilon = 1e-14);
    }

    #[test]
    fn wirtinger_examples() {
        let g = grid(32);
        let (uz, uzb) = g.wirtinger(&MapField::from_fn(&g, |z| z));
        for k in 0..g.len() {
            assert_abs_diff_eq!((uz[k] - 1.0).norm(), 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(uzb[k].norm(), 0.0, epsilon = 1e-10);
        }
        let (uz, uzb) = g.wirtinger(&MapField::from_fn(&g, |z| z.conj()));
        assert!(uz.iter().all(|v| v.norm() < 1e-10));
        assert!(uzb.iter().all(|v| (v - 1.0).norm() < 1e-10));
        // z² is quadratic, so both stencil types are exact
        let sq = MapField::from_fn(&g, |z| z * z);
        let (uz, _) = g.wirtinger(&sq);
        let k = (0..g.len())
            .find(|&k| (g.nodes[k] - Complex64::new(0.5, 0.0)).norm() < 1e-12)
            .unwrap();
        assert_abs_diff_eq!((uz[k] - 1.0).norm(), 0.0, epsilon = 1e-10);
        for k in 0..g.len() {
            assert_abs_diff_eq!((uz[k] - 2.0 * g.nodes[k]).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn quadrature_examples() {
        for n in [32, 64] {
            let g = grid(n);
            let flat = ConformalMetric::Flat;
            let one = vec![1.0; g.len()];
            assert!((g.integrate(&one, &flat) - PI).abs() <= 3.0 * g.h);
            let r2: Vec<f64> = g.nodes.iter().map(|z| z.norm_sqr()).collect();
            assert!((g.integrate(&r2, &flat) - PI / 2.0).abs() <= 5.0 * g.h);
            assert_eq!(g.integrate(&vec![0.0; g.len()], &flat), 0.0);
        }
    }

    #[test]
    fn laplacian_examples() {
        let g = grid(32);
        let f = |h: fn(Complex64) -> f64| g.nodes.iter().map(|&z| h(z)).collect::<Vec<_>>();
        let harm = f(|z| z.re * z.re - z.im * z.im);
        let bowl = f(|z| z.norm_sqr());
        let quart = f(|z| z.re.powi(4));
        for k in g.full_stencil_nodes() {
            assert_abs_diff_eq!(g.laplacian_at(&harm, k).unwrap(), 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(g.laplacian_at(&bowl, k).unwrap(), 4.0, epsilon = 1e-9);
        }
        let k = (0..g.len())
            .find(|&k| (g.nodes[k] - Complex64::new(0.5, 0.0)).norm() < 1e-12)
            .unwrap();
        // x⁴ has Δ = 12x², and the 5-point error is h²·∂⁴/12 = 2h²
        assert_abs_diff_eq!(g.laplacian_at(&quart, k).unwrap(), 3.0, epsilon = 2.5 * g.h * g.h);
        assert!(g.laplacian_at(&quart, g.boundary[0]).is_none());
    }

    #[test]
    fn field_rejects_bad_values() {
        let g = grid(8);
        assert!(MapField::new(g.clone(), vec![Complex64::new(0.0, 0.0); 3]).is_err());
        let mut v = vec![Complex64::new(0.0, 0.0); g.len()];
        v[0] = Complex64::new(f64::NAN, 0.0);
        assert!(MapField::new(g, v).is_err());
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let g = grid(16);
        let u = MapField::from_fn(&g, |z| 2.0 * z + 0.3 * z.conj());
        let q = Complex64::new(0.31, -0.27);
        let v = g.interpolate(&u.values, q).unwrap();
        assert_abs_diff_eq!((v - (2.0 * q + 0.3 * q.conj())).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let g = grid(8);
        let u = MapField::from_fn(&g, |z| z);
        let extra = vec![1.0; g.len()];
        let mut buf = Vec::new();
        u.write_csv(&mut buf, &[("J", &extra)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,kind,re_u,im_u,J\n"));
        assert_eq!(text.lines().count(), g.len() + 1);
    }
}
