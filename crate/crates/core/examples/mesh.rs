//! Build the disc mesh and check its discrete derivatives on a known map.
//!
//! cargo run --example mesh -- 48

use std::sync::Arc;

use num_complex::Complex64;
use pharmonic_rkc::grid::build_disc_grid;
use pharmonic_rkc::grid::MapField;

fn main() -> pharmonic_rkc::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(48);
    let grid = Arc::new(build_disc_grid(n)?);
    println!(
        "n = {n}, h = {:.4}: {} nodes ({} interior, {} boundary), {} triangles",
        grid.h,
        grid.len(),
        grid.n_interior,
        grid.boundary.len(),
        grid.triangles.len()
    );
    println!("mesh area {:.6} (disc {:.6})", grid.area(), std::f64::consts::PI);

    // u = z² + 0.3 z̄: u_z = 2z, u_z̄ = 0.3
    let u = MapField::from_fn(&grid, |z| z * z + 0.3 * z.conj());
    let (uz, uzb) = u.wirtinger();
    let mut err: f64 = 0.0;
    for k in 0..grid.len() {
        err = err.max((uz[k] - 2.0 * grid.nodes[k]).norm());
        err = err.max((uzb[k] - Complex64::new(0.3, 0.0)).norm());
    }
    println!("max Wirtinger error on a quadratic map: {err:.2e}");
    Ok(())
}
