//! Minimize the perturbed energy for radial data onto an ellipse.
//!
//! cargo run --release --example solve -- 4 0.0

use std::sync::Arc;
use std::time::Instant;

use pharmonic_rkc::energy::{jacobian, EnergyParams, Metrics};
use pharmonic_rkc::grid::build_disc_grid;
use pharmonic_rkc::solver::{solve_dirichlet, SolveConfig};
use pharmonic_rkc::target::{BoundaryKind, BoundaryLoop, TargetRegion};

fn main() -> pharmonic_rkc::Result<()> {
    let mut args = std::env::args().skip(1);
    let p: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3.0);
    let eps: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);
    let grid = Arc::new(build_disc_grid(64)?);
    let data = BoundaryLoop::new(TargetRegion::Ellipse { a: 1.0, b: 0.6 }, BoundaryKind::Radial)?;
    let params = EnergyParams::new(p, eps)?;
    let m = Metrics::flat();

    let start = Instant::now();
    let sol = solve_dirichlet(&grid, &m, &params, &data.trace(&grid), &SolveConfig::default())?;
    let j = jacobian(&sol.field, &m);
    println!(
        "converged {} after {} iterations ({} Newton) in {:.2?}",
        sol.converged,
        sol.iterations,
        sol.newton_iterations,
        start.elapsed()
    );
    println!("energy {:.8}, gradient {:.2e} (tol {:.2e})", sol.final_energy, sol.final_grad_norm, sol.grad_tol);
    println!("Jacobian range [{:.4}, {:.4}]", j.iter().copied().fold(f64::INFINITY, f64::min), j.iter().copied().fold(0.0, f64::max));
    Ok(())
}
