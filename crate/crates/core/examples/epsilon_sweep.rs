//! Distance between the perturbed minimizers and the eps = 0 minimizer as
//! eps decreases, solved in parallel.

use std::sync::Arc;

use pharmonic_rkc::certify::{epsilon_sweep, SweepConfig};
use pharmonic_rkc::energy::Metrics;
use pharmonic_rkc::grid::build_disc_grid;
use pharmonic_rkc::target::{BoundaryKind, BoundaryLoop, TargetRegion};

fn main() -> pharmonic_rkc::Result<()> {
    let grid = Arc::new(build_disc_grid(48)?);
    let data = BoundaryLoop::new(TargetRegion::Ellipse { a: 1.0, b: 0.6 }, BoundaryKind::Radial)?;
    let config = SweepConfig {
        jobs: 4,
        ..SweepConfig::default()
    };
    let eps = [0.4, 0.2, 0.1, 0.05, 0.025, 0.0];
    let report = epsilon_sweep(&grid, &Metrics::flat(), 4.0, &data.trace(&grid), &eps, &config)?;
    println!("{:>7} {:>11} {:>11} {:>9}", "eps", "Lp dist", "sup |dJ_V|", "ratio");
    for e in &report.entries {
        println!("{:>7} {:>11.3e} {:>11.3e} {:>9.4}", e.eps, e.lp_distance, e.jv_sup, e.caccioppoli_ratio);
    }
    println!("reconstruction floor {:.3e}, solver noise {:.3e}", report.noise_floor, report.solver_noise);
    Ok(())
}
