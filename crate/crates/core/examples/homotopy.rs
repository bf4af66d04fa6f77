//! Continue from a p = 2 problem with constant-speed data to p = 3 with
//! radial data, tracking the minimum Jacobian along the path.

use std::sync::Arc;

use pharmonic_rkc::energy::Metrics;
use pharmonic_rkc::grid::build_disc_grid;
use pharmonic_rkc::homotopy::{continuation_run, uniform_bounds_report, HomotopyConfig};
use pharmonic_rkc::target::{BoundaryKind, BoundaryLoop, TargetRegion};

fn main() -> pharmonic_rkc::Result<()> {
    let grid = Arc::new(build_disc_grid(48)?);
    let target = TargetRegion::Ellipse { a: 1.0, b: 0.6 };
    let start = BoundaryLoop::new(target.clone(), BoundaryKind::ConstantSpeed)?;
    let end = BoundaryLoop::new(target, BoundaryKind::Radial)?;
    let config = HomotopyConfig {
        steps: 8,
        ..HomotopyConfig::default()
    };
    let states = continuation_run(&grid, &Metrics::flat(), 3.0, 0.2, &start, &end, &config)?;
    for s in &states {
        let r = s.record();
        println!(
            "t = {:.3}  p = {:.3}  E = {:.5}  min J = {:.4} (boundary {:.4})  {} iterations",
            r.t, r.p_t, r.energy, r.min_interior_j, r.min_boundary_j, r.iterations
        );
    }
    let b = uniform_bounds_report(&states)?;
    println!("sup Hölder proxy {:.3}, min boundary J {:.4}", b.sup_holder, b.min_boundary_j);
    Ok(())
}
