//! Solve from three different starts and compare the minimizers, after
//! checking the smallness condition on the boundary image.

use std::sync::Arc;

use pharmonic_rkc::energy::{EnergyParams, Metrics};
use pharmonic_rkc::grid::build_disc_grid;
use pharmonic_rkc::metric::ConformalMetric;
use pharmonic_rkc::solver::{standard_inits, uniqueness_probe, InitKind, SolveConfig};
use pharmonic_rkc::target::{BoundaryKind, BoundaryLoop, TargetRegion};

fn main() -> pharmonic_rkc::Result<()> {
    let grid = Arc::new(build_disc_grid(48)?);
    let config = SolveConfig {
        init: InitKind::Given,
        ..SolveConfig::default()
    };
    let params = EnergyParams::new(3.0, 0.0)?;
    for (name, rho, scale) in [("flat", ConformalMetric::Flat, 1.0), ("sphere", ConformalMetric::sphere(), 0.4)] {
        let target = TargetRegion::Ellipse { a: scale, b: 0.6 * scale };
        let data = BoundaryLoop::new(target, BoundaryKind::Radial)?.trace(&grid);
        let inits = standard_inits(&grid, &data, 1)?;
        let m = Metrics::new(ConformalMetric::Flat, rho);
        let r = uniqueness_probe(&m, &params, &inits, &config, 1e-5)?;
        println!(
            "{name}: image radius {:.3} < bound {:.3}: {}, max pairwise sup distance {:.2e}, passed {:?}",
            r.smallness.image_radius, r.smallness.radius_bound, r.smallness.satisfied, r.max_pairwise_sup, r.passed
        );
    }
    Ok(())
}
