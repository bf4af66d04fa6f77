//! Solve the p = 4 ellipse problem and run the injectivity certificate.

use std::sync::Arc;

use pharmonic_rkc::certify::{certify, CertifyConfig};
use pharmonic_rkc::energy::{EnergyParams, Metrics};
use pharmonic_rkc::grid::build_disc_grid;
use pharmonic_rkc::solver::{solve_dirichlet, SolveConfig};
use pharmonic_rkc::target::{BoundaryKind, BoundaryLoop, TargetRegion};

fn main() -> pharmonic_rkc::Result<()> {
    let grid = Arc::new(build_disc_grid(64)?);
    let target = TargetRegion::Ellipse { a: 1.0, b: 0.6 };
    let data = BoundaryLoop::new(target.clone(), BoundaryKind::Radial)?;
    let params = EnergyParams::new(4.0, 0.0)?;
    let m = Metrics::flat();
    let sol = solve_dirichlet(&grid, &m, &params, &data.trace(&grid), &SolveConfig::default())?;
    let report = certify(&sol.field, &params, &m, &target, &CertifyConfig::default())?;
    println!("image margin         {:+.3e}", report.image_in_target_margin);
    println!("boundary J min       {:.4}", report.boundary_jacobian_min);
    println!("interior J min       {:.4}", report.interior_jacobian_min);
    println!("superharmonicity     {:+.3e}", report.superharmonicity_worst.unwrap_or(f64::NAN));
    println!("minimum principle    {:+.3e}", report.minimum_principle_margin);
    println!("convex composition   {:+.3e}", report.convex_composition_worst);
    println!("all passed: {}", report.passed.all);
    Ok(())
}
