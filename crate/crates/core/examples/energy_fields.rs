//! Derived fields of a map: |Du|², J, λ, T and the V pair, plus the exponent
//! N_E that makes −T^{−N_E} superharmonic.

use std::sync::Arc;

use pharmonic_rkc::energy::{energy_value, subharmonicity_exponent_for, DerivedFields, EnergyParams, Metrics};
use pharmonic_rkc::grid::{build_disc_grid, MapField};
use pharmonic_rkc::metric::ConformalMetric;

fn main() -> pharmonic_rkc::Result<()> {
    let grid = Arc::new(build_disc_grid(32)?);
    let u = MapField::from_fn(&grid, |z| 0.5 * z + 0.1 * z.conj() * z.conj());
    let m = Metrics::new(ConformalMetric::Flat, ConformalMetric::sphere());
    for (p, eps) in [(2.0, 0.0), (3.0, 0.0), (4.0, 0.2)] {
        let params = EnergyParams::new(p, eps)?;
        let d = DerivedFields::compute(&u, &params, &m);
        let k = grid.center_node();
        println!(
            "p = {p}, eps = {eps}: E = {:.5}, N_E = {}, at 0: |Du|² = {:.4}, J = {:.4}, T = {:.4}, J_V = {:.4}",
            energy_value(&u, &params, &m),
            subharmonicity_exponent_for(&params)?,
            d.du_norm_sq[k],
            d.jacobian[k],
            d.t[k],
            d.j_v_scaled[k],
        );
    }
    Ok(())
}
