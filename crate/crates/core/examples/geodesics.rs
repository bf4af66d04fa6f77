//! Exponential map, logarithm and small geodesic triangles on the round
//! sphere in its stereographic chart.

use num_complex::Complex64;
use pharmonic_rkc::geodesic::{ball_convexity_check, Contraction, GeodesicBall, Geodesics, SmallRadius};
use pharmonic_rkc::metric::ConformalMetric;

fn main() -> pharmonic_rkc::Result<()> {
    let geo = Geodesics::new(ConformalMetric::sphere());
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    println!("d(0, 1) = {:.10} (quarter great circle {:.10})", geo.distance(o, one)?, std::f64::consts::FRAC_PI_2);

    let q = Complex64::new(0.2, -0.1);
    let v = Complex64::new(0.3, 0.25);
    let back = geo.log(q, geo.exp(q, v)?)?;
    println!("exp/log round trip error {:.2e}", (back - v).norm());

    let ball = GeodesicBall::new(&geo, q, 0.2, 64)?;
    let tri = ball_convexity_check(&geo, &ball, 100, 1, SmallRadius::default(), 1e-4)?;
    println!(
        "{} triangles: max angle pair sum {:.4} < π, Gauss-Bonnet residual {:.2e}",
        tri.evaluated, tri.max_pair_sum, tri.max_gauss_bonnet_residual
    );

    let psi = Contraction::new(geo, q, 0.15, 0.3, SmallRadius::default())?;
    println!("contraction Lipschitz quotient {:.4}", psi.sample_lipschitz(1000, 0.3, 2)?);
    Ok(())
}
