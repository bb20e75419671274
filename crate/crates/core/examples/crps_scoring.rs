//! CRPS of a forecast against an observation, and the CRPS divergence
//! between two distributions, both normalized by the integration range.

use logistic_cde::eval::{crps, crps_divergence, DEFAULT_GRID_POINTS};
use logistic_cde::normal;

fn main() -> logistic_cde::Result<()> {
    let (l, u) = (-6.0, 6.0);
    let standard = |y: f64| normal::cdf(y);

    for y_obs in [0.0, 1.0, 3.0] {
        let s = crps(standard, y_obs, l, u, DEFAULT_GRID_POINTS)?;
        println!("N(0, 1) forecast, observation {y_obs:>3.1}: CRPS {s:.5}");
    }

    for shift in [0.0, 0.5, 1.0, 2.0] {
        let d = crps_divergence(standard, |y| normal::cdf(y - shift), l, u, DEFAULT_GRID_POINTS)?;
        println!("divergence from N({shift}, 1): {d:.5}");
    }

    let skew = |y: f64| normal::skew_normal_cdf(y, 0.0, 1.0, -5.0);
    let d = crps_divergence(standard, skew, l, u, DEFAULT_GRID_POINTS)?;
    println!("divergence from a skew-normal with alpha -5: {d:.5}");
    Ok(())
}
