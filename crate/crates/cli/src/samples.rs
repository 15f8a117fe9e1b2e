//! Deterministic sample generators shared by the inequality and estimate
//! runners.

use crate::{Result, RunError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use wloja_core::measures::{Grid1D, GridMeasure};

/// Number of sine harmonics in a perturbed-Gaussian sample.
pub const HARMONICS: usize = 3;

/// Amplitude bound for each harmonic coefficient.
pub const AMPLITUDE: f64 = 0.3;

/// `count` densities proportional to exp(−x²/2 + Σ_{k=1..3} a_k sin(kx)),
/// a_k ~ U[−0.3, 0.3) drawn in order (a_1, a_2, a_3) per sample from a
/// ChaCha8 stream seeded with `seed`; each density is normalized on the
/// grid. Identical seed, grid, and count reproduce identical densities.
pub fn perturbed_gaussians(grid: Grid1D, count: usize, seed: u64) -> Result<Vec<GridMeasure>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = grid.centers();
    (0..count)
        .map(|_| {
            let mut a = [0.0f64; HARMONICS];
            for ak in &mut a {
                *ak = rng.random_range(-AMPLITUDE..AMPLITUDE);
            }
            let vals: Vec<f64> = centers
                .iter()
                .map(|x| {
                    let bump: f64 =
                        a.iter().enumerate().map(|(k, ak)| ak * ((k + 1) as f64 * x).sin()).sum();
                    (-x * x / 2.0 + bump).exp()
                })
                .collect();
            GridMeasure::normalize(&vals, grid)
                .map_err(|e| RunError::Numerical(format!("perturbed Gaussian: {e}")))
        })
        .collect()
}

/// Samples (J, W₂) = (t, √t) on `count` evenly spaced times in
/// [t_min, t_max]: the model curve of a unit-speed Dirac geodesic, whose
/// functional fit is θ = 1/2, c_f = 1 exactly.
pub fn dirac_path(t_min: f64, t_max: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    if !(t_min > 0.0 && t_max > t_min && count >= 2) {
        return Err(RunError::Config(format!(
            "dirac_path needs 0 < t_min < t_max and count >= 2, got [{t_min}, {t_max}] x {count}"
        )));
    }
    Ok((0..count)
        .map(|k| {
            let t = t_min + (t_max - t_min) * k as f64 / (count - 1) as f64;
            (t, t.sqrt())
        })
        .collect())
}
