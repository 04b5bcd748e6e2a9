use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::geometry::PetGeometry;
use crate::error::{Error, Result};
use crate::kernels::{matvec, Backend, DenseMatrix};

/// Piecewise-constant test image with levels {0, 1, 4}: zero background, a
/// large disk at level 1 and two small hot disks at level 4.
pub fn disk_phantom(grid_side: usize) -> Vec<f64> {
    let g = PetGeometry {
        grid_side,
        n_detectors: 2,
    };
    let n = grid_side as f64;
    let inside = |x: f64, y: f64, cx: f64, cy: f64, r: f64| {
        let (dx, dy) = (x - cx * n, y - cy * n);
        dx * dx + dy * dy <= (r * n) * (r * n)
    };
    (0..g.n_pixels())
        .map(|j| {
            let (x, y) = g.pixel_center(j);
            if inside(x, y, -0.15, 0.1, 0.1) || inside(x, y, 0.15, -0.12, 0.07) {
                4.0
            } else if inside(x, y, 0.0, 0.0, 0.4) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Poisson counts with means `E λ_true`, reproducible for a given seed.
/// Counts are returned as integer-valued `f64`.
pub fn simulate_counts(
    lambda_true: &[f64],
    e: &DenseMatrix,
    seed: u64,
    backend: &Backend,
) -> Result<Vec<f64>> {
    if let Some(j) = lambda_true
        .iter()
        .position(|&l| !(l >= 0.0) || !l.is_finite())
    {
        return Err(Error::invalid(format!(
            "true intensity {j} must be finite and non-negative"
        )));
    }
    let means = matvec(e, lambda_true, backend)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    means
        .iter()
        .map(|&mean| {
            if mean <= 0.0 {
                return Ok(0.0);
            }
            let dist = Poisson::new(mean)
                .map_err(|err| Error::invalid(format!("poisson mean {mean}: {err}")))?;
            Ok(dist.sample(&mut rng))
        })
        .collect()
}
