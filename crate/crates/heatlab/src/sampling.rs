//! Seeded test-field generators: band-limited random fields, localized
//! Gaussian bumps and the seam window used for identities involving the
//! sawtooth coordinate `x`.

use crate::grid::{Field, GridSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Random real field with modes `|m| <= k_max`, unit `L²` norm.
///
/// With `zero_mean` the constant mode is left out, which keeps the field
/// outside the antiderivative's kernel direction.
pub fn band_limited(grid: GridSpec, k_max: usize, seed: u64, zero_mean: bool) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = grid.half_width();
    let mut f = Field::zeros(grid);
    let mut acc = vec![0.0; grid.n_points()];
    let mean: f64 = if zero_mean { 0.0 } else { rng.sample(StandardNormal) };
    for x in acc.iter_mut() {
        *x = mean;
    }
    for m in 1..=k_max.min(grid.n_points() / 2 - 1) {
        let k = std::f64::consts::PI * m as f64 / a;
        let c: f64 = rng.sample(StandardNormal);
        let s: f64 = rng.sample(StandardNormal);
        for (i, x) in acc.iter_mut().enumerate() {
            let p = k * grid.point(i);
            *x += c * p.cos() + s * p.sin();
        }
    }
    f.values_mut().copy_from_slice(&acc);
    let norm = f.l2_norm();
    if norm > 0.0 {
        f.scale(1.0 / norm)
    } else {
        f
    }
}

/// `e^{-(x-center)²/(2σ²)}`; for `σ ≲ a/6` the tails at the seam are
/// negligible and the field is effectively band-limited.
pub fn gaussian_bump(grid: GridSpec, center: f64, sigma: f64) -> Field {
    Field::from_fn(grid, |x| {
        let d = x - center;
        (-d * d / (2.0 * sigma * sigma)).exp()
    })
}

/// Seam window `e^{-(x/0.8a)^8}`: flat around the origin, vanishing at the
/// periodic seam `x = ±a` where the sawtooth coordinate jumps.
pub fn seam_window(grid: GridSpec) -> Field {
    let a = grid.half_width();
    Field::from_fn(grid, |x| {
        let r = x / (0.8 * a);
        (-r.powi(8)).exp()
    })
}

/// Deterministic suite of `count` random sample times in `[t_min, t_max]`.
pub fn sample_times(t_min: f64, t_max: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..count).map(|_| rng.gen_range(t_min..t_max)).collect()
}
