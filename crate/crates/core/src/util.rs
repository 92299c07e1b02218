//! Small numeric and formatting helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

/// Formats a real with 17 significant digits, the format used by every CSV writer.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Independent ChaCha stream `stream` derived from `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed for replicate `r` of experiment cell `cell`.
pub fn derive_seed(seed: u64, cell: u64, r: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(cell.wrapping_add(0x5eed))) ^ r)
}

/// Scaled complementary error function `exp(y²)·erfc(y)` for `y >= 0`.
pub(crate) fn erfcx(y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    if y < 26.0 {
        (y * y).exp() * erfc(y)
    } else {
        erfcx_asymptotic(y)
    }
}

fn erfcx_asymptotic(y: f64) -> f64 {
    // 1 + Σ (-1)^k (2k-1)!! / (2y²)^k
    let x = 0.5 / (y * y);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) * x;
        sum += term;
    }
    sum / (y * std::f64::consts::PI.sqrt())
}

/// Standard normal CDF.
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
