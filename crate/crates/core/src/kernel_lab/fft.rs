use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place unnormalised n-d DFT over a row-major array (last axis fastest).
/// `inverse` selects the `e^{+i}` sign.
pub(crate) fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total, "buffer does not match dimensions");
    let mut planner = FftPlanner::<f64>::new();
    let mut line = Vec::new();
    for (axis, &n) in dims.iter().enumerate() {
        if n <= 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride: usize = dims[axis + 1..].iter().product();
        let block = n * stride;
        line.resize(n, Complex64::new(0.0, 0.0));
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Signed frequency index for position `l` of an `n`-point DFT.
pub(crate) fn signed_index(l: usize, n: usize) -> f64 {
    if l < n / 2 {
        l as f64
    } else {
        l as f64 - n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_dft_in_two_dimensions() {
        let dims = [4usize, 8];
        let data: Vec<Complex64> = (0..32).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
        let mut out = data.clone();
        fft_nd(&mut out, &dims, false);
        for a in 0..4 {
            for b in 0..8 {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..4 {
                    for k in 0..8 {
                        let ph = -2.0 * std::f64::consts::PI * (a * j) as f64 / 4.0 - 2.0 * std::f64::consts::PI * (b * k) as f64 / 8.0;
                        acc += data[j * 8 + k] * Complex64::from_polar(1.0, ph);
                    }
                }
                assert!((acc - out[a * 8 + b]).norm() < 1e-12);
            }
        }
        fft_nd(&mut out, &dims, true);
        for (x, y) in out.iter().zip(&data) {
            assert!((x / 32.0 - y).norm() < 1e-14);
        }
    }
}
