//! FFT-backed circular convolution and the Toeplitz-embedding product used by
//! every shift family.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::linalg::is_pow2;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

fn inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

pub(crate) fn spectrum(x: &[f64], len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    forward(&mut buf);
    buf
}

/// Circular convolution of `x` (zero-padded to the spectrum length) with the
/// signal whose spectrum is `kernel`; returns the first `keep` outputs.
pub(crate) fn convolve_with_spectrum(x: &[f64], kernel: &[Complex64], keep: usize) -> Vec<f64> {
    let len = kernel.len();
    let mut buf = spectrum(x, len);
    for (a, b) in buf.iter_mut().zip(kernel) {
        *a *= b;
    }
    inverse(&mut buf);
    let scale = 1.0 / len as f64;
    buf[..keep].iter().map(|c| c.re * scale).collect()
}

/// `out_k = Σ_j a_j · b_{(k−j) mod n}` for equal power-of-two lengths.
pub fn circular_convolve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(invalid(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if !is_pow2(a.len()) {
        return Err(invalid(format!("length {} is not a power of two", a.len())));
    }
    let kb = spectrum(b, b.len());
    Ok(convolve_with_spectrum(a, &kb, a.len()))
}

/// Embeds the coefficients of an `m × n` matrix with entries `coef(j − i)`
/// into a length-`len` circulant kernel, `len ≥ n + m − 1`.
///
/// With this kernel, `out_i = Σ_j coef(j − i) v_j` is the first `m` outputs of
/// the circular convolution of `v` (zero-padded) with the kernel.
pub(crate) fn toeplitz_kernel(
    m: usize,
    n: usize,
    len: usize,
    coef: impl Fn(isize) -> f64,
) -> Vec<f64> {
    debug_assert!(len + 1 >= n + m);
    let mut b = vec![0.0; len];
    b[0] = coef(0);
    for d in 1..n {
        b[len - d] = coef(d as isize);
    }
    for d in 1..m {
        b[d] = coef(-(d as isize));
    }
    b
}

pub(crate) fn embedding_len(m: usize, n: usize) -> usize {
    (n + m - 1).next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::sample_gaussian;

    fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        (0..n)
            .map(|k| (0..n).map(|j| a[j] * b[(k + n - j) % n]).sum())
            .collect()
    }

    fn unit(seed: u64, n: usize) -> Vec<f64> {
        let g = sample_gaussian(seed, n).unwrap().g;
        let s = crate::linalg::norm(&g);
        g.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn identity_element() {
        let b = vec![0.5, -1.0, 2.0, 3.0];
        let e0 = vec![1.0, 0.0, 0.0, 0.0];
        let out = circular_convolve(&e0, &b).unwrap();
        for (x, y) in out.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_example() {
        let out = circular_convolve(&[1.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(direct(&[1.0, 1.0], &[2.0, 3.0]), vec![5.0, 5.0]);
        assert!((out[0] - 5.0).abs() < 1e-12 && (out[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_sum_at_4096() {
        let n = 4096;
        let a = unit(1, n);
        let b = unit(2, n);
        let fast = circular_convolve(&a, &b).unwrap();
        let slow = direct(&a, &b);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(circular_convolve(&[1.0, 2.0], &[1.0]).is_err());
        assert!(circular_convolve(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn toeplitz_embedding_matches_direct() {
        let (m, n) = (5, 11);
        let coef = |d: isize| (d as f64) * 0.5 + 1.0;
        let len = embedding_len(m, n);
        let k = spectrum(&toeplitz_kernel(m, n, len, coef), len);
        let v: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let fast = convolve_with_spectrum(&v, &k, m);
        for i in 0..m {
            let want: f64 = (0..n).map(|j| coef(j as isize - i as isize) * v[j]).sum();
            assert!((fast[i] - want).abs() < 1e-12);
        }
    }
}
