//! Randomness generation and the `v ↦ D₁ H D₀ v` preprocessing map.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::linalg::is_pow2;
use crate::rng::{stream, STREAM_GAUSSIAN, STREAM_SIGNS};

/// The shared vector `g` of `t` independent standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomnessBudget {
    /// `None` when the values were supplied by hand.
    pub seed: Option<u64>,
    pub g: Vec<f64>,
}

impl RandomnessBudget {
    /// Wraps explicit values, e.g. a unit vector for hand-checked examples.
    pub fn from_values(g: Vec<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(invalid("budget must have at least one entry"));
        }
        Ok(Self { seed: None, g })
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

/// A diagonal matrix with `±1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDiagonal {
    pub seed: Option<u64>,
    pub d: Vec<f64>,
}

impl SignDiagonal {
    pub fn ones(n: usize) -> Self {
        Self { seed: None, d: vec![1.0; n] }
    }

    pub fn from_signs(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(invalid("sign diagonal must be nonempty"));
        }
        if d.iter().any(|&x| x != 1.0 && x != -1.0) {
            return Err(invalid("sign diagonal entries must be exactly -1 or +1"));
        }
        Ok(Self { seed: None, d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.d).map(|(x, s)| x * s).collect()
    }
}

/// Draws `t` standard normals from the Gaussian stream of `seed`.
pub fn sample_gaussian(seed: u64, t: usize) -> Result<RandomnessBudget> {
    if t == 0 {
        return Err(invalid("budget length t must be positive"));
    }
    let mut rng = stream(seed, STREAM_GAUSSIAN);
    let g = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    Ok(RandomnessBudget { seed: Some(seed), g })
}

/// Draws `n` independent fair signs from the sign stream of `seed`.
pub fn sample_signs(seed: u64, n: usize) -> Result<SignDiagonal> {
    if n == 0 {
        return Err(invalid("sign diagonal length must be positive"));
    }
    let mut rng = stream(seed, STREAM_SIGNS);
    let d = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    Ok(SignDiagonal { seed: Some(seed), d })
}

/// In-place orthonormal Walsh–Hadamard transform.
pub fn fwht_in_place(x: &mut [f64]) -> Result<()> {
    let n = x.len();
    if !is_pow2(n) {
        return Err(invalid(format!("FWHT length {n} is not a power of two")));
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, w) = (*a, *b);
                *a = u + w;
                *b = u - w;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(())
}

/// `H x` with `H` the `1/√n`-scaled Hadamard matrix.
pub fn fwht(x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// `D₁ · H · (D₀ · v)`.
pub fn preprocess(v: &[f64], d0: &SignDiagonal, d1: &SignDiagonal) -> Result<Vec<f64>> {
    if v.len() != d0.len() || v.len() != d1.len() {
        return Err(invalid(format!(
            "length mismatch: v has {}, D0 has {}, D1 has {}",
            v.len(),
            d0.len(),
            d1.len()
        )));
    }
    let mut w = d0.apply(v);
    fwht_in_place(&mut w)?;
    Ok(d1.apply(&w))
}

/// Zero-pads `v` to the next power of two.
pub fn pad_pow2(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(invalid("cannot pad an empty vector"));
    }
    let mut out = v.to_vec();
    out.resize(v.len().next_power_of_two(), 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use proptest::prelude::*;

    fn hadamard_dense(n: usize) -> Vec<Vec<f64>> {
        let s = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if (i & j).count_ones() % 2 == 0 { s } else { -s })
                    .collect()
            })
            .collect()
    }

    fn random_vec(seed: u64, n: usize) -> Vec<f64> {
        sample_gaussian(seed, n).unwrap().g
    }

    #[test]
    fn gaussian_is_deterministic() {
        assert_eq!(sample_gaussian(7, 4).unwrap(), sample_gaussian(7, 4).unwrap());
        assert_ne!(sample_gaussian(7, 4).unwrap().g, sample_gaussian(8, 4).unwrap().g);
    }

    #[test]
    fn gaussian_moments() {
        let t = 100_000;
        let g = sample_gaussian(7, t).unwrap().g;
        let mean = g.iter().sum::<f64>() / t as f64;
        let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        assert!(mean.abs() <= 0.016, "mean {mean}");
        assert!((var - 1.0).abs() <= 5.0 * (2.0 / t as f64).sqrt(), "var {var}");
    }

    #[test]
    fn zero_lengths_rejected() {
        assert!(sample_gaussian(1, 0).is_err());
        assert!(sample_signs(1, 0).is_err());
        assert!(pad_pow2(&[]).is_err());
    }

    #[test]
    fn signs_codomain_and_balance() {
        let s = sample_signs(3, 8).unwrap();
        assert_eq!(s.len(), 8);
        assert!(s.d.iter().all(|&x| x == 1.0 || x == -1.0));
        assert_eq!(s, sample_signs(3, 8).unwrap());

        let n = 100_000;
        let big = sample_signs(3, n).unwrap();
        let plus = big.d.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
        assert!((0.492..=0.508).contains(&plus), "fraction {plus}");
    }

    #[test]
    fn fwht_small_cases() {
        let y = fwht(&[1.0, 0.0]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((y[0] - r).abs() < 1e-15 && (y[1] - r).abs() < 1e-15);
        assert_eq!(fwht(&[1.0, 1.0, 1.0, 1.0]).unwrap(), vec![2.0, 0.0, 0.0, 0.0]);
        assert_eq!(fwht(&[3.5]).unwrap(), vec![3.5]);
        assert!(fwht(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn fwht_matches_dense_hadamard() {
        let n = 64;
        let x = random_vec(11, n);
        let h = hadamard_dense(n);
        let fast = fwht(&x).unwrap();
        for (i, row) in h.iter().enumerate() {
            let want: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((fast[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn preprocess_with_identity_diagonals_is_fwht() {
        let v = vec![0.3, -1.0, 2.0, 0.5];
        let ones = SignDiagonal::ones(4);
        assert_eq!(preprocess(&v, &ones, &ones).unwrap(), fwht(&v).unwrap());
        assert!(preprocess(&v, &ones, &SignDiagonal::ones(8)).is_err());
    }

    #[test]
    fn preprocess_is_isometry() {
        let n = 256;
        let v = random_vec(5, n);
        let d0 = sample_signs(1, n).unwrap();
        let d1 = sample_signs(2, n).unwrap();
        let y = preprocess(&v, &d0, &d1).unwrap();
        assert!((norm(&y) - norm(&v)).abs() <= 1e-12 * norm(&v));
    }

    #[test]
    fn preprocessed_unit_vectors_are_balanced() {
        let n = 1024;
        let bound = (n as f64).ln() / (n as f64).sqrt();
        let mut ok = 0;
        for trial in 0..100u64 {
            let mut v = random_vec(1000 + trial, n);
            let s = norm(&v);
            v.iter_mut().for_each(|x| *x /= s);
            let y = preprocess(
                &v,
                &sample_signs(2 * trial, n).unwrap(),
                &sample_signs(2 * trial + 1, n).unwrap(),
            )
            .unwrap();
            if y.iter().all(|x| x.abs() <= bound) {
                ok += 1;
            }
        }
        assert!(ok >= 99, "{ok}/100 balanced");
    }

    #[test]
    fn pad_cases() {
        let p = pad_pow2(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(p, vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 0.0]);
        let v: Vec<f64> = (0..8).map(f64::from).collect();
        assert_eq!(pad_pow2(&v).unwrap(), v);
    }

    proptest! {
        #[test]
        fn fwht_is_an_involution(p in 0u32..=14, seed in any::<u64>()) {
            let x = random_vec(seed, 1usize << p);
            let back = fwht(&fwht(&x).unwrap()).unwrap();
            let scale = norm(&x).max(1.0);
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn preprocess_is_linear(p in 0u32..=10, seed in any::<u64>()) {
            let n = 1usize << p;
            let u = random_vec(seed, n);
            let w = random_vec(seed.wrapping_add(1), n);
            let d0 = sample_signs(seed, n).unwrap();
            let d1 = sample_signs(seed ^ 0xff, n).unwrap();
            let sum: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + b).collect();
            let lhs = preprocess(&sum, &d0, &d1).unwrap();
            let pu = preprocess(&u, &d0, &d1).unwrap();
            let pw = preprocess(&w, &d0, &d1).unwrap();
            let diff: Vec<f64> = lhs.iter().zip(pu.iter().zip(&pw)).map(|(l, (a, b))| l - a - b).collect();
            prop_assert!(norm(&diff) <= 1e-10);
            prop_assert!((norm(&pu) - norm(&u)).abs() <= 1e-12 * norm(&u).max(1e-300));
        }

        #[test]
        fn padding_preserves_norm(v in proptest::collection::vec(-10.0f64..10.0, 1..100)) {
            let p = pad_pow2(&v).unwrap();
            prop_assert!(p.len().is_power_of_two());
            prop_assert!((norm(&p) - norm(&v)).abs() <= 1e-12 * norm(&v).max(1.0));
        }
    }
}
