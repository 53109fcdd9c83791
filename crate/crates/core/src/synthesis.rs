//! Time-varying surface coefficients for frequency-selective reflection.
//!
//! The surface applies the sequence `w = F b` (scaled by `1/|I|`) sample by
//! sample over one OFDM symbol. Because every reflector uses the same
//! sequence, the cascaded channel collapses to `w` times the aggregate tap sum
//! of all reflectors, and the spectrum of `w` is `K b`: reflection only on the
//! selected bins.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::selection::{selector_vector, SelectionError, SelectionSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("composite channel has {found} samples per reflector, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("sequence of length {found} does not match K = {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("bin {bin} outside [0, {k})")]
    BinOutOfRange { bin: usize, k: usize },
}

/// Unnormalized DFT of size `K` with `F[i][k] = exp(-j 2 pi i k / K)`.
///
/// `forward` computes `F x`; `adjoint` computes `F^H x`, whose entry `i` is the
/// response of `x` on bin `i`. `F^H F = K I`.
#[derive(Clone)]
pub struct SpectralBasis {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralBasis").field("len", &self.len).finish()
    }
}

impl SpectralBasis {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        SpectralBasis {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Basis whose adjoint uses the wrong exponent sign. Only for exercising
    /// the self-test's failure paths.
    #[doc(hidden)]
    pub fn with_flipped_adjoint(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        SpectralBasis {
            len,
            inverse: forward.clone(),
            forward,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `F x`.
    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SynthesisError> {
        self.check_len(x)?;
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        Ok(buf)
    }

    /// `F^H x`, i.e. all bin responses of `x`.
    pub fn adjoint(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SynthesisError> {
        self.check_len(x)?;
        let mut buf = x.to_vec();
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    fn check_len(&self, x: &[Complex64]) -> Result<(), SynthesisError> {
        if x.len() == self.len {
            Ok(())
        } else {
            Err(SynthesisError::LengthMismatch {
                expected: self.len,
                found: x.len(),
            })
        }
    }
}

/// `w = F b` for the selector of `sel`: `w[k] = sum_{i in I} exp(-j 2 pi i k / K)`.
pub fn synthesize_weights(sel: &SelectionSet, basis: &SpectralBasis) -> Result<Vec<Complex64>, SynthesisError> {
    let b: Vec<Complex64> = selector_vector(sel, basis.len())?
        .into_iter()
        .map(|x| Complex64::new(x, 0.0))
        .collect();
    basis.forward(&b)
}

/// Coefficient sequence actually applied by an `N`-reflector surface.
#[derive(Debug, Clone, PartialEq)]
pub struct RisProgram {
    weights: Vec<Complex64>,
    active_samples: usize,
    scale: f64,
    selection: SelectionSet,
}

impl RisProgram {
    pub fn new(sel: &SelectionSet, num_reflectors: usize, basis: &SpectralBasis) -> Result<Self, SynthesisError> {
        let w = synthesize_weights(sel, basis)?;
        Ok(apply_reflector_limit(w, sel, num_reflectors))
    }

    /// Truncated, unscaled weights `w~` (length `K`).
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    /// `min(N, K)`.
    pub fn active_samples(&self) -> usize {
        self.active_samples
    }

    /// `1 / |I|`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn selection(&self) -> &SelectionSet {
        &self.selection
    }

    /// The reflection coefficient applied at sample `k` (identical for every reflector).
    pub fn coefficient(&self, k: usize) -> Complex64 {
        self.weights[k] * self.scale
    }

    /// Phase of every applied coefficient, radians in `[-pi, pi]`.
    pub fn phases(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.arg()).collect()
    }
}

/// Keeps only the first `min(N, K)` samples of `w`.
///
/// A surface with fewer reflectors than subcarriers realizes an incomplete set
/// of DFT coefficients; for `N >= K` the program is exact.
pub fn apply_reflector_limit(mut w: Vec<Complex64>, sel: &SelectionSet, num_reflectors: usize) -> RisProgram {
    let active_samples = num_reflectors.min(w.len());
    for x in w.iter_mut().skip(active_samples) {
        *x = Complex64::new(0.0, 0.0);
    }
    RisProgram {
        weights: w,
        active_samples,
        scale: 1.0 / sel.len() as f64,
        selection: sel.clone(),
    }
}

/// Largest applied coefficient magnitude, `max_k |w~[k]| / |I|`.
pub fn passivity_margin(program: &RisProgram) -> f64 {
    program
        .weights
        .iter()
        .map(|w| w.norm())
        .fold(0.0, f64::max)
        * program.scale
}

/// Sum of all taps of all reflectors, `S = sum_n sum_k v_n[k]`.
pub fn aggregate_tap_sum(composite: &Array2<Complex64>) -> Complex64 {
    composite.iter().sum()
}

/// Reflected time-domain channel `h_c = (V Omega)^T 1_N` in factored form:
/// `h_c[k] = w~[k] S / |I|`.
pub fn composite_response(composite: &Array2<Complex64>, program: &RisProgram) -> Result<Vec<Complex64>, SynthesisError> {
    let k = program.weights.len();
    if composite.ncols() != k {
        return Err(SynthesisError::DimensionMismatch {
            expected: k,
            found: composite.ncols(),
        });
    }
    let total = aggregate_tap_sum(composite) * program.scale;
    Ok(program.weights.iter().map(|w| w * total).collect())
}

/// `f_i^H x = sum_k exp(+j 2 pi i k / K) x[k]`, evaluated directly.
pub fn bin_response(x: &[Complex64], bin: usize) -> Result<Complex64, SynthesisError> {
    let k = x.len();
    if bin >= k {
        return Err(SynthesisError::BinOutOfRange { bin, k });
    }
    Ok(x
        .iter()
        .enumerate()
        .map(|(n, &xn)| {
            // exponent reduced modulo K before scaling
            let m = (bin * n) % k;
            xn * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / k as f64)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Independent O(K^2) DFT with the exponent reduced modulo K.
    fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let k = x.len();
        (0..k)
            .map(|i| {
                x.iter()
                    .enumerate()
                    .map(|(n, &v)| v * Complex64::from_polar(1.0, sign * 2.0 * PI * ((i * n) % k) as f64 / k as f64))
                    .sum()
            })
            .collect()
    }

    fn sel(ix: &[usize], k: usize) -> SelectionSet {
        SelectionSet::from_indices(ix.to_vec(), k).unwrap()
    }

    #[test]
    fn weights_small_cases() {
        let basis = SpectralBasis::new(4);
        let w = synthesize_weights(&sel(&[0], 4), &basis).unwrap();
        for x in &w {
            assert!(close(*x, c(1.0, 0.0), 1e-15));
        }
        let w = synthesize_weights(&sel(&[1], 4), &basis).unwrap();
        let expected = [c(1., 0.), c(0., -1.), c(-1., 0.), c(0., 1.)];
        for (a, b) in w.iter().zip(expected) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn weights_match_naive_dft() {
        let basis = SpectralBasis::new(8);
        let s = sel(&[1, 3], 8);
        let b: Vec<Complex64> = selector_vector(&s, 8).unwrap().into_iter().map(|x| c(x, 0.0)).collect();
        let oracle = naive_dft(&b, -1.0);
        let w = synthesize_weights(&s, &basis).unwrap();
        for (a, o) in w.iter().zip(&oracle) {
            assert!(close(*a, *o, 1e-12));
        }
    }

    #[test]
    fn reflector_limit() {
        let basis = SpectralBasis::new(4);
        let s = sel(&[0], 4);
        let p = RisProgram::new(&s, 2, &basis).unwrap();
        assert_eq!(p.active_samples(), 2);
        let expected = [c(1., 0.), c(1., 0.), c(0., 0.), c(0., 0.)];
        for (a, b) in p.weights().iter().zip(expected) {
            assert!(close(*a, b, 1e-15));
        }
        let exact = RisProgram::new(&s, 9, &basis).unwrap();
        assert_eq!(exact.weights(), synthesize_weights(&s, &basis).unwrap().as_slice());

        let basis = SpectralBasis::new(400);
        let s = sel(&[3, 10, 200], 400);
        let single = RisProgram::new(&s, 1, &basis).unwrap();
        assert!(close(single.weights()[0], c(3.0, 0.0), 1e-12));
        assert!(single.weights()[1..].iter().all(|w| w.norm() == 0.0));
        let h = composite_response(&Array2::from_elem((1, 400), c(1.0, 0.0)), &single).unwrap();
        let spec = basis.adjoint(&h).unwrap();
        for x in &spec {
            assert!(close(*x, spec[0], 1e-9));
        }
    }

    #[test]
    fn passivity_examples() {
        let basis = SpectralBasis::new(4);
        let p = RisProgram::new(&sel(&[0, 2], 4), 4, &basis).unwrap();
        assert!((passivity_margin(&p) - 1.0).abs() < 1e-15);
        let mags: Vec<f64> = p.weights().iter().map(|w| w.norm()).collect();
        assert!((mags[0] - 2.0).abs() < 1e-15 && mags[1] < 1e-15 && (mags[2] - 2.0).abs() < 1e-15);
        let p = RisProgram::new(&sel(&[1], 4), 4, &basis).unwrap();
        assert!(p.weights().iter().all(|w| (w.norm() - 1.0).abs() < 1e-15));
        assert!((passivity_margin(&p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn composite_examples() {
        let basis = SpectralBasis::new(8);
        let s = sel(&[2, 5], 8);
        let p = RisProgram::new(&s, 8, &basis).unwrap();
        let zero = Array2::zeros((8, 8));
        assert!(composite_response(&zero, &p).unwrap().iter().all(|x| x.norm() == 0.0));

        let mut delta = Array2::zeros((1, 8));
        delta[[0, 0]] = c(1.0, 0.0);
        let h = composite_response(&delta, &p).unwrap();
        for (a, w) in h.iter().zip(p.weights()) {
            assert!(close(*a, w / 2.0, 1e-15));
        }
        assert!(composite_response(&Array2::zeros((8, 7)), &p).is_err());
    }

    #[test]
    fn bin_response_examples() {
        let mut delta = vec![c(0., 0.); 6];
        delta[0] = c(1.0, 0.0);
        for i in 0..6 {
            assert!(close(bin_response(&delta, i).unwrap(), c(1.0, 0.0), 1e-15));
        }
        let x = [c(1., 0.), c(1., 0.), c(0., 0.), c(0., 0.)];
        assert!(close(bin_response(&x, 2).unwrap(), c(0., 0.), 1e-15));
        assert!(close(bin_response(&x, 0).unwrap(), c(2., 0.), 1e-15));
        assert!(close(bin_response(&x, 1).unwrap(), c(1., 1.), 1e-15));
        assert!(bin_response(&x, 4).is_err());
    }

    #[test]
    fn adjoint_matches_single_bin() {
        let basis = SpectralBasis::new(12);
        let x: Vec<Complex64> = (0..12).map(|n| c((n as f64).sin(), (n as f64 * 0.3).cos())).collect();
        let all = basis.adjoint(&x).unwrap();
        let oracle = naive_dft(&x, 1.0);
        for i in 0..12 {
            assert!(close(all[i], bin_response(&x, i).unwrap(), 1e-12));
            assert!(close(all[i], oracle[i], 1e-12));
        }
    }

    #[test]
    fn exact_program_is_selective() {
        let basis = SpectralBasis::new(16);
        let s = sel(&[1, 4, 9], 16);
        let p = RisProgram::new(&s, 16, &basis).unwrap();
        let spec = basis.adjoint(p.weights()).unwrap();
        for (i, x) in spec.iter().enumerate() {
            let expected = if s.contains(i) { 16.0 } else { 0.0 };
            assert!(close(*x, c(expected, 0.0), 1e-12));
        }
    }

    proptest! {
        #[test]
        fn passivity_holds(k in 2usize..128, n in 1usize..160, mask in any::<u128>()) {
            let mut ix: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            if ix.is_empty() {
                ix.push((mask % k as u128) as usize);
            }
            let s = SelectionSet::from_indices(ix, k).unwrap();
            let p = RisProgram::new(&s, n, &SpectralBasis::new(k)).unwrap();
            prop_assert!(passivity_margin(&p) <= 1.0 + 1e-12);
            prop_assert!((p.coefficient(0).norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn parseval(re in proptest::collection::vec(-1.0f64..1.0, 1..64), seed in 0.0f64..6.0) {
            let x: Vec<Complex64> = re.iter().enumerate().map(|(n, &r)| c(r, (seed + n as f64).sin())).collect();
            let basis = SpectralBasis::new(x.len());
            let spec = basis.adjoint(&x).unwrap();
            let lhs: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
            let rhs: f64 = x.len() as f64 * x.iter().map(|v| v.norm_sqr()).sum::<f64>();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }

        #[test]
        fn composite_is_linear(a in proptest::collection::vec(-1.0f64..1.0, 32), b in proptest::collection::vec(-1.0f64..1.0, 32), alpha in -3.0f64..3.0) {
            let k = 8;
            let basis = SpectralBasis::new(k);
            let p = RisProgram::new(&sel(&[0, 3], k), 5, &basis).unwrap();
            let va = Array2::from_shape_fn((2, k), |(r, col)| c(a[r * k + col], a[16 + r * k + col]));
            let vb = Array2::from_shape_fn((2, k), |(r, col)| c(b[r * k + col], b[16 + r * k + col]));
            let sum = &va + &(&vb * c(alpha, 0.0));
            let ha = composite_response(&va, &p).unwrap();
            let hb = composite_response(&vb, &p).unwrap();
            let hs = composite_response(&sum, &p).unwrap();
            for t in 0..k {
                prop_assert!(close(hs[t], ha[t] + hb[t] * alpha, 1e-12));
            }
        }
    }
}
