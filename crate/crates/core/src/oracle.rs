//! Slow reference computations used by the self-test and the test suites.
//!
//! Nothing here shares code with the fast paths it checks: the DFT is a
//! direct double loop, the reflected channel is formed from the explicit
//! `K x K` configuration matrix, the composite taps are summed path pair by
//! path pair, and water-filling enumerates active sets.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use crate::channel::PathSet;
use crate::config::ScenarioConfig;

/// `sum_n x[n] exp(sign * j 2 pi i n / K)` for every `i`.
pub fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
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

/// `(V Omega)^T 1_N` with `Omega = 1_K w^T / |I|` materialized.
pub fn dense_composite(composite: &Array2<Complex64>, weights: &[Complex64], selected: usize) -> Vec<Complex64> {
    let k = weights.len();
    let omega = Array2::from_shape_fn((k, k), |(_, col)| weights[col] / selected as f64);
    let product = composite.dot(&omega);
    (0..k).map(|col| product.column(col).iter().sum()).collect()
}

fn tap(offset_samples: f64) -> usize {
    (offset_samples + 0.5).floor() as usize
}

fn array_phase(reflector: usize, azimuth: f64, elevation: f64, cfg: &ScenarioConfig) -> Complex64 {
    let lambda = 299_792_458.0 / cfg.carrier_hz;
    let (row, col) = (reflector / cfg.n_col, reflector % cfg.n_col);
    let y = (col as f64 - (cfg.n_col - 1) as f64 / 2.0) * cfg.element_spacing_h * lambda;
    let z = (row as f64 - (cfg.n_row - 1) as f64 / 2.0) * cfg.element_spacing_v * lambda;
    let phase = 2.0 * PI / lambda * (y * azimuth.sin() * elevation.cos() + z * elevation.sin());
    Complex64::from_polar(1.0, phase)
}

/// Composite taps `v_n` by summing every (AP-RIS, RIS-UE) path pair.
///
/// Pair `(l, l')` lands on tap `k_a(l) + k_b(l') + k_0`, where each link is
/// rounded relative to its own first path and `k_0` is the rounded excess of
/// the two first-path delays over `tau_ref`.
pub fn pair_sum_composite(a: &PathSet, b: &PathSet, tau_ref: f64, cfg: &ScenarioConfig) -> Array2<Complex64> {
    let k = cfg.num_subcarriers;
    let fs = cfg.bandwidth;
    let tau_a = a.paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
    let tau_b = b.paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min);
    let shift = tap((tau_a + tau_b - tau_ref) * fs);
    let mut v = Array2::zeros((cfg.n_row * cfg.n_col, k));
    for n in 0..cfg.n_row * cfg.n_col {
        for pa in &a.paths {
            for pb in &b.paths {
                let idx = tap((pa.delay - tau_a) * fs) + tap((pb.delay - tau_b) * fs) + shift;
                if idx < k {
                    v[[n, idx]] += pa.gain
                        * pb.gain
                        * array_phase(n, pa.azimuth, pa.elevation, cfg)
                        * array_phase(n, pb.azimuth, pb.elevation, cfg);
                }
            }
        }
    }
    v
}

/// Optimal power allocation by trying every active set (`K <= 20`).
pub fn waterfill_by_enumeration(gains: &[f64], mean_power: f64) -> Vec<f64> {
    let k = gains.len();
    assert!(k <= 20, "enumeration oracle limited to 20 bins");
    let total = mean_power * k as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << k) {
        let active: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        if active.iter().any(|&i| gains[i] <= 0.0) {
            continue;
        }
        let level = (total + active.iter().map(|&i| 1.0 / gains[i]).sum::<f64>()) / active.len() as f64;
        let mut power = vec![0.0; k];
        let mut feasible = true;
        for &i in &active {
            power[i] = level - 1.0 / gains[i];
            feasible &= power[i] >= 0.0;
        }
        if !feasible {
            continue;
        }
        let rate: f64 = (0..k).map(|i| (1.0 + power[i] * gains[i]).log2()).sum();
        if best.as_ref().is_none_or(|(r, _)| rate > *r) {
            best = Some((rate, power));
        }
    }
    best.map(|(_, p)| p).unwrap_or_else(|| vec![0.0; k])
}
