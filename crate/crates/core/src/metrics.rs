//! Per-bin gains, water-filling, achievable and coherent rates, and the
//! selectivity ratio of the reflected signal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::selection::SelectionSet;
use crate::synthesis::{SpectralBasis, SynthesisError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("water-filling needs at least one positive gain")]
    AllGainsZero,
    #[error("gain {0} is negative or not finite")]
    BadGain(f64),
    #[error("selectivity ratio undefined when all {0} bins are selected")]
    NoUnselectedBins(usize),
    #[error("empty selection")]
    EmptySelection,
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Bandwidth occupied by the selected bins, `|I| B / K`.
pub fn rate_bandwidth(cfg: &ScenarioConfig, selected: usize) -> f64 {
    selected as f64 * cfg.bandwidth / cfg.num_subcarriers as f64
}

/// Noise power `B_rate * N_0` used in every bin's SNR, watts.
pub fn noise_power(cfg: &ScenarioConfig, selected: usize) -> f64 {
    rate_bandwidth(cfg, selected) * dbm_to_watts(cfg.noise_density)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Watts per bin.
    pub power: Vec<f64>,
    pub water_level: f64,
}

impl PowerAllocation {
    pub fn mean_power(&self) -> f64 {
        self.power.iter().sum::<f64>() / self.power.len() as f64
    }
}

/// Selectivity ratio. An interference-free reflection is kept apart from
/// finite values instead of being encoded as a large number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SignalToInterference {
    Finite(f64),
    Unbounded,
}

impl SignalToInterference {
    pub fn is_unbounded(self) -> bool {
        matches!(self, SignalToInterference::Unbounded)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            SignalToInterference::Finite(x) => Some(x),
            SignalToInterference::Unbounded => None,
        }
    }

    /// `f64::INFINITY` for the unbounded case.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    /// Achievable rate, bit/s.
    pub rate: f64,
    /// Rate with direct and reflected bin responses added in phase, bit/s.
    pub coherent_rate: f64,
    /// `100 * rate / coherent_rate`; `None` when the coherent rate is zero.
    pub relative_rate: Option<f64>,
    pub s_over_i: SignalToInterference,
    /// Cyclic-prefix normalization `|I| + M - 1`.
    pub xi: usize,
    /// Bandwidth entering the rate, Hz.
    pub rate_bandwidth: f64,
}

/// Bin responses of one link: `D_i = f_i^H h_d / |I|` and `C_i = f_i^H h_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinResponses {
    pub direct: Vec<Complex64>,
    pub composite: Vec<Complex64>,
}

impl BinResponses {
    pub fn new(
        basis: &SpectralBasis,
        direct_taps: &[Complex64],
        composite_taps: &[Complex64],
        sel: &SelectionSet,
    ) -> Result<Self, MetricsError> {
        if sel.is_empty() {
            return Err(MetricsError::EmptySelection);
        }
        let inv = 1.0 / sel.len() as f64;
        let direct = basis.adjoint(direct_taps)?.into_iter().map(|d| d * inv).collect();
        let composite = basis.adjoint(composite_taps)?;
        Ok(BinResponses { direct, composite })
    }

    pub fn len(&self) -> usize {
        self.direct.len()
    }

    pub fn is_empty(&self) -> bool {
        self.direct.is_empty()
    }

    /// Per-bin SNR per watt: `|D_i + C_i|^2 / noise`, or `(|D_i| + |C_i|)^2 / noise`
    /// when `coherent`.
    pub fn gains(&self, noise: f64, coherent: bool) -> Vec<f64> {
        self.direct
            .iter()
            .zip(&self.composite)
            .map(|(d, c)| {
                let combined = (d + c).norm_sqr();
                let g = if coherent {
                    // |D| + |C| >= |D + C|; the max only absorbs rounding
                    combined.max((d.norm() + c.norm()).powi(2))
                } else {
                    combined
                };
                g / noise
            })
            .collect()
    }
}

/// Gains of one link evaluated from its taps.
pub fn per_bin_gain(
    direct_taps: &[Complex64],
    composite_taps: &[Complex64],
    sel: &SelectionSet,
    cfg: &ScenarioConfig,
    coherent: bool,
) -> Result<Vec<f64>, MetricsError> {
    let basis = SpectralBasis::new(direct_taps.len());
    let bins = BinResponses::new(&basis, direct_taps, composite_taps, sel)?;
    Ok(bins.gains(noise_power(cfg, sel.len()), coherent))
}

/// Water-filling over `gains` with mean power `mean_power` per bin.
///
/// The water level is bracketed by bisection, then fixed in closed form on
/// the resulting active set so the total power is met to rounding error.
pub fn waterfill(gains: &[f64], mean_power: f64) -> Result<PowerAllocation, MetricsError> {
    if let Some(&g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(MetricsError::BadGain(g));
    }
    if !gains.iter().any(|&g| g > 0.0) {
        return Err(MetricsError::AllGainsZero);
    }
    let total = mean_power * gains.len() as f64;
    let floors: Vec<f64> = gains
        .iter()
        .map(|&g| if g > 0.0 { 1.0 / g } else { f64::INFINITY })
        .collect();
    let filled = |mu: f64| floors.iter().map(|&f| (mu - f).max(0.0)).sum::<f64>();

    let lowest = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (lowest, lowest + total);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if filled(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut level = hi;
    for _ in 0..gains.len() + 1 {
        let active: Vec<f64> = floors.iter().copied().filter(|&f| f < level).collect();
        let refined = (total + active.iter().sum::<f64>()) / active.len() as f64;
        let consistent = floors.iter().all(|&f| (f < level) == (f < refined));
        level = refined;
        if consistent {
            break;
        }
    }

    let power = floors.iter().map(|&f| (level - f).max(0.0)).collect();
    Ok(PowerAllocation {
        power,
        water_level: level,
    })
}

/// `(B_rate / xi) * sum_i log2(1 + p_i g_i)` with `xi = |I| + M - 1`.
pub fn achievable_rate(gains: &[f64], power: &[f64], selected: usize, channel_len: usize, bandwidth: f64) -> f64 {
    let xi = (selected + channel_len).saturating_sub(1).max(1) as f64;
    let bits: f64 = gains
        .iter()
        .zip(power)
        .map(|(g, p)| (p * g).ln_1p() / std::f64::consts::LN_2)
        .sum();
    bandwidth / xi * bits
}

/// Combined power on the selected bins over reflected power on the rest.
///
/// The direct channel counts in the numerator only.
pub fn s_over_i(bins: &BinResponses, sel: &SelectionSet) -> Result<SignalToInterference, MetricsError> {
    let k = bins.len();
    if sel.len() >= k {
        return Err(MetricsError::NoUnselectedBins(k));
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, (d, c)) in bins.direct.iter().zip(&bins.composite).enumerate() {
        if sel.contains(i) {
            signal += (d + c).norm_sqr();
        } else {
            interference += c.norm_sqr();
        }
    }
    if interference == 0.0 || interference < 1e-24 * signal {
        Ok(SignalToInterference::Unbounded)
    } else {
        Ok(SignalToInterference::Finite(signal / interference))
    }
}

fn masked(gains: Vec<f64>, sel: &SelectionSet, restrict: bool) -> Vec<f64> {
    if !restrict {
        return gains;
    }
    gains
        .into_iter()
        .enumerate()
        .map(|(i, g)| if sel.contains(i) { g } else { 0.0 })
        .collect()
}

fn waterfilled_rate(gains: &[f64], cfg: &ScenarioConfig, sel: &SelectionSet, channel_len: usize) -> Result<f64, MetricsError> {
    match waterfill(gains, dbm_to_watts(cfg.tx_power)) {
        Ok(alloc) => Ok(achievable_rate(
            gains,
            &alloc.power,
            sel.len(),
            channel_len,
            rate_bandwidth(cfg, sel.len()),
        )),
        Err(MetricsError::AllGainsZero) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Achievable, coherent and relative rate plus selectivity for one link.
///
/// Both rates water-fill their own gains.
pub fn relative_rate(
    bins: &BinResponses,
    sel: &SelectionSet,
    channel_len: usize,
    cfg: &ScenarioConfig,
) -> Result<LinkMetrics, MetricsError> {
    let noise = noise_power(cfg, sel.len());
    let restrict = cfg.rate_selected_only;
    let g = masked(bins.gains(noise, false), sel, restrict);
    let g_coh = masked(bins.gains(noise, true), sel, restrict);
    let rate = waterfilled_rate(&g, cfg, sel, channel_len)?;
    let coherent_rate = waterfilled_rate(&g_coh, cfg, sel, channel_len)?;
    let relative = (coherent_rate > 0.0).then(|| 100.0 * rate / coherent_rate);
    Ok(LinkMetrics {
        rate,
        coherent_rate,
        relative_rate: relative,
        s_over_i: s_over_i(bins, sel)?,
        xi: sel.len() + channel_len - 1,
        rate_bandwidth: rate_bandwidth(cfg, sel.len()),
    })
}
