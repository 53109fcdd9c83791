//! Random multipath realizations as `K`-sample tapped delay lines.
//!
//! The surface lies in the local y-z plane centered at `ris_pos`, with its
//! normal along x. Azimuth is measured in the x-y plane from the x axis and
//! elevation from the x-y plane, so a direction is
//! `(cos az cos el, sin az cos el, sin el)`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::config::{ScenarioConfig, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("reflector index {index} out of range for N = {n}")]
    ReflectorOutOfRange { index: usize, n: usize },
    #[error("path delay {delay} s precedes the reference delay {tau_ref} s")]
    DelayBeforeReference { delay: f64, tau_ref: f64 },
    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Propagation delay, seconds.
    pub delay: f64,
    pub gain: Complex64,
    /// Radians.
    pub azimuth: f64,
    /// Radians.
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<Path>,
    /// Path 0 is the line-of-sight path.
    pub has_los: bool,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn min_delay(&self) -> f64 {
        self.paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min)
    }
}

/// One drawn channel: direct taps `h_d` and one composite tap row `v_n` per reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Direct AP-UE taps, length `K`.
    pub direct: Vec<Complex64>,
    /// Composite AP-RIS-UE taps, `N x K`, row-major reflector order.
    pub composite: Array2<Complex64>,
    /// `1 +` the largest nonzero tap index across `direct` and `composite`.
    pub channel_len: usize,
    /// Delay subtracted from every path, seconds.
    pub tau_ref: f64,
    /// Number of path contributions that fell beyond tap `K - 1`.
    pub dropped_taps: usize,
    pub direct_paths: PathSet,
    pub ap_ris_paths: PathSet,
    pub ris_ue_paths: PathSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapSequence {
    pub taps: Vec<Complex64>,
    pub dropped: usize,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Azimuth and elevation (radians) of `target` as seen from the surface center.
pub fn los_direction(ris: [f64; 3], target: [f64; 3]) -> (f64, f64) {
    let d = [target[0] - ris[0], target[1] - ris[1], target[2] - ris[2]];
    let r = distance(ris, target);
    (d[1].atan2(d[0]), (d[2] / r).asin())
}

/// Free-space LOS gain `lambda / (4 pi d) * exp(-j 2 pi d / lambda)`.
pub fn free_space_gain(distance_m: f64, wavelength: f64) -> Complex64 {
    Complex64::from_polar(
        wavelength / (4.0 * PI * distance_m),
        -2.0 * PI * (distance_m / wavelength).fract(),
    )
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> Complex64 {
    let sigma = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sigma, im * sigma)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `L_d` NLOS paths with delays uniform on `[tau_d, 2 tau_d]`, `tau_d = |ap - ue| / c`.
pub fn draw_direct_paths<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> PathSet {
    let d = distance(cfg.ap_pos, cfg.ue_pos);
    let tau_d = d / SPEED_OF_LIGHT;
    let reference_power = free_space_gain(d, cfg.wavelength()).norm_sqr();
    let power = reference_power * db_to_linear(-(cfg.nlos_penalty_db + cfg.direct_extra_loss_db));
    let paths = (0..cfg.paths_direct)
        .map(|_| {
            let delay = uniform(rng, tau_d, 2.0 * tau_d);
            Path {
                delay,
                gain: complex_gaussian(rng, power),
                azimuth: 0.0,
                elevation: 0.0,
            }
        })
        .collect();
    PathSet { paths, has_los: false }
}

fn draw_link<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig, count: usize, far_end: [f64; 3]) -> PathSet {
    let d = distance(cfg.ris_pos, far_end);
    let tau_los = d / SPEED_OF_LIGHT;
    let los_gain = free_space_gain(d, cfg.wavelength());
    let nlos_power = los_gain.norm_sqr() * db_to_linear(-cfg.nlos_penalty_db);
    let (az, el) = los_direction(cfg.ris_pos, far_end);
    let az_spread = cfg.azimuth_spread.to_radians();
    let el_spread = cfg.elevation_spread.to_radians();

    let mut paths = Vec::with_capacity(count);
    paths.push(Path {
        delay: tau_los,
        gain: los_gain,
        azimuth: az,
        elevation: el,
    });
    for _ in 1..count {
        let delay = uniform(rng, tau_los, 2.0 * tau_los);
        let azimuth = az + uniform(rng, -az_spread, az_spread);
        let elevation = el + uniform(rng, -el_spread, el_spread);
        paths.push(Path {
            delay,
            gain: complex_gaussian(rng, nlos_power),
            azimuth,
            elevation,
        });
    }
    PathSet { paths, has_los: true }
}

/// AP-RIS (`L_a` paths) and RIS-UE (`L_b` paths) sets, each led by its LOS path.
pub fn draw_composite_paths<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> (PathSet, PathSet) {
    let a = draw_link(rng, cfg, cfg.paths_ap_ris, cfg.ap_pos);
    let b = draw_link(rng, cfg, cfg.paths_ris_ue, cfg.ue_pos);
    (a, b)
}

/// Array response of one reflector for a plane wave from `(azimuth, elevation)`.
///
/// Reflectors are indexed row-major and positioned relative to the array center.
pub fn steering_phase(
    reflector: usize,
    azimuth: f64,
    elevation: f64,
    cfg: &ScenarioConfig,
) -> Result<Complex64, ChannelError> {
    let n = cfg.num_reflectors();
    if reflector >= n {
        return Err(ChannelError::ReflectorOutOfRange { index: reflector, n });
    }
    let lambda = cfg.wavelength();
    let row = (reflector / cfg.n_col) as f64;
    let col = (reflector % cfg.n_col) as f64;
    let y = (col - (cfg.n_col as f64 - 1.0) / 2.0) * cfg.element_spacing_h * lambda;
    let z = (row - (cfg.n_row as f64 - 1.0) / 2.0) * cfg.element_spacing_v * lambda;
    let path_len = y * azimuth.sin() * elevation.cos() + z * elevation.sin();
    Ok(Complex64::from_polar(1.0, 2.0 * PI / lambda * path_len))
}

/// Tap index `floor(x + 1/2)` for a delay offset of `x` samples.
pub fn tap_index(offset_samples: f64) -> usize {
    (offset_samples + 0.5).floor() as usize
}

/// Discretizes a path set onto taps at `sample_rate`, relative to `tau_ref`.
///
/// With a reflector index, every path is weighted by that reflector's
/// steering phase for the path's angles.
pub fn taps_from_paths(
    paths: &PathSet,
    sample_rate: f64,
    tau_ref: f64,
    reflector: Option<usize>,
    cfg: &ScenarioConfig,
) -> Result<TapSequence, ChannelError> {
    let (mut taps, dropped) = sparse_taps(paths, sample_rate, tau_ref, reflector, cfg)?;
    taps.resize(cfg.num_subcarriers, Complex64::new(0.0, 0.0));
    Ok(TapSequence { taps, dropped })
}

/// Same as [`taps_from_paths`] but only as long as the last occupied tap.
fn sparse_taps(
    paths: &PathSet,
    sample_rate: f64,
    tau_ref: f64,
    reflector: Option<usize>,
    cfg: &ScenarioConfig,
) -> Result<(Vec<Complex64>, usize), ChannelError> {
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(ChannelError::BadSampleRate(sample_rate));
    }
    let k = cfg.num_subcarriers;
    let mut taps: Vec<Complex64> = Vec::new();
    let mut dropped = 0;
    for p in &paths.paths {
        if p.delay < tau_ref {
            return Err(ChannelError::DelayBeforeReference {
                delay: p.delay,
                tau_ref,
            });
        }
        let idx = tap_index((p.delay - tau_ref) * sample_rate);
        if idx >= k {
            dropped += 1;
            continue;
        }
        let gain = match reflector {
            Some(n) => p.gain * steering_phase(n, p.azimuth, p.elevation, cfg)?,
            None => p.gain,
        };
        if taps.len() <= idx {
            taps.resize(idx + 1, Complex64::new(0.0, 0.0));
        }
        taps[idx] += gain;
    }
    Ok((taps, dropped))
}

/// Draws and discretizes one full channel realization.
pub fn realize_channel<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Result<ChannelRealization, ChannelError> {
    let direct = draw_direct_paths(rng, cfg);
    let (a, b) = draw_composite_paths(rng, cfg);
    realize_from_paths(direct, a, b, cfg)
}

/// Builds the tapped delay lines for given path sets.
///
/// Each composite link is discretized relative to its own first path, then
/// the cascade `v_n = h_{a,n} * h_{b,n}` is shifted by the rounded excess of
/// the two first-path delays over the global reference
/// `tau_ref = min(min direct delay, tau_a1 + tau_b1)`.
pub fn realize_from_paths(
    direct_paths: PathSet,
    ap_ris_paths: PathSet,
    ris_ue_paths: PathSet,
    cfg: &ScenarioConfig,
) -> Result<ChannelRealization, ChannelError> {
    let k = cfg.num_subcarriers;
    let n_refl = cfg.num_reflectors();
    let fs = cfg.bandwidth;
    let tau_a = ap_ris_paths.min_delay();
    let tau_b = ris_ue_paths.min_delay();
    let tau_ref = direct_paths.min_delay().min(tau_a + tau_b);

    let TapSequence { taps: direct, mut dropped } = taps_from_paths(&direct_paths, fs, tau_ref, None, cfg)?;
    let shift = tap_index((tau_a + tau_b - tau_ref) * fs);

    let mut composite = Array2::<Complex64>::zeros((n_refl, k));
    for (n, mut row) in composite.rows_mut().into_iter().enumerate() {
        let (ha, da) = sparse_taps(&ap_ris_paths, fs, tau_a, Some(n), cfg)?;
        let (hb, db) = sparse_taps(&ris_ue_paths, fs, tau_b, Some(n), cfg)?;
        dropped += da + db;
        for (i, &x) in ha.iter().enumerate() {
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, &y) in hb.iter().enumerate() {
                let idx = shift + i + j;
                if idx < k {
                    row[idx] += x * y;
                } else if y != Complex64::new(0.0, 0.0) {
                    dropped += 1;
                }
            }
        }
    }

    let last_direct = direct.iter().rposition(|x| x.norm_sqr() > 0.0);
    let last_composite = (0..k).rev().find(|&t| composite.column(t).iter().any(|x| x.norm_sqr() > 0.0));
    let channel_len = 1 + last_direct.max(last_composite).unwrap_or(0);
    if dropped > 0 {
        log::warn!("{dropped} path contributions fell beyond tap {}", k - 1);
    }

    Ok(ChannelRealization {
        direct,
        composite,
        channel_len,
        tau_ref,
        dropped_taps: dropped,
        direct_paths,
        ap_ris_paths,
        ris_ue_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            num_subcarriers: 16,
            n_row: 1,
            n_col: 2,
            paths_direct: 4,
            paths_ap_ris: 3,
            paths_ris_ue: 3,
            ..ScenarioConfig::reference_scenario()
        }
    }

    fn path(delay: f64, gain: f64) -> Path {
        Path {
            delay,
            gain: Complex64::new(gain, 0.0),
            azimuth: 0.3,
            elevation: -0.1,
        }
    }

    #[test]
    fn direct_delays_within_bounds() {
        let cfg = ScenarioConfig::reference_scenario();
        let tau_d = distance(cfg.ap_pos, cfg.ue_pos) / SPEED_OF_LIGHT;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let set = draw_direct_paths(&mut rng, &cfg);
            assert_eq!(set.len(), cfg.paths_direct);
            assert!(!set.has_los);
            assert!(set.paths.iter().all(|p| p.delay >= tau_d && p.delay <= 2.0 * tau_d));
        }
        let one = ScenarioConfig { paths_direct: 1, ..cfg.clone() };
        assert_eq!(draw_direct_paths(&mut rng, &one).len(), 1);

        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(draw_direct_paths(&mut r1, &cfg), draw_direct_paths(&mut r2, &cfg));
    }

    #[test]
    fn composite_paths_follow_geometry() {
        let cfg = ScenarioConfig::reference_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = draw_composite_paths(&mut rng, &cfg);
        assert_eq!(a.len(), 101);
        assert_eq!(b.len(), 51);
        assert_eq!(a.paths[0].delay, distance(cfg.ap_pos, cfg.ris_pos) / SPEED_OF_LIGHT);
        assert_eq!(b.paths[0].delay, distance(cfg.ris_pos, cfg.ue_pos) / SPEED_OF_LIGHT);
        for set in [&a, &b] {
            let los = set.paths[0];
            assert_eq!(set.min_delay(), los.delay);
            for p in &set.paths[1..] {
                assert!(p.delay >= los.delay && p.delay <= 2.0 * los.delay);
                assert!((p.azimuth - los.azimuth).abs() <= 40f64.to_radians() + 1e-15);
                assert!((p.elevation - los.elevation).abs() <= 10f64.to_radians() + 1e-15);
            }
        }
    }

    #[test]
    fn nlos_power_penalty() {
        // mean NLOS power relative to the LOS path, 20 dB penalty
        let cfg = ScenarioConfig::reference_scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (mut acc, mut count) = (0.0, 0usize);
        let mut los_power = 0.0;
        while count < 20_000 {
            let (a, _) = draw_composite_paths(&mut rng, &cfg);
            los_power = a.paths[0].gain.norm_sqr();
            for p in &a.paths[1..] {
                acc += p.gain.norm_sqr();
                count += 1;
            }
        }
        let ratio = acc / count as f64 / los_power;
        assert!((ratio - 0.01).abs() < 0.05 * 0.01, "ratio {ratio}");
    }

    #[test]
    fn steering_examples() {
        let cfg = ScenarioConfig::reference_scenario();
        for n in [0, 17, 399] {
            let s = steering_phase(n, 0.0, 0.0, &cfg).unwrap();
            assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let single = ScenarioConfig { n_row: 1, n_col: 1, ..cfg.clone() };
        let s = steering_phase(0, 1.1, -0.4, &single).unwrap();
        assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        // two columns, spacing 0.5 lambda: the right element sits at y = lambda / 4
        let pair = ScenarioConfig {
            n_row: 1,
            n_col: 2,
            element_spacing_h: 0.5,
            ..cfg.clone()
        };
        let s = steering_phase(1, PI / 2.0, 0.0, &pair).unwrap();
        assert!((s - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!(steering_phase(2, 0.0, 0.0, &pair).is_err());

        for n in 0..400 {
            let s = steering_phase(n, 0.7, 0.2, &cfg).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tap_examples() {
        let cfg = ScenarioConfig { num_subcarriers: 8, ..ScenarioConfig::reference_scenario() };
        let fs = 8.0;
        let one = |d: f64| PathSet { paths: vec![path(d, 1.0)], has_los: false };
        let t = taps_from_paths(&one(0.25), fs, 0.25, None, &cfg).unwrap();
        assert_eq!(t.taps[0], Complex64::new(1.0, 0.0));
        assert_eq!(t.taps.len(), 8);
        let t = taps_from_paths(&one(1.5 / fs), fs, 0.0, None, &cfg).unwrap();
        assert_eq!(t.taps[2], Complex64::new(1.0, 0.0));
        assert_eq!(t.taps[1], Complex64::new(0.0, 0.0));
        let two = PathSet {
            paths: vec![path(2.0 / fs, 1.0), path(2.2 / fs, 0.5)],
            has_los: false,
        };
        let t = taps_from_paths(&two, fs, 0.0, None, &cfg).unwrap();
        assert_eq!(t.taps[2], Complex64::new(1.5, 0.0));
        let late = taps_from_paths(&one(9.0 / fs), fs, 0.0, None, &cfg).unwrap();
        assert_eq!(late.dropped, 1);
        assert!(late.taps.iter().all(|x| x.norm() == 0.0));
        assert!(taps_from_paths(&one(0.0), fs, 1.0, None, &cfg).is_err());
    }

    #[test]
    fn zero_gain_channel() {
        let cfg = small_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let zero = |mut s: PathSet| {
            s.paths.iter_mut().for_each(|p| p.gain = Complex64::new(0.0, 0.0));
            s
        };
        let d = zero(draw_direct_paths(&mut rng, &cfg));
        let (a, b) = draw_composite_paths(&mut rng, &cfg);
        let real = realize_from_paths(d, zero(a), zero(b), &cfg).unwrap();
        assert!(real.direct.iter().all(|x| x.norm() == 0.0));
        assert!(real.composite.iter().all(|x| x.norm() == 0.0));
        assert_eq!(real.channel_len, 1);
    }

    #[test]
    fn single_path_cascade() {
        let cfg = ScenarioConfig {
            n_row: 1,
            n_col: 1,
            paths_direct: 1,
            paths_ap_ris: 1,
            paths_ris_ue: 1,
            num_subcarriers: 64,
            ..ScenarioConfig::reference_scenario()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let real = realize_channel(&mut rng, &cfg).unwrap();
        let tau = real.ap_ris_paths.paths[0].delay + real.ris_ue_paths.paths[0].delay;
        let expected = tap_index((tau - real.tau_ref) * cfg.bandwidth);
        let nonzero: Vec<usize> = (0..64).filter(|&t| real.composite[[0, t]].norm() > 0.0).collect();
        assert_eq!(nonzero, vec![expected]);
        assert!(real.direct[0].norm() > 0.0 || expected == 0);
    }

    #[test]
    fn support_and_determinism() {
        let cfg = ScenarioConfig {
            num_subcarriers: 64,
            n_row: 4,
            n_col: 4,
            ..ScenarioConfig::reference_scenario()
        };
        let a = realize_channel(&mut ChaCha8Rng::seed_from_u64(21), &cfg).unwrap();
        let b = realize_channel(&mut ChaCha8Rng::seed_from_u64(21), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.channel_len <= 64 && a.channel_len > 1);
        assert!(a.direct[a.channel_len..].iter().all(|x| x.norm() == 0.0));
        for t in a.channel_len..64 {
            assert!(a.composite.column(t).iter().all(|x| x.norm() == 0.0));
        }
        assert_eq!(a.dropped_taps, 0);
        assert_eq!(a.composite.dim(), (16, 64));
    }
}
