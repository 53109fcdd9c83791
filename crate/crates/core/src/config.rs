//! Scenario parameters, their defaults, and the flat `key = value` file format.
//!
//! Units are fixed per key: frequencies in Hz, positions in meters, powers in
//! dBm (noise density in dBm/Hz), angles in degrees, element spacings as
//! multiples of the carrier wavelength.

use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Every key accepted by [`ScenarioConfig::set`], in serialization order.
pub const CONFIG_KEYS: &[&str] = &[
    "K",
    "n_row",
    "n_col",
    "f_c",
    "bandwidth",
    "noise_density",
    "tx_power",
    "L_d",
    "L_a",
    "L_b",
    "element_spacing_h",
    "element_spacing_v",
    "ap_pos",
    "ris_pos",
    "ue_pos",
    "azimuth_spread",
    "elevation_spread",
    "nlos_penalty_db",
    "direct_extra_loss_db",
    "rate_selected_only",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("cannot read config file: {0}")]
    Io(String),
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// The offending key, when the error is tied to one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

/// All physical and numerical parameters of one simulated scenario.
///
/// Immutable once validated; cloning is cheap and sharing across worker
/// threads is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of OFDM subcarriers `K`.
    pub num_subcarriers: usize,
    pub n_row: usize,
    pub n_col: usize,
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Sampled bandwidth, Hz. Also the tap sampling rate.
    pub bandwidth: f64,
    /// AWGN power density, dBm/Hz.
    pub noise_density: f64,
    /// Mean transmit power per subcarrier, dBm.
    pub tx_power: f64,
    pub paths_direct: usize,
    pub paths_ap_ris: usize,
    pub paths_ris_ue: usize,
    /// Horizontal reflector spacing in wavelengths.
    pub element_spacing_h: f64,
    /// Vertical reflector spacing in wavelengths.
    pub element_spacing_v: f64,
    pub ap_pos: [f64; 3],
    pub ris_pos: [f64; 3],
    pub ue_pos: [f64; 3],
    /// Half-width of the uniform azimuth perturbation, degrees.
    pub azimuth_spread: f64,
    /// Half-width of the uniform elevation perturbation, degrees.
    pub elevation_spread: f64,
    /// Power of each NLOS path below the LOS reference, dB.
    pub nlos_penalty_db: f64,
    /// Extra attenuation of the direct AP-UE channel, dB. The default models a
    /// deeply blocked direct link, where the surface carries most of the power.
    pub direct_extra_loss_db: f64,
    /// Restrict the rate sum and the power allocation to the selected bins.
    pub rate_selected_only: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::reference_scenario()
    }
}

impl ScenarioConfig {
    /// The reference scenario: 400 subcarriers, a 20x20 surface at 3 GHz,
    /// 10.5 MHz bandwidth and -164 dBm/Hz noise density.
    pub fn reference_scenario() -> Self {
        ScenarioConfig {
            num_subcarriers: 400,
            n_row: 20,
            n_col: 20,
            carrier_hz: 3.0e9,
            bandwidth: 10.5e6,
            noise_density: -164.0,
            tx_power: 20.0,
            paths_direct: 100,
            paths_ap_ris: 101,
            paths_ris_ue: 51,
            element_spacing_h: 0.25,
            element_spacing_v: 0.25,
            ap_pos: [0.0, 0.0, 10.0],
            ris_pos: [50.0, 0.0, 5.0],
            ue_pos: [45.0, 20.0, 1.5],
            azimuth_spread: 40.0,
            elevation_spread: 10.0,
            nlos_penalty_db: 20.0,
            direct_extra_loss_db: 50.0,
            rate_selected_only: false,
            seed: 0,
        }
    }

    /// Number of reflectors `N = n_row * n_col`.
    pub fn num_reflectors(&self) -> usize {
        self.n_row * self.n_col
    }

    /// Carrier wavelength `c / f_c`, meters.
    pub fn wavelength(&self) -> f64 {
        wavelength(self.carrier_hz)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_subcarriers < 2 {
            return Err(ConfigError::invalid("K", "must be at least 2"));
        }
        if self.n_row < 1 {
            return Err(ConfigError::invalid("n_row", "must be at least 1"));
        }
        if self.n_col < 1 {
            return Err(ConfigError::invalid("n_col", "must be at least 1"));
        }
        positive_finite("f_c", self.carrier_hz)?;
        positive_finite("bandwidth", self.bandwidth)?;
        finite("noise_density", self.noise_density)?;
        finite("tx_power", self.tx_power)?;
        for (key, count) in [
            ("L_d", self.paths_direct),
            ("L_a", self.paths_ap_ris),
            ("L_b", self.paths_ris_ue),
        ] {
            if count < 1 {
                return Err(ConfigError::invalid(key, "must be at least 1"));
            }
        }
        positive_finite("element_spacing_h", self.element_spacing_h)?;
        positive_finite("element_spacing_v", self.element_spacing_v)?;
        for (key, pos) in [
            ("ap_pos", self.ap_pos),
            ("ris_pos", self.ris_pos),
            ("ue_pos", self.ue_pos),
        ] {
            if pos.iter().any(|c| !c.is_finite()) {
                return Err(ConfigError::invalid(key, "coordinates must be finite"));
            }
        }
        if self.ap_pos == self.ris_pos {
            return Err(ConfigError::invalid("ris_pos", "coincides with ap_pos"));
        }
        if self.ris_pos == self.ue_pos {
            return Err(ConfigError::invalid("ue_pos", "coincides with ris_pos"));
        }
        if self.ap_pos == self.ue_pos {
            return Err(ConfigError::invalid("ue_pos", "coincides with ap_pos"));
        }
        for (key, v) in [
            ("azimuth_spread", self.azimuth_spread),
            ("elevation_spread", self.elevation_spread),
        ] {
            finite(key, v)?;
            if v < 0.0 {
                return Err(ConfigError::invalid(key, "must be non-negative"));
            }
        }
        finite("nlos_penalty_db", self.nlos_penalty_db)?;
        finite("direct_extra_loss_db", self.direct_extra_loss_db)?;
        Ok(())
    }

    /// Assigns one key from its textual value. Does not run [`validate`](Self::validate).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "K" => self.num_subcarriers = parse_count(key, value)?,
            "n_row" => self.n_row = parse_count(key, value)?,
            "n_col" => self.n_col = parse_count(key, value)?,
            "f_c" => self.carrier_hz = parse_real(key, value)?,
            "bandwidth" => self.bandwidth = parse_real(key, value)?,
            "noise_density" => self.noise_density = parse_real(key, value)?,
            "tx_power" => self.tx_power = parse_real(key, value)?,
            "L_d" => self.paths_direct = parse_count(key, value)?,
            "L_a" => self.paths_ap_ris = parse_count(key, value)?,
            "L_b" => self.paths_ris_ue = parse_count(key, value)?,
            "element_spacing_h" => self.element_spacing_h = parse_real(key, value)?,
            "element_spacing_v" => self.element_spacing_v = parse_real(key, value)?,
            "ap_pos" => self.ap_pos = parse_point(key, value)?,
            "ris_pos" => self.ris_pos = parse_point(key, value)?,
            "ue_pos" => self.ue_pos = parse_point(key, value)?,
            "azimuth_spread" => self.azimuth_spread = parse_real(key, value)?,
            "elevation_spread" => self.elevation_spread = parse_real(key, value)?,
            "nlos_penalty_db" => self.nlos_penalty_db = parse_real(key, value)?,
            "direct_extra_loss_db" => self.direct_extra_loss_db = parse_real(key, value)?,
            "rate_selected_only" => {
                self.rate_selected_only = value
                    .parse()
                    .map_err(|_| ConfigError::invalid(key, "expected `true` or `false`"))?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| ConfigError::invalid(key, "expected an unsigned 64-bit integer"))?
            }
            _ => return Err(ConfigError::invalid(key, "unknown key")),
        }
        Ok(())
    }

    /// Textual value of one key, in the form accepted by [`set`](Self::set).
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "K" => self.num_subcarriers.to_string(),
            "n_row" => self.n_row.to_string(),
            "n_col" => self.n_col.to_string(),
            "f_c" => self.carrier_hz.to_string(),
            "bandwidth" => self.bandwidth.to_string(),
            "noise_density" => self.noise_density.to_string(),
            "tx_power" => self.tx_power.to_string(),
            "L_d" => self.paths_direct.to_string(),
            "L_a" => self.paths_ap_ris.to_string(),
            "L_b" => self.paths_ris_ue.to_string(),
            "element_spacing_h" => self.element_spacing_h.to_string(),
            "element_spacing_v" => self.element_spacing_v.to_string(),
            "ap_pos" => format_point(self.ap_pos),
            "ris_pos" => format_point(self.ris_pos),
            "ue_pos" => format_point(self.ue_pos),
            "azimuth_spread" => self.azimuth_spread.to_string(),
            "elevation_spread" => self.elevation_spread.to_string(),
            "nlos_penalty_db" => self.nlos_penalty_db.to_string(),
            "direct_extra_loss_db" => self.direct_extra_loss_db.to_string(),
            "rate_selected_only" => self.rate_selected_only.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        };
        Some(s)
    }

    /// Serializes every key, one `key = value` line each.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in CONFIG_KEYS {
            // every listed key is known to `get`
            writeln!(f, "{key} = {}", self.get(key).unwrap_or_default())?;
        }
        Ok(())
    }
}

/// Wavelength `c / f` in meters.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Parses a config document on top of the defaults and validates the result.
///
/// Lines are `key = value`; `#` starts a comment; blank lines are ignored.
/// Points are written as three comma-separated numbers, optionally bracketed.
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::reference_scenario();
    apply_overrides(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    load_config(&text)
}

fn apply_overrides(cfg: &mut ScenarioConfig, text: &str) -> Result<(), ConfigError> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: lineno + 1,
            reason: "expected `key = value`".to_string(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: lineno + 1,
                reason: "empty key".to_string(),
            });
        }
        cfg.set(key, value)?;
    }
    Ok(())
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be finite"))
    }
}

fn positive_finite(key: &str, v: f64) -> Result<(), ConfigError> {
    finite(key, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be positive"))
    }
}

fn parse_count(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::invalid(key, format!("expected a non-negative integer, got `{value}`")))
}

fn parse_real(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::invalid(key, format!("expected a number, got `{value}`")))
}

fn parse_point(key: &str, value: &str) -> Result<[f64; 3], ConfigError> {
    let inner = value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .unwrap_or(value);
    let coords = inner
        .split(',')
        .map(|c| parse_real(key, c.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(coords)
        .map_err(|_| ConfigError::invalid(key, "expected three comma-separated coordinates"))
}

fn format_point(p: [f64; 3]) -> String {
    format!("{}, {}, {}", p[0], p[1], p[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_match_reference_scenario() {
        let cfg = ScenarioConfig::reference_scenario();
        assert_eq!(cfg.num_subcarriers, 400);
        assert_eq!(cfg.num_reflectors(), 400);
        assert_eq!(cfg.paths_ap_ris, 101);
        assert_eq!(cfg.paths_ris_ue, 51);
        assert_eq!(cfg.paths_direct, 100);
        assert_eq!(cfg.element_spacing_h, 0.25);
        assert_eq!(cfg.element_spacing_v, 0.25);
        assert_eq!(cfg.bandwidth, 10.5e6);
        assert_eq!(cfg.noise_density, -164.0);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn override_single_key() {
        let cfg = load_config("K = 64").unwrap();
        let mut expected = ScenarioConfig::reference_scenario();
        expected.num_subcarriers = 64;
        assert_eq!(cfg, expected);
    }

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(load_config("").unwrap(), ScenarioConfig::reference_scenario());
        assert_eq!(
            load_config("# only a comment\n\n").unwrap(),
            ScenarioConfig::reference_scenario()
        );
    }

    #[test]
    fn rejects_single_subcarrier() {
        let err = load_config("K = 1").unwrap_err();
        assert_eq!(err.key(), Some("K"));
    }

    #[test]
    fn names_first_offending_key() {
        let err = load_config("bogus = 3\nK = 1").unwrap_err();
        assert_eq!(err.key(), Some("bogus"));
        let err = load_config("ris_pos = 0, 0, 10").unwrap_err();
        assert_eq!(err.key(), Some("ris_pos"));
        let err = load_config("bandwidth = -1").unwrap_err();
        assert_eq!(err.key(), Some("bandwidth"));
        let err = load_config("tx_power = inf").unwrap_err();
        assert_eq!(err.key(), Some("tx_power"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = load_config("K = 8\nnot a pair").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 2,
                reason: "expected `key = value`".into()
            }
        );
    }

    #[test]
    fn points_accept_brackets_and_comments() {
        let cfg = load_config("ue_pos = [1, 2.5, 3] # receiver\nseed = 18446744073709551615").unwrap();
        assert_eq!(cfg.ue_pos, [1.0, 2.5, 3.0]);
        assert_eq!(cfg.seed, u64::MAX);
    }

    #[test]
    fn wavelength_values() {
        assert!((wavelength(3.0e9) - 0.099_930_819_333).abs() < 1e-12);
        assert_eq!(wavelength(SPEED_OF_LIGHT), 1.0);
        assert!((wavelength(1.5e9) - 0.199_861_638_667).abs() < 1e-12);
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            (2usize..2048, 1usize..64, 1usize..64, 1e6f64..1e11, 1e3f64..1e9),
            (-200.0f64..0.0, -30.0f64..60.0, 1usize..300, 1usize..300, 1usize..300),
            (0.01f64..2.0, 0.01f64..2.0, 0.0f64..90.0, 0.0f64..90.0),
            (-50.0f64..50.0, 0.0f64..40.0, any::<bool>(), any::<u64>()),
        )
            .prop_map(|(a, b, c, d)| ScenarioConfig {
                num_subcarriers: a.0,
                n_row: a.1,
                n_col: a.2,
                carrier_hz: a.3,
                bandwidth: a.4,
                noise_density: b.0,
                tx_power: b.1,
                paths_direct: b.2,
                paths_ap_ris: b.3,
                paths_ris_ue: b.4,
                element_spacing_h: c.0,
                element_spacing_v: c.1,
                ap_pos: [d.0, 1.0, 10.0],
                ris_pos: [50.0, d.0, 5.0],
                ue_pos: [45.0, 20.0, -d.0 - 1.0],
                azimuth_spread: c.2,
                elevation_spread: c.3,
                nlos_penalty_db: d.0,
                direct_extra_loss_db: d.1,
                rate_selected_only: d.2,
                seed: d.3,
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(cfg in arb_config()) {
            prop_assert!(cfg.validate().is_ok());
            let back = load_config(&cfg.to_text()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
