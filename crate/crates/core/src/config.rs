//! Scenario parameterization, physical constants, and unit conventions.
//!
//! All internal computation is carried out in SI units (Hz, m, W, rad).
//! Decibel and degree quantities appear only in `*_db` / `*_dbi` / `*_deg`
//! suffixed fields and are converted at I/O boundaries.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed physical constants. Never configurable.
pub struct PhysicalConstants;

impl PhysicalConstants {
    /// Boltzmann constant in J/K.
    pub const BOLTZMANN: f64 = 1.38e-23;
    /// Speed of light in m/s.
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
}

/// Errors raised while loading or validating a scenario.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invariant { field: &'static str, message: String },
}

/// Full experiment parameterization. Field defaults describe the reference
/// desk-scale link: a 29/31 GHz carrier pair between 40x40 arrays over a
/// 3 m boresight path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Downlink carrier frequency in Hz.
    pub f1: f64,
    /// Uplink carrier frequency in Hz.
    pub f2: f64,
    /// BS transmit element spacing in m.
    pub d_bs_tx: f64,
    /// BS receive element spacing in m.
    pub d_bs_rx: f64,
    /// UE transmit element spacing in m.
    pub d_ue_tx: f64,
    /// UE receive element spacing in m.
    pub d_ue_rx: f64,
    /// BS array side length in elements (the array is `m_side`²).
    pub m_side: usize,
    /// UE array side length in elements (the array is `n_side`²).
    pub n_side: usize,
    /// Fraction of BS received power tapped for communication.
    pub beta_com: f64,
    /// Fraction of BS received power tapped for localization.
    pub beta_loc: f64,
    /// Fraction of UE received power tapped for communication.
    pub gamma_com: f64,
    /// Fraction of UE received power consumed by device operation.
    pub gamma_wok: f64,
    /// PLL phase noise scale in rad.
    pub phase_noise_sigma: f64,
    /// Whether phase noise perturbs the power-circulation loop itself.
    /// Off by default: the loop is analyzed noise-free, and noise enters
    /// only the metric and DOA stages.
    pub loop_phase_noise: bool,
    /// Antenna element peak gain in dBi.
    pub g_max_dbi: f64,
    /// Ambient temperature in K.
    pub temperature: f64,
    /// Wave impedance in ohm.
    pub eta: f64,
    /// Path loss exponent (alpha).
    pub path_loss_exp: f64,
    /// Channel loss term of the spectral-efficiency law, in dB.
    pub channel_loss_db: f64,
    /// BS-to-UE link length in m.
    pub link_length: f64,
    /// UE elevation seen from the BS boresight, in degrees.
    pub elevation_deg: f64,
    /// UE azimuth seen from the BS boresight, in degrees.
    pub azimuth_deg: f64,
    /// Initial BS total transmit power in W.
    pub p_bs_init: f64,
    /// Downlink carrier bandwidth in Hz.
    pub bandwidth_dl: f64,
    /// Uplink carrier bandwidth in Hz.
    pub bandwidth_ul: f64,
    /// Amplifier small-signal power gain in dB.
    pub amp_small_signal_gain_db: f64,
    /// Amplifier total saturation power in W (shared across elements).
    pub amp_sat_power: f64,
    /// Monte Carlo trial count for DOA error statistics.
    pub monte_carlo_trials: usize,
    /// Master seed for all derived random streams.
    pub rng_seed: u64,
    /// Snapshot count for covariance estimation.
    pub snapshots: usize,
    /// Side length of the BS sub-array used for DOA processing.
    /// Zero selects the full receive array.
    pub doa_side: usize,
    /// Cap on the number of oscillation cycles.
    pub max_iterations: usize,
    /// Relative gain/loss balance tolerance declaring resonance.
    pub convergence_tol: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            f1: 29e9,
            f2: 31e9,
            d_bs_tx: 0.0048,
            d_bs_rx: 0.0052,
            d_ue_tx: 0.0052,
            d_ue_rx: 0.0048,
            m_side: 40,
            n_side: 40,
            beta_com: 0.1,
            beta_loc: 0.1,
            gamma_com: 0.1,
            gamma_wok: 0.2,
            phase_noise_sigma: 0.3,
            loop_phase_noise: false,
            g_max_dbi: 4.97,
            temperature: 295.0,
            eta: 377.0,
            path_loss_exp: 2.0,
            channel_loss_db: 3.0,
            link_length: 3.0,
            elevation_deg: 0.0,
            azimuth_deg: 0.0,
            p_bs_init: 1e-4,
            bandwidth_dl: 1e8,
            bandwidth_ul: 1e6,
            amp_small_signal_gain_db: 13.0,
            amp_sat_power: 1.5e-8,
            monte_carlo_trials: 100,
            rng_seed: 1,
            snapshots: 128,
            doa_side: 16,
            max_iterations: 200,
            convergence_tol: 1e-3,
        }
    }
}

/// Free-space wavelength c/f in m.
pub fn wavelength(f: f64) -> f64 {
    assert!(f > 0.0, "wavelength requires a positive frequency");
    PhysicalConstants::SPEED_OF_LIGHT / f
}

impl ScenarioConfig {
    /// Downlink wavelength in m.
    pub fn lambda1(&self) -> f64 {
        wavelength(self.f1)
    }

    /// Uplink wavelength in m.
    pub fn lambda2(&self) -> f64 {
        wavelength(self.f2)
    }

    /// Antenna element peak gain as a linear factor.
    pub fn g_max_linear(&self) -> f64 {
        10f64.powf(self.g_max_dbi / 10.0)
    }

    /// Amplifier small-signal gain as a linear factor.
    pub fn amp_gain_linear(&self) -> f64 {
        10f64.powf(self.amp_small_signal_gain_db / 10.0)
    }

    /// UE elevation in rad.
    pub fn elevation(&self) -> f64 {
        self.elevation_deg.to_radians()
    }

    /// UE azimuth in rad.
    pub fn azimuth(&self) -> f64 {
        self.azimuth_deg.to_radians()
    }

    /// Check every scenario invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invariant {
                    field,
                    message: format!("must be positive and finite, got {v}"),
                })
            }
        }
        fn fraction(field: &'static str, v: f64) -> Result<(), ConfigError> {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(ConfigError::Invariant {
                    field,
                    message: format!("must lie in [0, 1), got {v}"),
                })
            }
        }

        positive("f1", self.f1)?;
        positive("f2", self.f2)?;
        if self.f1 == self.f2 {
            return Err(ConfigError::Invariant {
                field: "f2",
                message: "uplink and downlink carriers must differ".into(),
            });
        }
        positive("d_bs_tx", self.d_bs_tx)?;
        positive("d_bs_rx", self.d_bs_rx)?;
        positive("d_ue_tx", self.d_ue_tx)?;
        positive("d_ue_rx", self.d_ue_rx)?;
        if self.m_side == 0 {
            return Err(ConfigError::Invariant {
                field: "m_side",
                message: "array side must be at least 1".into(),
            });
        }
        if self.n_side == 0 {
            return Err(ConfigError::Invariant {
                field: "n_side",
                message: "array side must be at least 1".into(),
            });
        }
        fraction("beta_com", self.beta_com)?;
        fraction("beta_loc", self.beta_loc)?;
        fraction("gamma_com", self.gamma_com)?;
        fraction("gamma_wok", self.gamma_wok)?;
        if self.beta_com + self.beta_loc >= 1.0 {
            return Err(ConfigError::Invariant {
                field: "beta_loc",
                message: "beta_com + beta_loc must stay below 1".into(),
            });
        }
        if self.gamma_com + self.gamma_wok >= 1.0 {
            return Err(ConfigError::Invariant {
                field: "gamma_wok",
                message: "gamma_com + gamma_wok must stay below 1".into(),
            });
        }
        if self.phase_noise_sigma < 0.0 || !self.phase_noise_sigma.is_finite() {
            return Err(ConfigError::Invariant {
                field: "phase_noise_sigma",
                message: "must be nonnegative".into(),
            });
        }
        positive("temperature", self.temperature)?;
        positive("eta", self.eta)?;
        positive("path_loss_exp", self.path_loss_exp)?;
        positive("link_length", self.link_length)?;
        if !(0.0..90.0).contains(&self.elevation_deg) {
            return Err(ConfigError::Invariant {
                field: "elevation_deg",
                message: format!("must lie in [0, 90), got {}", self.elevation_deg),
            });
        }
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(ConfigError::Invariant {
                field: "azimuth_deg",
                message: format!("must lie in [0, 360), got {}", self.azimuth_deg),
            });
        }
        positive("p_bs_init", self.p_bs_init)?;
        positive("bandwidth_dl", self.bandwidth_dl)?;
        positive("bandwidth_ul", self.bandwidth_ul)?;
        positive("amp_sat_power", self.amp_sat_power)?;
        if !self.amp_small_signal_gain_db.is_finite() {
            return Err(ConfigError::Invariant {
                field: "amp_small_signal_gain_db",
                message: "must be finite".into(),
            });
        }
        if !self.g_max_dbi.is_finite() {
            return Err(ConfigError::Invariant {
                field: "g_max_dbi",
                message: "must be finite".into(),
            });
        }
        if !self.channel_loss_db.is_finite() {
            return Err(ConfigError::Invariant {
                field: "channel_loss_db",
                message: "must be finite".into(),
            });
        }
        if self.monte_carlo_trials == 0 {
            return Err(ConfigError::Invariant {
                field: "monte_carlo_trials",
                message: "must be at least 1".into(),
            });
        }
        if self.snapshots == 0 {
            return Err(ConfigError::Invariant {
                field: "snapshots",
                message: "must be at least 1".into(),
            });
        }
        if self.doa_side > self.m_side {
            return Err(ConfigError::Invariant {
                field: "doa_side",
                message: format!(
                    "sub-array side {} exceeds m_side {}",
                    self.doa_side, self.m_side
                ),
            });
        }
        if self.max_iterations == 0 {
            return Err(ConfigError::Invariant {
                field: "max_iterations",
                message: "must be at least 1".into(),
            });
        }
        positive("convergence_tol", self.convergence_tol)?;
        Ok(())
    }

    /// Parse the flat `key=value` scenario format. Missing keys keep their
    /// defaults; every line is either blank, a `#` comment, or `key=value`.
    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("expected `key=value`, got `{stripped}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            cfg.set_field(key, value).map_err(|message| ConfigError::Parse { line, message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set_field(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num(key: &str, value: &str) -> Result<f64, String> {
            value
                .parse::<f64>()
                .map_err(|_| format!("key `{key}`: `{value}` is not a number"))
        }
        fn count(key: &str, value: &str) -> Result<usize, String> {
            value
                .parse::<usize>()
                .map_err(|_| format!("key `{key}`: `{value}` is not a nonnegative integer"))
        }
        match key {
            "f1" => self.f1 = num(key, value)?,
            "f2" => self.f2 = num(key, value)?,
            "d_bs_tx" => self.d_bs_tx = num(key, value)?,
            "d_bs_rx" => self.d_bs_rx = num(key, value)?,
            "d_ue_tx" => self.d_ue_tx = num(key, value)?,
            "d_ue_rx" => self.d_ue_rx = num(key, value)?,
            "m_side" => self.m_side = count(key, value)?,
            "n_side" => self.n_side = count(key, value)?,
            "beta_com" => self.beta_com = num(key, value)?,
            "beta_loc" => self.beta_loc = num(key, value)?,
            "gamma_com" => self.gamma_com = num(key, value)?,
            "gamma_wok" => self.gamma_wok = num(key, value)?,
            "phase_noise_sigma" => self.phase_noise_sigma = num(key, value)?,
            "loop_phase_noise" => {
                self.loop_phase_noise = value
                    .parse::<bool>()
                    .map_err(|_| format!("key `{key}`: `{value}` is not true/false"))?
            }
            "g_max_dbi" => self.g_max_dbi = num(key, value)?,
            "temperature" => self.temperature = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "path_loss_exp" => self.path_loss_exp = num(key, value)?,
            "channel_loss_db" => self.channel_loss_db = num(key, value)?,
            "link_length" => self.link_length = num(key, value)?,
            "elevation_deg" => self.elevation_deg = num(key, value)?,
            "azimuth_deg" => self.azimuth_deg = num(key, value)?,
            "p_bs_init" => self.p_bs_init = num(key, value)?,
            "bandwidth_dl" => self.bandwidth_dl = num(key, value)?,
            "bandwidth_ul" => self.bandwidth_ul = num(key, value)?,
            "amp_small_signal_gain_db" => self.amp_small_signal_gain_db = num(key, value)?,
            "amp_sat_power" => self.amp_sat_power = num(key, value)?,
            "monte_carlo_trials" => self.monte_carlo_trials = count(key, value)?,
            "rng_seed" => {
                self.rng_seed = value
                    .parse::<u64>()
                    .map_err(|_| format!("key `{key}`: `{value}` is not a u64 seed"))?
            }
            "snapshots" => self.snapshots = count(key, value)?,
            "doa_side" => self.doa_side = count(key, value)?,
            "max_iterations" => self.max_iterations = count(key, value)?,
            "convergence_tol" => self.convergence_tol = num(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Render the scenario back into the `key=value` file format.
    /// Floats use the shortest representation that round-trips exactly.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "f1={}", self.f1);
        let _ = writeln!(s, "f2={}", self.f2);
        let _ = writeln!(s, "d_bs_tx={}", self.d_bs_tx);
        let _ = writeln!(s, "d_bs_rx={}", self.d_bs_rx);
        let _ = writeln!(s, "d_ue_tx={}", self.d_ue_tx);
        let _ = writeln!(s, "d_ue_rx={}", self.d_ue_rx);
        let _ = writeln!(s, "m_side={}", self.m_side);
        let _ = writeln!(s, "n_side={}", self.n_side);
        let _ = writeln!(s, "beta_com={}", self.beta_com);
        let _ = writeln!(s, "beta_loc={}", self.beta_loc);
        let _ = writeln!(s, "gamma_com={}", self.gamma_com);
        let _ = writeln!(s, "gamma_wok={}", self.gamma_wok);
        let _ = writeln!(s, "phase_noise_sigma={}", self.phase_noise_sigma);
        let _ = writeln!(s, "loop_phase_noise={}", self.loop_phase_noise);
        let _ = writeln!(s, "g_max_dbi={}", self.g_max_dbi);
        let _ = writeln!(s, "temperature={}", self.temperature);
        let _ = writeln!(s, "eta={}", self.eta);
        let _ = writeln!(s, "path_loss_exp={}", self.path_loss_exp);
        let _ = writeln!(s, "channel_loss_db={}", self.channel_loss_db);
        let _ = writeln!(s, "link_length={}", self.link_length);
        let _ = writeln!(s, "elevation_deg={}", self.elevation_deg);
        let _ = writeln!(s, "azimuth_deg={}", self.azimuth_deg);
        let _ = writeln!(s, "p_bs_init={}", self.p_bs_init);
        let _ = writeln!(s, "bandwidth_dl={}", self.bandwidth_dl);
        let _ = writeln!(s, "bandwidth_ul={}", self.bandwidth_ul);
        let _ = writeln!(s, "amp_small_signal_gain_db={}", self.amp_small_signal_gain_db);
        let _ = writeln!(s, "amp_sat_power={}", self.amp_sat_power);
        let _ = writeln!(s, "monte_carlo_trials={}", self.monte_carlo_trials);
        let _ = writeln!(s, "rng_seed={}", self.rng_seed);
        let _ = writeln!(s, "snapshots={}", self.snapshots);
        let _ = writeln!(s, "doa_side={}", self.doa_side);
        let _ = writeln!(s, "max_iterations={}", self.max_iterations);
        let _ = writeln!(s, "convergence_tol={}", self.convergence_tol);
        s
    }
}

/// Load and validate a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::parse(&text)
}

/// Write a scenario file that `load_config` reads back field-identical.
pub fn save_config(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> Result<(), ConfigError> {
    std::fs::write(path, cfg.to_key_values())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_table_defaults() {
        let cfg = ScenarioConfig::parse("").unwrap();
        assert_eq!(cfg.f1, 29e9);
        assert_eq!(cfg.f2, 31e9);
        assert_eq!(cfg.m_side, 40);
        assert_eq!(cfg.n_side, 40);
        assert_eq!(cfg.p_bs_init, 1e-4);
        assert_eq!(cfg.beta_com, 0.1);
        assert_eq!(cfg.beta_loc, 0.1);
        assert_eq!(cfg.gamma_com, 0.1);
        assert_eq!(cfg.gamma_wok, 0.2);
        assert_eq!(cfg.phase_noise_sigma, 0.3);
        assert_eq!(cfg.g_max_dbi, 4.97);
        assert_eq!(cfg.temperature, 295.0);
        assert_eq!(cfg.eta, 377.0);
        assert_eq!(cfg.channel_loss_db, 3.0);
        assert_eq!(cfg.path_loss_exp, 2.0);
        assert_eq!(cfg.link_length, 3.0);
        assert_eq!(cfg.monte_carlo_trials, 100);
    }

    #[test]
    fn override_link_length_keeps_rest_default() {
        let cfg = ScenarioConfig::parse("link_length=5\n").unwrap();
        assert_eq!(cfg.link_length, 5.0);
        let mut expect = ScenarioConfig::default();
        expect.link_length = 5.0;
        assert_eq!(cfg, expect);
    }

    #[test]
    fn invalid_fraction_names_field() {
        let err = ScenarioConfig::parse("beta_com=1.2\n").unwrap_err();
        match err {
            ConfigError::Invariant { field, .. } => assert_eq!(field, "beta_com"),
            other => panic!("expected invariant error, got {other}"),
        }
    }

    #[test]
    fn fraction_sum_rejected() {
        let err = ScenarioConfig::parse("gamma_com=0.5\ngamma_wok=0.6\n").unwrap_err();
        match err {
            ConfigError::Invariant { field, .. } => assert_eq!(field, "gamma_wok"),
            other => panic!("expected invariant error, got {other}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let err = ScenarioConfig::parse("f1=29e9\nbogus line\n").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioConfig::parse("not_a_key=3\n").unwrap_err();
        match err {
            ConfigError::Parse { line, message } => {
                assert_eq!(line, 1);
                assert!(message.contains("not_a_key"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = ScenarioConfig::parse("# scenario\n\nlink_length=4 # meters\n").unwrap();
        assert_eq!(cfg.link_length, 4.0);
    }

    #[test]
    fn wavelength_matches_reported_values() {
        // 29 GHz -> 1.03 cm, 31 GHz -> 0.97 cm
        assert!((wavelength(29e9) - 0.0103).abs() < 1e-4);
        assert!((wavelength(31e9) - 0.0097).abs() < 1e-4);
        assert_eq!(wavelength(PhysicalConstants::SPEED_OF_LIGHT), 1.0);
    }

    #[test]
    #[should_panic]
    fn wavelength_rejects_nonpositive() {
        wavelength(0.0);
    }

    #[test]
    fn roundtrip_is_field_identical() {
        let mut cfg = ScenarioConfig::default();
        cfg.link_length = 4.25;
        cfg.convergence_tol = 3.7e-4;
        cfg.rng_seed = 987654321;
        cfg.elevation_deg = 12.5;
        let text = cfg.to_key_values();
        let back = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn elevation_range_enforced() {
        let err = ScenarioConfig::parse("elevation_deg=90\n").unwrap_err();
        match err {
            ConfigError::Invariant { field, .. } => assert_eq!(field, "elevation_deg"),
            other => panic!("expected invariant error, got {other}"),
        }
    }
}
