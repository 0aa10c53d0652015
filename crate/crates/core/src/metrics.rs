//! SNR, achievable rate, and spectral efficiency from the loop steady
//! state.

use crate::channel::noise_variance;
use crate::config::ScenarioConfig;
use crate::resonance::LoopState;

/// Linear ratio to dB.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dB to linear ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Communication quality of one steady state.
#[derive(Debug, Clone, Copy)]
pub struct CommReport {
    /// Downlink SNR, linear.
    pub snr_dl: f64,
    /// Uplink SNR, linear.
    pub snr_ul: f64,
    /// Downlink achievable rate in bit/s.
    pub rate_dl: f64,
    /// Uplink achievable rate in bit/s.
    pub rate_ul: f64,
    /// Downlink spectral efficiency in bit/s/Hz.
    pub se_dl: f64,
    /// Uplink spectral efficiency in bit/s/Hz.
    pub se_ul: f64,
    /// Link length in m.
    pub link_length: f64,
    /// UE elevation in rad.
    pub elevation: f64,
    /// Cycle index the report refers to.
    pub iteration: usize,
}

/// Downlink SNR: the communication tap of the UE received power over the
/// downlink noise variance.
pub fn snr_downlink(p_ue_rx: f64, gamma_com: f64, sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "noise variance must be positive");
    gamma_com * p_ue_rx / sigma2
}

/// Uplink SNR: the communication tap of the BS received power over the
/// uplink noise variance. Mirrors the downlink definition.
pub fn snr_uplink(p_bs_rx: f64, beta_com: f64, sigma2: f64) -> f64 {
    assert!(sigma2 > 0.0, "noise variance must be positive");
    beta_com * p_bs_rx / sigma2
}

/// Shannon rate `B log2(1 + snr)` in bit/s.
pub fn rate(snr: f64, bandwidth: f64) -> f64 {
    assert!(snr >= 0.0);
    bandwidth * (1.0 + snr).log2()
}

/// Spectral efficiency `log2(1 + 10^(0.1 (snr_db - loss_db)))` in
/// bit/s/Hz; the channel-loss term discounts the SNR in the dB domain.
pub fn spectral_efficiency(snr_db: f64, loss_db: f64) -> f64 {
    (1.0 + from_db(snr_db - loss_db)).log2()
}

/// Assemble the communication report for a loop state.
pub fn report_for_state(cfg: &ScenarioConfig, state: &LoopState) -> CommReport {
    let sigma2_dl = noise_variance(cfg.temperature, cfg.bandwidth_dl, cfg.eta);
    let sigma2_ul = noise_variance(cfg.temperature, cfg.bandwidth_ul, cfg.eta);
    let snr_dl = snr_downlink(state.p_ue_rx, cfg.gamma_com, sigma2_dl);
    let snr_ul = snr_uplink(state.p_bs_rx, cfg.beta_com, sigma2_ul);
    CommReport {
        snr_dl,
        snr_ul,
        rate_dl: rate(snr_dl, cfg.bandwidth_dl),
        rate_ul: rate(snr_ul, cfg.bandwidth_ul),
        se_dl: spectral_efficiency(to_db(snr_dl), cfg.channel_loss_db),
        se_ul: spectral_efficiency(to_db(snr_ul), cfg.channel_loss_db),
        link_length: cfg.link_length,
        elevation: cfg.elevation(),
        iteration: state.iteration,
    }
}

/// Header of the metrics CSV export.
pub const REPORT_CSV_HEADER: &str =
    "l,theta_deg,iteration,snr_dl_db,snr_ul_db,se_dl,se_ul,mu_dl,mu_ul";

/// One metrics CSV row for a cycle of the loop history.
pub fn report_csv_row(
    cfg: &ScenarioConfig,
    iteration: usize,
    p_ue_rx: f64,
    p_bs_rx: f64,
    mu_dl: f64,
    mu_ul: f64,
) -> String {
    let sigma2_dl = noise_variance(cfg.temperature, cfg.bandwidth_dl, cfg.eta);
    let sigma2_ul = noise_variance(cfg.temperature, cfg.bandwidth_ul, cfg.eta);
    let snr_dl = snr_downlink(p_ue_rx, cfg.gamma_com, sigma2_dl);
    let snr_ul = snr_uplink(p_bs_rx, cfg.beta_com, sigma2_ul);
    format!(
        "{},{},{},{},{},{},{},{},{}",
        cfg.link_length,
        cfg.elevation_deg,
        iteration,
        to_db(snr_dl),
        to_db(snr_ul),
        spectral_efficiency(to_db(snr_dl), cfg.channel_loss_db),
        spectral_efficiency(to_db(snr_ul), cfg.channel_loss_db),
        mu_dl,
        mu_ul
    )
}
