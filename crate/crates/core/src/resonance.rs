//! The iterative BS-UE oscillation loop.
//!
//! One cycle runs downlink hop, UE retro-reflection, uplink hop, and BS
//! regeneration. The engine carries complex per-element field amplitudes
//! (in sqrt-W) and derives all powers from them, which reproduces both the
//! field-level and the power-level bookkeeping of the underlying model.
//!
//! The BS amplifier uses a soft-saturation law per element,
//! `p_out = g0 p_in / (1 + g0 p_in / p_sat_el)` with `p_sat_el =
//! amp_sat_power / M`: round-trip gain exceeds loss while the loop builds
//! up, and the two balance exactly at the steady state. Per-element
//! saturation keeps totals independent of the array size.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{build_channel, ChannelMatrix};
use crate::config::ScenarioConfig;
use crate::geometry::LinkGeometry;
use crate::rng::{derive_rng, STREAM_CHANNEL_DL, STREAM_CHANNEL_UL, STREAM_INIT, STREAM_LOOP};

#[derive(Debug, Error)]
pub enum ResonanceError {
    #[error("loop diverged at iteration {iteration}: BS transmit power {power} W")]
    Diverged { iteration: usize, power: f64 },
}

/// Per-iteration per-element state of the oscillation.
#[derive(Debug, Clone)]
pub struct LoopState {
    /// Completed full cycles.
    pub iteration: usize,
    /// BS per-element transmit amplitude at the downlink carrier.
    pub bs_tx_amplitude: Vec<Complex64>,
    /// UE per-element transmit amplitude at the uplink carrier.
    pub ue_tx_amplitude: Vec<Complex64>,
    /// UE per-element received amplitude (set by the downlink hop).
    pub ue_rx_amplitude: Vec<Complex64>,
    /// BS per-element received amplitude (set by the uplink hop).
    pub bs_rx_amplitude: Vec<Complex64>,
    pub p_bs_tx: f64,
    pub p_bs_rx: f64,
    pub p_ue_tx: f64,
    pub p_ue_rx: f64,
    /// Downlink transmission efficiency this cycle.
    pub mu_dl: f64,
    /// Uplink transmission efficiency this cycle.
    pub mu_ul: f64,
    /// Amplifier power gain of the latest cycle, in W.
    pub gain_k: f64,
    /// Propagation/tap power loss of the latest cycle, in W.
    pub loss_k: f64,
}

/// One history row of the oscillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub iteration: usize,
    pub p_bs_tx: f64,
    pub p_bs_rx: f64,
    pub p_ue_rx: f64,
    pub p_ue_tx: f64,
    pub mu_dl: f64,
    pub mu_ul: f64,
    pub gain_w: f64,
    pub loss_w: f64,
}

/// Outcome of running the loop to steady state.
#[derive(Debug, Clone)]
pub struct ResonanceResult {
    pub converged: bool,
    pub iterations_run: usize,
    pub history: Vec<CycleRecord>,
    pub steady_state: LoopState,
}

/// Consecutive balanced cycles required before declaring resonance.
pub const STABLE_WINDOW: usize = 5;
/// Divergence guard: the loop aborts if BS transmit power exceeds this
/// multiple of the amplifier saturation power.
pub const DIVERGENCE_FACTOR: f64 = 1e3;
/// Resonance requires a live beam: the BS transmit power must sit within
/// this factor of the amplifier saturation power, otherwise a fully
/// decayed loop would register its zero fixed point as balanced.
pub const LIVE_POWER_FLOOR_REL: f64 = 1e-12;

fn total_power(amplitudes: &[Complex64]) -> f64 {
    amplitudes.iter().map(|a| a.norm_sqr()).sum()
}

/// Deterministic parallel matrix-vector product; each row reduces
/// sequentially so results do not depend on the thread schedule.
fn matvec(h: &ChannelMatrix, x: &[Complex64]) -> Vec<Complex64> {
    let m = &h.gains;
    debug_assert_eq!(m.ncols(), x.len());
    (0..m.nrows())
        .into_par_iter()
        .map(|r| {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..m.ncols() {
                acc += m[(r, c)] * x[c];
            }
            acc
        })
        .collect()
}

/// Initial loop state: the BS splits its initial power evenly over the
/// elements and radiates with independent random phases (omnidirectional
/// start), the UE is silent.
pub fn initialize_loop(
    geom: &LinkGeometry,
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> LoopState {
    let m = geom.bs_tx.len();
    let n = geom.ue_tx.len();
    let per_element = (cfg.p_bs_init / m as f64).sqrt();
    let bs_tx_amplitude: Vec<Complex64> = (0..m)
        .map(|_| Complex64::from_polar(per_element, rng.gen::<f64>() * std::f64::consts::TAU))
        .collect();
    let p_bs_tx = total_power(&bs_tx_amplitude);
    LoopState {
        iteration: 0,
        bs_tx_amplitude,
        ue_tx_amplitude: vec![Complex64::new(0.0, 0.0); n],
        ue_rx_amplitude: vec![Complex64::new(0.0, 0.0); n],
        bs_rx_amplitude: vec![Complex64::new(0.0, 0.0); m],
        p_bs_tx,
        p_bs_rx: 0.0,
        p_ue_tx: 0.0,
        p_ue_rx: 0.0,
        mu_dl: 0.0,
        mu_ul: 0.0,
        gain_k: 0.0,
        loss_k: 0.0,
    }
}

/// Propagate the BS transmit field to the UE: coherent channel-weighted sum
/// per receive element, then the downlink efficiency `mu_dl`.
pub fn downlink_hop(mut state: LoopState, h_dl: &ChannelMatrix) -> LoopState {
    state.ue_rx_amplitude = matvec(h_dl, &state.bs_tx_amplitude);
    state.p_ue_rx = total_power(&state.ue_rx_amplitude);
    state.mu_dl = if state.p_bs_tx > 0.0 { state.p_ue_rx / state.p_bs_tx } else { 0.0 };
    state
}

/// UE retro-reflection: tap off the communication and operating fractions,
/// conjugate the remaining field, and hand it to the uplink transmit array.
pub fn ue_retroreflect(
    mut state: LoopState,
    cfg: &ScenarioConfig,
    sigma_phase: f64,
    rng: &mut impl Rng,
) -> LoopState {
    let keep = (1.0 - cfg.gamma_com - cfg.gamma_wok).max(0.0);
    let scale = keep.sqrt();
    let noise = phase_noise_dist(sigma_phase);
    state.ue_tx_amplitude = state
        .ue_rx_amplitude
        .iter()
        .map(|r| {
            let mut phase = -r.arg();
            if let Some(dist) = &noise {
                phase += dist.sample(rng);
            }
            Complex64::from_polar(scale * r.norm(), phase)
        })
        .collect();
    // Power accounting is exact by construction.
    state.p_ue_tx = keep * state.p_ue_rx;
    state
}

/// Propagate the UE transmit field back to the BS; mirror of the downlink
/// hop with the uplink carrier.
pub fn uplink_hop(mut state: LoopState, h_ul: &ChannelMatrix) -> LoopState {
    state.bs_rx_amplitude = matvec(h_ul, &state.ue_tx_amplitude);
    state.p_bs_rx = total_power(&state.bs_rx_amplitude);
    state.mu_ul = if state.p_ue_tx > 0.0 { state.p_bs_rx / state.p_ue_tx } else { 0.0 };
    state
}

/// Saturating per-element amplifier output power.
pub fn amplifier_output(p_in: f64, g0: f64, p_sat_el: f64) -> f64 {
    let linear = g0 * p_in;
    linear / (1.0 + linear / p_sat_el)
}

/// BS regeneration: tap off the communication and localization fractions,
/// amplify each element through the saturating law, conjugate the phase,
/// and start the next cycle at the downlink carrier.
pub fn bs_regenerate(
    mut state: LoopState,
    cfg: &ScenarioConfig,
    sigma_phase: f64,
    rng: &mut impl Rng,
) -> LoopState {
    let keep = (1.0 - cfg.beta_com - cfg.beta_loc).max(0.0);
    let g0 = cfg.amp_gain_linear();
    let p_sat_el = cfg.amp_sat_power / state.bs_rx_amplitude.len() as f64;
    let noise = phase_noise_dist(sigma_phase);
    state.bs_tx_amplitude = state
        .bs_rx_amplitude
        .iter()
        .map(|r| {
            let p_in = keep * r.norm_sqr();
            let p_out = amplifier_output(p_in, g0, p_sat_el);
            let mut phase = -r.arg();
            if let Some(dist) = &noise {
                phase += dist.sample(rng);
            }
            Complex64::from_polar(p_out.sqrt(), phase)
        })
        .collect();
    state.p_bs_tx = total_power(&state.bs_tx_amplitude);
    state.iteration += 1;
    state
}

fn phase_noise_dist(sigma: f64) -> Option<Normal<f64>> {
    if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("valid normal parameters"))
    } else {
        None
    }
}

/// Build the downlink and uplink channel matrices for a placed link.
pub fn build_link_channels(
    geom: &LinkGeometry,
    cfg: &ScenarioConfig,
    sigma_phase: f64,
    rng_dl: &mut impl Rng,
    rng_ul: &mut impl Rng,
) -> (ChannelMatrix, ChannelMatrix) {
    let g_max = cfg.g_max_linear();
    let h_dl = build_channel(
        &geom.bs_tx,
        &geom.ue_rx,
        cfg.f1,
        cfg.path_loss_exp,
        g_max,
        sigma_phase,
        rng_dl,
    );
    let h_ul = build_channel(
        &geom.ue_tx,
        &geom.bs_rx,
        cfg.f2,
        cfg.path_loss_exp,
        g_max,
        sigma_phase,
        rng_ul,
    );
    (h_dl, h_ul)
}

/// Run full cycles until the per-cycle amplifier gain and loop loss balance
/// within `convergence_tol` for [`STABLE_WINDOW`] consecutive cycles, or
/// until `max_iterations`.
///
/// Phase noise perturbs the loop only when `loop_phase_noise` is set; in
/// that case the channel matrices are redrawn every cycle.
pub fn run_to_resonance(
    geom: &LinkGeometry,
    cfg: &ScenarioConfig,
    master_seed: u64,
) -> Result<ResonanceResult, ResonanceError> {
    let sigma_loop = if cfg.loop_phase_noise { cfg.phase_noise_sigma } else { 0.0 };
    let mut rng_init = derive_rng(master_seed, STREAM_INIT);
    let mut rng_dl = derive_rng(master_seed, STREAM_CHANNEL_DL);
    let mut rng_ul = derive_rng(master_seed, STREAM_CHANNEL_UL);
    let mut rng_loop = derive_rng(master_seed, STREAM_LOOP);

    let (mut h_dl, mut h_ul) =
        build_link_channels(geom, cfg, sigma_loop, &mut rng_dl, &mut rng_ul);

    let mut state = initialize_loop(geom, cfg, &mut rng_init);
    let mut history = Vec::new();
    let mut balanced_streak = 0usize;
    let mut converged = false;

    while state.iteration < cfg.max_iterations {
        if cfg.loop_phase_noise && state.iteration > 0 {
            let pair = build_link_channels(geom, cfg, sigma_loop, &mut rng_dl, &mut rng_ul);
            h_dl = pair.0;
            h_ul = pair.1;
        }

        let p_tx_before = state.p_bs_tx;
        state = downlink_hop(state, &h_dl);
        state = ue_retroreflect(state, cfg, sigma_loop, &mut rng_loop);
        state = uplink_hop(state, &h_ul);
        state = bs_regenerate(state, cfg, sigma_loop, &mut rng_loop);

        state.loss_k = p_tx_before - state.p_bs_rx;
        state.gain_k = state.p_bs_tx - state.p_bs_rx;

        history.push(CycleRecord {
            iteration: state.iteration,
            p_bs_tx: p_tx_before,
            p_bs_rx: state.p_bs_rx,
            p_ue_rx: state.p_ue_rx,
            p_ue_tx: state.p_ue_tx,
            mu_dl: state.mu_dl,
            mu_ul: state.mu_ul,
            gain_w: state.gain_k,
            loss_w: state.loss_k,
        });

        if !state.p_bs_tx.is_finite()
            || state.p_bs_tx > DIVERGENCE_FACTOR * cfg.amp_sat_power
        {
            return Err(ResonanceError::Diverged {
                iteration: state.iteration,
                power: state.p_bs_tx,
            });
        }

        let balance = (state.gain_k - state.loss_k).abs() / state.gain_k.max(1e-30);
        // A decayed loop balances trivially near zero power; resonance
        // means a live beam.
        let live = state.p_bs_tx > LIVE_POWER_FLOOR_REL * cfg.amp_sat_power;
        if balance <= cfg.convergence_tol && live {
            balanced_streak += 1;
            if balanced_streak >= STABLE_WINDOW {
                converged = true;
                break;
            }
        } else {
            balanced_streak = 0;
        }
    }

    Ok(ResonanceResult {
        converged,
        iterations_run: state.iteration,
        history,
        steady_state: state,
    })
}

/// History rows rendered as the documented CSV layout.
pub fn history_csv(history: &[CycleRecord]) -> String {
    let mut out =
        String::from("iteration,p_bs_tx,p_bs_rx,p_ue_rx,p_ue_tx,mu_dl,mu_ul,gain_w,loss_w\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.p_bs_tx,
            r.p_bs_rx,
            r.p_ue_rx,
            r.p_ue_tx,
            r.mu_dl,
            r.mu_ul,
            r.gain_w,
            r.loss_w
        ));
    }
    out
}
