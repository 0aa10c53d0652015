//! Implementations of the experiment subcommands.

use std::path::Path;

use rb_isac::config::ScenarioConfig;
use rb_isac::doa::{
    estimate_rmse, estimate_rmse_at_snr, music_spectrum, sample_covariance, spectrum_csv,
    subspace_split, synthesize_snapshots, MusicGrid, SensingArray,
};
use rb_isac::fieldmap::{compute_field_map, FieldMap, GridSpec};
use rb_isac::geometry::{build_link_geometry, element_positions_csv, LinkGeometry};
use rb_isac::metrics::{report_csv_row, to_db, REPORT_CSV_HEADER};
use rb_isac::resonance::{
    build_link_channels, downlink_hop, history_csv, initialize_loop, run_to_resonance,
    ue_retroreflect, LoopState, ResonanceError, ResonanceResult,
};
use rb_isac::rng::{derive_rng, STREAM_CHANNEL_DL, STREAM_CHANNEL_UL, STREAM_INIT, STREAM_LOOP};

use crate::output::RunContext;
use crate::{CliError, FieldDirection, FieldStage, RmseAxis, SweepAxis};

fn resonate_or_error(
    geom: &LinkGeometry,
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<ResonanceResult, CliError> {
    match run_to_resonance(geom, cfg, seed) {
        Ok(res) => Ok(res),
        Err(ResonanceError::Diverged { iteration, power }) => {
            Err(CliError::Diverged { iteration, power })
        }
    }
}

/// `resonate`: run the loop to steady state and export the gain/loss
/// history.
pub fn cmd_resonate(cfg: &ScenarioConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let geom = build_link_geometry(cfg);
    warn_spacing(&geom);
    let mut ctx = RunContext::new(out, "resonate".into(), seed)?;
    let res = resonate_or_error(&geom, cfg, seed)?;

    ctx.write_file("resonance_history.csv", &history_csv(&res.history))?;

    // Balance trajectory in dB as well; nonpositive values have no dB
    // representation and are left empty.
    let mut db = String::from("iteration,gain_db,loss_db\n");
    for r in &res.history {
        let fmt = |x: f64| {
            if x > 0.0 {
                format!("{}", to_db(x))
            } else {
                String::new()
            }
        };
        db.push_str(&format!("{},{},{}\n", r.iteration, fmt(r.gain_w), fmt(r.loss_w)));
    }
    ctx.write_file("gain_loss_db.csv", &db)?;
    ctx.finalize(cfg)?;

    let s = &res.steady_state;
    eprintln!(
        "resonate: converged={} iterations={} mu_dl={:.4} mu_ul={:.4} p_bs_tx={:.3e} W",
        res.converged, res.iterations_run, s.mu_dl, s.mu_ul, s.p_bs_tx
    );
    if res.converged {
        Ok(())
    } else {
        Err(CliError::NoResonance { iterations: res.iterations_run })
    }
}

fn first_cycle_ue_state(
    geom: &LinkGeometry,
    cfg: &ScenarioConfig,
    seed: u64,
) -> LoopState {
    let mut rng_init = derive_rng(seed, STREAM_INIT);
    let mut rng_dl = derive_rng(seed, STREAM_CHANNEL_DL);
    let mut rng_ul = derive_rng(seed, STREAM_CHANNEL_UL);
    let mut rng_loop = derive_rng(seed, STREAM_LOOP);
    let sigma = if cfg.loop_phase_noise { cfg.phase_noise_sigma } else { 0.0 };
    let (h_dl, _) = build_link_channels(geom, cfg, sigma, &mut rng_dl, &mut rng_ul);
    let state = initialize_loop(geom, cfg, &mut rng_init);
    let state = downlink_hop(state, &h_dl);
    ue_retroreflect(state, cfg, sigma, &mut rng_loop)
}

/// `fieldmap`: spatial intensity over the default xoz grid for a stage and
/// direction, labeled by the corresponding figure panel.
pub fn cmd_fieldmap(
    cfg: &ScenarioConfig,
    seed: u64,
    out: &Path,
    stage: FieldStage,
    direction: FieldDirection,
) -> Result<(), CliError> {
    let geom = build_link_geometry(cfg);
    warn_spacing(&geom);
    let label = match (stage, direction) {
        (FieldStage::First, FieldDirection::Dl) => "fig6a",
        (FieldStage::First, FieldDirection::Ul) => "fig6b",
        (FieldStage::Steady, FieldDirection::Dl) => "fig6c",
        (FieldStage::Steady, FieldDirection::Ul) => "fig6d",
    };
    let mut ctx = RunContext::new(out, format!("fieldmap {label}"), seed)?;

    let map = field_map_for(cfg, &geom, seed, stage, direction, label)?;
    ctx.write_file(&format!("{label}_fieldmap.csv"), &map.to_csv())?;
    ctx.write_file(&format!("{label}_fieldmap.txt"), &map.to_matrix_text())?;
    ctx.write_file("element_positions.csv", &element_positions_csv(&geom))?;
    ctx.finalize(cfg)?;
    eprintln!("fieldmap: wrote {label} ({} skipped grid points)", map.skipped.len());
    Ok(())
}

/// Build the map itself; shared with the acceptance suite.
pub fn field_map_for(
    cfg: &ScenarioConfig,
    geom: &LinkGeometry,
    seed: u64,
    stage: FieldStage,
    direction: FieldDirection,
    label: &str,
) -> Result<FieldMap, CliError> {
    let g_max = cfg.g_max_linear();
    let spec = GridSpec::default_xoz(cfg.link_length);
    let map = match (stage, direction) {
        (FieldStage::First, FieldDirection::Dl) => {
            let mut rng = derive_rng(seed, STREAM_INIT);
            let state = initialize_loop(geom, cfg, &mut rng);
            compute_field_map(&geom.bs_tx, &state.bs_tx_amplitude, cfg.f1, g_max, spec, label)
        }
        (FieldStage::First, FieldDirection::Ul) => {
            let state = first_cycle_ue_state(geom, cfg, seed);
            compute_field_map(&geom.ue_tx, &state.ue_tx_amplitude, cfg.f2, g_max, spec, label)
        }
        (FieldStage::Steady, dir) => {
            let res = resonate_or_error(geom, cfg, seed)?;
            if !res.converged {
                return Err(CliError::NoResonance { iterations: res.iterations_run });
            }
            let s = &res.steady_state;
            match dir {
                FieldDirection::Dl => compute_field_map(
                    &geom.bs_tx,
                    &s.bs_tx_amplitude,
                    cfg.f1,
                    g_max,
                    spec,
                    label,
                ),
                FieldDirection::Ul => compute_field_map(
                    &geom.ue_tx,
                    &s.ue_tx_amplitude,
                    cfg.f2,
                    g_max,
                    spec,
                    label,
                ),
            }
        }
    };
    Ok(map)
}

/// Default link lengths overlaid by the iteration and elevation sweeps.
const SWEEP_LINKS: [f64; 3] = [3.0, 4.0, 5.0];

/// `sweep`: communication metrics along one axis.
pub fn cmd_sweep(
    cfg: &ScenarioConfig,
    seed: u64,
    out: &Path,
    axis: SweepAxis,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
) -> Result<(), CliError> {
    let axis_name = match axis {
        SweepAxis::Iteration => "iteration",
        SweepAxis::Elevation => "elevation",
        SweepAxis::LinkLength => "link_length",
    };
    let mut ctx = RunContext::new(out, format!("sweep {axis_name}"), seed)?;
    let mut csv = String::from(REPORT_CSV_HEADER);
    csv.push('\n');

    match axis {
        SweepAxis::Iteration => {
            // Per-cycle metrics for each overlay link length.
            for l in SWEEP_LINKS {
                let mut c = cfg.clone();
                c.link_length = l;
                let geom = build_link_geometry(&c);
                let res = resonate_or_error(&geom, &c, seed)?;
                for r in &res.history {
                    csv.push_str(&report_csv_row(
                        &c, r.iteration, r.p_ue_rx, r.p_bs_rx, r.mu_dl, r.mu_ul,
                    ));
                    csv.push('\n');
                }
            }
        }
        SweepAxis::Elevation => {
            let grid = axis_grid(from.unwrap_or(0.0), to.unwrap_or(40.0), step.unwrap_or(5.0));
            for l in SWEEP_LINKS {
                for &theta in &grid {
                    let mut c = cfg.clone();
                    c.link_length = l;
                    c.elevation_deg = theta;
                    let geom = build_link_geometry(&c);
                    let res = resonate_or_error(&geom, &c, seed)?;
                    let s = &res.steady_state;
                    csv.push_str(&report_csv_row(
                        &c, s.iteration, s.p_ue_rx, s.p_bs_rx, s.mu_dl, s.mu_ul,
                    ));
                    csv.push('\n');
                }
            }
        }
        SweepAxis::LinkLength => {
            let grid = axis_grid(from.unwrap_or(3.0), to.unwrap_or(5.0), step.unwrap_or(0.25));
            for &l in &grid {
                let mut c = cfg.clone();
                c.link_length = l;
                let geom = build_link_geometry(&c);
                let res = resonate_or_error(&geom, &c, seed)?;
                let s = &res.steady_state;
                csv.push_str(&report_csv_row(
                    &c, s.iteration, s.p_ue_rx, s.p_bs_rx, s.mu_dl, s.mu_ul,
                ));
                csv.push('\n');
            }
        }
    }

    ctx.write_file(&format!("sweep_{axis_name}.csv"), &csv)?;
    ctx.finalize(cfg)?;
    eprintln!("sweep: wrote sweep_{axis_name}.csv");
    Ok(())
}

fn axis_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "axis step must be positive");
    let mut v = Vec::new();
    let mut x = from;
    while x <= to + 1e-9 {
        v.push(x);
        x += step;
    }
    v
}

/// `doa`: one MUSIC spectrum of the steady uplink, with the located peak.
pub fn cmd_doa(cfg: &ScenarioConfig, seed: u64, out: &Path) -> Result<(), CliError> {
    let mut ctx = RunContext::new(out, "doa".into(), seed)?;
    let geom = build_link_geometry(cfg);
    warn_spacing(&geom);
    // Sensing statistics of a weak or dead loop are still an experiment
    // outcome, so non-convergence does not abort here.
    let res = resonate_or_error(&geom, cfg, seed)?;
    let steady = res.steady_state;
    let mut rng = derive_rng(seed, rb_isac::rng::STREAM_TRIAL_BASE);
    let block = synthesize_snapshots(&geom, &steady, cfg, &mut rng);
    let r = sample_covariance(&block);
    let split = subspace_split(&r, 1).map_err(|e| CliError::Numeric(e.to_string()))?;
    let array = SensingArray::from_link(&geom, cfg);
    let spec = music_spectrum(&split, &array, &MusicGrid::default());

    ctx.write_file("music_spectrum.csv", &spectrum_csv(&spec))?;
    let peak = format!(
        "theta_deg,phi_deg,peak_value,azimuth_degenerate,sub_array_side,per_element_snr_db\n{},{},{},{},{},{}\n",
        spec.peak.0,
        spec.peak.1,
        spec.peak_value,
        spec.azimuth_degenerate,
        array.side,
        to_db(block.snr_context),
    );
    ctx.write_file("doa_peak.csv", &peak)?;
    ctx.finalize(cfg)?;
    eprintln!(
        "doa: peak at ({:.3}, {:.3}) deg, truth ({}, {}), converged={}",
        spec.peak.0, spec.peak.1, cfg.elevation_deg, cfg.azimuth_deg, res.converged
    );
    Ok(())
}

/// `rmse`: Monte Carlo DOA error sweeps along SNR or link length.
pub fn cmd_rmse(
    cfg: &ScenarioConfig,
    seed: u64,
    out: &Path,
    axis: RmseAxis,
    from: Option<f64>,
    to: Option<f64>,
    step: Option<f64>,
    trials: Option<usize>,
) -> Result<(), CliError> {
    let trials = trials.unwrap_or(cfg.monte_carlo_trials);
    let truth = (cfg.elevation_deg, cfg.azimuth_deg);
    let axis_name = match axis {
        RmseAxis::Snr => "snr",
        RmseAxis::LinkLength => "link_length",
    };
    let mut ctx = RunContext::new(out, format!("rmse {axis_name}"), seed)?;

    let mut csv = String::new();
    match axis {
        RmseAxis::Snr => {
            csv.push_str("snr_db,rmse_theta,rmse_phi,rmse_total,invalid_trials\n");
            let grid = axis_grid(from.unwrap_or(-20.0), to.unwrap_or(20.0), step.unwrap_or(5.0));
            for &snr_db in &grid {
                let rep = estimate_rmse_at_snr(
                    cfg,
                    truth,
                    rb_isac::metrics::from_db(snr_db),
                    trials,
                    seed,
                );
                csv.push_str(&format!(
                    "{snr_db},{},{},{},{}\n",
                    rep.rmse_theta, rep.rmse_phi, rep.rmse_total, rep.invalid_trials
                ));
            }
        }
        RmseAxis::LinkLength => {
            csv.push_str("link_length,rmse_theta,rmse_phi,rmse_total,invalid_trials\n");
            let grid = axis_grid(from.unwrap_or(3.0), to.unwrap_or(5.0), step.unwrap_or(0.5));
            for &l in &grid {
                let mut c = cfg.clone();
                c.link_length = l;
                let rep = estimate_rmse(&c, truth, trials, seed);
                csv.push_str(&format!(
                    "{l},{},{},{},{}\n",
                    rep.rmse_theta, rep.rmse_phi, rep.rmse_total, rep.invalid_trials
                ));
            }
        }
    }

    ctx.write_file(&format!("rmse_{axis_name}.csv"), &csv)?;
    ctx.finalize(cfg)?;
    eprintln!("rmse: wrote rmse_{axis_name}.csv ({trials} trials per point)");
    Ok(())
}

fn warn_spacing(geom: &LinkGeometry) {
    if let Some(w) = &geom.spacing_warning {
        eprintln!("warning: {w}");
    }
}
