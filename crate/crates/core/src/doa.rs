//! Passive direction-of-arrival estimation at the BS.
//!
//! The localization tap of the uplink signal is synthesized into baseband
//! snapshots on a square sub-array of the BS receive grid, reduced to a
//! sample covariance, split into signal and noise subspaces, and scanned
//! with a 2-D MUSIC spectrum. Monte Carlo trials aggregate the angular
//! root-mean-square error.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{wavelength, ScenarioConfig};
use crate::geometry::{build_link_geometry, steering_vector, LinkGeometry};
use crate::resonance::{run_to_resonance, LoopState};
use crate::rng::{derive_rng, STREAM_TRIAL_BASE};

#[derive(Debug, Error)]
pub enum DoaError {
    #[error("eigendecomposition failed for a {dim}x{dim} covariance (trace {trace:.3e})")]
    EigenFailure { dim: usize, trace: f64 },
    #[error("source count {source_count} must stay below the array size {dim}")]
    TooManySources { source_count: usize, dim: usize },
}

/// The square sub-array the sensing unit taps, with its steering model.
#[derive(Debug, Clone, Copy)]
pub struct SensingArray {
    /// Elements per side of the sub-array.
    pub side: usize,
    /// Element spacing in m (inherited from the BS receive grid).
    pub spacing: f64,
    /// Wavelength of the uplink carrier in m.
    pub wavelength: f64,
}

impl SensingArray {
    /// Sensing view of a placed link: the BS receive array at the uplink
    /// wavelength, cut down to `doa_side` when configured.
    pub fn from_link(geom: &LinkGeometry, cfg: &ScenarioConfig) -> Self {
        let side = if cfg.doa_side == 0 { cfg.m_side } else { cfg.doa_side };
        SensingArray {
            side,
            spacing: geom.bs_rx.spacing,
            wavelength: wavelength(cfg.f2),
        }
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    /// Steering vector toward (theta, phi) in rad.
    pub fn steering(&self, theta: f64, phi: f64) -> Vec<Complex64> {
        steering_vector(self.side, self.spacing, self.wavelength, theta, phi)
    }
}

/// Baseband snapshots observed by the sensing unit.
#[derive(Debug, Clone)]
pub struct SnapshotBlock {
    /// Complex samples, elements by snapshots.
    pub samples: DMatrix<Complex64>,
    /// Localization power fraction the samples were scaled by.
    pub beta_loc: f64,
    /// Effective per-element SNR of the block, linear.
    pub snr_context: f64,
}

/// Synthesize `k` snapshots of a unit-power constant-envelope source at
/// `truth`, with per-element signal power `signal_power` and complex noise
/// variance `noise_sigma2`.
pub fn synthesize_snapshots_with(
    array: &SensingArray,
    truth: (f64, f64),
    signal_power: f64,
    noise_sigma2: f64,
    beta_loc: f64,
    k: usize,
    rng: &mut impl Rng,
) -> SnapshotBlock {
    assert!(k >= 1, "at least one snapshot");
    let a = array.steering(truth.0, truth.1);
    let m = array.len();
    let amp = signal_power.sqrt();
    let noise_amp = (noise_sigma2 / 2.0).sqrt();
    let mut samples = DMatrix::zeros(m, k);
    for col in 0..k {
        let s = Complex64::from_polar(amp, rng.gen::<f64>() * std::f64::consts::TAU);
        for row in 0..m {
            let noise = if noise_sigma2 > 0.0 {
                Complex64::new(
                    noise_amp * gaussian(rng),
                    noise_amp * gaussian(rng),
                )
            } else {
                Complex64::new(0.0, 0.0)
            };
            samples[(row, col)] = a[row] * s + noise;
        }
    }
    let snr_context = if noise_sigma2 > 0.0 { signal_power / noise_sigma2 } else { f64::INFINITY };
    SnapshotBlock { samples, beta_loc, snr_context }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    use rand_distr::StandardNormal;
    rng.sample(StandardNormal)
}

/// Snapshots for the steady state of a placed link: the localization tap
/// of the per-element uplink receive power against the uplink thermal
/// noise floor.
pub fn synthesize_snapshots(
    geom: &LinkGeometry,
    steady: &LoopState,
    cfg: &ScenarioConfig,
    rng: &mut impl Rng,
) -> SnapshotBlock {
    let array = SensingArray::from_link(geom, cfg);
    let m_full = geom.bs_rx.len() as f64;
    let signal_power = cfg.beta_loc * steady.p_bs_rx / m_full;
    let noise = uplink_noise(cfg);
    synthesize_snapshots_with(
        &array,
        (cfg.elevation(), cfg.azimuth()),
        signal_power,
        noise.variance,
        cfg.beta_loc,
        cfg.snapshots,
        rng,
    )
}

/// Receiver noise seen by the sensing unit.
pub fn uplink_noise(cfg: &ScenarioConfig) -> crate::channel::NoiseModel {
    crate::channel::NoiseModel::new(
        cfg.temperature,
        cfg.bandwidth_ul,
        cfg.eta,
        STREAM_TRIAL_BASE,
    )
}

/// Sample covariance `(1/K) S S^H`, Hermitian by construction.
pub fn sample_covariance(block: &SnapshotBlock) -> DMatrix<Complex64> {
    let m = block.samples.nrows();
    let k = block.samples.ncols();
    let scale = 1.0 / k as f64;
    let mut r = DMatrix::zeros(m, m);
    for i in 0..m {
        // Real diagonal, computed as such.
        let mut diag = 0.0;
        for t in 0..k {
            diag += block.samples[(i, t)].norm_sqr();
        }
        r[(i, i)] = Complex64::new(diag * scale, 0.0);
        for j in (i + 1)..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..k {
                acc += block.samples[(i, t)] * block.samples[(j, t)].conj();
            }
            let v = acc * scale;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
    r
}

/// Orthonormal eigenbases of a Hermitian covariance, split by descending
/// eigenvalue into signal and noise subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// Signal basis, elements by `source_count` columns.
    pub signal: DMatrix<Complex64>,
    /// Noise basis, elements by the remaining columns.
    pub noise: DMatrix<Complex64>,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Eigendecompose `r` and split the eigenvectors by descending eigenvalue.
pub fn subspace_split(
    r: &DMatrix<Complex64>,
    source_count: usize,
) -> Result<SubspaceSplit, DoaError> {
    let dim = r.nrows();
    if source_count >= dim {
        return Err(DoaError::TooManySources { source_count, dim });
    }
    let trace: f64 = (0..dim).map(|i| r[(i, i)].re).sum();
    let eig = nalgebra::SymmetricEigen::try_new(r.clone(), 1e-13, 10_000)
        .ok_or(DoaError::EigenFailure { dim, trace })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut signal = DMatrix::zeros(dim, source_count);
    let mut noise = DMatrix::zeros(dim, dim - source_count);
    for (rank, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        if rank < source_count {
            signal.column_mut(rank).copy_from(&col);
        } else {
            noise.column_mut(rank - source_count).copy_from(&col);
        }
    }
    Ok(SubspaceSplit { signal, noise, eigenvalues })
}

/// Search grid and refinement resolution of the MUSIC scan, in degrees.
#[derive(Debug, Clone, Copy)]
pub struct MusicGrid {
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
    pub refine_resolution_deg: f64,
}

impl Default for MusicGrid {
    fn default() -> Self {
        MusicGrid { theta_step_deg: 1.0, phi_step_deg: 1.0, refine_resolution_deg: 0.05 }
    }
}

/// 2-D MUSIC pseudo-spectrum over (elevation, azimuth) with the located
/// peak.
#[derive(Debug, Clone)]
pub struct MusicSpectrum {
    /// Elevation grid in degrees.
    pub theta_grid: Vec<f64>,
    /// Azimuth grid in degrees.
    pub phi_grid: Vec<f64>,
    /// Spectrum values, theta-major.
    pub values: Vec<f64>,
    /// Refined peak (elevation, azimuth) in degrees.
    pub peak: (f64, f64),
    pub peak_value: f64,
    /// Set when the peak elevation is below the refinement resolution, where
    /// azimuth is unidentifiable.
    pub azimuth_degenerate: bool,
}

/// Noise-subspace projection residual of the steering vector toward
/// (theta, phi): `|U_n^H a|^2`, evaluated through the signal-subspace
/// complement (the bases are orthonormal, so `|a|^2 - |U_s^H a|^2` is the
/// same quantity without the large noise basis product).
fn noise_projection(split: &SubspaceSplit, array: &SensingArray, theta: f64, phi: f64) -> f64 {
    let a = array.steering(theta, phi);
    let m = a.len() as f64;
    let mut sig = 0.0;
    for c in 0..split.signal.ncols() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, ai) in a.iter().enumerate() {
            acc += split.signal[(i, c)].conj() * ai;
        }
        sig += acc.norm_sqr();
    }
    (m - sig).max(0.0)
}

/// MUSIC spectrum value: inverse of the noise-subspace projection.
fn spectrum_value(den: f64) -> f64 {
    1.0 / den.max(1e-300)
}

fn golden_refine(
    mut lo: f64,
    mut hi: f64,
    mut eval: impl FnMut(f64) -> f64,
    tol: f64,
) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - (hi - lo) * INV_PHI;
    let mut x2 = lo + (hi - lo) * INV_PHI;
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * INV_PHI;
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * INV_PHI;
            f2 = eval(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Scan the MUSIC spectrum on a coarse grid over elevation [0, 90) and
/// azimuth [0, 360), then refine the top peak locally to well below the
/// stated refinement resolution.
pub fn music_spectrum(
    split: &SubspaceSplit,
    array: &SensingArray,
    grid: &MusicGrid,
) -> MusicSpectrum {
    let theta_grid: Vec<f64> = {
        let mut v = Vec::new();
        let mut t = 0.0;
        while t < 90.0 {
            v.push(t);
            t += grid.theta_step_deg;
        }
        v
    };
    let phi_grid: Vec<f64> = {
        let mut v = Vec::new();
        let mut p = 0.0;
        while p < 360.0 {
            v.push(p);
            p += grid.phi_step_deg;
        }
        v
    };

    let values: Vec<f64> = theta_grid
        .par_iter()
        .flat_map_iter(|&td| {
            let phi_grid = &phi_grid;
            phi_grid.iter().map(move |&pd| {
                spectrum_value(noise_projection(
                    split,
                    array,
                    td.to_radians(),
                    pd.to_radians(),
                ))
            })
        })
        .collect();

    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            best_idx = i;
        }
    }
    let mut theta_deg = theta_grid[best_idx / phi_grid.len()];
    let mut phi_deg = phi_grid[best_idx % phi_grid.len()];

    // Coordinate-wise golden-section refinement around the coarse peak.
    let tol = (grid.refine_resolution_deg / 50.0).max(1e-6);
    for _ in 0..3 {
        let phi_fixed = phi_deg;
        theta_deg = golden_refine(
            (theta_deg - 1.5 * grid.theta_step_deg).max(0.0),
            (theta_deg + 1.5 * grid.theta_step_deg).min(90.0 - 1e-9),
            |t| noise_projection(split, array, t.to_radians(), phi_fixed.to_radians()),
            tol,
        );
        let theta_fixed = theta_deg;
        let w = 1.5 * grid.phi_step_deg;
        let offset = golden_refine(
            -w,
            w,
            |d| {
                let p = (phi_fixed + d).rem_euclid(360.0);
                noise_projection(split, array, theta_fixed.to_radians(), p.to_radians())
            },
            tol,
        );
        phi_deg = (phi_fixed + offset).rem_euclid(360.0);
    }

    let peak_value = spectrum_value(noise_projection(
        split,
        array,
        theta_deg.to_radians(),
        phi_deg.to_radians(),
    ));
    let azimuth_degenerate = theta_deg < grid.refine_resolution_deg;

    MusicSpectrum {
        theta_grid,
        phi_grid,
        values,
        peak: (theta_deg, phi_deg),
        peak_value,
        azimuth_degenerate,
    }
}

/// Spectrum CSV export: `theta_deg,phi_deg,p_music`.
pub fn spectrum_csv(spec: &MusicSpectrum) -> String {
    let mut out = String::from("theta_deg,phi_deg,p_music\n");
    for (it, &t) in spec.theta_grid.iter().enumerate() {
        for (ip, &p) in spec.phi_grid.iter().enumerate() {
            out.push_str(&format!("{t},{p},{}\n", spec.values[it * spec.phi_grid.len() + ip]));
        }
    }
    out
}

/// Angular error statistics over Monte Carlo trials, in degrees.
#[derive(Debug, Clone, Copy)]
pub struct RmseReport {
    pub rmse_total: f64,
    pub rmse_theta: f64,
    pub rmse_phi: f64,
    /// Valid trials that entered the statistics.
    pub trials: usize,
    /// Trials excluded because the peak search failed.
    pub invalid_trials: usize,
    /// True (elevation, azimuth) in degrees.
    pub truth: (f64, f64),
}

fn wrap_deg_diff(d: f64) -> f64 {
    let mut x = (d + 180.0).rem_euclid(360.0) - 180.0;
    if x == -180.0 {
        x = 180.0;
    }
    x
}

fn rmse_from_errors(errors: &[(f64, f64)], invalid: usize, truth: (f64, f64)) -> RmseReport {
    let n = errors.len().max(1) as f64;
    let mse_theta: f64 = errors.iter().map(|e| e.0 * e.0).sum::<f64>() / n;
    let mse_phi: f64 = errors.iter().map(|e| e.1 * e.1).sum::<f64>() / n;
    RmseReport {
        rmse_total: (mse_theta + mse_phi).sqrt(),
        rmse_theta: mse_theta.sqrt(),
        rmse_phi: mse_phi.sqrt(),
        trials: errors.len(),
        invalid_trials: invalid,
        truth,
    }
}

fn run_trials(
    array: &SensingArray,
    truth_deg: (f64, f64),
    signal_power: f64,
    sigma2: f64,
    beta_loc: f64,
    snapshots: usize,
    trials: usize,
    master_seed: u64,
    grid: &MusicGrid,
) -> RmseReport {
    let outcomes: Vec<Option<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = derive_rng(master_seed, STREAM_TRIAL_BASE + trial as u64);
            let block = synthesize_snapshots_with(
                array,
                (truth_deg.0.to_radians(), truth_deg.1.to_radians()),
                signal_power,
                sigma2,
                beta_loc,
                snapshots,
                &mut rng,
            );
            let r = sample_covariance(&block);
            let Ok(split) = subspace_split(&r, 1) else { return None };
            let spec = music_spectrum(&split, array, grid);
            if !spec.peak_value.is_finite() && spec.values.iter().all(|v| !v.is_finite()) {
                return None;
            }
            let d_theta = spec.peak.0 - truth_deg.0;
            let d_phi = if spec.azimuth_degenerate {
                0.0
            } else {
                wrap_deg_diff(spec.peak.1 - truth_deg.1)
            };
            Some((d_theta, d_phi))
        })
        .collect();

    let mut errors = Vec::with_capacity(trials);
    let mut invalid = 0;
    for o in outcomes {
        match o {
            Some(e) => errors.push(e),
            None => invalid += 1,
        }
    }
    rmse_from_errors(&errors, invalid, truth_deg)
}

/// End-to-end Monte Carlo RMSE: aim the link at `truth`, run the loop to
/// steady state once (loop noise disabled reuses it across trials), then
/// estimate the DOA `trials` times with fresh snapshot noise.
pub fn estimate_rmse(
    cfg: &ScenarioConfig,
    truth_deg: (f64, f64),
    trials: usize,
    master_seed: u64,
) -> RmseReport {
    assert!(trials >= 1);
    let mut aimed = cfg.clone();
    aimed.elevation_deg = truth_deg.0;
    aimed.azimuth_deg = truth_deg.1;
    let geom = build_link_geometry(&aimed);
    // A loop that fails to resonate still leaves a (tiny) steady receive
    // power; the trials then degrade toward pure-noise estimates, which is
    // exactly the regime the error statistics should expose.
    let steady = match run_to_resonance(&geom, &aimed, master_seed) {
        Ok(res) => res.steady_state,
        Err(_) => {
            let mut rng = derive_rng(master_seed, crate::rng::STREAM_INIT);
            crate::resonance::initialize_loop(&geom, &aimed, &mut rng)
        }
    };
    let array = SensingArray::from_link(&geom, &aimed);
    let signal_power = aimed.beta_loc * steady.p_bs_rx / geom.bs_rx.len() as f64;
    let sigma2 = uplink_noise(&aimed).variance;
    run_trials(
        &array,
        truth_deg,
        signal_power,
        sigma2,
        aimed.beta_loc,
        aimed.snapshots,
        trials,
        master_seed,
        &MusicGrid::default(),
    )
}

/// Monte Carlo RMSE at a prescribed per-element SNR, bypassing the loop.
/// Feeds the SNR-axis error sweeps.
pub fn estimate_rmse_at_snr(
    cfg: &ScenarioConfig,
    truth_deg: (f64, f64),
    per_element_snr: f64,
    trials: usize,
    master_seed: u64,
) -> RmseReport {
    let geom = build_link_geometry(cfg);
    let array = SensingArray::from_link(&geom, cfg);
    let sigma2 = uplink_noise(cfg).variance;
    run_trials(
        &array,
        truth_deg,
        per_element_snr * sigma2,
        sigma2,
        cfg.beta_loc,
        cfg.snapshots,
        trials,
        master_seed,
        &MusicGrid::default(),
    )
}
