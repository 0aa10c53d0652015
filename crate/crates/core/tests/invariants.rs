//! Cross-module invariants that tie the sensing chain together.

use num_complex::Complex64;

use rb_isac::config::{load_config, save_config, wavelength, ScenarioConfig};
use rb_isac::doa::{
    estimate_rmse_at_snr, sample_covariance, subspace_split, synthesize_snapshots_with,
    SensingArray,
};
use rb_isac::rng::derive_rng;

fn sensing_array(side: usize) -> SensingArray {
    let lambda = wavelength(31e9);
    SensingArray { side, spacing: lambda / 2.0, wavelength: lambda }
}

/// Noise-subspace leakage of the true steering vector vanishes as SNR
/// grows: the squared projection drops below 1e-6 from 60 dB per-element
/// SNR with K >= M snapshots, and keeps falling.
#[test]
fn orthogonality_residual_vanishes_with_snr() {
    let arr = sensing_array(4);
    let truth = (30f64.to_radians(), 30f64.to_radians());
    let sigma2 = 1e-10;
    let k = 2 * arr.len();
    let mut residuals = Vec::new();
    for snr_db in [40.0, 60.0, 80.0] {
        let snr = 10f64.powf(snr_db / 10.0);
        let mut rng = derive_rng(5, 99);
        let block =
            synthesize_snapshots_with(&arr, truth, snr * sigma2, sigma2, 0.1, k, &mut rng);
        let split = subspace_split(&sample_covariance(&block), 1).unwrap();
        let a = arr.steering(truth.0, truth.1);
        let mut res2 = 0.0;
        for c in 0..split.noise.ncols() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..a.len() {
                acc += split.noise[(i, c)].conj() * a[i];
            }
            res2 += acc.norm_sqr();
        }
        residuals.push(res2);
    }
    assert!(
        residuals[1] < 1e-6,
        "squared residual at 60 dB is {:.3e}",
        residuals[1]
    );
    assert!(residuals[0] > residuals[1] && residuals[1] > residuals[2]);
}

/// Pool-adjacent-violators fit, nonincreasing.
fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    let mut level: Vec<f64> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    for &v in y {
        level.push(v);
        weight.push(1.0);
        while level.len() >= 2 && level[level.len() - 2] < level[level.len() - 1] {
            let (l2, w2) = (level.pop().unwrap(), weight.pop().unwrap());
            let (l1, w1) = (level.pop().unwrap(), weight.pop().unwrap());
            level.push((l1 * w1 + l2 * w2) / (w1 + w2));
            weight.push(w1 + w2);
        }
    }
    let mut fit = Vec::with_capacity(y.len());
    for (l, w) in level.iter().zip(&weight) {
        for _ in 0..*w as usize {
            fit.push(*l);
        }
    }
    fit
}

/// DOA error statistics across an SNR sweep: the trend is nonincreasing
/// (isotonic fit residual, not strict per-point monotonicity), and the
/// elevation error never aggregates worse than the azimuth error.
#[test]
fn rmse_trend_over_snr_sweep() {
    let mut cfg = ScenarioConfig::default();
    cfg.m_side = 8;
    cfg.n_side = 8;
    cfg.doa_side = 8;
    cfg.snapshots = 32;
    let truth = (30.0, 30.0);
    let snrs_db = [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
    let mut totals = Vec::new();
    let mut theta_sum = 0.0;
    let mut phi_sum = 0.0;
    for &snr_db in &snrs_db {
        let rep = estimate_rmse_at_snr(
            &cfg,
            truth,
            10f64.powf(snr_db / 10.0),
            20,
            0x5EEd,
        );
        totals.push(rep.rmse_total);
        theta_sum += rep.rmse_theta;
        phi_sum += rep.rmse_phi;
    }

    let fit = isotonic_nonincreasing(&totals);
    let range = totals.iter().cloned().fold(f64::MIN, f64::max)
        - totals.iter().cloned().fold(f64::MAX, f64::min);
    let residual = totals
        .iter()
        .zip(&fit)
        .map(|(y, f)| (y - f) * (y - f))
        .sum::<f64>()
        .sqrt()
        / (totals.len() as f64).sqrt();
    assert!(
        residual <= 0.15 * range,
        "isotonic residual {residual:.4} vs range {range:.4}; totals {totals:?}"
    );
    assert!(
        totals.first().unwrap() > totals.last().unwrap(),
        "errors should shrink across the sweep: {totals:?}"
    );

    // Elevation stays at least as accurate as azimuth, 10% tolerance on
    // the aggregate.
    assert!(
        theta_sum <= 1.1 * phi_sum,
        "aggregate elevation RMSE {theta_sum:.4} exceeds azimuth {phi_sum:.4} by more than 10%"
    );
}

/// Scenario files round-trip through the filesystem unchanged.
#[test]
fn config_file_roundtrip() {
    let mut cfg = ScenarioConfig::default();
    cfg.link_length = 4.75;
    cfg.rng_seed = 0xDEADBEEF;
    cfg.convergence_tol = 2.5e-4;
    let path = std::env::temp_dir().join(format!("rbisac_cfg_{}.cfg", std::process::id()));
    save_config(&cfg, &path).unwrap();
    let back = load_config(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(cfg, back);
}
