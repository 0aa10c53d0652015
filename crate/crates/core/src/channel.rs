//! Free-space channel matrices, element gain pattern, thermal noise, and
//! PLL phase-noise injection.
//!
//! A channel entry between transmit element m and receive element n carries
//! amplitude `(lambda/4pi) * sqrt(G_tx G_rx l_nm^-alpha)` and phase
//! `k l_nm` plus one optional phase-noise draw. Distances are exact per
//! element pair, so wavefront curvature inside the Fraunhofer distance is
//! captured without a separate near-field model.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{wavelength, PhysicalConstants};
use crate::geometry::PlanarArray;

/// Complex gain matrix between two placed arrays at one carrier.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    /// Amplitude gains, receive rows by transmit columns.
    pub gains: DMatrix<Complex64>,
    /// Carrier frequency in Hz.
    pub carrier: f64,
    /// Receiver noise variance associated with this hop, in W. Stays zero
    /// until a caller attaches a noise model.
    pub noise_sigma2: f64,
}

impl ChannelMatrix {
    pub fn rx_count(&self) -> usize {
        self.gains.nrows()
    }

    pub fn tx_count(&self) -> usize {
        self.gains.ncols()
    }

    pub fn with_noise(mut self, sigma2: f64) -> Self {
        self.noise_sigma2 = sigma2;
        self
    }
}

/// Per-sample complex Gaussian receiver noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    /// Per-sample circularly-symmetric complex variance in W.
    pub variance: f64,
    /// Label of the random stream that realizes the samples.
    pub stream: u64,
}

impl NoiseModel {
    pub fn new(temperature: f64, bandwidth: f64, eta: f64, stream: u64) -> Self {
        NoiseModel { variance: noise_variance(temperature, bandwidth, eta), stream }
    }
}

/// Cosine element pattern capped at the configured peak gain: `g_max *
/// cos(theta_off)`, zero beyond 90 degrees off boresight (suppressed back
/// lobe, not an error).
pub fn element_gain(theta_off: f64, g_max: f64) -> f64 {
    if theta_off >= std::f64::consts::FRAC_PI_2 {
        return 0.0;
    }
    element_gain_from_cos(theta_off.cos(), g_max)
}

/// Same pattern parameterized by `cos(theta_off)`, which channel assembly
/// gets directly from a dot product.
pub fn element_gain_from_cos(cos_theta_off: f64, g_max: f64) -> f64 {
    if cos_theta_off <= 0.0 {
        0.0
    } else {
        g_max * cos_theta_off
    }
}

/// Thermal noise variance `2 eta kappa T B`.
pub fn noise_variance(temperature: f64, bandwidth: f64, eta: f64) -> f64 {
    2.0 * eta * PhysicalConstants::BOLTZMANN * temperature * bandwidth
}

/// Draw `count` i.i.d. zero-mean Gaussian phase errors with std `sigma`.
pub fn draw_phase_noise(sigma: f64, count: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(sigma >= 0.0, "phase noise sigma must be nonnegative");
    if sigma == 0.0 {
        return vec![0.0; count];
    }
    let normal = Normal::new(0.0, sigma).expect("valid normal parameters");
    (0..count).map(|_| normal.sample(rng)).collect()
}

/// Assemble the complex channel matrix from `tx` to `rx` at `carrier`.
///
/// Entry phases are `k * l_nm` plus one zero-mean Gaussian draw of std
/// `phase_noise_sigma` per entry; magnitudes follow the per-pair link
/// budget with the cosine element pattern on both ends. Deterministic for
/// a given RNG state; bit-for-bit repeatable when `phase_noise_sigma` is
/// zero.
pub fn build_channel(
    tx: &PlanarArray,
    rx: &PlanarArray,
    carrier: f64,
    alpha: f64,
    g_max: f64,
    phase_noise_sigma: f64,
    rng: &mut impl Rng,
) -> ChannelMatrix {
    assert!(carrier > 0.0);
    let lambda = wavelength(carrier);
    let k = 2.0 * std::f64::consts::PI / lambda;
    let amp_scale = lambda / (4.0 * std::f64::consts::PI);

    let noise = if phase_noise_sigma > 0.0 {
        Some(Normal::new(0.0, phase_noise_sigma).expect("valid normal parameters"))
    } else {
        None
    };

    let mut gains = DMatrix::zeros(rx.len(), tx.len());
    for (n, p_rx) in rx.element_positions.iter().enumerate() {
        for (m, p_tx) in tx.element_positions.iter().enumerate() {
            let sep = p_rx - p_tx;
            let l = sep.norm();
            debug_assert!(l > 0.0, "coincident tx/rx elements");
            let dir = sep / l;
            let g_tx = element_gain_from_cos(dir.dot(&tx.boresight), g_max);
            let g_rx = element_gain_from_cos((-dir).dot(&rx.boresight), g_max);
            let amplitude = amp_scale * (g_tx * g_rx * l.powf(-alpha)).sqrt();
            let mut phase = k * l;
            if let Some(dist) = &noise {
                phase += dist.sample(rng);
            }
            gains[(n, m)] = Complex64::from_polar(amplitude, phase);
        }
    }
    ChannelMatrix { gains, carrier, noise_sigma2: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, STREAM_CHANNEL_DL};
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn facing_pair(l: f64) -> (PlanarArray, PlanarArray) {
        let tx = PlanarArray::new(
            1,
            0.005,
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let rx = PlanarArray::new(
            1,
            0.005,
            Vector3::new(0.0, 0.0, l),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 0.0),
        );
        (tx, rx)
    }

    const G_MAX: f64 = 3.140507; // 4.97 dBi as a linear factor

    #[test]
    #[allow(clippy::approx_constant)] // 3.141 is the rated linear gain, not pi
    fn peak_gain_matches_dbi_rating() {
        let g = element_gain(0.0, 10f64.powf(0.497));
        assert!((g - 3.141).abs() < 0.01, "got {g}");
        assert_eq!(element_gain(PI / 2.0, G_MAX), 0.0);
    }

    #[test]
    fn cosine_pattern_at_sixty_degrees() {
        let g = element_gain(60f64.to_radians(), G_MAX);
        assert!((g - G_MAX / 2.0).abs() < 1e-12);
    }

    #[test]
    fn back_lobe_suppressed_without_error() {
        assert_eq!(element_gain(2.5, G_MAX), 0.0);
    }

    #[test]
    fn pattern_monotone_nonincreasing() {
        let mut prev = f64::INFINITY;
        for i in 0..=90 {
            let g = element_gain((i as f64).to_radians(), G_MAX);
            assert!(g <= prev + 1e-15);
            prev = g;
        }
    }

    #[test]
    fn single_pair_friis_magnitude() {
        // Boresight pair, 1 m, alpha 2, 29 GHz: |h| = (lambda/4pi) * G_max / l.
        let (tx, rx) = facing_pair(1.0);
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let h = build_channel(&tx, &rx, 29e9, 2.0, G_MAX, 0.0, &mut rng);
        let want = wavelength(29e9) / (4.0 * PI) * G_MAX;
        assert!((h.gains[(0, 0)].norm() - want).abs() < 1e-9 * want);
        assert!((want - 2.58e-3).abs() < 0.01e-3, "oracle sanity: {want}");
    }

    #[test]
    fn noiseless_phase_is_electrical_length() {
        let (tx, rx) = facing_pair(0.7321);
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let h = build_channel(&tx, &rx, 31e9, 2.0, G_MAX, 0.0, &mut rng);
        let k = 2.0 * PI / wavelength(31e9);
        let want = crate::freqplan::wrap_phase(k * 0.7321);
        let got = h.gains[(0, 0)].arg();
        assert!(crate::freqplan::wrap_phase(want - got).abs() < 1e-9);
    }

    #[test]
    fn magnitude_scales_with_carrier_wavelength() {
        let (tx, rx) = facing_pair(2.0);
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let h1 = build_channel(&tx, &rx, 29e9, 2.0, G_MAX, 0.0, &mut rng);
        let h2 = build_channel(&tx, &rx, 31e9, 2.0, G_MAX, 0.0, &mut rng);
        let ratio = h2.gains[(0, 0)].norm() / h1.gains[(0, 0)].norm();
        let want = wavelength(31e9) / wavelength(29e9);
        assert!((ratio - want).abs() < 1e-12);
    }

    #[test]
    fn magnitude_scales_as_distance_power() {
        // Doubling the boresight distance at alpha 2 halves the amplitude.
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let (tx1, rx1) = facing_pair(1.5);
        let (tx2, rx2) = facing_pair(3.0);
        let h1 = build_channel(&tx1, &rx1, 29e9, 2.0, G_MAX, 0.0, &mut rng);
        let h2 = build_channel(&tx2, &rx2, 29e9, 2.0, G_MAX, 0.0, &mut rng);
        let ratio = h1.gains[(0, 0)].norm() / h2.gains[(0, 0)].norm();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_path_loss_exponent() {
        let (tx, rx) = facing_pair(2.0);
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let h = build_channel(&tx, &rx, 29e9, 2.7, G_MAX, 0.0, &mut rng);
        let want = wavelength(29e9) / (4.0 * PI) * G_MAX * 2f64.powf(-2.7 / 2.0) / 1.0;
        assert!((h.gains[(0, 0)].norm() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn reciprocity_of_magnitudes() {
        let tx = PlanarArray::new(
            2,
            0.005,
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let rx = PlanarArray::new(
            3,
            0.0048,
            Vector3::new(0.1, -0.05, 2.0),
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let fwd = build_channel(&tx, &rx, 29e9, 2.0, G_MAX, 0.0, &mut rng);
        let bwd = build_channel(&rx, &tx, 29e9, 2.0, G_MAX, 0.0, &mut rng);
        for n in 0..fwd.rx_count() {
            for m in 0..fwd.tx_count() {
                let a = fwd.gains[(n, m)].norm();
                let b = bwd.gains[(m, n)].norm();
                assert!((a - b).abs() < 1e-15 * a.max(b));
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (tx, rx) = facing_pair(1.0);
        let mut r1 = derive_rng(7, STREAM_CHANNEL_DL);
        let mut r2 = derive_rng(7, STREAM_CHANNEL_DL);
        let h1 = build_channel(&tx, &rx, 29e9, 2.0, G_MAX, 0.3, &mut r1);
        let h2 = build_channel(&tx, &rx, 29e9, 2.0, G_MAX, 0.3, &mut r2);
        assert_eq!(h1.gains[(0, 0)], h2.gains[(0, 0)]);
    }

    #[test]
    fn noise_variance_direct_evaluation() {
        let v = noise_variance(295.0, 1e8, 377.0);
        assert!((v - 3.07e-10).abs() < 0.01 * 3.07e-10, "got {v}");
        assert_eq!(noise_variance(295.0, 0.0, 377.0), 0.0);
        let doubled = noise_variance(295.0, 2e8, 377.0);
        assert!((doubled - 2.0 * v).abs() < 1e-24);
    }

    #[test]
    fn phase_noise_draws() {
        let mut rng = derive_rng(3, STREAM_LOOP_TEST);
        let zeros = draw_phase_noise(0.0, 100, &mut rng);
        assert!(zeros.iter().all(|&x| x == 0.0));

        let mut rng = derive_rng(3, STREAM_LOOP_TEST);
        let draws = draw_phase_noise(0.3, 1_000_000, &mut rng);
        let mean: f64 = draws.iter().sum::<f64>() / draws.len() as f64;
        let var: f64 =
            draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / draws.len() as f64;
        let std = var.sqrt();
        assert!((std - 0.3).abs() < 1e-3, "sample std {std}");

        let mut a = derive_rng(9, STREAM_LOOP_TEST);
        let mut b = derive_rng(9, STREAM_LOOP_TEST);
        assert_eq!(draw_phase_noise(0.3, 32, &mut a), draw_phase_noise(0.3, 32, &mut b));
    }

    const STREAM_LOOP_TEST: u64 = 0x77;

    #[test]
    fn poynting_chain_matches_friis() {
        // Field route: E = sqrt(eta/(2 pi) P G_tx l^-alpha), received power
        // P_r = G_rx lambda^2 / (8 pi eta) |E|^2. Direct route: Friis with
        // the same gains. Both must agree.
        let eta = 377.0;
        let p_tx = 2.5e-3;
        let l: f64 = 1.7;
        let lambda = wavelength(29e9);
        let alpha = 2.0;
        let e_sq = eta / (2.0 * PI) * p_tx * G_MAX * l.powf(-alpha);
        let p_field = G_MAX * lambda * lambda / (8.0 * PI * eta) * e_sq;
        let p_friis = p_tx * G_MAX * G_MAX * (lambda / (4.0 * PI)).powi(2) * l.powf(-alpha);
        assert!((p_field - p_friis).abs() < 1e-9 * p_friis);

        // And the channel entry reproduces the same transfer.
        let (tx, rx) = facing_pair(l);
        let mut rng = derive_rng(1, STREAM_CHANNEL_DL);
        let h = build_channel(&tx, &rx, 29e9, alpha, G_MAX, 0.0, &mut rng);
        let p_channel = h.gains[(0, 0)].norm_sqr() * p_tx;
        assert!((p_channel - p_friis).abs() < 1e-9 * p_friis);
    }
}
