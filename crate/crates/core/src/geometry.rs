//! Dual-spacing planar arrays, link placement, distances, and steering
//! vectors.
//!
//! Each end of the link carries two coplanar square grids: a transmit array
//! and a receive array whose spacings are tied by the retro-directive
//! condition `d_rx / d_tx = f_tx_carrier / f_rx_carrier` at that end. With
//! spacings scaled this way, the phase progression across the receive array
//! at its carrier equals the progression across the transmit array at the
//! other carrier, so a conjugated wavefront leaves parallel to the arrival
//! path.

use nalgebra::Vector3;
use num_complex::Complex64;
use thiserror::Error;

use crate::config::{wavelength, ScenarioConfig};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("elements {a} and {b} coincide (distance {dist} m)")]
    CoincidentElements { a: usize, b: usize, dist: f64 },
}

/// A square planar grid of antenna elements.
#[derive(Debug, Clone)]
pub struct PlanarArray {
    /// Elements per side; the array holds `side`² elements.
    pub side: usize,
    /// Inter-element spacing in m.
    pub spacing: f64,
    /// Array center in m.
    pub center: Vector3<f64>,
    /// Boresight unit vector (normal of the array plane).
    pub boresight: Vector3<f64>,
    /// In-plane x-axis unit vector.
    pub plane_x: Vector3<f64>,
    /// Element positions in m, x-major: element (ix, iy) sits at index
    /// `ix * side + iy`.
    pub element_positions: Vec<Vector3<f64>>,
}

impl PlanarArray {
    /// Build a centered square grid in the plane normal to `boresight`.
    /// `boresight` and `plane_x` must be orthonormal.
    pub fn new(
        side: usize,
        spacing: f64,
        center: Vector3<f64>,
        boresight: Vector3<f64>,
        plane_x: Vector3<f64>,
    ) -> Self {
        debug_assert!((boresight.norm() - 1.0).abs() < 1e-12);
        debug_assert!((plane_x.norm() - 1.0).abs() < 1e-12);
        debug_assert!(boresight.dot(&plane_x).abs() < 1e-12);
        let plane_y = boresight.cross(&plane_x);
        let half = (side as f64 - 1.0) / 2.0;
        let mut element_positions = Vec::with_capacity(side * side);
        for ix in 0..side {
            for iy in 0..side {
                let u = (ix as f64 - half) * spacing;
                let v = (iy as f64 - half) * spacing;
                element_positions.push(center + plane_x * u + plane_y * v);
            }
        }
        PlanarArray { side, spacing, center, boresight, plane_x, element_positions }
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    pub fn plane_y(&self) -> Vector3<f64> {
        self.boresight.cross(&self.plane_x)
    }
}

/// The four arrays of a BS/UE pair placed in 3-D.
#[derive(Debug, Clone)]
pub struct LinkGeometry {
    pub bs_tx: PlanarArray,
    pub bs_rx: PlanarArray,
    pub ue_tx: PlanarArray,
    pub ue_rx: PlanarArray,
    /// BS-to-UE center distance in m.
    pub link_length: f64,
    /// UE elevation in rad.
    pub elevation: f64,
    /// UE azimuth in rad.
    pub azimuth: f64,
    /// Set when the configured spacings violate the retro-directive ratio
    /// and were replaced by wavelength-derived values.
    pub spacing_warning: Option<String>,
}

fn ratio_ok(rx: f64, tx: f64, want: f64) -> bool {
    (rx / tx - want).abs() <= 1e-9 * want
}

/// Place both ends of the link.
///
/// The BS sits at the origin with boresight +z; the UE center sits at
/// `l * (sin(th) cos(ph), sin(th) sin(ph), cos(th))` and its arrays face
/// back toward the BS. Spacings must satisfy the retro-directive ratio;
/// configured values that violate it are replaced by the half-wavelength
/// scheme (`d_tx = lambda_tx/2`, receive spacing scaled by the carrier
/// ratio) and a warning is recorded rather than silently adopting either.
pub fn build_link_geometry(cfg: &ScenarioConfig) -> LinkGeometry {
    let lambda1 = wavelength(cfg.f1);
    let lambda2 = wavelength(cfg.f2);
    // BS transmits at f1 and receives at f2; the UE mirrors the roles.
    let bs_ratio = cfg.f1 / cfg.f2;
    let ue_ratio = cfg.f2 / cfg.f1;

    let consistent = ratio_ok(cfg.d_bs_rx, cfg.d_bs_tx, bs_ratio)
        && ratio_ok(cfg.d_ue_rx, cfg.d_ue_tx, ue_ratio);
    let (d_bs_tx, d_bs_rx, d_ue_tx, d_ue_rx, spacing_warning) = if consistent {
        (cfg.d_bs_tx, cfg.d_bs_rx, cfg.d_ue_tx, cfg.d_ue_rx, None)
    } else {
        let warn = format!(
            "configured spacings break the retro-directive ratio \
             (d_bs_rx/d_bs_tx = {:.6}, required f1/f2 = {:.6}); \
             using half-wavelength spacings instead",
            cfg.d_bs_rx / cfg.d_bs_tx,
            bs_ratio
        );
        (
            lambda1 / 2.0,
            (lambda1 / 2.0) * bs_ratio,
            lambda2 / 2.0,
            (lambda2 / 2.0) * ue_ratio,
            Some(warn),
        )
    };

    let theta = cfg.elevation();
    let phi = cfg.azimuth();
    let direction = Vector3::new(
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    );
    let bs_center = Vector3::zeros();
    let ue_center = bs_center + direction * cfg.link_length;

    let bs_boresight = Vector3::new(0.0, 0.0, 1.0);
    let bs_plane_x = Vector3::new(1.0, 0.0, 0.0);

    // UE boresight points back at the BS; its in-plane x-axis is the global
    // x-axis projected into the array plane (never degenerate for
    // elevation < 90 degrees).
    let ue_boresight = -direction;
    let gx = Vector3::new(1.0, 0.0, 0.0);
    let ue_plane_x = (gx - ue_boresight * gx.dot(&ue_boresight)).normalize();

    LinkGeometry {
        bs_tx: PlanarArray::new(cfg.m_side, d_bs_tx, bs_center, bs_boresight, bs_plane_x),
        bs_rx: PlanarArray::new(cfg.m_side, d_bs_rx, bs_center, bs_boresight, bs_plane_x),
        ue_tx: PlanarArray::new(cfg.n_side, d_ue_tx, ue_center, ue_boresight, ue_plane_x),
        ue_rx: PlanarArray::new(cfg.n_side, d_ue_rx, ue_center, ue_boresight, ue_plane_x),
        link_length: cfg.link_length,
        elevation: theta,
        azimuth: phi,
        spacing_warning,
    }
}

/// Euclidean distances between every element pair of two placed arrays.
/// Entry `(p, q)` is the distance from element `p` of `a` to element `q`
/// of `b`.
pub fn pairwise_distances(
    a: &PlanarArray,
    b: &PlanarArray,
) -> Result<nalgebra::DMatrix<f64>, GeometryError> {
    let mut out = nalgebra::DMatrix::zeros(a.len(), b.len());
    for (p, pa) in a.element_positions.iter().enumerate() {
        for (q, pb) in b.element_positions.iter().enumerate() {
            let d = (pa - pb).norm();
            if d <= 0.0 {
                return Err(GeometryError::CoincidentElements { a: p, b: q, dist: d });
            }
            out[(p, q)] = d;
        }
    }
    Ok(out)
}

/// Plane-wave steering vector of a square grid.
///
/// Entry `(ix * side + iy)` is `exp(j k d (ix sin(th) cos(ph) + iy sin(th)
/// sin(ph)))`, the x-direction and y-direction progressions combined in
/// x-major Kronecker order.
pub fn steering_vector(
    side: usize,
    spacing: f64,
    wavelength: f64,
    theta: f64,
    phi: f64,
) -> Vec<Complex64> {
    assert!(spacing > 0.0 && wavelength > 0.0);
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let px = k * spacing * theta.sin() * phi.cos();
    let py = k * spacing * theta.sin() * phi.sin();
    let mut v = Vec::with_capacity(side * side);
    for ix in 0..side {
        for iy in 0..side {
            let phase = px * ix as f64 + py * iy as f64;
            v.push(Complex64::from_polar(1.0, phase));
        }
    }
    v
}

/// CSV dump of element positions: `array_id,index_x,index_y,x,y,z`.
pub fn element_positions_csv(geom: &LinkGeometry) -> String {
    let mut out = String::from("array_id,index_x,index_y,x,y,z\n");
    for (id, arr) in [
        ("bs_tx", &geom.bs_tx),
        ("bs_rx", &geom.bs_rx),
        ("ue_tx", &geom.ue_tx),
        ("ue_rx", &geom.ue_rx),
    ] {
        for ix in 0..arr.side {
            for iy in 0..arr.side {
                let p = arr.element_positions[ix * arr.side + iy];
                out.push_str(&format!("{id},{ix},{iy},{},{},{}\n", p.x, p.y, p.z));
            }
        }
    }
    out
}
