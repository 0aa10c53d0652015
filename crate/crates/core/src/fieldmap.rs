//! Spatial field-intensity maps over a planar grid.
//!
//! The map superposes the spherical wave of every element with 1/l field
//! spreading and the element pattern, then squares and normalizes. It is a
//! propagation field, not a received power: receive-aperture effects are
//! deliberately absent.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::element_gain_from_cos;
use crate::config::wavelength;
use crate::geometry::PlanarArray;

/// Cut plane of the map, with its offset along the remaining axis in m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapPlane {
    /// y = offset; axes are (x, z).
    Xoz { offset: f64 },
    /// x = offset; axes are (y, z).
    Yoz { offset: f64 },
    /// z = offset; axes are (x, y).
    Xoy { offset: f64 },
}

/// Grid description of a planar map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub plane: MapPlane,
    /// Samples along the first axis.
    pub n1: usize,
    /// Samples along the second axis.
    pub n2: usize,
    /// Extent of the first axis in m.
    pub extent1: (f64, f64),
    /// Extent of the second axis in m.
    pub extent2: (f64, f64),
}

impl GridSpec {
    /// Default map for a link of length `l`: the xoz-plane, 200 by 200
    /// points, x in [-1, 1] m, z in [0, l + 0.5] m. Covers both apertures
    /// and the beam waist.
    pub fn default_xoz(link_length: f64) -> Self {
        GridSpec {
            plane: MapPlane::Xoz { offset: 0.0 },
            n1: 200,
            n2: 200,
            extent1: (-1.0, 1.0),
            extent2: (0.0, link_length + 0.5),
        }
    }

    pub fn axis1(&self) -> Vec<f64> {
        linspace(self.extent1.0, self.extent1.1, self.n1)
    }

    pub fn axis2(&self) -> Vec<f64> {
        linspace(self.extent2.0, self.extent2.1, self.n2)
    }

    fn point(&self, a1: f64, a2: f64) -> nalgebra::Vector3<f64> {
        match self.plane {
            MapPlane::Xoz { offset } => nalgebra::Vector3::new(a1, offset, a2),
            MapPlane::Yoz { offset } => nalgebra::Vector3::new(offset, a1, a2),
            MapPlane::Xoy { offset } => nalgebra::Vector3::new(a1, a2, offset),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

/// Normalized intensity over a planar grid.
#[derive(Debug, Clone)]
pub struct FieldMap {
    pub spec: GridSpec,
    /// Intensities, row-major over (axis1, axis2), peak normalized to 1.
    pub intensity: Vec<f64>,
    pub carrier: f64,
    /// Iteration/link tag for labeling exports.
    pub label: String,
    /// Grid points skipped because they coincide with an element.
    pub skipped: Vec<(usize, usize)>,
}

impl FieldMap {
    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.intensity[i1 * self.spec.n2 + i2]
    }

    /// Location (axis1, axis2) of the global maximum.
    pub fn peak_location(&self) -> (f64, f64) {
        let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
        for (i, &v) in self.intensity.iter().enumerate() {
            if v > best {
                best = v;
                idx = i;
            }
        }
        let a1 = self.spec.axis1();
        let a2 = self.spec.axis2();
        (a1[idx / self.spec.n2], a2[idx % self.spec.n2])
    }

    /// Intensity-weighted centroid of the first axis within one second-axis
    /// slice.
    pub fn slice_centroid(&self, i2: usize) -> Option<f64> {
        let a1 = self.spec.axis1();
        let mut w = 0.0;
        let mut acc = 0.0;
        for i1 in 0..self.spec.n1 {
            let v = self.at(i1, i2);
            w += v;
            acc += v * a1[i1];
        }
        if w > 0.0 {
            Some(acc / w)
        } else {
            None
        }
    }

    /// CSV export with columns matching the map plane, e.g. `x,z,intensity`.
    pub fn to_csv(&self) -> String {
        let (h1, h2) = match self.spec.plane {
            MapPlane::Xoz { .. } => ("x", "z"),
            MapPlane::Yoz { .. } => ("y", "z"),
            MapPlane::Xoy { .. } => ("x", "y"),
        };
        let a1 = self.spec.axis1();
        let a2 = self.spec.axis2();
        let mut out = format!("{h1},{h2},intensity\n");
        for (i1, &v1) in a1.iter().enumerate() {
            for (i2, &v2) in a2.iter().enumerate() {
                out.push_str(&format!("{v1},{v2},{}\n", self.at(i1, i2)));
            }
        }
        out
    }

    /// Compact textual matrix: a header line with the grid layout, then one
    /// whitespace-separated row per first-axis sample.
    pub fn to_matrix_text(&self) -> String {
        let mut out = format!(
            "# n1={} n2={} extent1={}..{} extent2={}..{} label={}\n",
            self.spec.n1,
            self.spec.n2,
            self.spec.extent1.0,
            self.spec.extent1.1,
            self.spec.extent2.0,
            self.spec.extent2.1,
            self.label
        );
        for i1 in 0..self.spec.n1 {
            let row: Vec<String> =
                (0..self.spec.n2).map(|i2| format!("{}", self.at(i1, i2))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Superpose the element fields of `tx` driven by `amplitudes` over the
/// grid and return the peak-normalized intensity map.
pub fn compute_field_map(
    tx: &PlanarArray,
    amplitudes: &[Complex64],
    carrier: f64,
    g_max: f64,
    spec: GridSpec,
    label: impl Into<String>,
) -> FieldMap {
    assert_eq!(amplitudes.len(), tx.len(), "one amplitude per element");
    let k = 2.0 * std::f64::consts::PI / wavelength(carrier);
    let a1 = spec.axis1();
    let a2 = spec.axis2();

    let rows: Vec<(Vec<f64>, Vec<(usize, usize)>)> = a1
        .par_iter()
        .enumerate()
        .map(|(i1, &v1)| {
            let mut row = vec![0.0; spec.n2];
            let mut skipped = Vec::new();
            for (i2, &v2) in a2.iter().enumerate() {
                let p = spec.point(v1, v2);
                let mut field = Complex64::new(0.0, 0.0);
                let mut coincident = false;
                for (m, pos) in tx.element_positions.iter().enumerate() {
                    let sep = p - pos;
                    let l = sep.norm();
                    if l < 1e-9 {
                        coincident = true;
                        break;
                    }
                    let g = element_gain_from_cos(sep.dot(&tx.boresight) / l, g_max);
                    field += amplitudes[m] * Complex64::from_polar(g.sqrt() / l, k * l);
                }
                if coincident {
                    skipped.push((i1, i2));
                } else {
                    row[i2] = field.norm_sqr();
                }
            }
            (row, skipped)
        })
        .collect();

    let mut intensity = Vec::with_capacity(spec.n1 * spec.n2);
    let mut skipped = Vec::new();
    for (row, mut sk) in rows {
        intensity.extend_from_slice(&row);
        skipped.append(&mut sk);
    }

    let peak = intensity.iter().cloned().fold(0.0f64, f64::max);
    if peak > 0.0 {
        for v in &mut intensity {
            *v /= peak;
        }
    }
    FieldMap { spec, intensity, carrier, label: label.into(), skipped }
}


#[cfg(test)]
impl PlanarArray {
    /// Two-element test array along x, used by the array-factor oracle.
    fn new_two_for_test(spacing: f64) -> PlanarArray {
        let mut arr = PlanarArray::new(
            1,
            spacing,
            nalgebra::Vector3::zeros(),
            nalgebra::Vector3::new(0.0, 0.0, 1.0),
            nalgebra::Vector3::new(1.0, 0.0, 0.0),
        );
        arr.element_positions = vec![
            nalgebra::Vector3::new(-spacing / 2.0, 0.0, 0.0),
            nalgebra::Vector3::new(spacing / 2.0, 0.0, 0.0),
        ];
        arr
    }
}
