//! Discretized array imaging operators and measurement simulation.
//!
//! Row `k * M + m` of the stacked operator is element `m` at wavelength `k` (longest
//! wavelength first). Column `n` follows [`SceneSupport::column_location`]. Each entry
//! is the pure phase
//!
//! `A(m, n) = exp(-j 2 pi (2 <d_m, tau_n> + R_n) / lambda)`
//!
//! where `R_n` is the (round-trip) depth of column `n`. No amplitude warp is applied, so
//! reconstructions live on the `tau` grid.

use faer::{c64, MatRef};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ArrayGeometry, ArrayKind, ExcitationSpec, Scene, SceneSupport};
use crate::io::content_hash;
use crate::linalg::{self, CMat};
use crate::rng;

/// Default memory cap for a dense operator (4 GiB).
pub const DEFAULT_MAX_OPERATOR_BYTES: u64 = 4 << 30;

/// Stacked broadband operator `A = [A_1; ...; A_K]`.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    matrix: CMat,
    elements: usize,
    wavelengths: Vec<f64>,
    support: SceneSupport,
    geometry_hash: u64,
    excitation_hash: u64,
}

pub fn build_operator(
    geometry: &ArrayGeometry,
    excitation: &ExcitationSpec,
    support: &SceneSupport,
) -> Result<ForwardOperator> {
    build_operator_capped(geometry, excitation, support, DEFAULT_MAX_OPERATOR_BYTES)
}

pub fn estimate_operator_bytes(
    geometry: &ArrayGeometry,
    excitation: &ExcitationSpec,
    support: &SceneSupport,
) -> u64 {
    let rows = (geometry.element_count() * excitation.k()) as u64;
    rows * support.column_count() as u64 * std::mem::size_of::<c64>() as u64
}

pub fn build_operator_capped(
    geometry: &ArrayGeometry,
    excitation: &ExcitationSpec,
    support: &SceneSupport,
    max_bytes: u64,
) -> Result<ForwardOperator> {
    let wanted_axes = match geometry.kind() {
        ArrayKind::Linear => 1,
        ArrayKind::Planar => 2,
    };
    if support.grid.axes() != wanted_axes {
        return Err(invalid(format!(
            "{:?} array needs a {wanted_axes}-axis angular grid, scene has {}",
            geometry.kind(),
            support.grid.axes()
        )));
    }
    let estimate = estimate_operator_bytes(geometry, excitation, support);
    if estimate > max_bytes {
        return Err(Error::OperatorTooLarge {
            estimate_bytes: estimate,
            cap_bytes: max_bytes,
        });
    }
    let m_count = geometry.element_count();
    let n_cols = support.column_count();
    let columns: Vec<([f64; 2], f64)> = (0..n_cols)
        .map(|n| {
            let (pixel, depth) = support.column_location(n);
            (support.grid.pixel_tau(pixel), depth)
        })
        .collect();
    let positions = geometry.positions();
    let wavelengths = excitation.wavelengths();
    let matrix = CMat::from_fn(m_count * wavelengths.len(), n_cols, |row, n| {
        let lambda = wavelengths[row / m_count];
        let d = positions[row % m_count];
        let (tau, depth) = columns[n];
        let path = 2.0 * (d[0] * tau[0] + d[1] * tau[1]) + depth;
        c64::from_polar(1.0, -2.0 * std::f64::consts::PI * path / lambda)
    });
    Ok(ForwardOperator {
        matrix,
        elements: m_count,
        wavelengths: wavelengths.to_vec(),
        support: support.clone(),
        geometry_hash: content_hash(geometry),
        excitation_hash: content_hash(excitation),
    })
}

impl ForwardOperator {
    pub(crate) fn from_parts(
        matrix: CMat,
        elements: usize,
        wavelengths: Vec<f64>,
        support: SceneSupport,
        geometry_hash: u64,
        excitation_hash: u64,
    ) -> Result<Self> {
        if matrix.nrows() != elements * wavelengths.len()
            || matrix.ncols() != support.column_count()
        {
            return Err(invalid(
                "operator payload does not match its declared dimensions",
            ));
        }
        Ok(ForwardOperator {
            matrix,
            elements,
            wavelengths,
            support,
            geometry_hash,
            excitation_hash,
        })
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    /// Elements per block (`M`).
    pub fn elements(&self) -> usize {
        self.elements
    }

    /// Number of wavelength blocks (`K`).
    pub fn blocks(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn support(&self) -> &SceneSupport {
        &self.support
    }

    pub fn geometry_hash(&self) -> u64 {
        self.geometry_hash
    }

    pub fn excitation_hash(&self) -> u64 {
        self.excitation_hash
    }

    /// The `M x N` block for wavelength index `k`.
    pub fn block(&self, k: usize) -> MatRef<'_, c64> {
        self.matrix
            .get(k * self.elements..(k + 1) * self.elements, ..)
    }

    pub fn block_refs(&self) -> Vec<MatRef<'_, c64>> {
        (0..self.blocks()).map(|k| self.block(k)).collect()
    }

    /// `(element, wavelength index)` for a stacked row.
    pub fn row_location(&self, row: usize) -> (usize, usize) {
        (row % self.elements, row / self.elements)
    }

    pub fn apply(&self, x: &[c64]) -> Result<Vec<c64>> {
        if x.len() != self.cols() {
            return Err(invalid(format!(
                "operator has {} columns, vector has {}",
                self.cols(),
                x.len()
            )));
        }
        Ok(linalg::mat_vec(self.matrix(), x))
    }

    pub fn apply_real(&self, x: &[f64]) -> Result<Vec<c64>> {
        self.apply(&linalg::real_vec_to_complex(x))
    }

    pub fn adjoint_apply(&self, y: &[c64]) -> Result<Vec<c64>> {
        if y.len() != self.rows() {
            return Err(invalid(format!(
                "operator has {} rows, vector has {}",
                self.rows(),
                y.len()
            )));
        }
        Ok(linalg::adjoint_vec(self.matrix(), y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseSpec {
    #[default]
    None,
    /// Circularly symmetric complex Gaussian noise scaled to the requested input SNR.
    Gaussian { input_snr_db: f64 },
}

/// Array outputs at every wavelength, stacked like the operator rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub y: Vec<c64>,
    pub elements: usize,
    pub blocks: usize,
    /// The noise vector actually added, if any.
    pub noise: Option<Vec<c64>>,
    pub input_snr_db: Option<f64>,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn from_vec(y: Vec<c64>, elements: usize, blocks: usize) -> Result<Self> {
        if y.len() != elements * blocks {
            return Err(invalid(format!(
                "{} samples cannot split into {blocks} blocks of {elements}",
                y.len()
            )));
        }
        Ok(MeasurementSet {
            y,
            elements,
            blocks,
            noise: None,
            input_snr_db: None,
            seed: 0,
        })
    }

    /// Outputs `y_lambda` for wavelength index `k`.
    pub fn slice(&self, k: usize) -> &[c64] {
        &self.y[k * self.elements..(k + 1) * self.elements]
    }
}

/// `y = A x0 + e`. The noise, if requested, is rescaled so that
/// `20 log10(|A x0| / |e|)` equals the requested input SNR exactly.
pub fn simulate(
    op: &ForwardOperator,
    scene: &Scene,
    noise: NoiseSpec,
    seed: u64,
) -> Result<MeasurementSet> {
    simulate_vector(op, &scene.reflectivity, noise, seed)
}

pub fn simulate_vector(
    op: &ForwardOperator,
    x0: &[f64],
    noise: NoiseSpec,
    seed: u64,
) -> Result<MeasurementSet> {
    if x0.len() != op.cols() {
        return Err(invalid(format!(
            "scene has {} unknowns but the operator has {} columns",
            x0.len(),
            op.cols()
        )));
    }
    let clean = op.apply_real(x0)?;
    let mut out = MeasurementSet::from_vec(clean, op.elements(), op.blocks())?;
    out.seed = seed;
    if let NoiseSpec::Gaussian { input_snr_db } = noise {
        if !input_snr_db.is_finite() {
            return Err(invalid("input SNR must be finite"));
        }
        let mut rng = rng::seeded(seed, rng::STREAM_NOISE);
        let raw: Vec<c64> = (0..out.y.len())
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let target = linalg::norm(&out.y) / 10f64.powf(input_snr_db / 20.0);
        let raw_norm = linalg::norm(&raw);
        let scale = if raw_norm > 0.0 {
            target / raw_norm
        } else {
            0.0
        };
        let e: Vec<c64> = raw.into_iter().map(|z| z * scale).collect();
        for (y, n) in out.y.iter_mut().zip(&e) {
            *y += n;
        }
        out.noise = Some(e);
        out.input_snr_db = Some(input_snr_db);
    }
    Ok(out)
}
