//! Array layouts, excitation wavelength sets, discretized scenes and the pseudopolar
//! Fourier sample pattern they induce.
//!
//! Conventions:
//! - Element positions are centered on the phase center; axis spacing is uniform.
//! - Planar arrays index elements row-major: element `i * n2 + j` sits at
//!   `(x_i, y_j)`.
//! - Wavelengths are stored longest first, so block `0` of every stacked operator
//!   belongs to `lambda_max`.
//! - Scene pixels use the angular coordinate `tau = sin(theta) / 2`, sampled as
//!   `tau_n = tau_max * (-1 + 2 n / N)`; with the default `tau_max = 0.5` this is the
//!   familiar `-0.5 + n / N` grid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Linear,
    Planar,
}

impl ArrayKind {
    pub fn axes(self) -> usize {
        match self {
            ArrayKind::Linear => 1,
            ArrayKind::Planar => 2,
        }
    }
}

/// Uniform linear or planar antenna array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    kind: ArrayKind,
    counts: Vec<usize>,
    spacing: f64,
    positions: Vec<[f64; 2]>,
    aperture: Vec<f64>,
}

fn axis_positions(count: usize, spacing: f64) -> Vec<f64> {
    let center = (count as f64 - 1.0) / 2.0;
    (0..count).map(|i| (i as f64 - center) * spacing).collect()
}

/// Builds a centered uniform array with `elements_per_axis` elements along each axis
/// (one entry for linear arrays, two for planar).
pub fn make_array(
    kind: ArrayKind,
    elements_per_axis: &[usize],
    spacing_m: f64,
) -> Result<ArrayGeometry> {
    if elements_per_axis.len() != kind.axes() {
        return Err(invalid(format!(
            "{kind:?} array needs {} per-axis counts, got {}",
            kind.axes(),
            elements_per_axis.len()
        )));
    }
    if elements_per_axis.contains(&0) {
        return Err(invalid("element count per axis must be at least 1"));
    }
    if !(spacing_m.is_finite() && spacing_m > 0.0) {
        return Err(invalid(format!(
            "element spacing must be positive, got {spacing_m}"
        )));
    }
    let axes: Vec<Vec<f64>> = elements_per_axis
        .iter()
        .map(|&n| axis_positions(n, spacing_m))
        .collect();
    let positions = match kind {
        ArrayKind::Linear => axes[0].iter().map(|&x| [x, 0.0]).collect(),
        ArrayKind::Planar => axes[0]
            .iter()
            .flat_map(|&x| axes[1].iter().map(move |&y| [x, y]))
            .collect(),
    };
    // Outermost element to outermost element.
    let aperture = axes
        .iter()
        .map(|p| p.last().unwrap() - p.first().unwrap())
        .collect();
    Ok(ArrayGeometry {
        kind,
        counts: elements_per_axis.to_vec(),
        spacing: spacing_m,
        positions,
        aperture,
    })
}

impl ArrayGeometry {
    /// Array with the default element spacing of half the shortest excitation wavelength.
    pub fn half_wavelength(
        kind: ArrayKind,
        elements_per_axis: &[usize],
        excitation: &ExcitationSpec,
    ) -> Result<Self> {
        make_array(kind, elements_per_axis, excitation.lambda_min() / 2.0)
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Element coordinates in meters; the second coordinate is zero for linear arrays.
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    /// Aperture extent per axis, in meters.
    pub fn aperture(&self) -> &[f64] {
        &self.aperture
    }

    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    /// `(row, col)` of element `m` on a planar array; `(m, 0)` on a linear one.
    pub fn grid_index(&self, m: usize) -> (usize, usize) {
        match self.kind {
            ArrayKind::Linear => (m, 0),
            ArrayKind::Planar => (m / self.counts[1], m % self.counts[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingRule {
    #[default]
    UniformInFrequency,
    UniformInWavelength,
}

/// Ordered set of excitation wavelengths, longest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    wavelengths: Vec<f64>,
    spacing_rule: SpacingRule,
}

pub fn make_excitation(
    lambda_min: f64,
    lambda_max: f64,
    k: usize,
    rule: SpacingRule,
) -> Result<ExcitationSpec> {
    if !(lambda_min.is_finite() && lambda_max.is_finite() && lambda_min > 0.0) {
        return Err(invalid(format!(
            "wavelengths must be positive and finite, got [{lambda_min}, {lambda_max}]"
        )));
    }
    if lambda_min > lambda_max {
        return Err(invalid(format!(
            "lambda_min {lambda_min} exceeds lambda_max {lambda_max}"
        )));
    }
    if k == 0 {
        return Err(invalid("need at least one excitation wavelength"));
    }
    if k == 1 {
        if lambda_min != lambda_max {
            return Err(invalid(
                "a single wavelength needs lambda_min == lambda_max",
            ));
        }
        return Ok(ExcitationSpec {
            wavelengths: vec![lambda_min],
            spacing_rule: rule,
        });
    }
    if lambda_min == lambda_max {
        return Err(invalid(format!(
            "{k} wavelengths cannot share a single value"
        )));
    }
    let steps = (k - 1) as f64;
    let wavelengths: Vec<f64> = (0..k)
        .map(|i| {
            let t = i as f64 / steps;
            match rule {
                SpacingRule::UniformInFrequency => {
                    let (f_lo, f_hi) = (1.0 / lambda_max, 1.0 / lambda_min);
                    1.0 / (f_lo + t * (f_hi - f_lo))
                }
                SpacingRule::UniformInWavelength => lambda_max - t * (lambda_max - lambda_min),
            }
        })
        .collect();
    let mut wavelengths = wavelengths;
    // Pin the endpoints exactly.
    wavelengths[0] = lambda_max;
    wavelengths[k - 1] = lambda_min;
    ExcitationSpec::from_wavelengths(wavelengths, rule)
}

impl ExcitationSpec {
    /// Wavelengths for a band given in hertz.
    pub fn from_band_hz(f_min: f64, f_max: f64, k: usize, rule: SpacingRule) -> Result<Self> {
        if !(f_min > 0.0 && f_max > 0.0) {
            return Err(invalid("frequencies must be positive"));
        }
        make_excitation(SPEED_OF_LIGHT / f_max, SPEED_OF_LIGHT / f_min, k, rule)
    }

    /// Explicit wavelength list; must be positive and strictly decreasing.
    pub fn from_wavelengths(wavelengths: Vec<f64>, rule: SpacingRule) -> Result<Self> {
        if wavelengths.is_empty() {
            return Err(invalid("need at least one excitation wavelength"));
        }
        if wavelengths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("wavelengths must be positive and finite"));
        }
        if wavelengths.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid(
                "wavelengths must be strictly decreasing (longest first)",
            ));
        }
        Ok(ExcitationSpec {
            wavelengths,
            spacing_rule: rule,
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn k(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn lambda_min(&self) -> f64 {
        *self.wavelengths.last().unwrap()
    }

    pub fn lambda_max(&self) -> f64 {
        self.wavelengths[0]
    }

    pub fn spacing_rule(&self) -> SpacingRule {
        self.spacing_rule
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    DeltaConstantRange,
    DeltaMultiDepth,
    Slab,
}

/// Angular pixel grid, one or two axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    dims: Vec<usize>,
    tau_max: f64,
}

impl AngularGrid {
    /// Full `[-0.5, 0.5)` grid.
    pub fn new(dims: &[usize]) -> Result<Self> {
        Self::with_span(dims, 0.5)
    }

    /// Grid restricted to `|tau| <= tau_max`, `0 < tau_max <= 0.5`.
    pub fn with_span(dims: &[usize], tau_max: f64) -> Result<Self> {
        if dims.is_empty() || dims.len() > 2 {
            return Err(invalid(format!(
                "angular grid needs 1 or 2 axes, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(invalid("angular grid needs at least one sample per axis"));
        }
        if !(tau_max > 0.0 && tau_max <= 0.5) {
            return Err(invalid(format!(
                "tau_max must lie in (0, 0.5], got {tau_max}"
            )));
        }
        Ok(AngularGrid {
            dims: dims.to_vec(),
            tau_max,
        })
    }

    /// Grid covering the angular span `[-max_angle, max_angle]` (radians).
    pub fn with_angle_span(dims: &[usize], max_angle: f64) -> Result<Self> {
        Self::with_span(dims, max_angle.sin() / 2.0)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn axes(&self) -> usize {
        self.dims.len()
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn pixel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn tau(&self, axis: usize, n: usize) -> f64 {
        self.tau_max * (-1.0 + 2.0 * n as f64 / self.dims[axis] as f64)
    }

    /// Per-axis angular coordinates of pixel `p` (second entry zero for 1D grids).
    pub fn pixel_tau(&self, p: usize) -> [f64; 2] {
        match self.dims.as_slice() {
            [_] => [self.tau(0, p), 0.0],
            [_, n2] => [self.tau(0, p / n2), self.tau(1, p % n2)],
            _ => unreachable!(),
        }
    }

    /// Normalized coordinates `tau / tau_max` in `[-1, 1)`.
    fn pixel_unit(&self, p: usize) -> [f64; 2] {
        let t = self.pixel_tau(p);
        [t[0] / self.tau_max, t[1] / self.tau_max]
    }
}

/// Range description of the scene support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeProfile {
    /// Every pixel at the same depth (meters).
    Constant(f64),
    /// One depth per pixel (meters).
    PerPixel(Vec<f64>),
    /// Reflectors anywhere in `[r_min, r_max)` sampled at `samples` depths.
    Slab {
        r_min: f64,
        r_max: f64,
        samples: usize,
    },
}

/// What the forward model needs to know about a scene: geometry of the unknowns, not
/// their values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSupport {
    pub kind: SceneKind,
    pub grid: AngularGrid,
    pub range: RangeProfile,
}

impl SceneSupport {
    pub fn new(kind: SceneKind, grid: AngularGrid, range: RangeProfile) -> Result<Self> {
        let n = grid.pixel_count();
        let check_depth = |r: f64| {
            if r.is_finite() && r >= 0.0 {
                Ok(())
            } else {
                Err(invalid(format!(
                    "depth must be finite and non-negative, got {r}"
                )))
            }
        };
        match (&kind, &range) {
            (SceneKind::DeltaConstantRange, RangeProfile::Constant(r)) => check_depth(*r)?,
            (SceneKind::DeltaMultiDepth, RangeProfile::PerPixel(depths)) => {
                if depths.len() != n {
                    return Err(invalid(format!(
                        "depth map has {} entries, grid has {n} pixels",
                        depths.len()
                    )));
                }
                depths.iter().try_for_each(|&r| check_depth(r))?;
            }
            (
                SceneKind::Slab,
                RangeProfile::Slab {
                    r_min,
                    r_max,
                    samples,
                },
            ) => {
                check_depth(*r_min)?;
                check_depth(*r_max)?;
                if r_min >= r_max {
                    return Err(invalid(format!(
                        "slab needs r_min < r_max, got [{r_min}, {r_max}]"
                    )));
                }
                if *samples == 0 {
                    return Err(invalid("slab needs at least one range sample"));
                }
            }
            _ => {
                return Err(invalid(format!(
                    "range profile does not match scene kind {kind:?}"
                )))
            }
        }
        Ok(SceneSupport { kind, grid, range })
    }

    pub fn range_samples(&self) -> usize {
        match self.range {
            RangeProfile::Slab { samples, .. } => samples,
            _ => 1,
        }
    }

    /// Number of unknowns: pixels, times range samples for slabs.
    pub fn column_count(&self) -> usize {
        self.grid.pixel_count() * self.range_samples()
    }

    /// Pixel index, depth (meters) for operator column `n`. Slab columns are laid out
    /// range-major: `n = d_r * N + n_tau`.
    pub fn column_location(&self, n: usize) -> (usize, f64) {
        let pixels = self.grid.pixel_count();
        match &self.range {
            RangeProfile::Constant(r) => (n, *r),
            RangeProfile::PerPixel(depths) => (n, depths[n]),
            RangeProfile::Slab {
                r_min,
                r_max,
                samples,
            } => {
                let d_r = n / pixels;
                let n_tau = n % pixels;
                (
                    n_tau,
                    r_min + d_r as f64 * (r_max - r_min) / *samples as f64,
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Disc,
    Rings,
    Point,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" => Ok(Pattern::Disc),
            "rings" => Ok(Pattern::Rings),
            "point" => Ok(Pattern::Point),
            other => Err(invalid(format!("unknown synthetic pattern '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectivitySource {
    /// Values already in operator column order.
    Grid(Vec<f64>),
    /// 8-bit portable graymap.
    Pgm(PathBuf),
    /// Comma-separated grid, one image row per line.
    Csv(PathBuf),
    Pattern(Pattern),
}

/// Discretized reflectivity together with its support description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub support: SceneSupport,
    pub reflectivity: Vec<f64>,
}

impl Scene {
    pub fn kind(&self) -> SceneKind {
        self.support.kind
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.support.grid
    }
}

pub fn make_scene(
    kind: SceneKind,
    grid: AngularGrid,
    range: RangeProfile,
    source: &ReflectivitySource,
) -> Result<Scene> {
    let support = SceneSupport::new(kind, grid, range)?;
    let cols = support.column_count();
    let reflectivity = match source {
        ReflectivitySource::Grid(v) => v.clone(),
        ReflectivitySource::Pattern(p) => synthesize(&support, *p),
        ReflectivitySource::Pgm(path) => load_pgm(path, &support)?,
        ReflectivitySource::Csv(path) => load_csv(path, &support)?,
    };
    if reflectivity.len() != cols {
        return Err(invalid(format!(
            "reflectivity has {} values, scene support has {cols} unknowns",
            reflectivity.len()
        )));
    }
    if reflectivity.iter().any(|v| !v.is_finite()) {
        return Err(invalid("reflectivity contains non-finite values"));
    }
    Ok(Scene {
        support,
        reflectivity,
    })
}

fn pattern_value(p: Pattern, u: [f64; 2], radius: f64) -> f64 {
    let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
    match p {
        Pattern::Disc => {
            if r <= radius {
                1.0
            } else {
                0.0
            }
        }
        Pattern::Rings => 0.5 + 0.5 * (6.0 * std::f64::consts::PI * r).cos(),
        Pattern::Point => unreachable!(),
    }
}

fn synthesize(support: &SceneSupport, p: Pattern) -> Vec<f64> {
    let grid = &support.grid;
    let pixels = grid.pixel_count();
    let layers = support.range_samples();
    let mut out = vec![0.0; pixels * layers];
    if p == Pattern::Point {
        // Center pixel of every layer.
        let center = match grid.dims() {
            [n] => n / 2,
            [n1, n2] => (n1 / 2) * n2 + n2 / 2,
            _ => unreachable!(),
        };
        for d in 0..layers {
            out[d * pixels + center] = 1.0;
        }
        return out;
    }
    for d in 0..layers {
        // Slab layers follow slices of a sphere: widest in the middle layer.
        let radius = if layers == 1 {
            0.5
        } else {
            let t = (2.0 * d as f64 + 1.0) / layers as f64 - 1.0;
            0.6 * (1.0 - 0.8 * t * t).sqrt()
        };
        for px in 0..pixels {
            out[d * pixels + px] = pattern_value(p, grid.pixel_unit(px), radius);
        }
    }
    out
}

/// Expected image shape `(rows, cols)` for one range layer of the support.
fn layer_shape(support: &SceneSupport) -> (usize, usize) {
    match support.grid.dims() {
        [n] => (1, *n),
        [n1, n2] => (*n1, *n2),
        _ => unreachable!(),
    }
}

fn load_pgm(path: &Path, support: &SceneSupport) -> Result<Vec<f64>> {
    let img = image::open(path)
        .map_err(|e| Error::Format {
            path: path.to_owned(),
            reason: e.to_string(),
        })?
        .to_luma8();
    let (rows, cols) = layer_shape(support);
    let layers = support.range_samples();
    let (w, h) = (img.width() as usize, img.height() as usize);
    // 1D grids accept either a single row or a single column.
    let ok = (h == rows * layers && w == cols) || (rows == 1 && layers == 1 && w == 1 && h == cols);
    if !ok {
        return Err(invalid(format!(
            "image is {h}x{w}, scene expects {}x{cols}",
            rows * layers
        )));
    }
    Ok(img.pixels().map(|p| p.0[0] as f64 / 255.0).collect())
}

fn load_csv(path: &Path, support: &SceneSupport) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Format {
                    path: path.to_owned(),
                    reason: format!("'{s}': {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let (r, c) = layer_shape(support);
    let layers = support.range_samples();
    let column_form = r == 1 && layers == 1 && rows.len() == c && rows.iter().all(|x| x.len() == 1);
    let row_form = rows.len() == r * layers && rows.iter().all(|x| x.len() == c);
    if !(column_form || row_form) {
        return Err(invalid(format!(
            "CSV grid shape does not match scene ({} rows of {c} expected)",
            r * layers
        )));
    }
    Ok(rows.into_iter().flatten().collect())
}

/// Depth map with three segments (vertical bands of equal width) at the given depths.
pub fn three_segment_depths(grid: &AngularGrid, depths: [f64; 3]) -> Vec<f64> {
    let cols = *grid.dims().last().unwrap();
    (0..grid.pixel_count())
        .map(|p| {
            let c = p % cols;
            depths[(3 * c / cols).min(2)]
        })
        .collect()
}

/// One Fourier-domain sample contributed by an (element, wavelength) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierSample {
    pub element: usize,
    pub wavelength: usize,
    pub omega_r: f64,
    pub omega_tau: [f64; 2],
}

/// Pseudopolar sample pattern, wavelength-major in the same order as operator rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSampleGrid {
    pub samples: Vec<FourierSample>,
    /// Per-wavelength lateral bound `D / lambda` for each array axis.
    pub lateral_bounds: Vec<[f64; 2]>,
}

pub fn fourier_grid(geometry: &ArrayGeometry, excitation: &ExcitationSpec) -> FourierSampleGrid {
    let mut samples = Vec::with_capacity(geometry.element_count() * excitation.k());
    let mut lateral_bounds = Vec::with_capacity(excitation.k());
    let ap = geometry.aperture();
    for (k, &lambda) in excitation.wavelengths().iter().enumerate() {
        lateral_bounds.push([ap[0] / lambda, ap.get(1).copied().unwrap_or(0.0) / lambda]);
        for (m, d) in geometry.positions().iter().enumerate() {
            samples.push(FourierSample {
                element: m,
                wavelength: k,
                omega_r: 1.0 / lambda,
                omega_tau: [2.0 * d[0] / lambda, 2.0 * d[1] / lambda],
            });
        }
    }
    FourierSampleGrid {
        samples,
        lateral_bounds,
    }
}
