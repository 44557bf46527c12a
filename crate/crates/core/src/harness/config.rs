//! Experiment configuration (JSON) and desk-scale presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::NoiseSpec;
use crate::geometry::{
    make_excitation, AngularGrid, ArrayGeometry, ArrayKind, ExcitationSpec, Pattern,
    ReflectivitySource, SpacingRule,
};
use crate::sketch::MaskPattern;
use crate::solve::{CosampOptions, DEFAULT_RANK_EPS};

/// Arrays with more elements than this need `Scale::Full`.
pub const DESK_MAX_ELEMENTS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Delta scene at one known range, Gaussian codes.
    ConstantRange,
    /// Constant-range planar image with a textured reflectivity.
    FlatSurface,
    /// Three-segment depth map, known to the solver.
    MultiDepthKnown,
    /// Three-segment depth map recovered with structured CoSaMP.
    MultiDepthUnknown,
    /// Binary element masks instead of Gaussian codes.
    Subsample,
    /// Gaussian noise with tuned Tikhonov regularization.
    Noisy,
    /// Reflectors spread over a range interval.
    Slab,
    /// Singular spectrum and per-wavelength rank increments only.
    Spectrum,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Config(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub kind: ArrayKind,
    pub counts: Vec<usize>,
    /// Element spacing in meters; half the shortest wavelength when absent.
    #[serde(default)]
    pub spacing_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub k: usize,
    #[serde(default)]
    pub spacing_rule: SpacingRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub grid: Vec<usize>,
    /// Half-width of the angular span in degrees; the full `[-0.5, 0.5)` grid when absent.
    #[serde(default)]
    pub max_angle_deg: Option<f64>,
    pub range_m: f64,
    #[serde(default = "default_source")]
    pub source: ReflectivitySource,
    /// Depths of the three segments (offsets from `range_m`).
    #[serde(default)]
    pub segment_offsets_m: Option<[f64; 3]>,
    /// Candidate depth offsets from `range_m` for the unknown-profile scenario.
    #[serde(default)]
    pub candidate_offsets_m: Option<Vec<f64>>,
    /// Range extent and sample count for slab scenes.
    #[serde(default)]
    pub slab_extent_m: Option<f64>,
    #[serde(default)]
    pub slab_samples: Option<usize>,
}

fn default_source() -> ReflectivitySource {
    ReflectivitySource::Pattern(Pattern::Disc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Codes per wavelength, or selected elements for the subsample scenario.
    pub codes: Vec<usize>,
    #[serde(default = "default_mask")]
    pub mask: MaskPattern,
    #[serde(default)]
    pub per_wavelength: bool,
}

fn default_mask() -> MaskPattern {
    MaskPattern::Random
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    #[serde(default = "default_rank_eps")]
    pub rank_eps: f64,
    /// Fixed Tikhonov parameter for noiseless scenarios.
    #[serde(default)]
    pub delta: f64,
    /// Signal-error ceiling for regularization tuning.
    #[serde(default = "default_signal_error_target")]
    pub signal_error_target: f64,
    #[serde(default)]
    pub cosamp: CosampOptions,
}

fn default_rank_eps() -> f64 {
    DEFAULT_RANK_EPS
}

fn default_signal_error_target() -> f64 {
    1e-3
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank_eps: DEFAULT_RANK_EPS,
            delta: 0.0,
            signal_error_target: default_signal_error_target(),
            cosamp: CosampOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: Scenario,
    pub array: ArrayConfig,
    pub excitation: ExcitationConfig,
    pub scene: SceneConfig,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scale: Scale,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn excitation_spec(&self) -> Result<ExcitationSpec> {
        let e = &self.excitation;
        make_excitation(e.lambda_min, e.lambda_max, e.k, e.spacing_rule)
    }

    pub fn geometry(&self, excitation: &ExcitationSpec) -> Result<ArrayGeometry> {
        match self.array.spacing_m {
            Some(s) => crate::geometry::make_array(self.array.kind, &self.array.counts, s),
            None => ArrayGeometry::half_wavelength(self.array.kind, &self.array.counts, excitation),
        }
    }

    pub fn grid(&self) -> Result<AngularGrid> {
        match self.scene.max_angle_deg {
            Some(deg) => AngularGrid::with_angle_span(&self.scene.grid, deg.to_radians()),
            None => AngularGrid::new(&self.scene.grid),
        }
    }

    pub fn element_count(&self) -> usize {
        self.array.counts.iter().product()
    }

    /// Checks every sub-configuration and the desk-scale gate.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.scenario != Scenario::Spectrum && self.sweep.codes.is_empty() {
            return cfg("sweep list is empty".into());
        }
        let exc = self
            .excitation_spec()
            .map_err(|e| Error::Config(e.to_string()))?;
        let geom = self
            .geometry(&exc)
            .map_err(|e| Error::Config(e.to_string()))?;
        let grid = self.grid().map_err(|e| Error::Config(e.to_string()))?;
        if grid.axes() != geom.kind().axes() {
            return cfg(format!(
                "{:?} array needs a {}-axis scene grid",
                geom.kind(),
                geom.kind().axes()
            ));
        }
        let m = geom.element_count();
        if m > DESK_MAX_ELEMENTS && self.scale != Scale::Full {
            return cfg(format!(
                "{m} elements exceeds the desk limit of {DESK_MAX_ELEMENTS}; use --scale full"
            ));
        }
        if let Some(&bad) = self.sweep.codes.iter().find(|&&l| l == 0 || l > m) {
            return cfg(format!("code count {bad} must lie in 1..={m}"));
        }
        if !(self.scene.range_m.is_finite() && self.scene.range_m >= 0.0) {
            return cfg("scene range must be finite and non-negative".into());
        }
        match self.scenario {
            Scenario::MultiDepthKnown if self.scene.segment_offsets_m.is_none() => {
                return cfg("multi-depth scenes need segment_offsets_m".into());
            }
            Scenario::MultiDepthUnknown => {
                let Some(cands) = &self.scene.candidate_offsets_m else {
                    return cfg("unknown-profile scenes need candidate_offsets_m".into());
                };
                let Some(segs) = &self.scene.segment_offsets_m else {
                    return cfg("unknown-profile scenes need segment_offsets_m".into());
                };
                if segs
                    .iter()
                    .any(|s| !cands.iter().any(|c| (c - s).abs() < 1e-12))
                {
                    return cfg("segment depths must be among the candidate depths".into());
                }
            }
            Scenario::Slab
                if self.scene.slab_extent_m.is_none() || self.scene.slab_samples.is_none() =>
            {
                return cfg("slab scenes need slab_extent_m and slab_samples".into());
            }
            Scenario::Noisy if !matches!(self.noise, NoiseSpec::Gaussian { .. }) => {
                return cfg("the noisy scenario needs a Gaussian noise spec".into());
            }
            _ => {}
        }
        if !(self.solver.delta >= 0.0) {
            return cfg("delta must be non-negative".into());
        }
        Ok(())
    }

    /// Built-in desk-scale configurations, one per scenario.
    pub fn preset(scenario: Scenario) -> Self {
        let planar = ArrayConfig {
            kind: ArrayKind::Planar,
            counts: vec![16, 16],
            spacing_m: None,
        };
        let band = ExcitationConfig {
            lambda_min: 0.075,
            lambda_max: 0.15,
            k: 15,
            spacing_rule: SpacingRule::UniformInFrequency,
        };
        let scene = SceneConfig {
            grid: vec![12, 12],
            max_angle_deg: Some(45.0),
            range_m: 20.0,
            source: default_source(),
            segment_offsets_m: None,
            candidate_offsets_m: None,
            slab_extent_m: None,
            slab_samples: None,
        };
        let sweep = SweepConfig {
            codes: vec![96, 48, 24],
            mask: MaskPattern::Random,
            per_wavelength: false,
        };
        let mut cfg = ExperimentConfig {
            name: format!("{scenario:?}").to_lowercase(),
            scenario,
            array: planar,
            excitation: band,
            scene,
            sweep,
            solver: SolverConfig::default(),
            noise: NoiseSpec::None,
            seed: 1,
            scale: Scale::Desk,
        };
        match scenario {
            Scenario::ConstantRange => {}
            Scenario::Spectrum => {
                cfg.array.kind = ArrayKind::Linear;
                cfg.array.counts = vec![64];
                cfg.excitation.k = 8;
                cfg.scene.grid = vec![256];
                cfg.scene.max_angle_deg = None;
                cfg.sweep.codes = Vec::new();
            }
            Scenario::FlatSurface => cfg.scene.source = ReflectivitySource::Pattern(Pattern::Rings),
            Scenario::MultiDepthKnown => cfg.scene.segment_offsets_m = Some([0.0, 0.3, 0.6]),
            Scenario::MultiDepthUnknown => {
                cfg.array.kind = ArrayKind::Linear;
                cfg.array.counts = vec![64];
                cfg.excitation.k = 8;
                cfg.scene.grid = vec![64];
                cfg.scene.max_angle_deg = None;
                cfg.scene.segment_offsets_m = Some([0.0, 0.6, 0.3]);
                cfg.scene.candidate_offsets_m = Some(vec![0.0, 0.3, 0.6, 0.9]);
                cfg.sweep.codes = vec![48, 32, 24];
            }
            Scenario::Subsample => cfg.sweep.codes = vec![51, 26, 13],
            Scenario::Noisy => {
                cfg.noise = NoiseSpec::Gaussian { input_snr_db: 20.0 };
            }
            Scenario::Slab => {
                cfg.scene.slab_extent_m = Some(0.15);
                cfg.scene.slab_samples = Some(5);
                cfg.sweep.codes = vec![128, 96, 64];
            }
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for s in [
            Scenario::ConstantRange,
            Scenario::FlatSurface,
            Scenario::MultiDepthKnown,
            Scenario::MultiDepthUnknown,
            Scenario::Subsample,
            Scenario::Noisy,
            Scenario::Slab,
            Scenario::Spectrum,
        ] {
            let c = ExperimentConfig::preset(s);
            c.validate().unwrap();
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        }
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut c = ExperimentConfig::preset(Scenario::ConstantRange);
        c.sweep.codes.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn full_scale_is_gated() {
        let mut c = ExperimentConfig::preset(Scenario::ConstantRange);
        c.array.counts = vec![40, 40];
        assert!(c.validate().is_err());
        c.scale = Scale::Full;
        c.validate().unwrap();
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let text = r#"{
            "name": "cr",
            "scenario": "constant_range",
            "array": {"kind": "linear", "counts": [32]},
            "excitation": {"lambda_min": 0.075, "lambda_max": 0.15, "k": 4},
            "scene": {"grid": [48], "range_m": 20.0},
            "sweep": {"codes": [16, 8]}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.noise, NoiseSpec::None);
        assert_eq!(c.solver.rank_eps, DEFAULT_RANK_EPS);
        assert_eq!(
            "multi_depth_unknown".parse::<Scenario>().unwrap(),
            Scenario::MultiDepthUnknown
        );
    }
}
