//! Config-driven experiment runner: build, simulate, sketch, solve and score every
//! sweep point, then persist tables, images, spectra and a manifest.

mod config;
mod metrics;

pub use config::{
    ArrayConfig, ExcitationConfig, ExperimentConfig, Scale, Scenario, SceneConfig, SolverConfig,
    SweepConfig, DESK_MAX_ELEMENTS,
};
pub use metrics::{
    default_delta_grid, delta_grid, output_snr, output_snr_with, relative_error,
    relative_error_complex, tune_delta, DeltaChoice,
};

use std::collections::BTreeMap;
use std::path::Path;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::Result;
use crate::forward::{build_operator, simulate, ForwardOperator, MeasurementSet};
use crate::geometry::{
    make_scene, three_segment_depths, AngularGrid, RangeProfile, Scene, SceneKind, SceneSupport,
};
use crate::io;
use crate::linalg;
use crate::rng::derive_seed;
use crate::sketch::{self, SketchOperator};
use crate::solve::{cosamp_depth, SketchedSystem, SvdSolver};

/// Upper wavelength of the narrower band also reported by the spectrum scenario.
pub const NARROW_BAND_LAMBDA_MAX: f64 = 0.10;

/// Relative threshold for the effective dimension: singular values more than 20 dB
/// below the largest are not counted.
pub const EFFECTIVE_RANK_EPS: f64 = 0.1;

/// Derived-seed index reserved for measurement noise; sweep points use `1..`.
const NOISE_SEED_INDEX: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub label: String,
    pub codes: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    /// Stage failure, if the point aborted.
    pub error: Option<String>,
    /// Sketch description, replayable from its seed or selection.
    pub sketch: Option<sketch::SketchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Metrics of the unsketched reference solve.
    pub reference: BTreeMap<String, f64>,
    pub points: Vec<PointResult>,
    /// Files written relative to the output directory.
    pub files: Vec<String>,
}

impl ResultBundle {
    pub fn point(&self, codes: usize) -> Option<&PointResult> {
        self.points.iter().find(|p| p.codes == codes)
    }
}

/// Everything shared by the sweep points of one experiment.
struct Prepared {
    op: ForwardOperator,
    scene: Scene,
    data: MeasurementSet,
    /// `A x0` without noise.
    clean: Vec<c64>,
    full: SvdSolver,
    /// Full-data least squares of the noiseless data.
    x_ls: Vec<c64>,
    /// Candidate-depth operators for the unknown-profile scenario.
    candidates: Vec<ForwardOperator>,
    /// Candidate index per pixel.
    true_labels: Vec<usize>,
}

fn support_for(cfg: &ExperimentConfig, grid: AngularGrid) -> Result<SceneSupport> {
    let r0 = cfg.scene.range_m;
    match cfg.scenario {
        Scenario::MultiDepthKnown | Scenario::MultiDepthUnknown => {
            let segs = cfg.scene.segment_offsets_m.expect("validated");
            let depths = three_segment_depths(&grid, segs.map(|s| r0 + s));
            SceneSupport::new(
                SceneKind::DeltaMultiDepth,
                grid,
                RangeProfile::PerPixel(depths),
            )
        }
        Scenario::Slab => SceneSupport::new(
            SceneKind::Slab,
            grid,
            RangeProfile::Slab {
                r_min: r0,
                r_max: r0 + cfg.scene.slab_extent_m.expect("validated"),
                samples: cfg.scene.slab_samples.expect("validated"),
            },
        ),
        _ => SceneSupport::new(
            SceneKind::DeltaConstantRange,
            grid,
            RangeProfile::Constant(r0),
        ),
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let exc = cfg.excitation_spec()?;
    let geom = cfg.geometry(&exc)?;
    let grid = cfg.grid()?;
    let support = support_for(cfg, grid.clone())?;
    let op = build_operator(&geom, &exc, &support)?;
    let scene = make_scene(
        support.kind,
        support.grid.clone(),
        support.range.clone(),
        &cfg.scene.source,
    )?;
    let data = simulate(
        &op,
        &scene,
        cfg.noise,
        derive_seed(cfg.seed, NOISE_SEED_INDEX),
    )?;
    let clean = op.apply_real(&scene.reflectivity)?;
    let full = SvdSolver::new(op.matrix(), cfg.solver.rank_eps)?;
    let x_ls = full.solve(&clean, 0.0)?;

    let (mut candidates, mut true_labels) = (Vec::new(), Vec::new());
    if cfg.scenario == Scenario::MultiDepthUnknown {
        let offsets = cfg.scene.candidate_offsets_m.as_ref().expect("validated");
        for off in offsets {
            let s = SceneSupport::new(
                SceneKind::DeltaConstantRange,
                grid.clone(),
                RangeProfile::Constant(cfg.scene.range_m + off),
            )?;
            candidates.push(build_operator(&geom, &exc, &s)?);
        }
        if let RangeProfile::PerPixel(depths) = &support.range {
            true_labels = depths
                .iter()
                .map(|d| {
                    offsets
                        .iter()
                        .position(|o| (cfg.scene.range_m + o - d).abs() < 1e-9)
                        .expect("segment depth among candidates")
                })
                .collect();
        }
    }
    Ok(Prepared {
        op,
        scene,
        data,
        clean,
        full,
        x_ls,
        candidates,
        true_labels,
    })
}

fn make_sketch(
    cfg: &ExperimentConfig,
    p: &Prepared,
    l: usize,
    seed: u64,
) -> Result<SketchOperator> {
    let (m, k) = (p.op.elements(), p.op.blocks());
    if cfg.scenario == Scenario::Subsample {
        let exc = cfg.excitation_spec()?;
        let geom = cfg.geometry(&exc)?;
        return sketch::subsample_mask(l, &geom, cfg.sweep.mask, k, seed);
    }
    if cfg.sweep.per_wavelength {
        sketch::per_wavelength_code(l, m, k, seed)
    } else {
        sketch::gaussian_code(l, m, k, seed)
    }
}

fn real(x: &[c64]) -> Vec<f64> {
    x.iter().map(|z| z.re).collect()
}

/// Scores one sweep point. Returns the metrics and the reconstructed reflectivity.
fn run_point(
    cfg: &ExperimentConfig,
    p: &Prepared,
    s: &SketchOperator,
) -> Result<(BTreeMap<String, f64>, Vec<f64>)> {
    let mut m = BTreeMap::new();
    let x_ls = real(&p.x_ls);

    if cfg.scenario == Scenario::MultiDepthUnknown {
        let refs: Vec<_> = p.candidates.iter().map(|o| o.matrix()).collect();
        let z = s.apply_measurements(&p.data)?;
        let r = cosamp_depth(&refs, Some(s), &z, &cfg.solver.cosamp)?;
        let labels = r.depth_labels.as_ref().expect("cosamp returns labels");
        let active: Vec<usize> = (0..labels.len())
            .filter(|&i| p.scene.reflectivity[i] > 0.0)
            .collect();
        let correct = active
            .iter()
            .filter(|&&i| labels[i] == p.true_labels[i])
            .count();
        let x = r.real();
        m.insert(
            "label_accuracy".into(),
            correct as f64 / active.len().max(1) as f64,
        );
        m.insert("relative_error".into(), relative_error(&x_ls, &x)?);
        m.insert(
            "relative_error_truth".into(),
            relative_error(&p.scene.reflectivity, &x)?,
        );
        m.insert("iterations".into(), r.iterations as f64);
        m.insert("converged".into(), if r.converged { 1.0 } else { 0.0 });
        m.insert("residual_norm".into(), r.residual_norm);
        return Ok((m, x));
    }

    let sys = SketchedSystem::new(s, p.op.matrix(), &p.data.y)?;
    let solver = SvdSolver::new(sys.matrix.as_ref(), cfg.solver.rank_eps)?;
    m.insert("sketched_rank".into(), solver.rank() as f64);
    m.insert("rows".into(), sys.matrix.nrows() as f64);

    let delta = if cfg.scenario == Scenario::Noisy {
        let e = p.data.noise.as_deref().expect("noisy scenario has noise");
        let signal = s.apply_vector(&p.clean)?;
        let noise = s.apply_vector(e)?;
        let grid = default_delta_grid(solver.sigma_max());
        let c = tune_delta(
            &solver,
            &signal,
            &noise,
            &p.x_ls,
            cfg.solver.signal_error_target,
            &grid,
        )?;
        m.insert("delta".into(), c.delta);
        m.insert(
            "delta_rel".into(),
            c.delta / (solver.sigma_max() * solver.sigma_max()),
        );
        m.insert("output_snr_db".into(), c.output_snr_db);
        m.insert("signal_error".into(), c.signal_error);
        m.insert("feasible".into(), if c.feasible { 1.0 } else { 0.0 });
        c.delta
    } else {
        cfg.solver.delta
    };
    let x = solver.solve(&sys.rhs, delta)?;
    let residual = linalg::norm(&linalg::sub(
        &sys.rhs,
        &linalg::mat_vec(sys.matrix.as_ref(), &x),
    ));
    let xr = real(&x);
    m.insert("relative_error".into(), relative_error(&x_ls, &xr)?);
    m.insert(
        "relative_error_truth".into(),
        relative_error(&p.scene.reflectivity, &xr)?,
    );
    m.insert("residual_norm".into(), residual);
    m.insert(
        "imag_norm".into(),
        x.iter().map(|z| z.im * z.im).sum::<f64>().sqrt(),
    );
    Ok((m, xr))
}

fn image_shape(support: &SceneSupport) -> (usize, usize) {
    let layers = support.range_samples();
    match support.grid.dims() {
        [n] => (layers, *n),
        [n1, n2] => (n1 * layers, *n2),
        _ => unreachable!(),
    }
}

fn sweep_point(
    cfg: &ExperimentConfig,
    p: &Prepared,
    index: usize,
    l: usize,
) -> (PointResult, Option<Vec<f64>>) {
    let seed = derive_seed(cfg.seed, index as u64 + 1);
    let label = match cfg.scenario {
        Scenario::Subsample => format!("elements_{l}"),
        _ => format!("codes_{l}"),
    };
    let mut point = PointResult {
        label,
        codes: l,
        seed,
        metrics: BTreeMap::new(),
        error: None,
        sketch: None,
    };
    let run = make_sketch(cfg, p, l, seed).and_then(|s| {
        point.sketch = Some(s.record());
        run_point(cfg, p, &s)
    });
    match run {
        Ok((metrics, x)) => {
            point.metrics = metrics;
            (point, Some(x))
        }
        Err(e) => {
            log::warn!("sweep point {} failed: {e}", point.label);
            point.error = Some(e.to_string());
            (point, None)
        }
    }
}

/// Which reconstruction and scene files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputFormats {
    pub csv: bool,
    pub pgm: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        OutputFormats {
            csv: true,
            pgm: true,
        }
    }
}

/// Runs every sweep point of `cfg`. With an output directory, writes `table.csv`,
/// `spectrum.csv`, per-point reconstructions (CSV and PGM) and `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ResultBundle> {
    run_experiment_with(cfg, out_dir, OutputFormats::default())
}

/// [`run_experiment`] with a choice of vector and image outputs.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    formats: OutputFormats,
) -> Result<ResultBundle> {
    cfg.validate()?;
    if cfg.scale == Scale::Full {
        log::warn!("full-scale configuration: operator construction and SVDs may take a long time");
    }
    let p = prepare(cfg)?;
    let spectrum = p.full.singular_values().to_vec();

    let mut reference = BTreeMap::new();
    reference.insert("rows".into(), p.op.rows() as f64);
    reference.insert("cols".into(), p.op.cols() as f64);
    reference.insert("rank".into(), p.full.rank() as f64);
    reference.insert(
        "effective_rank".into(),
        linalg::numerical_rank(&spectrum, EFFECTIVE_RANK_EPS) as f64,
    );
    reference.insert("sigma_max".into(), p.full.sigma_max());
    let x_ls = real(&p.x_ls);
    reference.insert(
        "ls_error_truth".into(),
        relative_error(&p.scene.reflectivity, &x_ls)?,
    );

    if cfg.scenario == Scenario::Noisy {
        let e = p.data.noise.as_deref().expect("noisy scenario has noise");
        let delta = cfg.solver.delta;
        let xs = p.full.solve(&p.clean, delta)?;
        reference.insert("full_delta".into(), delta);
        reference.insert(
            "full_output_snr_db".into(),
            output_snr_with(&p.full, &p.clean, e, delta)?,
        );
        reference.insert(
            "full_signal_error".into(),
            relative_error_complex(&p.x_ls, &xs)?,
        );
        let grid = default_delta_grid(p.full.sigma_max());
        let c = tune_delta(
            &p.full,
            &p.clean,
            e,
            &p.x_ls,
            cfg.solver.signal_error_target,
            &grid,
        )?;
        reference.insert("full_tuned_delta".into(), c.delta);
        reference.insert("full_tuned_output_snr_db".into(), c.output_snr_db);
        reference.insert("full_tuned_signal_error".into(), c.signal_error);
        reference.insert(
            "input_snr_db".into(),
            p.data.input_snr_db.unwrap_or(f64::NAN),
        );
    }

    let mut nested = None;
    if cfg.scenario == Scenario::Spectrum {
        let prof = analysis::nestedness_profile(&p.op.block_refs(), EFFECTIVE_RANK_EPS)?;
        reference.insert("stacked_effective_rank".into(), prof.stacked_rank() as f64);
        reference.insert(
            "lambda_min_effective_rank".into(),
            *prof.block_ranks.last().unwrap_or(&0) as f64,
        );
        nested = Some(prof);
        if cfg.excitation.lambda_max > NARROW_BAND_LAMBDA_MAX {
            let mut narrow = cfg.clone();
            narrow.excitation.lambda_max = NARROW_BAND_LAMBDA_MAX;
            let exc = narrow.excitation_spec()?;
            let geom = narrow.geometry(&exc)?;
            let support = support_for(&narrow, narrow.grid()?)?;
            let op = build_operator(&geom, &exc, &support)?;
            let prof = analysis::nestedness_profile(&op.block_refs(), EFFECTIVE_RANK_EPS)?;
            reference.insert(
                "narrow_band_stacked_effective_rank".into(),
                prof.stacked_rank() as f64,
            );
            reference.insert(
                "narrow_band_lambda_min_effective_rank".into(),
                *prof.block_ranks.last().unwrap_or(&0) as f64,
            );
        }
    }

    let codes: Vec<(usize, usize)> = if cfg.scenario == Scenario::Spectrum {
        Vec::new()
    } else {
        cfg.sweep.codes.iter().copied().enumerate().collect()
    };
    let outcomes: Vec<(PointResult, Option<Vec<f64>>)> = codes
        .par_iter()
        .map(|&(i, l)| sweep_point(cfg, &p, i, l))
        .collect();

    let mut bundle = ResultBundle {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        config_hash: format!("{:016x}", io::content_hash(cfg)),
        seed: cfg.seed,
        config: cfg.clone(),
        reference,
        points: outcomes.iter().map(|(pt, _)| pt.clone()).collect(),
        files: Vec::new(),
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let (rows, cols) = image_shape(p.op.support());
        let mut put = |name: String| -> std::path::PathBuf {
            let path = dir.join(&name);
            files.push(name);
            path
        };
        io::write_real_csv(&put("spectrum.csv".into()), "singular_value", &spectrum)?;
        if formats.csv {
            io::write_real_csv(
                &put("truth.csv".into()),
                "reflectivity",
                &p.scene.reflectivity,
            )?;
            io::write_real_csv(&put("x_ls.csv".into()), "reflectivity", &x_ls)?;
        }
        if formats.pgm {
            io::write_pgm(&put("truth.pgm".into()), &p.scene.reflectivity, rows, cols)?;
            io::write_pgm(&put("x_ls.pgm".into()), &x_ls, rows, cols)?;
        }
        if let Some(prof) = &nested {
            let table: Vec<Vec<String>> = (0..prof.increments.len())
                .map(|k| {
                    vec![
                        k.to_string(),
                        format!("{:e}", p.op.wavelengths()[k]),
                        prof.block_ranks[k].to_string(),
                        prof.cumulative[k].to_string(),
                        prof.increments[k].to_string(),
                    ]
                })
                .collect();
            io::write_table(
                &put("nestedness.csv".into()),
                &[
                    "block",
                    "wavelength_m",
                    "block_rank",
                    "cumulative_rank",
                    "increment",
                ],
                &table,
            )?;
        }
        for (pt, x) in &outcomes {
            if let Some(x) = x {
                // Images use the pixel grid; CoSaMP returns one value per pixel.
                let (r, c) = if x.len() == rows * cols {
                    (rows, cols)
                } else {
                    image_shape_pixels(&p)
                };
                if formats.csv {
                    io::write_real_csv(&put(format!("x_{}.csv", pt.label)), "reflectivity", x)?;
                }
                if formats.pgm {
                    io::write_pgm(&put(format!("x_{}.pgm", pt.label)), x, r, c)?;
                }
            }
        }
        let keys: std::collections::BTreeSet<&String> = bundle
            .points
            .iter()
            .flat_map(|p| p.metrics.keys())
            .collect();
        let mut header = vec!["label", "codes", "seed", "error"];
        header.extend(keys.iter().map(|k| k.as_str()));
        let table: Vec<Vec<String>> = bundle
            .points
            .iter()
            .map(|pt| {
                let mut row = vec![
                    pt.label.clone(),
                    pt.codes.to_string(),
                    pt.seed.to_string(),
                    pt.error.clone().unwrap_or_default(),
                ];
                row.extend(keys.iter().map(|k| {
                    pt.metrics
                        .get(*k)
                        .map(|v| format!("{v:e}"))
                        .unwrap_or_default()
                }));
                row
            })
            .collect();
        io::write_table(&put("table.csv".into()), &header, &table)?;
        files.push("manifest.json".into());
        bundle.files = files;
        io::write_json(&dir.join("manifest.json"), &bundle)?;
    }
    Ok(bundle)
}

fn image_shape_pixels(p: &Prepared) -> (usize, usize) {
    match p.op.support().grid.dims() {
        [n] => (1, *n),
        [n1, n2] => (*n1, *n2),
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayKind;

    fn small(scenario: Scenario) -> ExperimentConfig {
        let mut c = ExperimentConfig::preset(scenario);
        c.array = ArrayConfig {
            kind: ArrayKind::Linear,
            counts: vec![24],
            spacing_m: None,
        };
        c.excitation.k = 4;
        c.scene.grid = vec![32];
        c.scene.max_angle_deg = None;
        c.sweep.codes = vec![24, 12, 6];
        c
    }

    #[test]
    fn constant_range_small() {
        let b = run_experiment(&small(Scenario::ConstantRange), None).unwrap();
        assert_eq!(b.points.len(), 3);
        assert!(b.points.iter().all(|p| p.error.is_none()));
        let e: Vec<f64> = b
            .points
            .iter()
            .map(|p| p.metrics["relative_error"])
            .collect();
        assert!(e[0] < 1e-8, "{e:?}");
    }

    #[test]
    fn full_mask_matches_full_ls() {
        let mut c = small(Scenario::Subsample);
        c.sweep.codes = vec![24, 6];
        let b = run_experiment(&c, None).unwrap();
        assert!(b.points.iter().all(|p| p.error.is_none()));
        assert!(b.points[0].metrics["relative_error"] < 1e-8);
    }

    #[test]
    fn failures_are_recorded_per_point() {
        let c = small(Scenario::ConstantRange);
        let p = prepare(&c).unwrap();
        let (bad, x) = sweep_point(&c, &p, 0, 25);
        assert!(bad.error.is_some() && x.is_none() && bad.metrics.is_empty());
        let (good, x) = sweep_point(&c, &p, 1, 12);
        assert!(good.error.is_none() && x.is_some());
    }

    #[test]
    fn persisted_vectors_reproduce_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let b = run_experiment(&small(Scenario::ConstantRange), Some(dir.path())).unwrap();
        let x_ls = io::read_real_csv(&dir.path().join("x_ls.csv")).unwrap();
        for p in &b.points {
            let x = io::read_real_csv(&dir.path().join(format!("x_{}.csv", p.label))).unwrap();
            assert_eq!(
                relative_error(&x_ls, &x).unwrap(),
                p.metrics["relative_error"]
            );
        }
        let manifest: ResultBundle = io::read_json(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(manifest, b);
    }

    #[test]
    fn noisy_reports_snr() {
        let b = run_experiment(&small(Scenario::Noisy), None).unwrap();
        assert!(b.reference["full_output_snr_db"].is_finite());
        for p in &b.points {
            assert!(p.metrics["output_snr_db"].is_finite());
        }
    }
}
