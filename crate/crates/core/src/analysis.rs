//! Degrees-of-freedom analysis: spectra, block-QR innovation ranks, capture error and
//! numerical checkers for the sufficient/necessary conditions on the number of codes.

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMat};
use crate::rng;
use crate::sketch;

/// Default relative rank threshold for analysis routines.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Full singular spectrum, descending.
pub fn singular_spectrum(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    linalg::singular_values(a)
}

/// Singular values from the eigenvalues of the smaller Gram matrix. Much faster than
/// an SVD on large operators, but values below about `1e-7 * sigma_max` are unreliable.
pub fn gram_singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.adjoint()
    } else {
        a.adjoint() * a
    };
    let eig = gram
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let mut s: Vec<f64> = eig.iter().map(|v| v.max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

pub use crate::linalg::numerical_rank;

/// `A = C V^H` with `V` orthonormal and `C` block lower triangular.
#[derive(Debug, Clone)]
pub struct BlockQr {
    /// `(sum of block rows) x r`.
    pub c: CMat,
    /// `n x r`, orthonormal columns; columns `offsets[i]..offsets[i+1]` form `V_i`.
    pub v: CMat,
    /// Innovation ranks `d_i`.
    pub d: Vec<usize>,
    /// Row offsets of the blocks inside `c`.
    pub row_offsets: Vec<usize>,
    /// Column offsets of the `V_i` inside `v`.
    pub col_offsets: Vec<usize>,
}

impl BlockQr {
    pub fn rank(&self) -> usize {
        self.v.ncols()
    }

    pub fn d0(&self) -> usize {
        self.d.iter().copied().max().unwrap_or(0)
    }

    /// Block `C_ij`.
    pub fn c_block(&self, i: usize, j: usize) -> MatRef<'_, c64> {
        self.c.get(
            self.row_offsets[i]..self.row_offsets[i + 1],
            self.col_offsets[j]..self.col_offsets[j + 1],
        )
    }
}

fn check_widths(blocks: &[MatRef<'_, c64>]) -> Result<usize> {
    let Some(first) = blocks.first() else {
        return Err(invalid("need at least one block"));
    };
    let n = first.ncols();
    if blocks.iter().any(|b| b.ncols() != n) {
        return Err(invalid("blocks must share their column count"));
    }
    Ok(n)
}

/// Greedy block QR of `A^H`: `V_i` spans the part of the rows of `A_i` orthogonal to
/// `V_1..V_{i-1}`; directions below `eps * |A|` are dropped.
pub fn block_qr(blocks: &[MatRef<'_, c64>], eps: f64) -> Result<BlockQr> {
    let n = check_widths(blocks)?;
    let stacked = linalg::vstack(blocks);
    let tol = eps * linalg::spectral_norm(stacked.as_ref())?;

    let mut v = CMat::zeros(n, 0);
    let mut d = Vec::with_capacity(blocks.len());
    let mut col_offsets = vec![0];
    for a in blocks {
        let w = linalg::project_out(v.as_ref(), a.adjoint().to_owned().as_ref());
        let q = linalg::range_basis_abs(w.as_ref(), tol)?;
        d.push(q.ncols());
        let mut next = CMat::zeros(n, v.ncols() + q.ncols());
        next.get_mut(.., ..v.ncols()).copy_from(&v);
        next.get_mut(.., v.ncols()..).copy_from(&q);
        v = next;
        col_offsets.push(v.ncols());
    }
    let c = &stacked * &v;
    let mut row_offsets = vec![0];
    for b in blocks {
        row_offsets.push(row_offsets.last().unwrap() + b.nrows());
    }
    Ok(BlockQr {
        c,
        v,
        d,
        row_offsets,
        col_offsets,
    })
}

/// `|(I - P_{Y^H}) A^H|` in the spectral norm, with the row space of `Y` decided by
/// `eps` relative to `|Y|`.
pub fn capture_error_with(a: MatRef<'_, c64>, y: MatRef<'_, c64>, eps: f64) -> Result<f64> {
    if a.ncols() != y.ncols() {
        return Err(invalid(format!(
            "column counts differ: {} vs {}",
            a.ncols(),
            y.ncols()
        )));
    }
    let q = linalg::row_space_basis(y, eps)?;
    let rest = linalg::project_out(q.as_ref(), a.adjoint().to_owned().as_ref());
    linalg::spectral_norm(rest.as_ref())
}

pub fn capture_error(a: MatRef<'_, c64>, y: MatRef<'_, c64>) -> Result<f64> {
    capture_error_with(a, y, DEFAULT_EPS)
}

/// Capture error divided by `|A|`.
pub fn relative_capture_error(a: MatRef<'_, c64>, y: MatRef<'_, c64>) -> Result<f64> {
    let na = linalg::spectral_norm(a)?;
    if na == 0.0 {
        return Ok(0.0);
    }
    Ok(capture_error(a, y)? / na)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `l >= d_0` from the block-QR innovation ranks.
    Innovation,
    /// Real-eigenvalue multiplicity of the two-block transfer matrix.
    PairSpectrum,
    /// Full row rank of `M-hat` for a sampled orthonormal basis.
    GenericBasis,
    /// [`Condition::GenericBasis`] with unequal block widths.
    GenericBasisMixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealCluster {
    pub center: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evidence {
    Innovation {
        d: Vec<usize>,
        d0: usize,
        l: usize,
        /// Relative capture error of one Gaussian sketch with `l` codes, when it fits.
        sampled_capture_error: Option<f64>,
        sample_seed: u64,
    },
    PairSpectrum {
        n: usize,
        eigenvalues: Vec<c64>,
        real_clusters: Vec<RealCluster>,
        max_real_multiplicity: usize,
        containment_error: f64,
    },
    GenericBasis {
        /// Rows of `V_S` applied to each block.
        widths: Vec<usize>,
        trials: usize,
        /// `sigma_min / sigma_max` of `M-hat` per trial, in trial order.
        sigma_ratio: Vec<f64>,
        passing_trials: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub evidence: Evidence,
    /// Named tolerances used to reach the verdict.
    pub tolerances: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

/// Sufficient condition `l >= d_0`, cross-checked with one sampled Gaussian sketch.
pub fn check_innovation(
    blocks: &[MatRef<'_, c64>],
    l: usize,
    seed: u64,
    eps: f64,
) -> Result<ConditionReport> {
    let qr = block_qr(blocks, eps)?;
    let d0 = qr.d0();
    let verdict = Verdict::from(l >= d0);
    let m = blocks[0].nrows();
    let same_height = blocks.iter().all(|b| b.nrows() == m);
    let sampled = if same_height && l >= 1 && l <= m {
        let s = sketch::gaussian_code(l, m, blocks.len(), seed)?;
        let a = linalg::vstack(blocks);
        let y = s.apply_matrix(a.as_ref())?;
        Some(relative_capture_error(a.as_ref(), y.as_ref())?)
    } else {
        None
    };
    let mut notes = Vec::new();
    if verdict == Verdict::Fail {
        notes.push(
            "l < d0: the sufficient condition does not apply; capture may still succeed".into(),
        );
    }
    if let Some(e) = sampled {
        notes.push(format!("sampled relative capture error {e:.3e}"));
    }
    Ok(ConditionReport {
        condition: Condition::Innovation,
        verdict,
        evidence: Evidence::Innovation {
            d: qr.d,
            d0,
            l,
            sampled_capture_error: sampled,
            sample_seed: seed,
        },
        tolerances: vec![("rank_eps".into(), eps)],
        notes,
    })
}

/// Groups eigenvalues with `|Im| <= tol` into clusters of real values within `tol`.
pub fn real_clusters(eigenvalues: &[c64], tol: f64) -> Vec<RealCluster> {
    let mut reals: Vec<f64> = eigenvalues
        .iter()
        .filter(|z| z.im.abs() <= tol)
        .map(|z| z.re)
        .collect();
    reals.sort_by(f64::total_cmp);
    let mut out: Vec<RealCluster> = Vec::new();
    let mut start = 0;
    for i in 0..reals.len() {
        if i + 1 == reals.len() || reals[i + 1] - reals[i] > tol {
            let group = &reals[start..=i];
            out.push(RealCluster {
                center: group.iter().sum::<f64>() / group.len() as f64,
                multiplicity: group.len(),
            });
            start = i + 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpectrumOptions {
    /// Clustering tolerance relative to the spectral radius.
    pub cluster_rel: f64,
    /// Maximum relative containment error of `row(A_1)` in `row(A_2)`.
    pub containment_tol: f64,
    pub rank_eps: f64,
}

impl Default for PairSpectrumOptions {
    fn default() -> Self {
        PairSpectrumOptions {
            cluster_rel: 1e-6,
            containment_tol: 1e-8,
            rank_eps: DEFAULT_EPS,
        }
    }
}

/// Two-block condition: with `T = A_1 A_2^+` (equal to `A_1 A_2^T` for orthonormal
/// rows), passes iff no real eigenvalue cluster of `T` exceeds half its dimension.
pub fn check_pair_spectrum(
    a1: MatRef<'_, c64>,
    a2: MatRef<'_, c64>,
    opts: &PairSpectrumOptions,
) -> Result<ConditionReport> {
    if a1.shape() != a2.shape() {
        return Err(invalid("both blocks must have the same shape"));
    }
    let svd2 = linalg::thin_svd(a2)?;
    let rank2 = linalg::numerical_rank(&svd2.s, opts.rank_eps);
    if rank2 < a2.nrows() {
        return Err(Error::PreconditionFailed {
            what: format!(
                "second block must have full row rank ({rank2} < {})",
                a2.nrows()
            ),
            measured: rank2 as f64,
        });
    }
    let containment = relative_capture_error(a1, a2)?;
    if containment > opts.containment_tol {
        return Err(Error::PreconditionFailed {
            what: "row space of the first block is not contained in that of the second".into(),
            measured: containment,
        });
    }
    // A_2^+ = V S^{-1} U^H.
    let n = a2.nrows();
    let scaled_u = CMat::from_fn(n, n, |i, j| svd2.u[(j, i)].conj() / svd2.s[i]);
    let pinv = svd2.v.get(.., ..n) * &scaled_u;
    let t = a1 * &pinv;
    let eig = t
        .eigenvalues()
        .map_err(|e| Error::Linalg(format!("eigenvalue solver failed: {e:?}")))?;
    let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = opts.cluster_rel * radius.max(f64::MIN_POSITIVE);
    let clusters = real_clusters(&eig, tol);
    let max_mult = clusters.iter().map(|c| c.multiplicity).max().unwrap_or(0);
    let verdict = Verdict::from(2 * max_mult <= n);
    Ok(ConditionReport {
        condition: Condition::PairSpectrum,
        verdict,
        notes: vec![format!(
            "largest real eigenvalue cluster has multiplicity {max_mult} of n = {n}"
        )],
        evidence: Evidence::PairSpectrum {
            n,
            eigenvalues: eig,
            real_clusters: clusters,
            max_real_multiplicity: max_mult,
            containment_error: containment,
        },
        tolerances: vec![
            ("cluster_tol".into(), tol),
            ("containment_tol".into(), opts.containment_tol),
            ("rank_eps".into(), opts.rank_eps),
        ],
    })
}

fn m_hat_ratio(blocks: &[MatRef<'_, c64>], vs: &Mat<f64>, widths: &[usize]) -> Result<f64> {
    let vc = linalg::to_complex(vs.as_ref());
    let parts: Vec<CMat> = blocks
        .iter()
        .zip(widths)
        .map(|(a, &w)| vc.get(..w, ..) * *a)
        .collect();
    let refs: Vec<_> = parts.iter().map(|p| p.as_ref()).collect();
    let m_hat = linalg::vstack(&refs);
    let rows = m_hat.nrows();
    if rows > m_hat.ncols() {
        return Ok(0.0);
    }
    let s = linalg::singular_values(m_hat.as_ref())?;
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 || s.len() < rows {
        return Ok(0.0);
    }
    Ok(s[rows - 1] / top)
}

fn generic_basis_trials(
    blocks: &[MatRef<'_, c64>],
    widths: Vec<usize>,
    trials: usize,
    seed: u64,
    eps: f64,
    condition: Condition,
) -> Result<ConditionReport> {
    check_widths(blocks)?;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let m = blocks[0].nrows();
    if blocks.iter().any(|b| b.nrows() != m) {
        return Err(invalid("blocks must share their row count"));
    }
    let l = widths.iter().copied().max().unwrap_or(0);
    if l == 0 || l > m {
        return Err(invalid(format!("need 1 <= l <= m, got l={l}, m={m}")));
    }
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::seeded(rng::derive_seed(seed, t as u64), rng::STREAM_TRIALS);
            let vs = linalg::random_orthonormal_rows(l, m, &mut r);
            m_hat_ratio(blocks, &vs, &widths)
        })
        .collect::<Result<_>>()?;
    let passing = ratios.iter().filter(|&&r| r > eps).count();
    Ok(ConditionReport {
        condition,
        verdict: Verdict::from(passing > 0),
        notes: vec![
            format!("{passing} of {trials} sampled bases gave a full-row-rank M-hat"),
            "existence is witnessed by sampling; a fail is evidence, not proof".into(),
        ],
        evidence: Evidence::GenericBasis {
            widths,
            trials,
            sigma_ratio: ratios,
            passing_trials: passing,
        },
        tolerances: vec![("rank_eps".into(), eps)],
    })
}

/// Samples orthonormal `l x m` bases `V_S` and tests whether
/// `M-hat = [V_S A_1; ...; V_S A_K]` has full row rank.
pub fn check_generic_basis(
    blocks: &[MatRef<'_, c64>],
    l: usize,
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<ConditionReport> {
    generic_basis_trials(
        blocks,
        vec![l; blocks.len()],
        trials,
        seed,
        eps,
        Condition::GenericBasis,
    )
}

/// Variant for `r` not divisible by `K`: the first `r mod K` blocks get
/// `floor(r/K) + 1` rows of `V_S`, the rest the first `floor(r/K)` of them.
pub fn check_generic_basis_mixed(
    blocks: &[MatRef<'_, c64>],
    r: usize,
    trials: usize,
    seed: u64,
    eps: f64,
) -> Result<ConditionReport> {
    let k = blocks.len();
    if k == 0 {
        return Err(invalid("need at least one block"));
    }
    let (base, extra) = (r / k, r % k);
    let widths = (0..k)
        .map(|i| if i < extra { base + 1 } else { base })
        .collect();
    generic_basis_trials(
        blocks,
        widths,
        trials,
        seed,
        eps,
        Condition::GenericBasisMixed,
    )
}

/// Rank increments of the cumulative stacks, block order (longest wavelength first for
/// operators built by this crate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestednessProfile {
    pub increments: Vec<usize>,
    pub cumulative: Vec<usize>,
    pub block_ranks: Vec<usize>,
    pub eps: f64,
}

impl NestednessProfile {
    pub fn stacked_rank(&self) -> usize {
        self.cumulative.last().copied().unwrap_or(0)
    }
}

/// Ranks use `eps` relative to the largest singular value of the full stack, so every
/// block is judged on the same absolute scale.
pub fn nestedness_profile(blocks: &[MatRef<'_, c64>], eps: f64) -> Result<NestednessProfile> {
    check_widths(blocks)?;
    let full = linalg::vstack(blocks);
    let cut = eps * linalg::spectral_norm(full.as_ref())?;
    let rank_abs = |s: &[f64]| s.iter().filter(|&&v| v > cut).count();
    let mut cumulative = Vec::with_capacity(blocks.len());
    let mut block_ranks = Vec::with_capacity(blocks.len());
    for i in 0..blocks.len() {
        block_ranks.push(rank_abs(&linalg::singular_values(blocks[i])?));
        let stack = linalg::vstack(&blocks[..=i]);
        cumulative.push(rank_abs(&linalg::singular_values(stack.as_ref())?));
    }
    let increments = cumulative
        .iter()
        .scan(0usize, |prev, &c| {
            let inc = c.saturating_sub(*prev);
            *prev = c;
            Some(inc)
        })
        .collect();
    Ok(NestednessProfile {
        increments,
        cumulative,
        block_ranks,
        eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleStructure {
    /// Block `i` mixes all directions introduced by blocks `1..=i`.
    Nested,
    /// Block `i` uses only its own directions.
    Orthogonal,
}

/// Synthetic ensemble `A_i = C_i V^T` of `d.len()` real `m x n` blocks with prescribed
/// innovation ranks `d`. Gaussian coefficients fill the allowed columns of `C_i`.
pub fn synthetic_ensemble(
    m: usize,
    n: usize,
    d: &[usize],
    structure: EnsembleStructure,
    seed: u64,
) -> Result<Vec<CMat>> {
    let r: usize = d.iter().sum();
    if r > n {
        return Err(invalid(format!(
            "total rank {r} exceeds the column count {n}"
        )));
    }
    if d.iter().any(|&di| di > m) {
        return Err(invalid("an innovation rank exceeds the block height"));
    }
    let mut rg = rng::seeded(seed, rng::STREAM_ENSEMBLE);
    let v = linalg::random_orthonormal_rows(r, n, &mut rg);
    let mut blocks = Vec::with_capacity(d.len());
    let mut hi = 0;
    for &di in d {
        let lo = match structure {
            EnsembleStructure::Nested => 0,
            EnsembleStructure::Orthogonal => hi,
        };
        hi += di;
        let g = linalg::gaussian_matrix(m, hi - lo, &mut rg);
        let mut c = Mat::<f64>::zeros(m, r);
        c.get_mut(.., lo..hi).copy_from(&g);
        blocks.push(linalg::to_complex((&c * &v).as_ref()));
    }
    Ok(blocks)
}

/// Pair `(A_1, A_2)` of `n x ambient` real blocks with orthonormal `A_2` and
/// `A_1 A_2^T = Q^T R Q`, where `R` holds `real_eigs` as 1x1 blocks followed by 2x2
/// rotations through `angles`.
pub fn pair_with_spectrum(
    real_eigs: &[f64],
    angles: &[f64],
    ambient: usize,
    seed: u64,
) -> Result<(CMat, CMat)> {
    let n = real_eigs.len() + 2 * angles.len();
    if n == 0 || n > ambient {
        return Err(invalid(format!(
            "need 1 <= n <= ambient, got n={n}, ambient={ambient}"
        )));
    }
    let mut rmat = Mat::<f64>::zeros(n, n);
    for (i, &e) in real_eigs.iter().enumerate() {
        rmat[(i, i)] = e;
    }
    for (k, &th) in angles.iter().enumerate() {
        let i = real_eigs.len() + 2 * k;
        let (s, c) = th.sin_cos();
        rmat[(i, i)] = c;
        rmat[(i, i + 1)] = -s;
        rmat[(i + 1, i)] = s;
        rmat[(i + 1, i + 1)] = c;
    }
    let mut rg = rng::seeded(seed, rng::STREAM_ENSEMBLE);
    let q = linalg::random_orthonormal_rows(n, n, &mut rg);
    let u = q.transpose() * &rmat * &q;
    let a2 = linalg::random_orthonormal_rows(n, ambient, &mut rg);
    let a1 = &u * &a2;
    Ok((
        linalg::to_complex(a1.as_ref()),
        linalg::to_complex(a2.as_ref()),
    ))
}
