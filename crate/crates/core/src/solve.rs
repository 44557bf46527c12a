//! Reconstruction solvers: SVD least squares, Tikhonov, sketched least squares and a
//! structured CoSaMP for scenes with one unknown depth per angle pixel.

use faer::{c64, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, CMat, ThinSvd};
use crate::sketch::SketchOperator;

/// Default singular-value cutoff relative to `sigma_max`.
pub const DEFAULT_RANK_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    LeastSquares,
    Tikhonov,
    SketchedLeastSquares,
    SketchedTikhonov,
    CosampDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconResult {
    /// Complex solution. For CoSaMP, one entry per angle pixel at its recovered depth.
    pub x: Vec<c64>,
    pub solver: SolverKind,
    pub delta: f64,
    pub rank_eps: f64,
    /// Singular values kept by the cutoff.
    pub rank: usize,
    /// `|b - S x|` for the system actually solved (sketched or not).
    pub residual_norm: f64,
    /// Norm of the imaginary part of `x`; near zero for consistent real scenes.
    pub imag_norm: f64,
    pub iterations: usize,
    pub depth_labels: Option<Vec<usize>>,
    pub converged: bool,
}

impl ReconResult {
    /// Real part of the solution, the reported reflectivity.
    pub fn real(&self) -> Vec<f64> {
        self.x.iter().map(|z| z.re).collect()
    }
}

fn imag_norm(x: &[c64]) -> f64 {
    x.iter().map(|z| z.im * z.im).sum::<f64>().sqrt()
}

/// Thin SVD of a system matrix kept around for repeated solves, e.g. regularization
/// sweeps or applying the same pseudoinverse to signal and noise.
pub struct SvdSolver {
    svd: ThinSvd,
    rank: usize,
    rank_eps: f64,
    rows: usize,
    cols: usize,
}

impl SvdSolver {
    pub fn new(a: MatRef<'_, c64>, rank_eps: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(invalid("cannot solve with an empty matrix"));
        }
        if !(rank_eps >= 0.0) {
            return Err(invalid(format!(
                "rank threshold must be non-negative, got {rank_eps}"
            )));
        }
        let svd = linalg::thin_svd(a)?;
        let rank = linalg::numerical_rank(&svd.s, rank_eps);
        Ok(SvdSolver {
            svd,
            rank,
            rank_eps,
            rows: a.nrows(),
            cols: a.ncols(),
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.s
    }

    pub fn sigma_max(&self) -> f64 {
        self.svd.s.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_eps(&self) -> f64 {
        self.rank_eps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Orthonormal basis of the retained row space (`cols x rank`).
    pub fn row_basis(&self) -> MatRef<'_, c64> {
        self.svd.v.get(.., ..self.rank)
    }

    /// `sum_i f_i(delta) (u_i^H b) v_i` over the retained singular values, with
    /// `f = 1/sigma` at `delta = 0` and `sigma/(sigma^2 + delta)` otherwise.
    pub fn solve(&self, b: &[c64], delta: f64) -> Result<Vec<c64>> {
        if b.len() != self.rows {
            return Err(invalid(format!(
                "right-hand side has length {}, system has {} rows",
                b.len(),
                self.rows
            )));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid(format!(
                "regularization must be finite and non-negative, got {delta}"
            )));
        }
        let u = self.svd.u.get(.., ..self.rank);
        let mut coeff = linalg::adjoint_vec(u, b);
        for (c, &s) in coeff.iter_mut().zip(&self.svd.s) {
            *c *= s / (s * s + delta);
        }
        Ok(linalg::mat_vec(self.svd.v.get(.., ..self.rank), &coeff))
    }
}

fn finish(
    a: MatRef<'_, c64>,
    b: &[c64],
    x: Vec<c64>,
    solver: SolverKind,
    delta: f64,
    s: &SvdSolver,
) -> ReconResult {
    let residual_norm = linalg::norm(&linalg::sub(b, &linalg::mat_vec(a, &x)));
    ReconResult {
        imag_norm: imag_norm(&x),
        x,
        solver,
        delta,
        rank_eps: s.rank_eps,
        rank: s.rank,
        residual_norm,
        iterations: 1,
        depth_labels: None,
        converged: true,
    }
}

fn check_rhs(a: MatRef<'_, c64>, y: &[c64]) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(invalid("cannot solve with an empty matrix"));
    }
    if y.len() != a.nrows() {
        return Err(invalid(format!(
            "measurements have length {}, operator has {} rows",
            y.len(),
            a.nrows()
        )));
    }
    Ok(())
}

/// Minimum-norm least squares through the truncated SVD pseudoinverse.
pub fn least_squares(a: MatRef<'_, c64>, y: &[c64]) -> Result<ReconResult> {
    least_squares_with(a, y, DEFAULT_RANK_EPS)
}

pub fn least_squares_with(a: MatRef<'_, c64>, y: &[c64], rank_eps: f64) -> Result<ReconResult> {
    check_rhs(a, y)?;
    let s = SvdSolver::new(a, rank_eps)?;
    let x = s.solve(y, 0.0)?;
    Ok(finish(a, y, x, SolverKind::LeastSquares, 0.0, &s))
}

/// `(A^H A + delta I)^{-1} A^H y` through SVD filter factors.
pub fn tikhonov(a: MatRef<'_, c64>, y: &[c64], delta: f64) -> Result<ReconResult> {
    if !(delta >= 0.0) {
        return Err(invalid(format!(
            "regularization must be non-negative, got {delta}"
        )));
    }
    check_rhs(a, y)?;
    let s = SvdSolver::new(a, DEFAULT_RANK_EPS)?;
    let x = s.solve(y, delta)?;
    Ok(finish(a, y, x, SolverKind::Tikhonov, delta, &s))
}

/// Sketched system `(Phi A, Phi y)` formed block by block.
pub struct SketchedSystem {
    pub matrix: CMat,
    pub rhs: Vec<c64>,
}

impl SketchedSystem {
    pub fn new(sketch: &SketchOperator, a: MatRef<'_, c64>, y: &[c64]) -> Result<Self> {
        if y.len() != a.nrows() {
            return Err(invalid(format!(
                "measurements have length {}, operator has {} rows",
                y.len(),
                a.nrows()
            )));
        }
        Ok(SketchedSystem {
            matrix: sketch.apply_matrix(a)?,
            rhs: sketch.apply_vector(y)?,
        })
    }
}

/// `min |Phi y - Phi A x|^2 + delta |x|^2`, using only the sketched matrix.
pub fn sketched_least_squares(
    sketch: &SketchOperator,
    a: MatRef<'_, c64>,
    y: &[c64],
    delta: f64,
) -> Result<ReconResult> {
    if !(delta >= 0.0) {
        return Err(invalid(format!(
            "regularization must be non-negative, got {delta}"
        )));
    }
    let sys = SketchedSystem::new(sketch, a, y)?;
    let s = SvdSolver::new(sys.matrix.as_ref(), DEFAULT_RANK_EPS)?;
    let x = s.solve(&sys.rhs, delta)?;
    let kind = if delta > 0.0 {
        SolverKind::SketchedTikhonov
    } else {
        SolverKind::SketchedLeastSquares
    };
    Ok(finish(sys.matrix.as_ref(), &sys.rhs, x, kind, delta, &s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosampOptions {
    pub max_iter: usize,
    /// Stop once the residual, or its change between iterations, falls below
    /// `tol * |z|`.
    pub tol: f64,
    /// Candidate depths shortlisted per pixel from the proxy.
    pub shortlist: usize,
    pub rank_eps: f64,
}

impl Default for CosampOptions {
    fn default() -> Self {
        CosampOptions {
            max_iter: 30,
            tol: 1e-10,
            shortlist: 2,
            rank_eps: DEFAULT_RANK_EPS,
        }
    }
}

/// Dictionary column for `(pixel, depth)`: `pixel * depths + depth`.
fn dict_col(pixel: usize, depth: usize, depths: usize) -> usize {
    pixel * depths + depth
}

/// Builds the (optionally sketched) dictionary with columns ordered pixel-major.
pub fn depth_dictionary(
    per_depth: &[MatRef<'_, c64>],
    sketch: Option<&SketchOperator>,
) -> Result<CMat> {
    let Some(first) = per_depth.first() else {
        return Err(invalid("need at least one candidate depth operator"));
    };
    let (rows, pixels) = first.shape();
    if per_depth.iter().any(|a| a.shape() != (rows, pixels)) {
        return Err(invalid("candidate depth operators must share their shape"));
    }
    let sketched: Vec<CMat> = match sketch {
        Some(s) => per_depth
            .iter()
            .map(|a| s.apply_matrix(*a))
            .collect::<Result<_>>()?,
        None => per_depth.iter().map(|a| a.to_owned()).collect(),
    };
    let depths = per_depth.len();
    let out_rows = sketched[0].nrows();
    Ok(CMat::from_fn(out_rows, pixels * depths, |i, c| {
        sketched[c % depths][(i, c / depths)]
    }))
}

fn restricted_ls(
    dict: MatRef<'_, c64>,
    cols: &[usize],
    z: &[c64],
    rank_eps: f64,
) -> Result<Vec<c64>> {
    let sub = CMat::from_fn(dict.nrows(), cols.len(), |i, j| dict[(i, cols[j])]);
    SvdSolver::new(sub.as_ref(), rank_eps)?.solve(z, 0.0)
}

fn support_residual(dict: MatRef<'_, c64>, cols: &[usize], coeff: &[c64], z: &[c64]) -> Vec<c64> {
    let mut r = z.to_vec();
    for (&c, &v) in cols.iter().zip(coeff) {
        for (i, ri) in r.iter_mut().enumerate() {
            *ri -= dict[(i, c)] * v;
        }
    }
    r
}

/// Structured CoSaMP over `per_depth.len()` candidate depths with exactly one active
/// depth per angle pixel. `z` is the sketched data when `sketch` is given, the raw
/// stacked data otherwise.
pub fn cosamp_depth(
    per_depth: &[MatRef<'_, c64>],
    sketch: Option<&SketchOperator>,
    z: &[c64],
    opts: &CosampOptions,
) -> Result<ReconResult> {
    let dict = depth_dictionary(per_depth, sketch)?;
    cosamp_on_dictionary(dict.as_ref(), per_depth.len(), z, opts)
}

/// CoSaMP on a pre-built dictionary whose column `pixel * depths + depth` holds the
/// (sketched) response of `pixel` at candidate `depth`.
pub fn cosamp_on_dictionary(
    dict: MatRef<'_, c64>,
    depths: usize,
    z: &[c64],
    opts: &CosampOptions,
) -> Result<ReconResult> {
    if depths == 0 || dict.ncols() % depths != 0 {
        return Err(invalid(
            "dictionary width must be a multiple of the depth count",
        ));
    }
    if z.len() != dict.nrows() {
        return Err(invalid(format!(
            "data has length {}, dictionary has {} rows",
            z.len(),
            dict.nrows()
        )));
    }
    if opts.max_iter == 0 || opts.shortlist == 0 {
        return Err(invalid(
            "CoSaMP needs at least one iteration and a non-empty shortlist",
        ));
    }
    let pixels = dict.ncols() / depths;
    let z_norm = linalg::norm(z);
    let stop = opts.tol * z_norm.max(f64::MIN_POSITIVE);

    let mut labels: Option<Vec<usize>> = None;
    let mut x = vec![linalg::ZERO; pixels];
    let mut residual = z.to_vec();
    let mut res_norm = z_norm;

    let mut best = (f64::INFINITY, Vec::new(), Vec::new());
    let mut iterations = 0;
    let mut converged = false;

    for it in 1..=opts.max_iter {
        iterations = it;
        let proxy = linalg::adjoint_vec(dict, &residual);

        let mut merged: Vec<usize> = Vec::with_capacity(pixels * (opts.shortlist + 1));
        for p in 0..pixels {
            let mut order: Vec<usize> = (0..depths).collect();
            order.sort_by(|&a, &b| {
                let ea = proxy[dict_col(p, a, depths)].norm_sqr();
                let eb = proxy[dict_col(p, b, depths)].norm_sqr();
                eb.total_cmp(&ea).then(a.cmp(&b))
            });
            let mut cand: Vec<usize> = order.into_iter().take(opts.shortlist).collect();
            if let Some(l) = &labels {
                if !cand.contains(&l[p]) {
                    cand.push(l[p]);
                }
            }
            cand.sort_unstable();
            merged.extend(cand.into_iter().map(|d| dict_col(p, d, depths)));
        }

        let b = restricted_ls(dict, &merged, z, opts.rank_eps)?;

        // Keep the strongest candidate of every pixel.
        let mut new_labels = vec![0usize; pixels];
        let mut best_mag = vec![-1.0f64; pixels];
        for (&c, v) in merged.iter().zip(&b) {
            let (p, d) = (c / depths, c % depths);
            if v.norm() > best_mag[p] {
                best_mag[p] = v.norm();
                new_labels[p] = d;
            }
        }
        let cols: Vec<usize> = (0..pixels)
            .map(|p| dict_col(p, new_labels[p], depths))
            .collect();
        x = restricted_ls(dict, &cols, z, opts.rank_eps)?;
        residual = support_residual(dict, &cols, &x, z);
        let new_norm = linalg::norm(&residual);

        if new_norm < best.0 {
            best = (new_norm, new_labels.clone(), x.clone());
        }
        let change = (res_norm - new_norm).abs();
        let same = labels.as_ref() == Some(&new_labels);
        labels = Some(new_labels);
        res_norm = new_norm;
        if new_norm <= stop || (it > 1 && (change <= stop || same)) {
            converged = true;
            break;
        }
    }

    let (residual_norm, labels, x_best) = if best.0 <= res_norm {
        best
    } else {
        (res_norm, labels.unwrap_or_default(), x)
    };
    Ok(ReconResult {
        imag_norm: imag_norm(&x_best),
        x: x_best,
        solver: SolverKind::CosampDepth,
        delta: 0.0,
        rank_eps: opts.rank_eps,
        rank: pixels,
        residual_norm,
        iterations,
        depth_labels: Some(labels),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, to_complex};
    use crate::rng;
    use crate::sketch::{gaussian_code, identity};
    use faer::Mat;
    use proptest::prelude::*;

    fn c(re: f64) -> c64 {
        c64::new(re, 0.0)
    }

    fn random_cmat(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut r = rng::seeded(seed, 7);
        let re = gaussian_matrix(rows, cols, &mut r);
        let im = gaussian_matrix(rows, cols, &mut r);
        CMat::from_fn(rows, cols, |i, j| c64::new(re[(i, j)], im[(i, j)]))
    }

    fn rel(a: &[c64], b: &[c64]) -> f64 {
        linalg::norm(&linalg::sub(a, b)) / linalg::norm(b).max(1e-300)
    }

    #[test]
    fn identity_system() {
        let a = CMat::identity(4, 4);
        let y = vec![c(1.0), c64::new(0.0, 2.0), c(-3.0), c(0.5)];
        let r = least_squares(a.as_ref(), &y).unwrap();
        assert!(rel(&r.x, &y) < 1e-14);
        assert!(r.residual_norm < 1e-14);
    }

    #[test]
    fn consistent_full_column_rank() {
        let a = random_cmat(30, 12, 1);
        let x0: Vec<c64> = (0..12).map(|i| c(i as f64 - 5.5)).collect();
        let y = linalg::mat_vec(a.as_ref(), &x0);
        let r = least_squares(a.as_ref(), &y).unwrap();
        assert!(rel(&r.x, &x0) < 1e-10);
        assert!(r.imag_norm < 1e-10);
    }

    #[test]
    fn rank_one_minimum_norm() {
        // A = u v^T, y = u -> x = v / |v|^2.
        let u = [1.0, 2.0, -1.0];
        let v = [3.0, 0.0, 4.0, 1.0];
        let a = CMat::from_fn(3, 4, |i, j| c(u[i] * v[j]));
        let y: Vec<c64> = u.iter().map(|&t| c(t)).collect();
        let r = least_squares(a.as_ref(), &y).unwrap();
        let vv: f64 = v.iter().map(|t| t * t).sum();
        let want: Vec<c64> = v.iter().map(|&t| c(t / vv)).collect();
        assert!(rel(&r.x, &want) < 1e-12);
        assert_eq!(r.rank, 1);
    }

    #[test]
    fn empty_and_bad_inputs() {
        let a = CMat::zeros(0, 3);
        assert!(least_squares(a.as_ref(), &[]).is_err());
        let a = CMat::identity(2, 2);
        assert!(least_squares(a.as_ref(), &[c(1.0)]).is_err());
        assert!(tikhonov(a.as_ref(), &[c(1.0), c(1.0)], -1.0).is_err());
    }

    #[test]
    fn scalar_tikhonov() {
        let a = CMat::from_fn(1, 1, |_, _| c(2.0));
        let r = tikhonov(a.as_ref(), &[c(4.0)], 1.0).unwrap();
        assert!((r.x[0].re - 1.6).abs() < 1e-14);
    }

    #[test]
    fn tikhonov_shrinks_monotonically() {
        let a = random_cmat(20, 15, 2);
        let y: Vec<c64> = (0..20).map(|i| c64::new((i as f64).sin(), 0.3)).collect();
        let mut prev = f64::INFINITY;
        for delta in [0.0, 1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6] {
            let n = linalg::norm(&tikhonov(a.as_ref(), &y, delta).unwrap().x);
            assert!(n <= prev);
            prev = n;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn tikhonov_zero_matches_ls() {
        let a = random_cmat(25, 10, 3);
        let y: Vec<c64> = (0..25).map(|i| c(i as f64)).collect();
        let t = tikhonov(a.as_ref(), &y, 0.0).unwrap();
        let l = least_squares(a.as_ref(), &y).unwrap();
        assert!(rel(&t.x, &l.x) < 1e-10);
    }

    #[test]
    fn tikhonov_matches_normal_equations() {
        let a = random_cmat(12, 6, 4);
        let y: Vec<c64> = (0..12).map(|i| c64::new(1.0, i as f64)).collect();
        let delta = 0.7;
        let mut g = a.adjoint() * &a;
        for i in 0..6 {
            g[(i, i)] += c(delta);
        }
        let rhs = linalg::adjoint_vec(a.as_ref(), &y);
        let want = least_squares(g.as_ref(), &rhs).unwrap().x;
        let got = tikhonov(a.as_ref(), &y, delta).unwrap().x;
        assert!(rel(&got, &want) < 1e-8);
    }

    #[test]
    fn identity_sketch_matches_full() {
        let a = random_cmat(18, 7, 5);
        let y: Vec<c64> = (0..18).map(|i| c64::new(0.1 * i as f64, -1.0)).collect();
        let s = identity(6, 3).unwrap();
        for delta in [0.0, 0.5] {
            let full = tikhonov(a.as_ref(), &y, delta).unwrap();
            let sk = sketched_least_squares(&s, a.as_ref(), &y, delta).unwrap();
            assert_eq!(sk.x, full.x);
        }
    }

    #[test]
    fn nested_blocks_with_enough_codes() {
        // A = C V^T with rank 12 spread over K = 3 blocks of M = 10 rows, l = 6 >= d_0.
        let mut r = rng::seeded(11, 1);
        let v = linalg::random_orthonormal_rows(12, 40, &mut r);
        let mut cm = Mat::<f64>::zeros(30, 12);
        let d = [6usize, 4, 2];
        let mut off = 0;
        let g = gaussian_matrix(30, 12, &mut r);
        for (k, &dk) in d.iter().enumerate() {
            off += dk;
            for i in 0..10 {
                for j in 0..off {
                    cm[(k * 10 + i, j)] = g[(k * 10 + i, j)];
                }
            }
        }
        let a = to_complex((&cm * &v).as_ref());
        let x0: Vec<c64> = (0..40).map(|i| c((i as f64 * 0.37).cos())).collect();
        let y = linalg::mat_vec(a.as_ref(), &x0);
        let ls = least_squares(a.as_ref(), &y).unwrap();
        let s = gaussian_code(6, 10, 3, 5).unwrap();
        let sls = sketched_least_squares(&s, a.as_ref(), &y, 0.0).unwrap();
        assert!(rel(&sls.x, &ls.x) < 1e-8);
    }

    #[test]
    fn residual_is_recomputable() {
        let a = random_cmat(16, 9, 8);
        let y: Vec<c64> = (0..16)
            .map(|i| c64::new(1.0 / (1.0 + i as f64), 0.2))
            .collect();
        let s = gaussian_code(3, 4, 4, 1).unwrap();
        let r = sketched_least_squares(&s, a.as_ref(), &y, 0.0).unwrap();
        let sys = SketchedSystem::new(&s, a.as_ref(), &y).unwrap();
        let again = linalg::norm(&linalg::sub(
            &sys.rhs,
            &linalg::mat_vec(sys.matrix.as_ref(), &r.x),
        ));
        assert!((again - r.residual_norm).abs() <= 1e-10 * again.max(1e-300) + 1e-14);
    }

    fn tiny_dictionary(pixels: usize, depths: usize, rows: usize, seed: u64) -> Vec<CMat> {
        (0..depths)
            .map(|d| random_cmat(rows, pixels, seed * 31 + d as u64))
            .collect()
    }

    #[test]
    fn single_pixel_two_depths() {
        let ops = tiny_dictionary(1, 2, 6, 3);
        let refs: Vec<_> = ops.iter().map(|m| m.as_ref()).collect();
        let z = linalg::mat_vec(ops[1].as_ref(), &[c(2.0)]);
        let r = cosamp_depth(&refs, None, &z, &CosampOptions::default()).unwrap();
        assert_eq!(r.depth_labels.as_deref(), Some(&[1usize][..]));
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert!((r.x[0] - c(2.0)).norm() < 1e-10);
    }

    fn brute_force(
        dict: MatRef<'_, c64>,
        pixels: usize,
        depths: usize,
        z: &[c64],
    ) -> (Vec<usize>, f64) {
        let mut best = (Vec::new(), f64::INFINITY);
        let total = depths.pow(pixels as u32);
        for code in 0..total {
            let mut rem = code;
            let labels: Vec<usize> = (0..pixels)
                .map(|_| {
                    let d = rem % depths;
                    rem /= depths;
                    d
                })
                .collect();
            let cols: Vec<usize> = labels
                .iter()
                .enumerate()
                .map(|(p, &d)| p * depths + d)
                .collect();
            let x = restricted_ls(dict, &cols, z, DEFAULT_RANK_EPS).unwrap();
            let r = linalg::norm(&support_residual(dict, &cols, &x, z));
            if r < best.1 {
                best = (labels, r);
            }
        }
        best
    }

    #[test]
    fn matches_exhaustive_search() {
        let (pixels, depths) = (8, 4);
        let ops = tiny_dictionary(pixels, depths, 24, 9);
        let refs: Vec<_> = ops.iter().map(|m| m.as_ref()).collect();
        let dict = depth_dictionary(&refs, None).unwrap();
        let truth = [2usize, 0, 3, 1, 1, 2, 0, 3];
        let cols: Vec<usize> = truth
            .iter()
            .enumerate()
            .map(|(p, &d)| p * depths + d)
            .collect();
        let vals: Vec<c64> = (0..pixels).map(|p| c(0.5 + p as f64 * 0.25)).collect();
        let z = support_residual(dict.as_ref(), &cols, &vals, &vec![linalg::ZERO; 24])
            .into_iter()
            .map(|v| -v)
            .collect::<Vec<_>>();
        let (oracle, _) = brute_force(dict.as_ref(), pixels, depths, &z);
        let r = cosamp_on_dictionary(dict.as_ref(), depths, &z, &CosampOptions::default()).unwrap();
        assert_eq!(r.depth_labels.as_deref(), Some(oracle.as_slice()));
        assert_eq!(oracle, truth);
    }

    #[test]
    fn identity_sketch_reduces_to_full_data() {
        let ops = tiny_dictionary(5, 3, 12, 4);
        let refs: Vec<_> = ops.iter().map(|m| m.as_ref()).collect();
        let x: Vec<c64> = (0..5).map(|p| c(1.0 + p as f64)).collect();
        let z = linalg::mat_vec(ops[2].as_ref(), &x);
        let full = cosamp_depth(&refs, None, &z, &CosampOptions::default()).unwrap();
        let id = identity(4, 3).unwrap();
        let sk = cosamp_depth(
            &refs,
            Some(&id),
            &id.apply_vector(&z).unwrap(),
            &CosampOptions::default(),
        )
        .unwrap();
        assert_eq!(full, sk);
        assert_eq!(full.depth_labels.unwrap(), vec![2; 5]);
    }

    #[test]
    fn sketched_cosamp_recovers_depths() {
        let ops = tiny_dictionary(6, 3, 40, 6);
        let refs: Vec<_> = ops.iter().map(|m| m.as_ref()).collect();
        let truth = [0usize, 2, 1, 1, 0, 2];
        let mut y = vec![linalg::ZERO; 40];
        for (p, &d) in truth.iter().enumerate() {
            for i in 0..40 {
                y[i] += ops[d][(i, p)] * c(1.0 + p as f64);
            }
        }
        let s = gaussian_code(5, 10, 4, 2).unwrap();
        let z = s.apply_vector(&y).unwrap();
        let r = cosamp_depth(&refs, Some(&s), &z, &CosampOptions::default()).unwrap();
        assert_eq!(r.depth_labels.unwrap(), truth);
        assert!(r.residual_norm < 1e-8 * linalg::norm(&z));
    }

    proptest! {
        #[test]
        fn solvers_are_deterministic(seed in 0u64..200, delta in 0.0f64..2.0) {
            let a = random_cmat(10, 6, seed);
            let y: Vec<c64> = (0..10).map(|i| c64::new(i as f64, 1.0)).collect();
            prop_assert_eq!(tikhonov(a.as_ref(), &y, delta).unwrap(), tikhonov(a.as_ref(), &y, delta).unwrap());
        }

        #[test]
        fn ls_residual_orthogonal_to_range(seed in 0u64..200) {
            let a = random_cmat(14, 5, seed);
            let y: Vec<c64> = (0..14).map(|i| c64::new((i as f64).cos(), (i as f64).sin())).collect();
            let r = least_squares(a.as_ref(), &y).unwrap();
            let res = linalg::sub(&y, &linalg::mat_vec(a.as_ref(), &r.x));
            let g = linalg::adjoint_vec(a.as_ref(), &res);
            prop_assert!(linalg::norm(&g) < 1e-9 * linalg::norm(&y));
        }
    }
}
