//! Thin helpers over `faer` for the dense complex algebra used throughout the crate.

use faer::{c64, ColRef, Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Descending singular values. Empty matrices give an empty spectrum.
pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))
}

/// Largest singular value (spectral norm). Zero for empty matrices.
pub fn spectral_norm(a: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Count of singular values strictly above `eps_rel * sigma_max`.
pub fn numerical_rank(spectrum: &[f64], eps_rel: f64) -> usize {
    let Some(&top) = spectrum.first() else {
        return 0;
    };
    if top <= 0.0 {
        return 0;
    }
    let cut = eps_rel * top;
    spectrum.iter().filter(|&&s| s > cut).count()
}

/// Thin SVD `a = U diag(s) V^H`, with the singular values unpacked to reals.
pub struct ThinSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn thin_svd(a: MatRef<'_, c64>) -> Result<ThinSvd> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok(ThinSvd {
            u: CMat::zeros(m, 0),
            s: Vec::new(),
            v: CMat::zeros(n, 0),
        });
    }
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd did not converge: {e:?}")))?;
    let s = svd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(ThinSvd {
        u: svd.U().to_owned(),
        s,
        v: svd.V().to_owned(),
    })
}

/// Orthonormal basis (as columns, `ncols(a) x r`) of the range of `a^H`, i.e. the
/// conjugate row space. Rank is decided by `eps_rel` relative to the top singular value.
pub fn row_space_basis(a: MatRef<'_, c64>, eps_rel: f64) -> Result<CMat> {
    let svd = thin_svd(a)?;
    let r = numerical_rank(&svd.s, eps_rel);
    Ok(svd.v.get(.., ..r).to_owned())
}

/// Orthonormal basis for the range of `w` keeping only directions whose singular value
/// exceeds the absolute threshold `abs_tol`.
pub fn range_basis_abs(w: MatRef<'_, c64>, abs_tol: f64) -> Result<CMat> {
    let svd = thin_svd(w)?;
    let r = svd.s.iter().filter(|&&s| s > abs_tol).count();
    Ok(svd.u.get(.., ..r).to_owned())
}

/// `w - Q (Q^H w)` applied twice, for a `Q` with orthonormal columns.
pub fn project_out(q: MatRef<'_, c64>, w: MatRef<'_, c64>) -> CMat {
    if q.ncols() == 0 {
        return w.to_owned();
    }
    let mut out = w.to_owned();
    for _ in 0..2 {
        let coeff = q.adjoint() * &out;
        out -= q * &coeff;
    }
    out
}

pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub fn adjoint_vec(a: MatRef<'_, c64>, y: &[c64]) -> Vec<c64> {
    let x = a.adjoint() * ColRef::from_slice(y);
    x.iter().copied().collect()
}

pub fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm_real(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[c64], b: &[c64]) -> Vec<c64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn to_complex(a: MatRef<'_, f64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

pub fn real_vec_to_complex(x: &[f64]) -> Vec<c64> {
    x.iter().map(|&v| c64::new(v, 0.0)).collect()
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    // Filled row by row so the draw order does not depend on faer's storage layout.
    let mut out = Mat::<f64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = rng.sample(StandardNormal);
        }
    }
    out
}

/// `rows x cols` real matrix with orthonormal rows (`rows <= cols`), from the QR of a
/// Gaussian draw.
pub fn random_orthonormal_rows<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    assert!(
        rows <= cols,
        "cannot fit {rows} orthonormal rows in dimension {cols}"
    );
    let g = gaussian_matrix(cols, rows, rng);
    let q = g.qr().compute_thin_Q();
    q.transpose().to_owned()
}

/// Stacks matrices of equal width vertically.
pub fn vstack(blocks: &[MatRef<'_, c64>]) -> CMat {
    let n = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, n);
    let mut r0 = 0;
    for b in blocks {
        assert_eq!(b.ncols(), n, "vstack: column counts differ");
        out.get_mut(r0..r0 + b.nrows(), ..).copy_from(b);
        r0 += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_thresholds() {
        assert_eq!(numerical_rank(&[1.0, 1e-15], 1e-10), 1);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-10), 0);
        assert_eq!(numerical_rank(&[], 1e-10), 0);
    }

    #[test]
    fn orthonormal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthonormal_rows(4, 9, &mut rng);
        let g = &q * q.transpose();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn project_out_removes_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = to_complex(random_orthonormal_rows(3, 8, &mut rng).transpose());
        let w = to_complex(gaussian_matrix(8, 2, &mut rng).as_ref());
        let p = project_out(q.as_ref(), w.as_ref());
        let c = q.adjoint() * &p;
        assert!(c.norm_l2() < 1e-12);
    }
}
