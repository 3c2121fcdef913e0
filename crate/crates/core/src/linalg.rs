//! Dense real matrix kernel.
//!
//! The numerically delicate primitives everything else builds on:
//! pseudo-inverse, kernel/range tests, generalized Schur complements,
//! definiteness classification, and spectra. All operations are pure
//! functions; no public operation admits non-finite entries.

use nalgebra::{DMatrix, DVector};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Dense real matrix. Row-major semantics at the API level; storage layout
/// is nalgebra's.
pub type Mat = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: relative asymmetry {0:.3e}")]
    NotSymmetric(f64),
    #[error("invalid block split {split} for dimension {dim}")]
    InvalidSplit { split: usize, dim: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("matrix format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Sign classification of a symmetric matrix with respect to a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
    Zero,
}

pub fn ensure_finite(a: &Mat) -> Result<(), LinalgError> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Frobenius norm.
pub fn frob(a: &Mat) -> f64 {
    a.norm()
}

/// Spectral norm (largest singular value). Zero-sized matrices have norm 0.
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 || a.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// `(A + A^T) / 2`, rejecting inputs whose asymmetry exceeds
/// `sym_tol * max(1, |A|)`. Asymmetry below that is numerical noise.
pub fn symmetrize(a: &Mat, sym_tol: f64) -> Result<Mat, LinalgError> {
    ensure_finite(a)?;
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let skew = (a - a.transpose()).norm() / 2.0;
    let scale = f64::max(1.0, a.norm());
    if skew > sym_tol * scale {
        return Err(LinalgError::NotSymmetric(skew / scale));
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Eigendecomposition of a symmetric matrix: `(values, vectors)` with
/// columns of `vectors` the eigenvectors, values in ascending order.
pub fn sym_eigen(a: &Mat, sym_tol: f64) -> Result<(Vector, Mat), LinalgError> {
    let s = symmetrize(a, sym_tol)?;
    if s.nrows() == 0 {
        return Ok((Vector::zeros(0), Mat::zeros(0, 0)));
    }
    let eig = s.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Mat::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).clone_owned())
            .collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

/// Smallest eigenvalue of a symmetric matrix. Empty matrices return `+inf`
/// (vacuously positive definite).
pub fn min_eigenvalue(a: &Mat, sym_tol: f64) -> Result<f64, LinalgError> {
    let (vals, _) = sym_eigen(a, sym_tol)?;
    Ok(if vals.len() == 0 {
        f64::INFINITY
    } else {
        vals[0]
    })
}

/// Moore-Penrose pseudo-inverse. Singular values below
/// `rank_tol * sigma_max * max(rows, cols)` are treated as zero.
pub fn pinv(a: &Mat, rank_tol: f64) -> Result<Mat, LinalgError> {
    ensure_finite(a)?;
    let (rows, cols) = (a.nrows(), a.ncols());
    if rows == 0 || cols == 0 {
        return Ok(Mat::zeros(cols, rows));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = rank_tol * smax * rows.max(cols) as f64;
    svd.pseudo_inverse(cutoff)
        .map_err(|m| LinalgError::Format(m.to_string()))
}

/// Classifies a symmetric matrix from its spectrum. An eigenvalue counts as
/// zero when its magnitude is below `tol * max(1, sigma_max)`.
pub fn classify_definiteness(
    a: &Mat,
    tol: f64,
    sym_tol: f64,
) -> Result<Definiteness, LinalgError> {
    let (vals, _) = sym_eigen(a, sym_tol)?;
    if vals.len() == 0 {
        return Ok(Definiteness::Zero);
    }
    let smax = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let thr = tol * f64::max(1.0, smax);
    let any_pos = vals.iter().any(|&v| v > thr);
    let any_neg = vals.iter().any(|&v| v < -thr);
    Ok(match (any_pos, any_neg) {
        (true, true) => Definiteness::Indefinite,
        (true, false) => {
            if vals[0] > thr {
                Definiteness::PositiveDefinite
            } else {
                Definiteness::PositiveSemidefinite
            }
        }
        (false, true) => {
            if vals[vals.len() - 1] < -thr {
                Definiteness::NegativeDefinite
            } else {
                Definiteness::NegativeSemidefinite
            }
        }
        (false, false) => Definiteness::Zero,
    })
}

/// Generalized Schur complement of the leading `split x split` block:
/// `P11 - P12 P22^+ P21`.
pub fn schur_complement(
    p: &Mat,
    split: usize,
    rank_tol: f64,
    sym_tol: f64,
) -> Result<Mat, LinalgError> {
    let s = symmetrize(p, sym_tol)?;
    let dim = s.nrows();
    if split == 0 || split >= dim {
        return Err(LinalgError::InvalidSplit { split, dim });
    }
    let r = dim - split;
    let p11 = s.view((0, 0), (split, split)).clone_owned();
    let p12 = s.view((0, split), (split, r)).clone_owned();
    let p21 = s.view((split, 0), (r, split)).clone_owned();
    let p22 = s.view((split, split), (r, r)).clone_owned();
    let comp = p11 - &p12 * pinv(&p22, rank_tol)? * &p21;
    // round-off can leave a tiny skew part; the result is symmetric by construction
    Ok((&comp + comp.transpose()) * 0.5)
}

/// Orthonormal basis of the kernel of `A` (right singular vectors whose
/// singular values fall below the rank cutoff). Returned as columns; the
/// matrix has zero columns when the kernel is trivial.
pub fn kernel_basis(a: &Mat, rank_tol: f64) -> Result<Mat, LinalgError> {
    ensure_finite(a)?;
    let (rows, cols) = (a.nrows(), a.ncols());
    if rows == 0 || cols == 0 {
        return Ok(Mat::identity(cols, cols));
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let smax = svd.singular_values.max();
    let cutoff = rank_tol * smax * rows.max(cols) as f64;
    let mut cols_out: Vec<Vector> = Vec::new();
    // v_t has min(rows, cols) rows; directions beyond the row count of A are
    // always in the kernel but nalgebra's thin SVD omits them, so recover the
    // full kernel by projecting out the row space.
    for (i, &sv) in svd.singular_values.iter().enumerate() {
        if sv <= cutoff {
            cols_out.push(v_t.row(i).transpose());
        }
    }
    if cols > rows {
        // complete the basis: null directions orthogonal to all of v_t
        let mut proj = Mat::identity(cols, cols);
        for i in 0..v_t.nrows() {
            let v = v_t.row(i).transpose();
            proj -= &v * v.transpose();
        }
        let psvd = proj.clone().svd(true, false);
        let u = psvd.u.as_ref().expect("svd requested u");
        for (i, &sv) in psvd.singular_values.iter().enumerate() {
            if sv > 0.5 {
                cols_out.push(u.column(i).clone_owned());
            }
        }
    }
    if cols_out.is_empty() {
        Ok(Mat::zeros(cols, 0))
    } else {
        Ok(Mat::from_columns(&cols_out))
    }
}

/// True iff `ker A` is contained in `ker B`: every kernel basis vector `v`
/// of `A` satisfies `|Bv| <= tol * |B| * |v|`. A zero `B` contains every
/// kernel.
pub fn kernel_contained(a: &Mat, b: &Mat, tol: f64, rank_tol: f64) -> Result<bool, LinalgError> {
    ensure_finite(a)?;
    ensure_finite(b)?;
    if a.ncols() != b.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "kernel_contained: {} vs {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let bnorm = spectral_norm(b);
    if bnorm == 0.0 {
        return Ok(true);
    }
    let basis = kernel_basis(a, rank_tol)?;
    for j in 0..basis.ncols() {
        let v = basis.column(j);
        if (b * v).norm() > tol * bnorm * v.norm() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Complex eigenvalues of a general square matrix, via the real Schur form.
pub fn complex_eigenvalues(a: &Mat) -> Result<Vec<(f64, f64)>, LinalgError> {
    ensure_finite(a)?;
    if a.nrows() != a.ncols() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(LinalgError::EigenFailure)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &Mat) -> Result<f64, LinalgError> {
    Ok(complex_eigenvalues(a)?
        .into_iter()
        .fold(0.0, |m, (re, im)| m.max(re.hypot(im))))
}

/// True iff some eigenvalue lies on the imaginary axis, i.e.
/// `|Re(lambda)| <= tol * max(1, |A|)`. Zero eigenvalues count: the axis
/// includes the origin.
pub fn has_imaginary_axis_eigenvalue(a: &Mat, tol: f64) -> Result<bool, LinalgError> {
    let thr = tol * f64::max(1.0, spectral_norm(a));
    Ok(complex_eigenvalues(a)?
        .into_iter()
        .any(|(re, _)| re.abs() <= thr))
}

/// Symmetric square root of a positive semidefinite matrix. Eigenvalues in
/// `(-clamp_tol, 0)` are clamped to zero; anything more negative is an error.
pub fn psd_sqrt(a: &Mat, clamp_tol: f64, sym_tol: f64) -> Result<Mat, LinalgError> {
    let (vals, vecs) = sym_eigen(a, sym_tol)?;
    let scale = f64::max(1.0, vals.iter().fold(0.0f64, |m, &v| m.max(v.abs())));
    let mut d = Mat::zeros(vals.len(), vals.len());
    for i in 0..vals.len() {
        if vals[i] < -clamp_tol * scale {
            return Err(LinalgError::Format(format!(
                "psd_sqrt: eigenvalue {:.3e} below clamp tolerance",
                vals[i]
            )));
        }
        d[(i, i)] = vals[i].max(0.0).sqrt();
    }
    Ok(&vecs * d * vecs.transpose())
}

/// Square root of the pseudo-inverse of a positive semidefinite matrix,
/// together with an orthonormal kernel basis. Eigenvalues below the rank
/// cutoff are treated as exactly zero.
pub fn psd_pinv_sqrt(
    a: &Mat,
    rank_tol: f64,
    sym_tol: f64,
) -> Result<(Mat, Mat), LinalgError> {
    let (vals, vecs) = sym_eigen(a, sym_tol)?;
    let n = vals.len();
    let smax = vals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cutoff = rank_tol * f64::max(1.0, smax) * n.max(1) as f64;
    let mut d = Mat::zeros(n, n);
    let mut kernel_cols: Vec<Vector> = Vec::new();
    for i in 0..n {
        if vals[i] > cutoff {
            d[(i, i)] = 1.0 / vals[i].sqrt();
        } else {
            kernel_cols.push(vecs.column(i).clone_owned());
        }
    }
    let pinv_sqrt = &vecs * d * vecs.transpose();
    let kernel = if kernel_cols.is_empty() {
        Mat::zeros(n, 0)
    } else {
        Mat::from_columns(&kernel_cols)
    };
    Ok((pinv_sqrt, kernel))
}

// ── CSV matrix format ──────────────────────────────────────────────
//
// First line `rows,cols`, then one comma-separated row per line, printed
// with 17 significant digits so values round-trip exactly.

pub fn write_csv<W: Write>(a: &Mat, mut w: W) -> Result<(), LinalgError> {
    ensure_finite(a)?;
    writeln!(w, "{},{}", a.nrows(), a.ncols())?;
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:.16e}", a[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Mat, LinalgError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| LinalgError::Format("empty matrix file".into()))??;
    let dims: Vec<&str> = header.trim().split(',').collect();
    if dims.len() != 2 {
        return Err(LinalgError::Format(format!("bad header `{header}`")));
    }
    let rows: usize = dims[0]
        .trim()
        .parse()
        .map_err(|e| LinalgError::Format(format!("bad row count: {e}")))?;
    let cols: usize = dims[1]
        .trim()
        .parse()
        .map_err(|e| LinalgError::Format(format!("bad col count: {e}")))?;
    let mut entries = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i >= rows {
            return Err(LinalgError::Format(format!("more than {rows} data rows")));
        }
        let vals: Result<Vec<f64>, _> = line.trim().split(',').map(|t| t.trim().parse()).collect();
        let vals = vals.map_err(|e| LinalgError::Format(format!("row {i}: {e}")))?;
        if vals.len() != cols {
            return Err(LinalgError::Format(format!(
                "row {i} has {} entries, expected {cols}",
                vals.len()
            )));
        }
        entries.extend(vals);
    }
    if entries.len() != rows * cols {
        return Err(LinalgError::Format(format!(
            "expected {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = Mat::from_row_slice(rows, cols, &entries);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn write_csv_file(a: &Mat, path: &std::path::Path) -> Result<(), LinalgError> {
    let f = std::fs::File::create(path)?;
    write_csv(a, std::io::BufWriter::new(f))
}

pub fn read_csv_file(path: &std::path::Path) -> Result<Mat, LinalgError> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f))
}
