//! Quadratic matrix inequality algebra.
//!
//! A QMI in the matrix variable `Z` (size `r x q`) is the constraint
//! `[I; Z]^T Pi [I; Z] >= 0` for a symmetric `Pi` in `S^{q+r}`. This module
//! holds the solution-set machinery: membership tests at three strictness
//! levels, the structural class of `Pi` for which the solution set is
//! non-empty and well-behaved, and a sampler over that set. The sampler is
//! the foundation of the brute-force verification oracle.

use crate::config::NumericConfig;
use crate::linalg::{self, Definiteness, LinalgError, Mat, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QmiError {
    #[error("pi must be square and symmetric over blocks q={q}, r={r}, got {rows}x{cols}")]
    BadShape {
        q: usize,
        r: usize,
        rows: usize,
        cols: usize,
    },
    #[error("Z must be {r}x{q}, got {rows}x{cols}")]
    BadVariableShape {
        q: usize,
        r: usize,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is outside the admissible class (Pi22 <= 0, ker Pi22 in ker Pi12, Schur complement >= 0)")]
    NotInPiClass,
    #[error("no point with the requested section exists: quadratic form {0:.3e} is negative")]
    InfeasibleSection(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A symmetric matrix in `S^{q+r}` together with its block split, defining
/// the QMI `[I; Z]^T Pi [I; Z] >= 0` in an `r x q` variable `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmiSpec {
    q: usize,
    r: usize,
    #[serde(with = "crate::jsonmat")]
    pi: Mat,
}

/// Which solution set of the QMI to test against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipKind {
    /// `[I; Z]^T Pi [I; Z] >= 0`
    NonStrict,
    /// `[I; Z]^T Pi [I; Z] = 0`
    Zero,
    /// `[I; Z]^T Pi [I; Z] > 0`
    Strict,
}

impl QmiSpec {
    pub fn new(q: usize, r: usize, pi: Mat, cfg: &NumericConfig) -> Result<Self, QmiError> {
        if pi.nrows() != q + r || pi.ncols() != q + r {
            return Err(QmiError::BadShape {
                q,
                r,
                rows: pi.nrows(),
                cols: pi.ncols(),
            });
        }
        let pi = linalg::symmetrize(&pi, cfg.sym_tol)?;
        Ok(Self { q, r, pi })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn pi(&self) -> &Mat {
        &self.pi
    }

    pub fn pi11(&self) -> Mat {
        self.pi.view((0, 0), (self.q, self.q)).clone_owned()
    }

    pub fn pi12(&self) -> Mat {
        self.pi.view((0, self.q), (self.q, self.r)).clone_owned()
    }

    pub fn pi21(&self) -> Mat {
        self.pi.view((self.q, 0), (self.r, self.q)).clone_owned()
    }

    pub fn pi22(&self) -> Mat {
        self.pi.view((self.q, self.q), (self.r, self.r)).clone_owned()
    }

    /// Generalized Schur complement with respect to the trailing block.
    pub fn schur_complement(&self, cfg: &NumericConfig) -> Result<Mat, QmiError> {
        Ok(linalg::schur_complement(
            &self.pi,
            self.q,
            cfg.rank_tol,
            cfg.sym_tol,
        )?)
    }
}

/// Noise model: a QMI on the transposed noise sample matrix, with `q = n`
/// (state dimension) and `r = T` (sample count). The admissibility class is
/// part of the contract and checked on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    phi: QmiSpec,
}

impl NoiseModel {
    pub fn new(phi: QmiSpec, cfg: &NumericConfig) -> Result<Self, QmiError> {
        if !in_pi_class(&phi, cfg)? {
            return Err(QmiError::NotInPiClass);
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> &QmiSpec {
        &self.phi
    }

    /// State dimension the model constrains.
    pub fn state_dim(&self) -> usize {
        self.phi.q()
    }

    /// Number of noise samples the model constrains.
    pub fn sample_count(&self) -> usize {
        self.phi.r()
    }

    /// Noiseless model: `Phi11 = 0`, `Phi22 = -I`, forcing `W = 0`.
    pub fn noiseless(n: usize, t: usize, cfg: &NumericConfig) -> Self {
        let mut pi = Mat::zeros(n + t, n + t);
        for i in 0..t {
            pi[(n + i, n + i)] = -1.0;
        }
        let phi = QmiSpec::new(n, t, pi, cfg).expect("well-formed by construction");
        Self::new(phi, cfg).expect("noiseless model is admissible")
    }

    /// Energy-bound model: `W W^T <= Phi11` with `Phi12 = 0`, `Phi22 = -I`.
    pub fn energy_bound(phi11: Mat, t: usize, cfg: &NumericConfig) -> Result<Self, QmiError> {
        let n = phi11.nrows();
        let mut pi = Mat::zeros(n + t, n + t);
        pi.view_mut((0, 0), (n, n)).copy_from(&phi11);
        for i in 0..t {
            pi[(n + i, n + i)] = -1.0;
        }
        Self::new(QmiSpec::new(n, t, pi, cfg)?, cfg)
    }

    /// True iff the given noise matrix `W` (size `n x T`) satisfies the model.
    pub fn admits(&self, w: &Mat, cfg: &NumericConfig) -> Result<bool, QmiError> {
        membership(&self.phi, &w.transpose(), MembershipKind::NonStrict, cfg.qmi_tol, cfg)
    }
}

/// Evaluates `[I; Z]^T Pi [I; Z]` (a symmetric `q x q` matrix).
pub fn qmi_value(spec: &QmiSpec, z: &Mat) -> Result<Mat, QmiError> {
    if z.nrows() != spec.r || z.ncols() != spec.q {
        return Err(QmiError::BadVariableShape {
            q: spec.q,
            r: spec.r,
            rows: z.nrows(),
            cols: z.ncols(),
        });
    }
    linalg::ensure_finite(z)?;
    let mut stacked = Mat::zeros(spec.q + spec.r, spec.q);
    stacked
        .view_mut((0, 0), (spec.q, spec.q))
        .copy_from(&Mat::identity(spec.q, spec.q));
    stacked.view_mut((spec.q, 0), (spec.r, spec.q)).copy_from(z);
    let value = stacked.transpose() * &spec.pi * stacked;
    Ok((&value + value.transpose()) * 0.5)
}

/// Tests membership of `Z` in the non-strict, zero, or strict solution set.
pub fn membership(
    spec: &QmiSpec,
    z: &Mat,
    kind: MembershipKind,
    tol: f64,
    cfg: &NumericConfig,
) -> Result<bool, QmiError> {
    let value = qmi_value(spec, z)?;
    let class = linalg::classify_definiteness(&value, tol, cfg.sym_tol)?;
    Ok(match kind {
        MembershipKind::NonStrict => matches!(
            class,
            Definiteness::PositiveDefinite | Definiteness::PositiveSemidefinite | Definiteness::Zero
        ),
        MembershipKind::Zero => class == Definiteness::Zero,
        // strictness needs a numerical witness margin
        MembershipKind::Strict => {
            let min_eig = linalg::min_eigenvalue(&value, cfg.sym_tol)?;
            min_eig > tol * f64::max(1.0, linalg::spectral_norm(&value))
        }
    })
}

/// Tests the three structural conditions: `Pi22 <= 0`,
/// `ker Pi22 in ker Pi12`, and Schur complement `>= 0`.
pub fn in_pi_class(spec: &QmiSpec, cfg: &NumericConfig) -> Result<bool, QmiError> {
    let pi22 = spec.pi22();
    let class22 = linalg::classify_definiteness(&pi22, cfg.def_tol, cfg.sym_tol)?;
    let neg = matches!(
        class22,
        Definiteness::NegativeDefinite | Definiteness::NegativeSemidefinite | Definiteness::Zero
    );
    if !neg {
        return Ok(false);
    }
    if !linalg::kernel_contained(&pi22, &spec.pi12(), cfg.def_tol, cfg.rank_tol)? {
        return Ok(false);
    }
    let comp = spec.schur_complement(cfg)?;
    let class_comp = linalg::classify_definiteness(&comp, cfg.def_tol, cfg.sym_tol)?;
    Ok(matches!(
        class_comp,
        Definiteness::PositiveDefinite | Definiteness::PositiveSemidefinite | Definiteness::Zero
    ))
}

/// Decomposition data for an admissible QMI: every solution is
/// `Z = Zc + S^{+/2} G Q^{1/2} + Ks H` with `G^T G <= I` and `H` free,
/// where `Zc = -Pi22^+ Pi21`, `S = -Pi22`, `Q` the Schur complement, and
/// `Ks` an orthonormal basis of `ker S`.
struct Decomposition {
    center: Mat,
    s_pinv_sqrt: Mat,
    s_kernel: Mat,
    q_sqrt: Mat,
}

fn decompose(spec: &QmiSpec, cfg: &NumericConfig) -> Result<Decomposition, QmiError> {
    let pi22 = spec.pi22();
    let center = -linalg::pinv(&pi22, cfg.rank_tol)? * spec.pi21();
    let s = linalg::symmetrize(&(-&pi22), cfg.sym_tol)?;
    let (s_pinv_sqrt, s_kernel) = linalg::psd_pinv_sqrt(&s, cfg.rank_tol, cfg.sym_tol)?;
    let q = spec.schur_complement(cfg)?;
    let q_sqrt = linalg::psd_sqrt(&q, cfg.def_tol, cfg.sym_tol)?;
    Ok(Decomposition {
        center,
        s_pinv_sqrt,
        s_kernel,
        q_sqrt,
    })
}

/// Draws `count` matrices from the non-strict solution set of an admissible
/// QMI. The first `ceil(boundary_fraction * count)` samples sit on the QMI
/// boundary (direction matrix with unit spectral norm); the rest are scaled
/// uniformly into the interior. Kernel directions of `-Pi22`, unconstrained
/// by the QMI, get bounded random excursions. Deterministic per seed.
pub fn sample_solutions(
    spec: &QmiSpec,
    count: usize,
    seed: u64,
    boundary_fraction: f64,
    cfg: &NumericConfig,
) -> Result<Vec<Mat>, QmiError> {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    if !in_pi_class(spec, cfg)? {
        return Err(QmiError::NotInPiClass);
    }
    let dec = decompose(spec, cfg)?;
    let (q, r) = (spec.q, spec.r);
    let kdim = dec.s_kernel.ncols();
    let kernel_magnitude = 10.0 * dec.center.norm() + 1.0;
    let boundary_count = ((boundary_fraction.clamp(0.0, 1.0)) * count as f64).ceil() as usize;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let direction = Mat::from_fn(r, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma = linalg::spectral_norm(&direction);
        let scale = if i < boundary_count { 1.0 } else { rng.random::<f64>() };
        let g = if sigma > 0.0 {
            direction * (scale / sigma)
        } else {
            direction
        };
        let mut z = &dec.center + &dec.s_pinv_sqrt * g * &dec.q_sqrt;
        if kdim > 0 {
            let h = Mat::from_fn(kdim, q, |_, _| {
                kernel_magnitude * rng.sample::<f64, _>(StandardNormal)
            });
            z += &dec.s_kernel * h;
        }
        out.push(z);
    }
    Ok(out)
}

/// Draws one strictly interior solution: boundary direction scaled by
/// `radius` (in `[0, 1)`), no kernel excursion. Used by noise generation.
pub fn sample_one_interior(
    spec: &QmiSpec,
    seed: u64,
    radius: f64,
    cfg: &NumericConfig,
) -> Result<Mat, QmiError> {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    if !in_pi_class(spec, cfg)? {
        return Err(QmiError::NotInPiClass);
    }
    let dec = decompose(spec, cfg)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let direction = Mat::from_fn(spec.r, spec.q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma = linalg::spectral_norm(&direction);
    let g = if sigma > 0.0 {
        direction * (radius.clamp(0.0, 1.0) / sigma)
    } else {
        direction
    };
    Ok(&dec.center + &dec.s_pinv_sqrt * g * &dec.q_sqrt)
}

/// Point-to-set lifting: given vectors `x` (nonzero) and `y` with
/// `[x; y]^T Pi [x; y] >= 0`, returns a solution `Z` of the QMI with
/// `Z x = y`.
pub fn lift_point(
    spec: &QmiSpec,
    x: &Vector,
    y: &Vector,
    cfg: &NumericConfig,
) -> Result<Mat, QmiError> {
    if x.len() != spec.q || y.len() != spec.r {
        return Err(QmiError::BadVariableShape {
            q: spec.q,
            r: spec.r,
            rows: y.len(),
            cols: x.len(),
        });
    }
    if !in_pi_class(spec, cfg)? {
        return Err(QmiError::NotInPiClass);
    }
    let dec = decompose(spec, cfg)?;
    let xnorm2 = x.norm_squared();
    if xnorm2 == 0.0 {
        return Err(QmiError::BadVariableShape {
            q: spec.q,
            r: spec.r,
            rows: y.len(),
            cols: 0,
        });
    }

    // Split the defect d = y - Zc x into the range of S and the kernel of S;
    // the kernel part is free, the range part must fit inside the ellipsoid
    // slice Q^{1/2} x.
    let d = y - &dec.center * x;
    let kernel_part = &dec.s_kernel * (dec.s_kernel.transpose() * &d);
    let range_part = &d - &kernel_part;

    let u = &dec.q_sqrt * x;
    let u_norm2 = u.norm_squared();
    // g = S^{1/2} d_range, the coefficient that reproduces the range part
    let pi22 = spec.pi22();
    let s = linalg::symmetrize(&(-&pi22), cfg.sym_tol)?;
    let s_sqrt = linalg::psd_sqrt(&s, cfg.def_tol, cfg.sym_tol)?;
    let g_vec = &s_sqrt * &range_part;
    let g_norm2 = g_vec.norm_squared();

    let scale = f64::max(1.0, x.norm_squared() + y.norm_squared());
    if g_norm2 > u_norm2 * (1.0 + cfg.qmi_tol) + cfg.qmi_tol * scale {
        // violates the quadratic form premise
        return Err(QmiError::InfeasibleSection(u_norm2 - g_norm2));
    }

    let g = if u_norm2 > 0.0 {
        &g_vec * (u.transpose() / u_norm2)
    } else {
        Mat::zeros(spec.r, spec.q)
    };
    let h = dec.s_kernel.transpose() * &d * (x.transpose() / xnorm2);
    let z = &dec.center + &dec.s_pinv_sqrt * g * &dec.q_sqrt + &dec.s_kernel * h;
    Ok(z)
}
