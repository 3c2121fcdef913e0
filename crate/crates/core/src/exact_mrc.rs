//! Noiseless informativity for model reference control.
//!
//! Data `(U_-, X)` are informative when one gain pair `(K, L)` achieves the
//! matching conditions `A + BK = A_m`, `BL = B_m` for every system
//! consistent with the data. In the noiseless case this reduces to linear
//! algebra: solvability of `X_- V_1 = I`, `X_+ V_1 = A_m`, `X_- V_2 = 0`,
//! `X_+ V_2 = B_m`, with gains `K = U_- V_1`, `L = U_- V_2`. An equivalent
//! route expresses the same test as a pair of data-based LMIs.

use crate::config::NumericConfig;
use crate::conic::{self, AffineMatrixExpr, ConicError, SdpProblem, SolveStatus, VarKind};
use crate::linalg::{self, LinalgError, Mat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MrcError {
    #[error("state matrix has {x_cols} columns but input matrix has {u_cols}; need x_cols = u_cols + 1")]
    SampleCountMismatch { x_cols: usize, u_cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("reference model matrix A_m must be Schur, spectral radius {0}")]
    NotSchur(f64),
    #[error("reference input dimension {p} exceeds control dimension {m}")]
    TooManyReferenceInputs { p: usize, m: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// A finite input/state trajectory record: states `X` (n x (T+1)) and
/// inputs `U_-` (m x T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    #[serde(rename = "X", with = "crate::jsonmat")]
    x: Mat,
    #[serde(rename = "U_minus", with = "crate::jsonmat")]
    u_minus: Mat,
}

impl DataSet {
    pub fn new(x: Mat, u_minus: Mat) -> Result<Self, MrcError> {
        linalg::ensure_finite(&x)?;
        linalg::ensure_finite(&u_minus)?;
        if x.ncols() != u_minus.ncols() + 1 {
            return Err(MrcError::SampleCountMismatch {
                x_cols: x.ncols(),
                u_cols: u_minus.ncols(),
            });
        }
        Ok(Self { x, u_minus })
    }

    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u_minus.nrows()
    }

    /// Number of transitions `T`.
    pub fn samples(&self) -> usize {
        self.u_minus.ncols()
    }

    pub fn x(&self) -> &Mat {
        &self.x
    }

    pub fn u_minus(&self) -> &Mat {
        &self.u_minus
    }

    /// Columns `1..T` of `X`.
    pub fn x_plus(&self) -> Mat {
        self.x.columns(1, self.samples()).clone_owned()
    }

    /// Columns `0..T-1` of `X`.
    pub fn x_minus(&self) -> Mat {
        self.x.columns(0, self.samples()).clone_owned()
    }
}

/// Target dynamics `(A_m, B_m)` with `A_m` Schur.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    #[serde(rename = "A_m", with = "crate::jsonmat")]
    a_m: Mat,
    #[serde(rename = "B_m", with = "crate::jsonmat")]
    b_m: Mat,
}

impl ReferenceModel {
    pub fn new(a_m: Mat, b_m: Mat) -> Result<Self, MrcError> {
        linalg::ensure_finite(&a_m)?;
        linalg::ensure_finite(&b_m)?;
        if a_m.nrows() != a_m.ncols() || a_m.nrows() != b_m.nrows() {
            return Err(MrcError::DimensionMismatch(format!(
                "A_m {}x{}, B_m {}x{}",
                a_m.nrows(),
                a_m.ncols(),
                b_m.nrows(),
                b_m.ncols()
            )));
        }
        let rho = linalg::spectral_radius(&a_m)?;
        if rho >= 1.0 {
            return Err(MrcError::NotSchur(rho));
        }
        Ok(Self { a_m, b_m })
    }

    pub fn state_dim(&self) -> usize {
        self.a_m.nrows()
    }

    /// Reference input dimension `p`.
    pub fn reference_dim(&self) -> usize {
        self.b_m.ncols()
    }

    pub fn a_m(&self) -> &Mat {
        &self.a_m
    }

    pub fn b_m(&self) -> &Mat {
        &self.b_m
    }

    /// Checks pairing constraints against a data set (`n` agrees, `p <= m`).
    pub fn check_compatible(&self, data: &DataSet) -> Result<(), MrcError> {
        if self.state_dim() != data.state_dim() {
            return Err(MrcError::DimensionMismatch(format!(
                "model n = {}, data n = {}",
                self.state_dim(),
                data.state_dim()
            )));
        }
        if self.reference_dim() > data.input_dim() {
            return Err(MrcError::TooManyReferenceInputs {
                p: self.reference_dim(),
                m: data.input_dim(),
            });
        }
        Ok(())
    }
}

/// Solution of the exact-matching linear systems, with the extracted gains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactCertificate {
    #[serde(rename = "V1", with = "crate::jsonmat")]
    pub v1: Mat,
    #[serde(rename = "V2", with = "crate::jsonmat")]
    pub v2: Mat,
    #[serde(rename = "K", with = "crate::jsonmat")]
    pub k: Mat,
    #[serde(rename = "L", with = "crate::jsonmat")]
    pub l: Mat,
}

impl ExactCertificate {
    /// Residual of each defining equation at this certificate.
    pub fn residuals(&self, data: &DataSet, model: &ReferenceModel) -> [f64; 6] {
        let x_minus = data.x_minus();
        let x_plus = data.x_plus();
        let n = data.state_dim();
        [
            (&x_minus * &self.v1 - Mat::identity(n, n)).norm(),
            (&x_plus * &self.v1 - model.a_m()).norm(),
            (&x_minus * &self.v2).norm(),
            (&x_plus * &self.v2 - model.b_m()).norm(),
            (data.u_minus() * &self.v1 - &self.k).norm(),
            (data.u_minus() * &self.v2 - &self.l).norm(),
        ]
    }

    /// True iff every defining equation holds within `tol * (1 + |rhs|)`.
    pub fn validate(&self, data: &DataSet, model: &ReferenceModel, tol: f64) -> bool {
        let r = self.residuals(data, model);
        let n = data.state_dim() as f64;
        let scales = [
            1.0 + n.sqrt(),
            1.0 + model.a_m().norm(),
            1.0,
            1.0 + model.b_m().norm(),
            1.0 + self.k.norm(),
            1.0 + self.l.norm(),
        ];
        r.iter().zip(scales).all(|(res, sc)| *res <= tol * sc)
    }
}

/// Outcome of the exact informativity test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ExactOutcome {
    Informative(ExactCertificate),
    NotInformative {
        /// Least-squares residuals of the two stacked systems.
        residual_v1: f64,
        residual_v2: f64,
    },
}

impl ExactOutcome {
    pub fn is_informative(&self) -> bool {
        matches!(self, ExactOutcome::Informative(_))
    }

    pub fn certificate(&self) -> Option<&ExactCertificate> {
        match self {
            ExactOutcome::Informative(c) => Some(c),
            ExactOutcome::NotInformative { .. } => None,
        }
    }
}

/// Decides exact informativity by solving the stacked linear systems
/// `[X_-; X_+] V_1 = [I; A_m]` and `[X_-; X_+] V_2 = [0; B_m]` in the
/// least-squares sense (minimum-norm solutions). Informative iff both
/// residuals fall below `tol * (1 + |rhs|)`.
pub fn check_exact_informativity(
    data: &DataSet,
    model: &ReferenceModel,
    tol: f64,
    cfg: &NumericConfig,
) -> Result<ExactOutcome, MrcError> {
    model.check_compatible(data)?;
    let n = data.state_dim();
    let x_minus = data.x_minus();
    let x_plus = data.x_plus();

    let mut stacked = Mat::zeros(2 * n, data.samples());
    stacked.view_mut((0, 0), (n, data.samples())).copy_from(&x_minus);
    stacked.view_mut((n, 0), (n, data.samples())).copy_from(&x_plus);
    let stacked_pinv = linalg::pinv(&stacked, cfg.rank_tol)?;

    let mut rhs1 = Mat::zeros(2 * n, n);
    rhs1.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));
    rhs1.view_mut((n, 0), (n, n)).copy_from(model.a_m());
    let mut rhs2 = Mat::zeros(2 * n, model.reference_dim());
    rhs2.view_mut((n, 0), (n, model.reference_dim()))
        .copy_from(model.b_m());

    let v1 = &stacked_pinv * &rhs1;
    let v2 = &stacked_pinv * &rhs2;
    let residual_v1 = (&stacked * &v1 - &rhs1).norm();
    let residual_v2 = (&stacked * &v2 - &rhs2).norm();

    if residual_v1 <= tol * (1.0 + rhs1.norm()) && residual_v2 <= tol * (1.0 + rhs2.norm()) {
        let k = data.u_minus() * &v1;
        let l = data.u_minus() * &v2;
        Ok(ExactOutcome::Informative(ExactCertificate { v1, v2, k, l }))
    } else {
        Ok(ExactOutcome::NotInformative {
            residual_v1,
            residual_v2,
        })
    }
}

/// Gains and multipliers returned by the LMI route.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LmiOutcome {
    Informative {
        #[serde(rename = "K", with = "crate::jsonmat")]
        k: Mat,
        #[serde(rename = "L", with = "crate::jsonmat")]
        l: Mat,
        alpha1: f64,
        alpha2: f64,
    },
    NotInformative,
    SolverFailed,
}

impl LmiOutcome {
    pub fn is_informative(&self) -> bool {
        matches!(self, LmiOutcome::Informative { .. })
    }
}

/// Builds the data-block Gram matrix `[X_+; -X_-; -U_-] [X_+; -X_-; -U_-]^T`.
fn data_gram(data: &DataSet) -> Mat {
    let n = data.state_dim();
    let m = data.input_dim();
    let t = data.samples();
    let mut f = Mat::zeros(2 * n + m, t);
    f.view_mut((0, 0), (n, t)).copy_from(&data.x_plus());
    f.view_mut((n, 0), (n, t)).copy_from(&(-data.x_minus()));
    f.view_mut((2 * n, 0), (m, t)).copy_from(&(-data.u_minus()));
    let g = &f * f.transpose();
    (&g + g.transpose()) * 0.5
}

/// Decides exact informativity through the equivalent LMI pair: a gain
/// block bordered by the data Gram matrix, one LMI for `(K, alpha1)` and
/// one for `(L, alpha2)`.
pub fn check_exact_informativity_lmi(
    data: &DataSet,
    model: &ReferenceModel,
    cfg: &NumericConfig,
) -> Result<LmiOutcome, MrcError> {
    model.check_compatible(data)?;
    let n = data.state_dim();
    let m = data.input_dim();
    let p = model.reference_dim();
    let gram = data_gram(data);

    // The multiplier enters through the PSD data Gram, so feasibility is
    // monotone in alpha: solvable for some alpha <= cap iff solvable at the
    // cap itself. Fixing alpha there removes the variable from the solve,
    // keeps constraint norms bounded (a free multiplier can balloon and
    // hide an O(1) violation inside a huge matrix), and leaves violations
    // of uninformative instances at full size. The cap is data-scaled: the
    // certificate construction needs alpha of order |F^+ rhs|^2, where F is
    // the stacked data block.
    let n_t = data.samples();
    let mut f = Mat::zeros(2 * n + m, n_t);
    f.view_mut((0, 0), (n, n_t)).copy_from(&data.x_plus());
    f.view_mut((n, 0), (n, n_t)).copy_from(&(-data.x_minus()));
    f.view_mut((2 * n, 0), (m, n_t)).copy_from(&(-data.u_minus()));
    let f_pinv = linalg::pinv(&f, cfg.rank_tol)?;
    let rhs_scale = 1.0 + model.a_m().norm().max(model.b_m().norm());
    let alpha_fixed = f64::min(
        1e3 * (1.0 + linalg::spectral_norm(&f_pinv).powi(2) * rhs_scale * rhs_scale),
        cfg.alpha_cap,
    );

    let solve_side = |target: &Mat,
                      middle_rows: Mat,
                      gain_cols: usize|
     -> Result<Option<(Mat, f64)>, MrcError> {
        let dim = 2 * n + m + gain_cols;
        let mut problem = SdpProblem::new();
        let gain = problem.add_matrix("gain", m, gain_cols);

        // Gram-scaled form: [alpha G, col4(gain); col4^T, I] >= 0, related
        // to the corner form [G, col4; col4^T, alpha I] by an exact
        // congruence with the same alpha.
        let mut constant = Mat::zeros(dim, dim);
        constant
            .view_mut((0, 0), (2 * n + m, 2 * n + m))
            .copy_from(&(&gram * alpha_fixed));
        constant
            .view_mut((0, 2 * n + m), (n, gain_cols))
            .copy_from(&(-target));
        constant
            .view_mut((2 * n + m, 0), (gain_cols, n))
            .copy_from(&(-target.transpose()));
        constant
            .view_mut((n, 2 * n + m), (n, gain_cols))
            .copy_from(&middle_rows);
        constant
            .view_mut((2 * n + m, n), (gain_cols, n))
            .copy_from(&middle_rows.transpose());
        constant
            .view_mut((2 * n + m, 2 * n + m), (gain_cols, gain_cols))
            .copy_from(&Mat::identity(gain_cols, gain_cols));
        let gain_block = |expr: &mut AffineMatrixExpr| -> Result<(), MrcError> {
            for i in 0..m {
                for j in 0..gain_cols {
                    let mut coeff = Mat::zeros(dim, dim);
                    coeff[(2 * n + i, 2 * n + m + j)] = 1.0;
                    coeff[(2 * n + m + j, 2 * n + i)] = 1.0;
                    expr.add_term(gain.id(i, j), coeff, cfg.sym_tol)?;
                }
            }
            Ok(())
        };

        let mut expr = AffineMatrixExpr::new(constant.clone(), cfg.sym_tol)?;
        gain_block(&mut expr)?;
        problem.add_constraint(expr)?;

        let sol = conic::solve(&problem, cfg.feas_tol, cfg.max_iter)?;
        match sol.status {
            SolveStatus::Feasible | SolveStatus::Optimal => {
                // validate against the corner form with the same multiplier
                let mut corner = constant;
                corner
                    .view_mut((0, 0), (2 * n + m, 2 * n + m))
                    .copy_from(&gram);
                corner
                    .view_mut((2 * n + m, 2 * n + m), (gain_cols, gain_cols))
                    .copy_from(&(Mat::identity(gain_cols, gain_cols) * alpha_fixed));
                let mut corner_expr = AffineMatrixExpr::new(corner, cfg.sym_tol)?;
                gain_block(&mut corner_expr)?;
                let value = corner_expr.evaluate(&sol.values)?;
                let min_eig = linalg::min_eigenvalue(&value, cfg.sym_tol)?;
                if min_eig < -cfg.feas_tol * f64::max(1.0, linalg::spectral_norm(&value)) {
                    return Ok(None);
                }
                Ok(Some((gain.extract(&sol.values), alpha_fixed)))
            }
            SolveStatus::Infeasible => Ok(None),
            SolveStatus::Inaccurate | SolveStatus::Failed => Err(MrcError::Conic(
                ConicError::SolverBreakdown(format!("status {:?}", sol.status)),
            )),
        }
    };

    let k_side = solve_side(model.a_m(), Mat::identity(n, n), n)?;
    let l_side = solve_side(model.b_m(), Mat::zeros(n, p), p)?;
    Ok(match (k_side, l_side) {
        (Some((k, alpha1)), Some((l, alpha2))) => LmiOutcome::Informative { k, l, alpha1, alpha2 },
        _ => LmiOutcome::NotInformative,
    })
}
