//! Central numeric tolerances.
//!
//! Every tolerance used anywhere in the crate lives here, so a run is fully
//! described by its inputs plus one `NumericConfig` value. No operation
//! hard-codes a threshold at its call site.

use serde::{Deserialize, Serialize};

/// Tolerances and iteration limits shared by all modules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericConfig {
    /// Numerical-rank cutoff: singular values below
    /// `rank_tol * sigma_max * max(rows, cols)` are treated as zero.
    pub rank_tol: f64,
    /// Maximum relative asymmetry `|A - A^T| / |A|` tolerated before a
    /// definiteness test rejects its input. Below this, the matrix is
    /// symmetrized as `(A + A^T) / 2` and the residual treated as noise.
    pub sym_tol: f64,
    /// Eigenvalue classification threshold: an eigenvalue counts as zero when
    /// its magnitude is below `def_tol * max(1, sigma_max)`.
    pub def_tol: f64,
    /// Membership tolerance for quadratic matrix inequalities.
    pub qmi_tol: f64,
    /// Residual acceptance for semidefinite feasibility: a point passes when
    /// every constraint's smallest eigenvalue is at least
    /// `-feas_tol * max(1, |constraint|)`.
    pub feas_tol: f64,
    /// Strict-inequality margin scale: strict LMIs enter the solver as
    /// non-strict ones shifted by `margin * max(1, |constant|) * I`.
    pub margin: f64,
    /// Least-squares solvability threshold for the exact informativity test:
    /// a stacked linear system counts as solvable when the residual is below
    /// `lstsq_tol * (1 + |rhs|)`.
    pub lstsq_tol: f64,
    /// Threshold for the `N` not-negative-semidefinite assumption check:
    /// the largest eigenvalue must exceed `npsd_tol * |N|`.
    pub npsd_tol: f64,
    /// Upper bound placed on scalar multiplier variables to keep feasibility
    /// problems bounded; a solution hitting the cap is flagged inaccurate.
    pub alpha_cap: f64,
    /// Interior-point iteration limit.
    pub max_iter: usize,
    /// State norm beyond which a simulation is reported as unstable.
    pub blowup_limit: f64,
    /// Schur-stability pass threshold: spectral radius must be below
    /// `1 - schur_margin`.
    pub schur_margin: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            sym_tol: 1e-6,
            def_tol: 1e-8,
            qmi_tol: 1e-7,
            feas_tol: 1e-7,
            margin: 1e-6,
            lstsq_tol: 1e-8,
            npsd_tol: 1e-9,
            alpha_cap: 1e9,
            max_iter: 200,
            blowup_limit: 1e12,
            schur_margin: 1e-9,
        }
    }
}
