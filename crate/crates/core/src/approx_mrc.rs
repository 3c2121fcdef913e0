//! Approximate model reference control from noisy data.
//!
//! With noise in the data, exact matching is generally impossible; instead
//! the closed loop is required to stay within ellipsoidal distance bounds
//! of the reference model, weighted by diagonal matrices:
//!
//! ```text
//! D^A - (A + BK - A_m) Gamma^A (A + BK - A_m)^T >= 0
//! D^B - (B L  - B_m) Gamma^B (B L  - B_m)^T >= 0
//! ```
//!
//! Informativity for approximate matching reduces to two linear matrix
//! inequalities in `(K, alpha1)` and `(L, alpha2)`, built from the data,
//! the noise model, and the distance matrices. The distance matrices can
//! also be treated as decision variables and their traces minimized.

use crate::config::NumericConfig;
use crate::conic::{
    self, AffineMatrixExpr, ConicError, MatrixVar, SdpProblem, SolveStatus, SymmetricVar, VarId,
    VarKind,
};
use crate::exact_mrc::{DataSet, MrcError, ReferenceModel};
use crate::linalg::{self, Definiteness, Mat};
use crate::qmi::{NoiseModel, QmiSpec};
use serde::{Deserialize, Serialize};

/// Distance matrices and diagonal weights defining approximate matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingTolerance {
    #[serde(rename = "D_A", with = "crate::jsonmat")]
    d_a: Mat,
    #[serde(rename = "D_B", with = "crate::jsonmat")]
    d_b: Mat,
    #[serde(rename = "Gamma_A", with = "crate::jsonmat")]
    gamma_a: Mat,
    #[serde(rename = "Gamma_B", with = "crate::jsonmat")]
    gamma_b: Mat,
}

fn check_diagonal_pd(m: &Mat, name: &str) -> Result<(), MrcError> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 {
                return Err(MrcError::DimensionMismatch(format!(
                    "{name} must be diagonal"
                )));
            }
        }
        if m[(i, i)] <= 0.0 {
            return Err(MrcError::DimensionMismatch(format!(
                "{name} must have strictly positive diagonal"
            )));
        }
    }
    Ok(())
}

impl MatchingTolerance {
    pub fn new(
        d_a: Mat,
        d_b: Mat,
        gamma_a: Mat,
        gamma_b: Mat,
        cfg: &NumericConfig,
    ) -> Result<Self, MrcError> {
        for (m, name) in [(&d_a, "D_A"), (&d_b, "D_B")] {
            let class = linalg::classify_definiteness(m, cfg.def_tol, cfg.sym_tol)?;
            if !matches!(
                class,
                Definiteness::PositiveDefinite
                    | Definiteness::PositiveSemidefinite
                    | Definiteness::Zero
            ) {
                return Err(MrcError::DimensionMismatch(format!(
                    "{name} must be positive semidefinite, got {class:?}"
                )));
            }
        }
        check_diagonal_pd(&gamma_a, "Gamma_A")?;
        check_diagonal_pd(&gamma_b, "Gamma_B")?;
        if d_a.nrows() != gamma_a.nrows() || d_b.nrows() != d_a.nrows() {
            return Err(MrcError::DimensionMismatch(
                "distance matrices must be n x n with Gamma_A n x n".into(),
            ));
        }
        Ok(Self {
            d_a,
            d_b,
            gamma_a,
            gamma_b,
        })
    }

    /// Exact matching: zero distances, identity weights.
    pub fn exact(n: usize, p: usize) -> Self {
        Self {
            d_a: Mat::zeros(n, n),
            d_b: Mat::zeros(n, n),
            gamma_a: Mat::identity(n, n),
            gamma_b: Mat::identity(p, p),
        }
    }

    pub fn d_a(&self) -> &Mat {
        &self.d_a
    }

    pub fn d_b(&self) -> &Mat {
        &self.d_b
    }

    pub fn gamma_a(&self) -> &Mat {
        &self.gamma_a
    }

    pub fn gamma_b(&self) -> &Mat {
        &self.gamma_b
    }

    pub fn is_exact(&self) -> bool {
        self.d_a.iter().all(|&x| x == 0.0) && self.d_b.iter().all(|&x| x == 0.0)
    }
}

/// Entrywise inverse of a diagonal weight matrix.
fn diag_inverse(gamma: &Mat) -> Mat {
    let mut inv = Mat::zeros(gamma.nrows(), gamma.ncols());
    for i in 0..gamma.nrows() {
        inv[(i, i)] = 1.0 / gamma[(i, i)];
    }
    inv
}

/// `[I, X_+; 0, -X_-; 0, -U_-]`, optionally padded with `pad` zero rows.
fn data_factor(data: &DataSet, pad: usize) -> Mat {
    let n = data.state_dim();
    let m = data.input_dim();
    let t = data.samples();
    let mut f = Mat::zeros(2 * n + m + pad, n + t);
    f.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));
    f.view_mut((0, n), (n, t)).copy_from(&data.x_plus());
    f.view_mut((n, n), (n, t)).copy_from(&(-data.x_minus()));
    f.view_mut((2 * n, n), (m, t)).copy_from(&(-data.u_minus()));
    f
}

/// The data-and-noise matrix `N = [I, X_+; 0, -X_-; 0, -U_-] Phi [...]^T`
/// in `S^{2n+m}`; the QMI `[I; A^T; B^T]^T N [I; A^T; B^T] >= 0` describes
/// exactly the systems consistent with the data under the noise model.
pub fn build_n(data: &DataSet, noise: &NoiseModel) -> Result<Mat, MrcError> {
    if noise.state_dim() != data.state_dim() || noise.sample_count() != data.samples() {
        return Err(MrcError::DimensionMismatch(format!(
            "noise model is {}x{}, data needs {}x{}",
            noise.state_dim(),
            noise.sample_count(),
            data.state_dim(),
            data.samples()
        )));
    }
    let f = data_factor(data, 0);
    let n_mat = &f * noise.phi().pi() * f.transpose();
    Ok((&n_mat + n_mat.transpose()) * 0.5)
}

/// `build_n` wrapped as a QMI over `(A^T; B^T)`.
pub fn consistency_qmi(
    data: &DataSet,
    noise: &NoiseModel,
    cfg: &NumericConfig,
) -> Result<QmiSpec, MrcError> {
    let n = data.state_dim();
    let m = data.input_dim();
    Ok(QmiSpec::new(n, n + m, build_n(data, noise)?, cfg).map_err(|e| {
        MrcError::DimensionMismatch(format!("consistency QMI: {e}"))
    })?)
}

/// Distance matrix for the gain `K`: the QMI
/// `[I; A^T; B^T]^T M^K [I; A^T; B^T] >= 0` holds iff `(A, B)` satisfies
/// the `D^A` matching bound at `K`.
pub fn build_mk(
    k: &Mat,
    model: &ReferenceModel,
    tolm: &MatchingTolerance,
) -> Result<Mat, MrcError> {
    let n = model.state_dim();
    let m = k.nrows();
    if k.ncols() != n {
        return Err(MrcError::DimensionMismatch(format!(
            "K must be m x {n}, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    let a_m = model.a_m();
    let ga = tolm.gamma_a();
    let mut mk = Mat::zeros(2 * n + m, 2 * n + m);
    mk.view_mut((0, 0), (n, n))
        .copy_from(&(tolm.d_a() - a_m * ga * a_m.transpose()));
    mk.view_mut((0, n), (n, n)).copy_from(&(a_m * ga));
    mk.view_mut((0, 2 * n), (n, m))
        .copy_from(&(a_m * ga * k.transpose()));
    mk.view_mut((n, 0), (n, n)).copy_from(&(ga * a_m.transpose()));
    mk.view_mut((n, n), (n, n)).copy_from(&(-ga));
    mk.view_mut((n, 2 * n), (n, m))
        .copy_from(&(-(ga * k.transpose())));
    mk.view_mut((2 * n, 0), (m, n))
        .copy_from(&(k * ga * a_m.transpose()));
    mk.view_mut((2 * n, n), (m, n)).copy_from(&(-(k * ga)));
    mk.view_mut((2 * n, 2 * n), (m, m))
        .copy_from(&(-(k * ga * k.transpose())));
    Ok((&mk + mk.transpose()) * 0.5)
}

/// Distance matrix for the gain `L` (middle block row and column are zero).
pub fn build_ml(
    l: &Mat,
    model: &ReferenceModel,
    tolm: &MatchingTolerance,
) -> Result<Mat, MrcError> {
    let n = model.state_dim();
    let p = model.reference_dim();
    let m = l.nrows();
    if l.ncols() != p {
        return Err(MrcError::DimensionMismatch(format!(
            "L must be m x {p}, got {}x{}",
            l.nrows(),
            l.ncols()
        )));
    }
    let b_m = model.b_m();
    let gb = tolm.gamma_b();
    let mut ml = Mat::zeros(2 * n + m, 2 * n + m);
    ml.view_mut((0, 0), (n, n))
        .copy_from(&(tolm.d_b() - b_m * gb * b_m.transpose()));
    ml.view_mut((0, 2 * n), (n, m))
        .copy_from(&(b_m * gb * l.transpose()));
    ml.view_mut((2 * n, 0), (m, n))
        .copy_from(&(l * gb * b_m.transpose()));
    ml.view_mut((2 * n, 2 * n), (m, m))
        .copy_from(&(-(l * gb * l.transpose())));
    Ok((&ml + ml.transpose()) * 0.5)
}

/// Which of the theorem's alternative assumptions covers the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssumptionStatus {
    /// `N` is not negative semidefinite.
    DataMatrixNotNegSemidefinite,
    /// Exact matching demanded (`D^A = D^B = 0`).
    ExactMatching,
    /// Neither holds: the conditions are only sufficient, a failed
    /// synthesis proves nothing.
    OnlySufficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Informative,
    NotInformative,
    /// Synthesis failed but the theorem's assumptions do not hold, so
    /// failure is inconclusive.
    Unknown,
    SolverFailed,
}

/// Gains, multipliers, and distances of a successful synthesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisPoint {
    #[serde(rename = "K", with = "crate::jsonmat")]
    pub k: Mat,
    #[serde(rename = "L", with = "crate::jsonmat")]
    pub l: Mat,
    pub alpha1: f64,
    pub alpha2: f64,
    #[serde(rename = "D_A", with = "crate::jsonmat")]
    pub d_a: Mat,
    #[serde(rename = "D_B", with = "crate::jsonmat")]
    pub d_b: Mat,
    /// Smallest eigenvalue of each solved matrix inequality at this point.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub verdict: Verdict,
    pub assumption: AssumptionStatus,
    /// Set when a multiplier reached its cap or the solver reported reduced
    /// accuracy; the point (if any) still passed the eigenvalue check.
    pub inaccurate: bool,
    pub point: Option<SynthesisPoint>,
}

impl SynthesisResult {
    pub fn is_informative(&self) -> bool {
        self.verdict == Verdict::Informative
    }
}

/// How the distance matrices enter the synthesis.
#[derive(Debug, Clone)]
pub enum DistanceSpec<'a> {
    /// Solve the matrix inequalities at the given distances.
    Fixed(&'a MatchingTolerance),
    /// Promote the distances to decision variables and minimize
    /// `tr(D^A) + tr(D^B)` under the given weights.
    Minimize { gamma_a: Mat, gamma_b: Mat },
}

impl DistanceSpec<'_> {
    fn gamma_a(&self) -> &Mat {
        match self {
            DistanceSpec::Fixed(t) => t.gamma_a(),
            DistanceSpec::Minimize { gamma_a, .. } => gamma_a,
        }
    }

    fn gamma_b(&self) -> &Mat {
        match self {
            DistanceSpec::Fixed(t) => t.gamma_b(),
            DistanceSpec::Minimize { gamma_b, .. } => gamma_b,
        }
    }
}

/// Distance matrices as they appear in the assembled problem.
pub(crate) enum DistanceBlock {
    Fixed(Mat),
    Variable(SymmetricVar),
}

impl DistanceBlock {
    pub(crate) fn extract(&self, values: &[f64]) -> Mat {
        match self {
            DistanceBlock::Fixed(m) => m.clone(),
            DistanceBlock::Variable(v) => v.extract(values),
        }
    }
}

/// The assembled pair of theorem LMIs plus variable handles; the stability
/// layer appends its extra constraint before solving.
pub(crate) struct TheoremLmis {
    pub problem: SdpProblem,
    pub k_var: MatrixVar,
    pub l_var: MatrixVar,
    pub alpha1: VarId,
    pub alpha2: VarId,
    pub d_a: DistanceBlock,
    pub d_b: DistanceBlock,
    /// Indices of the two main inequalities among the problem constraints.
    pub tk_index: usize,
    pub tl_index: usize,
}

pub(crate) fn build_theorem_lmis(
    data: &DataSet,
    noise: &NoiseModel,
    model: &ReferenceModel,
    spec: &DistanceSpec,
    cfg: &NumericConfig,
) -> Result<TheoremLmis, MrcError> {
    model.check_compatible(data)?;
    if noise.state_dim() != data.state_dim() || noise.sample_count() != data.samples() {
        return Err(MrcError::DimensionMismatch(
            "noise model does not match data dimensions".into(),
        ));
    }
    let n = data.state_dim();
    let m = data.input_dim();
    let p = model.reference_dim();
    let mut problem = SdpProblem::new();
    let k_var = problem.add_matrix("K", m, n);
    let l_var = problem.add_matrix("L", m, p);
    let alpha1 = problem.add_scalar("alpha1", VarKind::Nonnegative);
    let alpha2 = problem.add_scalar("alpha2", VarKind::Nonnegative);

    // one bordered inequality: [D, 0, 0, -target; 0 0 0 mid; 0 0 0 gain;
    // (...)^T, inv(Gamma)] - alpha * data_factor Phi data_factor^T >= 0
    let mut side = |gain: &MatrixVar,
                    alpha: VarId,
                    target: &Mat,
                    middle: &Mat,
                    gamma: &Mat,
                    distance: &DistanceBlock|
     -> Result<usize, MrcError> {
        let cols = target.ncols();
        let dim = 2 * n + m + cols;
        let mut constant = Mat::zeros(dim, dim);
        match distance {
            DistanceBlock::Fixed(d) => {
                constant.view_mut((0, 0), (n, n)).copy_from(d);
            }
            DistanceBlock::Variable(_) => {}
        }
        constant.view_mut((0, 2 * n + m), (n, cols)).copy_from(&(-target));
        constant
            .view_mut((2 * n + m, 0), (cols, n))
            .copy_from(&(-target.transpose()));
        constant.view_mut((n, 2 * n + m), (n, cols)).copy_from(middle);
        constant
            .view_mut((2 * n + m, n), (cols, n))
            .copy_from(&middle.transpose());
        constant
            .view_mut((2 * n + m, 2 * n + m), (cols, cols))
            .copy_from(&diag_inverse(gamma));

        let mut expr = AffineMatrixExpr::new(constant, cfg.sym_tol)
            .map_err(ConicError::from)?;
        for i in 0..m {
            for j in 0..cols {
                let mut coeff = Mat::zeros(dim, dim);
                coeff[(2 * n + i, 2 * n + m + j)] = 1.0;
                coeff[(2 * n + m + j, 2 * n + i)] = 1.0;
                expr.add_term(gain.id(i, j), coeff, cfg.sym_tol)?;
            }
        }
        if let DistanceBlock::Variable(d) = distance {
            for i in 0..n {
                for j in i..n {
                    let mut coeff = Mat::zeros(dim, dim);
                    coeff[(i, j)] = 1.0;
                    coeff[(j, i)] = 1.0;
                    if i == j {
                        coeff[(i, j)] = 1.0;
                    }
                    expr.add_term(d.id(i, j), coeff, cfg.sym_tol)?;
                }
            }
        }
        let f_ext = data_factor(data, cols);
        let n_ext = &f_ext * noise.phi().pi() * f_ext.transpose();
        expr.add_term(alpha, -n_ext, cfg.sym_tol)?;
        problem.add_constraint(expr)?;
        Ok(problem.constraints().len() - 1)
    };

    let (d_a, d_b);
    match spec {
        DistanceSpec::Fixed(tolm) => {
            d_a = DistanceBlock::Fixed(tolm.d_a().clone());
            d_b = DistanceBlock::Fixed(tolm.d_b().clone());
        }
        DistanceSpec::Minimize { .. } => {
            let va = problem.add_symmetric("D_A", n);
            let vb = problem.add_symmetric("D_B", n);
            d_a = DistanceBlock::Variable(va);
            d_b = DistanceBlock::Variable(vb);
        }
    }

    let tk_index = side(
        &k_var,
        alpha1,
        model.a_m(),
        &Mat::identity(n, n),
        spec.gamma_a(),
        &d_a,
    )?;
    let tl_index = side(
        &l_var,
        alpha2,
        model.b_m(),
        &Mat::zeros(n, p),
        spec.gamma_b(),
        &d_b,
    )?;

    // multiplier caps
    for alpha in [alpha1, alpha2] {
        let mut cap = AffineMatrixExpr::new(
            Mat::from_row_slice(1, 1, &[cfg.alpha_cap]),
            cfg.sym_tol,
        )
        .map_err(ConicError::from)?;
        cap.add_term(alpha, -Mat::identity(1, 1), cfg.sym_tol)?;
        problem.add_constraint(cap).map_err(MrcError::from)?;
    }

    // distance variables must be positive semidefinite, and their traces
    // form the objective
    if let DistanceSpec::Minimize { .. } = spec {
        let mut objective = Vec::new();
        for d in [&d_a, &d_b] {
            if let DistanceBlock::Variable(v) = d {
                let dim = v.dim();
                let mut expr = AffineMatrixExpr::new(Mat::zeros(dim, dim), cfg.sym_tol)
                    .map_err(ConicError::from)?;
                for i in 0..dim {
                    for j in i..dim {
                        let mut coeff = Mat::zeros(dim, dim);
                        coeff[(i, j)] = 1.0;
                        coeff[(j, i)] = 1.0;
                        if i == j {
                            coeff[(i, j)] = 1.0;
                        }
                        expr.add_term(v.id(i, j), coeff, cfg.sym_tol)?;
                    }
                }
                problem.add_constraint(expr)?;
                objective.extend(v.diagonal_ids().into_iter().map(|id| (id, 1.0)));
            }
        }
        problem.set_objective(objective);
    } else {
        // pure feasibility leaves the multipliers free to drift along
        // recession directions; pin them down
        problem.set_objective(vec![(alpha1, 1.0), (alpha2, 1.0)]);
    }

    Ok(TheoremLmis {
        problem,
        k_var,
        l_var,
        alpha1,
        alpha2,
        d_a,
        d_b,
        tk_index,
        tl_index,
    })
}

/// Assumption bookkeeping for the instance: which theorem branch applies.
pub fn assumption_status(
    data: &DataSet,
    noise: &NoiseModel,
    exact_distances: bool,
    cfg: &NumericConfig,
) -> Result<AssumptionStatus, MrcError> {
    let n_mat = build_n(data, noise)?;
    let (vals, _) = linalg::sym_eigen(&n_mat, cfg.sym_tol)?;
    let max_eig = vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let not_nsd = max_eig > cfg.npsd_tol * linalg::spectral_norm(&n_mat);
    if not_nsd {
        Ok(AssumptionStatus::DataMatrixNotNegSemidefinite)
    } else if exact_distances {
        Ok(AssumptionStatus::ExactMatching)
    } else {
        Ok(AssumptionStatus::OnlySufficient)
    }
}

pub(crate) fn solve_theorem_lmis(
    lmis: &TheoremLmis,
    assumption: AssumptionStatus,
    cfg: &NumericConfig,
) -> Result<SynthesisResult, MrcError> {
    let sol = conic::solve(&lmis.problem, cfg.feas_tol, cfg.max_iter)?;
    let capped = sol.values.len() >= 2
        && (sol.value(lmis.alpha1) >= 0.99 * cfg.alpha_cap
            || sol.value(lmis.alpha2) >= 0.99 * cfg.alpha_cap);
    match sol.status {
        SolveStatus::Feasible | SolveStatus::Optimal => {
            if capped {
                // a multiplier at its cap inflates the constraint norm and
                // can mask a real violation; refuse to certify
                return Ok(SynthesisResult {
                    verdict: Verdict::SolverFailed,
                    assumption,
                    inaccurate: true,
                    point: None,
                });
            }
            let report = conic::check_point(&lmis.problem, &sol.values, cfg)?;
            if !report.passes(cfg.feas_tol) {
                return Ok(SynthesisResult {
                    verdict: Verdict::SolverFailed,
                    assumption,
                    inaccurate: true,
                    point: None,
                });
            }
            Ok(SynthesisResult {
                verdict: Verdict::Informative,
                assumption,
                inaccurate: sol.status == SolveStatus::Feasible && lmis.problem.has_objective(),
                point: Some(SynthesisPoint {
                    k: lmis.k_var.extract(&sol.values),
                    l: lmis.l_var.extract(&sol.values),
                    alpha1: sol.value(lmis.alpha1),
                    alpha2: sol.value(lmis.alpha2),
                    d_a: lmis.d_a.extract(&sol.values),
                    d_b: lmis.d_b.extract(&sol.values),
                    residuals: report.per_constraint,
                }),
            })
        }
        SolveStatus::Infeasible => Ok(SynthesisResult {
            verdict: if assumption == AssumptionStatus::OnlySufficient {
                Verdict::Unknown
            } else {
                Verdict::NotInformative
            },
            assumption,
            inaccurate: false,
            point: None,
        }),
        SolveStatus::Inaccurate | SolveStatus::Failed => Ok(SynthesisResult {
            verdict: Verdict::SolverFailed,
            assumption,
            inaccurate: true,
            point: None,
        }),
    }
}

/// Solves the two theorem LMIs at fixed distance matrices.
pub fn synthesize_approx(
    data: &DataSet,
    noise: &NoiseModel,
    model: &ReferenceModel,
    tolm: &MatchingTolerance,
    cfg: &NumericConfig,
) -> Result<SynthesisResult, MrcError> {
    let assumption = assumption_status(data, noise, tolm.is_exact(), cfg)?;
    let lmis = build_theorem_lmis(data, noise, model, &DistanceSpec::Fixed(tolm), cfg)?;
    solve_theorem_lmis(&lmis, assumption, cfg)
}

/// Promotes the distance matrices to decision variables and minimizes
/// `tr(D^A) + tr(D^B)` subject to the theorem LMIs.
pub fn minimize_distance(
    data: &DataSet,
    noise: &NoiseModel,
    model: &ReferenceModel,
    gamma_a: Mat,
    gamma_b: Mat,
    cfg: &NumericConfig,
) -> Result<SynthesisResult, MrcError> {
    check_diagonal_pd(&gamma_a, "Gamma_A")?;
    check_diagonal_pd(&gamma_b, "Gamma_B")?;
    let assumption = assumption_status(data, noise, false, cfg)?;
    let spec = DistanceSpec::Minimize { gamma_a, gamma_b };
    let lmis = build_theorem_lmis(data, noise, model, &spec, cfg)?;
    solve_theorem_lmis(&lmis, assumption, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> NumericConfig {
        NumericConfig::default()
    }

    /// Scalar data set with an energy-bounded noise model: the square-wave
    /// state/input record whose consistent set contains the system (1, 1).
    pub(crate) fn square_wave_data() -> DataSet {
        DataSet::new(
            Mat::from_row_slice(1, 10, &[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0]),
            Mat::from_row_slice(1, 9, &[1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0]),
        )
        .unwrap()
    }

    pub(crate) fn square_wave_noise() -> NoiseModel {
        NoiseModel::energy_bound(Mat::from_row_slice(1, 1, &[0.1]), 9, &cfg()).unwrap()
    }

    #[test]
    fn n_matrix_square_wave_values() {
        let c = cfg();
        let data = square_wave_data();
        let noise = square_wave_noise();
        let n_mat = build_n(&data, &noise).unwrap();
        let expect = Mat::from_row_slice(
            3,
            3,
            &[-4.9, 0.0, 5.0, 0.0, -4.0, 4.0, 5.0, 4.0, -9.0],
        );
        assert_abs_diff_eq!(n_mat, expect, epsilon = 1e-12);
        // Schur complement with respect to the trailing block recovers the
        // noise energy bound
        let spec = consistency_qmi(&data, &noise, &c).unwrap();
        let comp = spec.schur_complement(&c).unwrap();
        assert_abs_diff_eq!(comp[(0, 0)], 0.1, epsilon = 1e-12);
        // the system (1, 1) is consistent with the data
        let z = Mat::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(crate::qmi::membership(&spec, &z, crate::qmi::MembershipKind::NonStrict, c.qmi_tol, &c).unwrap());
    }

    #[test]
    fn n_matrix_zero_data_is_phi11_block() {
        let c = cfg();
        let data = DataSet::new(Mat::zeros(2, 4), Mat::zeros(1, 3)).unwrap();
        let noise =
            NoiseModel::energy_bound(Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.7]), 3, &c)
                .unwrap();
        let n_mat = build_n(&data, &noise).unwrap();
        let mut expect = Mat::zeros(5, 5);
        expect[(0, 0)] = 0.3;
        expect[(1, 1)] = 0.7;
        assert_abs_diff_eq!(n_mat, expect, epsilon = 1e-14);
    }

    #[test]
    fn noiseless_n_membership_is_exact_consistency() {
        let c = cfg();
        let data = crate::exact_mrc::tests::family_data();
        let noise = NoiseModel::noiseless(2, 3, &c);
        let spec = consistency_qmi(&data, &noise, &c).unwrap();
        // a member of the solution family: a = 1, b = 0
        let a = Mat::from_row_slice(2, 2, &[0.5, -0.5, 0.0, 1.0]);
        let b = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        let mut z = Mat::zeros(4, 2);
        z.view_mut((0, 0), (2, 2)).copy_from(&a.transpose());
        z.view_mut((2, 0), (2, 2)).copy_from(&b.transpose());
        assert!(
            crate::qmi::membership(&spec, &z, crate::qmi::MembershipKind::NonStrict, c.qmi_tol, &c)
                .unwrap()
        );
        // perturbing A breaks consistency
        let mut z_bad = z.clone();
        z_bad[(0, 0)] += 0.05;
        assert!(!crate::qmi::membership(
            &spec,
            &z_bad,
            crate::qmi::MembershipKind::NonStrict,
            c.qmi_tol,
            &c
        )
        .unwrap());
    }

    #[test]
    fn mk_structure_at_zero_gain() {
        let c = cfg();
        let model = ReferenceModel::new(Mat::zeros(2, 2), Mat::zeros(2, 1)).unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(2, 2, &[0.4, 0.0, 0.0, 0.9]),
            Mat::zeros(2, 2),
            Mat::identity(2, 2),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        let k = Mat::zeros(3, 2);
        let mk = build_mk(&k, &model, &tolm).unwrap();
        let mut expect = Mat::zeros(7, 7);
        expect.view_mut((0, 0), (2, 2)).copy_from(tolm.d_a());
        expect
            .view_mut((2, 2), (2, 2))
            .copy_from(&(-Mat::identity(2, 2)));
        assert_abs_diff_eq!(mk, expect, epsilon = 1e-14);
    }

    #[test]
    fn mk_scalar_worked_values() {
        let c = cfg();
        // scalar instance: A_m = 0.9, D_A = 0.2, Gamma_A = 1, K = 0.1
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(1, 1, &[0.2]),
            Mat::from_row_slice(1, 1, &[0.1]),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        let k = Mat::from_row_slice(1, 1, &[0.1]);
        let mk = build_mk(&k, &model, &tolm).unwrap();
        let expect = Mat::from_row_slice(
            3,
            3,
            &[
                0.2 - 0.81, 0.9, 0.09, //
                0.9, -1.0, -0.1, //
                0.09, -0.1, -0.01,
            ],
        );
        assert_abs_diff_eq!(mk, expect, epsilon = 1e-14);
    }

    #[test]
    fn matched_system_attains_distance_bound_exactly() {
        let c = cfg();
        // A + BK = A_m exactly: the QMI value collapses to D^A
        let a = Mat::from_row_slice(2, 2, &[0.1, 0.3, -0.2, 0.5]);
        let b = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.2, 0.8]);
        let k = Mat::from_row_slice(2, 2, &[0.05, -0.3, 0.2, -0.45]);
        let a_m = &a + &b * &k;
        let model = ReferenceModel::new(a_m, b.clone()).unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.5]),
            Mat::zeros(2, 2),
            Mat::from_diagonal(&crate::Vector::from_vec(vec![2.0, 0.5])),
            Mat::identity(2, 2),
            &c,
        )
        .unwrap();
        let mk = build_mk(&k, &model, &tolm).unwrap();
        let spec = QmiSpec::new(2, 4, mk, &c).unwrap();
        let mut z = Mat::zeros(4, 2);
        z.view_mut((0, 0), (2, 2)).copy_from(&a.transpose());
        z.view_mut((2, 0), (2, 2)).copy_from(&b.transpose());
        let value = crate::qmi::qmi_value(&spec, &z).unwrap();
        assert_abs_diff_eq!(value, tolm.d_a().clone(), epsilon = 1e-12);
    }

    #[test]
    fn ml_middle_block_is_zero() {
        let c = cfg();
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(1, 1, &[0.2]),
            Mat::from_row_slice(1, 1, &[0.1]),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        let l = Mat::from_row_slice(1, 1, &[1.0]);
        let ml = build_ml(&l, &model, &tolm).unwrap();
        let expect = Mat::from_row_slice(
            3,
            3,
            &[
                0.1 - 1.0, 0.0, 1.0, //
                0.0, 0.0, 0.0, //
                1.0, 0.0, -1.0,
            ],
        );
        assert_abs_diff_eq!(ml, expect, epsilon = 1e-14);
    }

    #[test]
    fn square_wave_synthesis_is_informative() {
        let c = cfg();
        let data = square_wave_data();
        let noise = square_wave_noise();
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(1, 1, &[0.2]),
            Mat::from_row_slice(1, 1, &[0.1]),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        let result = synthesize_approx(&data, &noise, &model, &tolm, &c).unwrap();
        assert_eq!(result.verdict, Verdict::Informative);
        assert_eq!(
            result.assumption,
            AssumptionStatus::DataMatrixNotNegSemidefinite
        );
        let point = result.point.unwrap();
        assert!(point.alpha1 > 0.0);
        assert!(point.alpha2 > 0.0);
    }

    #[test]
    fn known_feasible_point_passes_check() {
        // (K, alpha1) = (0.1, 1) and (L, alpha2) = (1, 0.5) satisfy the two
        // inequalities for the square-wave instance
        let c = cfg();
        let data = square_wave_data();
        let noise = square_wave_noise();
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(1, 1, &[0.2]),
            Mat::from_row_slice(1, 1, &[0.1]),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        let lmis =
            build_theorem_lmis(&data, &noise, &model, &DistanceSpec::Fixed(&tolm), &c).unwrap();
        let mut values = vec![0.0; lmis.problem.num_vars()];
        values[lmis.k_var.id(0, 0).0] = 0.1;
        values[lmis.l_var.id(0, 0).0] = 1.0;
        values[lmis.alpha1.index()] = 1.0;
        values[lmis.alpha2.index()] = 0.5;
        let report = conic::check_point(&lmis.problem, &values, &c).unwrap();
        assert!(
            report.passes(c.feas_tol),
            "residuals {:?}",
            report.per_constraint
        );

        // alpha1 = 0 must violate: the middle identity block forces it
        values[lmis.alpha1.index()] = 0.0;
        let report = conic::check_point(&lmis.problem, &values, &c).unwrap();
        assert!(report.per_constraint[lmis.tk_index] < -1e-3);
    }

    #[test]
    fn schur_lift_agrees_with_compact_form() {
        // the bordered inequality holds at a point iff M^K - alpha1 N >= 0
        let c = cfg();
        let data = square_wave_data();
        let noise = square_wave_noise();
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let tolm = MatchingTolerance::new(
            Mat::from_row_slice(1, 1, &[0.2]),
            Mat::from_row_slice(1, 1, &[0.1]),
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        let n_mat = build_n(&data, &noise).unwrap();
        let lmis =
            build_theorem_lmis(&data, &noise, &model, &DistanceSpec::Fixed(&tolm), &c).unwrap();
        for (k_val, alpha_val) in [(0.1, 1.0), (0.3, 0.8), (0.1, 2.0), (-0.2, 1.0)] {
            let mut values = vec![0.0; lmis.problem.num_vars()];
            values[lmis.k_var.id(0, 0).0] = k_val;
            values[lmis.l_var.id(0, 0).0] = 1.0;
            values[lmis.alpha1.index()] = alpha_val;
            values[lmis.alpha2.index()] = 0.5;
            let report = conic::check_point(&lmis.problem, &values, &c).unwrap();
            let lifted_psd = report.per_constraint[lmis.tk_index] >= -c.feas_tol;

            let k = Mat::from_row_slice(1, 1, &[k_val]);
            let mk = build_mk(&k, &model, &tolm).unwrap();
            let compact = mk - &n_mat * alpha_val;
            let compact_psd = linalg::min_eigenvalue(&compact, c.sym_tol).unwrap()
                >= -c.feas_tol * f64::max(1.0, linalg::spectral_norm(&compact));
            assert_eq!(lifted_psd, compact_psd, "K = {k_val}, alpha = {alpha_val}");
        }
    }

    #[test]
    fn exact_matching_under_genuine_noise_is_rejected() {
        let c = cfg();
        let data = square_wave_data();
        let noise = square_wave_noise();
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let tolm = MatchingTolerance::exact(1, 1);
        let result = synthesize_approx(&data, &noise, &model, &tolm, &c).unwrap();
        assert_eq!(result.verdict, Verdict::NotInformative);
    }

    #[test]
    fn minimize_distance_square_wave_bounded_by_fixed_point() {
        let c = cfg();
        let data = square_wave_data();
        let noise = square_wave_noise();
        let model = ReferenceModel::new(
            Mat::from_row_slice(1, 1, &[0.9]),
            Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let result = minimize_distance(
            &data,
            &noise,
            &model,
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            &c,
        )
        .unwrap();
        assert_eq!(result.verdict, Verdict::Informative);
        let point = result.point.unwrap();
        // the fixed distances (0.2, 0.1) are feasible, so the optimum is
        // at most their trace
        assert!(point.d_a[(0, 0)] <= 0.2 + 1e-6, "D_A = {}", point.d_a[(0, 0)]);
        assert!(point.d_b[(0, 0)] <= 0.1 + 1e-6, "D_B = {}", point.d_b[(0, 0)]);
        assert!(point.d_a[(0, 0)] >= -1e-9);
        assert!(point.d_b[(0, 0)] >= -1e-9);
    }

    #[test]
    fn noiseless_reduction_matches_exact_verdicts() {
        let c = cfg();
        let data = crate::exact_mrc::tests::family_data();
        let noise = NoiseModel::noiseless(2, 3, &c);
        let model = crate::exact_mrc::tests::family_model();
        let tolm = MatchingTolerance::exact(2, 2);
        let result = synthesize_approx(&data, &noise, &model, &tolm, &c).unwrap();
        assert_eq!(result.verdict, Verdict::Informative, "{result:?}");

        // unreachable target input matrix flips the verdict
        let bad_model = ReferenceModel::new(
            Mat::from_row_slice(2, 2, &[-0.5, 0.5, 0.0, -0.5]),
            Mat::identity(2, 2),
        )
        .unwrap();
        let result = synthesize_approx(&data, &noise, &bad_model, &tolm, &c).unwrap();
        assert_eq!(result.verdict, Verdict::NotInformative, "{result:?}");
    }
}
