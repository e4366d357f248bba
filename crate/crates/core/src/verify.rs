//! Independent checks of structural properties of the designs: the Schur
//! complement form of the angle FIM, KKT residuals of the point relaxation,
//! the two-eigenvalue structure of its gradient matrix, the channel rank
//! condition behind rank-one relaxations, and optimality of the single-user
//! extended-target covariance.

use crate::array_model::{
    steering, steering_derivative, steering_derivative_norm_sqr, ArrayGeometry,
};
use crate::designs::{PointDuals, SingleUserCovariance};
use crate::metrics::{DesignSolution, PointTraces, Scenario};
use crate::numerics::{
    herm_eig_unchecked, identity, outer, quad_form, real_inner, trace, vector_norm_sqr, CMatrix,
    CVector,
};
use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("tr(AᴴA·R) = {0:e} is not positive")]
    DegenerateDenominator(f64),
}

/// Optimal `t` of the 2×2 LMI computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurCheck {
    /// Largest `t` keeping the LMI PSD, found by bisection on its minimum eigenvalue.
    pub lmi: f64,
    /// `tr(ȦᴴȦR) − |tr(ȦᴴAR)|²/tr(AᴴAR)`.
    pub closed_form: f64,
}

impl SchurCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.lmi - self.closed_form).abs() / self.closed_form.abs().max(f64::MIN_POSITIVE)
    }
}

fn lmi_min_eig(dd: f64, da: Complex64, aa: f64, t: f64) -> f64 {
    // eigenvalues of a 2×2 Hermitian matrix
    let (p, q) = (dd - t, aa);
    let mean = 0.5 * (p + q);
    let radius = (0.25 * (p - q) * (p - q) + da.norm_sqr()).sqrt();
    mean - radius
}

/// Solves `max t s.t. [[tr(ȦᴴȦR) − t, tr(ȦᴴAR)], [·, tr(AᴴAR)]] ⪰ 0` by
/// bisection and compares with the Schur-complement expression.
pub fn check_schur(
    r_x: &CMatrix,
    theta: f64,
    geometry: &ArrayGeometry,
) -> Result<SchurCheck, VerifyError> {
    let traces = PointTraces::new(r_x, theta, geometry);
    let (dd, da, aa) = (traces.dd, traces.da, traces.aa);
    if !(aa > 0.0) {
        return Err(VerifyError::DegenerateDenominator(aa));
    }
    // t = 0 is feasible up to rounding; step down until the LMI holds
    let mut lo = 0.0f64.min(dd);
    while lmi_min_eig(dd, da, aa, lo) < 0.0 {
        lo = 2.0 * lo - dd.abs().max(1.0);
    }
    let mut hi = dd;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lmi_min_eig(dd, da, aa, mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SchurCheck {
        lmi: lo,
        closed_form: traces.schur(),
    })
}

/// The gradient matrix `F` of `tr(Z_P·P)` with respect to each `W_k`, with `φ = 1`:
/// `(‖ḃ‖² + γ‖b‖²)aaᴴ + ‖b‖²ȧȧᴴ + ‖b‖²(βaȧᴴ + β*ȧaᴴ)`.
pub fn f_matrix(beta: Complex64, gamma: f64, theta: f64, geometry: &ArrayGeometry) -> CMatrix {
    let n_rx = geometry.n_rx as f64;
    let db_sq = steering_derivative_norm_sqr(theta, geometry.n_rx);
    let a = steering(theta, geometry.n_tx);
    let da = steering_derivative(theta, geometry.n_tx);
    let cross = outer(&a, &da).scale(n_rx).map(|z| z * beta);
    outer(&a, &a).scale(db_sq + gamma * n_rx)
        + outer(&da, &da).scale(n_rx)
        + &cross
        + cross.adjoint()
}

/// Closed-form nonzero eigenvalues `(λ₁, λ₂)` of `F` when `γ = |β|²`.
pub fn eig_f(beta: Complex64, theta: f64, geometry: &ArrayGeometry) -> (f64, f64) {
    let n_t = geometry.n_tx as f64;
    let n_r = geometry.n_rx as f64;
    let db_sq = steering_derivative_norm_sqr(theta, geometry.n_rx);
    let da_sq = steering_derivative_norm_sqr(theta, geometry.n_tx);
    let b2 = beta.norm_sqr();
    let x = n_t * (db_sq + b2 * n_r);
    let y = n_r * da_sq;
    let root = ((x - y) * (x - y) + 4.0 * b2 * n_t * n_r * n_r * da_sq).sqrt();
    let lambda1 = 0.5 * (x + y + root);
    // λ₁λ₂ = N_tN_r‖ȧ‖²‖ḃ‖² does not depend on β; x + y − root cancels for large |β|
    if lambda1 == 0.0 {
        return (0.0, 0.0);
    }
    (lambda1, n_t * n_r * da_sq * db_sq / lambda1)
}

/// Rank of `D = H·[a, ȧ]` for the users' channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCondition {
    pub full_column_rank: bool,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Singular values of `D` below this times `‖H‖_F·‖[a, ȧ]‖_F` count as zero.
pub const COLUMN_RANK_TOL: f64 = 1e-9;

/// `channels` is `K × N_t` with row `k` equal to `h_kᴴ`.
pub fn check_rank_condition(
    channels: &CMatrix,
    theta: f64,
    geometry: &ArrayGeometry,
) -> RankCondition {
    let a = steering(theta, geometry.n_tx);
    let da = steering_derivative(theta, geometry.n_tx);
    let a_bar = CMatrix::from_columns(&[a, da]);
    let d = channels * &a_bar;
    // threshold relative to ‖H‖·‖Ā‖ so that an engineered null D reads as rank 0
    let floor = COLUMN_RANK_TOL * channels.norm() * a_bar.norm();
    let singular_values: Vec<f64> = d
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    let rank = singular_values.iter().filter(|&&s| s > floor).count();
    RankCondition {
        full_column_rank: rank == 2,
        rank,
        singular_values,
    }
}

/// KKT residuals of a point-target design against the relaxation's multipliers.
/// Every residual is relative and nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `|φ − 1|`: stationarity in the Schur variable `t`.
    pub stationarity_residual: f64,
    /// Per constraint: `μ_k·(SINR slack_k)` for every user, then `μ_T·(P − tr R)`,
    /// then `tr(Z_kW_k)` for every user, then `tr(Z_P·P)`; all divided by `t`.
    pub complementarity_residuals: Vec<f64>,
    /// `λ_min(Z_k)/max(1, μ_T)` for every user, then `λ_min(Z_P)/max(1, γ)`.
    pub dual_feasibility: Vec<f64>,
    /// Most negative multiplier relative to `max(1, μ_T)` (0 if none).
    pub multiplier_sign_violation: f64,
    /// `|γ − |β|²|/max(1, γ)`.
    pub singularity_residual: f64,
    /// Users with `μ_k > ACTIVE_TOL·max(1, μ_T)`.
    pub active_set: Vec<usize>,
    pub notes: Vec<String>,
}

impl KktReport {
    /// Largest residual across all checks, with dual infeasibility counted as its negative part.
    pub fn max_residual(&self) -> f64 {
        let comp = self
            .complementarity_residuals
            .iter()
            .fold(0.0f64, |m, v| m.max(*v));
        let dual = self.dual_feasibility.iter().fold(0.0f64, |m, v| m.max(-v));
        self.stationarity_residual
            .max(comp)
            .max(dual)
            .max(self.multiplier_sign_violation)
            .max(self.singularity_residual)
    }
}

/// `Z_k = μ_T·I − F̄ − μ_k(1 + Γ_k)Q_k` with `F̄ = F − Σ_i μ_iΓ_iQ_i`.
pub fn dual_slack(duals: &PointDuals, k: usize, theta: f64, scenario: &Scenario) -> CMatrix {
    let f = f_matrix(duals.beta, duals.gamma, theta, &scenario.geometry);
    let mut f_bar = f;
    for (i, &mu) in duals.sinr.iter().enumerate() {
        f_bar -= scenario
            .channel_gram(i)
            .scale(mu * scenario.sinr_thresholds[i]);
    }
    let n = scenario.geometry.n_tx;
    identity(n).scale(duals.power)
        - f_bar
        - scenario
            .channel_gram(k)
            .scale(duals.sinr[k] * (1.0 + scenario.sinr_thresholds[k]))
}

/// Checks a point design (its rank-one covariances `w_kw_kᴴ`) against the
/// multipliers reported by the relaxation.
pub fn check_kkt_point(
    solution: &DesignSolution,
    duals: &PointDuals,
    scenario: &Scenario,
) -> KktReport {
    let theta = scenario.point_target().map(|t| t.theta).unwrap_or(0.0);
    let users = scenario.users();
    let ws: Vec<CMatrix> = (0..users)
        .map(|k| {
            let w = solution.beamformer(k);
            outer(&w, &w)
        })
        .collect();
    let r = &solution.covariance;
    let traces = PointTraces::new(r, theta, &scenario.geometry);
    let t = traces.schur();
    let mu_scale = duals.power.max(1.0);
    let mut notes = vec![];

    let mut complementarity = Vec::with_capacity(2 * users + 2);
    for k in 0..users {
        let q = scenario.channel_gram(k);
        let own = real_inner(&q, &ws[k]);
        let total = real_inner(&q, r);
        let gamma = scenario.sinr_thresholds[k];
        let slack = (1.0 + gamma) * own - gamma * total - gamma * scenario.noise_comm;
        complementarity.push((duals.sinr[k] * slack).abs() / t);
    }
    complementarity.push((duals.power * (scenario.power_budget - trace(r).re)).abs() / t);
    let mut dual_feasibility = Vec::with_capacity(users + 1);
    for k in 0..users {
        let z = dual_slack(duals, k, theta, scenario);
        complementarity.push(real_inner(&z, &ws[k]).abs() / t);
        dual_feasibility.push(herm_eig_unchecked(&z).min() / mu_scale);
    }
    let lmi = Matrix2::new(
        Complex64::new(traces.dd - t, 0.0),
        traces.da,
        traces.da.conj(),
        Complex64::new(traces.aa, 0.0),
    );
    let z_p = Matrix2::new(
        Complex64::new(duals.phi, 0.0),
        duals.beta,
        duals.beta.conj(),
        Complex64::new(duals.gamma, 0.0),
    );
    complementarity.push((z_p * lmi).trace().re.abs() / t);
    let z_p_dyn = CMatrix::from_iterator(2, 2, z_p.iter().copied());
    dual_feasibility.push(herm_eig_unchecked(&z_p_dyn).min() / duals.gamma.max(1.0));

    let most_negative = duals
        .sinr
        .iter()
        .chain([&duals.power])
        .fold(0.0f64, |m, &v| m.min(v));
    let active_set = duals.active_users();
    if active_set.len() == 1 && users > 1 {
        notes.push("a single active SINR constraint".into());
    }
    KktReport {
        stationarity_residual: (duals.phi - 1.0).abs(),
        complementarity_residuals: complementarity,
        dual_feasibility,
        multiplier_sign_violation: -most_negative / mu_scale,
        singularity_residual: (duals.gamma - duals.beta.norm_sqr()).abs() / duals.gamma.max(1.0),
        active_set,
        notes,
    }
}

/// Multipliers of the single-user relaxation rebuilt from a rank-one optimum
/// `R = wwᴴ`: `(φ, β, γ)` from the null vector of the singular LMI, then
/// `(μ_T, μ_1)` from `Z_1·w = 0` in least squares.
pub fn reconstruct_single_user_duals(w: &CVector, scenario: &Scenario) -> PointDuals {
    let theta = scenario.point_target().map(|t| t.theta).unwrap_or(0.0);
    let r = outer(w, w);
    let traces = PointTraces::new(&r, theta, &scenario.geometry);
    let beta = -traces.da / traces.aa;
    let gamma = beta.norm_sqr();
    let f = f_matrix(beta, gamma, theta, &scenario.geometry);
    let h = scenario.channel(0);
    // μ_T·w − μ_1·(hᴴw)·h = F·w
    let hw = h.dotc(w);
    let rhs = &f * w;
    let n = w.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 2);
    let mut b = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        let col2 = -(hw * h[i]);
        a[(i, 0)] = w[i].re;
        a[(n + i, 0)] = w[i].im;
        a[(i, 1)] = col2.re;
        a[(n + i, 1)] = col2.im;
        b[i] = rhs[i].re;
        b[n + i] = rhs[i].im;
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .expect("SVD with both factors");
    PointDuals {
        sinr: vec![sol[1]],
        power: sol[0],
        phi: 1.0,
        beta,
        gamma,
    }
}

/// Optimality residuals of a single-user extended-target covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleUserExtendedReport {
    /// Spread of `λ_ii⁻²` over `i ≥ 2`, relative to their mean `μ`.
    pub stationarity_residual: f64,
    /// `|Σλ_ii − P|/P`.
    pub power_residual: f64,
    /// `ω·(Γσ²/‖h‖² − λ₁₁)` relative to `μ·λ₁₁`.
    pub complementarity_residual: f64,
    /// Relative violation of `λ₁₁‖h‖² ≥ Γσ²` (0 if satisfied).
    pub sinr_violation: f64,
    /// Multiplier of the SINR constraint, `ω = μ − λ₁₁⁻²`.
    pub omega: f64,
    /// Multiplier of the power constraint.
    pub mu: f64,
    /// Off-diagonal mass of `UᴴR_XU` relative to `‖R_X‖`.
    pub basis_residual: f64,
}

impl SingleUserExtendedReport {
    pub fn max_residual(&self) -> f64 {
        let dual = (-self.omega / self.mu).max(0.0);
        self.stationarity_residual
            .max(self.power_residual)
            .max(self.complementarity_residual)
            .max(self.sinr_violation)
            .max(self.basis_residual)
            .max(dual)
    }
}

pub fn check_single_user_extended(
    h: &CVector,
    gamma: f64,
    power: f64,
    noise: f64,
    sol: &SingleUserCovariance,
) -> SingleUserExtendedReport {
    let lambdas = &sol.eigenvalues;
    let rest: Vec<f64> = lambdas[1..].iter().map(|l| l.powi(-2)).collect();
    let mu = rest.iter().sum::<f64>() / rest.len() as f64;
    let spread = rest.iter().fold(0.0f64, |m, v| m.max((v - mu).abs())) / mu;
    let lead = lambdas[0];
    let omega = mu - lead.powi(-2);
    let floor = gamma * noise / vector_norm_sqr(h);
    let total: f64 = lambdas.iter().sum();
    let d = sol.basis.adjoint() * &sol.covariance * &sol.basis;
    let mut off = 0.0;
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            let want = if i == j { lambdas[i] } else { 0.0 };
            off += (d[(i, j)] - Complex64::new(want, 0.0)).norm_sqr();
        }
    }
    SingleUserExtendedReport {
        stationarity_residual: spread,
        power_residual: (total - power).abs() / power,
        complementarity_residual: (omega * (floor - lead)).abs() / (mu * lead),
        sinr_violation: ((floor - lead) / floor).max(0.0),
        omega,
        mu,
        basis_residual: off.sqrt() / sol.covariance.norm(),
    }
}

/// `hᴴRh` for every user; shared by report printers.
pub fn received_powers(r_x: &CMatrix, scenario: &Scenario) -> Vec<f64> {
    (0..scenario.users())
        .map(|k| quad_form(r_x, &scenario.channel(k)).re)
        .collect()
}
