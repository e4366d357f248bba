//! Transmit designs: closed-form single-user beamformers, semidefinite
//! relaxations for multiple users, and rank-one extraction.
//!
//! Point-target designs maximize the Schur complement of the angle FIM, which
//! minimizes CRB(θ). Extended-target designs minimize `tr(R_X⁻¹)` through the
//! epigraph `[[T, I], [I, R_X]] ⪰ 0`.

use crate::array_model::{
    steering, steering_derivative, steering_derivative_norm_sqr, PointTarget,
};
use crate::metrics::{
    crb_extended, crb_point_theta, sinr_from_covariance, sinr_with, DesignMethod, DesignSolution,
    Diagnostics, MetricsError, Scenario, ScenarioError, SolverSummary,
};
use crate::numerics::{
    herm_eig_unchecked, hermitian_part, hpd_inverse, identity, numeric_rank, outer, psd_sqrt,
    quad_form, second_eigen_ratio, trace, vector_norm_sqr, CMatrix, CVector, NumericsError,
};
use crate::sdp::{
    self, Coef, InfeasibilityCertificate, LinExpr, SdpError, SdpOptions, SdpProblem, SdpSolution,
    SdpStatus, Sense,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative eigenvalue ratio below which a covariance counts as rank-one.
pub const RANK_TOL: f64 = 1e-6;

/// Multipliers above `ACTIVE_TOL·max(1, μ_T)` mark an active SINR constraint.
pub const ACTIVE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone)]
pub enum DesignError {
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("this designer needs {0}")]
    WrongTarget(&'static str),
    #[error("infeasible: {reason}")]
    Infeasible {
        reason: String,
        certificate: Option<InfeasibilityCertificate>,
    },
    #[error("user channel is parallel to the target steering vector")]
    DegenerateChannel,
    #[error("relaxation returned covariances of ranks {ranks:?}")]
    RankExcess {
        ranks: Vec<usize>,
        relaxation: Box<PointRelaxation>,
    },
    #[error("user {user} receives no useful power from its relaxed covariance")]
    ZeroUsefulPower { user: usize },
    #[error("probing covariance is not PSD (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    ResidualNotPsd { min_eig: f64, max_eig: f64 },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Solver settings used by all relaxation-based designers.
pub fn design_sdp_options() -> SdpOptions {
    SdpOptions {
        tol: 1e-8,
        max_iter: 200,
    }
}

fn summarize(sol: &SdpSolution) -> SolverSummary {
    SolverSummary {
        status: format!("{:?}", sol.status),
        iterations: sol.iterations,
        primal_residual: sol.residuals.primal,
        dual_residual: sol.residuals.dual,
        gap: sol.residuals.gap,
        primal_objective: sol.residuals.primal_objective,
        dual_objective: sol.residuals.dual_objective,
    }
}

fn check_status(sol: &SdpSolution) -> Result<(), DesignError> {
    match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => Ok(()),
        SdpStatus::Infeasible => Err(DesignError::Infeasible {
            reason: "SINR and power constraints admit no covariance".into(),
            certificate: sol.certificate.clone(),
        }),
        other => Err(DesignError::Solver(format!(
            "{other:?} after {} iterations (residual {:.2e})",
            sol.iterations,
            sol.residuals.max()
        ))),
    }
}

fn require_point(scenario: &Scenario) -> Result<PointTarget, DesignError> {
    scenario
        .point_target()
        .copied()
        .ok_or(DesignError::WrongTarget("a point target"))
}

fn require_single(scenario: &Scenario) -> Result<(), DesignError> {
    if scenario.users() != 1 {
        return Err(DesignError::Solver(format!(
            "closed form covers one user, scenario has {}",
            scenario.users()
        )));
    }
    Ok(())
}

fn single_user_feasible(
    h: &CVector,
    gamma: f64,
    power: f64,
    noise: f64,
) -> Result<(), DesignError> {
    let gain = vector_norm_sqr(h);
    if gamma * noise > power * gain {
        return Err(DesignError::Infeasible {
            reason: format!(
                "threshold needs {:.4e} mW at the user, full power delivers {:.4e}",
                gamma * noise,
                power * gain
            ),
            certificate: None,
        });
    }
    Ok(())
}

fn unit_phase(z: Complex64) -> Complex64 {
    if z.norm() > 0.0 {
        z / z.norm()
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Single-user point-target beamformer maximizing `|aᴴw|²` under
/// `|hᴴw|² ≥ Γσ²` and `‖w‖² ≤ P`.
pub fn point_single_user_beamformer(
    h: &CVector,
    theta: f64,
    gamma: f64,
    power: f64,
    noise: f64,
) -> Result<CVector, DesignError> {
    let n = h.len();
    single_user_feasible(h, gamma, power, noise)?;
    let a = steering(theta, n);
    let a_norm = a.norm();
    let beam = a.scale(power.sqrt() / a_norm);
    if power * h.dotc(&a).norm_sqr() > n as f64 * gamma * noise {
        return Ok(beam);
    }
    let h_sq = vector_norm_sqr(h);
    let u1 = h.unscale(h_sq.sqrt());
    let proj = u1.dotc(&a);
    let residual = &a - u1.map(|z| z * proj);
    if residual.norm() <= 1e-10 * a_norm {
        // span{a, h} collapses; steering at full power meets the threshold only at the boundary
        if h.dotc(&beam).norm_sqr() >= gamma * noise * (1.0 - 1e-12) {
            return Ok(beam);
        }
        return Err(DesignError::DegenerateChannel);
    }
    let a_u = residual.unscale(residual.norm());
    let served = gamma * noise / h_sq;
    let x1 = unit_phase(proj) * served.sqrt();
    let x2 = unit_phase(a_u.dotc(&a)) * (power - served).max(0.0).sqrt();
    Ok(u1.map(|z| z * x1) + a_u.map(|z| z * x2))
}

/// Closed-form design for one user and a point target.
pub fn design_point_single(scenario: &Scenario) -> Result<DesignSolution, DesignError> {
    scenario.validate()?;
    require_single(scenario)?;
    let target = require_point(scenario)?;
    let h = scenario.channel(0);
    let w = point_single_user_beamformer(
        &h,
        target.theta,
        scenario.sinr_thresholds[0],
        scenario.power_budget,
        scenario.noise_comm,
    )?;
    let w_mat = CMatrix::from_columns(&[w.clone()]);
    let covariance = outer(&w, &w);
    let objective = crb_point_theta(&covariance, target.theta, target.alpha, scenario)?;
    let sinr = sinr_with(&w_mat, None, 0, scenario)?;
    Ok(DesignSolution {
        comm_beamformers: w_mat,
        aux_beamformer: None,
        covariance,
        achieved_sinrs: vec![sinr],
        objective,
        diagnostics: Diagnostics::closed_form(DesignMethod::PointClosedForm),
    })
}

/// Optimal single-user covariance for an extended target.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleUserCovariance {
    pub covariance: CMatrix,
    /// Rank-one signal covariance of the user, `λ₁₁·u₁u₁ᴴ`.
    pub comm_covariance: CMatrix,
    /// Eigenvalues of `R_X` in the basis below (user direction first).
    pub eigenvalues: Vec<f64>,
    /// Unitary basis whose first column is `h/‖h‖`.
    pub basis: CMatrix,
    /// True when the threshold is low enough for the isotropic optimum.
    pub isotropic: bool,
}

/// Unitary matrix whose first column is `u` (unit norm).
fn basis_with_first(u: &CVector) -> CMatrix {
    let eig = herm_eig_unchecked(&outer(u, u));
    let n = u.len();
    let mut basis = CMatrix::zeros(n, n);
    basis.set_column(0, u);
    // eigenvectors of uuᴴ other than the top one span the complement
    for j in 0..n - 1 {
        basis.set_column(j + 1, &eig.vectors.column(j).into_owned());
    }
    basis
}

/// Minimizer of `tr(R_X⁻¹)` for one user under its SINR threshold and the power budget.
pub fn extended_single_user_covariance(
    h: &CVector,
    gamma: f64,
    power: f64,
    noise: f64,
) -> Result<SingleUserCovariance, DesignError> {
    let n = h.len();
    single_user_feasible(h, gamma, power, noise)?;
    let h_sq = vector_norm_sqr(h);
    let u1 = h.unscale(h_sq.sqrt());
    let q = outer(&u1, &u1);
    let isotropic = gamma < power * h_sq / (n as f64 * noise);
    let (lead, rest) = if isotropic {
        (power / n as f64, power / n as f64)
    } else {
        let lead = gamma * noise / h_sq;
        (
            lead,
            (power * h_sq - gamma * noise) / (h_sq * (n - 1) as f64),
        )
    };
    let covariance = if isotropic {
        identity(n).scale(lead)
    } else {
        identity(n).scale(rest) + q.scale(lead - rest)
    };
    let mut eigenvalues = vec![rest; n];
    eigenvalues[0] = lead;
    Ok(SingleUserCovariance {
        covariance,
        comm_covariance: q.scale(lead),
        eigenvalues,
        basis: basis_with_first(&u1),
        isotropic,
    })
}

/// Closed-form design for one user and an extended target. The target response
/// itself does not enter the design.
pub fn design_extended_single(scenario: &Scenario) -> Result<DesignSolution, DesignError> {
    scenario.validate()?;
    require_single(scenario)?;
    let h = scenario.channel(0);
    let opt = extended_single_user_covariance(
        &h,
        scenario.sinr_thresholds[0],
        scenario.power_budget,
        scenario.noise_comm,
    )?;
    let useful = quad_form(&opt.comm_covariance, &h).re;
    let w = (&opt.comm_covariance * &h).unscale(useful.sqrt());
    let w_mat = CMatrix::from_columns(&[w]);
    let aux = residual_sqrt(&(&opt.covariance - &opt.comm_covariance))?;
    let sinr = sinr_with(&w_mat, Some(&aux), 0, scenario)?;
    let objective = crb_extended(&opt.covariance, scenario)?;
    Ok(DesignSolution {
        comm_beamformers: w_mat,
        aux_beamformer: Some(aux),
        covariance: opt.covariance,
        achieved_sinrs: vec![sinr],
        objective,
        diagnostics: Diagnostics::closed_form(DesignMethod::ExtendedClosedForm),
    })
}

fn residual_sqrt(m: &CMatrix) -> Result<CMatrix, DesignError> {
    psd_sqrt(&hermitian_part(m)).map_err(|e| match e {
        NumericsError::NotPsd { min_eig, max_eig } => {
            DesignError::ResidualNotPsd { min_eig, max_eig }
        }
        other => DesignError::Numerics(other),
    })
}

/// Multipliers of the point-target relaxation, in the units of the original
/// problem (powers in mW, LMI entries in FIM units).
///
/// The dual matrix of the 2×2 LMI is `[[φ, β], [β*, γ]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDuals {
    /// `μ_k ≥ 0` of each SINR constraint.
    pub sinr: Vec<f64>,
    /// `μ_T ≥ 0` of the power constraint.
    pub power: f64,
    pub phi: f64,
    pub beta: Complex64,
    pub gamma: f64,
}

impl PointDuals {
    /// Indices of SINR constraints with `μ_k > ACTIVE_TOL·max(1, μ_T)`.
    pub fn active_users(&self) -> Vec<usize> {
        let tol = ACTIVE_TOL * self.power.max(1.0);
        self.sinr
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > tol)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Solved point-target relaxation before any rank-one extraction.
#[derive(Debug, Clone)]
pub struct PointRelaxation {
    /// Relaxed `W_k`, mW.
    pub covariances: Vec<CMatrix>,
    /// Optimal Schur value `t`.
    pub schur_value: f64,
    pub duals: PointDuals,
    /// Dual slack of each `W_k`, rescaled to the original problem.
    pub dual_slacks: Vec<CMatrix>,
    pub solver: SolverSummary,
}

impl PointRelaxation {
    pub fn covariance(&self) -> CMatrix {
        sum_of(&self.covariances)
    }
}

fn sum_of(ms: &[CMatrix]) -> CMatrix {
    let n = ms[0].nrows();
    ms.iter().fold(CMatrix::zeros(n, n), |acc, m| acc + m)
}

/// Matrices of the point-target LMI entries as linear functionals of `R_X`:
/// `tr(ȦᴴȦR) = ⟨F_dd, R⟩`, `tr(ȦᴴAR) = tr(M·R)`, `tr(AᴴAR) = ⟨F_aa, R⟩`.
pub(crate) struct LmiFunctionals {
    pub f_dd: CMatrix,
    pub m: CMatrix,
    pub f_aa: CMatrix,
}

impl LmiFunctionals {
    pub fn new(theta: f64, scenario: &Scenario) -> Self {
        let g = &scenario.geometry;
        let n_rx = g.n_rx as f64;
        let a = steering(theta, g.n_tx);
        let da = steering_derivative(theta, g.n_tx);
        let db_sq = steering_derivative_norm_sqr(theta, g.n_rx);
        Self {
            f_dd: outer(&a, &a).scale(db_sq) + outer(&da, &da).scale(n_rx),
            m: outer(&da, &a).scale(n_rx),
            f_aa: outer(&a, &a).scale(n_rx),
        }
    }
}

/// SINR row of user `k` in the form `tr(Q_kW_k) − Γ_kΣ_{i≠k}tr(Q_kW_i) ≥ Γ_kσ²`
/// over the first `blocks` blocks.
fn sinr_row(scenario: &Scenario, k: usize, blocks: usize, q: &CMatrix) -> LinExpr {
    let gamma = scenario.sinr_thresholds[k];
    let mut expr = LinExpr::new();
    for i in 0..blocks {
        let c = if i == k { 1.0 } else { -gamma };
        expr = expr.block(i, Coef::Dense(q.scale(c)));
    }
    expr
}

struct ScaledPointProblem {
    sdp: SdpProblem,
    /// LMI rows are divided by this.
    lmi_scale: f64,
    /// Powers are divided by this.
    power_scale: f64,
}

fn build_point_problem(scenario: &Scenario, target: &PointTarget) -> ScaledPointProblem {
    let n = scenario.geometry.n_tx;
    let users = scenario.users();
    let f = LmiFunctionals::new(target.theta, scenario);
    let lmi_scale = trace(&f.f_dd).re;
    let power_scale = scenario.power_budget;
    let herm_m = hermitian_part(&f.m);
    let herm_im = hermitian_part(&f.m.map(|z| z * Complex64::new(0.0, -1.0)));

    let mut p = SdpProblem::new();
    let w: Vec<usize> = (0..users)
        .map(|k| p.add_block(format!("W{}", k + 1), n))
        .collect();
    let s = p.add_block("S", 2);
    // the Schur complement of a PSD FIM is nonnegative, so t can live in a 1×1 block
    let t = p.add_block("t", 1);
    p.set_objective(LinExpr::new().block(t, Coef::scaled_identity(0, 1, -1.0)));

    let coupling = |entry: Coef, m: &CMatrix| {
        let mut e = LinExpr::new().block(s, entry);
        for &b in &w {
            e = e.block(b, Coef::Dense(m.scale(-1.0 / lmi_scale)));
        }
        e
    };
    p.add_constraint(
        coupling(Coef::re_entry(0, 0), &f.f_dd).block(t, Coef::re_entry(0, 0)),
        Sense::Eq,
        0.0,
    );
    p.add_constraint(coupling(Coef::re_entry(0, 1), &herm_m), Sense::Eq, 0.0);
    p.add_constraint(coupling(Coef::im_entry(0, 1), &herm_im), Sense::Eq, 0.0);
    p.add_constraint(coupling(Coef::re_entry(1, 1), &f.f_aa), Sense::Eq, 0.0);
    for k in 0..users {
        let q = scenario.channel_gram(k);
        let rhs = scenario.sinr_thresholds[k] * scenario.noise_comm / power_scale;
        p.add_constraint(sinr_row(scenario, k, users, &q), Sense::Ge, rhs);
    }
    let mut power = LinExpr::new();
    for &b in &w {
        power = power.block(b, Coef::scaled_identity(0, n, 1.0));
    }
    p.add_constraint(power, Sense::Le, 1.0);
    ScaledPointProblem {
        sdp: p,
        lmi_scale,
        power_scale,
    }
}

/// Solves the relaxation `max t` over `W_k ⪰ 0` with the Schur-complement LMI,
/// per-user SINR rows and the power budget.
pub fn solve_point_relaxation(
    scenario: &Scenario,
    opts: &SdpOptions,
) -> Result<PointRelaxation, DesignError> {
    scenario.validate()?;
    let target = require_point(scenario)?;
    let users = scenario.users();
    let built = build_point_problem(scenario, &target);
    let sol = sdp::solve(&built.sdp, opts)?;
    check_status(&sol)?;
    let (c, s) = (built.lmi_scale, built.power_scale);
    let covariances: Vec<CMatrix> = sol.primal_blocks[..users]
        .iter()
        .map(|w| hermitian_part(w).scale(s))
        .collect();
    let z_p = &sol.dual_slacks[users];
    let y = &sol.dual_multipliers;
    let duals = PointDuals {
        sinr: y[4..4 + users].iter().map(|v| v.max(0.0) * c).collect(),
        power: (-y[4 + users]).max(0.0) * c,
        phi: z_p[(0, 0)].re,
        beta: z_p[(0, 1)],
        gamma: z_p[(1, 1)].re,
    };
    Ok(PointRelaxation {
        covariances,
        schur_value: sol.primal_blocks[users + 1][(0, 0)].re * c * s,
        duals,
        dual_slacks: sol.dual_slacks[..users]
            .iter()
            .map(|z| z.scale(c))
            .collect(),
        solver: summarize(&sol),
    })
}

fn principal_beamformer(w: &CMatrix) -> CVector {
    let eig = herm_eig_unchecked(w);
    eig.principal_vector().scale(eig.max().max(0.0).sqrt())
}

/// Moves the part of an active user's covariance that its channel cannot see
/// onto an inactive user, leaving `R_X`, the objective and all SINR constraints
/// intact. Applies only when exactly one SINR multiplier is active and that
/// user alone has excess rank. Returns whether the repair was applied.
fn consolidate_single_active(
    ws: &mut [CMatrix],
    duals: &PointDuals,
    ranks: &[usize],
    scenario: &Scenario,
) -> bool {
    let active = duals.active_users();
    let excess: Vec<usize> = (0..ranks.len()).filter(|&k| ranks[k] > 1).collect();
    if active.len() != 1 || excess != active || ws.len() < 2 {
        return false;
    }
    let k = active[0];
    let h = scenario.channel(k);
    let wh = &ws[k] * &h;
    let useful = h.dotc(&wh).re;
    if useful <= 0.0 {
        return false;
    }
    let kept = outer(&wh, &wh).unscale(useful);
    let moved = hermitian_part(&(&ws[k] - &kept));
    let direction = principal_beamformer(&moved);
    // receiver: the inactive user whose covariance is most aligned with the moved part
    let receiver = (0..ws.len())
        .filter(|&j| j != k)
        .max_by(|&i, &j| {
            let score = |x: usize| quad_form(&ws[x], &direction).re / trace(&ws[x]).re.max(1e-300);
            score(i).total_cmp(&score(j))
        })
        .expect("at least two users");
    ws[k] = kept;
    ws[receiver] = &ws[receiver] + moved;
    true
}

/// Multi-user point-target design via the relaxation; beamformers are the
/// principal components of the (rank-one) relaxed covariances.
pub fn design_point_multi(scenario: &Scenario) -> Result<DesignSolution, DesignError> {
    let relaxation = solve_point_relaxation(scenario, &design_sdp_options())?;
    let target = require_point(scenario)?;
    let ranks: Vec<usize> = relaxation
        .covariances
        .iter()
        .map(|w| numeric_rank(w, RANK_TOL))
        .collect();
    let eigen_ratios: Vec<f64> = relaxation
        .covariances
        .iter()
        .map(second_eigen_ratio)
        .collect();
    let mut ws = relaxation.covariances.clone();
    let mut notes = vec![];
    if ranks.iter().any(|&r| r > 1) {
        let repaired = consolidate_single_active(&mut ws, &relaxation.duals, &ranks, scenario);
        let after: Vec<usize> = ws.iter().map(|w| numeric_rank(w, RANK_TOL)).collect();
        if !repaired || after.iter().any(|&r| r > 1) {
            return Err(DesignError::RankExcess {
                ranks,
                relaxation: Box::new(relaxation),
            });
        }
        notes.push("excess rank of the single active user moved to another user".to_string());
    }
    let beams: Vec<CVector> = ws.iter().map(principal_beamformer).collect();
    let w_mat = CMatrix::from_columns(&beams);
    let covariance = &w_mat * w_mat.adjoint();
    let achieved_sinrs = (0..scenario.users())
        .map(|k| sinr_with(&w_mat, None, k, scenario))
        .collect::<Result<Vec<_>, _>>()?;
    let objective = crb_point_theta(&covariance, target.theta, target.alpha, scenario)?;
    Ok(DesignSolution {
        comm_beamformers: w_mat,
        aux_beamformer: None,
        covariance,
        achieved_sinrs,
        objective,
        diagnostics: Diagnostics {
            method: DesignMethod::PointSdr,
            solver: Some(relaxation.solver.clone()),
            ranks,
            eigen_ratios,
            point_duals: Some(relaxation.duals),
            notes,
        },
    })
}

/// Solved extended-target relaxation.
#[derive(Debug, Clone)]
pub struct ExtendedRelaxation {
    /// Relaxed `W̄_k` of the users, mW.
    pub covariances: Vec<CMatrix>,
    /// Covariance of the probing streams, `W̄_{K+1}`.
    pub probing: CMatrix,
    pub solver: SolverSummary,
}

impl ExtendedRelaxation {
    /// `R̄ = Σ_k W̄_k + W̄_{K+1}`.
    pub fn covariance(&self) -> CMatrix {
        sum_of(&self.covariances) + &self.probing
    }
}

fn build_extended_problem(scenario: &Scenario) -> SdpProblem {
    let n = scenario.geometry.n_tx;
    let users = scenario.users();
    let scale = scenario.power_budget;
    let mut p = SdpProblem::new();
    let w: Vec<usize> = (0..users)
        .map(|k| p.add_block(format!("W{}", k + 1), n))
        .collect();
    let probe = p.add_block("W_probe", n);
    let z = p.add_block("Z", 2 * n);
    p.set_objective(LinExpr::new().block(z, Coef::scaled_identity(0, n, 1.0)));
    // off-diagonal block of Z is the identity
    for r in 0..n {
        for c in 0..n {
            let re = LinExpr::new().block(z, Coef::re_entry(r, n + c));
            p.add_constraint(re, Sense::Eq, if r == c { 1.0 } else { 0.0 });
            let im = LinExpr::new().block(z, Coef::im_entry(r, n + c));
            p.add_constraint(im, Sense::Eq, 0.0);
        }
    }
    // lower-right block of Z equals the sum of all stream covariances
    let all: Vec<usize> = w.iter().copied().chain([probe]).collect();
    for r in 0..n {
        for c in r..n {
            let mut re = LinExpr::new().block(z, Coef::re_entry(n + r, n + c));
            for &b in &all {
                let v = if r == c { -1.0 } else { -0.5 };
                re = re.block(b, Coef::Sparse(vec![(r, c, Complex64::new(v, 0.0))]));
            }
            p.add_constraint(re, Sense::Eq, 0.0);
            if r != c {
                let mut im = LinExpr::new().block(z, Coef::im_entry(n + r, n + c));
                for &b in &all {
                    im = im.block(b, Coef::Sparse(vec![(r, c, Complex64::new(0.0, -0.5))]));
                }
                p.add_constraint(im, Sense::Eq, 0.0);
            }
        }
    }
    for k in 0..users {
        let q = scenario.channel_gram(k);
        let rhs = scenario.sinr_thresholds[k] * scenario.noise_comm / scale;
        p.add_constraint(sinr_row(scenario, k, users + 1, &q), Sense::Ge, rhs);
    }
    p.add_constraint(
        LinExpr::new().block(z, Coef::scaled_identity(n, n, 1.0)),
        Sense::Le,
        1.0,
    );
    p
}

/// Solves `min tr(R_X⁻¹)` over `W_k ⪰ 0`, probing covariance `⪰ 0`, with the
/// SINR rows and the power budget, in epigraph form.
pub fn solve_extended_relaxation(
    scenario: &Scenario,
    opts: &SdpOptions,
) -> Result<ExtendedRelaxation, DesignError> {
    scenario.validate()?;
    let users = scenario.users();
    let p = build_extended_problem(scenario);
    let sol = sdp::solve(&p, opts)?;
    check_status(&sol)?;
    let s = scenario.power_budget;
    let blocks: Vec<CMatrix> = sol.primal_blocks[..=users]
        .iter()
        .map(|w| hermitian_part(w).scale(s))
        .collect();
    Ok(ExtendedRelaxation {
        covariances: blocks[..users].to_vec(),
        probing: blocks[users].clone(),
        solver: summarize(&sol),
    })
}

/// Rank-one beamformers and probing streams sharing the relaxed covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneExtraction {
    /// `N_t × K`, column `k` is `w_k = W̄_kh_k/√(h_kᴴW̄_kh_k)`.
    pub beamformers: CMatrix,
    /// `W̃_k = w_kw_kᴴ`.
    pub covariances: Vec<CMatrix>,
    /// `W_A` with `W_AW_Aᴴ = R̄ − ΣW̃_k`.
    pub aux: CMatrix,
}

/// Rank-one user covariances `W̃_k = W̄_kQ_kW̄_k/tr(Q_kW̄_k)` plus probing
/// streams absorbing the rest of `R̄`.
pub fn extract_rank_one(
    r_bar: &CMatrix,
    w_bar: &[CMatrix],
    channels: &[CVector],
) -> Result<RankOneExtraction, DesignError> {
    let n = r_bar.nrows();
    let mut beams = Vec::with_capacity(w_bar.len());
    let mut covariances = Vec::with_capacity(w_bar.len());
    for (k, (w, h)) in w_bar.iter().zip(channels).enumerate() {
        let wh = w * h;
        let useful = h.dotc(&wh).re;
        if !(useful > 1e-12 * trace(w).re * vector_norm_sqr(h)) {
            return Err(DesignError::ZeroUsefulPower { user: k });
        }
        let beam = wh.unscale(useful.sqrt());
        covariances.push(outer(&beam, &beam));
        beams.push(beam);
    }
    let residual = covariances.iter().fold(r_bar.clone(), |acc, c| acc - c);
    let aux = residual_sqrt(&residual)?;
    let beamformers = if beams.is_empty() {
        CMatrix::zeros(n, 0)
    } else {
        CMatrix::from_columns(&beams)
    };
    Ok(RankOneExtraction {
        beamformers,
        covariances,
        aux,
    })
}

fn extended_solution(
    scenario: &Scenario,
    beamformers: CMatrix,
    aux: CMatrix,
    diagnostics: Diagnostics,
) -> Result<DesignSolution, DesignError> {
    let covariance = hermitian_part(&(&beamformers * beamformers.adjoint() + &aux * aux.adjoint()));
    let achieved_sinrs = (0..scenario.users())
        .map(|k| sinr_with(&beamformers, Some(&aux), k, scenario))
        .collect::<Result<Vec<_>, _>>()?;
    let objective = crb_extended(&covariance, scenario)?;
    Ok(DesignSolution {
        comm_beamformers: beamformers,
        aux_beamformer: Some(aux),
        covariance,
        achieved_sinrs,
        objective,
        diagnostics,
    })
}

fn relaxation_diagnostics(relaxation: &ExtendedRelaxation, method: DesignMethod) -> Diagnostics {
    Diagnostics {
        method,
        solver: Some(relaxation.solver.clone()),
        ranks: relaxation
            .covariances
            .iter()
            .map(|w| numeric_rank(w, RANK_TOL))
            .collect(),
        eigen_ratios: relaxation
            .covariances
            .iter()
            .map(second_eigen_ratio)
            .collect(),
        point_duals: None,
        notes: vec![],
    }
}

/// Multi-user extended-target design: relaxation followed by rank-one extraction.
pub fn design_extended_multi(scenario: &Scenario) -> Result<DesignSolution, DesignError> {
    let relaxation = solve_extended_relaxation(scenario, &design_sdp_options())?;
    design_extended_from(scenario, &relaxation)
}

/// Rank-one extraction applied to an already solved relaxation.
pub fn design_extended_from(
    scenario: &Scenario,
    relaxation: &ExtendedRelaxation,
) -> Result<DesignSolution, DesignError> {
    let channels: Vec<CVector> = (0..scenario.users()).map(|k| scenario.channel(k)).collect();
    let ex = extract_rank_one(&relaxation.covariance(), &relaxation.covariances, &channels)?;
    extended_solution(
        scenario,
        ex.beamformers,
        ex.aux,
        relaxation_diagnostics(relaxation, DesignMethod::ExtendedSdr),
    )
}

/// Comparison baseline: each relaxed `W̄_k` is truncated to its dominant
/// eigencomponent, the probing covariance is kept, and everything is scaled
/// back up to the power budget. SINR thresholds are not re-enforced.
pub fn eigen_truncation_baseline(
    scenario: &Scenario,
    relaxation: &ExtendedRelaxation,
) -> Result<DesignSolution, DesignError> {
    let beams: Vec<CVector> = relaxation
        .covariances
        .iter()
        .map(principal_beamformer)
        .collect();
    let w = CMatrix::from_columns(&beams);
    let probe = psd_sqrt(&hermitian_part(&relaxation.probing))?;
    let total = (&w * w.adjoint() + &probe * probe.adjoint()).trace().re;
    let gain = (scenario.power_budget / total).sqrt();
    extended_solution(
        scenario,
        w.scale(gain),
        probe.scale(gain),
        relaxation_diagnostics(relaxation, DesignMethod::EigenTruncation),
    )
}

/// `tr(R⁻¹)` and every user's SINR for covariance-level quantities, as used to
/// compare a relaxation before and after extraction.
pub fn covariance_metrics(
    r_x: &CMatrix,
    user_covariances: &[CMatrix],
    scenario: &Scenario,
) -> Result<(f64, Vec<f64>), DesignError> {
    let inv_trace = trace(&hpd_inverse(r_x)?).re;
    let sinrs = user_covariances
        .iter()
        .enumerate()
        .map(|(k, w)| sinr_from_covariance(w, r_x, &scenario.channel(k), scenario.noise_comm))
        .collect();
    Ok((inv_trace, sinrs))
}
