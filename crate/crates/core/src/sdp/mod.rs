//! Dense solver for small Hermitian semidefinite programs.
//!
//! Problems are stated over complex Hermitian PSD blocks (see [`SdpProblem`]),
//! compiled to a real standard form through the real-symmetric embedding, and
//! solved by a primal-dual interior-point method. [`check_certificate`]
//! recomputes residuals on the original complex data, independently of the
//! solver's internal scaling.

mod embed;
mod ipm;
mod problem;

pub use embed::{embed_hermitian, unembed};
pub use problem::{Block, Coef, Constraint, LinExpr, SdpProblem, Sense};

use crate::numerics::{frobenius_norm, herm_eig_unchecked, CMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Bound on the relative primal, dual and gap residuals for `Optimal`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 150,
        }
    }
}

/// Residual slack, relative to `tol`, accepted for a run that could not reach `tol`.
pub const NEAR_OPTIMAL_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    /// Stopped on stall or iteration cap with residuals within
    /// `NEAR_OPTIMAL_FACTOR·tol`.
    NearOptimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Relative residuals recomputed from the problem data.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Farkas certificate for primal infeasibility: a unit-norm `y` with `bᵀy > 0`,
/// `Σ y_i A_i ⪯ 0` on every block, sign-feasible multipliers and `Bᵀy = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub y: Vec<f64>,
    /// `bᵀy` for the normalized ray.
    pub margin: f64,
    /// Largest violation of the ray conditions.
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub primal_blocks: Vec<CMatrix>,
    pub scalars: Vec<f64>,
    /// One per constraint, sign convention: `≥` rows get `y ≥ 0`, `≤` rows `y ≤ 0`.
    pub dual_multipliers: Vec<f64>,
    /// `C_b − Σ y_i A_ib` as returned by the solver (PSD at optimality).
    pub dual_slacks: Vec<CMatrix>,
    pub residuals: ResidualReport,
    pub iterations: usize,
    pub certificate: Option<InfeasibilityCertificate>,
}

impl SdpSolution {
    pub fn primal_objective(&self) -> f64 {
        self.residuals.primal_objective
    }
}

/// Recomputes relative residuals for a candidate primal/dual pair.
///
/// * primal: constraint violations (`‖·‖₂/(1+‖rhs‖₂)`) and PSD violation of
///   each block relative to its size, whichever is larger;
/// * dual: PSD violation of `C − Σ y_i A_i`, multiplier sign violations and
///   free-variable stationarity, over `1 + ‖C‖`;
/// * gap: `|p − d|/(1 + |p| + |d|)`.
pub fn check_certificate(p: &SdpProblem, s: &SdpSolution) -> ResidualReport {
    residuals_of(p, &s.primal_blocks, &s.scalars, &s.dual_multipliers)
}

pub fn residuals_of(
    p: &SdpProblem,
    blocks: &[CMatrix],
    scalars: &[f64],
    y: &[f64],
) -> ResidualReport {
    let mut viol_sq = 0.0;
    let mut rhs_sq = 0.0;
    for c in &p.constraints {
        let lhs = c.expr.eval(blocks, scalars);
        let v = match c.sense {
            Sense::Eq => lhs - c.rhs,
            Sense::Ge => (c.rhs - lhs).max(0.0),
            Sense::Le => (lhs - c.rhs).max(0.0),
        };
        viol_sq += v * v;
        rhs_sq += c.rhs * c.rhs;
    }
    let mut primal = viol_sq.sqrt() / (1.0 + rhs_sq.sqrt());
    for x in blocks {
        let eig = herm_eig_unchecked(x);
        let neg = eig
            .values
            .iter()
            .map(|v| v.min(0.0).powi(2))
            .sum::<f64>()
            .sqrt();
        primal = primal.max(neg / (1.0 + frobenius_norm(x)));
    }

    let slacks = dual_slack_matrices(p, y);
    let mut dual_sq = 0.0;
    for s in &slacks {
        let eig = herm_eig_unchecked(s);
        dual_sq += eig.values.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>();
    }
    for (c, &yi) in p.constraints.iter().zip(y) {
        let sign_viol = match c.sense {
            Sense::Eq => 0.0,
            Sense::Ge => (-yi).max(0.0),
            Sense::Le => yi.max(0.0),
        };
        dual_sq += sign_viol * sign_viol;
    }
    let mut c_free = vec![0.0; p.scalars.len()];
    for &(s, v) in &p.objective.scalars {
        c_free[s] += v;
    }
    for (c, &yi) in p.constraints.iter().zip(y) {
        for &(s, v) in &c.expr.scalars {
            c_free[s] -= yi * v;
        }
    }
    dual_sq += c_free.iter().map(|v| v * v).sum::<f64>();
    let c_norm = objective_norm(p);
    let dual = dual_sq.sqrt() / (1.0 + c_norm);

    let pobj = p.objective.eval(blocks, scalars);
    let dobj: f64 = p.constraints.iter().zip(y).map(|(c, yi)| c.rhs * yi).sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    ResidualReport {
        primal,
        dual,
        gap,
        primal_objective: pobj,
        dual_objective: dobj,
    }
}

fn objective_norm(p: &SdpProblem) -> f64 {
    let mut sq = 0.0;
    let mut per_block: Vec<Option<CMatrix>> = vec![None; p.blocks.len()];
    for (b, c) in &p.objective.blocks {
        let d = c.to_dense(p.blocks[*b].dim);
        per_block[*b] = Some(match per_block[*b].take() {
            Some(prev) => prev + d,
            None => d,
        });
    }
    for m in per_block.into_iter().flatten() {
        sq += frobenius_norm(&m).powi(2);
    }
    for &(_, v) in &p.objective.scalars {
        sq += v * v;
    }
    sq.sqrt()
}

/// `C_b − Σ_i y_i A_ib` for every block.
pub fn dual_slack_matrices(p: &SdpProblem, y: &[f64]) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = p
        .blocks
        .iter()
        .map(|b| CMatrix::zeros(b.dim, b.dim))
        .collect();
    for (b, c) in &p.objective.blocks {
        out[*b] += c.to_dense(p.blocks[*b].dim);
    }
    for (c, &yi) in p.constraints.iter().zip(y) {
        if yi == 0.0 {
            continue;
        }
        for (b, coef) in &c.expr.blocks {
            out[*b] -= coef.to_dense(p.blocks[*b].dim).scale(yi);
        }
    }
    out
}

/// Evaluates a candidate Farkas ray (normalized to unit length first).
pub fn check_infeasibility_ray(p: &SdpProblem, y: &[f64]) -> InfeasibilityCertificate {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y: Vec<f64> = if norm > 0.0 {
        y.iter().map(|v| v / norm).collect()
    } else {
        y.to_vec()
    };
    let margin: f64 = p.constraints.iter().zip(&y).map(|(c, yi)| c.rhs * yi).sum();
    let mut violation = 0.0f64;
    let mut aty: Vec<CMatrix> = p
        .blocks
        .iter()
        .map(|b| CMatrix::zeros(b.dim, b.dim))
        .collect();
    let mut bty = vec![0.0; p.scalars.len()];
    for (c, &yi) in p.constraints.iter().zip(&y) {
        for (b, coef) in &c.expr.blocks {
            aty[*b] += coef.to_dense(p.blocks[*b].dim).scale(yi);
        }
        for &(s, v) in &c.expr.scalars {
            bty[s] += yi * v;
        }
        violation = violation.max(match c.sense {
            Sense::Eq => 0.0,
            Sense::Ge => (-yi).max(0.0),
            Sense::Le => yi.max(0.0),
        });
    }
    for m in &aty {
        violation = violation.max(herm_eig_unchecked(m).max().max(0.0));
    }
    for v in bty {
        violation = violation.max(v.abs());
    }
    InfeasibilityCertificate {
        y,
        margin,
        violation,
    }
}

/// Solves `p` to the tolerance in `opts`.
pub fn solve(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution, SdpError> {
    p.validate().map_err(SdpError::DimensionMismatch)?;
    let (real, scaling) = embed::compile(p);
    let settings = ipm::Settings {
        tol: opts.tol,
        max_iter: opts.max_iter,
        infeasibility_tol: 1e-8,
    };

    let unscale = |it: &ipm::Iterate| -> (Vec<CMatrix>, Vec<f64>, Vec<f64>, Vec<CMatrix>) {
        let blocks: Vec<CMatrix> =
            it.x.iter()
                .map(|x| unembed(x).scale(scaling.primal))
                .collect();
        let scalars: Vec<f64> = it.x_free.iter().map(|v| v * scaling.primal).collect();
        let y: Vec<f64> =
            it.y.iter()
                .zip(&scaling.row)
                .map(|(v, d)| v * scaling.dual / d)
                .collect();
        let slacks: Vec<CMatrix> =
            it.s.iter()
                .map(|s| unembed(s).scale(2.0 * scaling.dual))
                .collect();
        (blocks, scalars, y, slacks)
    };

    let (it, outcome, iterations, _) = ipm::run(&real, settings, |it| {
        let (blocks, scalars, y, _) = unscale(it);
        residuals_of(p, &blocks, &scalars, &y).max() <= opts.tol
    });

    let (primal_blocks, scalars, y, dual_slacks) = unscale(&it);
    let residuals = residuals_of(p, &primal_blocks, &scalars, &y);
    let (status, certificate) = match outcome {
        ipm::Outcome::Converged => (SdpStatus::Optimal, None),
        ipm::Outcome::PrimalInfeasible => {
            let cert = check_infeasibility_ray(p, &y);
            if cert.margin >= 1e-6 && cert.violation <= 1e-6 * cert.margin.max(1.0) {
                (SdpStatus::Infeasible, Some(cert))
            } else {
                (SdpStatus::MaxIter, Some(cert))
            }
        }
        ipm::Outcome::DualInfeasible => (SdpStatus::Unbounded, None),
        ipm::Outcome::MaxIter | ipm::Outcome::Stalled => {
            if residuals.max() <= opts.tol {
                (SdpStatus::Optimal, None)
            } else if residuals.max() <= NEAR_OPTIMAL_FACTOR * opts.tol {
                (SdpStatus::NearOptimal, None)
            } else {
                (SdpStatus::MaxIter, None)
            }
        }
    };
    Ok(SdpSolution {
        status,
        primal_blocks,
        scalars,
        dual_multipliers: y,
        dual_slacks,
        residuals,
        iterations,
        certificate,
    })
}
