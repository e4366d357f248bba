//! Scenario description, design results, and the performance functionals:
//! point-target CRBs, extended-target FIM/CRB, per-user SINR and beampatterns.

use crate::array_model::{
    steering, steering_derivative_norm_sqr, validate_angle, ArrayError, ArrayGeometry, PointTarget,
};
use crate::designs::PointDuals;
use crate::numerics::{
    herm_eig_unchecked, hpd_inverse, quad_form, serde_cmatrix, trace, CMatrix, CVector,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("Fisher information is singular (determinant {bracket:.3e} vs scale {scale:.3e})")]
    SingularFim { bracket: f64, scale: f64 },
    #[error("transmit covariance is singular (min/max eigenvalue {ratio:.3e})")]
    SingularCovariance { ratio: f64 },
    #[error("user index {0} out of range")]
    UserOutOfRange(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error("need K < N_t < N_r, got K={k}, N_t={n_tx}, N_r={n_rx}")]
    Ordering { k: usize, n_tx: usize, n_rx: usize },
    #[error("frame length L={frame_len} must exceed N_t={n_tx}")]
    FrameTooShort { frame_len: usize, n_tx: usize },
    #[error("channel matrix is {rows}x{cols}, expected K x {n_tx}")]
    ChannelShape {
        rows: usize,
        cols: usize,
        n_tx: usize,
    },
    #[error("{count} SINR thresholds for {k} users")]
    ThresholdCount { count: usize, k: usize },
    #[error("{0} must be finite and strictly positive")]
    NonPositive(&'static str),
    #[error("scenario needs at least one user")]
    NoUsers,
    #[error("extended target response is {rows}x{cols}, expected N_r x N_t")]
    ResponseShape { rows: usize, cols: usize },
}

/// Extended target described directly by its response matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTarget {
    #[serde(with = "serde_cmatrix")]
    pub response: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Point(PointTarget),
    Extended(ExtendedTarget),
}

/// Everything a designer needs. All powers are linear milliwatts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    /// `K × N_t`; row `k` is `h_kᴴ`.
    #[serde(with = "serde_cmatrix")]
    pub channels: CMatrix,
    /// Linear SINR thresholds Γ_k.
    pub sinr_thresholds: Vec<f64>,
    pub power_budget: f64,
    pub noise_comm: f64,
    pub noise_radar: f64,
    pub frame_len: usize,
    pub target: Target,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let g = &self.geometry;
        ArrayGeometry::new(g.n_tx, g.n_rx)?;
        let k = self.channels.nrows();
        if k == 0 {
            return Err(ScenarioError::NoUsers);
        }
        if self.channels.ncols() != g.n_tx {
            return Err(ScenarioError::ChannelShape {
                rows: k,
                cols: self.channels.ncols(),
                n_tx: g.n_tx,
            });
        }
        if !(k < g.n_tx && g.n_tx < g.n_rx) {
            return Err(ScenarioError::Ordering {
                k,
                n_tx: g.n_tx,
                n_rx: g.n_rx,
            });
        }
        if self.frame_len <= g.n_tx {
            return Err(ScenarioError::FrameTooShort {
                frame_len: self.frame_len,
                n_tx: g.n_tx,
            });
        }
        if self.sinr_thresholds.len() != k {
            return Err(ScenarioError::ThresholdCount {
                count: self.sinr_thresholds.len(),
                k,
            });
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.sinr_thresholds.iter().all(|&x| positive(x)) {
            return Err(ScenarioError::NonPositive("SINR threshold"));
        }
        for (name, v) in [
            ("power budget", self.power_budget),
            ("communication noise power", self.noise_comm),
            ("radar noise power", self.noise_radar),
        ] {
            if !positive(v) {
                return Err(ScenarioError::NonPositive(name));
            }
        }
        match &self.target {
            Target::Point(t) => validate_angle(t.theta)?,
            Target::Extended(t) => {
                if t.response.shape() != (g.n_rx, g.n_tx) {
                    return Err(ScenarioError::ResponseShape {
                        rows: t.response.nrows(),
                        cols: t.response.ncols(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.channels.nrows()
    }

    /// `h_k` as a column vector.
    pub fn channel(&self, k: usize) -> CVector {
        self.channels.row(k).adjoint()
    }

    /// `Q_k = h_k·h_kᴴ`.
    pub fn channel_gram(&self, k: usize) -> CMatrix {
        let h = self.channel(k);
        &h * h.adjoint()
    }

    pub fn point_target(&self) -> Option<&PointTarget> {
        match &self.target {
            Target::Point(t) => Some(t),
            Target::Extended(_) => None,
        }
    }
}

/// Which designer produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMethod {
    PointClosedForm,
    PointSdr,
    ExtendedClosedForm,
    ExtendedSdr,
    EigenTruncation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: DesignMethod,
    pub solver: Option<SolverSummary>,
    /// Numeric rank of each relaxed `W_k` before extraction (empty for closed forms).
    pub ranks: Vec<usize>,
    /// `λ₂/λ₁` of each relaxed `W_k`.
    pub eigen_ratios: Vec<f64>,
    /// Multipliers of the point-target relaxation, kept for KKT checks.
    pub point_duals: Option<PointDuals>,
    pub notes: Vec<String>,
}

impl Diagnostics {
    pub fn closed_form(method: DesignMethod) -> Self {
        Self {
            method,
            solver: None,
            ranks: vec![],
            eigen_ratios: vec![],
            point_duals: None,
            notes: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    /// `N_t × K`, column `k` is `w_k`.
    #[serde(with = "serde_cmatrix")]
    pub comm_beamformers: CMatrix,
    /// `N_t × N_t` probing beamformer, absent for point designs.
    #[serde(with = "serde_cmatrix::option")]
    pub aux_beamformer: Option<CMatrix>,
    #[serde(with = "serde_cmatrix")]
    pub covariance: CMatrix,
    pub achieved_sinrs: Vec<f64>,
    /// CRB(θ) in rad² for point designs, CRB(G) for extended designs.
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

impl DesignSolution {
    pub fn beamformer(&self, k: usize) -> CVector {
        self.comm_beamformers.column(k).into_owned()
    }

    /// All transmitted streams' beamformers side by side: `[W_C, W_A]`.
    pub fn stacked_beamformers(&self) -> CMatrix {
        match &self.aux_beamformer {
            None => self.comm_beamformers.clone(),
            Some(aux) => {
                let n = self.comm_beamformers.nrows();
                let k = self.comm_beamformers.ncols();
                let mut w = CMatrix::zeros(n, k + aux.ncols());
                w.columns_mut(0, k).copy_from(&self.comm_beamformers);
                w.columns_mut(k, aux.ncols()).copy_from(aux);
                w
            }
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// `|α|` giving echo SNR `|α|²·L·P_T/σ_R²`.
pub fn alpha_magnitude_for_snr(snr_linear: f64, frame_len: usize, power: f64, noise: f64) -> f64 {
    (snr_linear * noise / (frame_len as f64 * power)).sqrt()
}

/// The three trace terms of the point-target FIM, with `A = b·aᴴ`, `Ȧ = ḃaᴴ + bȧᴴ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTraces {
    /// `tr(AᴴA·R)`.
    pub aa: f64,
    /// `tr(ȦᴴȦ·R)`.
    pub dd: f64,
    /// `tr(ȦᴴA·R)`.
    pub da: Complex64,
    /// `N_r·N_t·tr(R)`, an upper bound of `aa` used as the singularity reference.
    pub aa_bound: f64,
}

impl PointTraces {
    /// Factored evaluation: `‖b‖² = N_r`, `bᴴḃ = 0`, `‖ḃ‖²` closed form.
    pub fn new(r_x: &CMatrix, theta: f64, geometry: &ArrayGeometry) -> Self {
        let n_rx = geometry.n_rx as f64;
        let db_sq = steering_derivative_norm_sqr(theta, geometry.n_rx);
        let a = steering(theta, geometry.n_tx);
        let da = geometry.tx_steering_derivative(theta);
        let ra = r_x * &a;
        let a_r_a = a.dotc(&ra).re;
        let da_r_da = quad_form(r_x, &da).re;
        // tr(ȦᴴAR) = ‖b‖²·aᴴRȧ
        let a_r_da = a.dotc(&(r_x * &da));
        Self {
            aa: n_rx * a_r_a,
            dd: db_sq * a_r_a + n_rx * da_r_da,
            da: a_r_da * n_rx,
            aa_bound: n_rx * geometry.n_tx as f64 * trace(r_x).re,
        }
    }

    /// Schur complement `tr(ȦᴴȦR) − |tr(ȦᴴAR)|²/tr(AᴴAR)`.
    pub fn schur(&self) -> f64 {
        self.dd - self.da.norm_sqr() / self.aa
    }

    fn bracket(&self) -> Result<f64, MetricsError> {
        let bracket = self.dd * self.aa - self.da.norm_sqr();
        let scale = self.dd * self.aa_bound;
        if !(bracket > 1e-12 * scale) || !(scale > 0.0) {
            return Err(MetricsError::SingularFim { bracket, scale });
        }
        Ok(bracket)
    }
}

/// CRB for the target angle, rad².
pub fn crb_point_theta(
    r_x: &CMatrix,
    theta: f64,
    alpha: Complex64,
    scenario: &Scenario,
) -> Result<f64, MetricsError> {
    let t = PointTraces::new(r_x, theta, &scenario.geometry);
    let bracket = t.bracket()?;
    Ok(
        scenario.noise_radar * t.aa
            / (2.0 * alpha.norm_sqr() * scenario.frame_len as f64 * bracket),
    )
}

/// CRB for the complex reflection coefficient.
pub fn crb_point_alpha(
    r_x: &CMatrix,
    theta: f64,
    scenario: &Scenario,
) -> Result<f64, MetricsError> {
    let t = PointTraces::new(r_x, theta, &scenario.geometry);
    let bracket = t.bracket()?;
    Ok(scenario.noise_radar * t.dd / (scenario.frame_len as f64 * bracket))
}

/// CRB(θ) expressed through the Schur value `t`: `σ_R²/(2|α|²L·t)`.
pub fn crb_theta_from_schur(t: f64, alpha: Complex64, scenario: &Scenario) -> f64 {
    scenario.noise_radar / (2.0 * alpha.norm_sqr() * scenario.frame_len as f64 * t)
}

/// `J = L/(σ_R²·N_r)·R_X`.
pub fn fim_extended(r_x: &CMatrix, scenario: &Scenario) -> CMatrix {
    r_x.scale(scenario.frame_len as f64 / (scenario.noise_radar * scenario.geometry.n_rx as f64))
}

/// CRB(G) = `(σ_R²·N_r/L)·tr(R_X⁻¹)`.
pub fn crb_extended(r_x: &CMatrix, scenario: &Scenario) -> Result<f64, MetricsError> {
    let eig = herm_eig_unchecked(r_x);
    let ratio = if eig.max() > 0.0 {
        eig.min() / eig.max()
    } else {
        0.0
    };
    if ratio <= 1e-10 {
        return Err(MetricsError::SingularCovariance { ratio });
    }
    let inv = hpd_inverse(r_x).map_err(|_| MetricsError::SingularCovariance { ratio })?;
    Ok(extended_scale(scenario) * trace(&inv).re)
}

/// `σ_R²·N_r/L`, the factor between `tr(R_X⁻¹)` and CRB(G).
pub fn extended_scale(scenario: &Scenario) -> f64 {
    scenario.noise_radar * scenario.geometry.n_rx as f64 / scenario.frame_len as f64
}

/// SINR of user `k` for beamformers `W` (columns) and optional probing streams.
pub fn sinr_with(
    beamformers: &CMatrix,
    aux: Option<&CMatrix>,
    k: usize,
    scenario: &Scenario,
) -> Result<f64, MetricsError> {
    if k >= scenario.users() || k >= beamformers.ncols() {
        return Err(MetricsError::UserOutOfRange(k));
    }
    let h = scenario.channel(k);
    let gains = beamformers.adjoint() * &h;
    let useful = gains[k].norm_sqr();
    let mut interference: f64 = gains
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, g)| g.norm_sqr())
        .sum();
    if let Some(w_a) = aux {
        interference += (w_a.adjoint() * &h).norm_squared();
    }
    Ok(useful / (interference + scenario.noise_comm))
}

pub fn sinr_point(
    solution: &DesignSolution,
    k: usize,
    scenario: &Scenario,
) -> Result<f64, MetricsError> {
    sinr_with(&solution.comm_beamformers, None, k, scenario)
}

pub fn sinr_extended(
    solution: &DesignSolution,
    k: usize,
    scenario: &Scenario,
) -> Result<f64, MetricsError> {
    sinr_with(
        &solution.comm_beamformers,
        solution.aux_beamformer.as_ref(),
        k,
        scenario,
    )
}

/// SINR of user `k` when its signal covariance is `W_k` and the total transmit
/// covariance is `R`: `hᴴW_kh / (hᴴ(R − W_k)h + σ²)`.
pub fn sinr_from_covariance(w_k: &CMatrix, r_x: &CMatrix, h: &CVector, noise: f64) -> f64 {
    let useful = quad_form(w_k, h).re;
    let total = quad_form(r_x, h).re;
    useful / (total - useful + noise)
}

/// `P(θ) = aᴴ(θ)·R_X·a(θ)` on every grid angle.
pub fn beampattern(r_x: &CMatrix, theta_grid: &[f64], geometry: &ArrayGeometry) -> Vec<f64> {
    theta_grid
        .iter()
        .map(|&t| quad_form(r_x, &steering(t, geometry.n_tx)).re.max(0.0))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::array_model::steering_derivative;
    use crate::numerics::{identity, outer, real};
    use crate::random::{complex_gaussian_matrix, seeded_rng};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn scenario(
        n_tx: usize,
        n_rx: usize,
        k: usize,
        frame_len: usize,
        seed: u64,
    ) -> Scenario {
        let mut rng = seeded_rng(seed, 0);
        Scenario {
            geometry: ArrayGeometry::new(n_tx, n_rx).unwrap(),
            channels: complex_gaussian_matrix(k, n_tx, 1.0, &mut rng),
            sinr_thresholds: vec![1.0; k],
            power_budget: 1.0,
            noise_comm: 1.0,
            noise_radar: 1.0,
            frame_len,
            target: Target::Point(PointTarget {
                theta: 0.0,
                alpha: real(1.0),
            }),
        }
    }

    fn random_psd(n: usize, seed: u64) -> CMatrix {
        let g = complex_gaussian_matrix(n, n + 2, 1.0, &mut seeded_rng(seed, 3));
        &g * g.adjoint()
    }

    /// Full-matrix traces with `A = baᴴ`, `Ȧ = ḃaᴴ + bȧᴴ`.
    fn traces_full(r: &CMatrix, theta: f64, g: &ArrayGeometry) -> (f64, f64, Complex64) {
        let a = steering(theta, g.n_tx);
        let b = steering(theta, g.n_rx);
        let da = steering_derivative(theta, g.n_tx);
        let db = steering_derivative(theta, g.n_rx);
        let big_a = outer(&b, &a);
        let big_d = outer(&db, &a) + outer(&b, &da);
        let aa = trace(&(big_a.adjoint() * &big_a * r)).re;
        let dd = trace(&(big_d.adjoint() * &big_d * r)).re;
        let d_a = trace(&(big_d.adjoint() * &big_a * r));
        (aa, dd, d_a)
    }

    #[test]
    fn isotropic_crb_example() {
        // N_t=4, N_r=6, θ=0, α=1, L=16, σ²=1, R=I
        let s = scenario(4, 6, 1, 16, 1);
        let r = identity(4);
        let got = crb_point_theta(&r, 0.0, real(1.0), &s).unwrap();
        let (aa, dd, d_a) = traces_full(&r, 0.0, &s.geometry);
        let want = aa / (2.0 * 16.0 * (dd * aa - d_a.norm_sqr()));
        assert_relative_eq!(got, want, max_relative = 1e-12);
    }

    #[test]
    fn rank_one_crb_reduces() {
        let s = scenario(6, 8, 1, 20, 2);
        let w = complex_gaussian_matrix(6, 1, 1.0, &mut seeded_rng(9, 0))
            .column(0)
            .into_owned();
        let r = outer(&w, &w);
        let theta = 0.3;
        let alpha = Complex64::new(0.3, 0.4);
        let got = crb_point_theta(&r, theta, alpha, &s);
        // rank-one R with aᴴw ≠ 0 and ȧᴴw ≠ 0 still gives a positive bracket:
        // tr(ȦᴴȦR)tr(AᴴAR) − |tr(ȦᴴAR)|² = ‖b‖²‖ḃ‖²|aᴴw|⁴
        let a = steering(theta, 6);
        let aw = a.dotc(&w).norm_sqr();
        let db = steering_derivative_norm_sqr(theta, 8);
        let want = 1.0 / (2.0 * alpha.norm_sqr() * 20.0 * db * aw);
        assert_relative_eq!(got.unwrap(), want, max_relative = 1e-9);
    }

    #[test]
    fn singular_fim_detected() {
        let s = scenario(4, 6, 1, 16, 1);
        let a = steering(0.2, 4);
        let da = steering_derivative(0.2, 4);
        // R supported on a vector orthogonal to a: tr(AᴴAR) = 0
        let v = &da / Complex64::new(da.norm(), 0.0);
        let r = outer(&v, &v);
        assert!(a.dotc(&v).norm() < 1e-12);
        assert!(matches!(
            crb_point_theta(&r, 0.2, real(1.0), &s),
            Err(MetricsError::SingularFim { .. })
        ));
    }

    #[test]
    fn fim_and_crb_extended_examples() {
        let mut s = scenario(16, 20, 1, 30, 3);
        let j = fim_extended(&identity(16), &s);
        assert_relative_eq!(j[(0, 0)].re, 1.5, max_relative = 1e-15);
        s.power_budget = 1000.0;
        let r = identity(16).scale(1000.0 / 16.0);
        let crb = crb_extended(&r, &s).unwrap();
        assert_relative_eq!(crb, 20.0 * 256.0 / 30_000.0, max_relative = 1e-12);
        let mut singular = r.clone();
        singular[(3, 3)] = real(0.0);
        assert!(matches!(
            crb_extended(&singular, &s),
            Err(MetricsError::SingularCovariance { .. })
        ));
    }

    #[test]
    fn sinr_examples() {
        let mut s = scenario(4, 6, 2, 16, 4);
        s.noise_comm = 0.5;
        let w = complex_gaussian_matrix(4, 2, 1.0, &mut seeded_rng(4, 9));
        let h0 = s.channel(0);
        let h1 = s.channel(1);
        let g = |h: &CVector, k: usize| h.dotc(&w.column(k).into_owned()).norm_sqr();
        let want0 = g(&h0, 0) / (g(&h0, 1) + 0.5);
        let want1 = g(&h1, 1) / (g(&h1, 0) + 0.5);
        assert_relative_eq!(
            sinr_with(&w, None, 0, &s).unwrap(),
            want0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            sinr_with(&w, None, 1, &s).unwrap(),
            want1,
            max_relative = 1e-12
        );

        let w_a = complex_gaussian_matrix(4, 4, 1.0, &mut seeded_rng(4, 10));
        let leak = (w_a.adjoint() * &h0).norm_squared();
        let want = g(&h0, 0) / (g(&h0, 1) + leak + 0.5);
        assert_relative_eq!(
            sinr_with(&w, Some(&w_a), 0, &s).unwrap(),
            want,
            max_relative = 1e-12
        );
        let zero = CMatrix::zeros(4, 4);
        assert_relative_eq!(
            sinr_with(&w, Some(&zero), 0, &s).unwrap(),
            want0,
            max_relative = 1e-15
        );
        assert!(sinr_with(&w, None, 2, &s).is_err());
    }

    #[test]
    fn covariance_sinr_matches_beamformer_sinr() {
        let s = scenario(5, 7, 2, 16, 5);
        let w = complex_gaussian_matrix(5, 2, 1.0, &mut seeded_rng(5, 1));
        let r = &w * w.adjoint();
        let w0 = w.column(0).into_owned();
        let via_cov = sinr_from_covariance(&outer(&w0, &w0), &r, &s.channel(0), s.noise_comm);
        assert_relative_eq!(
            via_cov,
            sinr_with(&w, None, 0, &s).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn beampattern_examples() {
        let g = ArrayGeometry::new(8, 10).unwrap();
        let grid: Vec<f64> = (-89..=89).map(|d| (d as f64).to_radians()).collect();
        for p in beampattern(&identity(8), &grid, &g) {
            assert_relative_eq!(p, 8.0, max_relative = 1e-12);
        }
        let theta0 = 20f64.to_radians();
        let a = steering(theta0, 8);
        let r = outer(&a, &a).scale(3.0 / 8.0);
        let p = beampattern(&r, &[theta0], &g);
        assert_relative_eq!(p[0], 3.0 * 8.0, max_relative = 1e-12);
    }

    #[test]
    fn scenario_validation() {
        let s = scenario(4, 6, 1, 16, 1);
        assert!(s.validate().is_ok());
        let mut bad = s.clone();
        bad.frame_len = 4;
        assert!(matches!(
            bad.validate(),
            Err(ScenarioError::FrameTooShort { .. })
        ));
        let mut bad = s.clone();
        bad.geometry = ArrayGeometry { n_tx: 4, n_rx: 4 };
        assert!(matches!(
            bad.validate(),
            Err(ScenarioError::Ordering { .. })
        ));
        let mut bad = s.clone();
        bad.sinr_thresholds = vec![0.0];
        assert!(matches!(bad.validate(), Err(ScenarioError::NonPositive(_))));
        let mut bad = s;
        bad.noise_radar = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn schur_value_at_identity() {
        let g = ArrayGeometry::new(4, 6).unwrap();
        let t = PointTraces::new(&identity(4), 0.4, &g);
        assert!(t.da.norm() < 1e-12);
        let (_, dd, _) = traces_full(&identity(4), 0.4, &g);
        assert_relative_eq!(t.schur(), dd, max_relative = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn factored_traces_match_full(seed in 0u64..1000, theta in -1.4f64..1.4) {
            let g = ArrayGeometry::new(5, 7).unwrap();
            let r = random_psd(5, seed);
            let t = PointTraces::new(&r, theta, &g);
            let (aa, dd, d_a) = traces_full(&r, theta, &g);
            prop_assert!((t.aa - aa).abs() <= 1e-10 * aa);
            prop_assert!((t.dd - dd).abs() <= 1e-10 * dd);
            prop_assert!((t.da - d_a).norm() <= 1e-10 * dd.max(aa));
        }

        #[test]
        fn crb_homogeneous(seed in 0u64..1000, c in 0.01f64..100.0) {
            let s = scenario(4, 6, 1, 16, seed);
            let r = random_psd(4, seed);
            let base = crb_point_theta(&r, 0.1, real(0.7), &s).unwrap();
            let scaled = crb_point_theta(&r.scale(c), 0.1, real(0.7), &s).unwrap();
            prop_assert!((scaled * c - base).abs() <= 1e-10 * base);
            let base = crb_point_alpha(&r, 0.1, &s).unwrap();
            let scaled = crb_point_alpha(&r.scale(c), 0.1, &s).unwrap();
            prop_assert!((scaled * c - base).abs() <= 1e-10 * base);
            prop_assert!(base > 0.0);
            let base = crb_extended(&r, &s).unwrap();
            let scaled = crb_extended(&r.scale(c), &s).unwrap();
            prop_assert!((scaled * c - base).abs() <= 1e-10 * base);
        }

        #[test]
        fn extended_crb_amhm_bound(seed in 0u64..1000) {
            let s = scenario(6, 8, 1, 16, seed);
            let r = random_psd(6, seed);
            let bound = extended_scale(&s) * 36.0 / trace(&r).re;
            prop_assert!(crb_extended(&r, &s).unwrap() >= bound * (1.0 - 1e-12));
        }

        #[test]
        fn sinr_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let mut s = scenario(4, 6, 2, 16, seed);
            let w = complex_gaussian_matrix(4, 2, 1.0, &mut seeded_rng(seed, 7));
            let before = sinr_with(&w, None, 1, &s).unwrap();
            s.noise_comm *= c;
            let after = sinr_with(&w.scale(c.sqrt()), None, 1, &s).unwrap();
            prop_assert!(before >= 0.0);
            prop_assert!((before - after).abs() <= 1e-10 * before.max(1e-300));
        }
    }

    #[test]
    fn unit_conversions() {
        assert_relative_eq!(dbm_to_mw(30.0), 1000.0, max_relative = 1e-14);
        assert_relative_eq!(dbm_to_mw(0.0), 1.0);
        assert_relative_eq!(linear_to_db(db_to_linear(15.0)), 15.0, max_relative = 1e-14);
        let a = alpha_magnitude_for_snr(db_to_linear(20.0), 30, 1000.0, 1.0);
        assert_relative_eq!(a * a * 30.0 * 1000.0, 100.0, max_relative = 1e-12);
    }
}
