//! Signal-level simulation: orthogonal data streams, transmit synthesis, radar
//! echoes, maximum-likelihood estimators and Monte Carlo error studies.

use crate::array_model::{steering, ArrayGeometry};
use crate::metrics::{
    crb_extended, crb_point_theta, DesignSolution, MetricsError, Scenario, Target,
};
use crate::numerics::{herm_eig_unchecked, hpd_inverse, quad_form, CMatrix};
use crate::random::{complex_gaussian_matrix, seeded_rng, DfrcRng};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{streams} orthogonal streams do not fit in {frame_len} samples")]
    TooManyStreams { streams: usize, frame_len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("transmit signal has no energy towards any grid angle")]
    DegenerateSignal,
    #[error("transmit Gram matrix XXᴴ is singular (eigenvalue ratio {ratio:e})")]
    SingularGram { ratio: f64 },
    #[error("scenario target does not match the estimator")]
    WrongTarget,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// RNG stream ids used under one seed.
const STREAM_DATA: u64 = 0x5354;
const STREAM_NOISE: u64 = 0x4e4f;

/// Data streams, one per row, with `(1/L)·S·Sᴴ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamMatrix {
    pub data: CMatrix,
}

impl StreamMatrix {
    pub fn streams(&self) -> usize {
        self.data.nrows()
    }

    pub fn frame_len(&self) -> usize {
        self.data.ncols()
    }

    /// Largest entry of `(1/L)·S·Sᴴ − I` in magnitude.
    pub fn gram_deviation(&self) -> f64 {
        let l = self.frame_len() as f64;
        let g = (&self.data * self.data.adjoint()).unscale(l);
        let n = g.nrows();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                (g[(i, j)]
                    - if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    })
                .norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Orthonormalized Gaussian rows scaled by `√L`.
pub fn gen_streams_with(
    n_streams: usize,
    frame_len: usize,
    rng: &mut DfrcRng,
) -> Result<StreamMatrix, SimError> {
    if n_streams > frame_len {
        return Err(SimError::TooManyStreams {
            streams: n_streams,
            frame_len,
        });
    }
    if n_streams == 0 {
        return Ok(StreamMatrix {
            data: CMatrix::zeros(0, frame_len),
        });
    }
    let g = complex_gaussian_matrix(frame_len, n_streams, 1.0, rng);
    let q = g.qr().q();
    let data = q.adjoint().scale((frame_len as f64).sqrt());
    Ok(StreamMatrix { data })
}

pub fn gen_streams(
    n_streams: usize,
    frame_len: usize,
    seed: u64,
) -> Result<StreamMatrix, SimError> {
    gen_streams_with(n_streams, frame_len, &mut seeded_rng(seed, STREAM_DATA))
}

/// `X = W·S`.
pub fn synth_tx(beamformers: &CMatrix, streams: &StreamMatrix) -> Result<CMatrix, SimError> {
    if beamformers.ncols() != streams.streams() {
        return Err(SimError::DimensionMismatch(format!(
            "{} beamformers for {} streams",
            beamformers.ncols(),
            streams.streams()
        )));
    }
    Ok(beamformers * &streams.data)
}

/// Target response matrix `G` (`N_r × N_t`).
pub fn target_response(target: &Target, geometry: &ArrayGeometry) -> CMatrix {
    match target {
        Target::Point(t) => t.response(geometry),
        Target::Extended(t) => t.response.clone(),
    }
}

/// `Y = G·X + Z` with i.i.d. `CN(0, σ_R²)` noise.
pub fn radar_echo_with(
    x: &CMatrix,
    response: &CMatrix,
    noise: f64,
    rng: &mut DfrcRng,
) -> Result<CMatrix, SimError> {
    if response.ncols() != x.nrows() {
        return Err(SimError::DimensionMismatch(format!(
            "response has {} columns, signal has {} rows",
            response.ncols(),
            x.nrows()
        )));
    }
    let clean = response * x;
    if noise == 0.0 {
        return Ok(clean);
    }
    Ok(clean + complex_gaussian_matrix(response.nrows(), x.ncols(), noise, rng))
}

pub fn radar_echo(
    x: &CMatrix,
    target: &Target,
    geometry: &ArrayGeometry,
    noise: f64,
    seed: u64,
) -> Result<CMatrix, SimError> {
    radar_echo_with(
        x,
        &target_response(target, geometry),
        noise,
        &mut seeded_rng(seed, STREAM_NOISE),
    )
}

/// Search window for the angle MLE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub center: f64,
    pub half_width: f64,
    pub step: f64,
}

impl GridSpec {
    /// ±10° around `center` in 0.05° steps.
    pub fn around(center: f64) -> Self {
        Self {
            center,
            half_width: 10f64.to_radians(),
            step: 0.05f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub theta: f64,
    pub alpha: Complex64,
}

/// Precomputed sufficient statistics `Y·Xᴴ` and `X·Xᴴ` of one frame.
struct PointStatistic {
    yx: CMatrix,
    xx: CMatrix,
    n_tx: usize,
    n_rx: usize,
}

impl PointStatistic {
    /// `(bᴴYXᴴa, aᴴXXᴴa)` at angle `theta`.
    fn terms(&self, theta: f64) -> (Complex64, f64) {
        let a = steering(theta, self.n_tx);
        let b = steering(theta, self.n_rx);
        let num = b.dotc(&(&self.yx * &a));
        (num, quad_form(&self.xx, &a).re)
    }

    /// Concentrated likelihood `|bᴴYXᴴa|²/(N_r·aᴴXXᴴa)`, to be maximized.
    fn score(&self, theta: f64) -> Option<f64> {
        let (num, den) = self.terms(theta);
        (den > 0.0).then(|| num.norm_sqr() / (self.n_rx as f64 * den))
    }
}

/// Angle and reflection coefficient maximizing the Gaussian likelihood of
/// `Y = αb(θ)aᴴ(θ)X + Z`: grid search followed by iterated three-point
/// parabolic refinement.
pub fn mle_point(
    y: &CMatrix,
    x: &CMatrix,
    geometry: &ArrayGeometry,
    grid: &GridSpec,
) -> Result<PointEstimate, SimError> {
    if y.nrows() != geometry.n_rx || x.nrows() != geometry.n_tx || y.ncols() != x.ncols() {
        return Err(SimError::DimensionMismatch(format!(
            "echo {}x{}, signal {}x{}",
            y.nrows(),
            y.ncols(),
            x.nrows(),
            x.ncols()
        )));
    }
    let stat = PointStatistic {
        yx: y * x.adjoint(),
        xx: x * x.adjoint(),
        n_tx: geometry.n_tx,
        n_rx: geometry.n_rx,
    };
    let points = (2.0 * grid.half_width / grid.step).round() as i64;
    let start = grid.center - grid.half_width;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=points {
        let theta = start + i as f64 * grid.step;
        if let Some(s) = stat.score(theta) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((theta, s));
            }
        }
    }
    let (mut theta, mut value) = best.ok_or(SimError::DegenerateSignal)?;
    let mut h = grid.step;
    while h > 1e-12 {
        let (Some(lo), Some(hi)) = (stat.score(theta - h), stat.score(theta + h)) else {
            break;
        };
        let curvature = lo - 2.0 * value + hi;
        let mut next = theta;
        if curvature < 0.0 {
            let shift = 0.5 * h * (lo - hi) / curvature;
            next = theta + shift.clamp(-h, h);
        } else if lo > value || hi > value {
            next = if lo > hi { theta - h } else { theta + h };
        }
        if let Some(v) = stat.score(next) {
            if v >= value {
                theta = next;
                value = v;
            }
        }
        h *= 0.25;
    }
    let (num, den) = stat.terms(theta);
    Ok(PointEstimate {
        theta,
        alpha: num / (geometry.n_rx as f64 * den),
    })
}

/// Least-squares (= maximum-likelihood) response estimate `Ĝ = YXᴴ(XXᴴ)⁻¹`.
pub fn mle_extended(y: &CMatrix, x: &CMatrix) -> Result<CMatrix, SimError> {
    if y.ncols() != x.ncols() {
        return Err(SimError::DimensionMismatch(format!(
            "echo has {} samples, signal {}",
            y.ncols(),
            x.ncols()
        )));
    }
    let gram = x * x.adjoint();
    let eig = herm_eig_unchecked(&gram);
    let ratio = if eig.max() > 0.0 {
        eig.min() / eig.max()
    } else {
        0.0
    };
    if ratio <= 1e-12 {
        return Err(SimError::SingularGram { ratio });
    }
    let inv = hpd_inverse(&gram).map_err(|_| SimError::SingularGram { ratio })?;
    Ok(y * x.adjoint() * inv)
}

/// Outcome of one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub theta_hat: Option<f64>,
    pub alpha_hat: Option<Complex64>,
    pub g_hat: Option<CMatrix>,
    pub sq_error_theta: f64,
    pub sq_error_alpha: f64,
    /// `‖Ĝ − G‖_F²` (extended estimator only).
    pub sq_error_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub trials: usize,
    pub seed: u64,
    pub rmse_theta: f64,
    pub root_crb_theta: f64,
    pub mse_alpha: f64,
}

impl PointReport {
    pub fn ratio(&self) -> f64 {
        self.rmse_theta / self.root_crb_theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedReport {
    pub trials: usize,
    pub seed: u64,
    pub mse: f64,
    pub crb: f64,
    /// Largest `|mean(Ĝ − G)_ij|` over its Monte Carlo standard error.
    pub max_bias_sigma: f64,
}

impl ExtendedReport {
    pub fn ratio(&self) -> f64 {
        self.mse / self.crb
    }
}

/// Transmit frame for trial `trial`: fresh orthogonal streams through every beamformer.
fn trial_signal(
    solution: &DesignSolution,
    frame_len: usize,
    rng: &mut DfrcRng,
) -> Result<CMatrix, SimError> {
    let w = solution.stacked_beamformers();
    let s = gen_streams_with(w.ncols(), frame_len, rng)?;
    synth_tx(&w, &s)
}

/// One point-target frame under seed `(seed, trial)`.
pub fn point_trial(
    scenario: &Scenario,
    solution: &DesignSolution,
    grid: &GridSpec,
    seed: u64,
    trial: u64,
) -> Result<TrialResult, SimError> {
    let Target::Point(target) = &scenario.target else {
        return Err(SimError::WrongTarget);
    };
    let mut rng = seeded_rng(seed, trial);
    let x = trial_signal(solution, scenario.frame_len, &mut rng)?;
    let g = target.response(&scenario.geometry);
    let y = radar_echo_with(&x, &g, scenario.noise_radar, &mut rng)?;
    let est = mle_point(&y, &x, &scenario.geometry, grid)?;
    Ok(TrialResult {
        theta_hat: Some(est.theta),
        alpha_hat: Some(est.alpha),
        g_hat: None,
        sq_error_theta: (est.theta - target.theta).powi(2),
        sq_error_alpha: (est.alpha - target.alpha).norm_sqr(),
        sq_error_g: 0.0,
    })
}

/// One extended-target frame under seed `(seed, trial)`.
pub fn extended_trial(
    scenario: &Scenario,
    solution: &DesignSolution,
    seed: u64,
    trial: u64,
) -> Result<TrialResult, SimError> {
    let mut rng = seeded_rng(seed, trial);
    let x = trial_signal(solution, scenario.frame_len, &mut rng)?;
    let g = target_response(&scenario.target, &scenario.geometry);
    let y = radar_echo_with(&x, &g, scenario.noise_radar, &mut rng)?;
    let g_hat = mle_extended(&y, &x)?;
    let sq_error_g = (&g_hat - &g).norm_squared();
    Ok(TrialResult {
        theta_hat: None,
        alpha_hat: None,
        g_hat: Some(g_hat),
        sq_error_theta: 0.0,
        sq_error_alpha: 0.0,
        sq_error_g,
    })
}

/// Trials run in parallel, each from its own `(seed, trial)` stream, and are
/// reduced in trial order, so results do not depend on scheduling.
fn run_trials<F>(trials: usize, f: F) -> Result<Vec<TrialResult>, SimError>
where
    F: Fn(u64) -> Result<TrialResult, SimError> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

/// RMSE of the angle MLE against √CRB(θ) for a point-target design.
pub fn monte_carlo_point(
    scenario: &Scenario,
    solution: &DesignSolution,
    config: &MonteCarloConfig,
) -> Result<PointReport, SimError> {
    let Target::Point(target) = &scenario.target else {
        return Err(SimError::WrongTarget);
    };
    let grid = GridSpec::around(target.theta);
    let results = run_trials(config.trials, |t| {
        point_trial(scenario, solution, &grid, config.seed, t)
    })?;
    let n = results.len().max(1) as f64;
    let mse_theta = results.iter().map(|r| r.sq_error_theta).sum::<f64>() / n;
    let mse_alpha = results.iter().map(|r| r.sq_error_alpha).sum::<f64>() / n;
    let crb = crb_point_theta(&solution.covariance, target.theta, target.alpha, scenario)?;
    Ok(PointReport {
        trials: config.trials,
        seed: config.seed,
        rmse_theta: mse_theta.sqrt(),
        root_crb_theta: crb.sqrt(),
        mse_alpha,
    })
}

/// MSE of `Ĝ` against CRB(G) for an extended-target design.
pub fn monte_carlo_extended(
    scenario: &Scenario,
    solution: &DesignSolution,
    config: &MonteCarloConfig,
) -> Result<ExtendedReport, SimError> {
    let g = target_response(&scenario.target, &scenario.geometry);
    let results = run_trials(config.trials, |t| {
        extended_trial(scenario, solution, config.seed, t)
    })?;
    let n = results.len().max(1) as f64;
    let mse = results.iter().map(|r| r.sq_error_g).sum::<f64>() / n;
    let (rows, cols) = g.shape();
    let mut mean = CMatrix::zeros(rows, cols);
    let mut second = nalgebra::DMatrix::<f64>::zeros(rows, cols);
    for r in &results {
        let e = r.g_hat.as_ref().expect("extended trial") - &g;
        mean += &e;
        second += e.map(|z| z.norm_sqr());
    }
    mean.unscale_mut(n);
    let mut max_bias_sigma = 0.0f64;
    for i in 0..rows {
        for j in 0..cols {
            let var = (second[(i, j)] / n - mean[(i, j)].norm_sqr()).max(0.0);
            let se = (var / n).sqrt();
            if se > 0.0 {
                max_bias_sigma = max_bias_sigma.max(mean[(i, j)].norm() / se);
            }
        }
    }
    let crb = crb_extended(&solution.covariance, scenario)?;
    Ok(ExtendedReport {
        trials: config.trials,
        seed: config.seed,
        mse,
        crb,
        max_bias_sigma,
    })
}

/// Echo SNR estimate `‖GX‖_F²·L/‖Z‖_F²` for one frame; its mean over frames
/// approaches `|α|²·L·aᴴR_Xa/σ_R²`.
pub fn empirical_snr(
    x: &CMatrix,
    response: &CMatrix,
    noise: f64,
    rng: &mut DfrcRng,
) -> Result<f64, SimError> {
    let clean = response * x;
    let y = radar_echo_with(x, response, noise, rng)?;
    let z = &y - &clean;
    Ok(clean.norm_squared() * x.ncols() as f64 / z.norm_squared())
}
