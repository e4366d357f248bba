//! Experiment configuration: JSON on disk, per-experiment defaults, validation.

use crate::error::CliError;
use clap::ValueEnum;
use dfrc::array_model::{random_extended_response, ArrayGeometry, PointTarget};
use dfrc::metrics::{
    alpha_magnitude_for_snr, db_to_linear, dbm_to_mw, ExtendedTarget, Scenario, Target,
};
use dfrc::numerics::{real, CMatrix};
use dfrc::random::{complex_gaussian_matrix, seeded_rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

const CHANNEL_STREAM: u64 = 0xC4A7;
const RESPONSE_STREAM: u64 = 0x6E5B;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Custom,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Fig6 => "fig6",
            Self::Fig7 => "fig7",
            Self::Custom => "custom",
        }
    }
}

/// Inclusive arithmetic grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub const fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn validate(&self, name: &str) -> Result<(), CliError> {
        let finite = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !finite || self.step <= 0.0 || self.stop < self.start {
            return Err(CliError::Config(format!(
                "{name}: need finite start <= stop and step > 0"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Point {
        theta_deg: f64,
    },
    /// Response drawn i.i.d. CN(0,1) from the run seed.
    Extended,
}

/// On-disk form: every key optional, missing keys take the experiment's defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentId>,
    pub n_tx: Option<usize>,
    pub n_rx: Option<usize>,
    pub users: Option<usize>,
    pub power_dbm: Option<f64>,
    pub noise_comm_dbm: Option<f64>,
    pub noise_radar_dbm: Option<f64>,
    pub frame_len: Option<usize>,
    pub sinr_db: Option<f64>,
    pub sinr_sweep_db: Option<Sweep>,
    pub snr_radar_db: Option<f64>,
    pub snr_sweep_db: Option<Sweep>,
    pub user_counts: Option<Vec<usize>>,
    pub sinr_levels_db: Option<Vec<f64>>,
    pub target: Option<TargetSpec>,
    pub beampattern_step_deg: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved configuration. Powers are kept in dBm for the record and
/// converted to mW once, at resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub n_tx: usize,
    pub n_rx: usize,
    pub users: usize,
    pub power_dbm: f64,
    pub noise_comm_dbm: f64,
    pub noise_radar_dbm: f64,
    pub frame_len: usize,
    pub sinr_db: f64,
    pub sinr_sweep_db: Sweep,
    pub snr_radar_db: f64,
    pub snr_sweep_db: Sweep,
    pub user_counts: Vec<usize>,
    pub sinr_levels_db: Vec<f64>,
    pub target: TargetSpec,
    pub beampattern_step_deg: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip)]
    pub power_mw: f64,
    #[serde(skip)]
    pub noise_comm_mw: f64,
    #[serde(skip)]
    pub noise_radar_mw: f64,
}

impl ExperimentConfig {
    /// Array and power defaults of the reference setup plus per-figure settings.
    pub fn defaults(experiment: ExperimentId) -> ConfigFile {
        use ExperimentId::*;
        let point = TargetSpec::Point { theta_deg: 0.0 };
        let (users, target) = match experiment {
            Fig2 => (1, point),
            Fig6 | Fig7 => (12, TargetSpec::Extended),
            _ => (4, point),
        };
        let user_counts = match experiment {
            Fig7 => (1..=12).collect(),
            _ => vec![6, 12],
        };
        let sinr_sweep = match experiment {
            Fig2 => Sweep::new(0.0, 40.0, 2.0),
            _ => Sweep::new(0.0, 24.0, 2.0),
        };
        ConfigFile {
            experiment: Some(experiment),
            n_tx: Some(16),
            n_rx: Some(20),
            users: Some(users),
            power_dbm: Some(30.0),
            noise_comm_dbm: Some(0.0),
            noise_radar_dbm: Some(0.0),
            frame_len: Some(30),
            sinr_db: Some(15.0),
            sinr_sweep_db: Some(sinr_sweep),
            snr_radar_db: Some(10.0),
            snr_sweep_db: Some(Sweep::new(-10.0, 40.0, 2.0)),
            user_counts: Some(user_counts),
            sinr_levels_db: Some(vec![10.0, 20.0]),
            target: Some(target),
            beampattern_step_deg: Some(0.5),
            trials: Some(1000),
            seed: Some(1),
        }
    }

    /// Merges `file` over the defaults of its experiment (or `fallback`).
    pub fn resolve(file: ConfigFile, fallback: ExperimentId) -> Result<Self, CliError> {
        let experiment = file.experiment.unwrap_or(fallback);
        let d = Self::defaults(experiment);
        macro_rules! pick {
            ($f:ident) => {
                file.$f.or(d.$f).expect("every default is set")
            };
        }
        let mut cfg = Self {
            experiment,
            n_tx: pick!(n_tx),
            n_rx: pick!(n_rx),
            users: pick!(users),
            power_dbm: pick!(power_dbm),
            noise_comm_dbm: pick!(noise_comm_dbm),
            noise_radar_dbm: pick!(noise_radar_dbm),
            frame_len: pick!(frame_len),
            sinr_db: pick!(sinr_db),
            sinr_sweep_db: pick!(sinr_sweep_db),
            snr_radar_db: pick!(snr_radar_db),
            snr_sweep_db: pick!(snr_sweep_db),
            user_counts: pick!(user_counts),
            sinr_levels_db: pick!(sinr_levels_db),
            target: pick!(target),
            beampattern_step_deg: pick!(beampattern_step_deg),
            trials: pick!(trials),
            seed: pick!(seed),
            power_mw: 0.0,
            noise_comm_mw: 0.0,
            noise_radar_mw: 0.0,
        };
        cfg.refresh_linear();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn for_experiment(experiment: ExperimentId) -> Self {
        Self::resolve(ConfigFile::default(), experiment).expect("defaults are valid")
    }

    fn refresh_linear(&mut self) {
        self.power_mw = dbm_to_mw(self.power_dbm);
        self.noise_comm_mw = dbm_to_mw(self.noise_comm_dbm);
        self.noise_radar_mw = dbm_to_mw(self.noise_radar_dbm);
    }

    /// Re-derives the linear powers after fields were edited in place.
    pub fn revalidate(mut self) -> Result<Self, CliError> {
        self.refresh_linear();
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.n_tx == 0 || self.n_rx == 0 {
            return bad("antenna counts must be positive");
        }
        if self.users == 0 || self.user_counts.is_empty() || self.user_counts.contains(&0) {
            return bad("user counts must be positive");
        }
        if self.frame_len == 0 || self.trials == 0 {
            return bad("frame_len and trials must be positive");
        }
        let scalars = [
            self.power_dbm,
            self.noise_comm_dbm,
            self.noise_radar_dbm,
            self.sinr_db,
            self.snr_radar_db,
            self.beampattern_step_deg,
        ];
        if scalars
            .iter()
            .chain(&self.sinr_levels_db)
            .any(|x| !x.is_finite())
            || self.sinr_levels_db.is_empty()
        {
            return bad("power, noise, SINR and SNR settings must be finite");
        }
        if self.beampattern_step_deg <= 0.0 {
            return bad("beampattern_step_deg must be positive");
        }
        self.sinr_sweep_db.validate("sinr_sweep_db")?;
        self.snr_sweep_db.validate("snr_sweep_db")?;
        if let TargetSpec::Point { theta_deg } = self.target {
            if !(theta_deg.abs() < 90.0) {
                return bad("target angle must lie in (-90, 90) degrees");
            }
        }
        // catches everything else the designers check
        self.scenario(self.max_users(), self.sinr_db, self.target)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry::new(self.n_tx, self.n_rx).expect("validated antenna counts")
    }

    /// Largest user count the experiment touches; `user_counts` only matters
    /// to the sweeps over K.
    pub fn max_users(&self) -> usize {
        let swept = match self.experiment {
            ExperimentId::Fig5 | ExperimentId::Fig6 | ExperimentId::Fig7 => {
                self.user_counts.iter().copied().max()
            }
            _ => None,
        };
        swept.unwrap_or(0).max(self.users)
    }

    /// User channels (row `k` is `h_kᴴ`, i.i.d. CN(0,1)). Fixed by the seed and
    /// nested: the first `K` rows are shared by every sweep over `K`.
    pub fn channels(&self) -> CMatrix {
        let mut rng = seeded_rng(self.seed, CHANNEL_STREAM);
        complex_gaussian_matrix(self.max_users(), self.n_tx, 1.0, &mut rng)
    }

    pub fn extended_response(&self) -> CMatrix {
        random_extended_response(
            &self.geometry(),
            &mut seeded_rng(self.seed, RESPONSE_STREAM),
        )
    }

    /// Point target at the configured angle with `|α|` set by `snr_db`.
    pub fn point_target(&self, theta_deg: f64, snr_db: f64) -> Target {
        let alpha = alpha_magnitude_for_snr(
            db_to_linear(snr_db),
            self.frame_len,
            self.power_mw,
            self.noise_radar_mw,
        );
        Target::Point(PointTarget {
            theta: theta_deg.to_radians(),
            alpha: real(alpha),
        })
    }

    pub fn target(&self, spec: TargetSpec) -> Target {
        match spec {
            TargetSpec::Point { theta_deg } => self.point_target(theta_deg, self.snr_radar_db),
            TargetSpec::Extended => Target::Extended(ExtendedTarget {
                response: self.extended_response(),
            }),
        }
    }

    /// Scenario with the first `users` channels and a common threshold.
    pub fn scenario(&self, users: usize, sinr_db: f64, target: TargetSpec) -> Scenario {
        let channels = self.channels().rows(0, users).into_owned();
        Scenario {
            geometry: self.geometry(),
            channels,
            sinr_thresholds: vec![db_to_linear(sinr_db); users],
            power_budget: self.power_mw,
            noise_comm: self.noise_comm_mw,
            noise_radar: self.noise_radar_mw,
            frame_len: self.frame_len,
            target: self.target(target),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
