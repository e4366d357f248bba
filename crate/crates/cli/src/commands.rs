//! Ad-hoc design, evaluation and verification of a single scenario.

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::{beampattern_table, design_for};
use crate::table::ResultTable;
use dfrc::designs::extended_single_user_covariance;
use dfrc::metrics::{
    crb_extended, crb_point_theta, linear_to_db, sinr_from_covariance, DesignSolution, Scenario,
    Target,
};
use dfrc::verify::{
    check_kkt_point, check_rank_condition, check_single_user_extended,
    reconstruct_single_user_duals, KktReport, RankCondition, SingleUserExtendedReport,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A design together with the scenario it was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedDesign {
    pub scenario: Scenario,
    pub solution: DesignSolution,
}

impl SavedDesign {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }
}

pub fn design(cfg: &ExperimentConfig) -> Result<SavedDesign, CliError> {
    let scenario = cfg.scenario(cfg.users, cfg.sinr_db, cfg.target);
    let solution = design_for(&scenario)?;
    Ok(SavedDesign { scenario, solution })
}

/// Estimation bound and per-user SINR recomputed from the saved beamformers.
pub fn evaluate(saved: &SavedDesign, cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let SavedDesign { scenario, solution } = saved;
    let r_x = &solution.covariance;
    let users = scenario.users();
    let mut columns = vec!["objective".to_string(), "transmit_power".to_string()];
    columns.extend((0..users).map(|k| format!("sinr_db_user{k}")));
    let mut table = ResultTable::new(columns, cfg);
    let objective = match &scenario.target {
        Target::Point(t) => crb_point_theta(r_x, t.theta, t.alpha, scenario)?,
        Target::Extended(_) => crb_extended(r_x, scenario)?,
    };
    let mut row = vec![Some(objective), Some(r_x.trace().re)];
    for k in 0..users {
        let w = solution.beamformer(k);
        let wk = &w * w.adjoint();
        row.push(Some(linear_to_db(sinr_from_covariance(
            &wk,
            r_x,
            &scenario.channel(k),
            scenario.noise_comm,
        ))));
    }
    table.push(row);
    Ok(table)
}

pub fn evaluate_beampattern(saved: &SavedDesign, cfg: &ExperimentConfig) -> ResultTable {
    beampattern_table(&saved.solution.covariance, &saved.scenario, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Point designs: KKT residuals with the solver's (or reconstructed) multipliers.
    pub kkt: Option<KktReport>,
    /// Point designs: whether `H·[a, ȧ]` has full column rank.
    pub rank_condition: Option<RankCondition>,
    /// Single-user extended designs: closed-form optimality residuals.
    pub single_user_extended: Option<SingleUserExtendedReport>,
    pub max_residual: f64,
}

pub fn verify(saved: &SavedDesign) -> Result<VerificationReport, CliError> {
    let SavedDesign { scenario, solution } = saved;
    let mut report = VerificationReport {
        kkt: None,
        rank_condition: None,
        single_user_extended: None,
        max_residual: 0.0,
    };
    match &scenario.target {
        Target::Point(t) => {
            let duals = match (&solution.diagnostics.point_duals, scenario.users()) {
                (Some(d), _) => d.clone(),
                (None, 1) => reconstruct_single_user_duals(&solution.beamformer(0), scenario),
                (None, _) => return Err(CliError::Config("design carries no multipliers".into())),
            };
            let kkt = check_kkt_point(solution, &duals, scenario);
            report.max_residual = kkt.max_residual();
            report.kkt = Some(kkt);
            report.rank_condition = Some(check_rank_condition(
                &scenario.channels,
                t.theta,
                &scenario.geometry,
            ));
        }
        Target::Extended(_) if scenario.users() == 1 => {
            let h = scenario.channel(0);
            let (gamma, power, noise) = (
                scenario.sinr_thresholds[0],
                scenario.power_budget,
                scenario.noise_comm,
            );
            let closed = extended_single_user_covariance(&h, gamma, power, noise)?;
            let r = check_single_user_extended(&h, gamma, power, noise, &closed);
            report.max_residual = r.max_residual();
            report.single_user_extended = Some(r);
        }
        Target::Extended(_) => {}
    }
    Ok(report)
}
