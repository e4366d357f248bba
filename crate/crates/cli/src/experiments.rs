//! Figure sweeps. Sweep points run concurrently and are assembled in sweep order.

use crate::config::{ExperimentConfig, ExperimentId, TargetSpec};
use crate::error::CliError;
use crate::table::ResultTable;
use dfrc::designs::{
    design_extended_from, design_extended_multi, design_extended_single, design_point_multi,
    design_point_single, design_sdp_options, eigen_truncation_baseline, solve_extended_relaxation,
    solve_point_relaxation, DesignError,
};
use dfrc::metrics::{
    beampattern, crb_extended, crb_point_theta, linear_to_db, DesignSolution, Scenario, Target,
};
use dfrc::numerics::CMatrix;
use dfrc::sim::{monte_carlo_point, MonteCarloConfig};
use rayon::prelude::*;

/// Closed form for a single user, relaxation plus extraction otherwise.
pub fn design_for(scenario: &Scenario) -> Result<DesignSolution, DesignError> {
    match (&scenario.target, scenario.users()) {
        (Target::Point(_), 1) => design_point_single(scenario),
        (Target::Point(_), _) => design_point_multi(scenario),
        (Target::Extended(_), 1) => design_extended_single(scenario),
        (Target::Extended(_), _) => design_extended_multi(scenario),
    }
}

/// Infeasible sweep points become gaps; anything else aborts the run.
fn or_gap<T>(r: Result<T, DesignError>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) => match CliError::from(e) {
            CliError::Infeasible(_) => Ok(None),
            other => Err(other),
        },
    }
}

fn root_crb_deg(crb: f64) -> f64 {
    crb.sqrt().to_degrees()
}

fn point_crb(r_x: &CMatrix, scenario: &Scenario) -> Result<f64, CliError> {
    let Target::Point(t) = &scenario.target else {
        return Err(CliError::Config("point target required".into()));
    };
    Ok(crb_point_theta(r_x, t.theta, t.alpha, scenario)?)
}

fn sweep<T, R, F>(points: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R, CliError> + Sync + Send,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| f(i, p))
        .collect()
}

fn point_spec(cfg: &ExperimentConfig) -> TargetSpec {
    match cfg.target {
        TargetSpec::Point { .. } => cfg.target,
        TargetSpec::Extended => TargetSpec::Point { theta_deg: 0.0 },
    }
}

fn label(x: f64) -> String {
    format!("{x}")
}

pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    match cfg.experiment {
        ExperimentId::Fig2 => run_fig2(cfg),
        ExperimentId::Fig3 => run_fig3(cfg),
        ExperimentId::Fig4 => run_fig4(cfg),
        ExperimentId::Fig5 => run_fig5(cfg),
        ExperimentId::Fig6 => run_fig6(cfg),
        ExperimentId::Fig7 => run_fig7(cfg),
        ExperimentId::Custom => run_custom(cfg),
    }
}

/// Single user: closed forms against their relaxations over the Γ sweep.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let columns = [
        "sinr_db",
        "root_crb_closed_deg",
        "root_crb_sdp_deg",
        "mse_closed",
        "mse_sdp",
        "point_rel_gap",
        "extended_rel_gap",
    ];
    let mut table = ResultTable::new(columns.map(String::from).to_vec(), cfg);
    let gammas = cfg.sinr_sweep_db.points();
    let opts = design_sdp_options();
    let rows = sweep(&gammas, |_, &g| {
        let point = cfg.scenario(1, g, point_spec(cfg));
        let crb_closed = or_gap(design_point_single(&point))?.map(|s| s.objective);
        let crb_sdp = match or_gap(solve_point_relaxation(&point, &opts))? {
            Some(r) => Some(point_crb(&r.covariance(), &point)?),
            None => None,
        };
        let ext = cfg.scenario(1, g, TargetSpec::Extended);
        let mse_closed = or_gap(design_extended_single(&ext))?.map(|s| s.objective);
        let mse_sdp = match or_gap(solve_extended_relaxation(&ext, &opts))? {
            Some(r) => Some(crb_extended(&r.covariance(), &ext)?),
            None => None,
        };
        let gap = |a: Option<f64>, b: Option<f64>| Some((a? - b?).abs() / a?);
        Ok(vec![
            Some(g),
            crb_closed.map(root_crb_deg),
            crb_sdp.map(root_crb_deg),
            mse_closed,
            mse_sdp,
            gap(crb_closed, crb_sdp),
            gap(mse_closed, mse_sdp),
        ])
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    table.note("sinr_step_db", cfg.sinr_sweep_db.step);
    Ok(table)
}

/// Transmit beampattern `aᴴ(θ)R_Xa(θ)` over (−90°, 90°).
pub fn beampattern_table(
    r_x: &CMatrix,
    scenario: &Scenario,
    cfg: &ExperimentConfig,
) -> ResultTable {
    let mut table = ResultTable::new(
        vec!["theta_deg".into(), "power".into(), "power_rel_db".into()],
        cfg,
    );
    let step = cfg.beampattern_step_deg;
    let n = (180.0 / step).floor() as i64;
    let angles: Vec<f64> = (0..=n)
        .map(|i| -90.0 + i as f64 * step)
        .filter(|a| *a <= 90.0)
        .collect();
    let rad: Vec<f64> = angles.iter().map(|a| a.to_radians()).collect();
    let p = beampattern(r_x, &rad, &scenario.geometry);
    let peak = p.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    for (a, v) in angles.iter().zip(&p) {
        table.push(vec![
            Some(*a),
            Some(*v),
            Some(linear_to_db(v.max(1e-300) / peak)),
        ]);
    }
    table.note("theta_step_deg", step);
    table
}

pub fn run_fig3(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let scenario = cfg.scenario(cfg.users, cfg.sinr_db, point_spec(cfg));
    let solution = design_for(&scenario)?;
    Ok(beampattern_table(&solution.covariance, &scenario, cfg))
}

/// Per-sweep-point Monte Carlo seed.
fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ ((index as u64 + 1) << 40)
}

/// Angle MLE RMSE against √CRB(θ) over the radar SNR sweep, one design for all points.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let columns = ["snr_db", "rmse_deg", "root_crb_deg", "ratio"];
    let mut table = ResultTable::new(columns.map(String::from).to_vec(), cfg);
    let spec = point_spec(cfg);
    let base = cfg.scenario(cfg.users, cfg.sinr_db, spec);
    // |α| only scales the objective, so the design is shared across SNRs
    let solution = design_for(&base)?;
    let TargetSpec::Point { theta_deg } = spec else {
        unreachable!()
    };
    let snrs = cfg.snr_sweep_db.points();
    let rows = sweep(&snrs, |i, &snr| {
        let mut s = base.clone();
        s.target = cfg.point_target(theta_deg, snr);
        let mc = MonteCarloConfig {
            trials: cfg.trials,
            seed: point_seed(cfg.seed, i),
        };
        let r = monte_carlo_point(&s, &solution, &mc)?;
        Ok(vec![
            Some(snr),
            Some(r.rmse_theta.to_degrees()),
            Some(r.root_crb_theta.to_degrees()),
            Some(r.ratio()),
        ])
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    table.note("snr_step_db", cfg.snr_sweep_db.step);
    table.note("trials", cfg.trials);
    table.note(
        "mle_grid",
        "target angle +/- 10 deg, 0.05 deg step, parabolic refinement",
    );
    Ok(table)
}

/// Point target, multiple users: √CRB(θ) against Γ for each user count.
pub fn run_fig5(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let mut columns = vec!["sinr_db".to_string()];
    columns.extend(cfg.user_counts.iter().map(|k| format!("root_crb_deg_k{k}")));
    let mut table = ResultTable::new(columns, cfg);
    let gammas = cfg.sinr_sweep_db.points();
    let rows = sweep(&gammas, |_, &g| {
        let mut row = vec![Some(g)];
        for &k in &cfg.user_counts {
            let s = cfg.scenario(k, g, point_spec(cfg));
            row.push(or_gap(design_for(&s))?.map(|sol| root_crb_deg(sol.objective)));
        }
        Ok(row)
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    table.note("sinr_step_db", cfg.sinr_sweep_db.step);
    table.note("gaps", table.gaps());
    Ok(table)
}

/// Extended design MSE and its eigen-truncation baseline at one (K, Γ).
fn extended_pair(
    cfg: &ExperimentConfig,
    users: usize,
    gamma_db: f64,
) -> Result<[Option<f64>; 2], CliError> {
    let s = cfg.scenario(users, gamma_db, TargetSpec::Extended);
    let Some(relaxation) = or_gap(solve_extended_relaxation(&s, &design_sdp_options()))? else {
        return Ok([None, None]);
    };
    let optimum = or_gap(design_extended_from(&s, &relaxation))?.map(|d| d.objective);
    let baseline = or_gap(eigen_truncation_baseline(&s, &relaxation))?.map(|d| d.objective);
    Ok([optimum, baseline])
}

/// Extended target: MSE against Γ for each user count, with the baseline.
pub fn run_fig6(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let mut columns = vec!["sinr_db".to_string()];
    for k in &cfg.user_counts {
        columns.push(format!("mse_k{k}"));
        columns.push(format!("mse_eig_k{k}"));
    }
    let mut table = ResultTable::new(columns, cfg);
    let gammas = cfg.sinr_sweep_db.points();
    let rows = sweep(&gammas, |_, &g| {
        let mut row = vec![Some(g)];
        for &k in &cfg.user_counts {
            row.extend(extended_pair(cfg, k, g)?);
        }
        Ok(row)
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    table.note("sinr_step_db", cfg.sinr_sweep_db.step);
    table.note("gaps", table.gaps());
    Ok(table)
}

/// Extended target: MSE against the number of users for each Γ level.
pub fn run_fig7(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let mut columns = vec!["users".to_string()];
    for g in &cfg.sinr_levels_db {
        columns.push(format!("mse_g{}db", label(*g)));
        columns.push(format!("mse_eig_g{}db", label(*g)));
    }
    let mut table = ResultTable::new(columns, cfg);
    let rows = sweep(&cfg.user_counts, |_, &k| {
        let mut row = vec![Some(k as f64)];
        for &g in &cfg.sinr_levels_db {
            row.extend(extended_pair(cfg, k, g)?);
        }
        Ok(row)
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    table.note("gaps", table.gaps());
    Ok(table)
}

/// One design at the configured `users`, `sinr_db` and target.
pub fn run_custom(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let columns = [
        "users",
        "sinr_db",
        "objective",
        "min_sinr_db",
        "transmit_power",
    ];
    let mut table = ResultTable::new(columns.map(String::from).to_vec(), cfg);
    let s = cfg.scenario(cfg.users, cfg.sinr_db, cfg.target);
    let sol = design_for(&s)?;
    let min_sinr = sol
        .achieved_sinrs
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    table.push(vec![
        Some(cfg.users as f64),
        Some(cfg.sinr_db),
        Some(sol.objective),
        Some(linear_to_db(min_sinr)),
        Some(sol.covariance.trace().re),
    ]);
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ConfigFile, Sweep};

    fn small(experiment: ExperimentId) -> ExperimentConfig {
        let file = ConfigFile {
            n_tx: Some(6),
            n_rx: Some(8),
            users: Some(2),
            power_dbm: Some(30.0),
            trials: Some(40),
            sinr_sweep_db: Some(Sweep::new(0.0, 12.0, 6.0)),
            user_counts: Some(vec![2, 3]),
            ..Default::default()
        };
        ExperimentConfig::resolve(file, experiment).unwrap()
    }

    #[test]
    fn infeasible_points_are_gaps() {
        let mut cfg = small(ExperimentId::Fig5);
        cfg.sinr_sweep_db = Sweep::new(0.0, 80.0, 80.0);
        let t = run_fig5(&cfg).unwrap();
        assert!(t.rows[0][1..].iter().all(Option::is_some));
        assert!(t.rows[1][1..].iter().all(Option::is_none));
    }

    #[test]
    fn beampattern_grid_and_peak() {
        let cfg = small(ExperimentId::Fig3);
        let t = run_fig3(&cfg).unwrap();
        assert_eq!(t.rows.len(), 361);
        let p = t.column("power").unwrap();
        let best = (0..p.len())
            .max_by(|&i, &j| p[i].partial_cmp(&p[j]).unwrap())
            .unwrap();
        // small array: the mainlobe may lean a grid step towards the users
        assert!(t.rows[best][0].unwrap().abs() <= 2.0);
    }

    #[test]
    fn fig7_columns() {
        let mut cfg = small(ExperimentId::Fig7);
        cfg.sinr_levels_db = vec![10.0];
        let t = run_fig7(&cfg).unwrap();
        assert_eq!(t.columns, vec!["users", "mse_g10db", "mse_eig_g10db"]);
        for r in &t.rows {
            assert!(r[1].unwrap() <= r[2].unwrap() * (1.0 + 1e-9));
        }
    }
}
