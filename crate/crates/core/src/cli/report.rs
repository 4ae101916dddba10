use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::output::{line_chart, trajectory_csv};
use super::schema::ScenarioFile;
use super::{to_file, Scenario, ScenarioError};
use crate::dynamics::{check_conditions, run, DynamicsError, RunOutcome, Scheme, SchemeConfig, TerminalStatus};
use crate::game::{loss_of_efficiency, solve_ne_direct, solve_team, ActiveStatus, Equilibrium, GameError, GameSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) => 1,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlayerRow {
    pub bus: u32,
    pub p_gen_mw: f64,
    pub p_net_mw: f64,
    pub theta_rad: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionSummary {
    pub scheme: String,
    pub ratio_max: f64,
    pub c1: f64,
    pub c2: f64,
    pub tau_max: f64,
    pub tau_min: f64,
    pub iua_condition_met: bool,
    pub rua_condition_met: bool,
    /// The condition that applies to the configured scheme.
    pub selected_condition_met: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub equilibrium: Vec<PlayerRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub team_optimum: Option<Vec<PlayerRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loe: Option<f64>,
    pub conditions: ConditionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_status: Option<String>,
    pub slack_mw: f64,
    pub artifacts: Vec<String>,
    pub scenario: ScenarioFile,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub conditions: ConditionSummary,
    pub text: String,
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Iua => "iua",
        Scheme::Rua => "rua",
        Scheme::Pda => "pda",
    }
}

fn conditions(spec: &GameSpec, cfg: &SchemeConfig) -> ConditionSummary {
    let r = check_conditions(spec, cfg);
    let (tau_max, tau_min) = if cfg.tau.is_empty() {
        (1.0, 1.0)
    } else {
        cfg.tau.iter().fold((0.0_f64, 1.0_f64), |(hi, lo), &t| (hi.max(t), lo.min(t)))
    };
    ConditionSummary {
        scheme: scheme_name(cfg.scheme).to_string(),
        ratio_max: r.ratio_max,
        c1: r.c1,
        c2: r.c2,
        tau_max,
        tau_min,
        iua_condition_met: r.iua_condition_met,
        rua_condition_met: r.rua_condition_met,
        selected_condition_met: match cfg.scheme {
            Scheme::Iua => r.iua_condition_met,
            _ => r.rua_condition_met,
        },
    }
}

fn status_name(s: ActiveStatus) -> &'static str {
    match s {
        ActiveStatus::Inner => "inner",
        ActiveStatus::AtZeroGen => "zero_gen",
        ActiveStatus::AtCapacity => "capacity",
    }
}

fn rows(spec: &GameSpec, eq: &Equilibrium) -> Vec<PlayerRow> {
    let base = spec.net().base_mva();
    spec.players()
        .iter()
        .enumerate()
        .map(|(i, p)| PlayerRow {
            bus: p.bus.0,
            p_gen_mw: eq.p_gen[i] * base,
            p_net_mw: eq.p_net[i] * base,
            theta_rad: eq.angles.values[spec.s_index(i)],
            status: status_name(eq.active_set[i]).to_string(),
        })
        .collect()
}

fn slack_mw(spec: &GameSpec, p_net: &[f64]) -> f64 {
    -spec.full_injection(p_net).iter().sum::<f64>() * spec.net().base_mva()
}

/// Direct equilibrium, team optimum and LOE (when weights are given), and the
/// contraction report.
pub fn cmd_solve(sc: &Scenario) -> Result<RunReport, CliError> {
    let spec = &sc.spec;
    let ne = solve_ne_direct(spec)?;
    let (team_optimum, loe) = if spec.team_weights().is_some() {
        let tp = solve_team(spec)?;
        (Some(rows(spec, &tp)), Some(loss_of_efficiency(spec)?))
    } else {
        (None, None)
    };
    Ok(RunReport {
        command: "solve".into(),
        equilibrium: rows(spec, &ne),
        team_optimum,
        loe,
        conditions: conditions(spec, &sc.config),
        steps: None,
        terminal_status: None,
        slack_mw: slack_mw(spec, &ne.p_net),
        artifacts: Vec::new(),
        scenario: to_file(spec, &sc.config, &sc.timeline),
    })
}

fn write(path: &Path, contents: &str) -> Result<String, CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    Ok(path.display().to_string())
}

/// Runs the configured scheme with the scenario's faults and writes the
/// trajectory CSV, a summary and two charts into `out_dir`.
pub fn cmd_run(sc: &Scenario, out_dir: &Path) -> Result<RunReport, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.display().to_string(), source })?;
    let outcome = run(&sc.spec, &sc.config, None, &sc.timeline, None)?;
    let report = run_report(sc, &outcome);
    let traj = &outcome.trajectory;
    let base = sc.spec.net().base_mva();
    let series = |f: &dyn Fn(usize, usize) -> f64| -> Vec<(String, Vec<f64>)> {
        traj.buses
            .iter()
            .enumerate()
            .map(|(k, bus)| (format!("bus {bus}"), (0..traj.steps.len()).map(|n| f(n, k)).collect()))
            .collect()
    };
    let mut artifacts = vec![
        write(&out_dir.join("trajectory.csv"), &trajectory_csv(traj, base))?,
        write(
            &out_dir.join("generation.svg"),
            &line_chart("Microgrid generation", "generation (MW)", &series(&|n, k| traj.steps[n].p_gen[k] * base)),
        )?,
        write(
            &out_dir.join("angles.svg"),
            &line_chart("Bus voltage angles", "angle (rad)", &series(&|n, k| traj.steps[n].theta[k])),
        )?,
    ];
    let summary_path: PathBuf = out_dir.join("summary.txt");
    artifacts.push(summary_path.display().to_string());
    let report = RunReport { artifacts, ..report };
    write(&summary_path, &render_report(&report))?;
    Ok(report)
}

fn run_report(sc: &Scenario, outcome: &RunOutcome) -> RunReport {
    let traj = &outcome.trajectory;
    let last = traj.last();
    let base = sc.spec.net().base_mva();
    let fin = &outcome.final_spec;
    let equilibrium = traj
        .buses
        .iter()
        .enumerate()
        .map(|(k, bus)| {
            let load = sc.spec.net().bus(*bus).map_or(0.0, |b| b.p_load);
            let status = match fin.player_of(*bus) {
                None => "shut_down",
                Some(i) => {
                    let d = fin.derived()[i];
                    let x = outcome.final_state[i];
                    if x <= d.p_min {
                        "zero_gen"
                    } else if x >= d.p_max {
                        "capacity"
                    } else {
                        "inner"
                    }
                }
            };
            PlayerRow {
                bus: bus.0,
                p_gen_mw: last.p_gen[k] * base,
                p_net_mw: (last.p_gen[k] - load) * base,
                theta_rad: last.theta[k],
                status: status.to_string(),
            }
        })
        .collect();
    let terminal = match traj.terminal_status {
        TerminalStatus::Converged(n) => format!("converged at step {n}"),
        TerminalStatus::MaxSteps => "max_steps reached".to_string(),
    };
    RunReport {
        command: "run".into(),
        equilibrium,
        team_optimum: None,
        loe: None,
        conditions: conditions(&sc.spec, &sc.config),
        steps: Some(traj.len_steps()),
        terminal_status: Some(terminal),
        slack_mw: slack_mw(fin, &outcome.final_state),
        artifacts: Vec::new(),
        scenario: to_file(&sc.spec, &sc.config, &sc.timeline),
    }
}

pub fn cmd_check(sc: &Scenario) -> CheckReport {
    let conditions = conditions(&sc.spec, &sc.config);
    let text = render_check(&conditions);
    CheckReport { conditions, text }
}

pub fn render_check(c: &ConditionSummary) -> String {
    let verdict = |ok: bool| if ok { "satisfied" } else { "NOT satisfied" };
    let mut out = format!("scheme: {}\nratio_max={:.3}\n", c.scheme, c.ratio_max);
    if c.iua_condition_met {
        writeln!(out, "c1={:.3} < 1: {}", c.c1, verdict(true)).unwrap();
    } else {
        writeln!(out, "c1={:.3}: {}", c.c1, verdict(false)).unwrap();
    }
    if c.scheme != "iua" {
        let lhs = c.tau_max * c.c1;
        let rel = if c.rua_condition_met { "<" } else { ">=" };
        writeln!(
            out,
            "tau_max*c1={:.3}*{:.3}={:.3} {rel} tau_min={:.3}: {}",
            c.tau_max,
            c.c1,
            lhs,
            c.tau_min,
            verdict(c.rua_condition_met)
        )
        .unwrap();
    }
    writeln!(out, "c2={:.3}", c.c2).unwrap();
    out
}

pub fn render_report(r: &RunReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:>6} {:>12} {:>12} {:>14}  status", "bus", "p_gen_mw", "p_net_mw", "theta_rad").unwrap();
    for row in &r.equilibrium {
        writeln!(
            out,
            "{:>6} {:>12.3} {:>12.3} {:>14.6e}  {}",
            row.bus, row.p_gen_mw, row.p_net_mw, row.theta_rad, row.status
        )
        .unwrap();
    }
    if let Some(team) = &r.team_optimum {
        writeln!(out, "team optimum (MW): {}", join_mw(team)).unwrap();
    }
    if let Some(loe) = r.loe {
        writeln!(out, "LOE={loe:.6}").unwrap();
    }
    if let Some(t) = &r.terminal_status {
        writeln!(out, "terminal: {t}").unwrap();
    }
    writeln!(out, "slack output: {:.3} MW", r.slack_mw).unwrap();
    out.push_str(&render_check(&r.conditions));
    for a in &r.artifacts {
        writeln!(out, "wrote {a}").unwrap();
    }
    out
}

fn join_mw(rows: &[PlayerRow]) -> String {
    rows.iter().map(|r| format!("{}: {:.3}", r.bus, r.p_gen_mw)).collect::<Vec<_>>().join(", ")
}
