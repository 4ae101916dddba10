//! Scenario files, the command implementations behind the `gridgame` binary,
//! and the artifacts they write.

mod output;
mod report;
pub mod schema;

use std::path::Path;

use thiserror::Error;

use crate::dynamics::{Scheme, SchemeConfig};
use crate::faults::{FaultEvent, FaultKind, ScenarioTimeline};
use crate::game::{CostUnits, GameError, GameSpec, Market, PlayerParams};
use crate::grid::{Branch, Bus, BusId, BusKind, GridError, Network};
use schema::*;

pub use output::{line_chart, trajectory_csv, CSV_HEADER};
pub use report::{
    cmd_check, cmd_run, cmd_solve, render_check, render_report, CheckReport, CliError, ConditionSummary, PlayerRow,
    RunReport,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation { field: field.into(), message: message.into() }
}

/// A fully validated scenario together with the file it came from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: GameSpec,
    pub config: SchemeConfig,
    pub timeline: ScenarioTimeline,
    pub file: ScenarioFile,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner();
        ScenarioError::Parse { path, line: inner.line(), column: inner.column(), message: inner.to_string() }
    })?;
    from_file(file)
}

pub fn from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let base = file.base_mva;
    if !(base.is_finite() && base > 0.0) {
        return Err(invalid("base_mva", "must be a positive number"));
    }
    let mut buses = Vec::with_capacity(file.buses.len());
    for (k, b) in file.buses.iter().enumerate() {
        if b.id == 0 {
            return Err(invalid(format!("buses[{k}].id"), "bus ids are positive integers"));
        }
        let kind = match b.kind {
            BusKindEntry::Slack => BusKind::Slack,
            BusKindEntry::Generator => BusKind::Generator,
            BusKindEntry::Load => BusKind::Load,
            BusKindEntry::Microgrid => BusKind::Microgrid,
        };
        if (kind == BusKind::Slack) != (b.id == file.slack) {
            return Err(invalid(format!("buses[{k}].kind"), format!("bus {} vs slack {}", b.id, file.slack)));
        }
        buses.push(Bus { id: BusId(b.id), kind, p_load: b.p_load_mw / base, p_gen_fixed: b.p_gen_mw / base });
    }
    if !file.buses.iter().any(|b| b.id == file.slack) {
        return Err(invalid("slack", format!("bus {} is not listed", file.slack)));
    }
    let mut branches = Vec::with_capacity(file.branches.len());
    for (k, br) in file.branches.iter().enumerate() {
        if !(br.x_pu.is_finite() && br.x_pu > 0.0) {
            return Err(invalid(format!("branches[{k}].x_pu"), "reactance must be positive"));
        }
        branches.push(Branch::new(BusId(br.from), BusId(br.to), 1.0 / br.x_pu));
    }
    let net = Network::new(buses, branches, base).map_err(|e| grid_field(&e))?;

    let mut players = Vec::with_capacity(file.players.len());
    for (k, p) in file.players.iter().enumerate() {
        let bus = net
            .bus(BusId(p.bus))
            .ok_or_else(|| invalid(format!("players[{k}].bus"), format!("bus {} is not listed", p.bus)))?;
        players.push(PlayerParams {
            bus: bus.id,
            psi: p.psi,
            eta: p.eta,
            p_load: bus.p_load,
            p_gen_max: p.p_gen_max_mw / base,
        });
    }
    if let Some(w) = &file.team_weights {
        if w.len() != players.len() {
            return Err(invalid("team_weights", format!("{} weights for {} players", w.len(), players.len())));
        }
        if w.iter().any(|&a| !(a > 0.0 && a <= 1.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(invalid("team_weights", "weights must lie in (0, 1] and sum to 1"));
        }
    }
    let cost_units = match file.market.cost_units {
        CostUnitsEntry::PerUnit => CostUnits::PerUnit,
        CostUnitsEntry::Mw => CostUnits::Megawatt,
    };
    let market = Market { zeta: file.market.zeta, cost_units };
    let spec = GameSpec::new(net, players, market, file.team_weights.clone()).map_err(|e| match e {
        GameError::Grid(g) => grid_field(&g),
        other => invalid("players", other.to_string()),
    })?;

    let alg = &file.algorithm;
    let scheme = match alg.scheme {
        SchemeEntry::Iua => Scheme::Iua,
        SchemeEntry::Rua => Scheme::Rua,
        SchemeEntry::Pda => Scheme::Pda,
    };
    if !(alg.delta_mw.is_finite() && alg.delta_mw > 0.0) {
        return Err(invalid("algorithm.delta_mw", "must be positive"));
    }
    let tau = match (scheme, &alg.tau) {
        (Scheme::Iua, Some(_)) => return Err(invalid("algorithm.tau", "not used by the iua scheme")),
        (Scheme::Iua, None) => Vec::new(),
        (_, None) => return Err(invalid("algorithm.tau", "required by random schemes")),
        (_, Some(t)) if t.len() != spec.n_players() => {
            return Err(invalid("algorithm.tau", format!("{} values for {} players", t.len(), spec.n_players())))
        }
        (_, Some(t)) if t.iter().any(|&x| !(x > 0.0 && x < 1.0)) => {
            return Err(invalid("algorithm.tau", "probabilities must lie in (0, 1)"))
        }
        (_, Some(t)) => t.clone(),
    };
    let config = SchemeConfig { scheme, tau, delta: alg.delta_mw / base, max_steps: alg.max_steps, seed: alg.seed };

    let mut events = Vec::with_capacity(file.faults.len());
    for (k, f) in file.faults.iter().enumerate() {
        let field = format!("faults[{k}]");
        let kind = match (f.kind, f.bus, f.from, f.to) {
            (FaultKindEntry::GeneratorOutage, Some(b), None, None) => {
                let ok = spec.net().bus(BusId(b)).is_some_and(|x| x.kind == BusKind::Generator);
                if !ok {
                    return Err(invalid(field, format!("bus {b} is not a generator bus")));
                }
                FaultKind::GeneratorOutage(BusId(b))
            }
            (FaultKindEntry::MicrogridShutdown, Some(b), None, None) => {
                if spec.player_of(BusId(b)).is_none() {
                    return Err(invalid(field, format!("bus {b} has no player")));
                }
                FaultKind::MicrogridShutdown(BusId(b))
            }
            (FaultKindEntry::LineTrip, None, Some(a), Some(b)) => {
                if !spec.net().branches().iter().any(|br| br.joins(BusId(a), BusId(b))) {
                    return Err(invalid(field, format!("no branch joins {a} and {b}")));
                }
                FaultKind::LineTrip(BusId(a), BusId(b))
            }
            (FaultKindEntry::LineTrip, ..) => return Err(invalid(field, "line_trip takes from and to")),
            _ => return Err(invalid(field, "bus faults take a bus and nothing else")),
        };
        events.push(FaultEvent { at_step: f.at_step, kind });
    }
    let timeline = ScenarioTimeline::new(events).map_err(|e| invalid("faults", e.to_string()))?;
    Ok(Scenario { spec, config, timeline, file })
}

fn grid_field(e: &GridError) -> ScenarioError {
    let field = match e {
        GridError::DuplicateBus(_) | GridError::InvalidBus { .. } | GridError::SlackCount(_) => "buses",
        GridError::BadBase(_) => "base_mva",
        _ => "branches",
    };
    invalid(field, e.to_string())
}

/// The scenario file describing domain objects, powers converted back to MW.
pub fn to_file(spec: &GameSpec, config: &SchemeConfig, timeline: &ScenarioTimeline) -> ScenarioFile {
    let net = spec.net();
    let base = net.base_mva();
    let buses = net
        .buses()
        .iter()
        .map(|b| BusEntry {
            id: b.id.0,
            kind: match b.kind {
                BusKind::Slack => BusKindEntry::Slack,
                BusKind::Generator => BusKindEntry::Generator,
                BusKind::Load => BusKindEntry::Load,
                BusKind::Microgrid => BusKindEntry::Microgrid,
            },
            p_load_mw: b.p_load * base,
            p_gen_mw: b.p_gen_fixed * base,
        })
        .collect();
    let branches = net
        .branches()
        .iter()
        .filter(|b| b.in_service)
        .map(|b| BranchEntry { from: b.from.0, to: b.to.0, x_pu: 1.0 / b.susceptance })
        .collect();
    let players = spec
        .players()
        .iter()
        .map(|p| PlayerEntry { bus: p.bus.0, psi: p.psi, eta: p.eta, p_gen_max_mw: p.p_gen_max * base })
        .collect();
    let faults = timeline
        .events()
        .iter()
        .map(|e| {
            let (kind, bus, from, to) = match e.kind {
                FaultKind::GeneratorOutage(b) => (FaultKindEntry::GeneratorOutage, Some(b.0), None, None),
                FaultKind::MicrogridShutdown(b) => (FaultKindEntry::MicrogridShutdown, Some(b.0), None, None),
                FaultKind::LineTrip(a, b) => (FaultKindEntry::LineTrip, None, Some(a.0), Some(b.0)),
            };
            FaultEntry { at_step: e.at_step, kind, bus, from, to }
        })
        .collect();
    ScenarioFile {
        base_mva: base,
        buses,
        branches,
        slack: net.slack().0,
        market: MarketEntry {
            zeta: spec.market().zeta,
            cost_units: match spec.market().cost_units {
                CostUnits::PerUnit => CostUnitsEntry::PerUnit,
                CostUnits::Megawatt => CostUnitsEntry::Mw,
            },
        },
        players,
        algorithm: AlgorithmEntry {
            scheme: match config.scheme {
                Scheme::Iua => SchemeEntry::Iua,
                Scheme::Rua => SchemeEntry::Rua,
                Scheme::Pda => SchemeEntry::Pda,
            },
            tau: (!config.tau.is_empty()).then(|| config.tau.clone()),
            delta_mw: config.delta * base,
            max_steps: config.max_steps,
            seed: config.seed,
        },
        team_weights: spec.team_weights().map(<[f64]>::to_vec),
        faults,
    }
}
