//! Structural faults: generator outage, microgrid shutdown and line trip.

use std::fmt;

use thiserror::Error;

use crate::game::{solve_ne_direct, Equilibrium, GameError, GameSpec};
use crate::grid::{BusId, BusKind, GridError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    GeneratorOutage(BusId),
    MicrogridShutdown(BusId),
    LineTrip(BusId, BusId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Target {
    Bus(BusId),
    Line(BusId, BusId),
}

impl FaultKind {
    fn target(&self) -> Target {
        match *self {
            FaultKind::GeneratorOutage(b) | FaultKind::MicrogridShutdown(b) => Target::Bus(b),
            FaultKind::LineTrip(a, b) => Target::Line(a.min(b), a.max(b)),
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::GeneratorOutage(b) => write!(f, "generator outage at bus {b}"),
            FaultKind::MicrogridShutdown(b) => write!(f, "microgrid shutdown at bus {b}"),
            FaultKind::LineTrip(a, b) => write!(f, "line trip {a}-{b}"),
        }
    }
}

/// A fault applied after the update that produces step `at_step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultEvent {
    pub at_step: usize,
    pub kind: FaultKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FaultError {
    #[error("{0}: target does not exist or has the wrong kind")]
    UnknownTarget(FaultKind),
    #[error("{kind} disconnects bus {bus} from the slack")]
    DisconnectedNetwork { kind: FaultKind, bus: BusId },
    #[error("two events target the same element at step {0}")]
    DuplicateEvent(usize),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Fault events ordered by step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioTimeline {
    events: Vec<FaultEvent>,
}

impl ScenarioTimeline {
    /// Sorts events by step (stable) and rejects two events on one target at one step.
    pub fn new(mut events: Vec<FaultEvent>) -> Result<Self, FaultError> {
        events.sort_by_key(|e| e.at_step);
        for (k, a) in events.iter().enumerate() {
            if events[k + 1..].iter().take_while(|b| b.at_step == a.at_step).any(|b| b.kind.target() == a.kind.target())
            {
                return Err(FaultError::DuplicateEvent(a.at_step));
            }
        }
        Ok(ScenarioTimeline { events })
    }

    pub fn events(&self) -> &[FaultEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// The spec after the fault. The input is left untouched.
pub fn apply_fault(spec: &GameSpec, ev: &FaultEvent) -> Result<GameSpec, FaultError> {
    let unknown = || FaultError::UnknownTarget(ev.kind);
    let net = spec.net();
    match ev.kind {
        FaultKind::GeneratorOutage(id) => {
            let bus = net.bus(id).filter(|b| b.kind == BusKind::Generator).ok_or_else(unknown)?;
            let mut bus = bus.clone();
            bus.p_gen_fixed = 0.0;
            Ok(GameSpec::with_sensitivity(
                net.with_bus(bus),
                spec.s().clone(),
                spec.players().to_vec(),
                spec.market().clone(),
                spec.team_weights().map(<[f64]>::to_vec),
            )?)
        }
        FaultKind::MicrogridShutdown(id) => {
            let i = spec.player_of(id).ok_or_else(unknown)?;
            let mut bus = net.bus(id).expect("player bus exists").clone();
            bus.kind = BusKind::Load;
            bus.p_gen_fixed = 0.0;
            let mut players = spec.players().to_vec();
            players.remove(i);
            let weights = spec.team_weights().and_then(|w| {
                let rest: Vec<f64> = w.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, &a)| a).collect();
                let total: f64 = rest.iter().sum();
                (!rest.is_empty()).then(|| rest.iter().map(|a| a / total).collect())
            });
            Ok(GameSpec::with_sensitivity(
                net.with_bus(bus),
                spec.s().clone(),
                players,
                spec.market().clone(),
                weights,
            )?)
        }
        FaultKind::LineTrip(a, b) => {
            let mut branches = net.branches().to_vec();
            let mut found = false;
            for br in branches.iter_mut().filter(|br| br.joins(a, b)) {
                br.in_service = false;
                found = true;
            }
            if !found {
                return Err(unknown());
            }
            let tripped = net.with_branches(branches);
            GameSpec::new(
                tripped,
                spec.players().to_vec(),
                spec.market().clone(),
                spec.team_weights().map(<[f64]>::to_vec),
            )
            .map_err(|e| match e {
                GameError::Grid(GridError::DisconnectedNetwork(bus)) => {
                    FaultError::DisconnectedNetwork { kind: ev.kind, bus }
                }
                other => FaultError::Game(other),
            })
        }
    }
}

pub fn post_fault_equilibrium(spec: &GameSpec, ev: &FaultEvent) -> Result<Equilibrium, FaultError> {
    Ok(solve_ne_direct(&apply_fault(spec, ev)?)?)
}
