//! Decentralised update schemes and their convergence diagnostics.
//!
//! * IUA: every player best-responds to the previous step at once.
//! * RUA: each player best-responds with probability τ_i, otherwise holds.
//! * PDA: as RUA, but the player reads its own bus angle from a PMU and
//!   subtracts its own contribution instead of knowing everyone's injection.
//!
//! Random draws come from `Xoshiro256PlusPlus::seed_from_u64(seed)`: one
//! uniform `f64` in [0, 1) per player per step, in ascending player order,
//! drawn whether or not the player ends up updating. A player updates when
//! its draw is below τ_i.

use rand::{Rng, RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::faults::{apply_fault, FaultError, FaultKind, ScenarioTimeline};
use crate::game::{best_response, Equilibrium, GameSpec};
use crate::grid::BusId;

pub type SimRng = Xoshiro256PlusPlus;

pub fn new_rng(seed: u64) -> SimRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Iua,
    Rua,
    Pda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Update probabilities; empty for IUA.
    pub tau: Vec<f64>,
    /// Stopping tolerance on the infinity-norm step change, per-unit.
    pub delta: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl SchemeConfig {
    pub fn iua(delta: f64, max_steps: usize) -> Self {
        SchemeConfig { scheme: Scheme::Iua, tau: Vec::new(), delta, max_steps, seed: 0 }
    }

    pub fn random(scheme: Scheme, tau: Vec<f64>, delta: f64, max_steps: usize, seed: u64) -> Self {
        SchemeConfig { scheme, tau, delta, max_steps, seed }
    }

    pub fn validate(&self, n_players: usize) -> Result<(), DynamicsError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(DynamicsError::InvalidConfig(format!("delta must be positive, got {}", self.delta)));
        }
        match self.scheme {
            Scheme::Iua if !self.tau.is_empty() => {
                Err(DynamicsError::InvalidConfig("tau has no meaning for IUA".into()))
            }
            Scheme::Rua | Scheme::Pda if self.tau.len() != n_players => Err(DynamicsError::InvalidConfig(format!(
                "{} update probabilities for {} players",
                self.tau.len(),
                n_players
            ))),
            Scheme::Rua | Scheme::Pda if self.tau.iter().any(|&t| !(t > 0.0 && t < 1.0)) => {
                Err(DynamicsError::InvalidConfig("update probabilities must lie in (0, 1)".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("initial injection of player {player} is {value}, outside [{min}, {max}]")]
    InfeasibleInitial { player: usize, value: f64, min: f64, max: f64 },
    #[error(transparent)]
    Fault(#[from] FaultError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Generation of each tracked bus, per-unit.
    pub p_gen: Vec<f64>,
    /// Angle of each tracked bus, radians.
    pub theta: Vec<f64>,
    /// ‖P^(n) − P^(n−1)‖∞ over the players, per-unit; 0 at step 0.
    pub step_change: f64,
    /// ‖P_g^(n) − reference‖∞ when a reference was supplied.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    Converged(usize),
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Buses of the players at the start of the run, in player order.
    pub buses: Vec<BusId>,
    pub steps: Vec<StepRecord>,
    pub terminal_status: TerminalStatus,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.steps.last().expect("a trajectory records step 0")
    }

    /// Steps taken until the run stopped.
    pub fn len_steps(&self) -> usize {
        self.last().step
    }
}

/// A finished run: the trajectory plus the spec and player injections at the end.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub final_spec: GameSpec,
    pub final_state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub c1: f64,
    pub c2: f64,
    pub ratio_max: f64,
    pub iua_condition_met: bool,
    pub rua_condition_met: bool,
}

pub fn check_conditions(spec: &GameSpec, cfg: &SchemeConfig) -> ContractionReport {
    let n = spec.n_players();
    let s = spec.s();
    let mut ratio_max = 0.0_f64;
    for i in 0..n {
        let s_ii = spec.derived()[i].s_ii;
        for j in (0..n).filter(|&j| j != i) {
            ratio_max = ratio_max.max(s.get(spec.s_index(i), spec.s_index(j)) / s_ii);
        }
    }
    let c1 = ratio_max * n.saturating_sub(1) as f64;
    let (tau_hi, tau_lo) = if cfg.tau.is_empty() {
        (1.0, 1.0)
    } else {
        cfg.tau.iter().fold((0.0_f64, 1.0_f64), |(hi, lo), &t| (hi.max(t), lo.min(t)))
    };
    ContractionReport {
        c1,
        c2: tau_hi * c1 + (1.0 - tau_lo),
        ratio_max,
        iua_condition_met: c1 < 1.0,
        rua_condition_met: tau_hi * c1 < tau_lo,
    }
}

pub fn step_iua(spec: &GameSpec, state: &[f64]) -> Vec<f64> {
    let full = spec.full_injection(state);
    spec.derived().iter().enumerate().map(|(i, d)| best_response(d, spec.g_bar_full(i, &full))).collect()
}

pub fn step_rua<R: Rng>(spec: &GameSpec, state: &[f64], tau: &[f64], rng: &mut R) -> Vec<f64> {
    let full = spec.full_injection(state);
    spec.derived()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let draw: f64 = rng.random();
            if draw < tau[i] {
                best_response(d, spec.g_bar_full(i, &full))
            } else {
                state[i]
            }
        })
        .collect()
}

/// θ_i − s_ii·P_i: the angle at bus i caused by everyone else.
pub fn measured_aggregate(s_ii: f64, theta_i: f64, p_i: f64) -> f64 {
    (-s_ii).mul_add(p_i, theta_i)
}

/// PMU-driven step with snapshot semantics: every reading is taken from `state`.
///
/// The simulated PMU is ideal, so the reading is kept exact and the player's
/// own contribution is removed before rounding.
pub fn step_pda<R: Rng>(spec: &GameSpec, state: &[f64], tau: &[f64], rng: &mut R) -> Vec<f64> {
    let full = spec.full_injection(state);
    spec.derived()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let draw: f64 = rng.random();
            if draw < tau[i] {
                let mut reading = spec.angle_reading(i, &full);
                reading.add_product(-d.s_ii, state[i]);
                best_response(d, reading.value())
            } else {
                state[i]
            }
        })
        .collect()
}

fn residual(spec: &GameSpec, state: &[f64]) -> f64 {
    step_iua(spec, state).iter().zip(state).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Recorder<'a> {
    buses: Vec<BusId>,
    reference: Option<&'a [f64]>,
    steps: Vec<StepRecord>,
}

impl Recorder<'_> {
    fn record(&mut self, step: usize, spec: &GameSpec, state: &[f64], step_change: f64) {
        let angles = spec.angles(state).values;
        let mut p_gen = Vec::with_capacity(self.buses.len());
        let mut theta = Vec::with_capacity(self.buses.len());
        for &bus in &self.buses {
            p_gen.push(match spec.player_of(bus) {
                Some(i) => state[i] + spec.players()[i].p_load,
                None => 0.0,
            });
            theta.push(angles[spec.s().index_of(bus).expect("player bus is not the slack")]);
        }
        let error = self.reference.map(|r| max_change(&p_gen, r));
        self.steps.push(StepRecord { step, p_gen, theta, step_change, error });
    }
}

/// Iterates the configured scheme from `initial` (zero generation by default),
/// applying timeline faults after the update of their step.
///
/// IUA stops when the step change is at most δ. RUA and PDA additionally
/// require every player's best response to lie within δ of its injection, so a
/// step in which nobody happened to update cannot end the run. No run stops
/// while a fault is still pending. `reference` holds per-unit generation of
/// the tracked buses for the per-step error column.
pub fn run(
    spec: &GameSpec,
    cfg: &SchemeConfig,
    initial: Option<&[f64]>,
    timeline: &ScenarioTimeline,
    reference: Option<&[f64]>,
) -> Result<RunOutcome, DynamicsError> {
    let n = spec.n_players();
    cfg.validate(n)?;
    let mut state: Vec<f64> = match initial {
        Some(p) => p.to_vec(),
        None => spec.derived().iter().map(|d| d.p_min).collect(),
    };
    if state.len() != n {
        return Err(DynamicsError::InvalidConfig(format!("{} initial values for {n} players", state.len())));
    }
    for (i, (&v, d)) in state.iter().zip(spec.derived()).enumerate() {
        if !(v >= d.p_min && v <= d.p_max) {
            return Err(DynamicsError::InfeasibleInitial { player: i, value: v, min: d.p_min, max: d.p_max });
        }
    }

    let mut spec = spec.clone();
    let mut tau = cfg.tau.clone();
    let mut rng = new_rng(cfg.seed);
    let mut rec = Recorder { buses: spec.players().iter().map(|p| p.bus).collect(), reference, steps: Vec::new() };
    let events = timeline.events();
    let mut next_event = 0;

    rec.record(0, &spec, &state, 0.0);
    let mut apply_due = |step: usize, spec: &mut GameSpec, state: &mut Vec<f64>, tau: &mut Vec<f64>| {
        let mut applied = false;
        while next_event < events.len() && events[next_event].at_step == step {
            let removed = match events[next_event].kind {
                FaultKind::MicrogridShutdown(bus) => spec.player_of(bus),
                _ => None,
            };
            *spec = apply_fault(spec, &events[next_event])?;
            if let Some(i) = removed {
                state.remove(i);
                if !tau.is_empty() {
                    tau.remove(i);
                }
            }
            next_event += 1;
            applied = true;
        }
        Ok::<bool, DynamicsError>(applied)
    };
    apply_due(0, &mut spec, &mut state, &mut tau)?;

    let mut terminal = TerminalStatus::MaxSteps;
    for step in 1..=cfg.max_steps {
        let next = match cfg.scheme {
            Scheme::Iua => step_iua(&spec, &state),
            Scheme::Rua => step_rua(&spec, &state, &tau, &mut rng),
            Scheme::Pda => step_pda(&spec, &state, &tau, &mut rng),
        };
        let change = max_change(&next, &state);
        state = next;
        rec.record(step, &spec, &state, change);
        let applied = apply_due(step, &mut spec, &mut state, &mut tau)?;
        let pending = events[..].iter().any(|e| e.at_step > step);
        if applied || pending || change > cfg.delta {
            continue;
        }
        if cfg.scheme == Scheme::Iua || residual(&spec, &state) <= cfg.delta {
            terminal = TerminalStatus::Converged(step);
            break;
        }
    }

    let trajectory = Trajectory { buses: rec.buses, steps: rec.steps, terminal_status: terminal };
    Ok(RunOutcome { trajectory, final_spec: spec, final_state: state })
}

/// Ratios ‖ΔP^(n+1)‖∞ / ‖ΔP^(n)‖∞ of the distance to `reference`.
///
/// Steps closer than `RATIO_FLOOR · max(1, ‖reference‖∞)` are skipped: below
/// that, rounding in the iterates moves the ratio by more than 1e-9.
pub fn contraction_diagnostic(traj: &Trajectory, reference: &Equilibrium) -> Vec<f64> {
    let scale = reference.p_gen.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let err: Vec<f64> = traj.steps.iter().map(|s| max_change(&s.p_gen, &reference.p_gen)).collect();
    err.windows(2).filter(|w| w[0] > RATIO_FLOOR * scale).map(|w| w[1] / w[0]).collect()
}

pub const RATIO_FLOOR: f64 = 1e-6;

/// exp of the least-squares slope of ln(v_n) against n, over entries above 1e-13.
pub fn geometric_rate(values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        values.iter().enumerate().filter(|(_, &v)| v > 1e-13).map(|(n, &v)| (n as f64, v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    Some((num / den).exp())
}
