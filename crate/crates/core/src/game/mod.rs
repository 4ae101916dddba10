//! Players, costs, best responses and equilibrium solvers.
//!
//! Player `i` owns net injection `P_i = P_i^g - P_i^l` at a microgrid bus and
//! pays `ψ_i P_i^g + ζ (P_i^l - P_i^g) + ½ η_i² θ_i²`. All other buses inject a
//! fixed amount. Solvers work on net injections in per-unit; `Equilibrium`
//! also reports generation.

mod active_set;
mod team;

use thiserror::Error;

use crate::exact::{self, ExactSum};
use crate::grid::{self, BusId, BusKind, GridError, Network, SensitivityMatrix};
use crate::powerflow::AngleProfile;

pub use active_set::solve_ne_direct;
pub use team::solve_team;

/// How the money terms of the cost are scaled relative to per-unit power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostUnits {
    /// Prices multiply per-unit power.
    #[default]
    PerUnit,
    /// Prices multiply MW, i.e. per-unit power times the MVA base.
    Megawatt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub zeta: f64,
    pub cost_units: CostUnits,
}

impl Market {
    pub fn new(zeta: f64) -> Self {
        Market { zeta, cost_units: CostUnits::PerUnit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerParams {
    pub bus: BusId,
    pub psi: f64,
    pub eta: f64,
    pub p_load: f64,
    pub p_gen_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerDerived {
    pub gamma: f64,
    pub s_ii: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActiveStatus {
    Inner,
    AtZeroGen,
    AtCapacity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub p_net: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub angles: AngleProfile,
    pub active_set: Vec<ActiveStatus>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid game: {0}")]
    InvalidSpec(String),
    #[error("reduced equilibrium system is singular")]
    SingularReducedSystem,
    #[error("active-set search revisited a partition after {0} attempts")]
    NoConvergentActiveSet(usize),
    #[error("team problem did not converge in {0} iterations")]
    MaxIterationsExceeded(usize),
    #[error("team problem needs team weights")]
    MissingTeamWeights,
}

/// A validated game on a network.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    net: Network,
    s: SensitivityMatrix,
    players: Vec<PlayerParams>,
    market: Market,
    team_weights: Option<Vec<f64>>,
    index: Vec<usize>,
    derived: Vec<PlayerDerived>,
    base: Vec<f64>,
}

impl GameSpec {
    pub fn new(
        net: Network,
        players: Vec<PlayerParams>,
        market: Market,
        team_weights: Option<Vec<f64>>,
    ) -> Result<Self, GameError> {
        let s = grid::sensitivity_of(&net)?;
        Self::with_sensitivity(net, s, players, market, team_weights)
    }

    /// Builds a spec reusing a sensitivity matrix already computed for `net`.
    pub fn with_sensitivity(
        net: Network,
        s: SensitivityMatrix,
        players: Vec<PlayerParams>,
        market: Market,
        team_weights: Option<Vec<f64>>,
    ) -> Result<Self, GameError> {
        let invalid = |msg: String| Err(GameError::InvalidSpec(msg));
        if !market.zeta.is_finite() {
            return invalid(format!("market price {} is not finite", market.zeta));
        }
        if s.bus_order != net.bus_order() {
            return invalid("sensitivity matrix does not match the network".into());
        }
        let mut index = Vec::with_capacity(players.len());
        for (k, p) in players.iter().enumerate() {
            let Some(bus) = net.bus(p.bus) else {
                return invalid(format!("player {k} sits on unknown bus {}", p.bus));
            };
            if bus.kind != BusKind::Microgrid {
                return invalid(format!("player {k} bus {} is not a microgrid bus", p.bus));
            }
            if players[..k].iter().any(|q| q.bus == p.bus) {
                return invalid(format!("bus {} has two players", p.bus));
            }
            if (p.p_load - bus.p_load).abs() > 1e-12 {
                return invalid(format!("player {k} load differs from bus {} load", p.bus));
            }
            if !(p.eta.is_finite() && p.eta > 0.0) {
                return invalid(format!("player {k} eta must be positive"));
            }
            if !(p.p_gen_max.is_finite() && p.p_gen_max >= 0.0) {
                return invalid(format!("player {k} capacity must be non-negative"));
            }
            if !p.psi.is_finite() {
                return invalid(format!("player {k} psi is not finite"));
            }
            index.push(s.index_of(p.bus).expect("microgrid bus is not the slack"));
        }
        if let Some(orphan) =
            net.buses().iter().find(|b| b.kind == BusKind::Microgrid && !players.iter().any(|p| p.bus == b.id))
        {
            return invalid(format!("microgrid bus {} has no player", orphan.id));
        }
        if let Some(w) = &team_weights {
            if w.len() != players.len() {
                return invalid(format!("{} team weights for {} players", w.len(), players.len()));
            }
            if w.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
                return invalid("team weights must lie in (0, 1]".into());
            }
            if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return invalid("team weights must sum to 1".into());
            }
        }

        let base = net
            .bus_order()
            .iter()
            .map(|&id| {
                let bus = net.bus(id).unwrap();
                if bus.kind == BusKind::Microgrid {
                    0.0
                } else {
                    bus.p_gen_fixed - bus.p_load
                }
            })
            .collect();
        let k = money_scale(&market, &net);
        let derived = players
            .iter()
            .zip(&index)
            .map(|(p, &ix)| {
                let s_ii = s.get(ix, ix);
                PlayerDerived {
                    gamma: k * (market.zeta - p.psi) / (p.eta * p.eta * s_ii),
                    s_ii,
                    p_min: -p.p_load,
                    p_max: p.p_gen_max - p.p_load,
                }
            })
            .collect();
        Ok(GameSpec { net, s, players, market, team_weights, index, derived, base })
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn s(&self) -> &SensitivityMatrix {
        &self.s
    }

    pub fn players(&self) -> &[PlayerParams] {
        &self.players
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn team_weights(&self) -> Option<&[f64]> {
        self.team_weights.as_deref()
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    /// Row/column of player `i` in S.
    pub fn s_index(&self, i: usize) -> usize {
        self.index[i]
    }

    pub fn derived(&self) -> &[PlayerDerived] {
        &self.derived
    }

    pub fn player_of(&self, bus: BusId) -> Option<usize> {
        self.players.iter().position(|p| p.bus == bus)
    }

    /// Factor applied to the money terms of the cost.
    pub fn money_scale(&self) -> f64 {
        money_scale(&self.market, &self.net)
    }

    /// Net injection of every non-slack bus given the players' net injections.
    pub fn full_injection(&self, p_net: &[f64]) -> Vec<f64> {
        let mut p = self.base.clone();
        for (&ix, &v) in self.index.iter().zip(p_net) {
            p[ix] = v;
        }
        p
    }

    /// Angles of every non-slack bus.
    pub fn angles(&self, p_net: &[f64]) -> AngleProfile {
        let p = self.full_injection(p_net);
        let values =
            (0..self.s.dim()).map(|r| exact::dot(self.s.matrix.row(r).iter().copied(), p.iter().copied())).collect();
        AngleProfile { values }
    }

    /// Exact accumulator for θ at player `i`'s bus.
    pub(crate) fn angle_reading(&self, i: usize, p_full: &[f64]) -> ExactSum {
        let row = self.index[i];
        let mut acc = ExactSum::new();
        for (c, &v) in p_full.iter().enumerate() {
            acc.add_product(self.s.get(row, c), v);
        }
        acc
    }

    /// ḡ_{-i}: the angle at player `i`'s bus caused by everyone else.
    pub(crate) fn g_bar_full(&self, i: usize, p_full: &[f64]) -> f64 {
        let row = self.index[i];
        let mut acc = ExactSum::new();
        for (c, &v) in p_full.iter().enumerate() {
            if c != row {
                acc.add_product(self.s.get(row, c), v);
            }
        }
        acc.value()
    }

    pub fn g_bar(&self, i: usize, p_net: &[f64]) -> f64 {
        self.g_bar_full(i, &self.full_injection(p_net))
    }

    pub(crate) fn equilibrium(&self, p_net: Vec<f64>, active_set: Vec<ActiveStatus>) -> Equilibrium {
        let p_gen = p_net.iter().zip(&self.players).map(|(x, p)| x + p.p_load).collect();
        let angles = self.angles(&p_net);
        Equilibrium { p_net, p_gen, angles, active_set }
    }
}

fn money_scale(market: &Market, net: &Network) -> f64 {
    match market.cost_units {
        CostUnits::PerUnit => 1.0,
        CostUnits::Megawatt => net.base_mva(),
    }
}

pub fn derive_player(spec: &GameSpec, i: usize) -> PlayerDerived {
    spec.derived[i]
}

/// Cost of player `i` at generation `p_gen` (per-unit) and own angle `theta`.
pub fn cost(spec: &GameSpec, i: usize, p_gen: f64, theta: f64) -> f64 {
    let p = &spec.players[i];
    let k = spec.money_scale();
    k * (p.psi * p_gen + spec.market.zeta * (p.p_load - p_gen)) + 0.5 * p.eta * p.eta * theta * theta
}

/// Cost of player `i` with the angle implied by the players' net injections.
pub fn reduced_cost(spec: &GameSpec, i: usize, p_net: &[f64]) -> f64 {
    let theta = spec.angles(p_net).values[spec.index[i]];
    cost(spec, i, p_net[i] + spec.players[i].p_load, theta)
}

/// Clamped minimiser of the reduced cost given the others' angle contribution.
pub fn best_response(d: &PlayerDerived, g_bar_minus_i: f64) -> f64 {
    let raw = (d.gamma - g_bar_minus_i) / d.s_ii;
    if raw <= d.p_min {
        d.p_min
    } else if raw >= d.p_max {
        d.p_max
    } else {
        raw
    }
}

/// Grid search plus golden-section refinement of player `i`'s reduced cost.
/// Entry `i` of `others` is ignored.
pub fn brute_force_best_response(spec: &GameSpec, i: usize, others: &[f64]) -> f64 {
    let d = spec.derived[i];
    let mut p_net = others.to_vec();
    p_net[i] = 0.0;
    let theta0 = spec.angles(&p_net).values[spec.index[i]];
    let load = spec.players[i].p_load;
    let f = |x: f64| cost(spec, i, x + load, theta0 + d.s_ii * x);

    let (lo, hi) = (d.p_min, d.p_max);
    if hi <= lo {
        return lo;
    }
    const CELLS: usize = 100_000;
    let h = (hi - lo) / CELLS as f64;
    let at = |k: usize| if k == CELLS { hi } else { lo + h * k as f64 };
    let mut best = 0;
    let mut best_cost = f(lo);
    for k in 1..=CELLS {
        let c = f(at(k));
        if c < best_cost {
            best = k;
            best_cost = c;
        }
    }
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(CELLS)));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-9 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (a + b);
    // Snap to a bound when the bound itself is at least as good.
    [lo, hi].into_iter().filter(|&x| (x - mid).abs() <= 1e-8).find(|&x| f(x) <= f(mid)).unwrap_or(mid)
}

/// Σα_i U_i at the Nash equilibrium over Σα_i U_i at the team optimum.
pub fn loss_of_efficiency(spec: &GameSpec) -> Result<f64, GameError> {
    let alpha = spec.team_weights().ok_or(GameError::MissingTeamWeights)?;
    let ne = solve_ne_direct(spec)?;
    let tp = solve_team(spec)?;
    let social = |eq: &Equilibrium| -> f64 {
        (0..spec.n_players()).map(|i| alpha[i] * cost(spec, i, eq.p_gen[i], eq.angles.values[spec.index[i]])).sum()
    };
    Ok(social(&ne) / social(&tp))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::{Branch, Bus};

    /// Slack 0, buses 1 and 2, lines 0–1 (b=10) and 1–2 (b=5); S = [[0.1,0.1],[0.1,0.3]].
    pub(crate) fn three_bus_game() -> GameSpec {
        let bus = |id, kind, p_load| Bus { id: BusId(id), kind, p_load, p_gen_fixed: 0.0 };
        let net = Network::new(
            vec![bus(0, BusKind::Slack, 0.0), bus(1, BusKind::Microgrid, 0.0), bus(2, BusKind::Microgrid, 10.0)],
            vec![Branch::new(BusId(0), BusId(1), 10.0), Branch::new(BusId(1), BusId(2), 5.0)],
            100.0,
        )
        .unwrap();
        let player = |id, p_load| PlayerParams { bus: BusId(id), psi: 120.0, eta: 10.0, p_load, p_gen_max: 1e3 };
        GameSpec::new(net, vec![player(1, 0.0), player(2, 10.0)], Market::new(140.0), Some(vec![0.5, 0.5])).unwrap()
    }

    #[test]
    fn gamma_values() {
        let spec = three_bus_game();
        assert!((derive_player(&spec, 0).gamma - 2.0).abs() < 1e-12);
        assert!((derive_player(&spec, 1).gamma - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(derive_player(&spec, 1).p_min, -10.0);
    }

    #[test]
    fn best_response_branches() {
        let d = PlayerDerived { gamma: 0.6667, s_ii: 0.3, p_min: -10.0, p_max: 10.0 };
        assert!((best_response(&d, 0.1) - 1.8889).abs() < 1e-4);
        assert_eq!(best_response(&PlayerDerived { p_max: 1.0, ..d }, 0.1), 1.0);
        assert_eq!(best_response(&d, 0.6667 + 0.3 * 10.0), -10.0);
    }

    #[test]
    fn cost_structure() {
        let spec = three_bus_game();
        assert_eq!(cost(&spec, 1, 0.0, 0.0), 140.0 * 10.0);
        let p = [1.0, -1.0];
        let theta = spec.angles(&p).values;
        assert_eq!(reduced_cost(&spec, 0, &p), cost(&spec, 0, 1.0, theta[0]));
    }

    #[test]
    fn brute_force_matches_closed_form() {
        let spec = three_bus_game();
        let others = [0.0, -4.0];
        let d = derive_player(&spec, 0);
        let closed = best_response(&d, spec.g_bar(0, &others));
        assert!((brute_force_best_response(&spec, 0, &others) - closed).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_weights_and_players() {
        let spec = three_bus_game();
        let bad = GameSpec::new(spec.net().clone(), spec.players().to_vec(), Market::new(140.0), Some(vec![0.5, 0.6]));
        assert!(matches!(bad, Err(GameError::InvalidSpec(_))));
        let one = GameSpec::new(spec.net().clone(), spec.players()[..1].to_vec(), Market::new(140.0), None);
        assert!(matches!(one, Err(GameError::InvalidSpec(m)) if m.contains("no player")));
    }
}
