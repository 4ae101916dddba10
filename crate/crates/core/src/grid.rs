//! Network data model and the DC sensitivity matrix.
//!
//! Buses are identified by their external number. Every matrix in this module
//! excludes the slack bus and orders the remaining buses by ascending id.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Generator,
    Load,
    Microgrid,
}

/// A bus with per-unit load and fixed generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub p_load: f64,
    pub p_gen_fixed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from: BusId,
    pub to: BusId,
    pub susceptance: f64,
    pub in_service: bool,
}

impl Branch {
    pub fn new(from: BusId, to: BusId, susceptance: f64) -> Self {
        Branch { from, to, susceptance, in_service: true }
    }

    pub fn joins(&self, a: BusId, b: BusId) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("bus {0} appears more than once")]
    DuplicateBus(BusId),
    #[error("network must have exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("branch references unknown bus {0}")]
    UnknownBus(BusId),
    #[error("branch {0}-{1} connects a bus to itself")]
    SelfLoop(BusId, BusId),
    #[error("branch {from}-{to} has non-positive susceptance {value}")]
    BadSusceptance { from: BusId, to: BusId, value: f64 },
    #[error("bus {bus}: {reason}")]
    InvalidBus { bus: BusId, reason: String },
    #[error("base_mva must be positive, got {0}")]
    BadBase(f64),
    #[error("in-service network is disconnected: bus {0} has no path to the slack")]
    DisconnectedNetwork(BusId),
    #[error("reduced susceptance matrix is not positive definite")]
    SingularMatrix,
}

/// Buses, branches and the per-unit base. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    base_mva: f64,
}

impl Network {
    pub fn new(buses: Vec<Bus>, branches: Vec<Branch>, base_mva: f64) -> Result<Self, GridError> {
        if !(base_mva.is_finite() && base_mva > 0.0) {
            return Err(GridError::BadBase(base_mva));
        }
        let mut seen = BTreeSet::new();
        for bus in &buses {
            if !seen.insert(bus.id) {
                return Err(GridError::DuplicateBus(bus.id));
            }
            check_bus(bus)?;
        }
        let slacks = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return Err(GridError::SlackCount(slacks));
        }
        for br in &branches {
            for end in [br.from, br.to] {
                if !seen.contains(&end) {
                    return Err(GridError::UnknownBus(end));
                }
            }
            if br.from == br.to {
                return Err(GridError::SelfLoop(br.from, br.to));
            }
            if br.in_service && !(br.susceptance.is_finite() && br.susceptance > 0.0) {
                return Err(GridError::BadSusceptance { from: br.from, to: br.to, value: br.susceptance });
            }
        }
        Ok(Network { buses, branches, base_mva })
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn slack(&self) -> BusId {
        self.buses.iter().find(|b| b.kind == BusKind::Slack).map(|b| b.id).expect("validated network has a slack bus")
    }

    /// Non-slack bus ids in ascending order: the row/column order of B and S.
    pub fn bus_order(&self) -> Vec<BusId> {
        let slack = self.slack();
        let mut ids: Vec<BusId> = self.buses.iter().map(|b| b.id).filter(|&id| id != slack).collect();
        ids.sort();
        ids
    }

    /// Copy of the network with one bus replaced. The caller keeps the bus valid.
    pub(crate) fn with_bus(&self, bus: Bus) -> Network {
        let mut net = self.clone();
        if let Some(slot) = net.buses.iter_mut().find(|b| b.id == bus.id) {
            *slot = bus;
        }
        net
    }

    pub(crate) fn with_branches(&self, branches: Vec<Branch>) -> Network {
        Network { buses: self.buses.clone(), branches, base_mva: self.base_mva }
    }

    /// In-service adjacency, parallel branches summed.
    fn adjacency(&self) -> BTreeMap<BusId, BTreeMap<BusId, f64>> {
        let mut adj: BTreeMap<BusId, BTreeMap<BusId, f64>> =
            self.buses.iter().map(|b| (b.id, BTreeMap::new())).collect();
        for br in self.branches.iter().filter(|b| b.in_service) {
            *adj.get_mut(&br.from).unwrap().entry(br.to).or_insert(0.0) += br.susceptance;
            *adj.get_mut(&br.to).unwrap().entry(br.from).or_insert(0.0) += br.susceptance;
        }
        adj
    }

    /// First bus (ascending id) unreachable from the slack over in-service branches.
    pub fn first_unreachable(&self) -> Option<BusId> {
        let adj = self.adjacency();
        let mut reached = BTreeSet::from([self.slack()]);
        let mut stack = vec![self.slack()];
        while let Some(bus) = stack.pop() {
            for &next in adj[&bus].keys() {
                if reached.insert(next) {
                    stack.push(next);
                }
            }
        }
        self.bus_order().into_iter().find(|id| !reached.contains(id))
    }
}

fn check_bus(bus: &Bus) -> Result<(), GridError> {
    let fail = |reason: &str| Err(GridError::InvalidBus { bus: bus.id, reason: reason.to_string() });
    if !(bus.p_load.is_finite() && bus.p_load >= 0.0) {
        return fail("load must be finite and non-negative");
    }
    if !(bus.p_gen_fixed.is_finite() && bus.p_gen_fixed >= 0.0) {
        return fail("fixed generation must be finite and non-negative");
    }
    if bus.p_gen_fixed != 0.0 && matches!(bus.kind, BusKind::Load | BusKind::Microgrid) {
        return fail("only generator and slack buses carry fixed generation");
    }
    Ok(())
}

/// The reduced Laplacian −B over non-slack buses.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSusceptance {
    pub matrix: DMatrix<f64>,
    pub bus_order: Vec<BusId>,
}

/// S = −B⁻¹, mapping non-slack injections to angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMatrix {
    pub matrix: DMatrix<f64>,
    pub bus_order: Vec<BusId>,
}

impl SensitivityMatrix {
    pub fn index_of(&self, bus: BusId) -> Option<usize> {
        self.bus_order.binary_search(&bus).ok()
    }

    pub fn dim(&self) -> usize {
        self.bus_order.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }
}

pub fn build_reduced_susceptance(net: &Network) -> Result<ReducedSusceptance, GridError> {
    if let Some(bus) = net.first_unreachable() {
        return Err(GridError::DisconnectedNetwork(bus));
    }
    let order = net.bus_order();
    let index: BTreeMap<BusId, usize> = order.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let n = order.len();
    let mut m = DMatrix::zeros(n, n);
    for (bus, nbrs) in net.adjacency() {
        let Some(&i) = index.get(&bus) else { continue };
        for (nbr, b) in nbrs {
            m[(i, i)] += b;
            if let Some(&j) = index.get(&nbr) {
                m[(i, j)] -= b;
            }
        }
    }
    Ok(ReducedSusceptance { matrix: m, bus_order: order })
}

pub fn build_sensitivity(rb: &ReducedSusceptance) -> Result<SensitivityMatrix, GridError> {
    let n = rb.matrix.nrows();
    let chol = rb.matrix.clone().cholesky().ok_or(GridError::SingularMatrix)?;
    let s = chol.solve(&DMatrix::identity(n, n));
    if s.iter().any(|v| !v.is_finite()) {
        return Err(GridError::SingularMatrix);
    }
    Ok(SensitivityMatrix { matrix: s, bus_order: rb.bus_order.clone() })
}

/// Convenience composition of the two builders.
pub fn sensitivity_of(net: &Network) -> Result<SensitivityMatrix, GridError> {
    build_sensitivity(&build_reduced_susceptance(net)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma1Property {
    Symmetry,
    Nonnegativity,
    PositiveDiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Violation {
    pub row: BusId,
    pub col: BusId,
    pub property: Lemma1Property,
    pub value: f64,
}

impl fmt::Display for Lemma1Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.property {
            Lemma1Property::Symmetry => "asymmetric",
            Lemma1Property::Nonnegativity => "negative",
            Lemma1Property::PositiveDiagonal => "non-positive diagonal",
        };
        write!(f, "s({},{}) = {:e}: {}", self.row, self.col, self.value, what)
    }
}

/// Symmetry, nonnegativity and positive-diagonal checks on S.
pub fn validate_lemma1(s: &SensitivityMatrix) -> Vec<Lemma1Violation> {
    let n = s.dim();
    let scale = s.matrix.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = s.get(i, j);
            let at = |property| Lemma1Violation { row: s.bus_order[i], col: s.bus_order[j], property, value: v };
            if i == j && (v.is_nan() || v <= 0.0) {
                out.push(at(Lemma1Property::PositiveDiagonal));
            }
            if j > i && (v - s.get(j, i)).abs() > 1e-10 * scale {
                out.push(at(Lemma1Property::Symmetry));
            }
            if j > i && v < -1e-12 {
                out.push(at(Lemma1Property::Nonnegativity));
            }
        }
    }
    out
}
