//! DC power flow on a precomputed sensitivity matrix.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::exact;
use crate::grid::{BusId, BusKind, Network, SensitivityMatrix};

/// Per-unit net injections for every non-slack bus, in ascending bus order.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionVector {
    pub values: Vec<f64>,
}

/// Radian angles for every non-slack bus; the slack sits at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleProfile {
    pub values: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("bus {0} is not in the network")]
    UnknownBus(BusId),
    #[error("bus {0} is not a microgrid bus")]
    NotMicrogrid(BusId),
    #[error("dimension mismatch: matrix is {expected}x{expected}, vector has {got} entries")]
    DimensionMismatch { expected: usize, got: usize },
}

pub fn injections_from_state(
    net: &Network,
    microgrid_gen: &BTreeMap<BusId, f64>,
) -> Result<InjectionVector, PowerFlowError> {
    for &id in microgrid_gen.keys() {
        let bus = net.bus(id).ok_or(PowerFlowError::UnknownBus(id))?;
        if bus.kind != BusKind::Microgrid {
            return Err(PowerFlowError::NotMicrogrid(id));
        }
    }
    let values = net
        .bus_order()
        .into_iter()
        .map(|id| {
            let bus = net.bus(id).expect("ordered ids come from the network");
            let gen = microgrid_gen.get(&id).copied().unwrap_or(0.0);
            bus.p_gen_fixed + gen - bus.p_load
        })
        .collect();
    Ok(InjectionVector { values })
}

pub fn solve_angles(s: &SensitivityMatrix, p: &InjectionVector) -> Result<AngleProfile, PowerFlowError> {
    let n = s.dim();
    if p.values.len() != n {
        return Err(PowerFlowError::DimensionMismatch { expected: n, got: p.values.len() });
    }
    let values = (0..n).map(|i| exact::dot(s.matrix.row(i).iter().copied(), p.values.iter().copied())).collect();
    Ok(AngleProfile { values })
}

/// Branch flows keyed by both orientations; parallel branches are summed.
pub fn line_flows(net: &Network, theta: &AngleProfile) -> BTreeMap<(BusId, BusId), f64> {
    let mut angle: BTreeMap<BusId, f64> = net.bus_order().into_iter().zip(theta.values.iter().copied()).collect();
    angle.insert(net.slack(), 0.0);
    let mut flows = BTreeMap::new();
    for br in net.branches() {
        let f = if br.in_service { br.susceptance * (angle[&br.from] - angle[&br.to]) } else { 0.0 };
        *flows.entry((br.from, br.to)).or_insert(0.0) += f;
        *flows.entry((br.to, br.from)).or_insert(0.0) -= f;
    }
    flows
}

pub fn slack_injection(p: &InjectionVector) -> f64 {
    -p.values.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Bus};
    use nalgebra::DMatrix;

    fn net() -> Network {
        let bus = |id, kind, p_load, p_gen_fixed| Bus { id: BusId(id), kind, p_load, p_gen_fixed };
        Network::new(
            vec![
                bus(1, BusKind::Generator, 0.0, 2.8),
                bus(2, BusKind::Slack, 0.0, 0.0),
                bus(3, BusKind::Microgrid, 1.2, 0.0),
            ],
            vec![Branch::new(BusId(1), BusId(2), 10.0), Branch::new(BusId(2), BusId(3), 5.0)],
            100.0,
        )
        .unwrap()
    }

    #[test]
    fn injections() {
        let p = injections_from_state(&net(), &BTreeMap::from([(BusId(3), 0.551)])).unwrap();
        assert_eq!(p.values[0], 2.8);
        assert!((p.values[1] + 0.649).abs() < 1e-15);
        let zero = injections_from_state(&net(), &BTreeMap::new()).unwrap();
        assert_eq!(zero.values, vec![2.8, -1.2]);
        assert_eq!(
            injections_from_state(&net(), &BTreeMap::from([(BusId(1), 0.1)])),
            Err(PowerFlowError::NotMicrogrid(BusId(1)))
        );
        assert_eq!(
            injections_from_state(&net(), &BTreeMap::from([(BusId(7), 0.1)])),
            Err(PowerFlowError::UnknownBus(BusId(7)))
        );
    }

    #[test]
    fn angles_from_hand_matrix() {
        let s = SensitivityMatrix {
            matrix: DMatrix::from_row_slice(2, 2, &[0.1, 0.1, 0.1, 0.3]),
            bus_order: vec![BusId(1), BusId(2)],
        };
        let th = solve_angles(&s, &InjectionVector { values: vec![1.0, -1.0] }).unwrap();
        assert_eq!(th.values[0], 0.0);
        assert!((th.values[1] + 0.2).abs() < 1e-15);
        let zero = solve_angles(&s, &InjectionVector { values: vec![0.0, 0.0] }).unwrap();
        assert_eq!(zero.values, vec![0.0, 0.0]);
        assert!(solve_angles(&s, &InjectionVector { values: vec![1.0] }).is_err());
    }

    #[test]
    fn flows() {
        let n = net();
        let th = AngleProfile { values: vec![0.1, 0.06] };
        let f = line_flows(&n, &th);
        assert!((f[&(BusId(1), BusId(2))] - 1.0).abs() < 1e-15);
        assert_eq!(f[&(BusId(2), BusId(1))], -f[&(BusId(1), BusId(2))]);
        let mut branches = n.branches().to_vec();
        branches[1].in_service = false;
        let tripped = n.with_branches(branches);
        assert_eq!(line_flows(&tripped, &th)[&(BusId(2), BusId(3))], 0.0);

        let bus = |id, kind| Bus { id: BusId(id), kind, p_load: 0.0, p_gen_fixed: 0.0 };
        let pair = Network::new(
            vec![bus(0, BusKind::Slack), bus(1, BusKind::Load), bus(2, BusKind::Load)],
            vec![Branch::new(BusId(0), BusId(1), 1.0), Branch::new(BusId(1), BusId(2), 5.0)],
            100.0,
        )
        .unwrap();
        let f = line_flows(&pair, &th);
        assert!((f[&(BusId(1), BusId(2))] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn slack_balance() {
        assert_eq!(slack_injection(&InjectionVector { values: vec![1.0, -1.0] }), 0.0);
        assert_eq!(slack_injection(&InjectionVector { values: vec![2.8] }), -2.8);
    }
}
