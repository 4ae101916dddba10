mod common;

use std::collections::BTreeMap;

use gridgame::dynamics::new_rng;
use gridgame::grid::{build_reduced_susceptance, sensitivity_of, BusId};
use gridgame::powerflow::{injections_from_state, line_flows, slack_injection, solve_angles, InjectionVector};
use gridgame::synth::random_network;
use nalgebra::DVector;
use proptest::prelude::*;

fn injections(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn angles_reproduce_injections(seed in any::<u64>(), n in 4usize..=16, chords in 0usize..5, raw in injections(15)) {
        let net = random_network(&mut new_rng(seed), n, chords, (0.5, 20.0));
        let s = sensitivity_of(&net).unwrap();
        let p = InjectionVector { values: raw[..n - 1].to_vec() };
        let theta = solve_angles(&s, &p).unwrap();
        let b = build_reduced_susceptance(&net).unwrap();
        let back = &b.matrix * DVector::from_vec(theta.values.clone());
        for (x, y) in back.iter().zip(&p.values) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn angles_are_linear(seed in any::<u64>(), n in 4usize..=16, a in -2.0..2.0f64, b in -2.0..2.0f64,
                         p in injections(15), q in injections(15)) {
        let net = random_network(&mut new_rng(seed), n, 2, (0.5, 20.0));
        let s = sensitivity_of(&net).unwrap();
        let (p, q) = (&p[..n - 1], &q[..n - 1]);
        let combo: Vec<f64> = p.iter().zip(q).map(|(x, y)| a * x + b * y).collect();
        let solve = |v: &[f64]| solve_angles(&s, &InjectionVector { values: v.to_vec() }).unwrap().values;
        let (tp, tq, tc) = (solve(p), solve(q), solve(&combo));
        for k in 0..n - 1 {
            prop_assert!((tc[k] - (a * tp[k] + b * tq[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn flows_balance_at_every_bus(seed in any::<u64>(), n in 4usize..=16, chords in 0usize..5, raw in injections(15)) {
        let net = random_network(&mut new_rng(seed), n, chords, (0.5, 20.0));
        let s = sensitivity_of(&net).unwrap();
        let p = InjectionVector { values: raw[..n - 1].to_vec() };
        let flows = line_flows(&net, &solve_angles(&s, &p).unwrap());
        let mut out: BTreeMap<BusId, f64> = BTreeMap::new();
        for (&(from, _), &f) in &flows {
            *out.entry(from).or_insert(0.0) += f;
        }
        for (k, id) in net.bus_order().into_iter().enumerate() {
            prop_assert!((out[&id] - p.values[k]).abs() < 1e-9, "bus {id}");
        }
        prop_assert!((out[&net.slack()] - slack_injection(&p)).abs() < 1e-9);
    }
}

#[test]
fn fixture_injections_follow_bus_data() {
    let sc = common::fixture("ieee14.json");
    let net = sc.spec.net();
    let gen: BTreeMap<BusId, f64> = [(BusId(3), 0.5), (BusId(6), 0.25), (BusId(14), 0.0)].into();
    let p = injections_from_state(net, &gen).unwrap();
    let order = net.bus_order();
    let at = |id: u32| p.values[order.iter().position(|b| b.0 == id).unwrap()];
    assert!((at(3) - (0.5 - 1.2)).abs() < 1e-12);
    assert!((at(6) - (0.25 - 1.05)).abs() < 1e-12);
    assert!((at(14) + 0.7).abs() < 1e-12);
    assert!((at(1) - 2.8).abs() < 1e-12);
    assert!(injections_from_state(net, &[(BusId(4), 1.0)].into()).is_err());
}
