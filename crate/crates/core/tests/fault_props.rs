mod common;

use gridgame::dynamics::{new_rng, run, Scheme, SchemeConfig};
use gridgame::faults::{apply_fault, post_fault_equilibrium, FaultError, FaultEvent, FaultKind, ScenarioTimeline};
use gridgame::grid::{validate_lemma1, BusKind};
use gridgame::synth::random_game;
use proptest::prelude::*;

fn ev(at_step: usize, kind: FaultKind) -> FaultEvent {
    FaultEvent { at_step, kind }
}

fn all_faults(spec: &gridgame::game::GameSpec) -> Vec<FaultKind> {
    let net = spec.net();
    let mut out = Vec::new();
    for b in net.buses() {
        match b.kind {
            BusKind::Generator => out.push(FaultKind::GeneratorOutage(b.id)),
            BusKind::Microgrid => out.push(FaultKind::MicrogridShutdown(b.id)),
            _ => {}
        }
    }
    for br in net.branches() {
        out.push(FaultKind::LineTrip(br.from, br.to));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn faults_leave_the_input_untouched(seed in any::<u64>()) {
        let spec = random_game(&mut new_rng(seed));
        let before = spec.clone();
        for kind in all_faults(&spec) {
            let first = apply_fault(&spec, &ev(0, kind));
            let again = apply_fault(&spec, &ev(0, kind));
            prop_assert_eq!(&spec, &before);
            prop_assert_eq!(first, again);
        }
    }

    #[test]
    fn surviving_trips_keep_sensitivity_properties(seed in any::<u64>()) {
        let spec = random_game(&mut new_rng(seed));
        for br in spec.net().branches() {
            match apply_fault(&spec, &ev(0, FaultKind::LineTrip(br.from, br.to))) {
                Ok(after) => {
                    prop_assert!(validate_lemma1(after.s()).is_empty());
                    prop_assert!(after.net().first_unreachable().is_none());
                }
                Err(e) => prop_assert!(matches!(e, FaultError::DisconnectedNetwork { .. }), "{e}"),
            }
        }
    }

    #[test]
    fn faults_on_distinct_targets_commute(seed in any::<u64>(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let spec = random_game(&mut new_rng(seed));
        let faults = all_faults(&spec);
        let (fa, fb) = (faults[a.index(faults.len())], faults[b.index(faults.len())]);
        prop_assume!(fa != fb);
        let ab = apply_fault(&spec, &ev(0, fa)).and_then(|s| apply_fault(&s, &ev(0, fb)));
        let ba = apply_fault(&spec, &ev(0, fb)).and_then(|s| apply_fault(&s, &ev(0, fa)));
        match (ab, ba) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(x.net(), y.net());
                prop_assert_eq!(x.players(), y.players());
                prop_assert_eq!(x.team_weights(), y.team_weights());
                let d = (&x.s().matrix - &y.s().matrix).amax();
                prop_assert!(d < 1e-12);
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "order changed outcome: {:?} vs {:?}", x.is_ok(), y.is_ok()),
        }
    }
}

#[test]
fn shutdown_removes_player_and_renormalises_weights() {
    let mut rng = new_rng(31);
    for _ in 0..50 {
        let spec = random_game(&mut rng);
        let bus = spec.players()[0].bus;
        let after = apply_fault(&spec, &ev(3, FaultKind::MicrogridShutdown(bus))).unwrap();
        assert_eq!(after.n_players(), spec.n_players() - 1);
        assert!(after.player_of(bus).is_none());
        assert_eq!(after.net().bus(bus).unwrap().kind, BusKind::Load);
        let w: f64 = after.team_weights().unwrap().iter().sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(apply_fault(&after, &ev(4, FaultKind::MicrogridShutdown(bus))).is_err());
    }
}

#[test]
fn unknown_targets_are_rejected() {
    let spec = common::fixture("ieee14.json").spec;
    use gridgame::grid::BusId;
    for kind in [
        FaultKind::GeneratorOutage(BusId(3)),
        FaultKind::GeneratorOutage(BusId(99)),
        FaultKind::MicrogridShutdown(BusId(1)),
        FaultKind::LineTrip(BusId(1), BusId(14)),
    ] {
        assert!(matches!(apply_fault(&spec, &ev(1, kind)), Err(FaultError::UnknownTarget(_))), "{kind}");
    }
    assert!(ScenarioTimeline::new(vec![
        ev(2, FaultKind::GeneratorOutage(BusId(1))),
        ev(2, FaultKind::GeneratorOutage(BusId(1))),
    ])
    .is_err());
}

#[test]
fn runs_settle_on_the_post_fault_equilibrium() {
    for name in ["ieee14_generator_outage.json", "ieee14_microgrid_shutdown.json", "ieee14_line_trip.json"] {
        let sc = common::fixture(name);
        let event = sc.timeline.events()[0];
        let target = post_fault_equilibrium(&sc.spec, &event).unwrap();
        for seed in 0..20 {
            let cfg = SchemeConfig { seed, delta: 1e-8, ..sc.config.clone() };
            assert_eq!(cfg.scheme, Scheme::Pda);
            let out = run(&sc.spec, &cfg, None, &sc.timeline, None).unwrap();
            assert!(out.trajectory.len_steps() > event.at_step);
            assert!(common::max_abs_diff(&out.final_state, &target.p_net) < 1e-6, "{name} seed {seed}");
        }
    }
}
