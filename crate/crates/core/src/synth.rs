//! Seeded random networks and games for property tests and sweeps.

use rand::{Rng, RngExt};

use crate::dynamics::{check_conditions, SchemeConfig};
use crate::game::{GameSpec, Market, PlayerParams};
use crate::grid::{Branch, Bus, BusId, BusKind, Network};

/// A connected network: random spanning tree plus `chords` extra branches.
/// Bus 1 is the slack; every other bus is a load bus with zero load.
pub fn random_network<R: Rng>(rng: &mut R, n_buses: usize, chords: usize, b_range: (f64, f64)) -> Network {
    assert!(n_buses >= 2);
    let mut buses = vec![Bus { id: BusId(1), kind: BusKind::Slack, p_load: 0.0, p_gen_fixed: 0.0 }];
    for id in 2..=n_buses as u32 {
        buses.push(Bus { id: BusId(id), kind: BusKind::Load, p_load: 0.0, p_gen_fixed: 0.0 });
    }
    let mut branches = Vec::new();
    for k in 2..=n_buses as u32 {
        let parent = rng.random_range(1..k);
        branches.push(Branch::new(BusId(parent), BusId(k), rng.random_range(b_range.0..=b_range.1)));
    }
    for _ in 0..chords {
        let a = rng.random_range(1..=n_buses as u32);
        let mut b = rng.random_range(1..=n_buses as u32);
        while b == a {
            b = rng.random_range(1..=n_buses as u32);
        }
        branches.push(Branch::new(BusId(a), BusId(b), rng.random_range(b_range.0..=b_range.1)));
    }
    Network::new(buses, branches, 100.0).expect("generated network is valid")
}

/// A random game that may or may not satisfy the synchronous contraction condition.
pub fn random_game<R: Rng>(rng: &mut R) -> GameSpec {
    let n_buses = rng.random_range(4..=10);
    let chords = rng.random_range(0..=3);
    let base = random_network(rng, n_buses, chords, (1.0, 20.0));
    let n_players = rng.random_range(2..=3.min(n_buses - 1));

    let mut ids: Vec<u32> = (2..=n_buses as u32).collect();
    for k in (1..ids.len()).rev() {
        ids.swap(k, rng.random_range(0..=k));
    }
    let mut player_buses: Vec<u32> = ids[..n_players].to_vec();
    player_buses.sort();

    let mut buses = base.buses().to_vec();
    for bus in buses.iter_mut().skip(1) {
        if player_buses.contains(&bus.id.0) {
            bus.kind = BusKind::Microgrid;
            bus.p_load = rng.random_range(0.0..1.5);
        } else if rng.random_bool(0.5) {
            bus.kind = BusKind::Generator;
            bus.p_gen_fixed = rng.random_range(0.0..2.0);
        } else {
            bus.p_load = rng.random_range(0.0..1.5);
        }
    }
    let net = Network::new(buses, base.branches().to_vec(), base.base_mva()).unwrap();
    let players = player_buses
        .iter()
        .map(|&id| PlayerParams {
            bus: BusId(id),
            psi: rng.random_range(60.0..140.0),
            eta: 10f64.powf(rng.random_range(3.0..5.0)),
            p_load: net.bus(BusId(id)).unwrap().p_load,
            p_gen_max: rng.random_range(0.3..2.5),
        })
        .collect();
    let raw: Vec<f64> = (0..n_players).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    GameSpec::new(net, players, Market::new(rng.random_range(100.0..180.0)), Some(weights))
        .expect("generated game is valid")
}

/// A random game whose synchronous contraction constant is below one.
pub fn random_contracting_game<R: Rng>(rng: &mut R) -> GameSpec {
    loop {
        let spec = random_game(rng);
        if check_conditions(&spec, &SchemeConfig::iua(1e-6, 1)).iua_condition_met {
            return spec;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::new_rng;

    #[test]
    fn generated_games_contract() {
        let mut rng = new_rng(11);
        for _ in 0..20 {
            let spec = random_contracting_game(&mut rng);
            assert!(check_conditions(&spec, &SchemeConfig::iua(1e-6, 1)).c1 < 1.0);
            assert!(spec.n_players() >= 2);
        }
    }

    #[test]
    fn same_seed_same_network() {
        let a = random_network(&mut new_rng(5), 12, 4, (0.5, 20.0));
        let b = random_network(&mut new_rng(5), 12, 4, (0.5, 20.0));
        assert_eq!(a, b);
        assert!(a.first_unreachable().is_none());
    }
}
