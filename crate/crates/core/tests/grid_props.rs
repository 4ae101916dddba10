use gridgame::dynamics::new_rng;
use gridgame::grid::{build_reduced_susceptance, sensitivity_of, validate_lemma1, Branch, GridError, Network};
use gridgame::synth::random_network;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn without_branch(net: &Network, k: usize) -> Network {
    let branches: Vec<Branch> =
        net.branches().iter().enumerate().filter(|(j, _)| *j != k).map(|(_, b)| b.clone()).collect();
    Network::new(net.buses().to_vec(), branches, net.base_mva()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sensitivity_is_symmetric_nonnegative_with_positive_diagonal(
        seed in any::<u64>(), n in 4usize..=20, chords in 0usize..6,
    ) {
        let net = random_network(&mut new_rng(seed), n, chords, (0.5, 20.0));
        let s = sensitivity_of(&net).unwrap();
        let violations = validate_lemma1(&s);
        prop_assert!(violations.is_empty(), "{:?}", violations);
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                prop_assert!(s.get(i, j) >= -1e-12);
                prop_assert!(s.get(i, j) <= s.get(i, i) + 1e-12);
            }
        }
    }

    #[test]
    fn sensitivity_inverts_reduced_laplacian(seed in any::<u64>(), n in 4usize..=20, chords in 0usize..6) {
        let net = random_network(&mut new_rng(seed), n, chords, (0.5, 20.0));
        let b = build_reduced_susceptance(&net).unwrap();
        let s = sensitivity_of(&net).unwrap();
        let prod = &s.matrix * &b.matrix;
        let err = (prod - DMatrix::identity(s.dim(), s.dim())).amax();
        prop_assert!(err < 1e-9, "‖S·L − I‖ = {err}");
    }

    #[test]
    fn removing_a_tree_branch_disconnects(seed in any::<u64>(), n in 4usize..=20, pick in any::<prop::sample::Index>()) {
        let net = random_network(&mut new_rng(seed), n, 0, (0.5, 20.0));
        let k = pick.index(net.branches().len());
        let cut = without_branch(&net, k);
        prop_assert!(cut.first_unreachable().is_some());
        prop_assert!(
            matches!(build_reduced_susceptance(&cut), Err(GridError::DisconnectedNetwork(_))),
            "islanded network must be rejected"
        );
    }

    #[test]
    fn removing_a_chord_keeps_connectivity(seed in any::<u64>(), n in 4usize..=20, chords in 1usize..6) {
        let net = random_network(&mut new_rng(seed), n, chords, (0.5, 20.0));
        for k in (n - 1)..net.branches().len() {
            let cut = without_branch(&net, k);
            prop_assert!(cut.first_unreachable().is_none());
            let s = sensitivity_of(&cut).unwrap();
            prop_assert!(validate_lemma1(&s).is_empty());
        }
    }
}

#[test]
fn extra_branch_never_raises_diagonal_sensitivity() {
    let mut rng = new_rng(3);
    for _ in 0..50 {
        let net = random_network(&mut rng, 8, 0, (0.5, 20.0));
        let mut branches = net.branches().to_vec();
        branches.push(Branch::new(branches[0].from, branches.last().unwrap().to, 5.0));
        let denser = Network::new(net.buses().to_vec(), branches, 100.0).unwrap();
        let (s0, s1) = (sensitivity_of(&net).unwrap(), sensitivity_of(&denser).unwrap());
        for i in 0..s0.dim() {
            assert!(s1.get(i, i) <= s0.get(i, i) + 1e-12);
        }
    }
}
