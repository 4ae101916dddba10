use nalgebra::{DMatrix, DVector};

use super::{ActiveStatus, Equilibrium, GameError, GameSpec};

const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Working {
    Free,
    Lower,
    Upper,
    Fixed,
}

/// Minimises Σ α_i U_i over the players' boxes with a primal active-set method.
///
/// With θ at the player buses equal to a + C x, the objective is the convex
/// quadratic ½ xᵀQx + qᵀx with Q = CᵀWC, W = diag(α_i η_i²). Each iteration
/// solves the equality-constrained problem on the free players, walks toward
/// its solution until a bound blocks, and releases the bound with the most
/// negative multiplier once no step remains.
pub fn solve_team(spec: &GameSpec) -> Result<Equilibrium, GameError> {
    let alpha = spec.team_weights().ok_or(GameError::MissingTeamWeights)?.to_vec();
    let n = spec.n_players();
    let s = spec.s();
    let k = spec.money_scale();
    let zeta = spec.market().zeta;
    let players = spec.players();
    let bounds: Vec<(f64, f64)> = spec.derived().iter().map(|d| (d.p_min, d.p_max)).collect();

    let c = DMatrix::from_fn(n, n, |i, j| s.get(spec.s_index(i), spec.s_index(j)));
    let background = spec.full_injection(&vec![0.0; n]);
    let a = DVector::from_fn(n, |i, _| (0..s.dim()).map(|col| s.get(spec.s_index(i), col) * background[col]).sum());
    let w = DVector::from_fn(n, |i, _| alpha[i] * players[i].eta * players[i].eta);
    let scale = (0..n).map(|i| w[i] * c[(i, i)] * c[(i, i)]).fold(0.0_f64, f64::max);
    let wc = DMatrix::from_fn(n, n, |i, j| w[i] * c[(i, j)] / scale);
    let q_mat = c.transpose() * &wc;
    let q_vec = c.transpose() * w.component_mul(&a) / scale
        + DVector::from_fn(n, |i, _| alpha[i] * k * (players[i].psi - zeta) / scale);
    let tol = 1e-12 * q_vec.amax().max(1.0);

    let mut x = DVector::from_fn(n, |i, _| bounds[i].0);
    let mut set: Vec<Working> =
        bounds.iter().map(|&(lo, hi)| if hi <= lo { Working::Fixed } else { Working::Lower }).collect();

    let mut at_subspace_minimum = false;
    for _ in 0..MAX_ITERATIONS {
        let g = &q_mat * &x + &q_vec;
        if at_subspace_minimum {
            // Multipliers of the bounds in the working set; negative means the bound should go.
            let release = (0..n)
                .filter_map(|i| match set[i] {
                    Working::Lower => Some((i, g[i])),
                    Working::Upper => Some((i, -g[i])),
                    _ => None,
                })
                .filter(|&(_, m)| m < -tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match release {
                Some((i, _)) => set[i] = Working::Free,
                None => return Ok(finish(spec, x, &set)),
            }
            at_subspace_minimum = false;
            continue;
        }

        let free: Vec<usize> = (0..n).filter(|&i| set[i] == Working::Free).collect();
        if free.is_empty() {
            at_subspace_minimum = true;
            continue;
        }
        // Minimiser over the free players with the others held at their bounds.
        let qff = DMatrix::from_fn(free.len(), free.len(), |r, c| q_mat[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| {
            let i = free[r];
            -q_vec[i] - (0..n).filter(|&j| set[j] != Working::Free).map(|j| q_mat[(i, j)] * x[j]).sum::<f64>()
        });
        let target = qff.cholesky().ok_or(GameError::SingularReducedSystem)?.solve(&rhs);

        let mut step = 1.0;
        let mut blocking = None;
        for (r, &i) in free.iter().enumerate() {
            let d = target[r] - x[i];
            let limit = if d < 0.0 {
                (bounds[i].0 - x[i]) / d
            } else if d > 0.0 {
                (bounds[i].1 - x[i]) / d
            } else {
                continue;
            };
            if limit < step {
                step = limit.max(0.0);
                blocking = Some((i, d < 0.0));
            }
        }
        match blocking {
            None => {
                for (r, &i) in free.iter().enumerate() {
                    x[i] = target[r];
                }
                at_subspace_minimum = true;
            }
            Some((b, lower)) => {
                for (r, &i) in free.iter().enumerate() {
                    x[i] = (x[i] + step * (target[r] - x[i])).clamp(bounds[i].0, bounds[i].1);
                }
                x[b] = if lower { bounds[b].0 } else { bounds[b].1 };
                set[b] = if lower { Working::Lower } else { Working::Upper };
            }
        }
    }
    Err(GameError::MaxIterationsExceeded(MAX_ITERATIONS))
}

fn finish(spec: &GameSpec, x: DVector<f64>, set: &[Working]) -> Equilibrium {
    let status = set
        .iter()
        .map(|w| match w {
            Working::Free => ActiveStatus::Inner,
            Working::Lower | Working::Fixed => ActiveStatus::AtZeroGen,
            Working::Upper => ActiveStatus::AtCapacity,
        })
        .collect();
    spec.equilibrium(x.iter().copied().collect(), status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::three_bus_game;
    use crate::game::{loss_of_efficiency, solve_ne_direct};

    #[test]
    fn three_bus_team_optimum() {
        // Interior KKT: S u = α(ζ−ψ) with u_i = α_i η_i² θ_i gives θ = (2, 0), P = (30, −10).
        let eq = solve_team(&three_bus_game()).unwrap();
        assert!((eq.p_net[0] - 30.0).abs() < 1e-6, "{:?}", eq.p_net);
        assert!((eq.p_net[1] + 10.0).abs() < 1e-6, "{:?}", eq.p_net);
    }

    #[test]
    fn team_differs_from_nash_when_coupled() {
        let spec = three_bus_game();
        let ne = solve_ne_direct(&spec).unwrap();
        let tp = solve_team(&spec).unwrap();
        assert!((ne.p_net[0] - tp.p_net[0]).abs() > 1.0);
        // 0.5·(−333.33 + 1355.56) over 0.5·(−400 + 1400).
        let loe = loss_of_efficiency(&spec).unwrap();
        assert!((loe - 511.111_111 / 500.0).abs() < 1e-6, "{loe}");
    }

    #[test]
    fn single_player_interior_is_stationary() {
        let spec = three_bus_game();
        let net = spec.net().clone();
        let mut players = spec.players().to_vec();
        players.truncate(1);
        let mut buses = net.buses().to_vec();
        buses[2].kind = crate::grid::BusKind::Load;
        let net = crate::grid::Network::new(buses, net.branches().to_vec(), 100.0).unwrap();
        let spec = GameSpec::new(net, players, spec.market().clone(), Some(vec![1.0])).unwrap();
        let tp = solve_team(&spec).unwrap();
        let ne = solve_ne_direct(&spec).unwrap();
        let p = &spec.players()[0];
        let theta = tp.angles.values[spec.s_index(0)];
        let s11 = spec.derived()[0].s_ii;
        let residual = p.psi - spec.market().zeta + p.eta * p.eta * theta * s11;
        assert!(residual.abs() < 1e-9 * p.eta * p.eta * s11, "{residual} {:?} {:?}", tp.p_net, ne.p_net);
        assert!((tp.p_net[0] - ne.p_net[0]).abs() < 1e-9);
    }
}
