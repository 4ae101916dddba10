use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use super::{ActiveStatus, Equilibrium, GameError, GameSpec};

/// Nash equilibrium by active-set search over {Inner, AtZeroGen, AtCapacity}.
///
/// Starts with every player inner, solves the inner block exactly, and flips
/// the lowest-indexed inconsistent player until the partition is consistent.
pub fn solve_ne_direct(spec: &GameSpec) -> Result<Equilibrium, GameError> {
    let n = spec.n_players();
    let d = spec.derived();
    let mut status: Vec<ActiveStatus> =
        d.iter().map(|p| if p.p_max <= p.p_min { ActiveStatus::AtZeroGen } else { ActiveStatus::Inner }).collect();
    let mut seen = HashSet::new();
    let limit = 3usize.saturating_pow(n as u32);

    loop {
        if !seen.insert(status.clone()) || seen.len() > limit {
            return Err(GameError::NoConvergentActiveSet(seen.len()));
        }
        let p = solve_partition(spec, &status)?;
        let full = spec.full_injection(&p);
        let mut flip = None;
        for i in 0..n {
            let di = &d[i];
            let next = match status[i] {
                ActiveStatus::Inner if p[i] <= di.p_min => Some(ActiveStatus::AtZeroGen),
                ActiveStatus::Inner if p[i] >= di.p_max => Some(ActiveStatus::AtCapacity),
                ActiveStatus::Inner => None,
                bound => {
                    let raw = (di.gamma - spec.g_bar_full(i, &full)) / di.s_ii;
                    if di.p_max <= di.p_min {
                        None
                    } else if bound == ActiveStatus::AtZeroGen && raw > di.p_min
                        || bound == ActiveStatus::AtCapacity && raw < di.p_max
                    {
                        Some(ActiveStatus::Inner)
                    } else {
                        None
                    }
                }
            };
            if let Some(next) = next {
                flip = Some((i, next));
                break;
            }
        }
        match flip {
            Some((i, next)) => status[i] = next,
            None => return Ok(spec.equilibrium(p, status)),
        }
    }
}

/// Player injections for a fixed partition: bounds for boundary players, the
/// reduced linear system H·P = q for the inner ones.
fn solve_partition(spec: &GameSpec, status: &[ActiveStatus]) -> Result<Vec<f64>, GameError> {
    let d = spec.derived();
    let mut p: Vec<f64> = status
        .iter()
        .zip(d)
        .map(|(st, di)| match st {
            ActiveStatus::AtCapacity => di.p_max,
            _ => di.p_min,
        })
        .collect();
    let inner: Vec<usize> = (0..p.len()).filter(|&i| status[i] == ActiveStatus::Inner).collect();
    if inner.is_empty() {
        return Ok(p);
    }
    let s = spec.s();
    let mut fixed = p.clone();
    for &i in &inner {
        fixed[i] = 0.0;
    }
    let full = spec.full_injection(&fixed);
    let m = inner.len();
    let mut h = DMatrix::zeros(m, m);
    let mut q = DVector::zeros(m);
    for (r, &i) in inner.iter().enumerate() {
        let row = spec.s_index(i);
        let s_ii = d[i].s_ii;
        for (c, &j) in inner.iter().enumerate() {
            h[(r, c)] = s.get(row, spec.s_index(j)) / s_ii;
        }
        let outside = spec.g_bar_full(i, &full);
        q[r] = d[i].gamma / s_ii - outside / s_ii;
    }
    let x = h.lu().solve(&q).ok_or(GameError::SingularReducedSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GameError::SingularReducedSystem);
    }
    for (r, &i) in inner.iter().enumerate() {
        p[i] = x[r];
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::tests::three_bus_game;
    use crate::game::{best_response, PlayerParams};

    #[test]
    fn three_bus_hand_solution() {
        let spec = three_bus_game();
        let eq = solve_ne_direct(&spec).unwrap();
        assert!((eq.p_net[0] - 80.0 / 3.0).abs() < 1e-9);
        assert!((eq.p_net[1] + 20.0 / 3.0).abs() < 1e-9);
        assert_eq!(eq.active_set, vec![ActiveStatus::Inner, ActiveStatus::Inner]);
        assert!((eq.angles.values[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_and_bounds() {
        let mut spec = three_bus_game();
        let mut players = spec.players().to_vec();
        players[0].p_gen_max = 5.0;
        spec = GameSpec::new(spec.net().clone(), players, spec.market().clone(), None).unwrap();
        let eq = solve_ne_direct(&spec).unwrap();
        assert_eq!(eq.p_net[0], 5.0);
        assert_eq!(eq.active_set[0], ActiveStatus::AtCapacity);
        for i in 0..2 {
            let br = best_response(&spec.derived()[i], spec.g_bar(i, &eq.p_net));
            assert!((br - eq.p_net[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_capacity_player_stays_at_bound() {
        let spec = three_bus_game();
        let players: Vec<PlayerParams> =
            spec.players().iter().map(|p| PlayerParams { p_gen_max: 0.0, ..p.clone() }).collect();
        let spec = GameSpec::new(spec.net().clone(), players, spec.market().clone(), None).unwrap();
        let eq = solve_ne_direct(&spec).unwrap();
        assert_eq!(eq.p_gen, vec![0.0, 0.0]);
    }
}
