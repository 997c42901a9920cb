//! Kantorovich-Rubinstein distance between finitely supported probability
//! measures with the flat-torus ground metric.
//!
//! Small instances are solved exactly as a transportation LP; larger ones
//! fall back to a log-domain Sinkhorn iteration whose result is rounded to a
//! feasible plan, with the duality gap reported.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::Serialize;

use crate::error::{Result, TodaError};
use crate::torus::{flat_distance, TorusPoint};

/// Supports up to this combined size go to the exact LP.
const LP_SUPPORT_LIMIT: usize = 400;
/// Beyond this many plan entries the cost matrix no longer fits comfortably.
const SINKHORN_ENTRY_LIMIT: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TransportMethod {
    /// One side is a single atom; the distance is a plain integral.
    ClosedForm,
    /// Exact transportation LP.
    Lp,
    /// Entropic approximation; the attached value is the duality gap between
    /// the rounded feasible plan and a feasible dual pair.
    Sinkhorn { duality_gap: f64 },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TransportResult {
    pub distance: f64,
    pub method: TransportMethod,
}

fn clean_support(atoms: &[(TorusPoint, f64)]) -> Result<Vec<(TorusPoint, f64)>> {
    let mut out: Vec<(TorusPoint, f64)> = Vec::with_capacity(atoms.len());
    let mut total = 0.0;
    for &(p, m) in atoms {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(TodaError::Validation(format!(
                "transport input has invalid mass {m}"
            )));
        }
        total += m;
        if m > 0.0 {
            out.push((p, m));
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(TodaError::Validation(format!(
            "transport inputs must be probability measures, total mass {total}"
        )));
    }
    for (_, m) in &mut out {
        *m /= total;
    }
    Ok(out)
}

/// W1 between two atom lists (each a probability measure).
pub fn transport_distance_atoms(
    mu: &[(TorusPoint, f64)],
    nu: &[(TorusPoint, f64)],
) -> Result<TransportResult> {
    let mu = clean_support(mu)?;
    let nu = clean_support(nu)?;
    let (m, k) = (mu.len(), nu.len());
    if k == 1 {
        let y = nu[0].0;
        let d = mu.iter().map(|&(p, w)| w * flat_distance(p, y)).sum();
        return Ok(TransportResult {
            distance: d,
            method: TransportMethod::ClosedForm,
        });
    }
    if m == 1 {
        let x = mu[0].0;
        let d = nu.iter().map(|&(q, w)| w * flat_distance(q, x)).sum();
        return Ok(TransportResult {
            distance: d,
            method: TransportMethod::ClosedForm,
        });
    }
    if m + k <= LP_SUPPORT_LIMIT {
        return Ok(TransportResult {
            distance: solve_lp(&mu, &nu)?,
            method: TransportMethod::Lp,
        });
    }
    if m * k <= SINKHORN_ENTRY_LIMIT {
        let (distance, gap) = solve_sinkhorn(&mu, &nu);
        return Ok(TransportResult {
            distance,
            method: TransportMethod::Sinkhorn { duality_gap: gap },
        });
    }
    Err(TodaError::Validation(format!(
        "transport supports too large ({m} x {k} plan entries)"
    )))
}

fn solve_lp(mu: &[(TorusPoint, f64)], nu: &[(TorusPoint, f64)]) -> Result<f64> {
    let (m, k) = (mu.len(), nu.len());
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let mut rows: Vec<LinearExpr> = (0..m).map(|_| LinearExpr::empty()).collect();
    let mut cols: Vec<LinearExpr> = (0..k).map(|_| LinearExpr::empty()).collect();
    for (i, &(p, _)) in mu.iter().enumerate() {
        for (j, &(q, _)) in nu.iter().enumerate() {
            let v = problem.add_var(flat_distance(p, q), (0.0, f64::INFINITY));
            rows[i].add(v, 1.0);
            cols[j].add(v, 1.0);
        }
    }
    for (expr, &(_, w)) in rows.into_iter().zip(mu) {
        problem.add_constraint(expr, ComparisonOp::Eq, w);
    }
    // one column constraint is redundant; dropping it sidesteps degeneracy
    for (expr, &(_, w)) in cols.into_iter().zip(nu).take(k - 1) {
        problem.add_constraint(expr, ComparisonOp::Eq, w);
    }
    let solution = problem
        .solve()
        .map_err(|e| TodaError::Numeric(format!("transport LP failed: {e}")))?;
    Ok(solution.objective())
}

/// Log-domain Sinkhorn with epsilon annealing, rounded to a feasible plan.
/// Returns `(primal cost, duality gap)`; the true W1 lies within the gap
/// below the returned cost.
pub(crate) fn solve_sinkhorn(mu: &[(TorusPoint, f64)], nu: &[(TorusPoint, f64)]) -> (f64, f64) {
    let (m, k) = (mu.len(), nu.len());
    let cost: Vec<f64> = mu
        .iter()
        .flat_map(|&(p, _)| nu.iter().map(move |&(q, _)| flat_distance(p, q)))
        .collect();
    let max_cost = cost.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let log_mu: Vec<f64> = mu.iter().map(|&(_, w)| w.ln()).collect();
    let log_nu: Vec<f64> = nu.iter().map(|&(_, w)| w.ln()).collect();
    let mut f = vec![0.0f64; m];
    let mut g = vec![0.0f64; k];
    let mut eps = max_cost * 0.25;
    let eps_min = max_cost * 2e-4;
    loop {
        for _ in 0..200 {
            // f update: f_i = -eps log sum_j exp(log_nu_j + (g_j - C_ij)/eps)
            let mut delta = 0.0f64;
            for i in 0..m {
                let row = &cost[i * k..(i + 1) * k];
                let mut best = f64::NEG_INFINITY;
                for j in 0..k {
                    best = best.max(log_nu[j] + (g[j] - row[j]) / eps);
                }
                let mut sum = 0.0;
                for j in 0..k {
                    sum += (log_nu[j] + (g[j] - row[j]) / eps - best).exp();
                }
                let new_f = -eps * (best + sum.ln());
                delta = delta.max((new_f - f[i]).abs());
                f[i] = new_f;
            }
            for j in 0..k {
                let mut best = f64::NEG_INFINITY;
                for i in 0..m {
                    best = best.max(log_mu[i] + (f[i] - cost[i * k + j]) / eps);
                }
                let mut sum = 0.0;
                for i in 0..m {
                    sum += (log_mu[i] + (f[i] - cost[i * k + j]) / eps - best).exp();
                }
                let new_g = -eps * (best + sum.ln());
                delta = delta.max((new_g - g[j]).abs());
                g[j] = new_g;
            }
            if delta < 1e-9 * max_cost {
                break;
            }
        }
        if eps <= eps_min {
            break;
        }
        eps = (eps * 0.25).max(eps_min);
    }
    // plan from the potentials, then round to the exact marginals
    let mut plan: Vec<f64> = Vec::with_capacity(m * k);
    for i in 0..m {
        for j in 0..k {
            let lp = log_mu[i] + log_nu[j] + (f[i] + g[j] - cost[i * k + j]) / eps;
            plan.push(lp.exp());
        }
    }
    // scale rows down to their marginals, then columns, then patch the
    // leftover mass with a product coupling
    for i in 0..m {
        let row_sum: f64 = plan[i * k..(i + 1) * k].iter().sum();
        let target = mu[i].1;
        if row_sum > target {
            let s = target / row_sum;
            for v in &mut plan[i * k..(i + 1) * k] {
                *v *= s;
            }
        }
    }
    let mut col_sums = vec![0.0f64; k];
    for i in 0..m {
        for j in 0..k {
            col_sums[j] += plan[i * k + j];
        }
    }
    for j in 0..k {
        let target = nu[j].1;
        if col_sums[j] > target {
            let s = target / col_sums[j];
            for i in 0..m {
                plan[i * k + j] *= s;
            }
        }
    }
    let mut row_def: Vec<f64> = vec![0.0; m];
    let mut col_def: Vec<f64> = vec![0.0; k];
    let mut def_total = 0.0;
    for i in 0..m {
        let s: f64 = plan[i * k..(i + 1) * k].iter().sum();
        row_def[i] = (mu[i].1 - s).max(0.0);
        def_total += row_def[i];
    }
    let mut col_sums = vec![0.0f64; k];
    for i in 0..m {
        for j in 0..k {
            col_sums[j] += plan[i * k + j];
        }
    }
    for j in 0..k {
        col_def[j] = (nu[j].1 - col_sums[j]).max(0.0);
    }
    if def_total > 0.0 {
        for i in 0..m {
            for j in 0..k {
                plan[i * k + j] += row_def[i] * col_def[j] / def_total;
            }
        }
    }
    let primal: f64 = plan
        .iter()
        .zip(&cost)
        .map(|(&p, &c)| p * c)
        .sum();
    // feasible dual pair: keep f, c-transform for the other potential
    let mut dual = 0.0;
    for i in 0..m {
        dual += mu[i].1 * f[i];
    }
    for j in 0..k {
        let mut best = f64::INFINITY;
        for i in 0..m {
            best = best.min(cost[i * k + j] - f[i]);
        }
        dual += nu[j].1 * best;
    }
    (primal, primal - dual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_atoms(rng: &mut ChaCha8Rng, n: usize) -> Vec<(TorusPoint, f64)> {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter()
            .map(|w| {
                (
                    TorusPoint::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)),
                    w / total,
                )
            })
            .collect()
    }

    /// Exact optimum by enumerating tree-supported vertices of the transport
    /// polytope: every vertex of the feasible set is supported on a spanning
    /// forest, so scanning all (m + k - 1)-edge trees finds the optimum.
    pub(crate) fn oracle_min_cost(
        mu: &[(TorusPoint, f64)],
        nu: &[(TorusPoint, f64)],
    ) -> f64 {
        let (m, k) = (mu.len(), nu.len());
        let cells: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .collect();
        let need = m + k - 1;
        let mut best = f64::INFINITY;
        let mut chosen = vec![0usize; need];
        fn rec(
            cells: &[(usize, usize)],
            start: usize,
            chosen: &mut Vec<usize>,
            slot: usize,
            need: usize,
            m: usize,
            k: usize,
            mu: &[(TorusPoint, f64)],
            nu: &[(TorusPoint, f64)],
            best: &mut f64,
        ) {
            if slot == need {
                if let Some(cost) = tree_cost(cells, chosen, m, k, mu, nu) {
                    if cost < *best {
                        *best = cost;
                    }
                }
                return;
            }
            let remaining = need - slot;
            for idx in start..=(cells.len() - remaining) {
                chosen[slot] = idx;
                rec(cells, idx + 1, chosen, slot + 1, need, m, k, mu, nu, best);
            }
        }
        fn tree_cost(
            cells: &[(usize, usize)],
            chosen: &[usize],
            m: usize,
            k: usize,
            mu: &[(TorusPoint, f64)],
            nu: &[(TorusPoint, f64)],
        ) -> Option<f64> {
            // union-find acyclicity over the bipartite vertex set
            let n = m + k;
            let mut parent: Vec<usize> = (0..n).collect();
            fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
                while parent[x] != x {
                    parent[x] = parent[parent[x]];
                    x = parent[x];
                }
                x
            }
            for &idx in chosen {
                let (i, j) = cells[idx];
                let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
                if a == b {
                    return None;
                }
                parent[a] = b;
            }
            // solve the flows by leaf elimination
            let mut supply: Vec<f64> = mu
                .iter()
                .map(|&(_, w)| w)
                .chain(nu.iter().map(|&(_, w)| -w))
                .collect();
            let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
            for (slot, &idx) in chosen.iter().enumerate() {
                let (i, j) = cells[idx];
                adj[i].push((m + j, slot));
                adj[m + j].push((i, slot));
            }
            let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
            let mut removed = vec![false; chosen.len()];
            let mut flows = vec![0.0f64; chosen.len()];
            let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
            while let Some(v) = stack.pop() {
                if degree[v] != 1 {
                    continue;
                }
                let &(other, slot) = adj[v]
                    .iter()
                    .find(|&&(_, slot)| !removed[slot])
                    .expect("leaf has one live edge");
                let flow = supply[v];
                // a source leaf must ship mass out, a sink leaf must receive
                if v < m && flow < -1e-12 {
                    return None;
                }
                if v >= m && flow > 1e-12 {
                    return None;
                }
                flows[slot] = flow.abs();
                supply[other] += flow;
                supply[v] = 0.0;
                removed[slot] = true;
                degree[v] -= 1;
                degree[other] -= 1;
                if degree[other] == 1 {
                    stack.push(other);
                }
            }
            let mut cost = 0.0;
            for (slot, &idx) in chosen.iter().enumerate() {
                let (i, j) = cells[idx];
                cost += flows[slot] * flat_distance(mu[i].0, nu[j].0);
            }
            Some(cost)
        }
        rec(&cells, 0, &mut chosen, 0, need, m, k, mu, nu, &mut best);
        best
    }

    #[test]
    fn point_masses_give_flat_distance() {
        let p = TorusPoint::new(0.1, 0.2);
        let q = TorusPoint::new(0.8, 0.9);
        let r = transport_distance_atoms(&[(p, 1.0)], &[(q, 1.0)]).unwrap();
        assert_abs_diff_eq!(r.distance, flat_distance(p, q), epsilon = 1e-14);
        assert_eq!(r.method, TransportMethod::ClosedForm);
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let atoms = random_atoms(&mut rng, 6);
        let r = transport_distance_atoms(&atoms, &atoms).unwrap();
        assert!(r.distance.abs() < 1e-12);
    }

    #[test]
    fn lp_matches_vertex_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let mu = random_atoms(&mut rng, 4);
            let nu = random_atoms(&mut rng, 4);
            let lp = transport_distance_atoms(&mu, &nu).unwrap();
            assert_eq!(lp.method, TransportMethod::Lp);
            let oracle = oracle_min_cost(&mu, &nu);
            assert_abs_diff_eq!(lp.distance, oracle, epsilon = 1e-9);
        }
    }

    #[test]
    fn triangle_inequality_on_sampled_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10 {
            let a = random_atoms(&mut rng, 5);
            let b = random_atoms(&mut rng, 4);
            let c = random_atoms(&mut rng, 3);
            let dab = transport_distance_atoms(&a, &b).unwrap().distance;
            let dbc = transport_distance_atoms(&b, &c).unwrap().distance;
            let dac = transport_distance_atoms(&a, &c).unwrap().distance;
            assert!(dac <= dab + dbc + 1e-9);
            let dba = transport_distance_atoms(&b, &a).unwrap().distance;
            assert_abs_diff_eq!(dab, dba, epsilon = 1e-9);
        }
    }

    #[test]
    fn sinkhorn_close_to_lp_within_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mu = random_atoms(&mut rng, 12);
        let nu = random_atoms(&mut rng, 9);
        let exact = transport_distance_atoms(&mu, &nu).unwrap().distance;
        let (upper, gap) = solve_sinkhorn(&mu, &nu);
        assert!(gap >= -1e-12, "gap {gap}");
        assert!(upper >= exact - 1e-9, "upper {upper} below exact {exact}");
        assert!(upper - exact <= gap + 1e-9, "gap does not cover the error");
        assert!(gap < 0.05, "sinkhorn gap too wide: {gap}");
    }

    #[test]
    fn rejects_non_probability_inputs() {
        let p = TorusPoint::new(0.1, 0.1);
        assert!(transport_distance_atoms(&[(p, 0.5)], &[(p, 1.0)]).is_err());
        assert!(transport_distance_atoms(&[(p, -1.0), (p, 2.0)], &[(p, 1.0)]).is_err());
    }
}
