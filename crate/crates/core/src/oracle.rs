//! Definition-level reference: edge posteriors and the data marginal by
//! exhaustive enumeration over linear orders and consistent parent sets.
//!
//! This module deliberately shares no subset-lattice or transform code with
//! the engine - only the dataset, the priors, and the local likelihood - so
//! that a bug in the fast machinery cannot cancel against itself. Everything
//! here is plain submask loops over at most `2^6` masks and `6!` orders.

use crate::engine::EdgePosteriors;
use crate::error::{Error, Result};
use crate::lattice::NodeSet;
use crate::mobius::LogWeight;
use crate::model::{local_marginal_likelihood, q_weight, rho, Dataset, PriorSpec};
use itertools::Itertools;
use std::time::Instant;

/// Hard guard: the work grows as n! * n * 2^n.
pub const MAX_ORACLE_N: usize = 6;

fn check_guard(n: usize) -> Result<()> {
    if n > MAX_ORACLE_N {
        return Err(Error::GuardExceeded(format!(
            "brute-force reference requires n <= {MAX_ORACLE_N}, got n={n}"
        )));
    }
    Ok(())
}

struct DefinitionTables {
    n: usize,
    /// cand[i][u]: q(U) * sum of family weights of parent sets inside U.
    cand: Vec<Vec<LogWeight>>,
    /// edge[v * n + u][uv]: like `cand[v][uv]` but restricted to parent sets
    /// containing `u`.
    edge: Vec<Vec<LogWeight>>,
}

fn definition_tables(data: &Dataset, spec: &PriorSpec) -> Result<DefinitionTables> {
    let n = data.n();
    let size = 1usize << n;

    // Family weight of every subset; zero where the node is inside its own
    // parent set or the indegree bound is exceeded (rho vanishes there).
    let mut family = vec![vec![LogWeight::ZERO; size]; n];
    for i in 0..n {
        for mask in 0..size {
            let g = NodeSet::from_mask(mask as u32);
            if g.contains(i) || g.len() > spec.k {
                continue;
            }
            family[i][mask] = rho(spec, n, i, g)
                * local_marginal_likelihood(data, i, g, &spec.score_family)?;
        }
    }

    let mut cand = vec![vec![LogWeight::ZERO; size]; n];
    let mut edge = vec![vec![LogWeight::ZERO; size]; n * n];
    for i in 0..n {
        for u_mask in 0..size {
            if u_mask >> i & 1 == 1 {
                continue;
            }
            let qw = q_weight(spec, NodeSet::from_mask(u_mask as u32));
            let mut total = LogWeight::ZERO;
            let mut with_u = vec![LogWeight::ZERO; n];
            let mut g = u_mask;
            loop {
                let w = family[i][g];
                total += w;
                if !w.is_zero() {
                    for b in NodeSet::from_mask(g as u32).iter() {
                        with_u[b] += w;
                    }
                }
                if g == 0 {
                    break;
                }
                g = (g - 1) & u_mask;
            }
            cand[i][u_mask] = qw * total;
            for (u, w) in with_u.into_iter().enumerate() {
                edge[i * n + u][u_mask] = qw * w;
            }
        }
    }
    Ok(DefinitionTables { n, cand, edge })
}

struct BruteOutcome {
    marginal: LogWeight,
    /// Row-major joint weights p(x, edge u->v).
    edge_weights: Vec<LogWeight>,
}

fn sum_over_orders(tables: &DefinitionTables, reverse: bool) -> BruteOutcome {
    let n = tables.n;
    let mut perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    if reverse {
        perms.reverse();
    }
    let mut marginal = LogWeight::ZERO;
    let mut edge_weights = vec![LogWeight::ZERO; n * n];
    let mut predecessors = vec![0usize; n];
    for perm in &perms {
        let mut seen = 0usize;
        for &i in perm {
            predecessors[i] = seen;
            seen |= 1 << i;
        }
        let factors: Vec<LogWeight> = (0..n).map(|i| tables.cand[i][predecessors[i]]).collect();
        let total: LogWeight = factors.iter().copied().product();
        marginal += total;
        for v in 0..n {
            let rest = total / factors[v];
            for u in NodeSet::from_mask(predecessors[v] as u32).iter() {
                edge_weights[u * n + v] += rest * tables.edge[v * n + u][predecessors[v]];
            }
        }
    }
    BruteOutcome {
        marginal,
        edge_weights,
    }
}

/// Exact posterior matrix by definition. Guarded to `n <=` [`MAX_ORACLE_N`].
pub fn brute_posteriors(data: &Dataset, spec: &PriorSpec) -> Result<EdgePosteriors> {
    let start = Instant::now();
    let n = data.n();
    check_guard(n)?;
    let outcome = sum_over_orders(&definition_tables(data, spec)?, false);
    let log_z = outcome.marginal.ln();
    let posteriors = (0..n * n)
        .map(|idx| {
            if idx / n == idx % n {
                0.0
            } else {
                (outcome.edge_weights[idx].ln() - log_z).exp().min(1.0)
            }
        })
        .collect();
    Ok(EdgePosteriors {
        n,
        names: data.names().to_vec(),
        k: spec.k,
        prior: spec.describe_prior(),
        score: spec.describe_score(),
        log_marginal: log_z,
        posteriors,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        seed_info: None,
    })
}

/// The joint weight of the data alone, summed over every order and structure.
pub fn brute_marginal(data: &Dataset, spec: &PriorSpec) -> Result<LogWeight> {
    check_guard(data.n())?;
    Ok(sum_over_orders(&definition_tables(data, spec)?, false).marginal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::edge_posteriors;
    use crate::model::{RhoFamily, ScoreFamily};

    fn flat_spec(k: usize) -> PriorSpec {
        PriorSpec::new(k, RhoFamily::Flat, ScoreFamily::DirichletAllOnes).unwrap()
    }

    fn empty_data(n: usize) -> Dataset {
        let header = (0..n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
        Dataset::parse_csv(&format!("{header}\n"), "test", None).unwrap()
    }

    #[test]
    fn two_nodes_empty_data_by_hand() {
        // Two orders, each with joint weight 2, of which weight 1 carries the
        // edge: both directed posteriors are exactly 1/4.
        let post = brute_posteriors(&empty_data(2), &flat_spec(1)).unwrap();
        assert!((post.get(0, 1) - 0.25).abs() < 1e-12);
        assert!((post.get(1, 0) - 0.25).abs() < 1e-12);
        assert!((post.log_marginal - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_node() {
        let data = Dataset::new(vec!["a".into()], vec![2], vec![vec![0], vec![1]]).unwrap();
        let spec = flat_spec(0);
        let post = brute_posteriors(&data, &spec).unwrap();
        assert_eq!(post.posteriors, vec![0.0]);
        let expect = local_marginal_likelihood(&data, 0, NodeSet::EMPTY, &spec.score_family)
            .unwrap()
            .ln();
        assert!((post.log_marginal - expect).abs() < 1e-12);
    }

    #[test]
    fn empty_data_posteriors_are_exchangeable() {
        let post = brute_posteriors(&empty_data(4), &flat_spec(3)).unwrap();
        let reference = post.get(0, 1);
        for u in 0..4 {
            for v in 0..4 {
                if u != v {
                    assert!((post.get(u, v) - reference).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn guard_rejects_large_n() {
        let err = brute_marginal(&empty_data(7), &flat_spec(1));
        assert!(matches!(err, Err(Error::GuardExceeded(_))));
    }

    #[test]
    fn enumeration_order_does_not_matter() {
        let data = Dataset::parse_csv("a,b,c\n0,1,0\n1,1,1\n0,0,1\n1,0,0\n", "t", None).unwrap();
        let spec = PriorSpec::default_with_k(2);
        let tables = definition_tables(&data, &spec).unwrap();
        let fwd = sum_over_orders(&tables, false);
        let rev = sum_over_orders(&tables, true);
        assert!((fwd.marginal.ln() - rev.marginal.ln()).abs() < 1e-12);
        for (a, b) in fwd.edge_weights.iter().zip(&rev.edge_weights) {
            if !(a.is_zero() && b.is_zero()) {
                assert!((a.ln() - b.ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn agrees_with_engine_on_a_spot_instance() {
        let data =
            Dataset::parse_csv("a,b,c\n0,1,2\n1,1,0\n0,0,1\n1,0,2\n0,1,1\n", "t", None).unwrap();
        for k in 0..3 {
            let spec = PriorSpec::default_with_k(k);
            let fast = edge_posteriors(&data, &spec).unwrap();
            let slow = brute_posteriors(&data, &spec).unwrap();
            assert!((fast.log_marginal - slow.log_marginal).abs() < 1e-9);
            for (a, b) in fast.posteriors.iter().zip(&slow.posteriors) {
                assert!((a - b).abs() < 1e-9, "k={k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn duplicated_records_shift_engine_and_reference_identically() {
        let base = Dataset::parse_csv("a,b\n0,1\n1,0\n1,1\n", "t", None).unwrap();
        let doubled = {
            let rows: Vec<Vec<u32>> = (0..base.m())
                .chain(0..base.m())
                .map(|t| (0..base.n()).map(|i| base.value(t, i)).collect())
                .collect();
            Dataset::new(base.names().to_vec(), base.arities().to_vec(), rows).unwrap()
        };
        let spec = PriorSpec::default_with_k(1);
        let shift_ref =
            brute_marginal(&doubled, &spec).unwrap().ln() - brute_marginal(&base, &spec).unwrap().ln();
        let shift_fast = edge_posteriors(&doubled, &spec).unwrap().log_marginal
            - edge_posteriors(&base, &spec).unwrap().log_marginal;
        assert!((shift_ref - shift_fast).abs() < 1e-9);
    }
}
