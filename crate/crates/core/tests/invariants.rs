//! Cross-module randomized invariants.

use bnedge_core::engine::{edge_posteriors, EdgePosteriors};
use bnedge_core::lattice::{binomial_tail, chernoff_tail_bound, enumerate_subsets, NodeSet};
use bnedge_core::mobius::{
    downward_transform_truncated, log_sum, naive_downward, naive_upward,
    upward_transform_truncated, LatticeTable, LogWeight,
};
use bnedge_core::model::{Dataset, PriorSpec, RhoFamily, ScoreFamily};
use bnedge_core::oracle::brute_posteriors;
use bnedge_core::study::{roc_curve, GroundTruthNetwork};
use proptest::prelude::*;

fn weight_strategy() -> impl Strategy<Value = LogWeight> {
    prop_oneof![
        1 => Just(LogWeight::ZERO),
        9 => (-6.0..6.0f64).prop_map(LogWeight::from_ln),
    ]
}

fn table_strategy(max_n: usize) -> impl Strategy<Value = LatticeTable> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(weight_strategy(), 1 << n)
            .prop_map(move |entries| LatticeTable::from_entries(n, entries))
    })
}

fn close(a: LogWeight, b: LogWeight, tol: f64) -> bool {
    (a.is_zero() && b.is_zero()) || (a.ln() - b.ln()).abs() <= tol
}

proptest! {
    #[test]
    fn log_sum_commutes(a in -80.0..80.0f64, b in -80.0..80.0f64) {
        let x = log_sum(LogWeight::from_ln(a), LogWeight::from_ln(b));
        let y = log_sum(LogWeight::from_ln(b), LogWeight::from_ln(a));
        prop_assert!((x.ln() - y.ln()).abs() <= 1e-12);
    }

    #[test]
    fn log_sum_associates(a in -40.0..40.0f64, b in -40.0..40.0f64, c in -40.0..40.0f64) {
        let (a, b, c) = (LogWeight::from_ln(a), LogWeight::from_ln(b), LogWeight::from_ln(c));
        let left = log_sum(log_sum(a, b), c);
        let right = log_sum(a, log_sum(b, c));
        prop_assert!((left.ln() - right.ln()).abs() <= 1e-12);
    }

    #[test]
    fn subset_enumeration_is_complete_and_sorted(mask in 0u32..(1 << 12)) {
        let ground = NodeSet::from_mask(mask);
        let all: Vec<NodeSet> = enumerate_subsets(ground, ground.len()).collect();
        prop_assert_eq!(all.len(), 1usize << ground.len());
        for w in all.windows(2) {
            let ka = (w[0].len(), w[0].mask());
            let kb = (w[1].len(), w[1].mask());
            prop_assert!(ka < kb);
        }
        for s in &all {
            prop_assert!(s.is_subset_of(ground));
        }
    }

    #[test]
    fn tail_bound_dominates(n in 1u32..=30, k in 0u32..15) {
        prop_assume!(n > 2 * k);
        let exact = binomial_tail(n, k).unwrap() as f64;
        prop_assert!(exact <= chernoff_tail_bound(n, k).unwrap());
    }

    #[test]
    fn downward_agrees_with_definition(table in table_strategy(8), k in 0usize..9) {
        let expect = naive_downward(&table).unwrap();
        let got = downward_transform_truncated(table, k);
        for mask in 0..got.len() {
            if mask.count_ones() as usize <= k {
                prop_assert!(close(got[mask], expect[mask], 1e-9));
            }
        }
    }

    #[test]
    fn upward_agrees_with_definition(table in table_strategy(8), k in 0usize..9) {
        let mut support = table;
        for mask in 0..support.len() {
            if mask.count_ones() as usize > k {
                support[mask] = LogWeight::ZERO;
            }
        }
        let expect = naive_upward(&support).unwrap();
        let got = upward_transform_truncated(support, k).unwrap();
        for mask in 0..got.len() {
            prop_assert!(close(got[mask], expect[mask], 1e-9));
        }
    }
}

fn small_dataset_strategy() -> impl Strategy<Value = (Dataset, PriorSpec)> {
    (2usize..=4, 0usize..=10, prop::bool::ANY, prop::bool::ANY).prop_flat_map(
        |(n, m, flat, bdeu)| {
            let rows = prop::collection::vec(prop::collection::vec(0u32..2, n), m);
            rows.prop_map(move |rows| {
                let data = Dataset::new(
                    (0..n).map(|i| format!("x{i}")).collect(),
                    vec![2; n],
                    rows,
                )
                .unwrap();
                let rho = if flat {
                    RhoFamily::Flat
                } else {
                    RhoFamily::CardinalityUniform
                };
                let score = if bdeu {
                    ScoreFamily::Bdeu { ess: 1.0 }
                } else {
                    ScoreFamily::DirichletAllOnes
                };
                let spec = PriorSpec::new(n - 1, rho, score).unwrap();
                (data, spec)
            })
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn engine_matches_reference((data, spec) in small_dataset_strategy()) {
        let fast = edge_posteriors(&data, &spec).unwrap();
        let slow = brute_posteriors(&data, &spec).unwrap();
        prop_assert!((fast.log_marginal - slow.log_marginal).abs() <= 1e-9);
        for (a, b) in fast.posteriors.iter().zip(&slow.posteriors) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for u in 0..data.n() {
            for v in 0..data.n() {
                let p = fast.get(u, v);
                prop_assert!((0.0..=1.0).contains(&p));
                if u != v {
                    prop_assert!(fast.pair_score(u, v) <= 1.0 + 1e-12);
                }
            }
        }
    }
}

fn scored_instance_strategy() -> impl Strategy<Value = (GroundTruthNetwork, EdgePosteriors)> {
    (3usize..=7).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        let labels = prop::collection::vec(prop::bool::ANY, pairs);
        let scores = prop::collection::vec(0.0..1.0f64, pairs);
        (labels, scores).prop_map(move |(labels, scores)| {
            let mut parents = vec![NodeSet::EMPTY; n];
            let mut posteriors = vec![0.0; n * n];
            let mut idx = 0;
            for u in 0..n {
                for v in (u + 1)..n {
                    if labels[idx] {
                        parents[v] = parents[v].insert(u);
                    }
                    posteriors[u * n + v] = scores[idx] / 2.0;
                    posteriors[v * n + u] = scores[idx] / 2.0;
                    idx += 1;
                }
            }
            let truth = GroundTruthNetwork {
                n,
                k: n - 1,
                r: 2,
                seed: 0,
                order: (0..n).collect(),
                parents,
                cpts: vec![Vec::new(); n],
            };
            let post = EdgePosteriors {
                n,
                names: (0..n).map(|i| format!("x{i}")).collect(),
                k: n - 1,
                prior: "cardinality_uniform".into(),
                score: "dirichlet_all_ones".into(),
                log_marginal: 0.0,
                posteriors,
                elapsed_ms: 0.0,
                seed_info: None,
            };
            (truth, post)
        })
    })
}

proptest! {
    #[test]
    fn roc_is_monotone_and_complement_symmetric((truth, post) in scored_instance_strategy()) {
        let curve = roc_curve(&truth, &post).unwrap();
        prop_assert!((0.0..=1.0).contains(&curve.auc));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr);
            prop_assert!(w[1].tpr >= w[0].tpr);
        }
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));

        let mut flipped = post.clone();
        for p in &mut flipped.posteriors {
            *p = 0.5 - *p;
        }
        let rev = roc_curve(&truth, &flipped).unwrap();
        prop_assert!((curve.auc + rev.auc - 1.0).abs() <= 1e-12);
    }
}
