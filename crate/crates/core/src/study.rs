//! Synthetic-network study harness: random ground-truth networks, forward
//! sampling, ROC summaries of edge recovery, and the replicated grid runner.

use crate::engine::{edge_posteriors_with, EdgePosteriors, EngineConfig};
use crate::error::{Error, Result};
use crate::lattice::NodeSet;
use crate::model::Dataset;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-task seed from a master seed and two salt coordinates
/// (for example grid index and replicate index).
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut s = master
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(&mut s);
    splitmix64(&mut s)
}

/// A sampled ground-truth network: a uniform random order, per-node parent
/// sets drawn inside the predecessors, and conditional probability tables
/// with one row per parent configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthNetwork {
    pub n: usize,
    pub k: usize,
    pub r: u32,
    pub seed: u64,
    pub order: Vec<usize>,
    pub parents: Vec<NodeSet>,
    /// cpts[i][config] is the length-r distribution of node i's states.
    pub cpts: Vec<Vec<Vec<f64>>>,
}

impl GroundTruthNetwork {
    pub fn has_undirected_edge(&self, u: usize, v: usize) -> bool {
        self.parents[v].contains(u) || self.parents[u].contains(v)
    }

    /// Number of edges; directed and undirected counts coincide because the
    /// construction is acyclic.
    pub fn n_true_edges(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    /// Check the structural invariants the generator promises.
    pub fn validate(&self) -> Result<()> {
        if self.order.len() != self.n || self.parents.len() != self.n || self.cpts.len() != self.n {
            return Err(Error::DimensionMismatch("network field lengths".into()));
        }
        let mut seen = NodeSet::EMPTY;
        for &i in &self.order {
            if i >= self.n || seen.contains(i) {
                return Err(Error::InvalidArgument(format!("order is not a permutation: {i}")));
            }
            if !self.parents[i].is_subset_of(seen) {
                return Err(Error::InvalidArgument(format!(
                    "parents of {i} are not all predecessors"
                )));
            }
            seen = seen.insert(i);
        }
        for i in 0..self.n {
            if self.parents[i].len() > self.k {
                return Err(Error::InvalidArgument(format!("node {i} exceeds indegree {}", self.k)));
            }
            let configs = (self.r as usize).pow(self.parents[i].len() as u32);
            if self.cpts[i].len() != configs {
                return Err(Error::DimensionMismatch(format!("cpt rows of node {i}")));
            }
            for row in &self.cpts[i] {
                if row.len() != self.r as usize {
                    return Err(Error::DimensionMismatch(format!("cpt row width of node {i}")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "cpt row of node {i} sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: GroundTruthNetwork = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            message: e.to_string(),
        })?;
        net.validate()?;
        Ok(net)
    }
}

/// Draw a random network: uniform order, parent count uniform on the
/// feasible range {0..min(k, #predecessors)}, parent set uniform among the
/// predecessors, and each CPT row from the flat Dirichlet via normalized
/// unit-rate exponentials.
pub fn generate_network(n: usize, k: usize, r: u32, seed: u64) -> Result<GroundTruthNetwork> {
    if n == 0 || n > 32 {
        return Err(Error::InvalidArgument(format!("n={n} must be in 1..=32")));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!("k={k} must be at most n-1")));
    }
    if r < 2 {
        return Err(Error::InvalidArgument(format!("r={r} must be at least 2")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let mut parents = vec![NodeSet::EMPTY; n];
    let mut cpts = vec![Vec::new(); n];
    for (pos, &i) in order.iter().enumerate() {
        let count = rng.gen_range(0..=k.min(pos));
        let mut pool = order[..pos].to_vec();
        for t in 0..count {
            let j = rng.gen_range(t..pool.len());
            pool.swap(t, j);
        }
        let mut pset = NodeSet::EMPTY;
        for &p in &pool[..count] {
            pset = pset.insert(p);
        }
        parents[i] = pset;

        let configs = (r as usize).pow(count as u32);
        let mut node_cpt = Vec::with_capacity(configs);
        for _ in 0..configs {
            let mut row: Vec<f64> = (0..r)
                .map(|_| {
                    let u: f64 = rng.gen();
                    -(1.0 - u).ln()
                })
                .collect();
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                for x in &mut row {
                    *x /= sum;
                }
            } else {
                row = vec![1.0 / r as f64; r as usize];
            }
            node_cpt.push(row);
        }
        cpts[i] = node_cpt;
    }

    Ok(GroundTruthNetwork {
        n,
        k,
        r,
        seed,
        order,
        parents,
        cpts,
    })
}

/// Draw `m` independent records by visiting nodes in the network order and
/// sampling each from the CPT row selected by its parents' values.
pub fn sample_dataset(net: &GroundTruthNetwork, m: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = net.n;
    let r = net.r as usize;
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut record = vec![0u32; n];
        for &i in &net.order {
            // Mixed radix over the parents in ascending index order, first
            // parent least significant.
            let mut cfg = 0usize;
            let mut stride = 1usize;
            for p in net.parents[i].iter() {
                cfg += record[p] as usize * stride;
                stride *= r;
            }
            let row = &net.cpts[i][cfg];
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            let mut value = (r - 1) as u32;
            for (c, &p) in row.iter().enumerate() {
                cum += p;
                if u < cum {
                    value = c as u32;
                    break;
                }
            }
            record[i] = value;
        }
        rows.push(record);
    }
    Dataset::new(
        (0..n).map(|i| format!("x{i}")).collect(),
        vec![net.r; n],
        rows,
    )
    .expect("sampled records are in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Receiver operating characteristic of undirected edge recovery, swept over
/// every distinct pair score with sentinels above and below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.points {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.fpr, p.tpr, p.threshold));
        }
        out
    }
}

/// Score every unordered pair {u, v} by the sum of both directed posteriors
/// and sweep a presence threshold over the scores. A pair is a true positive
/// at threshold t when its score exceeds t and either orientation is in the
/// ground truth.
pub fn roc_curve(truth: &GroundTruthNetwork, post: &EdgePosteriors) -> Result<RocCurve> {
    if truth.n != post.n {
        return Err(Error::DimensionMismatch(format!(
            "network has n={} but posteriors have n={}",
            truth.n, post.n
        )));
    }
    let n = truth.n;
    let mut pairs: Vec<(f64, bool)> = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            pairs.push((post.pair_score(u, v), truth.has_undirected_edge(u, v)));
        }
    }
    let positives = pairs.iter().filter(|(_, label)| *label).count();
    let negatives = pairs.len() - positives;
    if positives == 0 || negatives == 0 {
        // Rates are undefined on one axis; report the chance diagonal.
        return Ok(RocCurve {
            points: vec![
                RocPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    threshold: f64::INFINITY,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    threshold: f64::NEG_INFINITY,
                },
            ],
            auc: 0.5,
        });
    }

    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut idx = 0;
    while idx < pairs.len() {
        let score = pairs[idx].0;
        // Counts so far are the pairs with score strictly above this
        // threshold.
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: score,
        });
        while idx < pairs.len() && pairs[idx].0 == score {
            if pairs[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        threshold: f64::NEG_INFINITY,
    });

    let mut auc = 0.0;
    for w in points.windows(2) {
        auc += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

/// Grid configuration for [`run_study`]: the cartesian product of the listed
/// dimensions, with `replicates` independent networks per grid point and one
/// nested dataset per network.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub rs: Vec<u32>,
    pub ms: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// When false, elapsed_ms fields are written as zero so that output
    /// files are byte-identical across reruns.
    pub record_timings: bool,
    pub engine: EngineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub k: usize,
    pub r: u32,
    pub replicate: usize,
    pub seed: u64,
    pub m: usize,
    pub auc: f64,
    pub n_true_edges: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub rows: Vec<StudyRow>,
    /// File stem -> curve, in emission order.
    pub curves: Vec<(String, RocCurve)>,
    pub networks: Vec<(String, GroundTruthNetwork)>,
}

impl StudyOutput {
    pub fn report_csv(&self) -> String {
        let mut out = String::from("n,k,r,replicate,seed,m,auc,n_true_edges,elapsed_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.16e},{},{:.3}\n",
                row.n,
                row.k,
                row.r,
                row.replicate,
                row.seed,
                row.m,
                row.auc,
                row.n_true_edges,
                row.elapsed_ms
            ));
        }
        out
    }

    /// Write the report, one curve file per row, and one network file per
    /// replicate into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, report_name: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let report = dir.join(report_name);
        std::fs::write(&report, self.report_csv()).map_err(|e| Error::io(&report, e))?;
        for (stem, curve) in &self.curves {
            let path = dir.join(format!("{stem}.csv"));
            std::fs::write(&path, curve.to_csv_string()).map_err(|e| Error::io(&path, e))?;
        }
        for (stem, net) in &self.networks {
            net.save_json(dir.join(format!("{stem}.json")))?;
        }
        Ok(())
    }
}

/// Run the full grid: per replicate one network and one maximal dataset,
/// analyzed at every nested prefix length in `ms` with the default analysis
/// prior at the grid's (k) bound. Fully deterministic given the seed.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutput> {
    use crate::model::PriorSpec;
    let m_max = cfg.ms.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut networks = Vec::new();
    let mut grid_index = 0u64;
    for &n in &cfg.ns {
        for &k in &cfg.ks {
            for &r in &cfg.rs {
                for rep in 0..cfg.replicates {
                    let rep_seed = derive_seed(cfg.seed, grid_index, rep as u64);
                    let net_seed = derive_seed(rep_seed, 0, 0);
                    let data_seed = derive_seed(rep_seed, 1, 0);
                    let net = generate_network(n, k, r, net_seed)?;
                    let full_data = sample_dataset(&net, m_max, data_seed);
                    let stem = format!("net_n{n}_k{k}_r{r}_rep{rep}");
                    networks.push((stem, net.clone()));
                    for &m in &cfg.ms {
                        let data = full_data.prefix(m);
                        let spec = PriorSpec::default_with_k(k);
                        let mut post = edge_posteriors_with(&data, &spec, &cfg.engine)?;
                        post.seed_info = Some(format!(
                            "master={};grid={};replicate={};net_seed={};data_seed={}",
                            cfg.seed, grid_index, rep, net_seed, data_seed
                        ));
                        if !cfg.record_timings {
                            post.clear_timing();
                        }
                        let curve = roc_curve(&net, &post)?;
                        rows.push(StudyRow {
                            n,
                            k,
                            r,
                            replicate: rep,
                            seed: rep_seed,
                            m,
                            auc: curve.auc,
                            n_true_edges: net.n_true_edges(),
                            elapsed_ms: post.elapsed_ms,
                        });
                        curves.push((format!("roc_n{n}_k{k}_r{r}_rep{rep}_m{m}"), curve));
                    }
                }
                grid_index += 1;
            }
        }
    }
    Ok(StudyOutput {
        rows,
        curves,
        networks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_networks_satisfy_invariants() {
        for seed in 0..10 {
            let net = generate_network(25, 5, 4, seed).unwrap();
            net.validate().unwrap();
        }
        // Parent counts empirically cover the whole feasible range.
        let mut seen = [false; 6];
        for seed in 0..10 {
            let net = generate_network(25, 5, 4, seed).unwrap();
            for p in &net.parents {
                seen[p.len()] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "parent counts seen: {seen:?}");
    }

    #[test]
    fn k0_network_is_edgeless() {
        let net = generate_network(6, 0, 3, 9).unwrap();
        assert_eq!(net.n_true_edges(), 0);
        assert!(net.cpts.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_network(8, 3, 2, 42).unwrap();
        let b = generate_network(8, 3, 2, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_network(8, 3, 2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_bad_dims() {
        assert!(generate_network(0, 0, 2, 1).is_err());
        assert!(generate_network(4, 4, 2, 1).is_err());
        assert!(generate_network(4, 1, 1, 1).is_err());
    }

    #[test]
    fn sampling_empty_and_deterministic() {
        let net = generate_network(5, 2, 3, 7).unwrap();
        let empty = sample_dataset(&net, 0, 1);
        assert_eq!((empty.n(), empty.m()), (5, 0));
        assert_eq!(empty.arities(), &[3, 3, 3, 3, 3]);

        let a = sample_dataset(&net, 50, 11).to_csv_string(&[]);
        let b = sample_dataset(&net, 50, 11).to_csv_string(&[]);
        assert_eq!(a, b);
    }

    #[test]
    fn root_marginal_converges_to_cpt_row() {
        let mut net = generate_network(1, 0, 2, 3).unwrap();
        net.cpts[0] = vec![vec![0.25, 0.75]];
        let data = sample_dataset(&net, 100_000, 17);
        let ones = (0..data.m()).filter(|&t| data.value(t, 0) == 1).count();
        let freq = ones as f64 / data.m() as f64;
        assert!((freq - 0.75).abs() <= 0.01, "freq={freq}");
    }

    fn posteriors_from_scores(n: usize, scores: &[((usize, usize), f64)]) -> EdgePosteriors {
        let mut posteriors = vec![0.0; n * n];
        for &((u, v), s) in scores {
            posteriors[u * n + v] = s / 2.0;
            posteriors[v * n + u] = s / 2.0;
        }
        EdgePosteriors {
            n,
            names: (0..n).map(|i| format!("x{i}")).collect(),
            k: 1,
            prior: "cardinality_uniform".into(),
            score: "dirichlet_all_ones".into(),
            log_marginal: 0.0,
            posteriors,
            elapsed_ms: 0.0,
            seed_info: None,
        }
    }

    fn truth_with_edges(n: usize, edges: &[(usize, usize)]) -> GroundTruthNetwork {
        let mut parents = vec![NodeSet::EMPTY; n];
        for &(u, v) in edges {
            parents[v] = parents[v].insert(u);
        }
        GroundTruthNetwork {
            n,
            k: n - 1,
            r: 2,
            seed: 0,
            order: (0..n).collect(),
            parents,
            cpts: vec![Vec::new(); n],
        }
    }

    #[test]
    fn roc_hand_cases() {
        let truth = truth_with_edges(3, &[(0, 1)]);
        let perfect = posteriors_from_scores(
            3,
            &[((0, 1), 0.9), ((0, 2), 0.2), ((1, 2), 0.4)],
        );
        let curve = roc_curve(&truth, &perfect).unwrap();
        assert!((curve.auc - 1.0).abs() < 1e-12);

        let flipped = posteriors_from_scores(
            3,
            &[((0, 1), 0.3), ((0, 2), 0.2), ((1, 2), 0.4)],
        );
        let curve = roc_curve(&truth, &flipped).unwrap();
        assert!((curve.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_all_tied_scores_is_diagonal() {
        let truth = truth_with_edges(4, &[(0, 1), (2, 3)]);
        let tied = posteriors_from_scores(
            4,
            &[
                ((0, 1), 0.5),
                ((0, 2), 0.5),
                ((0, 3), 0.5),
                ((1, 2), 0.5),
                ((1, 3), 0.5),
                ((2, 3), 0.5),
            ],
        );
        let curve = roc_curve(&truth, &tied).unwrap();
        assert!((curve.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_curve_is_monotone_with_endpoints() {
        let truth = truth_with_edges(5, &[(0, 1), (1, 2), (0, 4)]);
        let scores: Vec<((usize, usize), f64)> = (0..5)
            .flat_map(|u| ((u + 1)..5).map(move |v| ((u, v), ((u * 7 + v * 3) % 10) as f64 / 10.0)))
            .collect();
        let post = posteriors_from_scores(5, &scores);
        let curve = roc_curve(&truth, &post).unwrap();
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in curve.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
        assert!((0.0..=1.0).contains(&curve.auc));
    }

    #[test]
    fn roc_complement_symmetry() {
        let truth = truth_with_edges(5, &[(0, 2), (3, 4), (1, 2)]);
        let scores: Vec<((usize, usize), f64)> = (0..5)
            .flat_map(|u| {
                ((u + 1)..5).map(move |v| ((u, v), ((u * 13 + v * 5) % 11) as f64 / 11.0))
            })
            .collect();
        let post = posteriors_from_scores(5, &scores);
        let auc = roc_curve(&truth, &post).unwrap().auc;
        let reversed: Vec<((usize, usize), f64)> =
            scores.iter().map(|&(p, s)| (p, 1.0 - s)).collect();
        let rev_auc = roc_curve(&truth, &posteriors_from_scores(5, &reversed)).unwrap().auc;
        assert!((auc + rev_auc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roc_degenerate_truth_falls_back_to_diagonal() {
        let truth = truth_with_edges(3, &[]);
        let post = posteriors_from_scores(3, &[((0, 1), 0.9)]);
        let curve = roc_curve(&truth, &post).unwrap();
        assert_eq!(curve.auc, 0.5);
    }

    #[test]
    fn roc_dimension_mismatch() {
        let truth = truth_with_edges(3, &[(0, 1)]);
        let post = posteriors_from_scores(4, &[((0, 1), 0.9)]);
        assert!(matches!(
            roc_curve(&truth, &post),
            Err(Error::DimensionMismatch(_))
        ));
    }

    fn tiny_config() -> StudyConfig {
        StudyConfig {
            ns: vec![5],
            ks: vec![2],
            rs: vec![2],
            ms: vec![20, 100],
            replicates: 2,
            seed: 99,
            record_timings: false,
            engine: EngineConfig::default(),
        }
    }

    #[test]
    fn study_shapes_and_nesting() {
        let out = run_study(&tiny_config()).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert_eq!(out.curves.len(), 4);
        assert_eq!(out.networks.len(), 2);
        assert!(out.rows.iter().all(|r| (0.0..=1.0).contains(&r.auc)));

        // The m=20 analysis sees the literal prefix of the m=100 records.
        let net = &out.networks[0].1;
        let data_seed = derive_seed(derive_seed(99, 0, 0), 1, 0);
        let full = sample_dataset(net, 100, data_seed);
        let short = sample_dataset(net, 100, data_seed).prefix(20);
        for t in 0..20 {
            for i in 0..5 {
                assert_eq!(short.value(t, i), full.value(t, i));
            }
        }
    }

    #[test]
    fn study_reruns_are_byte_identical() {
        let a = run_study(&tiny_config()).unwrap();
        let b = run_study(&tiny_config()).unwrap();
        assert_eq!(a.report_csv(), b.report_csv());
        for ((sa, ca), (sb, cb)) in a.curves.iter().zip(&b.curves) {
            assert_eq!(sa, sb);
            assert_eq!(ca.to_csv_string(), cb.to_csv_string());
        }
    }

    #[test]
    fn network_json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        let net = generate_network(6, 2, 3, 5).unwrap();
        net.save_json(&path).unwrap();
        let back = GroundTruthNetwork::load_json(&path).unwrap();
        assert_eq!(back, net);
    }
}
