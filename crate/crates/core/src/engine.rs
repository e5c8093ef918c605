//! The exact all-edges engine: family scores, candidate-predecessor scores
//! via the truncated subset-sum transform, forward and backward order-sum
//! tables, per-node completion weights via the truncated superset-sum
//! transform, and the final posterior matrix.

use crate::error::{Error, Result};
use crate::lattice::{enumerate_subsets, NodeSet, ProblemDims};
use crate::mobius::{downward_in_place, upward_transform_truncated, LatticeTable, LogWeight};
use crate::model::{q_weight, Dataset, FamilyScoreTable, PriorSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

/// Knobs that do not change results: the memory-cap override and the worker
/// count. Any thread count reproduces the single-threaded output bit for bit
/// because work is only split at whole-node boundaries.
#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub allow_large: bool,
    pub threads: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            allow_large: false,
            threads: 1,
        }
    }
}

/// Per-node scores of candidate predecessor sets: entry `U` of table `i` is
/// the prior-weighted sum of family scores over all parent sets inside `U`.
///
/// Table `i` is indexed over subsets of the other `n-1` nodes in compressed
/// form (bit `i` deleted, higher bits shifted down), so the whole structure
/// is exactly `n * 2^(n-1)` entries.
#[derive(Debug, Clone)]
pub struct CandidateScores {
    n: usize,
    tables: Vec<LatticeTable>,
}

impl CandidateScores {
    /// All tables constant; handy for closed-form cross-checks.
    pub fn constant(n: usize, w: LogWeight) -> Self {
        CandidateScores {
            n,
            tables: (0..n).map(|_| LatticeTable::filled(n - 1, w)).collect(),
        }
    }

    pub fn from_tables(tables: Vec<LatticeTable>) -> Self {
        let n = tables.len();
        assert!(tables.iter().all(|t| t.n() == n - 1));
        CandidateScores { n, tables }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self, i: usize) -> &LatticeTable {
        &self.tables[i]
    }

    /// Score of node `i` with candidate set `u` given in the full index
    /// space (`u` must not contain `i`).
    pub fn get(&self, i: usize, u: NodeSet) -> LogWeight {
        self.tables[i][u.compress(i)]
    }
}

fn candidate_table(family: &FamilyScoreTable, n: usize, spec: &PriorSpec) -> Result<LatticeTable> {
    let i = family.node();
    let mut table = LatticeTable::filled(n - 1, LogWeight::ZERO);
    for (g, w) in family.entries() {
        table[g.compress(i)] = *w;
    }
    // Family scores vanish above cardinality k, which is exactly the support
    // promise the truncated subset-sum transform needs.
    let mut table = upward_transform_truncated(table, spec.k.min(n - 1))?;
    let qw = q_weight(spec, NodeSet::EMPTY); // constant across U for the uniform family
    if qw != LogWeight::ONE {
        for e in table.as_mut_slice() {
            *e = *e * qw;
        }
    }
    Ok(table)
}

/// Candidate-predecessor scores for all nodes.
pub fn candidate_scores(families: &[FamilyScoreTable], spec: &PriorSpec) -> Result<CandidateScores> {
    let n = families.len();
    let tables = families
        .iter()
        .map(|f| candidate_table(f, n, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateScores { n, tables })
}

/// Forward order sums: `L(S)` is the total weight of all orderings of `S` as
/// the first `|S|` elements, accumulated over subsets in ascending
/// cardinality. `L(∅) = 1`; `L(V)` is the joint weight of the data.
pub fn forward_table(cand: &CandidateScores) -> LatticeTable {
    let n = cand.n;
    let mut fwd = LatticeTable::filled(n, LogWeight::ZERO);
    fwd[0usize] = LogWeight::ONE;
    for s in enumerate_subsets(NodeSet::full(n), n) {
        if s.is_empty() {
            continue;
        }
        let mut acc = LogWeight::ZERO;
        for i in s.iter() {
            let prev = s.remove(i);
            acc += cand.get(i, prev) * fwd[prev];
        }
        fwd[s] = acc;
    }
    fwd
}

/// Backward order sums, the mirror of [`forward_table`]: `R(T)` is the total
/// weight of the nodes in `T` as the last `|T|` elements of the order, with
/// everything outside `T` as shared candidate predecessors. `R(V) = L(V)`.
pub fn backward_table(cand: &CandidateScores) -> LatticeTable {
    let n = cand.n;
    let full = NodeSet::full(n);
    let mut bwd = LatticeTable::filled(n, LogWeight::ZERO);
    bwd[0usize] = LogWeight::ONE;
    for t in enumerate_subsets(full, n) {
        if t.is_empty() {
            continue;
        }
        let outside = full.difference(t);
        let mut acc = LogWeight::ZERO;
        for i in t.iter() {
            acc += cand.get(i, outside) * bwd[t.remove(i)];
        }
        bwd[t] = acc;
    }
    bwd
}

fn fill_completion_weights(
    v: usize,
    spec: &PriorSpec,
    fwd: &LatticeTable,
    bwd: &LatticeTable,
    buf: &mut [LogWeight],
) {
    let n = fwd.n();
    let rest = NodeSet::full(n).remove(v);
    let qw = q_weight(spec, rest);
    for (c, slot) in buf.iter_mut().enumerate() {
        let s = NodeSet::from_mask(c as u32).expand(v);
        *slot = qw * fwd[s] * bwd[rest.difference(s)];
    }
}

/// Completion weights of node `v`: entry `G` (compressed indexing, valid for
/// `|G| <= k`) is the total weight of all orders and predecessor choices
/// that admit `G` as the parents of `v` - the sum of `q(S) L(S) R(V-{v}-S)`
/// over supersets `S` of `G` inside `V-{v}`, via the truncated superset-sum
/// transform.
pub fn completion_weights(
    v: usize,
    spec: &PriorSpec,
    fwd: &LatticeTable,
    bwd: &LatticeTable,
) -> LatticeTable {
    let n = fwd.n();
    let mut table = LatticeTable::filled(n - 1, LogWeight::ZERO);
    fill_completion_weights(v, spec, fwd, bwd, table.as_mut_slice());
    downward_in_place(n - 1, spec.k, table.as_mut_slice());
    table
}

fn posterior_column(
    v: usize,
    spec: &PriorSpec,
    family: &FamilyScoreTable,
    fwd: &LatticeTable,
    bwd: &LatticeTable,
    log_z: f64,
    buf: &mut [LogWeight],
) -> Vec<f64> {
    let n = fwd.n();
    fill_completion_weights(v, spec, fwd, bwd, buf);
    downward_in_place(n - 1, spec.k, buf);
    let mut edge_weight = vec![LogWeight::ZERO; n];
    for (g, w) in family.entries() {
        let contrib = *w * buf[g.compress(v).index()];
        for u in g.iter() {
            edge_weight[u] += contrib;
        }
    }
    (0..n)
        .map(|u| {
            if u == v {
                0.0
            } else {
                (edge_weight[u].ln() - log_z).exp().min(1.0)
            }
        })
        .collect()
}

/// Marginal posterior probability of every directed edge, plus the log
/// marginal weight of the data, with default configuration.
pub fn edge_posteriors(data: &Dataset, spec: &PriorSpec) -> Result<EdgePosteriors> {
    edge_posteriors_with(data, spec, &EngineConfig::default())
}

pub fn edge_posteriors_with(
    data: &Dataset,
    spec: &PriorSpec,
    config: &EngineConfig,
) -> Result<EdgePosteriors> {
    let start = Instant::now();
    let n = data.n();
    ProblemDims::with_cap(n, spec.k, config.allow_large)?;

    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let families: Vec<FamilyScoreTable> = match &pool {
        Some(pool) => pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| FamilyScoreTable::compute(data, spec, i))
                .collect::<Result<Vec<_>>>()
        })?,
        None => (0..n)
            .map(|i| FamilyScoreTable::compute(data, spec, i))
            .collect::<Result<Vec<_>>>()?,
    };

    let tables: Vec<LatticeTable> = match &pool {
        Some(pool) => pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| candidate_table(&families[i], n, spec))
                .collect::<Result<Vec<_>>>()
        })?,
        None => (0..n)
            .map(|i| candidate_table(&families[i], n, spec))
            .collect::<Result<Vec<_>>>()?,
    };
    let cand = CandidateScores { n, tables };
    let fwd = forward_table(&cand);
    let bwd = backward_table(&cand);
    let log_z = fwd[NodeSet::full(n)].ln();
    debug_assert!(log_z.is_finite(), "marginal weight must be positive");

    let columns: Vec<Vec<f64>> = match &pool {
        Some(pool) => pool.install(|| {
            (0..n)
                .into_par_iter()
                .map_init(
                    || vec![LogWeight::ZERO; 1usize << (n - 1)],
                    |buf, v| posterior_column(v, spec, &families[v], &fwd, &bwd, log_z, buf),
                )
                .collect()
        }),
        None => {
            let mut buf = vec![LogWeight::ZERO; 1usize << (n - 1)];
            (0..n)
                .map(|v| posterior_column(v, spec, &families[v], &fwd, &bwd, log_z, &mut buf))
                .collect()
        }
    };

    let mut posteriors = vec![0.0; n * n];
    for (v, column) in columns.iter().enumerate() {
        for u in 0..n {
            posteriors[u * n + v] = column[u];
        }
    }

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

/// The n x n posterior matrix with its provenance metadata. Entry `(u, v)`
/// (row-major) is the posterior probability of the directed edge from `u`
/// to `v`; the diagonal is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePosteriors {
    pub n: usize,
    pub names: Vec<String>,
    pub k: usize,
    pub prior: String,
    pub score: String,
    pub log_marginal: f64,
    pub posteriors: Vec<f64>,
    pub elapsed_ms: f64,
    pub seed_info: Option<String>,
}

impl EdgePosteriors {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.posteriors[u * self.n + v]
    }

    /// Undirected support for the pair {u, v}.
    pub fn pair_score(&self, u: usize, v: usize) -> f64 {
        self.get(u, v) + self.get(v, u)
    }

    pub fn clear_timing(&mut self) {
        self.elapsed_ms = 0.0;
    }

    /// n rows of n comma-separated probabilities, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for u in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|v| format!("{:.16e}", self.get(u, v)))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: EdgePosteriors = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            message: e.to_string(),
        })?;
        if parsed.posteriors.len() != parsed.n * parsed.n {
            return Err(Error::DimensionMismatch(format!(
                "{} posterior entries for n={}",
                parsed.posteriors.len(),
                parsed.n
            )));
        }
        Ok(parsed)
    }
}
