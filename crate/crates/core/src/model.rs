//! Data ingestion, Dirichlet-multinomial family scores, and structure priors.
//!
//! The family score of a node and a candidate parent set is the product of a
//! structure-prior factor and the parameter-integrated local likelihood of
//! the data column given the parent columns.

use crate::error::{Error, Result};
use crate::lattice::{binomial, enumerate_subsets, NodeSet};
use crate::mobius::LogWeight;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// Complete categorical records over `n` attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    names: Vec<String>,
    arities: Vec<u32>,
    /// Row-major m x n category indices.
    records: Vec<u32>,
    m: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, arities: Vec<u32>, rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one attribute".into()));
        }
        if arities.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} arities for {} attributes",
                arities.len(),
                n
            )));
        }
        if let Some(r) = arities.iter().find(|&&r| r == 0) {
            return Err(Error::InvalidArgument(format!("arity {r} must be at least 1")));
        }
        let m = rows.len();
        let mut records = Vec::with_capacity(m * n);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "record {t} has {} values, expected {n}",
                    row.len()
                )));
            }
            for (i, v) in row.iter().enumerate() {
                if *v >= arities[i] {
                    return Err(Error::InvalidArgument(format!(
                        "record {t}, attribute {i}: value {v} out of range for arity {}",
                        arities[i]
                    )));
                }
            }
            records.extend(row);
        }
        Ok(Dataset {
            names,
            arities,
            records,
            m,
        })
    }

    /// An empty dataset with `n` constant (arity-1) attributes. Useful for
    /// timing the lattice machinery without any data-dependent work.
    pub fn empty_shell(n: usize) -> Self {
        Dataset {
            names: (0..n).map(|i| format!("x{i}")).collect(),
            arities: vec![1; n],
            records: Vec::new(),
            m: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn arities(&self) -> &[u32] {
        &self.arities
    }

    /// Value of attribute `i` in record `t`.
    pub fn value(&self, t: usize, i: usize) -> u32 {
        self.records[t * self.n() + i]
    }

    /// The first `m` records, keeping names and arities.
    pub fn prefix(&self, m: usize) -> Dataset {
        assert!(m <= self.m);
        Dataset {
            names: self.names.clone(),
            arities: self.arities.clone(),
            records: self.records[..m * self.n()].to_vec(),
            m,
        }
    }

    /// Parse the dataset text format: a comma-separated header of attribute
    /// names, then one comma-separated row of nonnegative integers per
    /// record. Lines starting with `#` and blank lines are ignored. Arities
    /// are inferred as max observed value + 1 unless overridden.
    pub fn parse_csv(text: &str, source_name: &str, arities: Option<&[u32]>) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut names: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        let mut row_lines: Vec<usize> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            match &names {
                None => {
                    let header: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                    if header.iter().any(|h| h.is_empty()) {
                        return Err(parse_err(line_no, "empty attribute name in header".into()));
                    }
                    names = Some(header);
                }
                Some(header) => {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.len() != header.len() {
                        return Err(parse_err(
                            line_no,
                            format!("expected {} fields, found {}", header.len(), fields.len()),
                        ));
                    }
                    let mut row = Vec::with_capacity(fields.len());
                    for field in fields {
                        let field = field.trim();
                        let v: i64 = field.parse().map_err(|_| {
                            parse_err(line_no, format!("'{field}' is not an integer"))
                        })?;
                        if v < 0 {
                            return Err(parse_err(line_no, format!("negative value {v}")));
                        }
                        if v > u32::MAX as i64 {
                            return Err(parse_err(line_no, format!("value {v} too large")));
                        }
                        row.push(v as u32);
                    }
                    rows.push(row);
                    row_lines.push(line_no);
                }
            }
        }
        let names = names.ok_or_else(|| parse_err(0, "missing header line".into()))?;
        let n = names.len();
        let arities = match arities {
            Some(given) => {
                if given.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} arities given for {} attributes",
                        given.len(),
                        n
                    )));
                }
                given.to_vec()
            }
            None => {
                let mut inferred = vec![1u32; n];
                for row in &rows {
                    for (i, &v) in row.iter().enumerate() {
                        inferred[i] = inferred[i].max(v + 1);
                    }
                }
                inferred
            }
        };
        // Range-check against the (possibly overridden) arities with the
        // offending line number.
        for (row, &line_no) in rows.iter().zip(&row_lines) {
            for (i, &v) in row.iter().enumerate() {
                if v >= arities[i] {
                    return Err(parse_err(
                        line_no,
                        format!("value {v} out of range for attribute {i} with arity {}", arities[i]),
                    ));
                }
            }
        }
        Dataset::new(names, arities, rows)
    }

    pub fn load(path: impl AsRef<Path>, arities: Option<&[u32]>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string(), arities)
    }

    /// Serialize back to the text format, optionally with leading `#` comment
    /// lines (pass the comment text without the `#`).
    pub fn to_csv_string(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str(&self.names.join(","));
        out.push('\n');
        for t in 0..self.m {
            let row: Vec<String> = (0..self.n()).map(|i| self.value(t, i).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string(comments)).map_err(|e| Error::io(path, e))
    }
}

/// Structure-prior family for the parent-set factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoFamily {
    /// Weight 1 / C(n-1, |G|) for |G| <= k: uniform over cardinalities, then
    /// uniform over sets of that cardinality.
    CardinalityUniform,
    /// Weight 1 for every |G| <= k.
    Flat,
}

/// Prior factor on candidate predecessor sets (only the uniform family is
/// supported; any constant is absorbed into the normalization).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QFamily {
    Uniform,
}

/// Parameter prior for the local Dirichlet-multinomial likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFamily {
    /// Dirichlet(1, .., 1) per parent configuration.
    DirichletAllOnes,
    /// Equivalent-sample-size prior: each cell gets ess / (q * r).
    Bdeu { ess: f64 },
}

/// Maximum indegree plus all prior choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub k: usize,
    pub rho_family: RhoFamily,
    pub q_family: QFamily,
    pub score_family: ScoreFamily,
    /// Log-domain constants added to every rho / q value. The posterior is
    /// invariant to them; they exist to exercise that invariance.
    #[serde(default)]
    pub rho_log_shift: f64,
    #[serde(default)]
    pub q_log_shift: f64,
}

impl PriorSpec {
    pub fn new(k: usize, rho_family: RhoFamily, score_family: ScoreFamily) -> Result<Self> {
        if let ScoreFamily::Bdeu { ess } = score_family {
            if !(ess > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "bdeu equivalent sample size must be positive, got {ess}"
                )));
            }
        }
        Ok(PriorSpec {
            k,
            rho_family,
            q_family: QFamily::Uniform,
            score_family,
            rho_log_shift: 0.0,
            q_log_shift: 0.0,
        })
    }

    /// Defaults: cardinality-uniform structure prior, all-ones score.
    pub fn default_with_k(k: usize) -> Self {
        PriorSpec::new(k, RhoFamily::CardinalityUniform, ScoreFamily::DirichletAllOnes).unwrap()
    }

    pub fn describe_prior(&self) -> String {
        match self.rho_family {
            RhoFamily::CardinalityUniform => "cardinality_uniform".into(),
            RhoFamily::Flat => "flat".into(),
        }
    }

    pub fn describe_score(&self) -> String {
        match self.score_family {
            ScoreFamily::DirichletAllOnes => "dirichlet_all_ones".into(),
            ScoreFamily::Bdeu { ess } => format!("bdeu(ess={ess})"),
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "k={} rho={} score={}",
            self.k,
            self.describe_prior(),
            self.describe_score()
        )
    }
}

/// Parent-set prior factor for node `i` with parents `g` among `n` nodes.
/// Zero above the indegree bound. Values are unnormalized by design.
pub fn rho(spec: &PriorSpec, n: usize, i: usize, g: NodeSet) -> LogWeight {
    debug_assert!(!g.contains(i));
    if g.len() > spec.k {
        return LogWeight::ZERO;
    }
    let base = match spec.rho_family {
        RhoFamily::Flat => 0.0,
        RhoFamily::CardinalityUniform => {
            let choices = binomial((n - 1) as u32, g.len() as u32).expect("n <= 64") as f64;
            -choices.ln()
        }
    };
    LogWeight::from_ln(base + spec.rho_log_shift)
}

/// Predecessor-set prior factor; the uniform family is constant.
pub fn q_weight(spec: &PriorSpec, _u: NodeSet) -> LogWeight {
    match spec.q_family {
        QFamily::Uniform => LogWeight::from_ln(spec.q_log_shift),
    }
}

/// Cap on the flat contingency array (cells = parent configurations * arity).
pub const CONTINGENCY_CELL_CAP: usize = 1 << 26;

/// Parameter-integrated likelihood of column `node` given the parent columns
/// `parents`: the product over parent configurations j of
/// `Gamma(a_j)/Gamma(a_j + m_j) * prod_c Gamma(a_jc + m_jc)/Gamma(a_jc)`,
/// with all cells `a_jc = 1` for the all-ones family and `ess / (q r)` for
/// bdeu. Gamma ratios are evaluated as exact rising-factorial log sums.
pub fn local_marginal_likelihood(
    data: &Dataset,
    node: usize,
    parents: NodeSet,
    score: &ScoreFamily,
) -> Result<LogWeight> {
    debug_assert!(!parents.contains(node));
    let r = data.arities()[node] as usize;

    // Mixed-radix layout over the parent columns, ascending index order.
    let parent_idx: Vec<usize> = parents.iter().collect();
    let mut q: u128 = 1;
    let mut strides = Vec::with_capacity(parent_idx.len());
    for &u in &parent_idx {
        strides.push(q);
        q = q
            .checked_mul(data.arities()[u] as u128)
            .ok_or(Error::Overflow("parent configuration count"))?;
    }
    let cells = q
        .checked_mul(r as u128)
        .ok_or(Error::Overflow("contingency table size"))?;
    if cells > CONTINGENCY_CELL_CAP as u128 {
        return Err(Error::ContingencyTooLarge {
            node,
            cells,
            cap: CONTINGENCY_CELL_CAP,
        });
    }
    if data.m() == 0 {
        return Ok(LogWeight::ONE);
    }
    let q = q as usize;

    let mut counts = vec![0u32; q * r];
    for t in 0..data.m() {
        let mut cfg = 0usize;
        for (&u, &stride) in parent_idx.iter().zip(&strides) {
            cfg += data.value(t, u) as usize * stride as usize;
        }
        counts[cfg * r + data.value(t, node) as usize] += 1;
    }

    let (cell_prior, row_prior) = match score {
        ScoreFamily::DirichletAllOnes => (1.0, r as f64),
        ScoreFamily::Bdeu { ess } => (ess / (q as f64 * r as f64), ess / q as f64),
    };

    // log Gamma(a + m) - log Gamma(a) = sum_{t=0..m-1} log(a + t).
    let log_rising = |a: f64, m: u32| -> f64 {
        let mut acc = 0.0;
        for t in 0..m {
            acc += (a + t as f64).ln();
        }
        acc
    };

    let mut ll = 0.0;
    for j in 0..q {
        let row = &counts[j * r..(j + 1) * r];
        let m_j: u32 = row.iter().sum();
        if m_j == 0 {
            continue;
        }
        ll -= log_rising(row_prior, m_j);
        for &m_jc in row {
            if m_jc > 0 {
                ll += log_rising(cell_prior, m_jc);
            }
        }
    }
    Ok(LogWeight::from_ln(ll))
}

/// The score of every admissible parent set of one node, in the canonical
/// (cardinality, mask) enumeration order.
#[derive(Debug, Clone)]
pub struct FamilyScoreTable {
    node: usize,
    entries: Vec<(NodeSet, LogWeight)>,
}

impl FamilyScoreTable {
    /// Scores `rho(g) * p(x_node | x_g)` for every `g` excluding `node` with
    /// `|g| <= k`.
    pub fn compute(data: &Dataset, spec: &PriorSpec, node: usize) -> Result<Self> {
        let n = data.n();
        let ground = NodeSet::full(n).remove(node);
        let max_size = spec.k.min(n - 1);
        let mut entries = Vec::new();
        for g in enumerate_subsets(ground, max_size) {
            let score =
                rho(spec, n, node, g) * local_marginal_likelihood(data, node, g, &spec.score_family)?;
            entries.push((g, score));
        }
        Ok(FamilyScoreTable { node, entries })
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn entries(&self) -> &[(NodeSet, LogWeight)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, g: NodeSet) -> Option<LogWeight> {
        let key = (g.len(), g.mask());
        self.entries
            .binary_search_by_key(&key, |(s, _)| (s.len(), s.mask()))
            .ok()
            .map(|idx| self.entries[idx].1)
    }
}

/// Family score tables for all nodes.
pub fn compute_family_scores(data: &Dataset, spec: &PriorSpec) -> Result<Vec<FamilyScoreTable>> {
    (0..data.n())
        .map(|i| FamilyScoreTable::compute(data, spec, i))
        .collect()
}
