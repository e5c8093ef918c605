//! Randomized agreement checks between the fast engine and the brute-force
//! reference, with replayable records for any failing instance.

use crate::engine::edge_posteriors;
use crate::error::{Error, Result};
use crate::model::{Dataset, PriorSpec, RhoFamily, ScoreFamily};
use crate::oracle::{brute_posteriors, MAX_ORACLE_N};
use crate::study::{derive_seed, generate_network, sample_dataset};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub struct FuzzConfig {
    pub instances: usize,
    pub seed: u64,
    /// Largest attribute count drawn; must stay within the reference guard.
    pub max_n: usize,
    pub tolerance: f64,
    /// Optional perturbation added to one engine posterior before the
    /// comparison; a sensitivity self-test of the harness.
    pub inject: Option<f64>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            instances: 50,
            seed: 1729,
            max_n: 5,
            tolerance: 1e-9,
            inject: None,
        }
    }
}

/// One dataset + prior combination, serializable for replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayInstance {
    pub description: String,
    pub dataset: Dataset,
    pub spec: PriorSpec,
}

impl ReplayInstance {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct InstanceSummary {
    pub index: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub r: u32,
    pub rho: RhoFamily,
    pub score: ScoreFamily,
    pub posterior_gap: f64,
    pub marginal_gap: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FuzzReport {
    pub summaries: Vec<InstanceSummary>,
    pub worst_posterior_gap: f64,
    pub worst_marginal_gap: f64,
    pub failures: Vec<ReplayInstance>,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn worst_gap(&self) -> f64 {
        self.worst_posterior_gap.max(self.worst_marginal_gap)
    }
}

/// Compare engine and reference on one instance; returns the maximum
/// absolute posterior discrepancy and the log-marginal discrepancy.
pub fn compare_once(data: &Dataset, spec: &PriorSpec, inject: Option<f64>) -> Result<(f64, f64)> {
    let mut fast = edge_posteriors(data, spec)?;
    let slow = brute_posteriors(data, spec)?;
    if let Some(eps) = inject {
        if fast.posteriors.len() > 1 {
            fast.posteriors[1] += eps;
        }
    }
    let posterior_gap = fast
        .posteriors
        .iter()
        .zip(&slow.posteriors)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let marginal_gap = (fast.log_marginal - slow.log_marginal).abs();
    Ok((posterior_gap, marginal_gap))
}

/// Run `instances` randomized comparisons drawn from the configured space:
/// n in 2..=max_n, m in 0..=30, k in 0..n, r in {2, 3}, both structure-prior
/// families and both score families, with a mix of i.i.d.-uniform and
/// network-sampled datasets.
pub fn run_agreement_suite(cfg: &FuzzConfig) -> Result<FuzzReport> {
    if cfg.max_n > MAX_ORACLE_N {
        return Err(Error::GuardExceeded(format!(
            "agreement suite requires max n <= {MAX_ORACLE_N}, got {}",
            cfg.max_n
        )));
    }
    if cfg.max_n < 2 {
        return Err(Error::InvalidArgument("agreement suite needs max n >= 2".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut report = FuzzReport::default();
    for index in 0..cfg.instances {
        let n = rng.gen_range(2..=cfg.max_n);
        let k = rng.gen_range(0..n);
        let r: u32 = if rng.gen::<bool>() { 2 } else { 3 };
        let m = rng.gen_range(0..=30usize);
        let rho = if rng.gen::<bool>() {
            RhoFamily::CardinalityUniform
        } else {
            RhoFamily::Flat
        };
        let score = if rng.gen::<bool>() {
            ScoreFamily::DirichletAllOnes
        } else {
            let ess = [0.5, 1.0, 4.0][rng.gen_range(0..3)];
            ScoreFamily::Bdeu { ess }
        };
        let structured = rng.gen::<bool>();
        let data = if structured {
            let net = generate_network(n, k, r, derive_seed(cfg.seed, index as u64, 1))?;
            sample_dataset(&net, m, derive_seed(cfg.seed, index as u64, 2))
        } else {
            let rows = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(0..r)).collect())
                .collect();
            Dataset::new(
                (0..n).map(|i| format!("x{i}")).collect(),
                vec![r; n],
                rows,
            )?
        };
        let spec = PriorSpec::new(k, rho, score)?;
        let (posterior_gap, marginal_gap) = compare_once(&data, &spec, cfg.inject)?;
        report.worst_posterior_gap = report.worst_posterior_gap.max(posterior_gap);
        report.worst_marginal_gap = report.worst_marginal_gap.max(marginal_gap);
        if posterior_gap > cfg.tolerance || marginal_gap > cfg.tolerance {
            report.failures.push(ReplayInstance {
                description: format!(
                    "instance {index}: n={n} m={m} k={k} r={r} posterior_gap={posterior_gap:.3e} marginal_gap={marginal_gap:.3e}"
                ),
                dataset: data.clone(),
                spec: spec.clone(),
            });
        }
        report.summaries.push(InstanceSummary {
            index,
            n,
            m,
            k,
            r,
            rho,
            score,
            posterior_gap,
            marginal_gap,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_is_green() {
        let cfg = FuzzConfig {
            instances: 12,
            ..FuzzConfig::default()
        };
        let report = run_agreement_suite(&cfg).unwrap();
        assert!(report.passed(), "worst gap {}", report.worst_gap());
        assert!(report.worst_gap() <= 1e-9);
        assert_eq!(report.summaries.len(), 12);
    }

    #[test]
    fn injected_perturbation_is_detected() {
        let cfg = FuzzConfig {
            instances: 5,
            inject: Some(1e-6),
            ..FuzzConfig::default()
        };
        let report = run_agreement_suite(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.worst_posterior_gap >= 1e-7);
    }

    #[test]
    fn guard_rejects_oversized_fuzz() {
        let cfg = FuzzConfig {
            max_n: 8,
            ..FuzzConfig::default()
        };
        assert!(matches!(
            run_agreement_suite(&cfg),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn replay_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("instance.json");
        let data = Dataset::parse_csv("a,b\n0,1\n1,0\n", "t", None).unwrap();
        let inst = ReplayInstance {
            description: "manual".into(),
            dataset: data,
            spec: PriorSpec::default_with_k(1),
        };
        inst.save_json(&path).unwrap();
        let back = ReplayInstance::load_json(&path).unwrap();
        let (pg, mg) = compare_once(&back.dataset, &back.spec, None).unwrap();
        assert!(pg <= 1e-9 && mg <= 1e-9);
    }
}
