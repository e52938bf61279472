use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_dataset, rep_seed, DATA_MAX_STEP};
use super::spec::StudySpec;
use crate::error::{Error, Result};
use crate::estimation::{nls_estimate, two_step_estimate, NlsConfig, TwoStepConfig};
use crate::gof::{gm_test, im_test, tm_test_with_theta, GmConfig, ImConfig, TestId, TestKind, TestReport, TmConfig};
use crate::ode::OdeModel;
use crate::smoothing::ObservationSet;

/// Result of one test in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestOutcome {
    Completed { statistic: f64, p_value: f64, reject: bool },
    Failed { kind: String, message: String },
}

impl TestOutcome {
    fn from_result(r: Result<TestReport>) -> Self {
        match r {
            Ok(rep) => TestOutcome::Completed {
                statistic: rep.statistic,
                p_value: rep.p_value,
                reject: rep.reject,
            },
            Err(e) => TestOutcome::failed(&e),
        }
    }

    fn failed(e: &Error) -> Self {
        TestOutcome::Failed {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    /// One entry per configured test, in configuration order.
    pub outcomes: Vec<TestOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub test: String,
    pub completed: usize,
    pub rejections: usize,
    /// Rejections over completed replications; `None` if none completed.
    pub rate: Option<f64>,
    /// `sqrt(rate (1 - rate) / completed)`.
    pub se: Option<f64>,
    pub mean_statistic: Option<f64>,
    pub quantiles: Option<Quantiles>,
    pub failures: BTreeMap<String, usize>,
}

impl TestSummary {
    pub fn from_outcomes<'a>(test: &TestId, outcomes: impl Iterator<Item = &'a TestOutcome>) -> Self {
        let mut stats = Vec::new();
        let mut rejections = 0;
        let mut failures = BTreeMap::new();
        for o in outcomes {
            match o {
                TestOutcome::Completed { statistic, reject, .. } => {
                    stats.push(*statistic);
                    rejections += usize::from(*reject);
                }
                TestOutcome::Failed { kind, .. } => *failures.entry(kind.clone()).or_insert(0) += 1,
            }
        }
        let completed = stats.len();
        let rate = (completed > 0).then(|| rejections as f64 / completed as f64);
        let se = rate.map(|r| (r * (1.0 - r) / completed as f64).sqrt());
        let mean_statistic = (completed > 0).then(|| stats.iter().sum::<f64>() / completed as f64);
        stats.sort_by(f64::total_cmp);
        let quantiles = (completed > 0).then(|| Quantiles {
            q05: quantile_sorted(&stats, 0.05),
            q25: quantile_sorted(&stats, 0.25),
            q50: quantile_sorted(&stats, 0.5),
            q75: quantile_sorted(&stats, 0.75),
            q95: quantile_sorted(&stats, 0.95),
        });
        TestSummary {
            test: test.label(),
            completed,
            rejections,
            rate,
            se,
            mean_statistic,
            quantiles,
            failures,
        }
    }

    pub fn failed(&self) -> usize {
        self.failures.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub spec: StudySpec,
    pub hypothesis: String,
    pub gm_gain: f64,
    /// RK4 substep of the data-generating solver.
    pub data_max_step: f64,
    pub summaries: Vec<TestSummary>,
    pub replications: Option<Vec<ReplicationRecord>>,
    /// Seconds; kept out of serialized output so reports stay reproducible.
    #[serde(skip)]
    pub wall_clock: f64,
}

impl MonteCarloReport {
    pub fn summary(&self, label: &str) -> Option<&TestSummary> {
        self.summaries.iter().find(|s| s.test == label)
    }

    pub fn rate(&self, label: &str) -> Option<f64> {
        self.summary(label).and_then(|s| s.rate)
    }
}

struct Context {
    null: OdeModel,
    theta0: Vec<f64>,
    x0: Vec<f64>,
}

fn estimate_for_component(spec: &StudySpec, ctx: &Context, data: &ObservationSet, k: usize, seed: u64) -> Result<Vec<f64>> {
    if spec.oracle_theta {
        return Ok(ctx.theta0.clone());
    }
    let cfg = TwoStepConfig {
        component: k,
        multistart: spec.two_step_multistart,
        seed,
        initial: Some(ctx.theta0.clone()),
        ..Default::default()
    };
    Ok(two_step_estimate(&ctx.null, data, &cfg)?.theta_hat)
}

/// Run every configured test on one data set.
pub fn run_replication(spec: &StudySpec, replication: usize) -> ReplicationRecord {
    let seed = rep_seed(spec.seed, replication as u64);
    let outcomes = match replication_outcomes(spec, seed) {
        Ok(o) => o,
        Err(e) => vec![TestOutcome::failed(&e); spec.tests.len()],
    };
    ReplicationRecord {
        replication,
        seed,
        outcomes,
    }
}

fn replication_outcomes(spec: &StudySpec, seed: u64) -> Result<Vec<TestOutcome>> {
    let ctx = Context {
        null: spec.null_model()?,
        theta0: spec.theta0()?,
        x0: spec.x0()?,
    };
    let data = generate_dataset(spec, spec.local_alt.as_ref(), seed)?;
    let p = ctx.null.p();
    let estimates: Vec<Option<Result<Vec<f64>>>> = (0..p)
        .map(|k| spec.needs_component(k).then(|| estimate_for_component(spec, &ctx, &data, k, seed)))
        .collect();

    let outcomes = spec
        .tests
        .iter()
        .map(|id| {
            let result = match (id.kind, id.component) {
                (TestKind::Tm, _) => {
                    let cfg = TmConfig {
                        nls: NlsConfig {
                            multistart: spec.nls_multistart,
                            seed,
                            initial: Some(ctx.theta0.clone()),
                            ..Default::default()
                        },
                        level: spec.level,
                        ..Default::default()
                    };
                    let theta = if spec.oracle_theta {
                        Ok(ctx.theta0.clone())
                    } else {
                        nls_estimate(&ctx.null, &data, &ctx.x0, &cfg.nls).map(|e| e.theta_hat)
                    };
                    theta.and_then(|th| tm_test_with_theta(&data, &ctx.null, &ctx.x0, &th, &cfg))
                }
                (kind, Some(k)) => match estimates[k].as_ref().expect("estimate prepared for tested component") {
                    Err(e) => return TestOutcome::failed(e),
                    Ok(theta) if kind == TestKind::Im => {
                        let cfg = ImConfig {
                            level: spec.level,
                            theta: Some(theta.clone()),
                            ..Default::default()
                        };
                        im_test(&data, &ctx.null, k, &cfg)
                    }
                    Ok(theta) => {
                        let cfg = GmConfig {
                            c: spec.gm_gain(),
                            split_seed: seed ^ 0xA5A5_5A5A_A5A5_5A5A,
                            level: spec.level,
                            theta: Some(theta.clone()),
                            ..Default::default()
                        };
                        gm_test(&data, &ctx.null, k, &cfg)
                    }
                },
                (_, None) => Err(Error::Config(format!("test {} needs a component", id.label()))),
            };
            TestOutcome::from_result(result)
        })
        .collect();
    Ok(outcomes)
}

/// Run all replications on a pool of `threads` workers (0 = all cores).
/// Output does not depend on the thread count.
pub fn run_study(spec: &StudySpec, threads: usize) -> Result<MonteCarloReport> {
    spec.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let records: Vec<ReplicationRecord> =
        pool.install(|| (0..spec.replications).into_par_iter().map(|r| run_replication(spec, r)).collect());
    let summaries = spec
        .tests
        .iter()
        .enumerate()
        .map(|(j, id)| TestSummary::from_outcomes(id, records.iter().map(|r| &r.outcomes[j])))
        .collect();
    Ok(MonteCarloReport {
        spec: spec.clone(),
        hypothesis: spec.hypothesis_label(),
        gm_gain: spec.gm_gain(),
        data_max_step: DATA_MAX_STEP,
        summaries,
        replications: spec.keep_replications.then_some(records),
        wall_clock: start.elapsed().as_secs_f64(),
    })
}
