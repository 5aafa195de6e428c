//! Monte Carlo experiments: rejection frequencies of both tests over a grid
//! of scenarios and block schemes, and null p-value distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{generate, Copula, Scenario};
use crate::error::{Error, Result};
use crate::limit::{estimated_limit_p_values, CriticalTable, PillowSample};
use crate::pipeline::{analyze, AnalysisConfig};
use crate::rng::derive_seed;
use crate::sample::{BlockScheme, Norm, DEFAULT_CANDIDATE_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioCell {
    pub id: String,
    /// Position on the power curve; defaults to the preset parameter.
    #[serde(default)]
    pub parameter: Option<f64>,
    pub scenario: Scenario,
}

impl ScenarioCell {
    pub fn parameter(&self) -> Option<f64> {
        self.parameter.or(match self.scenario.copula {
            Copula::Preset { parameter, .. } => Some(parameter),
            _ => None,
        })
    }
}

/// Settings for the Brownian-pillow reference distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PillowConfig {
    pub grid_step: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for PillowConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.005,
            replications: 2000,
            seed: 1,
        }
    }
}

/// How bivariate samples are judged. Higher dimensions always simulate the
/// estimated limit process.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BivariateReference {
    #[default]
    Pillow,
    EstimatedLimit,
}

fn default_sizes() -> Vec<f64> {
    vec![0.05]
}

fn default_cap() -> usize {
    DEFAULT_CANDIDATE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioCell>,
    pub blocks: Vec<usize>,
    pub exceedances: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub norm: Norm,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default)]
    pub bivariate: BivariateReference,
    #[serde(default)]
    pub pillow: PillowConfig,
    /// Replications of the estimated limit process per sample.
    #[serde(default)]
    pub limit_replications: Option<usize>,
}

impl ExperimentPlan {
    fn needs_limit(&self, d: usize) -> bool {
        d > 2 || self.bivariate == BivariateReference::EstimatedLimit
    }

    pub fn validate(&self) -> Result<()> {
        let config = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if self.sizes.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(config("sizes", "nominal sizes must lie in (0, 1)".into()));
        }
        for (i, cell) in self.scenarios.iter().enumerate() {
            cell.scenario
                .validate()
                .map_err(|e| config(&format!("scenarios[{i}].scenario"), e.to_string()))?;
            if self.needs_limit(cell.scenario.d) && self.limit_replications.unwrap_or(0) == 0 {
                return Err(config(
                    "limit_replications",
                    format!(
                        "scenario `{}` (d = {}) needs a per-sample limit simulation budget",
                        cell.id, cell.scenario.d
                    ),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Ks,
    Cm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub parameter: Option<f64>,
    pub b: usize,
    pub k: usize,
    pub test: TestKind,
    pub size: f64,
    pub rejections: usize,
    pub replications: usize,
    pub frequency: f64,
    pub mc_se: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleCell {
    pub scenario: String,
    pub b: usize,
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
    pub infeasible: Vec<InfeasibleCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_table: Option<CriticalTable>,
}

impl PowerTable {
    pub fn row(&self, scenario: &str, b: usize, k: usize, test: TestKind, size: f64) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.b == b && r.k == k && r.test == test && r.size == size)
    }
}

/// Reference distribution for one replication.
enum Reference<'a> {
    /// Criticals are only needed when sizes are requested.
    Pillow(&'a PillowSample, Option<&'a CriticalTable>),
    Estimated(usize),
}

/// Rejection flags per size plus the p-values.
struct Outcome {
    reject: Vec<(bool, bool)>,
    p_values: (f64, f64),
}

fn replicate(
    scenario: &Scenario,
    config: &AnalysisConfig,
    reference: &Reference<'_>,
    sizes: &[f64],
    data_seed: u64,
    limit_seed: u64,
) -> Result<Outcome> {
    let sample = generate(scenario, data_seed)?;
    let analysis = analyze(&sample, config)?;
    let (ks, cm) = (analysis.statistics.ks, analysis.statistics.cm);
    match reference {
        Reference::Pillow(draws, table) => Ok(Outcome {
            reject: sizes
                .iter()
                .map(|&s| {
                    let e = table
                        .and_then(|t| t.entry(s))
                        .expect("table covers the plan sizes");
                    (ks > e.ks, cm > e.cm)
                })
                .collect(),
            p_values: draws.p_values(ks, cm),
        }),
        Reference::Estimated(reps) => {
            let p = estimated_limit_p_values(&analysis.path, &analysis.family, (ks, cm), *reps, limit_seed)?;
            Ok(Outcome {
                reject: sizes.iter().map(|&s| (p.0 <= s, p.1 <= s)).collect(),
                p_values: p,
            })
        }
    }
}

fn data_seed(seed: u64, cell: usize, rep: usize) -> u64 {
    derive_seed(seed, &[cell as u64, rep as u64])
}

fn limit_seed(seed: u64, cell: usize, rep: usize) -> u64 {
    derive_seed(seed, &[cell as u64, rep as u64, 1])
}

fn pillow_reference(plan_pillow: &PillowConfig, sizes: &[f64]) -> Result<(PillowSample, CriticalTable)> {
    let draws = PillowSample::simulate(plan_pillow.grid_step, plan_pillow.replications, plan_pillow.seed)?;
    let table = draws.critical_table(sizes)?;
    Ok((draws, table))
}

/// Runs every (scenario, b, k) cell. Cells are numbered scenario-major, then
/// by `b`, then by `k`; replication `r` of cell `c` generates its data from
/// the seed path `(seed, c, r)`.
pub fn run(plan: &ExperimentPlan) -> Result<PowerTable> {
    plan.validate()?;
    let bivariate_pillow = plan
        .scenarios
        .iter()
        .any(|c| !plan.needs_limit(c.scenario.d));
    let pillow = if bivariate_pillow {
        Some(pillow_reference(&plan.pillow, &plan.sizes)?)
    } else {
        None
    };
    let mut sizes = plan.sizes.clone();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();

    let mut rows = Vec::new();
    let mut infeasible = Vec::new();
    let mut cell = 0usize;
    for sc in &plan.scenarios {
        for &b in &plan.blocks {
            for &k in &plan.exceedances {
                let c = cell;
                cell += 1;
                let mark = |reason: String| {
                    log::warn!("cell {} b={b} k={k} infeasible: {reason}", sc.id);
                    InfeasibleCell {
                        scenario: sc.id.clone(),
                        b,
                        k,
                        reason,
                    }
                };
                if let Err(e) = BlockScheme::new(sc.scenario.n, b, k) {
                    infeasible.push(mark(e.to_string()));
                    continue;
                }
                let reference = match &pillow {
                    Some((draws, table)) if !plan.needs_limit(sc.scenario.d) => Reference::Pillow(draws, Some(table)),
                    _ => Reference::Estimated(plan.limit_replications.unwrap_or(0)),
                };
                let config = AnalysisConfig {
                    b,
                    k,
                    norm: plan.norm,
                    cap: plan.cap,
                };
                log::info!("cell {} b={b} k={k}: {} replications", sc.id, plan.replications);
                let outcomes = (0..plan.replications)
                    .into_par_iter()
                    .map(|r| {
                        replicate(
                            &sc.scenario,
                            &config,
                            &reference,
                            &sizes,
                            data_seed(plan.seed, c, r),
                            limit_seed(plan.seed, c, r),
                        )
                    })
                    .collect::<Vec<_>>();
                let outcomes = match outcomes.into_iter().collect::<Result<Vec<_>>>() {
                    Ok(o) => o,
                    Err(e) if e.is_infeasible() => {
                        infeasible.push(mark(e.to_string()));
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let reps = plan.replications;
                for test in [TestKind::Ks, TestKind::Cm] {
                    for (si, &size) in sizes.iter().enumerate() {
                        let rejections = outcomes
                            .iter()
                            .filter(|o| match test {
                                TestKind::Ks => o.reject[si].0,
                                TestKind::Cm => o.reject[si].1,
                            })
                            .count();
                        let frequency = if reps == 0 {
                            0.0
                        } else {
                            rejections as f64 / reps as f64
                        };
                        rows.push(PowerRow {
                            scenario: sc.id.clone(),
                            parameter: sc.parameter(),
                            b,
                            k,
                            test,
                            size,
                            rejections,
                            replications: reps,
                            frequency,
                            mc_se: if reps == 0 {
                                0.0
                            } else {
                                (frequency * (1.0 - frequency) / reps as f64).sqrt()
                            },
                            seed: derive_seed(plan.seed, &[c as u64]),
                        });
                    }
                }
            }
        }
    }
    Ok(PowerTable {
        rows,
        infeasible,
        critical_table: pillow.map(|(_, t)| t),
    })
}

/// Reference distribution for [`p_value_quantiles`].
#[derive(Debug, Clone, Copy)]
pub enum PValueReference<'a> {
    Pillow(&'a PillowSample),
    EstimatedLimit { replications: usize },
}

/// Sorted p-values of both tests over `replications` samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PValueQuantiles {
    pub ks: Vec<f64>,
    pub cm: Vec<f64>,
}

impl PValueQuantiles {
    /// Kolmogorov distance of the empirical p-value cdfs from the uniform.
    pub fn uniform_distance(&self) -> (f64, f64) {
        let dist = |p: &[f64]| {
            let n = p.len() as f64;
            p.iter()
                .enumerate()
                .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
                .fold(0.0, f64::max)
        };
        (dist(&self.ks), dist(&self.cm))
    }
}

/// Replication `r` uses the same seed path as cell 0 of [`run`].
pub fn p_value_quantiles(
    scenario: &Scenario,
    config: &AnalysisConfig,
    replications: usize,
    seed: u64,
    reference: PValueReference<'_>,
) -> Result<PValueQuantiles> {
    if replications == 0 {
        return Ok(PValueQuantiles::default());
    }
    let reference = match reference {
        PValueReference::Pillow(draws) => {
            if scenario.d != 2 {
                return Err(Error::MissingSimulation(scenario.d));
            }
            Reference::Pillow(draws, None)
        }
        PValueReference::EstimatedLimit { replications } => Reference::Estimated(replications),
    };
    let (mut ks, mut cm): (Vec<f64>, Vec<f64>) = (0..replications)
        .into_par_iter()
        .map(|r| {
            replicate(scenario, config, &reference, &[], data_seed(seed, 0, r), limit_seed(seed, 0, r))
                .map(|o| o.p_values)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    ks.sort_by(f64::total_cmp);
    cm.sort_by(f64::total_cmp);
    Ok(PValueQuantiles { ks, cm })
}
