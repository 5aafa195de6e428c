//! Kolmogorov–Smirnov and Cramér–von Mises statistics for the deviation
//! `D_t(A) = ÎS_t(A) − t·ÎS_1(A)` and the resulting test decisions.

use serde::{Deserialize, Serialize};

use crate::cells::{prefix_scan, CellMap};
use crate::error::{Error, Result};
use crate::estimator::SpectralPath;
use crate::limit::{estimated_limit_p_values, CriticalTable};
use crate::sample::{Comparison, LowerSetFamily};

/// Where a supremum was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    /// Block boundary time; always 0 for the CM statistic.
    pub t: f64,
    pub corner: Vec<f64>,
    pub mode: Comparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statistics {
    pub ks: f64,
    pub cm: f64,
    pub argmax_ks: Argmax,
    pub argmax_cm: Argmax,
}

/// `D` at the path nodes, computed from integer per-block counts.
///
/// Writing `δ_j = (c_j − c_1)/k`, `D(t_i) = Σ_{j≤i} w_j δ_j − t_i Σ_j w_j δ_j`,
/// which vanishes exactly for a single block or equal counts.
fn deviation(counts: &[u32], weights: &[f64], nodes: &[f64], k: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let first = counts[0] as i64;
    let mut acc = 0.0;
    for (&c, &w) in counts.iter().zip(weights) {
        acc += w * ((c as i64 - first) as f64 / k);
        out.push(acc);
    }
    let total = acc;
    for (d, &t) in out.iter_mut().zip(nodes).skip(1) {
        *d -= t * total;
    }
    let last = out.len() - 1;
    out[last] = 0.0;
}

/// Exact `∫_0^1 D²` of the piecewise-linear interpolant of `values` on `nodes`.
pub(crate) fn squared_integral(values: &[f64], nodes: &[f64]) -> f64 {
    values
        .windows(2)
        .zip(nodes.windows(2))
        .map(|(v, t)| (t[1] - t[0]) * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]) / 3.0)
        .sum()
}

/// Both statistics in one sweep over the family.
pub fn statistics(path: &SpectralPath, family: &LowerSetFamily) -> Statistics {
    let blocks = path.estimates().len();
    let nodes = path.nodes();
    let weights: Vec<f64> = (0..blocks).map(|j| path.weight(j)).collect();
    let scheme = path.scheme();
    let k = scheme.k as f64;

    let mut best_ks = (-1.0, 0usize, 0usize, Comparison::Closed);
    let mut best_cm = (-1.0, 0usize, Comparison::Closed);
    let mut d = Vec::with_capacity(blocks + 1);
    for &mode in family.modes() {
        let map = CellMap::new(family, mode, path.atoms().map(|(_, a)| a));
        let mut counts = vec![0u32; map.cells() * blocks];
        for ((j, _), cell) in path.atoms().zip(map.cell_of()) {
            if let Some(c) = cell {
                counts[c * blocks + j] += 1;
            }
        }
        prefix_scan(&mut counts, map.shape(), blocks);
        for (corner, c) in counts.chunks_exact(blocks).enumerate() {
            deviation(c, &weights, nodes, k, &mut d);
            for (i, v) in d.iter().enumerate() {
                if v.abs() > best_ks.0 {
                    best_ks = (v.abs(), i, corner, mode);
                }
            }
            let cm = squared_integral(&d, nodes);
            if cm > best_cm.0 {
                best_cm = (cm, corner, mode);
            }
        }
    }
    let scale = k * scheme.n as f64 / scheme.b as f64;
    Statistics {
        ks: scale.sqrt() * best_ks.0.max(0.0),
        cm: scale * best_cm.0.max(0.0),
        argmax_ks: Argmax {
            t: nodes[best_ks.1],
            corner: family.corner(best_ks.2),
            mode: best_ks.3,
        },
        argmax_cm: Argmax {
            t: 0.0,
            corner: family.corner(best_cm.1),
            mode: best_cm.2,
        },
    }
}

/// `T_KS` with the node and set where the supremum is attained.
pub fn ks_statistic(path: &SpectralPath, family: &LowerSetFamily) -> (f64, Argmax) {
    let s = statistics(path, family);
    (s.ks, s.argmax_ks)
}

/// `T_CM` with the maximizing set.
pub fn cm_statistic(path: &SpectralPath, family: &LowerSetFamily) -> (f64, Argmax) {
    let s = statistics(path, family);
    (s.cm, s.argmax_cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeCriticals {
    pub size: f64,
    pub ks: f64,
    pub cm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub ks: f64,
    pub cm: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub size: f64,
    pub reject_ks: bool,
    pub reject_cm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub dimension: usize,
    pub t_ks: f64,
    pub t_cm: f64,
    pub argmax_ks: Argmax,
    pub argmax_cm: Argmax,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_values: Option<Vec<SizeCriticals>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_values: Option<PValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decisions: Option<Vec<Decision>>,
}

impl TestReport {
    pub fn new(dimension: usize, stats: Statistics) -> Self {
        Self {
            dimension,
            t_ks: stats.ks,
            t_cm: stats.cm,
            argmax_ks: stats.argmax_ks,
            argmax_cm: stats.argmax_cm,
            critical_values: None,
            p_values: None,
            decisions: None,
        }
    }

    pub fn decision(&self, size: f64) -> Option<&Decision> {
        self.decisions.as_ref()?.iter().find(|d| d.size == size)
    }
}

/// Source of reference values for [`decide`].
#[derive(Debug, Clone, Copy)]
pub enum CriticalSource<'a> {
    /// Brownian-pillow criticals; only valid in dimension 2.
    Table(&'a CriticalTable),
    /// Simulation of the estimated limit process for this sample.
    PerSample {
        path: &'a SpectralPath,
        family: &'a LowerSetFamily,
        replications: usize,
        seed: u64,
        sizes: &'a [f64],
    },
}

/// Fills in critical values or p-values and the decisions. Statistics above
/// the critical value (strictly) or with p-value `≤ size` reject.
pub fn decide(mut report: TestReport, source: CriticalSource<'_>) -> Result<TestReport> {
    match source {
        CriticalSource::Table(table) => {
            if report.dimension != 2 {
                return Err(Error::MissingSimulation(report.dimension));
            }
            report.decisions = Some(
                table
                    .entries
                    .iter()
                    .map(|e| Decision {
                        size: e.size,
                        reject_ks: report.t_ks > e.ks,
                        reject_cm: report.t_cm > e.cm,
                    })
                    .collect(),
            );
            report.critical_values = Some(table.entries.clone());
        }
        CriticalSource::PerSample {
            path,
            family,
            replications,
            seed,
            sizes,
        } => {
            let (ks, cm) = estimated_limit_p_values(
                path,
                family,
                (report.t_ks, report.t_cm),
                replications,
                seed,
            )?;
            report.decisions = Some(
                sizes
                    .iter()
                    .map(|&size| Decision {
                        size,
                        reject_ks: ks <= size,
                        reject_cm: cm <= size,
                    })
                    .collect(),
            );
            report.p_values = Some(PValues {
                ks,
                cm,
                replications,
            });
        }
    }
    Ok(report)
}
