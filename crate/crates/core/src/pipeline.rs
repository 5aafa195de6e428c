//! Sample in, statistics out.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::{integrated_path, local_estimate, SpectralPath};
use crate::sample::{
    decompose, enumerate_candidate_sets, partition, BlockScheme, LowerSetFamily, Norm,
    TimedObservation, DEFAULT_CANDIDATE_CAP,
};
use crate::stationarity::{statistics, Statistics, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub b: usize,
    pub k: usize,
    pub norm: Norm,
    pub cap: usize,
}

impl AnalysisConfig {
    pub fn new(b: usize, k: usize) -> Self {
        Self {
            b,
            k,
            norm: Norm::default(),
            cap: DEFAULT_CANDIDATE_CAP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub path: SpectralPath,
    pub family: LowerSetFamily,
    pub statistics: Statistics,
}

impl Analysis {
    pub fn scheme(&self) -> &BlockScheme {
        self.path.scheme()
    }

    pub fn dimension(&self) -> usize {
        self.family.dimension()
    }

    pub fn report(&self) -> TestReport {
        TestReport::new(self.dimension(), self.statistics.clone())
    }
}

/// Decompose, block, estimate and compute both statistics.
pub fn analyze(sample: &[TimedObservation], config: &AnalysisConfig) -> Result<Analysis> {
    let points = decompose(sample, config.norm)?;
    let dimension = sample[0].x.len();
    let scheme = BlockScheme::new(points.len(), config.b, config.k)?;
    let estimates = partition(&scheme, &points)?
        .iter()
        .map(|block| local_estimate(block, config.k))
        .collect::<Result<Vec<_>>>()?;
    let path = integrated_path(scheme, estimates)?;
    let family = enumerate_candidate_sets(path.atoms().map(|(_, a)| a), dimension, config.cap);
    let statistics = statistics(&path, &family);
    Ok(Analysis {
        path,
        family,
        statistics,
    })
}
