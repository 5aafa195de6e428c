//! Sample representation: timed observations, their radius/angle
//! decomposition, the block partition, and the family of coordinate lower
//! sets used as test sets on the unit sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation `x` recorded at time `t` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedObservation {
    pub t: f64,
    pub x: Vec<f64>,
}

impl TimedObservation {
    pub fn new(t: f64, x: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        Ok(Self { t, x })
    }
}

/// Attaches the equidistant times `i/n`, `i = 1..=n`, to rows in record order.
pub fn equidistant(rows: Vec<Vec<f64>>) -> Vec<TimedObservation> {
    let n = rows.len() as f64;
    rows.into_iter()
        .enumerate()
        .map(|(i, x)| TimedObservation {
            t: (i + 1) as f64 / n,
            x,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Sum,
    Max,
}

impl Norm {
    pub fn of(self, x: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Sum => x.iter().map(|v| v.abs()).sum(),
            Norm::Max => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Norm::Euclidean),
            "sum" | "l1" => Ok(Norm::Sum),
            "max" | "linf" => Ok(Norm::Max),
            other => Err(Error::InvalidParameter(format!("unknown norm `{other}`"))),
        }
    }
}

/// Radius and angle of one observation. `theta` is `None` for the zero
/// vector, which keeps its slot in the block but can never be an exceedance.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularPoint {
    pub r: f64,
    pub theta: Option<Vec<f64>>,
    /// Position in the original sample (0-based); breaks radius ties.
    pub index: usize,
}

/// Splits every observation into `(‖x‖, x/‖x‖)`, keeping the sample order.
pub fn decompose(sample: &[TimedObservation], norm: Norm) -> Result<Vec<AngularPoint>> {
    let first = sample.first().ok_or(Error::EmptySample)?;
    let d = first.x.len();
    if d < 2 {
        return Err(Error::DimensionTooSmall(d));
    }
    sample
        .iter()
        .enumerate()
        .map(|(index, obs)| {
            if obs.x.len() != d {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: d,
                    found: obs.x.len(),
                });
            }
            if obs.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(index));
            }
            let r = norm.of(&obs.x);
            let theta = (r > 0.0).then(|| obs.x.iter().map(|v| v / r).collect());
            Ok(AngularPoint { r, theta, index })
        })
        .collect()
}

/// Sample size `n`, block length `b` and exceedances per block `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScheme {
    pub n: usize,
    pub b: usize,
    pub k: usize,
}

impl BlockScheme {
    pub fn new(n: usize, b: usize, k: usize) -> Result<Self> {
        let infeasible = |reason| Error::InfeasibleScheme { n, b, k, reason };
        if k == 0 {
            return Err(infeasible("k must be positive"));
        }
        if k >= b {
            return Err(infeasible("k must be smaller than the block length"));
        }
        if n < b {
            return Err(Error::FewerThanOneBlock { n, b });
        }
        Ok(Self { n, b, k })
    }

    /// Half-width of the estimation window, `b / (2n)`.
    pub fn bandwidth(&self) -> f64 {
        self.b as f64 / (2 * self.n) as f64
    }

    /// Number of complete blocks `J = floor(n / b)`.
    pub fn blocks(&self) -> usize {
        self.n / self.b
    }

    /// Observations dropped after the last complete block.
    pub fn remainder(&self) -> usize {
        self.n - self.blocks() * self.b
    }

    /// Center `r_j = (2j - 1) h` of block `j` (1-based).
    pub fn center(&self, j: usize) -> f64 {
        ((2 * j - 1) * self.b) as f64 / (2 * self.n) as f64
    }

    /// Time nodes at which the integrated path changes slope: `0, 2h, …,
    /// 2h(J-1)` followed by 1. The last block's slope runs up to `t = 1`.
    pub fn nodes(&self) -> Vec<f64> {
        let j = self.blocks();
        let mut nodes: Vec<f64> = (0..j)
            .map(|i| (i * self.b) as f64 / self.n as f64)
            .collect();
        nodes.push(1.0);
        nodes
    }
}

/// The `b` consecutive points of block `index` (1-based).
#[derive(Debug, Clone, Copy)]
pub struct Block<'a> {
    pub index: usize,
    pub points: &'a [AngularPoint],
}

/// Cuts the points into `J` blocks of exactly `b` points. Trailing points
/// that do not fill a block are dropped with a warning.
pub fn partition<'a>(scheme: &BlockScheme, points: &'a [AngularPoint]) -> Result<Vec<Block<'a>>> {
    if points.len() < scheme.b {
        return Err(Error::FewerThanOneBlock {
            n: points.len(),
            b: scheme.b,
        });
    }
    if points.len() != scheme.n {
        return Err(Error::InvalidParameter(format!(
            "block scheme is for n = {} observations but {} were given",
            scheme.n,
            points.len()
        )));
    }
    if scheme.remainder() > 0 {
        log::warn!(
            "discarding the last {} observations that do not fill a block of length {}",
            scheme.remainder(),
            scheme.b
        );
    }
    Ok(points
        .chunks_exact(scheme.b)
        .enumerate()
        .map(|(i, points)| Block {
            index: i + 1,
            points,
        })
        .collect())
}

/// How a corner bounds the coordinates: `θ_i ≤ y_i` or `θ_i < y_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Closed,
    Open,
}

/// A single member `A_y = {θ : θ_i ≤ y_i, i < d}` of the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerSet {
    pub corner: Vec<f64>,
    pub mode: Comparison,
}

impl LowerSet {
    pub fn full(dimension: usize) -> Self {
        Self {
            corner: vec![1.0; dimension - 1],
            mode: Comparison::Closed,
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.corner.iter().zip(theta).all(|(&y, &v)| match self.mode {
            // y = 1 is the top of the family and bounds nothing.
            Comparison::Closed => v <= y || y >= 1.0,
            Comparison::Open => v < y,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Corners at every observed coordinate value.
    Enumerated,
    /// Uniform per-axis grid used once enumeration exceeds the cap.
    Grid,
}

pub const DEFAULT_CANDIDATE_CAP: usize = 10_000;

/// Finite stand-in for the family of coordinate lower sets on the sphere:
/// the cross product of per-axis corner values, each evaluated under the
/// listed comparison modes.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerSetFamily {
    dimension: usize,
    axes: Vec<Vec<f64>>,
    kind: FamilyKind,
    modes: Vec<Comparison>,
}

impl LowerSetFamily {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Sorted corner values per constrained axis (`d - 1` axes); each ends in 1.
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn modes(&self) -> &[Comparison] {
        &self.modes
    }

    /// Number of candidate corners.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Corner with row-major index `idx` (last axis fastest).
    pub fn corner(&self, mut idx: usize) -> Vec<f64> {
        let mut corner = vec![0.0; self.axes.len()];
        for (axis, slot) in self.axes.iter().zip(corner.iter_mut()).rev() {
            *slot = axis[idx % axis.len()];
            idx /= axis.len();
        }
        corner
    }

    pub fn set(&self, idx: usize, mode: Comparison) -> LowerSet {
        LowerSet {
            corner: self.corner(idx),
            mode,
        }
    }

    /// All members, corner-major then mode.
    pub fn sets(&self) -> impl Iterator<Item = LowerSet> + '_ {
        (0..self.len()).flat_map(move |i| self.modes.iter().map(move |&m| self.set(i, m)))
    }
}

fn distinct_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Builds the candidate family from the angles of the selected exceedances.
///
/// For `d = 2` the corners are the distinct first coordinates plus `{0, 1}`,
/// which realizes every trace the continuum family cuts on the atoms. For
/// `d ≥ 3` the same per-axis enumeration is crossed; if the product exceeds
/// `cap`, each axis falls back to the grid `{1/G, 2/G, …, 1}` with
/// `G = floor(cap^(1/(d-1)))`.
///
/// Open comparison at an enumerated corner equals closed comparison at the
/// preceding corner, so enumerated families only need the closed mode. On a
/// grid the two modes differ only when an atom coordinate lies exactly on a
/// grid value; the open mode is added in that case.
pub fn enumerate_candidate_sets<'a, I>(angles: I, dimension: usize, cap: usize) -> LowerSetFamily
where
    I: IntoIterator<Item = &'a [f64]>,
{
    assert!(dimension >= 2, "lower-set families need d >= 2");
    let constrained = dimension - 1;
    let angles: Vec<&[f64]> = angles.into_iter().collect();
    let axes: Vec<Vec<f64>> = (0..constrained)
        .map(|i| {
            let mut values: Vec<f64> = angles.iter().map(|a| a[i]).collect();
            values.extend([0.0, 1.0]);
            distinct_sorted(values)
                .into_iter()
                .filter(|&v| v <= 1.0)
                .collect()
        })
        .collect();
    let size = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
        .unwrap_or(usize::MAX);

    if dimension == 2 || size <= cap {
        return LowerSetFamily {
            dimension,
            axes,
            kind: FamilyKind::Enumerated,
            modes: vec![Comparison::Closed],
        };
    }

    let per_axis = ((cap as f64).powf(1.0 / constrained as f64).floor() as usize).max(1);
    // powf can land just below an exact integer root.
    let per_axis = if (per_axis + 1).checked_pow(constrained as u32).is_some_and(|p| p <= cap) {
        per_axis + 1
    } else {
        per_axis
    };
    let grid: Vec<f64> = (1..=per_axis)
        .map(|i| i as f64 / per_axis as f64)
        .collect();
    let on_grid = angles.iter().any(|a| {
        a[..constrained]
            .iter()
            .any(|v| grid.binary_search_by(|g| g.total_cmp(v)).is_ok())
    });
    let modes = if on_grid {
        vec![Comparison::Closed, Comparison::Open]
    } else {
        vec![Comparison::Closed]
    };
    LowerSetFamily {
        dimension,
        axes: vec![grid; constrained],
        kind: FamilyKind::Grid,
        modes,
    }
}
