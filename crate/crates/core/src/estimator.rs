//! Local spectral-measure estimates per block and the integrated spectral
//! path built from them.

use std::cmp::Ordering;

use crate::cells::{prefix_scan, CellMap};
use crate::error::{Error, Result};
use crate::sample::{AngularPoint, Block, BlockScheme, Comparison, LowerSet, LowerSetFamily};

/// Empirical spectral measure of one block: the `k` points of largest
/// radius, each carrying mass `1/k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimate {
    pub block_index: usize,
    /// The `(k+1)`-th largest radius in the block.
    pub threshold: f64,
    pub selected: Vec<AngularPoint>,
}

impl BlockEstimate {
    pub fn k(&self) -> usize {
        self.selected.len()
    }

    /// Number of selected angles in `set`.
    pub fn count(&self, set: &LowerSet) -> usize {
        self.selected
            .iter()
            .filter(|p| set.contains(angle(p)))
            .count()
    }

    pub fn measure(&self, set: &LowerSet) -> f64 {
        self.count(set) as f64 / self.k() as f64
    }

    pub fn angles(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.selected.iter().map(angle)
    }
}

fn angle(p: &AngularPoint) -> &[f64] {
    p.theta
        .as_deref()
        .expect("selected points always have an angle")
}

fn by_radius_desc(a: &&AngularPoint, b: &&AngularPoint) -> Ordering {
    b.r.total_cmp(&a.r).then(a.index.cmp(&b.index))
}

fn select_top<'a>(
    candidates: impl Iterator<Item = &'a AngularPoint>,
    k: usize,
    block_index: usize,
) -> Result<BlockEstimate> {
    let mut nonzero: Vec<&AngularPoint> = candidates.filter(|p| p.theta.is_some()).collect();
    if nonzero.len() < k + 1 {
        return Err(Error::InsufficientExceedances {
            nonzero: nonzero.len(),
            needed: k + 1,
        });
    }
    nonzero.sort_by(by_radius_desc);
    Ok(BlockEstimate {
        block_index,
        threshold: nonzero[k].r,
        selected: nonzero[..k].iter().map(|&p| p.clone()).collect(),
    })
}

/// Estimate from one block. Exactly `k` points are selected; among equal
/// radii the smaller original index wins.
pub fn local_estimate(block: &Block<'_>, k: usize) -> Result<BlockEstimate> {
    select_top(block.points.iter(), k, block.index)
}

/// Fixed-time estimate from the window of indices `i` with
/// `i/n ∈ (t - h, t + h]`.
pub fn estimate_at(t: f64, points: &[AngularPoint], scheme: &BlockScheme) -> Result<BlockEstimate> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    // Compare 2i against 2nt ± b in integers where possible, so block centers
    // reproduce block boundaries exactly.
    let mut center = 2.0 * scheme.n as f64 * t;
    let rounded = center.round();
    if (center - rounded).abs() <= 1e-9 * rounded.abs().max(1.0) {
        center = rounded;
    }
    let b = scheme.b as f64;
    let window = points.iter().filter(|p| {
        let two_i = 2.0 * (p.index + 1) as f64;
        two_i > center - b && two_i <= center + b
    });
    // block index is only meaningful when t is a block center
    let j = (center / (2.0 * b)).ceil().max(1.0) as usize;
    select_top(window, scheme.k, j)
}

/// The integrated spectral path `t ↦ ∫_0^t Ŝ_{block(r)}(A) dr`: piecewise
/// linear in `t`, with slope equal to block `j`'s estimate on the `j`-th
/// interval. The last block's slope continues up to `t = 1`.
#[derive(Debug, Clone)]
pub struct SpectralPath {
    scheme: BlockScheme,
    estimates: Vec<BlockEstimate>,
    nodes: Vec<f64>,
}

pub fn integrated_path(scheme: BlockScheme, estimates: Vec<BlockEstimate>) -> Result<SpectralPath> {
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("a path needs at least one block estimate".into()));
    }
    if estimates.len() != scheme.blocks() {
        return Err(Error::InvalidParameter(format!(
            "expected {} block estimates, got {}",
            scheme.blocks(),
            estimates.len()
        )));
    }
    if let Some(e) = estimates.iter().find(|e| e.k() != scheme.k) {
        return Err(Error::InvalidParameter(format!(
            "block {} selected {} points, expected k = {}",
            e.block_index,
            e.k(),
            scheme.k
        )));
    }
    let dims: Vec<usize> = estimates
        .iter()
        .flat_map(|e| e.angles().map(<[f64]>::len))
        .collect();
    if dims.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::InvalidParameter("block estimates mix dimensions".into()));
    }
    let nodes = scheme.nodes();
    Ok(SpectralPath {
        scheme,
        estimates,
        nodes,
    })
}

impl SpectralPath {
    pub fn scheme(&self) -> &BlockScheme {
        &self.scheme
    }

    pub fn estimates(&self) -> &[BlockEstimate] {
        &self.estimates
    }

    pub fn dimension(&self) -> usize {
        self.estimates[0].angles().next().map_or(0, <[f64]>::len)
    }

    /// `0 = t_0 < t_1 < … < t_J = 1`; block `j` owns `(t_{j-1}, t_j]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Interval length owned by block `j` (0-based).
    pub fn weight(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Every selected angle with its 0-based block.
    pub fn atoms(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.estimates
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.angles().map(move |a| (j, a)))
    }

    /// Index of the interval containing `t` (the first block for `t = 0`).
    fn segment(&self, t: f64) -> usize {
        self.nodes[1..]
            .partition_point(|&node| node < t)
            .min(self.estimates.len() - 1)
    }

    fn eval_with(&self, t: f64, measure: impl Fn(usize) -> f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let seg = self.segment(t);
        let done: f64 = (0..seg).map(|j| self.weight(j) * measure(j)).sum();
        Ok(done + (t - self.nodes[seg]) * measure(seg))
    }

    /// `ÎS_t(A)`.
    pub fn eval(&self, t: f64, set: &LowerSet) -> Result<f64> {
        self.eval_with(t, |j| self.estimates[j].measure(set))
    }

    /// Precomputes the path at every node for every member of `family`,
    /// after which [`PathTable::eval`] is O(log J).
    pub fn tabulate(&self, family: &LowerSetFamily) -> PathTable {
        let blocks = self.estimates.len();
        let k = self.scheme.k as f64;
        let modes = family.modes().to_vec();
        let values = modes
            .iter()
            .map(|&mode| {
                let map = CellMap::new(family, mode, self.atoms().map(|(_, a)| a));
                let mut counts = vec![0u32; map.cells() * blocks];
                for ((j, _), cell) in self.atoms().zip(map.cell_of()) {
                    if let Some(c) = cell {
                        counts[c * blocks + j] += 1;
                    }
                }
                prefix_scan(&mut counts, map.shape(), blocks);
                counts
                    .chunks_exact(blocks)
                    .flat_map(|c| {
                        let mut acc = 0.0;
                        std::iter::once(0.0).chain(c.iter().enumerate().map(move |(j, &n)| {
                            acc += self.weight(j) * n as f64 / k;
                            acc
                        }))
                    })
                    .collect()
            })
            .collect();
        PathTable {
            nodes: self.nodes.clone(),
            modes,
            values,
        }
    }
}

/// Node values of a [`SpectralPath`] for every candidate of a family.
#[derive(Debug, Clone)]
pub struct PathTable {
    nodes: Vec<f64>,
    modes: Vec<Comparison>,
    /// Per mode: `(J + 1)` cumulative values per corner.
    values: Vec<Vec<f64>>,
}

impl PathTable {
    pub fn eval(&self, t: f64, corner: usize, mode: Comparison) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeOutOfRange(t));
        }
        let m = self
            .modes
            .iter()
            .position(|&x| x == mode)
            .ok_or_else(|| Error::InvalidParameter(format!("{mode:?} mode not tabulated")))?;
        let width = self.nodes.len();
        let row = &self.values[m][corner * width..(corner + 1) * width];
        let seg = self.nodes[1..].partition_point(|&x| x < t).min(width - 2);
        let slope = (row[seg + 1] - row[seg]) / (self.nodes[seg + 1] - self.nodes[seg]);
        Ok(row[seg] + (t - self.nodes[seg]) * slope)
    }
}
