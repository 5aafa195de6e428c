//! Gaussian limit objects: Brownian bridges, the Brownian pillow (critical
//! values in dimension 2) and the bridge mixture built on the atoms of an
//! estimated spectral measure (per-sample p-values).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cells::{prefix_scan, CellMap};
use crate::error::{Error, Result};
use crate::estimator::SpectralPath;
use crate::rng::substream;
use crate::sample::{LowerSet, LowerSetFamily};
use crate::stationarity::{squared_integral, SizeCriticals};

/// Brownian bridge on `grid`: a random walk with `N(0, Δt)` increments,
/// pinned by `B(t) = W(t) − t·W(1)`.
pub fn simulate_bridge<R: Rng + ?Sized>(grid: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let mut out = Vec::with_capacity(grid.len());
    fill_bridge(grid, rng, &mut out);
    Ok(out)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
        return Err(Error::InvalidGrid("grid must start at 0 and end at 1".into()));
    }
    if grid.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn fill_bridge<R: Rng + ?Sized>(grid: &[f64], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let mut w = 0.0;
    for step in grid.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        w += z * (step[1] - step[0]).sqrt();
        out.push(w);
    }
    for (b, &t) in out.iter_mut().zip(grid) {
        *b -= t * w;
    }
    let last = out.len() - 1;
    out[last] = 0.0;
}

/// Independent bridges on a common grid.
#[derive(Debug, Clone)]
pub struct BridgePanel {
    pub grid: Vec<f64>,
    /// Row-major, one row of `grid.len()` values per draw.
    pub draws: Vec<f64>,
}

impl BridgePanel {
    /// Draw `r` uses the stream `(seed, r)`.
    pub fn simulate(grid: &[f64], replications: usize, seed: u64) -> Result<Self> {
        check_grid(grid)?;
        let draws = (0..replications)
            .into_par_iter()
            .map(|r| {
                let mut out = Vec::with_capacity(grid.len());
                fill_bridge(grid, &mut substream(seed, &[r as u64]), &mut out);
                out
            })
            .collect::<Vec<_>>()
            .concat();
        Ok(Self {
            grid: grid.to_vec(),
            draws,
        })
    }

    pub fn replications(&self) -> usize {
        self.draws.len() / self.grid.len()
    }

    pub fn draw(&self, r: usize) -> &[f64] {
        let w = self.grid.len();
        &self.draws[r * w..(r + 1) * w]
    }
}

/// Brownian pillow on the square grid `{i/N}²`.
#[derive(Debug, Clone)]
pub struct PillowDraw {
    pub grid: Vec<f64>,
    /// `values[i * grid.len() + j] = W(grid[i], grid[j])`.
    pub values: Vec<f64>,
}

fn grid_points(grid_step: f64) -> Result<usize> {
    if !(grid_step > 0.0 && grid_step <= 0.05) {
        return Err(Error::InvalidGrid(format!(
            "grid step {grid_step} outside (0, 0.05]"
        )));
    }
    Ok((1.0 / grid_step).round() as usize)
}

/// Pillow from a Brownian sheet built by cumulative sums of
/// `N(0, step²)` cell increments:
/// `W(s,t) = K(s,t) − s K(1,t) − t K(s,1) + st K(1,1)`.
pub fn simulate_pillow<R: Rng + ?Sized>(grid_step: f64, rng: &mut R) -> Result<PillowDraw> {
    let n = grid_points(grid_step)?;
    Ok(pillow_on(n, rng))
}

fn pillow_on<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PillowDraw {
    let w = n + 1;
    let step = 1.0 / n as f64;
    let mut sheet = vec![0.0; w * w];
    for i in 1..w {
        let mut row = 0.0;
        for j in 1..w {
            let z: f64 = rng.sample(StandardNormal);
            row += z * step;
            sheet[i * w + j] = sheet[(i - 1) * w + j] + row;
        }
    }
    let grid: Vec<f64> = (0..w).map(|i| i as f64 / n as f64).collect();
    let top = sheet[w * w - 1];
    let mut values = vec![0.0; w * w];
    for i in 1..n {
        let s = grid[i];
        for j in 1..n {
            let t = grid[j];
            values[i * w + j] = sheet[i * w + j] - s * sheet[n * w + j] - t * sheet[i * w + n]
                + s * t * top;
        }
    }
    PillowDraw { grid, values }
}

impl PillowDraw {
    /// `sup |W|`.
    pub fn ks(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup_s ∫_0^1 W(s,t)² dt`, trapezoidal in `t`.
    pub fn cm(&self) -> f64 {
        let w = self.grid.len();
        let dt = 1.0 / (w - 1) as f64;
        self.values
            .chunks_exact(w)
            .map(|row| {
                let inner: f64 = row[1..w - 1].iter().map(|v| v * v).sum();
                dt * (inner + 0.5 * (row[0] * row[0] + row[w - 1] * row[w - 1]))
            })
            .fold(0.0, f64::max)
    }
}

/// Monte Carlo draws of the two pillow functionals.
#[derive(Debug, Clone)]
pub struct PillowSample {
    pub grid_step: f64,
    pub seed: u64,
    /// Sorted ascending.
    pub ks: Vec<f64>,
    /// Sorted ascending.
    pub cm: Vec<f64>,
}

impl PillowSample {
    /// Draw `r` uses the stream `(seed, r)`.
    pub fn simulate(grid_step: f64, replications: usize, seed: u64) -> Result<Self> {
        let n = grid_points(grid_step)?;
        let (mut ks, mut cm): (Vec<f64>, Vec<f64>) = (0..replications)
            .into_par_iter()
            .map(|r| {
                let p = pillow_on(n, &mut substream(seed, &[r as u64]));
                (p.ks(), p.cm())
            })
            .unzip();
        ks.sort_by(f64::total_cmp);
        cm.sort_by(f64::total_cmp);
        Ok(Self {
            grid_step,
            seed,
            ks,
            cm,
        })
    }

    pub fn replications(&self) -> usize {
        self.ks.len()
    }

    pub fn p_values(&self, ks: f64, cm: f64) -> (f64, f64) {
        (upper_p_value(&self.ks, ks), upper_p_value(&self.cm, cm))
    }

    pub fn critical_table(&self, sizes: &[f64]) -> Result<CriticalTable> {
        let reps = self.replications();
        let mut sizes = sizes.to_vec();
        sizes.sort_by(f64::total_cmp);
        sizes.dedup();
        let entries = sizes
            .iter()
            .map(|&size| {
                if !(size > 0.0 && size < 1.0) {
                    return Err(Error::InvalidParameter(format!("nominal size {size} outside (0, 1)")));
                }
                if size * (reps as f64) < 10.0 {
                    return Err(Error::InsufficientReplications {
                        size,
                        replications: reps,
                    });
                }
                Ok(SizeCriticals {
                    size,
                    ks: quantile(&self.ks, 1.0 - size),
                    cm: quantile(&self.cm, 1.0 - size),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CriticalTable {
            grid_step: self.grid_step,
            replications: reps,
            seed: self.seed,
            entries,
        })
    }
}

/// `(1 + #{draws ≥ observed}) / (1 + #draws)` for ascending `sorted`.
pub fn upper_p_value(sorted: &[f64], observed: f64) -> f64 {
    let at_least = sorted.len() - sorted.partition_point(|&x| x < observed);
    (1 + at_least) as f64 / (1 + sorted.len()) as f64
}

/// Linear-interpolation quantile of ascending `sorted` (the usual
/// `(n−1)p` definition).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const MIN_PILLOW_REPLICATIONS: usize = 500;

/// Critical values of the pillow KS and CM functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalTable {
    pub grid_step: f64,
    pub replications: usize,
    pub seed: u64,
    /// Ascending in size.
    pub entries: Vec<SizeCriticals>,
}

impl CriticalTable {
    pub fn entry(&self, size: f64) -> Option<&SizeCriticals> {
        self.entries.iter().find(|e| e.size == size)
    }
}

pub fn pillow_critical_values(
    grid_step: f64,
    replications: usize,
    sizes: &[f64],
    seed: u64,
) -> Result<CriticalTable> {
    grid_points(grid_step)?;
    if replications < MIN_PILLOW_REPLICATIONS {
        return Err(Error::InvalidParameter(format!(
            "pillow critical values need at least {MIN_PILLOW_REPLICATIONS} replications, got {replications}"
        )));
    }
    if let Some(&size) = sizes.iter().find(|&&s| s * (replications as f64) < 10.0) {
        return Err(Error::InsufficientReplications { size, replications });
    }
    PillowSample::simulate(grid_step, replications, seed)?.critical_table(sizes)
}

/// One draw of the estimated limit process: a bridge per atom, on the path
/// nodes.
#[derive(Debug, Clone)]
pub struct LimitDraw {
    /// Row-major, `nodes.len()` values per atom.
    pub bridges: Vec<f64>,
}

/// `Ẑ_t(A) = Σ_{θ_l∈A} √p_l B_l(t) − Ŝ(A) Σ_l √p_l B_l(t)` on the atoms of
/// the estimated integrated spectral measure.
#[derive(Debug, Clone)]
pub struct EstimatedLimit {
    atoms: Vec<Vec<f64>>,
    masses: Vec<f64>,
    nodes: Vec<f64>,
}

impl EstimatedLimit {
    /// Atoms are the distinct selected angles; each carries mass `ÎS_1({θ})`.
    pub fn new(path: &SpectralPath) -> Result<Self> {
        let k = path.scheme().k as f64;
        let mut weighted: Vec<(&[f64], f64)> =
            path.atoms().map(|(j, a)| (a, path.weight(j) / k)).collect();
        if weighted.is_empty() {
            return Err(Error::NoAtoms);
        }
        weighted.sort_by(|a, b| {
            a.0.iter()
                .zip(b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut atoms: Vec<Vec<f64>> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (a, p) in weighted {
            match atoms.last() {
                Some(last) if last.as_slice() == a => *masses.last_mut().unwrap() += p,
                _ => {
                    atoms.push(a.to_vec());
                    masses.push(p);
                }
            }
        }
        Ok(Self {
            atoms,
            masses,
            nodes: path.nodes().to_vec(),
        })
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn mass(&self, set: &LowerSet) -> f64 {
        self.atoms
            .iter()
            .zip(&self.masses)
            .filter(|(a, _)| set.contains(a))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LimitDraw {
        let mut bridges = Vec::with_capacity(self.atoms.len() * self.nodes.len());
        let mut row = Vec::with_capacity(self.nodes.len());
        for _ in &self.atoms {
            fill_bridge(&self.nodes, rng, &mut row);
            bridges.extend_from_slice(&row);
        }
        LimitDraw { bridges }
    }

    /// `Ẑ` at node `i` for `set`, by direct summation.
    pub fn value(&self, draw: &LimitDraw, i: usize, set: &LowerSet) -> f64 {
        let w = self.nodes.len();
        let mut inside = 0.0;
        let mut all = 0.0;
        let mut p_in = 0.0;
        let mut p_all = 0.0;
        for (l, (a, &p)) in self.atoms.iter().zip(&self.masses).enumerate() {
            let term = p.sqrt() * draw.bridges[l * w + i];
            all += term;
            p_all += p;
            if set.contains(a) {
                inside += term;
                p_in += p;
            }
        }
        inside - p_in / p_all * all
    }

    /// `sup_{t,A} |Ẑ|` and `sup_A ∫ Ẑ² dt` over the family, for many draws.
    pub fn simulate(&self, family: &LowerSetFamily, replications: usize, seed: u64) -> Vec<(f64, f64)> {
        let sweep = LimitSweep::new(self, family);
        (0..replications)
            .into_par_iter()
            .map_init(
                || sweep.workspace(),
                |ws, r| sweep.functionals(self, &mut substream(seed, &[r as u64]), ws),
            )
            .collect()
    }
}

struct LimitSweep {
    maps: Vec<CellMap>,
    p_total: f64,
}

struct Workspace {
    cells: Vec<f64>,
    bridge: Vec<f64>,
    total: Vec<f64>,
    z: Vec<f64>,
}

impl LimitSweep {
    fn new(limit: &EstimatedLimit, family: &LowerSetFamily) -> Self {
        let maps = family
            .modes()
            .iter()
            .map(|&mode| CellMap::new(family, mode, limit.atoms.iter().map(Vec::as_slice)))
            .collect();
        Self {
            maps,
            p_total: limit.masses.iter().sum(),
        }
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            cells: Vec::new(),
            bridge: Vec::new(),
            total: Vec::new(),
            z: Vec::new(),
        }
    }

    fn functionals<R: Rng + ?Sized>(&self, limit: &EstimatedLimit, rng: &mut R, ws: &mut Workspace) -> (f64, f64) {
        let nodes = &limit.nodes;
        let w = nodes.len();
        // per-cell slot: node values then the mass
        let width = w + 1;
        let atoms = limit.atoms.len();
        let mut scaled = Vec::with_capacity(atoms * w);
        ws.total.clear();
        ws.total.resize(w, 0.0);
        for &p in &limit.masses {
            fill_bridge(nodes, rng, &mut ws.bridge);
            let sp = p.sqrt();
            for (tot, b) in ws.total.iter_mut().zip(&ws.bridge) {
                let v = sp * b;
                *tot += v;
                scaled.push(v);
            }
        }
        let mut ks: f64 = 0.0;
        let mut cm: f64 = 0.0;
        for map in &self.maps {
            ws.cells.clear();
            ws.cells.resize(map.cells() * width, 0.0);
            for (l, cell) in map.cell_of().iter().enumerate() {
                if let Some(c) = cell {
                    let slot = &mut ws.cells[c * width..(c + 1) * width];
                    for (s, v) in slot.iter_mut().zip(&scaled[l * w..(l + 1) * w]) {
                        *s += v;
                    }
                    slot[w] += limit.masses[l];
                }
            }
            prefix_scan(&mut ws.cells, map.shape(), width);
            for slot in ws.cells.chunks_exact(width) {
                let share = slot[w] / self.p_total;
                ws.z.clear();
                ws.z.extend(slot[..w].iter().zip(&ws.total).map(|(s, t)| s - share * t));
                ws.z[0] = 0.0;
                ws.z[w - 1] = 0.0;
                for v in &ws.z {
                    ks = ks.max(v.abs());
                }
                cm = cm.max(squared_integral(&ws.z, nodes));
            }
        }
        (ks, cm)
    }
}

/// Per-sample p-values of `(T_KS, T_CM)` against the estimated limit process.
pub fn estimated_limit_p_values(
    path: &SpectralPath,
    family: &LowerSetFamily,
    statistics: (f64, f64),
    replications: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let limit = EstimatedLimit::new(path)?;
    let draws = limit.simulate(family, replications, seed);
    let (mut ks, mut cm): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    ks.sort_by(f64::total_cmp);
    cm.sort_by(f64::total_cmp);
    Ok((upper_p_value(&ks, statistics.0), upper_p_value(&cm, statistics.1)))
}
