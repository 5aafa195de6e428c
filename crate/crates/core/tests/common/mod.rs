//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library's estimator or statistics code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const T_GRID: usize = 1_000_000;
pub const Y_GRID: usize = 10_000;

/// Heavy-tailed positive bivariate rows.
pub fn random_rows(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..2)
                .map(|_| {
                    let u: f64 = rng.random_range(1e-9..1.0);
                    (-u.ln()).powf(-0.5)
                })
                .collect()
        })
        .collect()
}

pub fn first_angle(x: &[f64]) -> f64 {
    x[0] / (x[0] * x[0] + x[1] * x[1]).sqrt()
}

/// Indices of the k largest radii in `rows`, ties to the smaller index,
/// found by counting for each point how many others beat it.
pub fn select_top(rows: &[Vec<f64>], k: usize) -> Vec<usize> {
    let r: Vec<f64> = rows.iter().map(|x| (x[0] * x[0] + x[1] * x[1]).sqrt()).collect();
    (0..rows.len())
        .filter(|&i| {
            let beaten_by = (0..rows.len())
                .filter(|&j| r[j] > r[i] || (r[j] == r[i] && j < i))
                .count();
            beaten_by < k && r[i] > 0.0
        })
        .collect()
}

/// Smallest gap between distinct first angles of all rows, including the
/// distance to 0 and 1.
pub fn min_angle_gap(rows: &[Vec<f64>]) -> f64 {
    let mut a: Vec<f64> = rows.iter().map(|x| first_angle(x)).chain([0.0, 1.0]).collect();
    a.sort_by(f64::total_cmp);
    a.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// `(T_KS, T_CM)` for bivariate rows with `n = J·b`, `J | T_GRID`: sets
/// `{θ₁ ≤ l/Y_GRID}`, the path on the t-grid `i/T_GRID`, the integral by
/// the trapezoidal rule.
pub fn oracle_statistics(rows: &[Vec<f64>], b: usize, k: usize) -> (f64, f64) {
    let n = rows.len();
    assert_eq!(n % b, 0);
    let blocks = n / b;
    assert_eq!(T_GRID % blocks, 0);
    let atoms: Vec<Vec<f64>> = rows
        .chunks(b)
        .map(|block| {
            select_top(block, k)
                .into_iter()
                .map(|i| first_angle(&block[i]))
                .collect()
        })
        .collect();

    let mut signatures: Vec<Vec<usize>> = (0..=Y_GRID)
        .map(|l| {
            let y = l as f64 / Y_GRID as f64;
            atoms.iter().map(|a| a.iter().filter(|&&v| v <= y).count()).collect()
        })
        .collect();
    signatures.sort();
    signatures.dedup();

    let scale = (k * n) as f64 / b as f64;
    let steps = T_GRID / blocks;
    let (mut ks, mut cm) = (0.0f64, 0.0f64);
    for counts in &signatures {
        let m: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
        let mut prefix = vec![0.0];
        for v in &m {
            prefix.push(prefix.last().unwrap() + v / blocks as f64);
        }
        let total = prefix[blocks];
        let d_at = |i: usize| {
            let t = i as f64 / T_GRID as f64;
            let (q, r) = (i / steps, i % steps);
            let is = if q == blocks {
                total
            } else {
                prefix[q] + m[q] * r as f64 / T_GRID as f64
            };
            is - t * total
        };
        let mut integral = 0.0;
        let mut prev = d_at(0);
        ks = ks.max(prev.abs());
        for i in 1..=T_GRID {
            let d = d_at(i);
            ks = ks.max(d.abs());
            integral += 0.5 * (prev * prev + d * d);
            prev = d;
        }
        cm = cm.max(integral / T_GRID as f64);
    }
    (scale.sqrt() * ks, scale * cm)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Block counts `J` dividing `T_GRID`.
pub const BLOCK_COUNTS: [usize; 8] = [1, 2, 4, 5, 8, 10, 16, 20];

/// A random oracle instance: `(rows, b, k)` with `n = J·b ≤ 24`, `J ≥ 2`, `k ≤ 3`,
/// `k < b`, and angle gaps of at least 2e-4.
pub fn oracle_instance(rng: &mut impl Rng) -> (Vec<Vec<f64>>, usize, usize) {
    loop {
        let b = rng.random_range(2..=8usize);
        let choices: Vec<usize> = BLOCK_COUNTS.iter().copied().filter(|&j| j >= 2 && j * b <= 24).collect();
        let blocks = choices[rng.random_range(0..choices.len())];
        let k = rng.random_range(1..=3usize.min(b - 1));
        let rows = random_rows(rng, blocks * b);
        if min_angle_gap(&rows) >= 2e-4 {
            return (rows, b, k);
        }
    }
}

/// Relative error with the denominator floored at 1e-6, so a 1e-6 tolerance
/// is absolute 1e-12 near zero, where the oracle's sums leave ~1e-16 residue.
pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-6)
}
