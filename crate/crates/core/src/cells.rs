//! Sweep machinery shared by the test statistics and the limit simulation.
//!
//! Every lower set of a [`LowerSetFamily`] is an orthant in corner-index
//! space: atom `l` lies in the set with corner multi-index `c` exactly when
//! its own cell index is componentwise `≤ c`. Summing per-atom payloads into
//! cells and taking an inclusive prefix sum along each axis therefore yields
//! the payload sum of every candidate set at once.

use std::ops::AddAssign;

use crate::sample::{Comparison, LowerSetFamily};

#[derive(Debug, Clone)]
pub(crate) struct CellMap {
    shape: Vec<usize>,
    /// Flat cell per atom; `None` when the atom lies in no set of this mode.
    cell_of: Vec<Option<usize>>,
}

impl CellMap {
    pub fn new<'a, I>(family: &LowerSetFamily, mode: Comparison, angles: I) -> Self
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let axes = family.axes();
        let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
        let cell_of = angles
            .into_iter()
            .map(|theta| {
                let mut flat = 0usize;
                for (axis, &v) in axes.iter().zip(theta) {
                    let pos = match mode {
                        Comparison::Closed => {
                            // the top corner (1) bounds nothing
                            axis.partition_point(|&y| y < v).min(axis.len() - 1)
                        }
                        Comparison::Open => {
                            let p = axis.partition_point(|&y| y <= v);
                            if p == axis.len() {
                                return None;
                            }
                            p
                        }
                    };
                    flat = flat * axis.len() + pos;
                }
                Some(flat)
            })
            .collect();
        Self { shape, cell_of }
    }

    pub fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn cell_of(&self) -> &[Option<usize>] {
        &self.cell_of
    }
}

/// Inclusive prefix sum over a row-major cell array whose cells hold
/// `width` consecutive values each.
pub(crate) fn prefix_scan<T: Copy + AddAssign>(data: &mut [T], shape: &[usize], width: usize) {
    for axis in 0..shape.len() {
        let inner = shape[axis + 1..].iter().product::<usize>() * width;
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        for o in 0..outer {
            let base = o * len * inner;
            for i in 1..len {
                let start = base + (i - 1) * inner;
                let (prev, cur) = data[start..start + 2 * inner].split_at_mut(inner);
                for (c, p) in cur.iter_mut().zip(prev.iter()) {
                    *c += *p;
                }
            }
        }
    }
}
