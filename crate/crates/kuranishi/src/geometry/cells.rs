//! The cell complex cut out by a finite set of breakpoints per axis.
//!
//! Along an axis with breakpoints `b_0 < … < b_{m-1}` the cells are the
//! points `{b_j}` and the open gaps between them. Every region whose box
//! endpoints are breakpoints is a union of product cells, so set questions
//! about such regions become questions about boolean arrays.

use super::region::{BoxN, Interval, Region};
use crate::linalg::{floor_i64, qi, Q};
use num::{One, Zero};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct CellGrid {
    pub dim: usize,
    pub periodic: Vec<bool>,
    pub breaks: Vec<Vec<Q>>,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl CellGrid {
    /// Grid whose breakpoints include every endpoint of every region.
    pub fn new(dim: usize, periodic: Vec<bool>, regions: &[&Region]) -> Self {
        let mut breaks: Vec<Vec<Q>> = vec![Vec::new(); dim];
        for r in regions {
            assert_eq!(r.dim, dim);
            for (k, e) in r.endpoints().into_iter().enumerate() {
                breaks[k].extend(e);
            }
        }
        Self::from_breaks(periodic, breaks)
    }

    pub fn from_breaks(periodic: Vec<bool>, mut breaks: Vec<Vec<Q>>) -> Self {
        let dim = periodic.len();
        for k in 0..dim {
            if periodic[k] {
                let b: Vec<Q> = breaks[k].iter().map(|v| v - qi(floor_i64(v))).collect();
                breaks[k] = b;
                breaks[k].push(Q::zero());
            }
            breaks[k].sort();
            breaks[k].dedup();
        }
        let counts: Vec<usize> = (0..dim)
            .map(|k| if periodic[k] { 2 * breaks[k].len() } else { 2 * breaks[k].len() + 1 })
            .collect();
        let mut strides = vec![1; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        CellGrid { dim, periodic, breaks, counts, strides }
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(a, b)| a * b).sum()
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for k in 0..self.dim {
            out[k] = idx / self.strides[k];
            idx %= self.strides[k];
        }
        out
    }

    fn is_point_cell(&self, k: usize, i: usize) -> bool {
        if self.periodic[k] {
            i % 2 == 0
        } else {
            i % 2 == 1
        }
    }

    fn break_index(&self, k: usize, v: &Q) -> usize {
        self.breaks[k].binary_search(v).unwrap_or_else(|_| panic!("{v} is not a breakpoint on axis {k}"))
    }

    /// Inclusive range of axis cells covered by an interval.
    fn axis_range(&self, k: usize, iv: &Interval) -> Option<(usize, usize)> {
        if iv.is_empty() {
            return None;
        }
        let (s, e) = if self.periodic[k] {
            let j = self.break_index(k, &iv.lo);
            let s = if iv.lo_closed { 2 * j } else { 2 * j + 1 };
            let e = if iv.hi == Q::one() {
                self.counts[k] - 1
            } else {
                let j2 = self.break_index(k, &iv.hi);
                if iv.hi_closed {
                    2 * j2
                } else {
                    2 * j2 - 1
                }
            };
            (s, e)
        } else {
            let j = self.break_index(k, &iv.lo);
            let s = if iv.lo_closed { 2 * j + 1 } else { 2 * j + 2 };
            let j2 = self.break_index(k, &iv.hi);
            let e = if iv.hi_closed { 2 * j2 + 1 } else { 2 * j2 };
            (s, e)
        };
        if s > e {
            None
        } else {
            Some((s, e))
        }
    }

    /// Interval of a single axis cell.
    pub fn axis_cell(&self, k: usize, i: usize) -> Interval {
        let b = &self.breaks[k];
        if self.periodic[k] {
            let j = i / 2;
            if i % 2 == 0 {
                Interval::point(b[j].clone())
            } else {
                let hi = if j + 1 < b.len() { b[j + 1].clone() } else { Q::one() };
                Interval::open(b[j].clone(), hi)
            }
        } else {
            assert!(i > 0 && i + 1 < self.counts[k], "unbounded cell on axis {k}");
            if i % 2 == 1 {
                Interval::point(b[i / 2].clone())
            } else {
                Interval::open(b[i / 2 - 1].clone(), b[i / 2].clone())
            }
        }
    }

    pub fn cell_box(&self, idx: usize) -> BoxN {
        let m = self.multi(idx);
        (0..self.dim).map(|k| self.axis_cell(k, m[k])).collect()
    }

    pub fn rasterize(&self, r: &Region) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        for b in &r.boxes {
            let ranges: Option<Vec<(usize, usize)>> = (0..self.dim).map(|k| self.axis_range(k, &b[k])).collect();
            let Some(ranges) = ranges else { continue };
            let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
            loop {
                out[self.index(&cur)] = true;
                let mut k = self.dim;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    if cur[k] < ranges[k].1 {
                        cur[k] += 1;
                        for j in k + 1..self.dim {
                            cur[j] = ranges[j].0;
                        }
                        k = usize::MAX;
                        break;
                    }
                }
                if k != usize::MAX {
                    break;
                }
            }
            if self.dim == 0 {
                out[0] = true;
            }
        }
        out
    }

    fn axis_neighbours(&self, k: usize, i: usize, up: bool) -> Vec<usize> {
        // up: cells whose closure contains cell i; otherwise cells in the closure of i
        let point = self.is_point_cell(k, i);
        if point != up {
            return vec![i];
        }
        let n = self.counts[k];
        if self.periodic[k] {
            let mut v = vec![(i + n - 1) % n, i, (i + 1) % n];
            v.sort();
            v.dedup();
            v
        } else {
            let mut v = vec![i];
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < n {
                v.push(i + 1);
            }
            v.sort();
            v
        }
    }

    fn product_of(&self, per_axis: Vec<Vec<usize>>) -> Vec<usize> {
        let mut out = vec![Vec::new()];
        for choices in per_axis {
            let mut next = Vec::new();
            for p in &out {
                for &c in &choices {
                    let mut q: Vec<usize> = p.clone();
                    q.push(c);
                    next.push(q);
                }
            }
            out = next;
        }
        out.iter().map(|m| self.index(m)).collect()
    }

    /// Cells whose closure contains the given cell.
    pub fn star(&self, idx: usize) -> Vec<usize> {
        let m = self.multi(idx);
        self.product_of((0..self.dim).map(|k| self.axis_neighbours(k, m[k], true)).collect())
    }

    /// Cells contained in the closure of the given cell.
    pub fn closure_cells(&self, idx: usize) -> Vec<usize> {
        let m = self.multi(idx);
        self.product_of((0..self.dim).map(|k| self.axis_neighbours(k, m[k], false)).collect())
    }

    /// Region made of the marked cells.
    pub fn to_region(&self, cells: &[bool]) -> Region {
        assert_eq!(cells.len(), self.len());
        if self.dim == 0 {
            return if cells[0] { Region::point0() } else { Region::empty(0, vec![]) };
        }
        let mut memo: HashMap<(usize, Vec<bool>), Vec<BoxN>> = HashMap::new();
        let boxes = self.build(0, cells.to_vec(), &mut memo);
        Region::new(self.dim, self.periodic.clone(), boxes)
    }

    fn build(&self, k: usize, slab: Vec<bool>, memo: &mut HashMap<(usize, Vec<bool>), Vec<BoxN>>) -> Vec<BoxN> {
        if let Some(v) = memo.get(&(k, slab.clone())) {
            return v.clone();
        }
        let n = self.counts[k];
        let inner = slab.len() / n;
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            let s = &slab[i * inner..(i + 1) * inner];
            if !s.iter().any(|&b| b) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < n && slab[(j + 1) * inner..(j + 2) * inner] == *s {
                j += 1;
            }
            let a = self.axis_cell(k, i);
            let b = self.axis_cell(k, j);
            let iv = Interval { lo: a.lo.clone(), lo_closed: a.lo_closed, hi: b.hi.clone(), hi_closed: b.hi_closed };
            if k + 1 == self.dim {
                out.push(vec![iv]);
            } else {
                for rest in self.build(k + 1, s.to_vec(), memo) {
                    let mut bx = vec![iv.clone()];
                    bx.extend(rest);
                    out.push(bx);
                }
            }
            i = j + 1;
        }
        memo.insert((k, slab), out.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;

    #[test]
    fn rasterize_round_trip() {
        let a = Region::open_box(&[(q(0, 1), q(1, 1)), (q(0, 1), q(1, 2))]);
        let b = Region::new(
            2,
            vec![false, false],
            vec![vec![Interval::closed(q(1, 2), q(2, 1)), Interval { lo: q(1, 4), hi: q(1, 1), lo_closed: false, hi_closed: true }]],
        );
        let u = a.union(&b);
        let g = CellGrid::new(2, vec![false, false], &[&a, &b]);
        let r = g.to_region(&g.rasterize(&u));
        assert!(r.set_eq(&u), "{r} vs {u}");
    }

    #[test]
    fn periodic_star_wraps() {
        let arc = Region::new(1, vec![true], vec![vec![Interval::open(q(1, 2), q(1, 1))]]);
        let g = CellGrid::new(1, vec![true], &[&arc]);
        // cells: {0}, (0,1/2), {1/2}, (1/2,1)
        assert_eq!(g.len(), 4);
        let s = g.star(0);
        assert_eq!(s, vec![0, 1, 3]);
        let r = g.to_region(&g.rasterize(&arc.closure()));
        assert!(r.set_eq(&arc.closure()));
    }
}
