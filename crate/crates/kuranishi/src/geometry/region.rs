//! Finite unions of rational boxes with open, closed or half-open sides.
//! Periodic axes have period 1 and are stored canonically inside [0,1).

use crate::linalg::{floor_i64, qi, Q};
use num::{One, Signed, Zero};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("periodicity mismatch")]
    Periodicity,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Q,
    pub hi: Q,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn open(lo: Q, hi: Q) -> Self {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn closed(lo: Q, hi: Q) -> Self {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn point(x: Q) -> Self {
        Interval { lo: x.clone(), hi: x, lo_closed: true, hi_closed: true }
    }

    pub fn is_empty(&self) -> bool {
        match self.lo.cmp(&self.hi) {
            Ordering::Greater => true,
            Ordering::Equal => !(self.lo_closed && self.hi_closed),
            Ordering::Less => false,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi && !self.is_empty()
    }

    pub fn len(&self) -> Q {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Q) -> bool {
        let lo_ok = match self.lo.cmp(x) {
            Ordering::Less => true,
            Ordering::Equal => self.lo_closed,
            Ordering::Greater => false,
        };
        let hi_ok = match x.cmp(&self.hi) {
            Ordering::Less => true,
            Ordering::Equal => self.hi_closed,
            Ordering::Greater => false,
        };
        lo_ok && hi_ok
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.cmp(&o.lo) {
            Ordering::Greater => (self.lo.clone(), self.lo_closed),
            Ordering::Less => (o.lo.clone(), o.lo_closed),
            Ordering::Equal => (self.lo.clone(), self.lo_closed && o.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.cmp(&o.hi) {
            Ordering::Less => (self.hi.clone(), self.hi_closed),
            Ordering::Greater => (o.hi.clone(), o.hi_closed),
            Ordering::Equal => (self.hi.clone(), self.hi_closed && o.hi_closed),
        };
        Interval { lo, hi, lo_closed, hi_closed }
    }

    /// self ⊆ o (self assumed nonempty)
    pub fn subset_of(&self, o: &Interval) -> bool {
        let lo_ok = match o.lo.cmp(&self.lo) {
            Ordering::Less => true,
            Ordering::Equal => o.lo_closed || !self.lo_closed,
            Ordering::Greater => false,
        };
        let hi_ok = match self.hi.cmp(&o.hi) {
            Ordering::Less => true,
            Ordering::Equal => o.hi_closed || !self.hi_closed,
            Ordering::Greater => false,
        };
        lo_ok && hi_ok
    }

    /// Part of self strictly below o.
    pub fn below(&self, o: &Interval) -> Interval {
        self.intersect(&Interval { lo: self.lo.clone(), lo_closed: self.lo_closed, hi: o.lo.clone(), hi_closed: !o.lo_closed })
    }

    /// Part of self strictly above o.
    pub fn above(&self, o: &Interval) -> Interval {
        self.intersect(&Interval { lo: o.hi.clone(), lo_closed: !o.hi_closed, hi: self.hi.clone(), hi_closed: self.hi_closed })
    }

    /// Union when it is an interval.
    pub fn merge(&self, o: &Interval) -> Option<Interval> {
        let touching = !self.intersect(o).is_empty()
            || (self.hi == o.lo && (self.hi_closed || o.lo_closed))
            || (o.hi == self.lo && (o.hi_closed || self.lo_closed));
        if !touching {
            return None;
        }
        let (lo, lo_closed) = match self.lo.cmp(&o.lo) {
            Ordering::Less => (self.lo.clone(), self.lo_closed),
            Ordering::Greater => (o.lo.clone(), o.lo_closed),
            Ordering::Equal => (self.lo.clone(), self.lo_closed || o.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.cmp(&o.hi) {
            Ordering::Greater => (self.hi.clone(), self.hi_closed),
            Ordering::Less => (o.hi.clone(), o.hi_closed),
            Ordering::Equal => (self.hi.clone(), self.hi_closed || o.hi_closed),
        };
        Some(Interval { lo, hi, lo_closed, hi_closed })
    }

    pub fn closure(&self) -> Interval {
        Interval::closed(self.lo.clone(), self.hi.clone())
    }

    /// Gap between the closures (0 when they meet).
    pub fn gap(&self, o: &Interval) -> Q {
        if o.lo > self.hi {
            &o.lo - &self.hi
        } else if self.lo > o.hi {
            &self.lo - &o.hi
        } else {
            Q::zero()
        }
    }

    pub fn shifted(&self, s: &Q) -> Interval {
        Interval { lo: &self.lo + s, hi: &self.hi + s, ..self.clone() }
    }

    fn key(&self) -> (Q, bool, Q, bool) {
        (self.lo.clone(), !self.lo_closed, self.hi.clone(), self.hi_closed)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return write!(f, "{{{}}}", self.lo);
        }
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

pub type BoxN = Vec<Interval>;

pub fn box_is_empty(b: &BoxN) -> bool {
    b.iter().any(|i| i.is_empty())
}

pub fn box_intersect(a: &BoxN, b: &BoxN) -> BoxN {
    a.iter().zip(b).map(|(x, y)| x.intersect(y)).collect()
}

pub fn box_subset(a: &BoxN, b: &BoxN) -> bool {
    a.iter().zip(b).all(|(x, y)| x.subset_of(y))
}

/// a \ b as a list of disjoint boxes.
pub fn box_difference(a: &BoxN, b: &BoxN) -> Vec<BoxN> {
    let inter = box_intersect(a, b);
    if box_is_empty(&inter) {
        return vec![a.clone()];
    }
    let mut out = Vec::new();
    let mut cur = a.clone();
    for i in 0..a.len() {
        let lo = cur[i].below(&b[i]);
        if !lo.is_empty() {
            let mut p = cur.clone();
            p[i] = lo;
            out.push(p);
        }
        let hi = cur[i].above(&b[i]);
        if !hi.is_empty() {
            let mut p = cur.clone();
            p[i] = hi;
            out.push(p);
        }
        cur[i] = cur[i].intersect(&b[i]);
    }
    out
}

/// A finite union of boxes in R^dim, with some axes periodic (period 1).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Region {
    pub dim: usize,
    pub periodic: Vec<bool>,
    pub boxes: Vec<BoxN>,
}

/// Open chart domains are plain regions.
pub type Domain = Region;

fn unit() -> Q {
    Q::one()
}

/// Canonical pieces in [0,1) of an interval on a periodic axis.
fn wrap_interval(iv: &Interval) -> Vec<Interval> {
    if iv.is_empty() {
        return vec![];
    }
    let one = unit();
    let len = iv.len();
    if len > one || (len == one && (iv.lo_closed || iv.hi_closed)) {
        return vec![Interval { lo: Q::zero(), hi: one, lo_closed: true, hi_closed: false }];
    }
    let k = qi(floor_i64(&iv.lo));
    let s = iv.shifted(&-k);
    if len == one {
        // open interval of length one: the circle minus one point
        let p = s.lo.clone();
        if p.is_zero() {
            return vec![Interval::open(Q::zero(), one)];
        }
        return vec![
            Interval { lo: Q::zero(), hi: p.clone(), lo_closed: true, hi_closed: false },
            Interval::open(p, one),
        ];
    }
    if s.hi < one || (s.hi == one && !s.hi_closed) {
        return vec![s];
    }
    let first = Interval { lo: s.lo.clone(), hi: one.clone(), lo_closed: s.lo_closed, hi_closed: false };
    let second = Interval { lo: Q::zero(), hi: &s.hi - &one, lo_closed: true, hi_closed: s.hi_closed };
    [first, second].into_iter().filter(|x| !x.is_empty()).collect()
}

impl Region {
    pub fn empty(dim: usize, periodic: Vec<bool>) -> Self {
        assert_eq!(periodic.len(), dim);
        Region { dim, periodic, boxes: vec![] }
    }

    /// Region from raw boxes; periodic axes are wrapped into [0,1).
    pub fn new(dim: usize, periodic: Vec<bool>, raw: Vec<BoxN>) -> Self {
        assert_eq!(periodic.len(), dim);
        let mut boxes = Vec::new();
        for b in raw {
            assert_eq!(b.len(), dim, "box dimension");
            if box_is_empty(&b) {
                continue;
            }
            let mut pieces: Vec<BoxN> = vec![vec![]];
            for (i, iv) in b.iter().enumerate() {
                let parts = if periodic[i] { wrap_interval(iv) } else { vec![iv.clone()] };
                let mut next = Vec::new();
                for p in &pieces {
                    for part in &parts {
                        let mut q = p.clone();
                        q.push(part.clone());
                        next.push(q);
                    }
                }
                pieces = next;
            }
            boxes.extend(pieces);
        }
        let mut r = Region { dim, periodic, boxes };
        r.normalize();
        r
    }

    pub fn from_box(periodic: Vec<bool>, b: BoxN) -> Self {
        Region::new(b.len(), periodic, vec![b])
    }

    /// Open box with the given bounds, no periodic axes.
    pub fn open_box(bounds: &[(Q, Q)]) -> Self {
        let b: BoxN = bounds.iter().map(|(l, h)| Interval::open(l.clone(), h.clone())).collect();
        Region::new(bounds.len(), vec![false; bounds.len()], vec![b])
    }

    /// The single point of R^0.
    pub fn point0() -> Self {
        Region { dim: 0, periodic: vec![], boxes: vec![vec![]] }
    }

    pub fn point(periodic: Vec<bool>, x: &[Q]) -> Self {
        Region::new(x.len(), periodic, vec![x.iter().map(|v| Interval::point(v.clone())).collect()])
    }

    pub fn with_boxes(&self, boxes: Vec<BoxN>) -> Self {
        Region::new(self.dim, self.periodic.clone(), boxes)
    }

    pub fn empty_like(&self) -> Self {
        Region::empty(self.dim, self.periodic.clone())
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    fn check(&self, o: &Region) -> Result<(), GeometryError> {
        if self.dim != o.dim {
            return Err(GeometryError::Dimension(self.dim, o.dim));
        }
        if self.periodic != o.periodic {
            return Err(GeometryError::Periodicity);
        }
        Ok(())
    }

    /// Drops empty and covered boxes, merges boxes that differ along a
    /// single axis with touching intervals, sorts.
    pub fn normalize(&mut self) {
        self.boxes.retain(|b| !box_is_empty(b));
        loop {
            let mut changed = false;
            // drop covered
            let mut keep: Vec<BoxN> = Vec::new();
            let mut boxes = std::mem::take(&mut self.boxes);
            boxes.sort_by(|a, b| box_key(a).cmp(&box_key(b)));
            boxes.dedup();
            for (i, b) in boxes.iter().enumerate() {
                let covered = boxes.iter().enumerate().any(|(j, c)| j != i && box_subset(b, c) && (!box_subset(c, b) || j < i));
                if !covered {
                    keep.push(b.clone());
                } else {
                    changed = true;
                }
            }
            // merge pairs
            let mut merged = vec![false; keep.len()];
            let mut out = Vec::new();
            for i in 0..keep.len() {
                if merged[i] {
                    continue;
                }
                let mut cur = keep[i].clone();
                for j in i + 1..keep.len() {
                    if merged[j] {
                        continue;
                    }
                    if let Some(m) = try_merge(&cur, &keep[j]) {
                        cur = m;
                        merged[j] = true;
                        changed = true;
                    }
                }
                out.push(cur);
            }
            self.boxes = out;
            if !changed {
                break;
            }
        }
        self.boxes.sort_by(|a, b| box_key(a).cmp(&box_key(b)));
    }

    pub fn union(&self, o: &Region) -> Region {
        self.check(o).expect("union of incompatible regions");
        let mut r = self.clone();
        r.boxes.extend(o.boxes.iter().cloned());
        r.normalize();
        r
    }

    pub fn union_all<'a>(dim: usize, periodic: Vec<bool>, it: impl IntoIterator<Item = &'a Region>) -> Region {
        let mut r = Region::empty(dim, periodic);
        for x in it {
            r.check(x).expect("union of incompatible regions");
            r.boxes.extend(x.boxes.iter().cloned());
        }
        r.normalize();
        r
    }

    pub fn intersect(&self, o: &Region) -> Region {
        self.check(o).expect("intersection of incompatible regions");
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &o.boxes {
                let c = box_intersect(a, b);
                if !box_is_empty(&c) {
                    boxes.push(c);
                }
            }
        }
        let mut r = Region { dim: self.dim, periodic: self.periodic.clone(), boxes };
        r.normalize();
        r
    }

    pub fn difference(&self, o: &Region) -> Region {
        self.check(o).expect("difference of incompatible regions");
        let mut cur = self.boxes.clone();
        for b in &o.boxes {
            let mut next = Vec::new();
            for a in &cur {
                next.extend(box_difference(a, b));
            }
            cur = next;
            if cur.len() > 64 {
                let mut r = Region { dim: self.dim, periodic: self.periodic.clone(), boxes: cur };
                r.normalize();
                cur = r.boxes;
            }
        }
        let mut r = Region { dim: self.dim, periodic: self.periodic.clone(), boxes: cur };
        r.normalize();
        r
    }

    /// Checked variant of the three set operations.
    pub fn set_op(&self, o: &Region, op: SetOp) -> Result<Region, GeometryError> {
        self.check(o)?;
        Ok(match op {
            SetOp::Union => self.union(o),
            SetOp::Intersection => self.intersect(o),
            SetOp::Difference => self.difference(o),
            SetOp::DifferenceClosure => self.difference(&o.closure()),
        })
    }

    pub fn is_subset(&self, o: &Region) -> bool {
        self.difference(o).is_empty()
    }

    pub fn set_eq(&self, o: &Region) -> bool {
        self.is_subset(o) && o.is_subset(self)
    }

    pub fn closure(&self) -> Region {
        let mut boxes = Vec::new();
        for b in &self.boxes {
            let cb: BoxN = b.iter().map(|i| i.closure()).collect();
            boxes.push(cb);
        }
        // closed endpoints at 1 on periodic axes are wrapped by `new`
        Region::new(self.dim, self.periodic.clone(), boxes)
    }

    fn reduce_point(&self, x: &[Q]) -> Vec<Q> {
        x.iter()
            .enumerate()
            .map(|(i, v)| if self.periodic[i] { v - qi(floor_i64(v)) } else { v.clone() })
            .collect()
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        assert_eq!(x.len(), self.dim);
        let y = self.reduce_point(x);
        self.boxes.iter().any(|b| b.iter().zip(&y).all(|(iv, v)| iv.contains(v)))
    }

    fn axis_gap(&self, axis: usize, a: &Interval, b: &Interval) -> Q {
        if !self.periodic[axis] {
            return a.gap(b);
        }
        let mut best = a.gap(b);
        for s in [qi(-1), qi(1)] {
            let g = a.gap(&b.shifted(&s));
            if g < best {
                best = g;
            }
        }
        best
    }

    fn point_axis_gap(&self, axis: usize, x: &Q, b: &Interval) -> Q {
        self.axis_gap(axis, &Interval::point(x.clone()), b)
    }

    /// L∞ distance (periodic on periodic axes) from a point; `None` for ∅.
    pub fn distance(&self, x: &[Q]) -> Option<Q> {
        let y = self.reduce_point(x);
        self.boxes
            .iter()
            .map(|b| {
                b.iter().enumerate().map(|(i, iv)| self.point_axis_gap(i, &y[i], iv)).max().unwrap_or_else(Q::zero)
            })
            .min()
    }

    /// Squared Euclidean distance (periodic) from a point; `None` for ∅.
    pub fn distance_sq_euclid(&self, x: &[Q]) -> Option<Q> {
        let y = self.reduce_point(x);
        self.boxes
            .iter()
            .map(|b| {
                b.iter()
                    .enumerate()
                    .map(|(i, iv)| {
                        let g = self.point_axis_gap(i, &y[i], iv);
                        &g * &g
                    })
                    .fold(Q::zero(), |a, b| a + b)
            })
            .min()
    }

    pub fn distance_euclid(&self, x: &[Q]) -> Option<f64> {
        self.distance_sq_euclid(x).map(|d| crate::linalg::to_f64(&d).sqrt())
    }

    /// L∞ distance between two regions (inf over the closures).
    pub fn distance_to(&self, o: &Region) -> Option<Q> {
        self.check(o).expect("distance between incompatible regions");
        let mut best: Option<Q> = None;
        for a in &self.boxes {
            for b in &o.boxes {
                let d = a
                    .iter()
                    .zip(b)
                    .enumerate()
                    .map(|(i, (x, y))| self.axis_gap(i, x, y))
                    .max()
                    .unwrap_or_else(Q::zero);
                if best.as_ref().map_or(true, |c| d < *c) {
                    best = Some(d);
                }
            }
        }
        best
    }

    /// Open L∞ ε-neighbourhood.
    pub fn dilate(&self, eps: &Q) -> Region {
        assert!(!eps.is_negative());
        if eps.is_zero() {
            return self.clone();
        }
        let boxes = self
            .boxes
            .iter()
            .map(|b| b.iter().map(|iv| Interval::open(&iv.lo - eps, &iv.hi + eps)).collect())
            .collect();
        Region::new(self.dim, self.periodic.clone(), boxes)
    }

    /// Closed L∞ ε-neighbourhood of the closure.
    pub fn dilate_closed(&self, eps: &Q) -> Region {
        let boxes = self
            .boxes
            .iter()
            .map(|b| b.iter().map(|iv| Interval::closed(&iv.lo - eps, &iv.hi + eps)).collect())
            .collect();
        Region::new(self.dim, self.periodic.clone(), boxes)
    }

    /// `{x ∈ self : d(x, universe \ self) > t}`.
    pub fn erode_within(&self, universe: &Region, t: &Q) -> Region {
        let outside = universe.difference(self);
        if outside.is_empty() {
            return self.clone();
        }
        self.difference(&outside.closure().dilate_closed(t))
    }

    /// Bounding values per axis of the closure (None for ∅).
    pub fn bounds(&self) -> Option<Vec<(Q, Q)>> {
        if self.is_empty() {
            return None;
        }
        let mut out: Vec<(Q, Q)> = self.boxes[0].iter().map(|i| (i.lo.clone(), i.hi.clone())).collect();
        for b in &self.boxes[1..] {
            for (k, iv) in b.iter().enumerate() {
                if iv.lo < out[k].0 {
                    out[k].0 = iv.lo.clone();
                }
                if iv.hi > out[k].1 {
                    out[k].1 = iv.hi.clone();
                }
            }
        }
        Some(out)
    }

    /// Every breakpoint (interval endpoint) per axis.
    pub fn endpoints(&self) -> Vec<Vec<Q>> {
        let mut out = vec![Vec::new(); self.dim];
        for b in &self.boxes {
            for (k, iv) in b.iter().enumerate() {
                out[k].push(iv.lo.clone());
                out[k].push(iv.hi.clone());
            }
        }
        out
    }

    /// Region in the product space `self × other`.
    pub fn product(&self, o: &Region) -> Region {
        let mut per = self.periodic.clone();
        per.extend(o.periodic.iter().cloned());
        let mut boxes = Vec::new();
        for a in &self.boxes {
            for b in &o.boxes {
                let mut c = a.clone();
                c.extend(b.iter().cloned());
                boxes.push(c);
            }
        }
        Region::new(self.dim + o.dim, per, boxes)
    }

    /// Restricts to the slice `x_axis = value` (keeping the axis).
    pub fn slice(&self, axis: usize, value: &Q) -> Region {
        let v = if self.periodic[axis] { value - qi(floor_i64(value)) } else { value.clone() };
        let boxes = self
            .boxes
            .iter()
            .filter(|b| b[axis].contains(&v))
            .map(|b| {
                let mut c = b.clone();
                c[axis] = Interval::point(v.clone());
                c
            })
            .collect();
        Region::new(self.dim, self.periodic.clone(), boxes)
    }

    /// Some point of the region (box midpoints), for witnesses.
    pub fn witness_point(&self) -> Option<Vec<Q>> {
        let b = self.boxes.first()?;
        Some(b.iter().map(|iv| (&iv.lo + &iv.hi) / qi(2)).collect())
    }

    /// Is the closure compact inside `o` (closure(self) ⊆ o)?
    pub fn precompact_in(&self, o: &Region) -> bool {
        self.closure().is_subset(o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
    DifferenceClosure,
}

fn box_key(b: &BoxN) -> Vec<(Q, bool, Q, bool)> {
    b.iter().map(|i| i.key()).collect()
}

fn try_merge(a: &BoxN, b: &BoxN) -> Option<BoxN> {
    let mut diff = None;
    for i in 0..a.len() {
        if a[i] != b[i] {
            if diff.is_some() {
                return None;
            }
            diff = Some(i);
        }
    }
    let i = diff?;
    let m = a[i].merge(&b[i])?;
    let mut c = a.clone();
    c[i] = m;
    Some(c)
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.boxes.is_empty() {
            return f.write_str("empty");
        }
        let parts: Vec<String> = self
            .boxes
            .iter()
            .map(|b| {
                if b.is_empty() {
                    "pt".to_string()
                } else {
                    b.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("x")
                }
            })
            .collect();
        f.write_str(&parts.join(" | "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;

    fn circ(lo: Q, hi: Q) -> Region {
        Region::new(1, vec![true], vec![vec![Interval::open(lo, hi)]])
    }

    #[test]
    fn periodic_intersection_examples() {
        let a = circ(q(0, 1), q(2, 3)).intersect(&circ(q(1, 3), q(1, 1)));
        assert!(a.set_eq(&circ(q(1, 3), q(2, 3))));
        let b = circ(q(2, 3), q(4, 3)).intersect(&circ(q(0, 1), q(2, 3)));
        assert!(b.set_eq(&circ(q(0, 1), q(1, 3))), "{b}");
    }

    #[test]
    fn minus_closure_is_empty() {
        let a = Region::open_box(&[(q(0, 1), q(1, 1)), (q(-1, 1), q(2, 1))]);
        assert!(a.difference(&a.closure()).is_empty());
        assert!(!a.closure().difference(&a).is_empty());
    }

    #[test]
    fn distance_examples() {
        let s = Region::open_box(&[(q(0, 1), q(1, 1))]);
        assert_eq!(s.distance(&[q(1, 2)]), Some(q(0, 1)));
        assert_eq!(circ(q(1, 3), q(2, 3)).distance(&[q(0, 1)]), Some(q(1, 3)));
        let u = Region::open_box(&[(q(0, 1), q(1, 1)), (q(0, 1), q(1, 1))]);
        assert_eq!(u.distance(&[q(0, 1), q(2, 1)]), Some(q(1, 1)));
        assert_eq!(u.distance_sq_euclid(&[q(0, 1), q(2, 1)]), Some(q(1, 1)));
        assert_eq!(Region::empty(1, vec![false]).distance(&[q(0, 1)]), None);
    }

    #[test]
    fn neighbourhood_examples() {
        let p = Region::point(vec![false], &[q(0, 1)]);
        assert!(p.dilate(&q(1, 1)).set_eq(&Region::open_box(&[(q(-1, 1), q(1, 1))])));
        let c = circ(q(1, 3), q(2, 3)).dilate(&q(1, 3));
        assert!(c.set_eq(&circ(q(0, 1), q(1, 1))), "{c}");
        assert!(!c.contains(&[q(0, 1)]));
        assert!(Region::empty(1, vec![false]).dilate(&q(1, 1)).is_empty());
    }

    #[test]
    fn closure_wraps_endpoint_one() {
        let c = circ(q(1, 2), q(1, 1)).closure();
        assert!(c.contains(&[q(0, 1)]));
        assert!(c.contains(&[q(1, 2)]));
        assert!(!c.contains(&[q(1, 4)]));
    }

    #[test]
    fn erosion_of_arc() {
        let x = Region::new(1, vec![true], vec![vec![Interval { lo: q(0, 1), hi: q(1, 1), lo_closed: true, hi_closed: false }]]);
        let f = circ(q(0, 1), q(2, 3));
        let e = f.erode_within(&x, &q(1, 6));
        assert!(e.set_eq(&circ(q(1, 6), q(1, 2))), "{e}");
    }
}
