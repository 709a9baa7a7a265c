//! Lattice sample clouds and fast exact membership for lattice points.

use super::region::Region;
use crate::linalg::{to_f64, Q};
use num::bigint::BigInt;
use num::{Integer, ToPrimitive};
use std::collections::HashMap;

/// Points with integer coordinates `n` stand for `n / den`; the sampling
/// grid uses multiples of `step`, so the resolution is `h = step / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice {
    pub den: i64,
    pub step: i64,
}

impl Lattice {
    /// Lattice of resolution `h` that also contains every point endpoint
    /// of the given regions (when the common denominator stays small).
    pub fn for_regions(h: &Q, regions: &[&Region]) -> Lattice {
        let hn = h.numer().to_i64().expect("resolution numerator");
        let hd = h.denom().to_i64().expect("resolution denominator");
        let mut den = hd;
        for r in regions {
            for b in &r.boxes {
                for iv in b {
                    if iv.is_point() {
                        if let Some(d) = iv.lo.denom().to_i64() {
                            let l = den.lcm(&d);
                            if l <= 1 << 24 {
                                den = l;
                            }
                        }
                    }
                }
            }
        }
        Lattice { den, step: hn * (den / hd) }
    }

    pub fn h(&self) -> f64 {
        self.step as f64 / self.den as f64
    }

    pub fn to_q(&self, n: i64) -> Q {
        Q::new(BigInt::from(n), BigInt::from(self.den))
    }

    pub fn point_q(&self, p: &[i64]) -> Vec<Q> {
        p.iter().map(|&n| self.to_q(n)).collect()
    }

    pub fn point_f64(&self, p: &[i64]) -> Vec<f64> {
        p.iter().map(|&n| n as f64 / self.den as f64).collect()
    }

    /// Lattice numerator of an exact rational, when it lies on the lattice.
    pub fn numerator_of(&self, x: &Q) -> Option<i64> {
        let scaled = x * Q::from_integer(BigInt::from(self.den));
        if scaled.is_integer() {
            scaled.to_integer().to_i64()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
struct FastEnd {
    p: i128,
    q: i128,
    closed: bool,
}

/// Membership tests for lattice points in i128 arithmetic.
#[derive(Debug, Clone)]
pub struct FastRegion {
    pub periodic: Vec<bool>,
    boxes: Vec<Vec<(FastEnd, FastEnd)>>,
}

fn end(x: &Q, closed: bool) -> FastEnd {
    FastEnd {
        p: x.numer().to_i128().expect("endpoint numerator too large"),
        q: x.denom().to_i128().expect("endpoint denominator too large"),
        closed,
    }
}

impl FastRegion {
    pub fn new(r: &Region) -> Self {
        let boxes = r
            .boxes
            .iter()
            .map(|b| b.iter().map(|iv| (end(&iv.lo, iv.lo_closed), end(&iv.hi, iv.hi_closed))).collect())
            .collect();
        FastRegion { periodic: r.periodic.clone(), boxes }
    }

    /// Membership of the point `x / den`.
    pub fn contains(&self, x: &[i64], den: i64) -> bool {
        let den = den as i128;
        'boxes: for b in &self.boxes {
            for (k, (lo, hi)) in b.iter().enumerate() {
                let mut n = x[k] as i128;
                if self.periodic[k] {
                    n = n.rem_euclid(den);
                }
                // n/den vs p/q  <=>  n*q vs p*den
                let cl = (n * lo.q).cmp(&(lo.p * den));
                let ok_lo = cl.is_gt() || (cl.is_eq() && lo.closed);
                let ch = (n * hi.q).cmp(&(hi.p * den));
                let ok_hi = ch.is_lt() || (ch.is_eq() && hi.closed);
                if !(ok_lo && ok_hi) {
                    continue 'boxes;
                }
            }
            return true;
        }
        false
    }
}

/// Finite sample of a region on a lattice.
#[derive(Debug, Clone)]
pub struct SampleCloud {
    pub dim: usize,
    pub periodic: Vec<bool>,
    pub lattice: Lattice,
    pub points: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

fn axis_values(iv: &super::region::Interval, lat: &Lattice) -> Vec<i64> {
    if iv.is_point() {
        return lat.numerator_of(&iv.lo).into_iter().collect();
    }
    let den = Q::from_integer(BigInt::from(lat.den));
    let lo = &iv.lo * &den;
    let hi = &iv.hi * &den;
    let step = lat.step;
    let first = {
        let f = lo.floor().to_integer().to_i64().unwrap();
        let mut k = f.div_euclid(step) * step;
        while Q::from_integer(BigInt::from(k)) < lo || (Q::from_integer(BigInt::from(k)) == lo && !iv.lo_closed) {
            k += step;
        }
        k
    };
    let mut out = Vec::new();
    let mut k = first;
    loop {
        let kq = Q::from_integer(BigInt::from(k));
        if kq > hi || (kq == hi && !iv.hi_closed) {
            break;
        }
        out.push(k);
        k += step;
    }
    if out.is_empty() {
        let mid = ((&lo + &hi) / Q::from_integer(BigInt::from(2))).floor().to_integer().to_i64().unwrap();
        for c in [mid, mid + 1] {
            if iv.contains(&lat.to_q(c)) {
                out.push(c);
                break;
            }
        }
    }
    out
}

impl SampleCloud {
    pub fn sample(r: &Region, lat: &Lattice) -> SampleCloud {
        let mut points = Vec::new();
        let mut index = HashMap::new();
        for b in &r.boxes {
            let vals: Vec<Vec<i64>> = b.iter().map(|iv| axis_values(iv, lat)).collect();
            if vals.iter().any(|v| v.is_empty()) {
                continue;
            }
            let mut cur = vec![0usize; r.dim];
            loop {
                let p: Vec<i64> = (0..r.dim)
                    .map(|k| {
                        let v = vals[k][cur[k]];
                        if r.periodic[k] {
                            v.rem_euclid(lat.den)
                        } else {
                            v
                        }
                    })
                    .collect();
                if !index.contains_key(&p) {
                    index.insert(p.clone(), points.len());
                    points.push(p);
                }
                let mut k = r.dim;
                let mut done = true;
                while k > 0 {
                    k -= 1;
                    if cur[k] + 1 < vals[k].len() {
                        cur[k] += 1;
                        for j in k + 1..r.dim {
                            cur[j] = 0;
                        }
                        done = false;
                        break;
                    }
                }
                if done {
                    break;
                }
            }
        }
        SampleCloud { dim: r.dim, periodic: r.periodic.clone(), lattice: *lat, points, index }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn find(&self, p: &[i64]) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Lattice neighbours (± one step along each axis) present in the cloud.
    pub fn neighbours(&self, i: usize) -> Vec<(usize, usize, i64)> {
        let p = &self.points[i];
        let mut out = Vec::new();
        for k in 0..self.dim {
            for s in [-1i64, 1] {
                let mut q = p.clone();
                q[k] += s * self.lattice.step;
                if self.periodic[k] {
                    q[k] = q[k].rem_euclid(self.lattice.den);
                }
                if let Some(j) = self.find(&q) {
                    out.push((j, k, s));
                }
            }
        }
        out
    }

    /// Nearest cloud point to a real point, if within `h/2` in every
    /// coordinate.
    pub fn snap(&self, x: &[f64]) -> Option<usize> {
        let den = self.lattice.den as f64;
        let step = self.lattice.step;
        let h = self.lattice.h();
        let mut cands: Vec<Vec<i64>> = vec![vec![]];
        for k in 0..self.dim {
            let mut v = x[k];
            if self.periodic[k] {
                v -= v.floor();
            }
            let exact = (v * den).round() as i64;
            let grid = ((v * den / step as f64).round() as i64) * step;
            let mut opts = vec![exact];
            if grid != exact {
                opts.push(grid);
            }
            let mut next = Vec::new();
            for c in &cands {
                for &o in &opts {
                    let mut o2 = o;
                    if self.periodic[k] {
                        o2 = o2.rem_euclid(self.lattice.den);
                    }
                    let mut d = (o as f64 / den - v).abs();
                    if self.periodic[k] {
                        d = d.min(1.0 - d);
                    }
                    if d <= h / 2.0 + 1e-12 {
                        let mut c2 = c.clone();
                        c2.push(o2);
                        next.push(c2);
                    }
                }
            }
            cands = next;
        }
        cands.iter().filter_map(|c| self.find(c)).next()
    }

    pub fn point_f64(&self, i: usize) -> Vec<f64> {
        self.lattice.point_f64(&self.points[i])
    }

    pub fn point_q(&self, i: usize) -> Vec<Q> {
        self.lattice.point_q(&self.points[i])
    }

    /// Largest L∞ distance from a fine probe grid of `r` to the cloud
    /// (coverage check).
    pub fn coverage_gap(&self, r: &Region, probes_per_h: i64) -> f64 {
        let fine = Lattice { den: self.lattice.den * probes_per_h, step: self.lattice.step };
        let probe = SampleCloud::sample(r, &fine);
        let mut worst: f64 = 0.0;
        for i in 0..probe.len() {
            let x = probe.point_f64(i);
            let best = self
                .points
                .iter()
                .map(|p| {
                    let y = self.lattice.point_f64(p);
                    x.iter()
                        .zip(&y)
                        .enumerate()
                        .map(|(k, (a, b))| {
                            let d = (a - b).abs();
                            if self.periodic[k] {
                                d.min(1.0 - d)
                            } else {
                                d
                            }
                        })
                        .fold(0.0f64, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        worst
    }
}

pub fn q_to_f64_vec(x: &[Q]) -> Vec<f64> {
    x.iter().map(to_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::region::Interval;
    use crate::linalg::q;

    #[test]
    fn cloud_stays_inside_and_covers() {
        let r = Region::new(
            2,
            vec![true, false],
            vec![vec![Interval::open(q(2, 3), q(4, 3)), Interval::open(q(-1, 2), q(1, 2))]],
        );
        let lat = Lattice::for_regions(&q(1, 16), &[&r]);
        let c = SampleCloud::sample(&r, &lat);
        let fr = FastRegion::new(&r);
        for p in &c.points {
            assert!(r.contains(&lat.point_q(p)));
            assert!(fr.contains(p, lat.den));
        }
        assert!(c.coverage_gap(&r, 3) <= lat.h());
    }

    #[test]
    fn narrow_interval_gets_a_midpoint() {
        let r = Region::open_box(&[(q(1, 100), q(2, 100))]);
        let lat = Lattice { den: 64, step: 1 };
        let c = SampleCloud::sample(&r, &lat);
        assert!(c.is_empty() || r.contains(&c.point_q(0)));
    }
}
