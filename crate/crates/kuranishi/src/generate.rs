//! Random additive weak atlases over tori, for property tests of the
//! taming and reduction constructions.
//!
//! Base `X = T^d` (`d ∈ {1,2}`) covered by `N ≤ 3` arcs (times a full
//! circle when `d = 2`). Chart `I` is `F_I × Π_{i∈I} (t_{I,i} − 1/4,
//! t_{I,i} + 1/4)^{m_i}` with section `y − t_I`; changes translate the
//! fibre and include the obstruction blocks. The change domains `U_IJ`
//! are thinner than `U_I ∩ φ_IJ^{-1}(U_J)` plus an extra box away from
//! the zero set, which typically breaks tameness.

use crate::atlas::Atlas;
use crate::chart::{Chart, CoordChange, IndexSet};
use crate::expr::ExprMap;
use crate::geometry::{Interval, Region};
use crate::linalg::{q, qi, RationalMatrix, Q};
use num::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub base_dim: usize,
    pub n: usize,
    /// Fibre dimension `m_i ∈ {0,1}` per basic chart.
    pub fibre: Vec<usize>,
}

fn full_circle() -> Interval {
    Interval::closed(qi(0), qi(1))
}

/// `n` overlapping arcs covering the circle, endpoints in 1/16 Z.
fn arcs(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Q, Q)> {
    loop {
        let mut cuts: Vec<i64> = (0..n).map(|_| rng.gen_range(0..16)).collect();
        cuts.sort();
        cuts.dedup();
        if cuts.len() < n || (1..n).any(|i| cuts[i] - cuts[i - 1] < 2) || cuts[0] + 16 - cuts[n - 1] < 2 {
            continue;
        }
        let ext = [1i64, 2, 4];
        let out: Vec<(i64, i64)> = (0..n)
            .map(|i| {
                let next = if i + 1 < n { cuts[i + 1] } else { cuts[0] + 16 };
                (cuts[i] - *ext.choose(rng).unwrap(), next + *ext.choose(rng).unwrap())
            })
            .collect();
        if out.iter().all(|(a, b)| b - a < 15) {
            return out.into_iter().map(|(a, b)| (q(a, 16), q(b, 16))).collect();
        }
    }
}

pub fn random_params(seed: u64) -> GenParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_dim = if rng.gen_bool(0.3) { 2 } else { 1 };
    let n = if rng.gen_bool(0.6) { 3 } else { 2 };
    let mut fibre: Vec<usize> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    while base_dim + fibre.iter().sum::<usize>() > 3 {
        let k = fibre.iter().position(|&m| m == 1).unwrap();
        fibre[k] = 0;
    }
    GenParams { base_dim, n, fibre }
}

/// A random additive weak atlas; the same seed always gives the same atlas.
pub fn weak_atlas(seed: u64) -> Atlas {
    let p = random_params(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let d = p.base_dim;
    let arc_axis = if d == 2 { rng.gen_range(0..2) } else { 0 };
    let per = vec![true; d];
    let basic: Vec<Region> = arcs(&mut rng, p.n)
        .into_iter()
        .map(|(a, b)| {
            let bx: Vec<Interval> = (0..d).map(|k| if k == arc_axis { Interval::open(a.clone(), b.clone()) } else { full_circle() }).collect();
            Region::new(d, per.clone(), vec![bx])
        })
        .collect();
    let mut a = Atlas::new(format!("generated-{seed}"), d as i64, per.clone());
    let mut ids = Vec::new();
    let mut foot: BTreeMap<IndexSet, Region> = BTreeMap::new();
    for i in IndexSet::all_nonempty(p.n) {
        let mut f = basic[i.labels()[0] - 1].clone();
        for l in i.labels() {
            f = f.intersect(&basic[l - 1]);
        }
        if !f.is_empty() {
            ids.push(i);
            foot.insert(i, f);
        }
    }
    let fib = |i: IndexSet| -> Vec<usize> { i.labels().into_iter().filter(|l| p.fibre[l - 1] == 1).collect() };
    let mut shift: BTreeMap<IndexSet, Vec<Q>> = BTreeMap::new();
    for &i in &ids {
        let t: Vec<Q> = fib(i).iter().map(|_| q(rng.gen_range(-1..=1), 8)).collect();
        shift.insert(i, t);
    }
    let cube = |t: &[Q], r: &Q| -> Region {
        let bx: Vec<Interval> = t.iter().map(|c| Interval::open(c - r, c + r)).collect();
        Region::new(t.len(), vec![false; t.len()], vec![bx])
    };
    for &i in &ids {
        let m = fib(i).len();
        let dom = foot[&i].product(&cube(&shift[&i], &q(1, 4)));
        let mut sec = RationalMatrix::zeros(m, d + m);
        for r in 0..m {
            sec[(r, d + r)] = qi(1);
        }
        let b: Vec<Q> = shift[&i].iter().map(|t| -t).collect();
        a.add_chart(Chart {
            id: i,
            domain: dom,
            obs_dim: m,
            section: ExprMap::affine(&sec, &b),
            footprint: ExprMap::new(d + m, (0..d).map(crate::expr::Expr::Var).collect()),
            space_periodic: per.clone(),
            zeros: None,
            embedding: None,
        });
    }
    for &i in &ids {
        for &j in &ids {
            if !i.is_proper_subset(j) {
                continue;
            }
            let (fi, fj) = (fib(i), fib(j));
            let (mi, mj) = (fi.len(), fj.len());
            let mut lin = RationalMatrix::zeros(mj, mi);
            let mut amat = RationalMatrix::zeros(d + mj, d + mi);
            let mut bvec = vec![Q::zero(); d + mj];
            for k in 0..d {
                amat[(k, k)] = qi(1);
            }
            for (rj, l) in fj.iter().enumerate() {
                match fi.iter().position(|x| x == l) {
                    Some(ri) => {
                        lin[(rj, ri)] = qi(1);
                        amat[(d + rj, d + ri)] = qi(1);
                        bvec[d + rj] = &shift[&j][rj] - &shift[&i][ri];
                    }
                    None => bvec[d + rj] = shift[&j][rj].clone(),
                }
            }
            let r = [q(1, 8), q(3, 16), q(1, 4)].choose(&mut rng).unwrap().clone();
            let mut dom = foot[&j].product(&cube(&shift[&i], &r));
            if mi > 0 && r < q(1, 4) {
                let mut extra: Vec<Interval> = foot[&j].boxes[0].clone();
                for (k, t) in shift[&i].iter().enumerate() {
                    extra.push(if k == 0 { Interval::open(t + &r, t + q(1, 4)) } else { Interval::open(t - &r, t + &r) });
                }
                dom = dom.union(&Region::new(d + mi, a.chart(i).domain.periodic.clone(), vec![extra]));
            }
            a.add_change(CoordChange::new(i, j, dom, ExprMap::affine(&amat, &bvec), vec![], lin, a.chart(j).domain.periodic.clone()));
        }
    }
    a
}

fn small_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RationalMatrix {
    let mut m = RationalMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = q(rng.gen_range(-3..=3), rng.gen_range(1..=2));
        }
    }
    m
}

fn invertible(rng: &mut ChaCha8Rng, n: usize) -> RationalMatrix {
    loop {
        let m = small_matrix(rng, n, n);
        if m.rank() == n {
            return m;
        }
    }
}

/// Random `(D, R)` with `R` invertible, `D: Q^n → Q^m`, `n, m ≤ 5`.
pub fn random_ccord_instance(seed: u64) -> (RationalMatrix, RationalMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xcc0d);
    let (n, m) = (rng.gen_range(0..=5), rng.gen_range(1..=5));
    (small_matrix(&mut rng, m, n), invertible(&mut rng, m))
}

/// Random linearized coordinate change satisfying the index condition,
/// `n_J, m_J ≤ 5`: a block normal form conjugated by random isomorphisms.
pub fn random_linear_change(seed: u64) -> crate::exterior::LinearChange {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11c4);
    let k = rng.gen_range(0..=2);
    let ni = rng.gen_range(0..=5 - k);
    let mi = rng.gen_range(0..=5 - k);
    let (nj, mj) = (ni + k, mi + k);
    let d_i = small_matrix(&mut rng, mi, ni);
    let x = small_matrix(&mut rng, mi, k);
    let y = invertible(&mut rng, k);
    let mut dj0 = RationalMatrix::zeros(mj, nj);
    for r in 0..mi {
        for c in 0..ni {
            dj0[(r, c)] = d_i[(r, c)].clone();
        }
        for c in 0..k {
            dj0[(r, ni + c)] = x[(r, c)].clone();
        }
    }
    for r in 0..k {
        for c in 0..k {
            dj0[(mi + r, ni + c)] = y[(r, c)].clone();
        }
    }
    let incl = |big: usize, small: usize| RationalMatrix::identity(small).vstack(&RationalMatrix::zeros(big - small, small));
    let a = invertible(&mut rng, nj);
    let b = invertible(&mut rng, mj);
    let ainv = a.inverse().expect("invertible");
    crate::exterior::LinearChange { d_j: b.mul(&dj0).mul(&ainv), dphi: a.mul(&incl(nj, ni)), dphihat: b.mul(&incl(mj, mi)), d_i }
}

/// Random `(D, R_1, R_2)` with `D ⊕ R_i` onto, dimensions at most 5.
pub fn random_stabilization(seed: u64) -> (RationalMatrix, RationalMatrix, RationalMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x57ab);
    let (n, m) = (rng.gen_range(0..=4), rng.gen_range(1..=4));
    let d = small_matrix(&mut rng, m, n);
    let need = m - d.rank();
    let stab = |rng: &mut ChaCha8Rng| loop {
        let k = rng.gen_range(need..=(need + 2).min(5));
        let r = small_matrix(rng, m, k);
        if d.hstack(&r).rank() == m {
            return r;
        }
    };
    let r1 = stab(&mut rng);
    let r2 = if rng.gen_bool(0.3) { r1.hstack(&small_matrix(&mut rng, m, 1)) } else { stab(&mut rng) };
    (d, r1, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas::file::{parse_atlas, print_atlas};
    use crate::atlas::CocycleLevel;

    #[test]
    fn generated_atlases_are_additive_and_weak() {
        let h = q(1, 16);
        let mut untame = 0;
        for seed in 0..12 {
            let a = weak_atlas(seed);
            assert!(a.validate_structure().ok(), "{seed}: {}", a.validate_structure().text());
            for c in a.validate_changes(&h).checks {
                assert!(c.ok(), "{seed}: {}", c.text());
            }
            assert!(a.validate_cocycles(CocycleLevel::Weak, &h).ok(), "{seed}");
            assert!(a.validate_additivity().ok(), "{seed}");
            assert!(a.charts.values().all(|c| c.dim() <= 3));
            if !a.validate_tameness(&h).ok() {
                untame += 1;
            }
            let text = print_atlas(&a).unwrap();
            assert_eq!(print_atlas(&parse_atlas(&text).unwrap()).unwrap(), text);
        }
        assert!(untame >= 6, "only {untame} generated atlases are not tame");
    }

    #[test]
    fn linear_changes_satisfy_the_index_condition() {
        for seed in 0..50 {
            let c = random_linear_change(seed);
            c.check().unwrap_or_else(|e| panic!("{seed}: {e}"));
            assert!(c.d_j.rows <= 5 && c.d_j.cols <= 5);
        }
    }

    #[test]
    fn stabilizations_are_onto() {
        for seed in 0..50 {
            let (d, r1, r2) = random_stabilization(seed);
            assert_eq!(d.hstack(&r1).rank(), d.rows);
            assert_eq!(d.hstack(&r2).rank(), d.rows);
        }
    }
}
