//! Constants, zones and the level-by-level construction of adapted
//! perturbations of the canonical section over a nested reduction `C ⋐ V`.
//!
//! Distances are the L∞ chart distances; the coordinate changes handled
//! here are affine, and the norm on `E_I` is the maximum over the
//! components `E_i` (each with the max norm), which makes every `φ̂_IJ` an
//! isometry.

use crate::atlas::Atlas;
use crate::chart::IndexSet;
use crate::geometry::Region;
use crate::linalg::{q, qi, rat, to_f64, RationalMatrix, Q};
use crate::reduction::AtlasReduction;
use crate::report::{CheckReport, Report, Witness};
use crate::zeroset::{fd_jacobian, is_transverse, lipschitz_bound, locate_perturbed_zeros};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("constants: {0}")]
    Constants(String),
    #[error("zones: {0}")]
    Zone(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error("no transverse perturbation of s_{chart} after {tries} scalings: {last}")]
    Transversality { chart: IndexSet, tries: usize, last: String },
    #[error("condition {condition} fails on chart {chart}: {msg}")]
    Adapted { condition: String, chart: IndexSet, msg: String },
}

/// `2^{-40}`-dyadic rounding towards zero.
pub fn dyadic_down(x: f64) -> Q {
    let s = (1u64 << 40) as f64;
    Q::new(((x * s).floor() as i64).into(), (1i64 << 40).into())
}

/// `η_0 / δ = 1 − 2^{-1/4}`.
pub fn eta_ratio() -> f64 {
    1.0 - 2f64.powf(-0.25)
}

#[derive(Debug, Clone)]
pub struct Constants {
    /// Largest dyadic value for which the reduction properties were verified.
    pub delta_v: Q,
    pub delta: Q,
    pub sigma_bound: f64,
    pub sigma: f64,
    pub h: Q,
    pub lipschitz: BTreeMap<IndexSet, f64>,
}

impl Constants {
    /// `2^{-k} δ`, for quarter-integer `k`.
    pub fn radius(&self, k: f64) -> Q {
        dyadic_down(2f64.powf(-k) * to_f64(&self.delta))
    }

    /// `η_k = 2^{-k} (1 − 2^{-1/4}) δ`.
    pub fn eta(&self, k: f64) -> Q {
        dyadic_down(self.eta_f64(k))
    }

    pub fn eta_f64(&self, k: f64) -> f64 {
        2f64.powf(-k) * eta_ratio() * to_f64(&self.delta)
    }

    pub fn text(&self) -> String {
        format!(
            "delta_V = {}\ndelta = {}\neta_0 = {:.12e}\nsigma_bound = {:.6e}\nsigma = {:.6e}\n",
            self.delta_v,
            self.delta,
            self.eta_f64(0.0),
            self.sigma_bound,
            self.sigma
        )
    }
}

/// Component structure of `E_I = ⊕ φ̂_iI(E_i)`.
#[derive(Debug, Clone)]
pub struct Components {
    pub labels: Vec<usize>,
    /// `E_I → E_i` coordinates.
    pub coords: Vec<Vec<Vec<f64>>>,
    /// Projections `E_I → φ̂_iI(E_i)`.
    pub proj: Vec<Vec<Vec<f64>>>,
}

impl Components {
    pub fn new(a: &Atlas, i: IndexSet) -> Result<Self, PerturbationError> {
        let m = a.chart(i).obs_dim;
        let labels = i.labels();
        let blocks: Vec<RationalMatrix> = labels
            .iter()
            .map(|&l| {
                let li = IndexSet::single(l);
                if li == i {
                    Ok(RationalMatrix::identity(m))
                } else {
                    a.change(li, i).map(|c| c.linear.clone()).ok_or_else(|| PerturbationError::Unsupported(format!("missing change {li} -> {i}")))
                }
            })
            .collect::<Result<_, _>>()?;
        let mut s = RationalMatrix::zeros(m, 0);
        for b in &blocks {
            s = s.hstack(b);
        }
        let sinv = if m == 0 {
            RationalMatrix::zeros(0, 0)
        } else {
            s.inverse().ok_or_else(|| PerturbationError::Unsupported(format!("E_{i} is not the direct sum of the E_i")))?
        };
        let mut coords = Vec::new();
        let mut proj = Vec::new();
        let mut off = 0;
        for b in &blocks {
            let mut c = RationalMatrix::zeros(b.cols, m);
            for r in 0..b.cols {
                for col in 0..m {
                    c[(r, col)] = sinv[(off + r, col)].clone();
                }
            }
            off += b.cols;
            proj.push(b.mul(&c).to_f64());
            coords.push(c.to_f64());
        }
        Ok(Components { labels, coords, proj })
    }

    /// `max_i ‖e_i‖_∞`.
    pub fn norm(&self, e: &[f64]) -> f64 {
        self.coords.iter().map(|c| matvec(c, e).iter().fold(0.0, |m, v| f64::max(m, v.abs()))).fold(0.0, f64::max)
    }

    /// Projection onto `φ̂_HI(E_H) = ⊕_{i∈H} φ̂_iI(E_i)` along the others.
    pub fn project(&self, h: IndexSet, e: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; e.len()];
        for (k, &l) in self.labels.iter().enumerate() {
            if h.contains(l) {
                for (o, v) in out.iter_mut().zip(matvec(&self.proj[k], e)) {
                    *o += v;
                }
            }
        }
        out
    }

    fn proj_of(&self, label: usize) -> Vec<Vec<f64>> {
        self.proj[self.labels.iter().position(|&l| l == label).expect("label")].clone()
    }
}

fn op_norm(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Affine data of an embedding `y = A x + b` with a left inverse.
#[derive(Debug, Clone)]
pub struct AffineEmbedding {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub left: Vec<Vec<f64>>,
}

impl AffineEmbedding {
    pub fn of(a: &Atlas, i: IndexSet, j: IndexSet) -> Result<Self, PerturbationError> {
        let cc = a.change(i, j).ok_or_else(|| PerturbationError::Unsupported(format!("missing change {i} -> {j}")))?;
        let crate::chart::MapRepr::Expr { map, .. } = &cc.repr else {
            return Err(PerturbationError::Unsupported(format!("change {i} -> {j} has no closed form")));
        };
        let (am, b) = map.affine_form().ok_or_else(|| PerturbationError::Unsupported(format!("change {i} -> {j} is not affine")))?;
        let at = am.transpose();
        let left = at
            .mul(&am)
            .inverse()
            .map(|g| g.mul(&at))
            .ok_or_else(|| PerturbationError::Unsupported(format!("change {i} -> {j} is not injective")))?;
        Ok(AffineEmbedding { a: am.to_f64(), b: b.iter().map(to_f64).collect(), left: left.to_f64() })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.a, x).into_iter().zip(&self.b).map(|(v, b)| v + b).collect()
    }

    pub fn pull(&self, y: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = y.iter().zip(&self.b).map(|(v, b)| v - b).collect();
        matvec(&self.left, &d)
    }

    /// `φ^{-1}(y)` when `y` lies on the image up to `tol`, with periodic
    /// coordinates compared modulo 1.
    pub fn invert(&self, y: &[f64], periodic: &[bool], tol: f64) -> Option<Vec<f64>> {
        let x = self.pull(y);
        let back = self.apply(&x);
        let ok = back.iter().zip(y).zip(periodic).all(|((u, v), &p)| {
            let d = (u - v).abs();
            (if p { (d - d.round()).abs() } else { d }) <= tol
        });
        ok.then_some(x)
    }
}

/// Smooth cutoff equal to 1 on the closed `r_in`-neighbourhood of a union of
/// boxes and 0 outside its `r_out`-neighbourhood, built from the quintic
/// smoothstep in each coordinate.
#[derive(Debug, Clone)]
pub struct Bump {
    pub boxes: Vec<Vec<(f64, f64)>>,
    pub periodic: Vec<bool>,
    pub r_in: f64,
    pub r_out: f64,
}

pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn axis_dist(x: f64, lo: f64, hi: f64, periodic: bool) -> f64 {
    if !periodic {
        return (lo - x).max(x - hi).max(0.0);
    }
    if hi - lo >= 1.0 {
        return 0.0;
    }
    let xs = lo + (x - lo).rem_euclid(1.0);
    if xs <= hi {
        0.0
    } else {
        (xs - hi).min(lo + 1.0 - xs)
    }
}

pub enum BoxSide {
    In,
    Out,
    /// Gradient bound of the cutoff on the box.
    Mixed(f64),
}

fn axis_range(x: f64, r: f64, lo: f64, hi: f64, periodic: bool) -> (f64, f64) {
    let (a, b) = (axis_dist(x - r, lo, hi, periodic), axis_dist(x + r, lo, hi, periodic));
    let min = if !periodic {
        (lo - (x + r)).max((x - r) - hi).max(0.0)
    } else if 2.0 * r >= 1.0 {
        0.0
    } else {
        let xs = lo + (x - lo).rem_euclid(1.0);
        [0.0, -1.0].iter().map(|s| (lo - (xs + s + r)).max((xs + s - r) - hi).max(0.0)).fold(f64::INFINITY, f64::min)
    };
    let mut max = a.max(b);
    if periodic {
        let anti = (lo + hi) / 2.0 + 0.5;
        if 2.0 * r >= 1.0 || (anti - (x - r)).rem_euclid(1.0) <= 2.0 * r {
            max = max.max((1.0 - (hi - lo)) / 2.0);
        }
    }
    (min, max)
}

impl Bump {
    pub fn classify(&self, c: &[f64], w: &[f64]) -> BoxSide {
        let mut lchi = 0.0;
        let mut near = false;
        for b in &self.boxes {
            let mut min = 0.0f64;
            let mut max = 0.0f64;
            for (k, &(lo, hi)) in b.iter().enumerate() {
                let (p, q) = axis_range(c[k], w[k], lo, hi, self.periodic[k]);
                min = min.max(p);
                max = max.max(q);
            }
            if max <= self.r_in {
                return BoxSide::In;
            }
            if min < self.r_out {
                near = true;
                lchi += b.len() as f64 * 1.875 / (self.r_out - self.r_in);
            }
        }
        if near {
            BoxSide::Mixed(lchi)
        } else {
            BoxSide::Out
        }
    }

    pub fn new(r: &Region, r_in: f64, r_out: f64) -> Self {
        assert!(r_in < r_out);
        let boxes = r.boxes.iter().map(|b| b.iter().map(|iv| (to_f64(&iv.lo), to_f64(&iv.hi))).collect()).collect();
        Bump { boxes, periodic: r.periodic.clone(), r_in, r_out }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut outside = 1.0;
        for b in &self.boxes {
            let mut v = 1.0;
            for (k, &(lo, hi)) in b.iter().enumerate() {
                let d = axis_dist(x[k], lo, hi, self.periodic[k]);
                v *= smoothstep((self.r_out - d) / (self.r_out - self.r_in));
                if v == 0.0 {
                    break;
                }
            }
            outside *= 1.0 - v;
        }
        1.0 - outside
    }
}

/// Perturbation fields as evaluable expression trees.
#[derive(Debug, Clone)]
pub enum Field {
    Zero { out: usize },
    /// `b + A·g(x)` with `g_k(x) = x_k`, or `sin 2πx_k` on periodic axes.
    Affine { a: Vec<Vec<f64>>, b: Vec<f64>, periodic: Vec<bool> },
    /// `φ̂ ∘ inner ∘ φ^{-1}`, extended constantly in the normal directions.
    Pull { from: IndexSet, emb: AffineEmbedding, lin: Vec<Vec<f64>>, inner: Box<Field> },
    Linear { m: Vec<Vec<f64>>, inner: Box<Field> },
    /// `χ·inside + (1 − χ)·outside`.
    Blend { bump: Bump, inside: Box<Field>, outside: Box<Field> },
    Sum(Vec<Field>),
}

impl Field {
    pub fn out_dim(&self) -> usize {
        match self {
            Field::Zero { out } => *out,
            Field::Affine { b, .. } => b.len(),
            Field::Pull { lin, .. } | Field::Linear { m: lin, .. } => lin.len(),
            Field::Blend { inside, .. } => inside.out_dim(),
            Field::Sum(v) => v[0].out_dim(),
        }
    }

    /// Bounds `(sup ‖f‖_∞, Lip f)` on the box `c ± w`, with the L∞ norm on
    /// both sides.
    pub fn local(&self, c: &[f64], w: &[f64]) -> (f64, f64) {
        match self {
            Field::Zero { .. } => (0.0, 0.0),
            Field::Affine { a, b, periodic } => {
                let tau = 2.0 * std::f64::consts::PI;
                let (g, dev, lg): (Vec<f64>, Vec<f64>, Vec<f64>) = c
                    .iter()
                    .zip(w)
                    .zip(periodic)
                    .map(|((&x, &r), &p)| if p { ((tau * x).sin(), (tau * r).min(2.0), tau) } else { (x, r, 1.0) })
                    .fold((vec![], vec![], vec![]), |(mut g, mut d, mut l), (x, r, t)| {
                        g.push(x);
                        d.push(r);
                        l.push(t);
                        (g, d, l)
                    });
                let mut sup = 0.0f64;
                let mut lip = 0.0f64;
                for (row, bb) in a.iter().zip(b) {
                    let v = bb + row.iter().zip(&g).map(|(p, q)| p * q).sum::<f64>();
                    sup = sup.max(v.abs() + row.iter().zip(&dev).map(|(p, q)| p.abs() * q).sum::<f64>());
                    lip = lip.max(row.iter().zip(&lg).map(|(p, q)| p.abs() * q).sum());
                }
                (sup, lip)
            }
            Field::Pull { emb, lin, inner, .. } => {
                let c2 = emb.pull(c);
                let w2: Vec<f64> = emb.left.iter().map(|r| r.iter().zip(w).map(|(p, q)| p.abs() * q).sum()).collect();
                let (s, l) = inner.local(&c2, &w2);
                let (nl, nf) = (op_norm(lin), op_norm(&emb.left));
                (nl * s, nl * l * nf)
            }
            Field::Linear { m, inner } => {
                let (s, l) = inner.local(c, w);
                (op_norm(m) * s, op_norm(m) * l)
            }
            Field::Blend { bump, inside, outside } => match bump.classify(c, w) {
                BoxSide::Out => outside.local(c, w),
                BoxSide::In => inside.local(c, w),
                BoxSide::Mixed(lchi) => {
                    let (si, li) = inside.local(c, w);
                    let (so, lo) = outside.local(c, w);
                    (si.max(so), lchi * (si + so) + li.max(lo))
                }
            },
            Field::Sum(v) => v.iter().map(|f| f.local(c, w)).fold((0.0, 0.0), |(a, b), (p, q)| (a + p, b + q)),
        }
    }

    /// Narrowest bump transition in the tree.
    pub fn min_scale(&self) -> f64 {
        match self {
            Field::Zero { .. } | Field::Affine { .. } => f64::INFINITY,
            Field::Pull { inner, .. } | Field::Linear { inner, .. } => inner.min_scale(),
            Field::Blend { bump, inside, outside } => (bump.r_out - bump.r_in).min(inside.min_scale()).min(outside.min_scale()),
            Field::Sum(v) => v.iter().map(Field::min_scale).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Field::Zero { out } => vec![0.0; *out],
            Field::Affine { a, b, periodic } => {
                let g: Vec<f64> = x.iter().zip(periodic).map(|(&v, &p)| if p { (2.0 * std::f64::consts::PI * v).sin() } else { v }).collect();
                matvec(a, &g).into_iter().zip(b).map(|(u, c)| u + c).collect()
            }
            Field::Pull { emb, lin, inner, .. } => matvec(lin, &inner.eval(&emb.pull(x))),
            Field::Linear { m, inner } => matvec(m, &inner.eval(x)),
            Field::Blend { bump, inside, outside } => {
                let c = bump.eval(x);
                if c == 0.0 {
                    outside.eval(x)
                } else if c == 1.0 {
                    inside.eval(x)
                } else {
                    inside.eval(x).into_iter().zip(outside.eval(x)).map(|(u, v)| c * u + (1.0 - c) * v).collect()
                }
            }
            Field::Sum(v) => {
                let mut out = vec![0.0; self.out_dim()];
                for f in v {
                    for (o, u) in out.iter_mut().zip(f.eval(x)) {
                        *o += u;
                    }
                }
                out
            }
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            Field::Zero { out } => writeln!(f, "{pad}zero {out}"),
            Field::Affine { a, b, .. } => writeln!(f, "{pad}affine A={a:?} b={b:?}"),
            Field::Pull { from, lin, inner, .. } => {
                writeln!(f, "{pad}pull from {from} lin={lin:?}")?;
                inner.write(f, depth + 1)
            }
            Field::Linear { m, inner } => {
                writeln!(f, "{pad}linear {m:?}")?;
                inner.write(f, depth + 1)
            }
            Field::Blend { bump, inside, outside } => {
                writeln!(f, "{pad}blend boxes={:?} r_in={:.6e} r_out={:.6e}", bump.boxes, bump.r_in, bump.r_out)?;
                inside.write(f, depth + 1)?;
                outside.write(f, depth + 1)
            }
            Field::Sum(v) => {
                writeln!(f, "{pad}sum")?;
                v.iter().try_for_each(|g| g.write(f, depth + 1))
            }
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, 0)
    }
}

/// Zone family `V^k_I`, `N^k_JI`, `C̃_J` of a nested reduction.
pub struct Zones<'a> {
    pub a: &'a Atlas,
    pub v: &'a AtlasReduction,
    pub c: &'a AtlasReduction,
    pub consts: &'a Constants,
}

impl<'a> Zones<'a> {
    pub fn new(a: &'a Atlas, v: &'a AtlasReduction, c: &'a AtlasReduction, consts: &'a Constants) -> Self {
        Zones { a, v, c, consts }
    }

    /// `V^k_I = B_{2^{-k}δ}(V_I)`.
    pub fn v_k(&self, i: IndexSet, k: f64) -> Region {
        let vi = self.v.get(self.a, i);
        if vi.is_empty() {
            return vi;
        }
        vi.dilate(&self.consts.radius(k)).intersect(&self.a.chart(i).domain)
    }

    /// `N^k_JI = V^k_J ∩ φ_IJ(V^k_I ∩ U_IJ)`.
    pub fn n_k(&self, j: IndexSet, i: IndexSet, k: f64) -> Region {
        let vj = self.v_k(j, k);
        match self.a.change(i, j) {
            Some(cc) if !vj.is_empty() => cc.image(&self.v_k(i, k)).map(|r| r.intersect(&vj)).unwrap_or_else(|_| vj.empty_like()),
            _ => vj.empty_like(),
        }
    }

    /// `N^k_J = ⋃_{I⊊J} N^k_JI`.
    pub fn core(&self, j: IndexSet, k: f64) -> Region {
        let mut out = self.a.chart(j).domain.empty_like();
        for i in self.a.index_sets() {
            if i.is_proper_subset(j) {
                out = out.union(&self.n_k(j, i, k));
            }
        }
        out
    }

    /// `C̃_J = ⋃_{K⊇J} φ_JK^{-1}(C_K)`.
    pub fn c_tilde(&self, j: IndexSet) -> Region {
        let mut out = self.c.get(self.a, j);
        for k in self.a.index_sets() {
            if j.is_proper_subset(k) {
                if let Ok(p) = self.a.change(j, k).expect("change").preimage(&self.c.get(self.a, k)) {
                    out = out.union(&p);
                }
            }
        }
        out
    }

    /// Whether `x ∈ U_I` lies in `π^{-1}(π(C))`, up to `tol` on images of
    /// lower-dimensional charts.
    pub fn in_c_zone(&self, i: IndexSet, x: &[f64], tol: f64) -> bool {
        let xq: Vec<Q> = x.iter().map(|&v| rat(v)).collect();
        if self.c_tilde(i).contains(&xq) {
            return true;
        }
        let per = self.a.chart(i).periodic().to_vec();
        for hh in self.a.index_sets() {
            if !hh.is_proper_subset(i) {
                continue;
            }
            let Ok(emb) = AffineEmbedding::of(self.a, hh, i) else { continue };
            if let Some(xh) = emb.invert(x, &per, tol) {
                let xhq: Vec<Q> = xh.iter().map(|&v| rat(v)).collect();
                if self.c.get(self.a, hh).contains(&xhq) || self.c_tilde(hh).contains(&xhq) {
                    return true;
                }
            }
        }
        false
    }
}

/// Grid points of every box of the closure with spacing at most `h`,
/// including the box corners.
pub fn box_samples(r: &Region, h: &Q) -> Vec<Vec<f64>> {
    let hf = to_f64(h);
    let mut out = Vec::new();
    for b in &r.closure().boxes {
        let axes: Vec<Vec<f64>> = b
            .iter()
            .map(|iv| {
                let (lo, hi) = (to_f64(&iv.lo), to_f64(&iv.hi));
                let n = ((hi - lo) / hf).ceil().max(0.0) as usize;
                if n == 0 {
                    vec![lo]
                } else {
                    (0..=n).map(|t| lo + (hi - lo) * t as f64 / n as f64).collect()
                }
            })
            .collect();
        let mut pts: Vec<Vec<f64>> = vec![vec![]];
        for ax in &axes {
            pts = pts.into_iter().flat_map(|p| ax.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
        }
        out.extend(pts);
    }
    out
}

/// `min ‖M x + b‖` over a box, as a linear program.
fn affine_min_norm(m: &[Vec<f64>], b: &[f64], comps: &Components, bx: &[(f64, f64)]) -> Result<f64, PerturbationError> {
    use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let t = p.add_var(1.0, (0.0, f64::INFINITY));
    let xs: Vec<_> = bx.iter().map(|&r| p.add_var(0.0, r)).collect();
    for c in &comps.coords {
        for row in c {
            let coef: Vec<f64> = (0..xs.len()).map(|k| row.iter().zip(m).map(|(a, mr)| a * mr[k]).sum()).collect();
            let off: f64 = row.iter().zip(b).map(|(a, v)| a * v).sum();
            for sign in [1.0, -1.0] {
                let mut e = LinearExpr::empty();
                for (x, cf) in xs.iter().zip(&coef) {
                    e.add(*x, sign * cf);
                }
                e.add(t, -1.0);
                p.add_constraint(e, ComparisonOp::Le, -sign * off);
            }
        }
    }
    p.solve().map(|s| s.objective()).map_err(|e| PerturbationError::Constants(format!("linear program: {e}")))
}

/// `π(B̄_r(V_I)) ∩ π(B̄_r(V_J)) = ∅`, tested in `U_{I∪J}` and `U_{I∩J}`;
/// in a tame atlas every identification factors through these charts.
fn separated(a: &Atlas, v: &AtlasReduction, i: IndexSet, j: IndexSet, r: &Q) -> bool {
    let ball = |k: IndexSet| v.get(a, k).dilate_closed(r).intersect(&a.chart(k).domain);
    let (bi, bj) = (ball(i), ball(j));
    let up = i.union(j);
    if a.charts.contains_key(&up) {
        let img = |k: IndexSet, b: &Region| a.change(k, up).and_then(|c| c.image(b).ok()).unwrap_or_else(|| a.chart(up).domain.empty_like());
        if !img(i, &bi).intersect(&img(j, &bj)).is_empty() {
            return false;
        }
    }
    let down = i.intersect(j);
    if !down.is_empty() && a.charts.contains_key(&down) {
        let pre = |k: IndexSet, b: &Region| a.change(down, k).and_then(|c| c.preimage(b).ok()).unwrap_or_else(|| a.chart(down).domain.empty_like());
        if !pre(i, &bi).intersect(&pre(j, &bj)).is_empty() {
            return false;
        }
    }
    true
}

/// `δ_V`, `δ = δ_V/2`, and the sampled lower bound for `σ(δ, V, C)`.
pub fn compute_constants(a: &Atlas, v: &AtlasReduction, c: &AtlasReduction, h: &Q) -> Result<Constants, PerturbationError> {
    let ids = a.index_sets();
    let sep_pairs: Vec<(IndexSet, IndexSet)> = ids
        .iter()
        .flat_map(|&i| ids.iter().map(move |&j| (i, j)))
        .filter(|(i, j)| i < j && !i.comparable(*j) && !v.get(a, *i).is_empty() && !v.get(a, *j).is_empty())
        .collect();
    let mut delta_v = None;
    let mut d = q(1, 2);
    for _ in 0..40 {
        let two_d = &d * qi(2);
        let fits = ids.iter().all(|&i| {
            let vi = v.get(a, i);
            vi.is_empty() || vi.dilate_closed(&two_d).is_subset(&a.chart(i).domain)
        });
        let separated = fits && sep_pairs.iter().all(|&(i, j)| separated(a, v, i, j, &two_d));
        if separated {
            delta_v = Some(d.clone());
            break;
        }
        d /= qi(2);
    }
    let delta_v = delta_v.ok_or_else(|| PerturbationError::Constants("no δ with B_2δ(V_I) ⋐ U_I".into()))?;
    let mut consts = Constants {
        delta: &delta_v / qi(2),
        delta_v,
        sigma_bound: f64::INFINITY,
        sigma: 0.0,
        h: h.clone(),
        lipschitz: BTreeMap::new(),
    };
    let hf = to_f64(h);
    let mut bound = f64::INFINITY;
    for &j in &ids {
        let comps = Components::new(a, j)?;
        let cj = a.chart(j);
        let s = |x: &[f64]| cj.section_f64(x);
        let zones = Zones::new(a, v, c, &consts);
        let kj = j.len() as f64;
        let vk = zones.v_k(j, kj);
        if vk.is_empty() {
            continue;
        }
        let mut excl = zones.c_tilde(j);
        for i in &ids {
            if i.is_proper_subset(j) {
                excl = excl.union(&zones.n_k(j, *i, kj - 0.25).dilate(&consts.eta(kj - 0.5)));
            }
        }
        let dom = vk.closure().difference(&excl);
        let pts = box_samples(&dom, h);
        let lip = lipschitz_bound(&s, &pts, &comps);
        consts.lipschitz.insert(j, lip);
        if let Some((m, b)) = cj.section.affine_form() {
            let (m, b) = (m.to_f64(), b.iter().map(to_f64).collect::<Vec<_>>());
            for bx in &dom.closure().boxes {
                let bx: Vec<(f64, f64)> = bx.iter().map(|iv| (to_f64(&iv.lo), to_f64(&iv.hi))).collect();
                bound = bound.min(affine_min_norm(&m, &b, &comps, &bx)? - 1e-9);
            }
        } else {
            let m = pts.iter().map(|x| comps.norm(&s(x))).fold(f64::INFINITY, f64::min);
            if m.is_finite() {
                bound = bound.min(m - lip * hf / 2.0);
            }
        }
    }
    if bound <= 0.0 {
        return Err(PerturbationError::Constants(format!("σ lower bound {bound:.3e} is not positive at resolution {h}; refine h")));
    }
    consts.sigma_bound = bound;
    consts.sigma = if bound.is_finite() { to_f64(&dyadic_down(bound)) } else { 1.0 };
    if consts.sigma <= 0.0 {
        return Err(PerturbationError::Constants("σ rounds to 0".into()));
    }
    Ok(consts)
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub seed: u64,
    pub fields: BTreeMap<IndexSet, Field>,
    pub transcript: Vec<String>,
}

impl Perturbation {
    pub fn zero(a: &Atlas) -> Self {
        let fields = a.charts.iter().map(|(&i, c)| (i, Field::Zero { out: c.obs_dim })).collect();
        Perturbation { seed: 0, fields, transcript: vec![] }
    }

    pub fn nu(&self, i: IndexSet, x: &[f64]) -> Vec<f64> {
        self.fields[&i].eval(x)
    }

    /// `s_I + ν_I`.
    pub fn total(&self, a: &Atlas, i: IndexSet, x: &[f64]) -> Vec<f64> {
        a.chart(i).section_f64(x).into_iter().zip(self.nu(i, x)).map(|(u, v)| u + v).collect()
    }

    pub fn text(&self) -> String {
        let mut s = format!("perturbation seed {}\n", self.seed);
        for (i, f) in &self.fields {
            s.push_str(&format!("nu {i}\n{f}"));
        }
        s
    }
}

fn sup_norm(f: &Field, comps: &Components, pts: &[Vec<f64>]) -> f64 {
    pts.iter().map(|x| comps.norm(&f.eval(x))).fold(0.0, f64::max)
}

/// Extension `ν̃_J` of the pushed-forward perturbations from the core,
/// component by component, for `|J| = k + 1 ≥ 2`.
fn extension(a: &Atlas, z: &Zones, fields: &BTreeMap<IndexSet, Field>, j: IndexSet) -> Result<Field, PerturbationError> {
    let k = j.len() as f64 - 1.0;
    let m = a.chart(j).obs_dim;
    let comps = Components::new(a, j)?;
    let eta_k = z.consts.eta_f64(k);
    let eta_kh = z.consts.eta_f64(k + 0.5);
    let r = |l: f64| eta_k - (l + 1.0) / (k + 1.0) * (eta_k - eta_kh);
    let lower: Vec<IndexSet> = a.index_sets().into_iter().filter(|l| l.is_proper_subset(j)).collect();
    let mut total = Vec::new();
    for &label in &j.labels() {
        let mut cur = Field::Zero { out: m };
        for ell in 1..=(k as usize) {
            for &l in lower.iter().filter(|l| l.len() == ell) {
                let n = z.n_k(j, l, k + 0.5);
                if n.is_empty() {
                    continue;
                }
                let bump = Bump::new(&n, r(ell as f64), r(ell as f64 - 1.0));
                let inside = if l.contains(label) {
                    let emb = AffineEmbedding::of(a, l, j)?;
                    let lin = a.change(l, j).expect("change").linear.to_f64();
                    let pull = Field::Pull { from: l, emb, lin, inner: Box::new(fields[&l].clone()) };
                    Field::Linear { m: comps.proj_of(label), inner: Box::new(pull) }
                } else {
                    Field::Zero { out: m }
                };
                cur = Field::Blend { bump, inside: Box::new(inside), outside: Box::new(cur) };
            }
        }
        total.push(cur);
    }
    let core = z.core(j, k + 0.5);
    if core.is_empty() {
        return Ok(Field::Zero { out: m });
    }
    let beta = Bump::new(&core, eta_kh / 2.0, eta_kh);
    Ok(Field::Blend { bump: beta, inside: Box::new(Field::Sum(total)), outside: Box::new(Field::Zero { out: m }) })
}

/// Conditions b), d), e) for one chart at level `|J|`; `None` when they hold.
fn check_chart(a: &Atlas, z: &Zones, j: IndexSet, f: &Field) -> Result<Option<String>, PerturbationError> {
    let comps = Components::new(a, j)?;
    let vk = z.v_k(j, j.len() as f64);
    if vk.is_empty() {
        return Ok(None);
    }
    let h = &z.consts.h;
    let pts = box_samples(&vk, h);
    let sup = sup_norm(f, &comps, &pts);
    if sup >= z.consts.sigma {
        return Ok(Some(format!("e): sup ‖ν‖ = {sup:.3e} ≥ σ = {:.3e}", z.consts.sigma)));
    }
    let cj = a.chart(j);
    let g = |x: &[f64]| -> Vec<f64> { cj.section_f64(x).into_iter().zip(f.eval(x)).map(|(u, v)| u + v).collect() };
    if cj.dim() == cj.obs_dim {
        let zeros = match locate_perturbed_zeros(&|x: &[f64]| cj.section_f64(x), f, &vk, h) {
            Ok(zs) => zs,
            Err(e) => return Ok(Some(format!("b): {e}"))),
        };
        for x in zeros {
            if !is_transverse(&g, &x) {
                return Ok(Some(format!("b): degenerate zero at {x:?}")));
            }
            if !z.in_c_zone(j, &x, 1e-9) {
                return Ok(Some(format!("d): zero {x:?} outside π^-1(π(C))")));
            }
        }
    } else if cj.obs_dim > 0 {
        let lip = lipschitz_bound(&g, &pts, &comps);
        for x in &pts {
            if comps.norm(&g(x)) <= lip * to_f64(h) {
                let jac = fd_jacobian(&g, x);
                let jm = nalgebra::DMatrix::from_fn(jac.len(), jac[0].len(), |r, c| jac[r][c]);
                if (&jm * jm.transpose()).determinant().abs() < 1e-12 {
                    return Ok(Some(format!("b): rank drop near {x:?}")));
                }
            }
        }
    }
    Ok(None)
}

/// An adapted perturbation, built level by level with seeded transversality
/// terms.
pub fn construct_adapted(a: &Atlas, v: &AtlasReduction, c: &AtlasReduction, consts: &Constants, seed: u64) -> Result<Perturbation, PerturbationError> {
    let z = Zones::new(a, v, c, consts);
    let mut fields: BTreeMap<IndexSet, Field> = BTreeMap::new();
    let mut transcript = Vec::new();
    for level in 1..=a.max_order() {
        for j in a.index_sets().into_iter().filter(|j| j.len() == level) {
            let cj = a.chart(j);
            let m = cj.obs_dim;
            let vk = z.v_k(j, level as f64);
            if vk.is_empty() {
                fields.insert(j, Field::Zero { out: m });
                transcript.push(format!("level {level} {j}: V empty, ν = 0"));
                continue;
            }
            let base = if level == 1 { Field::Zero { out: m } } else { extension(a, &z, &fields, j)? };
            let comps = Components::new(a, j)?;
            let pts = box_samples(&vk, &consts.h);
            let base_sup = sup_norm(&base, &comps, &pts);
            if base_sup >= consts.sigma {
                return Err(PerturbationError::Adapted { condition: "e)".into(), chart: j, msg: format!("extension has norm {base_sup:.3e}") });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(j.0) << 32) ^ 0x51ed_270b);
            let aff = Field::Affine {
                a: (0..m).map(|_| (0..cj.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
                b: (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                periodic: cj.periodic().to_vec(),
            };
            let aff_sup = sup_norm(&aff, &comps, &pts).max(1e-12);
            let mut scale = (consts.sigma - base_sup) / (2.0 * aff_sup);
            let core = z.core(j, level as f64);
            let guard = if core.is_empty() {
                None
            } else {
                let (e1, e2) = (consts.eta_f64(level as f64), consts.eta_f64(level as f64 - 0.5));
                Some(Bump::new(&core, e1, (e1 + e2) / 2.0))
            };
            let mut last = String::new();
            let mut done = false;
            for attempt in 0..32 {
                let scaled = Field::Linear { m: (0..m).map(|r| (0..m).map(|c| if r == c { scale } else { 0.0 }).collect()).collect(), inner: Box::new(aff.clone()) };
                let pert = match &guard {
                    Some(b) => Field::Blend { bump: b.clone(), inside: Box::new(Field::Zero { out: m }), outside: Box::new(scaled) },
                    None => scaled,
                };
                let nu = if level == 1 { pert } else { Field::Sum(vec![base.clone(), pert]) };
                match check_chart(a, &z, j, &nu)? {
                    None => {
                        transcript.push(format!("level {level} {j}: ‖ν̃‖ = {base_sup:.3e}, transversality scale {scale:.3e} (attempt {attempt})"));
                        fields.insert(j, nu);
                        done = true;
                        break;
                    }
                    Some(msg) => last = msg,
                }
                scale /= 2.0;
            }
            if !done {
                return Err(PerturbationError::Transversality { chart: j, tries: 32, last });
            }
        }
    }
    Ok(Perturbation { seed, fields, transcript })
}

/// Conditions a)–e) on samples.
pub fn validate_adapted(a: &Atlas, v: &AtlasReduction, c: &AtlasReduction, consts: &Constants, nu: &Perturbation) -> Report {
    let z = Zones::new(a, v, c, consts);
    let h = &consts.h;
    let mut out = Report::default();
    let ids = a.index_sets();
    let mut ra = CheckReport::pass("a) compatibility");
    let mut rc = CheckReport::pass("c) strong admissibility");
    let mut rb = CheckReport::pass("b) transversality, d) zero sets, e) smallness");
    for &i in &ids {
        let k = i.len() as f64;
        let Ok(comps) = Components::new(a, i) else {
            rb.fail_with(format!("no component structure on E_{i}"), vec![]);
            continue;
        };
        for &hh in ids.iter().filter(|hh| hh.is_proper_subset(i)) {
            let cc = a.change(hh, i).expect("change");
            let dom = z.v_k(hh, k).intersect(&cc.preimage(&z.v_k(i, k)).unwrap_or_else(|_| z.v_k(hh, k).empty_like()));
            let lin = cc.linear.to_f64();
            let mut worst = 0.0f64;
            let mut wit = None;
            for x in box_samples(&dom, h) {
                if !dom.contains(&x.iter().map(|&t| rat(t)).collect::<Vec<_>>()) {
                    continue;
                }
                let y = cc.apply_f64(&x);
                let lhs = nu.nu(i, &y);
                let rhs = matvec(&lin, &nu.nu(hh, &x));
                let d = lhs.iter().zip(&rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                if d > worst {
                    worst = d;
                    wit = Some(x);
                }
            }
            if worst > 1e-9 {
                ra.fail_with(
                    format!("ν_{i}∘φ ≠ φ̂∘ν_{hh} (deviation {worst:.3e})"),
                    wit.map(|x| Witness::new("x", Some(hh), x.iter().map(|&t| rat(t)).collect())).into_iter().collect(),
                );
            }
            let ball = z.n_k(i, hh, k).dilate(&consts.eta(k)).intersect(&z.v_k(i, k));
            let mut off = 0.0f64;
            for y in box_samples(&ball, h) {
                if !ball.contains(&y.iter().map(|&t| rat(t)).collect::<Vec<_>>()) {
                    continue;
                }
                let e = nu.nu(i, &y);
                let p = comps.project(hh, &e);
                off = off.max(e.iter().zip(&p).map(|(u, w)| (u - w).abs()).fold(0.0, f64::max));
            }
            if off > 1e-9 {
                rc.fail_with(format!("ν_{i} leaves φ̂_{hh}{i}(E_{hh}) near N_{i}{hh} by {off:.3e}"), vec![]);
            }
        }
        match check_chart(a, &z, i, &nu.fields[&i]) {
            Ok(None) => {}
            Ok(Some(msg)) => rb.fail_with(format!("{i}: {msg}"), vec![]),
            Err(e) => rb.fail_with(format!("{i}: {e}"), vec![]),
        }
    }
    out.add(ra);
    out.add(rb);
    out.add(rc);
    out
}

#[cfg(test)]
mod tests;
