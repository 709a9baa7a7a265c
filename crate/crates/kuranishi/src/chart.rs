//! Kuranishi charts, coordinate changes, and exact set computations for
//! piecewise axis-affine maps.

use crate::expr::{constant, EvalError, Expr, ExprMap};
use crate::geometry::{BoxN, Interval, Lattice, Region, SampleCloud};
use crate::linalg::{floor_i64, qi, to_f64, RationalMatrix, Q};
use crate::report::{CheckReport, Status, Witness};
use num::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("footprint error: {0}")]
    Footprint(String),
    #[error("map axiom violation for {change}: deviation {deviation:e} at {witness:?}")]
    MapAxiom { change: String, deviation: f64, witness: Vec<Q> },
    #[error("index condition violation for {change}: {detail}")]
    IndexCondition { change: String, detail: String, witness: Vec<Q> },
    #[error("composition error: {0}")]
    Composition(String),
    #[error("exact set computation needs axis-affine data: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Subset of basic labels `{1..32}` as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IndexSet(pub u32);

impl IndexSet {
    pub fn single(label: usize) -> Self {
        assert!((1..=32).contains(&label));
        IndexSet(1 << (label - 1))
    }

    pub fn from_labels(labels: &[usize]) -> Self {
        labels.iter().fold(IndexSet(0), |acc, &l| acc.union(IndexSet::single(l)))
    }

    pub fn labels(self) -> Vec<usize> {
        (0..32).filter(|i| self.0 & (1 << i) != 0).map(|i| i + 1).collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, label: usize) -> bool {
        self.0 & (1 << (label - 1)) != 0
    }

    pub fn is_subset(self, o: IndexSet) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_proper_subset(self, o: IndexSet) -> bool {
        self.is_subset(o) && self != o
    }

    pub fn union(self, o: IndexSet) -> IndexSet {
        IndexSet(self.0 | o.0)
    }

    pub fn intersect(self, o: IndexSet) -> IndexSet {
        IndexSet(self.0 & o.0)
    }

    pub fn comparable(self, o: IndexSet) -> bool {
        self.is_subset(o) || o.is_subset(self)
    }

    /// All nonempty subsets of `{1..n}`, ordered by size then labels.
    pub fn all_nonempty(n: usize) -> Vec<IndexSet> {
        let mut v: Vec<IndexSet> = (1u32..(1 << n)).map(IndexSet).collect();
        v.sort();
        v
    }
}

impl Ord for IndexSet {
    fn cmp(&self, o: &Self) -> Ordering {
        self.len().cmp(&o.len()).then_with(|| self.labels().cmp(&o.labels()))
    }
}

impl PartialOrd for IndexSet {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l: Vec<String> = self.labels().iter().map(|x| x.to_string()).collect();
        write!(f, "{{{}}}", l.join(","))
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for IndexSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().trim_start_matches('{').trim_end_matches('}');
        let mut out = IndexSet(0);
        for p in t.split(',') {
            let l: usize = p.trim().parse().map_err(|_| format!("bad index set `{s}`"))?;
            if !(1..=32).contains(&l) {
                return Err(format!("label {l} out of range"));
            }
            out = out.union(IndexSet::single(l));
        }
        if out.is_empty() {
            return Err(format!("empty index set `{s}`"));
        }
        Ok(out)
    }
}

fn wrap_q(v: &Q) -> Q {
    v - qi(floor_i64(v))
}

fn wrap_f(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// One affine piece `x -> a x + b` valid on a partial box of inputs
/// (`None` leaves an axis unconstrained).
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub cons: Vec<Option<Interval>>,
    pub a: RationalMatrix,
    pub b: Vec<Q>,
}

impl Piece {
    fn contains(&self, x: &[Q]) -> bool {
        self.cons.iter().zip(x).all(|(c, v)| c.as_ref().map_or(true, |iv| iv.contains(v)))
    }

    fn apply(&self, x: &[Q]) -> Vec<Q> {
        let mut y = self.a.apply(x);
        for (v, b) in y.iter_mut().zip(&self.b) {
            *v += b;
        }
        y
    }

    /// Row index feeding each column.
    fn row_of_col(&self) -> Vec<Option<usize>> {
        (0..self.a.cols).map(|j| (0..self.a.rows).find(|&i| !self.a[(i, j)].is_zero())).collect()
    }
}

/// Piecewise affine map whose linear parts move each input axis to at most
/// one output axis. Periodic outputs are reduced mod 1 after evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMap {
    pub in_periodic: Vec<bool>,
    pub out_periodic: Vec<bool>,
    pub pieces: Vec<Piece>,
}

fn is_axis_aligned(a: &RationalMatrix) -> bool {
    (0..a.rows).all(|i| (0..a.cols).filter(|&j| !a[(i, j)].is_zero()).count() <= 1)
        && (0..a.cols).all(|j| (0..a.rows).filter(|&i| !a[(i, j)].is_zero()).count() <= 1)
}

fn interval_image(iv: &Interval, a: &Q, b: &Q) -> Interval {
    let lo = a * &iv.lo + b;
    let hi = a * &iv.hi + b;
    if a.is_positive() {
        Interval { lo, hi, lo_closed: iv.lo_closed, hi_closed: iv.hi_closed }
    } else {
        Interval { lo: hi, hi: lo, lo_closed: iv.hi_closed, hi_closed: iv.lo_closed }
    }
}

/// `{x : a x + b ∈ t}` for `a ≠ 0`.
fn interval_preimage(t: &Interval, a: &Q, b: &Q) -> Interval {
    let inv = Q::one() / a;
    interval_image(t, &inv, &(-b * &inv))
}

fn hull_interval(bounds: &(Q, Q)) -> Interval {
    Interval::closed(bounds.0.clone(), bounds.1.clone())
}

impl AxisMap {
    pub fn from_affine(
        a: RationalMatrix,
        b: Vec<Q>,
        in_periodic: Vec<bool>,
        out_periodic: Vec<bool>,
        windows: &[(usize, Q)],
    ) -> Option<AxisMap> {
        if !is_axis_aligned(&a) {
            return None;
        }
        let mut pieces = vec![Piece { cons: vec![None; a.cols], a, b }];
        for (k, c) in windows {
            if !in_periodic[*k] {
                return None;
            }
            let c = wrap_q(c);
            if c.is_zero() {
                continue;
            }
            let mut next = Vec::new();
            for p in pieces {
                let mut hi = p.clone();
                hi.cons[*k] = Some(Interval { lo: c.clone(), hi: Q::one(), lo_closed: true, hi_closed: false });
                let mut lo = p.clone();
                lo.cons[*k] = Some(Interval { lo: Q::zero(), hi: c.clone(), lo_closed: true, hi_closed: false });
                for i in 0..lo.a.rows {
                    let shift = lo.a[(i, *k)].clone();
                    lo.b[i] += shift;
                }
                next.push(hi);
                next.push(lo);
            }
            pieces = next;
        }
        Some(AxisMap { in_periodic, out_periodic, pieces })
    }

    pub fn from_expr(map: &ExprMap, in_periodic: Vec<bool>, out_periodic: Vec<bool>, windows: &[(usize, Q)]) -> Option<AxisMap> {
        let (a, b) = map.affine_form()?;
        AxisMap::from_affine(a, b, in_periodic, out_periodic, windows)
    }

    pub fn identity(periodic: Vec<bool>) -> AxisMap {
        let n = periodic.len();
        AxisMap::from_affine(RationalMatrix::identity(n), vec![Q::zero(); n], periodic.clone(), periodic, &[]).unwrap()
    }

    pub fn in_dim(&self) -> usize {
        self.in_periodic.len()
    }

    pub fn out_dim(&self) -> usize {
        self.out_periodic.len()
    }

    pub fn is_injective(&self) -> bool {
        self.pieces.iter().all(|p| p.row_of_col().iter().all(|r| r.is_some()))
    }

    fn canon(&self, x: &[Q]) -> Vec<Q> {
        x.iter().zip(&self.in_periodic).map(|(v, &p)| if p { wrap_q(v) } else { v.clone() }).collect()
    }

    fn wrap_out(&self, mut y: Vec<Q>) -> Vec<Q> {
        for (v, &p) in y.iter_mut().zip(&self.out_periodic) {
            if p {
                *v = wrap_q(v);
            }
        }
        y
    }

    fn piece_for(&self, x: &[Q]) -> Option<&Piece> {
        self.pieces.iter().find(|p| p.contains(x))
    }

    pub fn apply(&self, x: &[Q]) -> Option<Vec<Q>> {
        let x = self.canon(x);
        let p = self.piece_for(&x)?;
        Some(self.wrap_out(p.apply(&x)))
    }

    pub fn apply_f64(&self, x: &[f64]) -> Option<Vec<f64>> {
        let xc: Vec<f64> = x.iter().zip(&self.in_periodic).map(|(v, &p)| if p { wrap_f(*v) } else { *v }).collect();
        let p = self.pieces.iter().find(|p| {
            p.cons.iter().zip(&xc).all(|(c, v)| {
                c.as_ref().map_or(true, |iv| {
                    let lo = to_f64(&iv.lo);
                    let hi = to_f64(&iv.hi);
                    (*v > lo || (iv.lo_closed && *v >= lo)) && (*v < hi || (iv.hi_closed && *v <= hi))
                })
            })
        })?;
        let mut y = vec![0.0; p.a.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = to_f64(&p.b[i]);
            for (j, xj) in xc.iter().enumerate() {
                let c = &p.a[(i, j)];
                if !c.is_zero() {
                    s += to_f64(c) * xj;
                }
            }
            *yi = if self.out_periodic[i] { wrap_f(s) } else { s };
        }
        Some(y)
    }

    pub fn jacobian(&self, x: &[Q]) -> Option<RationalMatrix> {
        let x = self.canon(x);
        self.piece_for(&x).map(|p| p.a.clone())
    }

    /// Region of inputs covered by a piece, clipped to `within`.
    pub(crate) fn piece_region(&self, p: &Piece, within: &Region) -> Region {
        let Some(bounds) = within.bounds() else { return within.empty_like() };
        let b: BoxN = p
            .cons
            .iter()
            .enumerate()
            .map(|(k, c)| c.clone().unwrap_or_else(|| hull_interval(&bounds[k])))
            .collect();
        Region::new(within.dim, within.periodic.clone(), vec![b]).intersect(within)
    }

    pub fn image(&self, r: &Region) -> Region {
        let mut boxes = Vec::new();
        for p in &self.pieces {
            let part = self.piece_region(p, r);
            let rows = p.row_of_col();
            for bx in &part.boxes {
                let mut out: BoxN = (0..p.a.rows).map(|i| Interval::point(p.b[i].clone())).collect();
                for (j, iv) in bx.iter().enumerate() {
                    if let Some(i) = rows[j] {
                        out[i] = interval_image(iv, &p.a[(i, j)], &p.b[i]);
                    }
                }
                boxes.push(out);
            }
        }
        Region::new(self.out_dim(), self.out_periodic.clone(), boxes)
    }

    /// `{x ∈ within : f(x) ∈ t}`.
    pub fn preimage(&self, t: &Region, within: &Region) -> Region {
        let mut boxes: Vec<BoxN> = Vec::new();
        for p in &self.pieces {
            let part = self.piece_region(p, within);
            let rows = p.row_of_col();
            for wb in &part.boxes {
                'tbox: for tb in &t.boxes {
                    // rows without input must hit the target as constants
                    for i in 0..p.a.rows {
                        if (0..p.a.cols).all(|j| p.a[(i, j)].is_zero()) {
                            let v = if self.out_periodic[i] { wrap_q(&p.b[i]) } else { p.b[i].clone() };
                            if !tb[i].contains(&v) {
                                continue 'tbox;
                            }
                        }
                    }
                    let mut per_axis: Vec<Vec<Interval>> = Vec::with_capacity(p.a.cols);
                    for (j, xiv) in wb.iter().enumerate() {
                        let Some(i) = rows[j] else {
                            per_axis.push(vec![xiv.clone()]);
                            continue;
                        };
                        let a = &p.a[(i, j)];
                        let b = &p.b[i];
                        let mut ivs = Vec::new();
                        if self.out_periodic[i] {
                            let y = interval_image(&xiv.closure(), a, b);
                            let m0 = floor_i64(&(&y.lo - &tb[i].hi)) - 1;
                            let m1 = floor_i64(&(&y.hi - &tb[i].lo)) + 1;
                            for m in m0..=m1 {
                                let cand = interval_preimage(&tb[i].shifted(&qi(m)), a, b).intersect(xiv);
                                if !cand.is_empty() {
                                    ivs.push(cand);
                                }
                            }
                        } else {
                            let cand = interval_preimage(&tb[i], a, b).intersect(xiv);
                            if !cand.is_empty() {
                                ivs.push(cand);
                            }
                        }
                        if ivs.is_empty() {
                            continue 'tbox;
                        }
                        per_axis.push(ivs);
                    }
                    let mut acc: Vec<BoxN> = vec![vec![]];
                    for ivs in per_axis {
                        let mut next = Vec::new();
                        for a in &acc {
                            for iv in &ivs {
                                let mut c = a.clone();
                                c.push(iv.clone());
                                next.push(c);
                            }
                        }
                        acc = next;
                    }
                    boxes.extend(acc);
                }
            }
        }
        Region::new(self.in_dim(), self.in_periodic.clone(), boxes).intersect(within)
    }

    /// The unique `x ∈ within` with `f(x) = y`, for injective maps.
    pub fn inverse_point(&self, y: &[Q], within: &Region) -> Option<Vec<Q>> {
        let y = self.wrap_out(y.to_vec());
        for p in &self.pieces {
            let rows = p.row_of_col();
            if rows.iter().any(|r| r.is_none()) {
                return None;
            }
            let part = self.piece_region(p, within);
            for wb in &part.boxes {
                let mut cands: Vec<Vec<Q>> = Vec::with_capacity(p.a.cols);
                for (j, xiv) in wb.iter().enumerate() {
                    let i = rows[j].unwrap();
                    let a = &p.a[(i, j)];
                    let mut c = Vec::new();
                    if self.out_periodic[i] {
                        let yr = interval_image(&xiv.closure(), a, &p.b[i]);
                        let m0 = floor_i64(&(&yr.lo - &y[i])) - 1;
                        let m1 = floor_i64(&(&yr.hi - &y[i])) + 1;
                        for m in m0..=m1 {
                            let x = (&y[i] + qi(m) - &p.b[i]) / a;
                            if xiv.contains(&x) {
                                c.push(x);
                            }
                        }
                    } else {
                        let x = (&y[i] - &p.b[i]) / a;
                        if xiv.contains(&x) {
                            c.push(x);
                        }
                    }
                    cands.push(c);
                }
                if cands.iter().any(|c| c.is_empty()) {
                    continue;
                }
                let x: Vec<Q> = cands.iter().map(|c| c[0].clone()).collect();
                if p.contains(&x) && within.contains(&x) && self.apply(&x).as_deref() == Some(&y[..]) {
                    return Some(x);
                }
            }
        }
        None
    }

    /// `outer ∘ self` on `within`.
    pub fn then(&self, outer: &AxisMap, within: &Region) -> Option<AxisMap> {
        assert_eq!(self.out_dim(), outer.in_dim());
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let rows = p.row_of_col();
            let part = self.piece_region(p, within);
            for wb in &part.boxes {
                // split along inputs so that every periodic output has a
                // constant integer part
                let mut strips: Vec<(BoxN, Vec<Q>)> = vec![(wb.clone(), vec![Q::zero(); p.a.rows])];
                for (j, row) in rows.iter().enumerate() {
                    let Some(i) = *row else { continue };
                    if !self.out_periodic[i] {
                        continue;
                    }
                    let a = &p.a[(i, j)];
                    let mut next = Vec::new();
                    for (bx, shift) in &strips {
                        let y = interval_image(&bx[j].closure(), a, &p.b[i]);
                        for m in floor_i64(&y.lo) - 1..=floor_i64(&y.hi) + 1 {
                            let unit = Interval { lo: qi(m), hi: qi(m + 1), lo_closed: true, hi_closed: false };
                            let cut = interval_preimage(&unit, a, &p.b[i]).intersect(&bx[j]);
                            if cut.is_empty() {
                                continue;
                            }
                            let mut b2 = bx.clone();
                            b2[j] = cut;
                            let mut s2 = shift.clone();
                            s2[i] = qi(m);
                            next.push((b2, s2));
                        }
                    }
                    strips = next;
                }
                for (bx, shift) in strips {
                    let b_shift: Vec<Q> = p.b.iter().zip(&shift).map(|(b, m)| b - m).collect();
                    let inner = Piece { cons: bx.iter().cloned().map(Some).collect(), a: p.a.clone(), b: b_shift };
                    for q in &outer.pieces {
                        // restrict to inputs whose image lies in q's constraint box
                        let mut cons = inner.cons.clone();
                        let mut ok = true;
                        for (i, c) in q.cons.iter().enumerate() {
                            let Some(civ) = c else { continue };
                            match (0..inner.a.cols).find(|&j| !inner.a[(i, j)].is_zero()) {
                                Some(j) => {
                                    let pre = interval_preimage(civ, &inner.a[(i, j)], &inner.b[i]);
                                    let cur = cons[j].clone().unwrap();
                                    let new = cur.intersect(&pre);
                                    if new.is_empty() {
                                        ok = false;
                                        break;
                                    }
                                    cons[j] = Some(new);
                                }
                                None => {
                                    if !civ.contains(&inner.b[i]) {
                                        ok = false;
                                        break;
                                    }
                                }
                            }
                        }
                        if !ok {
                            continue;
                        }
                        let a = q.a.mul(&inner.a);
                        let mut b = q.a.apply(&inner.b);
                        for (v, c) in b.iter_mut().zip(&q.b) {
                            *v += c;
                        }
                        if !is_axis_aligned(&a) {
                            return None;
                        }
                        pieces.push(Piece { cons, a, b });
                    }
                }
            }
        }
        Some(AxisMap { in_periodic: self.in_periodic.clone(), out_periodic: outer.out_periodic.clone(), pieces })
    }
}

/// Zero set of an affine map whose rows each involve at most one variable,
/// intersected with `domain`.
pub fn affine_zero_region(map: &ExprMap, domain: &Region) -> Result<Region, ChartError> {
    let (a, b) = map.affine_form().ok_or_else(|| ChartError::Unsupported(format!("section {map} is not affine")))?;
    let Some(bounds) = domain.bounds() else { return Ok(domain.empty_like()) };
    let mut fixed: Vec<Option<Q>> = vec![None; a.cols];
    for i in 0..a.rows {
        let nz: Vec<usize> = (0..a.cols).filter(|&j| !a[(i, j)].is_zero()).collect();
        match nz.len() {
            0 => {
                if !b[i].is_zero() {
                    return Ok(domain.empty_like());
                }
            }
            1 => {
                let j = nz[0];
                let mut v = -&b[i] / &a[(i, j)];
                if domain.periodic[j] {
                    v = wrap_q(&v);
                }
                match &fixed[j] {
                    Some(w) if *w != v => return Ok(domain.empty_like()),
                    _ => fixed[j] = Some(v),
                }
            }
            _ => return Err(ChartError::Unsupported(format!("row {} of {map} mixes variables", i + 1))),
        }
    }
    let bx: BoxN = (0..a.cols)
        .map(|j| match &fixed[j] {
            Some(v) => Interval::point(v.clone()),
            None => hull_interval(&bounds[j]),
        })
        .collect();
    Ok(Region::new(domain.dim, domain.periodic.clone(), vec![bx]).intersect(domain))
}

/// Rows spanning the annihilator of the column space of `m`.
pub fn annihilator(m: &RationalMatrix) -> RationalMatrix {
    let k = m.transpose().kernel();
    if k.is_empty() {
        return RationalMatrix::zeros(0, m.rows);
    }
    RationalMatrix::from_rows(&k)
}

/// `P ∘ s` as an expression map.
pub fn project_map(p: &RationalMatrix, s: &ExprMap) -> ExprMap {
    let comps = (0..p.rows)
        .map(|r| {
            let mut e = Expr::Const(Q::zero());
            for k in 0..p.cols {
                let c = p[(r, k)].clone();
                if !c.is_zero() {
                    e = Expr::add(e, Expr::mul(constant(c), s.components[k].clone()));
                }
            }
            e
        })
        .collect();
    ExprMap::new(s.in_dim, comps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub id: IndexSet,
    pub domain: Region,
    pub obs_dim: usize,
    pub section: ExprMap,
    /// ψ on the zero set, as a map into the coordinates of X.
    pub footprint: ExprMap,
    pub space_periodic: Vec<bool>,
    /// Declared zero set, required when the section is not axis-affine.
    pub zeros: Option<Region>,
    /// Embedding into the ambient space used for cross-chart distances.
    pub embedding: Option<ExprMap>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn periodic(&self) -> &[bool] {
        &self.domain.periodic
    }

    /// `dim U − dim E`.
    pub fn index(&self) -> i64 {
        self.dim() as i64 - self.obs_dim as i64
    }

    pub fn zero_set(&self) -> Result<Region, ChartError> {
        match &self.zeros {
            Some(z) => Ok(z.intersect(&self.domain)),
            None => affine_zero_region(&self.section, &self.domain),
        }
    }

    pub fn footprint_map(&self) -> Result<AxisMap, ChartError> {
        AxisMap::from_expr(&self.footprint, self.domain.periodic.clone(), self.space_periodic.clone(), &[])
            .ok_or_else(|| ChartError::Unsupported(format!("footprint map {} of U_{}", self.footprint, self.id)))
    }

    /// `F = ψ(s^{-1}(0))`.
    pub fn footprint_region(&self) -> Result<Region, ChartError> {
        Ok(self.footprint_map()?.image(&self.zero_set()?))
    }

    /// `ψ^{-1}(F') ⊆ s^{-1}(0)`.
    pub fn footprint_preimage(&self, f: &Region) -> Result<Region, ChartError> {
        let z = self.zero_set()?;
        Ok(self.footprint_map()?.preimage(f, &z))
    }

    /// `s^{-1}(im m)` inside `within`.
    pub fn section_preimage_of_image(&self, m: &RationalMatrix, within: &Region) -> Result<Region, ChartError> {
        let p = annihilator(m);
        if p.rows == 0 {
            return Ok(within.clone());
        }
        let ps = project_map(&p, &self.section);
        if self.zeros.is_some() && p.rows == self.obs_dim && ps.affine_form().is_none() {
            return Ok(self.zero_set()?.intersect(within));
        }
        Ok(affine_zero_region(&ps, within)?)
    }

    pub fn section_f64(&self, x: &[f64]) -> Vec<f64> {
        self.section.eval(x).expect("section evaluation")
    }

    pub fn with_domain(&self, domain: Region) -> Chart {
        let zeros = self.zeros.as_ref().map(|z| z.intersect(&domain));
        Chart { domain, zeros, ..self.clone() }
    }

    pub fn embed_f64(&self, x: &[f64]) -> Vec<f64> {
        match &self.embedding {
            Some(e) => e.eval(x).expect("embedding evaluation"),
            None => x.to_vec(),
        }
    }
}

/// How a coordinate change map was given.
#[derive(Debug, Clone, PartialEq)]
pub enum MapRepr {
    Expr { map: ExprMap, windows: Vec<(usize, Q)> },
    /// Produced by composition; only the piecewise form exists.
    Pieces,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordChange {
    pub source: IndexSet,
    pub target: IndexSet,
    pub domain: Region,
    pub repr: MapRepr,
    /// `φ̂`, of size `obs_J × obs_I`.
    pub linear: RationalMatrix,
    pub in_periodic: Vec<bool>,
    pub out_periodic: Vec<bool>,
    pub axis: Option<AxisMap>,
}

impl CoordChange {
    pub fn new(
        source: IndexSet,
        target: IndexSet,
        domain: Region,
        map: ExprMap,
        windows: Vec<(usize, Q)>,
        linear: RationalMatrix,
        out_periodic: Vec<bool>,
    ) -> CoordChange {
        let in_periodic = domain.periodic.clone();
        let axis = AxisMap::from_expr(&map, in_periodic.clone(), out_periodic.clone(), &windows);
        CoordChange { source, target, domain, repr: MapRepr::Expr { map, windows }, linear, in_periodic, out_periodic, axis }
    }

    pub fn name(&self) -> String {
        format!("{} -> {}", self.source, self.target)
    }

    pub fn axis(&self) -> Result<&AxisMap, ChartError> {
        self.axis.as_ref().ok_or_else(|| ChartError::Unsupported(format!("change {} is not axis-affine", self.name())))
    }

    pub fn with_domain(&self, domain: Region) -> CoordChange {
        CoordChange { domain, ..self.clone() }
    }

    fn unwrap_windows(&self, x: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = x.iter().zip(&self.in_periodic).map(|(v, &p)| if p { wrap_f(*v) } else { *v }).collect();
        if let MapRepr::Expr { windows, .. } = &self.repr {
            for (k, c) in windows {
                if u[*k] < to_f64(&wrap_q(c)) {
                    u[*k] += 1.0;
                }
            }
        }
        u
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        if let Some(a) = &self.axis {
            if let Some(y) = a.apply_f64(x) {
                return y;
            }
        }
        match &self.repr {
            MapRepr::Expr { map, .. } => {
                let u = self.unwrap_windows(x);
                let mut y = map.eval(&u).expect("coordinate change evaluation");
                for (v, &p) in y.iter_mut().zip(&self.out_periodic) {
                    if p {
                        *v = wrap_f(*v);
                    }
                }
                y
            }
            MapRepr::Pieces => panic!("point outside the pieces of {}", self.name()),
        }
    }

    /// Exact image when available, rationalized floats otherwise.
    pub fn apply_q(&self, x: &[Q]) -> Vec<Q> {
        if let Some(a) = &self.axis {
            if let Some(y) = a.apply(x) {
                return y;
            }
        }
        match &self.repr {
            MapRepr::Expr { map, windows } => {
                let mut u: Vec<Q> =
                    x.iter().zip(&self.in_periodic).map(|(v, &p)| if p { wrap_q(v) } else { v.clone() }).collect();
                for (k, c) in windows {
                    if u[*k] < wrap_q(c) {
                        u[*k] += Q::one();
                    }
                }
                let mut y = map.eval_q(&u).expect("coordinate change evaluation");
                for (v, &p) in y.iter_mut().zip(&self.out_periodic) {
                    if p {
                        *v = wrap_q(v);
                    }
                }
                y
            }
            MapRepr::Pieces => panic!("point outside the pieces of {}", self.name()),
        }
    }

    pub fn jacobian(&self, x: &[Q]) -> RationalMatrix {
        if let Some(a) = &self.axis {
            if let Some(j) = a.jacobian(x) {
                return j;
            }
        }
        match &self.repr {
            MapRepr::Expr { map, windows } => {
                let mut u: Vec<Q> = x.to_vec();
                for (k, c) in windows {
                    if wrap_q(&u[*k]) < wrap_q(c) {
                        u[*k] = wrap_q(&u[*k]) + Q::one();
                    }
                }
                map.jacobian(&u)
            }
            MapRepr::Pieces => panic!("point outside the pieces of {}", self.name()),
        }
    }

    /// `φ(S ∩ U_IJ)`.
    pub fn image(&self, s: &Region) -> Result<Region, ChartError> {
        Ok(self.axis()?.image(&s.intersect(&self.domain)))
    }

    /// `φ^{-1}(T) ⊆ U_IJ`.
    pub fn preimage(&self, t: &Region) -> Result<Region, ChartError> {
        Ok(self.axis()?.preimage(t, &self.domain))
    }

    pub fn inverse_point(&self, y: &[Q]) -> Option<Vec<Q>> {
        self.axis.as_ref()?.inverse_point(y, &self.domain)
    }
}

/// Restriction of a chart to the footprint `F' ⊆ F`. Without `precompact`
/// the domain is `U ∖ closure(Z ∖ Z')`, with `Z = s^{-1}(0)` and
/// `Z' = ψ^{-1}(F')`; with it, the result is further cut down to an open
/// L∞ neighbourhood of `Z'` whose closure lies in `U`.
pub fn restrict_chart(c: &Chart, f_sub: &Region, precompact: bool) -> Result<Chart, ChartError> {
    let f = c.footprint_region()?;
    if !f_sub.is_subset(&f) {
        return Err(ChartError::Footprint(format!("{f_sub} is not contained in the footprint {f}")));
    }
    let rest = f.difference(f_sub);
    if !f_sub.intersect(&rest.closure()).is_empty() {
        return Err(ChartError::Footprint(format!("{f_sub} is not open in {f}")));
    }
    let z = c.zero_set()?;
    let z_sub = c.footprint_preimage(f_sub)?;
    let bad = z.difference(&z_sub).closure();
    let mut dom = c.domain.difference(&bad);
    if precompact {
        if !z_sub.precompact_in(&c.domain) {
            return Err(ChartError::Footprint(format!("ψ^{{-1}}({f_sub}) is not precompact in U_{}", c.id)));
        }
        let t = precompact_radius(&z_sub, &c.domain).ok_or_else(|| {
            ChartError::Footprint(format!("no precompact neighbourhood of ψ^{{-1}}({f_sub}) in U_{}", c.id))
        })?;
        dom = dom.intersect(&z_sub.dilate(&t));
    }
    Ok(c.with_domain(dom))
}

/// Largest dyadic `t ≤ 1` with `closed B_t(S) ⊆ U`, which is at least half
/// the distance from `S` to the complement of `U`.
pub fn precompact_radius(s: &Region, u: &Region) -> Option<Q> {
    if s.is_empty() {
        return Some(Q::one());
    }
    let mut t = Q::one();
    for _ in 0..40 {
        if s.dilate_closed(&t).is_subset(u) {
            return Some(t);
        }
        t /= qi(2);
    }
    None
}

/// Samples of a region at resolution `h` as rational points.
pub fn sample_points(r: &Region, h: &Q) -> Vec<Vec<Q>> {
    let lat = Lattice::for_regions(h, &[r]);
    let c = SampleCloud::sample(r, &lat);
    (0..c.len()).map(|i| c.point_q(i)).collect()
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn periodic_diff(a: &[f64], b: &[f64], periodic: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(periodic)
        .map(|((x, y), &p)| {
            let d = (x - y).abs();
            if p {
                d.min(1.0 - d).abs()
            } else {
                d
            }
        })
        .fold(0.0, f64::max)
}

/// `s_J ∘ φ = φ̂ ∘ s_I` on samples of `U_IJ`, and footprint compatibility
/// on its zero set.
pub fn check_map_axioms(cc: &CoordChange, src: &Chart, tgt: &Chart, h: &Q) -> CheckReport {
    let mut rep = CheckReport::pass(format!("map axioms {}", cc.name()));
    let tol = 1e-9;
    let lin = cc.linear.to_f64();
    let mut worst = 0.0f64;
    let mut worst_at: Option<Vec<Q>> = None;
    for x in sample_points(&cc.domain, h) {
        let xf: Vec<f64> = x.iter().map(to_f64).collect();
        let y = cc.apply_f64(&xf);
        let sj = tgt.section_f64(&y);
        let si = src.section_f64(&xf);
        let pushed: Vec<f64> = lin.iter().map(|row| row.iter().zip(&si).map(|(a, b)| a * b).sum()).collect();
        let d = inf_norm_diff(&sj, &pushed);
        if d > worst {
            worst = d;
            worst_at = Some(x);
        }
    }
    rep.push(format!("max deviation {worst:.3e} over samples of U_{}{}", cc.source, cc.target));
    if worst > tol {
        rep.fail_with(
            format!("sections not intertwined (deviation {worst:.3e})"),
            vec![Witness::new("x", Some(cc.source), worst_at.unwrap())],
        );
    }
    if let Ok(z) = src.zero_set() {
        let zz = z.intersect(&cc.domain);
        for x in sample_points(&zz, h) {
            let xf: Vec<f64> = x.iter().map(to_f64).collect();
            let y = cc.apply_f64(&xf);
            let sj = tgt.section_f64(&y);
            let fi = src.footprint.eval(&xf).unwrap();
            let fj = tgt.footprint.eval(&y).unwrap();
            let sz = sj.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if sz > tol || periodic_diff(&fi, &fj, &src.space_periodic) > tol {
                rep.fail_with("zero set not mapped compatibly with footprints", vec![Witness::new("x", Some(cc.source), x)]);
                break;
            }
        }
    }
    rep
}

/// `ds_J` induces `T U_J / dφ(T U_I) ≅ E_J / φ̂(E_I)` at the given samples
/// of `U_IJ` (usually zero-set samples).
pub fn check_index_condition(cc: &CoordChange, src: &Chart, tgt: &Chart, samples: &[Vec<Q>]) -> CheckReport {
    let mut rep = CheckReport::pass(format!("index condition {}", cc.name()));
    if src.index() != tgt.index() {
        rep.fail_with(
            format!("dim U − dim E differs: {} vs {}", src.index(), tgt.index()),
            vec![],
        );
        return rep;
    }
    let mj = tgt.obs_dim;
    for x in samples {
        let y = cc.apply_q(x);
        let dphi = cc.jacobian(x);
        let dsj = tgt.section.jacobian(&y);
        let dsi = src.section.jacobian(x);
        let stacked = dsj.hstack(&cc.linear);
        let r = stacked.rank();
        if r != mj || dphi.rank() != src.dim() {
            rep.fail_with(
                format!("rank [ds_J | φ̂] = {r} (need {mj}), rank dφ = {} (need {})", dphi.rank(), src.dim()),
                vec![Witness::new("x", Some(cc.source), x.clone())],
            );
            return rep;
        }
        let comp = dsj.mul(&dphi).sub(&cc.linear.mul(&dsi));
        let dev = comp.entries.iter().map(|v| to_f64(v).abs()).fold(0.0, f64::max);
        if dev > 1e-9 {
            rep.fail_with(
                format!("linearized sections not intertwined (deviation {dev:.3e})"),
                vec![Witness::new("x", Some(cc.source), x.clone())],
            );
            return rep;
        }
    }
    rep.push(format!("{} samples checked", samples.len()));
    rep
}

/// `cc2 ∘ cc1` on `U_IJ ∩ φ_IJ^{-1}(U_JK)`. `footprint_ok` is the caller's
/// verdict on `F_I ∩ F_K ⊆ F_J`.
pub fn compose_changes(cc1: &CoordChange, cc2: &CoordChange, footprint_ok: bool) -> Result<CoordChange, ChartError> {
    if cc1.target != cc2.source {
        return Err(ChartError::Composition(format!("{} does not end where {} starts", cc1.name(), cc2.name())));
    }
    if !footprint_ok {
        return Err(ChartError::Composition(format!(
            "footprint condition F_I ∩ F_K ⊆ F_J fails for {} and {}",
            cc1.name(),
            cc2.name()
        )));
    }
    let domain = cc1.preimage(&cc2.domain)?;
    let a1 = cc1.axis()?;
    let a2 = cc2.axis()?;
    let axis = a1
        .then(a2, &domain)
        .ok_or_else(|| ChartError::Composition("composite is not axis-affine".into()))?;
    let linear = cc2.linear.mul(&cc1.linear);
    // collapse to an expression map when a single affine piece remains
    let mut repr = MapRepr::Pieces;
    if let Some(first) = axis.pieces.first() {
        if axis.pieces.iter().all(|p| p.a == first.a && p.b == first.b) {
            repr = MapRepr::Expr { map: ExprMap::affine(&first.a, &first.b), windows: vec![] };
        }
    }
    Ok(CoordChange {
        source: cc1.source,
        target: cc2.target,
        domain,
        repr,
        linear,
        in_periodic: cc1.in_periodic.clone(),
        out_periodic: cc2.out_periodic.clone(),
        axis: Some(axis),
    })
}

/// Values of `x` as floats.
pub fn qf(x: &[Q]) -> Vec<f64> {
    x.iter().map(to_f64).collect()
}

/// Integer part helper for tests and callers that need exact wrap.
pub fn wrap_point(x: &[Q], periodic: &[bool]) -> Vec<Q> {
    x.iter().zip(periodic).map(|(v, &p)| if p { wrap_q(v) } else { v.clone() }).collect()
}

pub fn status_of(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

pub fn q_to_i64(v: &Q) -> Option<i64> {
    if v.is_integer() {
        v.to_integer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::q;

    fn circle_chart(dom: Region) -> Chart {
        Chart {
            id: IndexSet::single(1),
            domain: dom,
            obs_dim: 1,
            section: ExprMap::parse(2, &["x2"]).unwrap(),
            footprint: ExprMap::parse(2, &["x1"]).unwrap(),
            space_periodic: vec![true],
            zeros: None,
            embedding: None,
        }
    }

    fn strip(a: Q, b: Q) -> Region {
        Region::new(2, vec![true, false], vec![vec![Interval::open(a, b), Interval::open(qi(-1), qi(1))]])
    }

    #[test]
    fn index_sets() {
        let s: IndexSet = "{1,3}".parse().unwrap();
        assert_eq!(s.labels(), vec![1, 3]);
        assert_eq!(s.to_string(), "{1,3}");
        assert!(IndexSet::single(1).is_proper_subset(s));
        assert!(IndexSet::single(3) < s);
    }

    #[test]
    fn restriction_of_the_global_circle_chart() {
        let c = circle_chart(strip(qi(0), qi(1)).union(&Region::new(
            2,
            vec![true, false],
            vec![vec![Interval::point(qi(0)), Interval::open(qi(-1), qi(1))]],
        )));
        let f_sub = Region::new(1, vec![true], vec![vec![Interval::open(qi(0), q(2, 3))]]);
        let r = restrict_chart(&c, &f_sub, false).unwrap();
        assert!(r.zero_set().unwrap().set_eq(&c.footprint_preimage(&f_sub).unwrap()));
        assert!(r.footprint_region().unwrap().set_eq(&f_sub));
        let all = c.footprint_region().unwrap();
        let same = restrict_chart(&c, &all, false).unwrap();
        assert!(same.domain.set_eq(&c.domain));
    }

    #[test]
    fn precompact_restriction_of_a_point_footprint() {
        let c = Chart {
            id: IndexSet::single(1),
            domain: Region::open_box(&[(qi(-1), qi(1))]),
            obs_dim: 1,
            section: ExprMap::parse(1, &["x1"]).unwrap(),
            footprint: ExprMap::parse(1, &["x1"]).unwrap(),
            space_periodic: vec![false],
            zeros: None,
            embedding: None,
        };
        let f = c.footprint_region().unwrap();
        let r = restrict_chart(&c, &f, true).unwrap();
        assert!(r.domain.set_eq(&Region::open_box(&[(q(-1, 2), q(1, 2))])));
        assert!(r.domain.precompact_in(&c.domain));
    }

    #[test]
    fn map_axioms_examples() {
        let dom = strip(qi(0), qi(1));
        let c = circle_chart(dom.clone());
        let id = CoordChange::new(
            c.id,
            c.id,
            dom,
            ExprMap::identity(2),
            vec![],
            RationalMatrix::identity(1),
            vec![true, false],
        );
        let r = check_map_axioms(&id, &c, &c, &q(1, 16));
        assert!(r.ok(), "{}", r.text());

        let src = Chart {
            id: IndexSet::single(1),
            domain: Region::open_box(&[(qi(-1), qi(1))]),
            obs_dim: 1,
            section: ExprMap::parse(1, &["x1"]).unwrap(),
            footprint: ExprMap::parse(1, &["x1"]).unwrap(),
            space_periodic: vec![false],
            zeros: None,
            embedding: None,
        };
        let tgt = Chart {
            id: IndexSet::from_labels(&[1, 2]),
            domain: Region::open_box(&[(qi(-1), qi(1)), (qi(-1), qi(1))]),
            obs_dim: 1,
            section: ExprMap::parse(2, &["x2 + x1"]).unwrap(),
            footprint: ExprMap::parse(2, &["x1"]).unwrap(),
            space_periodic: vec![false],
            zeros: Some(Region::point(vec![false, false], &[qi(0), qi(0)])),
            embedding: None,
        };
        let phi = CoordChange::new(
            src.id,
            tgt.id,
            src.domain.clone(),
            ExprMap::parse(1, &["x1", "0"]).unwrap(),
            vec![],
            RationalMatrix::identity(1),
            vec![false, false],
        );
        let r = check_map_axioms(&phi, &src, &tgt, &q(1, 8));
        assert!(r.ok(), "{}", r.text());
    }

    #[test]
    fn index_condition_examples() {
        let src = Chart {
            id: IndexSet::single(1),
            domain: Region::open_box(&[(qi(-1), qi(1))]),
            obs_dim: 0,
            section: ExprMap::zero(1, 0),
            footprint: ExprMap::parse(1, &["x1"]).unwrap(),
            space_periodic: vec![false],
            zeros: None,
            embedding: None,
        };
        let mk = |s: &str| Chart {
            id: IndexSet::from_labels(&[1, 2]),
            domain: Region::open_box(&[(qi(-1), qi(1)), (qi(-1), qi(1))]),
            obs_dim: 1,
            section: ExprMap::parse(2, &[s]).unwrap(),
            footprint: ExprMap::parse(2, &["x1"]).unwrap(),
            space_periodic: vec![false],
            zeros: Some(Region::open_box(&[(qi(-1), qi(1))]).product(&Region::point(vec![false], &[qi(0)]))),
            embedding: None,
        };
        let phi = |t: &Chart| {
            CoordChange::new(
                src.id,
                t.id,
                src.domain.clone(),
                ExprMap::parse(1, &["x1", "0"]).unwrap(),
                vec![],
                RationalMatrix::zeros(1, 0),
                vec![false, false],
            )
        };
        let samples: Vec<Vec<Q>> = (-3..=3).map(|k| vec![q(k, 4)]).collect();
        let good = mk("x2");
        assert!(check_index_condition(&phi(&good), &src, &good, &samples).ok());
        let bad = mk("x2^2");
        assert_eq!(check_index_condition(&phi(&bad), &src, &bad, &samples).status, Status::Fail);
        let mut wrong_dim = good.clone();
        wrong_dim.obs_dim = 0;
        wrong_dim.section = ExprMap::zero(2, 0);
        assert_eq!(check_index_condition(&phi(&wrong_dim), &src, &wrong_dim, &samples).status, Status::Fail);
    }

    #[test]
    fn windowed_lift_and_composition() {
        // lift of (1/3, 1) ⊂ S^1 into (0, 2) ⊂ R by x -> x + 1
        let lift = AxisMap::from_affine(
            RationalMatrix::identity(1),
            vec![qi(1)],
            vec![true],
            vec![false],
            &[(0, q(1, 3))],
        )
        .unwrap();
        assert_eq!(lift.apply(&[q(1, 2)]), Some(vec![q(3, 2)]));
        assert_eq!(lift.apply(&[q(1, 6)]), Some(vec![q(13, 6)]));
        let arc = Region::new(1, vec![true], vec![vec![Interval::open(q(1, 3), qi(1))]]);
        let img = lift.image(&arc);
        assert!(img.set_eq(&Region::open_box(&[(q(4, 3), qi(2))])));
        let back = lift.preimage(&Region::open_box(&[(q(3, 2), q(5, 2))]), &Region::new(1, vec![true], vec![vec![Interval { lo: qi(0), hi: qi(1), lo_closed: true, hi_closed: false }]]));
        // x + 1 ∈ (3/2, 2) for x ∈ [1/3,1), x + 2 ∈ (3/2, 5/2) for x ∈ [0,1/3)
        let expect = Region::new(
            1,
            vec![true],
            vec![
                vec![Interval::open(q(1, 2), qi(1))],
                vec![Interval { lo: qi(0), hi: q(1, 3), lo_closed: true, hi_closed: false }],
            ],
        );
        assert!(back.set_eq(&expect), "{back}");
        assert_eq!(lift.inverse_point(&[q(3, 2)], &arc), Some(vec![q(1, 2)]));
        // projection back to the circle composed with the lift is the identity
        let proj = AxisMap::from_affine(RationalMatrix::identity(1), vec![qi(0)], vec![false], vec![true], &[]).unwrap();
        let round = lift.then(&proj, &arc).unwrap();
        for k in 1..12 {
            let x = q(k, 12);
            if arc.contains(&[x.clone()]) {
                assert_eq!(round.apply(&[x.clone()]), Some(vec![x]));
            }
        }
    }
}
