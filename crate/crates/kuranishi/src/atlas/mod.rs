//! Whole atlases: covering families with transition data, and the
//! validators for cocycle conditions, additivity and tameness.

pub mod file;
pub mod quotient;

pub use quotient::{
    build_quotient, diagnose_hausdorff, diagnose_injectivity, fiber_structure, FiberReport, QuotientSample,
};

use crate::chart::{
    check_index_condition, check_map_axioms, sample_points, AxisMap, Chart, ChartError, CoordChange, IndexSet,
};
use crate::geometry::Region;
use crate::linalg::{RationalMatrix, Q};
use crate::report::{CheckReport, Report, Status, Witness};
use num::Zero;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("atlas structure: {0}")]
    Structure(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocycleLevel {
    Weak,
    Standard,
    Strong,
}

impl fmt::Display for CocycleLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CocycleLevel::Weak => "weak",
            CocycleLevel::Standard => "standard",
            CocycleLevel::Strong => "strong",
        })
    }
}

impl std::str::FromStr for CocycleLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weak" => Ok(CocycleLevel::Weak),
            "standard" => Ok(CocycleLevel::Standard),
            "strong" => Ok(CocycleLevel::Strong),
            _ => Err(format!("unknown cocycle level `{s}`")),
        }
    }
}

/// Named family of subsets `V_I ⊆ U_I` stored alongside an atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionSpec {
    pub name: String,
    pub sets: BTreeMap<IndexSet, Region>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atlas {
    pub name: String,
    /// Virtual dimension `dim U_I − dim E_I`.
    pub dim: i64,
    pub space_periodic: Vec<bool>,
    pub n_basic: usize,
    pub charts: BTreeMap<IndexSet, Chart>,
    pub changes: BTreeMap<(IndexSet, IndexSet), CoordChange>,
    pub reductions: Vec<ReductionSpec>,
    /// Orientation sign per chart (default +1).
    pub orientation: BTreeMap<IndexSet, i32>,
}

impl Atlas {
    pub fn new(name: impl Into<String>, dim: i64, space_periodic: Vec<bool>) -> Atlas {
        Atlas {
            name: name.into(),
            dim,
            space_periodic,
            n_basic: 0,
            charts: BTreeMap::new(),
            changes: BTreeMap::new(),
            reductions: vec![],
            orientation: BTreeMap::new(),
        }
    }

    pub fn add_chart(&mut self, c: Chart) {
        if c.id.len() == 1 {
            self.n_basic = self.n_basic.max(c.id.labels()[0]);
        }
        self.charts.insert(c.id, c);
    }

    pub fn add_change(&mut self, cc: CoordChange) {
        self.changes.insert((cc.source, cc.target), cc);
    }

    pub fn index_sets(&self) -> Vec<IndexSet> {
        self.charts.keys().copied().collect()
    }

    pub fn chart(&self, i: IndexSet) -> &Chart {
        self.charts.get(&i).unwrap_or_else(|| panic!("no chart {i}"))
    }

    pub fn change(&self, i: IndexSet, j: IndexSet) -> Option<&CoordChange> {
        self.changes.get(&(i, j))
    }

    pub fn max_order(&self) -> usize {
        self.charts.keys().map(|i| i.len()).max().unwrap_or(0)
    }

    pub fn orientation_of(&self, i: IndexSet) -> i32 {
        self.orientation.get(&i).copied().unwrap_or(1)
    }

    /// `U_IJ`, with `U_II = U_I` and `∅` for missing pairs.
    pub fn domain(&self, i: IndexSet, j: IndexSet) -> Region {
        if i == j {
            return self.chart(i).domain.clone();
        }
        match self.change(i, j) {
            Some(cc) => cc.domain.clone(),
            None => self.chart(i).domain.empty_like(),
        }
    }

    /// `Φ_IJ`, or the identity change on `U_I` when `I = J`.
    pub fn change_or_identity(&self, i: IndexSet, j: IndexSet) -> Option<CoordChange> {
        if i == j {
            let c = self.chart(i);
            return Some(CoordChange::new(
                i,
                i,
                c.domain.clone(),
                crate::expr::ExprMap::identity(c.dim()),
                vec![],
                RationalMatrix::identity(c.obs_dim),
                c.domain.periodic.clone(),
            ));
        }
        self.change(i, j).cloned()
    }

    pub fn basic_footprint(&self, i: usize) -> Result<Region, AtlasError> {
        let c = self
            .charts
            .get(&IndexSet::single(i))
            .ok_or_else(|| AtlasError::Structure(format!("missing basic chart {i}")))?;
        Ok(c.footprint_region()?)
    }

    /// `F_I = ⋂_{i∈I} F_i`.
    pub fn footprint(&self, i: IndexSet) -> Result<Region, AtlasError> {
        let mut labels = i.labels().into_iter();
        let first = labels.next().ok_or_else(|| AtlasError::Structure("empty index set".into()))?;
        let mut f = self.basic_footprint(first)?;
        for l in labels {
            f = f.intersect(&self.basic_footprint(l)?);
        }
        Ok(f)
    }

    /// Index sets `I ⊆ {1..N}` with `F_I ≠ ∅`.
    pub fn nonempty_index_sets(&self) -> Result<Vec<IndexSet>, AtlasError> {
        let mut out = Vec::new();
        for i in IndexSet::all_nonempty(self.n_basic) {
            if !self.footprint(i)?.is_empty() {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Structural consistency: charts for exactly the index sets with
    /// nonempty footprint intersection, changes for all nested pairs, and
    /// footprint-compatible change domains.
    pub fn validate_structure(&self) -> CheckReport {
        let mut rep = CheckReport::pass("atlas structure");
        for c in self.charts.values() {
            if c.index() != self.dim {
                rep.fail_with(format!("chart {} has dim U − dim E = {}, atlas dimension {}", c.id, c.index(), self.dim), vec![]);
            }
            if c.space_periodic != self.space_periodic {
                rep.fail_with(format!("chart {} footprint space differs", c.id), vec![]);
            }
        }
        let ik = match self.nonempty_index_sets() {
            Ok(v) => v,
            Err(e) => {
                rep.fail_with(e.to_string(), vec![]);
                return rep;
            }
        };
        let ik_set: HashSet<IndexSet> = ik.iter().copied().collect();
        for i in &ik {
            match self.charts.get(i) {
                None => rep.fail_with(format!("F_{i} is nonempty but there is no chart {i}"), vec![]),
                Some(c) => match (c.footprint_region(), self.footprint(*i)) {
                    (Ok(a), Ok(b)) if a.set_eq(&b) => {}
                    (Ok(a), Ok(b)) => rep.fail_with(format!("chart {i} has footprint {a}, expected {b}"), vec![]),
                    (Err(e), _) => rep.fail_with(e.to_string(), vec![]),
                    (_, Err(e)) => rep.fail_with(e.to_string(), vec![]),
                },
            }
        }
        for i in self.charts.keys() {
            if !ik_set.contains(i) {
                rep.fail_with(format!("chart {i} has empty footprint intersection"), vec![]);
            }
        }
        for &i in &ik {
            for &j in &ik {
                if i.is_proper_subset(j) && self.change(i, j).is_none() {
                    rep.fail_with(format!("missing coordinate change {i} -> {j}"), vec![]);
                }
            }
        }
        for ((i, j), cc) in &self.changes {
            if !i.is_proper_subset(*j) || !self.charts.contains_key(i) || !self.charts.contains_key(j) {
                rep.fail_with(format!("change {i} -> {j} between unrelated or missing charts"), vec![]);
                continue;
            }
            let (ci, cj) = (self.chart(*i), self.chart(*j));
            if cc.linear.rows != cj.obs_dim || cc.linear.cols != ci.obs_dim || cc.linear.rank() != ci.obs_dim {
                rep.fail_with(format!("linear part of {i} -> {j} is not an injection E_{i} -> E_{j}"), vec![]);
            }
            if !cc.domain.is_subset(&ci.domain) {
                rep.fail_with(format!("U_{i}{j} is not contained in U_{i}"), vec![]);
            }
            // U_IJ ∩ s_I^{-1}(0) = ψ_I^{-1}(F_J)
            let lhs = ci.zero_set().map(|z| z.intersect(&cc.domain));
            let rhs = self.footprint(*j).map_err(|e| e.to_string()).and_then(|f| ci.footprint_preimage(&f).map_err(|e| e.to_string()));
            match (lhs, rhs) {
                (Ok(a), Ok(b)) if a.set_eq(&b) => {}
                (Ok(a), Ok(b)) => rep.fail_with(
                    format!("U_{i}{j} ∩ s^-1(0) = {a} differs from ψ^-1(F_{j}) = {b}"),
                    a.difference(&b).union(&b.difference(&a)).witness_point().map(|x| Witness::new("x", Some(*i), x)).into_iter().collect(),
                ),
                (Err(e), _) => rep.fail_with(e.to_string(), vec![]),
                (_, Err(e)) => rep.fail_with(e, vec![]),
            }
        }
        rep.push(format!("{} charts, {} coordinate changes, N = {}, M = {}", self.charts.len(), self.changes.len(), self.n_basic, self.max_order()));
        rep
    }

    /// Map axioms and index condition for every coordinate change.
    pub fn validate_changes(&self, h: &Q) -> Report {
        let mut out = Report::default();
        for cc in self.changes.values() {
            let (src, tgt) = (self.chart(cc.source), self.chart(cc.target));
            out.add(check_map_axioms(cc, src, tgt, h));
            let zero = src.zero_set().map(|z| z.intersect(&cc.domain)).unwrap_or_else(|_| cc.domain.clone());
            let mut samples = sample_points(&zero, h);
            if samples.len() > 64 {
                let step = samples.len() / 64;
                samples = samples.into_iter().step_by(step).collect();
            }
            out.add(check_index_condition(cc, src, tgt, &samples));
        }
        out
    }

    fn nested_triples(&self) -> Vec<(IndexSet, IndexSet, IndexSet)> {
        let ids = self.index_sets();
        let mut out = Vec::new();
        for &i in &ids {
            for &j in &ids {
                if !i.is_proper_subset(j) {
                    continue;
                }
                for &k in &ids {
                    if j.is_proper_subset(k) {
                        out.push((i, j, k));
                    }
                }
            }
        }
        out
    }

    pub fn validate_cocycles(&self, level: CocycleLevel, h: &Q) -> CheckReport {
        let mut rep = CheckReport::pass(format!("{level} cocycle condition"));
        let triples = self.nested_triples();
        if triples.is_empty() {
            rep.push("no nested triples I ⊊ J ⊊ K: condition vacuous");
            return rep;
        }
        for (i, j, k) in triples {
            let (Some(ij), Some(jk), Some(ik)) = (self.change(i, j), self.change(j, k), self.change(i, k)) else {
                rep.fail_with(format!("missing change among {i}, {j}, {k}"), vec![]);
                continue;
            };
            if jk.linear.mul(&ij.linear) != ik.linear {
                rep.fail_with(format!("linear parts: φ̂_{j}{k} φ̂_{i}{j} ≠ φ̂_{i}{k}"), vec![]);
            }
            match cocycle_triple(ij, jk, ik, level, h) {
                Ok(None) => {}
                Ok(Some((msg, w))) => rep.fail_with(format!("({i},{j},{k}): {msg}"), w.map(|x| Witness::new("x", Some(i), x)).into_iter().collect()),
                Err(e) => rep.fail_with(format!("({i},{j},{k}): {e}"), vec![]),
            }
        }
        rep
    }

    pub fn validate_additivity(&self) -> CheckReport {
        let mut rep = CheckReport::pass("additivity");
        for (&id, c) in &self.charts {
            let mut blocks: Vec<RationalMatrix> = Vec::new();
            for l in id.labels() {
                let s = IndexSet::single(l);
                if s == id {
                    blocks.push(RationalMatrix::identity(c.obs_dim));
                } else if let Some(cc) = self.change(s, id) {
                    blocks.push(cc.linear.clone());
                } else {
                    rep.fail_with(format!("missing change {s} -> {id}"), vec![]);
                }
            }
            let total: usize = blocks.iter().map(|b| b.cols).sum();
            let stacked = blocks
                .iter()
                .skip(1)
                .fold(blocks.first().cloned().unwrap_or_else(|| RationalMatrix::zeros(c.obs_dim, 0)), |a, b| a.hstack(b));
            if total != c.obs_dim || stacked.rank() != c.obs_dim {
                rep.fail_with(
                    format!("E_{id} (dim {}) is not the direct sum of the images of E_i (total dim {total}, rank {})", c.obs_dim, stacked.rank()),
                    vec![],
                );
            }
        }
        rep
    }

    /// `U_IJ ∩ U_IK = U_I(J∪K)` and `φ_IJ(U_IK) = U_JK ∩ s_J^{-1}(φ̂_IJ(E_I))`.
    pub fn validate_tameness(&self, h: &Q) -> CheckReport {
        let mut rep = CheckReport::pass("tameness");
        let ids = self.index_sets();
        let mut first_fail: Option<String> = None;
        let mut n1 = 0;
        let mut n2 = 0;
        for &i in &ids {
            for &j in &ids {
                if !i.is_subset(j) {
                    continue;
                }
                for &k in &ids {
                    if !i.is_subset(k) {
                        continue;
                    }
                    let l = j.union(k);
                    let lhs = self.domain(i, j).intersect(&self.domain(i, k));
                    let rhs = if self.charts.contains_key(&l) { self.domain(i, l) } else { lhs.empty_like() };
                    n1 += 1;
                    if !lhs.set_eq(&rhs) {
                        let w = lhs.difference(&rhs).union(&rhs.difference(&lhs)).witness_point();
                        let msg = format!("tame1 fails: U_{i}{j} ∩ U_{i}{k} ≠ U_{i}{l}");
                        first_fail.get_or_insert(msg.clone());
                        rep.fail_with(msg, w.map(|x| Witness::new("x", Some(i), x)).into_iter().collect());
                    }
                }
                for &k in &ids {
                    if !j.is_subset(k) || i == j {
                        continue;
                    }
                    n2 += 1;
                    match self.tame2(i, j, k, h) {
                        Ok(None) => {}
                        Ok(Some((msg, w))) => {
                            let msg = format!("tame2 fails for ({i},{j},{k}): {msg}");
                            first_fail.get_or_insert(msg.clone());
                            rep.fail_with(msg, w.map(|x| Witness::new("y", Some(j), x)).into_iter().collect());
                        }
                        Err(e) => rep.fail_with(format!("tame2 ({i},{j},{k}): {e}"), vec![]),
                    }
                }
            }
        }
        rep.push(format!("{n1} tame1 identities and {n2} tame2 identities checked"));
        let add = self.validate_additivity();
        if !add.ok() {
            for d in &add.details {
                rep.fail_with(format!("not additive: {d}"), vec![]);
            }
        }
        if rep.status == Status::Pass {
            let strong = self.validate_cocycles(CocycleLevel::Strong, h);
            if strong.ok() {
                rep.push("strong cocycle condition re-verified");
            } else {
                rep.fail_with("tame atlas fails the strong cocycle condition", strong.witnesses.clone());
            }
        }
        rep
    }

    /// `None` when `φ_IJ(U_IK) = U_JK ∩ s_J^{-1}(φ̂_IJ(E_I))`, otherwise a
    /// message and a witness in `U_J`.
    fn tame2(&self, i: IndexSet, j: IndexSet, k: IndexSet, h: &Q) -> Result<Option<(String, Option<Vec<Q>>)>, AtlasError> {
        let Some(ij) = self.change(i, j) else { return Ok(Some(("missing change".into(), None))) };
        let cj = self.chart(j);
        let u_ik = self.domain(i, k);
        let u_jk = self.domain(j, k);
        if ij.axis.is_some() {
            let lhs = ij.image(&u_ik)?;
            let rhs = cj.section_preimage_of_image(&ij.linear, &u_jk)?;
            if lhs.set_eq(&rhs) {
                return Ok(None);
            }
            let extra = lhs.difference(&rhs);
            let missing = rhs.difference(&lhs);
            let msg = if !missing.is_empty() {
                format!("points of U_{j}{k} ∩ s^-1(φ̂(E_{i})) outside φ(U_{i}{k}), e.g. {missing}")
            } else {
                format!("φ(U_{i}{k}) leaves U_{j}{k} ∩ s^-1(φ̂(E_{i})) at {extra}")
            };
            return Ok(Some((msg, missing.union(&extra).witness_point())));
        }
        // sampled fallback: φ(U_IK) ⊆ U_JK ∩ s_J^{-1}(im φ̂)
        let p = crate::chart::annihilator(&ij.linear).to_f64();
        for x in sample_points(&u_ik, h) {
            let y = ij.apply_q(&x);
            let s = cj.section_f64(&crate::chart::qf(&y));
            let off = p.iter().map(|r| r.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
            if !u_jk.contains(&y) || off > 1e-9 {
                return Ok(Some(("sampled image leaves the target set".into(), Some(y))));
            }
        }
        Ok(None)
    }

    /// Every check the atlas should satisfy at the given cocycle level.
    pub fn validate(&self, level: CocycleLevel, h: &Q) -> Report {
        let mut out = Report::default();
        out.add(self.validate_structure());
        for c in self.validate_changes(h).checks {
            out.add(c);
        }
        out.add(self.validate_cocycles(level, h));
        out.add(self.validate_additivity());
        out.add(self.validate_tameness(h));
        out
    }

    /// Exact equivalence class of `(I, x)` under all coordinate changes and
    /// their inverses, capped at `limit` points.
    pub fn orbit(&self, i: IndexSet, x: &[Q], limit: usize) -> Vec<(IndexSet, Vec<Q>)> {
        let start = (i, crate::chart::wrap_point(x, self.chart(i).periodic()));
        let mut seen: HashSet<(IndexSet, Vec<Q>)> = HashSet::new();
        let mut out = vec![start.clone()];
        seen.insert(start.clone());
        let mut queue = VecDeque::from([start]);
        while let Some((k, z)) = queue.pop_front() {
            if out.len() >= limit {
                break;
            }
            let mut next: Vec<(IndexSet, Vec<Q>)> = Vec::new();
            for cc in self.changes.values() {
                if cc.source == k && cc.domain.contains(&z) {
                    next.push((cc.target, cc.apply_q(&z)));
                } else if cc.target == k {
                    if let Some(w) = cc.inverse_point(&z) {
                        next.push((cc.source, w));
                    }
                }
            }
            for n in next {
                if seen.insert(n.clone()) {
                    out.push(n.clone());
                    queue.push_back(n);
                }
            }
        }
        out
    }

    /// `ε_J(S_I) = φ_{J(I∪J)}^{-1}(φ_{I(I∪J)}(S_I))`, empty when `I ∪ J` is
    /// not an index set of the atlas.
    pub fn eps_set(&self, j: IndexSet, i: IndexSet, s: &Region) -> Result<Region, AtlasError> {
        let l = i.union(j);
        let cj = self.chart(j);
        if !self.charts.contains_key(&l) {
            return Ok(cj.domain.empty_like());
        }
        let up = if i == l {
            s.intersect(&self.chart(i).domain)
        } else {
            self.change(i, l).ok_or_else(|| AtlasError::Structure(format!("missing change {i} -> {l}")))?.image(s)?
        };
        if j == l {
            return Ok(up);
        }
        Ok(self.change(j, l).ok_or_else(|| AtlasError::Structure(format!("missing change {j} -> {l}")))?.preimage(&up)?)
    }
}

type TripleOutcome = Option<(String, Option<Vec<Q>>)>;

fn cocycle_triple(
    ij: &CoordChange,
    jk: &CoordChange,
    ik: &CoordChange,
    level: CocycleLevel,
    h: &Q,
) -> Result<TripleOutcome, ChartError> {
    if let (Some(a_ij), Some(a_jk), Some(a_ik)) = (&ij.axis, &jk.axis, &ik.axis) {
        let dom = ij.preimage(&jk.domain)?;
        let overlap = dom.intersect(&ik.domain);
        let comp = a_ij.then(a_jk, &overlap).ok_or_else(|| ChartError::Composition("composite not axis-affine".into()))?;
        if let Some(w) = first_disagreement(&comp, a_ik, &overlap) {
            return Ok(Some(("φ_JK ∘ φ_IJ ≠ φ_IK on the overlap".into(), Some(w))));
        }
        match level {
            CocycleLevel::Weak => {}
            CocycleLevel::Standard => {
                if !dom.is_subset(&ik.domain) {
                    return Ok(Some(("φ_IJ^-1(U_JK) ⊄ U_IK".into(), dom.difference(&ik.domain).witness_point())));
                }
            }
            CocycleLevel::Strong => {
                if !dom.set_eq(&ik.domain) {
                    let diff = dom.difference(&ik.domain).union(&ik.domain.difference(&dom));
                    return Ok(Some(("φ_IJ^-1(U_JK) ≠ U_IK".into(), diff.witness_point())));
                }
            }
        }
        return Ok(None);
    }
    // sampled fallback
    let mut outside: Option<Vec<Q>> = None;
    for x in sample_points(&ij.domain, h) {
        let y = ij.apply_q(&x);
        let in_jk = jk.domain.contains(&y);
        let in_ik = ik.domain.contains(&x);
        if in_jk && in_ik {
            let a = jk.apply_f64(&crate::chart::qf(&y));
            let b = ik.apply_f64(&crate::chart::qf(&x));
            if a.iter().zip(&b).any(|(p, q)| (p - q).abs() > 1e-9) {
                return Ok(Some(("φ_JK ∘ φ_IJ ≠ φ_IK at a sample".into(), Some(x))));
            }
        }
        if in_jk && !in_ik && level != CocycleLevel::Weak {
            outside.get_or_insert(x);
        }
    }
    if let Some(x) = outside {
        return Ok(Some(("φ_IJ^-1(U_JK) ⊄ U_IK at a sample".into(), Some(x))));
    }
    if level == CocycleLevel::Strong {
        for x in sample_points(&ik.domain, h) {
            if !ij.domain.contains(&x) || !jk.domain.contains(&ij.apply_q(&x)) {
                return Ok(Some(("U_IK ⊄ φ_IJ^-1(U_JK) at a sample".into(), Some(x))));
            }
        }
    }
    Ok(None)
}

/// A point of `within` where two piecewise maps differ (periodic outputs
/// compared mod 1).
fn first_disagreement(f: &AxisMap, g: &AxisMap, within: &Region) -> Option<Vec<Q>> {
    for p in &f.pieces {
        let rp = f.piece_region(p, within);
        if rp.is_empty() {
            continue;
        }
        for q in &g.pieces {
            let both = g.piece_region(q, &rp);
            if both.is_empty() {
                continue;
            }
            let same = p.a == q.a
                && p.b.iter().zip(&q.b).zip(&f.out_periodic).all(|((x, y), &per)| {
                    let d = x - y;
                    if per {
                        d.is_integer()
                    } else {
                        d.is_zero()
                    }
                });
            if !same {
                return both.witness_point();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests;
