//! Shrinkings of weak atlases, the level-by-level tame shrinking, and a
//! shortest-path metric on the sampled realization.

use crate::atlas::quotient::{build_quotient, QuotientSample};
use crate::atlas::{Atlas, AtlasError, CocycleLevel};
use crate::chart::{restrict_chart, ChartError, IndexSet};
use crate::geometry::{CellGrid, Region};
use crate::linalg::{qi, to_f64, Q};
use crate::report::{fmt_point, CheckReport, Witness};
use num::{One, Zero};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LemmaError {
    #[error("lemma hypothesis fails: {msg}")]
    Hypothesis { msg: String, witness: Option<Vec<Q>> },
    /// The cell complex has a cell whose neighbouring zero-set faces carry
    /// incomparable label sets and `W_K` misses it; no union of cells works.
    #[error("no cell family for K = {k}: cell near {} needs W_{k}", fmt_point(.witness))]
    Corner { k: IndexSet, witness: Vec<Q> },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShrinkError {
    #[error("shrinking loses the footprint of {0}")]
    LostFootprint(IndexSet),
    #[error("U'_{0} is not contained in U_{0}")]
    NotSubset(IndexSet),
    #[error("shrunk footprints no longer cover X")]
    CoverLost,
    #[error("shrunk atlas is invalid: {0}")]
    Invalid(String),
    #[error("taming level {level}, condition {condition}: {msg}{}", .witness.as_ref().map(|w| format!(" (witness {w})")).unwrap_or_default())]
    Taming { level: usize, condition: String, msg: String, witness: Option<Witness> },
    #[error("taming level {level}, index set {index}: {source}")]
    Lemma { level: usize, index: IndexSet, source: LemmaError },
    #[error("atlas is not tame: {0}")]
    NotTame(String),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

/// Replaces the chart domains by the given subsets (missing entries keep
/// `U_I`) and restricts the changes to `U_IJ ∩ U'_I ∩ φ_IJ^{-1}(U'_J)`.
pub fn shrink(a: &Atlas, new_domains: &BTreeMap<IndexSet, Region>) -> Result<Atlas, ShrinkError> {
    let mut out = a.clone();
    for (&i, c) in &a.charts {
        if let Some(u) = new_domains.get(&i) {
            if !u.is_subset(&c.domain) {
                return Err(ShrinkError::NotSubset(i));
            }
            out.charts.insert(i, c.with_domain(u.clone()));
        }
    }
    let basic: Vec<Region> = (1..=a.n_basic).map(|l| out.basic_footprint(l)).collect::<Result<_, _>>()?;
    for (&i, c) in &out.charts {
        let f_old = a.footprint(i)?;
        let mut f_new = f_old.clone();
        for l in i.labels() {
            f_new = f_new.intersect(&basic[l - 1]);
        }
        if !f_old.is_empty() && f_new.is_empty() {
            return Err(ShrinkError::LostFootprint(i));
        }
        if !c.footprint_region()?.set_eq(&f_new) {
            return Err(ShrinkError::Invalid(format!("footprint of U'_{i} is not F'_{i}")));
        }
    }
    let x = Region::union_all(basic[0].dim, basic[0].periodic.clone(), a.charts.values().filter(|c| c.id.len() == 1).map(|c| c.footprint_region()).collect::<Result<Vec<_>, _>>()?.iter());
    let x_new = Region::union_all(x.dim, x.periodic.clone(), basic.iter());
    if !x.is_subset(&x_new) {
        return Err(ShrinkError::CoverLost);
    }
    let keys: Vec<_> = a.changes.keys().copied().collect();
    for (i, j) in keys {
        let cc = &a.changes[&(i, j)];
        let d = cc.domain.intersect(&out.chart(i).domain).intersect(&cc.preimage(&out.chart(j).domain)?);
        out.changes.insert((i, j), cc.with_domain(d));
    }
    let h = Q::new(1.into(), 32.into());
    for rep in [out.validate_structure(), out.validate_cocycles(CocycleLevel::Weak, &h), out.validate_additivity()] {
        if !rep.ok() {
            return Err(ShrinkError::Invalid(rep.text()));
        }
    }
    Ok(out)
}

/// Shrinking with prescribed basic footprints `F'_i ⊆ F_i`: each `U'_I` is
/// a precompact neighbourhood of `ψ_I^{-1}(F'_I)`.
pub fn shrink_to_footprints(a: &Atlas, fprime: &[Region]) -> Result<Atlas, ShrinkError> {
    let mut doms = BTreeMap::new();
    for &i in &a.index_sets() {
        let mut f = a.footprint(i)?;
        for l in i.labels() {
            f = f.intersect(&fprime[l - 1]);
        }
        if f.is_empty() {
            return Err(ShrinkError::LostFootprint(i));
        }
        doms.insert(i, restrict_chart(a.chart(i), &f, true)?.domain);
    }
    shrink(a, &doms)
}

/// Cell version of the open-sets lemma. Given `Z ⊆ U'` relatively closed,
/// `Z_i ⊆ Z` relatively open and opens `W_K ⊆ U'` with `W_K ∩ Z = Z_K`,
/// returns `U_K` with `Z_K ⊆ U_K ⊆ W_K` and `U_J ∩ U_K = U_{J∪K}`.
///
/// On the common cell complex a cell `c` gets the label set `T(c)`, the
/// union of the labels of the zero-set cells in its closure, and
/// `U_K = {c : K ⊆ T(c)}`. Those sets are open, and the intersection identity
/// holds by construction.
pub fn open_sets_lemma(
    u_prime: &Region,
    z: &Region,
    zi: &BTreeMap<usize, Region>,
    w: &BTreeMap<IndexSet, Region>,
) -> Result<BTreeMap<IndexSet, Region>, LemmaError> {
    let mut all: Vec<&Region> = vec![u_prime, z];
    all.extend(zi.values());
    all.extend(w.values());
    let grid = CellGrid::new(u_prime.dim, u_prime.periodic.clone(), &all);
    let ru = grid.rasterize(u_prime);
    let rz = grid.rasterize(z);
    let rzi: BTreeMap<usize, Vec<bool>> = zi.iter().map(|(&i, r)| (i, grid.rasterize(r))).collect();
    let rw: BTreeMap<IndexSet, Vec<bool>> = w.iter().map(|(&k, r)| (k, grid.rasterize(r))).collect();
    let mid = |c: usize| -> Vec<Q> {
        grid.cell_box(c).iter().map(|iv| if iv.is_point() { iv.lo.clone() } else { (&iv.lo + &iv.hi) / qi(2) }).collect()
    };
    let hyp = |msg: String, c: usize| LemmaError::Hypothesis { msg, witness: Some(mid(c)) };
    let labels: Vec<usize> = zi.keys().copied().collect();
    let sigma: Vec<IndexSet> = (0..grid.len())
        .map(|c| labels.iter().filter(|l| rzi[l][c]).fold(IndexSet(0), |s, &l| s.union(IndexSet::single(l))))
        .collect();

    for c in 0..grid.len() {
        if rz[c] && !ru[c] {
            return Err(hyp("Z is not contained in U'".into(), c));
        }
        if rz[c] && grid.closure_cells(c).into_iter().any(|f| ru[f] && !rz[f]) {
            return Err(hyp("Z is not relatively closed in U'".into(), c));
        }
        for (&l, r) in &rzi {
            if r[c] && !rz[c] {
                return Err(hyp(format!("Z_{l} is not contained in Z"), c));
            }
            if r[c] && grid.star(c).into_iter().any(|s| rz[s] && !r[s]) {
                return Err(hyp(format!("Z_{l} is not relatively open in Z"), c));
            }
        }
        for (&k, r) in &rw {
            if r[c] && !ru[c] {
                return Err(hyp(format!("W_{k} is not contained in U'"), c));
            }
            if r[c] && grid.star(c).into_iter().any(|s| !r[s]) {
                return Err(hyp(format!("W_{k} is not open"), c));
            }
        }
        if rz[c] {
            for k in subsets(&labels) {
                let in_w = rw.get(&k).map(|r| r[c]).unwrap_or(false);
                if in_w != k.is_subset(sigma[c]) {
                    return Err(hyp(format!("W_{k} ∩ Z ≠ Z_{k}"), c));
                }
            }
        } else if let Some((k, _)) = rw.iter().find(|(k, r)| r[c] && k.is_empty()) {
            return Err(hyp(format!("W_{k} has an empty label set"), c));
        }
    }

    let t: Vec<IndexSet> = (0..grid.len())
        .map(|c| {
            if !ru[c] {
                return IndexSet(0);
            }
            grid.closure_cells(c).into_iter().filter(|&f| rz[f]).fold(IndexSet(0), |s, f| s.union(sigma[f]))
        })
        .collect();
    for c in 0..grid.len() {
        for k in subsets(&t[c].labels()) {
            if !rw.get(&k).map(|r| r[c]).unwrap_or(false) {
                return Err(LemmaError::Corner { k, witness: mid(c) });
            }
        }
    }
    let mut out = BTreeMap::new();
    for &k in w.keys() {
        let cells: Vec<bool> = t.iter().map(|tc| !k.is_empty() && k.is_subset(*tc)).collect();
        out.insert(k, grid.to_region(&cells));
    }
    Ok(out)
}

/// Nonempty subsets of the given labels.
fn subsets(labels: &[usize]) -> Vec<IndexSet> {
    (1u32..(1 << labels.len()))
        .map(|m| IndexSet::from_labels(&labels.iter().enumerate().filter(|(b, _)| m & (1 << b) != 0).map(|(_, &l)| l).collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TameShrink {
    pub atlas: Atlas,
    /// The shrunk basic footprints `F'_i`.
    pub footprints: Vec<Region>,
    pub eps: Q,
    /// Per-level dumps of all domains `U^{(k)}_IJ`.
    pub transcript: Vec<String>,
    pub checks: Vec<CheckReport>,
}

type Doms = BTreeMap<(IndexSet, IndexSet), Region>;

struct Taming<'a> {
    a: &'a Atlas,
    ids: Vec<IndexSet>,
    dom: Doms,
    fprime: Vec<Region>,
}

impl<'a> Taming<'a> {
    fn get(&self, i: IndexSet, j: IndexSet) -> Region {
        match self.dom.get(&(i, j)) {
            Some(r) => r.clone(),
            None => self.a.chart(i).domain.empty_like(),
        }
    }

    fn has(&self, i: IndexSet) -> bool {
        self.a.charts.contains_key(&i)
    }

    /// `φ_IJ^{-1}(T)`, the identity when `I = J`.
    fn pre(&self, i: IndexSet, j: IndexSet, t: &Region) -> Result<Region, ShrinkError> {
        if i == j {
            return Ok(t.clone());
        }
        Ok(self.a.change(i, j).expect("change").preimage(t)?)
    }

    fn image(&self, i: IndexSet, j: IndexSet, s: &Region) -> Result<Region, ShrinkError> {
        if i == j {
            return Ok(s.clone());
        }
        Ok(self.a.change(i, j).expect("change").image(s)?)
    }

    /// `s_J^{-1}(φ̂_IJ(E_I)) ∩ within`, with `I = ∅` meaning the zero set.
    fn sec_pre(&self, j: IndexSet, i: IndexSet, within: &Region) -> Result<Region, ShrinkError> {
        let cj = self.a.chart(j);
        if i.is_empty() {
            return Ok(cj.zero_set()?.intersect(within));
        }
        if i == j {
            return Ok(within.clone());
        }
        Ok(cj.section_preimage_of_image(&self.a.change(i, j).expect("change").linear, within)?)
    }

    fn fprime_of(&self, j: IndexSet) -> Region {
        let mut f = self.fprime[j.labels()[0] - 1].clone();
        for l in j.labels() {
            f = f.intersect(&self.fprime[l - 1]);
        }
        f
    }

    fn dump(&self, level: usize) -> String {
        let mut s = format!("# level {level}\n");
        for ((i, j), r) in &self.dom {
            let _ = writeln!(s, "domain {i} -> {j} {r}");
        }
        s
    }

    fn step_a(&mut self, k: usize) -> Result<(), ShrinkError> {
        let level_sets: Vec<IndexSet> = self.ids.iter().copied().filter(|i| i.len() == k).collect();
        for i in level_sets {
            let up = self.get(i, i);
            let mut z = self.sec_pre(i, IndexSet(0), &up)?;
            for &hh in &self.ids {
                if hh.is_proper_subset(i) {
                    z = z.union(&self.sec_pre(i, hh, &up)?);
                }
            }
            let mut zi = BTreeMap::new();
            for l in 1..=self.a.n_basic {
                let il = i.union(IndexSet::single(l));
                if !i.contains(l) && self.has(il) {
                    zi.insert(l, self.get(i, il).intersect(&z));
                }
            }
            let mut w = BTreeMap::new();
            for &kk in &self.ids {
                if !i.is_proper_subset(kk) {
                    continue;
                }
                let mut wk = up.clone();
                for &j in &self.ids {
                    if i.is_subset(j) && j.is_subset(kk) {
                        wk = wk.intersect(&self.pre(i, j, &self.get(j, kk))?).intersect(&self.get(i, j));
                    }
                }
                w.insert(IndexSet(kk.0 & !i.0), wk);
            }
            let fam = open_sets_lemma(&up, &z, &zi, &w).map_err(|e| ShrinkError::Lemma { level: k, index: i, source: e })?;
            for (kp, u) in fam {
                self.dom.insert((i, kp.union(i)), u);
            }
        }
        Ok(())
    }

    fn step_b(&mut self, k: usize) -> Result<(), ShrinkError> {
        let mut updates = Vec::new();
        for &j in &self.ids {
            if j.len() <= k {
                continue;
            }
            for &kk in &self.ids {
                if !j.is_subset(kk) {
                    continue;
                }
                let djk = self.get(j, kk);
                let mut removed = djk.empty_like();
                for &i in &self.ids {
                    if i.len() == k && i.is_proper_subset(j) {
                        let t = self.sec_pre(j, i, &djk)?;
                        removed = removed.union(&t.difference(&self.image(i, j, &self.get(i, kk))?));
                    }
                }
                updates.push(((j, kk), djk.difference(&removed)));
            }
        }
        for (key, r) in updates {
            self.dom.insert(key, r);
        }
        Ok(())
    }

    /// The level-`k` conditions: zero sets `(i)`, intersections `(ii)` and
    /// images `(iii)`, plus the derived identity for `U^{(k)}_IJ`.
    fn check_level(&self, k: usize) -> Result<CheckReport, ShrinkError> {
        let mut rep = CheckReport::pass(format!("taming level {k}"));
        let fail = |condition: &str, msg: String, chart: IndexSet, diff: Region| ShrinkError::Taming {
            level: k,
            condition: condition.into(),
            msg,
            witness: diff.witness_point().map(|x| Witness::new("x", Some(chart), x)),
        };
        let sym = |a: &Region, b: &Region| a.difference(b).union(&b.difference(a));
        let mut counts = [0usize; 4];
        for &i in &self.ids {
            for &j in &self.ids {
                if !i.is_subset(j) {
                    continue;
                }
                let dij = self.get(i, j);
                let lhs = self.a.chart(i).zero_set()?.intersect(&dij);
                let rhs = self.a.chart(i).footprint_preimage(&self.fprime_of(j))?;
                counts[0] += 1;
                if !lhs.set_eq(&rhs) {
                    return Err(fail("(i)", format!("U_{i}{j} ∩ s^-1(0) ≠ ψ^-1(F'_{j})"), i, sym(&lhs, &rhs)));
                }
                if i.len() > k {
                    continue;
                }
                for &kk in &self.ids {
                    if !i.is_subset(kk) {
                        continue;
                    }
                    let l = j.union(kk);
                    let lhs = dij.intersect(&self.get(i, kk));
                    let rhs = if self.has(l) { self.get(i, l) } else { lhs.empty_like() };
                    counts[1] += 1;
                    if !lhs.set_eq(&rhs) {
                        return Err(fail("(ii)", format!("U_{i}{j} ∩ U_{i}{kk} ≠ U_{i}{l}"), i, sym(&lhs, &rhs)));
                    }
                    if i != j && j.is_subset(kk) {
                        let lhs = self.image(i, j, &self.get(i, kk))?;
                        let rhs = self.sec_pre(j, i, &self.get(j, kk))?;
                        counts[2] += 1;
                        if !lhs.set_eq(&rhs) {
                            return Err(fail("(iii)", format!("φ_{i}{j}(U_{i}{kk}) ≠ U_{j}{kk} ∩ s^-1(E_{i})"), j, sym(&lhs, &rhs)));
                        }
                    }
                }
                if i != j {
                    let rhs = self.get(i, i).intersect(&self.pre(i, j, &self.get(j, j))?);
                    counts[3] += 1;
                    if !dij.set_eq(&rhs) {
                        return Err(fail("kclaim", format!("U_{i}{j} ≠ U_{i} ∩ φ^-1(U_{j})"), i, sym(&dij, &rhs)));
                    }
                }
            }
        }
        rep.push(format!("(i) {} (ii) {} (iii) {} kclaim {} identities", counts[0], counts[1], counts[2], counts[3]));
        Ok(rep)
    }
}

/// Shrunk basic footprints `F'_i = F_i` eroded by `ε` inside `X`, with `ε`
/// halved from `eps0` until the `F'_i` cover `X` and no `F'_I` is lost.
pub fn erode_footprints(a: &Atlas, eps0: &Q) -> Result<(Vec<Region>, Q), ShrinkError> {
    let basic: Vec<Region> = (1..=a.n_basic).map(|l| a.basic_footprint(l)).collect::<Result<_, _>>()?;
    let x = Region::union_all(basic[0].dim, basic[0].periodic.clone(), basic.iter());
    let mut eps = eps0.clone();
    for _ in 0..30 {
        let fp: Vec<Region> = basic.iter().map(|f| f.erode_within(&x, &eps)).collect();
        let covers = x.is_subset(&Region::union_all(x.dim, x.periodic.clone(), fp.iter()));
        let kept = a.index_sets().iter().all(|i| {
            let ls = i.labels();
            ls.iter().fold(fp[ls[0] - 1].clone(), |f, l| f.intersect(&fp[l - 1])).witness_point().is_some()
        });
        if covers && kept {
            return Ok((fp, eps));
        }
        eps /= qi(2);
    }
    Err(ShrinkError::CoverLost)
}

/// Tame shrinking of an additive weak atlas.
pub fn tame_shrink(a: &Atlas, h: &Q) -> Result<TameShrink, ShrinkError> {
    tame_shrink_from(a, &Q::new(1.into(), 8.into()), h)
}

pub fn tame_shrink_from(a: &Atlas, eps0: &Q, h: &Q) -> Result<TameShrink, ShrinkError> {
    for rep in [a.validate_structure(), a.validate_cocycles(CocycleLevel::Weak, h), a.validate_additivity()] {
        if !rep.ok() {
            return Err(ShrinkError::Invalid(rep.text()));
        }
    }
    let (fprime, eps) = erode_footprints(a, eps0)?;
    let mut st = Taming { a, ids: a.index_sets(), dom: BTreeMap::new(), fprime };
    let mut u0 = BTreeMap::new();
    for &i in &st.ids {
        let f = st.fprime_of(i).intersect(&a.footprint(i)?);
        u0.insert(i, restrict_chart(a.chart(i), &f, true)?.domain);
    }
    for &i in &st.ids {
        st.dom.insert((i, i), u0[&i].clone());
        for &j in &st.ids {
            if i.is_proper_subset(j) {
                let cc = a.change(i, j).expect("change");
                let d = cc.domain.intersect(&u0[&i]).intersect(&cc.preimage(&u0[&j])?);
                st.dom.insert((i, j), d);
            }
        }
    }
    let mut transcript = vec![st.dump(0)];
    let mut checks = vec![st.check_level(0)?];
    for k in 1..=a.max_order() {
        st.step_a(k)?;
        st.step_b(k)?;
        transcript.push(st.dump(k));
        checks.push(st.check_level(k)?);
    }
    let mut out = a.clone();
    for &i in &st.ids {
        out.charts.insert(i, a.chart(i).with_domain(st.get(i, i)));
        for &j in &st.ids {
            if i.is_proper_subset(j) {
                out.changes.insert((i, j), a.change(i, j).expect("change").with_domain(st.get(i, j)));
            }
        }
    }
    out.name = format!("{}-tame", a.name);
    let tame = out.validate_tameness(h);
    if !tame.ok() {
        return Err(ShrinkError::NotTame(tame.text()));
    }
    checks.push(tame);
    Ok(TameShrink { footprints: st.fprime, atlas: out, eps, transcript, checks })
}

/// Two nested tame shrinkings: the second is taken inside the first with
/// half the footprint erosion.
pub fn preshrunk_tame(a: &Atlas, h: &Q) -> Result<(TameShrink, TameShrink), ShrinkError> {
    let outer = tame_shrink(a, h)?;
    let inner = tame_shrink_from(&outer.atlas, &(&outer.eps / qi(2)), h)?;
    Ok((outer, inner))
}

#[derive(Debug, Clone)]
pub struct MetricSample {
    pub h: Q,
    pub classes: usize,
    pub sources: usize,
    /// Extremes of `d(πx, πy) / |x − y|_∞` over sampled pairs in one chart.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Largest `|d(πx, πz) − d(πφx, πz)|`, in units of `h`.
    pub isometry_defect: i64,
    /// Sampled pairs in one chart whose classes are not joined by a path.
    pub unreachable: usize,
    pub report: CheckReport,
}

/// Classes of a sampled quotient joined along lattice edges.
pub struct ClassGraph {
    pub class_id: Vec<usize>,
    pub adj: Vec<Vec<usize>>,
}

impl ClassGraph {
    pub fn new(qs: &QuotientSample) -> Self {
        let n = qs.node_count();
        let mut class_id = vec![usize::MAX; n];
        for (c, members) in qs.classes().into_iter().enumerate() {
            for &m in members {
                class_id[m] = c;
            }
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); qs.class_count()];
        for v in 0..n {
            for (w, _, _) in qs.lattice_neighbours(v) {
                let (cv, cw) = (class_id[v], class_id[w]);
                if cv != cw {
                    adj[cv].push(cw);
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        ClassGraph { class_id, adj }
    }

    /// Hop distances from a set of nodes.
    pub fn distances(&self, nodes: &[usize]) -> Vec<Option<i64>> {
        let mut d = vec![None; self.adj.len()];
        let mut q = VecDeque::new();
        for &n in nodes {
            let c = self.class_id[n];
            if d[c].is_none() {
                d[c] = Some(0);
                q.push_back(c);
            }
        }
        while let Some(v) = q.pop_front() {
            let dv = d[v].unwrap();
            for &w in &self.adj[v] {
                if d[w].is_none() {
                    d[w] = Some(dv + 1);
                    q.push_back(w);
                }
            }
        }
        d
    }
}

/// Shortest-path metric on the sampled quotient of a tame atlas. Lattice
/// neighbours are joined by edges of length `h`, so distances are L1 path
/// lengths through the charts.
pub fn sampled_metric(a: &Atlas, h: &Q) -> Result<MetricSample, ShrinkError> {
    let tame = a.validate_tameness(h);
    if !tame.ok() {
        return Err(ShrinkError::NotTame(tame.text()));
    }
    let qs = build_quotient(a, h);
    let n = qs.node_count();
    let g = ClassGraph::new(&qs);
    let (class_id, nc) = (&g.class_id, qs.class_count());
    let mut by_chart: HashMap<IndexSet, Vec<usize>> = HashMap::new();
    for v in 0..n {
        by_chart.entry(qs.node(v).0).or_default().push(v);
    }
    let hf = to_f64(h);
    let (mut rmin, mut rmax, mut unreachable, mut defect, mut sources) = (f64::INFINITY, 0.0f64, 0usize, 0i64, 0usize);
    let mut ids: Vec<_> = by_chart.keys().copied().collect();
    ids.sort();
    for i in ids {
        let nodes = &by_chart[&i];
        let per = a.chart(i).periodic().to_vec();
        let step = (nodes.len() / 4).max(1);
        for &s in nodes.iter().step_by(step) {
            sources += 1;
            let dist = g.distances(&[s]);
            let xs = qs.node(s).1;
            for &t in nodes {
                if t == s {
                    continue;
                }
                let xt = qs.node(t).1;
                let dc = linf(&xs, &xt, &per);
                if dc.is_zero() {
                    continue;
                }
                match dist[class_id[t]] {
                    None => unreachable += 1,
                    Some(d) => {
                        let r = d as f64 * hf / to_f64(&dc);
                        rmin = rmin.min(r);
                        rmax = rmax.max(r);
                    }
                }
            }
            for v in 0..n {
                for (w, _, _) in qs.lattice_neighbours(v) {
                    if let (Some(dv), Some(dw)) = (dist[class_id[v]], dist[class_id[w]]) {
                        if (dv - dw).abs() > 1 {
                            defect = defect.max((dv - dw).abs() - 1);
                        }
                    }
                }
            }
        }
    }
    let mut rep = CheckReport::pass("sampled metric");
    rep.push(format!("{nc} classes, {sources} sources, ratio in [{rmin:.4}, {rmax:.4}]"));
    if rmin < 1.0 - 1e-9 {
        rep.fail_with(format!("path metric shorter than the chart distance (ratio {rmin:.4})"), vec![]);
    }
    if defect > 2 {
        rep.fail_with(format!("distance jumps by {defect}h across a lattice edge"), vec![]);
    }
    if unreachable > 0 {
        rep.push(format!("{unreachable} sampled pairs at infinite distance"));
    }
    Ok(MetricSample { h: h.clone(), classes: nc, sources, ratio_min: rmin, ratio_max: rmax, isometry_defect: defect, unreachable, report: rep })
}

fn linf(x: &[Q], y: &[Q], per: &[bool]) -> Q {
    let mut m = Q::zero();
    for ((a, b), &p) in x.iter().zip(y).zip(per) {
        let mut d = if a > b { a - b } else { b - a };
        if p {
            d = d.fract();
            let e = Q::one() - &d;
            if e < d {
                d = e;
            }
        }
        if d > m {
            m = d;
        }
    }
    m
}

#[cfg(test)]
mod tests;
