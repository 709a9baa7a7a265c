//! Cover reductions of footprint covers, reductions of tame atlases, and
//! nested reductions `C ⋐ V`.

use crate::atlas::{build_quotient, Atlas, AtlasError, ReductionSpec};
use crate::chart::{restrict_chart, sample_points, ChartError, IndexSet};
use crate::geometry::Region;
use crate::linalg::{q, qi, Q};
use crate::report::{fmt_point, CheckReport, Witness};
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("the sets do not cover X; uncovered point {}", fmt_point(.0))]
    Gap(Vec<Q>),
    #[error("nesting: {0}")]
    Nesting(String),
    #[error("cover reduction axiom {axiom} fails: {msg}")]
    Axiom { axiom: &'static str, msg: String, witness: Option<Vec<Q>> },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("reduction of U_{index}: {msg}")]
    Degenerate { index: IndexSet, msg: String },
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

/// `F_i^0 ⋐ G_i^1 ⋐ F_i^1 ⋐ … ⋐ G_i^N ⋐ F_i^N = F_i`. `g[i][0]` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCovers {
    pub f: Vec<Vec<Region>>,
    pub g: Vec<Vec<Region>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Nesting {
    /// Uniform step chosen from a sampled Lebesgue number, halved until the
    /// axioms verify.
    Auto,
    /// `F_i^n` and `G_i^n` eroded by `2(N−n)ε` and `(2(N−n)+1)ε`.
    Uniform(Q),
    Explicit(NestedCovers),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverReduction {
    pub space: Region,
    pub covers: Vec<Region>,
    pub nesting: NestedCovers,
    /// Nonempty `Z_I` only.
    pub zones: BTreeMap<IndexSet, Region>,
}

impl CoverReduction {
    pub fn zone(&self, i: IndexSet) -> Region {
        self.zones.get(&i).cloned().unwrap_or_else(|| self.space.empty_like())
    }
}

/// Closure taken inside `x`.
fn closure_in(a: &Region, x: &Region) -> Region {
    a.closure().intersect(x)
}

fn uniform_nesting(x: &Region, covers: &[Region], eps: &Q) -> NestedCovers {
    let n = covers.len() as i64;
    let mut f = Vec::new();
    let mut g = Vec::new();
    for fi in covers {
        let fi = fi.intersect(x);
        let mut fs = Vec::new();
        let mut gs = vec![x.empty_like()];
        for k in 0..=n {
            fs.push(fi.erode_within(x, &(eps * qi(2 * (n - k)))));
            if k > 0 {
                gs.push(fi.erode_within(x, &(eps * qi(2 * (n - k) + 1))));
            }
        }
        f.push(fs);
        g.push(gs);
    }
    NestedCovers { f, g }
}

/// Sampled Lebesgue number `min_x max_i d(x, X ∖ F_i)`; `None` when some
/// `F_i` is all of `X`.
pub fn lebesgue_number(x: &Region, covers: &[Region], h: &Q) -> Option<Q> {
    let outs: Vec<Region> = covers.iter().map(|f| x.difference(f)).collect();
    if outs.iter().any(|o| o.is_empty()) {
        return None;
    }
    let mut pts = sample_points(x, h);
    pts.extend(x.boxes.iter().filter_map(|b| x.with_boxes(vec![b.clone()]).witness_point()));
    let mut best: Option<Q> = None;
    for p in &pts {
        let m = outs.iter().filter_map(|o| o.distance(p)).max().unwrap_or_else(Q::zero);
        if best.as_ref().map_or(true, |b| m < *b) {
            best = Some(m);
        }
    }
    best
}

/// Largest dyadic `2^-k ≤ t`.
fn dyadic_floor(t: &Q) -> Q {
    let mut d = Q::one();
    while &d > t && d > q(1, 1 << 40) {
        d /= qi(2);
    }
    d
}

fn zones_from(x: &Region, nest: &NestedCovers, n: usize) -> BTreeMap<IndexSet, Region> {
    let mut zones = BTreeMap::new();
    for i in IndexSet::all_nonempty(n) {
        let k = i.len();
        let mut z = x.clone();
        for l in i.labels() {
            z = z.intersect(&nest.g[l - 1][k]);
        }
        for j in 1..=n {
            if !i.contains(j) {
                z = z.difference(&nest.f[j - 1][k].closure());
            }
        }
        if !z.is_empty() {
            zones.insert(i, z);
        }
    }
    zones
}

fn check_nesting(x: &Region, covers: &[Region], nest: &NestedCovers) -> Result<(), CoverError> {
    let n = covers.len();
    if nest.f.len() != n || nest.g.len() != n {
        return Err(CoverError::Nesting(format!("expected {n} chains")));
    }
    for i in 0..n {
        let (fs, gs) = (&nest.f[i], &nest.g[i]);
        if fs.len() != n + 1 || gs.len() != n + 1 {
            return Err(CoverError::Nesting(format!("chain {} has the wrong length", i + 1)));
        }
        if !fs[n].set_eq(&covers[i].intersect(x)) {
            return Err(CoverError::Nesting(format!("F_{}^N ≠ F_{}", i + 1, i + 1)));
        }
        for k in 1..=n {
            if !closure_in(&fs[k - 1], x).is_subset(&gs[k]) || !closure_in(&gs[k], x).is_subset(&fs[k]) {
                return Err(CoverError::Nesting(format!("F_{0}^{1} ⋐ G_{0}^{2} ⋐ F_{0}^{2} fails", i + 1, k - 1, k)));
            }
        }
    }
    let u0 = Region::union_all(x.dim, x.periodic.clone(), nest.f.iter().map(|c| &c[0]));
    if let Some(w) = x.difference(&u0).witness_point() {
        return Err(CoverError::Nesting(format!("the sets F_i^0 miss {}", fmt_point(&w))));
    }
    Ok(())
}

/// Exact check of the three cover-reduction axioms.
pub fn check_cover_reduction(x: &Region, covers: &[Region], zones: &BTreeMap<IndexSet, Region>) -> Result<(), CoverError> {
    for (i, z) in zones {
        let mut f = x.clone();
        for l in i.labels() {
            f = f.intersect(&covers[l - 1]);
        }
        let cz = closure_in(z, x);
        if !cz.is_subset(&f) {
            return Err(CoverError::Axiom {
                axiom: "(i)",
                msg: format!("closure of Z_{i} is not inside F_{i}"),
                witness: cz.difference(&f).witness_point(),
            });
        }
    }
    let ids: Vec<&IndexSet> = zones.keys().collect();
    for (a, i) in ids.iter().enumerate() {
        for j in &ids[a + 1..] {
            if i.comparable(**j) {
                continue;
            }
            let m = closure_in(&zones[*i], x).intersect(&zones[*j].closure());
            if !m.is_empty() {
                return Err(CoverError::Axiom {
                    axiom: "(ii)",
                    msg: format!("closures of Z_{i} and Z_{j} meet"),
                    witness: m.witness_point(),
                });
            }
        }
    }
    let u = Region::union_all(x.dim, x.periodic.clone(), zones.values());
    if let Some(w) = x.difference(&u).witness_point() {
        return Err(CoverError::Axiom { axiom: "(iii)", msg: "the Z_I do not cover X".into(), witness: Some(w) });
    }
    Ok(())
}

/// `Z_I = (⋂_{i∈I} G_i^{|I|}) ∖ ⋃_{j∉I} closure(F_j^{|I|})`.
pub fn cover_reduce(x: &Region, covers: &[Region], nesting: Nesting) -> Result<CoverReduction, CoverError> {
    let n = covers.len();
    let u = Region::union_all(x.dim, x.periodic.clone(), covers.iter());
    if let Some(w) = x.difference(&u).witness_point() {
        return Err(CoverError::Gap(w));
    }
    let build = |nest: NestedCovers| -> Result<CoverReduction, CoverError> {
        check_nesting(x, covers, &nest)?;
        let zones = zones_from(x, &nest, n);
        check_cover_reduction(x, covers, &zones)?;
        Ok(CoverReduction { space: x.clone(), covers: covers.to_vec(), nesting: nest, zones })
    };
    match nesting {
        Nesting::Explicit(nest) => build(nest),
        Nesting::Uniform(eps) => build(uniform_nesting(x, covers, &eps)),
        Nesting::Auto => {
            let lam = lebesgue_number(x, covers, &q(1, 64));
            let mut eps = match lam {
                None => q(1, 4),
                Some(l) if l.is_zero() => return Err(CoverError::Nesting("sampled Lebesgue number is 0".into())),
                Some(l) => dyadic_floor(&(l / qi(4 * n as i64))),
            };
            let mut last = None;
            for _ in 0..8 {
                match build(uniform_nesting(x, covers, &eps)) {
                    Ok(r) => return Ok(r),
                    Err(e) => last = Some(e),
                }
                eps /= qi(2);
            }
            Err(last.unwrap())
        }
    }
}

/// Subsets `V_I ⊆ U_I`; missing keys are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct AtlasReduction {
    pub sets: BTreeMap<IndexSet, Region>,
}

impl AtlasReduction {
    pub fn get(&self, a: &Atlas, i: IndexSet) -> Region {
        self.sets.get(&i).cloned().unwrap_or_else(|| a.chart(i).domain.empty_like())
    }

    pub fn nonempty(&self) -> Vec<IndexSet> {
        self.sets.iter().filter(|(_, r)| !r.is_empty()).map(|(i, _)| *i).collect()
    }

    pub fn from_spec(s: &ReductionSpec) -> Self {
        AtlasReduction { sets: s.sets.clone() }
    }

    pub fn to_spec(&self, name: &str) -> ReductionSpec {
        ReductionSpec { name: name.to_string(), sets: self.nonempty().into_iter().map(|i| (i, self.sets[&i].clone())).collect() }
    }

    /// Looks up a reduction stored in the atlas file.
    pub fn named(a: &Atlas, name: &str) -> Option<Self> {
        a.reductions.iter().find(|r| r.name == name).map(Self::from_spec)
    }
}

/// `X = ⋃ F_i` and the basic footprints.
pub fn footprint_cover(a: &Atlas) -> Result<(Region, Vec<Region>), AtlasError> {
    let covers: Vec<Region> = (1..=a.n_basic).map(|i| a.basic_footprint(i)).collect::<Result<_, _>>()?;
    let x = Region::union_all(a.space_periodic.len(), a.space_periodic.clone(), covers.iter());
    Ok((x, covers))
}

/// Cover reduction of the footprint cover with automatic nesting.
pub fn reduce_footprints(a: &Atlas) -> Result<CoverReduction, ReductionError> {
    let (x, covers) = footprint_cover(a)?;
    Ok(cover_reduce(&x, &covers, Nesting::Auto)?)
}

pub fn atlas_reduce(a: &Atlas, cr: &CoverReduction) -> Result<AtlasReduction, ReductionError> {
    atlas_reduce_with(a, cr, true)
}

/// `remove_overlaps = false` skips the removal of `N(Y_IJ)`; only useful to
/// exercise the validator.
pub fn atlas_reduce_with(a: &Atlas, cr: &CoverReduction, remove_overlaps: bool) -> Result<AtlasReduction, ReductionError> {
    let ids = a.index_sets();
    let mut w: BTreeMap<IndexSet, Region> = BTreeMap::new();
    let mut zs: BTreeMap<IndexSet, Region> = BTreeMap::new();
    for &i in &ids {
        let z = cr.zone(i);
        let c = a.chart(i);
        if z.is_empty() {
            w.insert(i, c.domain.empty_like());
            zs.insert(i, c.domain.empty_like());
            continue;
        }
        let r = restrict_chart(c, &z, true)?;
        zs.insert(i, c.footprint_preimage(&z.closure().intersect(&c.footprint_region()?))?);
        w.insert(i, r.domain);
    }
    let mut sets = BTreeMap::new();
    for &i in &ids {
        let mut v = w[&i].clone();
        if remove_overlaps && !v.is_empty() {
            let cw = v.closure();
            for &j in &ids {
                if i.comparable(j) || w[&j].is_empty() {
                    continue;
                }
                let y = cw.intersect(&a.eps_set(i, j, &w[&j].closure())?);
                if y.is_empty() {
                    continue;
                }
                let d = y.distance_to(&zs[&i]).unwrap_or_else(Q::one);
                if d.is_zero() {
                    return Err(ReductionError::Degenerate {
                        index: i,
                        msg: format!("Y_{i}{j} touches the zero set at {}", y.intersect(&zs[&i].closure()).witness_point().map(|p| fmt_point(&p)).unwrap_or_default()),
                    });
                }
                v = v.difference(&y.dilate_closed(&(d / qi(2))));
            }
        }
        if !v.is_empty() {
            sets.insert(i, v);
        }
    }
    Ok(AtlasReduction { sets })
}

/// Reduction axioms: (i) exactly on boxes, (ii) exactly through `ε_I` and
/// on the sampled quotient at resolution `h`, (iii) on zero-set samples.
pub fn validate_reduction(a: &Atlas, v: &AtlasReduction, h: &Q) -> CheckReport {
    let mut rep = CheckReport::pass("reduction");
    let ids: Vec<IndexSet> = v.nonempty().into_iter().filter(|i| a.charts.contains_key(i)).collect();
    for i in v.nonempty() {
        if !a.charts.contains_key(&i) {
            rep.fail_with(format!("V_{i} given for a missing chart"), vec![]);
        }
    }
    for &i in &ids {
        let c = a.chart(i);
        let vi = &v.sets[&i];
        if !vi.precompact_in(&c.domain) {
            let w = vi.closure().difference(&c.domain).witness_point();
            rep.fail_with(format!("(i): V_{i} is not precompact in U_{i}"), w.map(|x| Witness::new("x", Some(i), x)).into_iter().collect());
        }
        match c.zero_set() {
            Ok(z) if z.intersect(vi).is_empty() => rep.fail_with(format!("(i): V_{i} misses the zero set"), vec![]),
            Ok(_) => {}
            Err(e) => rep.fail_with(format!("(i): zero set of U_{i}: {e}"), vec![]),
        }
    }
    let mut exact_ok = true;
    for (n, &i) in ids.iter().enumerate() {
        for &j in &ids[n + 1..] {
            if i.comparable(j) {
                continue;
            }
            match a.eps_set(i, j, &v.sets[&j].closure()) {
                Ok(e) => {
                    let m = v.sets[&i].closure().intersect(&e);
                    if let Some(w) = m.witness_point() {
                        exact_ok = false;
                        rep.fail_with(
                            format!("(ii): π(closure V_{i}) meets π(closure V_{j})"),
                            vec![Witness::new("x", Some(i), w)],
                        );
                    }
                }
                Err(e) => rep.fail_with(format!("(ii): ε_{i}(V_{j}): {e}"), vec![]),
            }
        }
    }
    let qs = build_quotient(a, h);
    let closures: BTreeMap<IndexSet, Region> = ids.iter().map(|i| (*i, v.sets[i].closure())).collect();
    let mut seen: BTreeMap<usize, (IndexSet, usize)> = BTreeMap::new();
    let mut sampled_bad = BTreeSet::new();
    for node in 0..qs.node_count() {
        let (ci, x) = qs.node(node);
        let Some(vi) = closures.get(&ci) else { continue };
        if !vi.contains(&x) {
            continue;
        }
        let cls = qs.class_of[node];
        match seen.get(&cls) {
            Some(&(cj, other)) if !cj.comparable(ci) => {
                if sampled_bad.insert((cj, ci)) {
                    rep.fail_with(
                        format!("(ii) sampled: {} ~ {}", qs.fmt_node(other), qs.fmt_node(node)),
                        vec![Witness::new("x", Some(ci), x)],
                    );
                }
            }
            Some(_) => {}
            None => {
                seen.insert(cls, (ci, node));
            }
        }
    }
    for &i in &a.index_sets() {
        let Ok(z) = a.chart(i).zero_set() else { continue };
        let mut pts = sample_points(&z, h);
        pts.extend(z.boxes.iter().filter_map(|b| z.with_boxes(vec![b.clone()]).witness_point()));
        for p in pts {
            let covered = a.orbit(i, &p, 64).iter().any(|(k, y)| v.sets.get(k).map_or(false, |r| r.contains(y)));
            if !covered {
                rep.fail_with(format!("(iii): zero {} of U_{i} is not covered", fmt_point(&p)), vec![Witness::new("zero", Some(i), p)]);
                break;
            }
        }
    }
    rep.push(format!(
        "{} nonempty sets, exact separation {}, {} sampled classes at h = {h}",
        ids.len(),
        if exact_ok { "holds" } else { "fails" },
        qs.class_count()
    ));
    rep
}

/// A nested reduction `C ⋐ V`: footprints `Z′_I ⋐ Z_I` still covering `X`,
/// then `C_I` restricted from `V_I` over `Z′_I`.
pub fn nest_reduction(a: &Atlas, v: &AtlasReduction) -> Result<AtlasReduction, ReductionError> {
    let (x, _) = footprint_cover(a)?;
    let mut z: BTreeMap<IndexSet, Region> = BTreeMap::new();
    for i in v.nonempty() {
        let c = a.chart(i).with_domain(v.sets[&i].clone());
        z.insert(i, c.footprint_region()?);
    }
    let mut eps = q(1, 4);
    let mut shrunk = None;
    for _ in 0..30 {
        let zs: BTreeMap<IndexSet, Region> = z.iter().map(|(i, r)| (*i, r.erode_within(&x, &eps))).collect();
        let u = Region::union_all(x.dim, x.periodic.clone(), zs.values());
        if x.difference(&u).is_empty() {
            shrunk = Some(zs);
            break;
        }
        eps /= qi(2);
    }
    let zs = shrunk.ok_or_else(|| ReductionError::Degenerate { index: IndexSet(0), msg: "footprints cannot be shrunk".into() })?;
    let mut sets = BTreeMap::new();
    for i in v.nonempty() {
        let zi = &zs[&i];
        if zi.is_empty() {
            continue;
        }
        let c = a.chart(i).with_domain(v.sets[&i].clone());
        let r = restrict_chart(&c, zi, true)?;
        if !r.domain.is_empty() {
            sets.insert(i, r.domain);
        }
    }
    Ok(AtlasReduction { sets })
}

/// `C_I ⋐ V_I` for every `I`.
pub fn is_nested(c: &AtlasReduction, v: &AtlasReduction) -> bool {
    c.sets.iter().all(|(i, r)| v.sets.get(i).map_or(false, |vi| r.precompact_in(vi)))
}

pub fn describe(v: &AtlasReduction) -> String {
    let mut s = String::new();
    for (i, r) in &v.sets {
        s.push_str(&format!("V_{i} = {r}\n"));
    }
    s
}

#[cfg(test)]
mod tests;
