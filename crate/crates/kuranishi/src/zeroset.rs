//! Zeros of perturbed sections, their identification in the realization,
//! and the signed count when the virtual dimension is 0.

use crate::atlas::Atlas;
use crate::chart::IndexSet;
use crate::exterior::{transverse_zero_sign, DetLineElement, LinearChange};
use crate::geometry::Region;
use crate::linalg::{qi, rat, to_f64, RationalMatrix, Q};
use crate::perturbation::{box_samples, compute_constants, construct_adapted, validate_adapted, Components, Field, Constants, Perturbation, PerturbationError, Zones};
use crate::reduction::{atlas_reduce, nest_reduction, reduce_footprints, validate_reduction, AtlasReduction};
use crate::report::{CheckReport, Report, Witness};
use crate::shrink::{tame_shrink, ShrinkError};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use thiserror::Error;

pub type VecField<'a> = dyn Fn(&[f64]) -> Vec<f64> + 'a;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZeroError {
    #[error("cannot isolate a zero near {near:?} in chart {chart}")]
    Isolation { chart: IndexSet, near: Vec<f64> },
    #[error("zero {x:?} of chart {from} maps to {y:?} in chart {to}, where no zero was found")]
    Mismatch { from: IndexSet, to: IndexSet, x: Vec<f64>, y: Vec<f64> },
    #[error("zero class of {x:?} in chart {chart} has no representative over C")]
    Compactness { chart: IndexSet, x: Vec<f64> },
    #[error("representatives of one zero class have opposite signs ({a:?} in {ca}, {b:?} in {cb})")]
    OrientationTransport { ca: IndexSet, a: Vec<f64>, cb: IndexSet, b: Vec<f64> },
    #[error("zero {x:?} of chart {chart} is not transverse")]
    NotTransverse { chart: IndexSet, x: Vec<f64> },
    #[error("virtual dimension {0} is not 0")]
    Dimension(i64),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("taming: {0}")]
    Shrink(#[from] ShrinkError),
    #[error("reduction: {0}")]
    Reduction(String),
    #[error("perturbation: {0}")]
    Perturbation(#[from] PerturbationError),
    #[error("adapted perturbation check failed:\n{0}")]
    NotAdapted(String),
    #[error("zero set: {0}")]
    Zero(#[from] ZeroError),
    #[error("signed counts differ across runs: {0:?}")]
    Dependence(Vec<i64>),
}

/// Central-difference Jacobian, step `1e-6`.
pub fn fd_jacobian(f: &VecField, x: &[f64]) -> Vec<Vec<f64>> {
    let step = 1e-6;
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + step;
        let fp = f(&xp);
        xp[k] = x[k] - step;
        let fm = f(&xp);
        xp[k] = x[k];
        for r in 0..m {
            jac[r][k] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    jac
}

/// Twice the largest sampled operator norm `(R^n, ∞) → (E, comps)`.
pub fn lipschitz_bound(f: &VecField, pts: &[Vec<f64>], comps: &Components) -> f64 {
    let mut best = 0.0f64;
    for x in pts {
        let jac = fd_jacobian(f, x);
        for c in &comps.coords {
            for row in c {
                let s: f64 = (0..x.len()).map(|k| row.iter().zip(&jac).map(|(a, jr)| a * jr[k]).sum::<f64>()).map(f64::abs).sum();
                best = best.max(s);
            }
        }
    }
    2.0 * best
}

fn lipschitz_inf(f: &VecField, pts: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for x in pts {
        for row in fd_jacobian(f, x) {
            best = best.max(row.iter().map(|v| v.abs()).sum());
        }
    }
    2.0 * best
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// L∞ distance, modulo 1 on periodic axes.
pub fn dist(x: &[f64], y: &[f64], per: &[bool]) -> f64 {
    x.iter()
        .zip(y)
        .zip(per)
        .map(|((a, b), &p)| {
            let d = (a - b).abs();
            if p {
                let d = d.rem_euclid(1.0);
                d.min(1.0 - d)
            } else {
                d
            }
        })
        .fold(0.0, f64::max)
}

fn wrap(x: &mut [f64], per: &[bool]) {
    for (v, &p) in x.iter_mut().zip(per) {
        if p {
            *v = v.rem_euclid(1.0);
        }
    }
}

/// Two polished zeros closer than this are the same zero.
pub const SAME: f64 = 1e-7;

/// Damped Newton iteration; `None` unless `‖f‖ < 1e-12` within 60 steps.
pub fn newton(f: &VecField, x0: &[f64], per: &[bool]) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    for _ in 0..60 {
        if inf_norm(&fx) < 1e-12 {
            return Some(x);
        }
        let jac = fd_jacobian(f, &x);
        let n = x.len();
        let jm = DMatrix::from_fn(n, n, |r, c| jac[r][c]);
        let dx = jm.lu().solve(&DVector::from_column_slice(&fx))?;
        let mut t = 1.0;
        loop {
            let mut y: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - t * d).collect();
            wrap(&mut y, per);
            let fy = f(&y);
            if inf_norm(&fy) < inf_norm(&fx) || t < 1e-4 {
                x = y;
                fx = fy;
                break;
            }
            t /= 2.0;
        }
    }
    (inf_norm(&fx) < 1e-12).then_some(x)
}

fn det(jac: &[Vec<f64>]) -> f64 {
    let n = jac.len();
    DMatrix::from_fn(n, n, |r, c| jac[r][c]).determinant()
}

/// Nondegenerate zero of a square system: `det Df(x)` is not small and
/// keeps its sign on the corners of the cube `x ± 1e-4`, which rules out
/// folds that Newton approaches only linearly.
pub fn is_transverse(f: &VecField, x: &[f64]) -> bool {
    let d0 = det(&fd_jacobian(f, x));
    if d0.abs() < 1e-9 {
        return false;
    }
    let n = x.len();
    (0..1usize << n).all(|mask| {
        let y: Vec<f64> = (0..n).map(|k| x[k] + if mask >> k & 1 == 1 { 1e-4 } else { -1e-4 }).collect();
        det(&fd_jacobian(f, &y)) * d0 > 0.0
    })
}

fn near_region(r: &Region, x: &[f64], tol: f64) -> bool {
    r.boxes.iter().any(|b| {
        b.iter().zip(x).zip(&r.periodic).all(|((iv, &v), &p)| {
            let (lo, hi) = (to_f64(&iv.lo), to_f64(&iv.hi));
            if p {
                if hi - lo >= 1.0 {
                    return true;
                }
                let s = lo + (v - lo).rem_euclid(1.0);
                s <= hi + tol || s >= lo + 1.0 - tol
            } else {
                v >= lo - tol && v <= hi + tol
            }
        })
    })
}

/// All zeros of a square system `f` on the closure of `region`, by box
/// exclusion with a sampled Lipschitz bound followed by Newton polishing.
pub fn locate_zeros(f: &VecField, region: &Region, h: &Q) -> Result<Vec<Vec<f64>>, ZeroError> {
    let lip = lipschitz_inf(f, &box_samples(&region.closure(), h)).max(1e-6);
    locate_zeros_with(f, region, h, &|_, _| lip)
}

/// Zeros of `s + ν`: sampled bound for the section, box-local bound from
/// the field tree for `ν`.
pub fn locate_perturbed_zeros(s: &VecField, nu: &Field, region: &Region, h: &Q) -> Result<Vec<Vec<f64>>, ZeroError> {
    let ls = lipschitz_inf(s, &box_samples(&region.closure(), h)).max(1e-6);
    let f = |x: &[f64]| -> Vec<f64> { s(x).into_iter().zip(nu.eval(x)).map(|(a, b)| a + b).collect() };
    locate_zeros_with(&f, region, h, &|c, w| ls + nu.local(c, w).1)
}

/// Box exclusion with a Lipschitz bound `lip(c, w)` valid on `c ± w`.
pub fn locate_zeros_with(f: &VecField, region: &Region, h: &Q, lip: &dyn Fn(&[f64], &[f64]) -> f64) -> Result<Vec<Vec<f64>>, ZeroError> {
    let cl = region.closure();
    let per = cl.periodic.clone();
    let hf = to_f64(h);
    let mut stack: Vec<Vec<(f64, f64)>> = cl.boxes.iter().map(|b| b.iter().map(|iv| (to_f64(&iv.lo), to_f64(&iv.hi))).collect()).collect();
    let mut found: Vec<Vec<f64>> = Vec::new();
    while let Some(b) = stack.pop() {
        let c: Vec<f64> = b.iter().map(|(l, u)| (l + u) / 2.0).collect();
        let half: Vec<f64> = b.iter().map(|(l, u)| (u - l) / 2.0).collect();
        let w = half.iter().copied().fold(0.0, f64::max);
        let fc = f(&c);
        if inf_norm(&fc) > lip(&c, &half) * w * 1.01 + 1e-12 {
            continue;
        }
        if w >= hf / 256.0 {
            let k = (0..b.len()).max_by(|&i, &j| (b[i].1 - b[i].0).total_cmp(&(b[j].1 - b[j].0))).unwrap();
            let mid = (b[k].0 + b[k].1) / 2.0;
            let (mut lo, mut hi) = (b.clone(), b);
            lo[k].1 = mid;
            hi[k].0 = mid;
            stack.push(lo);
            stack.push(hi);
            continue;
        }
        match newton(f, &c, &per) {
            Some(z) => {
                if near_region(&cl, &z, hf / 4.0) && !found.iter().any(|y| dist(y, &z, &per) < SAME) {
                    found.push(z);
                }
            }
            None if inf_norm(&fc) <= 1e-8 => return Err(ZeroError::Isolation { chart: IndexSet(0), near: c }),
            None => {}
        }
    }
    found.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(found)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPoint {
    pub chart: IndexSet,
    pub x: Vec<f64>,
    pub jacobian: RationalMatrix,
    pub residual: f64,
}

/// Orientation element of `det(T U_I) ⊗ det(E_I)^*`.
pub fn chart_orientation(a: &Atlas, i: IndexSet) -> DetLineElement {
    let c = a.chart(i);
    DetLineElement::standard(c.dim(), c.obs_dim).scaled(&qi(a.orientation_of(i) as i64))
}

/// Zeros of `s_I + ν_I` on `closure(V^{|I|}_I)`, every chart.
pub fn find_zeros(a: &Atlas, z: &Zones, nu: &Perturbation) -> Result<Vec<ZeroPoint>, ZeroError> {
    let mut out = Vec::new();
    for i in a.index_sets() {
        let vk = z.v_k(i, i.len() as f64);
        if vk.is_empty() {
            continue;
        }
        let f = |x: &[f64]| nu.total(a, i, x);
        let sec = |x: &[f64]| a.chart(i).section_f64(x);
        let zs = locate_perturbed_zeros(&sec, &nu.fields[&i], &vk, &z.consts.h).map_err(|e| match e {
            ZeroError::Isolation { near, .. } => ZeroError::Isolation { chart: i, near },
            e => e,
        })?;
        for x in zs {
            if !is_transverse(&f, &x) {
                return Err(ZeroError::NotTransverse { chart: i, x });
            }
            let jac = fd_jacobian(&f, &x);
            let jm = RationalMatrix::from_rows(&jac.iter().map(|r| r.iter().map(|&v| rat(v)).collect()).collect::<Vec<_>>());
            out.push(ZeroPoint { chart: i, residual: inf_norm(&f(&x)), x, jacobian: jm });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ZeroClass {
    pub members: Vec<usize>,
    pub sign: i32,
}

#[derive(Debug, Clone)]
pub struct ZeroCount {
    pub zeros: Vec<ZeroPoint>,
    pub classes: Vec<ZeroClass>,
    pub total: i64,
}

impl ZeroCount {
    pub fn text(&self) -> String {
        let mut s = String::new();
        for (k, c) in self.classes.iter().enumerate() {
            let reps: Vec<String> = c.members.iter().map(|&m| format!("{} {:?}", self.zeros[m].chart, self.zeros[m].x)).collect();
            s.push_str(&format!("class {k}: sign {:+} [{}]\n", c.sign, reps.join(", ")));
        }
        s.push_str(&format!("signed count {}\n", self.total));
        s
    }

    /// Class signs ordered by the first coordinate of their first member.
    pub fn signs(&self) -> Vec<i32> {
        let mut v: Vec<(f64, i32)> = self.classes.iter().map(|c| (self.zeros[c.members[0]].x.first().copied().unwrap_or(0.0), c.sign)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.into_iter().map(|(_, s)| s).collect()
    }
}

fn find(p: &mut [usize], mut x: usize) -> usize {
    while p[x] != x {
        p[x] = p[p[x]];
        x = p[x];
    }
    x
}

/// Groups zeros along the coordinate changes.
pub fn quotient_zeros(a: &Atlas, z: &Zones, nu: &Perturbation, zeros: &[ZeroPoint]) -> Result<Vec<Vec<usize>>, ZeroError> {
    let mut parent: Vec<usize> = (0..zeros.len()).collect();
    for (k, zp) in zeros.iter().enumerate() {
        let xq: Vec<Q> = zp.x.iter().map(|&v| rat(v)).collect();
        for j in a.index_sets().into_iter().filter(|j| zp.chart.is_proper_subset(*j)) {
            let cc = a.change(zp.chart, j).expect("change");
            if !cc.domain.contains(&xq) {
                continue;
            }
            let y = cc.apply_f64(&zp.x);
            let per = a.chart(j).periodic().to_vec();
            let hit = zeros.iter().position(|w| w.chart == j && dist(&w.x, &y, &per) < SAME);
            let hit = hit.or_else(|| {
                let f = |x: &[f64]| nu.total(a, j, x);
                newton(&f, &y, &per)
                    .filter(|p| dist(p, &y, &per) < SAME)
                    .and_then(|p| zeros.iter().position(|w| w.chart == j && dist(&w.x, &p, &per) < SAME))
            });
            match hit {
                Some(m) => {
                    let (ra, rb) = (find(&mut parent, k), find(&mut parent, m));
                    parent[ra] = rb;
                }
                None => {
                    let yq: Vec<Q> = y.iter().map(|&v| rat(v)).collect();
                    if z.v.get(a, j).contains(&yq) {
                        return Err(ZeroError::Mismatch { from: zp.chart, to: j, x: zp.x.clone(), y });
                    }
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..zeros.len() {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(k);
    }
    Ok(groups.into_values().collect())
}

/// Signed count of the zero set of an adapted perturbation, `D = 0`.
pub fn signed_count(a: &Atlas, z: &Zones, nu: &Perturbation) -> Result<ZeroCount, ZeroError> {
    if a.dim != 0 {
        return Err(ZeroError::Dimension(a.dim));
    }
    let zeros = find_zeros(a, z, nu)?;
    let groups = quotient_zeros(a, z, nu, &zeros)?;
    let mut classes = Vec::new();
    for g in groups {
        if !g.iter().any(|&m| z.in_c_zone(zeros[m].chart, &zeros[m].x, 1e-9)) {
            let zp = &zeros[g[0]];
            return Err(ZeroError::Compactness { chart: zp.chart, x: zp.x.clone() });
        }
        let mut sign = None;
        let mut first = g[0];
        for &m in &g {
            let zp = &zeros[m];
            let s = transverse_zero_sign(&zp.jacobian, &chart_orientation(a, zp.chart))
                .map_err(|_| ZeroError::NotTransverse { chart: zp.chart, x: zp.x.clone() })?
                .value();
            match sign {
                None => {
                    sign = Some(s);
                    first = m;
                }
                Some(t) if t != s => {
                    let f = &zeros[first];
                    return Err(ZeroError::OrientationTransport { ca: f.chart, a: f.x.clone(), cb: zp.chart, b: zp.x.clone() });
                }
                _ => {}
            }
        }
        classes.push(ZeroClass { members: g, sign: sign.unwrap() });
    }
    let total = classes.iter().map(|c| c.sign as i64).sum();
    Ok(ZeroCount { zeros, classes, total })
}

/// The chart orientations are compatible with every coordinate change.
pub fn check_orientation(a: &Atlas, h: &Q) -> CheckReport {
    let mut rep = CheckReport::pass("orientation compatibility");
    for i in a.index_sets() {
        for j in a.index_sets().into_iter().filter(|j| i.is_proper_subset(*j)) {
            let cc = a.change(i, j).expect("change");
            let Some(x) = crate::chart::sample_points(&cc.domain, h).into_iter().next() else { continue };
            let y = cc.apply_q(&x);
            let lc = LinearChange { d_i: a.chart(i).section.jacobian(&x), d_j: a.chart(j).section.jacobian(&y), dphi: cc.jacobian(&x), dphihat: cc.linear.clone() };
            match lc.orientation_factor() {
                Ok(c) => {
                    let s = crate::linalg::sign_of(&c) * a.orientation_of(i) * a.orientation_of(j);
                    if s <= 0 {
                        rep.fail_with(format!("{i} -> {j}: orientations disagree"), vec![Witness::new("x", Some(i), x)]);
                    }
                }
                Err(e) => rep.fail_with(format!("{i} -> {j}: {e}"), vec![Witness::new("x", Some(i), x)]),
            }
        }
    }
    rep
}

/// Degree of `f` on `(lo, hi)` from derivative signs at its simple zeros.
pub fn interval_degree(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> i64 {
    let s = |x: f64| f(x).signum() as i64;
    (s(hi) - s(lo)) / 2
}

#[derive(Debug)]
pub struct PipelineRun {
    pub atlas: Atlas,
    pub v: AtlasReduction,
    pub c: AtlasReduction,
    pub consts: Constants,
    pub nu: Perturbation,
    pub report: Report,
    pub count: Option<ZeroCount>,
    pub transcript: Vec<String>,
}

/// Taming (when needed), reduction and nesting.
pub fn prepare(a: &Atlas, h: &Q) -> Result<(Atlas, AtlasReduction, Vec<String>), PipelineError> {
    let mut log = Vec::new();
    let t = if a.validate_tameness(h).ok() {
        log.push("atlas is tame, no shrinking".to_string());
        a.clone()
    } else {
        let s = tame_shrink(a, h)?;
        log.extend(s.transcript.iter().cloned());
        s.atlas
    };
    let v = match AtlasReduction::named(&t, "core") {
        Some(v) if validate_reduction(&t, &v, h).ok() => {
            log.push("using the stored reduction `core`".into());
            v
        }
        _ => {
            let cr = reduce_footprints(&t).map_err(|e| PipelineError::Reduction(e.to_string()))?;
            let v = atlas_reduce(&t, &cr).map_err(|e| PipelineError::Reduction(e.to_string()))?;
            let rep = validate_reduction(&t, &v, h);
            if !rep.ok() {
                return Err(PipelineError::Reduction(rep.text()));
            }
            log.push("reduction from the footprint cover".into());
            v
        }
    };
    Ok((t, v, log))
}

/// Adapted perturbation over `(V, C)` and, when `D = 0`, its signed count.
pub fn run_pair(a: &Atlas, v: &AtlasReduction, c: &AtlasReduction, h: &Q, seed: u64) -> Result<PipelineRun, PipelineError> {
    let consts = compute_constants(a, v, c, h)?;
    let nu = construct_adapted(a, v, c, &consts, seed)?;
    let mut report = validate_adapted(a, v, c, &consts, &nu);
    report.add(check_orientation(a, h));
    if !report.ok() {
        return Err(PipelineError::NotAdapted(report.text()));
    }
    let count = if a.dim == 0 {
        let z = Zones::new(a, v, c, &consts);
        Some(signed_count(a, &z, &nu)?)
    } else {
        None
    };
    let transcript = nu.transcript.clone();
    Ok(PipelineRun { atlas: a.clone(), v: v.clone(), c: c.clone(), consts, nu, report, count, transcript })
}

/// Full pipeline with `C = nest(V)`.
pub fn pipeline(a: &Atlas, h: &Q, seed: u64) -> Result<PipelineRun, PipelineError> {
    let (t, v, mut log) = prepare(a, h)?;
    let c = nest_reduction(&t, &v).map_err(|e| PipelineError::Reduction(e.to_string()))?;
    let mut run = run_pair(&t, &v, &c, h, seed)?;
    log.append(&mut run.transcript);
    run.transcript = log;
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct Independence {
    pub totals: Vec<(String, u64, i64)>,
    pub agree: bool,
}

/// Signed counts over several seeds and both nested pairs `(V, nest V)`,
/// `(nest V, nest nest V)`.
pub fn independence_test(a: &Atlas, h: &Q, seeds: &[u64]) -> Result<Independence, PipelineError> {
    let (t, v, _) = prepare(a, h)?;
    let c = nest_reduction(&t, &v).map_err(|e| PipelineError::Reduction(e.to_string()))?;
    let cc = nest_reduction(&t, &c).map_err(|e| PipelineError::Reduction(e.to_string()))?;
    let mut totals = Vec::new();
    for (name, vv, c2) in [("(V, C)", &v, &c), ("(C, nest C)", &c, &cc)] {
        for &s in seeds {
            let run = run_pair(&t, vv, c2, h, s)?;
            let n = run.count.map(|c| c.total).ok_or(ZeroError::Dimension(t.dim))?;
            totals.push((name.to_string(), s, n));
        }
    }
    let agree = totals.windows(2).all(|w| w[0].2 == w[1].2);
    Ok(Independence { totals, agree })
}

#[cfg(test)]
mod tests;
