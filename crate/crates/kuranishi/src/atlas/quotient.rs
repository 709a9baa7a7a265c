//! Sampled realization `|K|`: lattice samples of every chart domain glued
//! by the coordinate changes, plus the diagnostics that look for failures
//! of injectivity, of the Hausdorff property and of linear fibers.

use super::Atlas;
use crate::chart::{wrap_point, AxisMap, CoordChange, IndexSet};
use crate::geometry::{FastRegion, Interval, Lattice, Region, SampleCloud};
use crate::linalg::{qi, RationalMatrix, Q};
use crate::report::{fmt_point, CheckReport, Status, Witness};
use num::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

/// Piece of an axis map in lattice numerators.
struct FastPiece {
    cons: FastRegion,
    a: Vec<Vec<i64>>,
    b: Vec<i64>,
}

fn fast_pieces(axis: &AxisMap, den: i64) -> Option<Vec<FastPiece>> {
    let big = qi(1 << 40);
    let mut out = Vec::new();
    for p in &axis.pieces {
        let bx = p
            .cons
            .iter()
            .zip(&axis.in_periodic)
            .map(|(c, &per)| match c {
                Some(iv) => iv.clone(),
                None if per => Interval { lo: Q::zero(), hi: Q::one(), lo_closed: true, hi_closed: false },
                None => Interval::open(-big.clone(), big.clone()),
            })
            .collect();
        let cons = FastRegion::new(&Region::new(axis.in_dim(), axis.in_periodic.clone(), vec![bx]));
        let mut a = vec![vec![0i64; p.a.cols]; p.a.rows];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let c = &p.a[(i, j)];
                if !c.is_integer() {
                    return None;
                }
                *v = c.to_integer().to_i64()?;
            }
        }
        let mut b = Vec::with_capacity(p.b.len());
        for v in &p.b {
            let s = v * qi(den);
            if !s.is_integer() {
                return None;
            }
            b.push(s.to_integer().to_i64()?);
        }
        out.push(FastPiece { cons, a, b });
    }
    Some(out)
}

fn fast_apply(pieces: &[FastPiece], in_periodic: &[bool], out_periodic: &[bool], x: &[i64], den: i64) -> Option<Vec<i64>> {
    let xc: Vec<i64> = x.iter().zip(in_periodic).map(|(v, &p)| if p { v.rem_euclid(den) } else { *v }).collect();
    let p = pieces.iter().find(|p| p.cons.contains(&xc, den))?;
    Some(
        p.a.iter()
            .zip(&p.b)
            .zip(out_periodic)
            .map(|((row, b), &per)| {
                let v = row.iter().zip(&xc).map(|(a, x)| a * x).sum::<i64>() + b;
                if per {
                    v.rem_euclid(den)
                } else {
                    v
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub change: (IndexSet, IndexSet),
}

/// Finite model of the realization at resolution `h`.
#[derive(Debug, Clone)]
pub struct QuotientSample {
    pub h: Q,
    pub lattice: Lattice,
    pub charts: Vec<IndexSet>,
    pub clouds: Vec<SampleCloud>,
    offsets: Vec<usize>,
    pub class_of: Vec<usize>,
    pub edges: Vec<Edge>,
    adj: Vec<Vec<(usize, usize, bool)>>,
    members: HashMap<usize, Vec<usize>>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Samples every chart domain at resolution `h` and glues the samples
/// along coordinate changes (exactly on the lattice when the change maps
/// lattice points to lattice points, otherwise by snapping within `h/2`).
pub fn build_quotient(a: &Atlas, h: &Q) -> QuotientSample {
    let charts = a.index_sets();
    let domains: Vec<&Region> = charts.iter().map(|i| &a.chart(*i).domain).collect();
    let lattice = Lattice::for_regions(h, &domains);
    let clouds: Vec<SampleCloud> = domains.iter().map(|d| SampleCloud::sample(d, &lattice)).collect();
    let mut offsets = Vec::with_capacity(clouds.len());
    let mut total = 0;
    for c in &clouds {
        offsets.push(total);
        total += c.len();
    }
    let pos: HashMap<IndexSet, usize> = charts.iter().enumerate().map(|(k, i)| (*i, k)).collect();
    let mut edges = Vec::new();
    for ((i, j), cc) in &a.changes {
        let (ki, kj) = (pos[i], pos[j]);
        let fr = FastRegion::new(&cc.domain);
        let fast = cc.axis.as_ref().and_then(|ax| fast_pieces(ax, lattice.den));
        for (local, p) in clouds[ki].points.iter().enumerate() {
            if !fr.contains(p, lattice.den) {
                continue;
            }
            let target = match &fast {
                Some(fp) => fast_apply(fp, &cc.in_periodic, &cc.out_periodic, p, lattice.den)
                    .and_then(|y| clouds[kj].find(&y)),
                None => None,
            };
            let target = target.or_else(|| clouds[kj].snap(&cc.apply_f64(&lattice.point_f64(p))));
            if let Some(t) = target {
                edges.push(Edge { from: offsets[ki] + local, to: offsets[kj] + t, change: (*i, *j) });
            }
        }
    }
    let mut parent: Vec<usize> = (0..total).collect();
    let mut adj = vec![Vec::new(); total];
    for (k, e) in edges.iter().enumerate() {
        let (ra, rb) = (find(&mut parent, e.from), find(&mut parent, e.to));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
        adj[e.from].push((e.to, k, true));
        adj[e.to].push((e.from, k, false));
    }
    let class_of: Vec<usize> = (0..total).map(|x| find(&mut parent, x)).collect();
    let mut members: HashMap<usize, Vec<usize>> = HashMap::new();
    for (n, &c) in class_of.iter().enumerate() {
        members.entry(c).or_default().push(n);
    }
    QuotientSample { h: h.clone(), lattice, charts, clouds, offsets, class_of, edges, adj, members }
}

impl QuotientSample {
    pub fn node_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_count(&self) -> usize {
        self.members.len()
    }

    pub fn chart_index(&self, node: usize) -> usize {
        match self.offsets.binary_search(&node) {
            Ok(mut k) => {
                // skip empty clouds sharing the offset
                while k + 1 < self.offsets.len() && self.offsets[k + 1] == node {
                    k += 1;
                }
                k
            }
            Err(k) => k - 1,
        }
    }

    pub fn node(&self, node: usize) -> (IndexSet, Vec<Q>) {
        let k = self.chart_index(node);
        (self.charts[k], self.clouds[k].point_q(node - self.offsets[k]))
    }

    pub fn node_of(&self, chart: IndexSet, x: &[Q]) -> Option<usize> {
        let k = self.charts.iter().position(|c| *c == chart)?;
        let p: Option<Vec<i64>> = wrap_point(x, &self.clouds[k].periodic).iter().map(|v| self.lattice.numerator_of(v)).collect();
        self.clouds[k].find(&p?).map(|l| self.offsets[k] + l)
    }

    pub fn class_members(&self, node: usize) -> &[usize] {
        &self.members[&self.class_of[node]]
    }

    pub fn classes(&self) -> Vec<&Vec<usize>> {
        let mut v: Vec<&Vec<usize>> = self.members.values().collect();
        v.sort_by_key(|m| m[0]);
        v
    }

    pub fn equivalent(&self, a: usize, b: usize) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    /// Shortest chain of morphisms between two nodes of one class.
    pub fn chain(&self, a: usize, b: usize) -> Vec<usize> {
        let mut prev: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([a]);
        prev.insert(a, a);
        while let Some(u) = queue.pop_front() {
            if u == b {
                break;
            }
            for &(v, _, _) in &self.adj[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(v) {
                    e.insert(u);
                    queue.push_back(v);
                }
            }
        }
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = match prev.get(&cur) {
                Some(&p) => p,
                None => return vec![],
            };
            path.push(cur);
        }
        path.reverse();
        path
    }

    pub fn fmt_node(&self, n: usize) -> String {
        let (i, x) = self.node(n);
        format!("({i}, {})", fmt_point(&x))
    }

    /// Lattice neighbours of a node inside its own chart, as `(node, axis, step)`.
    pub fn lattice_neighbours(&self, node: usize) -> Vec<(usize, usize, i64)> {
        let k = self.chart_index(node);
        self.clouds[k].neighbours(node - self.offsets[k]).into_iter().map(|(j, ax, s)| (self.offsets[k] + j, ax, s)).collect()
    }
}

/// Pairs of distinct samples of one chart that the gluing identifies.
pub fn diagnose_injectivity(a: &Atlas, q: &QuotientSample) -> CheckReport {
    let mut rep = CheckReport::new("injectivity of U_I -> |K|", Status::NoFailure);
    let mut pairs = 0usize;
    let mut shown = 0usize;
    for members in q.classes() {
        if members.len() < 2 {
            continue;
        }
        let mut by_chart: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &n in members {
            by_chart.entry(q.chart_index(n)).or_default().push(n);
        }
        for nodes in by_chart.values() {
            if nodes.len() < 2 {
                continue;
            }
            pairs += nodes.len() - 1;
            if shown < 3 {
                shown += 1;
                let (u, v) = (nodes[0], nodes[1]);
                let (ci, x1) = q.node(u);
                let (_, x2) = q.node(v);
                let chain: Vec<String> = q.chain(u, v).iter().map(|&n| q.fmt_node(n)).collect();
                let exact = a.orbit(ci, &x1, 4096).iter().any(|(c, y)| *c == ci && *y == x2);
                rep.fail_with(
                    format!(
                        "U_{ci}: {} ~ {} via {}{}",
                        fmt_point(&x1),
                        fmt_point(&x2),
                        chain.join(" ~ "),
                        if exact { " (confirmed exactly)" } else { " (sample-level only)" }
                    ),
                    vec![Witness::new("x1", Some(ci), x1), Witness::new("x2", Some(ci), x2)],
                );
            }
        }
    }
    if pairs > 0 {
        rep.push(format!("{pairs} identified sample pairs within single charts"));
    } else {
        rep.push(format!("no identified pairs among {} samples at h = {}", q.node_count(), q.h));
    }
    rep
}

fn periodic_delta(a: &Q, b: &Q, periodic: bool) -> Q {
    let d = a - b;
    if !periodic {
        return d;
    }
    let half = Q::new(1.into(), 2.into());
    let mut w = &d - Q::from_integer(d.floor().to_integer());
    if w > half {
        w -= Q::one();
    }
    w
}

fn linf(a: &[Q], b: &[Q], periodic: &[bool]) -> Q {
    a.iter().zip(b).zip(periodic).map(|((x, y), &p)| periodic_delta(x, y, p).abs()).fold(Q::zero(), |m, v| if v > m { v } else { m })
}

/// Left inverse of an injective axis-aligned matrix.
fn left_inverse(m: &RationalMatrix) -> RationalMatrix {
    let mut out = RationalMatrix::zeros(m.cols, m.rows);
    for j in 0..m.cols {
        if let Some(i) = (0..m.rows).find(|&i| !m[(i, j)].is_zero()) {
            out.entries[j * m.rows + i] = Q::one() / &m[(i, j)];
        }
    }
    out
}

fn change_jacobian(cc: &CoordChange, x: &[Q]) -> RationalMatrix {
    cc.jacobian(x)
}

/// Jacobians of the identifications from `root` to every node of its class.
fn class_jacobians(a: &Atlas, q: &QuotientSample, root: usize) -> HashMap<usize, RationalMatrix> {
    let (ci, _) = q.node(root);
    let mut out = HashMap::new();
    out.insert(root, RationalMatrix::identity(a.chart(ci).dim()));
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let du = out[&u].clone();
        for &(v, e, forward) in &q.adj[u] {
            if out.contains_key(&v) {
                continue;
            }
            let edge = q.edges[e];
            let cc = a.change(edge.change.0, edge.change.1).expect("edge change");
            let (_, xs) = q.node(edge.from);
            let jac = change_jacobian(cc, &xs);
            let dv = if forward { jac.mul(&du) } else { left_inverse(&jac).mul(&du) };
            out.insert(v, dv);
            queue.push_back(v);
        }
    }
    out
}

/// Looks for pairs of inequivalent points whose neighbourhoods meet at
/// every radius in `radii`.
///
/// Candidates come from lattice edges `a ~ a'` where the class of `a'`
/// reaches a chart `J` that the class of `a` does not; the limit point in
/// `U_J` is predicted from the linearized identification and confirmed by
/// exact orbits of `a + r u`.
pub fn diagnose_hausdorff(a: &Atlas, q: &QuotientSample, radii: &[Q]) -> CheckReport {
    let mut rep = CheckReport::new("Hausdorff property of |K|", Status::NoFailure);
    let nch = q.charts.len();
    let class_charts: HashMap<usize, u64> = q
        .members
        .iter()
        .map(|(&c, ms)| (c, ms.iter().fold(0u64, |m, &n| m | (1 << q.chart_index(n)))))
        .collect();
    let mut jac_cache: HashMap<usize, HashMap<usize, RationalMatrix>> = HashMap::new();
    let mut flagged: HashSet<((IndexSet, Vec<Q>), (IndexSet, Vec<Q>))> = HashSet::new();
    let mut shown = 0;
    let mut rmin = radii.to_vec();
    rmin.sort();
    for node in 0..q.node_count() {
        let mask_a = class_charts[&q.class_of[node]];
        for (nb, axis, s) in q.lattice_neighbours(node) {
            let mask_n = class_charts[&q.class_of[nb]];
            let new = mask_n & !mask_a;
            if new == 0 {
                continue;
            }
            let (ci, xa) = q.node(node);
            let (_, xn) = q.node(nb);
            let ca = a.chart(ci);
            let jacs = jac_cache.entry(nb).or_insert_with(|| class_jacobians(a, q, nb)).clone();
            for kj in 0..nch {
                if new & (1 << kj) == 0 {
                    continue;
                }
                let cj = q.charts[kj];
                let Some((&bn, d)) = jacs.iter().find(|(m, _)| q.chart_index(**m) == kj) else { continue };
                let (_, xb) = q.node(bn);
                let delta: Vec<Q> = xa.iter().zip(&xn).zip(ca.periodic()).map(|((p, n), &per)| periodic_delta(p, n, per)).collect();
                let step = d.apply(&delta);
                let z0: Vec<Q> = xb.iter().zip(&step).map(|(b, s)| b + s).collect();
                let z0 = wrap_point(&z0, a.chart(cj).periodic());
                if !a.chart(cj).domain.contains(&z0) {
                    continue;
                }
                // exact confirmation
                let orbit_a = a.orbit(ci, &xa, 4096);
                if orbit_a.iter().any(|(c, y)| *c == cj && *y == z0) {
                    continue;
                }
                let mut dir = vec![Q::zero(); xa.len()];
                dir[axis] = qi(s);
                let mut witnesses = Vec::new();
                let mut ok = true;
                for r in radii {
                    let xr: Vec<Q> = xa.iter().zip(&dir).map(|(x, u)| x + u * r).collect();
                    if !ca.domain.contains(&xr) {
                        ok = false;
                        break;
                    }
                    let orb = a.orbit(ci, &xr, 4096);
                    let close = orb.iter().any(|(c, y)| *c == cj && linf(y, &z0, a.chart(cj).periodic()) <= *r);
                    if !close {
                        ok = false;
                        break;
                    }
                    witnesses.push(Witness::new(format!("r={r}"), Some(ci), xr));
                }
                if !ok {
                    continue;
                }
                let key_a = (ci, wrap_point(&xa, ca.periodic()));
                let key_b = (cj, z0.clone());
                let key = if key_a <= key_b { (key_a, key_b) } else { (key_b, key_a) };
                if !flagged.insert(key) {
                    continue;
                }
                rep.status = Status::Fail;
                if shown < 3 {
                    shown += 1;
                    rep.push(format!(
                        "classes [({ci}, {})] and [({cj}, {})] have no disjoint neighbourhoods",
                        fmt_point(&xa),
                        fmt_point(&z0)
                    ));
                    rep.witnesses.push(Witness::new("p", Some(ci), xa.clone()));
                    rep.witnesses.push(Witness::new("q", Some(cj), z0.clone()));
                    rep.witnesses.extend(witnesses);
                }
            }
        }
    }
    if flagged.is_empty() {
        rep.push(format!("no inseparable class pairs among {} samples at h = {}", q.node_count(), q.h));
    } else {
        rep.push(format!("{} inseparable class pairs", flagged.len()));
    }
    rep
}

/// Linear relation between two vector spaces, as a spanning set of the
/// subspace of `E_u ⊕ E_v`, kept in reduced row echelon form.
#[derive(Debug, Clone, PartialEq)]
struct Relation {
    du: usize,
    dv: usize,
    rows: Vec<Vec<Q>>,
}

impl Relation {
    fn canonical(du: usize, dv: usize, rows: Vec<Vec<Q>>) -> Relation {
        if rows.is_empty() {
            return Relation { du, dv, rows };
        }
        let m = RationalMatrix::from_rows(&rows);
        let (r, piv) = m.rref();
        let rows = (0..piv.len()).map(|i| r.row(i)).collect();
        Relation { du, dv, rows }
    }

    fn identity(d: usize) -> Relation {
        let rows = (0..d)
            .map(|k| {
                let mut v = vec![Q::zero(); 2 * d];
                v[k] = Q::one();
                v[d + k] = Q::one();
                v
            })
            .collect();
        Relation::canonical(d, d, rows)
    }

    fn graph(m: &RationalMatrix) -> Relation {
        let rows = (0..m.cols)
            .map(|k| {
                let mut v = vec![Q::zero(); m.cols + m.rows];
                v[k] = Q::one();
                for i in 0..m.rows {
                    v[m.cols + i] = m[(i, k)].clone();
                }
                v
            })
            .collect();
        Relation::canonical(m.cols, m.rows, rows)
    }

    fn transpose(&self) -> Relation {
        let rows = self.rows.iter().map(|r| r[self.du..].iter().chain(&r[..self.du]).cloned().collect()).collect();
        Relation::canonical(self.dv, self.du, rows)
    }

    /// `other ∘ self`.
    fn then(&self, other: &Relation) -> Relation {
        assert_eq!(self.dv, other.du);
        let (k1, k2) = (self.rows.len(), other.rows.len());
        if k1 == 0 || k2 == 0 {
            return Relation { du: self.du, dv: other.dv, rows: vec![] };
        }
        // λ·B1 = μ·B2
        let mut cols: Vec<Vec<Q>> = Vec::new();
        for r in &self.rows {
            cols.push(r[self.du..].to_vec());
        }
        for r in &other.rows {
            cols.push(r[..other.du].iter().map(|v| -v).collect());
        }
        let m = if self.dv == 0 {
            RationalMatrix::zeros(0, k1 + k2)
        } else {
            RationalMatrix::from_cols(self.dv, &cols)
        };
        let ker = if self.dv == 0 {
            (0..k1 + k2)
                .map(|i| {
                    let mut v = vec![Q::zero(); k1 + k2];
                    v[i] = Q::one();
                    v
                })
                .collect()
        } else {
            m.kernel()
        };
        let mut rows = Vec::new();
        for lm in ker {
            let mut v = vec![Q::zero(); self.du + other.dv];
            for (t, r) in self.rows.iter().enumerate() {
                for k in 0..self.du {
                    v[k] += &lm[t] * &r[k];
                }
            }
            for (t, r) in other.rows.iter().enumerate() {
                for k in 0..other.dv {
                    v[self.du + k] += &lm[k1 + t] * &r[other.du + k];
                }
            }
            if v.iter().any(|x| !x.is_zero()) {
                rows.push(v);
            }
        }
        Relation::canonical(self.du, other.dv, rows)
    }

    /// Some `(a, b)` in a relation `E_u → E_u` with `a ≠ b`.
    fn off_diagonal(&self) -> Option<(Vec<Q>, Vec<Q>)> {
        self.rows
            .iter()
            .find(|r| r[..self.du] != r[self.du..])
            .map(|r| (r[..self.du].to_vec(), r[self.du..].to_vec()))
    }

    /// Matrix of the relation when it is the graph of a map on all of `E_u`.
    fn as_map(&self) -> Option<RationalMatrix> {
        if self.rows.len() != self.du {
            return None;
        }
        for (i, r) in self.rows.iter().enumerate() {
            for k in 0..self.du {
                if r[k] != if k == i { Q::one() } else { Q::zero() } {
                    return None;
                }
            }
        }
        let mut m = RationalMatrix::zeros(self.dv, self.du);
        for (k, r) in self.rows.iter().enumerate() {
            for i in 0..self.dv {
                m.entries[i * self.du + k] = r[self.du + i].clone();
            }
        }
        Some(m)
    }
}

/// Image of `α + iβ` under a real 2×2 matrix, written in complex notation.
pub fn fmt_complex_image(m: &RationalMatrix) -> String {
    fn coef(c: &Q) -> String {
        if *c == Q::one() {
            String::new()
        } else if *c == -Q::one() {
            "-".into()
        } else {
            c.to_string()
        }
    }
    let vars = ["α", "β"];
    let re: Vec<String> = (0..2).filter(|&k| !m[(0, k)].is_zero()).map(|k| format!("{}{}", coef(&m[(0, k)]), vars[k])).collect();
    let im: Vec<(usize, &Q)> = (0..2).filter(|&k| !m[(1, k)].is_zero()).map(|k| (k, &m[(1, k)])).collect();
    let mut out = if re.is_empty() { "0".to_string() } else { re.join("+") };
    match im.as_slice() {
        [] => {}
        [(k, c)] => out.push_str(&format!("+{}i{}", coef(c), vars[*k])),
        _ => {
            let parts: Vec<String> = im.iter().map(|(k, c)| format!("{}{}", coef(c), vars[*k])).collect();
            out.push_str(&format!("+i({})", parts.join("+")));
        }
    }
    out.replace("+-", "-")
}

/// Identification of fibers over one class of `|K|`.
#[derive(Debug, Clone)]
pub struct FiberReport {
    pub class_root: usize,
    pub nodes: usize,
    pub linear: bool,
    /// Distinct identifications `E_I|x → E_I|x'` found between samples of
    /// the same chart, as matrices.
    pub identifications: Vec<(IndexSet, Vec<Q>, Vec<Q>, RationalMatrix)>,
    pub conflicts: Vec<String>,
    pub check: CheckReport,
}

/// Equivalence relation on obstruction fibers over the class of `node`.
pub fn fiber_structure(a: &Atlas, q: &QuotientSample, node: usize) -> FiberReport {
    let members: Vec<usize> = q.class_members(node).to_vec();
    let obs = |n: usize| a.chart(q.charts[q.chart_index(n)]).obs_dim;
    let edge_rel = |e: usize, forward: bool| -> Relation {
        let edge = q.edges[e];
        let cc = a.change(edge.change.0, edge.change.1).expect("edge change");
        let g = Relation::graph(&cc.linear);
        if forward {
            g
        } else {
            g.transpose()
        }
    };
    // path relations between samples of one chart
    let mut rels: BTreeMap<(usize, usize), Vec<Relation>> = BTreeMap::new();
    let budget = 20_000usize;
    let mut used = 0usize;
    for &u in &members {
        let ku = q.chart_index(u);
        let mut stack: Vec<(usize, Relation, Vec<usize>)> = vec![(u, Relation::identity(obs(u)), vec![u])];
        while let Some((v, rel, path)) = stack.pop() {
            used += 1;
            if used > budget {
                break;
            }
            if q.chart_index(v) == ku && v >= u {
                let list = rels.entry((u, v)).or_default();
                if !list.contains(&rel) {
                    list.push(rel.clone());
                }
            }
            for &(w, e, fwd) in &q.adj[v] {
                if path.contains(&w) && !(w == u && path.len() > 2) {
                    continue;
                }
                let r2 = rel.then(&edge_rel(e, fwd));
                if w == u {
                    let list = rels.entry((u, u)).or_default();
                    if !list.contains(&r2) {
                        list.push(r2);
                    }
                    continue;
                }
                let mut p2 = path.clone();
                p2.push(w);
                stack.push((w, r2, p2));
            }
        }
    }
    let mut conflicts = Vec::new();
    let mut identifications = Vec::new();
    for ((u, v), list) in &rels {
        let (ci, xu) = q.node(*u);
        let (_, xv) = q.node(*v);
        for r in list {
            if let Some(m) = r.as_map() {
                if !identifications.iter().any(|(c, a, b, mm): &(IndexSet, Vec<Q>, Vec<Q>, RationalMatrix)| {
                    *c == ci && *a == xu && *b == xv && *mm == m
                }) {
                    identifications.push((ci, xu.clone(), xv.clone(), m));
                }
            }
        }
        for (s, r1) in list.iter().enumerate() {
            for r2 in &list[s..] {
                let lp = r1.then(&r2.transpose());
                if let Some((e1, e2)) = lp.off_diagonal() {
                    conflicts.push(format!(
                        "over U_{ci} at {} and {}: e = {} is identified with e' = {} ≠ e",
                        fmt_point(&xu),
                        fmt_point(&xv),
                        fmt_point(&e1),
                        fmt_point(&e2)
                    ));
                }
            }
        }
    }
    conflicts.sort();
    conflicts.dedup();
    let linear = conflicts.is_empty();
    let mut check = CheckReport::new(
        format!("linear fiber over {}", q.fmt_node(members[0])),
        if linear { Status::Pass } else { Status::Fail },
    );
    check.push(format!("{} samples in the class", members.len()));
    for (c, x, y, m) in &identifications {
        let several = identifications.iter().filter(|(c2, x2, y2, _)| c2 == c && x2 == x && y2 == y).count() > 1;
        if x != y || several {
            let desc = if m.rows == 2 && m.cols == 2 { format!("α+iβ ~ {}", fmt_complex_image(m)) } else { format!("{:?}", m.to_f64()) };
            check.push(format!("identification over U_{c}: {} -> {}: {desc}", fmt_point(x), fmt_point(y)));
        }
    }
    for c in conflicts.iter().take(4) {
        check.fail_with(c.clone(), vec![]);
    }
    if used > budget {
        check.push("path enumeration truncated");
    }
    FiberReport { class_root: q.class_of[node], nodes: members.len(), linear, identifications, conflicts, check }
}
