//! Shipped atlas files and the four failure demonstrations built on them.

use crate::atlas::file::parse_atlas;
use crate::atlas::{build_quotient, diagnose_hausdorff, diagnose_injectivity, fiber_structure, Atlas};
use crate::chart::IndexSet;
use crate::linalg::{q, Q};
use crate::report::{fmt_point, CheckReport, Status, Witness};
use num::{Signed, Zero};
use std::time::{Duration, Instant};

/// `(name, source)` of every atlas shipped with the crate.
pub const ATLASES: &[(&str, &str)] = &[
    ("circle-basic", include_str!("../atlases/circle-basic.ka")),
    ("circle-injectivity-fail", include_str!("../atlases/circle-injectivity-fail.ka")),
    ("circle-linearity-fail", include_str!("../atlases/circle-linearity-fail.ka")),
    ("hausdorff-fail", include_str!("../atlases/hausdorff-fail.ka")),
    ("metrizability-fail", include_str!("../atlases/metrizability-fail.ka")),
    ("quadratic", include_str!("../atlases/quadratic.ka")),
    ("linear", include_str!("../atlases/linear.ka")),
    ("two-chart-core", include_str!("../atlases/two-chart-core.ka")),
];

pub const DEMOS: &[&str] = &["injectivity", "hausdorff", "linearity", "metrizability"];

pub fn source(name: &str) -> Option<&'static str> {
    ATLASES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a shipped atlas. Panics on a malformed built-in file.
pub fn load(name: &str) -> Atlas {
    let src = source(name).unwrap_or_else(|| panic!("no shipped atlas `{name}`"));
    parse_atlas(src).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Dyadic radii `2^-1, ..., 2^-10`.
pub fn dyadic_radii() -> Vec<Q> {
    (1..=10).map(|k| q(1, 1 << k)).collect()
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub name: String,
    /// The expected failure was found and confirmed.
    pub reproduced: bool,
    pub report: CheckReport,
    pub elapsed: Duration,
}

impl DemoOutcome {
    pub fn text(&self) -> String {
        format!(
            "{}demo {}: {} in {:.3}s\n",
            self.report.text(),
            self.name,
            if self.reproduced { "failure reproduced" } else { "failure NOT reproduced" },
            self.elapsed.as_secs_f64()
        )
    }
}

pub fn run_demo(name: &str, h: &Q) -> Option<DemoOutcome> {
    let t = Instant::now();
    let (reproduced, report) = match name {
        "injectivity" => injectivity(h),
        "hausdorff" => hausdorff(h),
        "linearity" => linearity(h),
        "metrizability" => metrizability(),
        _ => return None,
    };
    Some(DemoOutcome { name: name.to_string(), reproduced, report, elapsed: t.elapsed() })
}

/// Two points of `U_3` with the same image in `|K|`.
fn injectivity(h: &Q) -> (bool, CheckReport) {
    let a = load("circle-injectivity-fail");
    let qs = build_quotient(&a, h);
    let rep = diagnose_injectivity(&a, &qs);
    let u3 = IndexSet::single(3);
    let found = rep.status == Status::Fail
        && rep.witnesses.iter().any(|w| w.chart == Some(u3))
        && rep.details.iter().any(|d| d.starts_with("U_{3}") && d.contains("confirmed exactly"));
    (found, rep)
}

/// Classes over `(0, y)` in `U_1` and `U_2` that cannot be separated.
fn hausdorff(h: &Q) -> (bool, CheckReport) {
    let a = load("hausdorff-fail");
    let qs = build_quotient(&a, h);
    let mut rep = diagnose_hausdorff(&a, &qs, &dyadic_radii());
    let (u1, u2) = (IndexSet::single(1), IndexSet::single(2));
    // the pair over (0, 3/4), witnessed by (x, 3/4) for dyadic x
    let y = q(3, 4);
    let p = vec![Q::zero(), y.clone()];
    let mut ok = !a.orbit(u1, &p, 64).iter().any(|(c, z)| *c == u2 && *z == p) && a.chart(u2).domain.contains(&p);
    for x in dyadic_radii() {
        let w = vec![x.clone(), y.clone()];
        let orb = a.orbit(u1, &w, 64);
        let meets = orb.iter().any(|(c, z)| *c == u2 && *z == w);
        ok &= meets;
        rep.witnesses.push(Witness::new(format!("x={x}"), Some(u1), w));
    }
    rep.push(format!(
        "explicit pair: [({u1}, {})] and [({u2}, {})], every neighbourhood of both contains [(x, 3/4)] for x = 2^-1..2^-10: {}",
        fmt_point(&p),
        fmt_point(&p),
        if ok { "confirmed" } else { "NOT confirmed" }
    ));
    (ok && rep.status == Status::Fail, rep)
}

/// Fiber over a point of `U_3` identified with itself by two different
/// linear maps.
fn linearity(h: &Q) -> (bool, CheckReport) {
    let a = load("circle-linearity-fail");
    let qs = build_quotient(&a, h);
    let x = vec![q(3, 4), q(3, 4)];
    let Some(node) = qs.node_of(IndexSet::single(3), &x) else {
        let mut rep = CheckReport::new("linear fiber", Status::Fail);
        rep.push(format!("sample {} is not on the lattice at h = {h}", fmt_point(&x)));
        return (false, rep);
    };
    let fr = fiber_structure(&a, &qs, node);
    let text = fr.check.details.join("\n");
    let both = text.contains("α+iβ ~ α+2iβ") && text.contains("α+iβ ~ α+iβ");
    (both && !fr.linear, fr.check)
}

/// Points close to `[(0,0)]` in the embedding that stay outside the
/// neighbourhood `U_{f,1/2}` with `f(x) = x`.
fn metrizability() -> (bool, CheckReport) {
    let a = load("metrizability-fail");
    let mut rep = CheckReport::new("metrizability of |K|", Status::Fail);
    let (u1, u2, u12) = (IndexSet::single(1), IndexSet::single(2), IndexSet::from_labels(&[1, 2]));
    let eps = q(1, 2);
    let in_nbhd = |chart: IndexSet, x: &[Q]| -> bool {
        a.orbit(chart, x, 64).iter().any(|(c, z)| {
            if *c == u1 {
                z[0].abs() < eps
            } else if *c == u2 || *c == u12 {
                z[0] > Q::zero() && z[0] < eps && z[1].abs() < z[0]
            } else {
                false
            }
        })
    };
    let base = vec![Q::zero()];
    let mut ok = in_nbhd(u1, &base);
    for r in dyadic_radii() {
        let w = vec![&r / Q::from_integer(4.into()), &r / Q::from_integer(2.into())];
        let dist = w.iter().map(|v| v.abs()).fold(Q::zero(), |m, v| if v > m { v } else { m });
        let outside = !in_nbhd(u2, &w);
        ok &= dist < r && outside;
        rep.push(format!(
            "r = {r}: [({u2}, {})] at distance {dist} < r from [({u1}, (0))], {} U_{{f,1/2}}",
            fmt_point(&w),
            if outside { "outside" } else { "inside" }
        ));
        rep.witnesses.push(Witness::new(format!("r={r}"), Some(u2), w));
    }
    // the neighbourhood itself is open around the base point
    let inner = vec![q(1, 8), q(1, 16)];
    ok &= in_nbhd(u2, &inner);
    rep.push("no ball of the ambient metric around [(0)] fits inside U_{f,1/2}".to_string());
    (ok, rep)
}
