use super::*;
use crate::demos;
use crate::geometry::Interval;
use proptest::prelude::*;

fn circle() -> Region {
    Region::from_box(vec![true], vec![Interval::closed(qi(0), qi(1))])
}

fn arc(lo: Q, hi: Q) -> Region {
    Region::from_box(vec![true], vec![Interval::open(lo, hi)])
}

fn thirds() -> Vec<Region> {
    (1..=3).map(|i| arc(q(i, 3), q(i + 2, 3))).collect()
}

#[test]
fn single_set_cover_is_trivial() {
    let x = circle();
    let r = cover_reduce(&x, &[x.clone()], Nesting::Auto).unwrap();
    assert_eq!(r.zones.len(), 1);
    assert!(r.zone(IndexSet::single(1)).set_eq(&x));
}

#[test]
fn thirds_of_the_circle() {
    let x = circle();
    let r = cover_reduce(&x, &thirds(), Nesting::Auto).unwrap();
    let z1 = r.zone(IndexSet::single(1)).closure();
    let z2 = r.zone(IndexSet::single(2)).closure();
    assert!(z1.intersect(&z2).is_empty());
    assert!(r.zones.contains_key(&IndexSet::from_labels(&[1, 2])));
    assert!(!r.zones.contains_key(&IndexSet::from_labels(&[1, 2, 3])));
    check_cover_reduction(&x, &thirds(), &r.zones).unwrap();
}

#[test]
fn uniform_step_too_large_for_the_cover() {
    // six steps of 1/24 erode more than the Lebesgue number 1/6
    let e = cover_reduce(&circle(), &thirds(), Nesting::Uniform(q(1, 24))).unwrap_err();
    assert!(matches!(e, CoverError::Nesting(_)), "{e}");
    assert!(cover_reduce(&circle(), &thirds(), Nesting::Uniform(q(1, 48))).is_ok());
}

#[test]
fn gaps_are_reported() {
    let covers = vec![arc(q(0, 1), q(1, 2)), arc(q(1, 2), qi(1))];
    match cover_reduce(&circle(), &covers, Nesting::Auto) {
        Err(CoverError::Gap(w)) => assert!(w == vec![q(1, 2)] || w == vec![qi(0)], "{w:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn explicit_nesting_is_checked() {
    let x = circle();
    let covers = thirds();
    let good = uniform_nesting(&x, &covers, &q(1, 64));
    assert!(cover_reduce(&x, &covers, Nesting::Explicit(good.clone())).is_ok());
    let mut bad = good;
    bad.g[0][1] = bad.f[0][0].clone();
    assert!(matches!(cover_reduce(&x, &covers, Nesting::Explicit(bad)), Err(CoverError::Nesting(_))));
}

prop_compose! {
    fn circle_cover()(n in 1usize..=6, seed in prop::collection::vec((0i64..64, 1i64..8, 1i64..8), 6)) -> Vec<Region> {
        if n == 1 {
            return vec![circle()];
        }
        let mut cuts: Vec<i64> = seed.iter().take(n).map(|s| s.0).collect();
        cuts.sort();
        cuts.dedup();
        let m = cuts.len();
        (0..m)
            .map(|i| {
                let lo = cuts[i] - seed[i].1;
                let hi = if i + 1 < m { cuts[i + 1] } else { cuts[0] + 64 } + seed[i].2;
                arc(q(lo, 64), q(hi, 64))
            })
            .collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn random_circle_covers_reduce(covers in circle_cover()) {
        let x = circle();
        let r = cover_reduce(&x, &covers, Nesting::Auto).unwrap();
        prop_assert!(check_cover_reduction(&x, &covers, &r.zones).is_ok());
    }
}

fn h() -> Q {
    q(1, 32)
}

#[test]
fn circle_atlas_reduction() {
    let a = demos::load("circle-basic");
    let cr = reduce_footprints(&a).unwrap();
    let v = atlas_reduce(&a, &cr).unwrap();
    let rep = validate_reduction(&a, &v, &h());
    assert!(rep.ok(), "{}", rep.text());
    let (u1, u2) = (IndexSet::single(1), IndexSet::single(2));
    let e = a.eps_set(u1, u2, &v.get(&a, u2).closure()).unwrap();
    assert!(v.get(&a, u1).closure().intersect(&e).is_empty());
    // zero-set identity V_I ∩ s^-1(0) = ψ^-1(Z_I)
    for i in v.nonempty() {
        let c = a.chart(i);
        let lhs = c.zero_set().unwrap().intersect(&v.sets[&i]);
        let rhs = c.footprint_preimage(&cr.zone(i)).unwrap();
        assert!(lhs.set_eq(&rhs), "{i}: {lhs} vs {rhs}");
    }
}

#[test]
fn skipping_the_overlap_removal_is_caught() {
    let a = demos::load("circle-basic");
    let cr = reduce_footprints(&a).unwrap();
    let w = atlas_reduce_with(&a, &cr, false).unwrap();
    let rep = validate_reduction(&a, &w, &h());
    assert!(!rep.ok());
    assert!(rep.details.iter().any(|d| d.starts_with("(ii)")), "{}", rep.text());
    assert!(!rep.witnesses.is_empty());
}

#[test]
fn single_chart_reduction_is_the_restriction() {
    let a = demos::load("quadratic");
    let cr = reduce_footprints(&a).unwrap();
    let v = atlas_reduce(&a, &cr).unwrap();
    let u1 = IndexSet::single(1);
    let expect = restrict_chart(a.chart(u1), &cr.zone(u1), true).unwrap().domain;
    assert!(v.get(&a, u1).set_eq(&expect));
    assert!(validate_reduction(&a, &v, &h()).ok());
    let stored = AtlasReduction::named(&a, "core").unwrap();
    assert!(validate_reduction(&a, &stored, &h()).ok());
}

#[test]
fn nested_reductions_chain() {
    let a = demos::load("circle-basic");
    let v = atlas_reduce(&a, &reduce_footprints(&a).unwrap()).unwrap();
    let c1 = nest_reduction(&a, &v).unwrap();
    let c2 = nest_reduction(&a, &c1).unwrap();
    assert!(is_nested(&c1, &v) && is_nested(&c2, &c1));
    for c in [&c1, &c2] {
        let rep = validate_reduction(&a, c, &h());
        assert!(rep.ok(), "{}", rep.text());
    }
    let q1 = demos::load("quadratic");
    let v = AtlasReduction::named(&q1, "core").unwrap();
    let c = nest_reduction(&q1, &v).unwrap();
    let u1 = IndexSet::single(1);
    assert!(c.get(&q1, u1).set_eq(&crate::atlas::file::parse_region_str("(-5/4,-3/4) | (3/4,5/4)", &[false]).unwrap()));
}

#[test]
fn broken_reduction_misses_zeros() {
    let a = demos::load("quadratic");
    let mut v = AtlasReduction::named(&a, "core").unwrap();
    let u1 = IndexSet::single(1);
    v.sets.insert(u1, crate::atlas::file::parse_region_str("(-3/2,-1/2)", &[false]).unwrap());
    let rep = validate_reduction(&a, &v, &h());
    assert!(rep.details.iter().any(|d| d.starts_with("(iii)")), "{}", rep.text());
}
