use super::*;
use crate::atlas::quotient::{diagnose_hausdorff, diagnose_injectivity, fiber_structure};
use crate::demos::{dyadic_radii, load};
use crate::generate::weak_atlas;
use crate::linalg::q;

fn arc(a: Q, b: Q) -> Region {
    Region::new(1, vec![true], vec![vec![crate::geometry::Interval::open(a, b)]])
}

fn iv(a: Q, b: Q) -> Region {
    Region::open_box(&[(a, b)])
}

#[test]
fn identity_shrink_is_the_same_atlas() {
    let a = load("circle-basic");
    let s = shrink(&a, &BTreeMap::new()).unwrap();
    assert_eq!(s, a);
}

#[test]
fn circle_footprint_shrinking() {
    let a = load("circle-basic");
    let fp: Vec<Region> = (1..=3).map(|i| arc(q(i, 3) + q(1, 24), q(i + 2, 3) - q(1, 24))).collect();
    let s = shrink_to_footprints(&a, &fp).unwrap();
    for i in s.index_sets() {
        assert!(!s.footprint(i).unwrap().is_empty(), "{i}");
        assert!(s.chart(i).domain.precompact_in(&a.chart(i).domain));
    }
}

#[test]
fn small_footprint_is_lost() {
    let a = load("circle-basic");
    let fp = vec![arc(q(3, 8), q(23, 24)), arc(q(17, 24), q(31, 24)), arc(q(1, 24), q(1, 3))];
    assert_eq!(shrink_to_footprints(&a, &fp), Err(ShrinkError::LostFootprint(IndexSet::from_labels(&[1, 3]))));
}

#[test]
fn lemma_single_label() {
    let u = iv(qi(0), qi(1));
    let z = Region::new(1, vec![false], vec![vec![crate::geometry::Interval::closed(q(1, 4), q(1, 2))]]);
    let zi = BTreeMap::from([(1, z.clone())]);
    let w = BTreeMap::from([(IndexSet::single(1), u.clone())]);
    let out = open_sets_lemma(&u, &z, &zi, &w).unwrap();
    let u1 = &out[&IndexSet::single(1)];
    assert!(z.is_subset(u1) && u1.is_subset(&u));
}

#[test]
fn lemma_two_labels_on_an_interval() {
    // Z = [0,3] in (-1,4); Z_1 = [0,2), Z_2 = (1,3].
    let u = iv(qi(-1), qi(4));
    let z = Region::new(1, vec![false], vec![vec![crate::geometry::Interval::closed(qi(0), qi(3))]]);
    let z1 = z.intersect(&iv(qi(-1), qi(2)));
    let z2 = z.intersect(&iv(qi(1), qi(4)));
    let (k1, k2, k12) = (IndexSet::single(1), IndexSet::single(2), IndexSet::from_labels(&[1, 2]));
    let w = BTreeMap::from([(k1, iv(qi(-1), qi(2)).difference(&z2.difference(&z1).closure())), (k2, iv(qi(1), qi(4))), (k12, iv(qi(1), qi(2)))]);
    let zi = BTreeMap::from([(1, z1.clone()), (2, z2.clone())]);
    let out = open_sets_lemma(&u, &z, &zi, &w).unwrap();
    assert!(out[&k1].intersect(&out[&k2]).set_eq(&out[&k12]));
    for (k, zk) in [(k1, z1.clone()), (k2, z2.clone()), (k12, z1.intersect(&z2))] {
        assert!(zk.is_subset(&out[&k]), "{k}");
        assert!(out[&k].is_subset(&w[&k]), "{k}");
    }
}

#[test]
fn lemma_rejects_wrong_w() {
    let u = iv(qi(0), qi(1));
    let z = Region::new(1, vec![false], vec![vec![crate::geometry::Interval::closed(q(1, 4), q(1, 2))]]);
    let zi = BTreeMap::from([(1, z.clone())]);
    let w = BTreeMap::from([(IndexSet::single(1), iv(qi(0), q(3, 8)))]);
    assert!(matches!(open_sets_lemma(&u, &z, &zi, &w), Err(LemmaError::Hypothesis { .. })));
}

fn assert_clean(t: &Atlas, h: &Q) {
    assert!(t.validate_tameness(h).ok(), "{}", t.validate_tameness(h).text());
    let qs = build_quotient(t, h);
    let inj = diagnose_injectivity(t, &qs);
    assert!(inj.ok(), "{}", inj.text());
    let hd = diagnose_hausdorff(t, &qs, &dyadic_radii());
    assert!(hd.ok(), "{}", hd.text());
    for n in 0..qs.node_count() {
        assert!(fiber_structure(t, &qs, n).linear, "{}", qs.fmt_node(n));
    }
}

#[test]
fn tame_circle() {
    let h = q(1, 32);
    let t = tame_shrink(&load("circle-basic"), &h).unwrap();
    assert_eq!(t.transcript.len(), 3);
    assert_clean(&t.atlas, &h);
}

#[test]
fn tame_two_chart_core() {
    let h = q(1, 32);
    let t = tame_shrink(&load("two-chart-core"), &h).unwrap();
    assert_clean(&t.atlas, &h);
}

#[test]
fn single_chart_is_tame_after_shrinking() {
    let h = q(1, 32);
    let a = load("quadratic");
    let t = tame_shrink(&a, &h).unwrap();
    assert!(t.atlas.chart(IndexSet::single(1)).domain.precompact_in(&a.chart(IndexSet::single(1)).domain));
    assert!(t.atlas.validate_tameness(&h).ok());
}

#[test]
fn tame_generated_atlases() {
    let h = q(1, 16);
    for seed in 0..6 {
        let a = weak_atlas(seed);
        let t = tame_shrink(&a, &h).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_clean(&t.atlas, &h);
    }
}

#[test]
fn metric_on_tamed_circle() {
    let h = q(1, 16);
    let (_, inner) = preshrunk_tame(&load("circle-basic"), &h).unwrap();
    let m = sampled_metric(&inner.atlas, &h).unwrap();
    assert!(m.report.ok(), "{}", m.report.text());
    assert_eq!(m.unreachable, 0);
    assert!(m.isometry_defect <= 2);
}

#[test]
fn metric_needs_tameness() {
    let h = q(1, 16);
    let a = (0..20).map(weak_atlas).find(|a| !a.validate_tameness(&h).ok()).unwrap();
    assert!(matches!(sampled_metric(&a, &h), Err(ShrinkError::NotTame(_))));
}
