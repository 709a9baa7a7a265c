use super::file::{parse_atlas, print_atlas};
use super::*;
use crate::demos::{self, ATLASES};
use crate::linalg::q;

fn h() -> Q {
    q(1, 16)
}

#[test]
fn shipped_atlases_parse_and_round_trip() {
    for (name, src) in ATLASES {
        let a = parse_atlas(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let p1 = print_atlas(&a).unwrap();
        let b = parse_atlas(&p1).unwrap_or_else(|e| panic!("{name} reprint: {e}\n{p1}"));
        assert_eq!(print_atlas(&b).unwrap(), p1, "{name}");
        assert!(a.validate_structure().ok(), "{name}: {}", a.validate_structure().text());
    }
}

#[test]
fn parse_errors_carry_positions() {
    let e = parse_atlas("kuranishi-atlas v1\natlas x dim 0\nspace 1\nchart {1} domain (0,1) obs 1 section [x1 +] footprint [x1]\n").unwrap_err();
    assert_eq!(e.line, 4);
    assert!(parse_atlas("kuranishi-atlas v2\n").is_err());
    let e = parse_atlas("kuranishi-atlas v1\natlas x dim 0\nspace 1\nfrobnicate\n").unwrap_err();
    assert_eq!(e.line, 4);
}

#[test]
fn circle_basic_is_a_valid_tame_atlas() {
    let a = demos::load("circle-basic");
    let r = a.validate(CocycleLevel::Strong, &h());
    assert!(r.ok(), "{}", r.text());
    assert!(a.validate_additivity().ok());
}

#[test]
fn injectivity_example_fails_tameness_at_two_three() {
    let a = demos::load("circle-injectivity-fail");
    assert!(a.validate_cocycles(CocycleLevel::Strong, &h()).ok());
    let t = a.validate_tameness(&h());
    assert!(!t.ok());
    assert!(t.text().contains("{2,3}"), "{}", t.text());
    let qs = build_quotient(&a, &h());
    let inj = diagnose_injectivity(&a, &qs);
    assert_eq!(inj.status, Status::Fail);
    assert!(inj.witnesses.iter().any(|w| w.chart == Some(IndexSet::single(3))));
}

#[test]
fn basic_circle_quotient_is_injective() {
    let a = demos::load("circle-basic");
    let qs = build_quotient(&a, &h());
    assert_eq!(diagnose_injectivity(&a, &qs).status, Status::NoFailure);
}

#[test]
fn linearity_fiber_has_two_identifications() {
    let a = demos::load("circle-linearity-fail");
    let qs = build_quotient(&a, &h());
    let n = qs.node_of(IndexSet::single(3), &[q(3, 4), q(3, 4)]).unwrap();
    let fr = fiber_structure(&a, &qs, n);
    assert!(!fr.linear);
    let d = RationalMatrix::from_i64(&[&[1, 0], &[0, 2]]);
    assert!(fr.identifications.iter().any(|(_, x, y, m)| x == y && *m == d));
    assert!(fr.identifications.iter().any(|(_, x, y, m)| x == y && *m == RationalMatrix::identity(2)));
}

#[test]
fn hausdorff_pair_over_the_axis() {
    let a = demos::load("hausdorff-fail");
    let qs = build_quotient(&a, &h());
    let r = diagnose_hausdorff(&a, &qs, &demos::dyadic_radii());
    assert_eq!(r.status, Status::Fail, "{}", r.text());
    assert!(r.witnesses.iter().filter(|w| w.label == "q" || w.label == "p").all(|w| w.coords[0].is_zero() || w.coords[0] < Q::zero()));
    assert!(!a.validate_additivity().ok());
}

#[test]
fn circle_basic_is_hausdorff_at_resolution() {
    let a = demos::load("circle-basic");
    let qs = build_quotient(&a, &h());
    assert_eq!(diagnose_hausdorff(&a, &qs, &demos::dyadic_radii()).status, Status::NoFailure);
}

#[test]
fn all_demos_reproduce() {
    for d in demos::DEMOS {
        let o = demos::run_demo(d, &q(1, 64)).unwrap();
        assert!(o.reproduced, "{}", o.text());
    }
}

#[test]
fn broken_cocycle_is_detected() {
    let mut a = demos::load("two-chart-core");
    // shift the image of 1 -> 12 off the zero set of the section
    let key = (IndexSet::single(1), IndexSet::from_labels(&[1, 2]));
    let cc = a.changes[&key].clone();
    let map = crate::expr::ExprMap::parse(1, &["x1", "1/2"]).unwrap();
    a.changes.insert(key, CoordChange::new(cc.source, cc.target, cc.domain.clone(), map, vec![], cc.linear.clone(), cc.out_periodic.clone()));
    let r = a.validate_changes(&h());
    assert!(!r.ok());
}

#[test]
fn cocycle_fault_injection_on_a_triple() {
    let mut a = demos::load("circle-linearity-fail");
    assert!(a.validate_cocycles(CocycleLevel::Strong, &h()).ok());
    let key = (IndexSet::single(1), IndexSet::from_labels(&[1, 3, 4]));
    let cc = a.changes[&key].clone();
    let map = crate::expr::ExprMap::parse(2, &["x1 + 1", "x2 / 2"]).unwrap();
    a.changes.insert(key, CoordChange::new(cc.source, cc.target, cc.domain.clone(), map, vec![(0, q(1, 3))], cc.linear.clone(), cc.out_periodic.clone()));
    for level in [CocycleLevel::Weak, CocycleLevel::Standard, CocycleLevel::Strong] {
        assert!(!a.validate_cocycles(level, &h()).ok(), "{level}");
    }
}

#[test]
fn hausdorff_atlas_fails_tameness_through_additivity() {
    let a = demos::load("hausdorff-fail");
    let t = a.validate_tameness(&h());
    assert!(!t.ok());
    assert!(t.details.iter().any(|d| d.starts_with("not additive")));
    assert!(!t.details.iter().any(|d| d.starts_with("tame2")), "{}", t.text());
}

#[test]
fn eps_sets_shrink_to_the_image() {
    let a = demos::load("two-chart-core");
    let (i, j) = (IndexSet::single(1), IndexSet::from_labels(&[1, 2]));
    let s = a.chart(i).domain.clone();
    let e = a.eps_set(j, i, &s).unwrap();
    assert!(e.contains(&[q(1, 2), Q::zero()]));
    assert!(!e.is_empty());
}
