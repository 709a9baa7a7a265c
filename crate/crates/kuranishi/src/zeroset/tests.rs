use super::*;
use crate::demos::load;
use crate::linalg::{q, qi};

fn count(name: &str, seed: u64) -> ZeroCount {
    let run = pipeline(&load(name), &q(1, 64), seed).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert!(run.report.ok(), "{}", run.report.text());
    run.count.unwrap()
}

#[test]
fn quadratic_has_two_opposite_zeros() {
    let c = count("quadratic", 0);
    assert_eq!(c.signs(), vec![-1, 1], "{}", c.text());
    assert_eq!(c.total, 0);
}

#[test]
fn linear_counts_one() {
    let c = count("linear", 0);
    assert_eq!(c.total, 1, "{}", c.text());
}

#[test]
fn two_chart_core_counts_one() {
    let c = count("two-chart-core", 0);
    assert_eq!(c.total, 1, "{}", c.text());
    assert!(c.classes.iter().any(|k| k.members.len() == 2), "{}", c.text());
}

#[test]
fn counts_agree_with_the_interval_degree() {
    assert_eq!(interval_degree(|x| x * x - 1.0, -2.0, 2.0), count("quadratic", 1).total);
    assert_eq!(interval_degree(|x| x, -1.0, 1.0), count("linear", 1).total);
}

#[test]
fn reversed_orientation_flips_the_count() {
    let mut a = load("linear");
    a.orientation.insert(IndexSet::single(1), -1);
    let run = pipeline(&a, &q(1, 64), 0).unwrap();
    assert_eq!(run.count.unwrap().total, -1);
}

#[test]
fn inconsistent_orientations_are_reported() {
    let mut a = load("two-chart-core");
    a.orientation.insert(IndexSet::from_labels(&[1, 2]), -1);
    assert!(!check_orientation(&a, &q(1, 16)).ok());
    assert!(matches!(pipeline(&a, &q(1, 64), 0), Err(PipelineError::NotAdapted(_))));
}

#[test]
fn shipped_orientations_are_consistent() {
    for name in ["quadratic", "linear", "two-chart-core", "circle-basic"] {
        assert!(check_orientation(&load(name), &q(1, 16)).ok(), "{name}");
    }
}

#[test]
fn independence_over_seeds_and_nested_pairs() {
    for (name, n) in [("quadratic", 0), ("linear", 1), ("two-chart-core", 1)] {
        let r = independence_test(&load(name), &q(1, 64), &[0, 1, 2]).unwrap();
        assert!(r.agree, "{name}: {:?}", r.totals);
        assert_eq!(r.totals[0].2, n);
        assert_eq!(r.totals.len(), 6);
    }
}

#[test]
fn positive_dimension_has_no_count() {
    for seed in 0..4 {
        let a = crate::generate::weak_atlas(seed);
        let run = pipeline(&a, &q(1, 16), seed).unwrap_or_else(|e| panic!("{seed}: {e}"));
        assert!(run.count.is_none());
        assert!(run.report.ok());
    }
}

#[test]
fn locate_zeros_finds_every_root() {
    let r = Region::open_box(&[(qi(-2), qi(2))]);
    let f = |x: &[f64]| vec![(x[0] - 0.5) * (x[0] + 1.0) * (x[0] - 1.5)];
    let zs = locate_zeros(&f, &r, &q(1, 16)).unwrap();
    let xs: Vec<f64> = zs.iter().map(|z| z[0]).collect();
    assert_eq!(xs.len(), 3);
    for (a, b) in xs.iter().zip([-1.0, 0.5, 1.5]) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn locate_zeros_on_a_circle() {
    let r = Region::new(1, vec![true], vec![vec![crate::geometry::Interval::closed(qi(0), qi(1))]]);
    let f = |x: &[f64]| vec![(2.0 * std::f64::consts::PI * x[0]).sin()];
    let zs = locate_zeros(&f, &r, &q(1, 16)).unwrap();
    assert_eq!(zs.len(), 2, "{zs:?}");
}

proptest::proptest! {
    #[test]
    fn planar_linear_maps_have_one_zero(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0, x0 in -0.5f64..0.5, y0 in -0.5f64..0.5) {
        proptest::prop_assume!((a * d - b * c).abs() > 0.1);
        let r = Region::open_box(&[(qi(-1), qi(1)), (qi(-1), qi(1))]);
        let f = move |x: &[f64]| vec![a * (x[0] - x0) + b * (x[1] - y0), c * (x[0] - x0) + d * (x[1] - y0)];
        let zs = locate_zeros(&f, &r, &q(1, 8)).unwrap();
        proptest::prop_assert_eq!(zs.len(), 1);
        proptest::prop_assert!(dist(&zs[0], &[x0, y0], &[false, false]) < 1e-9);
    }
}
