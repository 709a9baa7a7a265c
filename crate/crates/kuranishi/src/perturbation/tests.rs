use super::*;
use crate::demos::load;
use crate::reduction::nest_reduction;
use crate::zeroset::prepare;
use proptest::prelude::*;

struct Setup {
    a: Atlas,
    v: AtlasReduction,
    c: AtlasReduction,
    k: Constants,
}

fn setup(name: &str) -> Setup {
    let h = q(1, 64);
    let (a, v, _) = prepare(&load(name), &h).unwrap();
    let c = nest_reduction(&a, &v).unwrap();
    let k = compute_constants(&a, &v, &c, &h).unwrap();
    Setup { a, v, c, k }
}

#[test]
fn eta_over_delta() {
    let s = setup("quadratic");
    let r = s.k.eta_f64(0.0) / to_f64(&s.k.delta);
    assert!((r - 0.15910358474628549).abs() < 1e-12);
    assert!((eta_ratio() - 0.15910358474628549).abs() < 1e-15);
}

#[test]
fn constants_are_positive() {
    for name in ["quadratic", "linear", "two-chart-core"] {
        let s = setup(name);
        assert!(s.k.sigma > 0.0 && s.k.sigma <= s.k.sigma_bound, "{name}: {}", s.k.text());
        assert_eq!(s.k.delta, &s.k.delta_v / qi(2));
    }
}

#[test]
fn quadratic_sigma_stays_below_the_section_minimum() {
    // |x^2 - 1| on the sampled zone away from C is at least ~ 1 - (1/2+...)^2
    let s = setup("quadratic");
    assert!(s.k.sigma < 1.0, "{}", s.k.text());
}

#[test]
fn components_of_a_double_chart() {
    let a = load("two-chart-core");
    let c = Components::new(&a, IndexSet::from_labels(&[1, 2])).unwrap();
    assert_eq!(c.norm(&[3.0, -4.0]), 4.0);
    assert_eq!(c.project(IndexSet::single(1), &[3.0, -4.0]), vec![3.0, 0.0]);
    assert_eq!(c.project(IndexSet::single(2), &[3.0, -4.0]), vec![0.0, -4.0]);
}

#[test]
fn affine_embedding_inverts() {
    let a = load("two-chart-core");
    let e = AffineEmbedding::of(&a, IndexSet::single(2), IndexSet::from_labels(&[1, 2])).unwrap();
    assert_eq!(e.apply(&[0.25]), vec![0.0, 0.25]);
    assert_eq!(e.invert(&[0.0, 0.25], &[false, false], 1e-12), Some(vec![0.25]));
    assert_eq!(e.invert(&[0.1, 0.25], &[false, false], 1e-12), None);
}

#[test]
fn adapted_perturbations_validate() {
    for name in ["quadratic", "linear", "two-chart-core"] {
        let s = setup(name);
        for seed in 0..3 {
            let nu = construct_adapted(&s.a, &s.v, &s.c, &s.k, seed).unwrap();
            let rep = validate_adapted(&s.a, &s.v, &s.c, &s.k, &nu);
            assert!(rep.ok(), "{name} {seed}: {}", rep.text());
        }
    }
}

#[test]
fn oversized_perturbation_fails_smallness() {
    let s = setup("linear");
    let mut nu = Perturbation::zero(&s.a);
    let i = IndexSet::single(1);
    nu.fields.insert(i, Field::Affine { a: vec![vec![0.0]], b: vec![2.0 * s.k.sigma], periodic: vec![false] });
    let rep = validate_adapted(&s.a, &s.v, &s.c, &s.k, &nu);
    assert!(!rep.ok());
    assert!(rep.text().contains("e)"), "{}", rep.text());
}

#[test]
fn incompatible_perturbation_fails_a() {
    let s = setup("two-chart-core");
    let mut nu = construct_adapted(&s.a, &s.v, &s.c, &s.k, 0).unwrap();
    let j = IndexSet::from_labels(&[1, 2]);
    nu.fields.insert(j, Field::Zero { out: 2 });
    let rep = validate_adapted(&s.a, &s.v, &s.c, &s.k, &nu);
    assert!(rep.checks.iter().any(|c| c.check.starts_with("a)") && !c.ok()), "{}", rep.text());
}

#[test]
fn perturbation_is_seed_deterministic() {
    let s = setup("two-chart-core");
    let a = construct_adapted(&s.a, &s.v, &s.c, &s.k, 7).unwrap();
    let b = construct_adapted(&s.a, &s.v, &s.c, &s.k, 7).unwrap();
    assert_eq!(a.text(), b.text());
    assert!(a.text().starts_with("perturbation seed 7"));
}

fn bump() -> Bump {
    Bump::new(&Region::open_box(&[(q(-1, 4), q(1, 4)), (qi(0), q(1, 2))]), 0.05, 0.1)
}

proptest! {
    #[test]
    fn bump_is_a_cutoff(x in -1.0f64..1.0, y in -1.0f64..1.5) {
        let b = bump();
        let v = b.eval(&[x, y]);
        prop_assert!((0.0..=1.0).contains(&v));
        let d = axis_dist(x, -0.25, 0.25, false).max(axis_dist(y, 0.0, 0.5, false));
        if d <= 0.05 { prop_assert_eq!(v, 1.0); }
        if d >= 0.1 { prop_assert_eq!(v, 0.0); }
    }

    #[test]
    fn periodic_bump_wraps(x in -2.0f64..2.0) {
        let r = Region::new(1, vec![true], vec![vec![crate::geometry::Interval::open(q(7, 8), q(9, 8))]]);
        let b = Bump::new(&r, 0.05, 0.1);
        prop_assert!((b.eval(&[x]) - b.eval(&[x + 1.0])).abs() < 1e-12);
    }

    #[test]
    fn local_bounds_hold(cx in -0.5f64..0.5, cy in -0.5f64..0.5, w in 0.0005f64..0.1, t in prop::collection::vec(-1.0f64..1.0, 2)) {
        let s = setup_cached();
        let f = &s.0;
        let (sup, lip) = f.local(&[cx, cy], &[w, w]);
        let x = [cx + t[0] * w, cy + t[1] * w];
        let fx = f.eval(&x);
        let fc = f.eval(&[cx, cy]);
        let n = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        prop_assert!(n(&fx) <= sup + 1e-12);
        let d: Vec<f64> = fx.iter().zip(&fc).map(|(a, b)| a - b).collect();
        prop_assert!(n(&d) <= lip * w + 1e-12, "{} > {}", n(&d), lip * w);
    }
}

fn setup_cached() -> &'static (Field,) {
    static CELL: std::sync::OnceLock<(Field,)> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let s = setup("two-chart-core");
        let nu = construct_adapted(&s.a, &s.v, &s.c, &s.k, 0).unwrap();
        (nu.fields[&IndexSet::from_labels(&[1, 2])].clone(),)
    })
}
