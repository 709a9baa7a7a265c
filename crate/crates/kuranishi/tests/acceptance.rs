//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use kuranishi::atlas::quotient::{build_quotient, diagnose_hausdorff, diagnose_injectivity, fiber_structure};
use kuranishi::atlas::{Atlas, CocycleLevel};
use kuranishi::demos::{dyadic_radii, load, run_demo, ATLASES, DEMOS};
use kuranishi::exterior::{ccord_ratio, verify_stabilization_independence};
use kuranishi::generate::{random_ccord_instance, random_linear_change, random_stabilization, weak_atlas};
use kuranishi::geometry::{Interval, Region};
use kuranishi::linalg::{q, to_f64, Q};
use kuranishi::perturbation::{compute_constants, construct_adapted, eta_ratio, validate_adapted, Zones};
use kuranishi::reduction::{atlas_reduce, check_cover_reduction, cover_reduce, nest_reduction, reduce_footprints, validate_reduction, Nesting};
use kuranishi::shrink::tame_shrink;
use kuranishi::zeroset::{interval_degree, prepare, signed_count};
use num::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

struct Outcome {
    ok: bool,
    detail: String,
}

fn h() -> Q {
    q(1, 64)
}

fn line(n: &str, title: &str, o: &Outcome, t: Duration) -> bool {
    println!("{} criterion {n}: {title} ({}; {:.2}s)", if o.ok { "PASS" } else { "FAIL" }, o.detail, t.as_secs_f64());
    o.ok
}

fn demos() -> Outcome {
    let mut bad = Vec::new();
    let mut slowest = 0.0f64;
    for d in DEMOS {
        let o = run_demo(d, &h()).unwrap();
        slowest = slowest.max(o.elapsed.as_secs_f64());
        if !o.reproduced || o.elapsed >= Duration::from_secs(5) {
            bad.push(d.to_string());
        }
    }
    Outcome { ok: bad.is_empty(), detail: format!("{} demos, slowest {slowest:.3}s, failing {bad:?}", DEMOS.len()) }
}

fn tamed_atlases() -> Vec<(u64, Result<Atlas, String>)> {
    (0..20u64).map(|s| (s, tame_shrink(&weak_atlas(s), &h()).map(|t| t.atlas).map_err(|e| e.to_string()))).collect()
}

fn metatheorem(tamed: &[(u64, Result<Atlas, String>)]) -> Outcome {
    let mut bad = Vec::new();
    for (seed, t) in tamed {
        let a = match t {
            Ok(a) => a,
            Err(e) => {
                bad.push(format!("{seed}: {e}"));
                continue;
            }
        };
        let hh = h();
        let qs = build_quotient(a, &hh);
        let checks = [
            ("tameness", a.validate_tameness(&hh).ok()),
            ("strong cocycle", a.validate_cocycles(CocycleLevel::Strong, &hh).ok()),
            ("injectivity", diagnose_injectivity(a, &qs).ok()),
            ("hausdorff", diagnose_hausdorff(a, &qs, &dyadic_radii()).ok()),
            ("linear fibers", (0..qs.node_count()).all(|n| fiber_structure(a, &qs, n).linear)),
        ];
        for (name, ok) in checks {
            if !ok {
                bad.push(format!("{seed}: {name}"));
            }
        }
    }
    Outcome { ok: bad.is_empty() && tamed.len() >= 20, detail: format!("{} generated atlases, failures {bad:?}", tamed.len()) }
}

fn arc(a: i64, b: i64) -> Region {
    Region::new(1, vec![true], vec![vec![Interval::open(q(a, 64), q(b, 64))]])
}

fn random_cover(rng: &mut ChaCha8Rng) -> Vec<Region> {
    let n = rng.gen_range(1..=6);
    if n == 1 {
        return vec![Region::new(1, vec![true], vec![vec![Interval::closed(q(0, 1), q(1, 1))]])];
    }
    let mut cuts: Vec<i64> = (0..n).map(|_| rng.gen_range(0..64)).collect();
    cuts.sort();
    cuts.dedup();
    let m = cuts.len();
    (0..m)
        .map(|i| {
            let hi = if i + 1 < m { cuts[i + 1] } else { cuts[0] + 64 };
            arc(cuts[i] - rng.gen_range(1..8), hi + rng.gen_range(1..8))
        })
        .collect()
}

fn reductions(tamed: &[(u64, Result<Atlas, String>)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Region::new(1, vec![true], vec![vec![Interval::closed(q(0, 1), q(1, 1))]]);
    let mut violations = 0;
    for _ in 0..100 {
        let covers = random_cover(&mut rng);
        match cover_reduce(&x, &covers, Nesting::Auto) {
            Ok(r) if check_cover_reduction(&x, &covers, &r.zones).is_ok() => {}
            _ => violations += 1,
        }
    }
    let mut bad = Vec::new();
    for (seed, t) in tamed {
        let Ok(a) = t else { continue };
        let ok = reduce_footprints(a).ok().and_then(|cr| atlas_reduce(a, &cr).ok()).map(|v| validate_reduction(a, &v, &h()).ok());
        if ok != Some(true) {
            bad.push(*seed);
        }
    }
    Outcome { ok: violations == 0 && bad.is_empty(), detail: format!("100 circle covers, {violations} violations; atlas reductions failing {bad:?}") }
}

fn determinants() -> Outcome {
    let (mut ccord, mut cclaim, mut stab) = (0, 0, 0);
    for seed in 0..200 {
        let (d, r) = random_ccord_instance(seed);
        if !ccord_ratio(&d, &r).map(|x| x.is_one()).unwrap_or(false) {
            ccord += 1;
        }
        if !random_linear_change(seed).cclaim_ratio().map(|x| x.is_one()).unwrap_or(false) {
            cclaim += 1;
        }
    }
    for seed in 0..100 {
        let (d, r1, r2) = random_stabilization(seed);
        if !verify_stabilization_independence(&d, &r1, &r2).map(|r| r.intertwined).unwrap_or(false) {
            stab += 1;
        }
    }
    Outcome { ok: ccord + cclaim + stab == 0, detail: format!("ccord failures {ccord}/200, cclaim failures {cclaim}/200, stabilization failures {stab}/100") }
}

fn pipeline_d0() -> Outcome {
    let hh = h();
    let mut notes = Vec::new();
    let mut ok = true;
    for (name, expected, oracle) in [
        ("quadratic", 0i64, Some(interval_degree(|x| x * x - 1.0, -2.0, 2.0))),
        ("linear", 1, Some(interval_degree(|x| x, -1.0, 1.0))),
        ("two-chart-core", 1, None),
    ] {
        let (a, v, _) = match prepare(&load(name), &hh) {
            Ok(p) => p,
            Err(e) => {
                notes.push(format!("{name}: {e}"));
                ok = false;
                continue;
            }
        };
        let c = nest_reduction(&a, &v).unwrap();
        let cc = nest_reduction(&a, &c).unwrap();
        let mut totals = Vec::new();
        for (vv, c2) in [(&v, &c), (&c, &cc)] {
            let k = match compute_constants(&a, vv, c2, &hh) {
                Ok(k) => k,
                Err(e) => {
                    notes.push(format!("{name}: {e}"));
                    ok = false;
                    continue;
                }
            };
            for seed in 0..5 {
                let res = construct_adapted(&a, vv, c2, &k, seed).map_err(|e| e.to_string()).and_then(|nu| {
                    let rep = validate_adapted(&a, vv, c2, &k, &nu);
                    if !rep.ok() {
                        return Err(rep.text());
                    }
                    signed_count(&a, &Zones::new(&a, vv, c2, &k), &nu).map_err(|e| e.to_string())
                });
                match res {
                    Ok(n) => {
                        if name == "quadratic" && n.signs() != vec![-1, 1] {
                            ok = false;
                            notes.push(format!("quadratic signs {:?}", n.signs()));
                        }
                        totals.push(n.total);
                    }
                    Err(e) => {
                        ok = false;
                        notes.push(format!("{name} seed {seed}: {e}"));
                    }
                }
            }
        }
        let agree = totals.len() == 10 && totals.iter().all(|&t| t == expected) && oracle.map_or(true, |o| o == expected);
        ok &= agree;
        notes.push(format!("{name} {expected:+}"));
    }
    Outcome { ok, detail: notes.join(", ") }
}

fn constants(tamed: &[(u64, Result<Atlas, String>)]) -> Outcome {
    let hh = h();
    let target = 1.0 - 2f64.powf(-0.25);
    let mut worst = (eta_ratio() - target).abs();
    let mut bad = Vec::new();
    let mut count = 0;
    let mut atlases: Vec<(String, Atlas)> = ["quadratic", "linear", "two-chart-core"].iter().map(|n| (n.to_string(), load(n))).collect();
    atlases.extend(tamed.iter().filter_map(|(s, t)| t.as_ref().ok().map(|a| (format!("generated-{s}"), a.clone()))));
    for (name, a) in atlases {
        let res = prepare(&a, &hh).map_err(|e| e.to_string()).and_then(|(t, v, _)| {
            let c = nest_reduction(&t, &v).map_err(|e| e.to_string())?;
            compute_constants(&t, &v, &c, &hh).map_err(|e| e.to_string())
        });
        match res {
            Ok(k) => {
                count += 1;
                worst = worst.max((k.eta_f64(0.0) / to_f64(&k.delta) - target).abs());
                if !(k.sigma > 0.0 && k.sigma_bound > 0.0) {
                    bad.push(name);
                }
            }
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    Outcome { ok: worst < 1e-12 && bad.is_empty(), detail: format!("eta0/delta error {worst:.1e}, sigma > 0 on {count} atlases, failing {bad:?}") }
}

fn random_point(rng: &mut ChaCha8Rng, r: &Region) -> Vec<f64> {
    let b = &r.boxes[rng.gen_range(0..r.boxes.len())];
    b.iter()
        .map(|iv| {
            let (lo, hi) = (to_f64(&iv.lo), to_f64(&iv.hi));
            if hi > lo {
                rng.gen_range(lo..hi)
            } else {
                lo
            }
        })
        .collect()
}

fn jacobians() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut maps, mut worst, mut bad) = (0, 0.0f64, Vec::new());
    for (name, _) in ATLASES {
        let a = load(name);
        for (i, c) in &a.charts {
            if c.domain.is_empty() || c.obs_dim == 0 {
                continue;
            }
            maps += 1;
            for _ in 0..100 {
                let x = random_point(&mut rng, &c.domain);
                let (Ok(j), Ok(fd)) = (c.section.jacobian_f64(&x), c.section.finite_difference_jacobian(&x, 1e-6)) else {
                    bad.push(format!("{name} {i}"));
                    break;
                };
                for (r1, r2) in j.iter().zip(&fd) {
                    for (p, q) in r1.iter().zip(r2) {
                        let e = (p - q).abs() / p.abs().max(1.0);
                        worst = worst.max(e);
                        if e > 1e-6 {
                            bad.push(format!("{name} {i} at {x:?}"));
                        }
                    }
                }
            }
        }
    }
    Outcome { ok: bad.is_empty() && maps > 0, detail: format!("{maps} section maps x 100 points, worst relative error {worst:.1e}, failing {}", bad.len()) }
}

fn main() {
    let mut all = true;
    let t = Instant::now();
    let o = demos();
    all &= line("1", "counterexample demos, each < 5 s at h = 1/64", &o, t.elapsed());

    let t = Instant::now();
    let tamed = tamed_atlases();
    let o = metatheorem(&tamed);
    let el = t.elapsed();
    let o = Outcome { ok: o.ok && el < Duration::from_secs(300), detail: o.detail };
    all &= line("2", "tame shrinkings of generated weak atlases pass all checks, < 5 min", &o, el);

    let t = Instant::now();
    let o = reductions(&tamed);
    all &= line("3", "cover and atlas reductions satisfy their axioms", &o, t.elapsed());

    let t = Instant::now();
    let o = determinants();
    let el = t.elapsed();
    let o = Outcome { ok: o.ok && el < Duration::from_secs(30), detail: o.detail };
    all &= line("4", "determinant line squares and stabilization independence, < 30 s", &o, el);

    let t = Instant::now();
    let o = pipeline_d0();
    let el = t.elapsed();
    let o = Outcome { ok: o.ok && el < Duration::from_secs(60), detail: o.detail };
    all &= line("5", "D = 0 pipeline: adapted perturbations and seed/reduction independent counts, < 1 min", &o, el);

    let t = Instant::now();
    let o = constants(&tamed);
    all &= line("6", "eta0/delta = 1 - 2^(-1/4) and sigma > 0", &o, t.elapsed());

    let t = Instant::now();
    let o = jacobians();
    all &= line("7", "symbolic vs finite-difference Jacobians", &o, t.elapsed());

    if !all {
        std::process::exit(1);
    }
}
