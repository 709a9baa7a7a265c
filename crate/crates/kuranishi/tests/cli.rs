use kuranishi::atlas::file::parse_atlas;
use kuranishi::cli::run;
use std::path::PathBuf;

fn call(args: &[&str]) -> (i32, String) {
    let mut buf = Vec::new();
    let code = run(std::iter::once("kuranishi").chain(args.iter().copied()), &mut buf);
    (code, String::from_utf8(buf).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("kuranishi-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn validate_passes_on_the_circle() {
    let (code, out) = call(&["validate", "circle-basic"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn validate_reports_tame2_witness() {
    let (code, out) = call(&["validate", "circle-injectivity-fail", "--check", "tame"]);
    assert_eq!(code, 1);
    assert!(out.contains("tame2 fails"), "{out}");
}

#[test]
fn weak_level_accepts_what_strong_rejects() {
    let (code, out) = call(&["validate", "circle-basic", "--check", "cocycle", "--level", "weak"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn malformed_files_exit_2() {
    let d = scratch("bad");
    let p = d.join("bad.ka");
    std::fs::write(&p, "not an atlas\n").unwrap();
    let (code, out) = call(&["validate", p.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(out.contains("line 1"), "{out}");
    assert_eq!(call(&["validate", "/nonexistent/file.ka"]).0, 2);
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&["pipeline", "linear", "--resolution", "-1/2"]).0, 2);
    assert_eq!(call(&["demo", "no-such-demo"]).0, 2);
}

#[test]
fn demos_reproduce() {
    for name in ["injectivity-fail", "hausdorff-fail", "linearity-fail", "metrizability-fail"] {
        let (code, out) = call(&["demo", name]);
        assert_eq!(code, 0, "{name}: {out}");
        assert!(out.contains("failure reproduced"), "{out}");
    }
}

#[test]
fn tame_then_count_matches_the_degree() {
    let (code, out) = call(&["pipeline", "linear", "tame", "reduce", "count"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("count: seed 0 total 1"), "{out}");
}

#[test]
fn independence_over_five_seeds() {
    let (code, out) = call(&["pipeline", "quadratic", "tame", "reduce", "perturb", "--seeds", "5", "--independence"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("all totals equal"), "{out}");
}

#[test]
fn count_needs_transversality() {
    let d = scratch("degenerate");
    let p = d.join("square.ka");
    std::fs::write(&p, "kuranishi-atlas v1\natlas square dim 0\nspace 1\nchart {1} domain (-1,1) obs 1 section [x1^2] footprint [x1] zeros {0}\n").unwrap();
    let (code, out) = call(&["pipeline", p.to_str().unwrap(), "tame", "reduce", "count"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("stage `count`"), "{out}");
}

#[test]
fn perturb_requires_tameness() {
    let (code, out) = call(&["pipeline", "circle-injectivity-fail", "perturb"]);
    assert_eq!(code, 1, "{out}");
    assert!(out.contains("stage `perturb`"), "{out}");
}

#[test]
fn stage_files_replay_and_are_deterministic() {
    let (d1, d2) = (scratch("run1"), scratch("run2"));
    for d in [&d1, &d2] {
        let (code, out) = call(&["pipeline", "two-chart-core", "--seeds", "2", "--out", d.to_str().unwrap()]);
        assert_eq!(code, 0, "{out}");
    }
    for f in ["tame.ka", "reduced.ka", "constants.txt", "perturbation-0.txt", "perturbation-1.txt", "count-0.txt", "count-1.txt", "transcript.txt"] {
        let a = std::fs::read(d1.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert_eq!(a, std::fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let reduced = parse_atlas(&std::fs::read_to_string(d1.join("reduced.ka")).unwrap()).unwrap();
    assert!(reduced.reductions.iter().any(|r| r.name == "V"));
    let (code, out) = call(&["pipeline", d1.join("reduced.ka").to_str().unwrap(), "perturb", "count"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("total 1"), "{out}");
}

#[test]
fn positive_dimension_skips_the_count() {
    let d = scratch("gen");
    let p = d.join("g.ka");
    std::fs::write(&p, kuranishi::atlas::file::print_atlas(&kuranishi::generate::weak_atlas(1)).unwrap()).unwrap();
    let (code, out) = call(&["pipeline", p.to_str().unwrap(), "--resolution", "1/16"]);
    assert_eq!(code, 0, "{out}");
    assert!(!out.contains("count:"), "{out}");
}
