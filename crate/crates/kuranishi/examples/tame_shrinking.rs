//! Tame shrinking of a random weak atlas, with the level transcript and
//! the quotient diagnostics of the result.

use kuranishi::atlas::quotient::{build_quotient, diagnose_hausdorff, diagnose_injectivity};
use kuranishi::demos::dyadic_radii;
use kuranishi::generate::weak_atlas;
use kuranishi::linalg::q;
use kuranishi::shrink::{sampled_metric, tame_shrink};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let h = q(1, 64);
    let a = weak_atlas(seed);
    println!("{}: tame before shrinking: {}", a.name, a.validate_tameness(&h).ok());
    let t = tame_shrink(&a, &h).expect("tame shrinking");
    for l in &t.transcript {
        println!("{l}");
    }
    let qs = build_quotient(&t.atlas, &h);
    print!("{}", t.atlas.validate_tameness(&h).text());
    print!("{}", diagnose_injectivity(&t.atlas, &qs).text());
    print!("{}", diagnose_hausdorff(&t.atlas, &qs, &dyadic_radii()).text());
    match sampled_metric(&t.atlas, &h) {
        Ok(m) => print!("{}", m.report.text()),
        Err(e) => println!("metric: {e}"),
    }
}
