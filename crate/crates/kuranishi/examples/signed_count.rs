//! Adapted perturbation and signed zero count of a dimension 0 atlas.

use kuranishi::demos::load;
use kuranishi::linalg::q;
use kuranishi::zeroset::{independence_test, pipeline};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "two-chart-core".into());
    let h = q(1, 64);
    let a = load(&name);
    let run = pipeline(&a, &h, 0).expect("pipeline");
    for l in &run.transcript {
        println!("{l}");
    }
    print!("{}", run.consts.text());
    print!("{}", run.count.as_ref().expect("dimension 0").text());
    let ind = independence_test(&a, &h, &[0, 1, 2]).expect("independence");
    for (pair, seed, n) in &ind.totals {
        println!("{pair} seed {seed}: {n}");
    }
    println!("independent of choices: {}", ind.agree);
}
