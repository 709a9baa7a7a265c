//! Parse a shipped atlas, print it back and run every validator.

use kuranishi::atlas::file::{parse_atlas, print_atlas};
use kuranishi::atlas::CocycleLevel;
use kuranishi::demos::source;
use kuranishi::linalg::q;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "circle-basic".into());
    let a = parse_atlas(source(&name).expect("shipped atlas")).expect("parses");
    print!("{}", print_atlas(&a).unwrap());
    let rep = a.validate(CocycleLevel::Strong, &q(1, 64));
    print!("{}", rep.text());
    println!("{name}: {}", if rep.ok() { "valid" } else { "INVALID" });
}
