//! Cover reduction of three arcs on the circle, and the induced atlas
//! reduction with its nested companion.

use kuranishi::demos::load;
use kuranishi::linalg::q;
use kuranishi::reduction::{atlas_reduce, describe, nest_reduction, reduce_footprints, validate_reduction};

fn main() {
    let a = load("circle-basic");
    let cr = reduce_footprints(&a).unwrap();
    for (i, z) in &cr.zones {
        println!("Z_{i} = {z}");
    }
    let v = atlas_reduce(&a, &cr).unwrap();
    print!("{}", describe(&v));
    print!("{}", validate_reduction(&a, &v, &q(1, 64)).text());
    let c = nest_reduction(&a, &v).unwrap();
    println!("nested:");
    print!("{}", describe(&c));
}
