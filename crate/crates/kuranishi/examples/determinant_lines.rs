//! Exact checks of the determinant line constructions on random rational
//! instances.

use kuranishi::exterior::{ccord_ratio, verify_stabilization_independence};
use kuranishi::generate::{random_ccord_instance, random_linear_change, random_stabilization};

fn main() {
    for seed in 0..3 {
        let (d, r) = random_ccord_instance(seed);
        println!("D = {d}, R = {r}: ratio {}", ccord_ratio(&d, &r).unwrap());
        let c = random_linear_change(seed);
        println!("change {}x{} -> {}x{}: cclaim ratio {}, orientation factor {}", c.d_i.rows, c.d_i.cols, c.d_j.rows, c.d_j.cols, c.cclaim_ratio().unwrap(), c.orientation_factor().unwrap());
        let (d, r1, r2) = random_stabilization(seed);
        print!("{}", verify_stabilization_independence(&d, &r1, &r2).unwrap().transcript);
    }
}
