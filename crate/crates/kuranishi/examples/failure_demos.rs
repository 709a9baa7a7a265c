//! The four atlases whose realizations fail injectivity, the Hausdorff
//! property, linearity of fibers and metrizability.

use kuranishi::demos::{run_demo, DEMOS};
use kuranishi::linalg::q;

fn main() {
    for d in DEMOS {
        print!("{}", run_demo(d, &q(1, 64)).unwrap().text());
    }
}
