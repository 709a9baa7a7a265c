//! Exact box regions, cell grids and lattice samples.

pub mod cells;
pub mod region;
pub mod sample;

pub use cells::CellGrid;
pub use region::{BoxN, Domain, GeometryError, Interval, Region, SetOp};
pub use sample::{FastRegion, Lattice, SampleCloud};
