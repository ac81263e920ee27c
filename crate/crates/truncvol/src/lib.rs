pub mod arith;
pub mod geometry;
pub mod model;
pub mod multi;
pub mod oracles;
pub mod robp;
pub mod volume;
