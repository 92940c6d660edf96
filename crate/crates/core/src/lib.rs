//! Exact computation and measurement toolkit for linear cellular automata
//! over finite commutative rings.

pub mod crt;
pub mod error;
pub mod lattice;
pub mod measure;
pub mod linalg;
pub mod poly;
pub mod ring;
pub mod rng;
pub mod runner;
pub mod shifts;

pub use error::{Error, Result};
pub use lattice::{Coord, Mode, WindowConfig, WindowSpec};
pub use poly::{LocalRule, ShiftPolynomial};
pub use ring::{Elem, ModuleSpec, Ring, RingDescriptor};
