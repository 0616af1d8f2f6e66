pub mod beckmann;
pub mod cli;
pub mod conic;
pub mod convex_order;
pub mod error;
pub mod grillage;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod oracles;
pub mod svg;
pub mod transport;

pub use error::{Error, Result};
