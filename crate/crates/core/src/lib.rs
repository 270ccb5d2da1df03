pub mod cli_io;
pub mod diffgeo;
pub mod error;
pub mod modes;
pub mod reciprocity;
pub mod rigidity;
pub mod surface_gen;

pub use error::{Error, Result};
