pub mod bench;
pub mod cli;
pub mod compressed;
pub mod error;
pub mod hbs;
pub mod hodlr;
pub mod io;
pub mod linalg;
pub mod operator;
mod sampling;
pub mod tree;
pub mod validate;

pub use compressed::{compress, CompressParams, Compressed, Format};
pub use error::{Error, Result};
