pub mod error;
pub mod quadrature;
pub mod special_functions;
pub mod linalg;
pub(crate) mod interp;
pub mod generator_families;
pub mod partition;
pub mod elliptical;
pub mod moments;
pub mod oracles;
pub mod verify;
pub mod cli;
