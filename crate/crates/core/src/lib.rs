//! Contract verifier and interpreter for the MiniOO language.

pub mod callgraph;
pub mod driver;
pub mod frontend;
pub mod runtime;
pub mod solver;
pub mod span;
pub mod vcgen;

pub use callgraph::Mode;
