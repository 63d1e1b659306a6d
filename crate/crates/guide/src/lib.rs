//! Compiles the code listings of the mdbook guide under `book/` as doctests,
//! one module per chapter so a failure points at its source file.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/screens.md")]
pub mod screens {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/graph.md")]
pub mod graph {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/synthetic.md")]
pub mod synthetic {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
