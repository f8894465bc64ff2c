// mdbook cannot run Rust listings against workspace crates, so each chapter is
// pulled in as the doc comment of an empty module and `cargo test --doc`
// compiles and runs its code blocks. One module per chapter keeps failures
// traceable to a file.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/data.md")]
mod data {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/gp_blur.md")]
mod gp_blur {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/variants.md")]
mod variants {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/training.md")]
mod training {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/evaluation.md")]
mod evaluation {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
