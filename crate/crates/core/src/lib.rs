//! Decision procedures for string constraints that mix word equations,
//! regular memberships and linear length arithmetic.
//!
//! The pipeline: [`normalize`] an input formula, build a cyclic reduction
//! tree with [`reduce`], refine it against memberships with
//! [`regex_combine`], read off length information either through Horn
//! clauses ([`lengths`]) or grammars and Parikh images ([`grammar`],
//! [`parikh`]), and decide the resulting arithmetic with [`presburger`].
//! [`frontend`] glues these together behind an SMT-LIB reader.

pub mod ast;
pub mod automata;
pub mod frontend;
pub mod grammar;
pub mod lengths;
pub mod normalize;
pub mod parikh;
pub mod presburger;
pub mod reduce;
pub mod regex_combine;
pub mod sexp;

pub use ast::*;


#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/memberships.md")]
    mod memberships {}
    #[doc = include_str!("../../../book/src/lengths.md")]
    mod lengths {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
