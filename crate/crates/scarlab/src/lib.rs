//! Steady states of scar-preserving non-Hermitian dynamics.
//!
//! The [`guide`] module renders the book chapters; their code blocks run as doctests.

pub mod dmrg;
pub mod lattice;
pub mod linalg;
pub mod rqc;
pub mod variational;
pub mod rg;
pub mod eft;
pub mod spin;

/// The mdbook guide under `book/src`, one module per chapter.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    pub mod channel {}
    #[doc = include_str!("../../../book/src/variational.md")]
    pub mod variational {}
    #[doc = include_str!("../../../book/src/rg.md")]
    pub mod rg {}
    #[doc = include_str!("../../../book/src/eft.md")]
    pub mod eft {}
    #[doc = include_str!("../../../book/src/spin_chain.md")]
    pub mod spin_chain {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
