//! Fluctuation theorems for measurement-and-feedback protocols on small open
//! quantum systems: jump-trajectory sampling, backward experiments,
//! entropy accounting, and exact enumeration oracles.

pub mod backward;
pub mod bundled;
pub mod channel;
pub mod error;
pub mod evolve;
pub mod kraus;
pub mod linalg;
pub mod oracle;
pub mod propagate;
pub mod protocol;
pub mod reversal;
pub mod state;
pub mod sweep;
pub mod thermo;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, StateVector, C64};

// The guide's snippets run as doc-tests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/measurement.md")]
    mod measurement {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/backward.md")]
    mod backward {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/configs.md")]
    mod configs {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
