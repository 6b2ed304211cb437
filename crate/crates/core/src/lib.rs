//! Numerical workbench for heralded, flagged-switch and generalized erasure
//! quantum channels.
//!
//! The crate is organised bottom-up:
//!
//! * [`qcore`] dense complex linear algebra on tensor-factored spaces,
//! * [`channels`] Kraus channels and the heralded channel constructors,
//! * [`entropy`] von Neumann entropies and continuity bounds,
//! * [`holevo`] Holevo information estimates,
//! * [`esq`] certified upper bounds on squashed entanglement,
//! * [`bounds`] capacity inequalities evaluated as [`report::BoundReport`]s,
//! * [`games`] nonlocal game values,
//! * [`io`] file formats shared with the command-line front end.
//!
//! All logarithms are base 2.

pub mod bounds;
pub mod channels;
pub mod entropy;
pub mod error;
pub mod esq;
pub mod games;
pub mod holevo;
pub mod io;
pub mod qcore;
pub mod report;

pub use error::{Error, Result};
