//! Numerical lab for Ginzburg–Landau vortices pinned by small inclusions.
//!
//! The crate minimises the pinned energy E_ε and the weighted energy F_ε on
//! masked square grids, locates and classifies vortices, evaluates the
//! renormalized-energy quantities that predict where vortices go, and drives
//! reproducible ε-sweeps.

pub mod boundary;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod field;
pub mod grid;
pub mod optim;
pub mod par;
pub mod phase;
pub mod renorm;
pub mod pinning;
pub mod solver;
pub mod vortex;
pub mod special;
pub mod testfn;

pub use error::{Error, Result};
