//! Goodness-of-fit testing for natural exponential families.
//!
//! `condfit` tests whether an i.i.d. sample comes from one of three
//! families (Exponential, Gamma, von Mises) using EDF statistics, and
//! computes two P-values for the same statistic:
//!
//! * the **parametric bootstrap** P-value `P_b`: simulate at the fitted
//!   parameter, refit per replicate, count exceedances;
//! * the **exact conditional** P-value `P_c`: simulate from the
//!   conditional law of the data given the complete sufficient statistic
//!   (a parameter-free distribution), either exactly (Exponential) or by
//!   a triple-move Metropolis chain on the constraint fiber (Gamma, von
//!   Mises).
//!
//! In large samples the two agree; the crate ships the machinery to watch
//! that happen at desk scale: the spectral decomposition of the statistic,
//! Nystrom eigenvalues and the weighted chi-square limit law, and
//! first-order Edgeworth expansions of Rao-Blackwell estimates.
//!
//! Start with the `examples/` directory (one runnable example per
//! capability) or the `condfit` binary (`gof`, `reproduce-correlation`,
//! `theorem1-check`, `rb-estimate`, `limit-dist`, `edgeworth-check`).

// Index loops below mirror the tensor algebra (kappa3, D, V contractions);
// iterator adapters obscure those formulas.
#![allow(clippy::needless_range_loop)]

pub mod asymptotic;
pub mod bootstrap;
pub mod conditional;
pub mod edfstat;
pub mod edgeworth;
pub mod error;
pub mod expfam;
pub mod numerics;
pub mod rng;
pub mod runner;
pub mod special;

pub use bootstrap::PValue;
pub use edfstat::{PitVector, StatKind, StatValue};
pub use error::{Error, Result};
pub use expfam::{FamilyKind, NaturalParam, SufficientStat};
