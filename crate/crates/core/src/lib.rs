//! Conflict dynamics between two probability measures with similar or
//! self-similar structure on n-adic divisions of `[0, 1]`.
//!
//! The crate is organized bottom-up:
//!
//! * [`partition`] divides the unit interval and resolves cell addresses.
//! * [`measures`] builds structure measures, their level realizations, and
//!   the signed decomposition with its closed-form limit state.
//! * [`dynamics`] runs the discrete conflict law and classifies fixed points.
//! * [`control`] implements controlled redistributions and the reclaim,
//!   reversal and occupation constructions.
//! * [`scenario`] is the config-driven runner behind the `sconflict` binary.
//! * [`batch`] evaluates independent workloads sequentially or on the rayon
//!   pool (feature `parallel`, on by default).

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        let tol: f64 = $tol;
        assert!((a - b).abs() <= tol, "{a} != {b} (tolerance {tol})");
    }};
}

pub mod batch;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod measures;
pub mod partition;
pub mod random;
pub mod scenario;

pub use error::{Error, Result};

/// Row sums and total masses must equal 1 within this bound.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// Cells whose mass difference is within this bound count as ties.
pub const SIGN_TOLERANCE: f64 = 1e-12;

/// Common imports.
///
/// ```
/// use std::sync::Arc;
/// use structural_conflict::prelude::*;
///
/// # fn main() -> Result<()> {
/// let scheme = Arc::new(PartitionScheme::uniform(3)?);
/// let p = StructureMatrix::self_similar(StochasticVector::uniform(3))?;
/// let r = StructureMatrix::self_similar(StochasticVector::new(vec![2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0])?)?;
/// let mu = measure_from_matrix(&p, &scheme, 2)?;
/// let nu = measure_from_matrix(&r, &scheme, 2)?;
/// let (_, nu_inf) = limit_state_closed_form(&mu, &nu)?;
/// assert!((nu_inf.masses()[0] - 1.0).abs() < 1e-12);
/// let run = ConflictSystem::default().iterate(mu, nu, &IterateOptions::default())?;
/// assert!(run.converged);
/// # Ok(())
/// # }
/// ```
pub mod prelude {
    pub use crate::batch::Execution;
    pub use crate::control::{
        check_distance_monotone, extremal_reclaim_plan, find_reversal_cell, occupation_strategy,
        reclaim_bound, redistribute, reversal_mass_bound, RedistributionPlan,
    };
    pub use crate::dynamics::{
        classify_fixed_point, ConflictSystem, FixedPointKind, IterateOptions, RecordPolicy,
        ThetaKind, UpdateLaw,
    };
    pub use crate::measures::{
        hahn_jordan, limit_state_closed_form, measure_from_matrix, variation_distance,
        LevelMeasure, MatrixKind, StochasticVector, StructureMatrix,
    };
    pub use crate::partition::{CellAddress, Interval, PartitionScheme};
    pub use crate::{Error, Result};
}
