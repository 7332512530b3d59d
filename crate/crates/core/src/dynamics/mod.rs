//! Discrete conflict law on a fixed level of the partition.
//!
//! One step maps the pair `(mu, nu)` to
//!
//! ```text
//! mu'_a = (mu_a (theta + 1) - tau_a) / z
//! nu'_a = (nu_a (theta + 1) - tau_a) / z
//! z     = theta + 1 - W,   W = sum_a tau_a
//! ```
//!
//! where `theta` pairs the two measures (see [`ThetaKind`]) and the occupation
//! `tau` charges each opponent for its presence on the other's territory:
//! `tau_a = nu_a` on cells where the starting `mu` dominated, `mu_a` where the
//! starting `nu` dominated, and zero on tied cells. The territories are fixed
//! by the starting pair and never recomputed.

mod theta;
mod trajectory;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    accurate_sum, limit_masses, CellSign, LevelMeasure, SignedLevelDecomposition,
};
use crate::SIGN_TOLERANCE;

pub use theta::{theta_of_masses, Kernel, ThetaKind};
pub use trajectory::{IterateOptions, RecordPolicy, Trajectory, TrajectoryPoint};

/// Numerators in `[-CLAMP_TOLERANCE, 0)` are rounding noise and are clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Smallest admissible normalizer `z`.
pub const NORMALIZER_TOLERANCE: f64 = 1e-12;

/// Largest tolerated deviation of an updated total mass from one.
pub const MASS_DRIFT_LIMIT: f64 = 1e-10;

/// Which occupation term the update subtracts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateLaw {
    /// `tau` from the frozen sign partition of the starting pair.
    #[default]
    Occupation,
    /// Legacy vector form with `tau_a = mu_a nu_a`, kept for comparison. The
    /// normalizer is still `theta + 1 - sum tau`, which keeps both vectors
    /// stochastic.
    Multiplicative,
}

/// Conflict exponent of two level measures.
pub fn theta(mu: &LevelMeasure, nu: &LevelMeasure, kind: &ThetaKind) -> Result<f64> {
    mu.check_same_domain(nu)?;
    theta_of_masses(mu.masses(), nu.masses(), kind)
}

/// Occupation vector for the frozen decomposition.
pub fn occupation(mu: &[f64], nu: &[f64], decomposition: &SignedLevelDecomposition) -> Vec<f64> {
    decomposition
        .signs()
        .iter()
        .enumerate()
        .map(|(a, sign)| match sign {
            CellSign::Plus => nu[a],
            CellSign::Minus => mu[a],
            CellSign::Zero => 0.0,
        })
        .collect()
}

/// One point of a trajectory together with the quantities that drive the
/// next step.
#[derive(Clone, Debug)]
pub struct ConflictState {
    step: usize,
    mu: LevelMeasure,
    nu: LevelMeasure,
    decomposition: Arc<SignedLevelDecomposition>,
    theta: f64,
    w: f64,
    z: f64,
    tau: Vec<f64>,
    mass_defect: f64,
}

impl ConflictState {
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn mu(&self) -> &LevelMeasure {
        &self.mu
    }

    pub fn nu(&self) -> &LevelMeasure {
        &self.nu
    }

    /// Sign partition of the starting pair.
    pub fn decomposition(&self) -> &SignedLevelDecomposition {
        &self.decomposition
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Deviation of the raw update's total masses from one, before the final
    /// renormalization removed it.
    pub fn mass_defect(&self) -> f64 {
        self.mass_defect
    }
}

/// Fixed-point classes of the conflict map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedPointKind {
    Identical,
    Orthogonal,
    NotFixed,
}

/// Classifies a pair: identical when `sup |mu - nu| < tol`, orthogonal when
/// the overlap `sum min(mu_a, nu_a) < tol`.
pub fn classify_fixed_point(
    mu: &LevelMeasure,
    nu: &LevelMeasure,
    tol: f64,
) -> Result<FixedPointKind> {
    mu.check_same_domain(nu)?;
    Ok(classify_masses(mu.masses(), nu.masses(), tol))
}

pub(crate) fn classify_masses(mu: &[f64], nu: &[f64], tol: f64) -> FixedPointKind {
    let sup = mu
        .iter()
        .zip(nu)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if sup < tol {
        return FixedPointKind::Identical;
    }
    let overlap: f64 = mu.iter().zip(nu).map(|(a, b)| a.min(*b)).sum();
    if overlap < tol {
        FixedPointKind::Orthogonal
    } else {
        FixedPointKind::NotFixed
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// The conflict map for a fixed choice of exponent and occupation law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConflictSystem {
    pub theta: ThetaKind,
    pub law: UpdateLaw,
    pub sign_tolerance: f64,
}

impl Default for ConflictSystem {
    fn default() -> Self {
        ConflictSystem::new(ThetaKind::default())
    }
}

impl ConflictSystem {
    pub fn new(theta: ThetaKind) -> Self {
        ConflictSystem {
            theta,
            law: UpdateLaw::Occupation,
            sign_tolerance: SIGN_TOLERANCE,
        }
    }

    pub fn with_law(mut self, law: UpdateLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_sign_tolerance(mut self, tolerance: f64) -> Self {
        self.sign_tolerance = tolerance;
        self
    }

    fn state(
        &self,
        step: usize,
        mu: LevelMeasure,
        nu: LevelMeasure,
        decomposition: Arc<SignedLevelDecomposition>,
        mass_defect: f64,
    ) -> Result<ConflictState> {
        let theta = theta_of_masses(mu.masses(), nu.masses(), &self.theta)?;
        let tau = match self.law {
            UpdateLaw::Occupation => occupation(mu.masses(), nu.masses(), &decomposition),
            UpdateLaw::Multiplicative => mu
                .masses()
                .iter()
                .zip(nu.masses())
                .map(|(a, b)| a * b)
                .collect(),
        };
        let w = accurate_sum(&tau);
        let z = theta + 1.0 - w;
        Ok(ConflictState {
            step,
            mu,
            nu,
            decomposition,
            theta,
            w,
            z,
            tau,
            mass_defect,
        })
    }

    /// Initial state: freezes the sign partition of `mu - nu`.
    pub fn start(&self, mu: LevelMeasure, nu: LevelMeasure) -> Result<ConflictState> {
        mu.check_same_domain(&nu)?;
        let decomposition =
            SignedLevelDecomposition::from_masses(mu.masses(), nu.masses(), self.sign_tolerance)?;
        self.state(0, mu, nu, Arc::new(decomposition), 0.0)
    }

    /// Applies the conflict law once.
    pub fn step(&self, state: &ConflictState) -> Result<ConflictState> {
        let z = state.z;
        if !(z > NORMALIZER_TOLERANCE) {
            return Err(Error::DegenerateNormalizer(z));
        }
        let grow = state.theta + 1.0;
        let update = |masses: &[f64]| -> Result<(Vec<f64>, f64)> {
            let mut next = Vec::with_capacity(masses.len());
            for (a, (&m, &t)) in masses.iter().zip(&state.tau).enumerate() {
                let mut numerator = m * grow - t;
                if numerator < 0.0 {
                    if numerator < -CLAMP_TOLERANCE {
                        return Err(Error::NegativeMass {
                            cell: a,
                            value: numerator / z,
                        });
                    }
                    log::warn!("clamping numerator {numerator:e} in cell {a} to zero");
                    numerator = 0.0;
                }
                next.push(numerator / z);
            }
            let total = accurate_sum(&next);
            let defect = (total - 1.0).abs();
            if defect > MASS_DRIFT_LIMIT {
                return Err(Error::Internal(format!(
                    "update lost mass: total {total} at step {}",
                    state.step + 1
                )));
            }
            // remove rounding drift so it cannot compound over long runs
            if total != 1.0 {
                next.iter_mut().for_each(|v| *v /= total);
            }
            Ok((next, defect))
        };
        let (mu_next, mu_defect) = update(state.mu.masses())?;
        let (nu_next, nu_defect) = update(state.nu.masses())?;
        let scheme = Arc::clone(state.mu.scheme());
        let level = state.mu.level();
        self.state(
            state.step + 1,
            LevelMeasure::from_parts(Arc::clone(&scheme), level, mu_next),
            LevelMeasure::from_parts(scheme, level, nu_next),
            Arc::clone(&state.decomposition),
            mu_defect.max(nu_defect),
        )
    }

    /// Iterates until the sup-norm change drops below `options.tol` or
    /// `options.max_iter` steps have run. Non-convergence is reported through
    /// the trajectory's flag, not as an error.
    pub fn iterate(
        &self,
        mu0: LevelMeasure,
        nu0: LevelMeasure,
        options: &IterateOptions,
    ) -> Result<Trajectory> {
        let closed_form =
            SignedLevelDecomposition::from_masses(mu0.masses(), nu0.masses(), self.sign_tolerance)
                .and_then(|d| limit_masses(&d));
        let closed_form = match closed_form {
            Ok(pair) => Some(pair),
            Err(Error::IdenticalMeasures) => None,
            Err(e) => return Err(e),
        };
        let mut state = self.start(mu0, nu0)?;
        let mut recorder = trajectory::Recorder::new(options.record, &state);

        if classify_masses(state.mu.masses(), state.nu.masses(), options.tol)
            != FixedPointKind::NotFixed
        {
            return Ok(recorder.finish(state, true, 0.0, closed_form.as_ref()));
        }

        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..options.max_iter {
            let next = self.step(&state)?;
            residual = sup_distance(next.mu.masses(), state.mu.masses())
                .max(sup_distance(next.nu.masses(), state.nu.masses()));
            recorder.observe(&next, residual);
            state = next;
            if residual < options.tol {
                converged = true;
                break;
            }
        }
        Ok(recorder.finish(state, converged, residual, closed_form.as_ref()))
    }
}
