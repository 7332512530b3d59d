use serde::{Deserialize, Serialize};

use super::{split_division, ControlledDivision, RedistributionPlan};
use crate::error::{Error, Result};
use crate::measures::{CellSign, LevelMeasure};
use crate::partition::CellAddress;
use crate::SIGN_TOLERANCE;

/// Relative tolerance when comparing a requested size with the bound.
const BOUND_TOLERANCE: f64 = 1e-12;

fn lost_cell_masses(
    mu1: &LevelMeasure,
    nu1: &LevelMeasure,
    s: &CellAddress,
) -> Result<(f64, f64, f64)> {
    mu1.check_same_domain(nu1)?;
    if s.level() != mu1.level() {
        return Err(Error::LevelMismatch {
            expected: mu1.level(),
            got: s.level(),
        });
    }
    let mu_s = mu1.mass_of(s)?;
    let nu_s = nu1.mass_of(s)?;
    if !(mu_s > 0.0) || !(nu_s - mu_s > SIGN_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "cell {s} is not a lost region with mu > 0: mu = {mu_s}, nu = {nu_s}"
        )));
    }
    let lambda = mu1.scheme().cell_lambda(s)?;
    Ok((mu_s, nu_s, lambda))
}

/// Largest Lebesgue measure of a sub-region of the lost cell `s` that the
/// losing opponent can take back by concentrating its mass there:
/// `mu(s) / nu(s) * lambda(s)`.
pub fn reclaim_bound(mu1: &LevelMeasure, nu1: &LevelMeasure, s: &CellAddress) -> Result<f64> {
    let (mu_s, nu_s, lambda) = lost_cell_masses(mu1, nu1, s)?;
    Ok(mu_s / nu_s * lambda)
}

/// Moves all of `mu1(s)` onto the left sub-interval of `s` with Lebesgue
/// measure `sub_lambda`. A plan exactly at the bound is flagged degenerate.
pub fn extremal_reclaim_plan(
    mu1: &LevelMeasure,
    nu1: &LevelMeasure,
    s: &CellAddress,
    sub_lambda: f64,
) -> Result<RedistributionPlan> {
    let (mu_s, nu_s, lambda) = lost_cell_masses(mu1, nu1, s)?;
    let bound = mu_s / nu_s * lambda;
    if !(sub_lambda > 0.0) {
        return Err(Error::InvalidPlan(format!(
            "reclaimed size {sub_lambda} must be positive"
        )));
    }
    if sub_lambda > bound * (1.0 + BOUND_TOLERANCE) {
        return Err(Error::ExceedsBound {
            requested: sub_lambda,
            bound,
        });
    }
    let degenerate = sub_lambda >= bound * (1.0 - BOUND_TOLERANCE);
    let fraction = (sub_lambda / lambda).min(1.0);
    Ok(RedistributionPlan::split(s.clone(), fraction, mu_s)?.mark_degenerate(degenerate))
}

/// What the refined division makes of a reclaim plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReclaimOutcome {
    pub bound: f64,
    pub sub_lambda: f64,
    pub degenerate: bool,
    /// Masses on the reclaimed region after the move.
    pub mu_reclaimed: f64,
    pub nu_reclaimed: f64,
    pub reclaimed_sign: CellSign,
    /// Closed-form limit masses on the reclaimed region.
    pub mu_limit: f64,
    pub nu_limit: f64,
    pub division: ControlledDivision,
}

pub fn evaluate_reclaim(
    mu1: &LevelMeasure,
    nu1: &LevelMeasure,
    plan: &RedistributionPlan,
) -> Result<ReclaimOutcome> {
    let bound = reclaim_bound(mu1, nu1, plan.target())?;
    let division = split_division(mu1, nu1, plan)?;
    let decomposition = division.decomposition()?;
    let (mu_inf, nu_inf) = division.limits()?;
    // the reclaimed piece takes the target's position
    let piece = plan.target().position(mu1.scheme().n());
    let reclaimed = &division.pieces()[piece];
    Ok(ReclaimOutcome {
        bound,
        sub_lambda: reclaimed.lambda,
        degenerate: plan.is_degenerate(),
        mu_reclaimed: reclaimed.mu,
        nu_reclaimed: reclaimed.nu,
        reclaimed_sign: decomposition.sign(piece),
        mu_limit: mu_inf[piece],
        nu_limit: nu_inf[piece],
        division,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::partition::PartitionScheme;

    fn pair() -> (LevelMeasure, LevelMeasure) {
        let scheme = Arc::new(PartitionScheme::uniform(3).unwrap());
        (
            LevelMeasure::new(Arc::clone(&scheme), 1, vec![0.2, 0.5, 0.3]).unwrap(),
            LevelMeasure::new(scheme, 1, vec![0.5, 0.3, 0.2]).unwrap(),
        )
    }

    #[test]
    fn bound_by_hand() {
        let (mu, nu) = pair();
        let s = CellAddress::new([1]);
        assert_close!(reclaim_bound(&mu, &nu, &s).unwrap(), 2.0 / 15.0, 1e-15);
        assert!(matches!(
            reclaim_bound(&mu, &nu, &CellAddress::new([2])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_mass_cell_is_rejected() {
        let scheme = Arc::new(PartitionScheme::uniform(2).unwrap());
        let mu = LevelMeasure::new(Arc::clone(&scheme), 1, vec![0.0, 1.0]).unwrap();
        let nu = LevelMeasure::new(scheme, 1, vec![0.5, 0.5]).unwrap();
        assert!(reclaim_bound(&mu, &nu, &CellAddress::new([1])).is_err());
    }

    #[test]
    fn below_and_at_the_bound() {
        let (mu, nu) = pair();
        let s = CellAddress::new([1]);
        let bound = reclaim_bound(&mu, &nu, &s).unwrap();

        let plan = extremal_reclaim_plan(&mu, &nu, &s, 0.5 * bound).unwrap();
        assert!(!plan.is_degenerate());
        let out = evaluate_reclaim(&mu, &nu, &plan).unwrap();
        assert_eq!(out.reclaimed_sign, CellSign::Plus);
        assert!(out.mu_limit > 0.0);
        assert_eq!(out.nu_limit, 0.0);

        let plan = extremal_reclaim_plan(&mu, &nu, &s, bound).unwrap();
        assert!(plan.is_degenerate());
        let out = evaluate_reclaim(&mu, &nu, &plan).unwrap();
        assert_eq!(out.reclaimed_sign, CellSign::Zero);
        assert_eq!(out.mu_limit, 0.0);
        assert_eq!(out.nu_limit, 0.0);

        assert!(matches!(
            extremal_reclaim_plan(&mu, &nu, &s, 1.01 * bound),
            Err(Error::ExceedsBound { .. })
        ));
    }
}
