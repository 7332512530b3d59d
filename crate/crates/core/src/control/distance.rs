use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{accurate_sum, half_l1, StructureMatrix};

/// Slack allowed before a decrease of `D_k` counts as a violation.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    /// `D_1 .. D_k_max`.
    pub distances: Vec<f64>,
    /// Levels k with `D_k > D_(k+1) + slack`.
    pub violations: Vec<usize>,
    pub monotone: bool,
    /// Largest deviation of a level's total mass from one, over both measures.
    pub max_mass_error: f64,
}

/// Variation distances between the level realizations of two matrices.
///
/// Cell masses do not depend on the Lebesgue ratios, so no scheme is needed.
pub fn check_distance_monotone(
    p: &StructureMatrix,
    r: &StructureMatrix,
    k_max: usize,
) -> Result<DistanceReport> {
    if p.n() != r.n() {
        return Err(Error::SchemeMismatch);
    }
    let mut mu = vec![1.0];
    let mut nu = vec![1.0];
    let mut distances = Vec::with_capacity(k_max);
    let mut max_mass_error = 0.0f64;
    for k in 1..=k_max {
        let (pk, rk) = (p.row(k)?, r.row(k)?);
        mu = mu
            .iter()
            .flat_map(|&m| pk.iter().map(move |&q| m * q))
            .collect();
        nu = nu
            .iter()
            .flat_map(|&m| rk.iter().map(move |&q| m * q))
            .collect();
        max_mass_error = max_mass_error
            .max((accurate_sum(&mu) - 1.0).abs())
            .max((accurate_sum(&nu) - 1.0).abs());
        distances.push(half_l1(&mu, &nu));
    }
    let violations: Vec<usize> = distances
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > w[1] + MONOTONE_SLACK)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(DistanceReport {
        monotone: violations.is_empty(),
        distances,
        violations,
        max_mass_error,
    })
}
