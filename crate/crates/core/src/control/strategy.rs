//! ε-occupation strategy: the losing opponent rebuilds its first k rows from
//! the winner's rows so that, along the chain of lost cells `s, ss, sss, ...`,
//! it wins every side branch and is left with only `Ω_{s...s}` of measure
//! `n^-k <= ε`.
//!
//! For levels `j = 1..k` the new row is `r_j` shifted by `δ_j`:
//! `p~_ji = r_ji + δ_j / (n - 1)` for `i != s` and `p~_js = r_js - δ_j`. The
//! side branch `Ω_{s^(j-1) i}` is won iff
//! `1 + δ_j / ((n - 1) r_ji) > C_j = prod_{l<j} r_ls / (r_ls - δ_l)`,
//! so each `δ_j` must exceed `L_j = (n - 1) max_{i != s} r_ji (C_j - 1)` while
//! staying below `r_js`. `δ_1 = t r_1s / n` is free; every later `δ_j` is
//! placed between `L_j` and `r_js`. Feasibility shrinks as `t` grows, so the
//! largest feasible `t` is found by bisection and half of it is used.

use serde::{Deserialize, Serialize};

use super::{ControlledDivision, DivisionPiece, Inequality, Relation};
use crate::error::{Error, Result};
use crate::measures::{CellSign, StochasticVector, StructureMatrix};
use crate::partition::{CellAddress, PartitionScheme};

const BISECTION_STEPS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub epsilon: f64,
    /// Least k with `n^-k <= ε`.
    pub depth: usize,
    /// Losing index at level 1 (1-based).
    pub loser: usize,
    /// Whether `s` is the only index with `p_1s < r_1s`. Without it the
    /// construction is exploratory.
    pub single_loser: bool,
    /// Fraction of the admissible `δ_1` range that was used.
    pub scale: f64,
    pub delta: Vec<f64>,
    pub modified: StructureMatrix,
    pub division: ControlledDivision,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub lambda_zero: f64,
    pub checks: Vec<Inequality>,
    pub verified: bool,
}

fn shifts(r: &[Vec<f64>], s: usize, t: f64) -> Option<Vec<f64>> {
    let n = r[0].len() as f64;
    let mut delta = Vec::with_capacity(r.len());
    let mut c = 1.0;
    for (j, row) in r.iter().enumerate() {
        let rs = row[s];
        let d = if j == 0 {
            t * rs / n
        } else {
            let widest = row
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != s)
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            let floor = (n - 1.0) * widest * (c - 1.0);
            if !(floor < rs) {
                return None;
            }
            floor + floor.min((rs - floor) / 2.0)
        };
        if !(d < rs) {
            return None;
        }
        c *= rs / (rs - d);
        delta.push(d);
    }
    Some(delta)
}

fn shifted_row(r: &[f64], s: usize, delta: f64) -> Vec<f64> {
    let n = r.len() as f64;
    r.iter()
        .enumerate()
        .map(|(i, &v)| {
            if i == s {
                v - delta
            } else {
                v + delta / (n - 1.0)
            }
        })
        .collect()
}

/// Division along the chain of lost cells: `Ω_{s^(j-1) i}` for `j = 1..k`,
/// `i != s`, followed by `Ω_{s^k}`. Masses are products along each chain.
fn chain_division(p: &[Vec<f64>], r: &[Vec<f64>], s: usize) -> Result<ControlledDivision> {
    let n = r[0].len();
    let mut pieces = Vec::new();
    let (mut lambda, mut mu, mut nu) = (1.0f64, 1.0f64, 1.0f64);
    let mut prefix = Vec::new();
    for (pr, rr) in p.iter().zip(r) {
        for i in (0..n).filter(|&i| i != s) {
            let mut addr = prefix.clone();
            addr.push(i + 1);
            pieces.push(DivisionPiece {
                label: CellAddress::new(addr).to_string(),
                lambda: lambda / n as f64,
                mu: mu * pr[i],
                nu: nu * rr[i],
            });
        }
        prefix.push(s + 1);
        lambda /= n as f64;
        mu *= pr[s];
        nu *= rr[s];
    }
    pieces.push(DivisionPiece {
        label: CellAddress::new(prefix).to_string(),
        lambda,
        mu,
        nu,
    });
    ControlledDivision::new(pieces)
}

/// Builds the modified matrix for the losing opponent `P` against `R` on a
/// uniform scheme and verifies the outcome on the chain division by
/// recomputing its signed decomposition.
pub fn occupation_strategy(
    p: &StructureMatrix,
    r: &StructureMatrix,
    epsilon: f64,
    scheme: &PartitionScheme,
) -> Result<StrategyResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if !scheme.is_uniform() {
        return Err(Error::Precondition(
            "the strategy needs a uniform scheme".into(),
        ));
    }
    let n = scheme.n();
    if p.n() != n || r.n() != n {
        return Err(Error::SchemeMismatch);
    }
    let nf = n as f64;
    let mut depth = 1;
    while nf.powi(depth as i32).recip() > epsilon {
        depth += 1;
    }
    let rows = |m: &StructureMatrix| -> Result<Vec<Vec<f64>>> {
        (1..=depth)
            .map(|j| m.row(j).map(|row| row.to_vec()))
            .collect()
    };
    let (p_rows, r_rows) = (rows(p)?, rows(r)?);
    for (name, m) in [("P", &p_rows), ("R", &r_rows)] {
        if m.iter().flatten().any(|&v| !(v > 0.0)) {
            return Err(Error::Precondition(format!(
                "{name} must give every cell positive mass in the first {depth} rows"
            )));
        }
    }

    let (p1, r1) = (&p_rows[0], &r_rows[0]);
    let losers: Vec<usize> = (0..n).filter(|&i| p1[i] < r1[i]).collect();
    let single_loser = losers.len() == 1 && (0..n).all(|i| i == losers[0] || p1[i] > r1[i]);
    let s = (0..n)
        .max_by(|&a, &b| (r1[a] - p1[a]).total_cmp(&(r1[b] - p1[b])).then(b.cmp(&a)))
        .expect("n >= 2");
    if !single_loser {
        log::warn!("level 1 has no single losing index; strategy is exploratory");
    }

    let (scale, delta, modified_rows) = if depth == 1 && single_loser {
        (0.0, vec![0.0], p_rows.clone())
    } else {
        let limit = if shifts(&r_rows, s, 1.0).is_some() {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if shifts(&r_rows, s, mid).is_some() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let scale = 0.5 * limit;
        let delta = shifts(&r_rows, s, scale).filter(|_| scale > 0.0).ok_or_else(|| {
            Error::Infeasible(format!(
                "no admissible shift for n = {n}, k = {depth}, s = {}; feasible scale limit {limit:e}",
                s + 1
            ))
        })?;
        let modified = r_rows
            .iter()
            .zip(&delta)
            .map(|(row, &d)| shifted_row(row, s, d))
            .collect();
        (scale, delta, modified)
    };

    let prefix = modified_rows
        .iter()
        .map(|row| StochasticVector::new(row.clone()))
        .collect::<Result<Vec<_>>>()?;
    let modified = p.with_prefix(prefix)?;
    let division = chain_division(&modified_rows, &r_rows, s)?;
    let decomposition = division.decomposition()?;
    let lambda_plus = division.lambda_of(&decomposition, CellSign::Plus);
    let lambda_minus = division.lambda_of(&decomposition, CellSign::Minus);
    let lambda_zero = division.lambda_of(&decomposition, CellSign::Zero);

    let mut checks = vec![
        Inequality::new(
            "lambda(plus)",
            lambda_plus,
            Relation::Ge,
            1.0 - epsilon,
            1e-12,
        ),
        Inequality::new("lambda(minus)", lambda_minus, Relation::Le, epsilon, 1e-12),
        Inequality::new(
            "lambda(plus) + lambda(minus) + lambda(zero)",
            lambda_plus + lambda_minus + lambda_zero,
            Relation::Le,
            1.0,
            1e-12,
        ),
    ];
    if !(depth == 1 && single_loser) {
        let r1s = r_rows[0][s];
        checks.push(Inequality::new(
            "p~_1s",
            modified_rows[0][s],
            Relation::Gt,
            (nf - 1.0) / nf * r1s,
            0.0,
        ));
        checks.push(Inequality::new(
            "p~_1s",
            modified_rows[0][s],
            Relation::Lt,
            r1s,
            0.0,
        ));
    }
    // the limit must be a proper separation of the division
    let (mu_inf, nu_inf) = division.limits()?;
    let overlap: f64 = mu_inf.iter().zip(&nu_inf).map(|(a, b)| a * b).sum();
    checks.push(Inequality::new(
        "limit overlap",
        overlap,
        Relation::Le,
        0.0,
        0.0,
    ));
    let verified = checks.iter().all(|c| c.holds);
    Ok(StrategyResult {
        epsilon,
        depth,
        loser: s + 1,
        single_loser,
        scale,
        delta,
        modified,
        division,
        lambda_plus,
        lambda_minus,
        lambda_zero,
        checks,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(n: usize) -> (StructureMatrix, StructureMatrix) {
        let nf = n as f64;
        let mut r = vec![1.0 / (nf * (nf - 1.0)); n];
        r[0] = (nf - 1.0) / nf;
        (
            StructureMatrix::self_similar(StochasticVector::uniform(n)).unwrap(),
            StructureMatrix::self_similar(StochasticVector::new(r).unwrap()).unwrap(),
        )
    }

    #[test]
    fn coarse_epsilon_needs_no_change() {
        let (p, r) = example(3);
        let out = occupation_strategy(&p, &r, 0.4, &PartitionScheme::uniform(3).unwrap()).unwrap();
        assert_eq!(out.depth, 1);
        assert_eq!(out.loser, 1);
        assert!(out.single_loser);
        assert_eq!(
            out.modified,
            p.with_prefix(vec![StochasticVector::uniform(3)]).unwrap()
        );
        assert_close!(out.lambda_minus, 1.0 / 3.0, 1e-15);
        assert!(out.verified);
    }

    #[test]
    fn finer_epsilons() {
        let (p, r) = example(3);
        let scheme = PartitionScheme::uniform(3).unwrap();
        for (eps, k) in [(0.3, 2), (0.1, 3), (0.05, 3), (0.01, 5)] {
            let out = occupation_strategy(&p, &r, eps, &scheme).unwrap();
            assert_eq!(out.depth, k);
            assert_close!(out.lambda_minus, 3f64.powi(-(k as i32)), 1e-15);
            assert!(out.verified, "{:?}", out.checks);
        }
    }

    #[test]
    fn bad_inputs() {
        let (p, r) = example(3);
        let scheme = PartitionScheme::uniform(3).unwrap();
        assert!(matches!(
            occupation_strategy(&p, &r, 1.5, &scheme),
            Err(Error::EpsilonOutOfRange(_))
        ));
        let skewed = PartitionScheme::new(3, vec![vec![0.2, 0.3, 0.5]], true).unwrap();
        assert!(occupation_strategy(&p, &r, 0.3, &skewed).is_err());
        let zero =
            StructureMatrix::self_similar(StochasticVector::new(vec![0.5, 0.5, 0.0]).unwrap())
                .unwrap();
        assert!(occupation_strategy(&zero, &r, 0.3, &scheme).is_err());
    }
}
