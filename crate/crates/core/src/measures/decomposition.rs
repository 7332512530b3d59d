use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::LevelMeasure;
use crate::error::{Error, Result};
use crate::SIGN_TOLERANCE;

/// Side of the signed measure `mu - nu` a cell belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellSign {
    /// `mu` dominates.
    Plus,
    /// `nu` dominates.
    Minus,
    /// Tie within the sign tolerance.
    Zero,
}

/// Hahn-Jordan decomposition of `mu - nu` over a finite list of cells.
///
/// Cells are split by the sign of `d = mu - nu`; differences within the
/// tolerance are ties. The total difference is computed from the signed cells
/// only, `D = (D_plus + D_minus) / 2` with `D_plus` the positive part and
/// `D_minus` the negative part, so `D = 0` exactly when no cell is signed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLevelDecomposition {
    differences: Vec<f64>,
    signs: Vec<CellSign>,
    plus: Vec<usize>,
    minus: Vec<usize>,
    zero: Vec<usize>,
    positive_part: f64,
    negative_part: f64,
    tolerance: f64,
}

impl SignedLevelDecomposition {
    /// Decomposes two mass vectors over the same cells.
    pub fn from_masses(mu: &[f64], nu: &[f64], tolerance: f64) -> Result<Self> {
        if mu.len() != nu.len() {
            return Err(Error::SchemeMismatch);
        }
        if !(tolerance >= 0.0) {
            return Err(Error::Precondition(format!(
                "sign tolerance {tolerance} is negative"
            )));
        }
        let differences: Vec<f64> = mu.iter().zip(nu).map(|(a, b)| a - b).collect();
        let mut signs = Vec::with_capacity(differences.len());
        let (mut plus, mut minus, mut zero) = (Vec::new(), Vec::new(), Vec::new());
        let (mut pos_terms, mut neg_terms) = (Vec::new(), Vec::new());
        for (cell, &d) in differences.iter().enumerate() {
            if d > tolerance {
                signs.push(CellSign::Plus);
                plus.push(cell);
                pos_terms.push(d);
            } else if d < -tolerance {
                signs.push(CellSign::Minus);
                minus.push(cell);
                neg_terms.push(-d);
            } else {
                signs.push(CellSign::Zero);
                zero.push(cell);
            }
        }
        Ok(SignedLevelDecomposition {
            differences,
            signs,
            plus,
            minus,
            zero,
            positive_part: super::accurate_sum(&pos_terms),
            negative_part: super::accurate_sum(&neg_terms),
            tolerance,
        })
    }

    pub fn differences(&self) -> &[f64] {
        &self.differences
    }

    pub fn signs(&self) -> &[CellSign] {
        &self.signs
    }

    pub fn sign(&self, cell: usize) -> CellSign {
        self.signs[cell]
    }

    /// Cells where `mu > nu`.
    pub fn plus(&self) -> &[usize] {
        &self.plus
    }

    /// Cells where `mu < nu`.
    pub fn minus(&self) -> &[usize] {
        &self.minus
    }

    /// Tied cells.
    pub fn zero(&self) -> &[usize] {
        &self.zero
    }

    /// `sum over plus cells of d`.
    pub fn positive_part(&self) -> f64 {
        self.positive_part
    }

    /// `sum over minus cells of |d|`.
    pub fn negative_part(&self) -> f64 {
        self.negative_part
    }

    pub fn total_difference(&self) -> f64 {
        0.5 * (self.positive_part + self.negative_part)
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    /// Sum of `weights` over cells with the given sign.
    pub fn weight_of(&self, sign: CellSign, weights: &[f64]) -> f64 {
        let cells = match sign {
            CellSign::Plus => &self.plus,
            CellSign::Minus => &self.minus,
            CellSign::Zero => &self.zero,
        };
        let terms: Vec<f64> = cells.iter().map(|&c| weights[c]).collect();
        super::accurate_sum(&terms)
    }
}

/// Decomposition of `mu - nu` with the default sign tolerance.
pub fn hahn_jordan(mu: &LevelMeasure, nu: &LevelMeasure) -> Result<SignedLevelDecomposition> {
    hahn_jordan_with_tolerance(mu, nu, SIGN_TOLERANCE)
}

pub fn hahn_jordan_with_tolerance(
    mu: &LevelMeasure,
    nu: &LevelMeasure,
    tolerance: f64,
) -> Result<SignedLevelDecomposition> {
    mu.check_same_domain(nu)?;
    SignedLevelDecomposition::from_masses(mu.masses(), nu.masses(), tolerance)
}

/// Normalized positive and negative parts of the decomposition: `d / D` on
/// plus cells for `mu`, `-d / D` on minus cells for `nu`, zero elsewhere
/// (including tied cells).
pub fn limit_masses(decomposition: &SignedLevelDecomposition) -> Result<(Vec<f64>, Vec<f64>)> {
    if decomposition.plus.is_empty() || decomposition.minus.is_empty() {
        return Err(Error::IdenticalMeasures);
    }
    let len = decomposition.len();
    let mut mu = vec![0.0; len];
    let mut nu = vec![0.0; len];
    for &c in &decomposition.plus {
        mu[c] = decomposition.differences[c] / decomposition.positive_part;
    }
    for &c in &decomposition.minus {
        nu[c] = -decomposition.differences[c] / decomposition.negative_part;
    }
    Ok((mu, nu))
}

/// Closed-form limit state of the conflict trajectory started at `(mu, nu)`.
///
/// Fails with [`Error::IdenticalMeasures`] when the measures coincide up to the
/// sign tolerance, where there is nothing to separate.
pub fn limit_state_closed_form(
    mu: &LevelMeasure,
    nu: &LevelMeasure,
) -> Result<(LevelMeasure, LevelMeasure)> {
    let decomposition = hahn_jordan(mu, nu)?;
    let (mu_inf, nu_inf) = limit_masses(&decomposition)?;
    let scheme = Arc::clone(mu.scheme());
    Ok((
        LevelMeasure::from_parts(Arc::clone(&scheme), mu.level(), mu_inf),
        LevelMeasure::from_parts(scheme, mu.level(), nu_inf),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionScheme;

    fn level1(n: usize, masses: &[f64]) -> LevelMeasure {
        LevelMeasure::new(
            Arc::new(PartitionScheme::uniform(n).unwrap()),
            1,
            masses.to_vec(),
        )
        .unwrap()
    }

    fn spectral_gap_pair(n: usize) -> (LevelMeasure, LevelMeasure) {
        let nf = n as f64;
        let p = vec![1.0 / nf; n];
        let mut r = vec![1.0 / (nf * (nf - 1.0)); n];
        r[0] = (nf - 1.0) / nf;
        (level1(n, &p), level1(n, &r))
    }

    #[test]
    fn two_cells() {
        let mu = level1(2, &[0.5, 0.5]);
        let nu = level1(2, &[0.2, 0.8]);
        let hj = hahn_jordan(&mu, &nu).unwrap();
        assert_eq!(hj.plus(), &[0]);
        assert_eq!(hj.minus(), &[1]);
        assert!(hj.zero().is_empty());
        assert_close!(hj.total_difference(), 0.3, 1e-15);
        let (a, b) = limit_state_closed_form(&mu, &nu).unwrap();
        assert_eq!(a.masses(), &[1.0, 0.0]);
        assert_eq!(b.masses(), &[0.0, 1.0]);
    }

    #[test]
    fn identical_measures() {
        let mu = level1(3, &[0.2, 0.3, 0.5]);
        let hj = hahn_jordan(&mu, &mu).unwrap();
        assert_eq!(hj.zero().len(), 3);
        assert_eq!(hj.total_difference(), 0.0);
        assert!(matches!(
            limit_state_closed_form(&mu, &mu),
            Err(Error::IdenticalMeasures)
        ));
    }

    #[test]
    fn spectral_gap_level_one() {
        for n in 3..=5 {
            let (mu, nu) = spectral_gap_pair(n);
            let hj = hahn_jordan(&mu, &nu).unwrap();
            assert_eq!(hj.minus(), &[0]);
            assert_eq!(hj.plus(), (1..n).collect::<Vec<_>>().as_slice());
            let nf = n as f64;
            assert_close!(hj.total_difference(), (nf - 2.0) / nf, 1e-15);
            let (a, b) = limit_state_closed_form(&mu, &nu).unwrap();
            assert_eq!(a.masses()[0], 0.0);
            for &x in &a.masses()[1..] {
                assert_close!(x, 1.0 / (nf - 1.0), 1e-15);
            }
            assert_eq!(b.masses()[0], 1.0);
        }
    }

    #[test]
    fn tied_cells_get_no_limit_mass() {
        let mu = level1(3, &[0.4, 0.3, 0.3]);
        let nu = level1(3, &[0.2, 0.3, 0.5]);
        let hj = hahn_jordan(&mu, &nu).unwrap();
        assert_eq!(hj.zero(), &[1]);
        let (a, b) = limit_state_closed_form(&mu, &nu).unwrap();
        assert_eq!(a.masses(), &[1.0, 0.0, 0.0]);
        assert_eq!(b.masses(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn parts_balance() {
        let mu = level1(4, &[0.1, 0.2, 0.3, 0.4]);
        let nu = level1(4, &[0.25, 0.25, 0.4, 0.1]);
        let hj = hahn_jordan(&mu, &nu).unwrap();
        assert_close!(hj.positive_part() - hj.negative_part(), 0.0, 1e-12);
    }

    #[test]
    fn mismatched_domains() {
        let mu = level1(2, &[0.5, 0.5]);
        let nu = level1(3, &[0.2, 0.3, 0.5]);
        assert!(matches!(hahn_jordan(&mu, &nu), Err(Error::SchemeMismatch)));
    }
}
