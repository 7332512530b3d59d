use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    accurate_sum, limit_masses, measure_from_matrix, MatrixKind, SignedLevelDecomposition,
    StructureMatrix,
};
use crate::partition::{CellAddress, PartitionScheme};
use crate::SIGN_TOLERANCE;

/// Search cap for the reversal depth.
const MAX_REVERSAL_DEPTH: usize = 1_000_000;

/// Cell `(s, m, ..., m)` below the lost index `s` where the loser's product
/// mass first exceeds the winner's.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversalCell {
    pub s: usize,
    pub m: usize,
    pub depth: usize,
    pub address: CellAddress,
}

fn single_rows<'a>(
    p: &'a StructureMatrix,
    r: &'a StructureMatrix,
) -> Result<(&'a [f64], &'a [f64])> {
    for (name, m) in [("P", p), ("R", r)] {
        if m.kind() != MatrixKind::SelfSimilar {
            return Err(Error::Precondition(format!("{name} must be self-similar")));
        }
    }
    if p.n() != r.n() {
        return Err(Error::SchemeMismatch);
    }
    Ok((p.rows()[0].as_slice(), r.rows()[0].as_slice()))
}

fn check_lost(p: &[f64], r: &[f64], s: usize) -> Result<()> {
    if s < 1 || s > p.len() {
        return Err(Error::IndexOutOfRange {
            index: s,
            position: 1,
            n: p.len(),
        });
    }
    let (ps, rs) = (p[s - 1], r[s - 1]);
    if !(ps > 0.0 && ps < rs) {
        return Err(Error::Precondition(format!(
            "index {s} needs 0 < p_s < r_s, got p_s = {ps}, r_s = {rs}"
        )));
    }
    Ok(())
}

/// Direct evaluation of `p_s p_m^(k-1) > r_s r_m^(k-1)` for 1-based indices.
pub fn reversal_product_holds(p: &[f64], r: &[f64], s: usize, m: usize, k: usize) -> bool {
    let mut lhs = p[s - 1];
    let mut rhs = r[s - 1];
    for _ in 1..k {
        lhs *= p[m - 1];
        rhs *= r[m - 1];
    }
    lhs > rhs
}

/// Picks `m` maximizing `p_i / r_i` over `i != s` (smallest index on ties, an
/// index with `r_i = 0` beats every finite ratio) and the least depth `k >= 2`
/// with `p_s p_m^(k-1) > r_s r_m^(k-1)`.
pub fn find_reversal_cell(
    p: &StructureMatrix,
    r: &StructureMatrix,
    s: usize,
) -> Result<ReversalCell> {
    let (p, r) = single_rows(p, r)?;
    check_lost(p, r, s)?;
    let ratio = |i: usize| {
        if r[i] == 0.0 {
            if p[i] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            p[i] / r[i]
        }
    };
    let mut m = None;
    for i in (0..p.len()).filter(|&i| i != s - 1) {
        match m {
            Some(best) if ratio(i) <= ratio(best) => {}
            _ => m = Some(i),
        }
    }
    let m = m.expect("n >= 2 leaves an index besides s");
    if !(p[m] > r[m]) {
        return Err(Error::Internal(format!(
            "no index with p_i > r_i although p_s < r_s (best ratio {})",
            ratio(m)
        )));
    }
    let (s0, m1) = (s - 1, m + 1);
    let depth = if r[m] == 0.0 {
        2
    } else {
        // log form avoids underflow of the products at large depth
        let gain = p[m].ln() - r[m].ln();
        let deficit = r[s0].ln() - p[s0].ln();
        let mut k = 2;
        while (k - 1) as f64 * gain <= deficit {
            k += 1;
            if k > MAX_REVERSAL_DEPTH {
                return Err(Error::Internal(format!(
                    "no reversal within depth {MAX_REVERSAL_DEPTH}"
                )));
            }
        }
        k
    };
    let mut indices = vec![s];
    indices.extend(std::iter::repeat_n(m1, depth - 1));
    Ok(ReversalCell {
        s,
        m: m1,
        depth,
        address: CellAddress::new(indices),
    })
}

/// Closed-form limit mass of `mu` accumulated on the level-k cells below `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversalMass {
    pub level: usize,
    pub mass: f64,
    /// Level-k cells below `s` that `mu` wins.
    pub winning_cells: usize,
    pub p_s: f64,
    pub holds: bool,
}

/// Sums the closed-form `mu` limit over level-k cells `(s, i_2, ..., i_k)` and
/// compares it with `p_s`.
pub fn reversal_mass_bound(
    p: &StructureMatrix,
    r: &StructureMatrix,
    s: usize,
    k: usize,
) -> Result<ReversalMass> {
    let (p_row, r_row) = single_rows(p, r)?;
    check_lost(p_row, r_row, s)?;
    if k == 0 {
        return Err(Error::Precondition("level must be at least 1".into()));
    }
    let scheme = Arc::new(PartitionScheme::uniform(p.n())?);
    let mu = measure_from_matrix(p, &scheme, k)?;
    let nu = measure_from_matrix(r, &scheme, k)?;
    let decomposition =
        SignedLevelDecomposition::from_masses(mu.masses(), nu.masses(), SIGN_TOLERANCE)?;
    let (mu_inf, _) = limit_masses(&decomposition)?;
    let span = p.n().pow((k - 1) as u32);
    let below = (s - 1) * span..s * span;
    let mass = accurate_sum(&mu_inf[below.clone()]);
    let winning_cells = decomposition
        .plus()
        .iter()
        .filter(|c| below.contains(c))
        .count();
    let p_s = p_row[s - 1];
    Ok(ReversalMass {
        level: k,
        mass,
        winning_cells,
        p_s,
        holds: mass <= p_s + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::StochasticVector;

    fn ss(row: &[f64]) -> StructureMatrix {
        StructureMatrix::self_similar(StochasticVector::new(row.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn two_index_example() {
        let (p, r) = (ss(&[0.3, 0.7]), ss(&[0.6, 0.4]));
        let cell = find_reversal_cell(&p, &r, 1).unwrap();
        assert_eq!(cell.m, 2);
        assert_eq!(cell.depth, 3);
        assert_eq!(cell.address, CellAddress::new([1, 2, 2]));
        assert!(reversal_product_holds(&[0.3, 0.7], &[0.6, 0.4], 1, 2, 3));
        assert!(!reversal_product_holds(&[0.3, 0.7], &[0.6, 0.4], 1, 2, 2));
    }

    #[test]
    fn zero_ratio_entry_reverses_immediately() {
        let (p, r) = (ss(&[0.2, 0.3, 0.5]), ss(&[0.6, 0.4, 0.0]));
        let cell = find_reversal_cell(&p, &r, 1).unwrap();
        assert_eq!((cell.m, cell.depth), (3, 2));
    }

    #[test]
    fn ties_take_the_smallest_index() {
        let (p, r) = (ss(&[0.1, 0.45, 0.45]), ss(&[0.4, 0.3, 0.3]));
        assert_eq!(find_reversal_cell(&p, &r, 1).unwrap().m, 2);
    }

    #[test]
    fn equal_rows_are_rejected() {
        let p = ss(&[0.5, 0.5]);
        assert!(matches!(
            find_reversal_cell(&p, &p, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn mass_bound_example() {
        let (p, r) = (ss(&[0.3, 0.7]), ss(&[0.6, 0.4]));
        let before = reversal_mass_bound(&p, &r, 1, 2).unwrap();
        assert_eq!(before.mass, 0.0);
        assert_eq!(before.winning_cells, 0);
        let at = reversal_mass_bound(&p, &r, 1, 3).unwrap();
        assert!(at.mass > 0.0);
        assert!(at.holds);
        assert!(at.mass <= 0.3);
    }
}
