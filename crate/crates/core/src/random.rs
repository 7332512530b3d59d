//! Seeded random inputs for experiments and property checks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::measures::{
    measure_from_matrix, LevelMeasure, MatrixKind, StochasticVector, StructureMatrix,
};
use crate::partition::{CellAddress, PartitionScheme};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Raw Dirichlet(1, ..., 1) draw: uniform on the simplex, every entry > 0.
pub fn simplex_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            // 1 - u lies in (0, 1], so the log is finite
            let u: f64 = rng.random();
            -(1.0 - u).ln() + f64::MIN_POSITIVE
        })
        .collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    // push the rounding residue into the largest entry
    let residue = 1.0 - v.iter().sum::<f64>();
    let largest = (0..n).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
    v[largest] += residue;
    v
}

pub fn stochastic_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> StochasticVector {
    StochasticVector::new(simplex_point(rng, n)).expect("normalized draw is stochastic")
}

/// Random matrix with `rows` independent rows (`rows` is ignored for
/// self-similar matrices).
pub fn structure_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    kind: MatrixKind,
    n: usize,
    rows: usize,
) -> Result<StructureMatrix> {
    let count = if kind == MatrixKind::SelfSimilar {
        1
    } else {
        rows.max(1)
    };
    let rows = (0..count).map(|_| stochastic_vector(rng, n)).collect();
    StructureMatrix::new(kind, rows)
}

/// Two independent random level measures on the uniform n-adic scheme.
pub fn level_pair<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    level: usize,
) -> Result<(LevelMeasure, LevelMeasure)> {
    let scheme = Arc::new(PartitionScheme::uniform(n)?);
    let cells = scheme.cell_count(level)?;
    let mu = LevelMeasure::new(Arc::clone(&scheme), level, simplex_point(rng, cells))?;
    let nu = LevelMeasure::new(scheme, level, simplex_point(rng, cells))?;
    Ok((mu, nu))
}

/// Level measure of a random similar matrix.
pub fn structured_measure<R: Rng + ?Sized>(
    rng: &mut R,
    scheme: &Arc<PartitionScheme>,
    level: usize,
) -> Result<LevelMeasure> {
    let m = structure_matrix(rng, MatrixKind::Similar, scheme.n(), level.max(1))?;
    measure_from_matrix(&m, scheme, level)
}

/// Level-1 pair on the uniform n-adic scheme together with the cell `mu`
/// loses most clearly. The loss is at least `min_gap`.
pub fn lost_cell_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    min_gap: f64,
) -> Result<(LevelMeasure, LevelMeasure, CellAddress)> {
    loop {
        let (mu, nu) = level_pair(rng, n, 1)?;
        let s = (0..n)
            .max_by(|&a, &b| {
                (nu.masses()[a] - mu.masses()[a]).total_cmp(&(nu.masses()[b] - mu.masses()[b]))
            })
            .expect("n >= 2");
        if nu.masses()[s] - mu.masses()[s] >= min_gap {
            return Ok((mu, nu, CellAddress::new([s + 1])));
        }
    }
}

/// Self-similar pair and the index (1-based) where `p` loses most clearly.
pub fn reversal_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    min_gap: f64,
) -> (StructureMatrix, StructureMatrix, usize) {
    loop {
        let p = simplex_point(rng, n);
        let r = simplex_point(rng, n);
        let s = (0..n)
            .max_by(|&a, &b| (r[a] - p[a]).total_cmp(&(r[b] - p[b])))
            .expect("n >= 2");
        if r[s] - p[s] >= min_gap {
            let build = |row: Vec<f64>| {
                StructureMatrix::self_similar(StochasticVector::new(row).expect("stochastic draw"))
                    .expect("valid row")
            };
            return (build(p), build(r), s + 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_stochastic_and_reproducible() {
        let mut a = seeded(42);
        let mut b = seeded(42);
        for n in 2..=6 {
            let x = simplex_point(&mut a, n);
            let y = simplex_point(&mut b, n);
            assert_eq!(x, y);
            assert!(x.iter().all(|&v| v > 0.0));
            assert_close!(x.iter().sum::<f64>(), 1.0, 1e-15);
        }
    }

    #[test]
    fn random_pairs_validate() {
        let mut rng = seeded(1);
        let (mu, nu) = level_pair(&mut rng, 4, 3).unwrap();
        assert_eq!(mu.masses().len(), 64);
        assert_eq!(nu.masses().len(), 64);
    }
}
