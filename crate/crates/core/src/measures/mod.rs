//! Structure measures and their level-k piecewise-uniform realizations.
//!
//! A similar structure measure is determined by a matrix of stochastic rows:
//! row `k` gives the conditional split of every level `k - 1` cell among its
//! children, independently of which cell is split. The level-k realization
//! [`LevelMeasure`] keeps one mass per level-k cell and is uniform (with respect
//! to Lebesgue measure) inside each cell.

mod decomposition;
mod distribution;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{CellAddress, PartitionScheme};
use crate::STOCHASTIC_TOLERANCE;

pub use decomposition::{
    hahn_jordan, hahn_jordan_with_tolerance, limit_masses, limit_state_closed_form, CellSign,
    SignedLevelDecomposition,
};
pub use distribution::{distribution_function, DistributionFunction};

/// Compensated (Neumaier) sum. Level vectors get long enough that a naive sum
/// drifts past the stochastic tolerance.
pub fn accurate_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

fn check_probability(values: &[f64], what: &str) -> Result<()> {
    if let Some((pos, &v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::NotStochastic(format!(
            "{what} entry {} is {v}",
            pos + 1
        )));
    }
    let sum = accurate_sum(values);
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::NotStochastic(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// Nonnegative vector summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StochasticVector(Vec<f64>);

impl StochasticVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NotStochastic("empty vector".into()));
        }
        check_probability(&entries, "vector")?;
        Ok(StochasticVector(entries))
    }

    pub fn uniform(n: usize) -> Self {
        StochasticVector(vec![1.0 / n as f64; n])
    }

    /// All mass on the 1-based `index`.
    pub fn unit(n: usize, index: usize) -> Result<Self> {
        if index < 1 || index > n {
            return Err(Error::IndexOutOfRange {
                index,
                position: 1,
                n,
            });
        }
        let mut entries = vec![0.0; n];
        entries[index - 1] = 1.0;
        Ok(StochasticVector(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Entry at the 1-based `index`.
    pub fn get(&self, index: usize) -> f64 {
        self.0[index - 1]
    }
}

impl TryFrom<Vec<f64>> for StochasticVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        StochasticVector::new(entries)
    }
}

impl From<StochasticVector> for Vec<f64> {
    fn from(v: StochasticVector) -> Self {
        v.0
    }
}

impl std::ops::Deref for StochasticVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// How rows beyond the supplied ones are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// One row used at every level.
    SelfSimilar,
    /// One row per level; the last row repeats forever.
    Similar,
    /// Rows only up to a finite depth `k_0`; deeper structure is unspecified.
    Partial,
}

/// Matrix of stochastic rows describing a (partly, self-) similar structure
/// measure. Row `k` is the conditional split at level `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct StructureMatrix {
    kind: MatrixKind,
    rows: Vec<StochasticVector>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    kind: MatrixKind,
    rows: Vec<StochasticVector>,
}

impl TryFrom<RawMatrix> for StructureMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        StructureMatrix::new(raw.kind, raw.rows)
    }
}

impl From<StructureMatrix> for RawMatrix {
    fn from(m: StructureMatrix) -> Self {
        RawMatrix {
            kind: m.kind,
            rows: m.rows,
        }
    }
}

impl StructureMatrix {
    pub fn new(kind: MatrixKind, rows: Vec<StochasticVector>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyRows)?;
        let n = first.len();
        if n < 2 {
            return Err(Error::BranchingTooSmall(n));
        }
        if kind == MatrixKind::SelfSimilar && rows.len() != 1 {
            return Err(Error::Precondition(format!(
                "a self-similar matrix has exactly one row, got {}",
                rows.len()
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::RowLength {
                    row: r + 1,
                    len: row.len(),
                    expected: n,
                });
            }
        }
        Ok(StructureMatrix { kind, rows })
    }

    pub fn self_similar(row: StochasticVector) -> Result<Self> {
        StructureMatrix::new(MatrixKind::SelfSimilar, vec![row])
    }

    pub fn similar(rows: Vec<StochasticVector>) -> Result<Self> {
        StructureMatrix::new(MatrixKind::Similar, rows)
    }

    pub fn partial(rows: Vec<StochasticVector>) -> Result<Self> {
        StructureMatrix::new(MatrixKind::Partial, rows)
    }

    /// Convenience constructor from raw rows.
    pub fn from_rows(kind: MatrixKind, rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                StochasticVector::new(row).map_err(|e| e.context(format!("row {}", r + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        StructureMatrix::new(kind, rows)
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[StochasticVector] {
        &self.rows
    }

    /// Deepest defined level for partial matrices.
    pub fn depth(&self) -> Option<usize> {
        match self.kind {
            MatrixKind::Partial => Some(self.rows.len()),
            _ => None,
        }
    }

    /// Row governing level `level` (levels start at 1).
    pub fn row(&self, level: usize) -> Result<&StochasticVector> {
        if level == 0 {
            return Err(Error::Precondition("matrix rows start at level 1".into()));
        }
        match self.kind {
            MatrixKind::SelfSimilar => Ok(&self.rows[0]),
            MatrixKind::Similar => Ok(&self.rows[level.min(self.rows.len()) - 1]),
            MatrixKind::Partial => self.rows.get(level - 1).ok_or(Error::LevelUnreachable {
                level,
                available: self.rows.len(),
            }),
        }
    }

    /// A partial matrix extended by an explicit continuation row.
    pub fn continued(&self, row: StochasticVector) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows.push(row);
        StructureMatrix::new(MatrixKind::Similar, rows)
    }

    /// Replaces rows `1..=prefix.len()` and keeps the deeper structure.
    pub fn with_prefix(&self, prefix: Vec<StochasticVector>) -> Result<Self> {
        let depth = prefix.len();
        let mut rows = prefix;
        match self.kind {
            MatrixKind::Partial => rows.extend(self.rows.iter().skip(depth).cloned()),
            _ => {
                let keep = self.rows.len().max(depth + 1);
                for level in depth + 1..=keep {
                    rows.push(self.row(level)?.clone());
                }
            }
        }
        let kind = match self.kind {
            MatrixKind::Partial => MatrixKind::Partial,
            _ => MatrixKind::Similar,
        };
        StructureMatrix::new(kind, rows)
    }

    /// Mass the measure gives a cell: the product of the row entries along
    /// the cell's digit path.
    pub fn cell_mass(&self, addr: &CellAddress) -> Result<f64> {
        let mut mass = 1.0;
        for (depth, &i) in addr.indices().iter().enumerate() {
            if i < 1 || i > self.n() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    position: depth + 1,
                    n: self.n(),
                });
            }
            mass *= self.row(depth + 1)?[i - 1];
        }
        Ok(mass)
    }
}

/// Piecewise-uniform probability measure at a fixed level of a scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLevelMeasure", into = "RawLevelMeasure")]
pub struct LevelMeasure {
    scheme: Arc<PartitionScheme>,
    level: usize,
    masses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevelMeasure {
    scheme: PartitionScheme,
    level: usize,
    masses: Vec<f64>,
}

impl TryFrom<RawLevelMeasure> for LevelMeasure {
    type Error = Error;

    fn try_from(raw: RawLevelMeasure) -> Result<Self> {
        LevelMeasure::new(Arc::new(raw.scheme), raw.level, raw.masses)
    }
}

impl From<LevelMeasure> for RawLevelMeasure {
    fn from(m: LevelMeasure) -> Self {
        RawLevelMeasure {
            scheme: (*m.scheme).clone(),
            level: m.level,
            masses: m.masses,
        }
    }
}

/// Level-k realization of a structure matrix: cell `(i_1, ..., i_k)` gets
/// `p_{1,i_1} * ... * p_{k,i_k}`.
pub fn measure_from_matrix(
    matrix: &StructureMatrix,
    scheme: &Arc<PartitionScheme>,
    level: usize,
) -> Result<LevelMeasure> {
    if matrix.n() != scheme.n() {
        return Err(Error::SchemeMismatch);
    }
    scheme.check_level(level)?;
    let rows = (1..=level)
        .map(|k| matrix.row(k).map(|r| r.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let count = scheme.cell_count(level)?;
    let n = scheme.n();
    let masses = (0..count)
        .map(|pos| {
            let addr = CellAddress::from_position(n, level, pos);
            addr.indices()
                .iter()
                .zip(&rows)
                .fold(1.0, |mass, (&i, row)| mass * row[i - 1])
        })
        .collect();
    Ok(LevelMeasure {
        scheme: Arc::clone(scheme),
        level,
        masses,
    })
}

impl LevelMeasure {
    /// Validated constructor: one nonnegative mass per cell, total one.
    pub fn new(scheme: Arc<PartitionScheme>, level: usize, masses: Vec<f64>) -> Result<Self> {
        let count = scheme.cell_count(level)?;
        scheme.check_level(level)?;
        if masses.len() != count {
            return Err(Error::NotStochastic(format!(
                "level {level} has {count} cells, got {} masses",
                masses.len()
            )));
        }
        check_probability(&masses, "mass vector")?;
        Ok(LevelMeasure {
            scheme,
            level,
            masses,
        })
    }

    /// Internal constructor for masses that are stochastic by construction.
    pub(crate) fn from_parts(scheme: Arc<PartitionScheme>, level: usize, masses: Vec<f64>) -> Self {
        debug_assert_eq!(masses.len(), scheme.cell_count(level).unwrap_or(0));
        LevelMeasure {
            scheme,
            level,
            masses,
        }
    }

    /// Lebesgue measure itself at the given level.
    pub fn lebesgue(scheme: Arc<PartitionScheme>, level: usize) -> Result<Self> {
        let masses = scheme.level_lambdas(level)?;
        Ok(LevelMeasure {
            scheme,
            level,
            masses,
        })
    }

    pub fn scheme(&self) -> &Arc<PartitionScheme> {
        &self.scheme
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn into_masses(self) -> Vec<f64> {
        self.masses
    }

    pub fn total(&self) -> f64 {
        accurate_sum(&self.masses)
    }

    pub fn same_domain(&self, other: &LevelMeasure) -> bool {
        self.level == other.level
            && (Arc::ptr_eq(&self.scheme, &other.scheme) || *self.scheme == *other.scheme)
    }

    pub(crate) fn check_same_domain(&self, other: &LevelMeasure) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(Error::SchemeMismatch)
        }
    }

    /// Mass of a cell at this level or any coarser level.
    pub fn mass_of(&self, addr: &CellAddress) -> Result<f64> {
        self.scheme.validate_address(addr)?;
        if addr.level() > self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                got: addr.level(),
            });
        }
        let n = self.scheme.n();
        let span = n.pow((self.level - addr.level()) as u32);
        let start = addr.position(n) * span;
        Ok(accurate_sum(&self.masses[start..start + span]))
    }

    /// Splits every cell among its children in the proportions of `row`.
    /// Parent masses are preserved.
    pub fn refine(&self, row: &StochasticVector) -> Result<LevelMeasure> {
        let n = self.scheme.n();
        if row.len() != n {
            return Err(Error::RowLength {
                row: self.level + 1,
                len: row.len(),
                expected: n,
            });
        }
        self.scheme.check_level(self.level + 1)?;
        let masses = self
            .masses
            .iter()
            .flat_map(|&m| row.iter().map(move |&p| m * p))
            .collect();
        Ok(LevelMeasure {
            scheme: Arc::clone(&self.scheme),
            level: self.level + 1,
            masses,
        })
    }

    /// The same measure expressed one level deeper: the density stays
    /// constant inside each old cell, so children split by Lebesgue ratios.
    pub fn lift(&self) -> Result<LevelMeasure> {
        let row = StochasticVector(self.scheme.ratio_row(self.level + 1)?.to_vec());
        self.refine(&row)
    }

    /// Density (Radon-Nikodym derivative against Lebesgue) on a cell.
    pub fn density(&self, addr: &CellAddress) -> Result<f64> {
        if addr.level() != self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                got: addr.level(),
            });
        }
        let lambda = self.scheme.cell_lambda(addr)?;
        Ok(self.masses[addr.position(self.scheme.n())] / lambda)
    }

    /// Densities of all cells, lexicographic order.
    pub fn densities(&self) -> Result<Vec<f64>> {
        let lambdas = self.scheme.level_lambdas(self.level)?;
        Ok(self
            .masses
            .iter()
            .zip(&lambdas)
            .map(|(m, q)| m / q)
            .collect())
    }

    pub fn distribution(&self) -> Result<DistributionFunction> {
        DistributionFunction::new(self)
    }
}

/// Total variation distance `1/2 * sum |mu_a - nu_a|` between two level
/// measures on the same cells.
pub fn variation_distance(mu: &LevelMeasure, nu: &LevelMeasure) -> Result<f64> {
    mu.check_same_domain(nu)?;
    Ok(half_l1(mu.masses(), nu.masses()))
}

pub(crate) fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    0.5 * accurate_sum(&diffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Arc<PartitionScheme> {
        Arc::new(PartitionScheme::uniform(n).unwrap())
    }

    fn row(v: &[f64]) -> StochasticVector {
        StochasticVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn stochastic_vector_validation() {
        assert!(StochasticVector::new(vec![0.5, 0.5]).is_ok());
        assert!(StochasticVector::new(vec![0.5, 0.6]).is_err());
        assert!(StochasticVector::new(vec![1.5, -0.5]).is_err());
        assert!(StochasticVector::new(vec![]).is_err());
        assert!(StochasticVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn uniform_matrix_level_three() {
        let p = StructureMatrix::self_similar(row(&[0.5, 0.5])).unwrap();
        let m = measure_from_matrix(&p, &uniform(2), 3).unwrap();
        assert_eq!(m.masses().len(), 8);
        for &x in m.masses() {
            assert_eq!(x, 0.125);
        }
    }

    #[test]
    fn skewed_matrix_products() {
        let p = StructureMatrix::self_similar(row(&[0.6, 0.4])).unwrap();
        let m = measure_from_matrix(&p, &uniform(2), 2).unwrap();
        let expect = [0.36, 0.24, 0.24, 0.16];
        for (a, b) in m.masses().iter().zip(expect) {
            assert_close!(*a, b, 1e-15);
        }
    }

    #[test]
    fn degenerate_row() {
        let p = StructureMatrix::similar(vec![row(&[1.0, 0.0])]).unwrap();
        let m = measure_from_matrix(&p, &uniform(2), 2).unwrap();
        assert_eq!(m.masses(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn partial_matrix_depth() {
        let p = StructureMatrix::partial(vec![row(&[0.2, 0.8]), row(&[0.5, 0.5])]).unwrap();
        assert!(measure_from_matrix(&p, &uniform(2), 2).is_ok());
        let err = measure_from_matrix(&p, &uniform(2), 3).unwrap_err();
        assert!(matches!(
            err,
            Error::LevelUnreachable {
                level: 3,
                available: 2
            }
        ));
        let extended = p.continued(row(&[0.9, 0.1])).unwrap();
        let m = measure_from_matrix(&extended, &uniform(2), 4).unwrap();
        assert_close!(m.total(), 1.0, 1e-15);
    }

    #[test]
    fn similar_rows_per_level() {
        let p = StructureMatrix::similar(vec![row(&[0.2, 0.8]), row(&[0.7, 0.3])]).unwrap();
        assert_eq!(p.row(1).unwrap().as_slice(), &[0.2, 0.8]);
        assert_eq!(p.row(2).unwrap().as_slice(), &[0.7, 0.3]);
        assert_eq!(p.row(9).unwrap().as_slice(), &[0.7, 0.3]);
        assert!(StructureMatrix::new(MatrixKind::SelfSimilar, vec![row(&[0.5, 0.5]); 2]).is_err());
    }

    #[test]
    fn with_prefix_keeps_tail() {
        let p = StructureMatrix::self_similar(row(&[0.3, 0.7])).unwrap();
        let q = p.with_prefix(vec![row(&[0.9, 0.1])]).unwrap();
        assert_eq!(q.kind(), MatrixKind::Similar);
        assert_eq!(q.row(1).unwrap().as_slice(), &[0.9, 0.1]);
        assert_eq!(q.row(2).unwrap().as_slice(), &[0.3, 0.7]);
        assert_eq!(q.row(7).unwrap().as_slice(), &[0.3, 0.7]);
    }

    #[test]
    fn refine_splits_by_row() {
        let scheme = uniform(2);
        let m = LevelMeasure::new(scheme, 1, vec![0.3, 0.7]).unwrap();
        let r = m.refine(&row(&[0.5, 0.5])).unwrap();
        assert_eq!(r.masses(), &[0.15, 0.15, 0.35, 0.35]);
        let unit = m.refine(&StochasticVector::unit(2, 1).unwrap()).unwrap();
        assert_eq!(unit.masses(), &[0.3, 0.0, 0.7, 0.0]);
    }

    #[test]
    fn refine_round_trip_is_exact() {
        let scheme = Arc::new(PartitionScheme::new(3, vec![vec![0.2, 0.3, 0.5]], true).unwrap());
        let p = StructureMatrix::similar(vec![
            row(&[0.1, 0.6, 0.3]),
            row(&[0.25, 0.25, 0.5]),
            row(&[0.7, 0.2, 0.1]),
        ])
        .unwrap();
        let mut m = LevelMeasure::new(Arc::clone(&scheme), 0, vec![1.0]).unwrap();
        for k in 1..=5 {
            m = m.refine(p.row(k).unwrap()).unwrap();
            assert_eq!(m, measure_from_matrix(&p, &scheme, k).unwrap());
        }
    }

    #[test]
    fn densities() {
        let scheme = uniform(2);
        let lebesgue = LevelMeasure::lebesgue(Arc::clone(&scheme), 3).unwrap();
        for d in lebesgue.densities().unwrap() {
            assert_close!(d, 1.0, 1e-15);
        }
        let p = StructureMatrix::self_similar(row(&[1.0, 0.0])).unwrap();
        let m = measure_from_matrix(&p, &scheme, 1).unwrap();
        assert_eq!(m.density(&CellAddress::new([1])).unwrap(), 2.0);
        assert_eq!(m.density(&CellAddress::new([2])).unwrap(), 0.0);
        assert!(m.density(&CellAddress::new([1, 1])).is_err());
    }

    #[test]
    fn variation_distance_cases() {
        let scheme = uniform(3);
        let p = LevelMeasure::new(Arc::clone(&scheme), 1, vec![1.0 / 3.0; 3]).unwrap();
        let r = LevelMeasure::new(
            Arc::clone(&scheme),
            1,
            vec![2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        )
        .unwrap();
        assert_close!(variation_distance(&p, &r).unwrap(), 1.0 / 3.0, 1e-15);
        assert_eq!(variation_distance(&p, &p).unwrap(), 0.0);
        let a = LevelMeasure::new(Arc::clone(&scheme), 1, vec![1.0, 0.0, 0.0]).unwrap();
        let b = LevelMeasure::new(Arc::clone(&scheme), 1, vec![0.0, 0.5, 0.5]).unwrap();
        assert_eq!(variation_distance(&a, &b).unwrap(), 1.0);
        let deeper = LevelMeasure::lebesgue(Arc::clone(&scheme), 2).unwrap();
        assert!(matches!(
            variation_distance(&a, &deeper),
            Err(Error::SchemeMismatch)
        ));
    }

    #[test]
    fn mass_of_coarser_cells() {
        let p = StructureMatrix::self_similar(row(&[0.6, 0.4])).unwrap();
        let m = measure_from_matrix(&p, &uniform(2), 3).unwrap();
        assert_close!(m.mass_of(&CellAddress::new([1])).unwrap(), 0.6, 1e-15);
        assert_close!(m.mass_of(&CellAddress::new([2, 1])).unwrap(), 0.24, 1e-15);
        assert_close!(m.mass_of(&CellAddress::root()).unwrap(), 1.0, 1e-15);
    }

    #[test]
    fn lift_preserves_density() {
        let scheme = Arc::new(PartitionScheme::new(2, vec![vec![0.7, 0.3]], true).unwrap());
        let m = LevelMeasure::new(Arc::clone(&scheme), 1, vec![0.4, 0.6]).unwrap();
        let lifted = m.lift().unwrap();
        assert_close!(lifted.masses()[0], 0.28, 1e-15);
        assert_close!(lifted.masses()[3], 0.18, 1e-15);
        let d0 = m.densities().unwrap();
        let d1 = lifted.densities().unwrap();
        assert_close!(d1[0], d0[0], 1e-14);
        assert_close!(d1[3], d0[1], 1e-14);
    }

    #[test]
    fn level_measure_rejects_bad_masses() {
        let scheme = uniform(2);
        assert!(LevelMeasure::new(Arc::clone(&scheme), 1, vec![0.5, 0.6]).is_err());
        assert!(LevelMeasure::new(Arc::clone(&scheme), 1, vec![1.0]).is_err());
        assert!(LevelMeasure::new(scheme, 1, vec![1.5, -0.5]).is_err());
    }
}
