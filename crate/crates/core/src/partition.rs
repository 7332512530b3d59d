//! Consecutive n-adic division of the unit interval.
//!
//! A [`PartitionScheme`] splits `[0, 1]` into `n` pieces, then each piece into
//! `n` again, and so on. The Lebesgue share of child `i` inside its parent is
//! `q_{k,i}`, the `i`-th entry of the ratio row for level `k`, and it does not
//! depend on which parent is being split. Cells are addressed by their digit
//! path `(i_1, ..., i_k)` with digits in `1..=n`. The empty address is the whole
//! interval.
//!
//! Cells of a level are always enumerated in lexicographic order; that order is
//! the "position" of a cell, a zero-based index into per-level mass vectors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::STOCHASTIC_TOLERANCE;

/// Largest number of cells a single level may hold.
pub const MAX_CELLS: usize = 1 << 26;

/// Digit path of a cell. Digits are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellAddress(Vec<usize>);

impl CellAddress {
    /// The whole interval.
    pub fn root() -> Self {
        CellAddress(Vec::new())
    }

    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        CellAddress(indices.into())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Depth of the cell, zero for the root.
    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, index: usize) -> Self {
        let mut indices = self.0.clone();
        indices.push(index);
        CellAddress(indices)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(CellAddress(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// True when `self` is `other` or one of its ancestors.
    pub fn is_prefix_of(&self, other: &CellAddress) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Lexicographic position among the `n^k` cells of its level.
    pub fn position(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &i| acc * n + (i - 1))
    }

    /// Inverse of [`CellAddress::position`].
    pub fn from_position(n: usize, level: usize, mut position: usize) -> Self {
        let mut indices = vec![0; level];
        for slot in indices.iter_mut().rev() {
            *slot = position % n + 1;
            position /= n;
        }
        CellAddress(indices)
    }
}

impl fmt::Display for CellAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (pos, i) in self.0.iter().enumerate() {
            if pos > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

/// Half-open subinterval `[start, end)` of `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval {
        start: 0.0,
        end: 1.0,
    };

    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, x: f64) -> bool {
        self.start <= x && x < self.end
    }
}

/// Division tree of `[0, 1]` with per-level ratio rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct PartitionScheme {
    n: usize,
    ratio_rows: Vec<Vec<f64>>,
    repeat_last: bool,
    // prefix sums of each row, cumulative[r][j] = q_{r,1} + ... + q_{r,j}
    cumulative: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    n: usize,
    ratio_rows: Vec<Vec<f64>>,
    #[serde(default = "default_true")]
    repeat_last: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<RawScheme> for PartitionScheme {
    type Error = Error;

    fn try_from(raw: RawScheme) -> Result<Self> {
        PartitionScheme::new(raw.n, raw.ratio_rows, raw.repeat_last)
    }
}

impl From<PartitionScheme> for RawScheme {
    fn from(scheme: PartitionScheme) -> Self {
        RawScheme {
            n: scheme.n,
            ratio_rows: scheme.ratio_rows,
            repeat_last: scheme.repeat_last,
        }
    }
}

impl PartitionScheme {
    /// Validates and builds a scheme. With `repeat_last`, levels beyond the
    /// supplied rows reuse the last row.
    pub fn new(n: usize, ratio_rows: Vec<Vec<f64>>, repeat_last: bool) -> Result<Self> {
        if n < 2 {
            return Err(Error::BranchingTooSmall(n));
        }
        if ratio_rows.is_empty() {
            return Err(Error::EmptyRows);
        }
        for (r, row) in ratio_rows.iter().enumerate() {
            let level = r + 1;
            if row.len() != n {
                return Err(Error::RowLength {
                    row: level,
                    len: row.len(),
                    expected: n,
                });
            }
            for (i, &q) in row.iter().enumerate() {
                if !q.is_finite() || q <= 0.0 {
                    return Err(Error::NonPositiveRatio {
                        row: level,
                        index: i + 1,
                        value: q,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                return Err(Error::NonStochasticRow { row: level, sum });
            }
        }
        let cumulative = ratio_rows
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, &q| {
                        *acc += q;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Ok(PartitionScheme {
            n,
            ratio_rows,
            repeat_last,
            cumulative,
        })
    }

    /// Equal division into `n` parts at every level.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::BranchingTooSmall(n));
        }
        PartitionScheme::new(n, vec![vec![1.0 / n as f64; n]], true)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ratio_rows(&self) -> &[Vec<f64>] {
        &self.ratio_rows
    }

    pub fn repeats_last(&self) -> bool {
        self.repeat_last
    }

    /// Deepest reachable level, `None` when unbounded.
    pub fn max_level(&self) -> Option<usize> {
        if self.repeat_last {
            None
        } else {
            Some(self.ratio_rows.len())
        }
    }

    /// True when every row is `1/n` everywhere.
    pub fn is_uniform(&self) -> bool {
        let q = 1.0 / self.n as f64;
        self.ratio_rows
            .iter()
            .all(|row| row.iter().all(|&x| (x - q).abs() <= STOCHASTIC_TOLERANCE))
    }

    fn row_index(&self, level: usize) -> Result<usize> {
        debug_assert!(level >= 1);
        if level <= self.ratio_rows.len() {
            Ok(level - 1)
        } else if self.repeat_last {
            Ok(self.ratio_rows.len() - 1)
        } else {
            Err(Error::LevelUnreachable {
                level,
                available: self.ratio_rows.len(),
            })
        }
    }

    /// Ratio row used to split level `level - 1` cells into level `level`
    /// cells. Levels start at 1.
    pub fn ratio_row(&self, level: usize) -> Result<&[f64]> {
        if level == 0 {
            return Err(Error::Precondition("ratio rows start at level 1".into()));
        }
        Ok(&self.ratio_rows[self.row_index(level)?])
    }

    pub fn check_level(&self, level: usize) -> Result<()> {
        match self.max_level() {
            Some(max) if level > max => Err(Error::LevelUnreachable {
                level,
                available: max,
            }),
            _ => self.cell_count(level).map(|_| ()),
        }
    }

    /// `n^level`, refusing levels too large to materialize.
    pub fn cell_count(&self, level: usize) -> Result<usize> {
        u32::try_from(level)
            .ok()
            .and_then(|l| self.n.checked_pow(l))
            .filter(|&c| c <= MAX_CELLS)
            .ok_or(Error::LevelUnreachable {
                level,
                available: (MAX_CELLS as f64).log(self.n as f64).floor() as usize,
            })
    }

    pub fn validate_address(&self, addr: &CellAddress) -> Result<()> {
        for (position, &i) in addr.indices().iter().enumerate() {
            if i < 1 || i > self.n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    position: position + 1,
                    n: self.n,
                });
            }
        }
        self.check_level(addr.level())
    }

    /// Lebesgue measure of a cell: the product of its ratios.
    pub fn cell_lambda(&self, addr: &CellAddress) -> Result<f64> {
        self.validate_address(addr)?;
        let mut lambda = 1.0;
        for (depth, &i) in addr.indices().iter().enumerate() {
            lambda *= self.ratio_row(depth + 1)?[i - 1];
        }
        Ok(lambda)
    }

    /// All addresses of a level in lexicographic order.
    pub fn cells_at_level(&self, level: usize) -> Result<Vec<CellAddress>> {
        let count = self.cell_count(level)?;
        self.check_level(level)?;
        Ok((0..count)
            .map(|pos| CellAddress::from_position(self.n, level, pos))
            .collect())
    }

    /// Lebesgue measures of every cell of a level, lexicographic order.
    pub fn level_lambdas(&self, level: usize) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let mut lambdas = vec![1.0];
        for depth in 1..=level {
            let row = self.ratio_row(depth)?;
            lambdas = lambdas
                .iter()
                .flat_map(|&parent| row.iter().map(move |&q| parent * q))
                .collect();
        }
        Ok(lambdas)
    }

    fn split(&self, parent: Interval, depth: usize, index: usize) -> Result<Interval> {
        let cumulative = &self.cumulative[self.row_index(depth)?];
        let width = parent.end - parent.start;
        let start = if index == 1 {
            parent.start
        } else {
            parent.start + width * cumulative[index - 2]
        };
        let end = if index == self.n {
            parent.end
        } else {
            parent.start + width * cumulative[index - 1]
        };
        Ok(Interval { start, end })
    }

    /// Left-to-right realization of a cell inside `[0, 1]`. The last child of
    /// every parent ends exactly at the parent's end, so each level tiles the
    /// unit interval without gaps.
    pub fn interval_of_cell(&self, addr: &CellAddress) -> Result<Interval> {
        self.validate_address(addr)?;
        let mut interval = Interval::UNIT;
        for (depth, &i) in addr.indices().iter().enumerate() {
            interval = self.split(interval, depth + 1, i)?;
        }
        Ok(interval)
    }

    /// The `n^level + 1` endpoints of the level's cells, in increasing order.
    /// Consistent bit for bit with [`PartitionScheme::interval_of_cell`].
    pub fn level_breakpoints(&self, level: usize) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let mut points = vec![0.0, 1.0];
        for depth in 1..=level {
            let mut next = Vec::with_capacity((points.len() - 1) * self.n + 1);
            for window in points.windows(2) {
                let parent = Interval {
                    start: window[0],
                    end: window[1],
                };
                for i in 1..=self.n {
                    next.push(self.split(parent, depth, i)?.start);
                }
            }
            next.push(1.0);
            points = next;
        }
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed() -> PartitionScheme {
        PartitionScheme::new(2, vec![vec![0.7, 0.3]], true).unwrap()
    }

    #[test]
    fn uniform_ternary_cells() {
        let scheme = PartitionScheme::uniform(3).unwrap();
        for k in 0..4 {
            for addr in scheme.cells_at_level(k).unwrap() {
                assert_close!(
                    scheme.cell_lambda(&addr).unwrap(),
                    3f64.powi(-(k as i32)),
                    1e-15
                );
            }
        }
        assert_close!(
            scheme.cell_lambda(&CellAddress::new([2, 3])).unwrap(),
            1.0 / 9.0,
            1e-15
        );
    }

    #[test]
    fn skewed_products() {
        let scheme = skewed();
        assert_close!(
            scheme.cell_lambda(&CellAddress::new([2, 1])).unwrap(),
            0.21,
            1e-15
        );
        assert_close!(
            scheme.cell_lambda(&CellAddress::new([1, 2])).unwrap(),
            0.21,
            1e-15
        );
        assert_eq!(scheme.cell_lambda(&CellAddress::root()).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            PartitionScheme::new(2, vec![vec![0.5, 0.6]], true),
            Err(Error::NonStochasticRow { .. })
        ));
        assert!(matches!(
            PartitionScheme::new(2, vec![vec![1.0, 0.0]], true),
            Err(Error::NonPositiveRatio { .. })
        ));
        assert!(matches!(
            PartitionScheme::new(1, vec![vec![1.0]], true),
            Err(Error::BranchingTooSmall(1))
        ));
        assert!(matches!(
            PartitionScheme::new(3, vec![vec![0.5, 0.5]], true),
            Err(Error::RowLength { .. })
        ));
    }

    #[test]
    fn non_repeating_scheme_stops() {
        let scheme =
            PartitionScheme::new(2, vec![vec![0.5, 0.5], vec![0.25, 0.75]], false).unwrap();
        assert_close!(
            scheme.cell_lambda(&CellAddress::new([1, 2])).unwrap(),
            0.375,
            1e-15
        );
        assert!(matches!(
            scheme.cell_lambda(&CellAddress::new([1, 2, 1])),
            Err(Error::LevelUnreachable { level: 3, .. })
        ));
        assert!(scheme.cells_at_level(3).is_err());
    }

    #[test]
    fn index_out_of_range() {
        let scheme = PartitionScheme::uniform(2).unwrap();
        assert!(matches!(
            scheme.cell_lambda(&CellAddress::new([1, 3])),
            Err(Error::IndexOutOfRange {
                index: 3,
                position: 2,
                ..
            })
        ));
        assert!(scheme.cell_lambda(&CellAddress::new([0])).is_err());
    }

    #[test]
    fn enumeration_order() {
        let scheme = PartitionScheme::uniform(2).unwrap();
        let cells = scheme.cells_at_level(2).unwrap();
        let expect: Vec<_> = [[1, 1], [1, 2], [2, 1], [2, 2]]
            .iter()
            .map(|a| CellAddress::new(*a))
            .collect();
        assert_eq!(cells, expect);
        assert_eq!(scheme.cells_at_level(0).unwrap(), vec![CellAddress::root()]);

        let ternary = PartitionScheme::uniform(3).unwrap();
        let cells = ternary.cells_at_level(2).unwrap();
        assert_eq!(cells.len(), 9);
        let total: f64 = cells.iter().map(|c| ternary.cell_lambda(c).unwrap()).sum();
        assert_close!(total, 1.0, 1e-12);
        for (pos, c) in cells.iter().enumerate() {
            assert_eq!(c.position(3), pos);
        }
    }

    #[test]
    fn intervals() {
        let scheme = PartitionScheme::uniform(2).unwrap();
        let i = scheme.interval_of_cell(&CellAddress::new([2])).unwrap();
        assert_eq!((i.start, i.end), (0.5, 1.0));
        let i = scheme.interval_of_cell(&CellAddress::new([1, 2])).unwrap();
        assert_eq!((i.start, i.end), (0.25, 0.5));
        let i = skewed()
            .interval_of_cell(&CellAddress::new([2, 1]))
            .unwrap();
        assert_close!(i.start, 0.7, 1e-15);
        assert_close!(i.end, 0.91, 1e-15);
    }

    #[test]
    fn breakpoints_match_intervals() {
        let scheme =
            PartitionScheme::new(3, vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]], true).unwrap();
        for k in 0..5 {
            let points = scheme.level_breakpoints(k).unwrap();
            let cells = scheme.cells_at_level(k).unwrap();
            assert_eq!(points.len(), cells.len() + 1);
            for (pos, c) in cells.iter().enumerate() {
                let i = scheme.interval_of_cell(c).unwrap();
                assert_eq!(i.start, points[pos]);
                assert_eq!(i.end, points[pos + 1]);
            }
        }
    }

    #[test]
    fn scheme_serde_validates() {
        let scheme: PartitionScheme =
            serde_json::from_str(r#"{"n":2,"ratio_rows":[[0.7,0.3]],"repeat_last":true}"#).unwrap();
        assert_eq!(scheme, skewed());
        let bad = serde_json::from_str::<PartitionScheme>(r#"{"n":2,"ratio_rows":[[0.7,0.4]]}"#);
        assert!(bad.is_err());
        let back = serde_json::to_string(&scheme).unwrap();
        assert_eq!(
            serde_json::from_str::<PartitionScheme>(&back).unwrap(),
            scheme
        );
    }
}
