use super::LevelMeasure;
use crate::error::{Error, Result};

/// Distribution function `F(x) = m([0, x))` of a level measure: continuous,
/// piecewise linear, with a kink at every cell endpoint.
#[derive(Clone, Debug)]
pub struct DistributionFunction {
    breakpoints: Vec<f64>,
    // cumulative[c] = mass of cells before c
    cumulative: Vec<f64>,
    masses: Vec<f64>,
}

impl DistributionFunction {
    pub fn new(measure: &LevelMeasure) -> Result<Self> {
        let breakpoints = measure.scheme().level_breakpoints(measure.level())?;
        let masses = measure.masses().to_vec();
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        let (mut sum, mut compensation) = (0.0f64, 0.0f64);
        cumulative.push(0.0);
        for &m in &masses {
            let y = m - compensation;
            let t = sum + y;
            compensation = (t - sum) - y;
            sum = t;
            cumulative.push(sum);
        }
        Ok(DistributionFunction {
            breakpoints,
            cumulative,
            masses,
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::PointOutOfRange(x));
        }
        if x == 1.0 {
            return Ok(1.0);
        }
        // index of the cell [a, b) containing x
        let cell = self.breakpoints.partition_point(|&b| b <= x) - 1;
        let (a, b) = (self.breakpoints[cell], self.breakpoints[cell + 1]);
        let value = self.cumulative[cell] + self.masses[cell] * (x - a) / (b - a);
        Ok(value.clamp(0.0, 1.0))
    }

    /// `count` evenly spaced samples `(x, F(x))` from 0 to 1 inclusive.
    pub fn samples(&self, count: usize) -> Vec<(f64, f64)> {
        let count = count.max(2);
        (0..count)
            .map(|i| {
                let x = if i + 1 == count {
                    1.0
                } else {
                    i as f64 / (count - 1) as f64
                };
                (x, self.eval(x).expect("sample points lie in [0, 1]"))
            })
            .collect()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

/// `F_k(x)` for a single point.
pub fn distribution_function(measure: &LevelMeasure, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::PointOutOfRange(x));
    }
    DistributionFunction::new(measure)?.eval(x)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::measures::{measure_from_matrix, StochasticVector, StructureMatrix};
    use crate::partition::PartitionScheme;

    #[test]
    fn lebesgue_is_identity() {
        let scheme = Arc::new(PartitionScheme::new(3, vec![vec![0.2, 0.5, 0.3]], true).unwrap());
        let m = LevelMeasure::lebesgue(scheme, 3).unwrap();
        let f = m.distribution().unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_close!(f.eval(x).unwrap(), x, 1e-12);
        }
    }

    #[test]
    fn point_mass_on_left_cell() {
        let scheme = Arc::new(PartitionScheme::uniform(2).unwrap());
        let p = StructureMatrix::self_similar(StochasticVector::unit(2, 1).unwrap()).unwrap();
        let m = measure_from_matrix(&p, &scheme, 3).unwrap();
        assert_close!(distribution_function(&m, 0.0625).unwrap(), 0.5, 1e-15);
        assert_eq!(distribution_function(&m, 0.125).unwrap(), 1.0);
        assert_eq!(distribution_function(&m, 1.0).unwrap(), 1.0);
        assert_eq!(distribution_function(&m, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range() {
        let scheme = Arc::new(PartitionScheme::uniform(2).unwrap());
        let m = LevelMeasure::lebesgue(scheme, 1).unwrap();
        assert!(matches!(
            distribution_function(&m, 1.5),
            Err(Error::PointOutOfRange(_))
        ));
        assert!(distribution_function(&m, -0.1).is_err());
    }

    #[test]
    fn samples_cover_endpoints() {
        let scheme = Arc::new(PartitionScheme::uniform(2).unwrap());
        let m = LevelMeasure::lebesgue(scheme, 2).unwrap();
        let s = m.distribution().unwrap().samples(5);
        assert_eq!(s.first(), Some(&(0.0, 0.0)));
        assert_eq!(s.last(), Some(&(1.0, 1.0)));
        assert_eq!(s.len(), 5);
    }
}
