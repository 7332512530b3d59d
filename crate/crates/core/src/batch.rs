//! Independent workloads evaluated either one after another or on the rayon
//! pool. Results come back in input order, and sums are reduced over fixed
//! chunks, so both modes produce bitwise identical output.

use serde::{Deserialize, Serialize};

use crate::control::{check_distance_monotone, DistanceReport};
use crate::dynamics::{ConflictSystem, IterateOptions, Trajectory};
use crate::error::Result;
use crate::measures::{accurate_sum, LevelMeasure, StructureMatrix};

/// Chunk length for [`sum`]. Fixed so the reduction tree does not depend on
/// the thread count.
pub const SUM_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is on, otherwise runs
    /// sequentially.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work actually runs on more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f` to every item, keeping input order.
pub fn map<T, R, F>(execution: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = execution;
    items.iter().map(f).collect()
}

/// Compensated sum reduced chunk by chunk.
pub fn sum(execution: Execution, values: &[f64]) -> f64 {
    let chunks: Vec<&[f64]> = values.chunks(SUM_CHUNK).collect();
    let partials = map(execution, &chunks, |c| accurate_sum(c));
    accurate_sum(&partials)
}

/// Runs one trajectory per starting pair.
pub fn iterate_many(
    execution: Execution,
    system: &ConflictSystem,
    pairs: &[(LevelMeasure, LevelMeasure)],
    options: &IterateOptions,
) -> Vec<Result<Trajectory>> {
    map(execution, pairs, |(mu, nu)| {
        system.iterate(mu.clone(), nu.clone(), options)
    })
}

/// Variation-distance profiles `D_1 .. D_k_max` for many matrix pairs.
pub fn distance_profiles(
    execution: Execution,
    pairs: &[(StructureMatrix, StructureMatrix)],
    k_max: usize,
) -> Vec<Result<DistanceReport>> {
    map(execution, pairs, |(p, r)| {
        check_distance_monotone(p, r, k_max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{RecordPolicy, ThetaKind};
    use crate::random;

    #[test]
    fn modes_agree_bitwise() {
        let values: Vec<f64> = (0..20_000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(
            sum(Execution::Sequential, &values).to_bits(),
            sum(Execution::Parallel, &values).to_bits()
        );

        let mut rng = random::seeded(7);
        let pairs: Vec<_> = (0..12)
            .map(|_| random::level_pair(&mut rng, 3, 2).unwrap())
            .collect();
        let options = IterateOptions {
            record: RecordPolicy::Endpoints,
            ..IterateOptions::default()
        };
        let system = ConflictSystem::new(ThetaKind::Bhattacharyya);
        let a = iterate_many(Execution::Sequential, &system, &pairs, &options);
        let b = iterate_many(Execution::Parallel, &system, &pairs, &options);
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            assert_eq!(x.iterations, y.iterations);
            assert_eq!(x.final_state().mu().masses(), y.final_state().mu().masses());
        }
    }

    #[test]
    fn order_is_kept() {
        let items: Vec<usize> = (0..100).collect();
        let out = map(Execution::Parallel, &items, |i| i * 2);
        assert_eq!(out, items.iter().map(|i| i * 2).collect::<Vec<_>>());
    }
}
