use std::sync::Arc;

use proptest::prelude::*;

use structural_conflict::control::check_distance_monotone;
use structural_conflict::dynamics::{ConflictSystem, IterateOptions, ThetaKind};
use structural_conflict::measures::{
    hahn_jordan, limit_state_closed_form, LevelMeasure, MatrixKind, StochasticVector,
    StructureMatrix,
};
use structural_conflict::partition::{CellAddress, PartitionScheme};

/// Strictly positive stochastic vector of length `n`.
fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let total: f64 = v.iter().sum();
        v.into_iter().map(|x| x / total).collect()
    })
}

fn matrix(n: usize, rows: usize) -> impl Strategy<Value = StructureMatrix> {
    prop::collection::vec(simplex(n), rows).prop_map(|rows| {
        StructureMatrix::new(
            MatrixKind::Similar,
            rows.into_iter()
                .map(|r| StochasticVector::new(r).unwrap())
                .collect(),
        )
        .unwrap()
    })
}

fn matrix_pair() -> impl Strategy<Value = (StructureMatrix, StructureMatrix, usize)> {
    (2usize..=5, 1usize..=8).prop_flat_map(|(n, k)| {
        // keep n^k well under a million cells
        let k = if n >= 4 { k.min(6) } else { k };
        (matrix(n, k), matrix(n, k), Just(k))
    })
}

fn level_pair() -> impl Strategy<Value = (LevelMeasure, LevelMeasure)> {
    (2usize..=4, 1usize..=2).prop_flat_map(|(n, k)| {
        let cells = n.pow(k as u32);
        (simplex(cells), simplex(cells)).prop_map(move |(a, b)| {
            let scheme = Arc::new(PartitionScheme::uniform(n).unwrap());
            (
                LevelMeasure::new(Arc::clone(&scheme), k, a).unwrap(),
                LevelMeasure::new(scheme, k, b).unwrap(),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_never_decreases((p, r, k) in matrix_pair()) {
        let report = check_distance_monotone(&p, &r, k).unwrap();
        prop_assert!(report.monotone, "{:?}", report.distances);
        prop_assert!(report.max_mass_error < 1e-12);
    }

    #[test]
    fn position_round_trip(n in 2usize..=6, k in 1usize..=5, seed in any::<u64>()) {
        let cells = n.pow(k as u32);
        let position = (seed % cells as u64) as usize;
        let addr = CellAddress::from_position(n, k, position);
        prop_assert_eq!(addr.level(), k);
        prop_assert_eq!(addr.position(n), position);
    }

    #[test]
    fn refining_keeps_parent_mass(v in simplex(3), row in simplex(3)) {
        let scheme = Arc::new(PartitionScheme::uniform(3).unwrap());
        let mu = LevelMeasure::new(scheme, 1, v.clone()).unwrap();
        let fine = mu.refine(&StochasticVector::new(row).unwrap()).unwrap();
        for (i, parent) in v.iter().enumerate() {
            let children: f64 = fine.masses()[3 * i..3 * i + 3].iter().sum();
            prop_assert!((children - parent).abs() < 1e-15);
        }
    }

    #[test]
    fn distribution_function_is_monotone(v in simplex(4), row in simplex(4)) {
        let scheme = Arc::new(PartitionScheme::uniform(4).unwrap());
        let mu = LevelMeasure::new(scheme, 1, v).unwrap().refine(&StochasticVector::new(row).unwrap()).unwrap();
        let f = mu.distribution().unwrap();
        let samples = f.samples(101);
        prop_assert_eq!(samples[0].1, 0.0);
        prop_assert!((samples[100].1 - 1.0).abs() < 1e-12);
        prop_assert!(samples.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn limits_are_orthogonal_and_stochastic((mu, nu) in level_pair()) {
        let (a, b) = limit_state_closed_form(&mu, &nu).unwrap();
        let overlap: f64 = a.masses().iter().zip(b.masses()).map(|(x, y)| x * y).sum();
        prop_assert_eq!(overlap, 0.0);
        prop_assert!((a.total() - 1.0).abs() < 1e-12);
        prop_assert!((b.total() - 1.0).abs() < 1e-12);
        let d = hahn_jordan(&mu, &nu).unwrap();
        prop_assert!((d.positive_part() - d.negative_part()).abs() < 1e-12);
    }

    #[test]
    fn iterate_lands_on_closed_form((mu, nu) in level_pair()) {
        let (a, b) = limit_state_closed_form(&mu, &nu).unwrap();
        let t = ConflictSystem::new(ThetaKind::Bhattacharyya)
            .iterate(mu, nu, &IterateOptions::default())
            .unwrap();
        prop_assert!(t.converged);
        prop_assert!(t.monotone_separation);
        let last = t.final_state();
        for (x, y) in last.mu().masses().iter().zip(a.masses()) {
            prop_assert!((x - y).abs() < 1e-8);
        }
        for (x, y) in last.nu().masses().iter().zip(b.masses()) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }
}
