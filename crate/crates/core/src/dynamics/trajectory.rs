use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{sup_distance, ConflictState};
use crate::error::Result;
use crate::measures::CellSign;

/// Which states a trajectory keeps. The first and last states are always kept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordPolicy {
    #[default]
    All,
    /// Every m-th step.
    Every(usize),
    Endpoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub record: RecordPolicy,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            tol: 1e-10,
            max_iter: 100_000,
            record: RecordPolicy::All,
        }
    }
}

/// A recorded state. `residual` is the sup-norm change from the previous step
/// and is absent for the starting state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub theta: f64,
    pub w: f64,
    pub z: f64,
    pub residual: Option<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl TrajectoryPoint {
    fn of(state: &ConflictState, residual: Option<f64>) -> Self {
        TrajectoryPoint {
            step: state.step(),
            theta: state.theta(),
            w: state.w(),
            z: state.z(),
            residual,
            mu: state.mu().masses().to_vec(),
            nu: state.nu().masses().to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub converged: bool,
    /// Steps taken.
    pub iterations: usize,
    pub final_residual: f64,
    /// Sup-norm distance of the final state to the closed-form limit of the
    /// starting pair; `None` when the starting measures coincide.
    pub distance_to_closed_form: Option<f64>,
    /// Whether `mu` gained on its own territory and lost on the opponent's at
    /// every step (and symmetrically for `nu`).
    pub monotone_separation: bool,
    /// Largest raw mass defect seen over all steps.
    pub max_mass_defect: f64,
    final_state: ConflictState,
}

impl Trajectory {
    pub fn final_state(&self) -> &ConflictState {
        &self.final_state
    }

    /// CSV with columns `step, theta, W, z, residual`, then one column per
    /// cell for `mu` and one per cell for `nu`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let cells = self.final_state.mu().masses().len();
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["step", "theta", "W", "z", "residual"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=cells).map(|c| format!("mu_{c}")));
        header.extend((1..=cells).map(|c| format!("nu_{c}")));
        out.write_record(&header)?;
        for p in &self.points {
            let mut row = vec![
                p.step.to_string(),
                p.theta.to_string(),
                p.w.to_string(),
                p.z.to_string(),
                p.residual.map(|r| r.to_string()).unwrap_or_default(),
            ];
            row.extend(p.mu.iter().map(|v| v.to_string()));
            row.extend(p.nu.iter().map(|v| v.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Collects points and running checks while a trajectory advances.
pub(super) struct Recorder {
    policy: RecordPolicy,
    points: Vec<TrajectoryPoint>,
    last_recorded: usize,
    monotone: bool,
    max_defect: f64,
    // (mu on plus, mu on minus, nu on plus, nu on minus) of the previous state
    previous: [f64; 4],
}

fn territory_masses(state: &ConflictState) -> [f64; 4] {
    let d = state.decomposition();
    let mu = state.mu().masses();
    let nu = state.nu().masses();
    [
        d.weight_of(CellSign::Plus, mu),
        d.weight_of(CellSign::Minus, mu),
        d.weight_of(CellSign::Plus, nu),
        d.weight_of(CellSign::Minus, nu),
    ]
}

impl Recorder {
    pub(super) fn new(policy: RecordPolicy, start: &ConflictState) -> Self {
        Recorder {
            policy,
            points: vec![TrajectoryPoint::of(start, None)],
            last_recorded: 0,
            monotone: true,
            max_defect: 0.0,
            previous: territory_masses(start),
        }
    }

    pub(super) fn observe(&mut self, state: &ConflictState, residual: f64) {
        const SLACK: f64 = 1e-12;
        let now = territory_masses(state);
        let [mu_plus, mu_minus, nu_plus, nu_minus] = self.previous;
        if now[0] < mu_plus - SLACK
            || now[1] > mu_minus + SLACK
            || now[2] > nu_plus + SLACK
            || now[3] < nu_minus - SLACK
        {
            self.monotone = false;
        }
        self.previous = now;
        self.max_defect = self.max_defect.max(state.mass_defect());
        let keep = match self.policy {
            RecordPolicy::All => true,
            RecordPolicy::Every(m) => m > 0 && state.step().is_multiple_of(m),
            RecordPolicy::Endpoints => false,
        };
        if keep {
            self.points.push(TrajectoryPoint::of(state, Some(residual)));
            self.last_recorded = state.step();
        }
    }

    pub(super) fn finish(
        mut self,
        state: ConflictState,
        converged: bool,
        residual: f64,
        closed_form: Option<&(Vec<f64>, Vec<f64>)>,
    ) -> Trajectory {
        if state.step() != self.last_recorded {
            self.points
                .push(TrajectoryPoint::of(&state, Some(residual)));
        }
        let distance_to_closed_form = closed_form.map(|(mu, nu)| {
            sup_distance(state.mu().masses(), mu).max(sup_distance(state.nu().masses(), nu))
        });
        Trajectory {
            points: self.points,
            converged,
            iterations: state.step(),
            final_residual: residual,
            distance_to_closed_form,
            monotone_separation: self.monotone,
            max_mass_defect: self.max_defect,
            final_state: state,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::{ConflictSystem, ThetaKind};
    use super::*;
    use crate::measures::LevelMeasure;
    use crate::partition::PartitionScheme;

    fn pair() -> (LevelMeasure, LevelMeasure) {
        let scheme = Arc::new(PartitionScheme::uniform(2).unwrap());
        (
            LevelMeasure::new(Arc::clone(&scheme), 1, vec![0.5, 0.5]).unwrap(),
            LevelMeasure::new(scheme, 1, vec![0.2, 0.8]).unwrap(),
        )
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let (mu, nu) = pair();
        let system = ConflictSystem::new(ThetaKind::InnerProduct);
        let full = system
            .iterate(mu.clone(), nu.clone(), &IterateOptions::default())
            .unwrap();
        let options = IterateOptions {
            record: RecordPolicy::Every(3),
            ..IterateOptions::default()
        };
        let thin = system.iterate(mu.clone(), nu.clone(), &options).unwrap();
        assert_eq!(full.iterations, thin.iterations);
        assert_eq!(full.points.len(), full.iterations + 1);
        assert!(thin
            .points
            .iter()
            .skip(1)
            .rev()
            .skip(1)
            .all(|p| p.step % 3 == 0));
        assert_eq!(thin.points.last().unwrap().step, thin.iterations);
        let ends = IterateOptions {
            record: RecordPolicy::Endpoints,
            ..IterateOptions::default()
        };
        let ends = system.iterate(mu, nu, &ends).unwrap();
        assert_eq!(ends.points.len(), 2);
    }

    #[test]
    fn csv_layout() {
        let (mu, nu) = pair();
        let t = ConflictSystem::new(ThetaKind::InnerProduct)
            .iterate(mu, nu, &IterateOptions::default())
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,theta,W,z,residual,mu_1,mu_2,nu_1,nu_2"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,0.5,0.7"));
        assert!(first.contains(",,") || first.split(',').nth(4) == Some(""));
        assert_eq!(text.lines().count(), t.points.len() + 1);
    }
}
