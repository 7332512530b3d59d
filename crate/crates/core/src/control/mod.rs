//! Controlled redistributions of one opponent's measure and the constructions
//! built from them: reclaiming part of a lost cell, locating a reversal cell
//! below it, and the occupation strategy that confines the opponent to an
//! ε-small region.

mod distance;
mod reclaim;
mod reversal;
mod strategy;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    accurate_sum, limit_masses, CellSign, LevelMeasure, SignedLevelDecomposition,
};
use crate::partition::CellAddress;
use crate::SIGN_TOLERANCE;

pub use distance::{check_distance_monotone, DistanceReport};
pub use reclaim::{evaluate_reclaim, extremal_reclaim_plan, reclaim_bound, ReclaimOutcome};
pub use reversal::{
    find_reversal_cell, reversal_mass_bound, reversal_product_holds, ReversalCell, ReversalMass,
};
pub use strategy::{occupation_strategy, StrategyResult};

/// Tolerance for conservation checks on plans.
pub const CONSERVATION_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        })
    }
}

/// A checked inequality with both sides kept for the record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub label: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    /// Slack granted to non-strict relations.
    pub slack: f64,
    pub holds: bool,
}

impl Inequality {
    pub fn new(
        label: impl Into<String>,
        lhs: f64,
        relation: Relation,
        rhs: f64,
        slack: f64,
    ) -> Self {
        let holds = match relation {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs + slack,
            Relation::Gt => lhs > rhs,
            Relation::Ge => lhs >= rhs - slack,
        };
        Inequality {
            label: label.into(),
            lhs,
            relation,
            rhs,
            slack,
            holds,
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {:.12e} {} {:.12e} [{}]",
            self.label,
            self.lhs,
            self.relation,
            self.rhs,
            if self.holds { "ok" } else { "FAILS" }
        )
    }
}

/// One piece of a division of `[0, 1]` that need not be n-adic, with the
/// Lebesgue measure and both opponents' masses on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisionPiece {
    pub label: String,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

/// Finite division produced by a control move. Opponents stay uniform inside
/// each piece, so the closed-form limit is computed exactly as on a level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlledDivision {
    pieces: Vec<DivisionPiece>,
}

impl ControlledDivision {
    pub fn new(pieces: Vec<DivisionPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidPlan("division has no pieces".into()));
        }
        for p in &pieces {
            if !(p.lambda > 0.0) || !(p.mu >= 0.0) || !(p.nu >= 0.0) {
                return Err(Error::InvalidPlan(format!(
                    "piece {} has lambda {}, masses {} / {}",
                    p.label, p.lambda, p.mu, p.nu
                )));
            }
        }
        let division = ControlledDivision { pieces };
        for (what, total) in [
            ("lambda", division.total(|p| p.lambda)),
            ("mu", division.total(|p| p.mu)),
            ("nu", division.total(|p| p.nu)),
        ] {
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidPlan(format!(
                    "{what} over the division sums to {total}"
                )));
            }
        }
        Ok(division)
    }

    pub fn pieces(&self) -> &[DivisionPiece] {
        &self.pieces
    }

    fn total(&self, f: impl Fn(&DivisionPiece) -> f64) -> f64 {
        let v: Vec<f64> = self.pieces.iter().map(f).collect();
        accurate_sum(&v)
    }

    pub fn mu(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.mu).collect()
    }

    pub fn nu(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.nu).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.lambda).collect()
    }

    pub fn decomposition(&self) -> Result<SignedLevelDecomposition> {
        SignedLevelDecomposition::from_masses(&self.mu(), &self.nu(), SIGN_TOLERANCE)
    }

    /// Closed-form limit masses per piece.
    pub fn limits(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        limit_masses(&self.decomposition()?)
    }

    /// Lebesgue measure of the pieces with the given sign.
    pub fn lambda_of(&self, decomposition: &SignedLevelDecomposition, sign: CellSign) -> f64 {
        decomposition.weight_of(sign, &self.lambdas())
    }
}

/// How the replacement masses of a plan are laid out inside the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "layout")]
pub enum PlanLayout {
    /// One mass per descendant `depth` levels below the target, lexicographic.
    Cells { depth: usize },
    /// Two pieces: the left sub-interval holding `fraction` of the target's
    /// Lebesgue measure, then the rest.
    Split { fraction: f64 },
}

/// A change of `mu` inside one target cell that leaves it untouched elsewhere
/// and keeps the target's total mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedistributionPlan {
    target: CellAddress,
    layout: PlanLayout,
    masses: Vec<f64>,
    reclaimed: Vec<usize>,
    degenerate: bool,
}

impl RedistributionPlan {
    /// Plan over the descendants `depth` levels below `target`. The reclaimed
    /// set is the cells that receive positive mass.
    pub fn cells(target: CellAddress, depth: usize, masses: Vec<f64>) -> Result<Self> {
        check_masses(&masses)?;
        let reclaimed = (0..masses.len()).filter(|&i| masses[i] > 0.0).collect();
        Ok(RedistributionPlan {
            target,
            layout: PlanLayout::Cells { depth },
            masses,
            reclaimed,
            degenerate: false,
        })
    }

    /// Moves `mass` onto one child (1-based) of the target.
    pub fn onto_child(target: CellAddress, n: usize, child: usize, mass: f64) -> Result<Self> {
        if child < 1 || child > n {
            return Err(Error::IndexOutOfRange {
                index: child,
                position: target.level() + 1,
                n,
            });
        }
        let mut masses = vec![0.0; n];
        masses[child - 1] = mass;
        RedistributionPlan::cells(target, 1, masses)
    }

    /// The plan that rewrites `mu` with its own masses.
    pub fn identity(mu: &LevelMeasure, target: CellAddress) -> Result<Self> {
        mu.scheme().validate_address(&target)?;
        let depth = mu
            .level()
            .checked_sub(target.level())
            .ok_or(Error::LevelMismatch {
                expected: mu.level(),
                got: target.level(),
            })?;
        let n = mu.scheme().n();
        let span = n.pow(depth as u32);
        let start = target.position(n) * span;
        RedistributionPlan::cells(target, depth, mu.masses()[start..start + span].to_vec())
    }

    /// All of `mass` on the left sub-interval of relative size `fraction`.
    pub fn split(target: CellAddress, fraction: f64, mass: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidPlan(format!(
                "split fraction {fraction} is not in (0, 1]"
            )));
        }
        check_masses(&[mass])?;
        Ok(RedistributionPlan {
            target,
            layout: PlanLayout::Split { fraction },
            masses: vec![mass, 0.0],
            reclaimed: vec![0],
            degenerate: false,
        })
    }

    pub(crate) fn mark_degenerate(mut self, degenerate: bool) -> Self {
        self.degenerate = degenerate;
        self
    }

    pub fn target(&self) -> &CellAddress {
        &self.target
    }

    pub fn layout(&self) -> PlanLayout {
        self.layout
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Indices into [`masses`](Self::masses) forming the reclaimed region.
    pub fn reclaimed(&self) -> &[usize] {
        &self.reclaimed
    }

    /// Set when the plan sits exactly at the reclaim bound, where both limits
    /// vanish on the reclaimed region.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn planned_mass(&self) -> f64 {
        accurate_sum(&self.masses)
    }

    fn check_conserves(&self, held: f64) -> Result<()> {
        let planned = self.planned_mass();
        if (planned - held).abs() > CONSERVATION_TOLERANCE {
            return Err(Error::NonConservingPlan { planned, held });
        }
        Ok(())
    }
}

fn check_masses(masses: &[f64]) -> Result<()> {
    if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::InvalidPlan(format!(
            "replacement mass {m} is negative or not finite"
        )));
    }
    Ok(())
}

/// Applies a cell plan to `mu`. The plan's depth must bring the target down
/// to `mu`'s level.
pub fn redistribute(mu: &LevelMeasure, plan: &RedistributionPlan) -> Result<LevelMeasure> {
    let depth = match plan.layout {
        PlanLayout::Cells { depth } => depth,
        PlanLayout::Split { .. } => {
            return Err(Error::InvalidPlan(
                "a split plan leaves the n-adic level; evaluate it on a controlled division".into(),
            ))
        }
    };
    let scheme = mu.scheme();
    scheme.validate_address(&plan.target)?;
    if plan.target.level() + depth != mu.level() {
        return Err(Error::LevelMismatch {
            expected: mu.level(),
            got: plan.target.level() + depth,
        });
    }
    let n = scheme.n();
    let span = n.pow(depth as u32);
    if plan.masses.len() != span {
        return Err(Error::InvalidPlan(format!(
            "plan has {} masses, the target has {span} cells at level {}",
            plan.masses.len(),
            mu.level()
        )));
    }
    let start = plan.target.position(n) * span;
    plan.check_conserves(accurate_sum(&mu.masses()[start..start + span]))?;
    let mut masses = mu.masses().to_vec();
    masses[start..start + span].copy_from_slice(&plan.masses);
    LevelMeasure::new(std::sync::Arc::clone(scheme), mu.level(), masses)
}

/// Division obtained by applying a split plan to the pair `(mu, nu)` at the
/// target's level: every other cell is kept, the target becomes two pieces.
pub fn split_division(
    mu: &LevelMeasure,
    nu: &LevelMeasure,
    plan: &RedistributionPlan,
) -> Result<ControlledDivision> {
    mu.check_same_domain(nu)?;
    let fraction = match plan.layout {
        PlanLayout::Split { fraction } => fraction,
        PlanLayout::Cells { .. } => {
            return Err(Error::InvalidPlan("expected a split plan".into()));
        }
    };
    let scheme = mu.scheme();
    scheme.validate_address(&plan.target)?;
    if plan.target.level() != mu.level() {
        return Err(Error::LevelMismatch {
            expected: mu.level(),
            got: plan.target.level(),
        });
    }
    let n = scheme.n();
    let s = plan.target.position(n);
    plan.check_conserves(mu.masses()[s])?;
    let lambdas = scheme.level_lambdas(mu.level())?;
    let mut pieces = Vec::with_capacity(lambdas.len() + 1);
    for (c, &lambda) in lambdas.iter().enumerate() {
        let label = CellAddress::from_position(n, mu.level(), c).to_string();
        if c != s {
            pieces.push(DivisionPiece {
                label,
                lambda,
                mu: mu.masses()[c],
                nu: nu.masses()[c],
            });
            continue;
        }
        let nu_s = nu.masses()[c];
        pieces.push(DivisionPiece {
            label: format!("{label}:reclaimed"),
            lambda: lambda * fraction,
            mu: plan.masses[0],
            nu: nu_s * fraction,
        });
        if fraction < 1.0 {
            pieces.push(DivisionPiece {
                label: format!("{label}:rest"),
                lambda: lambda * (1.0 - fraction),
                mu: plan.masses[1],
                nu: nu_s * (1.0 - fraction),
            });
        }
    }
    ControlledDivision::new(pieces)
}
