use std::fs;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Resolved, ScenarioConfig};
use crate::batch::{self, Execution};
use crate::control::{
    evaluate_reclaim, extremal_reclaim_plan, find_reversal_cell, occupation_strategy,
    reclaim_bound, reversal_mass_bound, Inequality, ReclaimOutcome, Relation, ReversalCell,
    ReversalMass, StrategyResult,
};
use crate::dynamics::{
    classify_masses, ConflictSystem, FixedPointKind, IterateOptions, RecordPolicy, Trajectory,
};
use crate::error::{Error, Result};
use crate::measures::{
    half_l1, limit_masses, measure_from_matrix, CellSign, LevelMeasure, MatrixKind,
    SignedLevelDecomposition,
};
use crate::partition::CellAddress;

pub const SCHEMA_VERSION: u32 = 1;

/// Per-cell vectors are written into reports only up to this many cells.
pub const REPORT_CELL_LIMIT: usize = 729;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub cells: usize,
    pub variation_distance: f64,
    pub fixed_point: FixedPointKind,
    pub plus_cells: usize,
    pub minus_cells: usize,
    pub zero_cells: usize,
    /// Lebesgue measure of the cells `mu` wins, loses, and ties.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub lambda_zero: f64,
    /// Lebesgue measure of the closed-form limit supports; absent when the
    /// measures coincide.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_limit_support: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_limit_support: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_limit: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_limit: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub level: usize,
    pub theta: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance_to_closed_form: Option<f64>,
    pub monotone_separation: bool,
    pub max_mass_defect: f64,
    /// Mass each opponent still holds on tied cells at termination.
    pub mu_on_tied_cells: f64,
    pub nu_on_tied_cells: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_mu: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_nu: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReclaimSummary {
    pub fraction_of_bound: f64,
    pub bound: f64,
    pub sub_lambda: f64,
    pub degenerate: bool,
    pub mu_reclaimed: f64,
    pub nu_reclaimed: f64,
    pub reclaimed_sign: CellSign,
    pub mu_limit: f64,
    pub nu_limit: f64,
}

impl ReclaimSummary {
    fn new(fraction_of_bound: f64, o: &ReclaimOutcome) -> Self {
        ReclaimSummary {
            fraction_of_bound,
            bound: o.bound,
            sub_lambda: o.sub_lambda,
            degenerate: o.degenerate,
            mu_reclaimed: o.mu_reclaimed,
            nu_reclaimed: o.nu_reclaimed,
            reclaimed_sign: o.reclaimed_sign,
            mu_limit: o.mu_limit,
            nu_limit: o.nu_limit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversalReport {
    pub cell: ReversalCell,
    pub masses: Vec<ReversalMass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<CellAddress>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reclaim_bound: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reclaim: Vec<ReclaimSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reversal: Option<ReversalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyResult>,
}

/// Everything a scenario run computed. All numbers are recomputed from the
/// built measures, none are copied from the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub levels: Vec<LevelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlReport>,
    pub checks: Vec<Inequality>,
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Inequality> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// What a run should compute beyond the per-level closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub dynamics: bool,
    pub control: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        dynamics: true,
        control: true,
    };
    pub const LIMITS: Stages = Stages {
        dynamics: false,
        control: false,
    };
}

fn opt_vec(v: &[f64]) -> Option<Vec<f64>> {
    (v.len() <= REPORT_CELL_LIMIT).then(|| v.to_vec())
}

/// Decomposition and closed-form limit of one level.
pub fn level_report(
    mu: &LevelMeasure,
    nu: &LevelMeasure,
    sign_tol: f64,
) -> Result<(LevelReport, SignedLevelDecomposition)> {
    let lambdas = mu.scheme().level_lambdas(mu.level())?;
    let d = SignedLevelDecomposition::from_masses(mu.masses(), nu.masses(), sign_tol)?;
    let limits = match limit_masses(&d) {
        Ok(l) => Some(l),
        Err(Error::IdenticalMeasures) => None,
        Err(e) => return Err(e),
    };
    let support = |v: &[f64]| {
        let terms: Vec<f64> = v
            .iter()
            .zip(&lambdas)
            .filter(|(m, _)| **m > 0.0)
            .map(|(_, l)| *l)
            .collect();
        crate::measures::accurate_sum(&terms)
    };
    let report = LevelReport {
        level: mu.level(),
        cells: lambdas.len(),
        variation_distance: half_l1(mu.masses(), nu.masses()),
        fixed_point: classify_masses(mu.masses(), nu.masses(), 1e-12),
        plus_cells: d.plus().len(),
        minus_cells: d.minus().len(),
        zero_cells: d.zero().len(),
        lambda_plus: d.weight_of(CellSign::Plus, &lambdas),
        lambda_minus: d.weight_of(CellSign::Minus, &lambdas),
        lambda_zero: d.weight_of(CellSign::Zero, &lambdas),
        mu_limit_support: limits.as_ref().map(|(m, _)| support(m)),
        nu_limit_support: limits.as_ref().map(|(_, n)| support(n)),
        mu_limit: limits.as_ref().and_then(|(m, _)| opt_vec(m)),
        nu_limit: limits.as_ref().and_then(|(_, n)| opt_vec(n)),
    };
    Ok((report, d))
}

fn limit_checks(
    level: usize,
    d: &SignedLevelDecomposition,
    checks: &mut Vec<Inequality>,
) -> Result<()> {
    let (mu_inf, nu_inf) = match limit_masses(d) {
        Ok(l) => l,
        Err(Error::IdenticalMeasures) => return Ok(()),
        Err(e) => return Err(e),
    };
    let total = |v: &[f64]| crate::measures::accurate_sum(v);
    checks.push(Inequality::new(
        format!("level {level}: |mu_inf total - 1|"),
        (total(&mu_inf) - 1.0).abs(),
        Relation::Le,
        0.0,
        1e-12,
    ));
    checks.push(Inequality::new(
        format!("level {level}: |nu_inf total - 1|"),
        (total(&nu_inf) - 1.0).abs(),
        Relation::Le,
        0.0,
        1e-12,
    ));
    let overlap: f64 = mu_inf.iter().zip(&nu_inf).map(|(a, b)| a * b).sum();
    checks.push(Inequality::new(
        format!("level {level}: limit overlap sum mu_inf nu_inf"),
        overlap,
        Relation::Le,
        0.0,
        0.0,
    ));
    Ok(())
}

fn trajectory_summary(t: &Trajectory, level: usize, theta: &str) -> TrajectorySummary {
    let last = t.final_state();
    let d = last.decomposition();
    TrajectorySummary {
        level,
        theta: theta.to_string(),
        iterations: t.iterations,
        converged: t.converged,
        final_residual: t.final_residual,
        distance_to_closed_form: t.distance_to_closed_form,
        monotone_separation: t.monotone_separation,
        max_mass_defect: t.max_mass_defect,
        mu_on_tied_cells: d.weight_of(CellSign::Zero, last.mu().masses()),
        nu_on_tied_cells: d.weight_of(CellSign::Zero, last.nu().masses()),
        final_mu: opt_vec(last.mu().masses()),
        final_nu: opt_vec(last.nu().masses()),
    }
}

/// Per-cell table of one level: masses, signs and the closed-form limit
/// (blank when the measures coincide).
pub fn write_limits_csv<W: Write>(
    writer: W,
    mu: &LevelMeasure,
    nu: &LevelMeasure,
    d: &SignedLevelDecomposition,
) -> Result<()> {
    let n = mu.scheme().n();
    let lambdas = mu.scheme().level_lambdas(mu.level())?;
    let limits = limit_masses(d).ok();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "cell", "lambda", "mu", "nu", "d", "sign", "mu_inf", "nu_inf",
    ])?;
    for c in 0..lambdas.len() {
        let sign = match d.sign(c) {
            CellSign::Plus => "+",
            CellSign::Minus => "-",
            CellSign::Zero => "0",
        };
        let (a, b) = match &limits {
            Some((a, b)) => (a[c].to_string(), b[c].to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            CellAddress::from_position(n, mu.level(), c).to_string(),
            lambdas[c].to_string(),
            mu.masses()[c].to_string(),
            nu.masses()[c].to_string(),
            d.differences()[c].to_string(),
            sign.to_string(),
            a,
            b,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory of the scenario's primary level.
pub fn simulate(config: &ScenarioConfig, resolved: &Resolved) -> Result<Trajectory> {
    let level = config.primary_level();
    let mu = measure_from_matrix(&resolved.p, &resolved.scheme, level)?;
    let nu = measure_from_matrix(&resolved.r, &resolved.scheme, level)?;
    let system = ConflictSystem::new(resolved.theta.clone())
        .with_law(config.dynamics.law)
        .with_sign_tolerance(config.dynamics.sign_tol);
    let options = IterateOptions {
        tol: config.dynamics.tol,
        max_iter: config.dynamics.max_iter,
        record: match config.dynamics.record_every {
            1 => RecordPolicy::All,
            m => RecordPolicy::Every(m),
        },
    };
    system.iterate(mu, nu, &options).map_err(|e| {
        e.context(format!(
            "scenario {}: dynamics at level {level}",
            config.name
        ))
    })
}

fn control_report(
    config: &ScenarioConfig,
    resolved: &Resolved,
    checks: &mut Vec<Inequality>,
) -> Result<Option<ControlReport>> {
    let Some(spec) = &config.control else {
        return Ok(None);
    };
    let ctx = |what: &str| format!("scenario {}: {what}", config.name);
    let target = spec.target.clone().map(CellAddress::new);
    let mut report = ControlReport {
        target: target.clone(),
        reclaim_bound: None,
        reclaim: Vec::new(),
        reversal: None,
        strategy: None,
    };
    if let (Some(s), false) = (&target, spec.reclaim_fractions.is_empty()) {
        let mu1 = measure_from_matrix(&resolved.p, &resolved.scheme, s.level())?;
        let nu1 = measure_from_matrix(&resolved.r, &resolved.scheme, s.level())?;
        let bound = reclaim_bound(&mu1, &nu1, s).map_err(|e| e.context(ctx("reclaim")))?;
        report.reclaim_bound = Some(bound);
        for &f in &spec.reclaim_fractions {
            let plan = extremal_reclaim_plan(&mu1, &nu1, s, f * bound)
                .map_err(|e| e.context(ctx("reclaim")))?;
            let out = evaluate_reclaim(&mu1, &nu1, &plan)?;
            if plan.is_degenerate() {
                checks.push(Inequality::new(
                    format!("reclaim at {f} x bound: mu_inf on reclaimed"),
                    out.mu_limit,
                    Relation::Le,
                    0.0,
                    1e-12,
                ));
                checks.push(Inequality::new(
                    format!("reclaim at {f} x bound: nu_inf on reclaimed"),
                    out.nu_limit,
                    Relation::Le,
                    0.0,
                    1e-12,
                ));
            } else {
                checks.push(Inequality::new(
                    format!("reclaim at {f} x bound: mu_inf on reclaimed"),
                    out.mu_limit,
                    Relation::Gt,
                    0.0,
                    0.0,
                ));
                checks.push(Inequality::new(
                    format!("reclaim at {f} x bound: nu_inf on reclaimed"),
                    out.nu_limit,
                    Relation::Le,
                    0.0,
                    0.0,
                ));
            }
            report.reclaim.push(ReclaimSummary::new(f, &out));
        }
    }
    if let (Some(s), Some(k_max)) = (&target, spec.reversal_depth) {
        if resolved.p.kind() != MatrixKind::SelfSimilar
            || resolved.r.kind() != MatrixKind::SelfSimilar
        {
            return Err(Error::Config(ctx(
                "the reversal search needs self-similar mu and nu",
            )));
        }
        let index = s.indices()[0];
        let cell = find_reversal_cell(&resolved.p, &resolved.r, index)
            .map_err(|e| e.context(ctx("reversal")))?;
        let masses = (1..=k_max)
            .map(|k| reversal_mass_bound(&resolved.p, &resolved.r, index, k))
            .collect::<Result<Vec<_>>>()?;
        for m in &masses {
            checks.push(Inequality::new(
                format!(
                    "reversal: limit mass below index {index} at level {}",
                    m.level
                ),
                m.mass,
                Relation::Le,
                m.p_s,
                1e-12,
            ));
        }
        report.reversal = Some(ReversalReport { cell, masses });
    }
    if let Some(eps) = spec.epsilon {
        let out = occupation_strategy(&resolved.p, &resolved.r, eps, &resolved.scheme)
            .map_err(|e| e.context(ctx("strategy")))?;
        checks.extend(out.checks.iter().cloned().map(|mut c| {
            c.label = format!("strategy: {}", c.label);
            c
        }));
        report.strategy = Some(out);
    }
    Ok(Some(report))
}

/// Runs the scenario pipeline: closed form per level, then (as requested)
/// dynamics on the primary level and the control block. Artifacts go to
/// `config.output.dir` when it is set.
pub fn run_scenario_with(config: &ScenarioConfig, stages: Stages) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    let resolved = config.resolve()?;
    let mut levels = Vec::new();
    let mut checks = Vec::new();
    let mut primary = None;
    for level in config.levels() {
        let mu = measure_from_matrix(&resolved.p, &resolved.scheme, level)?;
        let nu = measure_from_matrix(&resolved.r, &resolved.scheme, level)?;
        let (report, d) = level_report(&mu, &nu, config.dynamics.sign_tol)?;
        limit_checks(level, &d, &mut checks)?;
        levels.push(report);
        if level == config.primary_level() {
            primary = Some((mu, nu, d));
        }
    }
    for w in levels.windows(2) {
        checks.push(Inequality::new(
            format!("D_{} <= D_{}", w[0].level, w[1].level),
            w[0].variation_distance,
            Relation::Le,
            w[1].variation_distance,
            1e-12,
        ));
    }

    let trajectory = if stages.dynamics && config.dynamics.enabled {
        let t = simulate(config, &resolved)?;
        let (_, _, d) = primary.as_ref().expect("primary level visited");
        if let (Some(dist), true) = (t.distance_to_closed_form, d.zero().is_empty()) {
            checks.push(Inequality::new(
                "iterate vs closed form (sup norm)",
                dist,
                Relation::Le,
                1e-6,
                0.0,
            ));
        }
        Some(t)
    } else {
        None
    };
    let control = if stages.control {
        control_report(config, &resolved, &mut checks)?
    } else {
        None
    };

    if let Some(dir) = &config.output.dir {
        fs::create_dir_all(dir)?;
        let (mu, nu, d) = primary.as_ref().expect("primary level visited");
        write_limits_csv(fs::File::create(dir.join("limits.csv"))?, mu, nu, d)?;
        if let Some(t) = &trajectory {
            t.write_csv(fs::File::create(dir.join("trajectory.csv"))?)?;
        }
    }

    let summary = trajectory
        .as_ref()
        .map(|t| trajectory_summary(t, config.primary_level(), resolved.theta.name()));
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: config.clone(),
        levels,
        trajectory: summary,
        control,
        checks,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &config.output.dir {
        fs::write(dir.join("report.json"), report.to_json()?)?;
    }
    Ok(report)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    run_scenario_with(config, Stages::ALL)
}

/// One closed-form report per level of `from..=to`; levels run concurrently
/// and each writes to its own `level-k` subdirectory when an output
/// directory is set.
pub fn sweep_depths(
    config: &ScenarioConfig,
    from: usize,
    to: usize,
    execution: Execution,
) -> Result<Vec<RunReport>> {
    if from == 0 || from > to {
        return Err(Error::Config(format!("sweep range {from}..{to} is empty")));
    }
    let levels: Vec<usize> = (from..=to).collect();
    let results = batch::map(execution, &levels, |&k| {
        let mut c = config.clone();
        c.level = Some(k);
        c.sweep = None;
        c.output.dir = config
            .output
            .dir
            .as_ref()
            .map(|d| d.join(format!("level-{k}")));
        run_scenario_with(&c, Stages::LIMITS)
    });
    results.into_iter().collect()
}

/// Level measures of both opponents for every level the scenario visits.
pub fn level_measures(config: &ScenarioConfig) -> Result<Vec<(LevelMeasure, LevelMeasure)>> {
    let resolved = config.resolve()?;
    config
        .levels()
        .into_iter()
        .map(|k| {
            Ok((
                measure_from_matrix(&resolved.p, &resolved.scheme, k)?,
                measure_from_matrix(&resolved.r, &resolved.scheme, k)?,
            ))
        })
        .collect()
}
