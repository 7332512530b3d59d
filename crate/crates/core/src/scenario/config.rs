use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Kernel, ThetaKind, UpdateLaw};
use crate::error::{Error, Result};
use crate::measures::{MatrixKind, StochasticVector, StructureMatrix};
use crate::partition::{CellAddress, PartitionScheme};
use crate::random;

/// Levels deeper than this are refused by scenarios.
pub const MAX_SCENARIO_LEVEL: usize = 12;

/// A number written either as a float or as a string fraction like `"1/3"`.
/// The original spelling is kept so reports echo the config verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match self {
            Scalar::Int(i) => Ok(*i as f64),
            Scalar::Float(f) => Ok(*f),
            Scalar::Text(s) => parse_fraction(s),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

fn parse_fraction(text: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot read `{text}` as a number or fraction"));
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let a = f64::from_str(a.trim()).map_err(|_| bad())?;
            let b = f64::from_str(b.trim()).map_err(|_| bad())?;
            if b == 0.0 {
                return Err(bad());
            }
            a / b
        }
        None => f64::from_str(text.trim()).map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

fn values(row: &[Scalar]) -> Result<Vec<f64>> {
    row.iter().map(Scalar::value).collect()
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub n: usize,
    /// Lebesgue ratio rows; omitted means uniform `1/n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<Scalar>>>,
    #[serde(default = "default_true")]
    pub repeat_last: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub rows: Vec<Vec<Scalar>>,
    /// Row appended after the rows of a partial matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<Vec<Scalar>>,
}

impl MatrixSpec {
    pub fn build(&self) -> Result<StructureMatrix> {
        let rows = self
            .rows
            .iter()
            .map(|r| values(r))
            .collect::<Result<Vec<_>>>()?;
        let matrix = StructureMatrix::from_rows(self.kind, rows)?;
        match &self.continuation {
            None => Ok(matrix),
            Some(row) => matrix.continued(StochasticVector::new(values(row)?)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaName {
    InnerProduct,
    #[default]
    Bhattacharyya,
    Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default)]
    pub theta: ThetaName,
    /// Kernel over the level's cells, required when `theta = "kernel"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<Scalar>>>,
    #[serde(default)]
    pub law: UpdateLaw,
    #[serde(default = "DynamicsSpec::default_tol")]
    pub tol: f64,
    #[serde(default = "DynamicsSpec::default_max_iter")]
    pub max_iter: usize,
    /// Keep every m-th step in the trajectory CSV.
    #[serde(default = "DynamicsSpec::default_record_every")]
    pub record_every: usize,
    #[serde(default = "DynamicsSpec::default_sign_tol")]
    pub sign_tol: f64,
}

impl DynamicsSpec {
    fn default_tol() -> f64 {
        1e-10
    }
    fn default_max_iter() -> usize {
        100_000
    }
    fn default_record_every() -> usize {
        1
    }
    fn default_sign_tol() -> f64 {
        crate::SIGN_TOLERANCE
    }

    pub fn theta_kind(&self) -> Result<ThetaKind> {
        match (self.theta, &self.kernel) {
            (ThetaName::InnerProduct, None) => Ok(ThetaKind::InnerProduct),
            (ThetaName::Bhattacharyya, None) => Ok(ThetaKind::Bhattacharyya),
            (ThetaName::Kernel, Some(rows)) => {
                let rows = rows.iter().map(|r| values(r)).collect::<Result<Vec<_>>>()?;
                Ok(ThetaKind::Kernel(Kernel::new(rows)?))
            }
            (ThetaName::Kernel, None) => Err(Error::Config(
                "theta = \"kernel\" needs a kernel matrix".into(),
            )),
            (_, Some(_)) => Err(Error::Config(
                "a kernel matrix is only used with theta = \"kernel\"".into(),
            )),
        }
    }
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        DynamicsSpec {
            enabled: true,
            theta: ThetaName::default(),
            kernel: None,
            law: UpdateLaw::default(),
            tol: Self::default_tol(),
            max_iter: Self::default_max_iter(),
            record_every: Self::default_record_every(),
            sign_tol: Self::default_sign_tol(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Cell lost by `mu`, 1-based digits. Its depth is the level used for
    /// reclaiming; its first digit is the index used for the reversal search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<usize>>,
    /// Reclaimed sizes as fractions of the reclaim bound.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reclaim_fractions: Vec<f64>,
    /// Deepest level for the reversal mass sweep (self-similar pairs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reversal_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Seed for randomly drawn matrices; only used when `mu` or `nu` is
    /// omitted.
    #[serde(default)]
    pub seed: u64,
    pub scheme: SchemeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Built objects a scenario runs on.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub scheme: Arc<PartitionScheme>,
    pub p: StructureMatrix,
    pub r: StructureMatrix,
    pub theta: ThetaKind,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Level used by single-level pipelines.
    pub fn primary_level(&self) -> usize {
        self.level.or(self.sweep.map(|s| s.from)).unwrap_or(1)
    }

    /// Levels the pipeline visits, shallow first.
    pub fn levels(&self) -> Vec<usize> {
        match self.sweep {
            Some(s) => (s.from..=s.to).collect(),
            None => vec![self.primary_level()],
        }
    }

    /// Range and consistency checks that do not need the built objects.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        if self.name.trim().is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if self.level.is_some() && self.sweep.is_some() {
            return fail("give either `level` or `sweep`, not both".into());
        }
        if let Some(level) = self.level {
            if level == 0 || level > MAX_SCENARIO_LEVEL {
                return fail(format!(
                    "level {level} is outside [1, {MAX_SCENARIO_LEVEL}]"
                ));
            }
        }
        if let Some(SweepSpec { from, to }) = self.sweep {
            if from == 0 || from > to || to > MAX_SCENARIO_LEVEL {
                return fail(format!(
                    "sweep {from}..{to} is not a range within [1, {MAX_SCENARIO_LEVEL}]"
                ));
            }
        }
        let d = &self.dynamics;
        if !(d.tol > 0.0) {
            return fail(format!("dynamics.tol must be positive, got {}", d.tol));
        }
        if d.max_iter == 0 {
            return fail("dynamics.max_iter must be at least 1".into());
        }
        if d.record_every == 0 {
            return fail("dynamics.record_every must be at least 1".into());
        }
        if !(d.sign_tol >= 0.0 && d.sign_tol < 1e-3) {
            return fail(format!(
                "dynamics.sign_tol {} is outside [0, 1e-3)",
                d.sign_tol
            ));
        }
        if let Some(c) = &self.control {
            if let Some(t) = &c.target {
                if t.is_empty() {
                    return fail("control.target must name a cell".into());
                }
            }
            if !c.reclaim_fractions.is_empty() && c.target.is_none() {
                return fail("control.reclaim_fractions needs control.target".into());
            }
            if c.reversal_depth.is_some() && c.target.is_none() {
                return fail("control.reversal_depth needs control.target".into());
            }
            if let Some(f) = c
                .reclaim_fractions
                .iter()
                .find(|f| !(**f > 0.0 && **f <= 1.0))
            {
                return fail(format!("reclaim fraction {f} is outside (0, 1]"));
            }
            if let Some(k) = c.reversal_depth {
                if k == 0 || k > MAX_SCENARIO_LEVEL {
                    return fail(format!(
                        "control.reversal_depth {k} is outside [1, {MAX_SCENARIO_LEVEL}]"
                    ));
                }
            }
            if let Some(eps) = c.epsilon {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::EpsilonOutOfRange(eps).context(self.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Builds the scheme, both matrices and the conflict exponent. Missing
    /// matrices are drawn from the seed, one row per visited level.
    pub fn resolve(&self) -> Result<Resolved> {
        let ctx = |what: &str| format!("scenario {}: {what}", self.name);
        let rows = match &self.scheme.rows {
            Some(rows) => rows.iter().map(|r| values(r)).collect::<Result<Vec<_>>>()?,
            None => {
                if self.scheme.n < 2 {
                    return Err(Error::BranchingTooSmall(self.scheme.n).context(ctx("scheme")));
                }
                vec![vec![1.0 / self.scheme.n as f64; self.scheme.n]]
            }
        };
        let scheme = PartitionScheme::new(self.scheme.n, rows, self.scheme.repeat_last)
            .map_err(|e| e.context(ctx("scheme")))?;
        // a fixed row count keeps the draw the same whatever levels are run
        let depth = MAX_SCENARIO_LEVEL;
        let mut rng = random::seeded(self.seed);
        let mut matrix = |spec: &Option<MatrixSpec>, what: &str| -> Result<StructureMatrix> {
            match spec {
                Some(spec) => spec.build().map_err(|e| e.context(ctx(what))),
                None => random::structure_matrix(&mut rng, MatrixKind::Similar, scheme.n(), depth),
            }
        };
        let p = matrix(&self.mu, "mu")?;
        let r = matrix(&self.nu, "nu")?;
        for (m, what) in [(&p, "mu"), (&r, "nu")] {
            if m.n() != scheme.n() {
                return Err(Error::SchemeMismatch.context(ctx(what)));
            }
            for level in self.levels() {
                scheme
                    .check_level(level)
                    .map_err(|e| e.context(ctx("scheme")))?;
                scheme
                    .cell_count(level)
                    .map_err(|e| e.context(ctx("scheme")))?;
                m.row(level).map_err(|e| e.context(ctx(what)))?;
            }
        }
        if let Some(target) = self.control.as_ref().and_then(|c| c.target.as_ref()) {
            scheme
                .validate_address(&CellAddress::new(target.clone()))
                .map_err(|e| e.context(ctx("control.target")))?;
        }
        let theta = self
            .dynamics
            .theta_kind()
            .map_err(|e| e.context(ctx("dynamics")))?;
        Ok(Resolved {
            scheme: Arc::new(scheme),
            p,
            r,
            theta,
        })
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (n = {}, levels {:?})",
            self.name,
            self.scheme.n,
            self.levels()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
level = 2

[scheme]
n = 3

[mu]
kind = "self-similar"
rows = [["1/3", "1/3", "1/3"]]

[nu]
kind = "self-similar"
rows = [["2/3", "1/6", "1/6"]]
"#;

    #[test]
    fn fractions() {
        assert_close!(parse_fraction("1/3").unwrap(), 1.0 / 3.0, 0.0);
        assert_eq!(parse_fraction(" 0.25 ").unwrap(), 0.25);
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("a/b").is_err());
        assert_eq!(Scalar::Int(1).value().unwrap(), 1.0);
    }

    #[test]
    fn minimal_config() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.levels(), vec![2]);
        assert_eq!(c.dynamics.tol, 1e-10);
        assert_eq!(c.dynamics.max_iter, 100_000);
        let r = c.resolve().unwrap();
        assert_eq!(r.theta, ThetaKind::Bhattacharyya);
        assert_close!(r.r.rows()[0][0], 2.0 / 3.0, 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nextra = 1\n");
        assert!(matches!(
            ScenarioConfig::from_toml(&text),
            Err(Error::Config(_))
        ));
        let text = MINIMAL.replace("[scheme]\nn = 3", "[scheme]\nn = 3\nratio = 1");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn echo_round_trip() {
        let c = ScenarioConfig::from_toml(MINIMAL).unwrap();
        let again = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn partial_matrix_too_shallow() {
        let text = MINIMAL.replace("[mu]\nkind = \"self-similar\"", "[mu]\nkind = \"partial\"");
        let err = ScenarioConfig::from_toml(&text)
            .unwrap()
            .resolve()
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("level 2"), "{msg}");
        assert!(err.is_validation());
    }

    #[test]
    fn range_checks() {
        let bad = MINIMAL.replace("level = 2", "level = 0");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
        let bad = format!("{MINIMAL}\n[control]\nepsilon = 1.5\n");
        assert!(ScenarioConfig::from_toml(&bad).is_err());
        let bad = format!("{MINIMAL}\n[dynamics]\ntheta = \"kernel\"\n");
        assert!(ScenarioConfig::from_toml(&bad).unwrap().resolve().is_err());
    }

    #[test]
    fn random_draw_ignores_levels() {
        let shallow =
            ScenarioConfig::from_toml("name = \"r\"\nseed = 5\nlevel = 1\n[scheme]\nn = 3\n")
                .unwrap();
        let mut deep = shallow.clone();
        deep.level = Some(4);
        let (a, b) = (shallow.resolve().unwrap(), deep.resolve().unwrap());
        assert_eq!(a.p, b.p);
        assert_eq!(a.r, b.r);
    }
}
