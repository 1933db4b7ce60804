//! Experiment configuration: a flat, human-editable TOML document with one
//! level of sections, overridable from the command line.

use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::TimeGrid;
use crate::error::{Error, Result};
use crate::operator::{
    build_operator, harmonic_potential,Boundary, OperatorKind, Scaling, SpectralOperator,
};
use crate::space::{build_grid_space, Space};
use crate::squarefn::{default_t_max, default_t_min, SquareGrids};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceConfig {
    pub dims: u8,
    pub extent: f64,
    pub count: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig { dims: 1, extent: 16.0, count: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    /// `shift | laplacian | schrodinger | fractional`.
    pub kind: String,
    /// `dirichlet | periodic`.
    pub boundary: String,
    /// Harmonic potential strength for `schrodinger` / `fractional`.
    pub omega: f64,
    /// The constant of the `shift` kind.
    pub shift: f64,
    /// Even differential order of the `fractional` kind.
    pub m_pow: u32,
    /// Semigroup order `m >= 2`.
    pub m: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            kind: "schrodinger".into(),
            boundary: "dirichlet".into(),
            omega: 1.0,
            shift: 0.0,
            m_pow: 2,
            m: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Grid ratio for square functions and tail checks.
    pub ratio: f64,
    /// Grid ratio for the vertical identity suite.
    pub identity_ratio: f64,
    /// Grid ratio for the Calderon split and the lower-bound check.
    pub split_ratio: f64,
    /// Optional overrides of the automatic time bounds.
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { ratio: 1.02, identity_ratio: 1.01, split_ratio: 1.005, t_min: None, t_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suites: Vec<String>,
    pub out: String,
    pub seed: u64,
    /// Random test fields per suite.
    pub fields: usize,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { suites: vec![], out: "out".into(), seed: 42, fields: 20, parallel: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeSuiteConfig {
    /// Number of cancellative moments `N`.
    pub n_mol: usize,
}

impl Default for MoleculeSuiteConfig {
    fn default() -> Self {
        MoleculeSuiteConfig { n_mol: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub shifts: Vec<f64>,
    pub fields: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { shifts: vec![0.0, 0.25, 1.0, 4.0], fields: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identity,
    Gge,
    Decay,
    Molecules,
    MainTheorem,
    GapSweep,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::Identity => "identity",
            Suite::Gge => "gge",
            Suite::Decay => "decay",
            Suite::Molecules => "molecules",
            Suite::MainTheorem => "main-theorem",
            Suite::GapSweep => "gap-sweep",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Suite::Identity),
            "gge" => Ok(Suite::Gge),
            "decay" => Ok(Suite::Decay),
            "molecules" => Ok(Suite::Molecules),
            "main-theorem" | "main" => Ok(Suite::MainTheorem),
            "gap-sweep" | "sweep" => Ok(Suite::GapSweep),
            other => Err(Error::Config(format!("unknown suite '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub operator: OperatorConfig,
    pub quadrature: QuadratureConfig,
    pub run: RunConfig,
    pub molecules: MoleculeSuiteConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    /// Canonical substrate per suite when no config file is given: the
    /// off-diagonal profiles want the plain heat semigroup, the gap sweep
    /// starts from a gapless operator, everything else runs on the gapped
    /// oscillator.
    pub fn canonical_for(suite: Suite) -> Self {
        let mut cfg = ExperimentConfig::default();
        match suite {
            Suite::Gge => {
                cfg.operator.kind = "laplacian".into();
                // finer spacing keeps more of the Gaussian-decay window
                // above the sub-grid time floor
                cfg.space = SpaceConfig { dims: 1, extent: 16.0, count: 256 };
            }
            Suite::GapSweep => {
                cfg.operator.kind = "laplacian".into();
                cfg.operator.boundary = "periodic".into();
            }
            _ => {}
        }
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.run.suites {
            Suite::from_str(s)?;
        }
        if self.space.count == 0 || self.space.extent <= 0.0 {
            return Err(Error::Config("space needs count >= 1 and extent > 0".into()));
        }
        let bad_ratio = |r: f64| r.is_nan() || r <= 1.0;
        if bad_ratio(self.quadrature.ratio)
            || bad_ratio(self.quadrature.identity_ratio)
            || bad_ratio(self.quadrature.split_ratio)
        {
            return Err(Error::Config("quadrature ratios must exceed 1".into()));
        }
        if self.molecules.n_mol == 0 {
            return Err(Error::Config("molecules.n_mol must be at least 1".into()));
        }
        self.operator_kind()?;
        self.boundary()?;
        Ok(())
    }

    pub fn suites(&self) -> Result<Vec<Suite>> {
        self.run.suites.iter().map(|s| Suite::from_str(s)).collect()
    }

    pub fn boundary(&self) -> Result<Boundary> {
        match self.operator.boundary.as_str() {
            "dirichlet" => Ok(Boundary::Dirichlet),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::Config(format!("unknown boundary '{other}'"))),
        }
    }

    pub fn operator_kind(&self) -> Result<OperatorKind> {
        Ok(match self.operator.kind.as_str() {
            "shift" => OperatorKind::Shift { c: self.operator.shift },
            "laplacian" => OperatorKind::Laplacian,
            "schrodinger" => OperatorKind::Schrodinger { potential: vec![] },
            "fractional" => OperatorKind::Fractional { m_pow: self.operator.m_pow, potential: vec![] },
            other => return Err(Error::Config(format!("unknown operator kind '{other}'"))),
        })
    }

    pub fn build_space(&self) -> Result<Arc<Space>> {
        Ok(Arc::new(build_grid_space(self.space.dims, self.space.extent, self.space.count)?))
    }

    /// Assembles and decomposes the configured operator.
    pub fn build_operator(&self, space: &Arc<Space>) -> Result<SpectralOperator> {
        let kind = match self.operator_kind()? {
            OperatorKind::Schrodinger { .. } => {
                OperatorKind::Schrodinger { potential: harmonic_potential(space, self.operator.omega) }
            }
            OperatorKind::Fractional { m_pow, .. } => OperatorKind::Fractional {
                m_pow,
                potential: harmonic_potential(space, self.operator.omega),
            },
            other => other,
        };
        let matrix = build_operator(space, &kind, self.boundary()?)?;
        SpectralOperator::decompose(&matrix, Arc::clone(space), self.operator.m)
    }

    /// Square-function grid pair at the given ratio, honoring overrides.
    pub fn grids(&self, op: &SpectralOperator, ratio: f64) -> Result<SquareGrids> {
        let t_min = self.quadrature.t_min.unwrap_or_else(|| default_t_min(op, Scaling::OrderM));
        let t_max = self.quadrature.t_max.unwrap_or_else(|| default_t_max(op, Scaling::OrderM));
        Ok(SquareGrids::new(TimeGrid::new(t_min, 1.0, ratio)?, TimeGrid::new(1.0, t_max, ratio)?))
    }
}
