//! TOML problem configuration: one flat file per problem.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asd::AsdParams;
use crate::benchmarks::{clamped_tri, girder, gripper, lbracket, ClampedTriSpec, GirderSpec, GripperSpec, LBracketSpec};
use crate::elasticity::MaterialParams;
use crate::error::{Error, Result};
use crate::levelset::{LevelSetParams, WaveCoefficients};
use crate::optimizer::{FilterParams, RunConfig, Stationarity};
use crate::problem::{Problem, ProblemSetup};
use crate::surrogate::QuadraticSurrogate;
use crate::weights::{WeightOrder, WeightParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Girder,
    Gripper,
    Lbracket,
    ClampedTri,
    Surrogate,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Girder => "girder",
            ProblemKind::Gripper => "gripper",
            ProblemKind::Lbracket => "lbracket",
            ProblemKind::ClampedTri => "clamped_tri",
            ProblemKind::Surrogate => "surrogate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelSetSection {
    pub c11: f64,
    pub c22: f64,
    pub c12: f64,
    /// Heaviside sharpness b
    pub b: f64,
    /// B
    pub damping: f64,
    pub ds: f64,
    pub phi0: f64,
    pub phi_minus1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterParams>,
}

impl Default for LevelSetSection {
    fn default() -> Self {
        Self {
            c11: 0.014,
            c22: 0.014,
            c12: 0.0,
            b: 1.0,
            damping: 0.001,
            ds: 1.0,
            phi0: 1.0,
            phi_minus1: 1.0,
            filter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSection {
    /// M_q
    pub inertia: f64,
    /// B_q
    pub damping: f64,
    /// K_q
    pub stiffness: f64,
    pub eps: f64,
    pub order: WeightOrder,
    pub initial_ratio: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self {
            inertia: 1.0,
            damping: 1.0,
            stiffness: 1.0,
            eps: 1e-3,
            order: WeightOrder::Reversed,
            initial_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub max_iterations: usize,
    pub window: usize,
    pub tol: f64,
    pub tol_g: f64,
    pub penalty: f64,
    pub penalty_growth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty_max: Option<f64>,
    pub lambda0: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let st = Stationarity::default();
        Self {
            max_iterations: 200,
            window: st.window,
            tol: st.tol,
            tol_g: st.tol_g,
            penalty: 10.0,
            penalty_growth: 1.0,
            penalty_max: None,
            lambda0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsdSection {
    pub l_s_max: f64,
    pub max_levels: usize,
    pub dedup_tol: f64,
    pub initial_weights: Vec<Vec<f64>>,
}

impl Default for AsdSection {
    fn default() -> Self {
        let p = AsdParams::new(0.04);
        Self {
            l_s_max: p.l_s_max,
            max_levels: p.max_levels,
            dedup_tol: p.dedup_tol,
            initial_weights: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub problem: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub material: MaterialParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub girder: Option<GirderSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper: Option<GripperSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbracket: Option<LBracketSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamped_tri: Option<ClampedTriSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<QuadraticSurrogate>,
    #[serde(default)]
    pub levelset: LevelSetSection,
    #[serde(default)]
    pub weights: WeightSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub asd: AsdSection,
}

/// A validated configuration plus the defaults that were filled in.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ProblemConfig,
    pub defaults_applied: Vec<String>,
}

/// Either a finite element problem or an analytic surrogate.
pub enum Model {
    Fem(Box<Problem>),
    Surrogate(QuadraticSurrogate),
}

fn default_weights(kind: ProblemKind, m: usize) -> Vec<Vec<f64>> {
    match kind {
        ProblemKind::Girder => vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        ProblemKind::Gripper => vec![vec![0.999, 0.001], vec![0.70, 0.30]],
        ProblemKind::Lbracket => vec![vec![0.05, 0.95], vec![0.95, 0.05]],
        ProblemKind::ClampedTri => vec![vec![0.70, 0.15, 0.15], vec![0.15, 0.70, 0.15], vec![0.15, 0.15, 0.70]],
        ProblemKind::Surrogate if m == 2 => vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        ProblemKind::Surrogate => (0..m)
            .map(|i| (0..m).map(|j| if i == j { 0.7 } else { 0.3 / (m - 1) as f64 }).collect())
            .collect(),
    }
}

/// Dotted paths present in `full` but absent from `given`.
fn missing_keys(given: &toml::Table, full: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in full {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (given.get(k), v) {
            (None, _) => out.push(path),
            (Some(toml::Value::Table(g)), toml::Value::Table(f)) => missing_keys(g, f, &path, out),
            _ => {}
        }
    }
}

fn config_err(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let key = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".to_string());
    let location = e.span().map(|s| format!(" (byte offset {})", s.start)).unwrap_or_default();
    Error::config(key, format!("{}{location}", e.to_string().trim_end()))
}

fn fraction(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must lie in (0, 1), got {v}")))
    }
}

fn keyed(key: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<LoadedConfig> {
        let given: toml::Table = text.parse().map_err(config_err)?;
        let mut config: ProblemConfig = toml::from_str(text).map_err(config_err)?;
        config.fill_defaults();
        let full: toml::Table = toml::Table::try_from(&config)
            .map_err(|e| Error::config("<document>", format!("cannot serialize configuration: {e}")))?;
        let mut defaults_applied = Vec::new();
        missing_keys(&given, &full, "", &mut defaults_applied);
        if config.problem == ProblemKind::Surrogate {
            let unused = ["material", "levelset", "weights", "optimizer"];
            defaults_applied.retain(|k| !unused.iter().any(|u| k == u || k.starts_with(&format!("{u}."))));
        }
        config.validate()?;
        Ok(LoadedConfig { config, defaults_applied })
    }

    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { key, message } => Error::Config {
                key,
                message: format!("{message} in {}", path.display()),
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", format!("cannot serialize configuration: {e}")))
    }

    fn fill_defaults(&mut self) {
        match self.problem {
            ProblemKind::Girder => {
                self.girder.get_or_insert_with(GirderSpec::default);
            }
            ProblemKind::Gripper => {
                self.gripper.get_or_insert_with(GripperSpec::default);
            }
            ProblemKind::Lbracket => {
                self.lbracket.get_or_insert_with(LBracketSpec::default);
            }
            ProblemKind::ClampedTri => {
                self.clamped_tri.get_or_insert_with(ClampedTriSpec::default);
            }
            ProblemKind::Surrogate => {
                self.surrogate.get_or_insert_with(QuadraticSurrogate::bi_objective);
            }
        }
        if self.asd.initial_weights.is_empty() {
            self.asd.initial_weights = default_weights(self.problem, self.objective_count());
        }
    }

    pub fn objective_count(&self) -> usize {
        match self.problem {
            ProblemKind::ClampedTri => 3,
            ProblemKind::Surrogate => self.surrogate.as_ref().map_or(2, |s| s.anchors.len()),
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.problem.name();
        let tables = [
            ("girder", self.girder.is_some()),
            ("gripper", self.gripper.is_some()),
            ("lbracket", self.lbracket.is_some()),
            ("clamped_tri", self.clamped_tri.is_some()),
            ("surrogate", self.surrogate.is_some()),
        ];
        for (name, present) in tables {
            if present && name != kind {
                return Err(Error::config(name, format!("table does not apply to problem `{kind}`")));
            }
        }
        if let Some(g) = &self.girder {
            fraction("girder.volume_fraction", g.volume_fraction)?;
        }
        if let Some(g) = &self.gripper {
            fraction("gripper.volume_fraction", g.volume_fraction)?;
        }
        if let Some(g) = &self.clamped_tri {
            fraction("clamped_tri.volume_fraction", g.volume_fraction)?;
        }
        if let Some(s) = &self.surrogate {
            s.validate()?;
        }
        keyed("material", self.material.validate())?;
        self.asd_params().validate()?;
        let m = self.objective_count();
        let iw = &self.asd.initial_weights;
        if iw.len() < m {
            return Err(Error::config(
                "asd.initial_weights",
                format!("need at least {m} reference weights, got {}", iw.len()),
            ));
        }
        for w in iw {
            if w.len() != m {
                return Err(Error::config(
                    "asd.initial_weights",
                    format!("weight {w:?} has {} components but the problem has {m} objectives", w.len()),
                ));
            }
            if w.iter().any(|&x| !(x > 0.0 && x < 1.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::config("asd.initial_weights", format!("weight {w:?} is not in the open simplex")));
            }
        }
        if self.problem != ProblemKind::Surrogate {
            keyed("optimizer", self.run_config().validate())?;
            // builds the mesh, so missing boundary tags surface here
            self.model()?;
        }
        Ok(())
    }

    pub fn asd_params(&self) -> AsdParams {
        AsdParams {
            l_s_max: self.asd.l_s_max,
            max_levels: self.asd.max_levels,
            dedup_tol: self.asd.dedup_tol,
        }
    }

    pub fn run_config(&self) -> RunConfig {
        let ls = &self.levelset;
        let w = &self.weights;
        let o = &self.optimizer;
        RunConfig {
            max_iterations: o.max_iterations,
            stationarity: Stationarity {
                window: o.window,
                tol: o.tol,
                tol_g: o.tol_g,
            },
            wave: WaveCoefficients {
                c11: ls.c11,
                c22: ls.c22,
                c12: ls.c12,
            },
            levelset: LevelSetParams {
                damping: ls.damping,
                interface_width: ls.b,
                ds: ls.ds,
            },
            weights: WeightParams {
                inertia: w.inertia,
                damping: w.damping,
                stiffness: w.stiffness,
                eps: w.eps,
                ds: ls.ds,
            },
            weight_order: w.order,
            initial_ratio: w.initial_ratio,
            phi0: ls.phi0,
            phi_minus1: ls.phi_minus1,
            penalty: o.penalty,
            penalty_growth: o.penalty_growth,
            penalty_max: o.penalty_max.unwrap_or(o.penalty),
            lambda0: o.lambda0,
            filter: ls.filter,
        }
    }

    fn setup(&self) -> Result<Option<ProblemSetup>> {
        let mat = self.material;
        let missing = || Error::config(self.problem.name(), "geometry table missing");
        let key = self.problem.name();
        let wrap = |r: Result<ProblemSetup>| {
            r.map_err(|e| match e {
                Error::Config { .. } => e,
                other => Error::config(key, other.to_string()),
            })
        };
        Ok(Some(match self.problem {
            ProblemKind::Girder => wrap(girder(self.girder.as_ref().ok_or_else(missing)?, mat))?,
            ProblemKind::Gripper => wrap(gripper(self.gripper.as_ref().ok_or_else(missing)?, mat))?,
            ProblemKind::Lbracket => wrap(lbracket(self.lbracket.as_ref().ok_or_else(missing)?, mat))?,
            ProblemKind::ClampedTri => wrap(clamped_tri(self.clamped_tri.as_ref().ok_or_else(missing)?, mat))?,
            ProblemKind::Surrogate => return Ok(None),
        }))
    }

    pub fn model(&self) -> Result<Model> {
        match self.setup()? {
            Some(s) => {
                let p = Problem::new(s).map_err(|e| Error::config(self.problem.name(), e.to_string()))?;
                Ok(Model::Fem(Box::new(p)))
            }
            None => Ok(Model::Surrogate(
                self.surrogate.clone().ok_or_else(|| Error::config("surrogate", "table missing"))?,
            )),
        }
    }
}
