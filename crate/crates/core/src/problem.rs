//! Assembled optimization problems: mesh, per-objective state operators,
//! constraints and level set boundary data.

use serde::{Deserialize, Serialize};

use crate::elasticity::{line_functional, load_vector, ElasticModel, MaterialParams, Spring, Supports, Traction};
use crate::error::{Error, Result};
use crate::levelset::dirichlet_nodes;
use crate::mesh::{BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// ∫ t·u dΓ
    MeanCompliance,
    /// ∫ Θ dΩ
    Volume,
    /// ½ ∫ τ ℂε(u)ε(u) dΩ
    StrainEnergy,
    /// -∫ r·u dΓ on the output tag
    OutputDisplacement,
}

/// Aggregated von Mises stress limit G = S^{1/p}/V₀ - limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StressLimit {
    pub p: f64,
    pub f_y: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub tag: BoundaryTag,
    pub direction: [f64; 2],
}

/// How the per-objective normalization factor is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// ∫|∂R/∂Θ|
    #[default]
    State,
    /// ∫|∂R/∂Θ - (w/J*) ∂J/∂Θ|
    StateMinusExplicit,
    /// factor fixed at 1
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSetup {
    pub kind: ObjectiveKind,
    pub supports: Supports,
    pub tractions: Vec<Traction>,
    pub springs: Vec<Spring>,
    pub output: Option<OutputSpec>,
    pub stress: Option<StressLimit>,
}

#[derive(Debug, Clone)]
pub struct ProblemSetup {
    pub mesh: Mesh,
    pub material: MaterialParams,
    pub objectives: Vec<ObjectiveSetup>,
    pub volume_fraction: Option<f64>,
    pub fixed_solid: Vec<Rect>,
    pub void_tags: Vec<BoundaryTag>,
    pub normalization: NormalizationMode,
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub model: ElasticModel,
    /// Nodal load vector of the tractions.
    pub load: Vec<f64>,
    /// Nodal vector of ∫ r·δu on the output tag.
    pub output: Option<Vec<f64>>,
    pub stress: Option<StressLimit>,
}

impl Objective {
    /// Whether the objective or its constraint reads a displacement field.
    pub fn needs_state(&self) -> bool {
        self.kind != ObjectiveKind::Volume || self.stress.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub material: MaterialParams,
    pub objectives: Vec<Objective>,
    pub volume_fraction: Option<f64>,
    /// Elements forced to solid material.
    pub fixed_solid: Vec<bool>,
    /// Area of the design region (fixed solid excluded).
    pub v0: f64,
    pub normalization: NormalizationMode,
    /// Prescribed level set values.
    pub phi_dirichlet: Vec<(usize, f64)>,
}

impl Problem {
    pub fn new(setup: ProblemSetup) -> Result<Self> {
        let ProblemSetup {
            mesh,
            material,
            objectives,
            volume_fraction,
            fixed_solid,
            void_tags,
            normalization,
        } = setup;
        material.validate()?;
        if objectives.is_empty() {
            return Err(Error::invalid("problem has no objectives"));
        }
        if let Some(vf) = volume_fraction {
            if !(vf > 0.0 && vf < 1.0) {
                return Err(Error::invalid(format!("volume fraction must lie in (0, 1), got {vf}")));
            }
        }
        let solid_mask: Vec<bool> = (0..mesh.element_count())
            .map(|e| {
                let c = mesh.centroid(e);
                fixed_solid.iter().any(|r| r.contains(c))
            })
            .collect();
        let v0: f64 = mesh
            .element_areas()
            .iter()
            .zip(&solid_mask)
            .filter(|(_, &s)| !s)
            .map(|(a, _)| a)
            .sum();
        if !(v0 > 0.0) {
            return Err(Error::invalid("design region is empty"));
        }

        let mut built = Vec::with_capacity(objectives.len());
        let mut phi_tags: Vec<(BoundaryTag, f64)> = Vec::new();
        for (k, o) in objectives.iter().enumerate() {
            let model = ElasticModel::new(&mesh, material, &o.supports, &o.springs)?;
            let load = load_vector(&mesh, &o.tractions)?;
            let output = match (o.kind, &o.output) {
                (ObjectiveKind::OutputDisplacement, Some(out)) => {
                    Some(line_functional(&mesh, &out.tag, out.direction)?)
                }
                (ObjectiveKind::OutputDisplacement, None) => {
                    return Err(Error::invalid(format!("objective {} needs an output tag", k + 1)))
                }
                _ => None,
            };
            if let Some(s) = &o.stress {
                if !(s.p >= 1.0 && s.f_y > 0.0) {
                    return Err(Error::invalid(format!("objective {} has invalid stress parameters", k + 1)));
                }
            }
            if o.kind != ObjectiveKind::Volume && o.tractions.is_empty() {
                return Err(Error::invalid(format!("objective {} has no traction load", k + 1)));
            }
            for t in &o.tractions {
                if !phi_tags.iter().any(|(tag, _)| tag == &t.tag) {
                    phi_tags.push((t.tag.clone(), 1.0));
                }
            }
            built.push(Objective {
                kind: o.kind,
                model,
                load,
                output,
                stress: o.stress,
            });
        }
        let mut dirichlet: std::collections::BTreeMap<usize, f64> =
            dirichlet_nodes(&mesh, &phi_tags)?.into_iter().collect();
        for (t, _) in mesh.triangles().iter().zip(&solid_mask).filter(|(_, &s)| s) {
            for &i in t {
                dirichlet.insert(i, 1.0);
            }
        }
        let voids: Vec<(BoundaryTag, f64)> = void_tags.into_iter().map(|t| (t, -1.0)).collect();
        for (i, v) in dirichlet_nodes(&mesh, &voids)? {
            dirichlet.insert(i, v);
        }
        Ok(Self {
            mesh,
            material,
            objectives: built,
            volume_fraction,
            fixed_solid: solid_mask,
            v0,
            normalization,
            phi_dirichlet: dirichlet.into_iter().collect(),
        })
    }

    pub fn objective_count(&self) -> usize {
        self.objectives.len()
    }
}
