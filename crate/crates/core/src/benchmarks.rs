//! Geometry, supports and loads of the bundled benchmark problems.

use serde::{Deserialize, Serialize};

use crate::elasticity::{Dof, MaterialParams, PointConstraint, Spring, Supports, Traction};
use crate::error::{Error, Result};
use crate::mesh::{build_lshape_mesh, build_rect_mesh, BoundaryRegion, BoundaryTag, Mesh};
use crate::problem::{NormalizationMode, ObjectiveKind, ObjectiveSetup, OutputSpec, ProblemSetup, Rect, StressLimit};

fn tag(name: &str) -> BoundaryTag {
    BoundaryTag::new(name).expect("static tag names are valid")
}

fn seg(a: [f64; 2], b: [f64; 2]) -> BoundaryRegion {
    BoundaryRegion::new(a, b)
}

/// Traction spreading a total force uniformly over a tagged segment.
fn patch_load(mesh: &Mesh, name: &str, force: [f64; 2]) -> Traction {
    let t = tag(name);
    let len = mesh.tagged_length(&t);
    Traction {
        value: [force[0] / len, force[1] / len],
        tag: t,
    }
}

fn objective(kind: ObjectiveKind, supports: Supports, tractions: Vec<Traction>) -> ObjectiveSetup {
    ObjectiveSetup {
        kind,
        supports,
        tractions,
        springs: vec![],
        output: None,
        stress: None,
    }
}

fn check_resolution(nx: usize, ny: usize) -> Result<()> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("mesh resolution must be positive"));
    }
    Ok(())
}

/// Simply supported girder with two top loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GirderSpec {
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// Width of each bottom corner roller patch, as a fraction of the length.
    pub support_patch: f64,
    /// Width of each load patch, as a fraction of the length.
    pub load_patch: f64,
    /// Load patch centres, as fractions of the length.
    pub load_centers: [f64; 2],
    /// Total force per load case, N.
    pub force: f64,
    pub volume_fraction: f64,
}

impl Default for GirderSpec {
    fn default() -> Self {
        Self {
            length: 1.0,
            height: 0.5,
            nx: 60,
            ny: 30,
            support_patch: 0.05,
            load_patch: 0.05,
            load_centers: [0.25, 0.75],
            force: 1.0,
            volume_fraction: 0.45,
        }
    }
}

pub fn girder(spec: &GirderSpec, material: MaterialParams) -> Result<ProblemSetup> {
    check_resolution(spec.nx, spec.ny)?;
    let (l, h) = (spec.length, spec.height);
    let sp = spec.support_patch * l;
    let half = 0.5 * spec.load_patch * l;
    let mut mesh = build_rect_mesh(l, h, spec.nx, spec.ny)?
        .tag_boundary(seg([0.0, 0.0], [sp, 0.0]), tag("roller_left"))?
        .tag_boundary(seg([l - sp, 0.0], [l, 0.0]), tag("roller_right"))?;
    for (k, c) in spec.load_centers.iter().enumerate() {
        let x = c * l;
        mesh = mesh.tag_boundary(seg([x - half, h], [x + half, h]), tag(&format!("traction_{}", k + 1)))?;
    }
    let supports = Supports {
        rollers: vec![tag("roller_left"), tag("roller_right")],
        points: vec![PointConstraint { at: [0.0, 0.0], dof: Dof::X }],
        ..Default::default()
    };
    let objectives = (1..=2)
        .map(|k| {
            objective(
                ObjectiveKind::MeanCompliance,
                supports.clone(),
                vec![patch_load(&mesh, &format!("traction_{k}"), [0.0, -spec.force])],
            )
        })
        .collect();
    Ok(ProblemSetup {
        mesh,
        material,
        objectives,
        volume_fraction: Some(spec.volume_fraction),
        fixed_solid: vec![],
        void_tags: vec![],
        normalization: NormalizationMode::State,
    })
}

/// Symmetric half of a compliant gripper with input and output springs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperSpec {
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// Height of the input and output patches and of the fixed support.
    pub patch: f64,
    /// Length of the symmetry roller along the bottom edge.
    pub roller_length: f64,
    /// Length of the solid jaw ending at the output patch.
    pub jaw_length: f64,
    pub force: f64,
    pub k_in: f64,
    pub k_out: f64,
    pub r_in: [f64; 2],
    pub r_out: [f64; 2],
    pub volume_fraction: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self {
            length: 1.0,
            height: 0.5,
            nx: 60,
            ny: 30,
            patch: 0.05,
            roller_length: 0.8,
            jaw_length: 0.1,
            force: 1.0,
            k_in: 1e5,
            k_out: 1e3,
            r_in: [1.0, 0.0],
            r_out: [0.0, -1.0],
            volume_fraction: 0.30,
        }
    }
}

pub fn gripper(spec: &GripperSpec, material: MaterialParams) -> Result<ProblemSetup> {
    check_resolution(spec.nx, spec.ny)?;
    let (l, h, p) = (spec.length, spec.height, spec.patch);
    let mesh = build_rect_mesh(l, h, spec.nx, spec.ny)?
        .tag_boundary(seg([0.0, 0.0], [spec.roller_length, 0.0]), tag("roller"))?
        .tag_boundary(seg([0.0, h - p], [0.0, h]), tag("dirichlet_support"))?
        .tag_boundary(seg([0.0, 0.0], [0.0, p]), tag("input"))?
        .tag_boundary(seg([l, p], [l, 2.0 * p]), tag("output"))?;
    let supports = Supports {
        clamped: vec![tag("dirichlet_support")],
        rollers: vec![tag("roller")],
        ..Default::default()
    };
    let springs = vec![
        Spring { tag: tag("input"), stiffness: spec.k_in, direction: spec.r_in },
        Spring { tag: tag("output"), stiffness: spec.k_out, direction: spec.r_out },
    ];
    let load = vec![patch_load(&mesh, "input", [spec.force * spec.r_in[0], spec.force * spec.r_in[1]])];
    let mut out = objective(ObjectiveKind::OutputDisplacement, supports.clone(), load.clone());
    out.springs = springs.clone();
    out.output = Some(OutputSpec { tag: tag("output"), direction: spec.r_out });
    let mut energy = objective(ObjectiveKind::StrainEnergy, supports, load);
    energy.springs = springs;
    Ok(ProblemSetup {
        mesh,
        material,
        objectives: vec![out, energy],
        volume_fraction: Some(spec.volume_fraction),
        fixed_solid: vec![Rect { min: [l - spec.jaw_length, p], max: [l, 2.0 * p] }],
        void_tags: vec![],
        normalization: NormalizationMode::State,
    })
}

/// L-bracket clamped on top of the vertical arm and loaded at the tip of
/// the horizontal arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LBracketSpec {
    pub outer: f64,
    pub cut: f64,
    pub h: f64,
    /// Load patch on the right edge, as (y_min, y_max).
    pub load_span: [f64; 2],
    pub force: f64,
    pub p: f64,
    pub f_y: f64,
    pub stress_limit: f64,
}

impl Default for LBracketSpec {
    fn default() -> Self {
        Self {
            outer: 1.0,
            cut: 0.6,
            h: 0.0125,
            load_span: [0.3, 0.35],
            force: 1.0,
            p: 5.0,
            f_y: 42.0,
            stress_limit: 0.05,
        }
    }
}

pub fn lbracket(spec: &LBracketSpec, material: MaterialParams) -> Result<ProblemSetup> {
    let (o, c) = (spec.outer, spec.cut);
    let mesh = build_lshape_mesh(o, c, spec.h)?
        .tag_boundary(seg([0.0, o], [o - c, o]), tag("dirichlet_support"))?
        .tag_boundary(seg([o, spec.load_span[0]], [o, spec.load_span[1]]), tag("traction"))?;
    let supports = Supports { clamped: vec![tag("dirichlet_support")], ..Default::default() };
    let load = vec![patch_load(&mesh, "traction", [0.0, -spec.force])];
    let stress = Some(StressLimit { p: spec.p, f_y: spec.f_y, limit: spec.stress_limit });
    let mut volume = objective(ObjectiveKind::Volume, supports.clone(), load.clone());
    volume.stress = stress;
    let mut energy = objective(ObjectiveKind::StrainEnergy, supports, load);
    energy.stress = stress;
    Ok(ProblemSetup {
        mesh,
        material,
        objectives: vec![volume, energy],
        volume_fraction: None,
        fixed_solid: vec![],
        void_tags: vec![tag(BoundaryTag::VOID_WALL_A), tag(BoundaryTag::VOID_WALL_B)],
        normalization: NormalizationMode::StateMinusExplicit,
    })
}

/// Girder clamped on its left edge under three load and support cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClampedTriSpec {
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    /// Width of load and roller patches, as a fraction of the length.
    pub patch: f64,
    pub force: f64,
    pub volume_fraction: f64,
}

impl Default for ClampedTriSpec {
    fn default() -> Self {
        Self {
            length: 2.0,
            height: 1.0,
            nx: 40,
            ny: 20,
            patch: 0.05,
            force: 1.0,
            volume_fraction: 0.45,
        }
    }
}

pub fn clamped_tri(spec: &ClampedTriSpec, material: MaterialParams) -> Result<ProblemSetup> {
    check_resolution(spec.nx, spec.ny)?;
    let (l, h) = (spec.length, spec.height);
    let w = spec.patch * l;
    let mid = 0.5 * l;
    let mesh = build_rect_mesh(l, h, spec.nx, spec.ny)?
        .tag_boundary(seg([0.0, 0.0], [0.0, h]), tag("dirichlet_support"))?
        .tag_boundary(seg([l, 0.0], [l, w]), tag("traction_1"))?
        .tag_boundary(seg([mid - 0.5 * w, h], [mid + 0.5 * w, h]), tag("traction_2"))?
        .tag_boundary(seg([l - w, 0.0], [l, 0.0]), tag("roller_2"))?
        .tag_boundary(seg([mid - 0.5 * w, 0.0], [mid + 0.5 * w, 0.0]), tag("traction_3"))?
        .tag_boundary(seg([l - w, h], [l, h]), tag("roller_3"))?;
    let case = |load: &str, roller: Option<&str>| {
        let supports = Supports {
            clamped: vec![tag("dirichlet_support")],
            rollers: roller.into_iter().map(tag).collect(),
            ..Default::default()
        };
        objective(ObjectiveKind::MeanCompliance, supports, vec![patch_load(&mesh, load, [0.0, -spec.force])])
    };
    let objectives = vec![
        case("traction_1", None),
        case("traction_2", Some("roller_2")),
        case("traction_3", Some("roller_3")),
    ];
    Ok(ProblemSetup {
        mesh,
        material,
        objectives,
        volume_fraction: Some(spec.volume_fraction),
        fixed_solid: vec![],
        void_tags: vec![],
        normalization: NormalizationMode::State,
    })
}
