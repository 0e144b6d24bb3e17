#![allow(dead_code)]

use lsmo::elasticity::{Dof, MaterialParams, PointConstraint, Spring, Supports, Traction};
use lsmo::mesh::{build_rect_mesh, BoundaryRegion, BoundaryTag, Mesh};
use lsmo::problem::{NormalizationMode, ObjectiveKind, ObjectiveSetup, OutputSpec, Problem, ProblemSetup, Rect, StressLimit};
use lsmo::sensitivity::{adjoints, analyze, perturbation, Multipliers};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tag(s: &str) -> BoundaryTag {
    BoundaryTag::new(s).unwrap()
}

pub fn region(a: [f64; 2], b: [f64; 2]) -> BoundaryRegion {
    BoundaryRegion::new(a, b)
}

pub fn objective(kind: ObjectiveKind, supports: Supports, tractions: Vec<Traction>) -> ObjectiveSetup {
    ObjectiveSetup {
        kind,
        supports,
        tractions,
        springs: vec![],
        output: None,
        stress: None,
    }
}

pub fn lagrangian(problem: &Problem, theta: &[f64], w: &[f64], j: &[f64], mult: &Multipliers) -> f64 {
    let a = analyze(problem, theta.to_vec()).unwrap();
    let mut l: f64 = a.objectives.iter().zip(w).zip(j).map(|((v, w), j)| w / j * v).sum();
    if let Some(g) = a.volume_g {
        l += mult.volume * g;
    }
    for (s, lam) in a.stress.iter().zip(&mult.stress) {
        if let Some(s) = s {
            l += lam * s.g;
        }
    }
    l
}

/// Compares Σ_α f_α(e)·A_e against central differences of the Lagrangian
/// over element Θ for binary designs, where the simplified ∂τ/∂Θ is exact.
/// Returns the number of elements with |FD| > 1e-8 and the worst relative
/// error among them.
pub fn check_fd(problem: &Problem, w: &[f64], mult: &Multipliers, seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ne = problem.mesh.element_count();
    let theta: Vec<f64> = (0..ne).map(|_| if rng.random_bool(0.8) { 1.0 } else { 0.0 }).collect();
    let a = analyze(problem, theta.clone()).unwrap();
    let j: Vec<f64> = a.objectives.iter().map(|v| v.abs().max(1e-3)).collect();
    let v = adjoints(problem, &a, w, &j, mult).unwrap();
    let r = perturbation(problem, &a, &v, w, &j, mult, NormalizationMode::Off).unwrap();
    let h = 1e-6;
    let areas = problem.mesh.element_areas();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for e in 0..ne {
        if problem.fixed_solid[e] {
            continue;
        }
        let mut tp = theta.clone();
        tp[e] += h;
        let mut tm = theta.clone();
        tm[e] -= h;
        let fd = (lagrangian(problem, &tp, w, &j, mult) - lagrangian(problem, &tm, w, &j, mult)) / (2.0 * h);
        let adj = r.total[e] * areas[e];
        if fd.abs() > 1e-8 {
            checked += 1;
            worst = worst.max((adj - fd).abs() / fd.abs());
        }
    }
    (checked, worst)
}

pub fn girder_like(nx: usize, pin: [f64; 2]) -> Problem {
    let mesh = build_rect_mesh(1.0, 0.5, nx, 4)
        .unwrap()
        .tag_boundary(region([0.0, 0.0], [0.2, 0.0]), tag("roller"))
        .unwrap()
        .tag_boundary(region([0.8, 0.0], [1.0, 0.0]), tag("roller_right"))
        .unwrap()
        .tag_boundary(region([0.2, 0.5], [0.4, 0.5]), tag("traction_1"))
        .unwrap()
        .tag_boundary(region([0.6, 0.5], [0.8, 0.5]), tag("traction_2"))
        .unwrap();
    let supports = Supports {
        rollers: vec![tag("roller"), tag("roller_right")],
        points: vec![PointConstraint { at: pin, dof: Dof::X }],
        ..Default::default()
    };
    let load = |t: &str| vec![Traction { tag: tag(t), value: [0.0, -1.0] }];
    Problem::new(ProblemSetup {
        mesh,
        material: MaterialParams::default(),
        objectives: vec![
            objective(ObjectiveKind::MeanCompliance, supports.clone(), load("traction_1")),
            objective(ObjectiveKind::MeanCompliance, supports, load("traction_2")),
        ],
        volume_fraction: Some(0.45),
        fixed_solid: vec![],
        void_tags: vec![],
        normalization: NormalizationMode::State,
    })
    .unwrap()
}

pub fn gripper_like() -> Problem {
    let mesh = build_rect_mesh(1.0, 0.5, 5, 4)
        .unwrap()
        .tag_boundary(region([0.0, 0.0], [0.8, 0.0]), tag("roller"))
        .unwrap()
        .tag_boundary(region([0.0, 0.375], [0.0, 0.5]), tag("dirichlet_support"))
        .unwrap()
        .tag_boundary(region([0.0, 0.0], [0.0, 0.125]), tag("input"))
        .unwrap()
        .tag_boundary(region([1.0, 0.125], [1.0, 0.25]), tag("output"))
        .unwrap();
    let supports = Supports {
        clamped: vec![tag("dirichlet_support")],
        rollers: vec![tag("roller")],
        ..Default::default()
    };
    let springs = vec![
        Spring { tag: tag("input"), stiffness: 50.0, direction: [1.0, 0.0] },
        Spring { tag: tag("output"), stiffness: 5.0, direction: [0.0, -1.0] },
    ];
    let tractions = vec![Traction { tag: tag("input"), value: [1.0, 0.0] }];
    let mut out = objective(ObjectiveKind::OutputDisplacement, supports.clone(), tractions.clone());
    out.springs = springs.clone();
    out.output = Some(OutputSpec { tag: tag("output"), direction: [0.0, -1.0] });
    let mut energy = objective(ObjectiveKind::StrainEnergy, supports, tractions);
    energy.springs = springs;
    Problem::new(ProblemSetup {
        mesh,
        material: MaterialParams::default(),
        objectives: vec![out, energy],
        volume_fraction: Some(0.3),
        fixed_solid: vec![Rect { min: [0.8, 0.125], max: [1.0, 0.25] }],
        void_tags: vec![],
        normalization: NormalizationMode::State,
    })
    .unwrap()
}

pub fn lbracket_like(mesh: Mesh, load: BoundaryRegion, limit: f64) -> Problem {
    let mesh = mesh
        .tag_boundary(region([0.0, 1.0], [0.4, 1.0]), tag("dirichlet_support"))
        .unwrap()
        .tag_boundary(load, tag("traction"))
        .unwrap();
    let supports = Supports { clamped: vec![tag("dirichlet_support")], ..Default::default() };
    let tractions = vec![Traction { tag: tag("traction"), value: [0.0, -1.0] }];
    let stress = Some(StressLimit { p: 5.0, f_y: 1.0, limit });
    let mut vol = objective(ObjectiveKind::Volume, supports.clone(), tractions.clone());
    vol.stress = stress;
    let mut energy = objective(ObjectiveKind::StrainEnergy, supports, tractions);
    energy.stress = stress;
    Problem::new(ProblemSetup {
        mesh,
        material: MaterialParams::default(),
        objectives: vec![vol, energy],
        volume_fraction: None,
        fixed_solid: vec![],
        void_tags: vec![tag("void_wall_a"), tag("void_wall_b")],
        normalization: NormalizationMode::StateMinusExplicit,
    })
    .unwrap()
}
