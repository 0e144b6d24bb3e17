mod common;

use common::{check_fd, girder_like, gripper_like, lbracket_like, objective, region, tag};
use lsmo::elasticity::{MaterialParams, Supports, Traction};
use lsmo::mesh::{build_lshape_mesh, build_rect_mesh};
use lsmo::problem::{NormalizationMode, ObjectiveKind, Problem, ProblemSetup, StressLimit};
use lsmo::sensitivity::{adjoints, analyze, perturbation, Multipliers};

fn assert_fd(problem: &Problem, w: &[f64], mult: &Multipliers, seed: u64, min_checked: usize) {
    let (checked, worst) = check_fd(problem, w, mult, seed);
    assert!(checked >= min_checked, "only {checked} elements checked");
    assert!(worst <= 0.05, "worst relative error {worst:e}");
}

#[test]
fn girder_adjoint_matches_finite_differences() {
    let p = girder_like(5, [0.0, 0.0]);
    let mult = Multipliers { volume: 0.7, stress: vec![0.0; 2] };
    assert_fd(&p, &[0.3, 0.7], &mult, 1, 11);
}

#[test]
fn gripper_adjoint_matches_finite_differences() {
    let p = gripper_like();
    let mult = Multipliers { volume: 0.4, stress: vec![0.0; 2] };
    assert_fd(&p, &[0.6, 0.4], &mult, 2, 11);
}

#[test]
fn lbracket_adjoint_matches_finite_differences() {
    let mesh = build_lshape_mesh(1.0, 0.6, 0.2).unwrap();
    let p = lbracket_like(mesh, region([1.0, 0.2], [1.0, 0.4]), 0.05);
    let mult = Multipliers { volume: 0.0, stress: vec![0.8, 1.3] };
    assert_fd(&p, &[0.4, 0.6], &mult, 3, 11);
}

#[test]
fn stress_aggregate_gradient_on_small_mesh() {
    let mesh = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
    let mesh = mesh
        .tag_boundary(region([0.0, 0.0], [0.0, 1.0]), tag("dirichlet_support"))
        .unwrap()
        .tag_boundary(region([1.0, 0.5], [1.0, 1.0]), tag("traction"))
        .unwrap();
    let supports = Supports { clamped: vec![tag("dirichlet_support")], ..Default::default() };
    let mut obj = objective(
        ObjectiveKind::Volume,
        supports,
        vec![Traction { tag: tag("traction"), value: [0.0, -1.0] }],
    );
    obj.stress = Some(StressLimit { p: 5.0, f_y: 42.0, limit: 0.05 });
    let p = Problem::new(ProblemSetup {
        mesh,
        material: MaterialParams::default(),
        objectives: vec![obj],
        volume_fraction: None,
        fixed_solid: vec![],
        void_tags: vec![],
        normalization: NormalizationMode::Off,
    })
    .unwrap();
    // w tiny so the stress term dominates
    let mult = Multipliers { volume: 0.0, stress: vec![1.0] };
    assert_fd(&p, &[1e-9], &mult, 4, 4);
}

#[test]
fn girder_fields_mirror_under_symmetric_loading() {
    let p = girder_like(4, [0.5, 0.0]);
    let theta = vec![1.0; p.mesh.element_count()];
    let a = analyze(&p, theta).unwrap();
    let w = [0.5, 0.5];
    let v = adjoints(&p, &a, &w, &a.objectives, &Multipliers::zero(2)).unwrap();
    let r = perturbation(&p, &a, &v, &w, &a.objectives, &Multipliers::zero(2), NormalizationMode::State).unwrap();
    assert!((a.objectives[0] - a.objectives[1]).abs() <= 1e-8 * a.objectives[0]);
    let mirror = |e: usize| {
        let c = p.mesh.centroid(e);
        (0..p.mesh.element_count())
            .find(|&k| {
                let d = p.mesh.centroid(k);
                (d[0] - (1.0 - c[0])).abs() < 1e-9 && (d[1] - c[1]).abs() < 1e-9
            })
            .unwrap()
    };
    let scale = r.f_alpha[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for e in 0..p.mesh.element_count() {
        let k = mirror(e);
        assert!((r.f_alpha[0][e] - r.f_alpha[1][k]).abs() <= 1e-8 * scale);
    }
}
