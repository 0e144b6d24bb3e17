//! Objective and constraint evaluation, adjoint solves, perturbation terms,
//! their normalization and the Helmholtz/arsinh regularization.

use crate::elasticity::{dtau_scalar, stress_pnorm, tau_scalar, von_mises};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::{NormalizationMode, Objective, ObjectiveKind, Problem, StressLimit};
use crate::sparse::{dot, ConstrainedSolver, CsrMatrix};

/// Smallest admissible normalization factor.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

/// Element-wise design fields derived from element Θ.
#[derive(Debug, Clone)]
pub struct Design {
    pub theta: Vec<f64>,
    pub tau: Vec<f64>,
    pub dtau: Vec<f64>,
}

impl Design {
    pub fn new(problem: &Problem, theta: Vec<f64>) -> Self {
        let mat = &problem.material;
        let (tau, dtau) = theta
            .iter()
            .zip(&problem.fixed_solid)
            .map(|(&t, &solid)| if solid { (1.0, 0.0) } else { (tau_scalar(t, mat), dtau_scalar(t, mat)) })
            .unzip();
        Self { theta, tau, dtau }
    }
}

#[derive(Debug, Clone)]
pub struct StressEval {
    pub sigma_m: Vec<f64>,
    /// S^{1/p}
    pub pnorm: f64,
    pub g: f64,
}

/// States, objective values and constraint values at one design.
pub struct Analysis {
    pub design: Design,
    pub states: Vec<Vec<f64>>,
    solvers: Vec<Option<ConstrainedSolver>>,
    pub objectives: Vec<f64>,
    pub volume_g: Option<f64>,
    pub stress: Vec<Option<StressEval>>,
}

impl Analysis {
    /// Largest constraint value, or `None` for unconstrained problems.
    pub fn max_constraint(&self) -> Option<f64> {
        self.constraint_values().into_iter().reduce(f64::max)
    }

    pub fn constraint_values(&self) -> Vec<f64> {
        self.volume_g
            .into_iter()
            .chain(self.stress.iter().flatten().map(|s| s.g))
            .collect()
    }
}

pub fn eval_objective(problem: &Problem, obj: &Objective, design: &Design, u: &[f64]) -> f64 {
    match obj.kind {
        ObjectiveKind::MeanCompliance => dot(&obj.load, u),
        ObjectiveKind::Volume => design_volume(problem, &design.theta),
        ObjectiveKind::StrainEnergy => {
            let w = obj.model.energy_density(u, u);
            0.5 * w
                .iter()
                .zip(&design.tau)
                .zip(problem.mesh.element_areas())
                .map(|((w, t), a)| w * t * a)
                .sum::<f64>()
        }
        ObjectiveKind::OutputDisplacement => -dot(obj.output.as_ref().expect("validated output"), u),
    }
}

/// ∫Θ over the design region.
pub fn design_volume(problem: &Problem, theta: &[f64]) -> f64 {
    theta
        .iter()
        .zip(problem.mesh.element_areas())
        .zip(&problem.fixed_solid)
        .filter(|(_, &s)| !s)
        .map(|((t, a), _)| t * a)
        .sum()
}

pub fn eval_volume_constraint(problem: &Problem, theta: &[f64], vf: f64) -> f64 {
    design_volume(problem, theta) / problem.v0 - vf
}

pub fn eval_stress_constraint(
    obj: &Objective,
    design: &Design,
    u: &[f64],
    limit: &StressLimit,
    areas: &[f64],
    v0: f64,
) -> Result<StressEval> {
    let sigma_m = von_mises(&obj.model, u);
    let pnorm = stress_pnorm(&sigma_m, &design.tau, areas, limit.p, limit.f_y)?;
    Ok(StressEval {
        g: pnorm / v0 - limit.limit,
        sigma_m,
        pnorm,
    })
}

/// Projected multiplier update λ ← max(0, λ + rG).
pub fn update_multiplier(lambda: f64, r: f64, g: f64) -> f64 {
    (lambda + r * g).max(0.0)
}

/// Solves every state problem and evaluates objectives and constraints.
pub fn analyze(problem: &Problem, theta: Vec<f64>) -> Result<Analysis> {
    let design = Design::new(problem, theta);
    let areas = problem.mesh.element_areas();
    let m = problem.objective_count();
    let mut states = Vec::with_capacity(m);
    let mut solvers = Vec::with_capacity(m);
    let mut objectives = Vec::with_capacity(m);
    let mut stress = Vec::with_capacity(m);
    for obj in &problem.objectives {
        let (u, solver) = if obj.needs_state() {
            let solver = obj.model.factor(obj.model.stiffness(&design.tau))?;
            (solver.solve(&obj.load)?, Some(solver))
        } else {
            (vec![0.0; obj.model.dof_count()], None)
        };
        objectives.push(eval_objective(problem, obj, &design, &u));
        stress.push(match &obj.stress {
            Some(limit) => Some(eval_stress_constraint(obj, &design, &u, limit, areas, problem.v0)?),
            None => None,
        });
        states.push(u);
        solvers.push(solver);
    }
    let volume_g = problem
        .volume_fraction
        .map(|vf| eval_volume_constraint(problem, &design.theta, vf));
    Ok(Analysis {
        design,
        states,
        solvers,
        objectives,
        volume_g,
        stress,
    })
}

/// Multipliers of the shared volume constraint and of the per-objective
/// stress constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub volume: f64,
    pub stress: Vec<f64>,
}

impl Multipliers {
    pub fn zero(m: usize) -> Self {
        Self {
            volume: 0.0,
            stress: vec![0.0; m],
        }
    }
}

/// Per-element coefficient of the stress aggregate gradient:
/// (σ_M/(f_y S^{1/p}))^{p-1}, which equals S^{1/p-1}(σ_M/f_y)^{p-1}.
fn stress_ratio_pow(s: &StressEval, limit: &StressLimit, power: f64) -> Vec<f64> {
    if s.pnorm == 0.0 {
        return vec![0.0; s.sigma_m.len()];
    }
    s.sigma_m
        .iter()
        .map(|&sig| (sig / (limit.f_y * s.pnorm)).powf(power))
        .collect()
}

/// Right-hand sides (w/J*)∂J/∂u + λ∂G/∂u and their solutions.
pub fn adjoints(
    problem: &Problem,
    analysis: &Analysis,
    w: &[f64],
    j_ref: &[f64],
    multipliers: &Multipliers,
) -> Result<Vec<Vec<f64>>> {
    let areas = problem.mesh.element_areas();
    let mut out = Vec::with_capacity(problem.objective_count());
    for (a, obj) in problem.objectives.iter().enumerate() {
        let u = &analysis.states[a];
        let scale = w[a] / j_ref[a];
        let lambda = multipliers.stress.get(a).copied().unwrap_or(0.0);
        let stress_active = obj.stress.is_some() && lambda != 0.0;
        let n = obj.model.dof_count();
        if !stress_active {
            match obj.kind {
                ObjectiveKind::MeanCompliance => {
                    out.push(u.iter().map(|x| scale * x).collect());
                    continue;
                }
                ObjectiveKind::StrainEnergy if !obj.model.has_springs() => {
                    out.push(u.iter().map(|x| scale * x).collect());
                    continue;
                }
                ObjectiveKind::Volume => {
                    out.push(vec![0.0; n]);
                    continue;
                }
                _ => {}
            }
        }
        let mut rhs = match obj.kind {
            ObjectiveKind::MeanCompliance => obj.load.iter().map(|f| scale * f).collect(),
            ObjectiveKind::Volume => vec![0.0; n],
            ObjectiveKind::StrainEnergy => {
                let k: CsrMatrix = obj.model.domain_stiffness(&analysis.design.tau);
                k.mul_vec(u).into_iter().map(|f| scale * f).collect()
            }
            ObjectiveKind::OutputDisplacement => obj
                .output
                .as_ref()
                .expect("validated output")
                .iter()
                .map(|f| -scale * f)
                .collect(),
        };
        if stress_active {
            let limit = obj.stress.as_ref().expect("checked above");
            let eval = analysis.stress[a].as_ref().expect("stress evaluated");
            let ratio = stress_ratio_pow(eval, limit, limit.p - 1.0);
            let coeff: Vec<f64> = (0..areas.len())
                .map(|e| {
                    let sig = eval.sigma_m[e];
                    if sig == 0.0 {
                        0.0
                    } else {
                        lambda / problem.v0 * ratio[e] * 3.0 * analysis.design.tau[e] / (2.0 * limit.f_y * sig) * areas[e]
                    }
                })
                .collect();
            for (r, g) in rhs.iter_mut().zip(obj.model.deviatoric_load(u, &coeff)) {
                *r += g;
            }
        }
        if rhs.iter().all(|&x| x == 0.0) {
            out.push(vec![0.0; n]);
            continue;
        }
        let solver = analysis.solvers[a]
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("objective {} has no factored state operator", a + 1)))?;
        out.push(solver.solve(&rhs)?);
    }
    Ok(out)
}

/// Per-objective contributions f_α, their sum F and the normalization
/// factors, either per element or per node.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResult {
    pub f_alpha: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    pub c_norm: Vec<f64>,
}

impl PerturbationResult {
    fn from_parts(f_alpha: Vec<Vec<f64>>, c_norm: Vec<f64>) -> Self {
        let n = f_alpha.first().map_or(0, |f| f.len());
        let total = (0..n).map(|i| f_alpha.iter().map(|f| f[i]).sum()).collect();
        Self { f_alpha, total, c_norm }
    }

    /// Area-weighted nodal projection of element contributions.
    pub fn to_nodes(&self, mesh: &Mesh) -> Self {
        let f_alpha = self
            .f_alpha
            .iter()
            .map(|f| crate::elasticity::element_to_nodes(mesh, f))
            .collect();
        Self::from_parts(f_alpha, self.c_norm.clone())
    }
}

/// C = (1/(w V₀)) ∫|field| dΩ, floored.
pub fn normalize(field: &[f64], areas: &[f64], w: f64, v0: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::invalid(format!("normalization weight must be positive, got {w}")));
    }
    let integral: f64 = field.iter().zip(areas).map(|(f, a)| f.abs() * a).sum();
    Ok((integral / (w * v0)).max(NORMALIZATION_FLOOR))
}

/// Element-wise perturbation densities
/// f_α = λ∂G/∂Θ + [(w/J*)∂J/∂Θ - ∂τ ℂε(u)ε(v)] / C_α.
pub fn perturbation(
    problem: &Problem,
    analysis: &Analysis,
    adjoint: &[Vec<f64>],
    w: &[f64],
    j_ref: &[f64],
    multipliers: &Multipliers,
    mode: NormalizationMode,
) -> Result<PerturbationResult> {
    let m = problem.objective_count();
    let areas = problem.mesh.element_areas();
    let design = &analysis.design;
    let ne = areas.len();
    let mut f_alpha = Vec::with_capacity(m);
    let mut c_norm = Vec::with_capacity(m);
    for (a, obj) in problem.objectives.iter().enumerate() {
        let u = &analysis.states[a];
        let scale = w[a] / j_ref[a];
        let mutual = obj.model.energy_density(u, &adjoint[a]);
        let state_term: Vec<f64> = (0..ne).map(|e| design.dtau[e] * mutual[e]).collect();
        let explicit: Vec<f64> = match obj.kind {
            ObjectiveKind::Volume => (0..ne)
                .map(|e| if problem.fixed_solid[e] { 0.0 } else { scale })
                .collect(),
            ObjectiveKind::StrainEnergy => {
                let own = obj.model.energy_density(u, u);
                (0..ne).map(|e| scale * 0.5 * design.dtau[e] * own[e]).collect()
            }
            ObjectiveKind::MeanCompliance | ObjectiveKind::OutputDisplacement => vec![0.0; ne],
        };
        let sens: Vec<f64> = (0..ne).map(|e| explicit[e] - state_term[e]).collect();
        let c = match mode {
            NormalizationMode::Off => 1.0,
            NormalizationMode::State => normalize(&state_term, areas, w[a], problem.v0)?,
            NormalizationMode::StateMinusExplicit => normalize(&sens, areas, w[a], problem.v0)?,
        };
        if !c.is_finite() {
            return Err(Error::DegenerateSensitivity { objective: a + 1 });
        }
        let mut f: Vec<f64> = sens.iter().map(|s| s / c).collect();
        if problem.volume_fraction.is_some() {
            let share = multipliers.volume / (m as f64 * problem.v0);
            for (fe, &solid) in f.iter_mut().zip(&problem.fixed_solid) {
                if !solid {
                    *fe += share;
                }
            }
        }
        if let (Some(limit), Some(eval)) = (&obj.stress, &analysis.stress[a]) {
            let lambda = multipliers.stress.get(a).copied().unwrap_or(0.0);
            if lambda != 0.0 {
                let ratio = stress_ratio_pow(eval, limit, limit.p);
                for e in 0..ne {
                    f[e] += lambda / (limit.p * problem.v0) * eval.pnorm * ratio[e] * design.dtau[e];
                }
            }
        }
        f_alpha.push(f);
        c_norm.push(c);
    }
    Ok(PerturbationResult::from_parts(f_alpha, c_norm))
}

fn expect_kinds(problem: &Problem, kinds: &[ObjectiveKind]) -> Result<()> {
    let actual: Vec<ObjectiveKind> = problem.objectives.iter().map(|o| o.kind).collect();
    if actual != kinds {
        return Err(Error::invalid(format!("expected objectives {kinds:?}, found {actual:?}")));
    }
    Ok(())
}

/// Two mean compliance objectives sharing one volume multiplier.
pub fn perturbation_girder(
    problem: &Problem,
    analysis: &Analysis,
    adjoint: &[Vec<f64>],
    w: &[f64],
    j_ref: &[f64],
    lambda: f64,
) -> Result<PerturbationResult> {
    expect_kinds(problem, &[ObjectiveKind::MeanCompliance, ObjectiveKind::MeanCompliance])?;
    let mult = Multipliers { volume: lambda, stress: vec![0.0; 2] };
    perturbation(problem, analysis, adjoint, w, j_ref, &mult, NormalizationMode::State)
}

/// Output displacement and strain energy of a spring-supported mechanism.
pub fn perturbation_gripper(
    problem: &Problem,
    analysis: &Analysis,
    adjoint: &[Vec<f64>],
    w: &[f64],
    j_ref: &[f64],
    lambda: f64,
) -> Result<PerturbationResult> {
    expect_kinds(problem, &[ObjectiveKind::OutputDisplacement, ObjectiveKind::StrainEnergy])?;
    let mult = Multipliers { volume: lambda, stress: vec![0.0; 2] };
    perturbation(problem, analysis, adjoint, w, j_ref, &mult, NormalizationMode::State)
}

/// Volume and strain energy, each with its own stress multiplier.
pub fn perturbation_lbracket(
    problem: &Problem,
    analysis: &Analysis,
    adjoint: &[Vec<f64>],
    w: &[f64],
    j_ref: &[f64],
    lambdas: [f64; 2],
) -> Result<PerturbationResult> {
    expect_kinds(problem, &[ObjectiveKind::Volume, ObjectiveKind::StrainEnergy])?;
    let mult = Multipliers { volume: 0.0, stress: lambdas.to_vec() };
    perturbation(problem, analysis, adjoint, w, j_ref, &mult, NormalizationMode::StateMinusExplicit)
}

/// Helmholtz smoothing of arsinh(γF)/γ with a lumped mass matrix, factored
/// once per mesh.
pub struct HelmholtzFilter {
    lumped: Vec<f64>,
    gamma: f64,
    solver: Option<ConstrainedSolver>,
}

impl HelmholtzFilter {
    pub fn new(mesh: &Mesh, eta: f64, gamma: f64) -> Result<Self> {
        if !(eta >= 0.0) || !(gamma > 0.0) {
            return Err(Error::invalid(format!("filter needs eta >= 0 and gamma > 0, got {eta}, {gamma}")));
        }
        let mut lumped = vec![0.0; mesh.node_count()];
        for (t, a) in mesh.triangles().iter().zip(mesh.element_areas()) {
            for &i in t {
                lumped[i] += a / 3.0;
            }
        }
        let solver = if eta > 0.0 {
            let mut k = CsrMatrix::from_element_dofs(mesh.node_count(), mesh.triangles().iter().map(|t| &t[..]));
            for (e, t) in mesh.triangles().iter().enumerate() {
                let g = mesh.shape_gradients(e);
                let area = mesh.element_areas()[e];
                for a in 0..3 {
                    for b in 0..3 {
                        k.add(t[a], t[b], eta * area * (g[0][a] * g[0][b] + g[1][a] * g[1][b]));
                    }
                }
            }
            for (i, &m) in lumped.iter().enumerate() {
                k.add(i, i, m);
            }
            Some(ConstrainedSolver::new(k, &[])?)
        } else {
            None
        };
        Ok(Self { lumped, gamma, solver })
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        let scaled: Vec<f64> = f.iter().map(|x| (self.gamma * x).asinh() / self.gamma).collect();
        match &self.solver {
            None => Ok(scaled),
            Some(s) => {
                let rhs: Vec<f64> = scaled.iter().zip(&self.lumped).map(|(x, m)| x * m).collect();
                s.solve(&rhs)
            }
        }
    }
}

pub fn helmholtz_filter(f: &[f64], eta: f64, gamma: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    HelmholtzFilter::new(mesh, eta, gamma)?.apply(f)
}
