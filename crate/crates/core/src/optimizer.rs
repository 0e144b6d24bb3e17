//! Inner loop: coupled level set and weight evolution for one reference
//! weight until stationarity.

use serde::{Deserialize, Serialize};

use crate::elasticity::{element_average, heaviside};
use crate::error::{Error, Result};
use crate::levelset::{assemble_wave, LevelSetParams, LevelSetState, WaveCoefficients};
use crate::problem::Problem;
use crate::sensitivity::{adjoints, analyze, perturbation, update_multiplier, HelmholtzFilter, Multipliers};
use crate::weights::{forcing, WeightOrder, WeightParams, WeightState};

/// Smallest |J*| used as a reference value.
pub const J_STAR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterParams {
    pub eta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stationarity {
    pub window: usize,
    /// Relative change of every objective across the window.
    pub tol: f64,
    /// Largest admissible constraint value.
    pub tol_g: f64,
}

impl Default for Stationarity {
    fn default() -> Self {
        Self {
            window: 5,
            tol: 1e-4,
            tol_g: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_iterations: usize,
    pub stationarity: Stationarity,
    pub wave: WaveCoefficients,
    pub levelset: LevelSetParams,
    pub weights: WeightParams,
    pub weight_order: WeightOrder,
    /// Initial q = ratio · q*.
    pub initial_ratio: f64,
    pub phi0: f64,
    pub phi_minus1: f64,
    /// Augmented Lagrangian penalty r.
    pub penalty: f64,
    /// Factor applied to r after every iteration.
    pub penalty_growth: f64,
    pub penalty_max: f64,
    pub lambda0: f64,
    pub filter: Option<FilterParams>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let st = &self.stationarity;
        if st.window < 2 || self.max_iterations < st.window {
            return Err(Error::invalid(format!(
                "need max_iterations >= window >= 2, got {} and {}",
                self.max_iterations, st.window
            )));
        }
        if !(st.tol > 0.0 && st.tol_g > 0.0) {
            return Err(Error::invalid("stationarity tolerances must be positive"));
        }
        self.wave.validate()?;
        self.levelset.validate()?;
        self.weights.validate()?;
        if !(self.phi0.abs() <= 1.0 && self.phi_minus1.abs() <= 1.0) {
            return Err(Error::invalid("initial level set values must lie in [-1, 1]"));
        }
        if !(self.initial_ratio >= 0.0) || !(self.penalty > 0.0) || !(self.penalty_growth >= 1.0) || !(self.lambda0 >= 0.0) {
            return Err(Error::invalid("need initial_ratio >= 0, penalty > 0, penalty_growth >= 1, lambda0 >= 0"));
        }
        if !(self.penalty_max >= self.penalty) {
            return Err(Error::invalid("penalty_max must be at least penalty"));
        }
        if let Some(f) = &self.filter {
            if !(f.eta >= 0.0 && f.gamma > 0.0) {
                return Err(Error::invalid("filter needs eta >= 0 and gamma > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objectives: Vec<f64>,
    pub constraints: Vec<f64>,
    pub weights: Vec<f64>,
    pub q: Vec<f64>,
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCandidate {
    pub w_star: Vec<f64>,
    pub q_star: Vec<f64>,
    pub w_final: Vec<f64>,
    pub objectives: Vec<f64>,
    pub j_star: Vec<f64>,
    /// J / |J*|
    pub normalized: Vec<f64>,
    pub constraints: Vec<f64>,
    pub feasible: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub phi: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub levelset_clamps: usize,
    pub weight_clamps: usize,
}

impl SolutionCandidate {
    pub fn is_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }
}

/// True when every objective varied by at most `tol` (relative) over the
/// last `window` entries and the latest constraints are below `tol_g`.
pub fn stationarity(objectives: &[Vec<f64>], constraints: &[Vec<f64>], cfg: &Stationarity) -> bool {
    if objectives.len() < cfg.window {
        return false;
    }
    if let Some(last) = constraints.last() {
        if last.iter().any(|&g| !(g <= cfg.tol_g)) {
            return false;
        }
    }
    let recent = &objectives[objectives.len() - cfg.window..];
    let m = recent[0].len();
    (0..m).all(|a| {
        let (lo, hi) = recent
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| (lo.min(j[a]), hi.max(j[a])));
        let scale = recent.iter().map(|j| j[a].abs()).fold(0.0, f64::max).max(J_STAR_FLOOR);
        (hi - lo) / scale <= cfg.tol
    })
}

fn reference_values(j_star: &[f64]) -> Vec<f64> {
    j_star
        .iter()
        .enumerate()
        .map(|(a, j)| {
            if j.abs() < J_STAR_FLOOR {
                log::warn!("objective {} has |J*| < {J_STAR_FLOOR:e}; using 1 as reference", a + 1);
                1.0
            } else {
                j.abs()
            }
        })
        .collect()
}

/// Weight evolution, absent for single-objective problems.
struct Weights {
    state: Option<WeightState>,
    order: WeightOrder,
}

impl Weights {
    fn new(w_star: &[f64], cfg: &RunConfig) -> Result<Self> {
        let state = if w_star.len() > 1 {
            Some(WeightState::new(w_star, cfg.initial_ratio, cfg.weights, cfg.weight_order)?)
        } else {
            None
        };
        Ok(Self { state, order: cfg.weight_order })
    }

    fn q(&self) -> Vec<f64> {
        self.state.as_ref().map_or_else(Vec::new, |s| s.q().to_vec())
    }

    fn weights(&self) -> Vec<f64> {
        self.state.as_ref().map_or_else(|| vec![1.0], |s| s.weights())
    }

    fn step(&mut self, f: &[f64]) {
        if let Some(s) = &mut self.state {
            s.step(f);
        }
    }
}

/// Evolves one candidate from a uniform initial level set.
pub fn run_candidate(problem: &Problem, w_star: &[f64], cfg: &RunConfig) -> Result<SolutionCandidate> {
    cfg.validate()?;
    let m = problem.objective_count();
    if w_star.len() != m {
        return Err(Error::invalid(format!("reference weight has {} components, expected {m}", w_star.len())));
    }
    let mesh = &problem.mesh;
    let n = mesh.node_count();
    let wave = assemble_wave(mesh, cfg.wave);
    let mut ls = LevelSetState::initialize(
        &wave,
        cfg.levelset,
        &vec![cfg.phi0; n],
        &vec![cfg.phi_minus1; n],
        &problem.phi_dirichlet,
    )?;
    let mut weights = Weights::new(w_star, cfg)?;
    let q_star = weights.state.as_ref().map_or_else(Vec::new, |s| s.q_star().to_vec());
    let filter = match &cfg.filter {
        Some(f) => Some(HelmholtzFilter::new(mesh, f.eta, f.gamma)?),
        None => None,
    };
    let mut mult = Multipliers {
        volume: cfg.lambda0,
        stress: vec![cfg.lambda0; m],
    };
    let mut penalty = cfg.penalty;
    let b = cfg.levelset.interface_width;

    let mut j_star: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut objective_hist: Vec<Vec<f64>> = Vec::new();
    let mut constraint_hist: Vec<Vec<f64>> = Vec::new();
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut before: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut converged = false;
    let mut phi_final = ls.phi().to_vec();

    for s in 0..cfg.max_iterations {
        let fail = |e: Error| Error::CandidateFailure {
            iteration: s,
            source: Box::new(e),
        };
        if let (Some((q1, j1)), Some((q0, j0)), Some((js, _))) = (&previous, &before, &j_star) {
            let f = forcing(q1, Some((q0, j0)), j1, js, cfg.weights.ds, weights.order);
            weights.step(&f);
        }
        let w = weights.weights();
        let q = weights.q();

        let theta = element_average(mesh, &heaviside(ls.phi(), b));
        let analysis = analyze(problem, theta).map_err(fail)?;
        if j_star.is_none() {
            let js = analysis.objectives.clone();
            let reference = reference_values(&js);
            j_star = Some((js, reference));
        }
        let j_ref = &j_star.as_ref().expect("captured above").1;

        if let Some(g) = analysis.volume_g {
            mult.volume = update_multiplier(mult.volume, penalty, g);
        }
        for (lam, st) in mult.stress.iter_mut().zip(&analysis.stress) {
            if let Some(st) = st {
                *lam = update_multiplier(*lam, penalty, st.g);
            }
        }
        penalty = (penalty * cfg.penalty_growth).min(cfg.penalty_max);

        let constraints = analysis.constraint_values();
        history.push(IterationRecord {
            iteration: s,
            objectives: analysis.objectives.clone(),
            constraints: constraints.clone(),
            weights: w.clone(),
            q: q.clone(),
            multipliers: std::iter::once(mult.volume).chain(mult.stress.iter().copied()).collect(),
        });
        objective_hist.push(analysis.objectives.clone());
        constraint_hist.push(constraints);
        phi_final.copy_from_slice(ls.phi());
        before = previous.take();
        previous = Some((q, analysis.objectives.clone()));

        if stationarity(&objective_hist, &constraint_hist, &cfg.stationarity) {
            converged = true;
            break;
        }
        if s + 1 == cfg.max_iterations {
            break;
        }

        let v = adjoints(problem, &analysis, &w, j_ref, &mult).map_err(fail)?;
        let pert = perturbation(problem, &analysis, &v, &w, j_ref, &mult, problem.normalization).map_err(fail)?;
        let mut f = pert.to_nodes(mesh).total;
        if let Some(filter) = &filter {
            f = filter.apply(&f).map_err(fail)?;
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(fail(Error::SolverFailure("non-finite perturbation field".into())));
        }
        ls.step(&f).map_err(fail)?;
    }

    let last = history.last().ok_or_else(|| Error::invalid("no iterations performed"))?;
    let (js, j_ref) = j_star.expect("at least one iteration");
    Ok(SolutionCandidate {
        w_star: w_star.to_vec(),
        q_star,
        w_final: last.weights.clone(),
        normalized: last.objectives.iter().zip(&j_ref).map(|(j, r)| j / r).collect(),
        objectives: last.objectives.clone(),
        j_star: js,
        feasible: last.constraints.iter().map(|&g| g <= cfg.stationarity.tol_g).collect(),
        constraints: last.constraints.clone(),
        iterations: history.len(),
        converged,
        phi: phi_final,
        levelset_clamps: ls.clamp_events(),
        weight_clamps: weights.state.as_ref().map_or(0, |s| s.clamp_events()),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> Stationarity {
        Stationarity::default()
    }

    #[test]
    fn constant_feasible_history_is_stationary() {
        let j = vec![vec![1.0, 2.0]; 6];
        let g = vec![vec![-0.1]; 6];
        assert!(stationarity(&j, &g, &st()));
        assert!(!stationarity(&j[..4], &g[..4], &st()));
    }

    #[test]
    fn oscillating_history_is_not_stationary() {
        let j: Vec<Vec<f64>> = (0..8).map(|k| vec![if k % 2 == 0 { 1.1 } else { 0.9 }]).collect();
        assert!(!stationarity(&j, &vec![vec![]; 8], &st()));
    }

    #[test]
    fn infeasible_flat_history_is_not_stationary() {
        let j = vec![vec![1.0]; 6];
        let g = vec![vec![0.2]; 6];
        assert!(!stationarity(&j, &g, &st()));
    }
}
