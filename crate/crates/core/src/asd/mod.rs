//! Adaptive simplex decomposition over the reference-weight simplex.

pub mod delaunay;

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights closer than this (max-norm) count as the same reference weight.
pub const WEIGHT_DEDUP_TOL: f64 = 1e-9;

/// One entry of the solution register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub level: usize,
    pub w_star: Vec<f64>,
    pub w_final: Vec<f64>,
    pub objectives: Vec<f64>,
    pub normalized: Vec<f64>,
    pub constraints: Vec<f64>,
    pub feasible: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
}

impl Candidate {
    pub fn is_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }
}

/// Produces one candidate per reference weight. Implementations must be
/// safe to call from several threads at once.
pub trait CandidateSolver: Sync {
    fn objective_count(&self) -> usize;
    fn solve(&self, id: usize, level: usize, w_star: &[f64]) -> Result<Candidate>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsdParams {
    pub l_s_max: f64,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    #[serde(default = "default_dedup_tol")]
    pub dedup_tol: f64,
}

fn default_max_levels() -> usize {
    6
}

fn default_dedup_tol() -> f64 {
    1e-3
}

impl AsdParams {
    pub fn new(l_s_max: f64) -> Self {
        AsdParams {
            l_s_max,
            max_levels: default_max_levels(),
            dedup_tol: default_dedup_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_s_max > 0.0 && self.l_s_max.is_finite()) {
            return Err(Error::config("asd.l_s_max", "must be positive"));
        }
        if !(self.dedup_tol >= 0.0) {
            return Err(Error::config("asd.dedup_tol", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexComplex {
    pub simplices: Vec<Vec<usize>>,
    /// Unique edges as (a, b, length) with a < b.
    pub edges: Vec<(usize, usize, f64)>,
    pub poor: Vec<bool>,
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub candidates: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct FailedRun {
    pub id: usize,
    pub level: usize,
    pub w_star: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct AsdOutcome {
    pub register: Vec<Candidate>,
    pub frontier: Vec<Candidate>,
    pub history: Vec<LevelRecord>,
    pub failures: Vec<FailedRun>,
    pub dedup_removed: usize,
}

/// Min–max scaling per objective; constant objectives map to 0.
pub fn normalize_objectives(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(m) = points.first().map(Vec::len) else {
        return vec![];
    };
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in points {
        for a in 0..m {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    points
        .iter()
        .map(|p| {
            (0..m)
                .map(|a| if hi[a] > lo[a] { (p[a] - lo[a]) / (hi[a] - lo[a]) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Simplex complex over reference weights with edge lengths measured in the
/// normalized objective space.
pub fn build_complex(weights: &[Vec<f64>], objectives: &[Vec<f64>], l_s_max: f64) -> Result<SimplexComplex> {
    let n = weights.len();
    let m = weights.first().map_or(0, Vec::len);
    if m < 2 || n < m || objectives.len() != n {
        return Err(Error::invalid(format!("need at least {m} candidates with objectives to build a complex, got {n}")));
    }
    let mut fallback = false;
    let simplices = if m == 2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| weights[a][0].total_cmp(&weights[b][0]));
        order.windows(2).map(|w| vec![w[0].min(w[1]), w[0].max(w[1])]).collect()
    } else {
        let chart: Vec<Vec<f64>> = weights.iter().map(|w| w[..m - 1].to_vec()).collect();
        match delaunay::delaunay(&chart) {
            Some(s) => s,
            None => {
                warn!("weight set is degenerate for Delaunay; using a lexicographic fan");
                fallback = true;
                delaunay::fan(&chart)
            }
        }
    };
    let normalized = normalize_objectives(objectives);
    let mut lengths: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut poor = Vec::with_capacity(simplices.len());
    for s in &simplices {
        let mut longest = 0.0f64;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let key = (s[i].min(s[j]), s[i].max(s[j]));
                let l = *lengths.entry(key).or_insert_with(|| distance(&normalized[key.0], &normalized[key.1]));
                longest = longest.max(l);
            }
        }
        poor.push(longest > l_s_max);
    }
    let edges = lengths.into_iter().map(|((a, b), l)| (a, b, l)).collect();
    Ok(SimplexComplex { simplices, edges, poor, fallback })
}

/// Arithmetic mean and population standard deviation over unique edges.
pub fn mean_edge_length(complex: &SimplexComplex) -> (f64, f64) {
    let n = complex.edges.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = complex.edges.iter().map(|e| e.2).sum::<f64>() / n as f64;
    let var = complex.edges.iter().map(|e| (e.2 - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

fn same_weight(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= WEIGHT_DEDUP_TOL)
}

/// Edge midpoints of every poor simplex, skipping weights already in `known`.
pub fn mark_and_refine(complex: &SimplexComplex, weights: &[Vec<f64>], known: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (s, &poor) in complex.simplices.iter().zip(&complex.poor) {
        if !poor {
            continue;
        }
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let mid: Vec<f64> = weights[s[i]].iter().zip(&weights[s[j]]).map(|(a, b)| 0.5 * (a + b)).collect();
                if !known.iter().chain(out.iter()).any(|k| same_weight(k, &mid)) {
                    out.push(mid);
                }
            }
        }
    }
    out
}

/// Indices of the non-dominated points, in input order. Equal vectors do not
/// dominate each other.
pub fn pareto_filter(points: &[Vec<f64>]) -> Vec<usize> {
    let lex = |a: &Vec<f64>, b: &Vec<f64>| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex(&points[a], &points[b]));
    // a dominator is always lexicographically smaller, and some dominator is
    // itself non-dominated, so checking against the kept front suffices
    let mut front: Vec<usize> = Vec::new();
    for &i in &order {
        if !front.iter().any(|&k| dominates(&points[k], &points[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Greedy pass in input order; keeps a point iff it is farther than `tol`
/// from every kept point in min–max normalized objective space.
pub fn dedup(points: &[Vec<f64>], tol: f64) -> Vec<usize> {
    let normalized = normalize_objectives(points);
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in normalized.iter().enumerate() {
        if kept.iter().all(|&k| distance(&normalized[k], p) > tol) {
            kept.push(i);
        }
    }
    kept
}

fn check_weights(w: &[f64], m: usize) -> Result<()> {
    if w.len() != m {
        return Err(Error::invalid(format!("reference weight has {} components, expected {m}", w.len())));
    }
    if w.iter().any(|&x| !(x > 0.0 && x < 1.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("reference weight {w:?} is not in the open simplex")));
    }
    Ok(())
}

/// Runs the candidates for one level, in parallel when a pool is given.
fn run_level(
    solver: &dyn CandidateSolver,
    pool: Option<&rayon::ThreadPool>,
    first_id: usize,
    level: usize,
    weights: &[Vec<f64>],
) -> Vec<Result<Candidate>> {
    let job = |(k, w): (usize, &Vec<f64>)| {
        let id = first_id + k;
        solver.solve(id, level, w).map(|mut c| {
            c.id = id;
            c.level = level;
            c
        })
    };
    match pool {
        Some(p) => p.install(|| weights.par_iter().enumerate().map(job).collect()),
        None => weights.iter().enumerate().map(job).collect(),
    }
}

/// The adaptive loop. `on_level` sees the merged register and the level
/// statistics after every level, so callers can persist partial results.
pub fn run_asd(
    solver: &dyn CandidateSolver,
    initial: &[Vec<f64>],
    params: &AsdParams,
    jobs: usize,
    mut on_level: impl FnMut(&[Candidate], &LevelRecord) -> Result<()>,
) -> Result<AsdOutcome> {
    params.validate()?;
    let m = solver.objective_count();
    if m < 2 {
        return Err(Error::invalid("adaptive simplex decomposition needs at least two objectives"));
    }
    if initial.len() < m {
        return Err(Error::invalid(format!("need at least {m} initial reference weights, got {}", initial.len())));
    }
    for w in initial {
        check_weights(w, m)?;
    }
    let pool = if jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };

    let mut register: Vec<Candidate> = Vec::new();
    let mut failures: Vec<FailedRun> = Vec::new();
    let mut history: Vec<LevelRecord> = Vec::new();
    let mut attempted: Vec<Vec<f64>> = Vec::new();
    let mut pending: Vec<Vec<f64>> = Vec::new();
    for w in initial {
        if !pending.iter().any(|k| same_weight(k, w)) {
            pending.push(w.clone());
        }
    }
    let mut level = 0;
    loop {
        info!("level {level}: running {} candidates", pending.len());
        let results = run_level(solver, pool.as_ref(), attempted.len(), level, &pending);
        let mut ok = 0;
        for (k, (r, w)) in results.into_iter().zip(&pending).enumerate() {
            match r {
                Ok(c) => {
                    ok += 1;
                    register.push(c);
                }
                Err(e) => {
                    warn!("candidate for w* = {w:?} failed: {e}");
                    failures.push(FailedRun {
                        id: attempted.len() + k,
                        level,
                        w_star: w.clone(),
                        message: e.to_string(),
                    });
                }
            }
        }
        attempted.extend(pending.drain(..));
        if ok == 0 {
            return Err(Error::AllCandidatesFailed { level });
        }
        register.sort_by_key(|c| c.id);

        let weights: Vec<Vec<f64>> = register.iter().map(|c| c.w_star.clone()).collect();
        let objectives: Vec<Vec<f64>> = register.iter().map(|c| c.objectives.clone()).collect();
        let complex = build_complex(&weights, &objectives, params.l_s_max)?;
        let (mean, std) = mean_edge_length(&complex);
        let record = LevelRecord { level, candidates: register.len(), mean, std };
        info!("level {level}: {} candidates, mean edge {mean:.5}, std {std:.5}", register.len());
        history.push(record);
        on_level(&register, &record)?;

        if mean <= params.l_s_max || level >= params.max_levels {
            break;
        }
        pending = mark_and_refine(&complex, &weights, &attempted);
        if pending.is_empty() {
            break;
        }
        level += 1;
    }

    let objectives: Vec<Vec<f64>> = register.iter().map(|c| c.objectives.clone()).collect();
    let kept = dedup(&objectives, params.dedup_tol);
    let dedup_removed = register.len() - kept.len();
    let survivors: Vec<Vec<f64>> = kept.iter().map(|&i| objectives[i].clone()).collect();
    let frontier = pareto_filter(&survivors).into_iter().map(|i| register[kept[i]].clone()).collect();
    Ok(AsdOutcome { register, frontier, history, failures, dedup_removed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: &[f64]) -> Vec<f64> {
        a.to_vec()
    }

    #[test]
    fn normalization_examples() {
        let n = normalize_objectives(&[v(&[0.0, 2.0]), v(&[1.0, 1.0]), v(&[2.0, 0.0])]);
        assert_eq!(n, vec![v(&[0.0, 1.0]), v(&[0.5, 0.5]), v(&[1.0, 0.0])]);
        let n = normalize_objectives(&[v(&[3.0, 3.0]), v(&[3.0, 3.0])]);
        assert!(n.iter().flatten().all(|&x| x == 0.0));
        let n = normalize_objectives(&[v(&[1.0, 5.0]), v(&[4.0, 2.0])]);
        assert_eq!(n, vec![v(&[0.0, 1.0]), v(&[1.0, 0.0])]);
    }

    #[test]
    fn bi_objective_complex_is_sorted_path() {
        let w = vec![v(&[0.9, 0.1]), v(&[0.1, 0.9]), v(&[0.5, 0.5])];
        let j = vec![v(&[1.0, 3.0]), v(&[3.0, 1.0]), v(&[2.0, 2.0])];
        let c = build_complex(&w, &j, 0.04).unwrap();
        assert_eq!(c.simplices, vec![vec![1, 2], vec![0, 2]]);
        assert_eq!(c.edges.len(), 2);
    }

    #[test]
    fn tri_objective_complexes() {
        let w = vec![v(&[0.70, 0.15, 0.15]), v(&[0.15, 0.70, 0.15]), v(&[0.15, 0.15, 0.70])];
        let j = vec![v(&[1.0, 2.0, 3.0]), v(&[2.0, 1.0, 3.0]), v(&[3.0, 2.0, 1.0])];
        let c = build_complex(&w, &j, 0.1).unwrap();
        assert_eq!(c.simplices.len(), 1);
        assert_eq!(c.edges.len(), 3);
        assert!(!c.fallback);
    }

    #[test]
    fn refinement_emits_midpoints() {
        let w = vec![v(&[0.9, 0.1]), v(&[0.1, 0.9])];
        let j = vec![v(&[1.0, 3.0]), v(&[3.0, 1.0])];
        let c = build_complex(&w, &j, 0.04).unwrap();
        assert_eq!(c.poor, vec![true]);
        let new = mark_and_refine(&c, &w, &w);
        assert_eq!(new.len(), 1);
        assert!((new[0][0] - 0.5).abs() < 1e-15 && (new[0][1] - 0.5).abs() < 1e-15);

        let c = build_complex(&w, &j, 2.0).unwrap();
        assert!(mark_and_refine(&c, &w, &w).is_empty());

        let w3 = vec![v(&[0.70, 0.15, 0.15]), v(&[0.15, 0.70, 0.15]), v(&[0.15, 0.15, 0.70])];
        let j3 = vec![v(&[1.0, 2.0, 3.0]), v(&[2.0, 1.0, 3.0]), v(&[3.0, 2.0, 1.0])];
        let c = build_complex(&w3, &j3, 0.1).unwrap();
        let new = mark_and_refine(&c, &w3, &w3);
        assert_eq!(new.len(), 3);
        for x in &new {
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        // already-known midpoints are not emitted again
        let mut known = w3.clone();
        known.push(new[0].clone());
        assert_eq!(mark_and_refine(&c, &w3, &known).len(), 2);
    }

    #[test]
    fn edge_statistics() {
        let one = SimplexComplex { simplices: vec![], edges: vec![(0, 1, 0.5)], poor: vec![], fallback: false };
        assert_eq!(mean_edge_length(&one), (0.5, 0.0));
        let two = SimplexComplex {
            simplices: vec![],
            edges: vec![(0, 1, 0.2), (1, 2, 0.4)],
            poor: vec![],
            fallback: false,
        };
        let (m, s) = mean_edge_length(&two);
        assert!((m - 0.3).abs() < 1e-15 && (s - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto_filter(&[v(&[1.0, 2.0]), v(&[2.0, 1.0]), v(&[2.0, 2.0])]), vec![0, 1]);
        assert_eq!(pareto_filter(&[v(&[4.0, 4.0])]), vec![0]);
        assert_eq!(pareto_filter(&[v(&[1.0, 1.0]), v(&[1.0, 1.0])]), vec![0, 1]);
    }

    #[test]
    fn dedup_examples() {
        assert_eq!(dedup(&[v(&[1.0, 2.0]), v(&[1.0, 2.0]), v(&[2.0, 1.0])], 1e-3), vec![0, 2]);
        assert_eq!(dedup(&[v(&[0.0, 1.0]), v(&[0.5, 0.5]), v(&[1.0, 0.0])], 1e-3), vec![0, 1, 2]);
        assert_eq!(dedup(&[v(&[0.0, 1.0]), v(&[0.0004, 0.9996]), v(&[1.0, 0.0])], 1e-3), vec![0, 2]);
    }

    struct Quadratic;

    impl CandidateSolver for Quadratic {
        fn objective_count(&self) -> usize {
            2
        }
        fn solve(&self, _id: usize, _level: usize, w: &[f64]) -> Result<Candidate> {
            if (w[0] - 0.3).abs() < 1e-12 {
                return Err(Error::invalid("scripted failure"));
            }
            Ok(Candidate {
                id: 0,
                level: 0,
                w_star: w.to_vec(),
                w_final: w.to_vec(),
                objectives: vec![w[1] * w[1], w[0] * w[0]],
                normalized: vec![w[1] * w[1], w[0] * w[0]],
                constraints: vec![],
                feasible: vec![],
                converged: true,
                iterations: 1,
            })
        }
    }

    #[test]
    fn failed_candidates_stay_out_of_register() {
        let params = AsdParams::new(0.05);
        let init = vec![v(&[0.9, 0.1]), v(&[0.1, 0.9])];
        let out = run_asd(&Quadratic, &init, &params, 1, |_, _| Ok(())).unwrap();
        assert!(!out.failures.is_empty());
        assert!(out.register.iter().all(|c| (c.w_star[0] - 0.3).abs() > 1e-12));
        let ids: Vec<usize> = out.register.iter().map(|c| c.id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn parallel_and_serial_registers_agree() {
        let params = AsdParams::new(0.05);
        let init = vec![v(&[0.9, 0.1]), v(&[0.1, 0.9])];
        let a = run_asd(&Quadratic, &init, &params, 1, |_, _| Ok(())).unwrap();
        let b = run_asd(&Quadratic, &init, &params, 4, |_, _| Ok(())).unwrap();
        assert_eq!(a.register, b.register);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn max_levels_cap() {
        let params = AsdParams { l_s_max: 1e-9, max_levels: 2, dedup_tol: 1e-3 };
        let init = vec![v(&[0.9, 0.1]), v(&[0.1, 0.9])];
        let out = run_asd(&Quadratic, &init, &params, 1, |_, _| Ok(())).unwrap();
        assert_eq!(out.history.len(), 3);
        assert_eq!(out.history.last().unwrap().level, 2);
    }
}
