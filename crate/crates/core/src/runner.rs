//! Finite element candidate solver for the adaptive loop.

use std::path::PathBuf;

use log::info;

use crate::asd::{Candidate, CandidateSolver};
use crate::error::Result;
use crate::optimizer::{run_candidate, RunConfig};
use crate::output::{export_field, log_name, snapshot_name, write_iteration_log};
use crate::problem::Problem;

pub struct FemSolver {
    pub problem: Problem,
    pub run: RunConfig,
    /// Where iteration logs and final snapshots go; nothing is written if unset.
    pub output: Option<PathBuf>,
}

impl FemSolver {
    pub fn new(problem: Problem, run: RunConfig, output: Option<PathBuf>) -> Self {
        FemSolver { problem, run, output }
    }
}

impl CandidateSolver for FemSolver {
    fn objective_count(&self) -> usize {
        self.problem.objective_count()
    }

    fn solve(&self, id: usize, level: usize, w_star: &[f64]) -> Result<Candidate> {
        let c = run_candidate(&self.problem, w_star, &self.run)?;
        info!(
            "candidate {id} w*={w_star:.3?}: J={:.5?} G={:.3e} {} iterations{}",
            c.objectives,
            c.constraints.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            c.iterations,
            if c.converged { "" } else { " (not stationary)" }
        );
        if let Some(dir) = &self.output {
            write_iteration_log(&dir.join(log_name(id)), &c.history)?;
            export_field(&dir.join(snapshot_name(id)), &self.problem.mesh, &c.phi)?;
        }
        Ok(Candidate {
            id,
            level,
            w_star: c.w_star,
            w_final: c.w_final,
            objectives: c.objectives,
            normalized: c.normalized,
            constraints: c.constraints,
            feasible: c.feasible,
            converged: c.converged,
            iterations: c.iterations,
        })
    }
}
