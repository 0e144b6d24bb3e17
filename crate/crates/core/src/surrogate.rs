//! Analytic weight-to-objective maps for exercising the adaptive loop
//! without finite elements.

use serde::{Deserialize, Serialize};

use crate::asd::{Candidate, CandidateSolver};
use crate::error::{Error, Result};

/// J_α(w) = |x(w) − a_α|² with x(w) = Σ_β w_β a_β, the exact weighted-sum
/// minimizer of the quadratic objectives. The frontier is convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSurrogate {
    pub anchors: Vec<Vec<f64>>,
}

impl QuadraticSurrogate {
    pub fn new(anchors: Vec<Vec<f64>>) -> Result<Self> {
        let s = QuadraticSurrogate { anchors };
        s.validate()?;
        Ok(s)
    }

    /// Anchors 0 and 1 on a line: J = (w₂², w₁²).
    pub fn bi_objective() -> Self {
        QuadraticSurrogate { anchors: vec![vec![0.0], vec![1.0]] }
    }

    /// Anchors on an equilateral triangle.
    pub fn tri_objective() -> Self {
        QuadraticSurrogate {
            anchors: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.75f64.sqrt()]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.len() < 2 {
            return Err(Error::config("surrogate.anchors", "need at least two anchors"));
        }
        let d = self.anchors[0].len();
        if d == 0 || self.anchors.iter().any(|a| a.len() != d || a.iter().any(|x| !x.is_finite())) {
            return Err(Error::config("surrogate.anchors", "anchors must be finite points of equal dimension"));
        }
        Ok(())
    }

    pub fn evaluate(&self, w: &[f64]) -> Vec<f64> {
        let d = self.anchors[0].len();
        let x: Vec<f64> = (0..d).map(|k| w.iter().zip(&self.anchors).map(|(wb, a)| wb * a[k]).sum()).collect();
        self.anchors
            .iter()
            .map(|a| a.iter().zip(&x).map(|(ak, xk)| (xk - ak) * (xk - ak)).sum())
            .collect()
    }
}

impl CandidateSolver for QuadraticSurrogate {
    fn objective_count(&self) -> usize {
        self.anchors.len()
    }

    fn solve(&self, id: usize, level: usize, w_star: &[f64]) -> Result<Candidate> {
        if w_star.len() != self.anchors.len() {
            return Err(Error::invalid("weight dimension does not match the anchor count"));
        }
        let j = self.evaluate(w_star);
        Ok(Candidate {
            id,
            level,
            w_star: w_star.to_vec(),
            w_final: w_star.to_vec(),
            normalized: j.clone(),
            objectives: j,
            constraints: vec![],
            feasible: vec![],
            converged: true,
            iterations: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bi_objective_values() {
        let s = QuadraticSurrogate::bi_objective();
        let j = s.evaluate(&[0.7, 0.3]);
        assert!((j[0] - 0.09).abs() < 1e-15 && (j[1] - 0.49).abs() < 1e-15);
    }

    #[test]
    fn vertex_weights_zero_their_objective() {
        let s = QuadraticSurrogate::tri_objective();
        let j = s.evaluate(&[1.0, 0.0, 0.0]);
        assert_eq!(j[0], 0.0);
        assert!((j[1] - 1.0).abs() < 1e-15 && (j[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_anchors() {
        assert!(QuadraticSurrogate::new(vec![vec![0.0]]).is_err());
        assert!(QuadraticSurrogate::new(vec![vec![0.0], vec![1.0, 2.0]]).is_err());
    }
}
