//! Stick-breaking coordinates of the weight simplex and their damped
//! oscillator dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps w = (w_1..w_m) to q = (q_1..q_{m-1}) with
/// w_ν = (1 - q_ν) Π_{μ<ν} q_μ and w_m = Π q_μ.
pub fn stick_to_weights(q: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = q.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::invalid(format!("stick coordinate {v} outside (0, 1)")));
    }
    Ok(stick_to_weights_unchecked(q))
}

fn stick_to_weights_unchecked(q: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(q.len() + 1);
    let mut prod = 1.0;
    for &qm in q {
        w.push((1.0 - qm) * prod);
        prod *= qm;
    }
    w.push(prod);
    w
}

pub fn weights_to_stick(w: &[f64]) -> Result<Vec<f64>> {
    if w.len() < 2 {
        return Err(Error::invalid("need at least two weights"));
    }
    if let Some(v) = w.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::invalid(format!("negative weight {v}")));
    }
    let m = w.len();
    let mut tail = vec![0.0; m + 1];
    for k in (0..m).rev() {
        tail[k] = tail[k + 1] + w[k];
    }
    (0..m - 1)
        .map(|mu| {
            if tail[mu] > 0.0 {
                Ok(tail[mu + 1] / tail[mu])
            } else {
                Err(Error::invalid(format!("zero tail sum at stick coordinate {}", mu + 1)))
            }
        })
        .collect()
}

/// ∂w_α/∂q_μ, indexed `[α][μ]`.
pub fn stick_jacobian(q: &[f64]) -> Vec<Vec<f64>> {
    let m = q.len() + 1;
    let prod_except = |upto: usize, skip: usize| -> f64 {
        (0..upto).filter(|&k| k != skip).map(|k| q[k]).product()
    };
    let mut jac = vec![vec![0.0; m - 1]; m];
    for nu in 0..m {
        for mu in 0..m - 1 {
            jac[nu][mu] = if nu == m - 1 {
                prod_except(m - 1, mu)
            } else if mu < nu {
                (1.0 - q[nu]) * prod_except(nu, mu)
            } else if mu == nu {
                -prod_except(nu, usize::MAX)
            } else {
                0.0
            };
        }
    }
    jac
}

/// Component order used when mapping objective weights to stick coordinates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightOrder {
    #[default]
    Forward,
    /// Objective weights are reversed before the stick-breaking map, so
    /// that q_1 tracks the weight of the first objective for m = 2.
    Reversed,
}

impl WeightOrder {
    fn arrange(&self, w: &[f64]) -> Vec<f64> {
        let mut v = w.to_vec();
        if *self == WeightOrder::Reversed {
            v.reverse();
        }
        v
    }

    pub fn to_stick(&self, w: &[f64]) -> Result<Vec<f64>> {
        weights_to_stick(&self.arrange(w))
    }

    pub fn to_weights(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.arrange(&stick_to_weights(q)?))
    }

    pub fn jacobian(&self, q: &[f64]) -> Vec<Vec<f64>> {
        self.arrange_rows(stick_jacobian(q))
    }

    fn arrange_rows(&self, mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        if *self == WeightOrder::Reversed {
            rows.reverse();
        }
        rows
    }
}

/// g_μ = Σ_α ∂w_α/∂q_μ · J_α/J*_α.
pub fn sensitivity_gradient(q: &[f64], j: &[f64], j_star: &[f64], order: WeightOrder) -> Vec<f64> {
    let jac = order.jacobian(q);
    (0..q.len())
        .map(|mu| (0..jac.len()).map(|a| jac[a][mu] * j[a] / j_star[a]).sum())
        .collect()
}

/// Backward difference of the weighted-objective sensitivity between two
/// consecutive iterations; zero when no previous iterate exists.
pub fn forcing(
    q_now: &[f64],
    previous: Option<(&[f64], &[f64])>,
    j_now: &[f64],
    j_star: &[f64],
    ds: f64,
    order: WeightOrder,
) -> Vec<f64> {
    match previous {
        None => vec![0.0; q_now.len()],
        Some((q_prev, j_prev)) => {
            let g_now = sensitivity_gradient(q_now, j_now, j_star, order);
            let g_prev = sensitivity_gradient(q_prev, j_prev, j_star, order);
            g_now.iter().zip(&g_prev).map(|(a, b)| (a - b) / ds).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    /// M_q
    pub inertia: f64,
    /// B_q
    pub damping: f64,
    /// K_q
    pub stiffness: f64,
    pub eps: f64,
    pub ds: f64,
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.inertia > 0.0 && self.damping > 0.0 && self.stiffness > 0.0) {
            return Err(Error::invalid("weight dynamics need positive M_q, B_q and K_q"));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::invalid(format!("eps_q must lie in (0, 0.5), got {}", self.eps)));
        }
        if !(self.ds > 0.0) {
            return Err(Error::invalid("weight step size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WeightState {
    q: Vec<f64>,
    q_prev: Vec<f64>,
    q_star: Vec<f64>,
    params: WeightParams,
    order: WeightOrder,
    clamp_events: usize,
}

impl WeightState {
    /// Starts both history slots at `ratio · q*`, clamped to the admissible
    /// interval.
    pub fn new(w_star: &[f64], ratio: f64, params: WeightParams, order: WeightOrder) -> Result<Self> {
        params.validate()?;
        if (w_star.iter().sum::<f64>() - 1.0).abs() > 1e-9 || w_star.iter().any(|w| !(*w > 0.0 && *w < 1.0)) {
            return Err(Error::invalid(format!("reference weight {w_star:?} not in the open simplex")));
        }
        let q_star = order.to_stick(w_star)?;
        let mut state = Self {
            q: Vec::new(),
            q_prev: Vec::new(),
            q_star,
            params,
            order,
            clamp_events: 0,
        };
        let scaled: Vec<f64> = state.q_star.iter().map(|q| ratio * q).collect();
        let start: Vec<f64> = scaled.into_iter().map(|q| state.clamp(q)).collect();
        state.q = start.clone();
        state.q_prev = start;
        Ok(state)
    }

    fn clamp(&mut self, x: f64) -> f64 {
        let lo = self.params.eps;
        let hi = 1.0 - self.params.eps;
        if x < lo || x > hi {
            self.clamp_events += 1;
        }
        x.clamp(lo, hi)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q_previous(&self) -> &[f64] {
        &self.q_prev
    }

    pub fn q_star(&self) -> &[f64] {
        &self.q_star
    }

    pub fn order(&self) -> WeightOrder {
        self.order
    }

    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn weights(&self) -> Vec<f64> {
        self.order
            .to_weights(&self.q)
            .expect("state stays inside the open cube")
    }

    /// Explicit oscillator update; returns the new q.
    pub fn step(&mut self, forcing: &[f64]) -> &[f64] {
        let p = self.params;
        let ds2 = p.ds * p.ds;
        let denom = p.inertia + p.damping * p.ds + p.stiffness * ds2;
        let raw: Vec<f64> = (0..self.q.len())
            .map(|mu| {
                ((2.0 * p.inertia + p.damping * p.ds) * self.q[mu] - p.inertia * self.q_prev[mu]
                    + (p.stiffness * self.q_star[mu] - forcing[mu]) * ds2)
                    / denom
            })
            .collect();
        let next: Vec<f64> = raw.into_iter().map(|q| self.clamp(q)).collect();
        self.q_prev = std::mem::replace(&mut self.q, next);
        &self.q
    }

    /// Oscillator update without clamping, for checking the scheme itself.
    pub fn raw_update(q: f64, q_prev: f64, q_star: f64, forcing: f64, p: &WeightParams) -> f64 {
        let ds2 = p.ds * p.ds;
        ((2.0 * p.inertia + p.damping * p.ds) * q - p.inertia * q_prev + (p.stiffness * q_star - forcing) * ds2)
            / (p.inertia + p.damping * p.ds + p.stiffness * ds2)
    }
}
