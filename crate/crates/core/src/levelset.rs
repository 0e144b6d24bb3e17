//! Damped wave evolution of the level set function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{dot, ConstrainedSolver, CsrMatrix};

/// Wave speed coefficients C_ij; the operator uses their squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveCoefficients {
    pub c11: f64,
    pub c22: f64,
    #[serde(default)]
    pub c12: f64,
}

impl WaveCoefficients {
    pub fn isotropic(c: f64) -> Self {
        Self { c11: c, c22: c, c12: 0.0 }
    }

    fn squared(&self) -> [[f64; 2]; 2] {
        let c12 = self.c12 * self.c12;
        [[self.c11 * self.c11, c12], [c12, self.c22 * self.c22]]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c11 > 0.0 && self.c22 > 0.0) || !self.c12.is_finite() {
            return Err(Error::invalid("wave coefficients need positive diagonal entries"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WaveMatrices {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
}

pub fn assemble_wave(mesh: &Mesh, coeffs: WaveCoefficients) -> WaveMatrices {
    let pattern = CsrMatrix::from_element_dofs(mesh.node_count(), mesh.triangles().iter().map(|t| &t[..]));
    let mut mass = pattern.zeroed();
    let mut stiffness = pattern;
    let c = coeffs.squared();
    for (e, t) in mesh.triangles().iter().enumerate() {
        let area = mesh.element_areas()[e];
        let g = mesh.shape_gradients(e);
        for a in 0..3 {
            for b in 0..3 {
                let m = area / 12.0 * if a == b { 2.0 } else { 1.0 };
                mass.add(t[a], t[b], m);
                let k = c[0][0] * g[0][a] * g[0][b]
                    + c[0][1] * (g[0][a] * g[1][b] + g[1][a] * g[0][b])
                    + c[1][1] * g[1][a] * g[1][b];
                stiffness.add(t[a], t[b], area * k);
            }
        }
    }
    WaveMatrices { mass, stiffness }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetParams {
    /// B
    pub damping: f64,
    /// b
    pub interface_width: f64,
    pub ds: f64,
}

impl LevelSetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping >= 0.0) {
            return Err(Error::invalid("level set damping must be non-negative"));
        }
        if !(self.interface_width > 0.0) {
            return Err(Error::invalid("interface width must be positive"));
        }
        if !(self.ds > 0.0) {
            return Err(Error::invalid("step size must be positive"));
        }
        Ok(())
    }
}

/// Nodes carrying one of the given tags with their prescribed value. Later
/// entries win on shared nodes.
pub fn dirichlet_nodes(mesh: &Mesh, tags: &[(BoundaryTag, f64)]) -> Result<Vec<(usize, f64)>> {
    let mut values = std::collections::BTreeMap::new();
    for (tag, v) in tags {
        if !mesh.has_tag(tag) {
            return Err(Error::invalid(format!("level set boundary tag `{tag}` not present on mesh")));
        }
        for n in mesh.nodes_with_tag(tag) {
            values.insert(n, *v);
        }
    }
    Ok(values.into_iter().collect())
}

/// Two-slot history of φ with the factorized update operator.
pub struct LevelSetState {
    phi: Vec<f64>,
    phi_prev: Vec<f64>,
    params: LevelSetParams,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    solver: ConstrainedSolver,
    prescribed: Vec<Option<f64>>,
    clamp_events: usize,
    steps: usize,
}

impl LevelSetState {
    pub fn initialize(
        matrices: &WaveMatrices,
        params: LevelSetParams,
        phi0: &[f64],
        phi_minus1: &[f64],
        dirichlet: &[(usize, f64)],
    ) -> Result<Self> {
        params.validate()?;
        let n = matrices.mass.dim();
        if phi0.len() != n || phi_minus1.len() != n {
            return Err(Error::invalid(format!("initial fields must have {n} nodal values")));
        }
        if let Some(v) = phi0.iter().chain(phi_minus1).find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::invalid(format!("initial level set value {v} outside [-1, 1]")));
        }
        let mut prescribed = vec![None; n];
        for &(i, v) in dirichlet {
            if i >= n {
                return Err(Error::invalid(format!("dirichlet node {i} out of range")));
            }
            prescribed[i] = Some(v);
        }
        let bds = params.damping * params.ds;
        let mut a = matrices.mass.clone();
        a.scale(1.0 + bds);
        a.add_scaled(params.ds * params.ds, &matrices.stiffness);
        let fixed: Vec<usize> = dirichlet.iter().map(|&(i, _)| i).collect();
        let solver = ConstrainedSolver::new(a, &fixed)?;
        let stamp = |f: &[f64]| -> Vec<f64> {
            f.iter().zip(&prescribed).map(|(&x, p)| p.unwrap_or(x)).collect()
        };
        Ok(Self {
            phi: stamp(phi0),
            phi_prev: stamp(phi_minus1),
            params,
            mass: matrices.mass.clone(),
            stiffness: matrices.stiffness.clone(),
            solver,
            prescribed,
            clamp_events: 0,
            steps: 0,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_previous(&self) -> &[f64] {
        &self.phi_prev
    }

    pub fn params(&self) -> &LevelSetParams {
        &self.params
    }

    /// Number of nodal values clipped to [-1, 1] so far.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Discrete energy ½|Δφ/Δs|²_M + ½φᵀBφ of the current history.
    pub fn energy(&self) -> f64 {
        let v: Vec<f64> = self
            .phi
            .iter()
            .zip(&self.phi_prev)
            .map(|(a, b)| (a - b) / self.params.ds)
            .collect();
        0.5 * dot(&v, &self.mass.mul_vec(&v)) + 0.5 * dot(&self.phi, &self.stiffness.mul_vec(&self.phi))
    }

    /// Advances one step under the nodal forcing `f`; returns the new φ.
    pub fn step(&mut self, f: &[f64]) -> Result<&[f64]> {
        let iteration = self.steps;
        let p = self.params;
        let n = self.phi.len();
        if f.len() != n {
            return Err(Error::StepFailure {
                iteration,
                source: Box::new(Error::invalid(format!("forcing has {} values, expected {n}", f.len()))),
            });
        }
        let ds2 = p.ds * p.ds;
        let bds = p.damping * p.ds;
        let combo: Vec<f64> = (0..n)
            .map(|i| -f[i] * p.interface_width * ds2 + (2.0 + bds) * self.phi[i] - self.phi_prev[i])
            .collect();
        let rhs = self.mass.mul_vec(&combo);
        let prescribed = &self.prescribed;
        let mut next = self
            .solver
            .solve_with(&rhs, &|i| prescribed[i].unwrap_or(0.0))
            .map_err(|e| Error::StepFailure {
                iteration,
                source: Box::new(e),
            })?;
        for x in next.iter_mut() {
            if x.abs() > 1.0 {
                *x = x.clamp(-1.0, 1.0);
                self.clamp_events += 1;
            }
        }
        self.phi_prev = std::mem::replace(&mut self.phi, next);
        self.steps += 1;
        Ok(&self.phi)
    }
}
