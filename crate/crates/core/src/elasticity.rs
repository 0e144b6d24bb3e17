//! Plane-strain linear elasticity on P1 triangles with Ersatz material
//! scaling, boundary springs and von Mises stress evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{ConstrainedSolver, CsrMatrix, SkylineSymbolic};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    /// Young's modulus, N/mm²
    pub e: f64,
    pub nu: f64,
    /// Ersatz exponent
    pub a: f64,
    /// Ersatz floor
    pub d: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            e: 1.0,
            nu: 0.3,
            a: 3.0,
            d: 1e-3,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0) {
            return Err(Error::invalid(format!("Young's modulus must be positive, got {}", self.e)));
        }
        if !(0.0..0.5).contains(&self.nu) {
            return Err(Error::invalid(format!("Poisson ratio must lie in [0, 0.5), got {}", self.nu)));
        }
        if !(self.a > 1.0) {
            return Err(Error::invalid(format!("Ersatz exponent must exceed 1, got {}", self.a)));
        }
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(Error::invalid(format!("Ersatz floor must lie in (0, 1), got {}", self.d)));
        }
        Ok(())
    }

    /// Plane-strain constitutive matrix in Voigt order (xx, yy, xy) with
    /// engineering shear strain.
    pub fn d_matrix(&self) -> [[f64; 3]; 3] {
        let lambda = self.e * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu));
        let mu = self.e / (2.0 * (1.0 + self.nu));
        [
            [lambda + 2.0 * mu, lambda, 0.0],
            [lambda, lambda + 2.0 * mu, 0.0],
            [0.0, 0.0, mu],
        ]
    }
}

pub fn heaviside_scalar(phi: f64, b: f64) -> f64 {
    0.5 * ((2.0 * b * phi).tanh() + 1.0)
}

pub fn heaviside(phi: &[f64], b: f64) -> Vec<f64> {
    phi.iter().map(|&p| heaviside_scalar(p, b)).collect()
}

/// Zeroth-order truncation of the smoothed Dirac delta.
pub fn dirac_const(b: f64) -> f64 {
    b
}

pub fn tau_scalar(theta: f64, mat: &MaterialParams) -> f64 {
    (1.0 - mat.d) * theta.powf(mat.a) + mat.d
}

/// Simplified derivative a(1-d)Θ, exact for Θ in {0, 1}.
pub fn dtau_scalar(theta: f64, mat: &MaterialParams) -> f64 {
    mat.a * (1.0 - mat.d) * theta
}

pub fn ersatz_tau(theta: &[f64], mat: &MaterialParams) -> Vec<f64> {
    theta.iter().map(|&t| tau_scalar(t, mat)).collect()
}

pub fn ersatz_dtau(theta: &[f64], mat: &MaterialParams) -> Vec<f64> {
    theta.iter().map(|&t| dtau_scalar(t, mat)).collect()
}

/// Mean of the three nodal values on every triangle.
pub fn element_average(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0)
        .collect()
}

/// Area-weighted projection of element values onto nodes.
pub fn element_to_nodes(mesh: &Mesh, values: &[f64]) -> Vec<f64> {
    let mut num = vec![0.0; mesh.node_count()];
    let mut den = vec![0.0; mesh.node_count()];
    for ((t, &a), &v) in mesh.triangles().iter().zip(mesh.element_areas()).zip(values) {
        for &i in t {
            num[i] += a * v;
            den[i] += a;
        }
    }
    num.iter().zip(&den).map(|(n, d)| if *d > 0.0 { n / d } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traction {
    pub tag: BoundaryTag,
    /// Force per unit boundary length, N/mm.
    pub value: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spring {
    pub tag: BoundaryTag,
    /// N/mm
    pub stiffness: f64,
    pub direction: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    X,
    Y,
    Both,
}

/// Constraint on the node nearest to a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConstraint {
    pub at: [f64; 2],
    pub dof: Dof,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Supports {
    /// Both displacement components fixed.
    #[serde(default)]
    pub clamped: Vec<BoundaryTag>,
    /// Normal component fixed.
    #[serde(default)]
    pub rollers: Vec<BoundaryTag>,
    #[serde(default)]
    pub points: Vec<PointConstraint>,
}

/// Nodal load vector of the given tractions, lumped half per edge node.
pub fn load_vector(mesh: &Mesh, tractions: &[Traction]) -> Result<Vec<f64>> {
    let mut f = vec![0.0; 2 * mesh.node_count()];
    for t in tractions {
        if !mesh.has_tag(&t.tag) {
            return Err(Error::invalid(format!("traction tag `{}` not present on mesh", t.tag)));
        }
        for edge in mesh.edges_with_tag(&t.tag) {
            let half = 0.5 * mesh.edge_length(edge);
            for &n in &edge.nodes {
                f[2 * n] += half * t.value[0];
                f[2 * n + 1] += half * t.value[1];
            }
        }
    }
    Ok(f)
}

/// Load vector of a uniform line density `r` on `tag`.
pub fn line_functional(mesh: &Mesh, tag: &BoundaryTag, r: [f64; 2]) -> Result<Vec<f64>> {
    load_vector(
        mesh,
        &[Traction {
            tag: tag.clone(),
            value: r,
        }],
    )
}

#[derive(Debug, Clone)]
struct SpringEdge {
    nodes: [usize; 2],
    length: f64,
    stiffness: f64,
    direction: [f64; 2],
}

/// Matrix, right-hand side and Dirichlet set of one state problem.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub fixed_dofs: Vec<usize>,
}

/// Discrete elasticity operator for one mesh and one set of supports and
/// springs. Element stiffnesses are cached at unit τ.
#[derive(Debug, Clone)]
pub struct ElasticModel {
    n_dofs: usize,
    dofs: Vec<[usize; 6]>,
    /// (dN/dx, dN/dy) of the three local shape functions
    grads: Vec<[[f64; 3]; 2]>,
    areas: Vec<f64>,
    material: MaterialParams,
    d: [[f64; 3]; 3],
    k_unit: Vec<[[f64; 6]; 6]>,
    pattern: CsrMatrix,
    slots: Vec<[usize; 36]>,
    springs: Vec<SpringEdge>,
    fixed: Vec<usize>,
    symbolic: SkylineSymbolic,
}

impl ElasticModel {
    pub fn new(mesh: &Mesh, material: MaterialParams, supports: &Supports, springs: &[Spring]) -> Result<Self> {
        material.validate()?;
        let n_dofs = 2 * mesh.node_count();
        let d = material.d_matrix();
        let mut dofs = Vec::with_capacity(mesh.element_count());
        let mut grads = Vec::with_capacity(mesh.element_count());
        let mut k_unit = Vec::with_capacity(mesh.element_count());
        for (e, (t, &area)) in mesh.triangles().iter().zip(mesh.element_areas()).enumerate() {
            let g = mesh.shape_gradients(e);
            let b = strain_matrix(&g);
            let mut ke = [[0.0; 6]; 6];
            for r in 0..6 {
                for c in 0..6 {
                    let mut s = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            s += b[i][r] * d[i][j] * b[j][c];
                        }
                    }
                    ke[r][c] = s * area;
                }
            }
            dofs.push([2 * t[0], 2 * t[0] + 1, 2 * t[1], 2 * t[1] + 1, 2 * t[2], 2 * t[2] + 1]);
            grads.push(g);
            k_unit.push(ke);
        }
        let pattern = CsrMatrix::from_element_dofs(n_dofs, dofs.iter().map(|d| &d[..]));
        let slots = dofs
            .iter()
            .map(|ed| {
                let mut s = [0usize; 36];
                for r in 0..6 {
                    for c in 0..6 {
                        s[6 * r + c] = pattern.position(ed[r], ed[c]).expect("element dof in pattern");
                    }
                }
                s
            })
            .collect();

        let mut spring_edges = Vec::new();
        for s in springs {
            if !(s.stiffness >= 0.0) {
                return Err(Error::invalid(format!("spring on `{}` has negative stiffness", s.tag)));
            }
            let n = (s.direction[0].powi(2) + s.direction[1].powi(2)).sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("spring direction on `{}` is not a unit vector", s.tag)));
            }
            if !mesh.has_tag(&s.tag) {
                return Err(Error::invalid(format!("spring tag `{}` not present on mesh", s.tag)));
            }
            for e in mesh.edges_with_tag(&s.tag) {
                spring_edges.push(SpringEdge {
                    nodes: e.nodes,
                    length: mesh.edge_length(e),
                    stiffness: s.stiffness,
                    direction: s.direction,
                });
            }
        }

        let mut fixed = Vec::new();
        for tag in &supports.clamped {
            if !mesh.has_tag(tag) {
                return Err(Error::invalid(format!("support tag `{tag}` not present on mesh")));
            }
            for n in mesh.nodes_with_tag(tag) {
                fixed.push(2 * n);
                fixed.push(2 * n + 1);
            }
        }
        for tag in &supports.rollers {
            if !mesh.has_tag(tag) {
                return Err(Error::invalid(format!("roller tag `{tag}` not present on mesh")));
            }
            for edge in mesh.edges_with_tag(tag) {
                let n = mesh.outward_normal(edge);
                let comp = if n[0].abs() >= n[1].abs() { 0 } else { 1 };
                for &node in &edge.nodes {
                    fixed.push(2 * node + comp);
                }
            }
        }
        for pc in &supports.points {
            let node = mesh.nearest_node(pc.at);
            match pc.dof {
                Dof::X => fixed.push(2 * node),
                Dof::Y => fixed.push(2 * node + 1),
                Dof::Both => fixed.extend([2 * node, 2 * node + 1]),
            }
        }
        fixed.sort_unstable();
        fixed.dedup();
        let has_spring = spring_edges.iter().any(|s| s.stiffness > 0.0);
        if fixed.is_empty() && !has_spring {
            return Err(Error::SingularSystem(
                "no supports, rollers or springs restrain the body".into(),
            ));
        }
        let symbolic = SkylineSymbolic::new(&pattern);
        Ok(Self {
            n_dofs,
            dofs,
            grads,
            areas: mesh.element_areas().to_vec(),
            material,
            d,
            k_unit,
            pattern,
            slots,
            springs: spring_edges,
            fixed,
            symbolic,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.n_dofs
    }

    pub fn element_count(&self) -> usize {
        self.areas.len()
    }

    pub fn material(&self) -> &MaterialParams {
        &self.material
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed
    }

    pub fn has_springs(&self) -> bool {
        !self.springs.is_empty()
    }

    /// Domain stiffness ∫τ ℂε(u)ε(v), without springs or constraints.
    pub fn domain_stiffness(&self, tau: &[f64]) -> CsrMatrix {
        let mut k = self.pattern.zeroed();
        let vals = k.values_mut();
        for ((ke, slots), &t) in self.k_unit.iter().zip(&self.slots).zip(tau) {
            for r in 0..6 {
                for c in 0..6 {
                    vals[slots[6 * r + c]] += t * ke[r][c];
                }
            }
        }
        k
    }

    /// Adds the spring terms ∫k (r·u)(r·v) dΓ with the consistent edge mass.
    pub fn add_springs(&self, k: &mut CsrMatrix) {
        for s in &self.springs {
            let rr = [
                [s.direction[0] * s.direction[0], s.direction[0] * s.direction[1]],
                [s.direction[1] * s.direction[0], s.direction[1] * s.direction[1]],
            ];
            for (a, &na) in s.nodes.iter().enumerate() {
                for (b, &nb) in s.nodes.iter().enumerate() {
                    let m = s.length / 6.0 * if a == b { 2.0 } else { 1.0 };
                    for i in 0..2 {
                        for j in 0..2 {
                            let v = s.stiffness * m * rr[i][j];
                            if v != 0.0 {
                                k.add(2 * na + i, 2 * nb + j, v);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Full operator (domain plus springs).
    pub fn stiffness(&self, tau: &[f64]) -> CsrMatrix {
        let mut k = self.domain_stiffness(tau);
        self.add_springs(&mut k);
        k
    }

    pub fn assemble_state(&self, tau: &[f64], rhs: Vec<f64>) -> SparseSystem {
        SparseSystem {
            matrix: self.stiffness(tau),
            rhs,
            fixed_dofs: self.fixed.clone(),
        }
    }

    /// Constrained factorization of `matrix`, reusing the cached ordering.
    pub fn factor(&self, matrix: CsrMatrix) -> Result<ConstrainedSolver> {
        ConstrainedSolver::with_symbolic(matrix, &self.fixed, &self.symbolic)
    }

    pub fn element_dofs(&self, e: usize) -> [usize; 6] {
        self.dofs[e]
    }

    pub fn strain(&self, e: usize, u: &[f64]) -> [f64; 3] {
        let g = &self.grads[e];
        let dofs = &self.dofs[e];
        let mut eps = [0.0; 3];
        for i in 0..3 {
            let ux = u[dofs[2 * i]];
            let uy = u[dofs[2 * i + 1]];
            eps[0] += g[0][i] * ux;
            eps[1] += g[1][i] * uy;
            eps[2] += g[1][i] * ux + g[0][i] * uy;
        }
        eps
    }

    pub fn strains(&self, u: &[f64]) -> Vec<[f64; 3]> {
        (0..self.element_count()).map(|e| self.strain(e, u)).collect()
    }

    /// Solid-material stress (σxx, σyy, σxy).
    pub fn stress(&self, e: usize, u: &[f64]) -> [f64; 3] {
        mat_vec(&self.d, &self.strain(e, u))
    }

    /// Per-element ℂε(u)ε(v) at unit τ.
    pub fn energy_density(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (0..self.element_count())
            .map(|e| {
                let eu = self.strain(e, u);
                let ev = self.strain(e, v);
                dot3(&mat_vec(&self.d, &eu), &ev)
            })
            .collect()
    }

    /// Gradient of Σ_e c_e s(u):s(δu) with respect to δu, used for the
    /// stress aggregate adjoint load.
    pub fn deviatoric_load(&self, u: &[f64], coeff: &[f64]) -> Vec<f64> {
        let nu = self.material.nu;
        let mut f = vec![0.0; self.n_dofs];
        for e in 0..self.element_count() {
            if coeff[e] == 0.0 {
                continue;
            }
            let s = self.stress(e, u);
            let dev = deviator(s, nu);
            // s:σ(δu) with σzz(δu) = ν(σxx + σyy)(δu)
            let g = [dev[0] + nu * dev[2], dev[1] + nu * dev[2], 2.0 * dev[3]];
            let dg = mat_vec(&self.d, &g);
            let grads = &self.grads[e];
            let dofs = &self.dofs[e];
            for i in 0..3 {
                f[dofs[2 * i]] += coeff[e] * (grads[0][i] * dg[0] + grads[1][i] * dg[2]);
                f[dofs[2 * i + 1]] += coeff[e] * (grads[1][i] * dg[1] + grads[0][i] * dg[2]);
            }
        }
        f
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }
}

fn strain_matrix(g: &[[f64; 3]; 2]) -> [[f64; 6]; 3] {
    let mut b = [[0.0; 6]; 3];
    for i in 0..3 {
        b[0][2 * i] = g[0][i];
        b[1][2 * i + 1] = g[1][i];
        b[2][2 * i] = g[1][i];
        b[2][2 * i + 1] = g[0][i];
    }
    b
}

fn mat_vec(d: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    let mut y = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            y[i] += d[i][j] * x[j];
        }
    }
    y
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Deviator (sxx, syy, szz, sxy) of an in-plane stress under plane strain.
fn deviator(s: [f64; 3], nu: f64) -> [f64; 4] {
    let szz = nu * (s[0] + s[1]);
    let mean = (s[0] + s[1] + szz) / 3.0;
    [s[0] - mean, s[1] - mean, szz - mean, s[2]]
}

/// von Mises stress of a full stress state (σxx, σyy, σzz, σxy).
pub fn von_mises_stress(s: [f64; 4]) -> f64 {
    let mean = (s[0] + s[1] + s[2]) / 3.0;
    let d = [s[0] - mean, s[1] - mean, s[2] - mean];
    (1.5 * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + 2.0 * s[3] * s[3])).sqrt()
}

/// Element-wise von Mises stress of the solid material under plane strain.
pub fn von_mises(model: &ElasticModel, u: &[f64]) -> Vec<f64> {
    let nu = model.material().nu;
    (0..model.element_count())
        .map(|e| {
            let s = model.stress(e, u);
            von_mises_stress([s[0], s[1], nu * (s[0] + s[1]), s[2]])
        })
        .collect()
}

/// Aggregated stress (∫(σ_M/f_y)^p τ dΩ)^{1/p}, with the maximum
/// ratio factored out against overflow.
pub fn stress_pnorm(sigma_m: &[f64], tau: &[f64], areas: &[f64], p: f64, f_y: f64) -> Result<f64> {
    if !(p >= 1.0) || !(f_y > 0.0) {
        return Err(Error::invalid(format!("stress p-norm needs p >= 1 and f_y > 0, got p={p}, f_y={f_y}")));
    }
    let max = sigma_m.iter().fold(0.0f64, |m, &s| m.max(s / f_y));
    if max == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = sigma_m
        .iter()
        .zip(tau)
        .zip(areas)
        .map(|((&s, &t), &a)| (s / f_y / max).powf(p) * t * a)
        .sum();
    Ok(max * sum.powf(1.0 / p))
}

/// Solves a standalone system with homogeneous Dirichlet values.
pub fn solve(system: &SparseSystem) -> Result<Vec<f64>> {
    ConstrainedSolver::new(system.matrix.clone(), &system.fixed_dofs)?.solve(&system.rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, BoundaryRegion};
    use crate::sparse::{dot, norm};

    fn tag(s: &str) -> BoundaryTag {
        BoundaryTag::new(s).unwrap()
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside_scalar(0.0, 3.0), 0.5);
        assert!((heaviside_scalar(10.0, 1.0) - 1.0).abs() < 1e-8);
        assert!((heaviside_scalar(0.25, 1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        let h = 1e-6;
        let slope = (heaviside_scalar(h, 2.0) - heaviside_scalar(-h, 2.0)) / (2.0 * h);
        assert!((slope - dirac_const(2.0)).abs() < 1e-8);
        assert_eq!(dirac_const(1.0), 1.0);
    }

    #[test]
    fn ersatz_values() {
        let m = MaterialParams::default();
        assert_eq!(tau_scalar(1.0, &m), 1.0);
        assert!((tau_scalar(0.0, &m) - 1e-3).abs() < 1e-15);
        assert!((tau_scalar(0.5, &m) - 0.125875).abs() < 1e-15);
        assert!((dtau_scalar(1.0, &m) - 2.997).abs() < 1e-15);
        assert_eq!(dtau_scalar(0.0, &m), 0.0);
        assert!((dtau_scalar(0.4, &m) - 2.0 * dtau_scalar(0.2, &m)).abs() < 1e-15);
    }

    #[test]
    fn material_validation() {
        let mut m = MaterialParams::default();
        m.nu = 0.5;
        assert!(m.validate().is_err());
        m = MaterialParams { e: -1.0, ..Default::default() };
        assert!(m.validate().is_err());
    }

    fn clamped_left(nx: usize, ny: usize) -> (Mesh, ElasticModel) {
        let mesh = build_rect_mesh(1.0, 1.0, nx, ny)
            .unwrap()
            .tag_boundary(BoundaryRegion::new([0.0, 0.0], [0.0, 1.0]), tag("support"))
            .unwrap();
        let sup = Supports {
            clamped: vec![tag("support")],
            ..Default::default()
        };
        let model = ElasticModel::new(&mesh, MaterialParams::default(), &sup, &[]).unwrap();
        (mesh, model)
    }

    #[test]
    fn rigid_translation_in_null_space() {
        let (mesh, model) = clamped_left(4, 4);
        let k = model.domain_stiffness(&vec![1.0; mesh.element_count()]);
        for dir in [[1.0, 0.0], [0.0, 1.0]] {
            let r: Vec<f64> = (0..model.dof_count()).map(|i| dir[i % 2]).collect();
            let kr = k.mul_vec(&r);
            assert!(norm(&kr) <= 1e-9 * k.max_abs());
        }
    }

    #[test]
    fn stiffness_is_linear_in_tau() {
        let (mesh, model) = clamped_left(3, 3);
        let solid = model.domain_stiffness(&vec![1.0; mesh.element_count()]);
        let void = model.domain_stiffness(&vec![1e-3; mesh.element_count()]);
        for (a, b) in solid.values().iter().zip(void.values()) {
            assert!((b - 1e-3 * a).abs() <= 1e-15 * a.abs().max(1.0));
        }
        assert!(solid.asymmetry() <= 1e-12 * solid.max_abs());
    }

    #[test]
    fn single_square_matches_hand_assembly() {
        // E = 1, nu = 0: D = diag(1, 1, 1/2)
        let mesh = build_rect_mesh(1.0, 1.0, 1, 1)
            .unwrap()
            .tag_boundary(BoundaryRegion::new([0.0, 0.0], [0.0, 1.0]), tag("s"))
            .unwrap();
        let mat = MaterialParams { e: 1.0, nu: 0.0, a: 3.0, d: 1e-3 };
        let sup = Supports { clamped: vec![tag("s")], ..Default::default() };
        let model = ElasticModel::new(&mesh, mat, &sup, &[]).unwrap();
        let k = model.domain_stiffness(&[1.0, 1.0]);
        // triangle (0,0),(1,0),(1,1): dN/dx = (-1, 1, 0), dN/dy = (0, -1, 1)
        // triangle (0,0),(1,1),(0,1): dN/dx = (0, 1, -1), dN/dy = (-1, 0, 1)
        let tris = [
            ([0usize, 1, 3], [-1.0, 1.0, 0.0], [0.0, -1.0, 1.0]),
            ([0usize, 3, 2], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]),
        ];
        let mut hand = vec![vec![0.0; 8]; 8];
        for (nodes, bx, by) in tris {
            for a in 0..3 {
                for b in 0..3 {
                    let (i, j) = (nodes[a], nodes[b]);
                    let area = 0.5;
                    hand[2 * i][2 * j] += area * (bx[a] * bx[b] + 0.5 * by[a] * by[b]);
                    hand[2 * i + 1][2 * j + 1] += area * (by[a] * by[b] + 0.5 * bx[a] * bx[b]);
                    hand[2 * i][2 * j + 1] += area * 0.5 * by[a] * bx[b];
                    hand[2 * i + 1][2 * j] += area * 0.5 * bx[a] * by[b];
                }
            }
        }
        let dense = k.to_dense();
        for i in 0..8 {
            for j in 0..8 {
                assert!((dense[i][j] - hand[i][j]).abs() <= 1e-12, "({i},{j})");
            }
        }
        assert!(k.asymmetry() <= 1e-12);
    }

    #[test]
    fn unconstrained_body_is_singular() {
        let mesh = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let err = ElasticModel::new(&mesh, MaterialParams::default(), &Supports::default(), &[]).unwrap_err();
        assert!(matches!(err, Error::SingularSystem(_)));
    }

    #[test]
    fn patch_test_uniform_strain() {
        let mesh = build_rect_mesh(1.0, 1.0, 5, 5)
            .unwrap()
            .tag_boundary(BoundaryRegion::new([0.0, 0.0], [0.0, 1.0]), tag("left"))
            .unwrap()
            .tag_boundary(BoundaryRegion::new([0.0, 0.0], [1.0, 0.0]), tag("bottom"))
            .unwrap()
            .tag_boundary(BoundaryRegion::new([1.0, 0.0], [1.0, 1.0]), tag("right"))
            .unwrap();
        let mat = MaterialParams::default();
        let sup = Supports {
            rollers: vec![tag("left"), tag("bottom")],
            ..Default::default()
        };
        let model = ElasticModel::new(&mesh, mat, &sup, &[]).unwrap();
        let f = load_vector(&mesh, &[Traction { tag: tag("right"), value: [1.0, 0.0] }]).unwrap();
        let u = solve(&model.assemble_state(&vec![1.0; mesh.element_count()], f)).unwrap();
        // plane strain, σxx = 1, σyy = 0
        let (e, nu) = (mat.e, mat.nu);
        let exx = (1.0 - nu * nu) / e;
        let eyy = -nu * (1.0 + nu) / e;
        for eps in model.strains(&u) {
            assert!((eps[0] - exx).abs() < 1e-10);
            assert!((eps[1] - eyy).abs() < 1e-10);
            assert!(eps[2].abs() < 1e-10);
        }
        let vm = von_mises(&model, &u);
        let expected = von_mises_stress([1.0, 0.0, nu, 0.0]);
        assert!(vm.iter().all(|s| (s - expected).abs() < 1e-9));
    }

    #[test]
    fn zero_load_gives_zero_displacement() {
        let (mesh, model) = clamped_left(3, 3);
        let u = solve(&model.assemble_state(&vec![1.0; mesh.element_count()], vec![0.0; model.dof_count()])).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn work_energy_identity() {
        let (mesh, model) = clamped_left(6, 6);
        let mesh = mesh
            .tag_boundary(BoundaryRegion::new([1.0, 0.4], [1.0, 0.6]), tag("load"))
            .unwrap();
        let tau: Vec<f64> = (0..mesh.element_count()).map(|e| if e % 3 == 0 { 1e-3 } else { 1.0 }).collect();
        let f = load_vector(&mesh, &[Traction { tag: tag("load"), value: [0.0, -1.0] }]).unwrap();
        let k = model.stiffness(&tau);
        let u = model.factor(k.clone()).unwrap().solve(&f).unwrap();
        let compliance = dot(&f, &u);
        let energy: f64 = model
            .energy_density(&u, &u)
            .iter()
            .zip(&tau)
            .zip(model.areas())
            .map(|((w, t), a)| w * t * a)
            .sum();
        assert!((compliance - energy).abs() <= 1e-8 * compliance);
    }

    #[test]
    fn von_mises_identities() {
        assert_eq!(von_mises_stress([0.0; 4]), 0.0);
        assert!((von_mises_stress([2.5, 0.0, 0.0, 0.0]) - 2.5).abs() < 1e-14);
        assert!((von_mises_stress([0.0, 0.0, 0.0, 1.5]) - 3f64.sqrt() * 1.5).abs() < 1e-14);
    }

    #[test]
    fn pnorm_values() {
        let areas = [0.25; 4];
        let tau = [1.0; 4];
        let s = stress_pnorm(&[42.0; 4], &tau, &areas, 5.0, 42.0).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
        let s2 = stress_pnorm(&[42.0; 4], &tau, &[0.5; 4], 5.0, 42.0).unwrap();
        assert!((s2 - 2f64.powf(0.2)).abs() < 1e-14);
        let peaked = [84.0, 1.0, 1.0, 1.0];
        let p5 = stress_pnorm(&peaked, &tau, &areas, 5.0, 42.0).unwrap();
        let p50 = stress_pnorm(&peaked, &tau, &areas, 50.0, 42.0).unwrap();
        let limit = 2.0;
        assert!((p50 - limit * 0.25f64.powf(1.0 / 50.0)).abs() < (p5 - limit * 0.25f64.powf(0.2)).abs() + 1e-12);
        assert!((p50 - limit * 0.25f64.powf(0.02)).abs() < 1e-6);
        let void = stress_pnorm(&[42.0; 4], &[1e-3; 4], &areas, 5.0, 42.0).unwrap();
        assert!((void - 1e-3f64.powf(0.2)).abs() < 1e-12);
        assert_eq!(stress_pnorm(&[0.0; 4], &tau, &areas, 5.0, 42.0).unwrap(), 0.0);
        let huge = stress_pnorm(&[1e300; 4], &tau, &areas, 5.0, 1.0).unwrap();
        assert!(huge.is_finite());
    }

    #[test]
    fn pnorm_is_monotone() {
        let areas = [0.1; 5];
        let tau = [1.0; 5];
        let mut s = [1.0, 2.0, 3.0, 4.0, 5.0];
        let base = stress_pnorm(&s, &tau, &areas, 5.0, 2.0).unwrap();
        s[2] = 3.5;
        assert!(stress_pnorm(&s, &tau, &areas, 5.0, 2.0).unwrap() >= base);
    }

    #[test]
    fn deviatoric_load_is_directional_derivative() {
        let (mesh, model) = clamped_left(2, 2);
        let n = model.dof_count();
        let u: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let du: Vec<f64> = (0..n).map(|i| ((i * 3 % 4) as f64 - 1.5) * 0.05).collect();
        let coeff = vec![1.0; mesh.element_count()];
        let g = model.deviatoric_load(&u, &coeff);
        // ½ Σ s:s equals σ_M² / 3
        let half_ss = |x: &[f64]| -> f64 { von_mises(&model, x).iter().map(|s| s * s / 3.0).sum() };
        let h = 1e-6;
        let up: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + h * b).collect();
        let um: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - h * b).collect();
        let fd = (half_ss(&up) - half_ss(&um)) / (2.0 * h);
        assert!((dot(&g, &du) - fd).abs() <= 1e-6 * fd.abs().max(1e-3));
    }
}
