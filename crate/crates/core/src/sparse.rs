//! Symmetric sparse matrices and the linear solvers used by the finite
//! element modules.
//!
//! Matrices are stored in CSR form with the full (upper and lower) pattern.
//! The default solver is an envelope (skyline) Cholesky factorization on a
//! reverse Cuthill-McKee ordering; a Jacobi-preconditioned conjugate
//! gradient is used when the factorization breaks down.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Relative residual every accepted solve has to reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the (zero-valued) pattern coupling every pair of dofs that
    /// share an element.
    pub fn from_element_dofs<'a, I>(n: usize, elements: I) -> Self
    where
        I: IntoIterator<Item = &'a [usize]>,
    {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for dofs in elements {
            for &a in dofs {
                rows[a].extend_from_slice(dofs);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 || i == j {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    /// Storage index of entry `(i, j)` if it is part of the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    /// Adds `v` at `(i, j)`. Panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.vals[k] += v;
    }

    /// Same pattern, all values zero.
    pub fn zeroed(&self) -> Self {
        Self {
            vals: vec![0.0; self.vals.len()],
            ..self.clone()
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.vals.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`; both matrices must share the pattern.
    pub fn add_scaled(&mut self, s: f64, other: &CsrMatrix) {
        assert_eq!(self.cols, other.cols, "pattern mismatch");
        for (a, b) in self.vals.iter_mut().zip(&other.vals) {
            *a += s * b;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |A_ij - A_ji| over the pattern.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.n]; self.n];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        a
    }
}

/// Reverse Cuthill-McKee ordering of the matrix graph. Returns `perm` with
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node");
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a
                .row(v)
                .map(|(j, _)| j)
                .filter(|&j| !visited[j])
                .collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &CsrMatrix, start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; a.dim()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap_or(0);
        for (j, _) in a.row(v) {
            if level[j].is_none() {
                level[j] = Some(lv + 1);
                queue.push_back(j);
            }
        }
    }
    level
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut current = seed;
    let mut eccentricity = 0;
    for _ in 0..8 {
        let levels = bfs_levels(a, current);
        let depth = levels.iter().flatten().copied().max().unwrap_or(0);
        if depth <= eccentricity && current != seed {
            break;
        }
        eccentricity = depth;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(depth))
            .min_by_key(|(i, _)| degree[*i])
            .map(|(i, _)| i)
            .unwrap_or(current);
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

/// Envelope structure of the permuted matrix; computed once per pattern.
#[derive(Debug, Clone)]
pub struct SkylineSymbolic {
    perm: Vec<usize>,
    iperm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
}

impl SkylineSymbolic {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first = vec![0; n];
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            let old = perm[i];
            let f = a.row(old).map(|(j, _)| iperm[j]).filter(|&j| j <= i).min().unwrap_or(i);
            first[i] = f;
            offset.push(offset[i] + (i - f + 1));
        }
        Self {
            perm,
            iperm,
            first,
            offset,
        }
    }

    pub fn envelope_size(&self) -> usize {
        *self.offset.last().unwrap_or(&0)
    }

    pub fn factor(&self, a: &CsrMatrix) -> Result<SkylineCholesky> {
        let n = a.dim();
        if n != self.perm.len() {
            return Err(Error::invalid("matrix size does not match symbolic factorization"));
        }
        let mut data = vec![0.0; self.envelope_size()];
        for i in 0..n {
            let old = self.perm[i];
            for (jo, v) in a.row(old) {
                let j = self.iperm[jo];
                if j <= i {
                    data[self.offset[i] + (j - self.first[i])] = v;
                }
            }
        }
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            for j in fi..i {
                let fj = self.first[j];
                let oj = self.offset[j];
                let k0 = fi.max(fj);
                let len = j - k0;
                let ri = &data[oi + (k0 - fi)..oi + (k0 - fi) + len];
                let rj = &data[oj + (k0 - fj)..oj + (k0 - fj) + len];
                let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                let ljj = data[oj + (j - fj)];
                let idx = oi + (j - fi);
                data[idx] = (data[idx] - dot) / ljj;
            }
            let row = &data[oi..oi + (i - fi)];
            let sq: f64 = row.iter().map(|x| x * x).sum();
            let d = data[oi + (i - fi)] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "matrix not positive definite at pivot {i} (value {d:e})"
                )));
            }
            data[oi + (i - fi)] = d.sqrt();
        }
        Ok(SkylineCholesky {
            symbolic: self.clone(),
            data,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    symbolic: SkylineSymbolic,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &self.symbolic;
        let n = s.perm.len();
        let mut y: Vec<f64> = s.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = s.first[i];
            let oi = s.offset[i];
            let row = &self.data[oi..oi + (i - fi)];
            let dot: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - dot) / self.data[oi + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = s.first[i];
            let oi = s.offset[i];
            y[i] /= self.data[oi + (i - fi)];
            let xi = y[i];
            for (k, l) in (fi..i).zip(&self.data[oi..oi + (i - fi)]) {
                y[k] -= l * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradient. Returns the solution and the
/// iteration count.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure(format!(
                "conjugate gradient breakdown at iteration {it} (pAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure(format!(
        "conjugate gradient did not converge in {max_iter} iterations"
    )))
}

enum Backend {
    Cholesky(SkylineCholesky),
    Iterative,
}

/// A symmetric system with Dirichlet dofs eliminated symmetrically and the
/// reduced operator factorized, ready for repeated right-hand sides.
pub struct ConstrainedSolver {
    original: CsrMatrix,
    constrained: CsrMatrix,
    is_fixed: Vec<bool>,
    fixed: Vec<usize>,
    backend: Backend,
}

impl ConstrainedSolver {
    pub fn new(matrix: CsrMatrix, fixed_dofs: &[usize]) -> Result<Self> {
        let symbolic = SkylineSymbolic::new(&matrix);
        Self::with_symbolic(matrix, fixed_dofs, &symbolic)
    }

    /// Reuses a precomputed envelope; the pattern of `matrix` must be the one
    /// the symbolic structure was built from.
    pub fn with_symbolic(
        matrix: CsrMatrix,
        fixed_dofs: &[usize],
        symbolic: &SkylineSymbolic,
    ) -> Result<Self> {
        let n = matrix.dim();
        let mut is_fixed = vec![false; n];
        let mut fixed = Vec::new();
        for &d in fixed_dofs {
            if d >= n {
                return Err(Error::invalid(format!("dirichlet dof {d} out of range")));
            }
            if !is_fixed[d] {
                is_fixed[d] = true;
                fixed.push(d);
            }
        }
        let mut constrained = matrix.clone();
        for i in 0..n {
            let lo = constrained.row_ptr[i];
            let hi = constrained.row_ptr[i + 1];
            for k in lo..hi {
                let j = constrained.cols[k];
                if is_fixed[i] || is_fixed[j] {
                    constrained.vals[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let backend = match symbolic.factor(&constrained) {
            Ok(f) => Backend::Cholesky(f),
            Err(e) => {
                log::warn!("direct factorization failed ({e}); falling back to conjugate gradient");
                Backend::Iterative
            }
        };
        Ok(Self {
            original: matrix,
            constrained,
            is_fixed,
            fixed,
            backend,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.original
    }

    /// Solves `A x = b` with `x[d] = value(d)` on the fixed dofs. The residual
    /// is checked on the free rows.
    pub fn solve_with(&self, b: &[f64], values: &dyn Fn(usize) -> f64) -> Result<Vec<f64>> {
        let n = self.original.dim();
        let mut g = vec![0.0; n];
        for &d in &self.fixed {
            g[d] = values(d);
        }
        let ag = self.original.mul_vec(&g);
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| if self.is_fixed[i] { g[i] } else { b[i] - ag[i] })
            .collect();
        for &d in &self.fixed {
            rhs[d] = g[d];
        }
        let mut x = self.raw_solve(&rhs)?;
        // a few rounds of iterative refinement for ill-conditioned operators
        for _ in 0..3 {
            if self.check_residual(&x, b).is_ok() {
                return Ok(x);
            }
            let ax = self.original.mul_vec(&x);
            let r: Vec<f64> = (0..n)
                .map(|i| if self.is_fixed[i] { 0.0 } else { b[i] - ax[i] })
                .collect();
            let dx = self.raw_solve(&r)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        self.check_residual(&x, b)?;
        Ok(x)
    }

    fn raw_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        match &self.backend {
            Backend::Cholesky(f) => Ok(f.solve(rhs)),
            Backend::Iterative => {
                let (x, _) = conjugate_gradient(&self.constrained, rhs, 1e-12, 20 * n.max(100))?;
                Ok(x)
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_with(b, &|_| 0.0)
    }

    fn check_residual(&self, x: &[f64], b: &[f64]) -> Result<()> {
        let ax = self.original.mul_vec(x);
        let mut res = 0.0;
        let mut scale = 0.0;
        for i in 0..x.len() {
            if self.is_fixed[i] {
                continue;
            }
            res += (ax[i] - b[i]).powi(2);
            scale += b[i].powi(2);
        }
        let res = res.sqrt();
        // reaction-free systems with zero load: compare against the operator scale
        let scale = if scale > 0.0 {
            scale.sqrt()
        } else {
            self.original.max_abs() * norm(x).max(f64::MIN_POSITIVE)
        };
        if res <= RESIDUAL_TOLERANCE * scale || res == 0.0 {
            Ok(())
        } else {
            Err(Error::SolverFailure(format!(
                "relative residual {:e} exceeds {RESIDUAL_TOLERANCE:e}",
                res / scale
            )))
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
