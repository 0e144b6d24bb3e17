//! Structured triangle meshes for rectangular and L-shaped design domains,
//! with tagged boundary edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name attached to a group of boundary edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BoundaryTag(String);

impl BoundaryTag {
    pub const FREE: &'static str = "free";
    pub const DIRICHLET_SUPPORT: &'static str = "dirichlet_support";
    pub const ROLLER: &'static str = "roller";
    pub const TRACTION: &'static str = "traction";
    pub const INPUT: &'static str = "input";
    pub const OUTPUT: &'static str = "output";
    pub const VOID_WALL_A: &'static str = "void_wall_a";
    pub const VOID_WALL_B: &'static str = "void_wall_b";

    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if valid {
            Ok(Self(name))
        } else {
            Err(Error::invalid(format!(
                "boundary tag `{name}` must be a non-empty lowercase identifier"
            )))
        }
    }

    pub fn free() -> Self {
        Self(Self::FREE.to_string())
    }

    pub fn is_free(&self) -> bool {
        self.0 == Self::FREE
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for BoundaryTag {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<BoundaryTag> for String {
    fn from(t: BoundaryTag) -> Self {
        t.0
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    /// The single triangle the edge belongs to.
    pub element: usize,
    pub tag: BoundaryTag,
}

/// Axis-aligned boundary segment used to select edges for tagging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRegion {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

impl BoundaryRegion {
    pub fn new(from: [f64; 2], to: [f64; 2]) -> Self {
        Self { from, to }
    }

    fn axis(&self) -> Result<usize> {
        if self.from[0] == self.to[0] {
            Ok(1)
        } else if self.from[1] == self.to[1] {
            Ok(0)
        } else {
            Err(Error::invalid(format!(
                "boundary region {:?} -> {:?} is not axis-aligned",
                self.from, self.to
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    element_areas: Vec<f64>,
    spacing: f64,
    bbox: ([f64; 2], [f64; 2]),
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn is_integer_ratio(a: f64, h: f64) -> Option<usize> {
    let r = a / h;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r.max(1.0) && k >= 1.0).then_some(k as usize)
}

impl Mesh {
    /// Assembles a mesh from raw connectivity. Boundary edges are derived
    /// and tagged `free`.
    pub fn from_parts(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, spacing: f64) -> Result<Self> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mut element_areas = Vec::with_capacity(triangles.len());
        for (e, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::invalid(format!("triangle {e} references a missing node")));
            }
            let a = signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
            if !(a > 0.0) {
                return Err(Error::invalid(format!(
                    "triangle {e} has non-positive signed area {a:e}"
                )));
            }
            element_areas.push(a);
        }
        let mut count: BTreeMap<(usize, usize), (usize, [usize; 2], usize)> = BTreeMap::new();
        for (e, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                count
                    .entry(key)
                    .and_modify(|c| c.0 += 1)
                    .or_insert((1, [a, b], e));
            }
        }
        let boundary_edges = count
            .into_values()
            .filter(|(c, _, _)| *c == 1)
            .map(|(_, nodes, element)| BoundaryEdge {
                nodes,
                element,
                tag: BoundaryTag::free(),
            })
            .collect();
        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            element_areas,
            spacing,
            bbox: (lo, hi),
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn element_areas(&self) -> &[f64] {
        &self.element_areas
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    /// Nominal element edge length along the axes.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        self.bbox
    }

    pub fn total_area(&self) -> f64 {
        self.element_areas.iter().sum()
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let t = self.triangles[e];
        let mut c = [0.0; 2];
        for &i in &t {
            c[0] += self.nodes[i][0] / 3.0;
            c[1] += self.nodes[i][1] / 3.0;
        }
        c
    }

    /// Gradients (dN/dx, dN/dy) of the three linear shape functions.
    pub fn shape_gradients(&self, e: usize) -> [[f64; 3]; 2] {
        let t = self.triangles[e];
        let p = [self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]];
        let two_a = 2.0 * self.element_areas[e];
        let mut g = [[0.0; 3]; 2];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            g[0][i] = (p[j][1] - p[k][1]) / two_a;
            g[1][i] = (p[k][0] - p[j][0]) / two_a;
        }
        g
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let a = self.nodes[edge.nodes[0]];
        let b = self.nodes[edge.nodes[1]];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Unit normal of a boundary edge pointing out of its triangle.
    pub fn outward_normal(&self, edge: &BoundaryEdge) -> [f64; 2] {
        let a = self.nodes[edge.nodes[0]];
        let b = self.nodes[edge.nodes[1]];
        let len = self.edge_length(edge);
        let mut n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        let c = self.centroid(edge.element);
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        if n[0] * (c[0] - mid[0]) + n[1] * (c[1] - mid[1]) > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    pub fn edges_with_tag<'a>(&'a self, tag: &'a BoundaryTag) -> impl Iterator<Item = &'a BoundaryEdge> + 'a {
        self.boundary_edges.iter().filter(move |e| &e.tag == tag)
    }

    pub fn has_tag(&self, tag: &BoundaryTag) -> bool {
        self.edges_with_tag(tag).next().is_some()
    }

    /// Sorted node indices touched by edges carrying `tag`.
    pub fn nodes_with_tag(&self, tag: &BoundaryTag) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges_with_tag(tag)
            .flat_map(|e| e.nodes)
            .collect();
        set.into_iter().collect()
    }

    pub fn tags(&self) -> BTreeSet<BoundaryTag> {
        self.boundary_edges.iter().map(|e| e.tag.clone()).collect()
    }

    /// Total length of the edges carrying `tag`.
    pub fn tagged_length(&self, tag: &BoundaryTag) -> f64 {
        self.edges_with_tag(tag).map(|e| self.edge_length(e)).sum()
    }

    /// Nearest node to a point.
    pub fn nearest_node(&self, p: [f64; 2]) -> usize {
        let d = |q: &[f64; 2]| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        (0..self.nodes.len())
            .min_by(|&a, &b| d(&self.nodes[a]).total_cmp(&d(&self.nodes[b])))
            .unwrap_or(0)
    }

    /// Tags every boundary edge lying on `region` (within a snapping
    /// tolerance of a quarter element) and overlapping it with positive
    /// length. Later calls overwrite earlier tags.
    pub fn tag_boundary(mut self, region: BoundaryRegion, tag: BoundaryTag) -> Result<Self> {
        let matched = self.tag_region_in_place(region, &tag)?;
        if matched == 0 {
            return Err(Error::NoMatch {
                tag: tag.to_string(),
            });
        }
        Ok(self)
    }

    fn tag_region_in_place(&mut self, region: BoundaryRegion, tag: &BoundaryTag) -> Result<usize> {
        let along = region.axis()?;
        let across = 1 - along;
        let tol = 0.25 * self.spacing;
        let line = region.from[across];
        let lo = region.from[along].min(region.to[along]);
        let hi = region.from[along].max(region.to[along]);
        let min_overlap = 1e-6 * self.spacing;
        let mut matched = 0;
        for edge in &mut self.boundary_edges {
            let a = self.nodes[edge.nodes[0]];
            let b = self.nodes[edge.nodes[1]];
            if (a[across] - line).abs() > tol || (b[across] - line).abs() > tol {
                continue;
            }
            let e_lo = a[along].min(b[along]);
            let e_hi = a[along].max(b[along]);
            let overlap = e_hi.min(hi) - e_lo.max(lo);
            if overlap > min_overlap {
                edge.tag = tag.clone();
                matched += 1;
            }
        }
        Ok(matched)
    }

    /// Checks the structural invariants; used by tests and after loading
    /// external dumps.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bbox;
        for (i, p) in self.nodes.iter().enumerate() {
            if p[0] < lo[0] || p[0] > hi[0] || p[1] < lo[1] || p[1] > hi[1] {
                return Err(Error::invalid(format!("node {i} outside bounding box")));
            }
        }
        for (e, &a) in self.element_areas.iter().enumerate() {
            if !(a > 0.0) {
                return Err(Error::invalid(format!("element {e} has area {a}")));
            }
        }
        let mut owners: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *owners.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for edge in &self.boundary_edges {
            let [a, b] = edge.nodes;
            if owners.get(&(a.min(b), a.max(b))) != Some(&1) {
                return Err(Error::invalid(format!("boundary edge {a}-{b} not owned by exactly one triangle")));
            }
        }
        Ok(())
    }

    /// Plain-text dump: `nodes N triangles T`, then `x y` lines, then
    /// 0-based `i j k` lines.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "nodes {} triangles {}", self.nodes.len(), self.triangles.len())?;
        for p in &self.nodes {
            writeln!(w, "{} {}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R, spacing: f64) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::invalid("empty mesh dump"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (n, t) = match parts.as_slice() {
            ["nodes", n, "triangles", t] => (
                n.parse::<usize>().map_err(|e| Error::invalid(e.to_string()))?,
                t.parse::<usize>().map_err(|e| Error::invalid(e.to_string()))?,
            ),
            _ => return Err(Error::invalid(format!("bad mesh header `{header}`"))),
        };
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().transpose()?.ok_or_else(|| Error::invalid("truncated node list"))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| Error::invalid(e.to_string())))
                .collect::<Result<_>>()?;
            if v.len() < 2 {
                return Err(Error::invalid(format!("bad node line `{line}`")));
            }
            nodes.push([v[0], v[1]]);
        }
        let mut triangles = Vec::with_capacity(t);
        for _ in 0..t {
            let line = lines.next().transpose()?.ok_or_else(|| Error::invalid("truncated triangle list"))?;
            let v: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| Error::invalid(e.to_string())))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::invalid(format!("bad triangle line `{line}`")));
            }
            triangles.push([v[0], v[1], v[2]]);
        }
        Self::from_parts(nodes, triangles, spacing)
    }
}

/// Splits each structured cell along a diagonal whose direction alternates
/// in a checkerboard, so the mesh is mirror symmetric for even `nx`.
fn push_cell(triangles: &mut Vec<[usize; 3]>, i: usize, j: usize, p: [usize; 4]) {
    let [p00, p10, p11, p01] = p;
    if (i + j) % 2 == 0 {
        triangles.push([p00, p10, p11]);
        triangles.push([p00, p11, p01]);
    } else {
        triangles.push([p00, p10, p01]);
        triangles.push([p10, p11, p01]);
    }
}

/// Rectangle `[0, width] x [0, height]` split into `nx * ny` cells of two
/// triangles each.
pub fn build_rect_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::invalid(format!(
            "rectangle dimensions must be positive, got {width} x {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("cell counts must be at least 1"));
    }
    let dx = width / nx as f64;
    let dy = height / ny as f64;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // exact end coordinates so the bounding box is the domain
            let x = if i == nx { width } else { i as f64 * dx };
            let y = if j == ny { height } else { j as f64 * dy };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            push_cell(&mut triangles, i, j, [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(nodes, triangles, dx.min(dy))
}

/// `outer x outer` square with the top-right `cut x cut` square removed.
/// The two re-entrant walls are tagged `void_wall_a` (vertical) and
/// `void_wall_b` (horizontal).
pub fn build_lshape_mesh(outer: f64, cut: f64, h: f64) -> Result<Mesh> {
    if !(outer > 0.0 && h > 0.0) {
        return Err(Error::invalid("outer size and spacing must be positive"));
    }
    if !(cut > 0.0 && cut < outer) {
        return Err(Error::invalid(format!(
            "cut {cut} must lie strictly between 0 and outer size {outer}"
        )));
    }
    let n = is_integer_ratio(outer, h)
        .ok_or_else(|| Error::invalid(format!("spacing {h} does not divide outer size {outer}")))?;
    let k = is_integer_ratio(cut, h)
        .ok_or_else(|| Error::invalid(format!("spacing {h} does not divide cut size {cut}")))?;
    let corner = n - k;
    let removed_cell = |i: usize, j: usize| i >= corner && j >= corner;
    let removed_node = |i: usize, j: usize| i > corner && j > corner;

    let mut index = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if !removed_node(i, j) {
                index[j * (n + 1) + i] = nodes.len();
                let x = if i == n { outer } else { i as f64 * h };
                let y = if j == n { outer } else { j as f64 * h };
                nodes.push([x, y]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (n + 1) + i];
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !removed_cell(i, j) {
                push_cell(&mut triangles, i, j, [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    let wall = outer - cut;
    let mesh = Mesh::from_parts(nodes, triangles, h)?
        .tag_boundary(
            BoundaryRegion::new([wall, wall], [wall, outer]),
            BoundaryTag(BoundaryTag::VOID_WALL_A.into()),
        )?
        .tag_boundary(
            BoundaryRegion::new([wall, wall], [outer, wall]),
            BoundaryTag(BoundaryTag::VOID_WALL_B.into()),
        )?;
    Ok(mesh)
}

/// Free-function form of [`Mesh::tag_boundary`].
pub fn tag_boundary(mesh: Mesh, region: BoundaryRegion, tag: BoundaryTag) -> Result<Mesh> {
    mesh.tag_boundary(region, tag)
}
