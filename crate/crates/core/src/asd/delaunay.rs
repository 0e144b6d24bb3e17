//! Bowyer–Watson triangulation in d ≥ 2 dimensions, plus a lexicographic fan
//! used when the point set is degenerate.

use std::collections::HashMap;

struct Cell {
    verts: Vec<usize>,
    center: Vec<f64>,
    r2: f64,
}

/// Solves a small dense system in place; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn circumsphere(pts: &[Vec<f64>], verts: &[usize]) -> Option<(Vec<f64>, f64)> {
    let p0 = &pts[verts[0]];
    let d = p0.len();
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    for &v in &verts[1..] {
        let p = &pts[v];
        a.push((0..d).map(|k| 2.0 * (p[k] - p0[k])).collect::<Vec<_>>());
        b.push((0..d).map(|k| p[k] * p[k] - p0[k] * p0[k]).sum());
    }
    let c = solve_dense(a, b)?;
    let r2 = dist2(&c, p0);
    Some((c, r2))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// True when the points span a d-dimensional affine hull.
fn full_rank(points: &[Vec<f64>]) -> bool {
    let d = points[0].len();
    let mut rows: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(a, b)| a - b).collect())
        .collect();
    let scale = rows.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return false;
    }
    let mut rank = 0;
    for col in 0..d {
        let Some(piv) = (rank..rows.len()).max_by(|&i, &j| rows[i][col].abs().total_cmp(&rows[j][col].abs())) else {
            break;
        };
        if rows[piv][col].abs() <= 1e-10 * scale {
            continue;
        }
        rows.swap(rank, piv);
        for r in rank + 1..rows.len() {
            let f = rows[r][col] / rows[rank][col];
            for k in col..d {
                rows[r][k] -= f * rows[rank][k];
            }
        }
        rank += 1;
    }
    rank == d
}

/// Delaunay simplices (vertex index tuples of length d+1), or `None` when the
/// input is degenerate or the construction loses a point.
pub fn delaunay(points: &[Vec<f64>]) -> Option<Vec<Vec<usize>>> {
    let n = points.len();
    let d = points.first()?.len();
    if d < 1 || n < d + 1 || !full_rank(points) {
        return None;
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (0..d).map(|k| hi[k] - lo[k]).fold(0.0f64, f64::max).max(1e-12);
    let s = 1e4 * span;
    let reach = d as f64 * (s + span) + s;
    let mut pts: Vec<Vec<f64>> = points.to_vec();
    let base: Vec<f64> = lo.iter().map(|x| x - s).collect();
    pts.push(base.clone());
    for k in 0..d {
        let mut v = base.clone();
        v[k] += reach;
        pts.push(v);
    }
    let first: Vec<usize> = (n..n + d + 1).collect();
    let (center, r2) = circumsphere(&pts, &first)?;
    let mut cells = vec![Cell { verts: first, center, r2 }];

    for i in 0..n {
        let p = &pts[i];
        let (bad, keep): (Vec<Cell>, Vec<Cell>) =
            cells.into_iter().partition(|c| dist2(&c.center, p) < c.r2 * (1.0 - 1e-12));
        cells = keep;
        if bad.is_empty() {
            return None;
        }
        let mut facets: HashMap<Vec<usize>, usize> = HashMap::new();
        for c in &bad {
            for skip in 0..=d {
                let mut f: Vec<usize> = c.verts.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &v)| v).collect();
                f.sort_unstable();
                *facets.entry(f).or_insert(0) += 1;
            }
        }
        let mut boundary: Vec<Vec<usize>> = facets.into_iter().filter(|(_, c)| *c == 1).map(|(f, _)| f).collect();
        boundary.sort();
        for mut f in boundary {
            f.push(i);
            let (center, r2) = circumsphere(&pts, &f)?;
            cells.push(Cell { verts: f, center, r2 });
        }
    }

    let mut out: Vec<Vec<usize>> = cells
        .into_iter()
        .filter(|c| c.verts.iter().all(|&v| v < n))
        .map(|c| {
            let mut v = c.verts;
            v.sort_unstable();
            v
        })
        .collect();
    out.sort();
    let mut covered = vec![false; n];
    for s in &out {
        for &v in s {
            covered[v] = true;
        }
    }
    if covered.iter().all(|&c| c) {
        Some(out)
    } else {
        None
    }
}

/// Fan over the lexicographically sorted points: (s₀, sᵢ, …, s_{i+d−1}).
pub fn fan(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if n <= d + 1 {
        return vec![order];
    }
    (1..=n - d)
        .map(|i| {
            let mut s = vec![order[0]];
            s.extend_from_slice(&order[i..i + d]);
            s.sort_unstable();
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_circle(points: &[Vec<f64>], tri: &[usize]) -> bool {
        let (c, r2) = circumsphere(points, tri).unwrap();
        (0..points.len())
            .filter(|i| !tri.contains(i))
            .all(|i| dist2(&c, &points[i]) >= r2 * (1.0 - 1e-9))
    }

    #[test]
    fn three_points_one_triangle() {
        let p = vec![vec![0.7, 0.15], vec![0.15, 0.7], vec![0.15, 0.15]];
        assert_eq!(delaunay(&p).unwrap(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn convex_quad_matches_brute_force() {
        let p = vec![vec![0.0, 0.0], vec![1.0, 0.1], vec![1.2, 1.0], vec![0.1, 0.8]];
        let tris = delaunay(&p).unwrap();
        assert_eq!(tris.len(), 2);
        for t in &tris {
            assert!(empty_circle(&p, t));
        }
        // of the two possible diagonals exactly one gives a Delaunay pair
        let a = [vec![0, 1, 2], vec![0, 2, 3]];
        let b = [vec![0, 1, 3], vec![1, 2, 3]];
        let ok_a = a.iter().all(|t| empty_circle(&p, t));
        let ok_b = b.iter().all(|t| empty_circle(&p, t));
        assert!(ok_a != ok_b);
        let expected: Vec<Vec<usize>> = if ok_a { a.to_vec() } else { b.to_vec() };
        assert_eq!(tris, expected);
    }

    #[test]
    fn random_sets_are_delaunay_and_covering() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let p: Vec<Vec<f64>> = (0..15).map(|_| vec![next(), next()]).collect();
            let tris = delaunay(&p).unwrap();
            for t in &tris {
                assert!(empty_circle(&p, t));
            }
            let area: f64 = tris
                .iter()
                .map(|t| {
                    let (a, b, c) = (&p[t[0]], &p[t[1]], &p[t[2]]);
                    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
                })
                .sum();
            assert!((area - hull_area(&p)).abs() < 1e-9);
        }
    }

    fn hull_area(p: &[Vec<f64>]) -> f64 {
        let mut pts: Vec<(f64, f64)> = p.iter().map(|v| (v[0], v[1])).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
        let mut h: Vec<(f64, f64)> = Vec::new();
        for pass in 0..2 {
            let start = h.len();
            let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
                if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
            for &q in iter {
                while h.len() >= start + 2 && cross(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                    h.pop();
                }
                h.push(q);
            }
            h.pop();
        }
        let n = h.len();
        0.5 * (0..n).map(|i| cross((0.0, 0.0), h[i], h[(i + 1) % n])).sum::<f64>()
    }

    #[test]
    fn tetrahedral_case() {
        let p = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.3, 0.3, 0.3],
        ];
        let cells = delaunay(&p).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.contains(&4)));
    }

    #[test]
    fn collinear_input_is_rejected_and_fan_covers() {
        let p = vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0], vec![0.25, 0.25]];
        assert!(delaunay(&p).is_none());
        let f = fan(&p);
        assert_eq!(f.len(), 2);
        let mut seen = [false; 4];
        for s in &f {
            for &v in s {
                seen[v] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
