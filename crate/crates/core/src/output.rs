//! Result files: register and level-history CSVs, per-candidate iteration
//! logs and level set snapshots.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::asd::{Candidate, FailedRun, LevelRecord};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::optimizer::IterationRecord;

pub const REGISTER_FILE: &str = "register.csv";
pub const FRONTIER_FILE: &str = "frontier.csv";
pub const LEVELS_FILE: &str = "levels.csv";
pub const FAILURES_FILE: &str = "failures.csv";

pub fn snapshot_name(k: usize) -> String {
    format!("candidate_{k}_final.dat")
}

pub fn log_name(k: usize) -> String {
    format!("candidate_{k}_log.csv")
}

fn columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn nums(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| x.to_string())
}

/// Writes the register; floats use the shortest round-trip representation.
pub fn write_register(path: &Path, candidates: &[Candidate]) -> Result<()> {
    write_register_to(File::create(path)?, candidates)
}

pub fn write_register_to<W: Write>(out: W, candidates: &[Candidate]) -> Result<()> {
    let m = candidates.first().map_or(0, |c| c.objectives.len());
    let k = candidates.first().map_or(0, |c| c.constraints.len());
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = ["id".to_string(), "level".to_string()]
        .into_iter()
        .chain(columns("w_star", m))
        .chain(columns("w_final", m))
        .chain(columns("J", m))
        .chain(columns("J_normalized", m))
        .chain(columns("G", k))
        .chain(columns("feasible", k))
        .chain(["converged".to_string(), "iterations".to_string()])
        .collect();
    w.write_record(&header)?;
    for c in candidates {
        if c.objectives.len() != m || c.constraints.len() != k {
            return Err(Error::invalid("register rows have inconsistent widths"));
        }
        let row: Vec<String> = [c.id.to_string(), c.level.to_string()]
            .into_iter()
            .chain(nums(&c.w_star))
            .chain(nums(&c.w_final))
            .chain(nums(&c.objectives))
            .chain(nums(&c.normalized))
            .chain(nums(&c.constraints))
            .chain(c.feasible.iter().map(|f| f.to_string()))
            .chain([c.converged.to_string(), c.iterations.to_string()])
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_register(path: &Path) -> Result<Vec<Candidate>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let idx = |name: &str| header.iter().position(|h| h == name);
    let group = |prefix: &str| -> Vec<usize> {
        (1..)
            .map_while(|i| header.iter().position(|h| h == format!("{prefix}_{i}")))
            .collect()
    };
    let (id, level, converged, iterations) = match (idx("id"), idx("level"), idx("converged"), idx("iterations")) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(parse_err(path, "missing id, level, converged or iterations column")),
    };
    let (ws, wf, j, jn, g, fe) = (
        group("w_star"),
        group("w_final"),
        group("J"),
        group("J_normalized"),
        group("G"),
        group("feasible"),
    );
    if j.is_empty() || ws.len() != j.len() || wf.len() != j.len() || jn.len() != j.len() || g.len() != fe.len() {
        return Err(parse_err(path, "register columns are incomplete"));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let float = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|e| parse_err(path, format!("row {}: column {}: {e}", line + 1, &header[i])))
        };
        let floats = |cols: &[usize]| cols.iter().map(|&i| float(i)).collect::<Result<Vec<f64>>>();
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|e| parse_err(path, format!("row {}: column {}: {e}", line + 1, &header[i])))
        };
        let boolean = |i: usize| {
            field(i)
                .parse::<bool>()
                .map_err(|e| parse_err(path, format!("row {}: column {}: {e}", line + 1, &header[i])))
        };
        out.push(Candidate {
            id: int(id)?,
            level: int(level)?,
            w_star: floats(&ws)?,
            w_final: floats(&wf)?,
            objectives: floats(&j)?,
            normalized: floats(&jn)?,
            constraints: floats(&g)?,
            feasible: fe.iter().map(|&i| boolean(i)).collect::<Result<_>>()?,
            converged: boolean(converged)?,
            iterations: int(iterations)?,
        });
    }
    Ok(out)
}

pub fn write_levels(path: &Path, levels: &[LevelRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for l in levels {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per failed run; weights are space separated.
pub fn write_failures(path: &Path, failures: &[FailedRun]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "level", "w_star", "message"])?;
    for f in failures {
        let weights: Vec<String> = nums(&f.w_star).collect();
        w.write_record([f.id.to_string(), f.level.to_string(), weights.join(" "), f.message.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_levels(path: &Path) -> Result<Vec<LevelRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn write_iteration_log(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let m = history.first().map_or(0, |h| h.objectives.len());
    let k = history.first().map_or(0, |h| h.constraints.len());
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = std::iter::once("iteration".to_string())
        .chain(columns("J", m))
        .chain(columns("G", k))
        .chain(columns("w", m))
        .collect();
    w.write_record(&header)?;
    for h in history {
        let row: Vec<String> = std::iter::once(h.iteration.to_string())
            .chain(nums(&h.objectives))
            .chain(nums(&h.constraints))
            .chain(nums(&h.weights))
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Nodal field with its mesh geometry as read back from a snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub nodes: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
}

/// Node table `x y phi` followed by the triangle connectivity, all values
/// printed with nine digits after the decimal point.
pub fn export_field(path: &Path, mesh: &Mesh, phi: &[f64]) -> Result<()> {
    if phi.len() != mesh.node_count() {
        return Err(Error::invalid(format!(
            "field has {} values but the mesh has {} nodes",
            phi.len(),
            mesh.node_count()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# nodes {}", mesh.node_count())?;
    for (p, v) in mesh.nodes().iter().zip(phi) {
        writeln!(w, "{:.9} {:.9} {:.9}", p[0], p[1], v)?;
    }
    writeln!(w, "# triangles {}", mesh.element_count())?;
    for t in mesh.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldSnapshot> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let count = |what: &str, lines: &mut dyn Iterator<Item = (usize, std::io::Result<String>)>| -> Result<usize> {
        let (_, line) = lines.next().ok_or_else(|| parse_err(path, format!("missing `# {what}` header")))?;
        let line = line?;
        line.strip_prefix(&format!("# {what} "))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| parse_err(path, format!("expected `# {what} <count>`, found `{line}`")))
    };
    let n = count("nodes", &mut lines)?;
    let mut nodes = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, line) = lines.next().ok_or_else(|| parse_err(path, "node table is truncated"))?;
        let line = line?;
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, format!("line {}: {e}", no + 1)))?;
        if v.len() != 3 {
            return Err(parse_err(path, format!("line {}: expected `x y phi`", no + 1)));
        }
        nodes.push([v[0], v[1]]);
        values.push(v[2]);
    }
    let t = count("triangles", &mut lines)?;
    let mut triangles = Vec::with_capacity(t);
    for _ in 0..t {
        let (no, line) = lines.next().ok_or_else(|| parse_err(path, "triangle table is truncated"))?;
        let line = line?;
        let v: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(path, format!("line {}: {e}", no + 1)))?;
        if v.len() != 3 || v.iter().any(|&i| i >= n) {
            return Err(parse_err(path, format!("line {}: bad triangle", no + 1)));
        }
        triangles.push([v[0], v[1], v[2]]);
    }
    Ok(FieldSnapshot { nodes, values, triangles })
}

/// Creates the directory if needed and returns it.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rect_mesh;

    fn candidate(id: usize) -> Candidate {
        Candidate {
            id,
            level: 1,
            w_star: vec![0.3, 0.7],
            w_final: vec![0.312_345_678_901_234_5, 0.687_654_321_098_765_5],
            objectives: vec![1.0 / 3.0, 2.0e-7],
            normalized: vec![0.1, std::f64::consts::PI],
            constraints: vec![-1.234e-5],
            feasible: vec![true],
            converged: false,
            iterations: 17,
        }
    }

    #[test]
    fn register_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(REGISTER_FILE);
        let cands = vec![candidate(0), candidate(4)];
        write_register(&p, &cands).unwrap();
        assert_eq!(read_register(&p).unwrap(), cands);
    }

    #[test]
    fn levels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(LEVELS_FILE);
        let l = vec![
            LevelRecord { level: 0, candidates: 2, mean: 1.414, std: 0.0 },
            LevelRecord { level: 1, candidates: 3, mean: 0.7, std: 0.01 },
        ];
        write_levels(&p, &l).unwrap();
        assert_eq!(read_levels(&p).unwrap(), l);
    }

    #[test]
    fn solid_field_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_rect_mesh(1.0, 1.0, 1, 1).unwrap();
        assert_eq!(mesh.element_count(), 2);
        let p = dir.path().join(snapshot_name(3));
        assert!(p.ends_with("candidate_3_final.dat"));
        export_field(&p, &mesh, &[1.0; 4]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let node_lines: Vec<&str> = text.lines().skip(1).take(4).collect();
        assert!(node_lines.iter().all(|l| l.ends_with(" 1.000000000")));
        let back = read_field(&p).unwrap();
        assert_eq!(back.values, vec![1.0; 4]);
        assert_eq!(back.triangles, mesh.triangles());
    }

    #[test]
    fn field_round_trip_at_nine_digits() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_rect_mesh(2.0, 1.0, 4, 3).unwrap();
        let phi: Vec<f64> = (0..mesh.node_count()).map(|i| ((i as f64) * 0.37).sin()).collect();
        let p = dir.path().join("f.dat");
        export_field(&p, &mesh, &phi).unwrap();
        let back = read_field(&p).unwrap();
        // re-exporting what was read reproduces the file byte for byte
        let p2 = dir.path().join("g.dat");
        export_field(&p2, &mesh, &back.values).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
        for (a, b) in phi.iter().zip(&back.values) {
            assert!((a - b).abs() <= 5e-10);
        }
        assert!(export_field(&p, &mesh, &phi[1..]).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let mesh = build_rect_mesh(1.0, 1.0, 1, 1).unwrap();
        let e = export_field(Path::new("/nonexistent-dir/x/y.dat"), &mesh, &[0.0; 4]).unwrap_err();
        assert!(matches!(e, Error::Io(_)));
    }
}
