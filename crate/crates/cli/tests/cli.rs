use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lsmo(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsmo"))
        .args(args)
        .env("LSMO_OUTPUT_DIR", out_dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn surrogate_run_writes_register_frontier_and_levels() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lsmo(&["surrogate", &config("surrogate.cfg")], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["register.csv", "frontier.csv", "levels.csv", "config.toml"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let register = std::fs::read_to_string(tmp.path().join("register.csv")).unwrap();
    assert!(register.starts_with("id,level,w_star_1,w_star_2,w_final_1,w_final_2,J_1,J_2"));
    let levels = lsmo::output::read_levels(&tmp.path().join("levels.csv")).unwrap();
    assert!(levels.len() <= 6);
    assert!(levels.windows(2).all(|w| w[1].mean < w[0].mean));
}

#[test]
fn parallel_run_matches_serial() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("surrogate_tri.cfg");
    assert!(lsmo(&["run", &cfg], a.path()).status.success());
    assert!(lsmo(&["run", &cfg, "--jobs", "4"], b.path()).status.success());
    let ra = std::fs::read_to_string(a.path().join("register.csv")).unwrap();
    let rb = std::fs::read_to_string(b.path().join("register.csv")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn pareto_refilters_a_register() {
    let tmp = tempfile::tempdir().unwrap();
    let reg = write(
        tmp.path(),
        "reg.csv",
        "id,level,w_star_1,w_star_2,w_final_1,w_final_2,J_1,J_2,J_normalized_1,J_normalized_2,converged,iterations\n\
         0,0,0.9,0.1,0.9,0.1,1,3,1,3,true,5\n\
         1,0,0.1,0.9,0.1,0.9,3,1,3,1,true,5\n\
         2,1,0.5,0.5,0.5,0.5,2,2,2,2,true,5\n\
         3,1,0.5,0.5,0.5,0.5,2.0001,2.0001,2,2,true,5\n\
         4,1,0.5,0.5,0.5,0.5,3,3,3,3,true,5\n",
    );
    let front = tmp.path().join("front.csv");
    let out = lsmo(&["pareto", &reg, "--tol", "1e-3", "--output", front.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lsmo::output::read_register(&front).unwrap();
    let ids: Vec<usize> = rows.iter().map(|c| c.id).collect();
    assert_eq!(ids, vec![0, 1, 2]);

    let out = lsmo(&["pareto", &reg], tmp.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 4);
}

#[test]
fn validate_reports_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.cfg", "problem = \"girder\"\n[girder]\nnx = 8\nny = 4\n");
    let out = lsmo(&["validate", &cfg], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("default applied: girder.volume_fraction"), "{text}");
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.cfg", "problem = \"girder\"\n[girder]\nvolume_fraction = 1.5\n");
    let out = lsmo(&["validate", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("girder.volume_fraction"));

    let unknown = write(tmp.path(), "unknown.cfg", "problem = \"girder\"\n[girder]\nwidht = 2.0\n");
    assert_eq!(lsmo(&["validate", &unknown], tmp.path()).status.code(), Some(2));

    let missing = tmp.path().join("nope.cfg");
    assert_eq!(lsmo(&["run", missing.to_str().unwrap()], tmp.path()).status.code(), Some(2));

    assert_eq!(lsmo(&["surrogate", &config("girder.cfg")], tmp.path()).status.code(), Some(2));
}

#[test]
fn malformed_register_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let reg = write(tmp.path(), "reg.csv", "id,level\nx,y\n");
    let out = lsmo(&["pareto", &reg], tmp.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn shipped_configs_validate() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["girder.cfg", "gripper.cfg", "lbracket.cfg", "clamped_tri.cfg", "surrogate.cfg", "surrogate_tri.cfg"] {
        let out = lsmo(&["validate", &config(name)], tmp.path());
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
