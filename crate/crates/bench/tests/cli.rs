use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CLASSICAL: &str = r#"
checks = ["classical"]

[family]
preset = "sk"
n = 4

[grid]
beta_min = 0.2
beta_max = 1.5
points = 21

[scheme]
kind = "mc"
samples = 200
seed = 5
"#;

fn ggbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ggbench"))
        .args(args)
        .output()
        .expect("ggbench runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn column(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn classical_run_writes_residuals_integrals_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CLASSICAL);
    let out = dir.path().join("out");
    let res = ggbench(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let results = out.join("results.csv");
    let kind = column(&results, "kind");
    let all = rows(&results);
    assert_eq!(all.iter().filter(|r| &r[kind] == "residual").count(), 42);
    assert_eq!(all.iter().filter(|r| &r[kind] == "integral").count(), 2);
    for name in ["classical_r1", "classical_r2"] {
        let curve = rows(&out.join(format!("{name}.curve.csv")));
        assert_eq!(curve.len(), 21);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    let entries = summary["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    let value = column(&results, "value");
    for e in entries {
        let id = e["id"].as_u64().unwrap() as usize;
        let from_csv: f64 = all[id][value].parse().unwrap();
        assert_eq!(e["value"].as_f64().unwrap(), from_csv);
    }
}

#[test]
fn results_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CLASSICAL);
    let mut tables = Vec::new();
    for workers in ["1", "2", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let res = ggbench(&["run", &cfg, "--workers", workers, "--out", out.to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(0));
        let results = out.join("results.csv");
        let wall = column(&results, "wall_time");
        let stripped: Vec<Vec<String>> = rows(&results)
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(i, _)| *i != wall)
                    .map(|(_, f)| f.to_string())
                    .collect()
            })
            .collect();
        tables.push(stripped);
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0], tables[2]);
}

#[test]
fn observable_beyond_replica_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = CLASSICAL.replace(
        "checks = [\"classical\"]",
        "replicas = 2\nobservables = [\"q[1,3]\"]\nchecks = [\"gg\"]",
    );
    let cfg = write_config(dir.path(), &text);
    let res = ggbench(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("q[1,3]"));
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        CLASSICAL.replace("seed = 5", ""),
        CLASSICAL.replace("checks = [\"classical\"]", "checks = [\"nonsense\"]"),
        CLASSICAL.replace("points = 21", "points = 21\ncolour = 3"),
        CLASSICAL.replace("preset = \"sk\"", "preset = \"ising\""),
    ] {
        let cfg = write_config(dir.path(), &text);
        let res = ggbench(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(res.status.code(), Some(2), "{text}");
    }
    let res = ggbench(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn oversized_family_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CLASSICAL.replace("n = 4", "n = 25"));
    let res = ggbench(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let cfg = write_config(dir.path(), CLASSICAL);
    let res = ggbench(&[
        "sweep",
        &cfg,
        "--sizes",
        "4,25",
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn sweep_writes_per_size_runs_and_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CLASSICAL);
    let out = dir.path().join("sweep");
    let res = ggbench(&["sweep", &cfg, "--sizes", "4,6,8", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for n in [4, 6, 8] {
        assert!(out.join(format!("N{n}")).join("results.csv").exists());
    }
    let scaling = out.join("scaling.csv");
    let row = column(&scaling, "row");
    let slope = column(&scaling, "slope");
    let all = rows(&scaling);
    assert_eq!(all.iter().filter(|r| &r[row] == "point").count(), 6);
    let slopes: Vec<f64> = all
        .iter()
        .filter(|r| &r[row] == "slope")
        .map(|r| r[slope].parse().unwrap())
        .collect();
    assert_eq!(slopes.len(), 2);
    // Classical residuals shrink roughly like 1/N for SK.
    assert!(slopes.iter().all(|s| *s < -0.5 && *s > -1.5), "{slopes:?}");
}

#[test]
fn single_size_sweep_reports_unavailable_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CLASSICAL);
    let out = dir.path().join("sweep");
    let res = ggbench(&["sweep", &cfg, "--sizes", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let scaling = out.join("scaling.csv");
    let row = column(&scaling, "row");
    let slope = column(&scaling, "slope");
    let slopes: Vec<String> = rows(&scaling)
        .iter()
        .filter(|r| &r[row] == "slope")
        .map(|r| r[slope].to_string())
        .collect();
    assert_eq!(slopes, ["n/a", "n/a"]);
}

#[test]
fn quadrature_oracles_pass_on_a_small_chain() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
replicas = 3
observables = ["q[1,2]", "q[1,2]*q[2,3]"]
checks = ["stability", "delta-dual", "wick", "energy-identities", "gg"]

[family]
preset = "ea"
dim = 1
side = 3
periodic = false

[grid]
beta_min = 0.1
beta_max = 0.5
points = 5
measure = "beta"

[scheme]
kind = "quadrature"
"#;
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let res = ggbench(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_hard_passed"], true);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        gg_bench::config::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 5);
}
