use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_langinc");

fn langinc(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) {
    let mut full = vec!["--out", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    let out = langinc(&full);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (headers, rows)
}

fn svg_vertex_counts(path: &Path) -> Vec<usize> {
    let text = fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| n.attribute("points").unwrap().split_whitespace().count())
        .collect()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"
[sampler]
steps = 10000
[fp]
n = 400
times = [0.5]
[jko]
m = 300
steps = 20
times = [0.1]
[gibbs]
samples = 500
"#;

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv" || e == "json" || e == "svg"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn every_command_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        for cmd in [&["sample"][..], &["fp"], &["jko"], &["gibbs"], &["repro", "gibbs-pdf"], &["repro", "metro-hist"]] {
            let mut args = vec!["--config", cfg.as_str()];
            args.extend_from_slice(cmd);
            run_ok(dir, &args);
        }
        let samples = dir.join("samples.csv");
        run_ok(dir, &["--config", cfg.as_str(), "metrics", "--a", samples.to_str().unwrap()]);
    }
    let (fa, fb) = (csv_files(&a), csv_files(&b));
    assert!(fa.len() > 20);
    assert_eq!(fa, fb);
}

#[test]
fn svg_series_match_csv_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    for cmd in [&["sample"][..], &["fp"], &["jko"], &["gibbs"], &["repro", "metro-hist"]] {
        let mut args = vec!["--config", cfg.as_str()];
        args.extend_from_slice(cmd);
        run_ok(tmp.path(), &args);
    }
    let mut checked = 0;
    for entry in fs::read_dir(tmp.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let (headers, rows) = read_csv(&path);
            let counts = svg_vertex_counts(&path.with_extension("svg"));
            assert_eq!(counts.len(), headers.len() - 1, "{}", path.display());
            assert!(counts.iter().all(|&c| c == rows.len()), "{}", path.display());
            checked += 1;
        }
    }
    assert!(checked >= 8);
}

#[test]
fn sample_writes_one_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &["sample"]);
    let (headers, rows) = read_csv(&tmp.path().join("samples.csv"));
    assert_eq!(headers, ["step", "x", "chain"]);
    assert_eq!(rows.len(), 10_000);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("samples_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["chains"][0]["retained"], 10_000);
}

#[test]
fn fp_steady_state_has_unit_trapezoid_mass() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &["fp"]);
    let (_, rows) = read_csv(&tmp.path().join("fp_steady.csv"));
    let mass: f64 = rows.windows(2).map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0])).sum();
    assert!((mass - 1.0).abs() <= 1e-10, "{mass}");
    let (_, res) = read_csv(&tmp.path().join("fp_residuals.csv"));
    assert_eq!(res.iter().map(|r| r[0]).collect::<Vec<_>>(), [-1.0, 0.0, 1.0]);
}

#[test]
fn jko_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(tmp.path(), &["jko", "--h", "0.05", "--steps", "7", "--m", "200", "--init", "uniform(-1, 1)"]);
    let (headers, rows) = read_csv(&tmp.path().join("jko_free_energy.csv"));
    assert_eq!(headers, ["k", "free_energy", "w2_step"]);
    assert_eq!(rows.len(), 8);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1] + 1e-8));
}

#[test]
fn metrics_between_two_files() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, "x\n0\n1\n2\n").unwrap();
    fs::write(&b, "id,value\n1,0.5\n2,1.5\n3,2.5\n").unwrap();
    run_ok(tmp.path(), &["metrics", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(v["w1"], 0.5);
    assert_eq!(v["n_a"], 3);
    assert_eq!(v["n_b"], 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();

    let bad = write_config(tmp.path(), "[sampler]\nsteps = 10\n\nbogus = true\n");
    let o = langinc(&["--config", &bad, "--out", out, "sample"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4, column 1"));

    assert_eq!(langinc(&["--out", out, "repro", "no-such-figure"]).status.code(), Some(2));

    let unknown = write_config(tmp.path(), "potential = \"missing\"\n");
    assert_eq!(langinc(&["--config", &unknown, "--out", out, "gibbs"]).status.code(), Some(2));

    let numeric = write_config(tmp.path(), "[sampler]\nepsilon = -1.0\n");
    assert_eq!(langinc(&["--config", &numeric, "--out", out, "sample"]).status.code(), Some(2));

    let unstable = write_config(tmp.path(), "potential = { pieces = [[0.0, 0.0, 2.0]] }\n[sampler]\nepsilon = 1.0\n");
    let o = langinc(&["--config", &unstable, "--out", out, "sample"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged"));
}

#[test]
fn seed_flag_changes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&a, &["--seed", "1", "sample"]);
    run_ok(&b, &["--seed", "2", "sample"]);
    assert_ne!(fs::read(a.join("samples.csv")).unwrap(), fs::read(b.join("samples.csv")).unwrap());
}
