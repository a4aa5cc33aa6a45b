use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scopula_cli::output::parse_rows;
use scopula_cli::RunManifest;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn scopula(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scopula")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    parse_rows(&std::fs::read_to_string(path).unwrap())
}

fn data_args<'a>(input: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["--input", input, "--variable", "pm25", "--out-dir", out]
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&scopula(&["--help"])), 0);
    assert_eq!(code(&scopula(&["--version"])), 0);
    assert_eq!(code(&scopula(&["interpolate", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&scopula(&["no-such-command"])), 1);
    assert_eq!(code(&scopula(&["interpolate", "--resolution", "many"])), 1);
    let o = scopula(&["fit-marginal", "--variable", "pm25"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--input"));
}

#[test]
fn regular_grid_has_resolution_squared_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture("five_stations.csv");
    let out = tmp.path().join("o");
    let (i, o) = (input.to_str().unwrap(), out.to_str().unwrap());
    let mut args = vec!["interpolate", "--method", "sc", "--resolution", "7", "--hd-cut", "12000"];
    args.extend(data_args(i, o));
    let r = scopula(&args);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let surface = rows(&out.join("surface.csv"));
    assert_eq!(surface.len(), 49);
    assert!(surface.iter().all(|r| r[2].parse::<f64>().unwrap() > 0.0));
    let first = std::fs::read_to_string(out.join("surface.csv")).unwrap();
    assert!(first.starts_with("# lon,lat,value"));
}

#[test]
fn missing_variable_fails_before_computation() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture("five_stations.csv");
    let out = tmp.path().join("never");
    let r = scopula(&["interpolate", "--input", input.to_str().unwrap(), "--variable", "no2", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("no2"), "{}", stderr(&r));
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn computation_failure_exits_two() {
    // Five stations are too few for the SBVC pair copulas.
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture("five_stations.csv");
    let out = tmp.path().join("o");
    let mut args = vec!["interpolate", "--method", "sbvc", "--iters", "200", "--resolution", "3"];
    args.extend(data_args(input.to_str().unwrap(), out.to_str().unwrap()));
    let r = scopula(&args);
    assert_eq!(code(&r), 2, "{}", stderr(&r));
}

#[test]
fn em_trace_is_monotone() {
    let tmp = tempfile::tempdir().unwrap();
    let input = fixture("five_stations.csv");
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    let mut args = vec!["fit-marginal"];
    args.extend(data_args(input.to_str().unwrap(), o));
    assert_eq!(code(&scopula(&args)), 0);
    let plot = tmp.path().join("em.csv");
    let r = scopula(&["plot-data", "--run-dir", o, "--kind", "em_trace", "--out", plot.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let ll: Vec<f64> = rows(&plot).iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(ll.len() >= 2);
    for w in ll.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "log-likelihood decreased: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn plot_data_names_the_missing_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let r = scopula(&["plot-data", "--run-dir", tmp.path().to_str().unwrap(), "--kind", "variogram"]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("scopula variogram"), "{}", stderr(&r));
    let r = scopula(&["plot-data", "--run-dir", tmp.path().to_str().unwrap(), "--kind", "cv_bars"]);
    assert!(stderr(&r).contains("scopula validate"));
    let r = scopula(&["plot-data", "--run-dir", tmp.path().to_str().unwrap(), "--kind", "histogram"]);
    assert_eq!(code(&r), 1);
}

fn run_into(dir: &Path) -> RunManifest {
    let r = scopula(&["run", "--config", fixture("run.toml").to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn identical_runs_produce_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_into(&tmp.path().join("a"));
    let b = run_into(&tmp.path().join("b"));
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.input_sha256, b.input_sha256);
    assert!(a.failed_stage.is_none());
    assert!(a.stages.iter().all(|s| s.status == "ok"), "{:?}", a.stages);
    assert_eq!(a.outputs.len(), b.outputs.len());
    assert!(a.outputs.len() >= 8);
    for (x, y) in a.outputs.iter().zip(&b.outputs) {
        assert_eq!(x.file, y.file);
        assert_eq!(x.sha256, y.sha256, "{} differs between runs", x.file);
    }
}

#[test]
fn run_outputs_feed_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    run_into(&dir);
    let d = dir.to_str().unwrap();
    for kind in ["variogram", "acf", "em_trace", "surface", "cv_bars"] {
        let r = scopula(&["plot-data", "--run-dir", d, "--kind", kind]);
        assert_eq!(code(&r), 0, "{kind}: {}", stderr(&r));
    }
    let r = scopula(&["plot-data", "--run-dir", d, "--kind", "cv_bars"]);
    let text = String::from_utf8(r.stdout).unwrap();
    let methods: Vec<String> = parse_rows(&text).into_iter().map(|r| r[1].clone()).collect();
    for m in ["sc:mixture-argmax", "ok", "idw"] {
        assert!(methods.iter().any(|x| x == m), "{m} missing from {methods:?}");
    }
    assert_eq!(rows(&dir.join("surface.csv")).len(), 36);
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "input = \"x.csv\"\nvariables.target = \"pm25\"\nsc.epsilonn = 0.3\n").unwrap();
    let r = scopula(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("epsilonn"), "{}", stderr(&r));
}

#[test]
fn simulate_then_sbvc_writes_a_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let s = sim.to_str().unwrap();
    let r = scopula(&["simulate", "--seed", "5", "--nx", "12", "--ny", "12", "--stations", "16", "--days", "10", "--out-dir", s]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(rows(&sim.join("truth.csv")).len(), 144);
    let data = sim.join("data.csv");
    let out = tmp.path().join("o");
    let mut args = vec!["interpolate", "--method", "sbvc", "--iters", "300", "--seed", "2", "--resolution", "3"];
    args.extend(data_args(data.to_str().unwrap(), out.to_str().unwrap()));
    let r = scopula(&args);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let trace = rows(&out.join("chain_trace.csv"));
    assert!(!trace.is_empty());
    assert!(trace.iter().all(|r| r[0] == "0"));
    assert_eq!(rows(&out.join("surface.csv")).len(), 9);
}

#[test]
fn zero_threads_is_rejected() {
    let r = scopula(&["--threads", "0", "plot-data", "--run-dir", ".", "--kind", "acf"]);
    assert_eq!(code(&r), 1);
}
