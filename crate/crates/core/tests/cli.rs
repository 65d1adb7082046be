use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stoch_duopoly::export::{read_density, read_roots, read_sweep, read_trajectory};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stoch-duopoly"));
    cmd.env_remove("STOCH_DUOPOLY_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn analyze_reference_game() {
    let o = run(&["analyze", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = stdout(&o);
    let close = |k: &str, v: f64, tol: f64| {
        let got = csv_value(&t, k);
        assert!((got - v).abs() <= tol, "{k}: {got} vs {v}");
    };
    close("x10", 0.413223, 1e-6);
    close("x20", 0.041322, 1e-6);
    close("a11", -0.176, 1e-12);
    close("a12", 0.792, 1e-12);
    close("a21", -1.584, 1e-12);
    close("a22", -3.52, 1e-12);
    close("mu1_re", -0.606607, 1e-6);
    close("mu2_re", -3.089393, 1e-6);
    close("half_trace", -1.848, 1e-12);
    let quad = csv_value(&t, "lambda_quadrature");
    let closed = csv_value(&t, "lambda_closed_form");
    assert!((quad - closed).abs() < 1e-6);
    assert!(quad < 0.0);
}

#[test]
fn analyze_symmetric_game_text() {
    let o = run(&["analyze", "--c1", "1", "--c2", "1", "--k1", "1", "--k2", "1"]);
    assert!(o.status.success());
    let t = stdout(&o);
    assert!(t.contains("x10 = 0.25  x20 = 0.25"), "{t}");
    assert!(t.contains("A = [[-4, 0], [0, -4]]"), "{t}");
}

#[test]
fn invalid_parameter_names_the_field() {
    let o = run(&["analyze", "--c1", "-0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c1"), "{}", stderr(&o));
    let o = run(&["analyze", "--grid", "8"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"c1": 1, "c2": 1, "k1": 1, "k2": 1, "format": "csv"}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = run(&["analyze", "--config", cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_value(&stdout(&o), "x10"), 0.25);
    let o = run(&["analyze", "--config", cfg, "--c2", "3"]);
    assert_eq!(csv_value(&stdout(&o), "x10"), 3.0 / 16.0);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"c1": "x"}"#).unwrap();
    assert_eq!(run(&["analyze", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{"gird": 64}"#).unwrap();
    assert_eq!(run(&["analyze", "--config", unknown.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["analyze", "--config", missing.to_str().unwrap()]).status.code(), Some(4));
}

fn check_csv_format(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    // every float carries 17 significant digits
    for line in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        for field in line.split(',').filter(|f| f.contains('e') && f.parse::<f64>().is_ok()) {
            let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
            assert!(mantissa.replace('.', "").len() >= 12, "{field}");
        }
    }
}

#[test]
fn two_point_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("s");
    let o = run(&["sweep", "--steps", "2", "--from", "2", "--to", "3", "--grid", "256", "-o", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep_csv = dir.path().join("s_sweep.csv");
    let rows = read_sweep(fs::File::open(&sweep_csv).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].param, rows[1].param), (2.0, 3.0));
    assert!(rows.iter().all(|r| r.method == "quadrature" && r.lambda.is_some() && r.stderr.is_none()));
    let roots = read_roots(fs::File::open(dir.path().join("s_roots.csv")).unwrap()).unwrap();
    assert!(roots.is_empty());
    check_csv_format(&sweep_csv);
    let svg = fs::read_to_string(dir.path().join("s_sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));
}

#[test]
fn sweep_with_gaps_and_roots() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("b");
    let o = run(&[
        "sweep", "--sweep-param", "beta", "--from", "-1", "--to", "1", "--steps", "5", "--alpha", "0",
        "--grid", "256", "-o", prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_sweep(fs::File::open(dir.path().join("b_sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows[2].param, 0.0);
    assert_eq!(rows[2].lambda, None);
    assert!(stdout(&o).contains("1 skipped"));

    let o = run(&[
        "sweep", "--sweep-param", "beta", "--from", "-0.01", "--to", "0.01", "--steps", "3",
        "--grid", "256", "-o", prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn uniform_density_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("u");
    let o = run(&[
        "density", "--c1", "1", "--c2", "1", "--k1", "1", "--k2", "1", "--alpha", "0.5", "--beta", "1",
        "--grid", "128", "--density-methods", "closed-form,rotation", "-o", prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for m in ["closed-form", "rotation"] {
        let path = dir.path().join(format!("u_density_{m}.csv"));
        check_csv_format(&path);
        let rows = read_density(fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(rows.len(), 129);
        assert!((rows[128].0 - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        for (_, p) in rows {
            assert!((p - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-6);
        }
    }
    assert!(dir.path().join("u_density.svg").exists());
}

#[test]
fn half_domain_output() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("h");
    let o = run(&["density", "--grid", "256", "--domain", "half", "-o", prefix.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_density(fs::File::open(dir.path().join("h_density_closed-form.csv")).unwrap()).unwrap();
    assert!((rows.last().unwrap().0 - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn degenerate_diffusion_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("d");
    let o = run(&["density", "--b", "1,0,0,1", "--grid", "64", "-o", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));

    let o = run(&["density", "--b", "1,2,3,4", "--density-methods", "rotation", "-o", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_from_stationary_state_is_flat_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("t");
    let args = ["simulate", "--n-steps", "2000", "--keep-every", "100", "--seed", "4", "-o", prefix.to_str().unwrap()];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.path().join("t_trajectory.csv");
    check_csv_format(&path);
    let first = fs::read(&path).unwrap();
    let traj = read_trajectory(first.as_slice()).unwrap();
    assert_eq!(traj.rows.len(), 21);
    assert_eq!(traj.truncated_at, None);
    let (x1, x2) = (traj.rows[0].2, traj.rows[0].3);
    assert!(traj.rows.iter().all(|r| (r.2 - x1).abs() < 1e-14 && (r.3 - x2).abs() < 1e-14));
    assert!(run(&args).status.success());
    assert_eq!(fs::read(&path).unwrap(), first);
    assert!(dir.path().join("t_timeseries.svg").exists());
    assert!(dir.path().join("t_phase.svg").exists());
}

#[test]
fn deterministic_companion_converges() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("o");
    let o = run(&[
        "simulate", "--deterministic", "--perturbation", "0.1,0.1", "--n-steps", "50000", "--keep-every", "1000",
        "-o", prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ode = read_trajectory(fs::File::open(dir.path().join("o_ode.csv")).unwrap()).unwrap();
    let last = ode.rows.last().unwrap();
    assert!((last.2 - 0.41322314049586776).abs() < 1e-6 && (last.3 - 0.041322314049586776).abs() < 1e-6);
}

#[test]
fn blowup_is_flagged_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("x");
    let o = run(&[
        "simulate", "--alpha", "30", "--beta", "30", "--scheme", "euler-maruyama", "--h", "0.01", "--x0", "1,1",
        "--keep-every", "1", "-o", prefix.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("x_trajectory.csv")).unwrap();
    assert!(text.lines().last().unwrap().starts_with("# truncated_at="));
    let svg = fs::read_to_string(dir.path().join("x_timeseries.svg")).unwrap();
    assert!(svg.contains("truncated"));
}

#[test]
fn mc_lambda_output_and_step_guard() {
    let o = run(&["mc-lambda", "--n-paths", "4", "--horizon", "5", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = stdout(&o);
    let mut lines = t.lines();
    assert_eq!(lines.next(), Some("lambda,stderr,n_paths,horizon,h,seed"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[2], "4");
    assert!(fields[1].parse::<f64>().unwrap() >= 0.0);

    let o = run(&["mc-lambda", "--h", "0.1", "--horizon", "20"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn thread_cap_is_validated() {
    let o = bin().args(["analyze"]).env("STOCH_DUOPOLY_THREADS", "two").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let a = bin()
        .args(["mc-lambda", "--n-paths", "6", "--horizon", "2", "--format", "csv"])
        .env("STOCH_DUOPOLY_THREADS", "1")
        .output()
        .unwrap();
    let b = bin()
        .args(["mc-lambda", "--n-paths", "6", "--horizon", "2", "--format", "csv"])
        .env("STOCH_DUOPOLY_THREADS", "0")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let prefix = blocker.join("sub").join("p");
    let o = run(&["sweep", "--steps", "2", "--grid", "64", "-o", prefix.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
