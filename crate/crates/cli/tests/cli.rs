use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ssep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssep")).args(args).env_remove("SSEP_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn stationary_exact_linear_profile() {
    let o = ssep(&["stationary-exact", "--N", "4", "--theta", "0", "--c", "1", "--alpha", "0", "--beta", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let vals: Vec<f64> = stdout(&o).lines().map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    for (v, want) in vals.iter().zip([0.25, 0.5, 0.75]) {
        assert!((v - want).abs() < 1e-12, "{vals:?}");
    }
}

#[test]
fn simulate_at_time_zero_echoes_initial_state() {
    let o = ssep(&["simulate", "--N", "8", "--t", "0", "--init", "step", "--integrand", "eta1-alpha", "--integrand", "m-target"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let field = |key: &str| {
        out.lines().find_map(|l| l.strip_prefix(key)).map(|s| s.trim().to_string()).unwrap_or_else(|| panic!("{key} in {out}"))
    };
    assert_eq!(field("initial:"), "1111000");
    assert_eq!(field("final:"), "1111000");
    assert_eq!(field("events:"), "0");
    assert_eq!(field("integral[eta1-alpha]:").parse::<f64>().unwrap(), 0.0);
    assert_eq!(field("integral[m-target]:").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--N", "16", "--t", "0.05", "--seed", "11", "--init", "bernoulli:0.5"];
    let a = ssep(&args);
    let b = ssep(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = ssep(&["simulate", "--N", "16", "--t", "0.05", "--seed", "12", "--init", "bernoulli:0.5"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn invalid_parameters_exit_2() {
    let o = ssep(&["simulate", "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"));
    assert_eq!(ssep(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(ssep(&["brute-force", "--N", "20"]).status.code(), Some(2));
    assert_eq!(ssep(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "seed = 1\n\n[params]\nN = 8\nc = 1.0\ntheta = 0.0\nalpha = 0.2\nbeta = 0.8\ngamma = 0.0\nwidth = 3\n").unwrap();
    let o = ssep(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 10"), "{err}");
}

#[test]
fn simulate_from_config_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        format!(
            "seed = 3\n[params]\nN = 16\nc = 1.0\ntheta = 2.0\nalpha = 0.2\nbeta = 0.8\ngamma = 1.0\n\
             [simulate]\nt = 0.1\nsamples = 5\nintegrands = [\"m-target\"]\n[output]\ndir = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = ssep(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("regime: neumann-relaxing"));
    let trace = fs::read_to_string(out.join("mean_trace.csv")).unwrap();
    assert!(trace.starts_with("# ssep-csv v1 trace"));
    assert_eq!(trace.lines().count(), 2 + 6);
    assert!(out.join("profile.csv").exists());
}

#[test]
fn pde_robin_and_stationary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rho.csv");
    let o = ssep(&["pde", "--bc", "robin", "--t", "0.05", "--M", "64", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("# ssep-csv v1 profile"));
    let o = ssep(&["pde", "--bc", "dirichlet", "--stationary", "--alpha", "0.2", "--beta", "0.8", "--M", "16"]);
    let out = stdout(&o);
    let mid = out.lines().find_map(|l| l.strip_prefix("rho(0.5):")).unwrap().trim().parse::<f64>().unwrap();
    assert!((mid - 0.5).abs() < 1e-12);
    assert_eq!(ssep(&["pde", "--bc", "neumann", "--M", "4"]).status.code(), Some(2));
}

#[test]
fn verify_or_passes() {
    let o = ssep(&["verify", "OR"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("criterion  1 [OR]"));
    assert_eq!(ssep(&["verify", "2"]).status.code(), Some(0));
}

fn write_spec(dir: &Path, max_error: f64) -> std::path::PathBuf {
    let path = dir.join(format!("or_{max_error}.toml"));
    fs::write(
        &path,
        format!(
            "id = \"OR\"\nname = \"small\"\nreplicas = 2\nevents = 20000\n\
             [grid]\nN = [3]\ntheta = [1.0]\n\
             [thresholds]\nmax_error = {max_error}\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 0.5);
    let out = dir.path().join("sweep");
    let o = ssep(&["sweep", spec.to_str().unwrap(), "--seed", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let csv = out.join("or_0.5.csv");
    assert!(fs::read_to_string(&csv).unwrap().starts_with("# ssep-csv v1 long"));
    assert!(out.join("or_0.5.json").exists());

    let svg = dir.path().join("tv.svg");
    let o = ssep(&["plot", csv.to_str().unwrap(), "--observable", "tv", "--out", svg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    // a curve file from the same sweep also plots
    let curve = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_str().unwrap().contains("_p0_"))
        .unwrap();
    assert_eq!(ssep(&["plot", curve.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn sweep_below_threshold_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 1e-9);
    let o = ssep(&["sweep", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn plot_rejects_foreign_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    fs::write(&path, "a,b\n1,2\n").unwrap();
    assert_eq!(ssep(&["plot", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn thread_override_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_ssep"))
        .args(["stationary-exact", "--N", "4"])
        .env("SSEP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
