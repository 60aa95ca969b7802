//! End-to-end checks of the binary: artifacts, determinism, exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn sgdchain(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgdchain"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_data_deterministic_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "generate-data", "--m", "200", "--d", "5", "--noise-df", "10", "--seed", "1",
        "--out", "a", "--name", "data",
    ];
    assert_code(&sgdchain(&args, dir.path()), 0);
    let mut args_b = args;
    args_b[10] = "b";
    assert_code(&sgdchain(&args_b, dir.path()), 0);
    let csv_a = std::fs::read(dir.path().join("a/data.csv")).unwrap();
    let csv_b = std::fs::read(dir.path().join("b/data.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "same seed must give byte-identical CSV");
    let meta_a = std::fs::read(dir.path().join("a/data.meta.json")).unwrap();
    let meta_b = std::fs::read(dir.path().join("b/data.meta.json")).unwrap();
    assert_eq!(meta_a, meta_b);
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "y,x1,x2,x3,x4,x5");
    assert_eq!(lines.count(), 200);

    let bad = sgdchain(
        &["generate-data", "--m", "0", "--d", "5", "--seed", "1", "--out", "c"],
        dir.path(),
    );
    assert_code(&bad, 1);
}

#[test]
fn constants_hand_values_and_cap_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sgdchain(
        &["constants", "--l", "1", "--alpha", "1", "--beta", "0", "--l-xi", "1"],
        dir.path(),
    );
    assert_code(&out, 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["c_l_alpha"], 0.25);
    assert_eq!(v["mu2"], 3.0);

    // QuadSine constants via the descriptor: mu2 bound 3 + 2*25/1 = 53
    let out = sgdchain(&["constants", "--objective", "quadsine"], dir.path());
    assert_code(&out, 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["alpha"], 1.0);
    assert_eq!(v["beta"], 25.0);
    assert_eq!(v["mu2"], 53.0);

    // an eta above the cap names the binding bound and exits 1
    let out = sgdchain(
        &[
            "constants", "--l", "1", "--alpha", "1", "--beta", "0", "--l-xi", "1",
            "--eta", "0.49",
        ],
        dir.path(),
    );
    assert_code(&out, 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cap"), "stderr: {err}");
}

#[test]
fn run_respects_cap_and_dumps_iterates() {
    let dir = tempfile::tempdir().unwrap();
    // QuadSine cap with gaussian noise is about 1/303; eta 0.1 must refuse
    let refuse = sgdchain(
        &[
            "run", "--objective", "quadsine", "--noise", "gaussian", "--sigma", "1",
            "--eta", "0.1", "--n-iters", "500", "--burn-in", "100", "--theta0", "0",
            "--seed", "3",
        ],
        dir.path(),
    );
    assert_code(&refuse, 1);
    assert!(String::from_utf8_lossy(&refuse.stderr).contains("--force"));

    let forced = sgdchain(
        &[
            "run", "--objective", "quadsine", "--noise", "gaussian", "--sigma", "1",
            "--eta", "0.1", "--n-iters", "500", "--burn-in", "100", "--theta0", "0",
            "--seed", "3", "--force", "--dump-iterates", "iters.csv",
        ],
        dir.path(),
    );
    assert_code(&forced, 0);
    let dump = std::fs::read_to_string(dir.path().join("iters.csv")).unwrap();
    let mut lines = dump.lines();
    assert_eq!(lines.next().unwrap(), "k,theta_1");
    let first = lines.next().unwrap();
    assert!(first.starts_with("101,"), "first recorded row: {first}");
    assert_eq!(dump.lines().count(), 401);
}

#[test]
fn check_certifies_and_flags_nonconvexity() {
    let dir = tempfile::tempdir().unwrap();
    let ok = sgdchain(
        &[
            "check", "--objective", "quadsine", "--assumption", "dissipativity",
            "--alpha", "1", "--radius", "50", "--samples", "10000", "--seed", "7",
            "--out", "chk",
        ],
        dir.path(),
    );
    assert_code(&ok, 0);
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("chk/check_dissipativity.json")).unwrap())
            .unwrap();
    assert_eq!(cert["certified"], true);
    assert!(cert["params"]["beta_hat"].as_f64().unwrap() <= 25.0);

    let loja = sgdchain(
        &[
            "check", "--objective", "simplified-cauchy", "--dim", "3", "--lambda", "0.1",
            "--assumption", "lojasiewicz", "--samples", "5000", "--seed", "7", "--out", "chk2",
        ],
        dir.path(),
    );
    assert_code(&loja, 0);

    let nonconvex = sgdchain(
        &[
            "check", "--objective", "simplified-cauchy", "--dim", "3", "--lambda", "0.1",
            "--assumption", "convexity", "--out", "chk3",
        ],
        dir.path(),
    );
    assert_code(&nonconvex, 3);

    let convex = sgdchain(
        &["check", "--objective", "quadratic", "--dim", "2", "--assumption", "convexity", "--out", "chk4"],
        dir.path(),
    );
    assert_code(&convex, 0);
}

#[test]
fn clt_cell_artifacts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "clt", "--objective", "quadratic", "--dim", "2", "--noise", "gaussian",
        "--sigma", "1", "--etas", "0.1,0.2", "--n-iters", "600", "--burn-in", "100",
        "--theta0", "1", "--theta0-alt", "1.5", "--n-reps", "120", "--seed", "5",
        "--test-fns", "norm", "--out", "cltout",
    ];
    assert_code(&sgdchain(&args, dir.path()), 0);
    for f in [
        "cltout/resolved_config.cfg",
        "cltout/clt_eta0p1_init0.csv",
        "cltout/clt_eta0p1_init1.csv",
        "cltout/clt_eta0p2_init0.csv",
        "cltout/normality_eta0p1_init0.json",
        "cltout/ks_inits_eta0p1.json",
        "cltout/ks_inits_eta0p2.json",
        "cltout/mean_shift.json",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    // byte-identical on re-run with the same seed
    let before = std::fs::read(dir.path().join("cltout/clt_eta0p1_init0.csv")).unwrap();
    let mut args_b = args;
    args_b[26] = "cltout2";
    assert_code(&sgdchain(&args_b, dir.path()), 0);
    let after = std::fs::read(dir.path().join("cltout2/clt_eta0p1_init0.csv")).unwrap();
    assert_eq!(before, after);

    // N = 1 is an argument error
    let mut args_c = args;
    args_c[20] = "1";
    assert_code(&sgdchain(&args_c, dir.path()), 1);
}

#[test]
fn variance_strategies_and_level_guard() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "variance", "--objective", "quadratic", "--dim", "1", "--noise", "gaussian",
        "--sigma", "1", "--eta", "0.1", "--theta0", "0", "--seed", "9", "--test-fns",
        "coord:0", "--out", "var",
    ];
    let mut bm = common.to_vec();
    bm.extend(["--strategy", "batch-means", "--n-iters", "110000", "--burn-in", "1000"]);
    assert_code(&sgdchain(&bm, dir.path()), 0);
    let mut rep = common.to_vec();
    rep.extend([
        "--strategy", "replication", "--n-iters", "6000", "--burn-in", "1000",
        "--n-reps", "200",
    ]);
    assert_code(&sgdchain(&rep, dir.path()), 0);
    let v_bm: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("var/variance_batch-means.json")).unwrap())
            .unwrap();
    let v_rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("var/variance_replication.json")).unwrap())
            .unwrap();
    let (a, b) = (
        v_bm["sigma2_hat"].as_f64().unwrap(),
        v_rep["sigma2_hat"].as_f64().unwrap(),
    );
    assert!((a - b).abs() <= 0.25 * a.max(b), "estimates {a} vs {b}");

    let mut bad = common.to_vec();
    bad.extend(["--strategy", "batch-means", "--n-iters", "110000", "--level", "1.5"]);
    assert_code(&sgdchain(&bad, dir.path()), 1);
}

#[test]
fn bias_requires_known_min() {
    let dir = tempfile::tempdir().unwrap();
    assert_code(
        &sgdchain(
            &["generate-data", "--m", "50", "--d", "3", "--seed", "2", "--out", ".", "--name", "ds"],
            dir.path(),
        ),
        0,
    );
    let out = sgdchain(
        &[
            "bias", "--objective", "cauchy-mle", "--dataset", "ds.csv", "--lambda", "0.1",
            "--noise", "gaussian", "--etas", "0.01,0.02", "--n-iters", "500",
            "--burn-in", "100", "--theta0", "0", "--n-reps", "8", "--seed", "3",
            "--out", "biasout", "--force",
        ],
        dir.path(),
    );
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("known minimizer"));

    let ok = sgdchain(
        &[
            "bias", "--objective", "quadratic", "--dim", "1", "--noise", "gaussian",
            "--sigma", "1", "--etas", "0.05,0.1", "--n-iters", "2000", "--burn-in", "500",
            "--theta0", "0", "--n-reps", "16", "--seed", "3", "--test-fns", "norm",
            "--out", "biasok", "--force",
        ],
        dir.path(),
    );
    assert_code(&ok, 0);
    assert!(dir.path().join("biasok/bias_curve.json").exists());
    let trace = std::fs::read_to_string(dir.path().join("biasok/bias_trace.csv")).unwrap();
    assert!(trace.starts_with("eta,k,bias\n"));
    assert!(trace.lines().count() > 10);
}

#[test]
fn config_file_drives_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.cfg"),
        "objective.name = quadratic\nobjective.dim = 2\nobjective.center = 0,0\n\
         noise.kind = gaussian\nnoise.sigma = 1\nsgd.eta = 0.1\nsgd.n_iters = 400\n\
         sgd.burn_in = 100\nsgd.theta0 = 1\nsgd.seed = 11\ntest.fns = norm\n",
    )
    .unwrap();
    let out = sgdchain(&["run", "--config", "exp.cfg"], dir.path());
    assert_code(&out, 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_recorded"], 300);
    assert_eq!(v["objective"], "quadratic");
    // flags override the file
    let out2 = sgdchain(
        &["run", "--config", "exp.cfg", "--n-iters", "200", "--burn-in", "50"],
        dir.path(),
    );
    assert_code(&out2, 0);
    let v2: serde_json::Value = serde_json::from_slice(&out2.stdout).unwrap();
    assert_eq!(v2["n_recorded"], 150);
}
