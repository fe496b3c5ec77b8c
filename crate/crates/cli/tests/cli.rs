use std::path::Path;
use std::process::{Command, Output};

use teleprobe::optimizer::{evaluate, Gains};
use teleprobe_cli::csv::{parse_csv, HEADER};

fn teleprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teleprobe"))
        .args(args)
        .env_remove("TELEPROBE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn point_at_unit_gain_agrees_with_closed_forms() {
    let o = teleprobe(&[
        "point", "--alpha", "1.3", "--phi", "0.2", "--r", "0.8", "--m", "4", "--eta1", "0.9", "--eta2", "0.8",
        "--n-th", "0.05",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for q in ["mean_x", "var_x", "sigma", "n_total"] {
        let line = text.lines().find(|l| l.starts_with(q)).unwrap();
        assert!(line.ends_with("OK"), "{line}");
    }
    assert!(text.contains("enhancement:"));
}

#[test]
fn point_with_gains_has_no_closed_form() {
    let o = teleprobe(&["point", "--g-x", "0.7", "--g-p", "1.2", "--phi", "-0.4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("sigma")).unwrap();
    assert!(line.contains("N/A"), "{line}");
    assert!(!text.contains("MISMATCH"));
}

#[test]
fn invalid_input_exits_two_naming_the_field() {
    let o = teleprobe(&["point", "--eta1", "1.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eta1 must be in [0,1]"), "{}", stderr(&o));

    let o = teleprobe(&["optimize", "--n-total", "-5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_total"));

    let o = teleprobe(&["sweep", "--eta2", "1,1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eta2 must be in [0,1]"));
    assert!(o.stdout.is_empty());

    for args in [
        &["sweep", "--workers", "0"][..],
        &["montecarlo", "--n-traj", "1"],
        &["verify", "--n-points", "0"],
        &["point", "--r", "abc"],
        &["frobnicate"],
    ] {
        assert_eq!(teleprobe(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let o = teleprobe(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sweep"));
    assert!(!stdout(&o).contains("corrupt"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(
        dir.path(),
        "# scan\nr = 1.5\nn_total = 100\neta1 = 0.9\nunit_gains = true\n",
    );
    let from_file = stdout(&teleprobe(&["optimize", "--config", &conf]));
    let from_flags = stdout(&teleprobe(&[
        "optimize",
        "--r",
        "1.5",
        "--n-total",
        "100",
        "--eta1",
        "0.9",
        "--unit-gains",
    ]));
    assert_eq!(from_file, from_flags);

    let overridden = stdout(&teleprobe(&["optimize", "--config", &conf, "--eta1", "1"]));
    let row = &parse_csv(&overridden).unwrap()[0];
    assert_eq!((row.eta1, row.r, row.unit_gains), (1.0, 1.5, true));
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "r = 1\nsqueezing = 2\n");
    let o = teleprobe(&["optimize", "-c", &conf]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'squeezing'"), "{}", stderr(&o));

    // keys belong to a command: a seed means nothing to point
    let conf = write_config(dir.path(), "seed = 3\n");
    assert_eq!(teleprobe(&["point", "-c", &conf]).status.code(), Some(2));
    assert_eq!(
        teleprobe(&["verify", "-c", &conf, "--n-points", "2"]).status.code(),
        Some(0)
    );

    let o = teleprobe(&["point", "-c", "/nonexistent/run.conf"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_default_grid_passes() {
    let o = teleprobe(&["verify", "--n-points", "1000", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("PASS\n"));
}

#[test]
fn verify_single_point() {
    let o = teleprobe(&["verify", "--n-points", "1", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("verify: 1 point, seed 5"));
}

#[test]
fn verify_negative_control_fails_with_parameters() {
    let o = teleprobe(&["verify", "--n-points", "10", "--corrupt-convention"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL"));
    assert!(
        text.contains("at alpha=") && text.contains(" m=") && text.contains("n_th="),
        "{text}"
    );
}

#[test]
fn optimize_writes_exact_header_and_worked_example() {
    let o = teleprobe(&[
        "optimize",
        "--r",
        "1.5",
        "--n-total",
        "100",
        "--eta1",
        "0.9",
        "--eta2",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), HEADER);
    assert_eq!(
        HEADER,
        "r,n_total,eta1,eta2,n_th,unit_gains,m_opt,alpha,g_x,g_p,sigma,sigma_coh,enhancement,enhancement_db,feasible"
    );
    let rows = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].feasible);
    assert!((rows[0].enhancement_db - 6.0).abs() <= 1.0, "{:?}", rows[0]);
}

#[test]
fn single_point_sweep_matches_optimize() {
    let args = [
        "--r",
        "1.2",
        "--n-total",
        "40",
        "--eta1",
        "0.95",
        "--eta2",
        "0.9",
        "--n-th",
        "0.01",
    ];
    let opt = teleprobe(&[&["optimize"][..], &args].concat());
    let swp = teleprobe(&[&["sweep"][..], &args, &["--unit-gains", "false"]].concat());
    assert_eq!(stdout(&opt), stdout(&swp));
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let grid = ["sweep", "--r", "0.5,1,1.5", "--n-total", "10,100", "--eta2", "1,0.9"];
    let one = teleprobe(&[&grid[..], &["--workers", "1"]].concat());
    let three = teleprobe(&[&grid[..], &["--workers", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, three.stdout);
    let rows = parse_csv(&stdout(&one)).unwrap();
    assert_eq!(rows.len(), 3 * 2 * 2 * 2);
    assert_eq!(
        (rows[0].r, rows[0].n_total, rows[0].eta2, rows[0].unit_gains),
        (0.5, 10.0, 1.0, true)
    );
    assert!(!rows[1].unit_gains);
}

#[test]
fn csv_rows_reproduce_sigma() {
    let o = teleprobe(&[
        "sweep",
        "--r",
        "0.5,1.5,2.5",
        "--n-total",
        "5,200",
        "--eta1",
        "1,0.8",
        "--n-th",
        "0.03",
        "--eta2",
        "0.9",
    ]);
    let rows = parse_csv(&stdout(&o)).unwrap();
    assert_eq!(rows.len(), 24);
    for row in rows.iter().filter(|r| r.feasible) {
        let eval = evaluate(row.m_opt.unwrap(), Gains::new(row.g_x, row.g_p), &row.constraint()).unwrap();
        assert!((eval.sigma / row.sigma - 1.0).abs() < 1e-9, "{row:?}: {}", eval.sigma);
    }
    assert!(rows.iter().all(|r| r.feasible));
}

#[test]
fn high_budget_sweep_approaches_squeezing_limit() {
    let o = teleprobe(&["sweep", "--r", "1,1.5,2", "--n-total", "1e6", "--unit-gains", "true"]);
    for row in parse_csv(&stdout(&o)).unwrap() {
        let target = row.r.exp() / 2f64.sqrt();
        assert!((row.enhancement / target - 1.0).abs() < 0.10, "{row:?}");
    }
}

#[test]
fn sweep_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig.csv");
    let o = teleprobe(&["sweep", "--r", "1,2", "-o", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("wrote 4 rows"));
    let rows = parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
}

#[test]
fn montecarlo_default_point_passes() {
    let o = teleprobe(&["montecarlo"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("trajectories: 1000000, seed 42"));
    assert!(text.ends_with("PASS\n"));
}

#[test]
fn montecarlo_is_byte_identical_for_a_seed() {
    let args = [
        "montecarlo",
        "--n-traj",
        "20000",
        "--seed",
        "11",
        "--g-x",
        "0.7",
        "--g-p",
        "1.3",
        "--eta1",
        "0.9",
    ];
    let a = teleprobe(&args);
    let b = teleprobe(&[&args[..], &["--workers", "2"]].concat());
    assert_eq!(a.stdout, b.stdout);
    let c = teleprobe(&[
        "montecarlo",
        "--n-traj",
        "20000",
        "--seed",
        "12",
        "--g-x",
        "0.7",
        "--g-p",
        "1.3",
        "--eta1",
        "0.9",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn montecarlo_small_run_with_wide_tolerance() {
    let o = teleprobe(&["montecarlo", "--n-traj", "100", "--z-max", "100"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("mean_x")).unwrap();
    let stderr_mean: f64 = line.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(stderr_mean > 0.03, "{line}");
}

#[test]
fn montecarlo_reports_statistical_failure() {
    let o = teleprobe(&["montecarlo", "--n-traj", "1000", "--z-max", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).ends_with("FAIL\n"));
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_teleprobe"));
        cmd.args([&["montecarlo", "--n-traj", "50", "--z-max", "100"][..], extra].concat());
        match env {
            Some(v) => cmd.env("TELEPROBE_SEED", v),
            None => cmd.env_remove("TELEPROBE_SEED"),
        };
        cmd.output().unwrap()
    };
    assert!(stdout(&run(Some("77"), &[])).contains("seed 77"));
    assert!(stdout(&run(Some("77"), &["--seed", "3"])).contains("seed 3"));
    assert!(stdout(&run(None, &[])).contains("seed 42"));
    let bad = run(Some("lots"), &[]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("TELEPROBE_SEED"));
}
