//! CLI-level integration: the command line front end must agree with the
//! library bit-for-bit, honor the documented output schemas and exit codes,
//! and stay deterministic across thread counts.

use pspower::cli;
use pspower::design::{power_at, sample_size, DesignInputs, Sidedness};
use pspower::propensity::OverlapSpec;
use pspower::simharness::Dataset;
use pspower::variance::TiltingFunction;
use std::path::Path;
use std::process::Command;

fn run_cli(args: &[&str]) -> i32 {
    let mut argv = vec!["pspower".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    cli::run(argv)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pspower"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn size_json_matches_library_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("size.json");
    let code = run_cli(&[
        "size", "--r", "0.5", "--phi", "0.81", "--tau", "1", "--s2", "19.81", "--rho2", "0.19",
        "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();

    let d = DesignInputs {
        alpha: 0.05,
        beta: 0.8,
        tau_std: 1.0 / 19.81f64.sqrt(),
        sidedness: Sidedness::Two,
        estimand: TiltingFunction::Ate,
        overlap: OverlapSpec::new(0.5, 0.81).unwrap(),
        rho2: 0.19,
        r2_bound: None,
        v0_override: None,
    };
    let res = sample_size(&d).unwrap();
    assert_eq!(v["n"].as_u64().unwrap(), res.n);
    assert_eq!(v["power"].as_f64().unwrap(), res.power);
    assert_eq!(v["variance"]["v_total"].as_f64().unwrap(), res.variance.v_total);
    assert_eq!(v["trace"]["mu_e"].as_f64().unwrap(), res.trace.mu_e);
}

#[test]
fn size_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("size.csv");
    let code = run_cli(&[
        "size", "--r", "0.5", "--phi", "0.81", "--effect", "0.2247", "--rho2", "0.19",
        "--format", "csv", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,power,v_total,v_sh,v_adj");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row.len(), 5);
    // Decomposition holds in the emitted numbers.
    assert!((row[2] - (row[3] + 0.19 * row[4])).abs() < 1e-9);
}

#[test]
fn power_command_matches_power_at() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("power.json");
    let code = run_cli(&[
        "power", "--r", "0.5", "--phi", "0.81", "--effect", "0.2247", "--rho2", "0.19",
        "--n", "3000", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    let d = DesignInputs {
        alpha: 0.05,
        beta: 0.8,
        tau_std: 0.2247,
        sidedness: Sidedness::Two,
        estimand: TiltingFunction::Ate,
        overlap: OverlapSpec::new(0.5, 0.81).unwrap(),
        rho2: 0.19,
        r2_bound: None,
        v0_override: None,
    };
    assert_eq!(v["n"].as_u64().unwrap(), 3000);
    assert_eq!(v["power"].as_f64().unwrap(), power_at(&d, 3000).unwrap());
}

#[test]
fn sensitivity_csv_schema_order_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.csv");
    // phi = 0.5 is below the attainable minimum at r = 0.5 and must yield
    // an empty row, not a failure of the whole grid.
    let code = run_cli(&[
        "sensitivity", "--r", "0.5", "--effect", "0.2247", "--phi-grid", "0.5,0.81,0.93",
        "--rho2-grid", "0:0.19:0.19", "--format", "csv", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = read(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "phi,rho2,n,power,v_total,v_sh,v_adj");
    assert_eq!(lines.len(), 7); // header + 3 phi x 2 rho2
    // Rows ordered by phi descending, rho2 ascending.
    let phis: Vec<f64> =
        lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(phis, vec![0.93, 0.93, 0.81, 0.81, 0.5, 0.5]);
    // Infeasible cells keep the key columns and leave the rest empty.
    let last: Vec<&str> = lines[6].split(',').collect();
    assert_eq!(last.len(), 7);
    assert!(last[2].is_empty() && last[6].is_empty());
}

#[test]
fn sensitivity_json_reports_cell_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.json");
    let code = run_cli(&[
        "sensitivity", "--r", "0.5", "--effect", "0.2247", "--phi-grid", "0.5,0.81",
        "--rho2-grid", "0", "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["error"].is_null());
    assert!(rows[1]["error"].as_str().unwrap().contains("overlap"));
}

#[test]
fn fully_infeasible_grid_exits_three() {
    let code = run_cli(&[
        "sensitivity", "--r", "0.5", "--effect", "0.2", "--phi-grid", "0.3,0.4", "--rho2-grid",
        "0",
    ]);
    assert_eq!(code, 3);
}

#[test]
fn simulate_json_schema_and_population_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let popfile = dir.path().join("pop.csv");
    let code = run_cli(&[
        "simulate", "--kappa", "0.5", "--n-pop", "2000", "--b-reps", "40", "--n", "200",
        "--seed", "11", "--design-variance", "160", "--dump-population",
        popfile.to_str().unwrap(), "--output", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&read(&out)).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(keys, vec!["mc_se", "mode", "n", "phi", "power", "rho2"]);
    assert_eq!(v["mode"], "without-replacement");
    assert_eq!(v["n"].as_u64().unwrap(), 200);
    assert!(v["phi"].as_f64().unwrap() <= 1.0);

    let text = read(&popfile);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,z,y,y1,y0,e_true,e_hat,w_hat"
    );
    assert_eq!(text.lines().count(), 2001);
    // The dump round-trips through the reader.
    let back = Dataset::read_csv(&popfile).unwrap();
    assert_eq!(back.len(), 2000);
    assert!(back.fitted_scores.is_some());
}

#[test]
fn exit_codes_for_failure_modes() {
    // Infeasible overlap -> 3.
    assert_eq!(run_cli(&["size", "--r", "0.5", "--phi", "0.1", "--effect", "0.2"]), 3);
    // Domain error (alpha out of range) -> 2.
    assert_eq!(
        run_cli(&["size", "--r", "0.5", "--phi", "0.81", "--effect", "0.2", "--alpha", "0.9"]),
        2
    );
    // Missing effect specification -> 2.
    assert_eq!(run_cli(&["size", "--r", "0.5", "--phi", "0.81"]), 2);
    // Unknown flag -> 2 (clap parse failure).
    assert_eq!(run_cli(&["size", "--bogus", "1"]), 2);
}

#[test]
fn config_file_equals_explicit_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("study.conf");
    std::fs::write(
        &conf,
        "# design\nr = 0.381\nphi = 0.835\neffect = 0.15\nestimand = att\nrho2 = 0.05\n",
    )
    .unwrap();
    let from_conf = dir.path().join("a.json");
    let explicit = dir.path().join("b.json");
    assert_eq!(
        run_cli(&["size", "--config", conf.to_str().unwrap(), "--output",
                  from_conf.to_str().unwrap()]),
        0
    );
    assert_eq!(
        run_cli(&[
            "size", "--r", "0.381", "--phi", "0.835", "--effect", "0.15", "--estimand", "att",
            "--rho2", "0.05", "--output", explicit.to_str().unwrap(),
        ]),
        0
    );
    assert_eq!(read(&from_conf), read(&explicit));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("one.json");
    let b = dir.path().join("many.json");
    let args = |out: &Path| {
        vec![
            "simulate".to_string(), "--kappa".into(), "1".into(), "--n-pop".into(),
            "2000".into(), "--b-reps".into(), "60".into(), "--n".into(), "300".into(),
            "--seed".into(), "42".into(), "--design-variance".into(), "200".into(),
            "--output".into(), out.to_str().unwrap().to_string(),
        ]
    };
    let s1 = bin().args(args(&a)).env("PSPOWER_THREADS", "1").status().unwrap();
    let s4 = bin().args(args(&b)).env("PSPOWER_THREADS", "4").status().unwrap();
    assert!(s1.success() && s4.success());
    assert_eq!(read(&a), read(&b));
}

#[test]
fn binary_stdout_default_and_version() {
    let out = bin()
        .args(["size", "--r", "0.5", "--phi", "1.0", "--tau", "1", "--s2", "20.02"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"].as_u64().unwrap(), 629);
    assert!(bin().arg("--version").status().unwrap().success());
}
