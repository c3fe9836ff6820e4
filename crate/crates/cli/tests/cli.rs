use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const HEADER: &str = "theta,epsilon,method,E_numeric,E_asymptotic,residual";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crackband")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn band_to(dir: &TempDir, name: &str, args: &[&str]) -> (PathBuf, Output) {
    let path = dir.path().join(name);
    let mut all = vec!["band", "--out", path.to_str().unwrap()];
    all.extend_from_slice(args);
    let out = run(&all);
    (path, out)
}

struct Row {
    theta: f64,
    epsilon: f64,
    method: String,
    e_numeric: f64,
    e_asymptotic: f64,
}

fn parse_band(text: &str) -> Vec<Row> {
    let mut lines = text.split('\n');
    assert_eq!(lines.next(), Some(HEADER));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 6, "{l}");
            Row {
                theta: f[0].parse().unwrap(),
                epsilon: f[1].parse().unwrap(),
                method: f[2].to_string(),
                e_numeric: f[3].parse().unwrap(),
                e_asymptotic: f[4].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn modes_flags_the_unit_square_degeneracy() {
    let out = run(&["modes", "--config", fixture("unit_square.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!((rows[0][1], rows[0][2], rows[0][6]), ("0", "0", "true"));
    let mut flagged: Vec<(&str, &str)> = rows[1..].iter().map(|r| (r[1], r[2])).collect();
    flagged.sort();
    assert_eq!(flagged, [("0", "1"), ("1", "0")]);
    for r in &rows[1..] {
        assert_eq!(r[6], "false");
        assert!((r[3].parse::<f64>().unwrap() - PI * PI).abs() < 1e-12);
    }
}

#[test]
fn modes_are_listed_in_ascending_order() {
    let out = run(&["modes", "--height", "4", "--count", "5"]);
    assert_eq!(code(&out), 0);
    let energies: Vec<f64> =
        stdout(&out).lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(energies.len(), 5);
    assert!(energies.windows(2).all(|w| w[0] <= w[1]));
    // (m pi)^2 + (n pi / 4)^2 below the first longitudinal mode
    let expected: Vec<f64> = (0..5).map(|n| (n as f64 * PI / 4.0).powi(2)).collect();
    for (e, x) in energies.iter().zip(&expected) {
        assert!((e - x).abs() < 1e-12 * x.max(1.0), "{energies:?}");
    }
}

#[test]
fn invalid_configs_exit_with_status_two() {
    let dir = TempDir::new().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n  \"height\": 1.4,\n  \"m\": oops\n}\n").unwrap();
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, "{\"heigth\": 1.4}").unwrap();

    let out = run(&["modes", "--count", "0"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("count"));

    let out = run(&["modes", "--config", broken.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = run(&["band", "--config", unknown.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("heigth"));

    let out = run(&["band", "--epsilons", "1e-2,0.9"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("epsilons[1]"), "{}", stderr(&out));

    let out = run(&["band", "--height", "4", "--theta-points", "2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("degenerate"), "{}", stderr(&out));

    let out = run(&["band", "--method", "all", "--epsilons", "0.05"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`h`"));

    let out = run(&["prop2", "--order", "4"]);
    assert_eq!(code(&out), 2);

    let out = run(&["band", "--jobs", "0"]);
    assert_eq!(code(&out), 2);

    let out = run(&["band", "--no-such-flag"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn band_table_has_one_row_per_point_in_grid_order() {
    let dir = TempDir::new().unwrap();
    let (path, out) = band_to(&dir, "band.csv", &["--config", fixture("working_cell.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let rows = parse_band(&text);
    assert_eq!(rows.len(), 99);

    let eps = [1e-2, 1e-4, 1e-6];
    for (i, r) in rows.iter().enumerate() {
        let (ti, ei) = (i / 3, i % 3);
        assert_eq!(r.method, "root");
        assert_eq!(r.epsilon, eps[ei]);
        assert!((r.theta - 2.0 * PI * ti as f64 / 32.0).abs() < 1e-15);
        assert!(r.e_numeric.is_finite());
    }
    assert_eq!(rows[0].theta, 0.0);
    assert!((rows[98].theta - 2.0 * PI).abs() < 1e-15);

    // E + 2 pi |u(0)|^2 (2 - 2 (-1)^m cos theta) / |log eps| with |u(0)|^2 = 2 / H
    let energy = PI * PI;
    for r in &rows {
        let expected = energy + 2.0 * PI * (2.0 / 1.4) * (2.0 + 2.0 * r.theta.cos()) / r.epsilon.ln().abs();
        assert!((r.e_asymptotic - expected).abs() < 1e-12 * expected, "{} vs {expected}", r.e_asymptotic);
    }
}

#[test]
fn band_output_is_bit_identical_across_runs_and_pool_sizes() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("oracle_check.json");
    let cfg = cfg.to_str().unwrap();
    let (a, out_a) = band_to(&dir, "a.csv", &["--config", cfg, "--jobs", "1"]);
    let (b, out_b) = band_to(&dir, "b.csv", &["--config", cfg, "--jobs", "3"]);
    let (c, out_c) = band_to(&dir, "c.csv", &["--config", cfg]);
    for out in [&out_a, &out_b, &out_c] {
        assert_eq!(code(out), 0, "{}", stderr(out));
    }
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    assert_eq!(a, std::fs::read(c).unwrap());

    let rows = parse_band(std::str::from_utf8(&a).unwrap());
    let methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, ["root", "reduced", "fd_oracle"].repeat(3));
    for r in &rows {
        assert!(r.e_numeric.is_finite());
        let reference = rows.iter().find(|s| s.theta == r.theta && s.method == "root").unwrap();
        assert!((r.e_numeric - reference.e_numeric).abs() < 5e-3 * reference.e_numeric);
    }
}

#[test]
fn flags_override_the_config_file() {
    let out = run(&[
        "band",
        "--config",
        fixture("working_cell.json").to_str().unwrap(),
        "--theta-points",
        "2",
        "--epsilons",
        "1e-3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = parse_band(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.epsilon == 1e-3));
}

#[test]
fn failed_points_print_nan_and_strict_mode_exits_three() {
    let dir = TempDir::new().unwrap();
    // the window holds a single grid node at this spacing
    let args = ["--epsilons", "0.01", "--theta-points", "2", "--method", "all", "--h", "0.02"];
    let (lenient, out) = band_to(&dir, "lenient.csv", &args);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    let text = std::fs::read_to_string(&lenient).unwrap();
    let nan_lines: Vec<&str> = text.lines().filter(|l| l.contains("nan")).collect();
    assert_eq!(nan_lines.len(), 2);
    assert!(nan_lines.iter().all(|l| l.contains(",fd_oracle,nan,") && l.ends_with(",nan")));

    let mut strict_args = vec!["--strict"];
    strict_args.extend_from_slice(&args);
    let (strict, out) = band_to(&dir, "strict.csv", &strict_args);
    assert_eq!(code(&out), 3);
    assert_eq!(std::fs::read_to_string(strict).unwrap(), text);
}

#[test]
fn fit_reports_the_leading_coefficient() {
    let dir = TempDir::new().unwrap();
    let cfg = fixture("fit_run.json");
    let cfg = cfg.to_str().unwrap();
    let (band, out) = band_to(&dir, "band.csv", &["--config", cfg]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report_path = dir.path().join("fit.json");
    let out = run(&["fit", "--config", cfg, "--input", band.to_str().unwrap(), "--out", report_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let text = std::fs::read_to_string(&report_path).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    let back: Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);
    let order: Vec<usize> = ["\"method\"", "\"theta\"", "\"samples\"", "\"c1_fitted\"", "\"c1_theory\""]
        .iter()
        .map(|k| text.find(k).unwrap())
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{order:?}");
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);

    let at_pi = &rows[1];
    assert!((at_pi["theta"].as_f64().unwrap() - PI).abs() < 1e-15);
    assert_eq!(at_pi["c1_theory"].as_f64().unwrap(), 0.0);
    assert!(at_pi["c1_fitted"].as_f64().unwrap().abs() < 1e-6);
    assert!(at_pi["relative_error"].is_null());
    assert!(at_pi["measured_constant"].is_null());

    let at_zero = &rows[0];
    assert_eq!(at_zero["samples"].as_u64().unwrap(), 7);
    let expected_theory = 2.0 * PI * (2.0 / 1.4) * 4.0;
    assert!((at_zero["c1_theory"].as_f64().unwrap() - expected_theory).abs() < 1e-12 * expected_theory);
    assert!(at_zero["relative_error_consistent"].as_f64().unwrap() <= 0.15, "{at_zero}");
}

#[test]
fn malformed_band_input_exits_with_status_four() {
    let dir = TempDir::new().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let missing = write("missing.csv", "theta,epsilon,method,E_numeric,residual\n0,0.01,root,10,0\n");
    let out = run(&["fit", "--input", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("E_asymptotic"), "{}", stderr(&out));

    let garbage = write("garbage.csv", &format!("{HEADER}\n0,0.01,root,ten,10,0\n"));
    let out = run(&["fit", "--input", garbage.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("line 2") && stderr(&out).contains("E_numeric"), "{}", stderr(&out));

    let method = write("method.csv", &format!("{HEADER}\n0,0.01,guess,10,10,0\n"));
    assert_eq!(code(&run(&["fit", "--input", method.to_str().unwrap()])), 4);

    let short: String = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|e| format!("0,{e},root,10,10,0\n"))
        .fold(format!("{HEADER}\n"), |acc, l| acc + &l);
    let short = write("short.csv", &short);
    let out = run(&["fit", "--input", short.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("insufficient"), "{}", stderr(&out));

    let absent = dir.path().join("absent.csv");
    assert_eq!(code(&run(&["fit", "--input", absent.to_str().unwrap()])), 4);
}

#[test]
fn prop2_deviation_shrinks_over_the_decades() {
    let out = run(&["prop2", "--config", fixture("prop2_decades.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let back: Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(back, report);

    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 11);
    let target = rows[0]["trace_at_zero_sq"].as_f64().unwrap();
    // |1 - e^{i theta} (-1)^m|^2 * 2 / H
    let expected = (2.0 + 2.0 * 0.6f64.cos()) * 2.0 / 1.4;
    assert!((target - expected).abs() < 1e-12);
    let dev: Vec<f64> = rows.iter().map(|r| r["deviation"].as_f64().unwrap()).collect();
    for w in dev.windows(2) {
        assert!(w[1] < 1.2 * w[0], "{dev:?}");
    }
    assert!(dev[10] < 0.5 * dev[0]);
}

#[test]
fn prop2_vanishes_when_the_trace_does() {
    let out = run(&["prop2", "--theta", &PI.to_string(), "--epsilons", "1e-2,1e-6,1e-10"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for r in report["rows"].as_array().unwrap() {
        for key in ["inner_times_log_eps", "trace_at_zero_sq", "deviation"] {
            assert_eq!(r[key].as_f64().unwrap(), 0.0, "{r}");
        }
    }
}
