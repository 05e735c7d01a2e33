//! End-to-end checks of the `plmscad` binary: report contents, exit codes and
//! output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use plmscad::simulation::{run_scenario, EstimatorKind, GScenario, ScenarioSpec};
use plmscad::{Execution, FitConfig};

fn plmscad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plmscad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<f64>]) -> PathBuf {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(text, "{}", cells.join(",")).unwrap();
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// `y = 1.5 x1 − 2 x2 + 0 x3 + sin(2πt) + noise`.
fn plm_rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t: f64 = rng.random();
            let x: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal) + t).collect();
            let e: f64 = rng.sample(StandardNormal);
            let y = 1.5 * x[0] - 2.0 * x[1] + (2.0 * std::f64::consts::PI * t).sin() + 0.3 * e;
            vec![y, x[0], x[1], x[2], t]
        })
        .collect()
}

const PLM_HEADER: [&str; 5] = ["y", "x1", "x2", "x3", "t"];

fn as_f64s(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Cox–de Boor recursion written from the definition; the right end of the
/// domain belongs to the last non-degenerate interval.
fn cox_de_boor(knots: &[f64], order: usize, i: usize, t: f64) -> f64 {
    if order == 1 {
        let (lo, hi) = (knots[i], knots[i + 1]);
        let upper = *knots.last().unwrap();
        let inside = lo <= t && t < hi;
        let closing = t == upper && lo < hi && hi == upper;
        return if inside || closing { 1.0 } else { 0.0 };
    }
    let mut value = 0.0;
    let left = knots[i + order - 1] - knots[i];
    if left > 0.0 {
        value += (t - knots[i]) / left * cox_de_boor(knots, order - 1, i, t);
    }
    let right = knots[i + order] - knots[i + 1];
    if right > 0.0 {
        value += (knots[i + order] - t) / right * cox_de_boor(knots, order - 1, i + 1, t);
    }
    value
}

fn spline_value(spline: &Value, t: f64) -> f64 {
    let knots = as_f64s(&spline["knots"]);
    let alpha = as_f64s(&spline["alpha_hat"]);
    let order = spline["order"].as_u64().unwrap() as usize;
    alpha
        .iter()
        .enumerate()
        .map(|(i, a)| a * cox_de_boor(&knots, order, i, t))
        .sum()
}

#[test]
fn fit_report_reconstructs_the_response() {
    let dir = tempfile::tempdir().unwrap();
    let rows = plm_rows(150, 1);
    let input = write_csv(dir.path(), "data.csv", &PLM_HEADER, &rows);
    let output = dir.path().join("fit.json");
    let out = plmscad(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--nonparam",
        "t",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&std::fs::read(&output).unwrap()).unwrap();

    assert_eq!(report["schema_version"], "1.0");
    assert_eq!(report["n"], 150);
    let names: Vec<&str> = report["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["x1", "x2", "x3"]);
    let beta: Vec<f64> = report["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["estimate"].as_f64().unwrap())
        .collect();
    assert!((beta[0] - 1.5).abs() < 0.15 && (beta[1] + 2.0).abs() < 0.15, "{beta:?}");
    assert_eq!(report["g_grid"].as_array().unwrap().len(), 200);
    assert!(!report["gcv_table"].as_array().unwrap().is_empty());

    let g_at_data = as_f64s(&report["g_at_data"]);
    let residuals = as_f64s(&report["residuals"]);
    for (i, row) in rows.iter().enumerate() {
        let linear: f64 = (0..3).map(|j| beta[j] * row[1 + j]).sum();
        assert!((linear + g_at_data[i] + residuals[i] - row[0]).abs() < 1e-8, "row {i}");
        let independent = spline_value(&report["spline"], row[4]);
        assert!((independent - g_at_data[i]).abs() < 1e-10, "row {i}");
    }
    let grid = report["g_grid"].as_array().unwrap();
    let last = grid.last().unwrap();
    assert_eq!(last["t"].as_f64().unwrap(), report["spline"]["upper"].as_f64().unwrap());
}

#[test]
fn exact_linear_response_without_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let x = ((i * 7) % 13) as f64 - 6.0;
            vec![2.0 * x, x, i as f64 / 39.0]
        })
        .collect();
    let input = write_csv(dir.path(), "lin.csv", &["y", "x1", "t"], &rows);
    let out = plmscad(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--nonparam",
        "t",
        "--lambda-grid",
        "0",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let estimate = report["coefficients"][0]["estimate"].as_f64().unwrap();
    assert!((estimate - 2.0).abs() < 1e-6, "{estimate}");
}

#[test]
fn missing_response_column_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "data.csv", &PLM_HEADER, &plm_rows(30, 2));
    let output = dir.path().join("never.json");
    let out = plmscad(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "wage",
        "--nonparam",
        "t",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("'wage'"), "{}", stderr(&out));
    assert!(!output.exists());
}

#[test]
fn unparsable_cell_names_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "y,x1,t\n1,2,0.1\n2,3,0.2\n3,n/a,0.3\n").unwrap();
    let out = plmscad(&["fit", "--input", path.to_str().unwrap(), "--response", "y", "--nonparam", "t"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 4") && msg.contains("'x1'"), "{msg}");
}

#[test]
fn covariate_inside_the_spline_space_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|i| {
            let t = i as f64 / 49.0;
            vec![t.sin() + (i % 3) as f64, t, t]
        })
        .collect();
    let input = write_csv(dir.path(), "degenerate.csv", &["y", "x1", "t"], &rows);
    let out = plmscad(&["fit", "--input", input.to_str().unwrap(), "--response", "y", "--nonparam", "t"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("x1"), "{}", stderr(&out));
}

#[test]
fn wage_style_report_drops_some_covariates() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut header = vec!["lwage".to_string(), "exper".to_string(), "educ".to_string()];
    header.extend((1..=13).map(|k| format!("d{k}")));
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let exper: f64 = rng.random_range(0.0..40.0);
            let educ = rng.random_range(8..19) as f64;
            let dummies: Vec<f64> = (0..13).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
            let noise: f64 = rng.sample(StandardNormal);
            let lwage = 0.5 + 0.08 * educ + 0.25 * dummies[0] - 0.2 * dummies[1] + 0.15 * dummies[2]
                + 0.04 * exper
                - 0.0008 * exper * exper
                + 0.3 * noise;
            let mut row = vec![lwage, exper, educ];
            row.extend(dummies);
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let input = write_csv(dir.path(), "wage.csv", &header_refs, &rows);
    let out = plmscad(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "lwage",
        "--nonparam",
        "exper",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,estimate,std_error,selected,display"));
    let body: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(body.len(), 14);
    let dropped = body.iter().filter(|r| r[4] == "0 (-)").count();
    assert!((1..14).contains(&dropped), "{dropped} dropped");
    for row in body.iter().filter(|r| r[4] != "0 (-)") {
        let (est, se) = row[4].split_once(" (").expect("estimate (se) layout");
        let se = se.strip_suffix(')').unwrap();
        assert_eq!(est.split_once('.').unwrap().1.len(), 3, "{}", row[4]);
        assert!(se.parse::<f64>().unwrap() > 0.0, "{}", row[4]);
        assert_eq!(row[3], "true");
    }
    let educ = body.iter().find(|r| r[0] == "educ").unwrap();
    assert!((educ[1].parse::<f64>().unwrap() - 0.08).abs() < 0.02);
}

#[test]
fn predict_g_matches_the_fitted_spline() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "data.csv", &PLM_HEADER, &plm_rows(120, 3));
    let input = input.to_str().unwrap();
    let base = ["--input", input, "--response", "y", "--nonparam", "t"];

    let fit = plmscad(&[&["fit"][..], &base].concat());
    assert!(fit.status.success(), "{}", stderr(&fit));
    let report: Value = serde_json::from_slice(&fit.stdout).unwrap();
    let upper = report["spline"]["upper"].as_f64().unwrap();
    let lower = report["spline"]["lower"].as_f64().unwrap();
    let mid = 0.5 * (lower + upper);
    let at = format!("{lower},{mid},{upper}");

    let pred = plmscad(&[&["predict-g"][..], &base, &["--at", &at]].concat());
    assert!(pred.status.success(), "{}", stderr(&pred));
    let text = String::from_utf8(pred.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,g_hat"));
    let values: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, g) = l.split_once(',').unwrap();
            (t.parse().unwrap(), g.parse().unwrap())
        })
        .collect();
    assert_eq!(values.len(), 3);
    for (t, g) in values {
        assert!((g - spline_value(&report["spline"], t)).abs() < 1e-10, "t = {t}");
    }

    let outside = plmscad(&[&["predict-g"][..], &base, &["--at", "5"]].concat());
    assert_eq!(outside.status.code(), Some(2));
}

#[test]
fn basis_dump_is_a_partition_of_unity() {
    let out = plmscad(&["basis-dump", "--order", "4", "--knots", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,B1,B2,B3,B4,B5,B6,B7"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 500);
    for row in &rows {
        assert!((row[1..].iter().sum::<f64>() - 1.0).abs() < 1e-12, "t = {}", row[0]);
    }
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[0][1], 1.0);
    assert_eq!(rows[499][0], 1.0);
    assert_eq!(rows[499][7], 1.0);

    let step = plmscad(&["basis-dump", "--order", "1", "--knots", "0"]);
    assert!(step.status.success());
    let text = String::from_utf8(step.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")));

    assert_eq!(plmscad(&["basis-dump", "--order", "0"]).status.code(), Some(2));
}

#[test]
fn basis_dump_uses_data_quantile_knots() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_csv(dir.path(), "data.csv", &PLM_HEADER, &plm_rows(80, 4));
    let output = dir.path().join("basis.csv");
    let out = plmscad(&[
        "basis-dump",
        "--input",
        input.to_str().unwrap(),
        "--nonparam",
        "t",
        "--knots",
        "2",
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&output).unwrap();
    assert_eq!(text.lines().next(), Some("t,B1,B2,B3,B4,B5,B6"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn single_replicate_simulation_reports_that_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let out = plmscad(&[
        "simulate",
        "--scenario",
        "2",
        "--rho",
        "0.5",
        "--replicates",
        "1",
        "--seed",
        "77",
        "--estimators",
        "plm_scad,ls_scad",
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metadata"]["seed"], 77);
    assert_eq!(summary["metadata"]["config_hash"].as_str().unwrap().len(), 64);

    let spec = ScenarioSpec {
        replicates: 1,
        estimators: vec![EstimatorKind::PlmScad, EstimatorKind::LsScad],
        ..ScenarioSpec::example(0.5, GScenario::Cos2PiT, 77)
    };
    let direct = run_scenario(&spec, &FitConfig::default(), Execution::Sequential).unwrap();
    let cell = &summary["cells"][0];
    for (k, kind) in [EstimatorKind::PlmScad, EstimatorKind::LsScad].into_iter().enumerate() {
        let expected = direct[0].get(kind).unwrap();
        let reported = &cell["estimators"][k];
        assert_eq!(as_f64s(&reported["mean_beta"]), expected.beta_hat[..4]);
        assert_eq!(reported["median_model_error"].as_f64().unwrap(), expected.model_error);
        let zeros = expected.beta_hat[4..].iter().filter(|b| **b == 0.0).count() as f64;
        assert_eq!(reported["mean_correct_zeros"].as_f64().unwrap(), zeros);
        assert_eq!(reported["median_correct_zeros"].as_f64().unwrap(), zeros);
    }

    let table1 = std::fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert_eq!(table1.lines().count(), 3);
    let table2 = std::fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    assert_eq!(table2.lines().count(), 2);
}

#[test]
fn simulation_rejects_invalid_settings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["simulate", "--rho", "1", "--output", d],
        vec!["simulate", "--replicates", "0", "--output", d],
        vec!["simulate", "--scenario", "3", "--output", d],
        vec!["simulate", "--estimators", "ridge", "--output", d],
    ] {
        let out = plmscad(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_thread_setting_is_an_input_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_plmscad"))
        .args(["basis-dump"])
        .env("PLMSCAD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
