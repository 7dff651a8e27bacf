use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnls_cli::scenario::CATALOG;
use dnls_core::solvability_gate;
use serde_json::Value;

fn dnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(args)
        .env_remove("DNLS_OUT")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn gate_prints_the_critical_amplitude() {
    let o = dnls(&["gate", "--gamma", "0.0025", "--delta", "-0.01"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "A* = 0.5\n");
    let o = dnls(&["gate", "--gamma", "0.01", "--delta", "-0.01", "--amplitude", "0.5"]);
    assert!(stdout(&o).contains("A = 0.5: not solvable"));
}

#[test]
fn usage_errors_exit_2_and_name_the_flag() {
    let o = dnls(&["gate", "--gamma", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--delta"), "{}", stderr(&o));
    let o = dnls(&["simulate", "--scenario", "fig5", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
    let o = dnls(&["simulate", "--scenario", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = scratch("config_errors");
    let missing = dir.join("missing_delta.cfg");
    fs::write(
        &missing,
        "# no delta\nhalf_length = 10\nnodes = 20\ngamma = 0.1\nic = sech\nbackground = 0.5\nsigma = 0.6\nrho = 1\nt_end = 1\nsample_every = 0.1\n",
    )
    .unwrap();
    let o = dnls(&["simulate", "--config", missing.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse error") && stderr(&o).contains("delta"), "{}", stderr(&o));

    let unknown = dir.join("unknown.cfg");
    fs::write(&unknown, "half_length = 10\ncolour = red\n").unwrap();
    let o = dnls(&["simulate", "--config", unknown.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn blow_up_exits_3() {
    let dir = scratch("blow_up");
    let cfg = dir.join("runaway.cfg");
    // gain with cubic growth: the amplitude ODE blows up in finite time
    fs::write(
        &cfg,
        "half_length = 10\nnodes = 20\ngamma = 0.5\ndelta = 0.5\nic = plane_wave\nbase = 1\nperturbation = 0\nmode = 0\nt_end = 5\nsample_every = 0.1\n",
    )
    .unwrap();
    let o = dnls(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn every_catalog_scenario_runs_in_smoke_mode() {
    let out = scratch("smoke");
    for (name, _, _) in CATALOG {
        let o = dnls(&["simulate", "--scenario", name, "--smoke", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        let dir = out.join(name);
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["smoke"], true);
        assert!(manifest["integrator"]["t_end"].as_f64().unwrap() <= 10.0);
        for f in manifest["files"].as_array().unwrap() {
            assert!(dir.join(f.as_str().unwrap()).exists(), "{name}: {f}");
        }
        // the embedded verdict matches a recomputation from the embedded parameters
        for g in manifest["gate"].as_array().unwrap() {
            let (a, gamma, delta, tol) = (
                g["background"].as_f64().unwrap(),
                g["gamma"].as_f64().unwrap(),
                g["delta"].as_f64().unwrap(),
                g["tol"].as_f64().unwrap(),
            );
            let want = solvability_gate(a, gamma, delta, tol).ok();
            assert_eq!(g["solvable"].as_bool(), want, "{name}");
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = scratch("determinism_a");
    let b = scratch("determinism_b");
    for dir in [&a, &b] {
        let o = dnls(&["simulate", "--scenario", "fig6", "--smoke", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
        let o = dnls(&["simulate", "--scenario", "fig9b", "--smoke", "--set", "method=rk4", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let mut compared = 0;
    for scenario in ["fig6", "fig9b"] {
        for entry in fs::read_dir(a.join(scenario)).unwrap() {
            let name = entry.unwrap().file_name();
            if name.to_string_lossy().ends_with(".csv") {
                let x = fs::read(a.join(scenario).join(&name)).unwrap();
                let y = fs::read(b.join(scenario).join(&name)).unwrap();
                assert!(x == y, "{scenario}/{name:?} differs");
                compared += 1;
            }
        }
    }
    assert!(compared >= 4);
}

#[test]
fn fig5_keeps_a_single_mode_and_orbits_converge() {
    let out = scratch("fig5");
    let o = dnls(&["simulate", "--scenario", "fig5", "--ap", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = out.join("fig5");
    let (header, rows) = read_csv(&dir.join("spectrum_ap_2_dnls.csv"));
    assert_eq!(header, ["t", "K", "abs_coeff"]);
    let last: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] == 10.0).collect();
    assert_eq!(last.len(), 100);
    let top = last.iter().map(|r| r[2]).fold(0.0, f64::max);
    let active: Vec<f64> = last.iter().filter(|r| r[2] > 1e-6 * top).map(|r| r[1]).collect();
    assert_eq!(active, [45.0]);

    // both perturbations reach the unit circle, one from outside and one from inside
    let o = dnls(&["simulate", "--scenario", "fig5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    for (label, outside) in [("ap_2", true), ("ap_-0.999", false)] {
        let (_, rows) = read_csv(&dir.join(format!("phase_plane_{label}_dnls.csv")));
        let radius = |r: &Vec<f64>| r[1].hypot(r[2]);
        assert!((radius(rows.last().unwrap()) - 1.0).abs() < 1e-3);
        assert!(rows.iter().all(|r| (radius(r) >= 1.0 - 1e-9) == outside || (radius(r) - 1.0).abs() < 1e-6));
    }
}

#[test]
fn fig9a_outer_sectors_and_wedge_lines() {
    let out = scratch("fig9a");
    let o = dnls(&["simulate", "--scenario", "fig9a", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let dir = out.join("fig9a");
    let (_, rows) = read_csv(&dir.join("densities_algebraic_dnls.csv"));
    let slope = 4.0 * 2f64.sqrt() * 0.5;
    let outer = rows
        .iter()
        .filter(|r| r[0] >= 5.0 && r[1].abs() > 1.2 * slope * r[0])
        .map(|r| (r[2].sqrt() - 0.5).abs())
        .fold(0.0, f64::max);
    assert!(outer < 1e-2, "{outer}");
    let (header, wedge) = read_csv(&dir.join("wedge_algebraic.csv"));
    assert_eq!(header, ["t", "x_left", "x_right"]);
    for r in &wedge {
        assert!((r[2] - slope * r[0]).abs() < 1e-12 && r[1] == -r[2]);
    }
}

#[test]
fn fig9b_central_series_tracks_the_reference() {
    let out = scratch("fig9b");
    let o = dnls(&["simulate", "--scenario", "fig9b", "--smoke", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out.join("fig9b/central_series_sech_dnls.csv"));
    assert_eq!(header, ["t", "density", "dps_density"]);
    let argmax = |col: usize| rows.iter().max_by(|a, b| a[col].total_cmp(&b[col])).unwrap()[0];
    assert!((argmax(2) - 3.30).abs() < 1e-9);
    assert!((argmax(1) - 3.30).abs() < 0.5);
}

#[test]
fn dnls_out_sets_the_output_root() {
    let root = scratch("env_root");
    let o = Command::new(env!("CARGO_BIN_EXE_dnls"))
        .args(["simulate", "--scenario", "fig10a", "--smoke", "--set", "t_end=1"])
        .env("DNLS_OUT", &root)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root.join("fig10a/manifest.json").exists());
}

#[test]
fn mi_scan_reports_the_band() {
    let out = scratch("mi");
    let o = dnls(&["mi-scan", "--gamma", "1.5", "--delta", "-1.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("unstable carriers: 0..=24"), "{}", stdout(&o));
    let (header, rows) = read_csv(&out.join("mi_scan/mi_scan.csv"));
    assert_eq!(header, ["K", "M", "growth"]);
    assert_eq!(rows.len(), 51 * 51);
}

#[test]
fn compare_al_and_attractor_check() {
    let out = scratch("compare");
    let o = dnls(&["compare-al", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("estimate II: 0 violation(s)"));
    let (header, rows) = read_csv(&out.join("fig12/proximity_sech.csv"));
    assert_eq!(header, ["t", "D_a", "D_a_r", "bound_I", "bound_II"]);
    assert!(rows.iter().all(|r| r[1] < 1.0 && r[3].is_nan()));

    let o = dnls(&["attractor-check", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("converged = true, final mode = 45").count(), 2);
}

#[test]
fn list_scenarios_names_the_catalog() {
    let o = dnls(&["list-scenarios"]);
    let text = stdout(&o);
    for (name, _, _) in CATALOG {
        assert!(text.lines().any(|l| l.starts_with(name)));
    }
}
