use std::path::Path;
use std::process::{Command, Output};

const FIXED: &str =
    r#"{"version":1,"product":{"l":2,"m":2,"n1":2,"n2":2,"omega":{"kind":"ginibre","nu":0}},"x":{"kind":"fixed","a":[-1.0,2.0]}}"#;
const GUE: &str = r#"{"version":1,"product":{"l":2,"m":2,"n1":2,"n2":2,"omega":{"kind":"ginibre","nu":0}},"x":{"kind":"gue"}}"#;

fn hrmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrmt")).args(args).output().expect("binary runs")
}

fn hrmt_env(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrmt"))
        .args(args)
        .env("RMT_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn write_spec(dir: &Path, text: &str) -> String {
    let p = dir.join("spec.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn spherical_phi_example() {
    let o = hrmt(&["spherical", "--phi", "--s", "2,0", "--L", "0,0", "--a", "1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "1.5");
}

#[test]
fn spherical_usage_errors() {
    assert_eq!(hrmt(&["spherical", "--s", "1"]).status.code(), Some(2));
    assert_eq!(
        hrmt(&["spherical", "--phi", "--psi", "--s", "1", "--a", "1"]).status.code(),
        Some(2)
    );
    let o = hrmt(&["spherical", "--phi", "--s", "2,0", "--a", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eigenvalues"));
    assert_eq!(hrmt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn jpdf_grid_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), FIXED);
    let out = dir.path().join("out.csv");
    let o = hrmt(&[
        "jpdf",
        "--spec",
        &spec,
        "--grid",
        "-5:5:200",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# hrmt "));
    assert!(text.contains("# seed: 42"));
    assert!(text.contains(r#"# spec: {"version":1"#));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[0][0], -5.0);
    assert_eq!(rows[199][0], 5.0);
    assert!(rows.iter().all(|r| r.len() == 2 && r[1] >= 0.0 && r[1].is_finite()));
    // Riemann sum of the one-point density on [−5, 5] stays below its total mass 1.
    let h = 10.0 / 199.0;
    let mass: f64 = rows.iter().map(|r| r[1]).sum::<f64>() * h;
    assert!(mass > 0.5 && mass < 1.0 + 1e-2, "{mass}");
}

#[test]
fn jpdf_at_point_and_random_source() {
    let o = hrmt(&["jpdf", "--spec", FIXED, "--at", "-0.5,1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][2] > 0.0);
    // Both eigenvalues positive contradicts the conserved signature of x.
    let rows = data_rows(&stdout(&hrmt(&["jpdf", "--spec", FIXED, "--at", "0.5,1"])));
    assert_eq!(rows[0][2], 0.0);
    assert_eq!(hrmt(&["jpdf", "--spec", FIXED, "--at", "1"]).status.code(), Some(2));

    let o = hrmt(&["jpdf", "--spec", GUE, "--grid", "-3:3:7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r[0] == 0.0 || r[1] > 0.0));
    // GUE is invariant under x → −x.
    for k in 0..3 {
        assert!((rows[k][1] - rows[6 - k][1]).abs() < 1e-10 * rows[k][1]);
    }
}

#[test]
fn kernel_grid_is_square() {
    let o = hrmt(&["kernel", "--spec", FIXED, "--grid", "-2:2:5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 25);
    let o = hrmt(&["kernel", "--spec", FIXED, "--grid", "-2:2:5", "--grid2", "0.5:1:2"]);
    assert_eq!(data_rows(&stdout(&o)).len(), 10);
}

#[test]
fn malformed_specs_name_the_field() {
    let bad_field = FIXED.replace(r#""nu":0"#, r#""nu":0,"theta":1"#);
    let o = hrmt(&["jpdf", "--spec", &bad_field, "--grid", "0:1:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("product.omega") && stderr(&o).contains("theta"),
        "{}",
        stderr(&o)
    );

    let bad_top = FIXED.replace(r#""version":1,"#, r#""version":1,"sampels":10,"#);
    let o = hrmt(&["jpdf", "--spec", &bad_top, "--grid", "0:1:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sampels"));

    let bad_version = FIXED.replace(r#""version":1"#, r#""version":7"#);
    let o = hrmt(&["jpdf", "--spec", &bad_version, "--grid", "0:1:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("version"));

    let bad_shape = FIXED.replace(r#""n1":2"#, r#""n1":3"#);
    assert_eq!(hrmt(&["jpdf", "--spec", &bad_shape, "--grid", "0:1:3"]).status.code(), Some(2));

    assert_eq!(
        hrmt(&["jpdf", "--spec", "/nonexistent/spec.json", "--grid", "0:1:3"]).status.code(),
        Some(2)
    );
    assert_eq!(hrmt(&["jpdf", "--spec", FIXED, "--grid", "1:0:3"]).status.code(), Some(2));
}

#[test]
fn sample_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), GUE);
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = hrmt_env(
            &[
                "sample",
                "--spec",
                &spec,
                "--count",
                "3000",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("# seed: 9"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 3000);
    assert!(rows.iter().all(|r| r.len() == 2 && r[0] <= r[1]));
    assert_eq!(
        hrmt_env(&["sample", "--spec", &spec, "--count", "3"], "zero").status.code(),
        Some(2)
    );
}

#[test]
fn transform_matches_quadrature() {
    let o = hrmt(&[
        "transform",
        "--weight",
        r#"{"kind":"jacobi","nu":0.5,"mu":1,"n":2}"#,
        "--s",
        "1,2.5,1+1i",
        "--check",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!((r[2] - r[4]).abs() < 1e-8 * r[2].abs().max(1.0), "{r:?}");
        assert!((r[3] - r[5]).abs() < 1e-8, "{r:?}");
    }
    let o = hrmt(&[
        "transform",
        "--weight",
        r#"{"kind":"projection","p":1,"q":0}"#,
        "--s",
        "1",
        "--check",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_emits_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = hrmt(&[
        "verify",
        "--criteria",
        "7,8",
        "--seed",
        "42",
        "--samples",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert!(!text.contains("\"seconds\""));
    assert_eq!(hrmt(&["verify", "--suite", "nope"]).status.code(), Some(2));
}
