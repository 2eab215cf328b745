use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn padic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_padic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn inspect_projective_line() {
    let out = padic(&["inspect", "--builtin", "p1_q2"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["total_measure"], "3/2");
    assert_eq!(v["roots"].as_array().unwrap().len(), 3);
    assert_eq!(v["dim_nerve"], 1);
}

#[test]
fn spectrum_of_two_cells_is_zero_and_one() {
    let out = padic(&["spectrum", "--builtin", "single_ball", "--depth", "1"]);
    assert_eq!(code(&out), 0);
    let values: Vec<f64> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 2);
    assert!(values[0].abs() < 1e-12 && (values[1] - 1.0).abs() < 1e-12);
}

#[test]
fn wavelet_verification_on_single_ball() {
    let out = padic(&["wavelets", "verify", "--builtin", "single_ball", "--alpha", "1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r[col("residual")].parse::<f64>().unwrap() <= 1e-10);
        assert!(r[col("deviation")].parse::<f64>().unwrap().abs() <= 1e-12);
    }
}

#[test]
fn dirichlet_writes_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = padic(&[
        "dirichlet",
        "--builtin",
        "single_ball",
        "--alpha",
        "1",
        "--k",
        "1",
        "--omega",
        "0",
        "--f",
        "const:1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["coercivity_beta"].as_f64().unwrap() > 0.0);
    let solution = fs::read_to_string(out_dir.join("solution.csv")).unwrap();
    assert_eq!(solution.lines().next(), Some("cell,value"));
    assert_eq!(solution.lines().count(), 5);
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = dir.path().join(name);
        let out = padic(&[
            "elliptic",
            "--builtin",
            "p1_q2",
            "--omega",
            "v0/0",
            "--seed",
            "7",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        (
            fs::read(d.join("report.json")).unwrap(),
            fs::read(d.join("solution.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
    let heat = || {
        stdout(&padic(&[
            "heat",
            "--builtin",
            "triangle",
            "--kernel",
            "knn",
            "--seed",
            "3",
        ]))
    };
    assert_eq!(heat(), heat());
}

#[test]
fn usage_and_validation_errors_exit_one() {
    assert_eq!(code(&padic(&["inspect", "--bogus"])), 1);
    assert_eq!(code(&padic(&["inspect", "--builtin", "nope"])), 1);
    assert_eq!(code(&padic(&["inspect"])), 1);
    assert_eq!(
        code(&padic(&["assemble", "--builtin", "single_ball", "--alpha", "-1"])),
        1
    );
    assert_eq!(code(&padic(&["dirichlet", "--builtin", "p1_q2", "--omega", "v9/0"])), 1);
    assert_eq!(
        code(&padic(&[
            "dirichlet",
            "--builtin",
            "single_ball",
            "--omega",
            "0",
            "--f",
            "values:1"
        ])),
        1
    );
    assert_eq!(code(&padic(&["inspect", "--spec", "/nonexistent/model.toml"])), 1);
    assert_eq!(code(&padic(&["--help"])), 0);
}

#[test]
fn numerical_failure_exits_two_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    // a whole tree of the projective line has no boundary, so the form is degenerate
    let out = padic(&[
        "dirichlet",
        "--builtin",
        "p1_q2",
        "--omega",
        "v0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(!Path::new(&out_dir).exists());
}

#[test]
fn spec_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("model.toml");
    fs::write(
        &spec,
        r#"
p = 3
n = 1
depth = 2

[[faces]]
id = "v0"
vertices = ["v0"]

[[roots]]
id = "v0"
face = "v0"
density = "2"
"#,
    )
    .unwrap();
    let out = padic(&["inspect", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["total_measure"], "2");
    assert_eq!(v["cells"], 9);
    let deeper = padic(&["inspect", "--spec", spec.to_str().unwrap(), "--depth", "3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&deeper)).unwrap();
    assert_eq!(v["cells"], 27);
}
