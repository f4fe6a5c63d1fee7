use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrdmd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrdmd"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy(dir: &Path, setting: &str) -> String {
    let file = format!("toy_{setting}.csv");
    let o = lrdmd(dir, &["--seed", "3", "generate", "--setting", setting, "--out", &file]);
    assert!(o.status.success(), "{}", stderr(&o));
    file
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fit_writes_factors_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path(), "ii");
    let o = lrdmd(
        dir.path(),
        &[
            "fit", "--input", &data, "--method", "optimal", "--rank", "10", "--out", "fit",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["left.csv", "right.csv", "residual.csv", "rank.csv", "manifest.json"] {
        assert!(dir.path().join("fit").join(f).exists(), "{f}");
    }
    let left = csv_rows(&dir.path().join("fit/left.csv"));
    assert_eq!((left.len(), left[0].len()), (50, 10));
    let rank = fs::read_to_string(dir.path().join("fit/rank.csv")).unwrap();
    assert_eq!(rank.lines().nth(1).unwrap(), "50,40,40,30,true,10,10");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["params"]["method"], "optimal");
}

#[test]
fn optimal_beats_baselines_through_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path(), "iii");
    let residual = |method: &str| {
        let out = format!("fit_{method}");
        let o = lrdmd(
            dir.path(),
            &[
                "fit", "--input", &data, "--method", method, "--rank", "20", "--out", &out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        csv_rows(&dir.path().join(out).join("residual.csv"))[0][0]
    };
    let a = residual("optimal");
    assert!(a < residual("truncated"));
    assert!(a < residual("projected"));
}

#[test]
fn validation_and_numerical_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path(), "ii");

    let o = lrdmd(dir.path(), &["fit", "--input", &data, "--rank", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rank must be ≥ 1"));

    let o = lrdmd(
        dir.path(),
        &[
            "fit", "--input", &data, "--method", "optimal", "--rank", "45", "--out", "x",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stderr(&o).contains("exceeds the numerical rank 30 of Y"),
        "{}",
        stderr(&o)
    );

    let o = lrdmd(dir.path(), &["fit", "--input", "missing.csv", "--rank", "2"]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(
        dir.path().join("ragged.csv"),
        "traj_id,t,x0\n1,1,1.0\n1,2,2.0\n2,1,3.0\n",
    )
    .unwrap();
    let o = lrdmd(dir.path(), &["fit", "--input", "ragged.csv", "--rank", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ragged"), "{}", stderr(&o));

    let o = lrdmd(
        dir.path(),
        &["--strict-rank", "validate", "--input", &toy(dir.path(), "i")],
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn modes_exact_variant_passes_eigenpair_check() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path(), "ii");
    let o = lrdmd(
        dir.path(),
        &[
            "modes",
            "--input",
            &data,
            "--rank",
            "8",
            "--variant",
            "exact",
            "--theta",
            "first",
            "--horizon",
            "4",
            "--out",
            "m",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = dir.path().join("m");
    assert_eq!(csv_rows(&m.join("eigenvalues.csv")).len(), 8);
    let modes = csv_rows(&m.join("modes.csv"));
    assert_eq!((modes.len(), modes[0].len()), (50, 16));
    assert_eq!(csv_rows(&m.join("amplitudes.csv")).len(), 4);
    let report = fs::read_to_string(m.join("eigenpairs.csv")).unwrap();
    assert!(report.lines().skip(1).all(|l| l.ends_with(",true")), "{report}");
}

#[test]
fn simulate_second_state_is_operator_applied_to_theta() {
    let dir = tempfile::tempdir().unwrap();
    let data = toy(dir.path(), "ii");
    fs::write(dir.path().join("theta.csv"), {
        let header: Vec<String> = (0..50).map(|j| format!("x{j}")).collect();
        let row: Vec<String> = (0..50).map(|j| format!("{}", (j as f64 * 0.37).sin())).collect();
        format!("{}\n{}\n", header.join(","), row.join(","))
    })
    .unwrap();
    let o = lrdmd(
        dir.path(),
        &[
            "simulate",
            "--input",
            &data,
            "--rank",
            "6",
            "--horizon",
            "2",
            "--path",
            "reduced",
            "--theta",
            "theta.csv",
            "--out",
            "s",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lrdmd(dir.path(), &["fit", "--input", &data, "--rank", "6", "--out", "f"]);
    assert!(o.status.success());

    let traj = csv_rows(&dir.path().join("s/trajectory.csv"));
    let theta: Vec<f64> = (0..50).map(|j| (j as f64 * 0.37).sin()).collect();
    assert_eq!(traj[0][1..], theta[..]);
    let left = csv_rows(&dir.path().join("f/left.csv"));
    let right = csv_rows(&dir.path().join("f/right.csv"));
    let z: Vec<f64> = right
        .iter()
        .map(|r| r.iter().zip(&theta).map(|(a, b)| a * b).sum())
        .collect();
    for (i, row) in left.iter().enumerate() {
        let expect: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
        assert!((traj[1][i + 1] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }

    let o = lrdmd(
        dir.path(),
        &[
            "simulate",
            "--input",
            &data,
            "--rank",
            "6",
            "--horizon",
            "1",
            "--out",
            "one",
        ],
    );
    assert!(o.status.success());
    let traj = csv_rows(&dir.path().join("one/trajectory.csv"));
    assert_eq!(traj.len(), 1);
}

#[test]
fn reduced_and_modal_paths_agree_on_symmetric_data() {
    let dir = tempfile::tempdir().unwrap();
    // pairs (e_j, S e_j) with S symmetric, so X = I and Y = S
    let n = 5;
    let s = |i: usize, j: usize| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 0.5 } else { 0.0 };
    let mut text = String::from("traj_id,t");
    for j in 0..n {
        text += &format!(",x{j}");
    }
    text += "\n";
    for j in 0..n {
        let e: Vec<String> = (0..n).map(|i| if i == j { "1".into() } else { "0".into() }).collect();
        let y: Vec<String> = (0..n).map(|i| s(i, j).to_string()).collect();
        text += &format!("{},1,{}\n{},2,{}\n", j + 1, e.join(","), j + 1, y.join(","));
    }
    fs::write(dir.path().join("sym.csv"), text).unwrap();
    let mut paths = Vec::new();
    for path in ["reduced", "modal"] {
        let o = lrdmd(
            dir.path(),
            &[
                "simulate",
                "--input",
                "sym.csv",
                "--rank",
                "3",
                "--horizon",
                "6",
                "--path",
                path,
                "--out",
                path,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        paths.push(csv_rows(&dir.path().join(path).join("trajectory.csv")));
    }
    // t = 1 differs by design (the modal sum projects θ onto the modes)
    for (reduced, modal) in paths[0].iter().zip(&paths[1]).skip(1) {
        for (r, m) in reduced.iter().zip(modal).skip(1) {
            assert!(
                (r - m).abs() <= 1e-8 * r.abs().max(1.0),
                "t = {}: {r} vs {m}",
                reduced[0]
            );
        }
    }
}

#[test]
fn bench_default_config_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["one.csv", "two.csv"] {
        let o = lrdmd(dir.path(), &["--seed", "11", "bench", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let one = fs::read(dir.path().join("one.csv")).unwrap();
    assert_eq!(one, fs::read(dir.path().join("two.csv")).unwrap());
    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().count(), 361);
    assert!(dir.path().join("one.manifest.json").exists());
    assert!(dir.path().join("one.summary.csv").exists());

    // method a minimal in every (setting, k) group
    let rows: Vec<Vec<String>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    for setting in ["i", "ii", "iii"] {
        for k in 1..=40 {
            let get = |m: &str| -> f64 {
                rows.iter()
                    .find(|r| r[0] == setting && r[1] == m && r[2] == k.to_string())
                    .unwrap()[3]
                    .parse()
                    .unwrap()
            };
            let a = get("a");
            assert!(a <= get("b") * (1.0 + 1e-9) + 1e-9 && a <= get("c") * (1.0 + 1e-9) + 1e-9);
        }
    }
}

#[test]
fn bench_config_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("small.cfg"),
        "# small sweep\nn = 12\nr = 4\nm = 6\nsettings = ii\nmethods = a, c\nseed = 5\noutput = res/small.csv\n",
    )
    .unwrap();
    let o = lrdmd(dir.path(), &["bench", "--config", "small.cfg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("res/small.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 6);

    fs::write(dir.path().join("bad.cfg"), "n = 12\nwidth = 3\n").unwrap();
    let o = lrdmd(dir.path(), &["bench", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key 'width'"));

    let o = lrdmd(dir.path(), &["bench"]);
    assert_eq!(o.status.code(), Some(2));
}
