//! Integration tests running the `polclust` binary.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn polclust() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polclust"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    polclust()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn gen_writes_csv_and_sidecar_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "gen", "--k", "2", "--n", "100", "--d-over-sigma", "8", "--seed", "1", "-o", "data.csv",
    ];
    let out = run(&args, dir.path());
    assert!(out.status.success(), "{out:?}");

    let csv = std::fs::read(dir.path().join("data.csv")).unwrap();
    let text = String::from_utf8(csv.clone()).unwrap();
    assert_eq!(text.lines().count(), 201); // header + 200 rows
    assert!(text.starts_with("x,y,label\n"));
    assert!(dir.path().join("data.csv.meta.json").exists());

    // Re-running with the same seed reproduces the file byte for byte.
    let out = run(&args, dir.path());
    assert!(out.status.success());
    assert_eq!(csv, std::fs::read(dir.path().join("data.csv")).unwrap());
}

#[test]
fn gen_without_output_exits_2_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen", "--k", "2", "--n", "10", "--d-over-sigma", "8"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage"), "stderr: {err}");
}

fn quick_cluster_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec![
        "cluster",
        "--data",
        "data.csv",
        "--restarts",
        "2",
        "--mc-samples",
        "10",
        "--max-iters",
        "5",
        "--seed",
        "9",
        "-o",
        "out",
    ];
    args.extend_from_slice(extra);
    args
}

fn gen_data(dir: &Path) {
    let out = run(
        &["gen", "--k", "2", "--n", "40", "--d-over-sigma", "8", "--seed", "2", "-o", "data.csv"],
        dir,
    );
    assert!(out.status.success());
}

#[test]
fn cluster_reports_success_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let out = run(&quick_cluster_args(&[]), dir.path());
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("success ratio: 1"), "stdout: {text}");
    assert!(text.contains("final cost:"));

    for file in [
        "out/assignments.json",
        "out/best_params.json",
        "out/trace.csv",
        "out/clusters.svg",
        "out/cost_evolution.svg",
    ] {
        assert!(dir.path().join(file).exists(), "missing {file}");
    }
    let svg = std::fs::read_to_string(dir.path().join("out/clusters.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));

    let json = std::fs::read_to_string(dir.path().join("out/assignments.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["labels"].as_array().unwrap().len(), 80);
}

#[test]
fn cluster_outputs_are_byte_identical_under_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    assert!(run(&quick_cluster_args(&[]), dir.path()).status.success());
    let first = std::fs::read(dir.path().join("out/assignments.json")).unwrap();
    let first_trace = std::fs::read(dir.path().join("out/trace.csv")).unwrap();

    assert!(run(&quick_cluster_args(&[]), dir.path()).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("out/assignments.json")).unwrap());
    assert_eq!(first_trace, std::fs::read(dir.path().join("out/trace.csv")).unwrap());
}

#[test]
fn cluster_through_noisy_device_works() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let out = run(
        &quick_cluster_args(&["--device", "noisy", "--stokes-sigma", "0.01"]),
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("success ratio:"));
}

#[test]
fn cluster_without_k_on_unlabeled_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.csv"), "x,y\n0.0,0.0\n1.0,1.0\n").unwrap();
    let out = run(&quick_cluster_args(&[]), dir.path());
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn config_file_layers_under_cli_flags() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"restarts": 2, "mc_samples": 5, "max_iters": 3}"#,
    )
    .unwrap();

    // File value applies when the flag is absent.
    let out = run(
        &["cluster", "--data", "data.csv", "--config", "cfg.json", "--seed", "4", "-o", "out"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let restarts: std::collections::BTreeSet<&str> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(restarts.len(), 2);

    // CLI flag wins over the file.
    let out = run(
        &[
            "cluster", "--data", "data.csv", "--config", "cfg.json", "--restarts", "3",
            "--seed", "4", "-o", "out2",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let trace = std::fs::read_to_string(dir.path().join("out2/trace.csv")).unwrap();
    let restarts: std::collections::BTreeSet<&str> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(restarts.len(), 3);
}

#[test]
fn landscape_writes_matrix_sidecar_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    gen_data(dir.path());
    let out = run(
        &[
            "landscape", "--data", "data.csv", "--resolution", "12", "--overlay", "3",
            "--seed", "6", "-o", "land",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");

    let csv = std::fs::read_to_string(dir.path().join("land/scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 12);

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("land/scan.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["trajectories"].as_array().unwrap().len(), 3);
    assert_eq!(sidecar["resolution"], 12);

    let svg = std::fs::read_to_string(dir.path().join("land/landscape.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("<polyline"));
}

#[test]
fn serve_device_answers_info_and_survives_bad_requests() {
    let mut child = polclust()
        .args(["serve-device", "--bind", "127.0.0.1:0", "--plates", "4"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .expect("server starts");

    // The binary announces its bound address on stdout.
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let banner = lines.next().unwrap().unwrap();
    let addr = banner.rsplit(' ').next().unwrap().to_string();

    let mut stream = TcpStream::connect(&addr).expect("connects");
    stream.write_all(b"garbage\n").unwrap();
    stream
        .write_all(b"{\"id\": 3, \"cmd\": \"info\"}\n")
        .unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(line.contains("bad-request"), "line: {line}");
    line.clear();
    reader.read_line(&mut line).unwrap();
    let response: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(response["id"], 3);
    assert_eq!(response["ok"], true);
    assert_eq!(response["plates"], 4);

    child.kill().unwrap();
    child.wait().unwrap();
}
