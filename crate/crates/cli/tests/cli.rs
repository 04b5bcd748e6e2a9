use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mmpar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmpar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mmpar(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn trace_values(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,objective,cumulative_seconds"));
    lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn rosenbrock_trace_strictly_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let stdout = ok(&["rosenbrock", "--max-iters", "200", "--trace-out", p(&trace)]);
    assert!(stdout.contains("point:"));
    assert!(stdout.contains("converged: false"));
    let values = trace_values(&trace);
    assert_eq!(values.len(), 201);
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn nnmf_writes_factors_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let rows: Vec<String> = (0..12)
        .map(|i| {
            (0..9)
                .map(|j| format!("{}", 1.0 + ((i * 7 + j * 3) % 5) as f64))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    fs::write(&input, rows.join("\n")).unwrap();
    let (trace, manifest, v, w) = (
        dir.path().join("t.csv"),
        dir.path().join("m.json"),
        dir.path().join("v.mmx"),
        dir.path().join("w.csv"),
    );
    ok(&[
        "nnmf",
        "--input",
        p(&input),
        "--rank",
        "3",
        "--preprocess",
        "--max-iters",
        "300",
        "--trace-out",
        p(&trace),
        "--manifest-out",
        p(&manifest),
        "--v-out",
        p(&v),
        "--w-out",
        p(&w),
    ]);
    let values = trace_values(&trace);
    assert!(values
        .windows(2)
        .all(|x| x[1] <= x[0] + 1e-12 * (x[0].abs() + 1.0)));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["solver"], "nnmf");
    assert_eq!(m["parameters"]["rank"], 3);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(&fs::read(&v).unwrap()[..4], b"MMX1");
    assert_eq!(fs::read_to_string(&w).unwrap().lines().count(), 3);
}

#[test]
fn poisson_nnmf_trace_increases() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    ok(&[
        "nnmf-poisson",
        "--synthetic",
        "20x15",
        "--rank",
        "2",
        "--max-iters",
        "200",
        "--trace-out",
        p(&trace),
    ]);
    let values = trace_values(&trace);
    assert!(values
        .windows(2)
        .all(|x| x[1] >= x[0] - 1e-12 * (x[0].abs() + 1.0)));
}

#[test]
fn serial_and_parallel_traces_match() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = [
        "nnmf",
        "--synthetic",
        "40x30",
        "--rank",
        "4",
        "--max-iters",
        "100",
        "--seed",
        "9",
    ];
    ok(&[&common[..], &["--trace-out", p(&a)]].concat());
    ok(&[
        &common[..],
        &[
            "--backend",
            "parallel",
            "--threads",
            "4",
            "--trace-out",
            p(&b),
        ],
    ]
    .concat());
    let (ta, tb) = (trace_values(&a), trace_values(&b));
    assert_eq!(ta.len(), tb.len());
    assert!(ta.iter().zip(&tb).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn pet_writes_image_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let image = dir.path().join("img.pgm");
    let lambda = dir.path().join("l.csv");
    let stdout = ok(&[
        "pet",
        "--grid",
        "16",
        "--detectors",
        "32",
        "--mu",
        "1e-5",
        "--image-out",
        p(&image),
        "--lambda-out",
        p(&lambda),
    ]);
    assert!(stdout.contains("converged: true"), "{stdout}");
    let bytes = fs::read(&image).unwrap();
    let header = b"P5\n16 16\n65535\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 2 * 256);
    assert_eq!(fs::read_to_string(&lambda).unwrap().lines().count(), 16);
}

#[test]
fn pet_accepts_generated_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let sysmat = dir.path().join("e.mmx");
    let phantom = dir.path().join("ph.csv");
    let stdout = ok(&[
        "gen-sysmat",
        "--grid",
        "8",
        "--detectors",
        "16",
        "--out",
        p(&sysmat),
    ]);
    assert!(stdout.contains("120x64"), "{stdout}");
    ok(&["gen-phantom", "--grid", "8", "--out", p(&phantom)]);
    assert_eq!(fs::read_to_string(&phantom).unwrap().lines().count(), 8);
    let stdout = ok(&[
        "pet",
        "--grid",
        "8",
        "--detectors",
        "16",
        "--system-matrix",
        p(&sysmat),
        "--mu",
        "1e-4",
        "--max-iters",
        "50",
    ]);
    assert!(stdout.contains("iterations:"));
}

#[test]
fn mds_from_votes_is_anchored() {
    let dir = tempfile::tempdir().unwrap();
    let votes = dir.path().join("votes.csv");
    let coords = dir.path().join("coords.csv");
    fs::write(
        &votes,
        "1,1,-1,1,0,1\n1,-1,-1,1,1,1\n-1,-1,1,-1,1,0\n-1,1,1,1,-1,-1\n1,1,1,-1,-1,1\n",
    )
    .unwrap();
    ok(&[
        "mds",
        "--votes",
        p(&votes),
        "--dim",
        "2",
        "--max-iters",
        "2000",
        "--coords-out",
        p(&coords),
    ]);
    let text = fs::read_to_string(&coords).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.len() == 2));
    assert_eq!(rows[0], vec![0.0, 0.0]);
    assert_eq!(rows[1][0], 0.0);
}

#[test]
fn bench_reports_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let stdout = ok(&[
        "bench",
        "--suite",
        "nnmf",
        "--shape",
        "30x20",
        "--grid",
        "10,20,30",
        "--max-iters",
        "50",
        "--threads",
        "2",
        "--csv-out",
        p(&csv),
    ]);
    assert!(stdout.contains("traces identical: yes"));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("rank,iters"));
    for line in &lines[1..] {
        let speedup: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
        assert!(speedup > 0.0);
    }
    assert!(lines[1].ends_with("106.2653503"));
}

#[test]
fn pet_and_mds_bench_rows() {
    let stdout = ok(&[
        "bench",
        "--suite",
        "pet",
        "--pet-grid",
        "8",
        "--detectors",
        "16",
        "--max-iters",
        "20",
    ]);
    assert_eq!(
        stdout
            .lines()
            .filter(|l| l.contains("-7337") || l.contains("-55767"))
            .count(),
        2
    );
    assert_eq!(stdout.lines().count(), 6);
    let stdout = ok(&[
        "bench",
        "--suite",
        "mds",
        "--objects",
        "12",
        "--max-iters",
        "30",
    ]);
    assert_eq!(stdout.lines().count(), 6);
}

#[test]
fn input_errors_exit_with_two() {
    assert_eq!(mmpar(&["nnmf", "--rank", "2"]).status.code(), Some(2));
    assert_eq!(mmpar(&["frobnicate"]).status.code(), Some(2));
    let out = mmpar(&["nnmf", "--input", "/nonexistent/x.csv", "--rank", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));

    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("r.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let out = mmpar(&["mds", "--dissimilarities", p(&ragged)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(
        mmpar(&["nnmf", "--synthetic", "5x5", "--rank", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn numerical_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("e.csv");
    let y = dir.path().join("y.csv");
    // the second ray sees no pixel but records a count
    fs::write(&e, "1\n0\n").unwrap();
    fs::write(&y, "1\n1\n").unwrap();
    let out = mmpar(&[
        "pet",
        "--grid",
        "1",
        "--detectors",
        "2",
        "--system-matrix",
        p(&e),
        "--counts",
        p(&y),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
