use std::fs;
use std::process::{Command, Output};

fn rmperm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmperm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn threshold_methods() {
    let clt = rmperm(&[
        "threshold",
        "--n",
        "512",
        "--sigma2",
        "0.5",
        "--p",
        "1e-4",
        "--method",
        "clt",
    ]);
    assert_eq!(clt.status.code(), Some(0));
    let v: f64 = stdout(&clt).trim().parse().unwrap();
    assert!((v + 90.6665).abs() < 1e-3, "{v}");

    let precise = rmperm(&["threshold", "--n", "512", "--sigma2", "0.5", "--p", "1e-4"]);
    assert_eq!(precise.status.code(), Some(0));
    let v: f64 = stdout(&precise).trim().parse().unwrap();
    assert!((v + 96.69).abs() < 0.02, "{v}");
}

#[test]
fn argument_errors_exit_with_one() {
    assert_eq!(rmperm(&["threshold", "--n", "512"]).status.code(), Some(1));
    assert_eq!(
        rmperm(&["threshold", "--n", "512", "--sigma2", "0.5", "--p", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(rmperm(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        rmperm(&["simulate", "--m", "4", "--r", "1", "--snr", "x"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        rmperm(&["simulate", "--m", "4", "--r", "1", "--snr", "0", "--et", "bogus"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let out = rmperm(&[
        "simulate",
        "--m",
        "4",
        "--r",
        "1",
        "--decoder",
        "scl",
        "--list",
        "4",
        "--et",
        "bb",
        "--snr",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("permutation decoder"));
}

#[test]
fn simulate_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = rmperm(&[
            "simulate",
            "--m",
            "5",
            "--r",
            "2",
            "--list",
            "8",
            "--et",
            "bb,snr:1e-3,rep:3",
            "--snr",
            "-2:1:0",
            "--convention",
            "snr",
            "--min-errors",
            "10",
            "--max-trials",
            "300",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "snr_db,trials,errors,bler,avg_fplus,avg_fminus,gain"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("-2,"));
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 7);
    }
}

#[test]
fn gain_writes_one_file_per_technique() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gain.csv");
    let out = rmperm(&[
        "gain",
        "--m",
        "5",
        "--r",
        "2",
        "--list",
        "8",
        "--et",
        "bb,rep:2",
        "--snr",
        "0",
        "--convention",
        "snr",
        "--trials",
        "50",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for tag in ["bb", "rep"] {
        let text = fs::read_to_string(dir.path().join(format!("gain.{tag}.csv"))).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[1], "50");
        assert!(row[6].parse::<f64>().unwrap() >= 1.0);
    }

    let plain = rmperm(&[
        "gain", "--m", "4", "--r", "1", "--list", "4", "--snr", "1", "--trials", "20",
    ]);
    let text = stdout(&plain);
    assert_eq!(
        text.lines().nth(1).unwrap().split(',').next_back(),
        Some("1")
    );
}

#[test]
fn decode_reads_llr_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("llrs.txt");
    // RM(1,3) codeword 01010101 sent noiselessly, one position flipped weakly
    fs::write(&path, "4 -4 4 -4\n4 -4 -0.5 -4\n").unwrap();
    for decoder in ["perm", "scl", "sc"] {
        let out = rmperm(&[
            "decode",
            "--m",
            "3",
            "--r",
            "1",
            "--llrs",
            path.to_str().unwrap(),
            "--decoder",
            decoder,
            "--list",
            "4",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = stdout(&out);
        assert!(text.contains("codeword 01010101"), "{decoder}: {text}");
        assert!(text.contains("metric -0.5"), "{decoder}: {text}");
        assert!(text.contains("ops f_plus="));
    }

    fs::write(&path, "1 2 3").unwrap();
    let short = rmperm(&[
        "decode",
        "--m",
        "3",
        "--r",
        "1",
        "--llrs",
        path.to_str().unwrap(),
    ]);
    assert_eq!(short.status.code(), Some(1));
    fs::write(&path, "1 2 3 4 5 6 7 abc").unwrap();
    let bad = rmperm(&[
        "decode",
        "--m",
        "3",
        "--r",
        "1",
        "--llrs",
        path.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}
