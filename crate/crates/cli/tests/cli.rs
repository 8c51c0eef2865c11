//! End-to-end checks of the `spectemp` binary: flag surface, file formats,
//! exit codes and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spectemp_cli::io::read_matrix_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectemp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic ECG written as a one-column CSV; returns the file path.
fn write_ecg_csv(dir: &Path, name: &str, duration: f64, jitter: f64, seed: u64) -> PathBuf {
    let fs = 300.0;
    let len = (duration * fs) as usize;
    let mut y = vec![0.0; len];
    let mut state = seed;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let add = |y: &mut [f64], center: f64, sigma: f64, amp: f64| {
        let lo = ((center - 6.0 * sigma).max(0.0)) as usize;
        let hi = ((center + 6.0 * sigma) as usize).min(y.len() - 1);
        for (i, v) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let d = (i as f64 - center) / sigma;
            *v += amp * (-0.5 * d * d).exp();
        }
    };
    let mut t = 0.5;
    while t < duration - 0.5 {
        let c = t * fs;
        add(&mut y, c, 0.012 * fs, 1.0);
        add(&mut y, c - 0.18 * fs, 0.025 * fs, 0.12);
        add(&mut y, c + 0.28 * fs, 0.06 * fs, 0.25);
        t += 0.8 * (1.0 + jitter * (2.0 * next() - 1.0));
    }
    let path = dir.join(name);
    let body: String = y.iter().map(|v| format!("{v}\n")).collect();
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn simulate_has_expected_grid_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let output = run(&["simulate", "--out", path_str(out)]);
        assert_exit(&output, 0);
    }
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert_eq!(a, b, "same seed must give identical files");

    let text = String::from_utf8(a).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4990);
    assert!(rows[0].starts_with("1,"));
    let (t_last, _) = rows.last().unwrap().split_once(',').unwrap();
    let t_last: f64 = t_last.parse().unwrap();
    assert!((t_last - 499.9).abs() < 1e-9);
}

#[test]
fn simulate_noise_free_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("clean.csv");
    let output = run(&["simulate", "--out", path_str(&out), "--noise-sd", "0"]);
    assert_exit(&output, 0);
    for line in fs::read_to_string(&out).unwrap().lines().step_by(321) {
        let (t, y) = line.split_once(',').unwrap();
        let t: f64 = t.parse().unwrap();
        let y: f64 = y.parse().unwrap();
        let freqs: [f64; 2] = match t {
            t if t < 150.0 => [0.01, 0.3],
            t if t < 250.0 => [0.2, 0.3],
            t if t < 300.0 => [0.13, 0.2],
            t if t < 400.0 => [0.2, 0.43],
            _ => [0.1, 0.43],
        };
        let expect: f64 = freqs
            .iter()
            .map(|f| (std::f64::consts::TAU * f * t).sin())
            .sum();
        assert!((y - expect).abs() < 1e-9, "t={t}: {y} vs {expect}");
    }
}

#[test]
fn estimate_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("sig.csv");
    // Short two-tone signal.
    let body: String = (0..300)
        .map(|k| {
            let t = k as f64 * 0.1;
            let y = (std::f64::consts::TAU * 0.2 * t).sin()
                + 0.5 * (std::f64::consts::TAU * 0.45 * t).sin();
            format!("{t},{y}\n")
        })
        .collect();
    fs::write(&sig, body).unwrap();

    let out = dir.path().join("est.csv");
    let output = run(&[
        "estimate",
        "--method",
        "fourierks",
        "--input",
        path_str(&sig),
        "--f0",
        "0.05",
        "--num-freq",
        "10",
        "--lambda",
        "0.1",
        "--q",
        "1",
        "--r",
        "0.5",
        "--out",
        path_str(&out),
    ]);
    assert_exit(&output, 0);

    let (header, matrix) = read_matrix_csv(&out).unwrap();
    assert_eq!(header.method, "fourierks");
    assert_eq!(header.num_freqs, 10);
    assert!((header.f0 - 0.05).abs() < 1e-12);
    assert_eq!(matrix.nrows(), 10);
    assert_eq!(matrix.ncols(), 300);

    // Writing the parsed matrix again reproduces the file bit for bit, so
    // nine significant digits round-trip exactly.
    let reread = fs::read_to_string(&out).unwrap();
    let mut expected = String::new();
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| format!("{:.8e}", matrix[(i, j)]))
            .collect();
        expected.push_str(&row.join(","));
        expected.push('\n');
    }
    let body_start = reread.find('\n').unwrap() + 1;
    assert_eq!(&reread[body_start..], expected);
}

#[test]
fn estimate_zero_signal_writes_zero_body() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("zero.csv");
    let body: String = (0..200).map(|k| format!("{},0\n", k as f64 * 0.1)).collect();
    fs::write(&sig, body).unwrap();
    let out = dir.path().join("est.csv");
    let output = run(&[
        "estimate", "--method", "oscks", "--input", path_str(&sig), "--f0", "0.1",
        "--num-freq", "20", "--lambda", "1", "--out", path_str(&out),
    ]);
    assert_exit(&output, 0);
    let (_, matrix) = read_matrix_csv(&out).unwrap();
    assert!(matrix.iter().all(|v| *v == 0.0));
}

#[test]
fn estimate_accepts_ecg_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let ecg = write_ecg_csv(dir.path(), "ecg.csv", 3.0, 0.1, 9);
    let out = dir.path().join("est.csv");
    // Default flags: f0=0.1, 400 frequencies, lambda=10, q=r=1, qb=1e-7.
    let output = run(&[
        "estimate", "--method", "oscks", "--input", path_str(&ecg), "--dt",
        "0.0033333333333333335", "--out", path_str(&out),
    ]);
    assert_exit(&output, 0);
    let (header, matrix) = read_matrix_csv(&out).unwrap();
    assert_eq!(header.num_freqs, 400);
    assert_eq!(matrix.nrows(), 400);
}

#[test]
fn estimate_oscks_rejects_uneven_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("uneven.csv");
    let mut t = 0.0;
    let mut state = 7u64;
    let body: String = (0..120)
        .map(|k| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            t += 0.1 * (1.0 + 0.5 * ((state >> 11) as f64 / (1u64 << 53) as f64));
            format!("{t},{}\n", (k as f64 * 0.22).sin())
        })
        .collect();
    fs::write(&sig, body).unwrap();
    let out = dir.path().join("x.csv");
    let output = run(&[
        "estimate", "--method", "oscks", "--input", path_str(&sig), "--f0", "0.1",
        "--num-freq", "10", "--out", path_str(&out),
    ]);
    assert_exit(&output, 2);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("fourierks"), "stderr: {stderr}");
}

#[test]
fn featurize_writes_50x50_and_is_method_stable() {
    let dir = tempfile::tempdir().unwrap();
    let ecg = write_ecg_csv(dir.path(), "ecg.csv", 8.0, 0.1, 5);
    let osc_out = dir.path().join("osc.csv");
    let fourier_out = dir.path().join("fourier.csv");
    for (method, out) in [("oscks", &osc_out), ("fourierks", &fourier_out)] {
        let output = run(&[
            "featurize", "--input", path_str(&ecg), "--method", method, "--f0", "0.5",
            "--num-freq", "60", "--q", if method == "oscks" { "20" } else { "1" },
            "--out", path_str(out),
        ]);
        assert_exit(&output, 0);
    }

    let parse = |p: &Path| -> Vec<Vec<f64>> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let a = parse(&osc_out);
    let b = parse(&fourier_out);
    assert_eq!(a.len(), 50);
    assert!(a.iter().all(|r| r.len() == 50));

    // Pearson correlation between the two estimator outputs.
    let flat = |m: &Vec<Vec<f64>>| -> Vec<f64> { m.iter().flatten().cloned().collect() };
    let (x, y) = (flat(&a), flat(&b));
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in x.iter().zip(&y) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    let corr = num / (dx.sqrt() * dy.sqrt());
    assert!(corr > 0.95, "cross-method correlation {corr}");
}

#[test]
fn featurize_jobs_flag_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let ecg = write_ecg_csv(dir.path(), "ecg.csv", 8.0, 0.1, 21);
    let one = dir.path().join("one.csv");
    let two = dir.path().join("two.csv");
    for (jobs, out) in [("1", &one), ("2", &two)] {
        let output = run(&[
            "featurize", "--input", path_str(&ecg), "--f0", "0.5", "--num-freq", "60",
            "--q", "20", "--jobs", jobs, "--out", path_str(out),
        ]);
        assert_exit(&output, 0);
    }
    assert_eq!(fs::read(&one).unwrap(), fs::read(&two).unwrap());
}

#[test]
fn featurize_short_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    let body: String = (0..300).map(|_| "0.0\n").collect();
    fs::write(&short, body).unwrap();
    let out = dir.path().join("feat.csv");
    let output = run(&["featurize", "--input", path_str(&short), "--out", path_str(&out)]);
    assert_exit(&output, 3);
}

#[test]
fn bench_single_repeat_writes_valid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let output = run(&[
        "bench", "--lengths", "600", "--repeats", "1", "--out", path_str(&out),
    ]);
    assert_exit(&output, 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,length,repeat,phase,seconds"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // fourierks total + oscks dare/filter/total + stft total.
    assert_eq!(rows.len(), 5);
    let dare = rows
        .iter()
        .find(|r| r[0] == "oscks" && r[3] == "dare")
        .expect("dare phase row");
    assert!(dare[4].parse::<f64>().unwrap() > 0.0);
    for row in &rows {
        assert_eq!(row[1], "600");
        assert_eq!(row[2], "1");
        assert!(row[4].parse::<f64>().unwrap() >= 0.0);
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("speedup"), "stdout: {stdout}");
}

#[test]
fn pgm_export_has_correct_header_and_orientation() {
    let dir = tempfile::tempdir().unwrap();
    let sig = dir.path().join("sig.csv");
    // Low-frequency tone: energy in the bottom rows of the image.
    let body: String = (0..400)
        .map(|k| {
            let t = k as f64 * 0.1;
            format!("{t},{}\n", (std::f64::consts::TAU * 0.1 * t).sin())
        })
        .collect();
    fs::write(&sig, body).unwrap();
    let out = dir.path().join("est.csv");
    let pgm = dir.path().join("est.pgm");
    let output = run(&[
        "estimate", "--method", "oscks", "--input", path_str(&sig), "--f0", "0.1",
        "--num-freq", "30", "--lambda", "0.5", "--q", "1", "--out", path_str(&out),
        "--pgm", path_str(&pgm),
    ]);
    assert_exit(&output, 0);

    let bytes = fs::read(&pgm).unwrap();
    let header_end = bytes
        .windows(4)
        .position(|w| w == b"255\n")
        .expect("maxval line")
        + 4;
    let header = String::from_utf8_lossy(&bytes[..header_end]);
    assert!(header.starts_with("P5\n"));
    assert!(header.contains("400 30"));
    let pixels = &bytes[header_end..];
    assert_eq!(pixels.len(), 400 * 30);
    // Frequency axis bottom-to-top: the 0.1 Hz ridge (row 0 of the matrix)
    // must appear in the bottom image row, not the top.
    let top_row_mean: f64 = pixels[..400].iter().map(|&b| b as f64).sum::<f64>() / 400.0;
    let bottom_row_mean: f64 =
        pixels[pixels.len() - 400..].iter().map(|&b| b as f64).sum::<f64>() / 400.0;
    assert!(
        bottom_row_mean > 10.0 * top_row_mean.max(1.0),
        "bottom {bottom_row_mean} vs top {top_row_mean}"
    );
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let output = run(&["estimate", "--method", "nonsense"]);
    assert_exit(&output, 1);
    let output = run(&["--help"]);
    assert_exit(&output, 0);
    let output = run(&["no-such-subcommand"]);
    assert_exit(&output, 1);
}
