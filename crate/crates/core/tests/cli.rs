use std::fs;
use std::path::Path;

use svshrink::cli::io::{parse_matrix_csv, read_report, write_matrix_csv, SigmaSource};
use svshrink::cli::run_args;
use svshrink::simbench::{add_noise, generate_signal, NoiseFamily};
use svshrink::spectral::{estimated_rank, RealMatrix};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn noisy_fixture(dir: &Path) -> (std::path::PathBuf, RealMatrix, f64) {
    let sig = generate_signal(30, 40, 3, 11).unwrap();
    let (x, sigma) = add_noise(&sig.w, 4.0, NoiseFamily::Gaussian, 12).unwrap();
    let path = dir.join("x.csv");
    write_matrix_csv(&path, &x).unwrap();
    (path, x, sigma)
}

#[test]
fn csv_examples_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    fs::write(&good, "1,2\n3,4\n").unwrap();
    let m = parse_matrix_csv(&good).unwrap();
    assert_eq!(m.shape(), (2, 2));
    assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let msg = parse_matrix_csv(&ragged).unwrap_err().to_string();
    assert!(msg.contains("line 2"), "{msg}");

    let x = RealMatrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f64).sin() / 3.0 * 10f64.powi(j as i32 - 3));
    let path = dir.path().join("rt.csv");
    write_matrix_csv(&path, &x).unwrap();
    let back = parse_matrix_csv(&path).unwrap();
    for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
        assert!((a - b).abs() <= 1e-15 * b.abs());
    }
}

#[test]
fn denoise_gsure_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let (input, x, _) = noisy_fixture(dir.path());
    let out = dir.path().join("w.csv");
    let report = dir.path().join("r.json");
    let code = run_args(&[
        "denoise", "--in", s(&input), "--method", "atn", "--select", "gsure", "--out", s(&out), "--report",
        s(&report),
    ]);
    assert_eq!(code, 0);
    let w = parse_matrix_csv(&out).unwrap();
    assert_eq!(w.shape(), x.shape());
    let r = read_report(&report).unwrap();
    assert_eq!((r.n_rows, r.n_cols), (30, 40));
    assert_eq!(r.method, "atn");
    assert_eq!(r.selection, "gsure");
    assert_eq!(r.sigma_source, SigmaSource::NotApplicable);
    assert!(r.tau.is_some() && r.gamma.is_some() && r.criterion.is_some());
    assert_eq!(r.estimated_rank, estimated_rank(&r.shrunk_singular_values));
    assert_eq!(r.estimated_rank, 3);
    assert_eq!(r.output, out.display().to_string());

    // writing the report again from the parsed copy is byte-identical
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(r.to_json(), text);
}

#[test]
fn denoise_other_methods() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _, sigma) = noisy_fixture(dir.path());
    let sigma = sigma.to_string();
    let out = dir.path().join("w.csv");
    let report = dir.path().join("r.json");
    let base = ["denoise", "--in", s(&input), "--out", s(&out), "--report", s(&report)];
    let cases: Vec<Vec<&str>> = vec![
        vec!["--method", "atn", "--select", "sure", "--sigma", &sigma],
        vec!["--method", "atn", "--select", "universal", "--sigma", &sigma, "--nsim", "200", "--seed", "3"],
        vec!["--method", "atn", "--tau", "0.5", "--gamma", "2"],
        vec!["--method", "soft", "--select", "sure", "--sigma", &sigma, "--center"],
        vec!["--method", "tsvd-rank", "--rank", "3"],
        vec!["--method", "tsvd-tau"],
        vec!["--method", "tsvd-tau", "--sigma", &sigma],
        vec!["--method", "os"],
        vec!["--method", "two-step", "--rank", "3", "--literal-energy"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        assert_eq!(run_args(&args), 0, "{extra:?}");
        let r = read_report(&report).unwrap();
        assert_eq!(r.estimated_rank, estimated_rank(&r.shrunk_singular_values));
    }
    let r = read_report(&report).unwrap();
    assert_eq!(r.sigma_source, SigmaSource::Estimated);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _, _) = noisy_fixture(dir.path());
    let out = dir.path().join("w.csv");
    let report = dir.path().join("r.json");
    let base = ["denoise", "--in", s(&input), "--out", s(&out), "--report", s(&report)];
    let bad: Vec<Vec<&str>> = vec![
        vec!["--method", "atn", "--select", "gsure", "--sigma", "0.1"],
        vec!["--method", "atn", "--select", "sure"],
        vec!["--method", "atn"],
        vec!["--method", "os", "--select", "sure"],
        vec!["--method", "tsvd-rank"],
        vec!["--method", "nope"],
        vec!["--method", "atn", "--bogus"],
    ];
    for extra in bad {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        assert_eq!(run_args(&args), 2, "{extra:?}");
    }
    assert_eq!(run_args(&[]), 2);
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run_args(&["surface", "--in", s(&missing), "--rule", "gsure", "--out", s(&out)]),
        1
    );
}

#[test]
fn universal_threshold_is_deterministic() {
    let bin = env!("CARGO_BIN_EXE_svshrink");
    let run = || {
        let o = std::process::Command::new(bin)
            .args(["universal-threshold", "--n", "40", "--p", "100", "--sigma", "1", "--seed", "7", "--nsim", "300"])
            .output()
            .unwrap();
        assert!(o.status.success());
        String::from_utf8(o.stdout).unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    let tau: f64 = a.trim().parse().unwrap();
    // above the bulk edge sqrt(40) + sqrt(100)
    assert!(tau > 40f64.sqrt() + 10.0 - 1.0 && tau < 40f64.sqrt() + 10.0 + 2.0, "{tau}");
}

#[test]
fn benchmark_surface_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(
        &cfg,
        "n_rows=20\nn_cols=30\nrank=2\nrank=4\nsnr=1\nsnr=4\nreplicates=3\nestimator=all\nnsim=100\n",
    )
    .unwrap();
    let summary = dir.path().join("summary.csv");
    let records = dir.path().join("records.csv");
    let args = ["benchmark", "--config", s(&cfg), "--out", s(&summary), "--seed", "5"];
    assert_eq!(run_args(&[&args[..], &["--threads", "2", "--records", s(&records)]].concat()), 0);
    let first = fs::read_to_string(&summary).unwrap();
    assert_eq!(run_args(&[&args[..], &["--threads", "1"]].concat()), 0);
    assert_eq!(fs::read_to_string(&summary).unwrap(), first);
    let lines: Vec<&str> = first.lines().collect();
    assert_eq!(lines[0], "estimator,R,SNR,mean_mse,sd_mse,mean_rank,sd_rank");
    // 11 estimators x 2 ranks x 2 SNRs, each with 3 replicates
    assert_eq!(lines.len(), 1 + 11 * 2 * 2);
    assert_eq!(fs::read_to_string(&records).unwrap().lines().count(), 1 + 11 * 2 * 2 * 3);

    let (input, _, _) = noisy_fixture(dir.path());
    let truth = dir.path().join("truth.csv");
    write_matrix_csv(&truth, &generate_signal(30, 40, 3, 11).unwrap().w).unwrap();
    let surface = dir.path().join("surface.csv");
    assert_eq!(
        run_args(&["surface", "--in", s(&input), "--rule", "gsure", "--out", s(&surface), "--truth", s(&truth)]),
        0
    );
    let text = fs::read_to_string(&surface).unwrap();
    assert!(text.starts_with("tau,gamma,criterion,loss\n"));
    assert_eq!(run_args(&["surface", "--in", s(&input), "--rule", "sure", "--out", s(&surface)]), 2);

    let curves = dir.path().join("curves.csv");
    assert_eq!(
        run_args(&[
            "curves", "--spec", "soft:tau=1", "--spec", "atn:tau=1,gamma=4", "--lambda-max", "3", "--points", "11",
            "--out", s(&curves)
        ]),
        0
    );
    let text = fs::read_to_string(&curves).unwrap();
    assert!(text.starts_with("lambda,spec,d_hat\n"));
    assert_eq!(text.lines().count(), 1 + 22);
}
