//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Runs as a plain binary (`harness = false`) so the lines are printed
//! without `--nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use svshrink::selection::{
    atn_divergence, quantile, universal_threshold, SelectionGrid, SelectionRule, SpectrumKernel,
    UniversalThresholdCache,
};
use svshrink::shrinkers::{
    atn, hard_by_threshold, optimal_hard_coefficient, optimal_shrink, soft, two_step, weighted_closed_form,
    NoiseEnergy,
};
use svshrink::simbench::{
    add_noise, generate_signal, mean_sd, noise_sigma, run_scenario, summarize, Estimator, NoiseFamily,
    ReplicateRecord, ScenarioConfig, SummaryRow,
};
use svshrink::spectral::{decompose, estimated_rank, reconstruct, RealMatrix};

const SEED: u64 = 20_140_929;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn scenario(rank: usize, snr: f64, estimators: Vec<Estimator>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(200, 500, rank);
    cfg.snr_values = vec![snr];
    cfg.n_replicates = 50;
    cfg.estimators = estimators;
    cfg.master_seed = SEED;
    cfg
}

fn summary_of(rows: &[SummaryRow], e: Estimator) -> &SummaryRow {
    rows.iter().find(|r| r.estimator == e).expect("estimator summarized")
}

fn run(cfg: &ScenarioConfig) -> (Vec<ReplicateRecord>, Vec<SummaryRow>) {
    let records = run_scenario(cfg, &UniversalThresholdCache::new()).expect("scenario runs");
    let failures: Vec<&String> = records.iter().filter_map(|r| r.outcome.as_ref().err()).collect();
    if let Some(first) = failures.first() {
        println!("    note: {} failed fit(s), first: {first}", failures.len());
    }
    let rows = summarize(&records);
    (records, rows)
}

fn ac1() -> Outcome {
    let (_, rows) = run(&scenario(10, 4.0, vec![Estimator::AtnGsure]));
    let r = summary_of(&rows, Estimator::AtnGsure);
    Outcome {
        pass: within(r.mean_mse, 0.004, 0.002),
        detail: format!("ATN-GSURE R=10 SNR=4 mean MSE {:.5} (target 0.004 +- 0.002)", r.mean_mse),
    }
}

fn ac2() -> Outcome {
    let (_, rows) = run(&scenario(100, 0.5, vec![Estimator::AtnGsure, Estimator::TsvdUnknown]));
    let g = summary_of(&rows, Estimator::AtnGsure);
    let t = summary_of(&rows, Estimator::TsvdUnknown);
    let pass = within(g.mean_mse, 0.978, 0.05) && within(t.mean_mse, 1.0, 0.01) && t.mean_rank == 0.0;
    Outcome {
        pass,
        detail: format!(
            "R=100 SNR=0.5: ATN-GSURE MSE {:.4} (0.978 +- 0.05), rank {:.1}; TSVD-unknown MSE {:.4} (1.000 +- 0.01), rank {:.2} (0)",
            g.mean_mse, g.mean_rank, t.mean_mse, t.mean_rank
        ),
    }
}

fn ac3() -> Outcome {
    let (_, rows) = run(&scenario(10, 1.0, vec![Estimator::SvstSure, Estimator::AtnSure]));
    let s = summary_of(&rows, Estimator::SvstSure);
    let a = summary_of(&rows, Estimator::AtnSure);
    let pass = within(s.mean_mse, 0.116, 0.015)
        && within(s.mean_rank, 59.0, 6.0)
        && within(a.mean_mse, 0.067, 0.01)
        && within(a.mean_rank, 11.0, 2.0);
    Outcome {
        pass,
        detail: format!(
            "R=10 SNR=1: SVST-SURE MSE {:.4} (0.116 +- 0.015) rank {:.1} (59 +- 6); ATN-SURE MSE {:.4} (0.067 +- 0.01) rank {:.1} (11 +- 2)",
            s.mean_mse, s.mean_rank, a.mean_mse, a.mean_rank
        ),
    }
}

fn ac4() -> Outcome {
    let (records, rows) = run(&scenario(100, 4.0, vec![Estimator::AtnUniversal]));
    let r = summary_of(&rows, Estimator::AtnUniversal);
    let ranks: Vec<usize> = records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|f| f.estimated_rank))
        .collect();
    let low = ranks.iter().min().copied().unwrap_or(0);
    let high = ranks.iter().max().copied().unwrap_or(0);
    Outcome {
        pass: r.n_success == 50 && r.mean_rank == 100.0 && r.sd_rank == 0.0,
        detail: format!(
            "ATN-universal R=100 SNR=4: mean rank {:.2} sd {:.3} range [{low}, {high}] (100, sd 0)",
            r.mean_rank, r.sd_rank
        ),
    }
}

fn ac5() -> Outcome {
    let (n, p, rank, sigma) = (50, 80, 5, 0.1);
    let snr = 1.0 / (sigma * ((n * p) as f64).sqrt());
    assert!((noise_sigma(n, p, snr) - sigma).abs() < 1e-15);
    let points = [(1.2, 1.0), (1.5, 2.0), (1.7, 4.0), (1.4, 8.0), (1.9, 16.0)];
    let reps = 200;
    let mut diffs = vec![Vec::with_capacity(reps); points.len()];
    for rep in 0..reps {
        let sig = generate_signal(n, p, rank, svshrink::seed::derive(SEED, &[5, rep as u64, 0])).unwrap();
        let (x, _) = add_noise(&sig.w, snr, NoiseFamily::Gaussian, svshrink::seed::derive(SEED, &[5, rep as u64, 1]))
            .unwrap();
        let dec = decompose(&x).unwrap();
        let kernel = SpectrumKernel::from_decomposition(&dec).unwrap();
        for (k, &(tau, gamma)) in points.iter().enumerate() {
            let sure = kernel.sure(tau, gamma, sigma * sigma).criterion;
            let w_hat = reconstruct(&dec, &atn(dec.lambdas(), tau, gamma).unwrap()).unwrap();
            let loss: f64 = w_hat
                .as_slice()
                .iter()
                .zip(sig.w.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            diffs[k].push(sure - loss);
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, d) in diffs.iter().enumerate() {
        let (mean, sd) = mean_sd(d);
        let se = sd / (reps as f64).sqrt();
        pass &= mean.abs() <= 2.0 * se;
        parts.push(format!("({}, {}): {:+.2} SE", points[k].0, points[k].1, mean / se));
    }
    Outcome {
        pass,
        detail: format!("SURE - loss over {reps} reps, |z| <= 2: {}", parts.join(", ")),
    }
}

fn atn_map(x: &RealMatrix, tau: f64, gamma: f64) -> RealMatrix {
    let dec = decompose(x).unwrap();
    reconstruct(&dec, &atn(dec.lambdas(), tau, gamma).unwrap()).unwrap()
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = RealMatrix::from_fn(4, 5, |_, _| StandardNormal.sample(&mut rng));
        let l = decompose(&x).unwrap().lambdas().to_vec();
        let tau = (l[1] * l[2]).sqrt();
        let gamma = 2.0;
        let mut trace = 0.0;
        for i in 0..4 {
            for j in 0..5 {
                let mut plus = x.clone();
                plus.set(i, j, x.get(i, j) + h);
                let mut minus = x.clone();
                minus.set(i, j, x.get(i, j) - h);
                trace += (atn_map(&plus, tau, gamma).get(i, j) - atn_map(&minus, tau, gamma).get(i, j)) / (2.0 * h);
            }
        }
        let closed = atn_divergence(&l, tau, gamma, 4, 5).unwrap();
        worst = worst.max((closed - trace).abs());
    }
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("max |closed form - finite difference| over 20 4x5 instances {worst:.2e} (<= 1e-4)"),
    }
}

fn random_spectrum(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rng.random_range(1..=40);
    let mut l: Vec<f64> = (0..m).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let mut worst_eq: f64 = 0.0;
    let mut worst_soft: f64 = 0.0;
    for _ in 0..1000 {
        let l = random_spectrum(&mut rng);
        let tau = 10f64.powf(rng.random_range(-2.0..1.0));
        let gamma = rng.random_range(1.0..64.0);
        let a = atn(&l, tau, gamma).unwrap();
        let omegas: Vec<f64> = l.iter().map(|v| v.powf(1.0 - gamma)).collect();
        let b = weighted_closed_form(&l, tau.powf(gamma), &omegas).unwrap();
        for ((x, y), lam) in a.iter().zip(&b).zip(&l) {
            worst_eq = worst_eq.max((x - y).abs() / lam.max(1.0));
        }
        let s = soft(&l, tau).unwrap();
        let g1 = atn(&l, tau, 1.0).unwrap();
        for (x, y) in s.iter().zip(&g1) {
            worst_soft = worst_soft.max((x - y).abs());
        }
    }
    Outcome {
        pass: worst_eq <= 1e-12 && worst_soft <= 1e-15,
        detail: format!(
            "1000 spectra: weighted closed form max rel diff {worst_eq:.2e} (<= 1e-12); soft vs gamma=1 max diff {worst_soft:.2e} (<= 1e-15)"
        ),
    }
}

fn ac8() -> Outcome {
    let (n, p, reps) = (200, 500, 200);
    let tau = universal_threshold(n, p, 1.0, 1000, SEED).unwrap().tau_universal;
    let zero_rank = (0..reps)
        .filter(|&rep| {
            let mut rng = svshrink::seed::rng(SEED, &[8, rep as u64]);
            let x = RealMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
            let dec = decompose(&x).unwrap();
            let kernel = SpectrumKernel::from_decomposition(&dec).unwrap();
            let grid = SelectionGrid::for_spectrum(dec.lambdas()).unwrap();
            let sel = kernel.select(&SelectionRule::Universal { sigma2: 1.0, tau }, &grid).unwrap();
            estimated_rank(&atn(dec.lambdas(), sel.tau, sel.gamma).unwrap()) == 0
        })
        .count();
    let fraction = zero_rank as f64 / reps as f64;
    let target = 1.0 - 1.0 / (500f64).ln().sqrt();
    Outcome {
        pass: within(fraction, target, 0.1),
        detail: format!("rank-0 fraction {fraction:.3} over {reps} null replicates (target {target:.3} +- 0.1)"),
    }
}

fn ac9() -> Outcome {
    let c = optimal_hard_coefficient(1.0).unwrap();
    let target = 4.0 / 3f64.sqrt();
    Outcome {
        pass: (c - target).abs() <= 1e-12,
        detail: format!("coefficient at beta=1 {c:.15} vs 4/sqrt(3) {target:.15}"),
    }
}

fn mses(records: &[ReplicateRecord]) -> Vec<f64> {
    records
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|f| f.relative_mse))
        .collect()
}

fn ac10() -> Outcome {
    let mut gauss = scenario(10, 1.0, vec![Estimator::AtnGsure]);
    gauss.noise = NoiseFamily::Gaussian;
    let mut student = gauss.clone();
    student.noise = NoiseFamily::Student5;
    let g = mses(&run(&gauss).0);
    let s = mses(&run(&student).0);
    let (gm, sm) = (quantile(&g, 0.5), quantile(&s, 0.5));
    let giqr = quantile(&g, 0.75) - quantile(&g, 0.25);
    let siqr = quantile(&s, 0.75) - quantile(&s, 0.25);
    let ratio = sm / gm;
    Outcome {
        pass: g.len() == 50 && s.len() == 50 && (ratio - 1.0).abs() <= 0.2 && siqr > giqr,
        detail: format!(
            "ATN-GSURE R=10 SNR=1: median Student/Gaussian {ratio:.3} (within 20%); IQR Student {siqr:.2e} vs Gaussian {giqr:.2e} (wider)"
        ),
    }
}

/// Property checks on randomized inputs from a fixed seed.
fn ac11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 11);
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok && !failures.iter().any(|f: &String| f == what) {
            failures.push(what.to_string());
        }
    };
    for _ in 0..500 {
        let l = random_spectrum(&mut rng);
        let tau = 10f64.powf(rng.random_range(-2.0..1.0));
        let gamma = rng.random_range(1.0..64.0);
        let n = l.len() + rng.random_range(0..20);
        let p = n + rng.random_range(0..30);
        let sigma = 10f64.powf(rng.random_range(-3.0..0.0));
        let rank = rng.random_range(0..=l.len());
        let outputs = [
            atn(&l, tau, gamma).unwrap(),
            soft(&l, tau).unwrap(),
            hard_by_threshold(&l, tau).unwrap(),
            optimal_shrink(&l, n, p, sigma).unwrap(),
            two_step(&l, rank, &NoiseEnergy::spiked(sigma, n, p)).unwrap(),
        ];
        for d in &outputs {
            check(d.iter().zip(&l).all(|(d, l)| (0.0..=*l).contains(d)), "bounds 0 <= d <= lambda");
        }
        for d in &outputs[..4] {
            check(d.windows(2).all(|w| w[0] >= w[1]), "order preservation");
        }
        for eps in [1e-6, 1e-9] {
            let above = atn(&[tau * (1.0 + eps)], tau, gamma).unwrap()[0];
            let below = atn(&[tau * (1.0 - eps)], tau, gamma).unwrap()[0];
            check(below == 0.0 && above <= 1.01 * gamma * eps * tau * (1.0 + eps), "continuity at tau");
        }
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled: Vec<f64> = l.iter().map(|v| c * v).collect();
        let lhs = atn(&scaled, c * tau, gamma).unwrap();
        check(
            lhs.iter().zip(&outputs[0]).all(|(a, b)| (a - c * b).abs() <= 1e-12 * c * l[0]),
            "homogeneity",
        );
    }
    // Degenerate-point guard: small matrices with large gamma push the
    // divergence past N P.
    let mut guarded = 0;
    for k in 0..200 {
        let mut r = ChaCha8Rng::seed_from_u64(SEED ^ (1100 + k));
        let x = RealMatrix::from_fn(4, 5, |_, _| StandardNormal.sample(&mut r));
        let dec = decompose(&x).unwrap();
        let kernel = SpectrumKernel::from_decomposition(&dec).unwrap();
        let grid = SelectionGrid::for_spectrum(dec.lambdas()).unwrap();
        for (t, g) in grid.points() {
            let b = kernel.gsure(t, g);
            if b.divergence >= 20.0 {
                guarded += 1;
                check(b.criterion == f64::INFINITY, "GSURE guard");
            }
        }
        if let Ok(sel) = kernel.select(&SelectionRule::Gsure, &grid) {
            check(sel.best.is_some_and(|b| b.criterion.is_finite() && b.divergence < 20.0), "GSURE guard");
        }
    }
    check(guarded > 0, "GSURE guard exercised");
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("bounds, order, continuity, homogeneity, GSURE guard ({guarded} guarded points) hold")
        } else {
            format!("violated: {}", failures.join("; "))
        },
    }
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 11] = [
        ("AC1", ac1),
        ("AC2", ac2),
        ("AC3", ac3),
        ("AC4", ac4),
        ("AC5", ac5),
        ("AC6", ac6),
        ("AC7", ac7),
        ("AC8", ac8),
        ("AC9", ac9),
        ("AC10", ac10),
        ("AC11", ac11),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == name) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{name:<5} {verdict}  {}  [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
