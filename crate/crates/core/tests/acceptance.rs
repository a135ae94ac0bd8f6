//! Acceptance suite: runs criteria 1 to 10 in order, prints one line per
//! criterion and exits non-zero if any of them fails. Criteria run one after
//! another so that the time budgets are measured without competing tests.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use beta_jacobi::experiments::{
    drift_cross_oracle_error, exponent_bookkeeping_error, km_partition_agreement, orthonormality_error,
    random_interior_point, run_appendix, run_density_vs_sim, run_hitting, trig_identity_residuals,
    univariate_checks, AppendixOptions, DensityOptions, HittingOptions, HittingPreset, SuiteReport,
};
use beta_jacobi::rng::PathRng;
use beta_jacobi::semigroup::{km_constant, partitions_up_to, tau_eigenvalue};
use num_rational::Rational64;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within_budget(elapsed: Duration, budget: Duration) -> bool {
    elapsed < budget
}

fn suite_detail(r: &SuiteReport) -> String {
    r.checks
        .iter()
        .map(|c| format!("{}={:.4e}{}", c.name, c.value, if c.passed { "" } else { "(FAIL)" }))
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in 1..=5 {
        worst = worst.max(drift_cross_oracle_error(m, 1000, 11 + m as u64).unwrap());
    }
    outcome(worst <= 1e-10, format!("drift root-sum vs explicit, max relative error {worst:.3e} (limit 1e-10)"))
}

fn criterion_2() -> Outcome {
    let mut rng = PathRng::new(2024);
    let mut worst = [0.0f64; 4];
    for _ in 0..10_000 {
        let phi = random_interior_point(2, 1e-3, &mut rng);
        let beta = 0.2 + 3.8 * rng.uniform();
        let p = 1.0 + 1.0 / beta + 5.0 * rng.uniform();
        let q = 1.0 + 1.0 / beta + 5.0 * rng.uniform();
        let r = trig_identity_residuals(phi.as_slice()[0], phi.as_slice()[1], beta, p, q);
        for (w, v) in worst.iter_mut().zip([r.single_particle, r.sine_factorisation, r.pairwise_cot_form, r.cot_addition]) {
            *w = w.max(v);
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(max <= 1e-12, format!("four trig identities on 1e4 points, residuals {:.2e} {:.2e} {:.2e} {:.2e} (limit 1e-12)", worst[0], worst[1], worst[2], worst[3]))
}

fn criterion_3() -> Outcome {
    let grid = [-0.85, 0.5, 10.0];
    let mut worst: f64 = 0.0;
    for &r in &grid {
        for &s in &grid {
            worst = worst.max(orthonormality_error(r, s, 30, 1601).unwrap());
        }
    }
    outcome(worst <= 1e-10, format!("Gram matrix degree <= 30 on 9 (r,s), max |G - I| {worst:.3e} (limit 1e-10)"))
}

fn criterion_4() -> Outcome {
    let u = univariate_checks(4).unwrap();
    let ok = u.normalisation <= 1e-8 && u.chapman_kolmogorov <= 1e-8 && u.reversibility <= 1e-12;
    outcome(
        ok,
        format!(
            "normalisation {:.2e} (1e-8), Chapman-Kolmogorov {:.2e} (1e-8), reversibility {:.2e} (1e-12)",
            u.normalisation, u.chapman_kolmogorov, u.reversibility
        ),
    )
}

/// `sum n_i (n_i + r + s + 1) + c/2 == r_tau` in exact rational arithmetic,
/// with `n_i = tau_i + m - i`.
fn bookkeeping_exact(max_part: usize, max_m: usize) -> bool {
    let rs = [(0, 1, 0, 1), (1, 2, 1, 2), (1, 1, 3, 1), (-1, 3, 7, 4)];
    for m in 1..=max_m {
        for &(rn, rd, sn, sd) in &rs {
            let r = Rational64::new(rn, rd);
            let s = Rational64::new(sn, sd);
            let mi = m as i64;
            let c = -Rational64::from(mi * (mi - 1))
                * (Rational64::new(2 * (mi - 2), 3) + r + s + Rational64::from(2));
            for tau in partitions_up_to(m, max_part) {
                let mut lhs = c / Rational64::from(2);
                let mut rhs = Rational64::from(0);
                for (i, &t) in tau.parts().iter().enumerate() {
                    let t = t as i64;
                    let n = Rational64::from(t + mi - 1 - i as i64);
                    lhs += n * (n + r + s + Rational64::from(1));
                    rhs += Rational64::from(t) * (Rational64::from(t) + r + s + Rational64::from(1 + 2 * (mi - 1 - i as i64)));
                }
                if lhs != rhs {
                    return false;
                }
                let rf = *r.numer() as f64 / *r.denom() as f64;
                let sf = *s.numer() as f64 / *s.denom() as f64;
                let exact = *rhs.numer() as f64 / *rhs.denom() as f64;
                let lib = tau_eigenvalue(&tau, rf, sf, 2.0);
                if (lib - exact).abs() > 1e-12 * exact.abs().max(1.0) {
                    return false;
                }
                let cf = *c.numer() as f64 / *c.denom() as f64;
                if (km_constant(m, rf, sf) - cf).abs() > 1e-12 * cf.abs().max(1.0) {
                    return false;
                }
            }
        }
    }
    true
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    for r in [0.0, 0.5] {
        worst = worst.max(km_partition_agreement(r, 0.5, 14, 12, 40, 5).unwrap());
    }
    let exact = bookkeeping_exact(8, 3);
    let float = exponent_bookkeeping_error(8, 3);
    outcome(
        worst <= 1e-8 && exact && float <= 1e-12,
        format!("KM vs partition sum {worst:.3e} (1e-8); bookkeeping exact in rationals: {exact}, float {float:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let m1 = run_density_vs_sim(&DensityOptions { m: 1, t: 0.5, n_paths: 100_000, dt: 1e-4, seed: 6 }).unwrap();
    let m2 = run_density_vs_sim(&DensityOptions { m: 2, t: 0.5, n_paths: 10_000, dt: 1e-4, seed: 6 }).unwrap();
    let ks = m1.density[0].distance;
    let l1 = m2.density[0].distance;
    outcome(ks < 0.01 && l1 < 0.1, format!("m=1 KS {ks:.4} (< 0.01), m=2 histogram L1 {l1:.4} (< 0.1)"))
}

fn criterion_7() -> Outcome {
    let r = run_hitting(&HittingOptions { n_paths: 500, ..HittingOptions::default() }).unwrap();
    outcome(r.passed, suite_detail(&r))
}

fn criterion_8() -> Outcome {
    let r = run_hitting(&HittingOptions { preset: HittingPreset::RankOne, n_paths: 1000, ..HittingOptions::default() })
        .unwrap();
    let d1 = &r.rank_one[0];
    let d3 = &r.rank_one[1];
    outcome(
        r.passed,
        format!(
            "d=1 hit-0 fraction {:.3} (> 0.5); d=3 hits {}/{}",
            d1.hit_zero_fraction,
            d3.hit_zero + d3.hit_one,
            d3.n_paths
        ),
    )
}

fn criterion_9() -> Outcome {
    let r = run_appendix(&AppendixOptions::default()).unwrap();
    outcome(r.passed, suite_detail(&r))
}

fn bjl(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bjl"))
        .args(args)
        .current_dir(dir)
        .env_remove("BJL_SEED")
        .output()
        .expect("bjl runs")
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let runs: [&[&str]; 3] = [
        &["simulate", "--beta", "2", "--p", "3.5", "--q", "2.5", "--m", "2", "--paths", "4", "--seed", "7",
          "--horizon", "0.2", "--dt", "1e-3", "--out", "orig/sim/paths.csv"],
        &["density", "--mode", "partition2", "--t", "0.5", "--grid", "12", "--out", "orig/density/table.csv"],
        &["verify", "--suite", "stationary", "--paths", "40", "--horizon", "0.5", "--out", "orig/verify/report.json"],
    ];
    let mut ok = true;
    let mut compared = 0;
    for args in runs {
        let first = bjl(args, dir);
        ok &= first.status.code().is_some();
        let out = args.last().unwrap();
        let manifest = Path::new(out).parent().unwrap().join("manifest.json");
        let mut replays = Vec::new();
        for k in 0..2 {
            let target = format!("replay{k}/{}", out.trim_start_matches("orig/"));
            let threads = if k == 0 { "1" } else { "3" };
            let r = bjl(&["replay", manifest.to_str().unwrap(), "--out", &target, "--threads", threads], dir);
            ok &= r.status.code() == first.status.code();
            replays.push(std::fs::read(dir.join(&target)).unwrap_or_default());
        }
        let original = std::fs::read(dir.join(out)).unwrap_or_default();
        ok &= !original.is_empty() && replays.iter().all(|r| *r == original);
        compared += 1;
    }
    outcome(ok, format!("{compared} manifests replayed twice each, outputs byte-identical: {ok}"))
}

type Criterion = (u32, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, criterion_1, Duration::from_secs(1)),
        (2, criterion_2, Duration::from_secs(1)),
        (3, criterion_3, Duration::from_secs(5)),
        (4, criterion_4, Duration::from_secs(10)),
        (5, criterion_5, Duration::from_secs(30)),
        (6, criterion_6, Duration::from_secs(300)),
        (7, criterion_7, Duration::from_secs(600)),
        (8, criterion_8, Duration::from_secs(60)),
        (9, criterion_9, Duration::from_secs(60)),
        (10, criterion_10, Duration::from_secs(600)),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (n, run, budget) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let timely = within_budget(elapsed, budget);
        let passed = result.passed && timely;
        println!(
            "criterion {n:>2}: {} [{:.2} s of {} s] {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            result.detail
        );
        if !passed {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
