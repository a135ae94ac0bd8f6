//! Independent oracles for the closed forms: exact rational exponents, the
//! zero-flux property of the stationary density, Gram matrices by exact
//! Gauss–Legendre, explicit Jacobi sums, positivity, reversibility and
//! normalisation of the transition densities.

use beta_jacobi::coords::LambdaPoint;
use beta_jacobi::dynamics::lambda_drift;
use beta_jacobi::orthopoly::{build_basis, classical_jacobi, gauss_legendre};
use beta_jacobi::rng::PathRng;
use beta_jacobi::roots::ModelParams;
use beta_jacobi::semigroup::{
    default_truncation, km_density_beta2, stationary_log_density_unnormalized, univariate_density,
};
use num_rational::Rational64;

fn rat(x: Rational64) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

#[test]
fn exponents_match_rational_arithmetic() {
    // r + 1 = beta (p - m + 1) / 2, s + 1 = beta (q - m + 1) / 2
    for (b, p, q, m) in [((2, 1), (7, 2), (5, 2), 2), ((1, 2), (9, 1), (4, 1), 3), ((3, 1), (5, 3), (11, 4), 1)] {
        let beta = Rational64::new(b.0, b.1);
        let p = Rational64::new(p.0, p.1);
        let q = Rational64::new(q.0, q.1);
        let mm = Rational64::from(m as i64 - 1);
        let r = beta * (p - mm) / 2 - 1;
        let s = beta * (q - mm) / 2 - 1;
        let params = ModelParams::new(rat(beta), rat(p), rat(q), m).unwrap();
        let e = params.exponents().unwrap();
        assert!((e.r - rat(r)).abs() <= 1e-15 * rat(r).abs().max(1.0), "r {} vs {}", e.r, rat(r));
        assert!((e.s - rat(s)).abs() <= 1e-15 * rat(s).abs().max(1.0), "s {} vs {}", e.s, rat(s));
        let k = params.multiplicities();
        assert_eq!(k.k0, rat(beta * (p - q) / 2));
        assert_eq!(k.k1, rat(beta * (q - mm) - 1));
        assert_eq!(k.k2, rat(beta / 2));
    }
}

fn random_lambda(m: usize, rng: &mut PathRng) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..m).map(|_| 0.02 + 0.96 * rng.uniform()).collect();
        x.sort_by(|a, b| b.total_cmp(a));
        if x.windows(2).all(|w| w[0] - w[1] > 0.02) {
            return x;
        }
    }
}

#[test]
fn stationary_density_has_zero_flux() {
    // b_i = 2 lambda_i (1 - lambda_i) d_i log pi + 2 (1 - 2 lambda_i) for the
    // generator 2 lambda (1 - lambda) d^2 + b d
    let mut rng = PathRng::new(99);
    for (beta, p, q, m) in [(2.0, 3.5, 2.5, 1), (1.0, 4.0, 3.0, 2), (0.5, 6.0, 7.5, 3), (2.0, 5.0, 4.0, 3)] {
        let params = ModelParams::new(beta, p, q, m).unwrap();
        let e = params.exponents().unwrap();
        for _ in 0..50 {
            let x = random_lambda(m, &mut rng);
            let mut b = vec![0.0; m];
            lambda_drift(&x, &params, &mut b).unwrap();
            for i in 0..m {
                let mut dlog = e.r / x[i] - e.s / (1.0 - x[i]);
                for j in 0..m {
                    if j != i {
                        dlog += beta / (x[i] - x[j]);
                    }
                }
                let expected = 2.0 * x[i] * (1.0 - x[i]) * dlog + 2.0 * (1.0 - 2.0 * x[i]);
                assert!((b[i] - expected).abs() <= 1e-10 * expected.abs().max(1.0), "{b:?} vs {expected}");

                // the log density itself, by central differences
                let h = 1e-6;
                let at = |d: f64| {
                    let mut y = x.clone();
                    y[i] += d;
                    stationary_log_density_unnormalized(&LambdaPoint::new(y).unwrap(), &params).unwrap()
                };
                let fd = (at(h) - at(-h)) / (2.0 * h);
                assert!((fd - dlog).abs() <= 1e-5 * dlog.abs().max(1.0), "fd {fd} vs {dlog}");
            }
        }
    }
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[test]
fn gram_matrix_by_exact_gauss_legendre() {
    // integer exponents make W P_i P_j a polynomial, integrated exactly
    let deg = 20;
    let (x, w) = gauss_legendre(30);
    for (r, s) in [(0u64, 0u64), (1, 0), (2, 3), (0, 4)] {
        let basis = build_basis(r as f64, s as f64, deg).unwrap();
        let beta_fn = factorial(r) * factorial(s) / factorial(r + s + 1);
        let vals: Vec<Vec<f64>> = x.iter().map(|&l| basis.evaluate_all(deg, l).unwrap()).collect();
        for i in 0..=deg {
            for j in 0..=i {
                let g: f64 = x
                    .iter()
                    .zip(&w)
                    .zip(&vals)
                    .map(|((&l, &wk), v)| wk * l.powi(r as i32) * (1.0 - l).powi(s as i32) / beta_fn * v[i] * v[j])
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((g - target).abs() < 1e-11, "r={r} s={s} ({i},{j}): {g}");
            }
        }
    }
}

/// `P_n^{(a,b)}(x) = sum_k C(n+a, n-k) C(n+b, k) ((x-1)/2)^k ((x+1)/2)^(n-k)`.
fn jacobi_by_sum(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let binom = |top: f64, k: usize| (0..k).map(|i| (top - i as f64) / (i as f64 + 1.0)).product::<f64>();
    (0..=n)
        .map(|k| {
            binom(n as f64 + a, n - k)
                * binom(n as f64 + b, k)
                * ((x - 1.0) / 2.0).powi(k as i32)
                * ((x + 1.0) / 2.0).powi((n - k) as i32)
        })
        .sum()
}

#[test]
fn classical_jacobi_matches_explicit_sum() {
    for (a, b) in [(0.0, 0.0), (0.5, -0.5), (-0.85, 10.0), (3.0, 1.25)] {
        for n in 0..=6 {
            for k in 0..=20 {
                let x = -1.0 + 2.0 * k as f64 / 20.0;
                let want = jacobi_by_sum(n, a, b, x);
                let got = classical_jacobi(n, a, b, x);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "n={n} a={a} b={b} x={x}: {got} vs {want}");
            }
        }
        // the basis polynomial is P_n^{(s, r)}(2 lambda - 1)
        let basis = build_basis(b, a, 6).unwrap();
        for n in 0..=6 {
            let got = basis.classical(n, 0.3).unwrap();
            let want = jacobi_by_sum(n, a, b, -0.4);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn univariate_density_is_positive_on_a_grid() {
    for (r, s) in [(0.0, 0.0), (0.5, 0.5), (-0.5, 2.0), (4.0, -0.3)] {
        let basis = build_basis(r, s, 80).unwrap();
        for t in [0.05, 0.5, 2.0] {
            let n = default_truncation(t);
            for i in 1..40 {
                for j in 1..40 {
                    let (theta, lam) = (i as f64 / 40.0, j as f64 / 40.0);
                    let d = univariate_density(theta, lam, t, &basis, n).unwrap();
                    assert!(d.value > 0.0, "r={r} s={s} t={t} theta={theta} lambda={lam}: {}", d.value);
                }
            }
        }
    }
}

/// `prod_i W(lambda_i) V(lambda)^2`, the unnormalised `beta = 2` weight.
fn weight2(x: &[f64], r: f64, s: f64) -> f64 {
    let v = x[0] - x[1];
    x.iter().map(|l| l.powf(r) * (1.0 - l).powf(s)).product::<f64>() * v * v
}

#[test]
fn km_density_is_reversible_for_two_particles() {
    let mut rng = PathRng::new(3);
    for (r, s) in [(0.0, 0.0), (0.5, 0.5), (1.5, -0.25)] {
        let basis = build_basis(r, s, 40).unwrap();
        for _ in 0..30 {
            let a = random_lambda(2, &mut rng);
            let b = random_lambda(2, &mut rng);
            let t = 0.2 + rng.uniform();
            let n = default_truncation(t);
            let pa = LambdaPoint::new(a.clone()).unwrap();
            let pb = LambdaPoint::new(b.clone()).unwrap();
            let fwd = weight2(&a, r, s) * km_density_beta2(&pa, &pb, t, &basis, n).unwrap().value;
            let bwd = weight2(&b, r, s) * km_density_beta2(&pb, &pa, t, &basis, n).unwrap().value;
            assert!((fwd - bwd).abs() <= 1e-10 * fwd.abs().max(bwd.abs()), "{fwd} vs {bwd}");
        }
    }
}

#[test]
fn km_density_integrates_to_one_over_the_chamber() {
    // the integrand extends symmetrically to the square; diagonal nodes
    // carry zero density
    let (x, w) = gauss_legendre(48);
    for (r, s) in [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)] {
        let basis = build_basis(r, s, 40).unwrap();
        for (theta, t) in [(vec![0.75, 0.25], 0.5), (vec![0.6, 0.1], 0.3), (vec![0.95, 0.9], 1.0)] {
            let theta = LambdaPoint::new(theta).unwrap();
            let n = default_truncation(t);
            let mut total = 0.0;
            for (xi, wi) in x.iter().zip(&w) {
                for (yj, wj) in x.iter().zip(&w) {
                    if xi == yj {
                        continue;
                    }
                    let lam = LambdaPoint::from_unsorted(vec![*xi, *yj]).unwrap();
                    total += wi * wj * km_density_beta2(&theta, &lam, t, &basis, n).unwrap().value;
                }
            }
            let mass = 0.5 * total;
            assert!((mass - 1.0).abs() < 1e-6, "r={r} s={s} t={t}: mass {mass}");
        }
    }
}
