//! Numerical verifications: hitting of the alcove walls, the Laplacian of the
//! ground-state product `h`, the Vandermonde identity, the trigonometric
//! identities behind the angular drift, and agreement between simulated
//! ensembles and the closed-form densities.
//!
//! Each suite returns a [`SuiteReport`] whose checks carry the measured value,
//! the threshold and the verdict.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::coords::{complement, complement_slice, phi_to_lambda, LambdaPoint};
use crate::dynamics::{map_paths, simulate_phi_until, simulate_rank_one, terminal_lambda, HitKind, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::vandermonde;
use crate::orthopoly::{build_basis, integrate_against_weight, QuadRule};
use crate::rng::PathRng;
use crate::roots::{drift_explicit_tol, drift_root_sum_tol, min_wall_value, AlcovePoint, ModelParams};
use crate::semigroup::{
    default_truncation, km_constant, km_unchecked, partition_sum_density_beta2, partitions_up_to,
    stationary_expectation, tau_eigenvalue, univariate_cdf, univariate_density,
};

/// Fraction above which a hit is declared consistent with finiteness.
pub const HIT_THRESHOLD: f64 = 0.9;
/// Fraction below which a no-hit expectation is declared consistent.
pub const NO_HIT_THRESHOLD: f64 = 0.05;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Parameters in the range where the wall is reached in finite time.
    Hit,
    /// Parameters where the wall is known not to be reached.
    NoHit,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub kind: HitKind,
    pub params: ModelParams,
    pub start: Vec<f64>,
    pub n_paths: usize,
    pub horizon: f64,
    pub epsilon_hit: f64,
    pub hits: usize,
    pub hit_fraction: f64,
    pub standard_error: f64,
    pub wilson_interval: (f64, f64),
    pub expectation: Expectation,
    pub verdict: Verdict,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if p == 0.0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// What the finiteness criterion predicts: collisions for `beta < 1`; the
/// lower wall for `0 < p - (m - 1) < 2 / beta`; the upper wall likewise in `q`.
pub fn expected_hitting(kind: HitKind, params: &ModelParams) -> Expectation {
    let shift = params.m as f64 - 1.0;
    let edge = |x: f64| {
        if x <= 0.0 {
            Expectation::Unknown
        } else if x < 2.0 / params.beta {
            Expectation::Hit
        } else {
            Expectation::NoHit
        }
    };
    match kind {
        HitKind::Collision if params.beta < 1.0 => Expectation::Hit,
        HitKind::Collision => Expectation::NoHit,
        HitKind::LowerBoundary => edge(params.p - shift),
        HitKind::UpperBoundary => edge(params.q - shift),
    }
}

fn verdict(expectation: Expectation, fraction: f64) -> Verdict {
    match expectation {
        Expectation::Hit if fraction > HIT_THRESHOLD => Verdict::Consistent,
        Expectation::NoHit if fraction < NO_HIT_THRESHOLD => Verdict::Consistent,
        Expectation::Unknown => Verdict::Inconclusive,
        _ => Verdict::Inconsistent,
    }
}

/// Distance of `phi` to the wall of `kind`: the smallest adjacent gap,
/// `phi_m`, or `pi/2 - phi_1`.
pub fn wall_distance(kind: HitKind, phi: &[f64]) -> f64 {
    match kind {
        HitKind::Collision => phi.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min),
        HitKind::LowerBoundary => phi[phi.len() - 1],
        HitKind::UpperBoundary => FRAC_PI_2 - phi[0],
    }
}

/// Monte Carlo estimate of the probability that the wall of `kind` is
/// reached (within `epsilon_hit`) before `config.horizon`, from the alcove
/// centre.
pub fn estimate_hitting(
    kind: HitKind,
    params: &ModelParams,
    config: &SimConfig,
    epsilon_hit: f64,
    n_paths: usize,
) -> Result<HittingReport> {
    estimate_hitting_from(kind, &AlcovePoint::centre(params.m), params, config, epsilon_hit, n_paths)
}

pub fn estimate_hitting_from(
    kind: HitKind,
    start: &AlcovePoint,
    params: &ModelParams,
    config: &SimConfig,
    epsilon_hit: f64,
    n_paths: usize,
) -> Result<HittingReport> {
    config.validate()?;
    if !(epsilon_hit.is_finite() && epsilon_hit > config.boundary_tol) {
        return Err(Error::InvalidParameter(format!(
            "epsilon_hit = {epsilon_hit} must exceed boundary_tol = {}",
            config.boundary_tol
        )));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    if kind == HitKind::Collision && params.m < 2 {
        return Err(Error::InvalidParameter("collisions need m >= 2".into()));
    }
    let hit = map_paths(n_paths, config.seed, |_, seed| {
        let stop = |x: &[f64]| (wall_distance(kind, x) < epsilon_hit).then_some(kind);
        let path = simulate_phi_until(start, params, &config.with_seed(seed), stop)?;
        Ok(path.hit.is_some())
    })?;
    let hits = hit.iter().filter(|h| **h).count();
    let fraction = hits as f64 / n_paths as f64;
    let expectation = expected_hitting(kind, params);
    Ok(HittingReport {
        kind,
        params: *params,
        start: start.as_slice().to_vec(),
        n_paths,
        horizon: config.horizon,
        epsilon_hit,
        hits,
        hit_fraction: fraction,
        standard_error: (fraction * (1.0 - fraction) / n_paths as f64).sqrt(),
        wilson_interval: wilson_interval(hits, n_paths),
        expectation,
        verdict: verdict(expectation, fraction),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneReport {
    pub d: f64,
    pub dprime: f64,
    pub start: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub boundary_tol: f64,
    pub hit_zero: usize,
    pub hit_one: usize,
    pub hit_zero_fraction: f64,
    pub hit_one_fraction: f64,
    pub wilson_zero: (f64, f64),
}

/// Rank-one process started at `start`: how many paths reach `J <= tol`
/// or `J >= 1 - tol` before the horizon, with `tol = config.boundary_tol`.
pub fn estimate_rank_one_hitting(d: f64, dprime: f64, start: f64, config: &SimConfig, n_paths: usize) -> Result<RankOneReport> {
    let kinds = map_paths(n_paths, config.seed, |_, seed| {
        Ok(simulate_rank_one(start, d, dprime, &config.with_seed(seed))?.hit.map(|h| h.kind))
    })?;
    let hit_zero = kinds.iter().filter(|k| **k == Some(HitKind::LowerBoundary)).count();
    let hit_one = kinds.iter().filter(|k| **k == Some(HitKind::UpperBoundary)).count();
    let n = n_paths.max(1) as f64;
    Ok(RankOneReport {
        d,
        dprime,
        start,
        n_paths,
        horizon: config.horizon,
        boundary_tol: config.boundary_tol,
        hit_zero,
        hit_one,
        hit_zero_fraction: hit_zero as f64 / n,
        hit_one_fraction: hit_one as f64 / n,
        wilson_zero: wilson_interval(hit_zero, n_paths),
    })
}

/// `h(phi) = prod_{alpha > 0} sin <alpha, phi>` over the reduced positive
/// roots `e_i`, `2 e_i`, `e_i +- e_j`.
pub fn h_function(phi: &AlcovePoint) -> f64 {
    h_product(phi.as_slice())
}

fn h_product(phi: &[f64]) -> f64 {
    let mut h = 1.0;
    for (i, &a) in phi.iter().enumerate() {
        h *= a.sin() * (2.0 * a).sin();
        for &b in &phi[i + 1..] {
            h *= (a - b).sin() * (a + b).sin();
        }
    }
    h
}

/// The same function in eigenvalue coordinates:
/// `2^m prod_i lambda_i sqrt(1 - lambda_i) V(lambda)`.
pub fn h_function_lambda(lam: &LambdaPoint) -> f64 {
    let x = lam.as_slice();
    let prod: f64 = x.iter().map(|&l| 2.0 * l * (1.0 - l).sqrt()).product();
    prod * vandermonde(x)
}

/// `-8 m^2 - m - 4 m (m - 1) (m - 2) / 3`.
pub fn appendix_constant(m: usize) -> f64 {
    let m = m as f64;
    -8.0 * m * m - m - 4.0 * m * (m - 1.0) * (m - 2.0) / 3.0
}

/// `Delta h / h = -8 m (m - 1) - 9 m - 4 m (m - 1) (m - 2) / 3 + sum_i 2 / lambda_i`
/// with `lambda_i = sin^2 phi_i`.
pub fn laplacian_ratio_closed_form(phi: &AlcovePoint) -> Result<f64> {
    let x = phi.as_slice();
    if let Some(i) = x.windows(2).position(|w| w[0] <= w[1]) {
        return Err(Error::Collision { i: i + 1, j: i + 2 });
    }
    let m = x.len() as f64;
    let lam = phi_to_lambda(phi);
    if lam.as_slice().iter().any(|&l| l <= 0.0 || l >= 1.0) {
        return Err(Error::SingularConfiguration { root: "boundary".into(), pairing: min_wall_value(x) });
    }
    let inv: f64 = lam.as_slice().iter().map(|l| 2.0 / l).sum();
    Ok(-8.0 * m * (m - 1.0) - 9.0 * m - 4.0 * m * (m - 1.0) * (m - 2.0) / 3.0 + inv)
}

/// Central second differences of `h` summed over coordinates, divided by `h`.
/// Requires every wall value to exceed `2 step`.
pub fn laplacian_ratio_finite_difference(phi: &AlcovePoint, step: f64) -> Result<f64> {
    let x = phi.as_slice();
    if !(step > 0.0 && min_wall_value(x) > 2.0 * step) {
        return Err(Error::Margin { step });
    }
    let h0 = h_product(x);
    let mut y = x.to_vec();
    let mut lap = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + step;
        let plus = h_product(&y);
        y[i] = x[i] - step;
        let minus = h_product(&y);
        y[i] = x[i];
        lap += (plus - 2.0 * h0 + minus) / (step * step);
    }
    Ok(lap / h0)
}

/// Richardson extrapolation `(4 L(step/2) - L(step)) / 3` of the
/// finite-difference ratio.
pub fn laplacian_ratio_richardson(phi: &AlcovePoint, step: f64) -> Result<f64> {
    let coarse = laplacian_ratio_finite_difference(phi, step)?;
    let fine = laplacian_ratio_finite_difference(phi, 0.5 * step)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `(2 sum_i lambda_i (1 - lambda_i) d_i^2 V, -(2 m (m-1) (m-2) / 3) V)`, with
/// `d_i^2 V = V [(sum_{j != i} 1/(lambda_i - lambda_j))^2 - sum_{j != i} 1/(lambda_i - lambda_j)^2]`.
pub fn vandermonde_identity_check(lam: &LambdaPoint) -> Result<(f64, f64)> {
    let x = lam.as_slice();
    if let Some(i) = x.windows(2).position(|w| w[0] == w[1]) {
        return Err(Error::Collision { i: i + 1, j: i + 2 });
    }
    let v = vandermonde(x);
    let m = x.len() as f64;
    let mut lhs = 0.0;
    for (i, &a) in x.iter().enumerate() {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (j, &b) in x.iter().enumerate() {
            if j != i {
                let d = 1.0 / (a - b);
                s1 += d;
                s2 += d * d;
            }
        }
        lhs += 2.0 * a * (1.0 - a) * v * (s1 * s1 - s2);
    }
    Ok((lhs, -(2.0 * m * (m - 1.0) * (m - 2.0) / 3.0) * v))
}

/// Residuals of the identity chain turning the eigenvalue SDE into the
/// angular drift, each scaled by the magnitude of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigResiduals {
    /// `beta (p - (p+q) sin^2 phi) / sin 2phi - cot 2phi = beta (p-q)/2 cot phi + (beta q - 1) cot 2phi`
    pub single_particle: f64,
    /// `sin 2phi_i = [cot u + cot v] sin u sin v`, `u = phi_i + phi_j`, `v = phi_i - phi_j`
    pub sine_factorisation: f64,
    /// `(sin^2 u + sin^2 v) / (2 sin 2phi_i sin u sin v) = (1 - cot u cot v)/(cot u + cot v) + (cot u + cot v)/2`
    pub pairwise_cot_form: f64,
    /// `(1 - cot u cot v)/(cot u + cot v) = -cot(u + v)`
    pub cot_addition: f64,
}

impl TrigResiduals {
    pub fn max(&self) -> f64 {
        self.single_particle.max(self.sine_factorisation).max(self.pairwise_cot_form).max(self.cot_addition)
    }
}

fn scaled(lhs: f64, rhs: f64, scale: f64) -> f64 {
    (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn trig_identity_residuals(phi_i: f64, phi_j: f64, beta: f64, p: f64, q: f64) -> TrigResiduals {
    let cot = |z: f64| 1.0 / z.tan();
    let (si, s2) = (phi_i.sin(), (2.0 * phi_i).sin());
    let t1 = beta * p / s2;
    let t2 = beta * (p + q) * si * si / s2;
    let t3 = cot(2.0 * phi_i);
    let r1 = beta * (p - q) / 2.0 * cot(phi_i);
    let r2 = (beta * q - 1.0) * cot(2.0 * phi_i);
    let single = scaled(t1 - t2 - t3, r1 + r2, t1.abs() + t2.abs() + t3.abs() + r1.abs() + r2.abs());

    let (u, v) = (phi_i + phi_j, phi_i - phi_j);
    let (cu, cv) = (cot(u), cot(v));
    let (su, sv) = (u.sin(), v.sin());
    let fa = cu * su * sv;
    let fb = cv * su * sv;
    let factor = scaled(s2, fa + fb, s2.abs() + fa.abs() + fb.abs());

    let lhs = (su * su + sv * sv) / (2.0 * s2 * su * sv);
    let a = (1.0 - cu * cv) / (cu + cv);
    let b = (cu + cv) / 2.0;
    let pair = scaled(lhs, a + b, lhs.abs() + a.abs() + b.abs());

    let add_scale = (1.0 + (cu * cv).abs()) / (cu + cv).abs() + cot(u + v).abs();
    let addition = scaled(a, -cot(u + v), add_scale);
    TrigResiduals { single_particle: single, sine_factorisation: factor, pairwise_cot_form: pair, cot_addition: addition }
}

/// Uniform point of the open alcove whose wall values all exceed `margin`.
pub fn random_interior_point(m: usize, margin: f64, rng: &mut PathRng) -> AlcovePoint {
    loop {
        let mut v: Vec<f64> = (0..m).map(|_| FRAC_PI_2 * rng.uniform()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if min_wall_value(&v) > margin {
            return AlcovePoint::new(v).expect("sorted point inside the alcove");
        }
    }
}

fn random_params(m: usize, rng: &mut PathRng) -> ModelParams {
    let beta = 0.2 + 4.0 * rng.uniform();
    let shift = m as f64 - 1.0;
    let p = shift + 0.05 + 6.0 * rng.uniform();
    let q = shift + 0.05 + 6.0 * rng.uniform();
    ModelParams::new(beta, p, q, m).expect("positive parameters")
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Largest relative discrepancy between the root-sum and explicit drifts.
pub fn drift_cross_oracle_error(m: usize, n_points: usize, seed: u64) -> Result<f64> {
    let mut rng = PathRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_points {
        let params = random_params(m, &mut rng);
        let mult = params.multiplicities();
        let phi = random_interior_point(m, 1e-6, &mut rng);
        let a = drift_root_sum_tol(phi.as_slice(), &mult, 0.0)?;
        let b = drift_explicit_tol(phi.as_slice(), &mult, 0.0)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(rel_err(*x, *y));
        }
    }
    Ok(worst)
}

/// Largest discrepancy in `b(C(phi); q, p) = -rev(b(phi; p, q))`, where `C`
/// is the complement map.
pub fn complement_equivariance_error(m: usize, n_points: usize, seed: u64) -> Result<f64> {
    let mut rng = PathRng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_points {
        let params = random_params(m, &mut rng);
        let phi = random_interior_point(m, 1e-6, &mut rng);
        let a = drift_explicit_tol(phi.as_slice(), &params.multiplicities(), 0.0)?;
        let c = complement_slice(phi.as_slice());
        let b = drift_explicit_tol(&c, &params.swapped().multiplicities(), 0.0)?;
        for (x, y) in a.iter().rev().zip(&b) {
            worst = worst.max(rel_err(-x, *y));
        }
    }
    Ok(worst)
}

/// Largest discrepancy between the angular drift obtained from the
/// eigenvalue SDE by Ito's formula and the explicit angular drift.
pub fn ito_chain_error(m: usize, n_points: usize, seed: u64) -> Result<f64> {
    let mut rng = PathRng::new(seed);
    let mut worst: f64 = 0.0;
    let mut lam_drift = vec![0.0; m];
    for _ in 0..n_points {
        let params = random_params(m, &mut rng);
        let phi = random_interior_point(m, 1e-3, &mut rng);
        let lam = phi_to_lambda(&phi);
        crate::dynamics::lambda_drift(lam.as_slice(), &params, &mut lam_drift)
            .map_err(|i| Error::Collision { i: i + 1, j: i + 2 })?;
        let b = drift_explicit_tol(phi.as_slice(), &params.multiplicities(), 0.0)?;
        for (i, &f) in phi.as_slice().iter().enumerate() {
            // d phi = d lambda / sin 2phi - cot 2phi dt
            let via_ito = lam_drift[i] / (2.0 * f).sin() - 1.0 / (2.0 * f).tan();
            let scale = (lam_drift[i] / (2.0 * f).sin()).abs().max(b[i].abs()).max(1.0);
            worst = worst.max((via_ito - b[i]).abs() / scale);
        }
    }
    Ok(worst)
}

/// Largest entry of `|G - I|` for the Gram matrix of degrees `0..=max_degree`.
pub fn orthonormality_error(r: f64, s: f64, max_degree: usize, quad_nodes: usize) -> Result<f64> {
    let basis = build_basis(r, s, max_degree)?;
    let rule = QuadRule::tanh_sinh_beta(r, s, quad_nodes);
    let norm = (-statrs::function::beta::ln_beta(r + 1.0, s + 1.0)).exp();
    let n = max_degree + 1;
    let mut gram = vec![0.0; n * n];
    let mut vals = vec![0.0; n];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        basis.fill_values(x, &mut vals);
        for a in 0..n {
            let wa = w * norm * vals[a];
            for b in a..n {
                gram[a * n + b] += wa * vals[b];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a..n {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gram[a * n + b] - target).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::Lt => value < threshold,
            Relation::Le => value <= threshold,
            Relation::Gt => value > threshold,
            Relation::Ge => value >= threshold,
        };
        Self { name: name.into(), value, relation, threshold, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hitting: Vec<HittingReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rank_one: Vec<RankOneReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub density: Vec<DensityComparison>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self { suite: suite.into(), passed: true, checks: Vec::new(), hitting: Vec::new(), rank_one: Vec::new(), density: Vec::new() }
    }

    fn push(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Deterministic identities: drift oracles, the trigonometric chain,
/// orthonormality, the univariate semigroup and the `beta = 2` cross-form.
pub fn run_identities(seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("identities");
    let mut worst: f64 = 0.0;
    for m in 1..=5 {
        worst = worst.max(drift_cross_oracle_error(m, 1000, seed ^ m as u64)?);
    }
    report.push(Check::new("drift_root_sum_vs_explicit", worst, Relation::Le, 1e-10));
    let mut worst: f64 = 0.0;
    for m in 1..=5 {
        worst = worst.max(complement_equivariance_error(m, 200, seed ^ (m as u64) << 8)?);
    }
    report.push(Check::new("complement_equivariance", worst, Relation::Le, 1e-10));

    let mut rng = PathRng::new(seed ^ 0x7219);
    let mut acc = [0.0f64; 4];
    for _ in 0..10_000 {
        let phi = random_interior_point(2, 1e-3, &mut rng);
        let params = random_params(2, &mut rng);
        let (a, b) = (phi.as_slice()[0], phi.as_slice()[1]);
        let r = trig_identity_residuals(a, b, params.beta, params.p, params.q);
        let vals = [r.single_particle, r.sine_factorisation, r.pairwise_cot_form, r.cot_addition];
        for (slot, v) in acc.iter_mut().zip(vals) {
            *slot = slot.max(v);
        }
    }
    for (name, v) in ["trig_single_particle", "trig_sine_factorisation", "trig_pairwise_cot_form", "trig_cot_addition"]
        .iter()
        .zip(acc)
    {
        report.push(Check::new(*name, v, Relation::Le, 1e-12));
    }
    let mut worst: f64 = 0.0;
    for m in 1..=4 {
        worst = worst.max(ito_chain_error(m, 500, seed ^ 0xA5 ^ m as u64)?);
    }
    report.push(Check::new("ito_change_of_variables", worst, Relation::Le, 1e-10));

    let grid = [-0.85, 0.5, 10.0];
    let mut worst: f64 = 0.0;
    for &r in &grid {
        for &s in &grid {
            worst = worst.max(orthonormality_error(r, s, 30, 1601)?);
        }
    }
    report.push(Check::new("orthonormality_degree_30", worst, Relation::Le, 1e-10));

    let u = univariate_checks(seed)?;
    report.push(Check::new("univariate_normalisation", u.normalisation, Relation::Le, 1e-8));
    report.push(Check::new("univariate_chapman_kolmogorov", u.chapman_kolmogorov, Relation::Le, 1e-8));
    report.push(Check::new("univariate_reversibility", u.reversibility, Relation::Le, 1e-12));

    let mut worst: f64 = 0.0;
    for r in [0.0, 0.5] {
        worst = worst.max(km_partition_agreement(r, 0.5, 14, 12, 25, seed)?);
    }
    report.push(Check::new("km_vs_partition_sum", worst, Relation::Le, 1e-8));
    report.push(Check::new("exponent_bookkeeping", exponent_bookkeeping_error(8, 3), Relation::Le, 1e-12));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateChecks {
    pub normalisation: f64,
    pub chapman_kolmogorov: f64,
    pub reversibility: f64,
}

/// Normalisation over several `(theta, t, r, s)`, Chapman–Kolmogorov at
/// `t = s = 0.3` with `r = s = 1/2`, and reversibility against `W`.
pub fn univariate_checks(seed: u64) -> Result<UnivariateChecks> {
    let mut rng = PathRng::new(seed ^ 0xC4);
    let mut normalisation: f64 = 0.0;
    for (r, s) in [(0.0, 0.0), (0.5, 0.5), (-0.7, 2.0), (3.0, -0.4)] {
        let basis = build_basis(r, s, 80)?;
        for t in [0.05, 0.3, 1.0] {
            let theta = 0.02 + 0.96 * rng.uniform();
            let n = default_truncation(t);
            let total = integrate_against_weight(r, s, 1601, |l| kernel_value(theta, l, t, &basis, n));
            normalisation = normalisation.max((total - 1.0).abs());
        }
    }

    let basis = build_basis(0.5, 0.5, 80)?;
    let n = 60;
    let mut ck: f64 = 0.0;
    for _ in 0..5 {
        let theta = 0.02 + 0.96 * rng.uniform();
        let lam = 0.02 + 0.96 * rng.uniform();
        let direct = univariate_density(theta, lam, 0.6, &basis, n)?.value;
        let composed = integrate_against_weight(0.5, 0.5, 1601, |mu| {
            kernel_value(theta, mu, 0.3, &basis, n) * kernel_value(mu, lam, 0.3, &basis, n)
        }) * basis.weight(lam);
        ck = ck.max((direct - composed).abs() / direct.abs().max(1.0));
    }

    let mut rev: f64 = 0.0;
    for (r, s) in [(0.5, 0.5), (-0.5, 1.5), (4.0, 0.0)] {
        let basis = build_basis(r, s, 60)?;
        for _ in 0..20 {
            let theta = 0.01 + 0.98 * rng.uniform();
            let lam = 0.01 + 0.98 * rng.uniform();
            let t = 0.05 + rng.uniform();
            let n = default_truncation(t);
            let a = univariate_density(theta, lam, t, &basis, n)?.value * basis.weight(theta);
            let b = univariate_density(lam, theta, t, &basis, n)?.value * basis.weight(lam);
            rev = rev.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    Ok(UnivariateChecks { normalisation, chapman_kolmogorov: ck, reversibility: rev })
}

/// `p_t(theta, lambda) / W(lambda)`; zero at nodes rounded onto the endpoints.
fn kernel_value(theta: f64, lam: f64, t: f64, basis: &crate::orthopoly::JacobiBasis, n: usize) -> f64 {
    if !(lam > 0.0 && lam < 1.0) {
        return 0.0;
    }
    match univariate_density(theta, lam, t, basis, n) {
        Ok(d) => d.value / basis.weight(lam),
        Err(_) => 0.0,
    }
}

/// Largest relative gap between the Karlin–McGregor and partition-sum
/// densities at `m = 2`, `r = s`, over random pairs with gaps at least 0.05.
pub fn km_partition_agreement(r: f64, t: f64, order: usize, cutoff: usize, n_pairs: usize, seed: u64) -> Result<f64> {
    let basis = build_basis(r, r, order.max(cutoff + 1))?;
    let mut rng = PathRng::new(seed ^ 0x4B4D);
    let mut draw = || loop {
        let a = 0.02 + 0.96 * rng.uniform();
        let b = 0.02 + 0.96 * rng.uniform();
        if (a - b).abs() > 0.05 {
            return LambdaPoint::from_unsorted(vec![a, b]).expect("unit interval");
        }
    };
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let theta = draw();
        let lam = draw();
        let km = crate::semigroup::km_density_beta2(&theta, &lam, t, &basis, order)?.value;
        let ps = partition_sum_density_beta2(&theta, &lam, t, &basis, cutoff)?.value;
        worst = worst.max((km - ps).abs() / km.abs().max(ps.abs()).max(1e-300));
    }
    Ok(worst)
}

/// Largest `|sum n_i (n_i + r + s + 1) + c/2 - r_tau|` over partitions with
/// `tau_1 <= max_part`, `m <= max_m` and a few `(r, s)`, in floating point.
pub fn exponent_bookkeeping_error(max_part: usize, max_m: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 1..=max_m {
        for (r, s) in [(0.0, 0.0), (0.5, 0.5), (1.0, 3.0)] {
            let c = km_constant(m, r, s);
            for tau in partitions_up_to(m, max_part) {
                let lhs: f64 = tau.shifted().iter().map(|&n| n as f64 * (n as f64 + r + s + 1.0)).sum::<f64>() + c / 2.0;
                let rhs = tau_eigenvalue(&tau, r, s, 2.0);
                worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1.0));
            }
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixOptions {
    /// Largest `m` for the finite-difference comparison.
    pub fd_max_m: usize,
    /// Largest `m` for the lower bound and the Vandermonde identity.
    pub bound_max_m: usize,
    pub n_points: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for AppendixOptions {
    fn default() -> Self {
        Self { fd_max_m: 3, bound_max_m: 4, n_points: 10_000, step: 1e-4, seed: 0 }
    }
}

/// Wall margin for the finite-difference comparison; closer to a wall the
/// ratio is dominated by rounding in `h`.
pub const FD_MARGIN: f64 = 0.05;

pub fn run_appendix(opts: &AppendixOptions) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("appendix");
    let mut rng = PathRng::new(opts.seed ^ 0xAB);

    let spot = laplacian_ratio_closed_form(&AlcovePoint::new(vec![PI / 4.0])?)?;
    report.push(Check::new("m1_spot_value_error", (spot + 5.0).abs(), Relation::Le, 1e-12));

    let mut fd_err: f64 = 0.0;
    let mut rich_err: f64 = 0.0;
    for m in 1..=opts.fd_max_m {
        for _ in 0..200 {
            let phi = random_interior_point(m, FD_MARGIN, &mut rng);
            let exact = laplacian_ratio_closed_form(&phi)?;
            let scale = exact.abs().max(1.0);
            fd_err = fd_err.max((laplacian_ratio_finite_difference(&phi, opts.step)? - exact).abs() / scale);
            rich_err = rich_err.max((laplacian_ratio_richardson(&phi, 1e-2)? - exact).abs() / scale);
        }
    }
    report.push(Check::new("finite_difference_relative_error", fd_err, Relation::Le, 1e-4));
    report.push(Check::new("richardson_relative_error", rich_err, Relation::Le, 1e-6));

    let mut forms: f64 = 0.0;
    for m in 1..=opts.bound_max_m {
        let c = appendix_constant(m);
        let (mut lo, mut hi, mut min_excess) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..opts.n_points {
            let phi = random_interior_point(m, 0.0, &mut rng);
            let ratio = laplacian_ratio_closed_form(&phi)?;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            min_excess = min_excess.min(ratio - c);
        }
        // near the upper corner both forms lose digits (cos phi_1, and
        // lambda_i - lambda_j ~ sin(2 phi) (phi_i - phi_j)), so
        // compare them away from the walls
        for _ in 0..1000 {
            let phi = random_interior_point(m, FD_MARGIN, &mut rng);
            let a = h_function(&phi);
            let b = h_function_lambda(&phi_to_lambda(&phi));
            forms = forms.max((a - b).abs() / a.abs().max(b.abs()));
        }
        report.push(Check::new(format!("bound_excess_m{m}"), min_excess, Relation::Gt, 0.0));
        report.push(Check::new(format!("ratio_spread_m{m}"), hi - lo, Relation::Gt, 1.0));
    }
    report.push(Check::new("h_product_vs_lambda_form", forms, Relation::Le, 1e-12));

    let mut vdm: f64 = 0.0;
    for m in 2..=opts.bound_max_m {
        for _ in 0..1000 {
            let phi = random_interior_point(m, 1e-3, &mut rng);
            let lam = phi_to_lambda(&phi);
            let (lhs, rhs) = vandermonde_identity_check(&lam)?;
            let scale = vandermonde_scale(lam.as_slice());
            vdm = vdm.max((lhs - rhs).abs() / scale);
        }
    }
    report.push(Check::new("vandermonde_identity", vdm, Relation::Le, 1e-10));
    Ok(report)
}

/// `sum_i 2 lambda_i (1 - lambda_i) |d_i^2 V| + |V|`, the size of the terms
/// in the Vandermonde identity.
fn vandermonde_scale(x: &[f64]) -> f64 {
    let v = vandermonde(x);
    let mut scale = v.abs();
    for (i, &a) in x.iter().enumerate() {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (j, &b) in x.iter().enumerate() {
            if j != i {
                s1 += 1.0 / (a - b);
                s2 += 1.0 / ((a - b) * (a - b));
            }
        }
        scale += 2.0 * a * (1.0 - a) * (v * (s1 * s1 + s2)).abs();
    }
    scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HittingPreset {
    /// The six cells of the finiteness criterion at `m = 2` plus the
    /// complement-duality comparisons.
    ThresholdGrid,
    /// Lower-wall fraction across `p` at `beta = 1`.
    Monotonicity,
    /// Rank-one classification at `d = 1` and `d = 3`.
    RankOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingOptions {
    pub preset: HittingPreset,
    pub n_paths: usize,
    pub epsilon_hit: f64,
    pub horizon: f64,
    pub dt: f64,
    pub boundary_tol: f64,
    pub seed: u64,
}

impl Default for HittingOptions {
    fn default() -> Self {
        Self {
            preset: HittingPreset::ThresholdGrid,
            n_paths: 500,
            epsilon_hit: 1e-3,
            horizon: 10.0,
            dt: 1e-4,
            boundary_tol: 1e-9,
            seed: 0,
        }
    }
}

fn cell_name(r: &HittingReport) -> String {
    let kind = match r.kind {
        HitKind::Collision => "collision",
        HitKind::LowerBoundary => "lower",
        HitKind::UpperBoundary => "upper",
    };
    format!("{kind}_beta{}_p{}_q{}", r.params.beta, r.params.p, r.params.q)
}

fn within_se(a: &HittingReport, b: &HittingReport) -> f64 {
    let se = (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt();
    let diff = (a.hit_fraction - b.hit_fraction).abs();
    if se == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        diff / se
    }
}

pub fn run_hitting(opts: &HittingOptions) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("hitting");
    let cfg = SimConfig {
        dt: opts.dt,
        horizon: opts.horizon,
        seed: opts.seed,
        boundary_tol: opts.boundary_tol,
        ..SimConfig::default()
    };
    let cell = |kind: HitKind, beta: f64, p: f64, q: f64| -> Result<HittingReport> {
        let params = ModelParams::new(beta, p, q, 2)?;
        let centre = AlcovePoint::centre(2);
        let start = if kind == HitKind::UpperBoundary { complement(&centre) } else { centre };
        estimate_hitting_from(kind, &start, &params, &cfg, opts.epsilon_hit, opts.n_paths)
    };
    match opts.preset {
        HittingPreset::ThresholdGrid => {
            let c_low = cell(HitKind::Collision, 0.5, 4.0, 4.0)?;
            let c_high = cell(HitKind::Collision, 2.0, 4.0, 4.0)?;
            let l_in = cell(HitKind::LowerBoundary, 1.0, 1.6, 4.0)?;
            let l_out = cell(HitKind::LowerBoundary, 1.0, 4.0, 4.0)?;
            let u_in = cell(HitKind::UpperBoundary, 1.0, 4.0, 1.6)?;
            let u_out = cell(HitKind::UpperBoundary, 1.0, 4.0, 4.0)?;
            report.push(Check::new(cell_name(&c_low), c_low.hit_fraction, Relation::Gt, HIT_THRESHOLD));
            report.push(Check::new(cell_name(&c_high), c_high.hit_fraction, Relation::Le, 0.0));
            report.push(Check::new(cell_name(&l_in), l_in.hit_fraction, Relation::Gt, HIT_THRESHOLD));
            report.push(Check::new(cell_name(&l_out), l_out.hit_fraction, Relation::Lt, NO_HIT_THRESHOLD));
            report.push(Check::new("duality_se_p1.6", within_se(&u_in, &l_in), Relation::Le, 3.0));
            report.push(Check::new("duality_se_p4", within_se(&u_out, &l_out), Relation::Le, 3.0));
            report.hitting = vec![c_low, c_high, l_in, l_out, u_in, u_out];
        }
        HittingPreset::Monotonicity => {
            let ps = [1.2, 1.6, 2.4, 3.5];
            let mut cells = Vec::new();
            for &p in &ps {
                cells.push(cell(HitKind::LowerBoundary, 1.0, p, 4.0)?);
            }
            for w in cells.windows(2) {
                // an increase is tolerated up to two standard errors
                let se = (w[0].standard_error.powi(2) + w[1].standard_error.powi(2)).sqrt();
                let excess = w[1].hit_fraction - w[0].hit_fraction - 2.0 * se;
                report.push(Check::new(format!("monotone_p{}_to_p{}", w[0].params.p, w[1].params.p), excess, Relation::Le, 0.0));
            }
            report.hitting = cells;
        }
        HittingPreset::RankOne => {
            let rcfg = SimConfig { horizon: 5.0, boundary_tol: 1e-12, ..cfg };
            let n = opts.n_paths.max(1000);
            let d1 = estimate_rank_one_hitting(1.0, 3.0, 0.5, &rcfg, n)?;
            let d3 = estimate_rank_one_hitting(3.0, 3.0, 0.5, &rcfg, n)?;
            report.push(Check::new("rank_one_d1_hit_zero", d1.hit_zero_fraction, Relation::Gt, 0.5));
            report.push(Check::new("rank_one_d3_hits", (d3.hit_zero + d3.hit_one) as f64, Relation::Le, 0.0));
            report.rank_one = vec![d1, d3];
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub params: ModelParams,
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub quad_nodes: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            params: ModelParams { beta: 2.0, p: 4.0, q: 3.0, m: 2 },
            n_paths: 2000,
            horizon: 3.0,
            dt: 1e-3,
            seed: 0,
            quad_nodes: 301,
        }
    }
}

/// Moments `E[sum lambda_i]`, `E[sum lambda_i^2]` of a long-horizon ensemble
/// against quadrature moments of the normalised stationary density.
pub fn run_stationary(opts: &StationaryOptions) -> Result<SuiteReport> {
    let params = &opts.params;
    let mut report = SuiteReport::new("stationary");
    let cfg = SimConfig { dt: opts.dt, horizon: opts.horizon, seed: opts.seed, ..SimConfig::default() };
    let start = AlcovePoint::centre(params.m);
    let finals = map_paths(opts.n_paths, opts.seed, |_, seed| terminal_lambda(&start, params, &cfg.with_seed(seed)))?;
    let stats = |f: &dyn Fn(&[f64]) -> f64| {
        let vals: Vec<f64> = finals.iter().map(|x| f(x)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    };
    let first = |x: &[f64]| x.iter().sum::<f64>();
    let second = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    for (name, f) in [("sum_lambda", &first as &dyn Fn(&[f64]) -> f64), ("sum_lambda_sq", &second)] {
        let (mean, se) = stats(f);
        let exact = stationary_expectation(params, opts.quad_nodes, f)?;
        report.push(Check::new(format!("moment_{name}_se"), (mean - exact).abs() / se, Relation::Le, 3.0));
    }
    if params.m == 1 {
        let e = params.exponents()?;
        let mut xs: Vec<f64> = finals.iter().map(|x| x[0]).collect();
        let ks = ks_distance(&mut xs, |x| statrs::function::beta::beta_reg(e.r + 1.0, e.s + 1.0, x.clamp(0.0, 1.0)));
        let crit = 1.628 / (xs.len() as f64).sqrt();
        report.push(Check::new("ks_vs_beta_law", ks, Relation::Lt, crit));
    }
    Ok(report)
}

/// Kolmogorov–Smirnov distance of the sample against `cdf`; sorts `xs`.
pub fn ks_distance(xs: &mut [f64], mut cdf: impl FnMut(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k as f64 + 1.0) / n - f).max(f - k as f64 / n);
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramCell {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    KolmogorovSmirnov,
    L1Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    pub params: ModelParams,
    pub t: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub start: Vec<f64>,
    pub statistic: DistanceKind,
    pub distance: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Total model mass of the histogram cells (m = 2 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<HistogramCell>,
}

pub const KS_THRESHOLD: f64 = 0.01;
pub const L1_THRESHOLD: f64 = 0.1;
pub const HISTOGRAM_BINS: usize = 20;

/// Compares the law of `lambda(t)` from simulated angular paths with the
/// closed-form density. `m = 1` uses the Kolmogorov–Smirnov distance to the
/// series CDF; `m = 2` with `beta = 2` uses the L1 distance between a
/// `20 x 20` histogram of the ordered pair and the cell masses of the
/// Karlin–McGregor density. `config.horizon` is replaced by `t`.
pub fn density_vs_simulation(
    params: &ModelParams,
    t: f64,
    n_paths: usize,
    start: &LambdaPoint,
    config: &SimConfig,
) -> Result<DensityComparison> {
    if !params.strong_regime() {
        return Err(Error::Unsupported("density comparison needs the strong regime".into()));
    }
    if !(params.m == 1 || (params.m == 2 && params.beta == 2.0)) {
        return Err(Error::Unsupported(format!(
            "closed-form densities are available for m = 1 or (m = 2, beta = 2), got m = {}, beta = {}",
            params.m, params.beta
        )));
    }
    if start.dim() != params.m {
        return Err(Error::InvalidParameter("start dimension differs from m".into()));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    let cfg = SimConfig { horizon: t, ..config.clone() };
    cfg.validate()?;
    let phi0 = crate::coords::lambda_to_phi(start);
    let finals = map_paths(n_paths, cfg.seed, |_, seed| terminal_lambda(&phi0, params, &cfg.with_seed(seed)))?;
    let e = params.exponents()?;
    let order = default_truncation(t);
    let basis = build_basis(e.r, e.s, order)?;
    let theta = start.as_slice();
    let base = DensityComparison {
        params: *params,
        t,
        n_paths,
        dt: cfg.dt,
        start: theta.to_vec(),
        statistic: DistanceKind::KolmogorovSmirnov,
        distance: 0.0,
        threshold: KS_THRESHOLD,
        passed: false,
        model_mass: None,
        cells: Vec::new(),
    };
    if params.m == 1 {
        let mut xs: Vec<f64> = finals.iter().map(|x| x[0]).collect();
        let mut err = None;
        let d = ks_distance(&mut xs, |x| match univariate_cdf(theta[0], x, t, &basis, order) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        return Ok(DensityComparison { distance: d, passed: d < KS_THRESHOLD, ..base });
    }

    let bins = HISTOGRAM_BINS;
    let mut counts = vec![0usize; bins * bins];
    let bin = |x: f64| ((x * bins as f64).floor() as usize).min(bins - 1);
    for x in &finals {
        let (i, j) = (bin(x[0]), bin(x[1]));
        counts[i.max(j) * bins + i.min(j)] += 1;
    }
    let (gx, gw) = crate::orthopoly::gauss_legendre(8);
    let width = 1.0 / bins as f64;
    let mut cells = Vec::new();
    let mut l1 = 0.0;
    let mut mass = 0.0;
    for i in 0..bins {
        for j in 0..=i {
            let mut integral = 0.0;
            for (a, wa) in gx.iter().zip(&gw) {
                for (b, wb) in gx.iter().zip(&gw) {
                    let x = (i as f64 + a) * width;
                    let y = (j as f64 + b) * width;
                    if x != y {
                        integral += wa * wb * km_unchecked(theta, &[x, y], t, &basis, order).value;
                    }
                }
            }
            integral *= width * width;
            if i == j {
                integral *= 0.5;
            }
            let empirical = counts[i * bins + j] as f64 / n_paths as f64;
            l1 += (empirical - integral).abs();
            mass += integral;
            cells.push(HistogramCell { i, j, empirical, model: integral });
        }
    }
    Ok(DensityComparison {
        statistic: DistanceKind::L1Histogram,
        distance: l1,
        threshold: L1_THRESHOLD,
        passed: l1 < L1_THRESHOLD,
        model_mass: Some(mass),
        cells,
        ..base
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    pub m: usize,
    pub t: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        Self { m: 1, t: 0.5, n_paths: 100_000, dt: 1e-4, seed: 0 }
    }
}

/// Runs [`density_vs_simulation`] at `r = s = 0` (`beta = 2`, `p = q = m`)
/// from the alcove centre.
pub fn run_density_vs_sim(opts: &DensityOptions) -> Result<SuiteReport> {
    let m = opts.m as f64;
    let params = ModelParams::new(2.0, m, m, opts.m)?;
    let start = phi_to_lambda(&AlcovePoint::centre(opts.m));
    let cfg = SimConfig { dt: opts.dt, seed: opts.seed, ..SimConfig::default() };
    let cmp = density_vs_simulation(&params, opts.t, opts.n_paths, &start, &cfg)?;
    let mut report = SuiteReport::new("density-vs-sim");
    let name = match cmp.statistic {
        DistanceKind::KolmogorovSmirnov => "ks_distance",
        DistanceKind::L1Histogram => "l1_distance",
    };
    report.push(Check::new(name, cmp.distance, Relation::Lt, cmp.threshold));
    report.density.push(cmp);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (5, 10), (10, 10), (3, 500)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
        let (lo, hi) = wilson_interval(50, 100);
        assert_relative_eq!(lo + hi, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn expectations_follow_thresholds() {
        let p = |b, p, q| ModelParams::new(b, p, q, 2).unwrap();
        assert_eq!(expected_hitting(HitKind::Collision, &p(0.5, 4.0, 4.0)), Expectation::Hit);
        assert_eq!(expected_hitting(HitKind::Collision, &p(2.0, 4.0, 4.0)), Expectation::NoHit);
        assert_eq!(expected_hitting(HitKind::LowerBoundary, &p(1.0, 1.6, 4.0)), Expectation::Hit);
        assert_eq!(expected_hitting(HitKind::LowerBoundary, &p(1.0, 4.0, 4.0)), Expectation::NoHit);
        assert_eq!(expected_hitting(HitKind::UpperBoundary, &p(1.0, 4.0, 1.6)), Expectation::Hit);
        assert_eq!(expected_hitting(HitKind::LowerBoundary, &p(1.0, 0.5, 4.0)), Expectation::Unknown);
    }

    #[test]
    fn h_spot_values() {
        let a = AlcovePoint::new(vec![PI / 4.0]).unwrap();
        assert_relative_eq!(h_function(&a), 2f64.sqrt() / 2.0, epsilon = 1e-15);
        for wall in [vec![0.5, 0.5], vec![0.7, 0.0], vec![FRAC_PI_2, 0.3]] {
            assert!(h_function(&AlcovePoint::new(wall).unwrap()).abs() < 1e-15);
        }
        let phi = AlcovePoint::new(vec![1.2, 0.7, 0.2]).unwrap();
        assert_relative_eq!(h_function(&phi), h_function_lambda(&phi_to_lambda(&phi)), max_relative = 1e-12);
    }

    #[test]
    fn laplacian_spot_values() {
        let a = AlcovePoint::new(vec![PI / 4.0]).unwrap();
        assert_relative_eq!(laplacian_ratio_closed_form(&a).unwrap(), -5.0, epsilon = 1e-12);
        assert_relative_eq!(laplacian_ratio_finite_difference(&a, 1e-4).unwrap(), -5.0, epsilon = 1e-5);
        let small = AlcovePoint::new(vec![1e-4]).unwrap();
        assert!(laplacian_ratio_closed_form(&small).unwrap() > 1e7);
        assert_eq!(appendix_constant(2), -34.0);
        assert!(matches!(laplacian_ratio_finite_difference(&AlcovePoint::new(vec![1e-4]).unwrap(), 1e-4), Err(Error::Margin { .. })));
        assert!(matches!(laplacian_ratio_closed_form(&AlcovePoint::new(vec![0.5, 0.5]).unwrap()), Err(Error::Collision { .. })));
    }

    #[test]
    fn vandermonde_spot_values() {
        let (l, r) = vandermonde_identity_check(&LambdaPoint::new(vec![0.8, 0.3]).unwrap()).unwrap();
        assert!(l.abs() < 1e-15 && r == 0.0);
        let (l, r) = vandermonde_identity_check(&LambdaPoint::new(vec![0.8, 0.5, 0.2]).unwrap()).unwrap();
        assert_relative_eq!(l, r, epsilon = 1e-12);
        assert!(vandermonde_identity_check(&LambdaPoint::new(vec![0.5, 0.5]).unwrap()).is_err());
    }

    #[test]
    fn trig_residuals_are_small() {
        let r = trig_identity_residuals(1.1, 0.4, 1.3, 3.0, 2.2);
        assert!(r.max() < 1e-14, "{r:?}");
    }

    #[test]
    fn ks_distance_of_grid() {
        let mut xs: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        assert_relative_eq!(ks_distance(&mut xs, |x| x), 0.005, epsilon = 1e-12);
    }

    #[test]
    fn short_hitting_runs() {
        let params = ModelParams::new(0.5, 4.0, 4.0, 2).unwrap();
        let cfg = SimConfig { dt: 1e-3, horizon: 0.5, seed: 3, ..SimConfig::default() };
        let a = estimate_hitting(HitKind::Collision, &params, &cfg, 1e-2, 20).unwrap();
        let b = estimate_hitting(HitKind::Collision, &params, &cfg, 1e-2, 20).unwrap();
        assert_eq!(a, b);
        assert!(a.wilson_interval.0 <= a.hit_fraction && a.hit_fraction <= a.wilson_interval.1);
        assert!(estimate_hitting(HitKind::Collision, &params, &cfg, 1e-12, 20).is_err());
    }
}
