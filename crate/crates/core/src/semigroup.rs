//! Closed-form densities: the stationary weight `W_m^{r,s,beta}`, the
//! univariate transition density as a bilinear Jacobi series, and the
//! `beta = 2` transition density in Karlin–McGregor and partition-sum form.
//!
//! Spectral factors use the decaying convention `exp(-2 n (n + r + s + 1) t)`.
//! All `beta = 2` densities are with respect to Lebesgue measure on the
//! ordered simplex `lambda_1 > ... > lambda_m`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::coords::LambdaPoint;
use crate::error::{Error, Result};
use crate::linalg::{det_in_place, min_gap, vandermonde};
use crate::orthopoly::{JacobiBasis, QuadRule};
use crate::roots::ModelParams;

/// Gap below which determinant densities are flagged as ill-conditioned.
pub const ILL_CONDITIONED_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEvaluation {
    pub value: f64,
    pub truncation_order: usize,
    /// Estimate of the absolute contribution of the dropped terms.
    pub tail_bound: f64,
    #[serde(default)]
    pub ill_conditioned: bool,
}

impl DensityEvaluation {
    /// Errors with [`Error::Truncation`] if the tail estimate exceeds `tol`.
    pub fn within(self, tol: f64) -> Result<Self> {
        if self.tail_bound > tol {
            return Err(Error::Truncation { tail: self.tail_bound, tolerance: tol });
        }
        Ok(self)
    }
}

/// Series truncation `ceil(sqrt(20 / t)) + 10`.
pub fn default_truncation(t: f64) -> usize {
    (20.0 / t).sqrt().ceil() as usize + 10
}

/// Partition cutoff `N - m` matching [`default_truncation`].
pub fn default_partition_cutoff(t: f64, m: usize) -> usize {
    default_truncation(t).saturating_sub(m)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(format!("{parts:?} is not weakly decreasing")));
        }
        Ok(Self { parts })
    }

    pub fn zero(m: usize) -> Self {
        Self { parts: vec![0; m] }
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Shifted indices `n_i = tau_i + m - i` (1-based `i`), strictly decreasing.
    pub fn shifted(&self) -> Vec<usize> {
        let m = self.parts.len();
        self.parts.iter().enumerate().map(|(i, &t)| t + m - 1 - i).collect()
    }
}

/// All partitions with `m` parts and `tau_1 <= cutoff`, in lexicographic order.
pub fn partitions_up_to(m: usize, cutoff: usize) -> Vec<Partition> {
    fn rec(prefix: &mut Vec<usize>, m: usize, max: usize, out: &mut Vec<Partition>) {
        if prefix.len() == m {
            out.push(Partition { parts: prefix.clone() });
            return;
        }
        for v in 0..=max {
            prefix.push(v);
            rec(prefix, m, v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(m), m, cutoff, &mut out);
    out
}

/// `r_tau^beta = sum_i tau_i (tau_i + r + s + 1 + beta (m - i))`.
pub fn tau_eigenvalue(tau: &Partition, r: f64, s: f64, beta: f64) -> f64 {
    let m = tau.len();
    tau.parts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let t = t as f64;
            t * (t + r + s + 1.0 + beta * (m - 1 - i) as f64)
        })
        .sum()
}

/// `c = -m (m - 1) (2 (m - 2) / 3 + (d + d') / 2)` with `d = 2 (r + 1)`,
/// `d' = 2 (s + 1)`.
pub fn km_constant(m: usize, r: f64, s: f64) -> f64 {
    let m = m as f64;
    -m * (m - 1.0) * (2.0 * (m - 2.0) / 3.0 + (r + s + 2.0))
}

pub fn km_constant_c(params: &ModelParams) -> Result<f64> {
    let e = params.exponents()?;
    Ok(km_constant(params.m, e.r, e.s))
}

/// `sum_i [r log lambda_i + s log(1 - lambda_i)] + beta sum_{i<j} log|lambda_i - lambda_j|`,
/// or `-inf` on the boundary of the simplex or at a collision.
pub fn stationary_log_density_unnormalized(lam: &LambdaPoint, params: &ModelParams) -> Result<f64> {
    let e = params.exponents()?;
    Ok(log_weight(lam.as_slice(), e.r, e.s, params.beta))
}

fn log_weight(x: &[f64], r: f64, s: f64, beta: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &a) in x.iter().enumerate() {
        if a <= 0.0 || a >= 1.0 {
            return f64::NEG_INFINITY;
        }
        acc += r * a.ln() + s * (1.0 - a).ln();
        for &b in &x[i + 1..] {
            if a == b {
                return f64::NEG_INFINITY;
            }
            acc += beta * (a - b).abs().ln();
        }
    }
    acc
}

/// The constant `C` making `C exp(stationary_log_density_unnormalized)` a
/// probability density on the ordered simplex, by a tensor double-exponential
/// rule on the cube (symmetric integrand divided by `m!`). Only `m <= 3`.
pub fn stationary_normalizer(params: &ModelParams, quad_nodes: usize) -> Result<f64> {
    let e = params.exponents()?;
    if params.m == 1 {
        check_tensor_dim(1)?;
        return Ok((-ln_beta(e.r + 1.0, e.s + 1.0)).exp());
    }
    let mass = unnormalized_moment(params, quad_nodes, |_| 1.0)?;
    Ok(1.0 / mass)
}

/// `E[f(lambda)]` under the normalised stationary density; `f` must be
/// symmetric in its arguments. Only `m <= 3`.
pub fn stationary_expectation(params: &ModelParams, quad_nodes: usize, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let mass = unnormalized_moment(params, quad_nodes, |_| 1.0)?;
    Ok(unnormalized_moment(params, quad_nodes, f)? / mass)
}

fn check_tensor_dim(m: usize) -> Result<()> {
    if m > 3 {
        return Err(Error::Unsupported(format!("tensor quadrature limited to m <= 3, got m = {m}")));
    }
    Ok(())
}

fn unnormalized_moment(params: &ModelParams, quad_nodes: usize, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let m = params.m;
    check_tensor_dim(m)?;
    let e = params.exponents()?;
    let rule = QuadRule::tanh_sinh_beta(e.r, e.s, quad_nodes);
    let n = rule.len();
    let beta = params.beta;
    let mut total = 0.0;
    let mut idx = vec![0usize; m];
    let mut x = vec![0.0; m];
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    loop {
        let mut w = 1.0;
        let mut v = 1.0;
        for a in 0..m {
            w *= rule.weights[idx[a]];
            x[a] = rule.points[idx[a]];
        }
        for a in 0..m {
            for b in a + 1..m {
                v *= (x[a] - x[b]).abs();
            }
        }
        if v > 0.0 || m == 1 {
            total += w * v.powf(beta) * f(&x);
        }
        // odometer over the tensor grid
        let mut k = 0;
        loop {
            if k == m {
                return Ok(total / fact);
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    Ok(())
}

fn check_unit(x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidParameter(format!("{x} is not in (0, 1)")));
    }
    Ok(())
}

fn check_order(basis: &JacobiBasis, n: usize) -> Result<()> {
    if n > basis.max_degree() {
        return Err(Error::DegreeOutOfRange { degree: n, max: basis.max_degree() });
    }
    Ok(())
}

fn decay(n: usize, basis: &JacobiBasis, t: f64) -> f64 {
    let n = n as f64;
    (-2.0 * n * (n + basis.r() + basis.s() + 1.0) * t).exp()
}

/// `sum_{n > order} exp(-2 n (n + r + s + 1) t) M_n^2` where `M_n` is the
/// endpoint value bound of the degree-`n` member.
fn kernel_tail(basis: &JacobiBasis, t: f64, order: usize) -> f64 {
    let mut tail = 0.0;
    for n in order + 1..order + 10_000 {
        let term = decay(n, basis, t) * basis.endpoint_bound(n).powi(2);
        tail += term;
        if term <= tail * 1e-17 || term == 0.0 {
            break;
        }
    }
    tail
}

/// Truncated spectral kernel `sum_{n <= order} exp(...) P_n(x) P_n(y)`.
fn kernel(px: &[f64], py: &[f64], factors: &[f64]) -> f64 {
    px.iter().zip(py).zip(factors).map(|((a, b), f)| f * a * b).sum()
}

/// Univariate transition density `p_t(theta, lambda)` truncated at degree `order`.
pub fn univariate_density(theta: f64, lam: f64, t: f64, basis: &JacobiBasis, order: usize) -> Result<DensityEvaluation> {
    check_t(t)?;
    check_unit(theta)?;
    check_unit(lam)?;
    check_order(basis, order)?;
    let mut pt = vec![0.0; order + 1];
    let mut pl = vec![0.0; order + 1];
    basis.fill_values(theta, &mut pt);
    basis.fill_values(lam, &mut pl);
    let factors: Vec<f64> = (0..=order).map(|n| decay(n, basis, t)).collect();
    let w = basis.weight(lam);
    Ok(DensityEvaluation {
        value: kernel(&pt, &pl, &factors) * w,
        truncation_order: order,
        tail_bound: kernel_tail(basis, t, order) * w,
        ill_conditioned: false,
    })
}

fn check_pair(theta: &LambdaPoint, lam: &LambdaPoint) -> Result<usize> {
    let m = theta.dim();
    if lam.dim() != m {
        return Err(Error::InvalidParameter(format!("dimension mismatch: {m} vs {}", lam.dim())));
    }
    for x in theta.as_slice().iter().chain(lam.as_slice()) {
        check_unit(*x)?;
    }
    for p in [theta, lam] {
        if let Some(w) = p.as_slice().windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::Collision { i: w + 1, j: w + 2 });
        }
    }
    Ok(m)
}

/// `P(lambda_t <= x | lambda_0 = theta)` for the univariate process, from the
/// closed-form integrals of the weighted basis.
pub fn univariate_cdf(theta: f64, x: f64, t: f64, basis: &JacobiBasis, order: usize) -> Result<f64> {
    check_t(t)?;
    check_unit(theta)?;
    check_order(basis, order)?;
    let mut pt = vec![0.0; order + 1];
    basis.fill_values(theta, &mut pt);
    let mut acc = 0.0;
    for (n, p) in pt.iter().enumerate() {
        acc += decay(n, basis, t) * p * basis.weighted_integral(n, x)?;
    }
    Ok(acc)
}

/// Ingredients shared by both `beta = 2` forms at one pair of points.
struct KmParts {
    det: f64,
    v_theta: f64,
    v_lam: f64,
    prod_w: f64,
    max_entry: f64,
}

fn km_parts(theta: &[f64], lam: &[f64], t: f64, basis: &JacobiBasis, order: usize) -> KmParts {
    let m = theta.len();
    let factors: Vec<f64> = (0..=order).map(|n| decay(n, basis, t)).collect();
    let values = |pts: &[f64]| -> Vec<Vec<f64>> {
        pts.iter()
            .map(|&x| {
                let mut v = vec![0.0; order + 1];
                basis.fill_values(x, &mut v);
                v
            })
            .collect()
    };
    let pt = values(theta);
    let pl = values(lam);
    let mut a = vec![0.0; m * m];
    let mut max_entry: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let k = kernel(&pt[i], &pl[j], &factors);
            a[i * m + j] = k;
            max_entry = max_entry.max(k.abs());
        }
    }
    KmParts {
        det: det_in_place(&mut a, m),
        v_theta: vandermonde(theta),
        v_lam: vandermonde(lam),
        prod_w: lam.iter().map(|&x| basis.weight(x)).product(),
        max_entry,
    }
}

fn km_tail(parts: &KmParts, basis: &JacobiBasis, t: f64, order: usize, c: f64, m: usize) -> f64 {
    // each kernel entry moves by at most `tail`; bound the permanent expansion
    let tail = kernel_tail(basis, t, order);
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let s = parts.max_entry;
    // (s + tail)^m - s^m without cancellation when tail << s
    let spread = if s > 0.0 {
        s.powi(m as i32) * (m as f64 * (tail / s).ln_1p()).exp_m1()
    } else {
        tail.powi(m as i32)
    };
    (-c * t).exp() * fact * spread * parts.prod_w * (parts.v_lam / parts.v_theta).abs()
}

/// `beta = 2` transition density in the form
/// `exp(-c t) V(lambda) / V(theta) det[K_t(theta_i, lambda_j)] prod_j W(lambda_j)`,
/// with `K_t` the univariate kernel truncated at degree `order`.
/// See [`km_density_beta2_factored`] for the second factorization.
pub fn km_density_beta2(theta: &LambdaPoint, lam: &LambdaPoint, t: f64, basis: &JacobiBasis, order: usize) -> Result<DensityEvaluation> {
    check_t(t)?;
    check_order(basis, order)?;
    check_pair(theta, lam)?;
    Ok(km_unchecked(theta.as_slice(), lam.as_slice(), t, basis, order))
}

pub(crate) fn km_unchecked(theta: &[f64], lam: &[f64], t: f64, basis: &JacobiBasis, order: usize) -> DensityEvaluation {
    let m = theta.len();
    let c = km_constant(m, basis.r(), basis.s());
    let parts = km_parts(theta, lam, t, basis, order);
    let value = (-c * t).exp() * (parts.v_lam / parts.v_theta) * parts.det * parts.prod_w;
    DensityEvaluation {
        value,
        truncation_order: order,
        tail_bound: km_tail(&parts, basis, t, order, c, m),
        ill_conditioned: min_gap(theta) < ILL_CONDITIONED_GAP || min_gap(lam) < ILL_CONDITIONED_GAP,
    }
}

/// The same density written as
/// `exp(-c t) det[K_t(theta_i, lambda_j)] W_m(lambda) / (V(theta) V(lambda))`
/// with `W_m = prod_j W(lambda_j) V(lambda)^2`.
pub fn km_density_beta2_factored(theta: &LambdaPoint, lam: &LambdaPoint, t: f64, basis: &JacobiBasis, order: usize) -> Result<DensityEvaluation> {
    check_t(t)?;
    check_order(basis, order)?;
    let m = check_pair(theta, lam)?;
    let (theta, lam) = (theta.as_slice(), lam.as_slice());
    let c = km_constant(m, basis.r(), basis.s());
    let parts = km_parts(theta, lam, t, basis, order);
    let w_m = parts.prod_w * parts.v_lam * parts.v_lam;
    let value = (-c * t).exp() * parts.det * w_m / (parts.v_theta * parts.v_lam);
    Ok(DensityEvaluation {
        value,
        truncation_order: order,
        tail_bound: km_tail(&parts, basis, t, order, c, m),
        ill_conditioned: min_gap(theta) < ILL_CONDITIONED_GAP || min_gap(lam) < ILL_CONDITIONED_GAP,
    })
}

/// `sum_{tau_1 <= cutoff} exp(-2 r_tau t) P_tau(theta) P_tau(lambda) W_m(lambda)` with
/// `P_tau = det[P_{tau_i + m - i}(lambda_j)] / V(lambda)` and `r_tau` at `beta = 2`.
/// Needs `basis.max_degree() >= cutoff + m - 1`.
pub fn partition_sum_density_beta2(theta: &LambdaPoint, lam: &LambdaPoint, t: f64, basis: &JacobiBasis, cutoff: usize) -> Result<DensityEvaluation> {
    check_t(t)?;
    let m = check_pair(theta, lam)?;
    let top = cutoff + m - 1;
    check_order(basis, top)?;
    let (theta_s, lam_s) = (theta.as_slice(), lam.as_slice());
    let values = |pts: &[f64]| -> Vec<Vec<f64>> {
        pts.iter()
            .map(|&x| {
                let mut v = vec![0.0; top + 1];
                basis.fill_values(x, &mut v);
                v
            })
            .collect()
    };
    let pt = values(theta_s);
    let pl = values(lam_s);
    let v_theta = vandermonde(theta_s);
    let v_lam = vandermonde(lam_s);
    let w_m = lam_s.iter().map(|&x| basis.weight(x)).product::<f64>() * v_lam * v_lam;
    let mut a = vec![0.0; m * m];
    let gen_det = |vals: &[Vec<f64>], n: &[usize], a: &mut [f64]| {
        for (i, &ni) in n.iter().enumerate() {
            for j in 0..m {
                a[i * m + j] = vals[j][ni];
            }
        }
        det_in_place(a, m)
    };
    let mut sum = 0.0;
    for tau in partitions_up_to(m, cutoff) {
        let n = tau.shifted();
        let p_theta = gen_det(&pt, &n, &mut a) / v_theta;
        let p_lam = gen_det(&pl, &n, &mut a) / v_lam;
        let e = tau_eigenvalue(&tau, basis.r(), basis.s(), 2.0);
        sum += (-2.0 * e * t).exp() * p_theta * p_lam;
    }
    // the cutoff keeps exactly the shifted indices n_1 <= cutoff + m - 1, so
    // the dropped mass is that of the kernel form truncated at that degree
    let c = km_constant(m, basis.r(), basis.s());
    let parts = km_parts(theta_s, lam_s, t, basis, top);
    Ok(DensityEvaluation {
        value: sum * w_m,
        truncation_order: cutoff,
        tail_bound: km_tail(&parts, basis, t, top, c, m),
        ill_conditioned: min_gap(theta_s) < ILL_CONDITIONED_GAP || min_gap(lam_s) < ILL_CONDITIONED_GAP,
    })
}
