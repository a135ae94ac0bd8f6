//! Orthonormal Jacobi polynomials on `[0, 1]` for the probability weight
//! `W(lambda) = lambda^r (1 - lambda)^s / B(r + 1, s + 1)`, and quadrature.
//!
//! The degree-`n` member is the classical Jacobi polynomial
//! `P_n^{(s, r)}(2 lambda - 1)` scaled to unit `W`-norm, with positive
//! leading coefficient. Values come from the orthonormal three-term
//! recurrence
//!
//! ```text
//! lambda P_n = a_{n+1} P_{n+1} + b_n P_n + a_n P_{n-1}
//! ```
//!
//! whose coefficients are the classical ones mapped from `[-1, 1]`.

use std::f64::consts::PI;

use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct JacobiBasis {
    r: f64,
    s: f64,
    max_degree: usize,
    /// `b_n`, `n = 0..=max_degree`
    diag: Vec<f64>,
    /// `a_n`, `n = 0..=max_degree` (`a_0` unused)
    off: Vec<f64>,
    /// `log of the W-norm^2` of the classical polynomial, per degree
    log_norm_sq: Vec<f64>,
}

impl JacobiBasis {
    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `(b_n, a_n)` of the orthonormal recurrence on `[0, 1]`.
    pub fn recurrence(&self, n: usize) -> (f64, f64) {
        (self.diag[n], self.off[n])
    }

    /// `int W (P_n^{(s, r)}(2 lambda - 1))^2 d lambda` for the classical
    /// (unnormalised) polynomial.
    pub fn norming_constant(&self, n: usize) -> f64 {
        self.log_norm_sq[n].exp()
    }

    /// Probability weight `W(lambda)`.
    pub fn weight(&self, lam: f64) -> f64 {
        beta_weight(self.r, self.s, lam)
    }

    pub fn evaluate(&self, n: usize, lam: f64) -> Result<f64> {
        self.check_degree(n)?;
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n {
            let next = ((lam - self.diag[k]) * cur - self.off[k] * prev) / self.off[k + 1];
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Values of degrees `0..=n` at `lam` from a single recurrence pass.
    pub fn evaluate_all(&self, n: usize, lam: f64) -> Result<Vec<f64>> {
        self.check_degree(n)?;
        let mut out = vec![0.0; n + 1];
        self.fill_values(lam, &mut out);
        Ok(out)
    }

    /// Fills `out[k] = P_k(lam)` for `k < out.len()`; `out.len()` must not
    /// exceed `max_degree + 1`.
    pub(crate) fn fill_values(&self, lam: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() > 1 {
            out[1] = (lam - self.diag[0]) / self.off[1];
        }
        for k in 1..out.len().saturating_sub(1) {
            out[k + 1] = ((lam - self.diag[k]) * out[k] - self.off[k] * out[k - 1]) / self.off[k + 1];
        }
    }

    /// Classical `P_n^{(s, r)}(2 lambda - 1)` by its own recurrence; equals
    /// `sqrt(norming_constant(n)) * evaluate(n, lam)`.
    pub fn classical(&self, n: usize, lam: f64) -> Result<f64> {
        self.check_degree(n)?;
        Ok(classical_jacobi(n, self.s, self.r, 2.0 * lam - 1.0))
    }

    /// `max(|P_n(0)|, |P_n(1)|)` for any degree, from the closed endpoint
    /// values. Bounds the sup norm whenever `max(r, s) >= -1/2`.
    pub fn endpoint_bound(&self, n: usize) -> f64 {
        let (a, b) = (self.s, self.r);
        let log_norm = log_classical_norm_sq(n, a, b, self.r, self.s);
        let nf = n as f64;
        let at_one = ln_gamma(nf + a + 1.0) - ln_gamma(a + 1.0) - ln_gamma(nf + 1.0);
        let at_zero = ln_gamma(nf + b + 1.0) - ln_gamma(b + 1.0) - ln_gamma(nf + 1.0);
        (at_one.max(at_zero) - 0.5 * log_norm).exp()
    }

    /// `int_0^x W(lambda) P_n(lambda) d lambda`, in closed form: the regularised
    /// incomplete Beta function for `n = 0`, and for `n >= 1`
    /// `-x^{r+1} (1-x)^{s+1} P_{n-1}^{(s+1, r+1)}(2x - 1) / (n B(r+1, s+1))`
    /// divided by the norm of the classical polynomial.
    pub fn weighted_integral(&self, n: usize, x: f64) -> Result<f64> {
        self.check_degree(n)?;
        let x = x.clamp(0.0, 1.0);
        if n == 0 {
            return Ok(beta_reg(self.r + 1.0, self.s + 1.0, x));
        }
        if x == 0.0 || x == 1.0 {
            return Ok(0.0);
        }
        let lead = (self.r + 1.0) * x.ln() + (self.s + 1.0) * (1.0 - x).ln()
            - ln_beta(self.r + 1.0, self.s + 1.0)
            - 0.5 * self.log_norm_sq[n];
        let p = classical_jacobi(n - 1, self.s + 1.0, self.r + 1.0, 2.0 * x - 1.0);
        Ok(-lead.exp() * p / n as f64)
    }

    fn check_degree(&self, n: usize) -> Result<()> {
        if n > self.max_degree {
            return Err(Error::DegreeOutOfRange { degree: n, max: self.max_degree });
        }
        Ok(())
    }
}

/// Builds the basis of degrees `0..=max_degree`.
pub fn build_basis(r: f64, s: f64, max_degree: usize) -> Result<JacobiBasis> {
    if !(r.is_finite() && r > -1.0 && s.is_finite() && s > -1.0) {
        return Err(Error::InvalidParameter(format!("need r, s > -1, got r = {r}, s = {s}")));
    }
    // classical parameters on [-1, 1]: (1 - x)^a (1 + x)^b
    let (a, b) = (s, r);
    let mut diag = Vec::with_capacity(max_degree + 1);
    let mut off = Vec::with_capacity(max_degree + 2);
    off.push(0.0);
    for n in 0..=max_degree + 1 {
        let nf = n as f64;
        let ab = 2.0 * nf + a + b;
        let bx = if n == 0 { (b - a) / (a + b + 2.0) } else { (b * b - a * a) / (ab * (ab + 2.0)) };
        if n <= max_degree {
            diag.push(0.5 * (1.0 + bx));
        }
        if n >= 1 {
            let ax_sq = if n == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
            } else {
                4.0 * nf * (nf + a) * (nf + b) * (nf + a + b) / (ab * ab * (ab + 1.0) * (ab - 1.0))
            };
            off.push(0.5 * ax_sq.sqrt());
        }
    }
    let log_norm_sq = (0..=max_degree).map(|n| log_classical_norm_sq(n, a, b, r, s)).collect();
    Ok(JacobiBasis { r, s, max_degree, diag, off, log_norm_sq })
}

/// Free-function form of [`JacobiBasis::evaluate`].
pub fn evaluate(basis: &JacobiBasis, n: usize, lam: f64) -> Result<f64> {
    basis.evaluate(n, lam)
}

/// Free-function form of [`JacobiBasis::evaluate_all`].
pub fn evaluate_all(basis: &JacobiBasis, n: usize, lam: f64) -> Result<Vec<f64>> {
    basis.evaluate_all(n, lam)
}

fn log_classical_norm_sq(n: usize, a: f64, b: f64, r: f64, s: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    -(2.0 * nf + a + b + 1.0).ln() + ln_gamma(nf + a + 1.0) + ln_gamma(nf + b + 1.0)
        - ln_gamma(nf + a + b + 1.0)
        - ln_gamma(nf + 1.0)
        - ln_beta(r + 1.0, s + 1.0)
}

/// Classical Jacobi polynomial `P_n^{(a, b)}(x)` on `[-1, 1]` by the
/// standard three-term recurrence.
pub fn classical_jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let next = ((c - 1.0) * (c * (c - 2.0) * x + a * a - b * b) * cur
            - 2.0 * (k + a - 1.0) * (k + b - 1.0) * c * prev)
            / (2.0 * k * (k + a + b) * (c - 2.0));
        prev = cur;
        cur = next;
    }
    cur
}

/// `lambda^r (1 - lambda)^s / B(r + 1, s + 1)`; zero or infinite at the
/// endpoints as the exponents dictate.
pub fn beta_weight(r: f64, s: f64, lam: f64) -> f64 {
    (r * lam.ln() + s * (1.0 - lam).ln() - ln_beta(r + 1.0, s + 1.0)).exp()
}

/// Gauss–Legendre rule mapped to `[0, 1]`: exact for polynomials of degree
/// `<= 2 nodes - 1`.
pub fn gauss_legendre(nodes: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(nodes >= 1, "need at least one node");
    let n = nodes;
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        points[i] = 0.5 * (1.0 - x);
        points[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.5;
    }
    (points, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Quadrature rule on `[0, 1]` carrying each node's distance to `1`
/// separately, so weights with endpoint singularities stay accurate.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<f64>,
    /// `1 - points[i]`, computed without cancellation.
    pub complements: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn gauss_legendre(nodes: usize) -> Self {
        let (points, weights) = gauss_legendre(nodes);
        let complements = points.iter().rev().copied().collect();
        Self { points, complements, weights }
    }

    /// Double-exponential (tanh-sinh) rule for `int_0^1 lambda^r (1 -
    /// lambda)^s f(lambda) d lambda`, with the Beta weight folded into the
    /// weights (computed in log space). `nodes` controls the step size.
    pub fn tanh_sinh_beta(r: f64, s: f64, nodes: usize) -> Self {
        assert!(nodes >= 3, "need at least three nodes");
        const T_MAX: f64 = 6.5;
        let h = 2.0 * T_MAX / (nodes - 1) as f64;
        let mut points = Vec::with_capacity(nodes);
        let mut complements = Vec::with_capacity(nodes);
        let mut weights = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let t = -T_MAX + k as f64 * h;
            let u = PI * t.sinh();
            // lambda = 1 / (1 + e^{-u}), 1 - lambda = 1 / (1 + e^{u})
            let log_lam = -softplus(-u);
            let log_comp = -softplus(u);
            let log_w = h.ln() + (PI * t.cosh()).ln() + (r + 1.0) * log_lam + (s + 1.0) * log_comp;
            let w = log_w.exp();
            if w == 0.0 {
                continue;
            }
            points.push(log_lam.exp());
            complements.push(log_comp.exp());
            weights.push(w);
        }
        Self { points, complements, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `int_0^1 W(lambda) f(lambda) d lambda` for the probability weight of the
/// basis.
pub fn integrate_against_weight(r: f64, s: f64, nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    QuadRule::tanh_sinh_beta(r, s, nodes).integrate(f) * (-ln_beta(r + 1.0, s + 1.0)).exp()
}
