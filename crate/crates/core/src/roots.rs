//! Model parameters, the non-reduced root system of type BC, and the drift
//! of the angular process.
//!
//! The angular process lives in the closed principal Weyl alcove
//! `0 <= phi_m <= ... <= phi_1 <= pi/2`. Its drift is the gradient of
//! `sum_{alpha > 0} k(alpha) log sin<alpha, phi>`, which can be written either
//! as a sum over positive roots or coordinate by coordinate:
//!
//! ```text
//! b_i = k0 cot(phi_i) + k1 cot(2 phi_i) + k2 sum_{j != i} [cot(phi_i + phi_j) + cot(phi_i - phi_j)]
//! ```
//!
//! Both forms are implemented and checked against each other.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default distance (radians) from a cot singularity below which the drift
/// is reported as singular.
pub const DEFAULT_SINGULAR_TOL: f64 = 1e-12;

/// `(beta, p, q, m)`: inverse Jack parameter, the two Jacobi parameters and
/// the number of particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub m: usize,
}

impl ModelParams {
    pub fn new(beta: f64, p: f64, q: f64, m: usize) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {beta}")));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("p must be > 0, got {p}")));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::InvalidParameter(format!("q must be > 0, got {q}")));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("m must be >= 1".into()));
        }
        Ok(Self { beta, p, q, m })
    }

    /// Brownian motion in the BC alcove: all multiplicities equal to one,
    /// i.e. `beta = 2, q = m + 1/2, p = m + 3/2`.
    pub fn alcove_brownian_motion(m: usize) -> Result<Self> {
        let mf = m as f64;
        Self::new(2.0, mf + 1.5, mf + 0.5, m)
    }

    /// `min(p, q) > (m - 1) + 1/beta`: the range where the SDE is known to
    /// have a unique strong solution started anywhere in the closed alcove.
    pub fn strong_regime(&self) -> bool {
        self.p.min(self.q) > (self.m as f64 - 1.0) + 1.0 / self.beta
    }

    pub fn multiplicities(&self) -> Multiplicities {
        Multiplicities::from_params(self)
    }

    /// Exponents `(r, s)` of the stationary weight. Fails when `r` or `s`
    /// would be `<= -1`, i.e. when `p <= m - 1` or `q <= m - 1`.
    pub fn exponents(&self) -> Result<SpectralExponents> {
        SpectralExponents::from_params(self)
    }

    /// Parameters with `p` and `q` exchanged (the law of `pi/2 - phi`).
    pub fn swapped(&self) -> Self {
        Self { p: self.q, q: self.p, ..*self }
    }
}

/// Orbit-constant multiplicities. `k1` is the coefficient of `cot(2 phi_i)`,
/// so the multiplicity of the root `2 e_i` itself is `k1 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplicities {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Multiplicities {
    /// `2 k0 = beta (p - q)`, `k1 = beta (q - (m - 1)) - 1`, `2 k2 = beta`.
    pub fn from_params(params: &ModelParams) -> Self {
        let b = params.beta;
        let m1 = params.m as f64 - 1.0;
        Self {
            k0: 0.5 * b * (params.p - params.q),
            k1: b * (params.q - m1) - 1.0,
            k2: 0.5 * b,
        }
    }

    /// Multiplicity `k(alpha)` attached to a root of the given orbit.
    pub fn of_orbit(&self, orbit: Orbit) -> f64 {
        match orbit {
            Orbit::Short => self.k0,
            Orbit::Long => 0.5 * self.k1,
            Orbit::Mixed => self.k2,
        }
    }
}

/// `(r, s)` with `beta (p - (m - 1)) = 2 (r + 1)` and
/// `beta (q - (m - 1)) = 2 (s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralExponents {
    pub r: f64,
    pub s: f64,
}

impl SpectralExponents {
    pub fn new(r: f64, s: f64) -> Result<Self> {
        if !(r.is_finite() && r > -1.0) || !(s.is_finite() && s > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "exponents must satisfy r, s > -1, got r = {r}, s = {s}"
            )));
        }
        Ok(Self { r, s })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        let m1 = params.m as f64 - 1.0;
        let r = 0.5 * params.beta * (params.p - m1) - 1.0;
        let s = 0.5 * params.beta * (params.q - m1) - 1.0;
        Self::new(r, s)
    }

    /// Jacobi parameters `d = 2(r + 1)`, `d' = 2(s + 1)` of the rank-one
    /// processes underlying the `beta = 2` model.
    pub fn jacobi_dimensions(&self) -> (f64, f64) {
        (2.0 * (self.r + 1.0), 2.0 * (self.s + 1.0))
    }
}

/// The three reflection orbits of `BC_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orbit {
    /// `+-e_i`
    Short,
    /// `+-2 e_i`
    Long,
    /// `+-(e_i +- e_j)`
    Mixed,
}

/// A root of `BC_m` with exact integer coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Root {
    coeffs: Vec<i32>,
    orbit: Orbit,
}

impl Root {
    /// Builds a root from its coordinates, classifying its orbit. Returns
    /// `None` if the vector is not a root of `BC_m`.
    pub fn from_coeffs(coeffs: Vec<i32>) -> Option<Self> {
        let nonzero: Vec<i32> = coeffs.iter().copied().filter(|&c| c != 0).collect();
        let orbit = match nonzero.as_slice() {
            [c] if c.abs() == 1 => Orbit::Short,
            [c] if c.abs() == 2 => Orbit::Long,
            [a, b] if a.abs() == 1 && b.abs() == 1 => Orbit::Mixed,
            _ => return None,
        };
        Some(Self { coeffs, orbit })
    }

    /// `e_i` (0-based index) in rank `m`.
    pub fn short(i: usize, m: usize) -> Self {
        let mut coeffs = vec![0; m];
        coeffs[i] = 1;
        Self { coeffs, orbit: Orbit::Short }
    }

    /// `2 e_i`.
    pub fn long(i: usize, m: usize) -> Self {
        let mut coeffs = vec![0; m];
        coeffs[i] = 2;
        Self { coeffs, orbit: Orbit::Long }
    }

    /// `e_i + sign e_j` with `i != j`.
    pub fn mixed(i: usize, j: usize, sign: i32, m: usize) -> Self {
        assert!(i != j && (sign == 1 || sign == -1));
        let mut coeffs = vec![0; m];
        coeffs[i] = 1;
        coeffs[j] = sign;
        Self { coeffs, orbit: Orbit::Mixed }
    }

    pub fn coeffs(&self) -> &[i32] {
        &self.coeffs
    }

    pub fn orbit(&self) -> Orbit {
        self.orbit
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn pairing(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().zip(v).map(|(&c, &x)| f64::from(c) * x).sum()
    }

    pub fn norm_sq(&self) -> i32 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn negated(&self) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| -c).collect(), orbit: self.orbit }
    }
}

impl fmt::Display for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let sign = if c < 0 { "-" } else if first { "" } else { "+" };
            let mag = if c.abs() == 1 { String::new() } else { c.abs().to_string() };
            write!(f, "{sign}{mag}e{}", i + 1)?;
            first = false;
        }
        Ok(())
    }
}

/// Positive system `{e_i, 2e_i} u {e_i - e_j, e_i + e_j : i < j}`; `m^2 + m`
/// roots, listed in that order.
pub fn positive_roots(m: usize) -> Vec<Root> {
    let mut roots = Vec::with_capacity(m * m + m);
    roots.extend((0..m).map(|i| Root::short(i, m)));
    roots.extend((0..m).map(|i| Root::long(i, m)));
    for i in 0..m {
        for j in i + 1..m {
            roots.push(Root::mixed(i, j, -1, m));
            roots.push(Root::mixed(i, j, 1, m));
        }
    }
    roots
}

/// Simple system `{e_i - e_{i+1}} u {e_m}` and the highest root `2 e_1`.
pub fn simple_and_highest(m: usize) -> (Vec<Root>, Root) {
    let mut simple: Vec<Root> = (0..m.saturating_sub(1)).map(|i| Root::mixed(i, i + 1, -1, m)).collect();
    simple.push(Root::short(m - 1, m));
    (simple, Root::long(0, m))
}

/// Reflection of `v` in the hyperplane orthogonal to `root`.
pub fn reflect(root: &Root, v: &[f64]) -> Vec<f64> {
    let factor = 2.0 * root.pairing(v) / f64::from(root.norm_sq());
    v.iter()
        .zip(root.coeffs())
        .map(|(&x, &c)| x - factor * f64::from(c))
        .collect()
}

/// A point of the closed alcove, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlcovePoint {
    phi: Vec<f64>,
}

impl AlcovePoint {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::InvalidParameter("empty alcove point".into()));
        }
        let ok = phi.iter().all(|x| x.is_finite())
            && phi[0] <= FRAC_PI_2
            && *phi.last().unwrap() >= 0.0
            && phi.windows(2).all(|w| w[0] >= w[1]);
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "{phi:?} is not in the closed alcove 0 <= phi_m <= ... <= phi_1 <= pi/2"
            )));
        }
        Ok(Self { phi })
    }

    /// Evenly spaced interior point `phi_i = (pi/2) (m - i + 1) / (m + 1)`.
    pub fn centre(m: usize) -> Self {
        let phi = (0..m).map(|i| FRAC_PI_2 * (m - i) as f64 / (m + 1) as f64).collect();
        Self { phi }
    }

    pub(crate) fn from_vec_unchecked(phi: Vec<f64>) -> Self {
        Self { phi }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.phi
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }
}

/// The walls of the alcove, named by what touching them means for the
/// particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    /// `phi_i = phi_{i+1}` (0-based `i`): wall of the simple root `e_i - e_{i+1}`.
    Collision(usize),
    /// `phi_m = 0`: wall of the simple root `e_m`.
    Lower,
    /// `2 phi_1 = pi`: wall of the highest root.
    Upper,
}

impl fmt::Display for Wall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wall::Collision(i) => write!(f, "collision_{}_{}", i + 1, i + 2),
            Wall::Lower => f.write_str("lower"),
            Wall::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    Interior,
    OnWall(Vec<Wall>),
    Outside,
}

/// Signed distances to every wall (simple-root pairings, then `pi - 2 phi_1`).
pub fn wall_values(phi: &[f64]) -> impl Iterator<Item = (Wall, f64)> + '_ {
    let m = phi.len();
    let gaps = (0..m.saturating_sub(1)).map(move |i| (Wall::Collision(i), phi[i] - phi[i + 1]));
    gaps.chain(std::iter::once((Wall::Lower, phi[m - 1])))
        .chain(std::iter::once((Wall::Upper, PI - 2.0 * phi[0])))
}

/// Smallest wall value; positive iff the point is in the open alcove.
pub(crate) fn min_wall_value(phi: &[f64]) -> f64 {
    let m = phi.len();
    let mut min = phi[m - 1].min(PI - 2.0 * phi[0]);
    for w in phi.windows(2) {
        min = min.min(w[0] - w[1]);
    }
    min
}

pub fn classify_position(phi: &[f64], tol: f64) -> Position {
    let mut walls = Vec::new();
    for (wall, v) in wall_values(phi) {
        if v < -tol {
            return Position::Outside;
        }
        if v <= tol {
            walls.push(wall);
        }
    }
    if walls.is_empty() {
        Position::Interior
    } else {
        Position::OnWall(walls)
    }
}

fn checked_cot(arg: f64, tol: f64, root: impl FnOnce() -> String) -> Result<f64> {
    let reduced = arg.rem_euclid(PI);
    if reduced <= tol || PI - reduced <= tol {
        return Err(Error::SingularConfiguration { root: root(), pairing: arg });
    }
    Ok(1.0 / arg.tan())
}

/// `sum_{alpha in R_+} k(alpha) cot<alpha, phi> alpha`.
pub fn drift_root_sum(phi: &AlcovePoint, mult: &Multiplicities) -> Result<Vec<f64>> {
    drift_root_sum_tol(phi.as_slice(), mult, DEFAULT_SINGULAR_TOL)
}

pub fn drift_root_sum_tol(phi: &[f64], mult: &Multiplicities, tol: f64) -> Result<Vec<f64>> {
    let m = phi.len();
    let mut out = vec![0.0; m];
    for root in positive_roots(m) {
        let k = mult.of_orbit(root.orbit());
        let pairing = root.pairing(phi);
        let c = checked_cot(pairing, tol, || root.to_string())?;
        for (o, &a) in out.iter_mut().zip(root.coeffs()) {
            *o += k * c * f64::from(a);
        }
    }
    Ok(out)
}

/// Coordinate form of the drift.
pub fn drift_explicit(phi: &AlcovePoint, mult: &Multiplicities) -> Result<Vec<f64>> {
    drift_explicit_tol(phi.as_slice(), mult, DEFAULT_SINGULAR_TOL)
}

pub fn drift_explicit_tol(phi: &[f64], mult: &Multiplicities, tol: f64) -> Result<Vec<f64>> {
    let m = phi.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let c1 = checked_cot(phi[i], tol, || format!("e{}", i + 1))?;
        let c2 = checked_cot(2.0 * phi[i], tol, || format!("2e{}", i + 1))?;
        out[i] += mult.k0 * c1 + mult.k1 * c2;
        for j in i + 1..m {
            let plus = checked_cot(phi[i] + phi[j], tol, || format!("e{}+e{}", i + 1, j + 1))?;
            let minus = checked_cot(phi[i] - phi[j], tol, || format!("e{}-e{}", i + 1, j + 1))?;
            out[i] += mult.k2 * (plus + minus);
            out[j] += mult.k2 * (plus - minus);
        }
    }
    Ok(out)
}

/// Unchecked coordinate drift for points already known to be in the open
/// alcove. Used by the integrators.
pub(crate) fn fill_drift(phi: &[f64], mult: &Multiplicities, out: &mut [f64]) {
    let m = phi.len();
    for i in 0..m {
        out[i] = mult.k0 / phi[i].tan() + mult.k1 / (2.0 * phi[i]).tan();
    }
    for i in 0..m {
        for j in i + 1..m {
            let plus = 1.0 / (phi[i] + phi[j]).tan();
            let minus = 1.0 / (phi[i] - phi[j]).tan();
            out[i] += mult.k2 * (plus + minus);
            out[j] += mult.k2 * (plus - minus);
        }
    }
}
