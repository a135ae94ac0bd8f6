//! Euler–Maruyama integrators for the angular process, the eigenvalue
//! process and the rank-one Jacobi process.
//!
//! The angular scheme is the reference. A step of size `h` with Brownian
//! increment `dW` proposes `phi + b(phi) h + dW`; the proposal is rejected if
//! it leaves the open alcove, if it more than halves the distance to the
//! nearest wall, or if the drift at the proposal exceeds
//! `1 / (10 boundary_tol)`. The second rule makes accepted step sizes scale
//! like the squared wall distance, so close approaches are resolved instead
//! of being jumped over by a single Gaussian increment. It is dropped within
//! `sqrt(boundary_tol)` of a wall, where a proposal that crosses a wall is
//! reflected back through it instead: walls of Bessel dimension below 2 are
//! reached by the exact process, and near dimension 2 it comes arbitrarily
//! close. A rejected step is split in two halves whose
//! increments are drawn from the Brownian bridge through `dW`, so the
//! driving Brownian path is refined rather than resampled. Halving stops at
//! `max_halvings` with [`Error::NonConvergence`].
//!
//! Paths are recorded on the grid `0, dt, 2 dt, ..., horizon`; substeps
//! produced by halving are consumed but not recorded.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coords::{lambda_to_phi, phi_to_lambda, LambdaPoint};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, PathRng};
use crate::roots::{
    drift_explicit_tol, fill_drift, min_wall_value, wall_values, AlcovePoint, ModelParams, Multiplicities,
    Wall,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    PhiEuler,
    LambdaEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub boundary_tol: f64,
    pub max_halvings: u32,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            horizon: 1.0,
            seed: 0,
            boundary_tol: 1e-9,
            max_halvings: 40,
            scheme: Scheme::PhiEuler,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if !(self.boundary_tol.is_finite() && self.boundary_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "boundary_tol must be > 0, got {}",
                self.boundary_tol
            )));
        }
        if self.max_halvings > 60 {
            return Err(Error::InvalidParameter(format!(
                "max_halvings must be in [0, 60], got {}",
                self.max_halvings
            )));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Number of recorded steps after the initial state.
    pub fn n_steps(&self) -> usize {
        if self.horizon == 0.0 {
            0
        } else {
            ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize
        }
    }

    fn grid_time(&self, k: usize) -> f64 {
        (k as f64 * self.dt).min(self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitKind {
    Collision,
    LowerBoundary,
    UpperBoundary,
}

impl From<Wall> for HitKind {
    fn from(w: Wall) -> Self {
        match w {
            Wall::Collision(_) => HitKind::Collision,
            Wall::Lower => HitKind::LowerBoundary,
            Wall::Upper => HitKind::UpperBoundary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub time: f64,
    pub kind: HitKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// An accepted substep landed within `boundary_tol` of a wall. Steps are
    /// not refined below `sqrt(boundary_tol)`, so this under-reports contact.
    NearWall { wall: Wall },
    /// The start was on a wall and was pushed inward.
    StartPush,
    /// Eigenvalue `index` was clamped into `[0, 1]`.
    Clamp { index: usize },
    /// Eigenvalues were re-sorted after a step.
    Reorder,
    /// Two eigenvalues closer than `1e-15`; the path stops here.
    Collision { index: usize },
}

impl EventKind {
    pub fn label(&self) -> String {
        match self {
            EventKind::NearWall { wall } => format!("near_wall:{wall}"),
            EventKind::StartPush => "start_push".into(),
            EventKind::Clamp { index } => format!("clamp:{}", index + 1),
            EventKind::Reorder => "reorder".into(),
            EventKind::Collision { index } => format!("collision:{}", index + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// One trajectory. `states` are in the coordinates of the scheme that
/// produced them (angles for the angular scheme, eigenvalues otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    pub hit: Option<Hit>,
}

impl PathSample {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("paths always hold the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("paths always hold the initial time")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Starting configuration in either coordinate system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    Phi(AlcovePoint),
    Lambda(LambdaPoint),
}

impl StartPoint {
    pub fn to_phi(&self) -> AlcovePoint {
        match self {
            StartPoint::Phi(p) => p.clone(),
            StartPoint::Lambda(l) => lambda_to_phi(l),
        }
    }

    pub fn to_lambda(&self) -> LambdaPoint {
        match self {
            StartPoint::Phi(p) => phi_to_lambda(p),
            StartPoint::Lambda(l) => l.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StartPoint::Phi(p) => p.dim(),
            StartPoint::Lambda(l) => l.dim(),
        }
    }
}

/// Outcome of a single Euler proposal.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Accepted(AlcovePoint),
    /// The proposal left the open alcove or landed too close to a wall; the
    /// caller must retry with a smaller step.
    Rejected,
}

/// One Euler–Maruyama proposal for the angular process. `noise` is the
/// Brownian increment, already scaled by `sqrt(dt)`.
pub fn step_phi(
    state: &AlcovePoint,
    mult: &Multiplicities,
    dt: f64,
    noise: &[f64],
    boundary_tol: f64,
) -> Result<StepOutcome> {
    let drift = drift_explicit_tol(state.as_slice(), mult, crate::roots::DEFAULT_SINGULAR_TOL)?;
    let mut proposal: Vec<f64> = state
        .as_slice()
        .iter()
        .zip(&drift)
        .zip(noise)
        .map(|((x, b), w)| x + b * dt + w)
        .collect();
    let mut proposal_drift = vec![0.0; proposal.len()];
    let wall = min_wall_value(state.as_slice());
    let resolved = wall <= boundary_tol.sqrt();
    if resolved {
        reflect(&mut proposal);
    }
    let floor = if resolved { 0.0 } else { WALL_SHRINK * wall };
    if acceptable(&proposal, mult, floor, 1.0 / (10.0 * boundary_tol), &mut proposal_drift) {
        Ok(StepOutcome::Accepted(AlcovePoint::from_vec_unchecked(proposal)))
    } else {
        Ok(StepOutcome::Rejected)
    }
}

/// A proposal may shrink the distance to the nearest wall to at most this
/// fraction of its current value.
pub const WALL_SHRINK: f64 = 0.5;

/// Reflects `phi` through crossed walls. Points that need more than a few
/// reflections are left to fail the alcove check.
fn reflect(phi: &mut [f64]) {
    let m = phi.len();
    for _ in 0..4 {
        let mut moved = false;
        for i in 0..m.saturating_sub(1) {
            if phi[i] < phi[i + 1] {
                phi.swap(i, i + 1);
                moved = true;
            }
        }
        if phi[m - 1] < 0.0 {
            phi[m - 1] = -phi[m - 1];
            moved = true;
        }
        if phi[0] > FRAC_PI_2 {
            phi[0] = PI - phi[0];
            moved = true;
        }
        if !moved {
            return;
        }
    }
}

/// Checks a proposal and fills its drift.
fn acceptable(
    proposal: &[f64],
    mult: &Multiplicities,
    floor: f64,
    drift_cap: f64,
    drift: &mut [f64],
) -> bool {
    if !(min_wall_value(proposal) > floor.max(0.0)) {
        return false;
    }
    fill_drift(proposal, mult, drift);
    drift.iter().all(|b| b.is_finite() && b.abs() <= drift_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recording {
    Grid,
    Endpoints,
}

struct PhiEngine {
    mult: Multiplicities,
    rng: PathRng,
    boundary_tol: f64,
    drift_cap: f64,
    max_halvings: u32,
    x: Vec<f64>,
    drift: Vec<f64>,
    proposal: Vec<f64>,
    proposal_drift: Vec<f64>,
    // pending substeps, each `m + 2` wide: h, depth, dW
    stack: Vec<f64>,
    t: f64,
    /// `sqrt(boundary_tol)`; below it the shrink rule gives way to reflection
    reflect_below: f64,
    /// `min_wall_value(x)`
    wall: f64,
    near_wall: bool,
}

impl PhiEngine {
    fn new(start: &[f64], mult: Multiplicities, cfg: &SimConfig, events: &mut Vec<Event>) -> Result<Self> {
        let m = start.len();
        let mut x = start.to_vec();
        if min_wall_value(&x) <= cfg.boundary_tol {
            push_inward(&mut x, cfg.dt);
            events.push(Event { time: 0.0, kind: EventKind::StartPush });
        }
        let mut drift = vec![0.0; m];
        fill_drift(&x, &mult, &mut drift);
        if drift.iter().any(|b| !b.is_finite()) {
            return Err(Error::SingularConfiguration { root: "start".into(), pairing: min_wall_value(&x) });
        }
        Ok(Self {
            mult,
            rng: PathRng::new(cfg.seed),
            boundary_tol: cfg.boundary_tol,
            drift_cap: 1.0 / (10.0 * cfg.boundary_tol),
            max_halvings: cfg.max_halvings,
            proposal: vec![0.0; m],
            proposal_drift: vec![0.0; m],
            stack: Vec::with_capacity(8 * (m + 2)),
            reflect_below: cfg.boundary_tol.sqrt(),
            wall: min_wall_value(&x),
            x,
            drift,
            t: 0.0,
            near_wall: false,
        })
    }

    /// Advances by `h`. Returns the stop value reported by `stop` after an
    /// accepted substep, if any.
    fn advance<S, F>(&mut self, h: f64, events: &mut Vec<Event>, stop: &mut F) -> Result<Option<S>>
    where
        F: FnMut(&[f64]) -> Option<S>,
    {
        let m = self.x.len();
        let width = m + 2;
        self.stack.clear();
        self.stack.push(h);
        self.stack.push(0.0);
        let sd = h.sqrt();
        for _ in 0..m {
            let z = self.rng.normal();
            self.stack.push(sd * z);
        }
        while !self.stack.is_empty() {
            let base = self.stack.len() - width;
            let hh = self.stack[base];
            let depth = self.stack[base + 1] as u32;
            for i in 0..m {
                self.proposal[i] = self.x[i] + self.drift[i] * hh + self.stack[base + 2 + i];
            }
            let resolved = self.wall <= self.reflect_below;
            if resolved {
                reflect(&mut self.proposal);
            }
            let floor = if resolved { 0.0 } else { WALL_SHRINK * self.wall };
            if acceptable(&self.proposal, &self.mult, floor, self.drift_cap, &mut self.proposal_drift) {
                self.stack.truncate(base);
                std::mem::swap(&mut self.x, &mut self.proposal);
                std::mem::swap(&mut self.drift, &mut self.proposal_drift);
                self.wall = min_wall_value(&self.x);
                self.t += hh;
                self.note_walls(events);
                if let Some(s) = stop(&self.x) {
                    self.stack.clear();
                    return Ok(Some(s));
                }
                continue;
            }
            if depth >= self.max_halvings {
                return Err(Error::NonConvergence { time: self.t, halvings: depth });
            }
            // Brownian bridge split: first half W/2 + sqrt(h/4) Z, second half the rest.
            let half = 0.5 * hh;
            let bridge_sd = (0.25 * hh).sqrt();
            let next = (depth + 1) as f64;
            let mut second = Vec::with_capacity(width);
            second.push(half);
            second.push(next);
            let mut first = Vec::with_capacity(width);
            first.push(half);
            first.push(next);
            for i in 0..m {
                let w = self.stack[base + 2 + i];
                let w1 = 0.5 * w + bridge_sd * self.rng.normal();
                first.push(w1);
                second.push(w - w1);
            }
            self.stack.truncate(base);
            self.stack.extend_from_slice(&second);
            self.stack.extend_from_slice(&first);
        }
        Ok(None)
    }

    fn note_walls(&mut self, events: &mut Vec<Event>) {
        if min_wall_value(&self.x) < self.boundary_tol {
            if !self.near_wall {
                let wall = wall_values(&self.x)
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(w, _)| w)
                    .expect("at least two walls");
                events.push(Event { time: self.t, kind: EventKind::NearWall { wall } });
            }
            self.near_wall = true;
        } else {
            self.near_wall = false;
        }
    }
}

/// Moves a wall point a distance `sqrt(dt)` towards the alcove centre (at
/// most half way), which lands strictly inside by convexity.
fn push_inward(x: &mut [f64], dt: f64) {
    let centre = AlcovePoint::centre(x.len());
    let dist = x.iter().zip(centre.as_slice()).map(|(a, c)| (c - a) * (c - a)).sum::<f64>().sqrt();
    if dist == 0.0 {
        return;
    }
    let eta = (dt.sqrt() / dist).min(0.5);
    for (a, c) in x.iter_mut().zip(centre.as_slice()) {
        *a += eta * (c - *a);
    }
}

/// Shared driver for the angular scheme. `stop` is consulted after every
/// accepted substep; `map` converts states before recording.
fn integrate_phi<F, G>(
    start: &[f64],
    mult: Multiplicities,
    cfg: &SimConfig,
    recording: Recording,
    mut stop: F,
    map: G,
) -> Result<PathSample>
where
    F: FnMut(&[f64]) -> Option<HitKind>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let mut events = Vec::new();
    let mut times = vec![0.0];
    let mut states = vec![map(start)];
    if let Some(kind) = stop(start) {
        return Ok(PathSample { times, states, events, hit: Some(Hit { time: 0.0, kind }) });
    }
    let mut engine = PhiEngine::new(start, mult, cfg, &mut events)?;
    let n = cfg.n_steps();
    for k in 1..=n {
        let h = cfg.grid_time(k) - cfg.grid_time(k - 1);
        if let Some(kind) = engine.advance(h, &mut events, &mut stop)? {
            times.push(engine.t.min(cfg.horizon));
            states.push(map(&engine.x));
            return Ok(PathSample { times, states, events, hit: Some(Hit { time: engine.t, kind }) });
        }
        if recording == Recording::Grid || k == n {
            times.push(cfg.grid_time(k));
            states.push(map(&engine.x));
        }
    }
    Ok(PathSample { times, states, events, hit: None })
}

/// Simulates the angular process on `[0, horizon]`.
pub fn simulate_phi(start: &AlcovePoint, params: &ModelParams, config: &SimConfig) -> Result<PathSample> {
    check_dim(start.dim(), params)?;
    integrate_phi(
        start.as_slice(),
        params.multiplicities(),
        config,
        Recording::Grid,
        |_| None,
        |x| x.to_vec(),
    )
}

/// Runs the angular process until the first time `stop` fires, recording
/// only the initial and final states. Used by the hitting experiments.
pub fn simulate_phi_until<F>(
    start: &AlcovePoint,
    params: &ModelParams,
    config: &SimConfig,
    stop: F,
) -> Result<PathSample>
where
    F: FnMut(&[f64]) -> Option<HitKind>,
{
    check_dim(start.dim(), params)?;
    integrate_phi(start.as_slice(), params.multiplicities(), config, Recording::Endpoints, stop, |x| x.to_vec())
}

/// Final eigenvalues at `config.horizon` of one angular path.
pub fn terminal_lambda(start: &AlcovePoint, params: &ModelParams, config: &SimConfig) -> Result<Vec<f64>> {
    check_dim(start.dim(), params)?;
    let path = integrate_phi(
        start.as_slice(),
        params.multiplicities(),
        config,
        Recording::Endpoints,
        |_| None,
        |x| x.iter().map(|f| f.sin().powi(2)).collect(),
    )?;
    Ok(path.final_state().to_vec())
}

fn check_dim(dim: usize, params: &ModelParams) -> Result<()> {
    if dim != params.m {
        return Err(Error::InvalidParameter(format!(
            "start has {dim} components but m = {}",
            params.m
        )));
    }
    Ok(())
}

/// Drift of the eigenvalue SDE at `lambda`; `None` if two components are
/// closer than `1e-15` (returns the lower index of the pair).
pub fn lambda_drift(lambda: &[f64], params: &ModelParams, out: &mut [f64]) -> std::result::Result<(), usize> {
    let m = lambda.len();
    for i in 0..m {
        let li = lambda[i];
        let mut sum = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let lj = lambda[j];
            let gap = li - lj;
            if gap.abs() < 1e-15 {
                return Err(i.min(j));
            }
            sum += (li * (1.0 - lj) + lj * (1.0 - li)) / gap;
        }
        out[i] = params.beta * (params.p - (params.p + params.q) * li + sum);
    }
    Ok(())
}

/// Euler–Maruyama on the eigenvalue SDE with clamp-to-`[0, 1]` and re-sort.
pub fn simulate_lambda(start: &LambdaPoint, params: &ModelParams, config: &SimConfig) -> Result<PathSample> {
    config.validate()?;
    check_dim(start.dim(), params)?;
    let m = params.m;
    let mut rng = PathRng::new(config.seed);
    let mut x = start.as_slice().to_vec();
    let mut drift = vec![0.0; m];
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut events = Vec::new();
    let n = config.n_steps();
    for k in 1..=n {
        let t0 = config.grid_time(k - 1);
        let h = config.grid_time(k) - t0;
        if let Err(index) = lambda_drift(&x, params, &mut drift) {
            events.push(Event { time: t0, kind: EventKind::Collision { index } });
            return Ok(PathSample {
                times,
                states,
                events,
                hit: Some(Hit { time: t0, kind: HitKind::Collision }),
            });
        }
        let sd = h.sqrt();
        for i in 0..m {
            let vol = 2.0 * (x[i] * (1.0 - x[i])).max(0.0).sqrt();
            x[i] += drift[i] * h + vol * sd * rng.normal();
        }
        let t = config.grid_time(k);
        for (i, v) in x.iter_mut().enumerate() {
            if *v < 0.0 || *v > 1.0 {
                *v = v.clamp(0.0, 1.0);
                events.push(Event { time: t, kind: EventKind::Clamp { index: i } });
            }
        }
        if x.windows(2).any(|w| w[0] < w[1]) {
            x.sort_by(|a, b| b.total_cmp(a));
            events.push(Event { time: t, kind: EventKind::Reorder });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(PathSample { times, states, events, hit: None })
}

/// Rank-one Jacobi process `dJ = 2 sqrt(J(1-J)) dW + (d - (d + d') J) dt`,
/// integrated in the angle `psi = arcsin(sqrt(J))`, whose drift is
/// `(d - d')/2 cot(psi) + (d' - 1) cot(2 psi)`. States are recorded as `J`.
/// The path stops at the first time `J <= boundary_tol` or
/// `J >= 1 - boundary_tol`.
pub fn simulate_rank_one(start: f64, d: f64, dprime: f64, config: &SimConfig) -> Result<PathSample> {
    if !(0.0..=1.0).contains(&start) {
        return Err(Error::InvalidParameter(format!("start must be in [0, 1], got {start}")));
    }
    if !(d >= 0.0 && dprime >= 0.0) {
        return Err(Error::InvalidParameter(format!("need d, d' >= 0, got {d}, {dprime}")));
    }
    config.validate()?;
    let mult = Multiplicities { k0: 0.5 * (d - dprime), k1: dprime - 1.0, k2: 0.0 };
    let edge = config.boundary_tol.sqrt().min(1.0).asin();
    let stop = move |x: &[f64]| {
        if x[0] <= edge {
            Some(HitKind::LowerBoundary)
        } else if x[0] >= FRAC_PI_2 - edge {
            Some(HitKind::UpperBoundary)
        } else {
            None
        }
    };
    let psi = start.sqrt().asin();
    integrate_phi(&[psi], mult, config, Recording::Grid, stop, |x| vec![x[0].sin().powi(2)])
}

/// Runs `f(index, derived_seed)` for every path index in parallel and
/// returns the results in index order.
pub fn map_paths<T, F>(n_paths: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    (0..n_paths)
        .into_par_iter()
        .map(|i| f(i, derive_seed(seed, i as u64)).map_err(|e| Error::Path { index: i, source: Box::new(e) }))
        .collect()
}

/// Independent paths with seeds `derive_seed(config.seed, i)`.
pub fn simulate_ensemble(
    start: &StartPoint,
    params: &ModelParams,
    config: &SimConfig,
    n_paths: usize,
) -> Result<Vec<PathSample>> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    config.validate()?;
    match config.scheme {
        Scheme::PhiEuler => {
            let phi = start.to_phi();
            map_paths(n_paths, config.seed, |_, seed| simulate_phi(&phi, params, &config.with_seed(seed)))
        }
        Scheme::LambdaEuler => {
            let lambda = start.to_lambda();
            map_paths(n_paths, config.seed, |_, seed| simulate_lambda(&lambda, params, &config.with_seed(seed)))
        }
    }
}
