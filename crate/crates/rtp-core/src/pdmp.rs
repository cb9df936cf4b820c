//! Event-driven exact simulation of the continuous separation process.
//!
//! Between velocity jumps the separation follows the clamped flow
//! `x(t) = clamp(x(T) + (s2 - s1)(t - T), 0, ell)`. Clamp times are solved
//! in closed form, so trajectories are exact piecewise linear functions
//! with no time stepping.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measures::BinnedMeasure;
use crate::velocity::{sample_velocity_path, TumbleKind, VelocityPair, VelocityPairProcess, VelocityPath};
use crate::{Error, Result};

/// Relative boundary snap width, as a fraction of `ell`.
///
/// A state this close to a boundary with outward-pushing velocity is
/// treated as exactly on the boundary; avoids chattering from rounding.
pub const BOUNDARY_SNAP: f64 = 1e-12;

/// Parameters of the continuous process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContParams {
    pub ell: f64,
    pub kind: TumbleKind,
}

impl ContParams {
    pub fn new(ell: f64, kind: TumbleKind) -> Result<Self> {
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ell must be positive and finite, got {ell}"
            )));
        }
        kind.validate()?;
        Ok(ContParams { ell, kind })
    }
}

/// Point of the continuous state space `[0, ell] x Sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContState {
    pub x: f64,
    pub sigma: VelocityPair,
}

impl ContState {
    pub fn new(x: f64, sigma: VelocityPair) -> Self {
        ContState { x, sigma }
    }
}

/// Jam classification of a state.
///
/// A boundary state is jammed exactly when the flow does not re-enter:
/// at 0 when `s2 - s1 <= 0`, at `ell` when `s2 - s1 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateClass {
    Bulk,
    JammedAt0,
    JammedAtL,
}

/// Which boundary a clamp event hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Zero,
    Ell,
}

/// Jam classification per the re-entry case analysis.
pub fn classify(params: &ContParams, state: ContState) -> StateClass {
    let tol = BOUNDARY_SNAP * params.ell;
    let rel = state.sigma.rel_speed();
    if state.x <= tol && rel <= 0 {
        StateClass::JammedAt0
    } else if state.x >= params.ell - tol && rel >= 0 {
        StateClass::JammedAtL
    } else {
        StateClass::Bulk
    }
}

/// Advance the clamped affine flow by `dt` at constant `sigma`.
///
/// Returns the end position and, if the unclamped value exits `[0, ell]`,
/// the clamp offset within `[0, dt]` and the boundary hit.
pub fn flow_segment(
    x0: f64,
    sigma: VelocityPair,
    dt: f64,
    ell: f64,
) -> (f64, Option<(f64, Boundary)>) {
    let v = f64::from(sigma.rel_speed());
    let tol = BOUNDARY_SNAP * ell;
    if v == 0.0 {
        return (x0, None);
    }
    if v > 0.0 {
        if x0 >= ell - tol {
            return (ell, Some((0.0, Boundary::Ell)));
        }
        let end = x0 + v * dt;
        if end > ell {
            (ell, Some(((ell - x0) / v, Boundary::Ell)))
        } else {
            (end, None)
        }
    } else {
        if x0 <= tol {
            return (0.0, Some((0.0, Boundary::Zero)));
        }
        let end = x0 + v * dt;
        if end < 0.0 {
            (0.0, Some((-x0 / v, Boundary::Zero)))
        } else {
            (end, None)
        }
    }
}

/// Affine breakpoint: `x(t) = x + slope (t - t0)` until the next one.
///
/// Slope is the effective slope, 0 during clamp intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub x: f64,
    pub slope: f64,
}

/// Exact piecewise linear separation trajectory on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    /// Nondecreasing in `t`, starting at `t = 0`.
    pub breakpoints: Vec<Breakpoint>,
    /// Times at which the unclamped flow exited the interval.
    pub clamps: Vec<(f64, Boundary)>,
    pub horizon: f64,
}

impl PiecewiseLinearPath {
    /// Exact position at time `t`.
    pub fn x_at(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let i = match self
            .breakpoints
            .partition_point(|bp| bp.t <= t)
        {
            0 => 0,
            p => p - 1,
        };
        let bp = self.breakpoints[i];
        Ok(bp.x + bp.slope * (t - bp.t))
    }
}

/// Exact simulation of the continuous process (min-max construction).
pub fn simulate_continuous(
    params: &ContParams,
    init: ContState,
    horizon: f64,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> Result<(PiecewiseLinearPath, VelocityPath)> {
    if !(horizon > 0.0) {
        return Err(Error::Degenerate(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(0.0..=params.ell).contains(&init.x) {
        return Err(Error::InvalidParameter(format!(
            "x0 = {} outside [0, {}]",
            init.x, params.ell
        )));
    }
    let vpath = sample_velocity_path(params.kind, init.sigma, horizon, rng1, rng2);
    let mut breakpoints = Vec::with_capacity(vpath.events.len() * 2 + 1);
    let mut clamps = Vec::new();
    let mut x = init.x;
    for (t0, t1, sigma) in vpath.segments() {
        let v = f64::from(sigma.rel_speed());
        let (x1, clamp) = flow_segment(x, sigma, t1 - t0, params.ell);
        match clamp {
            Some((tc, b)) => {
                if tc > 0.0 {
                    breakpoints.push(Breakpoint { t: t0, x, slope: v });
                }
                let xb = match b {
                    Boundary::Zero => 0.0,
                    Boundary::Ell => params.ell,
                };
                breakpoints.push(Breakpoint {
                    t: t0 + tc,
                    x: xb,
                    slope: 0.0,
                });
                clamps.push((t0 + tc, b));
            }
            None => breakpoints.push(Breakpoint { t: t0, x, slope: v }),
        }
        x = x1;
    }
    Ok((
        PiecewiseLinearPath {
            breakpoints,
            clamps,
            horizon,
        },
        vpath,
    ))
}

/// Streaming occupation accumulator; merges associatively across chunks
/// or replicas.
#[derive(Debug, Clone)]
pub struct OccupationAccumulator {
    ell: f64,
    kind: TumbleKind,
    bins: usize,
    /// Per sigma index: time spent jammed at 0 and at ell.
    atom0: Vec<f64>,
    atoml: Vec<f64>,
    /// Sigma-major bulk occupation times.
    bulk: Vec<f64>,
    total_time: f64,
}

impl OccupationAccumulator {
    pub fn new(kind: TumbleKind, ell: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidParameter("bins must be >= 1".into()));
        }
        let n = kind.sigma_states().len();
        Ok(OccupationAccumulator {
            ell,
            kind,
            bins,
            atom0: vec![0.0; n],
            atoml: vec![0.0; n],
            bulk: vec![0.0; n * bins],
            total_time: 0.0,
        })
    }

    /// Occupation of one affine stretch: x moves from `x0` at slope
    /// `sigma.rel_speed()` for `dt` without clamping inside.
    /// Occupation of a stretch where x does not move (zero slope or
    /// clamped at a boundary).
    fn add_still(&mut self, x0: f64, sigma: VelocityPair, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let si = self.kind.sigma_index(sigma);
        let tol = BOUNDARY_SNAP * self.ell;
        self.total_time += dt;
        if x0 <= tol {
            self.atom0[si] += dt;
        } else if x0 >= self.ell - tol {
            self.atoml[si] += dt;
        } else {
            let b = ((x0 / self.ell * self.bins as f64) as usize).min(self.bins - 1);
            self.bulk[si * self.bins + b] += dt;
        }
    }

    fn add_affine(&mut self, x0: f64, sigma: VelocityPair, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let si = self.kind.sigma_index(sigma);
        let v = f64::from(sigma.rel_speed());
        let tol = BOUNDARY_SNAP * self.ell;
        if v == 0.0 || dt * v.abs() < tol {
            self.add_still(x0, sigma, dt);
            return;
        }
        self.total_time += dt;
        let x1 = x0 + v * dt;
        let (lo, hi) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
        let rate = dt / (hi - lo);
        let h = self.ell / self.bins as f64;
        let b_lo = ((lo / h) as usize).min(self.bins - 1);
        let b_hi = ((hi / h) as usize).min(self.bins - 1);
        for b in b_lo..=b_hi {
            let seg = (hi.min((b + 1) as f64 * h) - lo.max(b as f64 * h)).max(0.0);
            self.bulk[si * self.bins + b] += seg * rate;
        }
    }

    /// Advance one constant-sigma interval of length `dt` from `x0`,
    /// accumulating occupation; returns the end position.
    pub fn add_segment(&mut self, x0: f64, sigma: VelocityPair, dt: f64) -> f64 {
        let (x1, clamp) = flow_segment(x0, sigma, dt, self.ell);
        match clamp {
            Some((tc, _)) => {
                self.add_affine(x0, sigma, tc);
                // clamped remainder sits on the boundary
                let si = self.kind.sigma_index(sigma);
                self.total_time += dt - tc;
                if x1 <= BOUNDARY_SNAP * self.ell {
                    self.atom0[si] += dt - tc;
                } else {
                    self.atoml[si] += dt - tc;
                }
            }
            None => self.add_affine(x0, sigma, dt),
        }
        x1
    }

    pub fn merge(&mut self, other: &OccupationAccumulator) {
        debug_assert_eq!(self.bins, other.bins);
        for (a, b) in self.atom0.iter_mut().zip(&other.atom0) {
            *a += b;
        }
        for (a, b) in self.atoml.iter_mut().zip(&other.atoml) {
            *a += b;
        }
        for (a, b) in self.bulk.iter_mut().zip(&other.bulk) {
            *a += b;
        }
        self.total_time += other.total_time;
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Normalized empirical measure.
    pub fn finish(&self) -> Result<BinnedMeasure> {
        if self.total_time <= 0.0 {
            return Err(Error::Degenerate("zero-length occupation".into()));
        }
        let t = self.total_time;
        Ok(BinnedMeasure {
            ell: self.ell,
            bins: self.bins,
            sigma: self.kind.sigma_states(),
            atom0: self.atom0.iter().map(|a| a / t).collect(),
            atoml: self.atoml.iter().map(|a| a / t).collect(),
            bulk: self.bulk.iter().map(|a| a / t).collect(),
        })
    }
}

/// Empirical occupation measure of a simulated path.
pub fn occupation_measure(
    path: &PiecewiseLinearPath,
    vpath: &VelocityPath,
    kind: TumbleKind,
    ell: f64,
    bins: usize,
) -> Result<BinnedMeasure> {
    if path.horizon <= 0.0 {
        return Err(Error::Degenerate("zero-length path".into()));
    }
    let mut acc = OccupationAccumulator::new(kind, ell, bins)?;
    let n = path.breakpoints.len();
    for i in 0..n {
        let bp = path.breakpoints[i];
        let t1 = if i + 1 < n {
            path.breakpoints[i + 1].t
        } else {
            path.horizon
        };
        let sigma = vpath.sigma_at(bp.t);
        if bp.slope == 0.0 {
            // clamp intervals and zero-slope sigmas both sit still; route
            // through the stationary branch so boundary time lands on atoms
            acc.add_still(bp.x, sigma, t1 - bp.t);
        } else {
            acc.add_affine(bp.x, sigma, t1 - bp.t);
        }
    }
    acc.finish()
}

/// Long-horizon occupation without retaining breakpoints.
pub fn simulate_occupation(
    params: &ContParams,
    init: ContState,
    horizon: f64,
    bins: usize,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> Result<BinnedMeasure> {
    if !(horizon > 0.0) {
        return Err(Error::Degenerate("horizon must be positive".into()));
    }
    let mut acc = OccupationAccumulator::new(params.kind, params.ell, bins)?;
    let mut proc = VelocityPairProcess::new(params.kind, init.sigma, rng1, rng2);
    let mut t = 0.0;
    let mut x = init.x;
    loop {
        let t_next = proc.next_jump_time().min(horizon);
        x = acc.add_segment(x, proc.sigma(), t_next - t);
        t = t_next;
        if t >= horizon {
            break;
        }
        proc.advance();
    }
    acc.finish()
}

/// End state of a long run, without statistics. Used by mixing couplings.
pub fn evolve_state(
    params: &ContParams,
    init: ContState,
    horizon: f64,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> ContState {
    let mut proc = VelocityPairProcess::new(params.kind, init.sigma, rng1, rng2);
    let mut t = 0.0;
    let mut x = init.x;
    loop {
        let t_next = proc.next_jump_time().min(horizon);
        x = flow_segment(x, proc.sigma(), t_next - t, params.ell).0;
        t = t_next;
        if t >= horizon {
            break;
        }
        proc.advance();
    }
    ContState {
        x,
        sigma: proc.sigma(),
    }
}

/// States at the given sorted times, from one exact pass.
pub fn evolve_snapshots(
    params: &ContParams,
    init: ContState,
    times: &[f64],
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> Vec<ContState> {
    let mut out = Vec::with_capacity(times.len());
    let mut proc = VelocityPairProcess::new(params.kind, init.sigma, rng1, rng2);
    let mut t = 0.0;
    let mut x = init.x;
    for &snap in times {
        while proc.next_jump_time() <= snap {
            let t_next = proc.next_jump_time();
            x = flow_segment(x, proc.sigma(), t_next - t, params.ell).0;
            t = t_next;
            proc.advance();
        }
        let x_snap = flow_segment(x, proc.sigma(), snap - t, params.ell).0;
        out.push(ContState {
            x: x_snap,
            sigma: proc.sigma(),
        });
        x = x_snap;
        t = snap;
    }
    out
}
