//! The discrete separation process on {1..L} x Sigma.
//!
//! Two independent rate-gamma Poisson clocks move the separation: clock 1
//! applies -s1, clock 2 applies +s2, both clamped to {1..L}. Velocities
//! evolve exactly as in [`crate::velocity`], independently of position.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::transport::DiscreteMeasure;
use crate::velocity::{pair_generator, TumbleKind, VelocityPair, VelocityPairProcess};
use crate::{Error, Result};

/// Parameters of the discrete process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Number of sites L.
    pub l_sites: usize,
    pub ell: f64,
    /// Rate of each position clock.
    pub gamma: f64,
    pub kind: TumbleKind,
    /// Whether gamma was set by the diffusive scaling gamma = (L-1)/ell.
    pub scaled: bool,
}

impl LatticeParams {
    pub fn new(l_sites: usize, ell: f64, gamma: f64, kind: TumbleKind) -> Result<Self> {
        if l_sites < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 sites, got {l_sites}"
            )));
        }
        if !(ell > 0.0) || gamma < 0.0 {
            return Err(Error::InvalidParameter(
                "ell must be positive and gamma nonnegative".into(),
            ));
        }
        kind.validate()?;
        Ok(LatticeParams {
            l_sites,
            ell,
            gamma,
            kind,
            scaled: false,
        })
    }

    /// Parameters under the convergence scaling gamma = (L-1)/ell.
    pub fn scaled(l_sites: usize, ell: f64, kind: TumbleKind) -> Result<Self> {
        let mut p = LatticeParams::new(l_sites, ell, (l_sites as f64 - 1.0) / ell, kind)?;
        p.scaled = true;
        Ok(p)
    }

    pub fn n_sigma(&self) -> usize {
        self.kind.alphabet().len().pow(2)
    }

    pub fn n_states(&self) -> usize {
        self.l_sites * self.n_sigma()
    }

    /// Flat index of a state: site-major, sigma within.
    pub fn state_index(&self, state: LatticeState) -> usize {
        (state.y - 1) * self.n_sigma() + self.kind.sigma_index(state.sigma)
    }

    pub fn state_at(&self, index: usize) -> LatticeState {
        let ns = self.n_sigma();
        LatticeState {
            y: index / ns + 1,
            sigma: self.kind.sigma_states()[index % ns],
        }
    }
}

/// State of the discrete process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeState {
    /// Site in {1..L}.
    pub y: usize,
    pub sigma: VelocityPair,
}

/// Which Poisson clock rang.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    N1,
    N2,
}

fn clamp_site(z: i64, l_sites: usize) -> usize {
    z.clamp(1, l_sites as i64) as usize
}

/// One position update: clock 1 applies -s1, clock 2 applies +s2, clamped.
pub fn step_discrete(state: LatticeState, clock: Clock, l_sites: usize) -> LatticeState {
    let y = state.y as i64;
    let y1 = match clock {
        Clock::N1 => y - i64::from(state.sigma.s1),
        Clock::N2 => y + i64::from(state.sigma.s2),
    };
    LatticeState {
        y: clamp_site(y1, l_sites),
        sigma: state.sigma,
    }
}

/// Changes-only trajectory of the discrete process.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    pub initial: LatticeState,
    pub events: Vec<(f64, LatticeState)>,
    pub horizon: f64,
}

impl DiscreteTrajectory {
    pub fn state_at(&self, t: f64) -> LatticeState {
        match self.events.iter().rev().find(|(s, _)| *s <= t) {
            Some(&(_, st)) => st,
            None => self.initial,
        }
    }
}

pub(crate) struct PoissonClock {
    pub(crate) rate: f64,
    pub(crate) next: f64,
    rng: ChaCha8Rng,
}

impl PoissonClock {
    pub(crate) fn new(rate: f64, mut rng: ChaCha8Rng) -> Self {
        let next = if rate > 0.0 {
            -rng.gen::<f64>().ln() / rate
        } else {
            f64::INFINITY
        };
        PoissonClock { rate, next, rng }
    }

    pub(crate) fn advance(&mut self) -> f64 {
        let t = self.next;
        self.next = t + -self.rng.gen::<f64>().ln() / self.rate;
        t
    }
}

/// Streaming simulation driver; yields every event (including null moves)
/// to a visitor. Couplings and occupation statistics share this loop.
pub fn drive_discrete<F>(
    params: &LatticeParams,
    init: LatticeState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rc1: ChaCha8Rng,
    rc2: ChaCha8Rng,
    mut visit: F,
) -> Result<LatticeState>
where
    F: FnMut(f64, LatticeState),
{
    if !(horizon > 0.0) {
        return Err(Error::Degenerate("horizon must be positive".into()));
    }
    if init.y < 1 || init.y > params.l_sites {
        return Err(Error::SiteOutOfRange {
            k: init.y as i64,
            l_sites: params.l_sites,
        });
    }
    let mut vel = VelocityPairProcess::new(params.kind, init.sigma, rv1, rv2);
    let mut c1 = PoissonClock::new(params.gamma, rc1);
    let mut c2 = PoissonClock::new(params.gamma, rc2);
    let mut state = init;
    loop {
        let tv = vel.next_jump_time();
        let t = tv.min(c1.next).min(c2.next);
        if t > horizon {
            return Ok(state);
        }
        if tv <= c1.next && tv <= c2.next {
            let (t, sigma) = vel.advance();
            state.sigma = sigma;
            visit(t, state);
        } else if c1.next <= c2.next {
            let t = c1.advance();
            state = step_discrete(state, Clock::N1, params.l_sites);
            visit(t, state);
        } else {
            let t = c2.advance();
            state = step_discrete(state, Clock::N2, params.l_sites);
            visit(t, state);
        }
    }
}

/// Exact simulation, retaining only actual state changes.
pub fn simulate_discrete(
    params: &LatticeParams,
    init: LatticeState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rc1: ChaCha8Rng,
    rc2: ChaCha8Rng,
) -> Result<DiscreteTrajectory> {
    let mut events = Vec::new();
    let mut prev = init;
    drive_discrete(params, init, horizon, rv1, rv2, rc1, rc2, |t, st| {
        if st != prev {
            events.push((t, st));
            prev = st;
        }
    })?;
    Ok(DiscreteTrajectory {
        initial: init,
        events,
        horizon,
    })
}

/// Holding-time occupation of a long run, normalized to a probability
/// vector over the flat state index.
pub fn simulate_occupation_discrete(
    params: &LatticeParams,
    init: LatticeState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rc1: ChaCha8Rng,
    rc2: ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut occ = vec![0.0; params.n_states()];
    let mut prev_t = 0.0;
    let mut prev = init;
    drive_discrete(params, init, horizon, rv1, rv2, rc1, rc2, |t, st| {
        occ[params.state_index(prev)] += t - prev_t;
        prev_t = t;
        prev = st;
    })?;
    occ[params.state_index(prev)] += horizon - prev_t;
    for o in &mut occ {
        *o /= horizon;
    }
    Ok(occ)
}

/// Sparse generator rows: off-diagonal (column, rate) pairs plus the
/// diagonal, with jammed self-loops dropped.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    pub n: usize,
    pub off: Vec<Vec<(usize, f64)>>,
    pub diag: Vec<f64>,
}

impl SparseGenerator {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.off.iter().enumerate() {
            m[(i, i)] = self.diag[i];
            for &(j, rate) in row {
                m[(i, j)] += rate;
            }
        }
        m
    }

    /// Sup-norm of pi G for a row vector pi.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let mut col = vec![0.0f64; self.n];
        for (i, row) in self.off.iter().enumerate() {
            col[i] += pi[i] * self.diag[i];
            for &(j, rate) in row {
                col[j] += pi[i] * rate;
            }
        }
        col.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Strong connectivity of the rate graph.
    pub fn is_irreducible(&self) -> bool {
        let reach = |forward: bool| -> bool {
            let mut seen = vec![false; self.n];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            // reverse adjacency built on demand
            let mut radj: Vec<Vec<usize>> = vec![Vec::new(); if forward { 0 } else { self.n }];
            if !forward {
                for (i, row) in self.off.iter().enumerate() {
                    for &(j, rate) in row {
                        if rate > 0.0 {
                            radj[j].push(i);
                        }
                    }
                }
            }
            while let Some(i) = stack.pop() {
                let push = |j: usize, seen: &mut Vec<bool>, stack: &mut Vec<usize>, count: &mut usize| {
                    if !seen[j] {
                        seen[j] = true;
                        *count += 1;
                        stack.push(j);
                    }
                };
                if forward {
                    for &(j, rate) in &self.off[i] {
                        if rate > 0.0 {
                            push(j, &mut seen, &mut stack, &mut count);
                        }
                    }
                } else {
                    for &j in &radj[i] {
                        push(j, &mut seen, &mut stack, &mut count);
                    }
                }
            }
            count == self.n
        };
        reach(true) && reach(false)
    }
}

/// Full generator of the discrete process over the flat state index.
pub fn discrete_generator(params: &LatticeParams) -> SparseGenerator {
    let n = params.n_states();
    let ns = params.n_sigma();
    let q = pair_generator(params.kind);
    let states = params.kind.sigma_states();
    let mut off: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(ns + 2); n];
    let mut diag = vec![0.0; n];
    for y in 1..=params.l_sites {
        for (si, &sigma) in states.iter().enumerate() {
            let i = (y - 1) * ns + si;
            for sj in 0..ns {
                if sj != si && q[(si, sj)] > 0.0 {
                    off[i].push(((y - 1) * ns + sj, q[(si, sj)]));
                    diag[i] -= q[(si, sj)];
                }
            }
            if params.gamma > 0.0 {
                for clock in [Clock::N1, Clock::N2] {
                    let to = step_discrete(LatticeState { y, sigma }, clock, params.l_sites);
                    if to.y != y {
                        off[i].push(((to.y - 1) * ns + si, params.gamma));
                        diag[i] -= params.gamma;
                    }
                }
            }
        }
    }
    SparseGenerator { n, off, diag }
}

/// Stationary distribution of the discrete process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryVector {
    pub params: LatticeParams,
    /// Probabilities over the flat state index.
    pub probs: Vec<f64>,
}

/// Threshold under which the stationary solve goes dense.
const DENSE_SOLVE_LIMIT: usize = 6000;

/// Solve pi G = 0, sum pi = 1 to sup-norm residual 1e-12.
pub fn stationary_distribution(params: &LatticeParams) -> Result<StationaryVector> {
    let g = discrete_generator(params);
    let probs = if g.n <= DENSE_SOLVE_LIMIT {
        solve_dense(&g)?
    } else {
        solve_power(&g)?
    };
    let res = g.residual(&probs);
    if res > 1e-12 {
        return Err(Error::SingularSolve {
            residual: res,
            tol: 1e-12,
        });
    }
    Ok(StationaryVector {
        params: *params,
        probs,
    })
}

fn solve_dense(g: &SparseGenerator) -> Result<Vec<f64>> {
    // solve A x = e0 where A is G^T with its first row replaced by ones
    let n = g.n;
    let mut a = g.to_dense().transpose();
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let lu = a.clone().lu();
    let mut b = DVector::zeros(n);
    b[0] = 1.0;
    let mut x = lu
        .solve(&b)
        .ok_or(Error::SingularSolve {
            residual: f64::INFINITY,
            tol: 1e-12,
        })?;
    // iterative refinement against the augmented system
    for _ in 0..4 {
        let r = &b - &a * &x;
        if r.amax() < 1e-15 {
            break;
        }
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        } else {
            break;
        }
    }
    let mut probs: Vec<f64> = x.iter().map(|p| p.max(0.0)).collect();
    let s: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= s;
    }
    Ok(probs)
}

fn solve_power(g: &SparseGenerator) -> Result<Vec<f64>> {
    // power iteration on the uniformized chain P = I + G / lambda
    let lambda = g.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) * 1.05;
    let n = g.n;
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    for _ in 0..2_000_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in g.off.iter().enumerate() {
            next[i] += pi[i] * (1.0 + g.diag[i] / lambda);
            for &(j, rate) in row {
                next[j] += pi[i] * rate / lambda;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        std::mem::swap(&mut pi, &mut next);
        if g.residual(&pi) <= 1e-13 {
            return Ok(pi);
        }
    }
    Err(Error::SingularSolve {
        residual: g.residual(&pi),
        tol: 1e-12,
    })
}

impl StationaryVector {
    /// Marginal law of the velocity pair.
    pub fn sigma_marginal(&self) -> Vec<f64> {
        let ns = self.params.n_sigma();
        let mut m = vec![0.0; ns];
        for (i, p) in self.probs.iter().enumerate() {
            m[i % ns] += p;
        }
        m
    }

    /// Pushforward under the site embedding, as point masses in
    /// (x, s1, s2) space.
    pub fn embedded_measure(&self) -> DiscreteMeasure {
        let states = self.params.kind.sigma_states();
        let ns = states.len();
        let mut points = Vec::with_capacity(self.probs.len());
        let mut mass = Vec::with_capacity(self.probs.len());
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                let y = i / ns + 1;
                let s = states[i % ns];
                let x = embed_position(y, self.params.l_sites, self.params.ell)
                    .expect("index in range");
                points.push([x, f64::from(s.s1), f64::from(s.s2)]);
                mass.push(p);
            }
        }
        DiscreteMeasure { points, mass }
    }
}

/// Exact transient law at time `t` from a deterministic start, by
/// uniformization (truncated Poisson mixture of powers of the
/// uniformized kernel; truncation error below 1e-13).
pub fn transient_law(params: &LatticeParams, init: LatticeState, t: f64) -> Vec<f64> {
    let g = discrete_generator(params);
    let lambda = g.diag.iter().fold(1e-300f64, |m, d| m.max(d.abs()));
    let n = g.n;
    let mut v = vec![0.0; n];
    v[params.state_index(init)] = 1.0;
    let mut out = vec![0.0; n];
    let mut next = vec![0.0; n];
    // Poisson(lambda t) weights, forward recurrence
    let lt = lambda * t;
    let mut weight = (-lt).exp();
    let mut tail = 1.0 - weight;
    for (o, x) in out.iter_mut().zip(&v) {
        *o += weight * x;
    }
    let mut k = 0u64;
    while tail > 1e-13 && k < 100_000_000 {
        k += 1;
        weight *= lt / k as f64;
        tail -= weight;
        // v <- v P with P = I + G/lambda
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in g.off.iter().enumerate() {
            next[i] += v[i] * (1.0 + g.diag[i] / lambda);
            for &(j, rate) in row {
                next[j] += v[i] * rate / lambda;
            }
        }
        std::mem::swap(&mut v, &mut next);
        for (o, x) in out.iter_mut().zip(&v) {
            *o += weight * x;
        }
    }
    out
}

/// Affine site embedding: site 1 -> 0, site L -> ell.
pub fn embed_position(k: usize, l_sites: usize, ell: f64) -> Result<f64> {
    if k < 1 || k > l_sites {
        return Err(Error::SiteOutOfRange {
            k: k as i64,
            l_sites,
        });
    }
    Ok(ell * (k - 1) as f64 / (l_sites - 1) as f64)
}

/// Reflecting fold of the integers onto {1..L}: periodic with period 2L,
/// identity on {1..L}, reversed on {L+1..2L}.
pub fn fold_p_l(z: i64, l_sites: usize) -> usize {
    let l = l_sites as i64;
    let r = (z - 1).rem_euclid(2 * l) + 1;
    (if r <= l { r } else { 2 * l + 1 - r }) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamRole};
    use approx::assert_relative_eq;

    fn params(l: usize, gamma: f64) -> LatticeParams {
        LatticeParams::new(l, 1.0, gamma, TumbleKind::Instantaneous { omega: 1.0 }).unwrap()
    }

    #[test]
    fn step_clamps_at_both_ends() {
        let s = LatticeState {
            y: 1,
            sigma: VelocityPair::new(1, 1),
        };
        assert_eq!(step_discrete(s, Clock::N1, 10).y, 1);
        let s = LatticeState {
            y: 5,
            sigma: VelocityPair::new(1, 1),
        };
        assert_eq!(step_discrete(s, Clock::N1, 10).y, 4);
        let s = LatticeState {
            y: 10,
            sigma: VelocityPair::new(-1, 1),
        };
        assert_eq!(step_discrete(s, Clock::N2, 10).y, 10);
    }

    #[test]
    fn scaled_params_satisfy_gamma_ell_identity() {
        let p = LatticeParams::scaled(101, 0.5, TumbleKind::Instantaneous { omega: 1.0 }).unwrap();
        assert_relative_eq!(p.gamma * p.ell, 100.0, epsilon = 1e-12);
        assert!(p.scaled);
    }

    #[test]
    fn zero_gamma_freezes_position() {
        let p = params(7, 0.0);
        let init = LatticeState {
            y: 4,
            sigma: VelocityPair::new(1, -1),
        };
        let traj = simulate_discrete(
            &p,
            init,
            50.0,
            stream(1, 0, StreamRole::Velocity1),
            stream(1, 0, StreamRole::Velocity2),
            stream(1, 0, StreamRole::Clock1),
            stream(1, 0, StreamRole::Clock2),
        )
        .unwrap();
        assert!(traj.events.iter().all(|(_, s)| s.y == 4));
        assert!(!traj.events.is_empty());
    }

    #[test]
    fn trajectory_stays_in_site_range() {
        let p = params(2, 3.0);
        let init = LatticeState {
            y: 1,
            sigma: VelocityPair::new(1, 1),
        };
        let traj = simulate_discrete(
            &p,
            init,
            100.0,
            stream(2, 0, StreamRole::Velocity1),
            stream(2, 0, StreamRole::Velocity2),
            stream(2, 0, StreamRole::Clock1),
            stream(2, 0, StreamRole::Clock2),
        )
        .unwrap();
        assert!(traj.events.iter().all(|(_, s)| s.y >= 1 && s.y <= 2));
    }

    #[test]
    fn generator_rows_sum_to_zero_and_connect() {
        for kind in [
            TumbleKind::Instantaneous { omega: 1.0 },
            TumbleKind::Finite {
                alpha: 1.0,
                beta: 2.0,
            },
        ] {
            for l in [2usize, 3, 5, 9] {
                let p = LatticeParams::new(l, 1.0, 1.7, kind).unwrap();
                let g = discrete_generator(&p);
                let dense = g.to_dense();
                for i in 0..g.n {
                    assert_relative_eq!(dense.row(i).sum(), 0.0, epsilon = 1e-12);
                }
                assert!(g.is_irreducible(), "L={l}, {kind:?}");
            }
        }
    }

    #[test]
    fn jammed_clock_rate_is_dropped_from_generator() {
        // at (y=1, sigma=(1,1)) clock 1 is a null move; only clock 2 and
        // the two velocity flips leave the state
        let p = params(2, 1.0);
        let g = discrete_generator(&p);
        let i = p.state_index(LatticeState {
            y: 1,
            sigma: VelocityPair::new(1, 1),
        });
        assert_relative_eq!(g.diag[i], -(1.0 + 1.0 + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn stationary_matches_velocity_product_marginal() {
        let kind = TumbleKind::Finite {
            alpha: 0.7,
            beta: 1.3,
        };
        let p = LatticeParams::new(6, 1.0, 2.0, kind).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        let single = kind.single_stationary();
        let marg = pi.sigma_marginal();
        for (i1, p1) in single.iter().enumerate() {
            for (i2, p2) in single.iter().enumerate() {
                assert_relative_eq!(marg[i1 * 3 + i2], p1 * p2, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn stationary_has_particle_exchange_symmetry() {
        let p = params(8, 2.0);
        let pi = stationary_distribution(&p).unwrap();
        let l = p.l_sites;
        for y in 1..=l {
            for s in p.kind.sigma_states() {
                let a = pi.probs[p.state_index(LatticeState { y, sigma: s })];
                let b = pi.probs[p.state_index(LatticeState {
                    y: l + 1 - y,
                    sigma: VelocityPair::new(s.s2, s.s1),
                })];
                assert_relative_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn stationary_matches_long_simulation() {
        let p = params(2, 1.0);
        let pi = stationary_distribution(&p).unwrap();
        // ~4e6 events: total event rate 2 gamma + 2 omega = 4
        let occ = simulate_occupation_discrete(
            &p,
            LatticeState {
                y: 1,
                sigma: VelocityPair::new(1, 1),
            },
            1_000_000.0,
            stream(4, 0, StreamRole::Velocity1),
            stream(4, 0, StreamRole::Velocity2),
            stream(4, 0, StreamRole::Clock1),
            stream(4, 0, StreamRole::Clock2),
        )
        .unwrap();
        let tv = 0.5
            * pi.probs
                .iter()
                .zip(&occ)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        assert!(tv <= 0.003, "TV {tv}");
    }

    #[test]
    fn occupation_matches_stationary_medium_lattice() {
        let p = params(5, 4.0);
        let pi = stationary_distribution(&p).unwrap();
        let occ = simulate_occupation_discrete(
            &p,
            LatticeState {
                y: 3,
                sigma: VelocityPair::new(1, -1),
            },
            10_000.0,
            stream(5, 0, StreamRole::Velocity1),
            stream(5, 0, StreamRole::Velocity2),
            stream(5, 0, StreamRole::Clock1),
            stream(5, 0, StreamRole::Clock2),
        )
        .unwrap();
        let tv = 0.5
            * pi.probs
                .iter()
                .zip(&occ)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        assert!(tv <= 0.02, "TV {tv}");
    }

    #[test]
    fn embedding_endpoints_and_midpoint() {
        assert_relative_eq!(embed_position(1, 11, 1.0).unwrap(), 0.0);
        assert_relative_eq!(embed_position(11, 11, 1.0).unwrap(), 1.0);
        assert_relative_eq!(embed_position(6, 11, 1.0).unwrap(), 0.5);
        assert!(embed_position(0, 11, 1.0).is_err());
        assert!(embed_position(12, 11, 1.0).is_err());
    }

    #[test]
    fn fold_examples_and_lipschitz() {
        let l = 7usize;
        assert_eq!(fold_p_l(l as i64 + 1, l), l);
        assert_eq!(fold_p_l(2 * l as i64 + 1, l), 1);
        for k in 1..=l as i64 {
            assert_eq!(fold_p_l(k, l), k as usize);
            assert_eq!(fold_p_l(k + 2 * l as i64, l), k as usize);
        }
        for z in -(3 * l as i64)..(3 * l as i64) {
            let d = fold_p_l(z + 1, l) as i64 - fold_p_l(z, l) as i64;
            assert!(d.abs() <= 1);
        }
    }

    #[test]
    fn fold_lumps_the_symmetric_walk_onto_the_clamped_walk() {
        // with equal velocities the position is a +-1 walk at rate gamma
        // each way; folding it must reproduce the clamped rates
        for l in 2..=12usize {
            for y1 in 1..=l {
                // any representative gives the same lumped rates
                for m in -2i64..=2 {
                    for z1 in [y1 as i64 + 2 * m * l as i64, {
                        let k = 2 * l as i64 + 1 - y1 as i64;
                        k + 2 * m * l as i64
                    }] {
                        assert_eq!(fold_p_l(z1, l), y1);
                        let mut lumped = vec![0.0f64; l + 1];
                        lumped[fold_p_l(z1 - 1, l)] += 1.0;
                        lumped[fold_p_l(z1 + 1, l)] += 1.0;
                        // clamped walk from y1: -1 and +1, clamped
                        let mut direct = vec![0.0f64; l + 1];
                        direct[(y1.max(2)) - 1] += 1.0;
                        direct[(y1 + 1).min(l)] += 1.0;
                        assert_eq!(lumped, direct, "L={l} y1={y1} z1={z1}");
                    }
                }
            }
        }
    }
}
