//! Couplings between the process variants and the experiment harnesses
//! built on them.
//!
//! Three couplings are implemented:
//!
//! * discrete-continuous: both members share one velocity path; the
//!   lattice member accumulates the shared Poisson rings, clamped for
//!   non-aligned velocity pairs and folded for aligned ones,
//! * discrete-discrete: shared rings, per-coordinate velocity splice,
//! * continuous-continuous: per-coordinate velocity splice; positions
//!   meet at a jam and stay together.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{
    fold_p_l, step_discrete, Clock, DiscreteTrajectory, LatticeParams, LatticeState, PoissonClock,
};
use crate::pdmp::{flow_segment, ContParams, ContState};
use crate::rng::{stream, StreamRole};
use crate::velocity::{SingleVelocityProcess, TumbleKind, VelocityPair, VelocityPairProcess};
use crate::{Error, Result};

/// One constant-velocity, constant-site stretch of a discrete-continuous
/// coupled run. `x` is affine: x(t) = x0 + slope (t - t0).
#[derive(Debug, Clone, Copy)]
pub struct DcSegment {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub slope: f64,
    pub sigma: VelocityPair,
    pub y: usize,
}

/// Summary of one discrete-continuous coupled run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DcResult {
    pub initial_gap: f64,
    pub sup_deviation: f64,
    pub end_x: f64,
    pub end_y: usize,
    pub end_sigma: VelocityPair,
}

/// Coupled run of the continuous process and its lattice companion under
/// the convergence scaling gamma = (L-1)/ell.
///
/// The lattice member accumulates ring increments since the last velocity
/// jump; the accumulated walk is clamped for non-aligned velocity pairs
/// and reflected (folded) for aligned ones. Between events the position
/// gap is affine, so the supremum of |i_L(y) - x| is attained at events
/// and is tracked exactly. The visitor receives every affine stretch.
pub fn couple_discrete_continuous<F>(
    cont: &ContParams,
    l_sites: usize,
    init: ContState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rc1: ChaCha8Rng,
    rc2: ChaCha8Rng,
    mut visit: F,
) -> Result<DcResult>
where
    F: FnMut(DcSegment),
{
    if !(horizon > 0.0) {
        return Err(Error::Degenerate("horizon must be positive".into()));
    }
    if l_sites < 2 {
        return Err(Error::InvalidParameter("need at least 2 sites".into()));
    }
    let ell = cont.ell;
    let scale = ell / (l_sites as f64 - 1.0);
    let gamma = 1.0 / scale;
    let embed = |y: usize| (y - 1) as f64 * scale;

    let mut y = ((init.x / ell) * (l_sites as f64 - 1.0)).floor() as i64 + 1;
    y = y.clamp(1, l_sites as i64);
    let mut y = y as usize;

    let mut vel = VelocityPairProcess::new(cont.kind, init.sigma, rv1, rv2);
    let mut c1 = PoissonClock::new(gamma, rc1);
    let mut c2 = PoissonClock::new(gamma, rc2);

    let mut t = 0.0;
    let mut x = init.x;
    let mut sigma = init.sigma;
    // ring counts since the last velocity jump, and the site at that jump
    let (mut n1, mut n2) = (0i64, 0i64);
    let mut y_anchor = y as i64;

    let initial_gap = (embed(y) - x).abs();
    let mut sup = initial_gap;

    loop {
        let t_ev = vel.next_jump_time().min(c1.next).min(c2.next);
        let t_next = t_ev.min(horizon);
        let (x_end, clamp) = flow_segment(x, sigma, t_next - t, ell);
        let slope = f64::from(sigma.rel_speed());
        match clamp {
            Some((tc, _)) if tc > 0.0 => {
                visit(DcSegment {
                    t0: t,
                    t1: t + tc,
                    x0: x,
                    slope,
                    sigma,
                    y,
                });
                visit(DcSegment {
                    t0: t + tc,
                    t1: t_next,
                    x0: x_end,
                    slope: 0.0,
                    sigma,
                    y,
                });
            }
            _ => visit(DcSegment {
                t0: t,
                t1: t_next,
                x0: x,
                slope: if clamp.is_some() { 0.0 } else { slope },
                sigma,
                y,
            }),
        }
        sup = sup.max((embed(y) - x_end).abs());
        x = x_end;
        t = t_next;
        if t_ev > horizon {
            break;
        }
        if vel.next_jump_time() <= c1.next && vel.next_jump_time() <= c2.next {
            sigma = vel.advance().1;
            y_anchor = y as i64;
            n1 = 0;
            n2 = 0;
        } else {
            if c1.next <= c2.next {
                c1.advance();
                n1 += 1;
            } else {
                c2.advance();
                n2 += 1;
            }
            let z = y_anchor - i64::from(sigma.s1) * n1 + i64::from(sigma.s2) * n2;
            y = if sigma.s1 == sigma.s2 && sigma.s1 != 0 {
                fold_p_l(z, l_sites)
            } else {
                z.clamp(1, l_sites as i64) as usize
            };
            sup = sup.max((embed(y) - x).abs());
        }
    }
    Ok(DcResult {
        initial_gap,
        sup_deviation: sup,
        end_x: x,
        end_y: y,
        end_sigma: sigma,
    })
}

/// Probability bound on the sup deviation exceeding `epsilon` up to time
/// `t`: (1/eps)(ell/(L-1) + 8 sqrt(t ((eta t)^2 + 3 eta t + 1) ell/(L-1))).
pub fn deviation_bound(epsilon: f64, t: f64, l_sites: usize, ell: f64, eta: f64) -> f64 {
    let h = ell / (l_sites as f64 - 1.0);
    (h + 8.0 * (t * ((eta * t).powi(2) + 3.0 * eta * t + 1.0) * h).sqrt()) / epsilon
}

/// Parallel replicas of the discrete-continuous coupling; returns each
/// replica's sup deviation on [0, t].
pub fn deviation_samples(
    cont: &ContParams,
    l_sites: usize,
    init: ContState,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            couple_discrete_continuous(
                cont,
                l_sites,
                init,
                t,
                stream(seed, r, StreamRole::Velocity1),
                stream(seed, r, StreamRole::Velocity2),
                stream(seed, r, StreamRole::Clock1),
                stream(seed, r, StreamRole::Clock2),
                |_| {},
            )
            .map(|res| res.sup_deviation)
        })
        .collect()
}

/// Coupled pair of discrete trajectories sharing the position clocks.
#[derive(Debug, Clone)]
pub struct DdCoupling {
    pub traj_a: DiscreteTrajectory,
    pub traj_b: DiscreteTrajectory,
    /// Every ring of the shared clocks.
    pub rings: Vec<(f64, Clock)>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub tau_sigma: Option<f64>,
    pub tau_coupling: Option<f64>,
}

/// Discrete-discrete coupling: shared rings; each velocity coordinate
/// evolves independently across members until the two copies first agree,
/// then they are identified.
#[allow(clippy::too_many_arguments)]
pub fn couple_discrete_discrete(
    params: &LatticeParams,
    init_a: LatticeState,
    init_b: LatticeState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rt1: ChaCha8Rng,
    rt2: ChaCha8Rng,
    rc1: ChaCha8Rng,
    rc2: ChaCha8Rng,
) -> Result<DdCoupling> {
    if !(horizon > 0.0) {
        return Err(Error::Degenerate("horizon must be positive".into()));
    }
    let kind = params.kind;
    let mut a1 = SingleVelocityProcess::new(kind, init_a.sigma.s1, rv1);
    let mut a2 = SingleVelocityProcess::new(kind, init_a.sigma.s2, rv2);
    let mut b1 = SingleVelocityProcess::new(kind, init_b.sigma.s1, rt1);
    let mut b2 = SingleVelocityProcess::new(kind, init_b.sigma.s2, rt2);
    let mut c1 = PoissonClock::new(params.gamma, rc1);
    let mut c2 = PoissonClock::new(params.gamma, rc2);

    let mut a = init_a;
    let mut b = init_b;
    let mut tau1 = (a.sigma.s1 == b.sigma.s1).then_some(0.0);
    let mut tau2 = (a.sigma.s2 == b.sigma.s2).then_some(0.0);
    let mut tau_sigma = tau1.and(tau2).map(|_| 0.0);
    let mut tau_coupling = (tau_sigma.is_some() && a == b).then_some(0.0);

    let mut events_a = Vec::new();
    let mut events_b = Vec::new();
    let mut rings = Vec::new();

    loop {
        let tb1 = if tau1.is_none() {
            b1.next_jump_time()
        } else {
            f64::INFINITY
        };
        let tb2 = if tau2.is_none() {
            b2.next_jump_time()
        } else {
            f64::INFINITY
        };
        let t = a1
            .next_jump_time()
            .min(a2.next_jump_time())
            .min(tb1)
            .min(tb2)
            .min(c1.next)
            .min(c2.next);
        if t > horizon {
            break;
        }
        let (pa, pb) = (a, b);
        if t == c1.next || t == c2.next {
            let clock = if c1.next <= c2.next {
                c1.advance();
                Clock::N1
            } else {
                c2.advance();
                Clock::N2
            };
            rings.push((t, clock));
            a = step_discrete(a, clock, params.l_sites);
            b = step_discrete(b, clock, params.l_sites);
        } else if t == a1.next_jump_time() {
            a.sigma.s1 = a1.advance().1;
            if tau1.is_some() {
                b.sigma.s1 = a.sigma.s1;
            }
        } else if t == a2.next_jump_time() {
            a.sigma.s2 = a2.advance().1;
            if tau2.is_some() {
                b.sigma.s2 = a.sigma.s2;
            }
        } else if t == tb1 {
            b.sigma.s1 = b1.advance().1;
        } else {
            b.sigma.s2 = b2.advance().1;
        }
        if tau1.is_none() && a.sigma.s1 == b.sigma.s1 {
            tau1 = Some(t);
        }
        if tau2.is_none() && a.sigma.s2 == b.sigma.s2 {
            tau2 = Some(t);
        }
        if tau_sigma.is_none() {
            if let (Some(u), Some(v)) = (tau1, tau2) {
                tau_sigma = Some(u.max(v));
            }
        }
        if tau_coupling.is_none() && tau_sigma.is_some() && a == b {
            tau_coupling = Some(t);
        }
        if a != pa {
            events_a.push((t, a));
        }
        if b != pb {
            events_b.push((t, b));
        }
    }

    Ok(DdCoupling {
        traj_a: DiscreteTrajectory {
            initial: init_a,
            events: events_a,
            horizon,
        },
        traj_b: DiscreteTrajectory {
            initial: init_b,
            events: events_b,
            horizon,
        },
        rings,
        tau1,
        tau2,
        tau_sigma,
        tau_coupling,
    })
}

/// Summary of one continuous-continuous coupled run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CcCoupling {
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub tau_sigma: Option<f64>,
    pub tau_coupling: Option<f64>,
    pub end_a: ContState,
    pub end_b: ContState,
}

/// Continuous-continuous coupling with a visitor called at every event
/// time with (t, x_a, x_b, sigma_a, sigma_b).
pub fn couple_continuous_continuous_with<F>(
    params: &ContParams,
    init_a: ContState,
    init_b: ContState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rt1: ChaCha8Rng,
    rt2: ChaCha8Rng,
    mut visit: F,
) -> Result<CcCoupling>
where
    F: FnMut(f64, f64, f64, VelocityPair, VelocityPair),
{
    if !(horizon > 0.0) {
        return Err(Error::Degenerate("horizon must be positive".into()));
    }
    let kind = params.kind;
    let mut a1 = SingleVelocityProcess::new(kind, init_a.sigma.s1, rv1);
    let mut a2 = SingleVelocityProcess::new(kind, init_a.sigma.s2, rv2);
    let mut b1 = SingleVelocityProcess::new(kind, init_b.sigma.s1, rt1);
    let mut b2 = SingleVelocityProcess::new(kind, init_b.sigma.s2, rt2);

    let mut sa = init_a.sigma;
    let mut sb = init_b.sigma;
    let mut xa = init_a.x;
    let mut xb = init_b.x;
    let mut t = 0.0;

    let mut tau1 = (sa.s1 == sb.s1).then_some(0.0);
    let mut tau2 = (sa.s2 == sb.s2).then_some(0.0);
    let mut tau_sigma = if tau1.is_some() && tau2.is_some() {
        Some(0.0)
    } else {
        None
    };
    let mut tau_coupling = (tau_sigma.is_some() && xa == xb).then_some(0.0);
    visit(0.0, xa, xb, sa, sb);

    loop {
        let tb1 = if tau1.is_none() {
            b1.next_jump_time()
        } else {
            f64::INFINITY
        };
        let tb2 = if tau2.is_none() {
            b2.next_jump_time()
        } else {
            f64::INFINITY
        };
        let t_ev = a1.next_jump_time().min(a2.next_jump_time()).min(tb1).min(tb2);
        let t_next = t_ev.min(horizon);
        let dt = t_next - t;
        let (xa2, ca) = flow_segment(xa, sa, dt, params.ell);
        let (xb2, cb) = if tau_coupling.is_some() {
            (xa2, ca)
        } else {
            flow_segment(xb, sb, dt, params.ell)
        };
        if tau_coupling.is_none() && tau_sigma.is_some() && xa2 == xb2 {
            // meeting happens at the later of the two clamp times
            let off = ca.map_or(dt, |(u, _)| u).max(cb.map_or(dt, |(u, _)| u));
            tau_coupling = Some(t + off);
        }
        xa = xa2;
        xb = if tau_coupling.is_some() { xa2 } else { xb2 };
        t = t_next;
        visit(t, xa, xb, sa, sb);
        if t_ev > horizon {
            break;
        }
        if t_ev == a1.next_jump_time() {
            sa.s1 = a1.advance().1;
            if tau1.is_some() {
                sb.s1 = sa.s1;
            }
        } else if t_ev == a2.next_jump_time() {
            sa.s2 = a2.advance().1;
            if tau2.is_some() {
                sb.s2 = sa.s2;
            }
        } else if t_ev == tb1 {
            sb.s1 = b1.advance().1;
        } else {
            sb.s2 = b2.advance().1;
        }
        if tau1.is_none() && sa.s1 == sb.s1 {
            tau1 = Some(t);
        }
        if tau2.is_none() && sa.s2 == sb.s2 {
            tau2 = Some(t);
        }
        if tau_sigma.is_none() {
            if let (Some(u), Some(v)) = (tau1, tau2) {
                tau_sigma = Some(u.max(v));
            }
        }
        visit(t, xa, xb, sa, sb);
    }

    Ok(CcCoupling {
        tau1,
        tau2,
        tau_sigma,
        tau_coupling,
        end_a: ContState { x: xa, sigma: sa },
        end_b: ContState { x: xb, sigma: sb },
    })
}

/// Continuous-continuous coupling without instrumentation.
pub fn couple_continuous_continuous(
    params: &ContParams,
    init_a: ContState,
    init_b: ContState,
    horizon: f64,
    rv1: ChaCha8Rng,
    rv2: ChaCha8Rng,
    rt1: ChaCha8Rng,
    rt2: ChaCha8Rng,
) -> Result<CcCoupling> {
    couple_continuous_continuous_with(
        params,
        init_a,
        init_b,
        horizon,
        rv1,
        rv2,
        rt1,
        rt2,
        |_, _, _, _, _| {},
    )
}

/// Analytic time scale on which the continuous process mixes:
/// (1 + (omega ell)^2)/omega, or (1/alpha + 1/beta)(1 + (alpha ell)^2).
pub fn mixing_scale(kind: TumbleKind, ell: f64) -> f64 {
    match kind {
        TumbleKind::Instantaneous { omega } => (1.0 + (omega * ell).powi(2)) / omega,
        TumbleKind::Finite { alpha, beta } => {
            (1.0 / alpha + 1.0 / beta) * (1.0 + (alpha * ell).powi(2))
        }
    }
}

/// Knobs of the mixing-time estimator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MixingOptions {
    pub epsilon: f64,
    /// Coupled replicas per initial pair.
    pub replicas: usize,
    /// Replicas for the direct TV estimate.
    pub tv_replicas: usize,
    pub tv_bins: usize,
    /// Points of the TV-versus-time curve.
    pub time_points: usize,
    /// Replica horizon, in units of the analytic mixing scale.
    pub horizon_factor: f64,
    pub seed: u64,
}

impl Default for MixingOptions {
    fn default() -> Self {
        MixingOptions {
            epsilon: 0.25,
            replicas: 64,
            tv_replicas: 2000,
            tv_bins: 50,
            time_points: 10,
            horizon_factor: 60.0,
            seed: 1,
        }
    }
}

/// Output of the mixing-time estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixingEstimate {
    pub kind: TumbleKind,
    pub ell: f64,
    pub epsilon: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Estimator (a): smallest t with worst-over-grid P(tau > t) <= eps.
    pub t_mix_coupling: f64,
    pub worst_pair: (ContState, ContState),
    /// Estimator (b): direct TV to the analytic invariant law over time.
    pub tv_curve: Vec<(f64, f64)>,
    /// TV at the last curve point under different bin counts.
    pub tv_bin_sensitivity: Vec<(usize, f64)>,
}

/// Deterministic grid of initial states: five positions times every
/// velocity pair.
pub fn init_grid(kind: TumbleKind, ell: f64) -> Vec<ContState> {
    let xs = [0.0, ell / 4.0, ell / 2.0, 3.0 * ell / 4.0, ell];
    let mut out = Vec::new();
    for &x in &xs {
        for sigma in kind.sigma_states() {
            out.push(ContState { x, sigma });
        }
    }
    out
}

/// Coupling- and TV-based mixing time estimation over the initial grid.
pub fn estimate_mixing_time(
    kind: TumbleKind,
    ell: f64,
    opts: &MixingOptions,
) -> Result<MixingEstimate> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0,1), got {}",
            opts.epsilon
        )));
    }
    let params = ContParams::new(ell, kind)?;
    let grid = init_grid(kind, ell);
    let mut pairs = Vec::new();
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            pairs.push((grid[i], grid[j]));
        }
    }
    let horizon = opts.horizon_factor * mixing_scale(kind, ell);
    let r = opts.replicas;

    // per-pair (1 - eps) quantile of tau_coupling, censored at the horizon
    let quantiles: Vec<f64> = pairs
        .par_iter()
        .enumerate()
        .map(|(pi, &(a, b))| {
            let mut taus: Vec<f64> = (0..r)
                .map(|k| {
                    let rep = (pi * r + k) as u64;
                    let cc = couple_continuous_continuous(
                        &params,
                        a,
                        b,
                        horizon,
                        stream(opts.seed, rep, StreamRole::Velocity1),
                        stream(opts.seed, rep, StreamRole::Velocity2),
                        stream(opts.seed, rep, StreamRole::Velocity1Tilde),
                        stream(opts.seed, rep, StreamRole::Velocity2Tilde),
                    )
                    .expect("positive horizon");
                    cc.tau_coupling.unwrap_or(horizon)
                })
                .collect();
            taus.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let idx = (((1.0 - opts.epsilon) * r as f64).ceil() as usize)
                .clamp(1, r)
                - 1;
            taus[idx]
        })
        .collect();

    let (worst_idx, t_mix) = quantiles
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &q)| (i, q))
        .expect("nonempty grid");
    let worst_pair = pairs[worst_idx];

    // direct TV estimate from the worst initial state
    let analytic = match kind {
        TumbleKind::Instantaneous { omega } => crate::measures::citp_invariant(omega, ell)?,
        TumbleKind::Finite { alpha, beta } => {
            crate::measures::cftp_invariant(alpha, beta, ell)?.0
        }
    };
    let times: Vec<f64> = (1..=opts.time_points)
        .map(|k| 2.0 * t_mix * k as f64 / opts.time_points as f64)
        .collect();
    let tv_seed = opts.seed.wrapping_add(0x9e37_79b9);
    let snaps: Vec<Vec<ContState>> = (0..opts.tv_replicas as u64)
        .into_par_iter()
        .map(|rep| {
            crate::pdmp::evolve_snapshots(
                &params,
                worst_pair.0,
                &times,
                stream(tv_seed, rep, StreamRole::Velocity1),
                stream(tv_seed, rep, StreamRole::Velocity2),
            )
        })
        .collect();
    let mut tv_curve = Vec::with_capacity(times.len());
    let mut last_states = Vec::new();
    for (k, &tk) in times.iter().enumerate() {
        let states: Vec<ContState> = snaps.iter().map(|s| s[k]).collect();
        let emp = crate::measures::empirical_measure(&states, kind, ell, opts.tv_bins)?;
        let tv = crate::measures::tv_distance(&emp, &analytic.bin(opts.tv_bins)?)?;
        tv_curve.push((tk, tv));
        if k + 1 == times.len() {
            last_states = states;
        }
    }
    let mut tv_bin_sensitivity = Vec::new();
    for bins in [opts.tv_bins / 2, opts.tv_bins, opts.tv_bins * 2] {
        let bins = bins.max(1);
        let emp = crate::measures::empirical_measure(&last_states, kind, ell, bins)?;
        tv_bin_sensitivity.push((bins, crate::measures::tv_distance(&emp, &analytic.bin(bins)?)?));
    }

    Ok(MixingEstimate {
        kind,
        ell,
        epsilon: opts.epsilon,
        replicas: r,
        seed: opts.seed,
        t_mix_coupling: t_mix,
        worst_pair,
        tv_curve,
        tv_bin_sensitivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{stationary_distribution, transient_law};
    use approx::assert_relative_eq;

    fn citp(ell: f64, omega: f64) -> ContParams {
        ContParams::new(ell, TumbleKind::Instantaneous { omega }).unwrap()
    }

    #[test]
    fn initial_gap_bounded_by_mesh() {
        let p = citp(1.0, 1.0);
        for (r, x0) in [(0u64, 0.0), (1, 0.37), (2, 0.5), (3, 0.99), (4, 1.0)] {
            let res = couple_discrete_continuous(
                &p,
                17,
                ContState::new(x0, VelocityPair::new(1, -1)),
                0.5,
                stream(1, r, StreamRole::Velocity1),
                stream(1, r, StreamRole::Velocity2),
                stream(1, r, StreamRole::Clock1),
                stream(1, r, StreamRole::Clock2),
                |_| {},
            )
            .unwrap()
            .initial_gap;
            assert!(res <= 1.0 / 16.0 + 1e-12, "gap {res} at x0 {x0}");
        }
    }

    #[test]
    fn lattice_member_moves_only_at_rings() {
        // velocities essentially frozen at (-1, 1): x moves, y steps only
        // when a ring arrives
        let p = citp(1.0, 1e-12);
        let mut ys = Vec::new();
        let _ = couple_discrete_continuous(
            &p,
            5,
            ContState::new(0.1, VelocityPair::new(-1, 1)),
            1.0,
            stream(3, 0, StreamRole::Velocity1),
            stream(3, 0, StreamRole::Velocity2),
            stream(3, 0, StreamRole::Clock1),
            stream(3, 0, StreamRole::Clock2),
            |seg: DcSegment| ys.push(seg.y),
        )
        .unwrap();
        // y is piecewise constant and never leaves the site range
        assert!(ys.iter().all(|&y| (1..=5).contains(&y)));
    }

    #[test]
    fn coupled_lattice_member_has_plain_marginal() {
        // occupation of the coupled lattice member matches the stationary
        // law of the plain discrete process
        let p = citp(1.0, 1.0);
        let lp = LatticeParams::scaled(5, 1.0, p.kind).unwrap();
        let pi = stationary_distribution(&lp).unwrap();
        let mut occ = vec![0.0; lp.n_states()];
        let horizon = 10_000.0;
        couple_discrete_continuous(
            &p,
            5,
            ContState::new(0.5, VelocityPair::new(1, -1)),
            horizon,
            stream(4, 0, StreamRole::Velocity1),
            stream(4, 0, StreamRole::Velocity2),
            stream(4, 0, StreamRole::Clock1),
            stream(4, 0, StreamRole::Clock2),
            |seg: DcSegment| {
                occ[lp.state_index(LatticeState {
                    y: seg.y,
                    sigma: seg.sigma,
                })] += seg.t1 - seg.t0;
            },
        )
        .unwrap();
        let tv = 0.5
            * pi.probs
                .iter()
                .zip(&occ)
                .map(|(a, b)| (a - b / horizon).abs())
                .sum::<f64>();
        assert!(tv <= 0.02, "TV {tv}");
    }

    #[test]
    fn bound_spot_value_and_blowup() {
        let eta = TumbleKind::Instantaneous { omega: 1.0 }.eta();
        assert_relative_eq!(eta, 2.0);
        let b = deviation_bound(0.1, 1.0, 1_000_001, 1.0, eta);
        assert!((b - 0.26534).abs() < 1e-4, "bound {b}");
        assert!(deviation_bound(1e-9, 1.0, 1_000_001, 1.0, eta) > 1e6 * b);
    }

    #[test]
    fn deviation_nonnegative_and_reproducible() {
        let p = citp(1.0, 1.0);
        let init = ContState::new(0.5, VelocityPair::new(1, -1));
        let a = deviation_samples(&p, 101, init, 1.0, 16, 9).unwrap();
        let b = deviation_samples(&p, 101, init, 1.0, 16, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&d| d >= 0.0));
        assert!(a.iter().any(|&d| d > 0.0));
    }

    fn dd(
        params: &LatticeParams,
        a: LatticeState,
        b: LatticeState,
        horizon: f64,
        seed: u64,
        rep: u64,
    ) -> DdCoupling {
        couple_discrete_discrete(
            params,
            a,
            b,
            horizon,
            stream(seed, rep, StreamRole::Velocity1),
            stream(seed, rep, StreamRole::Velocity2),
            stream(seed, rep, StreamRole::Velocity1Tilde),
            stream(seed, rep, StreamRole::Velocity2Tilde),
            stream(seed, rep, StreamRole::Clock1),
            stream(seed, rep, StreamRole::Clock2),
        )
        .unwrap()
    }

    #[test]
    fn identical_inits_stay_identical() {
        let lp = LatticeParams::new(6, 1.0, 2.0, TumbleKind::Instantaneous { omega: 1.0 }).unwrap();
        let s = LatticeState {
            y: 3,
            sigma: VelocityPair::new(1, -1),
        };
        let c = dd(&lp, s, s, 50.0, 7, 0);
        assert_eq!(c.tau_coupling, Some(0.0));
        assert_eq!(c.traj_a.events, c.traj_b.events);
    }

    #[test]
    fn order_preserved_after_velocity_merge() {
        let lp = LatticeParams::new(9, 1.0, 3.0, TumbleKind::Instantaneous { omega: 1.0 }).unwrap();
        for rep in 0..30 {
            let c = dd(
                &lp,
                LatticeState {
                    y: 2,
                    sigma: VelocityPair::new(1, -1),
                },
                LatticeState {
                    y: 8,
                    sigma: VelocityPair::new(-1, 1),
                },
                100.0,
                11,
                rep,
            );
            let ts = c.tau_sigma.expect("velocities meet quickly");
            // at tau_sigma record the order, check it never flips strictly
            let ya0 = c.traj_a.state_at(ts).y as i64;
            let yb0 = c.traj_b.state_at(ts).y as i64;
            let s0 = (ya0 - yb0).signum();
            let mut checkpoints: Vec<f64> = c.rings.iter().map(|r| r.0).filter(|&t| t > ts).collect();
            checkpoints.push(100.0);
            for t in checkpoints {
                let d = c.traj_a.state_at(t).y as i64 - c.traj_b.state_at(t).y as i64;
                assert!(d.signum() == s0 || d == 0, "order flipped at t={t}");
            }
        }
    }

    #[test]
    fn velocity_splice_is_permanent() {
        let lp = LatticeParams::new(
            4,
            1.0,
            1.5,
            TumbleKind::Finite {
                alpha: 1.0,
                beta: 1.0,
            },
        )
        .unwrap();
        for rep in 0..20 {
            let c = dd(
                &lp,
                LatticeState {
                    y: 1,
                    sigma: VelocityPair::new(1, 0),
                },
                LatticeState {
                    y: 4,
                    sigma: VelocityPair::new(-1, 1),
                },
                60.0,
                13,
                rep,
            );
            if let Some(t1) = c.tau1 {
                for k in 0..200 {
                    let t = t1 + (60.0 - t1) * k as f64 / 200.0;
                    assert_eq!(
                        c.traj_a.state_at(t).sigma.s1,
                        c.traj_b.state_at(t).sigma.s1
                    );
                }
            }
        }
    }

    #[test]
    fn coupling_probability_dominates_exact_tv() {
        // empirical P(states differ at t) must upper-bound the exact TV
        // between the two transient laws
        let lp = LatticeParams::new(4, 1.0, 1.0, TumbleKind::Instantaneous { omega: 1.0 }).unwrap();
        let ia = LatticeState {
            y: 1,
            sigma: VelocityPair::new(1, 1),
        };
        let ib = LatticeState {
            y: 4,
            sigma: VelocityPair::new(-1, -1),
        };
        for t in [0.5, 2.0, 6.0] {
            let la = transient_law(&lp, ia, t);
            let lb = transient_law(&lp, ib, t);
            let tv = 0.5
                * la.iter()
                    .zip(&lb)
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>();
            let n = 2000;
            let mut ne = 0usize;
            for rep in 0..n {
                let c = dd(&lp, ia, ib, t, 17, rep as u64);
                if c.traj_a.state_at(t) != c.traj_b.state_at(t) {
                    ne += 1;
                }
            }
            let p = ne as f64 / n as f64;
            let stderr = (p * (1.0 - p) / n as f64).sqrt();
            assert!(p + 3.0 * stderr >= tv, "t={t}: P(differ)={p} < TV={tv}");
        }
    }

    #[test]
    fn large_shared_walk_forces_meeting() {
        // with matched velocities, an accumulated shared-ring walk of size
        // L-1 squeezes the members together
        let lp = LatticeParams::new(5, 1.0, 4.0, TumbleKind::Instantaneous { omega: 0.5 }).unwrap();
        for rep in 0..50 {
            let c = dd(
                &lp,
                LatticeState {
                    y: 1,
                    sigma: VelocityPair::new(1, -1),
                },
                LatticeState {
                    y: 5,
                    sigma: VelocityPair::new(1, -1),
                },
                40.0,
                19,
                rep,
            );
            let ts = match c.tau_sigma {
                Some(v) => v,
                None => continue,
            };
            let mut s: i64 = 0;
            for &(t, clock) in &c.rings {
                if t <= ts {
                    continue;
                }
                if let Some(tc) = c.tau_coupling {
                    if t >= tc {
                        break;
                    }
                }
                let sigma = c.traj_a.state_at(t).sigma;
                s += match clock {
                    Clock::N1 => -i64::from(sigma.s1),
                    Clock::N2 => i64::from(sigma.s2),
                };
                assert!(
                    s.unsigned_abs() < 5,
                    "walk reached {s} before members met (rep {rep})"
                );
            }
        }
    }

    fn cc(
        params: &ContParams,
        a: ContState,
        b: ContState,
        horizon: f64,
        seed: u64,
        rep: u64,
    ) -> CcCoupling {
        couple_continuous_continuous(
            params,
            a,
            b,
            horizon,
            stream(seed, rep, StreamRole::Velocity1),
            stream(seed, rep, StreamRole::Velocity2),
            stream(seed, rep, StreamRole::Velocity1Tilde),
            stream(seed, rep, StreamRole::Velocity2Tilde),
        )
        .unwrap()
    }

    #[test]
    fn same_init_couples_immediately() {
        let p = citp(1.0, 1.0);
        let s = ContState::new(0.3, VelocityPair::new(1, -1));
        let c = cc(&p, s, s, 5.0, 23, 0);
        assert_eq!(c.tau_coupling, Some(0.0));
        assert_eq!(c.end_a, c.end_b);
    }

    #[test]
    fn gap_nonincreasing_after_velocity_merge_and_meets_at_jam() {
        let p = citp(1.0, 1.0);
        for rep in 0..40 {
            let mut trace: Vec<(f64, f64, f64)> = Vec::new();
            let c = couple_continuous_continuous_with(
                &p,
                ContState::new(0.1, VelocityPair::new(1, -1)),
                ContState::new(0.9, VelocityPair::new(-1, 1)),
                200.0,
                stream(29, rep, StreamRole::Velocity1),
                stream(29, rep, StreamRole::Velocity2),
                stream(29, rep, StreamRole::Velocity1Tilde),
                stream(29, rep, StreamRole::Velocity2Tilde),
                |t, xa, xb, _, _| trace.push((t, xa, xb)),
            )
            .unwrap();
            let ts = c.tau_sigma.expect("sigma meets within horizon");
            let mut prev_gap = f64::INFINITY;
            for &(t, xa, xb) in &trace {
                if t < ts {
                    continue;
                }
                let gap = (xa - xb).abs();
                assert!(gap <= prev_gap + 1e-12, "gap grew at t={t} (rep {rep})");
                prev_gap = gap;
            }
            if let Some(tc) = c.tau_coupling {
                // the meeting point is a boundary
                let (_, xa, _) = trace
                    .iter()
                    .copied()
                    .find(|&(t, xa, xb)| t >= tc && xa == xb)
                    .expect("meeting recorded");
                assert!(xa == 0.0 || xa == 1.0, "met at {xa}, not at a jam");
            }
        }
    }

    #[test]
    fn coupling_time_tail_decays() {
        let p = citp(1.0, 1.0);
        let a = ContState::new(0.0, VelocityPair::new(1, -1));
        let b = ContState::new(1.0, VelocityPair::new(-1, 1));
        let n = 2000u64;
        let mut taus: Vec<f64> = (0..n)
            .map(|rep| cc(&p, a, b, 500.0, 31, rep).tau_coupling.unwrap_or(500.0))
            .collect();
        taus.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let med = taus[n as usize / 2];
        let frac = |cut: f64| taus.iter().filter(|&&t| t > cut).count() as f64 / n as f64;
        let (f1, f2, f4) = (frac(med), frac(2.0 * med), frac(4.0 * med));
        assert!(f2 < f1 && f4 < f2, "survival not decreasing: {f1} {f2} {f4}");
        assert!(f4 <= 0.3, "tail too heavy: {f4}");
    }

    #[test]
    fn mixing_estimator_smoke() {
        let opts = MixingOptions {
            replicas: 8,
            tv_replicas: 300,
            tv_bins: 20,
            time_points: 4,
            horizon_factor: 40.0,
            ..Default::default()
        };
        let est =
            estimate_mixing_time(TumbleKind::Instantaneous { omega: 1.0 }, 1.0, &opts).unwrap();
        assert!(est.t_mix_coupling > 0.0 && est.t_mix_coupling.is_finite());
        assert!(est.tv_curve.iter().all(|&(_, tv)| (0.0..=1.0).contains(&tv)));
        let first = est.tv_curve.first().unwrap().1;
        let last = est.tv_curve.last().unwrap().1;
        assert!(last <= first + 0.05, "TV curve not decaying: {first} -> {last}");
        assert!(estimate_mixing_time(
            TumbleKind::Instantaneous { omega: 1.0 },
            1.0,
            &MixingOptions {
                epsilon: 1.5,
                ..opts
            }
        )
        .is_err());
    }
}
