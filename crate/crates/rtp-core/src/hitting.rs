//! Closed-form hitting and return time oracles, excursion statistics,
//! and their Monte Carlo cross-validators.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pdmp::{flow_segment, ContState};
use crate::rng::{stream, StreamRole};
use crate::velocity::{SingleVelocityProcess, TumbleKind, VelocityPair, VelocityPairProcess};
use crate::{Error, Result};

/// Mean time for the instantaneous-tumble continuous process to reach the
/// jam at 0 with velocities (+1, -1), from (x, sigma).
pub fn mean_hitting_time_citp(x: f64, sigma: VelocityPair, omega: f64, ell: f64) -> Result<f64> {
    if !(omega > 0.0 && ell > 0.0) || !(0.0..=ell).contains(&x) {
        return Err(Error::InvalidParameter(
            "need omega, ell > 0 and x in [0, ell]".into(),
        ));
    }
    let w = omega;
    let q = 2.0 * ell * x - x * x;
    match (sigma.s1, sigma.s2) {
        (1, 1) | (-1, -1) => Ok((2.0 * (ell + x) * w + q * w * w + 3.0) / (2.0 * w)),
        (1, -1) => Ok((4.0 * x + q * w) / 2.0),
        (-1, 1) => Ok((4.0 * ell * w + q * w * w + 4.0) / (2.0 * w)),
        _ => Err(Error::InvalidParameter(format!(
            "sigma {sigma:?} outside the instantaneous alphabet"
        ))),
    }
}

/// Exact sup over (x, sigma) of [`mean_hitting_time_citp`]. Each branch is
/// concave quadratic in x, so the sup sits at an endpoint or the vertex.
pub fn hitting_bound_citp(omega: f64, ell: f64) -> Result<f64> {
    let kind = TumbleKind::Instantaneous { omega };
    let mut best = 0.0f64;
    for sigma in kind.sigma_states() {
        // q = 2 ell x - x^2 peaks at x = ell
        for x in [0.0, ell] {
            best = best.max(mean_hitting_time_citp(x, sigma, omega, ell)?);
        }
    }
    Ok(best)
}

/// Mean time until two independently tumbling finite-kind velocities
/// first agree, by start values.
pub fn mean_velocity_coupling_time_cftp(
    s0: i8,
    s0_tilde: i8,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter("alpha, beta must be positive".into()));
    }
    if !(-1..=1).contains(&s0) || !(-1..=1).contains(&s0_tilde) {
        return Err(Error::InvalidParameter("velocities must lie in {-1,0,1}".into()));
    }
    let r = alpha / beta;
    Ok(if s0 == s0_tilde {
        0.0
    } else if s0 == 0 || s0_tilde == 0 {
        (4.0 * r + 1.0) / (4.0 * r + 2.0) / alpha
    } else {
        (3.0 * r + 1.0) / (2.0 * r + 1.0) / alpha
    })
}

/// Closed forms around returns of the velocity pair to the agreement
/// diagonal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiagonalReturnStats {
    /// Mean return time from (0,0).
    pub mean_from_rest: f64,
    /// Mean hitting time when exactly one coordinate is 0.
    pub mean_one_zero: f64,
    /// Mean time for starts with both coordinates in {-1, +1}
    /// (return time on the diagonal, hitting time off it).
    pub mean_both_moving: f64,
    /// Mean of each successive inter-return increment.
    pub mean_increment: f64,
    /// A non-normalizing closed form of the hit law on the diagonal,
    /// in the order ((+1,+1), (0,0), (-1,-1)); kept for comparison only,
    /// the Monte Carlo oracle is authoritative (see `hit_distribution_mc`).
    pub unnormalized_hit_distribution: [f64; 3],
    /// Hit distribution from stationary flow balance: entries into (0,0)
    /// arrive at rate alpha from 4 neighbouring states, entries into
    /// (s,s), s != 0, at rate beta/2 from 2 states each. The rest-state
    /// entry agrees with the unnormalized form; the moving entries are
    /// half of it, which restores total mass 1 and matches simulation.
    pub hit_distribution: [f64; 3],
}

/// Closed-form diagonal return statistics for the finite tumble kind.
pub fn diagonal_return_statistics(alpha: f64, beta: f64) -> Result<DiagonalReturnStats> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter("alpha, beta must be positive".into()));
    }
    let r = alpha / beta;
    let s = 1.0 / alpha + 1.0 / beta;
    Ok(DiagonalReturnStats {
        mean_from_rest: s * (2.0 * r * r + 5.0 * r + 1.0) / (4.0 * r * r + 6.0 * r + 2.0),
        mean_one_zero: s * (4.0 * r + 1.0) / (4.0 * r * r + 6.0 * r + 2.0),
        mean_both_moving: s * (3.0 * r + 1.0) / (2.0 * r * r + 3.0 * r + 1.0),
        mean_increment: (alpha * alpha + 2.0 * alpha * beta + beta * beta)
            / (2.0 * alpha * alpha * beta + alpha * beta * beta),
        unnormalized_hit_distribution: [
            beta / (2.0 * alpha + beta),
            2.0 * alpha / (2.0 * alpha + beta),
            beta / (2.0 * alpha + beta),
        ],
        hit_distribution: [
            beta / (2.0 * (2.0 * alpha + beta)),
            2.0 * alpha / (2.0 * alpha + beta),
            beta / (2.0 * (2.0 * alpha + beta)),
        ],
    })
}

/// Mean time to hit the diagonal from `sigma` (return time if already on
/// the diagonal), per the closed forms above.
pub fn mean_diagonal_time(sigma: VelocityPair, alpha: f64, beta: f64) -> Result<f64> {
    let stats = diagonal_return_statistics(alpha, beta)?;
    Ok(if sigma.s1 == 0 && sigma.s2 == 0 {
        stats.mean_from_rest
    } else if sigma.s1 == 0 || sigma.s2 == 0 {
        stats.mean_one_zero
    } else {
        stats.mean_both_moving
    })
}

fn mgf_denominator_coeffs(alpha: f64, beta: f64) -> (f64, f64) {
    let c = 4.0 * alpha.powi(4) + 4.0 * alpha.powi(3) * beta + alpha.powi(2) * beta.powi(2);
    let b = 2.0 * alpha * alpha + 3.0 * alpha * beta + beta * beta;
    (c, b)
}

/// Smallest positive pole of the excursion MGF.
pub fn excursion_mgf_pole(alpha: f64, beta: f64) -> f64 {
    let (c, b) = mgf_denominator_coeffs(alpha, beta);
    // denominator c - 4 b lambda^2 + 4 lambda^4; smallest root in lambda^2
    let disc = (b * b - c).max(0.0).sqrt();
    ((b - disc) / 2.0).max(0.0).sqrt()
}

/// MGF of one inter-return displacement of the separation slope integral.
pub fn excursion_mgf(lambda: f64, alpha: f64, beta: f64) -> Result<f64> {
    let pole = excursion_mgf_pole(alpha, beta);
    if lambda.abs() + 1e-9 >= pole {
        return Err(Error::BeyondPole { lambda, pole });
    }
    let (c, b) = mgf_denominator_coeffs(alpha, beta);
    let l2 = lambda * lambda;
    Ok((c - 2.0 * b * l2) / (c - 4.0 * b * l2 + 4.0 * l2 * l2))
}

/// First four moments of the inter-return displacement: odd moments
/// vanish by symmetry.
pub fn excursion_moments(alpha: f64, beta: f64) -> Result<(f64, f64, f64, f64)> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter("alpha, beta must be positive".into()));
    }
    let m2 = 4.0 * (alpha + beta) / (2.0 * alpha.powi(3) + alpha.powi(2) * beta);
    let m4 = 96.0 * (alpha * alpha + 4.0 * alpha * beta + 2.0 * beta * beta)
        / (4.0 * alpha.powi(6) + 4.0 * alpha.powi(5) * beta + alpha.powi(4) * beta.powi(2));
    Ok((0.0, m2, 0.0, m4))
}

/// Sample `n` successive inter-return displacements of the slope integral
/// from one long run of the velocity pair, starting at rest.
pub fn sample_excursions(
    alpha: f64,
    beta: f64,
    n: usize,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> Vec<f64> {
    let kind = TumbleKind::Finite { alpha, beta };
    let mut proc = VelocityPairProcess::new(kind, VelocityPair::new(0, 0), rng1, rng2);
    let mut out = Vec::with_capacity(n);
    let mut t = 0.0;
    let mut acc = 0.0;
    while out.len() < n {
        let sigma = proc.sigma();
        let (t1, next) = proc.advance();
        acc += f64::from(sigma.rel_speed()) * (t1 - t);
        t = t1;
        if sigma.s1 != sigma.s2 && next.s1 == next.s2 {
            out.push(acc);
            acc = 0.0;
        }
    }
    out
}

/// Sample `n` successive inter-return times of the velocity pair on the
/// diagonal from one long run started at rest.
pub fn sample_return_intervals(
    alpha: f64,
    beta: f64,
    n: usize,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> Vec<f64> {
    let kind = TumbleKind::Finite { alpha, beta };
    let mut proc = VelocityPairProcess::new(kind, VelocityPair::new(0, 0), rng1, rng2);
    let mut out = Vec::with_capacity(n);
    let mut last_return = None;
    while out.len() < n {
        let sigma = proc.sigma();
        let (t, next) = proc.advance();
        if sigma.s1 != sigma.s2 && next.s1 == next.s2 {
            if let Some(prev) = last_return {
                out.push(t - prev);
            }
            last_return = Some(t);
        }
    }
    out
}

/// Sample the diagonal state entered at each of `n` returns; order
/// ((+1,+1), (0,0), (-1,-1)), as fractions.
pub fn hit_distribution_mc(
    alpha: f64,
    beta: f64,
    n: usize,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> [f64; 3] {
    let kind = TumbleKind::Finite { alpha, beta };
    let mut proc = VelocityPairProcess::new(kind, VelocityPair::new(0, 0), rng1, rng2);
    let mut counts = [0usize; 3];
    let mut total = 0usize;
    while total < n {
        let sigma = proc.sigma();
        let (_, next) = proc.advance();
        if sigma.s1 != sigma.s2 && next.s1 == next.s2 {
            let k = match next.s1 {
                1 => 0,
                0 => 1,
                _ => 2,
            };
            counts[k] += 1;
            total += 1;
        }
    }
    [
        counts[0] as f64 / n as f64,
        counts[1] as f64 / n as f64,
        counts[2] as f64 / n as f64,
    ]
}

/// Goodness-of-fit summary of single-particle zero-return displacements
/// against the two-sided exponential law with scale 1/alpha.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZeroExcursionCheck {
    pub n: usize,
    /// Kolmogorov-Smirnov statistic against the Laplace CDF.
    pub ks: f64,
    pub mean_square: f64,
    pub fraction_positive: f64,
}

/// Simulate `n` displacements of one velocity coordinate between
/// consecutive visits to rest and test them against the Laplace law.
pub fn zero_excursion_law_check(
    alpha: f64,
    beta: f64,
    n: usize,
    rng: ChaCha8Rng,
) -> Result<ZeroExcursionCheck> {
    if n == 0 {
        return Err(Error::Degenerate("need at least one excursion".into()));
    }
    let kind = TumbleKind::Finite { alpha, beta };
    let mut proc = SingleVelocityProcess::new(kind, 0, rng);
    let mut samples = Vec::with_capacity(n);
    let mut t = 0.0;
    let mut acc = 0.0;
    while samples.len() < n {
        let s = proc.state();
        let (t1, next) = proc.advance();
        acc += f64::from(s) * (t1 - t);
        t = t1;
        if next == 0 {
            samples.push(acc);
            acc = 0.0;
        }
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let laplace_cdf = |x: f64| {
        if x < 0.0 {
            0.5 * (alpha * x).exp()
        } else {
            1.0 - 0.5 * (-alpha * x).exp()
        }
    };
    let mut ks = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = laplace_cdf(x);
        ks = ks
            .max((f - i as f64 / n as f64).abs())
            .max(((i + 1) as f64 / n as f64 - f).abs());
    }
    let mean_square = samples.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let fraction_positive = samples.iter().filter(|&&d| d > 0.0).count() as f64 / n as f64;
    Ok(ZeroExcursionCheck {
        n,
        ks,
        mean_square,
        fraction_positive,
    })
}

/// A hitting-time experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum HittingQuery {
    /// First time the separation jams at 0 with velocities (+1, -1).
    JamAtZeroOpposing { start: ContState },
    /// First agreement of two independently tumbling velocities.
    VelocityAgreement { s0: i8, s0_tilde: i8 },
    /// First (return) visit of the velocity pair to the diagonal.
    DiagonalReturn { sigma0: VelocityPair },
}

fn one_jam_hitting(kind: TumbleKind, ell: f64, start: ContState, seed: u64, rep: u64) -> f64 {
    let target = VelocityPair::new(1, -1);
    let mut proc = VelocityPairProcess::new(
        kind,
        start.sigma,
        stream(seed, rep, StreamRole::Velocity1),
        stream(seed, rep, StreamRole::Velocity2),
    );
    let mut t = 0.0;
    let mut x = start.x;
    loop {
        let sigma = proc.sigma();
        if sigma == target {
            if x == 0.0 {
                return t;
            }
            // moving down at speed 2; does it reach 0 before the next jump?
            let t_next = proc.next_jump_time();
            let hit = t + x / 2.0;
            if hit <= t_next {
                return hit;
            }
        }
        let t_next = proc.next_jump_time();
        x = flow_segment(x, sigma, t_next - t, ell).0;
        t = t_next;
        proc.advance();
    }
}

fn one_velocity_agreement(kind: TumbleKind, s0: i8, s0t: i8, seed: u64, rep: u64) -> f64 {
    if s0 == s0t {
        return 0.0;
    }
    let mut a = SingleVelocityProcess::new(kind, s0, stream(seed, rep, StreamRole::Velocity1));
    let mut b =
        SingleVelocityProcess::new(kind, s0t, stream(seed, rep, StreamRole::Velocity1Tilde));
    loop {
        let t = if a.next_jump_time() <= b.next_jump_time() {
            a.advance().0
        } else {
            b.advance().0
        };
        if a.state() == b.state() {
            return t;
        }
    }
}

fn one_diagonal_return(kind: TumbleKind, sigma0: VelocityPair, seed: u64, rep: u64) -> f64 {
    let mut proc = VelocityPairProcess::new(
        kind,
        sigma0,
        stream(seed, rep, StreamRole::Velocity1),
        stream(seed, rep, StreamRole::Velocity2),
    );
    let mut left_diagonal = sigma0.s1 != sigma0.s2;
    loop {
        let (t, sigma) = proc.advance();
        if left_diagonal && sigma.s1 == sigma.s2 {
            return t;
        }
        if sigma.s1 != sigma.s2 {
            left_diagonal = true;
        }
    }
}

/// Monte Carlo estimate (mean, standard error) of a hitting time.
pub fn monte_carlo_hitting(
    kind: TumbleKind,
    ell: f64,
    query: HittingQuery,
    replicas: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if replicas == 0 {
        return Err(Error::Degenerate("need at least one replica".into()));
    }
    kind.validate()?;
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|rep| match query {
            HittingQuery::JamAtZeroOpposing { start } => {
                one_jam_hitting(kind, ell, start, seed, rep)
            }
            HittingQuery::VelocityAgreement { s0, s0_tilde } => {
                one_velocity_agreement(kind, s0, s0_tilde, seed, rep)
            }
            HittingQuery::DiagonalReturn { sigma0 } => {
                one_diagonal_return(kind, sigma0, seed, rep)
            }
        })
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// One closed-form-versus-simulation comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRow {
    pub query: String,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub z_score: f64,
}

fn oracle_row(query: String, closed: f64, mc: (f64, f64)) -> OracleRow {
    let z = if mc.1 > 0.0 {
        (mc.0 - closed) / mc.1
    } else {
        0.0
    };
    OracleRow {
        query,
        closed_form: closed,
        mc_mean: mc.0,
        mc_stderr: mc.1,
        z_score: z,
    }
}

fn mean_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Every closed-form hitting and excursion statistic compared against
/// Monte Carlo over a small parameter grid.
pub fn oracle_table(replicas: usize, seed: u64) -> Result<Vec<OracleRow>> {
    let mut rows = Vec::new();
    let mut sub = 0u64;
    let mut next_seed = || {
        sub += 1;
        crate::rng::replica_seed(seed, sub)
    };

    for (omega, ell) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.7)] {
        let kind = TumbleKind::Instantaneous { omega };
        for (x, sigma) in [
            (ell / 2.0, VelocityPair::new(1, -1)),
            (ell / 4.0, VelocityPair::new(1, 1)),
            (ell, VelocityPair::new(-1, 1)),
        ] {
            let closed = mean_hitting_time_citp(x, sigma, omega, ell)?;
            let mc = monte_carlo_hitting(
                kind,
                ell,
                HittingQuery::JamAtZeroOpposing {
                    start: ContState::new(x, sigma),
                },
                replicas,
                next_seed(),
            )?;
            rows.push(oracle_row(
                format!("jam0 w={omega} l={ell} x={x} s=({},{})", sigma.s1, sigma.s2),
                closed,
                mc,
            ));
        }
    }

    for (alpha, beta) in [(1.0, 1.0), (0.5, 2.0), (2.0, 1.0)] {
        let kind = TumbleKind::Finite { alpha, beta };
        for (s0, s0t) in [(-1i8, 1i8), (0, 1)] {
            let closed = mean_velocity_coupling_time_cftp(s0, s0t, alpha, beta)?;
            let mc = monte_carlo_hitting(
                kind,
                1.0,
                HittingQuery::VelocityAgreement { s0, s0_tilde: s0t },
                replicas,
                next_seed(),
            )?;
            rows.push(oracle_row(
                format!("agree a={alpha} b={beta} s0=({s0},{s0t})"),
                closed,
                mc,
            ));
        }
        for sigma0 in [VelocityPair::new(0, 0), VelocityPair::new(1, -1)] {
            let closed = mean_diagonal_time(sigma0, alpha, beta)?;
            let mc = monte_carlo_hitting(
                kind,
                1.0,
                HittingQuery::DiagonalReturn { sigma0 },
                replicas,
                next_seed(),
            )?;
            rows.push(oracle_row(
                format!(
                    "diag a={alpha} b={beta} s0=({},{})",
                    sigma0.s1, sigma0.s2
                ),
                closed,
                mc,
            ));
        }
        let s = next_seed();
        let intervals = sample_return_intervals(
            alpha,
            beta,
            replicas,
            stream(s, 0, StreamRole::Velocity1),
            stream(s, 0, StreamRole::Velocity2),
        );
        rows.push(oracle_row(
            format!("increment a={alpha} b={beta}"),
            diagonal_return_statistics(alpha, beta)?.mean_increment,
            mean_se(&intervals),
        ));
        let s = next_seed();
        let exc: Vec<f64> = sample_excursions(
            alpha,
            beta,
            replicas,
            stream(s, 0, StreamRole::Velocity1),
            stream(s, 0, StreamRole::Velocity2),
        )
        .iter()
        .map(|d| d * d)
        .collect();
        rows.push(oracle_row(
            format!("excursion_m2 a={alpha} b={beta}"),
            excursion_moments(alpha, beta)?.1,
            mean_se(&exc),
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::velocity::pair_generator;

    #[test]
    fn hitting_time_spot_values() {
        assert_relative_eq!(
            mean_hitting_time_citp(0.0, VelocityPair::new(1, -1), 1.0, 1.0).unwrap(),
            0.0
        );
        assert_relative_eq!(
            mean_hitting_time_citp(0.5, VelocityPair::new(1, -1), 1.0, 1.0).unwrap(),
            1.375
        );
        for (w, ell) in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.7)] {
            let a = mean_hitting_time_citp(ell, VelocityPair::new(-1, 1), w, ell).unwrap();
            let b = mean_hitting_time_citp(ell, VelocityPair::new(1, -1), w, ell).unwrap();
            assert_relative_eq!(a - b, 2.0 / w, epsilon = 1e-12);
        }
        assert!(mean_hitting_time_citp(0.5, VelocityPair::new(0, 1), 1.0, 1.0).is_err());
    }

    #[test]
    fn hitting_time_satisfies_balance_equations() {
        // transport + jump balance: rel f' + sum_q q (f' - f) + 1 = 0 away
        // from the absorbing jam
        let kind = TumbleKind::Instantaneous { omega: 1.3 };
        let (w, ell) = (1.3, 0.9);
        let q = pair_generator(kind);
        let states = kind.sigma_states();
        let h = 1e-6;
        for k in 1..1000 {
            let x = ell * k as f64 / 1000.0;
            for (i, &sigma) in states.iter().enumerate() {
                let f = |x: f64, s: VelocityPair| mean_hitting_time_citp(x, s, w, ell).unwrap();
                let fp = (f((x + h).min(ell), sigma) - f((x - h).max(0.0), sigma))
                    / ((x + h).min(ell) - (x - h).max(0.0));
                let mut jump = 0.0;
                for (j, &sj) in states.iter().enumerate() {
                    if j != i {
                        jump += q[(i, j)] * (f(x, sj) - f(x, sigma));
                    }
                }
                let res = f64::from(sigma.rel_speed()) * fp + jump + 1.0;
                assert!(res.abs() < 1e-6, "residual {res} at x={x}, {sigma:?}");
            }
        }
    }

    #[test]
    fn hitting_bound_dominates_and_scales() {
        // sup attained by the re-entering pair at x = ell
        let (w, ell) = (1.0, 1.0);
        let b = hitting_bound_citp(w, ell).unwrap();
        assert_relative_eq!(
            b,
            mean_hitting_time_citp(ell, VelocityPair::new(-1, 1), w, ell).unwrap()
        );
        let mut ratios = Vec::new();
        for w in [0.25, 1.0, 4.0] {
            for ell in [0.5, 1.0, 2.0, 4.0] {
                let b = hitting_bound_citp(w, ell).unwrap();
                ratios.push(b * w / (1.0 + (w * ell).powi(2)));
            }
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi / lo < 4.0, "scaling band {lo}..{hi}");
    }

    #[test]
    fn velocity_coupling_time_values() {
        assert_relative_eq!(
            mean_velocity_coupling_time_cftp(1, 1, 1.0, 2.0).unwrap(),
            0.0
        );
        assert_relative_eq!(
            mean_velocity_coupling_time_cftp(-1, 1, 1.0, 1.0).unwrap(),
            4.0 / 3.0
        );
        for (a, b) in [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)] {
            let mut sup = 0.0f64;
            for s0 in [-1i8, 0, 1] {
                for s1 in [-1i8, 0, 1] {
                    sup = sup.max(mean_velocity_coupling_time_cftp(s0, s1, a, b).unwrap());
                }
            }
            assert!(sup <= 3.0 / (2.0 * a) + 1e-12, "sup {sup} at alpha {a}");
        }
    }

    #[test]
    fn diagonal_return_spot_values() {
        let s = diagonal_return_statistics(1.0, 1.0).unwrap();
        assert_relative_eq!(s.mean_from_rest, 4.0 / 3.0);
        assert_relative_eq!(s.mean_both_moving, 4.0 / 3.0);
        assert_relative_eq!(s.mean_increment, 4.0 / 3.0);
        // the unnormalized form overshoots 1; the flow-balance law
        // halves the moving entries and normalizes
        let sum: f64 = s.unnormalized_hit_distribution.iter().sum();
        assert!(sum > 1.0);
        assert_relative_eq!(
            s.hit_distribution.iter().sum::<f64>(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(s.hit_distribution[1], 2.0 / 3.0);
        assert_relative_eq!(s.hit_distribution[0], 1.0 / 6.0);
    }

    #[test]
    fn excursion_mgf_properties() {
        assert_relative_eq!(excursion_mgf(0.0, 1.0, 1.0).unwrap(), 1.0);
        for l in [0.1, 0.3, 0.5] {
            assert_relative_eq!(
                excursion_mgf(l, 1.0, 1.0).unwrap(),
                excursion_mgf(-l, 1.0, 1.0).unwrap(),
                epsilon = 1e-14
            );
        }
        let pole = excursion_mgf_pole(1.0, 1.0);
        assert!(matches!(
            excursion_mgf(pole, 1.0, 1.0),
            Err(Error::BeyondPole { .. })
        ));
        // second derivative at 0 equals the second moment
        let h = 1e-4;
        let d2 = (excursion_mgf(h, 1.0, 1.0).unwrap() - 2.0
            + excursion_mgf(-h, 1.0, 1.0).unwrap())
            / (h * h);
        assert_relative_eq!(d2, 8.0 / 3.0, max_relative = 1e-5);
    }

    #[test]
    fn excursion_moment_formulas() {
        let (m1, m2, m3, m4) = excursion_moments(1.0, 1.0).unwrap();
        assert_eq!(m1, 0.0);
        assert_eq!(m3, 0.0);
        assert_relative_eq!(m2, 8.0 / 3.0);
        assert_relative_eq!(m4, 672.0 / 9.0);
    }

    #[test]
    fn excursion_samples_match_moments_and_are_uncorrelated() {
        let n = 200_000;
        let d = sample_excursions(
            1.0,
            1.0,
            n,
            stream(41, 0, StreamRole::Velocity1),
            stream(41, 0, StreamRole::Velocity2),
        );
        let m2 = d.iter().map(|x| x * x).sum::<f64>() / n as f64;
        let m4 = d.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
        let se2 = ((m4 - m2 * m2) / n as f64).sqrt();
        assert!((m2 - 8.0 / 3.0).abs() <= 3.0 * se2, "m2 {m2}");
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = m2 - mean * mean;
        let lag1 = d
            .windows(2)
            .map(|w| (w[0] - mean) * (w[1] - mean))
            .sum::<f64>()
            / ((n - 1) as f64 * var);
        assert!(lag1.abs() <= 3.0 / (n as f64).sqrt(), "lag-1 corr {lag1}");
    }

    #[test]
    fn zero_excursions_look_laplace() {
        let c = zero_excursion_law_check(1.0, 1.0, 100_000, stream(43, 0, StreamRole::Velocity1))
            .unwrap();
        let n = c.n as f64;
        assert!(c.ks <= 1.36 / n.sqrt(), "KS {}", c.ks);
        // Var(D^2) = E[D^4] - E[D^2]^2 = 24 - 4 = 20 at alpha 1
        assert!(
            (c.mean_square - 2.0).abs() <= 3.0 * (20.0f64 / n).sqrt(),
            "E[D^2] {}",
            c.mean_square
        );
        assert!((c.fraction_positive - 0.5).abs() <= 3.0 * (0.25f64 / n).sqrt());
    }

    #[test]
    fn monte_carlo_agrees_with_jam_hitting_formula() {
        let kind = TumbleKind::Instantaneous { omega: 1.0 };
        let (mean, se) = monte_carlo_hitting(
            kind,
            1.0,
            HittingQuery::JamAtZeroOpposing {
                start: ContState::new(0.5, VelocityPair::new(1, -1)),
            },
            100_000,
            47,
        )
        .unwrap();
        assert!((mean - 1.375).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn monte_carlo_agrees_with_velocity_and_diagonal_formulas() {
        let kind = TumbleKind::Finite {
            alpha: 1.0,
            beta: 1.0,
        };
        let (mean, se) = monte_carlo_hitting(
            kind,
            1.0,
            HittingQuery::VelocityAgreement { s0: -1, s0_tilde: 1 },
            100_000,
            48,
        )
        .unwrap();
        assert!((mean - 4.0 / 3.0).abs() <= 3.0 * se, "mean {mean}");

        let (mean, se) = monte_carlo_hitting(
            kind,
            1.0,
            HittingQuery::DiagonalReturn {
                sigma0: VelocityPair::new(0, 0),
            },
            100_000,
            49,
        )
        .unwrap();
        assert!((mean - 4.0 / 3.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn degenerate_queries_cost_nothing() {
        let kind = TumbleKind::Instantaneous { omega: 1.0 };
        let (mean, se) = monte_carlo_hitting(
            kind,
            1.0,
            HittingQuery::JamAtZeroOpposing {
                start: ContState::new(0.0, VelocityPair::new(1, -1)),
            },
            100,
            50,
        )
        .unwrap();
        assert_eq!((mean, se), (0.0, 0.0));
        let (mean, _) = monte_carlo_hitting(
            kind,
            1.0,
            HittingQuery::VelocityAgreement { s0: 1, s0_tilde: 1 },
            100,
            51,
        )
        .unwrap();
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn oracle_table_rows_agree_at_small_size() {
        let rows = oracle_table(4000, 57).unwrap();
        assert_eq!(rows.len(), 9 + 3 * 6);
        for row in &rows {
            assert!(
                row.z_score.abs() <= 4.0,
                "{}: z {}",
                row.query,
                row.z_score
            );
        }
    }

    #[test]
    fn return_intervals_match_increment_mean() {
        let d = sample_return_intervals(
            1.0,
            1.0,
            50_000,
            stream(59, 0, StreamRole::Velocity1),
            stream(59, 0, StreamRole::Velocity2),
        );
        let (mean, se) = mean_se(&d);
        assert!((mean - 4.0 / 3.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn mc_hit_distribution_normalizes() {
        let p = hit_distribution_mc(
            1.0,
            1.0,
            50_000,
            stream(53, 0, StreamRole::Velocity1),
            stream(53, 0, StreamRole::Velocity2),
        );
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // symmetric in the two moving diagonal states
        assert!((p[0] - p[2]).abs() < 0.02, "{p:?}");
        let c = diagonal_return_statistics(1.0, 1.0)
            .unwrap()
            .hit_distribution;
        for (got, want) in p.iter().zip(&c) {
            assert!((got - want).abs() < 0.01, "{p:?} vs {c:?}");
        }
    }
}
