//! Single-particle and pair velocity jump processes.
//!
//! Two tumble mechanisms are supported: instantaneous tumbles, where a
//! particle's velocity flips between -1 and +1 at rate `omega`, and finite
//! tumbles, where +-1 decays to 0 at rate `alpha` and 0 exits to +-1 at
//! rate `beta/2` each. Velocities of the two particles are independent;
//! the pair generator is the Kronecker sum of two single-particle
//! generators.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tumble mechanism plus its rate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TumbleKind {
    /// Velocity flips -1 <-> +1 at rate `omega`.
    Instantaneous { omega: f64 },
    /// +-1 -> 0 at rate `alpha`; 0 -> +-1 at rate `beta/2` each.
    Finite { alpha: f64, beta: f64 },
}

impl TumbleKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TumbleKind::Instantaneous { omega } if omega > 0.0 => Ok(()),
            TumbleKind::Finite { alpha, beta } if alpha > 0.0 && beta > 0.0 => Ok(()),
            _ => Err(Error::InvalidParameter(format!(
                "tumble rates must be strictly positive, got {self:?}"
            ))),
        }
    }

    /// Jump-intensity constant of the scaling-limit bound:
    /// `2 omega` (instantaneous) or `2 max(alpha, beta)` (finite).
    pub fn eta(&self) -> f64 {
        match *self {
            TumbleKind::Instantaneous { omega } => 2.0 * omega,
            TumbleKind::Finite { alpha, beta } => 2.0 * alpha.max(beta),
        }
    }

    /// Single-particle velocity alphabet, in canonical order.
    pub fn alphabet(&self) -> &'static [i8] {
        match self {
            TumbleKind::Instantaneous { .. } => &[1, -1],
            TumbleKind::Finite { .. } => &[1, 0, -1],
        }
    }

    /// All velocity pairs `Sigma` in canonical (s1-major) order.
    pub fn sigma_states(&self) -> Vec<VelocityPair> {
        let a = self.alphabet();
        let mut out = Vec::with_capacity(a.len() * a.len());
        for &s1 in a {
            for &s2 in a {
                out.push(VelocityPair { s1, s2 });
            }
        }
        out
    }

    /// Index of `sigma` within [`sigma_states`](Self::sigma_states).
    pub fn sigma_index(&self, sigma: VelocityPair) -> usize {
        let a = self.alphabet();
        let i1 = a.iter().position(|&s| s == sigma.s1).expect("s1 in alphabet");
        let i2 = a.iter().position(|&s| s == sigma.s2).expect("s2 in alphabet");
        i1 * a.len() + i2
    }

    /// Stationary law of a single velocity, indexed like [`alphabet`](Self::alphabet).
    pub fn single_stationary(&self) -> Vec<f64> {
        match *self {
            TumbleKind::Instantaneous { .. } => vec![0.5, 0.5],
            TumbleKind::Finite { alpha, beta } => {
                let p0 = alpha / (alpha + beta);
                let p1 = beta / (2.0 * (alpha + beta));
                vec![p1, p0, p1]
            }
        }
    }
}

/// Velocities of the two particles, `sigma = (s1, s2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VelocityPair {
    pub s1: i8,
    pub s2: i8,
}

impl VelocityPair {
    pub fn new(s1: i8, s2: i8) -> Self {
        VelocityPair { s1, s2 }
    }

    /// Relative speed `s2 - s1`, the slope of the separation `x`.
    pub fn rel_speed(&self) -> i8 {
        self.s2 - self.s1
    }
}

/// Rate matrix of a single velocity over [`TumbleKind::alphabet`].
pub fn single_rate_matrix(kind: TumbleKind) -> DMatrix<f64> {
    match kind {
        TumbleKind::Instantaneous { omega } => {
            DMatrix::from_row_slice(2, 2, &[-omega, omega, omega, -omega])
        }
        TumbleKind::Finite { alpha, beta } => DMatrix::from_row_slice(
            3,
            3,
            &[
                -alpha,
                alpha,
                0.0,
                beta / 2.0,
                -beta,
                beta / 2.0,
                0.0,
                alpha,
                -alpha,
            ],
        ),
    }
}

/// Pair generator over `Sigma`: Kronecker sum of two single-particle
/// rate matrices (4x4 instantaneous, 9x9 finite).
pub fn pair_generator(kind: TumbleKind) -> DMatrix<f64> {
    let a = single_rate_matrix(kind);
    let n = a.nrows();
    let mut q = DMatrix::zeros(n * n, n * n);
    for i1 in 0..n {
        for i2 in 0..n {
            for j in 0..n {
                q[(i1 * n + i2, j * n + i2)] += a[(i1, j)];
                q[(i1 * n + i2, i1 * n + j)] += a[(i2, j)];
            }
        }
    }
    q
}

/// One particle's velocity process with its own exponential clock.
///
/// Keeps its RNG so paths can be extended past any horizon.
#[derive(Debug, Clone)]
pub struct SingleVelocityProcess {
    kind: TumbleKind,
    state: i8,
    /// Time of the next jump.
    next_jump: f64,
    rng: ChaCha8Rng,
}

impl SingleVelocityProcess {
    pub fn new(kind: TumbleKind, s0: i8, rng: ChaCha8Rng) -> Self {
        debug_assert!(kind.alphabet().contains(&s0));
        let mut p = SingleVelocityProcess {
            kind,
            state: s0,
            next_jump: 0.0,
            rng,
        };
        p.next_jump = p.holding_time();
        p
    }

    fn exit_rate(&self) -> f64 {
        match self.kind {
            TumbleKind::Instantaneous { omega } => omega,
            TumbleKind::Finite { alpha, beta } => {
                if self.state == 0 {
                    beta
                } else {
                    alpha
                }
            }
        }
    }

    fn holding_time(&mut self) -> f64 {
        let u: f64 = self.rng.gen::<f64>();
        -u.ln() / self.exit_rate()
    }

    pub fn state(&self) -> i8 {
        self.state
    }

    pub fn next_jump_time(&self) -> f64 {
        self.next_jump
    }

    /// Advance past the pending jump; returns (jump time, new state).
    pub fn advance(&mut self) -> (f64, i8) {
        let t = self.next_jump;
        self.state = match self.kind {
            TumbleKind::Instantaneous { .. } => -self.state,
            TumbleKind::Finite { .. } => {
                if self.state == 0 {
                    if self.rng.gen::<bool>() {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                }
            }
        };
        self.next_jump = t + self.holding_time();
        (t, self.state)
    }
}

/// Pair velocity process; merges the two independent single clocks.
#[derive(Debug, Clone)]
pub struct VelocityPairProcess {
    p1: SingleVelocityProcess,
    p2: SingleVelocityProcess,
}

impl VelocityPairProcess {
    pub fn new(
        kind: TumbleKind,
        sigma0: VelocityPair,
        rng1: ChaCha8Rng,
        rng2: ChaCha8Rng,
    ) -> Self {
        VelocityPairProcess {
            p1: SingleVelocityProcess::new(kind, sigma0.s1, rng1),
            p2: SingleVelocityProcess::new(kind, sigma0.s2, rng2),
        }
    }

    pub fn sigma(&self) -> VelocityPair {
        VelocityPair::new(self.p1.state(), self.p2.state())
    }

    pub fn next_jump_time(&self) -> f64 {
        self.p1.next_jump_time().min(self.p2.next_jump_time())
    }

    /// Advance to the next jump of either particle; returns (time, new pair).
    pub fn advance(&mut self) -> (f64, VelocityPair) {
        let t = if self.p1.next_jump_time() <= self.p2.next_jump_time() {
            self.p1.advance().0
        } else {
            self.p2.advance().0
        };
        (t, self.sigma())
    }
}

/// A sampled pair-velocity trajectory on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityPath {
    pub initial: VelocityPair,
    /// Jump times with the post-jump pair; strictly increasing, <= horizon.
    pub events: Vec<(f64, VelocityPair)>,
    pub horizon: f64,
}

impl VelocityPath {
    /// Pair value at time `t` (right-continuous).
    pub fn sigma_at(&self, t: f64) -> VelocityPair {
        match self.events.iter().rev().find(|(s, _)| *s <= t) {
            Some(&(_, sigma)) => sigma,
            None => self.initial,
        }
    }

    /// Constancy intervals `(t0, t1, sigma)` covering `[0, horizon]`.
    pub fn segments(&self) -> Vec<(f64, f64, VelocityPair)> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut t0 = 0.0;
        let mut sigma = self.initial;
        for &(t, next) in &self.events {
            out.push((t0, t, sigma));
            t0 = t;
            sigma = next;
        }
        out.push((t0, self.horizon, sigma));
        out
    }
}

/// Exact sampling of the pair velocity path on `[0, horizon]`.
pub fn sample_velocity_path(
    kind: TumbleKind,
    sigma0: VelocityPair,
    horizon: f64,
    rng1: ChaCha8Rng,
    rng2: ChaCha8Rng,
) -> VelocityPath {
    let mut proc = VelocityPairProcess::new(kind, sigma0, rng1, rng2);
    let mut events = Vec::new();
    while proc.next_jump_time() <= horizon {
        events.push(proc.advance());
    }
    VelocityPath {
        initial: sigma0,
        events,
        horizon,
    }
}

/// Exact displacement integral `I(t) = int_0^t (s2 - s1) ds`.
pub fn velocity_integral(path: &VelocityPath, t: f64) -> Result<f64> {
    if !(0.0..=path.horizon).contains(&t) {
        return Err(Error::TimeOutOfRange {
            t,
            horizon: path.horizon,
        });
    }
    let mut acc = 0.0;
    for (t0, t1, sigma) in path.segments() {
        if t <= t0 {
            break;
        }
        let end = t.min(t1);
        acc += f64::from(sigma.rel_speed()) * (end - t0);
    }
    Ok(acc)
}

/// Feynman-Kac MGF `E_{s0}[exp(zeta * int_0^t s(u) du)]` for the
/// instantaneous kind.
pub fn mgf_velocity_integral(omega: f64, s0: i8, zeta: f64, t: f64) -> f64 {
    debug_assert!(s0 == 1 || s0 == -1);
    let s = (zeta * zeta + omega * omega).sqrt();
    let sign = f64::from(s0);
    (-t * omega).exp() * ((omega + sign * zeta) * (t * s).sinh() / s + (t * s).cosh())
}

/// `E_{s0}[I_1(t)]` for a single instantaneous-tumble velocity.
pub fn mean_velocity_integral(omega: f64, s0: i8, t: f64) -> f64 {
    f64::from(s0) * (1.0 - (-2.0 * omega * t).exp()) / (2.0 * omega)
}

/// `E[I_1(t)^2]` (independent of the start state).
pub fn second_moment_velocity_integral(omega: f64, t: f64) -> f64 {
    t / omega - (1.0 - (-2.0 * omega * t).exp()) / (2.0 * omega * omega)
}

/// `E[I_1(t)^4]` (independent of the start state).
pub fn fourth_moment_velocity_integral(omega: f64, t: f64) -> f64 {
    let e = (-2.0 * omega * t).exp();
    let w2 = omega * omega;
    let w3 = w2 * omega;
    let w4 = w3 * omega;
    3.0 * t * t / w2 - 6.0 * t / w3 + 4.5 / w4
        - e * (1.5 * (1.0 + 2.0 * omega * t) / w4 + 3.0 / w4)
}
