//! Closed-form invariant measures of the continuous processes, their
//! symmetries, residual checks, sampling, and distances.
//!
//! Both invariant laws have the same shape: one atom at each end of the
//! interval per velocity pair, plus a bulk density
//! `a + b_s sinh(kappa (x - ell/2)) + b_c cosh(kappa (x - ell/2))`.
//! The instantaneous-tumble law has `kappa = 0` (constant densities).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pdmp::ContState;
use crate::transport::DiscreteMeasure;
use crate::velocity::{pair_generator, TumbleKind, VelocityPair};
use crate::{Error, Result};

/// Spectral constants of the finite-tumble invariant density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub kappa: f64,
    pub r: f64,
    pub r_tilde: f64,
    pub lambda_d: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl SpectralParams {
    pub fn new(alpha: f64, beta: f64, ell: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && ell > 0.0) {
            return Err(Error::InvalidParameter(
                "alpha, beta, ell must be positive".into(),
            ));
        }
        let kappa = ((alpha + beta) * (2.0 * alpha + beta) / 2.0).sqrt();
        let r = alpha / beta;
        let r_tilde = kappa / beta;
        let th = (kappa * ell / 2.0).tanh();
        let ch = (kappa * ell / 2.0).cosh();
        let denom = 2.0 * r_tilde + (2.0 * r + 1.0) * th;
        let lambda_d = (1.0 / r) * (1.0 - r_tilde / denom);
        let lambda_a =
            (kappa / (4.0 * r_tilde)) * (1.0 - 1.0 / (2.0 * r + 2.0 + 2.0 * r_tilde * th));
        let lambda_b = kappa / (4.0 * (r + 1.0) * ch * denom);
        Ok(SpectralParams {
            kappa,
            r,
            r_tilde,
            lambda_d,
            lambda_a,
            lambda_b,
        })
    }
}

/// Coefficients of one velocity pair's component of the measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    /// Atom mass at 0.
    pub d0: f64,
    /// Atom mass at ell.
    pub dl: f64,
    pub a: f64,
    pub bs: f64,
    pub bc: f64,
}

/// Atom-plus-density measure on `[0, ell] x Sigma`.
///
/// Rows follow the canonical order of [`TumbleKind::sigma_states`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDensityMeasure {
    pub kind: TumbleKind,
    pub ell: f64,
    pub kappa: f64,
    pub rows: Vec<SigmaRow>,
}

impl AtomicDensityMeasure {
    pub fn sigma_states(&self) -> Vec<VelocityPair> {
        self.kind.sigma_states()
    }

    /// Bulk density of row `i` at `x`.
    pub fn density(&self, i: usize, x: f64) -> f64 {
        let row = self.rows[i];
        if self.kappa == 0.0 {
            row.a
        } else {
            let u = self.kappa * (x - self.ell / 2.0);
            row.a + row.bs * u.sinh() + row.bc * u.cosh()
        }
    }

    /// Derivative of the bulk density of row `i` at `x`.
    pub fn density_prime(&self, i: usize, x: f64) -> f64 {
        if self.kappa == 0.0 {
            0.0
        } else {
            let row = self.rows[i];
            let u = self.kappa * (x - self.ell / 2.0);
            self.kappa * (row.bs * u.cosh() + row.bc * u.sinh())
        }
    }

    /// `int_0^x density(i, y) dy`, in closed form.
    pub fn bulk_cdf(&self, i: usize, x: f64) -> f64 {
        let row = self.rows[i];
        if self.kappa == 0.0 {
            return row.a * x;
        }
        let k = self.kappa;
        let u = k * (x - self.ell / 2.0);
        let u0 = -k * self.ell / 2.0;
        row.a * x + (row.bs / k) * (u.cosh() - u0.cosh()) + (row.bc / k) * (u.sinh() - u0.sinh())
    }

    /// Bulk mass of row `i` over the whole interval.
    pub fn bulk_mass(&self, i: usize) -> f64 {
        self.bulk_cdf(i, self.ell)
    }

    pub fn total_mass(&self) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.d0 + r.dl + self.bulk_mass(i))
            .sum()
    }

    /// Rescale to a probability measure; returns the normalization constant.
    pub fn normalize(mut self) -> Result<(AtomicDensityMeasure, f64)> {
        let z = self.total_mass();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Unnormalized(z));
        }
        for row in &mut self.rows {
            row.d0 /= z;
            row.dl /= z;
            row.a /= z;
            row.bs /= z;
            row.bc /= z;
        }
        Ok((self, z))
    }

    /// Nonnegativity of atoms and of densities on a 1000-point grid.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.d0 < 0.0 || row.dl < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "negative atom mass in row {i}"
                )));
            }
            for k in 0..=1000 {
                let x = self.ell * k as f64 / 1000.0;
                if self.density(i, x) < -1e-14 {
                    return Err(Error::InvalidParameter(format!(
                        "negative density at row {i}, x = {x}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Exact binning of atoms and bulk masses.
    pub fn bin(&self, bins: usize) -> Result<BinnedMeasure> {
        if bins == 0 {
            return Err(Error::InvalidParameter("bins must be >= 1".into()));
        }
        let n = self.rows.len();
        let mut bulk = vec![0.0; n * bins];
        for i in 0..n {
            for b in 0..bins {
                let lo = self.ell * b as f64 / bins as f64;
                let hi = self.ell * (b + 1) as f64 / bins as f64;
                bulk[i * bins + b] = self.bulk_cdf(i, hi) - self.bulk_cdf(i, lo);
            }
        }
        Ok(BinnedMeasure {
            ell: self.ell,
            bins,
            sigma: self.sigma_states(),
            atom0: self.rows.iter().map(|r| r.d0).collect(),
            atoml: self.rows.iter().map(|r| r.dl).collect(),
            bulk,
        })
    }
}

/// Invariant probability of the continuous instantaneous tumble process.
///
/// Constant bulk densities; per-side atom mass sums to `1/(2 + omega ell)`.
pub fn citp_invariant(omega: f64, ell: f64) -> Result<AtomicDensityMeasure> {
    if !(omega > 0.0 && ell > 0.0) {
        return Err(Error::InvalidParameter("omega, ell must be positive".into()));
    }
    let c = 1.0 / (4.0 * (2.0 + omega * ell));
    let a = omega * c;
    let row = |d0: f64, dl: f64| SigmaRow {
        d0,
        dl,
        a,
        bs: 0.0,
        bc: 0.0,
    };
    // canonical order (1,1), (1,-1), (-1,1), (-1,-1)
    let m = AtomicDensityMeasure {
        kind: TumbleKind::Instantaneous { omega },
        ell,
        kappa: 0.0,
        rows: vec![
            row(c, c),
            row(2.0 * c, 0.0),
            row(0.0, 2.0 * c),
            row(c, c),
        ],
    };
    m.validate()?;
    Ok(m)
}

/// Invariant probability of the continuous finite tumble process, plus
/// the total mass of the underlying unnormalized table.
pub fn cftp_invariant(alpha: f64, beta: f64, ell: f64) -> Result<(AtomicDensityMeasure, f64)> {
    let m = cftp_invariant_unnormalized(alpha, beta, ell)?;
    let (m, z) = m.normalize()?;
    m.validate()?;
    Ok((m, z))
}

/// The unnormalized finite-tumble table, fixed by `d0 = 1` for the
/// velocity pair (+1, 0).
pub fn cftp_invariant_unnormalized(
    alpha: f64,
    beta: f64,
    ell: f64,
) -> Result<AtomicDensityMeasure> {
    let sp = SpectralParams::new(alpha, beta, ell)?;
    let SpectralParams {
        kappa,
        r,
        r_tilde,
        lambda_d,
        lambda_a,
        lambda_b,
    } = sp;
    let row = |d0: f64, dl: f64, a: f64, bc: f64, bs: f64| SigmaRow { d0, dl, a, bs, bc };
    let tp1 = 2.0 * r + 1.0;
    // canonical order (1,1), (1,0), (1,-1), (0,1), (0,0), (0,-1),
    //                 (-1,1), (-1,0), (-1,-1)
    let rows = vec![
        row(0.25 / r, 0.25 / r, lambda_a, (tp1 / r) * lambda_b, 0.0),
        row(1.0, 0.0, 2.0 * r * lambda_a, 2.0 * tp1 * lambda_b, 2.0 * r_tilde * lambda_b),
        row(lambda_d, 0.0, lambda_a, -tp1 * lambda_b, -2.0 * r_tilde * lambda_b),
        row(0.0, 1.0, 2.0 * r * lambda_a, 2.0 * tp1 * lambda_b, -2.0 * r_tilde * lambda_b),
        row(r, r, 4.0 * r * r * lambda_a, 4.0 * r * tp1 * lambda_b, 0.0),
        row(1.0, 0.0, 2.0 * r * lambda_a, 2.0 * tp1 * lambda_b, 2.0 * r_tilde * lambda_b),
        row(0.0, lambda_d, lambda_a, -tp1 * lambda_b, 2.0 * r_tilde * lambda_b),
        row(0.0, 1.0, 2.0 * r * lambda_a, 2.0 * tp1 * lambda_b, -2.0 * r_tilde * lambda_b),
        row(0.25 / r, 0.25 / r, lambda_a, (tp1 / r) * lambda_b, 0.0),
    ];
    Ok(AtomicDensityMeasure {
        kind: TumbleKind::Finite { alpha, beta },
        ell,
        kappa,
        rows,
    })
}

/// State-space symmetries leaving the invariant measures fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho {
    /// (x, s1, s2) -> (ell - x, s2, s1): particle exchange.
    Rho1,
    /// (x, s1, s2) -> (ell - x, -s1, -s2): spatial reflection.
    Rho2,
    /// (x, s1, s2) -> (x, -s2, -s1): the composition of the two.
    Rho3,
}

impl Rho {
    fn map_sigma(self, s: VelocityPair) -> (VelocityPair, bool) {
        match self {
            Rho::Rho1 => (VelocityPair::new(s.s2, s.s1), true),
            Rho::Rho2 => (VelocityPair::new(-s.s1, -s.s2), true),
            Rho::Rho3 => (VelocityPair::new(-s.s2, -s.s1), false),
        }
    }
}

/// Pushforward of the measure under one of the symmetries.
///
/// Reflection swaps the end atoms and flips the sign of the odd density
/// coefficient; the velocity labels are permuted.
pub fn symmetry_pushforward(m: &AtomicDensityMeasure, which: Rho) -> AtomicDensityMeasure {
    let states = m.sigma_states();
    let mut rows = m.rows.clone();
    for (i, &s) in states.iter().enumerate() {
        let (target, reflect) = which.map_sigma(s);
        let j = m.kind.sigma_index(target);
        let src = m.rows[i];
        rows[j] = if reflect {
            SigmaRow {
                d0: src.dl,
                dl: src.d0,
                a: src.a,
                bs: -src.bs,
                bc: src.bc,
            }
        } else {
            src
        };
    }
    AtomicDensityMeasure {
        kind: m.kind,
        ell: m.ell,
        kappa: m.kappa,
        rows,
    }
}

/// Maximum coefficient difference between two measures over the same
/// state space.
pub fn coefficient_distance(a: &AtomicDensityMeasure, b: &AtomicDensityMeasure) -> f64 {
    a.rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| {
            (x.d0 - y.d0)
                .abs()
                .max((x.dl - y.dl).abs())
                .max((x.a - y.a).abs())
                .max((x.bs - y.bs).abs())
                .max((x.bc - y.bc).abs())
        })
        .fold(0.0, f64::max)
}

/// One velocity pair's sheet of a test function: a C1 cubic Hermite
/// spline on `[0, ell]`. Jam-state values are the boundary limits of the
/// sheet, which is exactly the domain condition of the generator.
#[derive(Debug, Clone)]
pub struct SigmaSheet {
    pub knots: Vec<f64>,
    pub vals: Vec<f64>,
    pub ders: Vec<f64>,
}

impl SigmaSheet {
    fn segment(&self, x: f64) -> usize {
        match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(self.knots.len() - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.vals[i]
            + (t3 - 2.0 * t2 + t) * h * self.ders[i]
            + (-2.0 * t3 + 3.0 * t2) * self.vals[i + 1]
            + (t3 - t2) * h * self.ders[i + 1]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.vals[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.ders[i]
            + (-6.0 * t2 + 6.0 * t) * self.vals[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.ders[i + 1])
            / h
    }
}

/// A generator-domain test function: one C1 sheet per velocity pair.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub sheets: Vec<SigmaSheet>,
}

impl TestFunction {
    /// Random admissible test function with `knots` uniform knots.
    pub fn random(kind: TumbleKind, ell: f64, knots: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = kind.sigma_states().len();
        let grid: Vec<f64> = (0..knots)
            .map(|k| ell * k as f64 / (knots - 1) as f64)
            .collect();
        let sheets = (0..n)
            .map(|_| SigmaSheet {
                knots: grid.clone(),
                vals: (0..knots).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                ders: (0..knots)
                    .map(|_| rng.gen_range(-1.0..1.0) / ell)
                    .collect(),
            })
            .collect();
        TestFunction { sheets }
    }

    fn scale(&self) -> f64 {
        self.sheets
            .iter()
            .flat_map(|s| s.vals.iter().chain(&s.ders))
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre recurrence for P_n and P_n'
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// `int L f dpi` for one test function: jump terms on the atoms, exact
/// transport-plus-jump quadrature over the bulk. The measure is invariant
/// iff this vanishes for every admissible f.
fn generator_pairing(m: &AtomicDensityMeasure, q: &nalgebra::DMatrix<f64>, f: &TestFunction) -> f64 {
    let n = m.rows.len();
    let qf = |x: f64, i: usize| -> f64 {
        (0..n)
            .map(|j| q[(i, j)] * (f.sheets[j].eval(x) - f.sheets[i].eval(x)))
            .sum::<f64>()
    };
    let states = m.sigma_states();
    let (gx, gw) = gauss_legendre(24);
    let mut acc = 0.0;
    for i in 0..n {
        let row = m.rows[i];
        acc += row.d0 * qf(0.0, i) + row.dl * qf(m.ell, i);
        let rel = f64::from(states[i].rel_speed());
        // integrate per knot interval; the integrand is smooth inside each
        let knots = &f.sheets[i].knots;
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
            for (t, wt) in gx.iter().zip(&gw) {
                let x = c + h * t;
                let integrand = (rel * f.sheets[i].deriv(x) + qf(x, i)) * m.density(i, x);
                acc += wt * h * integrand;
            }
        }
    }
    acc
}

/// Maximum normalized stationarity residual over a test family.
pub fn stationarity_residual(m: &AtomicDensityMeasure, family: &[TestFunction]) -> Result<f64> {
    let n = m.rows.len();
    let q = pair_generator(m.kind);
    let mut worst = 0.0f64;
    for f in family {
        if f.sheets.len() != n {
            return Err(Error::InvalidParameter(
                "test function sheet count does not match the velocity alphabet".into(),
            ));
        }
        for s in &f.sheets {
            let first = *s.knots.first().unwrap_or(&f64::NAN);
            let last = *s.knots.last().unwrap_or(&f64::NAN);
            if !(first == 0.0 && (last - m.ell).abs() <= 1e-12 * m.ell) {
                return Err(Error::InvalidParameter(
                    "test function knots must span [0, ell]".into(),
                ));
            }
        }
        worst = worst.max(generator_pairing(m, &q, f).abs() / f.scale());
    }
    Ok(worst)
}

/// Max grid residual of the bulk stationarity ODE `-V F' + Q^t F = 0`,
/// relative to the size of the terms.
pub fn ode_residual_bulk(m: &AtomicDensityMeasure) -> Result<f64> {
    if matches!(m.kind, TumbleKind::Instantaneous { .. }) && m.kappa != 0.0 {
        return Err(Error::InvalidParameter("kappa must be 0 for constant densities".into()));
    }
    let q = pair_generator(m.kind);
    let n = m.rows.len();
    let states = m.sigma_states();
    let mut worst = 0.0f64;
    for k in 1..200 {
        let x = m.ell * k as f64 / 200.0;
        for i in 0..n {
            let mut jump = 0.0;
            let mut scale = 0.0f64;
            for j in 0..n {
                let term = q[(j, i)] * m.density(j, x);
                jump += term;
                scale = scale.max(term.abs());
            }
            let transport = f64::from(states[i].rel_speed()) * m.density_prime(i, x);
            scale = scale.max(transport.abs()).max(1e-300);
            worst = worst.max((jump - transport).abs() / scale);
        }
    }
    Ok(worst)
}

/// Draw `n` states from a normalized measure. Atoms by categorical draw,
/// bulk by closed-form CDF inversion (bisection to 1e-14 relative).
pub fn sample_invariant(
    m: &AtomicDensityMeasure,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ContState>> {
    let total = m.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized(total));
    }
    let states = m.sigma_states();
    let k = m.rows.len();
    // component weights: per sigma (atom0, atoml, bulk)
    let mut weights = Vec::with_capacity(3 * k);
    for (i, row) in m.rows.iter().enumerate() {
        weights.push(row.d0);
        weights.push(row.dl);
        weights.push(m.bulk_mass(i));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.gen::<f64>() * total;
        let mut comp = weights.len() - 1;
        for (c, w) in weights.iter().enumerate() {
            if u < *w {
                comp = c;
                break;
            }
            u -= w;
        }
        let i = comp / 3;
        let x = match comp % 3 {
            0 => 0.0,
            1 => m.ell,
            _ => {
                // invert bulk_cdf(i, x) = u on [0, ell]
                let target = u.clamp(0.0, m.bulk_mass(i));
                let (mut lo, mut hi) = (0.0, m.ell);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if m.bulk_cdf(i, mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        out.push(ContState {
            x,
            sigma: states[i],
        });
    }
    Ok(out)
}

/// Discretized measure: end atoms plus a uniform-bin bulk histogram,
/// one row per velocity pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedMeasure {
    pub ell: f64,
    pub bins: usize,
    pub sigma: Vec<VelocityPair>,
    pub atom0: Vec<f64>,
    pub atoml: Vec<f64>,
    /// Sigma-major: `bulk[i * bins + b]`.
    pub bulk: Vec<f64>,
}

impl BinnedMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atom0.iter().sum::<f64>()
            + self.atoml.iter().sum::<f64>()
            + self.bulk.iter().sum::<f64>()
    }

    pub fn same_discretization(&self, other: &BinnedMeasure) -> bool {
        self.bins == other.bins
            && self.sigma == other.sigma
            && (self.ell - other.ell).abs() <= 1e-12 * self.ell.max(other.ell)
    }

    /// Point-mass view: atoms at the ends, bin mass at bin centroids,
    /// embedded as (x, s1, s2) in Euclidean 3-space.
    pub fn to_discrete(&self) -> DiscreteMeasure {
        let mut points = Vec::new();
        let mut mass = Vec::new();
        let h = self.ell / self.bins as f64;
        for (i, s) in self.sigma.iter().enumerate() {
            let (s1, s2) = (f64::from(s.s1), f64::from(s.s2));
            if self.atom0[i] > 0.0 {
                points.push([0.0, s1, s2]);
                mass.push(self.atom0[i]);
            }
            if self.atoml[i] > 0.0 {
                points.push([self.ell, s1, s2]);
                mass.push(self.atoml[i]);
            }
            for b in 0..self.bins {
                let w = self.bulk[i * self.bins + b];
                if w > 0.0 {
                    points.push([(b as f64 + 0.5) * h, s1, s2]);
                    mass.push(w);
                }
            }
        }
        DiscreteMeasure { points, mass }
    }
}

/// Empirical law of a sample of states, discretized like [`BinnedMeasure`].
///
/// Exactly-boundary positions count as atoms; clamping makes jammed
/// samples land exactly on 0 or ell.
pub fn empirical_measure(
    states: &[ContState],
    kind: TumbleKind,
    ell: f64,
    bins: usize,
) -> Result<BinnedMeasure> {
    if states.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be >= 1".into()));
    }
    let sigma = kind.sigma_states();
    let n = sigma.len();
    let w = 1.0 / states.len() as f64;
    let mut atom0 = vec![0.0; n];
    let mut atoml = vec![0.0; n];
    let mut bulk = vec![0.0; n * bins];
    for s in states {
        let i = kind.sigma_index(s.sigma);
        if s.x == 0.0 {
            atom0[i] += w;
        } else if s.x == ell {
            atoml[i] += w;
        } else {
            let b = ((s.x / ell * bins as f64) as usize).min(bins - 1);
            bulk[i * bins + b] += w;
        }
    }
    Ok(BinnedMeasure {
        ell,
        bins,
        sigma,
        atom0,
        atoml,
        bulk,
    })
}

/// Total variation distance of two identically discretized measures.
pub fn tv_distance(a: &BinnedMeasure, b: &BinnedMeasure) -> Result<f64> {
    if !a.same_discretization(b) {
        return Err(Error::DiscretizationMismatch(format!(
            "bins {} vs {}, |Sigma| {} vs {}",
            a.bins,
            b.bins,
            a.sigma.len(),
            b.sigma.len()
        )));
    }
    let mut l1 = 0.0;
    for (x, y) in a
        .atom0
        .iter()
        .zip(&b.atom0)
        .chain(a.atoml.iter().zip(&b.atoml))
        .chain(a.bulk.iter().zip(&b.bulk))
    {
        l1 += (x - y).abs();
    }
    Ok(0.5 * l1)
}

/// W1 distance between two discretized measures under the Euclidean
/// metric on (x, s1, s2).
pub fn w1_distance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    crate::transport::w1(a, b)
}
