//! Experiment front-end: every run validates its configuration, echoes a
//! resolved-config JSON on stderr, and writes deterministic CSV or JSON
//! data to stdout or `--out`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use rtp_core::coupling::{deviation_samples, estimate_mixing_time, deviation_bound, MixingOptions};
use rtp_core::hitting::oracle_table;
use rtp_core::lattice::{
    discrete_generator, simulate_discrete, simulate_occupation_discrete, stationary_distribution,
    LatticeParams, LatticeState,
};
use rtp_core::measures::{cftp_invariant, citp_invariant, ode_residual_bulk, tv_distance,
    w1_distance, AtomicDensityMeasure};
use rtp_core::pdmp::{simulate_continuous, simulate_occupation};
use rtp_core::rng::{stream, StreamRole};
use rtp_core::{ContParams, ContState, TumbleKind, VelocityPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    /// Continuous, instantaneous tumbles.
    Citp,
    /// Continuous, finite tumbles.
    Cftp,
    /// Lattice, instantaneous tumbles.
    Ditp,
    /// Lattice, finite tumbles.
    Dftp,
}

impl Kind {
    fn is_lattice(self) -> bool {
        matches!(self, Kind::Ditp | Kind::Dftp)
    }
}

#[derive(Debug, Args, Serialize)]
struct KindArgs {
    /// Process family.
    #[arg(long, value_enum)]
    kind: Kind,
    /// Flip rate (instantaneous kinds).
    #[arg(long)]
    omega: Option<f64>,
    /// Rate of tumbling from a moving state (finite kinds).
    #[arg(long)]
    alpha: Option<f64>,
    /// Rate of leaving the rest state (finite kinds).
    #[arg(long)]
    beta: Option<f64>,
    /// Domain length.
    #[arg(long, default_value_t = 1.0)]
    ell: f64,
}

impl KindArgs {
    fn tumble(&self) -> TumbleKind {
        let kind = match self.kind {
            Kind::Citp | Kind::Ditp => TumbleKind::Instantaneous {
                omega: self
                    .omega
                    .unwrap_or_else(|| config_error("--omega is required for this kind")),
            },
            Kind::Cftp | Kind::Dftp => TumbleKind::Finite {
                alpha: self
                    .alpha
                    .unwrap_or_else(|| config_error("--alpha is required for this kind")),
                beta: self
                    .beta
                    .unwrap_or_else(|| config_error("--beta is required for this kind")),
            },
        };
        if let Err(e) = kind.validate() {
            config_error(&e.to_string());
        }
        if !(self.ell > 0.0) {
            config_error("--ell must be positive");
        }
        kind
    }
}

#[derive(Debug, Parser)]
#[command(name = "rtp", version, about = "Run-and-tumble separation experiments")]
struct Cli {
    /// Worker threads (RTP_WORKERS overrides); affects wall time only.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the data output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand, Serialize)]
enum Cmd {
    /// Simulate one trajectory; emits a breakpoint or event CSV.
    Simulate {
        #[command(flatten)]
        kind: KindArgs,
        /// Lattice sites (lattice kinds; rates scale with (L-1)/ell).
        #[arg(long)]
        l: Option<usize>,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long)]
        seed: u64,
        /// Initial separation (continuous kinds); defaults to ell/2.
        #[arg(long)]
        x0: Option<f64>,
        /// Initial site (lattice kinds); defaults to the middle.
        #[arg(long)]
        y0: Option<usize>,
        #[arg(long, default_value_t = 1)]
        s1: i8,
        #[arg(long, default_value_t = -1)]
        s2: i8,
    },
    /// Analytic invariant measure (continuous kinds, JSON) or stationary
    /// solve (lattice kinds, CSV), optionally compared to a long run.
    Invariant {
        #[command(flatten)]
        kind: KindArgs,
        #[arg(long)]
        l: Option<usize>,
        /// Also simulate this long and report the TV distance.
        #[arg(long)]
        compare_horizon: Option<f64>,
        /// Seed for the comparison run.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
    },
    /// Lattice-to-continuous convergence sweep: deviation quantiles,
    /// probability bound, and W1 of the embedded stationary law, per L.
    Converge {
        #[command(flatten)]
        kind: KindArgs,
        #[arg(long, value_delimiter = ',', default_value = "8,32,128,512")]
        l_list: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 200)]
        replicas: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        s1: i8,
        #[arg(long, default_value_t = -1)]
        s2: i8,
    },
    /// Coupling-based mixing time estimates over a rate grid, JSON.
    Mixing {
        #[command(flatten)]
        kind: KindArgs,
        /// Extra rate values to sweep (cartesian with the base rates).
        #[arg(long, value_delimiter = ',')]
        ell_list: Vec<f64>,
        #[arg(long, default_value_t = 0.25)]
        epsilon: f64,
        #[arg(long, default_value_t = 64)]
        replicas: usize,
        #[arg(long, default_value_t = 500)]
        tv_replicas: usize,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Closed-form hitting oracles vs Monte Carlo, CSV.
    Hitting {
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Run the full verification suite (or one criterion).
    Verify {
        /// Criterion number 1..=9.
        #[arg(long)]
        only: Option<usize>,
    },
}

fn config_error(msg: &str) -> ! {
    eprintln!("config error: {msg}");
    exit(2)
}

fn fail(msg: &str) -> ! {
    eprintln!("error: {msg}");
    exit(1)
}

fn emit(out: &Option<PathBuf>, data: &str) {
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, data) {
                fail(&format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{data}"),
    }
}

fn main() {
    let cli = Cli::parse();
    let workers = std::env::var("RTP_WORKERS")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .unwrap_or_else(|_| config_error("RTP_WORKERS must be an integer"))
        })
        .or(cli.workers);
    if let Some(w) = workers {
        if w == 0 {
            config_error("worker count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .ok();
    }
    let resolved = json!({
        "command": cli.cmd,
        "workers": workers,
        "out": cli.out,
    });
    eprintln!("{resolved}");

    let data = match &cli.cmd {
        Cmd::Simulate {
            kind,
            l,
            horizon,
            seed,
            x0,
            y0,
            s1,
            s2,
        } => cmd_simulate(kind, *l, *horizon, *seed, *x0, *y0, *s1, *s2),
        Cmd::Invariant {
            kind,
            l,
            compare_horizon,
            seed,
            bins,
        } => cmd_invariant(kind, *l, *compare_horizon, *seed, *bins),
        Cmd::Converge {
            kind,
            l_list,
            horizon,
            replicas,
            epsilon,
            bins,
            seed,
            s1,
            s2,
        } => cmd_converge(kind, l_list, *horizon, *replicas, *epsilon, *bins, *seed, *s1, *s2),
        Cmd::Mixing {
            kind,
            ell_list,
            epsilon,
            replicas,
            tv_replicas,
            bins,
            seed,
        } => cmd_mixing(kind, ell_list, *epsilon, *replicas, *tv_replicas, *bins, *seed),
        Cmd::Hitting { replicas, seed } => cmd_hitting(*replicas, *seed),
        Cmd::Verify { only } => {
            cmd_verify(*only);
        }
    };
    emit(&cli.out, &data);
}

fn sigma_or_exit(kind: TumbleKind, s1: i8, s2: i8) -> VelocityPair {
    let sigma = VelocityPair::new(s1, s2);
    if !kind.alphabet().contains(&s1) || !kind.alphabet().contains(&s2) {
        config_error(&format!("velocities ({s1},{s2}) outside the alphabet"));
    }
    sigma
}

fn lattice_params_or_exit(kind: &KindArgs, l: Option<usize>) -> LatticeParams {
    let tumble = kind.tumble();
    let l = l.unwrap_or_else(|| config_error("--l is required for lattice kinds"));
    match LatticeParams::scaled(l, kind.ell, tumble) {
        Ok(p) => p,
        Err(e) => config_error(&e.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    kind: &KindArgs,
    l: Option<usize>,
    horizon: f64,
    seed: u64,
    x0: Option<f64>,
    y0: Option<usize>,
    s1: i8,
    s2: i8,
) -> String {
    if !(horizon > 0.0) {
        config_error("--horizon must be positive");
    }
    let mut csv = String::new();
    if kind.kind.is_lattice() {
        let params = lattice_params_or_exit(kind, l);
        let sigma = sigma_or_exit(params.kind, s1, s2);
        let y = y0.unwrap_or(params.l_sites.div_ceil(2));
        if !(1..=params.l_sites).contains(&y) {
            config_error(&format!("--y0 must lie in 1..={}", params.l_sites));
        }
        let init = LatticeState { y, sigma };
        let traj = simulate_discrete(
            &params,
            init,
            horizon,
            stream(seed, 0, StreamRole::Velocity1),
            stream(seed, 0, StreamRole::Velocity2),
            stream(seed, 0, StreamRole::Clock1),
            stream(seed, 0, StreamRole::Clock2),
        )
        .unwrap_or_else(|e| fail(&e.to_string()));
        csv.push_str("t,y,s1,s2\n");
        let _ = writeln!(csv, "0,{},{},{}", init.y, init.sigma.s1, init.sigma.s2);
        for (t, st) in &traj.events {
            let _ = writeln!(csv, "{t},{},{},{}", st.y, st.sigma.s1, st.sigma.s2);
        }
    } else {
        let tumble = kind.tumble();
        let params = ContParams::new(kind.ell, tumble).unwrap_or_else(|e| config_error(&e.to_string()));
        let sigma = sigma_or_exit(tumble, s1, s2);
        let x = x0.unwrap_or(kind.ell / 2.0);
        if !(0.0..=kind.ell).contains(&x) {
            config_error("--x0 must lie in [0, ell]");
        }
        let (path, vpath) = simulate_continuous(
            &params,
            ContState::new(x, sigma),
            horizon,
            stream(seed, 0, StreamRole::Velocity1),
            stream(seed, 0, StreamRole::Velocity2),
        )
        .unwrap_or_else(|e| fail(&e.to_string()));
        csv.push_str("t,x,slope,s1,s2\n");
        for bp in &path.breakpoints {
            let sg = vpath.sigma_at(bp.t);
            let _ = writeln!(csv, "{},{},{},{},{}", bp.t, bp.x, bp.slope, sg.s1, sg.s2);
        }
    }
    csv
}

fn analytic_or_exit(kind: &KindArgs) -> AtomicDensityMeasure {
    let result = match kind.tumble() {
        TumbleKind::Instantaneous { omega } => citp_invariant(omega, kind.ell),
        TumbleKind::Finite { alpha, beta } => {
            cftp_invariant(alpha, beta, kind.ell).map(|(m, _)| m)
        }
    };
    result.unwrap_or_else(|e| config_error(&e.to_string()))
}

fn cmd_invariant(
    kind: &KindArgs,
    l: Option<usize>,
    compare_horizon: Option<f64>,
    seed: Option<u64>,
    bins: usize,
) -> String {
    if compare_horizon.is_some() && seed.is_none() {
        config_error("--compare-horizon needs --seed");
    }
    if kind.kind.is_lattice() {
        let params = lattice_params_or_exit(kind, l);
        let pi = stationary_distribution(&params).unwrap_or_else(|e| fail(&e.to_string()));
        let residual = discrete_generator(&params).residual(&pi.probs);
        let tv = compare_horizon.map(|h| {
            let init = params.state_at(0);
            let occ = simulate_occupation_discrete(
                &params,
                init,
                h,
                stream(seed.unwrap(), 0, StreamRole::Velocity1),
                stream(seed.unwrap(), 0, StreamRole::Velocity2),
                stream(seed.unwrap(), 0, StreamRole::Clock1),
                stream(seed.unwrap(), 0, StreamRole::Clock2),
            )
            .unwrap_or_else(|e| fail(&e.to_string()));
            0.5 * occ
                .iter()
                .zip(&pi.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        });
        let mut csv = String::from(if tv.is_some() {
            "y,s1,s2,prob,residual,tv\n"
        } else {
            "y,s1,s2,prob,residual\n"
        });
        for (i, p) in pi.probs.iter().enumerate() {
            let st = params.state_at(i);
            let _ = write!(csv, "{},{},{},{p},{residual}", st.y, st.sigma.s1, st.sigma.s2);
            match tv {
                Some(tv) => {
                    let _ = writeln!(csv, ",{tv}");
                }
                None => csv.push('\n'),
            }
        }
        csv
    } else {
        let m = analytic_or_exit(kind);
        let tumble = kind.tumble();
        let tv = compare_horizon.map(|h| {
            let params = ContParams::new(kind.ell, tumble).unwrap();
            let occ = simulate_occupation(
                &params,
                ContState::new(kind.ell / 2.0, tumble.sigma_states()[0]),
                h,
                bins,
                stream(seed.unwrap(), 0, StreamRole::Velocity1),
                stream(seed.unwrap(), 0, StreamRole::Velocity2),
            )
            .and_then(|occ| tv_distance(&occ, &m.bin(bins)?))
            .unwrap_or_else(|e| fail(&e.to_string()));
            occ
        });
        let rows: Vec<_> = m
            .sigma_states()
            .iter()
            .zip(&m.rows)
            .map(|(s, row)| {
                json!({
                    "s1": s.s1, "s2": s.s2,
                    "atom0": row.d0, "atoml": row.dl,
                    "const": row.a, "sinh": row.bs, "cosh": row.bc,
                })
            })
            .collect();
        let out = json!({
            "kind": tumble,
            "ell": kind.ell,
            "kappa": m.kappa,
            "total_mass": m.total_mass(),
            "ode_residual": ode_residual_bulk(&m).unwrap_or_else(|e| fail(&e.to_string())),
            "rows": rows,
            "empirical_tv": tv,
        });
        format!("{}\n", serde_json::to_string_pretty(&out).unwrap())
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    kind: &KindArgs,
    l_list: &[usize],
    horizon: f64,
    replicas: usize,
    epsilon: f64,
    bins: usize,
    seed: u64,
    s1: i8,
    s2: i8,
) -> String {
    if kind.kind.is_lattice() {
        config_error("converge expects a continuous kind; the lattice side is derived from it");
    }
    if l_list.iter().any(|&l| l < 2) || l_list.is_empty() {
        config_error("--l-list needs sites >= 2");
    }
    if !(horizon > 0.0 && epsilon > 0.0 && replicas > 0) {
        config_error("--horizon, --epsilon, --replicas must be positive");
    }
    let tumble = kind.tumble();
    let params = ContParams::new(kind.ell, tumble).unwrap_or_else(|e| config_error(&e.to_string()));
    let sigma = sigma_or_exit(tumble, s1, s2);
    let init = ContState::new(kind.ell / 2.0, sigma);
    let analytic = analytic_or_exit(kind)
        .bin(bins)
        .unwrap_or_else(|e| fail(&e.to_string()))
        .to_discrete();
    let mut csv =
        String::from("l_sites,median_dev,q90_dev,max_dev,bound,w1\n");
    for &l in l_list {
        let mut devs = deviation_samples(&params, l, init, horizon, replicas, seed)
            .unwrap_or_else(|e| fail(&e.to_string()));
        devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| devs[((p * devs.len() as f64) as usize).min(devs.len() - 1)];
        let bound = deviation_bound(epsilon, horizon, l, kind.ell, tumble.eta());
        let lattice = LatticeParams::scaled(l, kind.ell, tumble)
            .unwrap_or_else(|e| config_error(&e.to_string()));
        let w1 = stationary_distribution(&lattice)
            .and_then(|pi| w1_distance(&pi.embedded_measure(), &analytic))
            .unwrap_or_else(|e| fail(&e.to_string()));
        let _ = writeln!(
            csv,
            "{l},{},{},{},{bound},{w1}",
            q(0.5),
            q(0.9),
            devs[devs.len() - 1]
        );
    }
    csv
}

fn cmd_mixing(
    kind: &KindArgs,
    ell_list: &[f64],
    epsilon: f64,
    replicas: usize,
    tv_replicas: usize,
    bins: usize,
    seed: u64,
) -> String {
    if kind.kind.is_lattice() {
        config_error("mixing expects a continuous kind");
    }
    let tumble = kind.tumble();
    let ells = if ell_list.is_empty() {
        vec![kind.ell]
    } else {
        ell_list.to_vec()
    };
    if ells.iter().any(|&e| !(e > 0.0)) {
        config_error("--ell-list entries must be positive");
    }
    let opts = MixingOptions {
        epsilon,
        replicas,
        tv_replicas,
        tv_bins: bins,
        seed,
        ..MixingOptions::default()
    };
    let estimates: Vec<_> = ells
        .iter()
        .map(|&ell| {
            estimate_mixing_time(tumble, ell, &opts)
                .unwrap_or_else(|e| config_error(&e.to_string()))
        })
        .collect();
    format!("{}\n", serde_json::to_string_pretty(&estimates).unwrap())
}

fn cmd_hitting(replicas: usize, seed: u64) -> String {
    if replicas == 0 {
        config_error("--replicas must be positive");
    }
    let rows = oracle_table(replicas, seed).unwrap_or_else(|e| fail(&e.to_string()));
    let mut csv = String::from("query,closed_form,mc_mean,mc_stderr,z_score\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.query, r.closed_form, r.mc_mean, r.mc_stderr, r.z_score
        );
    }
    csv
}

fn cmd_verify(only: Option<usize>) -> ! {
    use rtp_core::acceptance as acc;
    let reports = match only {
        Some(n) => {
            let f = [
                acc::criterion_1,
                acc::criterion_2,
                acc::criterion_3,
                acc::criterion_4,
                acc::criterion_5,
                acc::criterion_6,
                acc::criterion_7,
                acc::criterion_8,
                acc::criterion_9,
            ]
            .get(n.wrapping_sub(1))
            .copied()
            .unwrap_or_else(|| config_error("--only must lie in 1..=9"));
            vec![f().unwrap_or_else(|e| fail(&e.to_string()))]
        }
        None => acc::run_all().unwrap_or_else(|e| fail(&e.to_string())),
    };
    let mut ok = true;
    for r in &reports {
        println!("{}", r.summary_line());
        ok &= r.passed;
    }
    exit(if ok { 0 } else { 1 })
}
