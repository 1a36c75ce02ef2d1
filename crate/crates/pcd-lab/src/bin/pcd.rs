use clap::{Parser, Subcommand, ValueEnum};
use pcd_lab::besov::build_partition;
use pcd_lab::harness::experiments::{counter_terms, run_convergence, run_divergence_demo};
use pcd_lab::harness::{run_verify, ExperimentConfig, ManifestBuilder};
use pcd_lab::io::{encode_trajectory, fmt_f, Csv};
use pcd_lab::ou::{sample_ou, MollifierProfile, OuSampler};
use pcd_lab::renorm::{build_rough_distribution_with, compute_c1, compute_c2_both, compute_phi_eps, SumSpec};
use pcd_lab::solver::{picard_solve, solve_direct, Forcing};
use pcd_lab::{Error, TrajectoryField};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pcd", version, about = "Paracontrolled Phi^4 spectral laboratory")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "PCD_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Direct,
    Paracontrolled,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the mollified O.U. field; writes x.bin (field dumps) and x.jsonl (sidecar).
    SampleOu {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Mollification level (defaults to the first configured one).
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// CSV columns: epsilon,c1,c2_plain,c2_block,c_combined (c_combined uses c2_block).
    RenormConstants {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        f_support: f64,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CSV columns: t,phi.
    PhiEps {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        f_support: f64,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 0.25)]
        t_end: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds the rough distribution; writes c1.bin..c6.bin with sidecars and phi.csv (t,phi).
    BuildRough {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solves from u0 = X(0); writes u.bin/u.jsonl and prints a status line.
    Solve {
        #[arg(long, value_enum, default_value_t = Mode::Direct)]
        mode: Mode,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1)]
        dump_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Invariant battery; CSV columns: check,pass,detail.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Perturb one input (negative control; the battery must fail).
        #[arg(long)]
        corrupt: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coupled ε-halving tables. rough.csv: seed,eps_coarse,eps_fine,d_x,d_wick2,d_int_cube,
    /// d_pi0_x,d_res22,d_res32,d_phi,distance; solution.csv: seed,eps_coarse,eps_fine,distance,blowup.
    Converge {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_rough: bool,
        #[arg(long)]
        no_solution: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// CSV columns: epsilon,c1,eps_c1,c2_plain,c2_block,dc2.
    Diverge {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Assertion(String),
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidExponents(_) | Error::InvalidSpec(_) | Error::TruncationError { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(path: &Option<PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.noise.seeds = vec![s];
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Runtime(e.to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn level(cfg: &ExperimentConfig, epsilon: Option<f64>) -> Result<f64, Failure> {
    epsilon
        .or_else(|| cfg.noise.epsilons.first().copied())
        .ok_or_else(|| Failure::Config("no epsilon given".into()))
}

fn sample(cfg: &ExperimentConfig, eps: f64) -> Result<TrajectoryField, Failure> {
    let s = OuSampler::new(cfg.spec()?, cfg.ou_mode(), eps, cfg.profile()?, cfg.noise.seeds[0], 0)?;
    Ok(sample_ou(&s, 0.0, cfg.grid.t_end, cfg.n_steps())?)
}

fn write_traj(m: &mut ManifestBuilder, dir: &Path, stem: &str, u: &TrajectoryField, cfg: &ExperimentConfig, eps: f64) -> Result<(), Failure> {
    let (bin, side) = encode_trajectory(u, cfg.noise.seeds[0], 0, eps);
    m.write(dir, &format!("{stem}.bin"), &bin)?;
    m.write(dir, &format!("{stem}.jsonl"), side.as_bytes())?;
    Ok(())
}

fn thin(u: &TrajectoryField, every: usize) -> Result<TrajectoryField, Failure> {
    if every <= 1 || u.n_steps() % every != 0 {
        return Ok(u.clone());
    }
    let snaps = (0..=u.n_steps()).step_by(every).map(|i| u.snapshot(i).clone()).collect();
    Ok(TrajectoryField::new(u.t0(), u.t1(), snaps)?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::SampleOu { config, seed, epsilon, out } => {
            let cfg = load(&config, seed)?;
            let eps = level(&cfg, epsilon)?;
            let mut m = ManifestBuilder::new("sample-ou", &cfg.canonical(), &cfg.noise.seeds);
            write_traj(&mut m, &out, "x", &sample(&cfg, eps)?, &cfg, eps)?;
            m.finish().write(&out)?;
        }
        Cmd::RenormConstants { epsilon, f_support, dim, out } => {
            let f = MollifierProfile::new(f_support)?;
            let s = SumSpec::full(dim, epsilon, f);
            let c1 = compute_c1(&s)?;
            let (plain, block) = compute_c2_both(&s)?;
            let mut c = Csv::new(&["epsilon", "c1", "c2_plain", "c2_block", "c_combined"]);
            c.push(vec![fmt_f(epsilon), fmt_f(c1), fmt_f(plain), fmt_f(block), fmt_f(3.0 * (c1 - 3.0 * block))]);
            emit(&out, &c.render())?;
        }
        Cmd::PhiEps { epsilon, f_support, dim, t_end, steps, out } => {
            let f = MollifierProfile::new(f_support)?;
            let times: Vec<f64> = (0..=steps).map(|i| t_end * i as f64 / steps as f64).collect();
            let phi = compute_phi_eps(&times, &SumSpec::full(dim, epsilon, f))?;
            let mut c = Csv::new(&["t", "phi"]);
            for (t, v) in phi.times().iter().zip(phi.values()) {
                c.push(vec![fmt_f(*t), fmt_f(*v)]);
            }
            emit(&out, &c.render())?;
        }
        Cmd::BuildRough { config, seed, epsilon, out } => {
            let cfg = load(&config, seed)?;
            let eps = level(&cfg, epsilon)?;
            let x = sample(&cfg, eps)?;
            let (a, b, phi) = counter_terms(&cfg, eps)?;
            let part = build_partition(cfg.spec()?);
            let xx = build_rough_distribution_with(&x, a, b, &phi, &part, cfg.rough_exponents()?, cfg.quadrature()?)?;
            let mut m = ManifestBuilder::new("build-rough", &cfg.canonical(), &cfg.noise.seeds);
            for (i, c) in xx.fields.iter().enumerate() {
                write_traj(&mut m, &out, &format!("c{}", i + 1), c, &cfg, eps)?;
            }
            let mut c = Csv::new(&["t", "phi"]);
            for (t, v) in phi.times().iter().zip(phi.values()) {
                c.push(vec![fmt_f(*t), fmt_f(*v)]);
            }
            m.write(&out, "phi.csv", c.render().as_bytes())?;
            m.finish().write(&out)?;
        }
        Cmd::Solve { mode, config, seed, epsilon, dump_every, out } => {
            let cfg = load(&config, seed)?;
            let eps = level(&cfg, epsilon)?;
            let x = sample(&cfg, eps)?;
            let (a, b, phi) = counter_terms(&cfg, eps)?;
            let scfg = cfg.solve_config()?;
            let (u, status) = match mode {
                Mode::Direct => {
                    let s = solve_direct(&x.snapshot(0).clone(), Forcing::Linear(&x), a, b, &scfg)?;
                    (s.u, s.status.to_string())
                }
                Mode::Paracontrolled => {
                    let part = build_partition(cfg.spec()?);
                    let xx = build_rough_distribution_with(&x, a, b, &phi, &part, cfg.rough_exponents()?, cfg.quadrature()?)?;
                    let u0 = x.snapshot(0).scale(0.0);
                    match picard_solve(&u0, &xx, &scfg, &part) {
                        Ok(s) => (s.solution(&xx)?, format!("{} T={}", s.status, s.t_accepted)),
                        Err(Error::NoLocalSolution { t_min, ratios }) => {
                            println!("status no_local_solution t_min={t_min} ratios={ratios:?}");
                            return Err(Failure::Assertion("no local solution".into()));
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            };
            let mut m = ManifestBuilder::new("solve", &cfg.canonical(), &cfg.noise.seeds);
            write_traj(&mut m, &out, "u", &thin(&u, dump_every)?, &cfg, eps)?;
            m.finish().write(&out)?;
            println!("status {status}");
        }
        Cmd::Verify { config, seed, corrupt, out } => {
            let mut cfg = load(&config, seed)?;
            if config.is_none() {
                cfg.lattice.dim = 1;
                cfg.lattice.n = 16;
            }
            let rep = run_verify(&cfg, corrupt)?;
            emit(&out, &rep.csv())?;
            if !rep.pass() {
                return Err(Failure::Assertion(format!("failed checks: {}", rep.failures().join(", "))));
            }
        }
        Cmd::Converge { config, seed, no_rough, no_solution, out } => {
            let cfg = load(&config, seed)?;
            let mut m = ManifestBuilder::new("converge", &cfg.canonical(), &cfg.noise.seeds);
            let rep = run_convergence(&cfg, !no_rough, !no_solution)?;
            if !no_rough {
                m.write(&out, "rough.csv", rep.rough_csv().as_bytes())?;
            }
            if !no_solution {
                m.write(&out, "solution.csv", rep.solution_csv().as_bytes())?;
            }
            m.finish().write(&out)?;
            if !rep.pass() {
                return Err(Failure::Assertion("Cauchy tables are not monotone".into()));
            }
        }
        Cmd::Diverge { config, out } => {
            let cfg = load(&config, None)?;
            let rep = run_divergence_demo(&cfg)?;
            emit(&out, &rep.csv())?;
            if !rep.pass() {
                return Err(Failure::Assertion(format!(
                    "spreads: eps*C1 {:.4}, dC2 {:.4}",
                    rep.c1_spread, rep.c2_spread
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // a second initialization only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
