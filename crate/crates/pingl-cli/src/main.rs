use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use pingl::error::{Error, Result};
use pingl::experiment::{self, ExperimentConfig, RunRecord};
use pingl::pinning::Shape;
use pingl::renorm::{self, FourierTrace};
use serde_json::json;

/// Pinned Ginzburg-Landau laboratory.
#[derive(Parser)]
#[command(name = "pingl", version, about)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Root directory for run artifacts (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Base grid resolution n (overrides the config).
    #[arg(long)]
    resolution_override: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve U_ε and minimise F_ε on every rung; write record and fields.
    Solve(RunArgs),
    /// Solve an ε ladder and fit the energy against |ln ε|, |ln δ|, 1.
    Sweep(RunArgs),
    /// Predict degrees, chosen inclusions and interior offsets.
    Predict(RunArgs),
    /// Compare interior vortex offsets across records of one pinning landscape.
    Verify {
        /// Two or more record.json files.
        #[arg(required = true, num_args = 2..)]
        records: Vec<PathBuf>,
    },
    /// Direct access to the renormalised-energy operations.
    #[command(subcommand)]
    Renorm(RenormOp),
}

#[derive(Subcommand)]
enum RenormOp {
    /// Σ|n||a_n|² of coefficients given as n:re[:im], comma separated.
    Hhalf {
        #[arg(long)]
        coeffs: String,
    },
    /// Dirichlet energy /2π of the harmonic function on an annulus of ratio R.
    Annulus {
        #[arg(long, default_value = "")]
        inner: String,
        #[arg(long, default_value = "")]
        outer: String,
        #[arg(long)]
        ratio: f64,
    },
    /// All optimal degree vectors for M inclusions and total degree d.
    Optimizer {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: i64,
        #[arg(long, allow_negative_numbers = true)]
        ln_delta: f64,
        #[arg(long, allow_negative_numbers = true)]
        ln_xi: f64,
        #[arg(long)]
        b: f64,
    },
    /// W_g for every admissible configuration of a config's inclusions.
    Wg {
        #[arg(long)]
        config: PathBuf,
    },
    /// Inclusion-scale W̃ for vortices at rescaled points "x,y;x,y".
    TildeW {
        #[arg(long)]
        betas: String,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 8)]
        modes: u32,
        #[arg(long, default_value_t = 128)]
        n: usize,
    },
    /// Core constant γ of the classical unit vortex.
    Gamma {
        #[arg(long, default_value_t = 0.05)]
        xi_over_b: f64,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 5.0)]
        cells_per_core: f64,
    },
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.resolution_override {
        cfg.domain.n = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_coeffs(s: &str) -> Result<FourierTrace> {
    let mut coeffs = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let bad = || Error::Input(format!("coefficient `{item}` is not n:re[:im]"));
        if !(2..=3).contains(&parts.len()) {
            return Err(bad());
        }
        let n: i64 = parts[0].parse().map_err(|_| bad())?;
        let re: f64 = parts[1].parse().map_err(|_| bad())?;
        let im: f64 = parts.get(2).map(|p| p.parse()).transpose().map_err(|_| bad())?.unwrap_or(0.0);
        coeffs.push((n, Complex64::new(re, im)));
    }
    Ok(FourierTrace::new(coeffs, 1.0))
}

fn parse_points(s: &str) -> Result<Vec<[f64; 2]>> {
    s.split(';')
        .map(|p| {
            let xy: Vec<f64> = p.split(',').map(|c| c.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Input(format!("point `{p}` is not x,y")))?;
            match xy[..] {
                [x, y] => Ok([x, y]),
                _ => Err(Error::Input(format!("point `{p}` is not x,y"))),
            }
        })
        .collect()
}

fn print(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("json"));
}

fn summary(rec: &RunRecord, dir: &Path) -> serde_json::Value {
    json!({
        "record_hash": rec.hash(),
        "config_hash": rec.config_hash,
        "dir": dir,
        "rungs": rec.rungs.iter().map(|r| json!({
            "epsilon": r.epsilon.value,
            "delta": r.delta.value,
            "energy_f": r.energy_f.value,
            "zeros_per_inclusion": r.zeros_per_inclusion,
            "total_winding": r.vortices.total_winding,
            "contained": r.contained,
        })).collect::<Vec<_>>(),
        "fit": rec.fit,
        "warnings": rec.warnings,
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        pingl::par::set_threads(t);
    }
    match cli.command {
        Command::Solve(a) => {
            let (rec, dir) = experiment::cmd_solve(&load(&a)?)?;
            print(summary(&rec, &dir));
        }
        Command::Sweep(a) => {
            let (rec, dir) = experiment::cmd_sweep(&load(&a)?)?;
            print(summary(&rec, &dir));
        }
        Command::Predict(a) => {
            let (rec, dir) = experiment::cmd_predict(&load(&a)?)?;
            print(json!({ "dir": dir, "prediction": rec }));
        }
        Command::Verify { records } => {
            let recs = records
                .iter()
                .map(|p| RunRecord::load(p).map_err(|e| Error::Input(format!("{}: {e}", p.display()))))
                .collect::<Result<Vec<_>>>()?;
            print(serde_json::to_value(experiment::cmd_verify(&recs)?)?);
        }
        Command::Renorm(op) => match op {
            RenormOp::Hhalf { coeffs } => print(json!({ "hhalf": renorm::hhalf_seminorm(&parse_coeffs(&coeffs)?) })),
            RenormOp::Annulus { inner, outer, ratio } => {
                let e = renorm::annulus_energy(&parse_coeffs(&inner)?, &parse_coeffs(&outer)?, ratio)?;
                print(json!({ "annulus_energy": e }));
            }
            RenormOp::Optimizer { m, d, ln_delta, ln_xi, b } => {
                print(json!({ "optima": renorm::discrete_optimizer(m, d, ln_delta, ln_xi, b)? }))
            }
            RenormOp::Wg { config } => {
                let cfg = ExperimentConfig::load(&config)?;
                let grid = std::sync::Arc::new(pingl::grid::Grid::new(&pingl::grid::DomainSpec {
                    n: cfg.predict.wg_n,
                    ..cfg.domain.clone()
                })?);
                let sel = renorm::select_inclusions(
                    &grid,
                    &cfg.boundary,
                    &cfg.pinning.centers,
                    cfg.boundary.degree as i64,
                    &renorm::WG_LADDER,
                    cfg.predict.tie_tol,
                )?;
                print(serde_json::to_value(sel)?);
            }
            RenormOp::TildeW { betas, b, modes, n } => {
                let w = renorm::extract_tilde_w(&parse_points(&betas)?, b, &Shape::default(), modes, n)?;
                print(serde_json::to_value(w)?);
            }
            RenormOp::Gamma { xi_over_b, r, cells_per_core } => {
                print(serde_json::to_value(renorm::compute_gamma(xi_over_b, r, cells_per_core)?)?)
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for bad input (config, documents, arguments), 3 for numerical failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Input(_) | Error::Io(_) => 2,
        Error::Solver(_) | Error::Invariant(_) | Error::Shape(_) | Error::Csv(_) => 3,
    }
}
