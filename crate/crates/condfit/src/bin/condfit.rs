//! Thin command-line front end: parses arguments, reads CSV input, calls
//! the library, writes JSON (and CSV for experiments). All logic lives in
//! `condfit::runner`.

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

use condfit::edfstat::StatKind;
use condfit::error::{Error, Result};
use condfit::expfam::{FamilyKind, NaturalParam};
use condfit::runner::{self, RunConfig};

#[derive(Parser)]
#[command(
    name = "condfit",
    version,
    about = "Goodness-of-fit tests for exponential families: bootstrap and exact conditional P-values"
)]
struct Cli {
    /// Worker threads for replicate-level parallelism (0 = all cores).
    /// Affects wall time only, never results.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Output path for the JSON report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full test on a CSV sample: fit, statistic, both P-values.
    Gof {
        #[arg(long)]
        family: FamilyArg,
        #[arg(long, default_value = "cvm")]
        stat: StatArg,
        /// Input CSV, one observation per line (optional header).
        #[arg(long)]
        input: PathBuf,
        /// Bootstrap replicates B.
        #[arg(long = "bootstrap", default_value_t = 2000)]
        bootstrap_replicates: usize,
        /// Conditional replicates M.
        #[arg(long = "conditional", default_value_t = 999)]
        conditional_replicates: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "burn-in", default_value_t = 200)]
        burn_in: usize,
        #[arg(long, default_value_t = 5)]
        thin: usize,
        #[arg(long, default_value_t = 4)]
        shards: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Simulate null von Mises datasets and correlate the two P-values.
    ReproduceCorrelation {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        datasets: usize,
        #[arg(long = "bootstrap", default_value_t = 500)]
        bootstrap_replicates: usize,
        #[arg(long = "conditional", default_value_t = 500)]
        conditional_replicates: usize,
        #[arg(long)]
        seed: u64,
        /// Concentration of the simulated null (mean direction 0).
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Distance between the conditional law at t = n mu and the bootstrap
    /// null, across sample sizes.
    Theorem1Check {
        #[arg(long)]
        family: FamilyArg,
        /// Natural parameter components, comma separated.
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        /// Sample sizes, comma separated.
        #[arg(long = "n-list", value_delimiter = ',')]
        n_list: Vec<usize>,
        #[arg(long = "bootstrap", default_value_t = 4000)]
        bootstrap_replicates: usize,
        #[arg(long = "conditional", default_value_t = 4000)]
        conditional_replicates: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Rao-Blackwell estimate of the Gamma shape parameter for a sample.
    RbEstimate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Eigenvalues and quantiles of the limiting null law.
    LimitDist {
        /// Family of the estimated-parameter law; omit for the simple null.
        #[arg(long)]
        family: Option<FamilyArg>,
        #[arg(long, value_delimiter = ',')]
        theta: Vec<f64>,
        #[arg(long, default_value = "cvm")]
        stat: StatArg,
        /// Nystrom grid size.
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Number of retained eigenvalues.
        #[arg(long, default_value_t = 100)]
        eigenvalues: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Edgeworth density and conditional-expansion diagnostics.
    EdgeworthCheck {
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FamilyArg {
    Exponential,
    Gamma,
    Vonmises,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> FamilyKind {
        match f {
            FamilyArg::Exponential => FamilyKind::Exponential,
            FamilyArg::Gamma => FamilyKind::Gamma,
            FamilyArg::Vonmises => FamilyKind::VonMises,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum StatArg {
    Cvm,
    Watson,
    Ad,
    Ks,
}

impl From<StatArg> for StatKind {
    fn from(s: StatArg) -> StatKind {
        match s {
            StatArg::Cvm => StatKind::Cvm,
            StatArg::Watson => StatKind::Watson,
            StatArg::Ad => StatKind::Ad,
            StatArg::Ks => StatKind::Ks,
        }
    }
}

fn parse_theta(family: FamilyKind, components: &[f64]) -> Result<NaturalParam> {
    if components.len() != family.dim() {
        return Err(Error::Parse(format!(
            "--theta needs {} component(s) for {family}",
            family.dim()
        )));
    }
    let mut c = [0.0; 2];
    c[..components.len()].copy_from_slice(components);
    NaturalParam::from_components(family, c)
}

/// Write the report only after the computation fully succeeded, so failed
/// runs leave no partial output behind.
fn emit<T: serde::Serialize>(out: &OutArg, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("reports always serialize");
    match &out.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(json.as_bytes())?;
            f.write_all(b"\n")?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn pairs_csv_path(path: &std::path::Path) -> PathBuf {
    let mut name = path
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".pairs.csv");
    path.with_file_name(name)
}

fn run(cli: Cli) -> Result<i32> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| Error::Parse(format!("cannot configure {} workers: {e}", cli.workers)))?;
    }
    match cli.command {
        Command::Gof {
            family,
            stat,
            input,
            bootstrap_replicates,
            conditional_replicates,
            seed,
            burn_in,
            thin,
            shards,
            out,
        } => {
            let family: FamilyKind = family.into();
            let sample = runner::read_sample_file(&input, family)?;
            let config = RunConfig {
                family,
                stat: stat.into(),
                bootstrap_replicates,
                conditional_replicates,
                burn_in_sweeps: burn_in,
                thin_sweeps: thin,
                shards,
                seed,
            };
            let report = runner::cmd_gof(&sample, &config)?;
            let healthy = report.diagnostics_healthy();
            emit(&out, &report)?;
            if !healthy {
                log::warn!("chain diagnostics outside healthy ranges; see report");
                return Ok(5);
            }
            Ok(0)
        }
        Command::ReproduceCorrelation {
            n,
            datasets,
            bootstrap_replicates,
            conditional_replicates,
            seed,
            kappa,
            out,
        } => {
            let theta = NaturalParam::VonMises {
                theta1: kappa,
                theta2: 0.0,
            };
            let summary = runner::cmd_reproduce_correlation(
                n,
                datasets,
                bootstrap_replicates,
                conditional_replicates,
                seed,
                Some(theta),
            )?;
            if let Some(path) = &out.out {
                let mut csv = String::from("p_bootstrap,p_conditional\n");
                for (pb, pc) in &summary.pairs {
                    csv.push_str(&format!("{pb},{pc}\n"));
                }
                std::fs::write(pairs_csv_path(path), csv)?;
            }
            emit(&out, &summary)?;
            Ok(0)
        }
        Command::Theorem1Check {
            family,
            theta,
            n_list,
            bootstrap_replicates,
            conditional_replicates,
            seed,
            out,
        } => {
            let family: FamilyKind = family.into();
            let theta = parse_theta(family, &theta)?;
            let table = runner::cmd_theorem1_check(
                family,
                &theta,
                &n_list,
                bootstrap_replicates,
                conditional_replicates,
                seed,
            )?;
            emit(&out, &table)?;
            Ok(0)
        }
        Command::RbEstimate { input, out } => {
            let sample = runner::read_sample_file(&input, FamilyKind::Gamma)?;
            let report = runner::cmd_rb_estimate(&sample)?;
            emit(&out, &report)?;
            Ok(0)
        }
        Command::LimitDist {
            family,
            theta,
            stat,
            grid,
            eigenvalues,
            out,
        } => {
            let parsed = match family {
                Some(f) => {
                    let fam: FamilyKind = f.into();
                    Some(parse_theta(fam, &theta)?)
                }
                None => None,
            };
            let report = runner::cmd_limit_dist(parsed.as_ref(), stat.into(), grid, eigenvalues)?;
            emit(&out, &report)?;
            Ok(0)
        }
        Command::EdgeworthCheck { out } => {
            let report = runner::cmd_edgeworth_check()?;
            emit(&out, &report)?;
            Ok(0)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("CONDFIT_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
