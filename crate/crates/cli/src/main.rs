mod experiments;
mod ops;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use experiments::ExperimentCmd;
use ops::{LeibnizArgs, NormKind, NormRequest, OpArgs, PdeArgs, QuadArgs};
use sobolev_core::functionals::{Nonlinearity, SFuncRequest};
use sobolev_core::geometry::PoincareRequest;
use sobolev_core::harness::{ExperimentConfig, ReportFormat};
use sobolev_core::norms::LogFlavor;
use sobolev_core::paraproducts::{Flavor, HolderExponents};
use sobolev_core::pde::EvolutionKind;

#[derive(Debug, Parser)]
#[command(name = "sobolev-lab", version, about = "Sobolev-space experiments on weighted graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a manifold from a descriptor such as `cycle(32)`.
    GenGraph {
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Doubling, volume and Poincaré report of a manifold.
    GeomReport {
        #[arg(long)]
        manifold: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long)]
        local: bool,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 16)]
        random_fields: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigen-decomposition summary (optionally cached).
    Spectrum {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply `b(L)` to a field: heat:t, schrodinger:t, power:s, bessel:s,
    /// psi:t[:N], phi:t[:N], zeta:t[:N].
    Apply {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        symbol: String,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lebesgue, Sobolev, Bessel or BMO norm of a field.
    Norm {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long, value_enum)]
        kind: NormKind,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Seminorm `‖L^{α/m}f‖_p` instead of `‖f‖_p + ‖L^{α/m}f‖_p`.
        #[arg(long)]
        homogeneous: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sobolev embedding ratios on one manifold.
    EmbedReport {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 4.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Logarithmic L∞ embedding ratios on one manifold.
    LogEmbedReport {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Use the semigroup BMO with this exponent.
        #[arg(long)]
        bmol: Option<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One paraproduct of two fields.
    Paraproduct {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        flavor: Flavor,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paraproduct decomposition of `fg` and its residual.
    Decompose {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fractional Leibniz ratios on one manifold.
    LeibnizReport {
        #[command(flatten)]
        op: OpArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Algebra exponent; `--r/--p1/--q1/--p2/--q2` override it.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        q1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long)]
        q2: Option<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        breakdown: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Square functional of a field.
    Sfunc {
        #[arg(long)]
        manifold: PathBuf,
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long)]
        local: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pointwise domination `S(F∘f) <= Lip(F) S(f)` on one manifold.
    NonlinReport {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long = "F", default_value = "tanh")]
        nonlinearity: Nonlinearity,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a semilinear evolution by Picard iteration of the Duhamel map.
    PdeRun {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        kind: EvolutionKind,
        #[arg(long = "F")]
        nonlinearity: Nonlinearity,
        #[arg(long)]
        u0: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        interval: f64,
        #[arg(long, default_value_t = 32)]
        tau_nodes: usize,
        #[arg(long, default_value_t = 60)]
        picard_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
        conservation_times: Vec<f64>,
        /// Directory for trace.json, conservation.json and fixed_point.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the experiment named in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "json,csv")]
        format: Vec<ReportFormat>,
    },
    #[command(flatten)]
    Experiment(ExperimentCmd),
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph { spec, seed, out } => ops::gen_graph(&spec, seed, &out),
        Command::GeomReport { manifold, d, local, q, random_fields, seed, out } => {
            let req = PoincareRequest { q, local, random_fields, seed };
            ops::geom_report(&manifold, d, req, out.as_deref())
        }
        Command::Spectrum { op, out } => ops::spectrum(&op, out.as_deref()),
        Command::Apply { op, symbol, field, out } => ops::apply(&op, &symbol, &field, &out),
        Command::Norm { op, kind, field, p, alpha, homogeneous, out } => {
            let req = NormRequest { kind, p, alpha, homogeneous };
            ops::norm(&op, &field, &req, out.as_deref())
        }
        Command::EmbedReport { op, s, p, q, d, trials, seed, out } => {
            ops::embed_report(&op, s, p, q, d, trials, seed, out.as_deref())
        }
        Command::LogEmbedReport { op, s, p, d, bmol, trials, seed, out } => {
            let flavor = match bmol {
                Some(p) => LogFlavor::BmoL { p },
                None => LogFlavor::Bmo,
            };
            ops::log_embed_report(&op, s, p, d, flavor, trials, seed, out.as_deref())
        }
        Command::Paraproduct { op, quad, flavor, f, g, out } => {
            ops::paraproduct_cmd(&op, &quad, flavor, &f, &g, &out)
        }
        Command::Decompose { op, quad, f, g, out } => ops::decompose(&op, &quad, &f, &g, out.as_deref()),
        Command::LeibnizReport {
            op, quad, alpha, p, r, p1, q1, p2, q2, trials, seed, breakdown, out,
        } => {
            let base = HolderExponents::algebra(p);
            let exponents = HolderExponents {
                r: r.unwrap_or(base.r),
                p1: p1.unwrap_or(base.p1),
                q1: q1.unwrap_or(base.q1),
                p2: p2.unwrap_or(base.p2),
                q2: q2.unwrap_or(base.q2),
            };
            let l = LeibnizArgs { alpha, exponents, trials, seed, breakdown };
            ops::leibniz_cmd(&op, &quad, &l, out.as_deref())
        }
        Command::Sfunc { manifold, field, alpha, rho, local, out } => {
            ops::sfunc(&manifold, &field, SFuncRequest::new(alpha, rho, local)?, &out)
        }
        Command::NonlinReport { op, nonlinearity, alpha, p, rho, trials, seed, out } => {
            ops::nonlin_report_cmd(&op, nonlinearity, alpha, p, rho, trials, seed, out.as_deref())
        }
        Command::PdeRun {
            op, kind, nonlinearity, u0, alpha, interval, tau_nodes, picard_max, conservation_times, out_dir,
        } => {
            let args = PdeArgs { kind, nonlinearity, alpha, interval, tau_nodes, picard_max, conservation_times };
            ops::pde_run(&op, &u0, &args, &out_dir)
        }
        Command::Run { config, format } => {
            let c = ExperimentConfig::from_file(&config)?;
            experiments::run(&c, &format)
        }
        Command::Experiment(cmd) => {
            let c = cmd.config()?;
            experiments::run(&c, cmd.formats())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
