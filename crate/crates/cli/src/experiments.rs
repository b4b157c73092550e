use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};

use sobolev_core::harness::{
    configure_threads, emit_report, output_base, run_experiment_timed, Experiment, ExperimentConfig,
    FormKind, LadderFamily, LogFlavorKind, ReportFormat,
};
use sobolev_core::pde::EvolutionKind;

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<LadderFamily>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_form)]
    pub form: Option<FormKind>,
    /// Output base path; `.json`/`.csv` are appended.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "json,csv")]
    pub format: Vec<ReportFormat>,
}

fn parse_family(s: &str) -> Result<LadderFamily, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

fn parse_form(s: &str) -> Result<FormKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    /// Bessel vs non-homogeneous Sobolev norm equivalence.
    Equivalence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ps: Option<Vec<f64>>,
    },
    /// Sobolev embedding ratios.
    Embed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
    },
    /// Logarithmic embedding into L∞ via BMO.
    LogEmbed {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        bmol: bool,
    },
    /// Fractional Leibniz rule constants.
    Leibniz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        breakdown: bool,
    },
    /// Square-functional characterization of the Sobolev seminorm.
    Characterize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Pointwise domination for a nonlinearity.
    Nonlin {
        #[command(flatten)]
        common: Common,
        #[arg(long = "F")]
        nonlinearity: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Duhamel contraction and linear conservation.
    Pde {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kind: Option<EvolutionKind>,
        #[arg(long = "F")]
        nonlinearity: Option<String>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        intervals: Option<Vec<f64>>,
    },
    /// Doubling, volume and Poincaré constants.
    Geom {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        local: bool,
    },
    /// Off-diagonal decay rate of the heat semigroup.
    Offdiag {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s_minus: Option<f64>,
    },
}

impl ExperimentCmd {
    fn parts(&self) -> (Experiment, &Common) {
        match self {
            Self::Equivalence { common, .. } => (Experiment::Equivalence, common),
            Self::Embed { common, .. } => (Experiment::Embed, common),
            Self::LogEmbed { common, .. } => (Experiment::LogEmbed, common),
            Self::Leibniz { common, .. } => (Experiment::Leibniz, common),
            Self::Characterize { common, .. } => (Experiment::Characterize, common),
            Self::Nonlin { common, .. } => (Experiment::Nonlin, common),
            Self::Pde { common, .. } => (Experiment::Pde, common),
            Self::Geom { common, .. } => (Experiment::Geom, common),
            Self::Offdiag { common, .. } => (Experiment::Offdiag, common),
        }
    }

    pub fn config(&self) -> Result<ExperimentConfig> {
        let (experiment, common) = self.parts();
        let mut c = match &common.config {
            Some(path) => {
                let mut c: ExperimentConfig = toml_config(path)?;
                c.run.experiment = experiment.name().into();
                c
            }
            None => ExperimentConfig::new(experiment, vec![16, 32, 64, 128]),
        };
        set(&mut c.ladder.sizes, common.sizes.clone());
        set(&mut c.ladder.family, common.family);
        set(&mut c.run.trials, common.trials);
        set(&mut c.run.seed, common.seed);
        set(&mut c.run.form, common.form);
        if common.output.is_some() {
            c.run.output = common.output.clone();
        }
        match self {
            Self::Equivalence { alphas, ps, .. } => {
                set(&mut c.equivalence.alphas, alphas.clone());
                set(&mut c.equivalence.ps, ps.clone());
            }
            Self::Embed { s, p, q, d, .. } => {
                set(&mut c.embed.s, *s);
                set(&mut c.embed.p, *p);
                set(&mut c.embed.q, *q);
                set(&mut c.embed.d, *d);
            }
            Self::LogEmbed { s, p, d, bmol, .. } => {
                set(&mut c.log_embed.s, *s);
                set(&mut c.log_embed.p, *p);
                set(&mut c.log_embed.d, *d);
                if *bmol {
                    c.log_embed.flavor = LogFlavorKind::BmoL;
                }
            }
            Self::Leibniz { alpha, p, breakdown, .. } => {
                set(&mut c.leibniz.alpha, *alpha);
                set(&mut c.leibniz.p, *p);
                c.leibniz.breakdown |= *breakdown;
            }
            Self::Characterize { alpha, p, rho, .. } => {
                set(&mut c.characterize.alpha, *alpha);
                set(&mut c.characterize.p, *p);
                set(&mut c.characterize.rho, *rho);
            }
            Self::Nonlin { nonlinearity, alpha, p, .. } => {
                set(&mut c.nonlin.nonlinearity, nonlinearity.clone());
                set(&mut c.nonlin.alpha, *alpha);
                set(&mut c.nonlin.p, *p);
            }
            Self::Pde { kind, nonlinearity, amplitude, intervals, .. } => {
                set(&mut c.pde.kind, *kind);
                set(&mut c.pde.nonlinearity, nonlinearity.clone());
                set(&mut c.pde.amplitude, *amplitude);
                set(&mut c.pde.intervals, intervals.clone());
            }
            Self::Geom { d, local, .. } => {
                set(&mut c.geom.d, *d);
                c.geom.local |= *local;
            }
            Self::Offdiag { s_minus, .. } => set(&mut c.offdiag.s_minus, *s_minus),
        }
        c.validate()?;
        Ok(c)
    }

    pub fn formats(&self) -> &[ReportFormat] {
        &self.parts().1.format
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn toml_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::parse_toml(&std::fs::read_to_string(path)?)?)
}

pub fn run(config: &ExperimentConfig, formats: &[ReportFormat]) -> Result<()> {
    configure_threads()?;
    let (report, timing) = run_experiment_timed::<f64>(config)?;
    let base = output_base(config);
    let written = emit_report(&report, Some(&timing), &base, formats)?;
    println!("experiment {} ({} trial records)", report.experiment, report.per_trial.len());
    println!("{:>8} {:>8} {:>24} {:>24} {:>24}", "n", "trials", "max_ratio", "min_ratio", "median_ratio");
    let cell = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_else(|| "-".into());
    for row in &report.ladder {
        println!(
            "{:>8} {:>8} {:>24} {:>24} {:>24}",
            row.n,
            row.trials,
            cell(row.max_ratio),
            cell(row.min_ratio),
            cell(row.median_ratio)
        );
    }
    for flag in &report.flags {
        eprintln!("flag: {flag}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
