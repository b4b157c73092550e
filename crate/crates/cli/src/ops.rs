use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use num_complex::Complex;
use serde_json::json;

use sobolev_core::functionals::{nonlinearity_report, strichartz_functional, Nonlinearity, SFuncRequest};
use sobolev_core::geometry::{build_manifold, geometry_report, GraphSpec, PoincareRequest};
use sobolev_core::io::{
    load_operator, read_coefficients, read_field, read_manifold, save_operator, sha256_file,
    write_complex_field, write_field, write_json, write_manifold,
};
use sobolev_core::norms::{
    bessel_norm, bmo_norm, embedding_report, lebesgue_norm, log_embedding_report, sobolev_norm,
    BmoFlavor, LogFlavor,
};
use sobolev_core::paraproducts::{
    leibniz_report, paraproduct, product_decomposition, Flavor, HolderExponents, LeibnizRequest,
    TQuadrature,
};
use sobolev_core::pde::{conservation_check, duhamel_evolve, EvolutionKind, EvolutionProblem};
use sobolev_core::spectral::{EdgeCoefficients, OperatorForm};
use sobolev_core::{ComplexField, Field, Manifold, Operator, Quadrature, Symbols};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Combinatorial,
    Normalized,
    Divergence,
}

#[derive(Debug, Args)]
pub struct OpArgs {
    /// Manifold JSON file.
    #[arg(long)]
    pub manifold: PathBuf,
    #[arg(long, value_enum, default_value = "combinatorial")]
    pub form: FormArg,
    /// Edge coefficients `u,v,a` (divergence form); without it the
    /// manifold's own `a` values are used.
    #[arg(long)]
    pub coeff: Option<PathBuf>,
    /// Order m of the generator.
    #[arg(long, default_value_t = 2.0)]
    pub order: f64,
    /// Eigenpair cache, reused when the manifold hash and form match.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

pub struct Loaded {
    pub manifold: Manifold,
    pub op: Operator,
}

impl OpArgs {
    pub fn load(&self) -> Result<Loaded> {
        let (manifold, sha) = read_manifold::<f64>(&self.manifold)
            .with_context(|| format!("reading {}", self.manifold.display()))?;
        let form_key;
        let form = match (self.form, &self.coeff) {
            (FormArg::Combinatorial, None) => {
                form_key = "combinatorial".to_string();
                OperatorForm::Combinatorial
            }
            (FormArg::Normalized, None) => {
                form_key = "normalized".to_string();
                OperatorForm::Normalized
            }
            (FormArg::Divergence, Some(path)) | (FormArg::Combinatorial, Some(path)) => {
                form_key = format!("divergence:{}", sha256_file(path)?);
                OperatorForm::Divergence(read_coefficients(path, &manifold)?)
            }
            (FormArg::Divergence, None) => {
                form_key = "divergence:manifold".to_string();
                OperatorForm::Divergence(
                    EdgeCoefficients::from_manifold(&manifold)
                        .context("divergence form needs --coeff or per-edge `a` values")?,
                )
            }
            (FormArg::Normalized, Some(_)) => bail!("--coeff requires the divergence form"),
        };
        let cached = self
            .cache
            .as_deref()
            .and_then(|p| load_operator::<f64>(p, &sha, &form_key));
        let op = match cached {
            Some(op) => op,
            None => {
                let op = Operator::assemble(&manifold, &form)?;
                if let Some(p) = &self.cache {
                    save_operator(p, &op, &sha, &form_key)?;
                }
                op
            }
        };
        Ok(Loaded {
            manifold,
            op: op.with_order(self.order),
        })
    }
}

#[derive(Debug, Args)]
pub struct QuadArgs {
    /// Symbol order N.
    #[arg(long = "N", default_value_t = 5)]
    pub n: u32,
    #[arg(long, default_value_t = 1e-6)]
    pub tmin: f64,
    #[arg(long, default_value_t = 1e6)]
    pub tmax: f64,
    #[arg(long, default_value_t = 400)]
    pub nodes: usize,
}

impl QuadArgs {
    fn build(&self) -> Result<(Symbols, Quadrature)> {
        Ok((
            Symbols::new(self.n)?,
            TQuadrature::log_midpoint(self.tmin, self.tmax, self.nodes)?,
        ))
    }
}

/// Prints to stdout or writes to `out`.
pub fn emit<S: serde::Serialize>(value: &S, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(path, value)?,
        None => print!("{}", sobolev_core::io::to_json_string(value)?),
    }
    Ok(())
}

fn real_field(path: &Path, n: usize) -> Result<Field> {
    let data = read_field::<f64>(path, Some(n))
        .with_context(|| format!("reading {}", path.display()))?;
    if data.im.as_ref().is_some_and(|im| im.iter().any(|&v| v != 0.0)) {
        bail!("{} has a non-zero imaginary part", path.display());
    }
    Ok(data.re)
}

pub fn gen_graph(spec: &str, seed: u64, out: &Path) -> Result<()> {
    let spec = GraphSpec::parse(spec, seed)?;
    let m = build_manifold::<f64>(&spec)?;
    write_manifold(out, &m)?;
    eprintln!("{}: {} vertices, {} edges", out.display(), m.vertex_count(), m.edges().len());
    Ok(())
}

pub fn geom_report(manifold: &Path, d: f64, req: PoincareRequest, out: Option<&Path>) -> Result<()> {
    let (m, _) = read_manifold::<f64>(manifold)?;
    emit(&geometry_report(&m, d, &req), out)
}

pub fn spectrum(args: &OpArgs, out: Option<&Path>) -> Result<()> {
    let Loaded { op, .. } = args.load()?;
    emit(
        &json!({
            "n": op.dim(),
            "order": op.order(),
            "kernel_dim": op.kernel_dim(),
            "lambda_min_positive": op.lambda_min_positive(),
            "lambda_max": op.lambda_max(),
            "eigenvalues": op.eigenvalues().as_slice(),
        }),
        out,
    )
}

type RealSymbol = Box<dyn Fn(&Operator, &Field) -> sobolev_core::Result<Field>>;

enum SymbolSpec {
    Real(RealSymbol),
    Schrodinger(f64),
}

fn parse_symbol(spec: &str) -> Result<SymbolSpec> {
    let mut parts = spec.split(':').map(str::trim);
    let name = parts.next().unwrap_or_default().to_ascii_lowercase();
    let args: Vec<f64> = parts
        .map(|s| s.parse::<f64>().with_context(|| format!("bad symbol parameter `{s}`")))
        .collect::<Result<_>>()?;
    let arg = |i: usize| -> Result<f64> {
        args.get(i)
            .copied()
            .with_context(|| format!("symbol `{spec}` needs parameter {}", i + 1))
    };
    let order = |i: usize| -> Result<u32> {
        match args.get(i) {
            None => Ok(5),
            Some(&v) if v.fract() == 0.0 && v >= 0.0 => Ok(v as u32),
            Some(v) => bail!("symbol order {v} is not an integer"),
        }
    };
    Ok(match name.as_str() {
        "heat" => {
            let t = arg(0)?;
            SymbolSpec::Real(Box::new(move |op, f| Ok(op.heat(t, f))))
        }
        "schrodinger" => SymbolSpec::Schrodinger(arg(0)?),
        "power" | "bessel" => {
            let s = arg(0)?;
            let bessel = name == "bessel";
            SymbolSpec::Real(Box::new(move |op, f| op.fractional_power(s / op.order(), f, bessel)))
        }
        "psi" | "phi" | "zeta" => {
            let t = arg(0)?;
            let fam = Symbols::new(order(1)?)?;
            let which = name.clone();
            SymbolSpec::Real(Box::new(move |op, f| {
                op.apply_symbol(
                    |l| match which.as_str() {
                        "psi" => fam.psi(t * l),
                        "phi" => fam.phi(t * l),
                        _ => fam.zeta(t * l),
                    },
                    f,
                )
            }))
        }
        _ => bail!("unknown symbol `{spec}` (heat:t, schrodinger:t, power:s, bessel:s, psi:t[:N], phi:t[:N], zeta:t[:N])"),
    })
}

pub fn apply(args: &OpArgs, symbol: &str, field: &Path, out: &Path) -> Result<()> {
    let Loaded { op, .. } = args.load()?;
    let data = read_field::<f64>(field, Some(op.dim()))?;
    match parse_symbol(symbol)? {
        SymbolSpec::Schrodinger(t) => write_complex_field(out, &op.schrodinger(t, &data.complex()))?,
        SymbolSpec::Real(b) => {
            let re = b(&op, &data.re)?;
            let im = data.im.as_ref().map(|im| b(&op, im)).transpose()?;
            write_field(out, &re, im.as_ref())?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormKind {
    Lp,
    Sobolev,
    Bessel,
    Bmo,
    Bmol,
}

pub struct NormRequest {
    pub kind: NormKind,
    pub p: f64,
    pub alpha: f64,
    pub homogeneous: bool,
}

pub fn norm(args: &OpArgs, field: &Path, req: &NormRequest, out: Option<&Path>) -> Result<()> {
    let Loaded { manifold, op } = args.load()?;
    let f = real_field(field, op.dim())?;
    let value = match req.kind {
        NormKind::Lp => lebesgue_norm(&manifold, &f, req.p),
        NormKind::Sobolev => sobolev_norm(&op, &manifold, &f, req.alpha, req.p, req.homogeneous)?,
        NormKind::Bessel => bessel_norm(&op, &manifold, &f, req.alpha, req.p)?,
        NormKind::Bmo => bmo_norm(&manifold, &f, BmoFlavor::Classical)?,
        NormKind::Bmol => bmo_norm(&manifold, &f, BmoFlavor::Semigroup { op: &op, p: req.p })?,
    };
    emit(
        &json!({
            "kind": format!("{:?}", req.kind).to_ascii_lowercase(),
            "p": req.p,
            "alpha": req.alpha,
            "homogeneous": req.homogeneous,
            "value": value,
        }),
        out,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn embed_report(args: &OpArgs, s: f64, p: f64, q: f64, d: f64, trials: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let Loaded { manifold, op } = args.load()?;
    let rep = embedding_report(&op, &manifold, s, p, q, d, trials, seed)?;
    if rep.hypothesis_violated {
        eprintln!("hypothesis-violated: outside the embedding regime");
    }
    emit(&rep, out)
}

#[allow(clippy::too_many_arguments)]
pub fn log_embed_report(
    args: &OpArgs,
    s: f64,
    p: f64,
    d: f64,
    flavor: LogFlavor,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let Loaded { manifold, op } = args.load()?;
    let rep = log_embedding_report(&op, &manifold, s, p, d, trials, seed, flavor)?;
    if rep.hypothesis_violated {
        eprintln!("hypothesis-violated: s <= d/p");
    }
    emit(&rep, out)
}

pub fn paraproduct_cmd(args: &OpArgs, quad: &QuadArgs, flavor: Flavor, f: &Path, g: &Path, out: &Path) -> Result<()> {
    let Loaded { op, .. } = args.load()?;
    let (fam, q) = quad.build()?;
    let f = real_field(f, op.dim())?;
    let g = real_field(g, op.dim())?;
    let pp = paraproduct(&op, &fam, &q, &f, &g, flavor)?;
    if let Some(w) = &pp.warning {
        eprintln!("warning: {w}");
    }
    write_field(out, &pp.field, None)?;
    Ok(())
}

pub fn decompose(args: &OpArgs, quad: &QuadArgs, f: &Path, g: &Path, out: Option<&Path>) -> Result<()> {
    let Loaded { manifold, op } = args.load()?;
    let (fam, q) = quad.build()?;
    let f = real_field(f, op.dim())?;
    let g = real_field(g, op.dim())?;
    let d = product_decomposition(&op, &fam, &q, &f, &g)?;
    let l2 = |v: &Field| lebesgue_norm(&manifold, v, 2.0);
    emit(
        &json!({
            "normalization": d.normalization,
            "relative_residual": d.relative_residual,
            "norms": {
                "pi": l2(&d.pi),
                "pi_g": l2(&d.pi_g),
                "pi_f": l2(&d.pi_f),
                "kernel_correction": l2(&d.kernel_correction),
                "residual": l2(&d.residual),
            },
            "warning": d.warning,
        }),
        out,
    )
}

pub struct LeibnizArgs {
    pub alpha: f64,
    pub exponents: HolderExponents,
    pub trials: usize,
    pub seed: u64,
    pub breakdown: bool,
}

pub fn leibniz_cmd(args: &OpArgs, quad: &QuadArgs, l: &LeibnizArgs, out: Option<&Path>) -> Result<()> {
    let Loaded { manifold, op } = args.load()?;
    let (fam, q) = quad.build()?;
    let req = LeibnizRequest {
        alpha: l.alpha,
        exponents: l.exponents,
        trials: l.trials,
        seed: l.seed,
    };
    let rep = leibniz_report(&op, &manifold, &fam, l.breakdown.then_some(&q), &req)?;
    emit(&rep, out)
}

pub fn sfunc(manifold: &Path, field: &Path, req: SFuncRequest, out: &Path) -> Result<()> {
    let (m, _) = read_manifold::<f64>(manifold)?;
    let f = real_field(field, m.vertex_count())?;
    req.validate()?;
    write_field(out, &strichartz_functional(&m, &f, &req)?, None)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn nonlin_report_cmd(
    args: &OpArgs,
    f: Nonlinearity,
    alpha: f64,
    p: f64,
    rho: f64,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let Loaded { manifold, op } = args.load()?;
    let rep = nonlinearity_report(&op, &manifold, f, alpha, p, rho, trials, seed)?;
    if !rep.domination_holds {
        eprintln!("domination-violated: max violation {:e}", rep.max_violation);
    }
    emit(&rep, out)
}

pub struct PdeArgs {
    pub kind: EvolutionKind,
    pub nonlinearity: Nonlinearity,
    pub alpha: f64,
    pub interval: f64,
    pub tau_nodes: usize,
    pub picard_max: usize,
    pub conservation_times: Vec<f64>,
}

pub fn pde_run(args: &OpArgs, u0: &Path, p: &PdeArgs, out_dir: &Path) -> Result<()> {
    let Loaded { op, .. } = args.load()?;
    let data = read_field::<f64>(u0, Some(op.dim()))?;
    let u0: ComplexField = data.complex();
    let mut problem = EvolutionProblem::new(p.kind, p.nonlinearity, u0.clone(), p.interval);
    problem.alpha = p.alpha;
    problem.tau_nodes = p.tau_nodes;
    problem.picard_max = p.picard_max;
    let result = duhamel_evolve(&problem, &op)?;
    let conservation = conservation_check(&op, &u0, p.alpha, &p.conservation_times)?;
    std::fs::create_dir_all(out_dir)?;
    let summary = result.summary();
    write_json(&out_dir.join("trace.json"), &summary)?;
    write_json(&out_dir.join("conservation.json"), &conservation)?;
    let final_path = out_dir.join("fixed_point.csv");
    if p.kind == EvolutionKind::Heat && result.final_field.iter().all(|z: &Complex<f64>| z.im == 0.0) {
        write_field(&final_path, &result.final_field.map(|z| z.re), None)?;
    } else {
        write_complex_field(&final_path, &result.final_field)?;
    }
    if summary.no_contraction {
        eprintln!("no-contraction: Picard iteration did not converge on |I| = {}", p.interval);
    }
    print!("{}", sobolev_core::io::to_json_string(&summary)?);
    Ok(())
}
