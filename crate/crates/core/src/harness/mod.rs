//! Experiment orchestration over a ladder of test spaces.
//!
//! Rungs run in parallel and each rung is a pure function of the config, so
//! the numeric payload of a [`Report`] does not depend on the thread count.

mod config;
mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{
    CharacterizeParams, EmbedParams, EquivalenceParams, Experiment, ExperimentConfig, FormKind,
    GeomParams, LadderFamily, LadderSection, LeibnizParams, LogEmbedParams, LogFlavorKind,
    NonlinParams, OffdiagParams, PdeParams, RunSection,
};
pub use report::{emit_report, summarize, LadderRow, Report, ReportFormat, RungTiming, Timing};

use crate::ensemble::{trial_field, trial_seed};
use crate::error::{Error, Result};
use crate::functionals::{characterization_report, nonlinearity_report, Nonlinearity};
use crate::geometry::{build_manifold, geometry_report, DiscreteManifold, GraphSpec, PoincareRequest};
use crate::io::{read_manifold, sha256_hex, to_json_string, ManifoldFile};
use crate::norms::{embedding_report, equivalence_ratio, lebesgue_norm, log_embedding_report};
use crate::paraproducts::{leibniz_report, DominantTerm, LeibnizRequest, SymbolFamily, TQuadrature};
use crate::pde::{conservation_check, contraction_estimate, EvolutionProblem};
use crate::scalar::Real;
use crate::spectral::{offdiag_probe, OperatorForm, SpectralOperator};

pub const OUTPUT_DIR_ENV: &str = "SOBOLEV_LAB_OUTPUT_DIR";
pub const THREADS_ENV: &str = "SOBOLEV_LAB_THREADS";

/// Sizes the global rayon pool from `SOBOLEV_LAB_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("{THREADS_ENV}={raw} is not a thread count")))?;
    // A pool built earlier in the process wins; results do not depend on it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Output base path (without extension) after the env override.
pub fn output_base(config: &ExperimentConfig) -> PathBuf {
    let configured = config
        .run
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("reports/{}", config.run.experiment)));
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(configured.file_name().unwrap_or_default()),
        None => configured,
    }
}

struct Rung<T> {
    n: usize,
    manifold: DiscreteManifold<T>,
    op: SpectralOperator<T>,
    sha256: String,
}

#[derive(Default)]
struct RungOutcome {
    records: Vec<Value>,
    ratios: Vec<f64>,
    extra: BTreeMap<String, Option<f64>>,
    flags: Vec<String>,
}

fn default_radius(n: usize) -> f64 {
    let n = n as f64;
    1.6 * (n.ln() / (std::f64::consts::PI * n)).sqrt()
}

fn rung_specs(config: &ExperimentConfig) -> Vec<GraphSpec> {
    let ladder = &config.ladder;
    ladder
        .sizes
        .iter()
        .map(|&n| match ladder.family {
            LadderFamily::Cycle => GraphSpec::cycle(n),
            LadderFamily::Path => GraphSpec::path(n),
            LadderFamily::Torus => {
                let k = config::square_side(n).unwrap_or(1);
                GraphSpec::torus_grid(k, k)
            }
            LadderFamily::RandomGeometric => GraphSpec::RandomGeometric {
                n,
                radius: ladder.radius.unwrap_or_else(|| default_radius(n)),
                seed: ladder.seed.unwrap_or(config.run.seed),
            },
        })
        .collect()
}

fn build_rung<T: Real>(
    config: &ExperimentConfig,
    source: RungSource<'_>,
) -> Result<Rung<T>> {
    let (manifold, sha256) = match source {
        RungSource::Spec(spec) => {
            let m = build_manifold::<T>(spec)?;
            let hash = sha256_hex(to_json_string(&ManifoldFile::from_manifold(&m))?.as_bytes());
            (m, hash)
        }
        RungSource::File(path) => read_manifold::<T>(path)?,
    };
    let form = match config.run.form {
        FormKind::Combinatorial => OperatorForm::Combinatorial,
        FormKind::Normalized => OperatorForm::Normalized,
    };
    let op = SpectralOperator::assemble(&manifold, &form)?.with_order(T::lit(config.run.order));
    Ok(Rung {
        n: manifold.vertex_count(),
        manifold,
        op,
        sha256,
    })
}

#[derive(Clone, Copy)]
enum RungSource<'a> {
    Spec(&'a GraphSpec),
    File(&'a std::path::Path),
}

fn to_value<S: Serialize>(value: &S) -> Result<Value> {
    Ok(serde_json::to_value(value)?)
}

/// Prefixes a record with the rung size so `n` comes first.
fn tag(n: usize, record: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("n".into(), json!(n));
    match record {
        Value::Object(map) => out.extend(map),
        other => {
            out.insert("record".into(), other);
        }
    }
    Value::Object(out)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn params_echo(config: &ExperimentConfig, experiment: Experiment) -> Result<Value> {
    let section = match experiment {
        Experiment::Equivalence => to_value(&config.equivalence)?,
        Experiment::Embed => to_value(&config.embed)?,
        Experiment::LogEmbed => to_value(&config.log_embed)?,
        Experiment::Leibniz => to_value(&config.leibniz)?,
        Experiment::Characterize => to_value(&config.characterize)?,
        Experiment::Nonlin => to_value(&config.nonlin)?,
        Experiment::Pde => to_value(&config.pde)?,
        Experiment::Geom => to_value(&config.geom)?,
        Experiment::Offdiag => to_value(&config.offdiag)?,
    };
    Ok(json!({
        "run": to_value(&config.run)?,
        "ladder": to_value(&config.ladder)?,
        experiment.name(): section,
    }))
}

/// Runs the configured experiment in double precision.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    run_experiment_timed::<f64>(config).map(|(r, _)| r)
}

/// Runs the configured experiment and returns the per-rung wall-clock too.
pub fn run_experiment_timed<T: Real>(config: &ExperimentConfig) -> Result<(Report, Timing)> {
    config.validate()?;
    let experiment = config.experiment()?;
    let start = Instant::now();
    let specs = rung_specs(config);
    let sources: Vec<RungSource<'_>> = if config.ladder.files.is_empty() {
        specs.iter().map(RungSource::Spec).collect()
    } else {
        config.ladder.files.iter().map(|p| RungSource::File(p)).collect()
    };

    let results: Vec<Result<(usize, String, RungOutcome, f64)>> = sources
        .par_iter()
        .map(|&source| {
            let t0 = Instant::now();
            let rung = build_rung::<T>(config, source)?;
            let outcome = run_rung(config, experiment, &rung)?;
            Ok((rung.n, rung.sha256, outcome, t0.elapsed().as_secs_f64()))
        })
        .collect();

    let params = params_echo(config, experiment)?;
    let mut input_hashes = BTreeMap::new();
    input_hashes.insert("config".to_string(), sha256_hex(to_json_string(&params)?.as_bytes()));
    let mut per_trial = Vec::new();
    let mut all_ratios = Vec::new();
    let mut ladder = Vec::new();
    let mut flags = Vec::new();
    let mut rungs = Vec::new();
    for (i, result) in results.into_iter().enumerate() {
        let (n, sha, outcome, seconds) = result?;
        input_hashes.insert(format!("manifold_{i}_n{n}"), sha);
        let (max_ratio, min_ratio, median_ratio) = summarize(&outcome.ratios);
        ladder.push(LadderRow {
            n,
            trials: outcome.records.len(),
            max_ratio,
            min_ratio,
            median_ratio,
            extra: outcome.extra,
        });
        all_ratios.extend(outcome.ratios);
        per_trial.extend(outcome.records.into_iter().map(|r| tag(n, r)));
        flags.extend(outcome.flags.into_iter().map(|f| format!("n={n}: {f}")));
        rungs.push(RungTiming { n, seconds });
    }
    let (max_ratio, min_ratio, median_ratio) = summarize(&all_ratios);
    let report = Report {
        experiment: experiment.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        params,
        input_hashes,
        per_trial,
        max_ratio,
        min_ratio,
        median_ratio,
        ladder,
        flags,
    };
    let timing = Timing {
        experiment: experiment.name().into(),
        total_seconds: start.elapsed().as_secs_f64(),
        rungs,
    };
    Ok((report, timing))
}

fn run_rung<T: Real>(
    config: &ExperimentConfig,
    experiment: Experiment,
    rung: &Rung<T>,
) -> Result<RungOutcome> {
    let (op, m) = (&rung.op, &rung.manifold);
    let trials = config.run.trials;
    let seed = config.run.seed;
    let mut out = RungOutcome::default();
    match experiment {
        Experiment::Equivalence => {
            let eq = &config.equivalence;
            let fields: Vec<_> = (0..trials as u64).map(|i| (i, trial_field(op, m, seed, i))).collect();
            let mut worst: BTreeMap<String, (f64, f64)> = BTreeMap::new();
            for &alpha in &eq.alphas {
                for &p in &eq.ps {
                    let key = format!("c_alpha{alpha}_p{p}");
                    let rows: Vec<Option<f64>> = fields
                        .par_iter()
                        .map(|(_, (_, f))| {
                            equivalence_ratio(op, m, f, alpha, p).map(|r| r.map(|v| v.to_f64_lossy()))
                        })
                        .collect::<Result<_>>()?;
                    let mut hi = f64::NEG_INFINITY;
                    let mut lo = f64::INFINITY;
                    for ((trial, (kind, _)), ratio) in fields.iter().zip(rows) {
                        out.records.push(json!({
                            "trial": trial, "field": to_value(kind)?, "alpha": alpha, "p": p,
                            "ratio": ratio,
                        }));
                        if let Some(r) = ratio {
                            out.ratios.push(r);
                            hi = hi.max(r);
                            lo = lo.min(r);
                        }
                    }
                    worst.insert(key, (hi, lo));
                }
            }
            for (key, (hi, lo)) in worst {
                // Smallest C with every ratio in [1/C, C].
                out.extra.insert(key, finite(hi.max(1.0 / lo)));
            }
        }
        Experiment::Embed => {
            let e = &config.embed;
            let rep = embedding_report(op, m, e.s, e.p, e.q, e.d, trials, seed)?;
            if rep.hypothesis_violated {
                out.flags.push(format!(
                    "hypothesis-violated: (s, p, q) = ({}, {}, {}) outside the embedding regime for d = {}",
                    e.s, e.p, e.q, e.d
                ));
            }
            for t in &rep.per_trial {
                out.ratios.push(t.bessel_ratio);
                out.records.push(to_value(t)?);
            }
            out.extra.insert("max_sobolev_ratio".into(), finite(rep.max_sobolev_ratio));
        }
        Experiment::LogEmbed => {
            let e = &config.log_embed;
            let rep = log_embedding_report(op, m, e.s, e.p, e.d, trials, seed, e.flavor())?;
            if rep.hypothesis_violated {
                out.flags.push(format!("hypothesis-violated: s = {} <= d/p = {}", e.s, e.d / e.p));
            }
            for t in &rep.per_trial {
                out.ratios.push(t.ratio);
                out.records.push(to_value(t)?);
            }
            out.extra.insert("total_measure".into(), finite(rep.total_measure));
        }
        Experiment::Leibniz => {
            let l = &config.leibniz;
            let family = SymbolFamily::<T>::new(l.symbol_order)?;
            let quad = if l.breakdown {
                Some(TQuadrature::<T>::log_midpoint(l.tmin, l.tmax, l.nodes)?)
            } else {
                None
            };
            let req = LeibnizRequest {
                alpha: l.alpha,
                exponents: l.exponents(),
                trials,
                seed,
            };
            if let Err(e) = req.exponents.validate() {
                out.flags.push(format!("hypothesis-violated: {e}"));
                return Ok(out);
            }
            let rep = leibniz_report(op, m, &family, quad.as_ref(), &req)?;
            let mut counts = [0usize; 4];
            for t in &rep.per_trial {
                out.ratios.push(t.ratio);
                out.records.push(to_value(t)?);
                if let Some(b) = &t.breakdown {
                    let k = match b.dominant {
                        DominantTerm::HighHigh => 0,
                        DominantTerm::LowHigh => 1,
                        DominantTerm::HighLow => 2,
                        DominantTerm::Mean => 3,
                    };
                    counts[k] += 1;
                }
            }
            if let Some(g) = rep.max_gradient_ratio {
                out.extra.insert("max_gradient_ratio".into(), finite(g));
            }
            if l.breakdown {
                for (name, c) in ["dominant_high_high", "dominant_low_high", "dominant_high_low", "dominant_mean"]
                    .iter()
                    .zip(counts)
                {
                    out.extra.insert((*name).into(), Some(c as f64));
                }
            }
        }
        Experiment::Characterize => {
            let c = &config.characterize;
            let rep = characterization_report(op, m, c.alpha, c.p, c.rho, trials, seed)?;
            if rep.hypothesis_violated {
                out.flags.push(format!(
                    "hypothesis-violated: rho = {} is not below min(2, p) = {}",
                    c.rho,
                    c.p.min(2.0)
                ));
            }
            for t in &rep.per_trial {
                out.ratios.push(t.ratio);
                out.records.push(to_value(t)?);
            }
            out.extra.insert("min_local_ratio".into(), finite(rep.min_local_ratio));
            out.extra.insert("max_local_ratio".into(), finite(rep.max_local_ratio));
        }
        Experiment::Nonlin => {
            let c = &config.nonlin;
            let f: Nonlinearity = c.nonlinearity.parse()?;
            let rep = nonlinearity_report(op, m, f, c.alpha, c.p, c.rho, trials, seed)?;
            if !rep.domination_holds {
                out.flags.push(format!(
                    "domination-violated: max violation {:e}",
                    rep.max_violation
                ));
            }
            for t in &rep.per_trial {
                out.ratios.push(t.norm_ratio);
                out.records.push(to_value(t)?);
            }
            out.extra.insert("max_violation".into(), finite(rep.max_violation));
        }
        Experiment::Pde => run_pde(config, rung, &mut out)?,
        Experiment::Geom => {
            let g = &config.geom;
            let req = PoincareRequest {
                q: g.q,
                local: g.local,
                random_fields: g.random_fields,
                seed,
            };
            let rep = geometry_report(m, g.d, &req);
            let constant = rep.poincare.constant.to_f64_lossy();
            out.ratios.push(constant);
            out.extra.insert("doubling_constant".into(), finite(rep.doubling_constant.to_f64_lossy()));
            out.extra.insert(
                "homogeneous_dimension".into(),
                finite(rep.homogeneous_dimension.to_f64_lossy()),
            );
            out.extra.insert("volume_lower_bound".into(), finite(rep.volume_lower_bound.to_f64_lossy()));
            let mut record = to_value(&rep)?;
            if let Value::Object(map) = &mut record {
                map.insert("seed".into(), json!(trial_seed(seed, 0)));
            }
            out.records.push(record);
        }
        Experiment::Offdiag => {
            let o = &config.offdiag;
            let fields: Vec<DVector<T>> = (0..trials as u64).map(|i| trial_field(op, m, seed, i).1).collect();
            let rep = offdiag_probe(op, m, &o.t_grid, o.s_minus, &fields, o.constant_budget);
            if !rep.conservation_ok {
                out.flags.push(format!("conservation-failed: error {:e}", rep.conservation_error));
            }
            if rep.saturated {
                out.flags.push("saturated: every probed ball covers the space".into());
            }
            out.ratios.push(rep.delta);
            out.extra.insert("constant_at_delta".into(), finite(rep.constant_at_delta));
            out.extra.insert("conservation_error".into(), finite(rep.conservation_error));
            out.records.push(to_value(&rep)?);
        }
    }
    Ok(out)
}

/// Contraction ladder and linear conservation per seeded initial datum.
type PdeTrialRow = (Value, Option<f64>, Option<f64>, f64, Vec<String>);

/// The per-trial ratio is the contraction factor per unit time at the
/// shortest interval.
fn run_pde<T: Real>(config: &ExperimentConfig, rung: &Rung<T>, out: &mut RungOutcome) -> Result<()> {
    let c = &config.pde;
    let f: Nonlinearity = c.nonlinearity.parse()?;
    let (op, m) = (&rung.op, &rung.manifold);
    let rows: Vec<PdeTrialRow> = (0..config.run.trials as u64)
        .into_par_iter()
        .map(|i| {
            let (kind, field) = trial_field(op, m, config.run.seed, i);
            let sup = lebesgue_norm(m, &field, f64::INFINITY);
            let u0 = if sup > T::zero() {
                field * (T::lit(c.amplitude) / sup)
            } else {
                field
            };
            let mut problem = EvolutionProblem::real(c.kind, f, &u0, c.intervals[0]);
            problem.alpha = c.alpha;
            problem.tau_nodes = c.tau_nodes;
            problem.picard_max = c.picard_max;
            let contraction = contraction_estimate(&problem, op, &c.intervals)?;
            let u0c: DVector<Complex<T>> = u0.map(|x| Complex::new(x, T::zero()));
            let conservation = conservation_check(op, &u0c, c.alpha, &c.conservation_times)?;
            let mut flags = Vec::new();
            for row in contraction.rows.iter().filter(|r| !r.converged) {
                flags.push(format!("trial {i}: no-contraction at |I| = {}", row.interval));
            }
            if !conservation.conserved {
                flags.push(format!(
                    "trial {i}: conservation error {:e}",
                    conservation.max_relative_error
                ));
            }
            if !conservation.heat_monotone {
                flags.push(format!("trial {i}: heat norm increased"));
            }
            let first = contraction.rows.first();
            let ratio = first.and_then(|r| r.contraction_factor.map(|k| k / r.interval));
            let record = json!({
                "trial": i,
                "field": to_value(&kind)?,
                "ratio": ratio,
                "contraction": to_value(&contraction)?,
                "conservation_error": conservation.max_relative_error,
                "heat_monotone": conservation.heat_monotone,
            });
            Ok((record, ratio, contraction.slope, conservation.max_relative_error, flags))
        })
        .collect::<Result<_>>()?;
    let mut slopes = Vec::new();
    let mut conservation = 0f64;
    for (record, ratio, slope, cons, flags) in rows {
        out.records.push(record);
        if let Some(r) = ratio {
            out.ratios.push(r);
        }
        if let Some(s) = slope {
            slopes.push(s);
        }
        conservation = conservation.max(cons);
        out.flags.extend(flags);
    }
    let (max_slope, min_slope, _) = summarize(&slopes);
    out.extra.insert("max_slope".into(), max_slope);
    out.extra.insert("min_slope".into(), min_slope);
    out.extra.insert("max_conservation_error".into(), finite(conservation));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment, sizes: Vec<usize>, trials: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(experiment, sizes);
        c.run.trials = trials;
        c.run.seed = 7;
        c
    }

    #[test]
    fn single_record_characterization_is_reproducible() {
        let c = small(Experiment::Characterize, vec![16], 1);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.per_trial.len(), 1);
        assert_eq!(a.ladder.len(), 1);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.input_hashes, b.input_hashes);
    }

    #[test]
    fn every_experiment_runs_on_a_tiny_ladder() {
        for e in Experiment::ALL {
            let mut c = small(e, vec![8, 12], 2);
            c.pde.intervals = vec![0.05, 0.1];
            let r = run_experiment(&c).unwrap();
            assert_eq!(r.ladder.len(), 2, "{e}");
            assert_eq!(r.experiment, e.name());
            assert!(r.per_trial.iter().all(|t| t["n"].is_u64()), "{e}");
        }
    }

    #[test]
    fn regime_violation_is_a_flag() {
        let mut c = small(Experiment::Characterize, vec![8], 1);
        c.characterize.rho = 2.0;
        let r = run_experiment(&c).unwrap();
        assert!(r.flags.iter().any(|f| f.contains("hypothesis-violated")));
    }

    #[test]
    fn trial_prefix_is_stable() {
        let a = run_experiment(&small(Experiment::Leibniz, vec![16], 3)).unwrap();
        let b = run_experiment(&small(Experiment::Leibniz, vec![16], 5)).unwrap();
        assert_eq!(a.per_trial[..], b.per_trial[..3]);
    }

    #[test]
    fn torus_and_random_ladders_build() {
        let mut c = small(Experiment::Geom, vec![16, 25], 1);
        c.ladder.family = LadderFamily::Torus;
        assert_eq!(run_experiment(&c).unwrap().ladder[1].n, 25);
        c.ladder.family = LadderFamily::RandomGeometric;
        c.ladder.sizes = vec![40];
        assert_eq!(run_experiment(&c).unwrap().ladder[0].n, 40);
    }
}
