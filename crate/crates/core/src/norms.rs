//! Lebesgue, Sobolev and BMO norms, maximal functions and embedding reports.

use nalgebra::DVector;
use serde::Serialize;

use crate::ensemble::{trial_field, FieldKind};
use crate::error::{Error, Result};
use crate::geometry::DiscreteManifold;
use crate::scalar::Real;
use crate::spectral::SpectralOperator;

/// `(Σ |f(x)|^p μ(x))^{1/p}`, or `max |f|` for `p = ∞`.
pub fn lebesgue_norm<T: Real>(manifold: &DiscreteManifold<T>, f: &DVector<T>, p: f64) -> T {
    if p.is_infinite() {
        return f.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    }
    let pp = T::lit(p);
    let sum = f
        .iter()
        .zip(manifold.measure().iter())
        .fold(T::zero(), |acc, (&v, &m)| acc + v.abs().powf(pp) * m);
    sum.powf(T::one() / pp)
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("Lebesgue exponent {p} must be >= 1")))
    }
}

/// Homogeneous `‖L^{α/m} f‖_p` or non-homogeneous `‖f‖_p + ‖L^{α/m} f‖_p`.
pub fn sobolev_norm<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    alpha: f64,
    p: f64,
    homogeneous: bool,
) -> Result<T> {
    check_exponent(p)?;
    if alpha < 0.0 {
        return Err(Error::Parameter(format!("regularity {alpha} must be >= 0")));
    }
    manifold.check_field(f)?;
    let beta = T::lit(alpha) / op.order();
    let seminorm = lebesgue_norm(manifold, &op.fractional_power(beta, f, false)?, p);
    Ok(if homogeneous {
        seminorm
    } else {
        lebesgue_norm(manifold, f, p) + seminorm
    })
}

/// `‖(1+L)^{α/m} f‖_p`.
pub fn bessel_norm<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    alpha: f64,
    p: f64,
) -> Result<T> {
    check_exponent(p)?;
    manifold.check_field(f)?;
    let beta = T::lit(alpha) / op.order();
    Ok(lebesgue_norm(manifold, &op.fractional_power(beta, f, true)?, p))
}

#[derive(Debug, Clone, Copy)]
pub enum BmoFlavor<'a, T> {
    /// `sup_B avg_B |f − avg_B f|`.
    Classical,
    /// `sup_{x,t} (avg_{B(x,t^{1/m})} |f − e^{-tL} f|^p)^{1/p}`.
    Semigroup { op: &'a SpectralOperator<T>, p: f64 },
}

pub fn bmo_norm<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    flavor: BmoFlavor<'_, T>,
) -> Result<T> {
    manifold.check_field(f)?;
    let n = manifold.vertex_count();
    let mu = manifold.measure();
    match flavor {
        BmoFlavor::Classical => {
            let mut best = T::zero();
            for x in 0..n {
                let idx = manifold.ball_index(x);
                for (_, end) in idx.shells() {
                    let members = &idx.order[..end];
                    let vol = idx.prefix_measure[end - 1];
                    let avg = members.iter().fold(T::zero(), |a, &y| a + mu[y] * f[y]) / vol;
                    let osc = members
                        .iter()
                        .fold(T::zero(), |a, &y| a + mu[y] * (f[y] - avg).abs())
                        / vol;
                    best = best.max(osc);
                }
            }
            Ok(best)
        }
        BmoFlavor::Semigroup { op, p } => {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::Parameter(format!(
                    "BMO_L exponent {p} must lie in (1, ∞)"
                )));
            }
            let pp = T::lit(p);
            let mut best = T::zero();
            for r in manifold.radius_grid() {
                let t = r.powf(op.order());
                let u = op.heat(t, f);
                let h: Vec<T> = (0..n).map(|y| mu[y] * (f[y] - u[y]).abs().powf(pp)).collect();
                for x in 0..n {
                    let idx = manifold.ball_index(x);
                    let count = idx.count_below(r).max(1);
                    let mass = idx.order[..count].iter().fold(T::zero(), |a, &y| a + h[y]);
                    best = best.max(mass / idx.prefix_measure[count - 1]);
                }
            }
            Ok(best.powf(T::one() / pp))
        }
    }
}

/// Uncentered maximal function `M_s f = [M(|f|^s)]^{1/s}` over all balls.
pub fn maximal_function<T: Real>(manifold: &DiscreteManifold<T>, f: &DVector<T>, s: f64) -> DVector<T> {
    let n = manifold.vertex_count();
    let ss = T::lit(s);
    let mu = manifold.measure();
    let powered: Vec<T> = f.iter().map(|v| v.abs().powf(ss)).collect();
    let mut out = DVector::zeros(n);
    for x in 0..n {
        let idx = manifold.ball_index(x);
        let shells = idx.shells();
        let mut mass = T::zero();
        let mut pos = 0;
        let mut averages = Vec::with_capacity(shells.len());
        for &(_, end) in &shells {
            while pos < end {
                mass += powered[idx.order[pos]] * mu[idx.order[pos]];
                pos += 1;
            }
            averages.push(mass / idx.prefix_measure[end - 1]);
        }
        // a vertex in shell k lies in every ball ending at shell k or later
        let mut best = T::zero();
        let mut start_of = vec![0usize; shells.len()];
        for k in 1..shells.len() {
            start_of[k] = shells[k - 1].1;
        }
        for k in (0..shells.len()).rev() {
            best = best.max(averages[k]);
            for &y in &idx.order[start_of[k]..shells[k].1] {
                if best > out[y] {
                    out[y] = best;
                }
            }
        }
    }
    // the singleton ball gives |f(x)| exactly; the root may round below it
    let inv = T::one() / ss;
    DVector::from_iterator(n, out.iter().zip(f.iter()).map(|(&v, &fx)| v.powf(inv).max(fx.abs())))
}

/// `‖(1+L)^{α/m} f‖_p / (‖f‖_p + ‖L^{α/m} f‖_p)`.
pub fn equivalence_ratio<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    alpha: f64,
    p: f64,
) -> Result<Option<T>> {
    let denom = sobolev_norm(op, manifold, f, alpha, p, false)?;
    if denom == T::zero() {
        return Ok(None);
    }
    Ok(Some(bessel_norm(op, manifold, f, alpha, p)? / denom))
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingTrial {
    pub trial: u64,
    pub field: FieldKind,
    /// `‖(1+L)^{-s/m} f‖_q / ‖f‖_p`.
    pub bessel_ratio: f64,
    /// `‖f‖_q / (‖f‖_p + ‖L^{s/m} f‖_p)`.
    pub sobolev_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingReport {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub d: f64,
    pub hypothesis_violated: bool,
    pub per_trial: Vec<EmbeddingTrial>,
    pub max_bessel_ratio: f64,
    pub max_sobolev_ratio: f64,
}

/// Whether `(s, p, q)` lies in the Sobolev embedding regime for dimension `d`.
pub fn embedding_regime(s: f64, p: f64, q: f64, d: f64) -> bool {
    if q.is_infinite() {
        s > d / p
    } else {
        1.0 / q > 1.0 / p - s / d
    }
}

/// Empirical constants of the embeddings `W^{s,p} → L^q`.
#[allow(clippy::too_many_arguments)]
pub fn embedding_report<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    s: f64,
    p: f64,
    q: f64,
    d: f64,
    trials: usize,
    seed: u64,
) -> Result<EmbeddingReport> {
    check_exponent(p)?;
    check_exponent(q)?;
    let mut per_trial = Vec::with_capacity(trials);
    for trial in 0..trials as u64 {
        let (field, f) = trial_field(op, manifold, seed, trial);
        let Some(record) = embedding_trial(op, manifold, &f, s, p, q)? else {
            continue;
        };
        per_trial.push(EmbeddingTrial {
            trial,
            field,
            bessel_ratio: record.0,
            sobolev_ratio: record.1,
        });
    }
    let max_of = |sel: fn(&EmbeddingTrial) -> f64| per_trial.iter().map(sel).fold(0.0, f64::max);
    Ok(EmbeddingReport {
        s,
        p,
        q,
        d,
        hypothesis_violated: !embedding_regime(s, p, q, d),
        max_bessel_ratio: max_of(|t| t.bessel_ratio),
        max_sobolev_ratio: max_of(|t| t.sobolev_ratio),
        per_trial,
    })
}

/// Both embedding ratios for one field; `None` for the zero field.
pub fn embedding_trial<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    s: f64,
    p: f64,
    q: f64,
) -> Result<Option<(f64, f64)>> {
    let lp = lebesgue_norm(manifold, f, p);
    if lp == T::zero() {
        return Ok(None);
    }
    let beta = T::lit(-s) / op.order();
    let smoothed = op.fractional_power(beta, f, true)?;
    let bessel = lebesgue_norm(manifold, &smoothed, q) / lp;
    let sobolev = lebesgue_norm(manifold, f, q) / sobolev_norm(op, manifold, f, s, p, false)?;
    Ok(Some((bessel.to_f64_lossy(), sobolev.to_f64_lossy())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogFlavor {
    Bmo,
    BmoL { p: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LogEmbeddingTrial {
    pub trial: u64,
    pub field: FieldKind,
    pub scale: f64,
    pub sup_norm: f64,
    pub bmo: f64,
    pub sobolev: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogEmbeddingReport {
    pub s: f64,
    pub p: f64,
    pub d: f64,
    pub flavor: LogFlavor,
    pub hypothesis_violated: bool,
    /// The additive constant is not scale invariant; ratios depend on `μ(M)`.
    pub total_measure: f64,
    pub per_trial: Vec<LogEmbeddingTrial>,
    pub max_ratio: f64,
}

pub const LOG_EMBEDDING_SCALES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// `‖f‖_∞ / (1 + ‖f‖_flavor (1 + log(2 + ‖f‖_{W^{s,p}})))`.
pub fn log_embedding_ratio<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    s: f64,
    p: f64,
    flavor: LogFlavor,
) -> Result<(f64, f64, f64, f64)> {
    let sup = lebesgue_norm(manifold, f, f64::INFINITY).to_f64_lossy();
    let bmo = match flavor {
        LogFlavor::Bmo => bmo_norm(manifold, f, BmoFlavor::Classical)?,
        LogFlavor::BmoL { p } => bmo_norm(manifold, f, BmoFlavor::Semigroup { op, p })?,
    }
    .to_f64_lossy();
    let sobolev = sobolev_norm(op, manifold, f, s, p, false)?.to_f64_lossy();
    let ratio = sup / (1.0 + bmo * (1.0 + (2.0 + sobolev).ln()));
    Ok((ratio, sup, bmo, sobolev))
}

#[allow(clippy::too_many_arguments)]
pub fn log_embedding_report<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    s: f64,
    p: f64,
    d: f64,
    trials: usize,
    seed: u64,
    flavor: LogFlavor,
) -> Result<LogEmbeddingReport> {
    check_exponent(p)?;
    let mut per_trial = Vec::with_capacity(trials * LOG_EMBEDDING_SCALES.len());
    for trial in 0..trials as u64 {
        let (field, f) = trial_field(op, manifold, seed, trial);
        for scale in LOG_EMBEDDING_SCALES {
            let g = &f * T::lit(scale);
            let (ratio, sup_norm, bmo, sobolev) = log_embedding_ratio(op, manifold, &g, s, p, flavor)?;
            per_trial.push(LogEmbeddingTrial {
                trial,
                field,
                scale,
                sup_norm,
                bmo,
                sobolev,
                ratio,
            });
        }
    }
    Ok(LogEmbeddingReport {
        s,
        p,
        d,
        flavor,
        hypothesis_violated: !(s > d / p),
        total_measure: manifold.total_measure().to_f64_lossy(),
        max_ratio: per_trial.iter().map(|t| t.ratio).fold(0.0, f64::max),
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_manifold, GraphSpec};
    use crate::spectral::OperatorForm;

    fn setup(spec: GraphSpec) -> (DiscreteManifold<f64>, SpectralOperator<f64>) {
        let m = build_manifold(&spec).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        (m, op)
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn lebesgue_hand_values() {
        let (m, _) = setup(GraphSpec::path(2));
        assert!((lebesgue_norm(&m, &v(&[1.0, 1.0]), 2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lebesgue_norm(&m, &v(&[1.0, 0.0]), f64::INFINITY), 1.0);
        assert!((lebesgue_norm(&m, &v(&[3.0, 4.0]), 2.0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn sobolev_hand_values() {
        let (m, op) = setup(GraphSpec::path(2));
        let c = v(&[2.0, 2.0]);
        assert!(sobolev_norm(&op, &m, &c, 1.0, 2.0, true).unwrap() < 1e-14);
        let f = v(&[1.0, 0.0]);
        assert!((sobolev_norm(&op, &m, &f, 1.0, 2.0, true).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(
            sobolev_norm(&op, &m, &f, 0.0, 3.0, true).unwrap(),
            lebesgue_norm(&m, &f, 3.0)
        );
        assert!(sobolev_norm(&op, &m, &f, 1.0, 0.5, true).is_err());
    }

    #[test]
    fn bmo_hand_values() {
        let (m, op) = setup(GraphSpec::path(2));
        let f = v(&[1.0, 0.0]);
        assert!((bmo_norm(&m, &f, BmoFlavor::Classical).unwrap() - 0.5).abs() < 1e-15);
        let c = v(&[3.0, 3.0]);
        assert_eq!(bmo_norm(&m, &c, BmoFlavor::Classical).unwrap(), 0.0);
        let semigroup = BmoFlavor::Semigroup { op: &op, p: 2.0 };
        assert!(bmo_norm(&m, &c, semigroup).unwrap() < 1e-13);
        assert!(bmo_norm(&m, &f, BmoFlavor::Semigroup { op: &op, p: 1.0 }).is_err());
    }

    #[test]
    fn maximal_function_hand_values() {
        let (m, _) = setup(GraphSpec::path(2));
        let mf = maximal_function(&m, &v(&[1.0, 0.0]), 1.0);
        assert!((mf[0] - 1.0).abs() < 1e-15 && (mf[1] - 0.5).abs() < 1e-15);
        let mc = maximal_function(&m, &v(&[-2.0, -2.0]), 3.0);
        assert!(mc.iter().all(|&x| (x - 2.0).abs() < 1e-14));
    }

    #[test]
    fn maximal_function_matches_ball_enumeration() {
        let (m, _) = setup(GraphSpec::cycle(9));
        let f = DVector::from_fn(9, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let fast = maximal_function(&m, &f, 1.5);
        for y in 0..9 {
            let mut brute = 0.0f64;
            for x in 0..9 {
                for r in m.radius_grid() {
                    let b = m.ball(x, r);
                    if b.members.contains(&y) {
                        let mass: f64 = b.members.iter().map(|&z| f[z].abs().powf(1.5)).sum();
                        brute = brute.max(mass / b.volume);
                    }
                }
            }
            assert!((fast[y] - brute.powf(1.0 / 1.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn embedding_constant_field() {
        let (m, op) = setup(GraphSpec::path(2));
        let (bessel, sobolev) = embedding_trial(&op, &m, &v(&[1.0, 1.0]), 1.0, 2.0, f64::INFINITY)
            .unwrap()
            .unwrap();
        let expected = 1.0 / 2f64.sqrt();
        assert!((bessel - expected).abs() < 1e-14);
        assert!((sobolev - expected).abs() < 1e-14);
        assert!(embedding_trial(&op, &m, &v(&[0.0, 0.0]), 1.0, 2.0, 4.0).unwrap().is_none());
    }

    #[test]
    fn log_embedding_zero_field() {
        let (m, op) = setup(GraphSpec::cycle(8));
        let (ratio, ..) = log_embedding_ratio(&op, &m, &DVector::zeros(8), 1.0, 2.0, LogFlavor::Bmo).unwrap();
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn log_embedding_homogeneity_bookkeeping() {
        let (m, op) = setup(GraphSpec::cycle(8));
        let f = DVector::from_fn(8, |i, _| (i as f64).sin());
        let (_, _, b1, _) = log_embedding_ratio(&op, &m, &f, 1.0, 2.0, LogFlavor::Bmo).unwrap();
        let (_, _, b2, _) = log_embedding_ratio(&op, &m, &(&f * 2.0), 1.0, 2.0, LogFlavor::Bmo).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-13);
    }
}
