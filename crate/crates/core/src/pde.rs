//! Semilinear heat and Schrödinger equations by Duhamel–Picard iteration.
//!
//! Iterates are stored in spectral coordinates at Chebyshev–Lobatto times of
//! `I = [0, |I|]`; the forcing between nodes is the barycentric interpolant and
//! each Duhamel integral uses Gauss–Legendre nodes on `[0, t]`. Semigroup
//! factors are applied exactly per eigenvalue.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::DVector;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::Nonlinearity;
use crate::scalar::Real;
use crate::spectral::{join_complex, split_complex, SpectralOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionKind {
    /// `u(t) = e^{-tL}u₀ − ∫₀ᵗ e^{-(t−τ)L} F(u(τ)) dτ`.
    Heat,
    /// `u(t) = e^{itL}u₀ − i ∫₀ᵗ e^{i(t−τ)L} F(u(τ)) dτ`.
    Schrodinger,
}

impl fmt::Display for EvolutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvolutionKind::Heat => "heat",
            EvolutionKind::Schrodinger => "schrodinger",
        })
    }
}

impl FromStr for EvolutionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heat" => Ok(EvolutionKind::Heat),
            "schrodinger" | "schroedinger" | "schrödinger" => Ok(EvolutionKind::Schrodinger),
            other => Err(Error::Parse(format!("unknown evolution kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionProblem<T> {
    pub kind: EvolutionKind,
    pub nonlinearity: Nonlinearity,
    pub u0: DVector<Complex<T>>,
    pub interval: f64,
    /// Regularity of the `C⁰_I W^{α,2}` distance.
    pub alpha: f64,
    pub tau_nodes: usize,
    pub picard_max: usize,
    /// Minimum number of collocation intervals in time.
    pub collocation: usize,
    /// Uniform sample points of `I` realizing the `C⁰_I` norm.
    pub samples: usize,
    pub tolerance: f64,
}

impl<T: Real> EvolutionProblem<T> {
    pub fn new(
        kind: EvolutionKind,
        nonlinearity: Nonlinearity,
        u0: DVector<Complex<T>>,
        interval: f64,
    ) -> Self {
        Self {
            kind,
            nonlinearity,
            u0,
            interval,
            alpha: 0.5,
            tau_nodes: 32,
            picard_max: 60,
            collocation: 24,
            samples: 17,
            tolerance: 1e-10,
        }
    }

    pub fn real(kind: EvolutionKind, nonlinearity: Nonlinearity, u0: &DVector<T>, interval: f64) -> Self {
        let zero = DVector::zeros(u0.len());
        Self::new(kind, nonlinearity, join_complex(u0, &zero), interval)
    }

    pub fn validate(&self, op: &SpectralOperator<T>) -> Result<()> {
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(Error::Parameter(format!(
                "interval length {} must be positive",
                self.interval
            )));
        }
        if self.tau_nodes < 16 {
            return Err(Error::Parameter(format!(
                "at least 16 τ-nodes required, got {}",
                self.tau_nodes
            )));
        }
        if self.collocation < 2 || self.samples < 2 || self.picard_max == 0 {
            return Err(Error::Parameter(
                "collocation, samples and picard_max must be positive (>= 2 for grids)".into(),
            ));
        }
        if self.alpha < 0.0 {
            return Err(Error::Parameter(format!("alpha = {} must be >= 0", self.alpha)));
        }
        if self.u0.len() != op.dim() {
            return Err(Error::FieldLength {
                expected: op.dim(),
                got: self.u0.len(),
            });
        }
        if self.kind == EvolutionKind::Heat && self.u0.iter().any(|z| z.im != T::zero()) {
            return Err(Error::Parameter("heat initial data must be real".into()));
        }
        Ok(())
    }
}

type Spec<T> = DVector<Complex<T>>;

fn to_spectral<T: Real>(op: &SpectralOperator<T>, v: &DVector<Complex<T>>) -> Spec<T> {
    let (re, im) = split_complex(v);
    join_complex(&op.coefficients(&re), &op.coefficients(&im))
}

fn to_vertex<T: Real>(op: &SpectralOperator<T>, c: &Spec<T>) -> DVector<Complex<T>> {
    let (re, im) = split_complex(c);
    join_complex(&op.synthesize(&re), &op.synthesize(&im))
}

/// Chebyshev–Lobatto points on `[0, len]` with barycentric weights.
fn chebyshev_lobatto(intervals: usize, len: f64) -> (Vec<f64>, Vec<f64>) {
    let m = intervals as f64;
    let nodes = (0..=intervals)
        .map(|j| 0.5 * len * (1.0 - (std::f64::consts::PI * j as f64 / m).cos()))
        .collect();
    let weights = (0..=intervals)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == intervals {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    (nodes, weights)
}

fn barycentric(nodes: &[f64], weights: &[f64], t: f64) -> Vec<f64> {
    if let Some(hit) = nodes.iter().position(|&s| s == t) {
        let mut out = vec![0.0; nodes.len()];
        out[hit] = 1.0;
        return out;
    }
    let raw: Vec<f64> = nodes.iter().zip(weights).map(|(&s, &w)| w / (t - s)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Shared Duhamel machinery for one problem on one operator.
struct Duhamel<'a, T> {
    op: &'a SpectralOperator<T>,
    problem: &'a EvolutionProblem<T>,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    gauss: Vec<(f64, f64)>,
    u0: Spec<T>,
    weights: DVector<T>,
}

impl<'a, T: Real> Duhamel<'a, T> {
    fn new(op: &'a SpectralOperator<T>, problem: &'a EvolutionProblem<T>) -> Self {
        // resolve the fastest mode over the interval
        let phase = problem.interval * op.lambda_max().to_f64_lossy();
        let intervals = problem.collocation.max(((2.0 * phase).ceil() as usize + 8).min(256));
        let (nodes, bary) = chebyshev_lobatto(intervals, problem.interval);
        let gauss = GaussLegendre::new(NonZeroUsize::new(problem.tau_nodes).expect(">= 16"))
            .as_node_weight_pairs()
            .to_vec();
        let beta = T::lit(2.0 * problem.alpha) / op.order();
        let weights = DVector::from_iterator(
            op.dim(),
            op.eigenvalues().iter().enumerate().map(|(i, &l)| {
                if i < op.kernel_dim() {
                    if problem.alpha == 0.0 {
                        T::one()
                    } else {
                        T::zero()
                    }
                } else {
                    l.powf(beta)
                }
            }),
        );
        Self {
            op,
            problem,
            nodes,
            bary,
            gauss,
            u0: to_spectral(op, &problem.u0),
            weights,
        }
    }

    fn propagator(&self, t: f64) -> Spec<T> {
        let t = T::lit(t);
        self.op.eigenvalues().map(|l| match self.problem.kind {
            EvolutionKind::Heat => Complex::new((-t * l).exp(), T::zero()),
            EvolutionKind::Schrodinger => Complex::new((t * l).cos(), (t * l).sin()),
        })
    }

    fn linear(&self, t: f64) -> Spec<T> {
        self.propagator(t).component_mul(&self.u0)
    }

    /// `Φ(u)(t)` given the forcing `F(u)` at the collocation nodes.
    fn apply(&self, forcing: &[Spec<T>], t: f64) -> Spec<T> {
        let mut out = self.linear(t);
        if t == 0.0 {
            return out;
        }
        let n = self.op.dim();
        let mut integral: Spec<T> = DVector::zeros(n);
        for &(x, w) in &self.gauss {
            let tau = 0.5 * t * (1.0 + x);
            let ell = barycentric(&self.nodes, &self.bary, tau);
            let mut g: Spec<T> = DVector::zeros(n);
            for (l, gj) in ell.iter().zip(forcing) {
                g.axpy(Complex::new(T::lit(*l), T::zero()), gj, Complex::new(T::one(), T::zero()));
            }
            let factor = Complex::new(T::lit(0.5 * t * w), T::zero());
            integral += self.propagator(t - tau).component_mul(&g) * factor;
        }
        let coupling = match self.problem.kind {
            EvolutionKind::Heat => Complex::new(-T::one(), T::zero()),
            EvolutionKind::Schrodinger => Complex::new(T::zero(), -T::one()),
        };
        out += integral * coupling;
        out
    }

    fn forcing(&self, states: &[Spec<T>]) -> Vec<Spec<T>> {
        states
            .par_iter()
            .map(|c| {
                let v = to_vertex(self.op, c).map(|z| self.problem.nonlinearity.apply_complex(z));
                to_spectral(self.op, &v)
            })
            .collect()
    }

    fn sweep(&self, forcing: &[Spec<T>], times: &[f64]) -> Vec<Spec<T>> {
        times.par_iter().map(|&t| self.apply(forcing, t)).collect()
    }

    fn interpolate(&self, states: &[Spec<T>], t: f64) -> Spec<T> {
        let ell = barycentric(&self.nodes, &self.bary, t);
        let mut out: Spec<T> = DVector::zeros(self.op.dim());
        for (l, s) in ell.iter().zip(states) {
            out.axpy(Complex::new(T::lit(*l), T::zero()), s, Complex::new(T::one(), T::zero()));
        }
        out
    }

    /// `‖v‖₂ + ‖L^{α/m} v‖₂` from spectral coordinates.
    fn norm(&self, c: &Spec<T>) -> f64 {
        let (mut plain, mut weighted) = (T::zero(), T::zero());
        for (z, &w) in c.iter().zip(self.weights.iter()) {
            let m = z.re * z.re + z.im * z.im;
            plain += m;
            weighted += w * m;
        }
        (plain.sqrt() + weighted.sqrt()).to_f64_lossy()
    }

    fn distance(&self, a: &[Spec<T>], b: &[Spec<T>]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| self.norm(&(x - y)))
            .fold(0.0, f64::max)
    }

    fn sample_times(&self) -> Vec<f64> {
        let s = self.problem.samples - 1;
        (0..=s)
            .map(|k| self.problem.interval * k as f64 / s as f64)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult<T> {
    pub kind: EvolutionKind,
    pub nonlinearity: Nonlinearity,
    pub interval: f64,
    /// `d_k = ‖u^{(k+1)} − u^{(k)}‖_{C⁰_I W^{α,2}}`, `u^{(0)}` the linear flow.
    pub distances: Vec<f64>,
    pub converged: bool,
    /// Set when the iteration fails to converge or blows up.
    pub no_contraction: bool,
    /// `d_1 / d_0`.
    pub contraction_factor: Option<f64>,
    /// `‖u − Φ(u)‖_{C⁰_I W^{α,2}}` of the converged iterate.
    pub residual: Option<f64>,
    pub times: Vec<f64>,
    /// Final iterate at `times`.
    pub trajectory: Vec<DVector<Complex<T>>>,
    pub final_field: DVector<Complex<T>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolutionSummary {
    pub kind: EvolutionKind,
    pub nonlinearity: Nonlinearity,
    pub interval: f64,
    pub distances: Vec<f64>,
    pub converged: bool,
    pub no_contraction: bool,
    pub contraction_factor: Option<f64>,
    pub residual: Option<f64>,
}

impl<T: Real> EvolutionResult<T> {
    pub fn summary(&self) -> EvolutionSummary {
        EvolutionSummary {
            kind: self.kind,
            nonlinearity: self.nonlinearity,
            interval: self.interval,
            distances: self.distances.clone(),
            converged: self.converged,
            no_contraction: self.no_contraction,
            contraction_factor: self.contraction_factor,
            residual: self.residual,
        }
    }
}

/// Picard iteration of the Duhamel map until `d_k < tolerance`.
pub fn duhamel_evolve<T: Real>(
    problem: &EvolutionProblem<T>,
    op: &SpectralOperator<T>,
) -> Result<EvolutionResult<T>> {
    problem.validate(op)?;
    let duhamel = Duhamel::new(op, problem);
    let samples = duhamel.sample_times();
    let mut states: Vec<Spec<T>> = duhamel.nodes.iter().map(|&t| duhamel.linear(t)).collect();
    let mut sampled: Vec<Spec<T>> = samples.iter().map(|&t| duhamel.linear(t)).collect();
    let mut distances = Vec::new();
    let mut converged = false;
    for _ in 0..problem.picard_max {
        let forcing = duhamel.forcing(&states);
        let next = duhamel.sweep(&forcing, &duhamel.nodes);
        let next_sampled = duhamel.sweep(&forcing, &samples);
        let d = duhamel.distance(&next_sampled, &sampled);
        distances.push(d);
        states = next;
        sampled = next_sampled;
        if !d.is_finite() || d > 1e8 * distances[0].max(f64::MIN_POSITIVE) {
            break;
        }
        if d < problem.tolerance {
            converged = true;
            break;
        }
    }
    let residual = converged.then(|| {
        let forcing = duhamel.forcing(&states);
        samples
            .iter()
            .map(|&t| duhamel.norm(&(duhamel.interpolate(&states, t) - duhamel.apply(&forcing, t))))
            .fold(0.0, f64::max)
    });
    let contraction_factor = match distances.as_slice() {
        [d0, d1, ..] if *d0 > 0.0 => Some(d1 / d0),
        _ => None,
    };
    let trajectory: Vec<_> = states.iter().map(|c| to_vertex(op, c)).collect();
    Ok(EvolutionResult {
        kind: problem.kind,
        nonlinearity: problem.nonlinearity,
        interval: problem.interval,
        distances,
        converged,
        no_contraction: !converged,
        contraction_factor,
        residual,
        times: duhamel.nodes.clone(),
        final_field: trajectory.last().expect("non-empty grid").clone(),
        trajectory,
    })
}

/// `‖v‖₂ + ‖L^{α/m} v‖₂` of a complex field, in vertex space.
pub fn complex_sobolev_norm<T: Real>(
    op: &SpectralOperator<T>,
    v: &DVector<Complex<T>>,
    alpha: f64,
) -> Result<T> {
    let (re, im) = split_complex(v);
    let beta = T::lit(alpha) / op.order();
    let (lre, lim) = (
        op.fractional_power(beta, &re, false)?,
        op.fractional_power(beta, &im, false)?,
    );
    let l2 = |a: &DVector<T>, b: &DVector<T>| (op.inner(a, a) + op.inner(b, b)).sqrt();
    Ok(l2(&re, &im) + l2(&lre, &lim))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationRow {
    pub t: f64,
    pub schrodinger_norm: f64,
    pub relative_error: f64,
    pub heat_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub alpha: f64,
    pub initial_norm: f64,
    pub rows: Vec<ConservationRow>,
    pub max_relative_error: f64,
    pub conserved: bool,
    /// Heat norms non-increasing along the sorted time grid (from `t = 0`).
    pub heat_monotone: bool,
}

/// `‖e^{itL}u₀‖_{W^{α,2}} = ‖u₀‖_{W^{α,2}}` and monotone decay under `e^{-tL}`.
pub fn conservation_check<T: Real>(
    op: &SpectralOperator<T>,
    u0: &DVector<Complex<T>>,
    alpha: f64,
    t_grid: &[f64],
) -> Result<ConservationReport> {
    if alpha < 0.0 {
        return Err(Error::Parameter(format!("alpha = {alpha} must be >= 0")));
    }
    let initial = complex_sobolev_norm(op, u0, alpha)?.to_f64_lossy();
    let mut times = t_grid.to_vec();
    times.sort_by(|a, b| a.total_cmp(b));
    let (re, im) = split_complex(u0);
    let mut rows = Vec::with_capacity(times.len());
    for &t in &times {
        let s = complex_sobolev_norm(op, &op.schrodinger(T::lit(t), u0), alpha)?.to_f64_lossy();
        let heat = join_complex(&op.heat(T::lit(t), &re), &op.heat(T::lit(t), &im));
        rows.push(ConservationRow {
            t,
            schrodinger_norm: s,
            relative_error: if initial > 0.0 {
                (s - initial).abs() / initial
            } else {
                s
            },
            heat_norm: complex_sobolev_norm(op, &heat, alpha)?.to_f64_lossy(),
        });
    }
    let max_relative_error = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let slack = 1e-12 * initial.max(f64::MIN_POSITIVE);
    let mut previous = initial;
    let mut heat_monotone = true;
    for r in &rows {
        heat_monotone &= r.heat_norm <= previous + slack;
        previous = r.heat_norm;
    }
    Ok(ConservationReport {
        alpha,
        initial_norm: initial,
        rows,
        max_relative_error,
        conserved: max_relative_error <= 1e-10,
        heat_monotone,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionRow {
    pub interval: f64,
    pub contraction_factor: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub rows: Vec<ContractionRow>,
    /// Least-squares slope of `log factor` against `log |I|`.
    pub slope: Option<f64>,
    /// Largest `|I|` of the ladder below which every run converged.
    pub threshold: Option<f64>,
}

/// Contraction factor `d_1/d_0` over a ladder of interval lengths.
pub fn contraction_estimate<T: Real>(
    problem: &EvolutionProblem<T>,
    op: &SpectralOperator<T>,
    intervals: &[f64],
) -> Result<ContractionReport> {
    let mut ladder = intervals.to_vec();
    ladder.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::with_capacity(ladder.len());
    for &interval in &ladder {
        let run = duhamel_evolve(&EvolutionProblem { interval, ..problem.clone() }, op)?;
        rows.push(ContractionRow {
            interval,
            contraction_factor: run.contraction_factor,
            converged: run.converged,
            iterations: run.distances.len(),
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.contraction_factor
                .filter(|f| *f > 0.0 && f.is_finite())
                .map(|f| (r.interval.ln(), f.ln()))
        })
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let k = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let threshold = rows
        .iter()
        .take_while(|r| r.converged)
        .last()
        .map(|r| r.interval);
    Ok(ContractionReport {
        rows,
        slope,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_manifold, DiscreteManifold, GraphSpec};
    use crate::spectral::OperatorForm;

    fn cycle(n: usize) -> SpectralOperator<f64> {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::cycle(n)).unwrap();
        SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap()
    }

    fn bump(n: usize, amplitude: f64) -> DVector<f64> {
        DVector::from_fn(n, |i, _| amplitude * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
    }

    #[test]
    fn zero_forcing_is_linear_flow() {
        let op = cycle(12);
        let u0 = bump(12, 1.0);
        let p = EvolutionProblem::real(EvolutionKind::Heat, Nonlinearity::Zero, &u0, 0.7);
        let r = duhamel_evolve(&p, &op).unwrap();
        assert!(r.converged && r.distances == vec![0.0]);
        let exact = op.heat(0.7, &u0);
        let got = r.final_field.map(|z| z.re);
        assert!((got - exact).amax() < 1e-14);
    }

    #[test]
    fn schrodinger_zero_forcing_is_unitary() {
        let op = cycle(10);
        let p = EvolutionProblem::real(EvolutionKind::Schrodinger, Nonlinearity::Zero, &bump(10, 1.0), 3.0);
        let r = duhamel_evolve(&p, &op).unwrap();
        let initial = complex_sobolev_norm(&op, &p.u0, 0.0).unwrap();
        for u in &r.trajectory {
            assert!((complex_sobolev_norm(&op, u, 0.0).unwrap() - initial).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_square_contracts() {
        let op = cycle(16);
        let p = EvolutionProblem::real(EvolutionKind::Heat, Nonlinearity::Square, &bump(16, 0.1), 0.1);
        let r = duhamel_evolve(&p, &op).unwrap();
        assert!(r.converged, "{:?}", r.distances);
        for w in r.distances.windows(2) {
            if w[0] > 1e-13 {
                assert!(w[1] < 0.5 * w[0], "{:?}", r.distances);
            }
        }
        assert!(r.residual.unwrap() < 1e-8);
    }

    #[test]
    fn large_interval_flags_no_contraction() {
        let op = cycle(8);
        let mut p = EvolutionProblem::real(EvolutionKind::Heat, Nonlinearity::Cube, &bump(8, 4.0), 3.0);
        p.picard_max = 15;
        let r = duhamel_evolve(&p, &op).unwrap();
        assert!(r.no_contraction && !r.converged);
    }

    #[test]
    fn rejects_invalid_problems() {
        let op = cycle(8);
        let mut p = EvolutionProblem::real(EvolutionKind::Heat, Nonlinearity::Square, &bump(8, 0.1), 0.1);
        p.tau_nodes = 8;
        assert!(duhamel_evolve(&p, &op).is_err());
        let mut p = EvolutionProblem::real(EvolutionKind::Heat, Nonlinearity::Square, &bump(8, 0.1), 0.1);
        p.u0[0].im = 1.0;
        assert!(duhamel_evolve(&p, &op).is_err());
        let p = EvolutionProblem::real(EvolutionKind::Heat, Nonlinearity::Square, &bump(8, 0.1), 0.0);
        assert!(duhamel_evolve(&p, &op).is_err());
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let (nodes, w) = chebyshev_lobatto(6, 2.0);
        let values: Vec<f64> = nodes.iter().map(|&s| s * s * s - s).collect();
        for t in [0.13, 0.9, 1.77] {
            let ell = barycentric(&nodes, &w, t);
            let p: f64 = ell.iter().zip(&values).map(|(l, v)| l * v).sum();
            assert!((p - (t * t * t - t)).abs() < 1e-13);
        }
    }
}
