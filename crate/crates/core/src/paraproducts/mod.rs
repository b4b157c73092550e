//! Semigroup paraproducts, the product decomposition and Leibniz estimates.

mod quadrature;
mod symbols;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use quadrature::TQuadrature;
pub use symbols::{calderon_constant, CalderonConstants, SymbolFamily, SymbolKind};

use crate::ensemble::{trial_field, FieldKind};
use crate::error::{Error, Result};
use crate::geometry::{gradient, DiscreteManifold};
use crate::norms::lebesgue_norm;
use crate::scalar::{pairwise_sum_vectors, Real};
use crate::spectral::{join_complex, split_complex, SpectralOperator};

/// Relative truncation level above which a paraproduct carries a warning.
pub const TAIL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `Π(f, g) = ∫ ψ(tL)[φ(tL)f · φ(tL)g] dt/t`.
    Hh,
    /// `Π_g(f) = ∫ φ(tL)[ψ(tL)f · φ(tL)g] dt/t`.
    Lh,
    /// `Π_f(g) = ∫ φ(tL)[φ(tL)f · ψ(tL)g] dt/t`.
    Hl,
}

impl Flavor {
    pub const ALL: [Flavor; 3] = [Flavor::Hh, Flavor::Lh, Flavor::Hl];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Hh => "hh",
            Flavor::Lh => "lh",
            Flavor::Hl => "hl",
        })
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hh" => Ok(Flavor::Hh),
            "lh" => Ok(Flavor::Lh),
            "hl" => Ok(Flavor::Hl),
            other => Err(Error::Parse(format!("unknown paraproduct flavor `{other}`"))),
        }
    }
}

/// Relative mass of the Calderón integral lost outside `[t_min, t_max]`,
/// worst case over the spectrum.
pub fn tail_estimate<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
) -> f64 {
    let Some(lambda_min) = op.lambda_min_positive() else {
        return 0.0;
    };
    let low = family.calderon_hat_inv() - family.zeta(quad.t_min() * op.lambda_max());
    let high = family.zeta(quad.t_max() * lambda_min);
    ((low + high) * family.calderon_hat()).to_f64_lossy()
}

fn quadrature_warning<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
) -> Option<String> {
    let tail = tail_estimate(op, family, quad);
    (tail > TAIL_TOLERANCE).then(|| {
        format!(
            "t-range [{:e}, {:e}] truncates {tail:.3e} of the reproducing mass",
            quad.t_min().to_f64_lossy(),
            quad.t_max().to_f64_lossy()
        )
    })
}

#[derive(Debug, Clone)]
pub struct Paraproduct<T> {
    pub field: DVector<T>,
    pub warning: Option<String>,
}

/// All requested flavors in one pass over the quadrature nodes, accumulated
/// in spectral coordinates. Each node costs seven dense transforms at most.
fn paraproduct_terms<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    want: [bool; 3],
) -> [Option<DVector<T>>; 3] {
    let n = op.dim();
    let cf = op.coefficients(f);
    let cg = op.coefficients(g);
    let eig = op.eigenvalues();
    let need_phi_f = want[0] || want[2];
    let need_phi_g = want[0] || want[1];

    let per_node: Vec<[Option<DVector<T>>; 3]> = quad
        .nodes()
        .par_iter()
        .zip(quad.weights().par_iter())
        .map(|(&t, &w)| {
            let phi = eig.map(|l| family.phi(t * l));
            let psi = eig.map(|l| family.psi(t * l));
            let pf = need_phi_f.then(|| op.synthesize(&cf.component_mul(&phi)));
            let pg = need_phi_g.then(|| op.synthesize(&cg.component_mul(&phi)));
            let outer = |inner: DVector<T>, symbol: &DVector<T>| {
                op.coefficients(&inner).component_mul(symbol) * w
            };
            let hh = want[0].then(|| {
                outer(
                    pf.as_ref().unwrap().component_mul(pg.as_ref().unwrap()),
                    &psi,
                )
            });
            let lh = want[1].then(|| {
                let qf = op.synthesize(&cf.component_mul(&psi));
                outer(qf.component_mul(pg.as_ref().unwrap()), &phi)
            });
            let hl = want[2].then(|| {
                let qg = op.synthesize(&cg.component_mul(&psi));
                outer(pf.as_ref().unwrap().component_mul(&qg), &phi)
            });
            [hh, lh, hl]
        })
        .collect();

    let mut out: [Option<DVector<T>>; 3] = [None, None, None];
    for (slot, item) in out.iter_mut().enumerate() {
        if want[slot] {
            let parts: Vec<DVector<T>> = per_node
                .iter()
                .map(|terms| terms[slot].clone().expect("requested term"))
                .collect();
            *item = Some(op.synthesize(&pairwise_sum_vectors(&parts, n)));
        }
    }
    out
}

fn check_pair<T: Real>(op: &SpectralOperator<T>, f: &DVector<T>, g: &DVector<T>) -> Result<()> {
    for v in [f, g] {
        if v.len() != op.dim() {
            return Err(Error::FieldLength {
                expected: op.dim(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// One paraproduct flavor of real fields.
pub fn paraproduct<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    flavor: Flavor,
) -> Result<Paraproduct<T>> {
    check_pair(op, f, g)?;
    let mut want = [false; 3];
    want[flavor.slot()] = true;
    let [a, b, c] = paraproduct_terms(op, family, quad, f, g, want);
    Ok(Paraproduct {
        field: a.or(b).or(c).expect("one flavor requested"),
        warning: quadrature_warning(op, family, quad),
    })
}

/// Complex fields, by bilinearity over real and imaginary parts.
pub fn paraproduct_complex<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<Complex<T>>,
    g: &DVector<Complex<T>>,
    flavor: Flavor,
) -> Result<(DVector<Complex<T>>, Option<String>)> {
    let (fr, fi) = split_complex(f);
    let (gr, gi) = split_complex(g);
    let run = |a: &DVector<T>, b: &DVector<T>| paraproduct(op, family, quad, a, b, flavor);
    let rr = run(&fr, &gr)?;
    let ii = run(&fi, &gi)?;
    let ri = run(&fr, &gi)?;
    let ir = run(&fi, &gr)?;
    Ok((
        join_complex(&(rr.field - ii.field), &(ri.field + ir.field)),
        rr.warning,
    ))
}

/// `K` in `fg = K (Π(f,g) + Π_g(f) + Π_f(g))` for kernel-orthogonal `f, g`.
///
/// Follows from `F(t) = φ(tL)[φ(tL)f · φ(tL)g]`: `t F'(t)` is the sum of
/// the three integrands and `F(∞) − F(0) = −φ(0)³ fg = ĉ^{-3} fg`.
pub fn product_normalization<T: Real>(family: &SymbolFamily<T>) -> T {
    let c = family.calderon_hat();
    c * c * c
}

#[derive(Debug, Clone)]
pub struct Decomposition<T> {
    /// `Π(f⊥, g⊥)`.
    pub pi: DVector<T>,
    /// `Π_{g⊥}(f⊥)`.
    pub pi_g: DVector<T>,
    /// `Π_{f⊥}(g⊥)`.
    pub pi_f: DVector<T>,
    pub kernel_correction: DVector<T>,
    pub normalization: T,
    pub residual: DVector<T>,
    /// `‖r‖₂ / ‖fg‖₂` (zero when `fg = 0`).
    pub relative_residual: T,
    pub warning: Option<String>,
}

/// `fg = K (Π + Π_g + Π_f) + mean terms + r` with paraproducts acting on the
/// kernel-orthogonal parts.
pub fn product_decomposition<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<T>,
    g: &DVector<T>,
) -> Result<Decomposition<T>> {
    check_pair(op, f, g)?;
    let f_perp = op.project_out_kernel(f);
    let g_perp = op.project_out_kernel(g);
    let f_mean = f - &f_perp;
    let g_mean = g - &g_perp;
    let kernel_correction =
        f_mean.component_mul(g) + f.component_mul(&g_mean) - f_mean.component_mul(&g_mean);

    let [pi, pi_g, pi_f] = paraproduct_terms(op, family, quad, &f_perp, &g_perp, [true; 3]);
    let (pi, pi_g, pi_f) = (pi.unwrap(), pi_g.unwrap(), pi_f.unwrap());
    let normalization = product_normalization(family);
    let product = f.component_mul(g);
    let residual = &product - (&pi + &pi_g + &pi_f) * normalization - &kernel_correction;
    let denom = op.l2_norm(&product);
    let relative_residual = if denom == T::zero() {
        T::zero()
    } else {
        op.l2_norm(&residual) / denom
    };
    Ok(Decomposition {
        pi,
        pi_g,
        pi_f,
        kernel_correction,
        normalization,
        residual,
        relative_residual,
        warning: quadrature_warning(op, family, quad),
    })
}

/// `ĉ ∫ ψ(tL) f dt/t`; equals the kernel-orthogonal part of `f` up to
/// quadrature error.
pub fn reconstruct<T: Real>(
    op: &SpectralOperator<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<T>,
) -> Result<DVector<T>> {
    let symbol = op.symbol_values(|l| {
        family.calderon_hat() * quad.integrate(|t| family.psi(t * l))
    })?;
    Ok(op.apply_diagonal(&symbol, f))
}

/// `‖L^β Π_g(f)‖_r / (‖L^β f‖_p ‖g‖_q)` with `1/r = 1/p + 1/q`, evaluated via
/// the derived symbols `z^β φ(z)` in the outer slot.
#[allow(clippy::too_many_arguments)]
pub fn paraproduct_bound_ratio<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    beta: f64,
    p: f64,
    q: f64,
) -> Result<Option<f64>> {
    let r = holder_target(p, q)?;
    let f_perp = op.project_out_kernel(f);
    let pi = paraproduct(op, family, quad, &f_perp, g, Flavor::Lh)?.field;
    let lhs = lebesgue_norm(manifold, &op.fractional_power(T::lit(beta), &pi, false)?, r);
    let rhs = lebesgue_norm(manifold, &op.fractional_power(T::lit(beta), &f_perp, false)?, p)
        * lebesgue_norm(manifold, g, q);
    Ok((rhs > T::zero()).then(|| (lhs / rhs).to_f64_lossy()))
}

fn holder_target(p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::HolderRelation(format!("exponents {p}, {q} must be >= 1")));
    }
    let inv = 1.0 / p + 1.0 / q;
    if inv > 1.0 {
        return Err(Error::HolderRelation(format!(
            "1/{p} + 1/{q} exceeds 1"
        )));
    }
    Ok(1.0 / inv)
}

/// Exponents of `‖fg‖ ≲ ‖·‖_{p1}‖·‖_{q1} + ‖·‖_{p2}‖·‖_{q2}` in `L^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponents {
    pub r: f64,
    pub p1: f64,
    pub q1: f64,
    pub p2: f64,
    pub q2: f64,
}

impl HolderExponents {
    /// `r = p1 = q2 = p`, `q1 = p2 = ∞`.
    pub fn algebra(p: f64) -> Self {
        Self {
            r: p,
            p1: p,
            q1: f64::INFINITY,
            p2: f64::INFINITY,
            q2: p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.r, self.p1, self.q1, self.p2, self.q2];
        if all.iter().any(|&e| !(e >= 1.0)) {
            return Err(Error::HolderRelation(format!(
                "all exponents must be >= 1, got {all:?}"
            )));
        }
        for (p, q) in [(self.p1, self.q1), (self.p2, self.q2)] {
            let gap = 1.0 / self.r - 1.0 / p - 1.0 / q;
            if gap.abs() > 1e-12 {
                return Err(Error::HolderRelation(format!(
                    "1/{} != 1/{p} + 1/{q}",
                    self.r
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantTerm {
    HighHigh,
    LowHigh,
    HighLow,
    Mean,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermBreakdown {
    /// `‖L^{α/m}·‖_r` of `KΠ`, `KΠ_g(f)`, `KΠ_f(g)` and the mean terms.
    pub norms: [f64; 4],
    pub dominant: DominantTerm,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientRoute {
    /// `‖∇(fg)‖_r / (‖∇f‖_{p1}‖g‖_{q1} + ‖f‖_{p2}‖∇g‖_{q2})`.
    pub gradient_ratio: f64,
    /// Largest `‖∇L^{-1/m}h‖_r / ‖h‖_r` over `h ∈ {f⊥, g⊥, (fg)⊥}`.
    pub riesz_ratio: f64,
    /// Largest `‖L^{1/m}h‖_r / ‖∇h‖_r` over the same fields.
    pub reverse_riesz_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeibnizTrial {
    pub trial: u64,
    pub f_field: FieldKind,
    pub g_field: FieldKind,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<TermBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientRoute>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeibnizReport {
    pub alpha: f64,
    pub exponents: HolderExponents,
    pub per_trial: Vec<LeibnizTrial>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gradient_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LeibnizRequest {
    pub alpha: f64,
    pub exponents: HolderExponents,
    pub trials: usize,
    pub seed: u64,
}

/// `‖L^{α/m}(fg)‖_r / (‖L^{α/m}f‖_{p1}‖g‖_{q1} + ‖f‖_{p2}‖L^{α/m}g‖_{q2})`
/// for one pair; `None` when the right side vanishes.
pub fn leibniz_ratio<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    alpha: f64,
    e: &HolderExponents,
) -> Result<Option<(f64, f64)>> {
    let beta = T::lit(alpha) / op.order();
    let norm = |v: &DVector<T>, p: f64| lebesgue_norm(manifold, v, p);
    let lf = op.fractional_power(beta, f, false)?;
    let lg = op.fractional_power(beta, g, false)?;
    let lfg = op.fractional_power(beta, &f.component_mul(g), false)?;
    let lhs = norm(&lfg, e.r);
    let rhs = norm(&lf, e.p1) * norm(g, e.q1) + norm(f, e.p2) * norm(&lg, e.q2);
    Ok((rhs > T::zero()).then(|| (lhs.to_f64_lossy(), rhs.to_f64_lossy())))
}

fn gradient_route<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    e: &HolderExponents,
) -> Result<GradientRoute> {
    let norm = |v: &DVector<T>, p: f64| lebesgue_norm(manifold, v, p);
    let fg = f.component_mul(g);
    let num = norm(&gradient(manifold, &fg), e.r);
    let den = norm(&gradient(manifold, f), e.p1) * norm(g, e.q1)
        + norm(f, e.p2) * norm(&gradient(manifold, g), e.q2);
    let gradient_ratio = if den > T::zero() {
        (num / den).to_f64_lossy()
    } else {
        0.0
    };
    let inv = -T::one() / op.order();
    let mut riesz_ratio = 0.0f64;
    let mut reverse_riesz_ratio = 0.0f64;
    for h in [f, g, &fg] {
        let h = op.project_out_kernel(h);
        let hn = norm(&h, e.r);
        let grad = norm(&gradient(manifold, &h), e.r);
        if hn > T::zero() {
            let rh = gradient(manifold, &op.fractional_power(inv, &h, false)?);
            riesz_ratio = riesz_ratio.max((norm(&rh, e.r) / hn).to_f64_lossy());
        }
        if grad > T::zero() {
            let lh = op.fractional_power(-inv, &h, false)?;
            reverse_riesz_ratio = reverse_riesz_ratio.max((norm(&lh, e.r) / grad).to_f64_lossy());
        }
    }
    Ok(GradientRoute {
        gradient_ratio,
        riesz_ratio,
        reverse_riesz_ratio,
    })
}

fn breakdown<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    family: &SymbolFamily<T>,
    quad: &TQuadrature<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    alpha: f64,
    r: f64,
) -> Result<TermBreakdown> {
    let d = product_decomposition(op, family, quad, f, g)?;
    let beta = T::lit(alpha) / op.order();
    let k = d.normalization;
    let mut norms = [0.0; 4];
    for (slot, term) in [&d.pi * k, &d.pi_g * k, &d.pi_f * k, d.kernel_correction]
        .iter()
        .enumerate()
    {
        norms[slot] =
            lebesgue_norm(manifold, &op.fractional_power(beta, term, false)?, r).to_f64_lossy();
    }
    let best = (0..4).fold(0, |b, i| if norms[i] > norms[b] { i } else { b });
    let dominant = [
        DominantTerm::HighHigh,
        DominantTerm::LowHigh,
        DominantTerm::HighLow,
        DominantTerm::Mean,
    ][best];
    Ok(TermBreakdown { norms, dominant })
}

/// Empirical Leibniz constants over seeded trial pairs. Trials `2i` and
/// `2i + 1` of the ensemble give `f` and `g`. With `quad` supplied, each trial
/// also records which paraproduct term dominates; `α = 1` adds the
/// gradient/Riesz route.
pub fn leibniz_report<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    family: &SymbolFamily<T>,
    quad: Option<&TQuadrature<T>>,
    req: &LeibnizRequest,
) -> Result<LeibnizReport> {
    if !(0.0..=1.0).contains(&req.alpha) {
        return Err(Error::Parameter(format!(
            "regularity {} must lie in [0, 1]",
            req.alpha
        )));
    }
    req.exponents.validate()?;
    let per_trial: Vec<LeibnizTrial> = (0..req.trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Option<LeibnizTrial>> {
            let (f_field, f) = trial_field(op, manifold, req.seed, 2 * trial);
            let (g_field, g) = trial_field(op, manifold, req.seed, 2 * trial + 1);
            let Some((lhs, rhs)) = leibniz_ratio(op, manifold, &f, &g, req.alpha, &req.exponents)?
            else {
                return Ok(None);
            };
            let breakdown = quad
                .map(|q| breakdown(op, manifold, family, q, &f, &g, req.alpha, req.exponents.r))
                .transpose()?;
            let gradient = (req.alpha == 1.0)
                .then(|| gradient_route(op, manifold, &f, &g, &req.exponents))
                .transpose()?;
            Ok(Some(LeibnizTrial {
                trial,
                f_field,
                g_field,
                lhs,
                rhs,
                ratio: lhs / rhs,
                breakdown,
                gradient,
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let ratios = per_trial.iter().map(|t| t.ratio);
    Ok(LeibnizReport {
        alpha: req.alpha,
        exponents: req.exponents,
        max_ratio: ratios.clone().fold(0.0, f64::max),
        min_ratio: ratios.fold(f64::INFINITY, f64::min),
        max_gradient_ratio: (req.alpha == 1.0).then(|| {
            per_trial
                .iter()
                .filter_map(|t| t.gradient.as_ref().map(|g| g.gradient_ratio))
                .fold(0.0, f64::max)
        }),
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

    fn quad(nodes: usize) -> TQuadrature<f64> {
        TQuadrature::log_midpoint(1e-6, 1e6, nodes).unwrap()
    }

    #[test]
    fn zero_and_constant_inputs() {
        let (m, op) = setup(GraphSpec::cycle(8));
        let fam = SymbolFamily::new(5).unwrap();
        let q = quad(100);
        let (_, f) = trial_field(&op, &m, 1, 0);
        let zero = DVector::zeros(8);
        for flavor in Flavor::ALL {
            let out = paraproduct(&op, &fam, &q, &f, &zero, flavor).unwrap();
            assert_eq!(out.field.amax(), 0.0);
        }
        let ones = DVector::from_element(8, 1.0);
        let lh = paraproduct(&op, &fam, &q, &ones, &f, Flavor::Lh).unwrap();
        assert!(lh.field.amax() < 1e-13);
    }

    #[test]
    fn path2_high_high_vanishes() {
        let (_, op) = setup(GraphSpec::path(2));
        let fam = SymbolFamily::new(3).unwrap();
        let f = DVector::from_vec(vec![1.0, -1.0]);
        let out = paraproduct(&op, &fam, &quad(400), &f, &f, Flavor::Hh).unwrap();
        assert!(out.field.amax() < 1e-14);
        assert!(out.warning.is_none());
    }

    #[test]
    fn symmetry_and_role_swap() {
        let (m, op) = setup(GraphSpec::cycle(12));
        let fam = SymbolFamily::new(5).unwrap();
        let q = quad(120);
        let (_, f) = trial_field(&op, &m, 9, 0);
        let (_, g) = trial_field(&op, &m, 9, 1);
        let a = paraproduct(&op, &fam, &q, &f, &g, Flavor::Hh).unwrap().field;
        let b = paraproduct(&op, &fam, &q, &g, &f, Flavor::Hh).unwrap().field;
        assert!((a - b).amax() < 1e-13);
        let lh = paraproduct(&op, &fam, &q, &f, &g, Flavor::Lh).unwrap().field;
        let hl = paraproduct(&op, &fam, &q, &g, &f, Flavor::Hl).unwrap().field;
        assert!((lh - hl).amax() < 1e-13);
    }

    #[test]
    fn decomposition_with_constant_factor() {
        let (m, op) = setup(GraphSpec::cycle(16));
        let fam = SymbolFamily::new(5).unwrap();
        let (_, g) = trial_field(&op, &m, 2, 1);
        let ones = DVector::from_element(16, 1.0);
        let d = product_decomposition(&op, &fam, &quad(400), &ones, &g).unwrap();
        assert!(d.relative_residual < 1e-6);
    }

    #[test]
    fn narrow_range_warns() {
        let (_, op) = setup(GraphSpec::cycle(16));
        let fam = SymbolFamily::new(5).unwrap();
        let q = TQuadrature::log_midpoint(0.1, 10.0, 50).unwrap();
        let f = DVector::from_fn(16, |i, _| (i as f64).sin());
        let out = paraproduct(&op, &fam, &q, &f, &f, Flavor::Hh).unwrap();
        assert!(out.warning.is_some());
        assert!(tail_estimate(&op, &fam, &quad(400)) < 1e-12);
    }

    #[test]
    fn holder_validation() {
        assert!(HolderExponents::algebra(2.0).validate().is_ok());
        let bad = HolderExponents {
            r: 2.0,
            p1: 2.0,
            q1: 2.0,
            p2: 2.0,
            q2: f64::INFINITY,
        };
        assert!(matches!(bad.validate(), Err(Error::HolderRelation(_))));
    }

    #[test]
    fn unit_factor_and_alpha_zero() {
        let (m, op) = setup(GraphSpec::cycle(16));
        let e = HolderExponents::algebra(2.0);
        let (_, f) = trial_field(&op, &m, 4, 0);
        let ones = DVector::from_element(16, 1.0);
        let (lhs, rhs) = leibniz_ratio(&op, &m, &f, &ones, 0.5, &e).unwrap().unwrap();
        let lf = lebesgue_norm(&m, &op.fractional_power(0.25, &f, false).unwrap(), 2.0);
        assert!((lhs - lf).abs() < 1e-12 && rhs >= lf);

        let fam = SymbolFamily::new(5).unwrap();
        let req = LeibnizRequest {
            alpha: 0.0,
            exponents: e,
            trials: 10,
            seed: 4,
        };
        let report = leibniz_report(&op, &m, &fam, None, &req).unwrap();
        assert!(report.max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn gradient_route_at_alpha_one() {
        let (m, op) = setup(GraphSpec::cycle(16));
        let fam = SymbolFamily::new(5).unwrap();
        let req = LeibnizRequest {
            alpha: 1.0,
            exponents: HolderExponents::algebra(2.0),
            trials: 4,
            seed: 1,
        };
        let report = leibniz_report(&op, &m, &fam, Some(&quad(100)), &req).unwrap();
        let g = report.max_gradient_ratio.unwrap();
        assert!(g > 0.0 && g <= 1.0 + 1e-12, "{g}");
        assert!(report.per_trial.iter().all(|t| t.breakdown.is_some()));
    }
}
