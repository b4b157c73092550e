//! Strichartz-type square functionals and the inequalities built on them.

use std::fmt;
use std::str::FromStr;

use nalgebra::{ComplexField, DVector};
use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{trial_field, FieldKind};
use crate::error::{Error, Result};
use crate::geometry::DiscreteManifold;
use crate::norms::{lebesgue_norm, sobolev_norm};
use crate::scalar::Real;
use crate::spectral::SpectralOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SFuncRequest {
    pub alpha: f64,
    pub rho: f64,
    /// Integrate over `r ∈ (0, 1)` only.
    pub local: bool,
}

impl Default for SFuncRequest {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            rho: 1.0,
            local: false,
        }
    }
}

impl SFuncRequest {
    pub fn new(alpha: f64, rho: f64, local: bool) -> Result<Self> {
        let req = Self { alpha, rho, local };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter(format!(
                "alpha = {} must lie in (0, 1)",
                self.alpha
            )));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return Err(Error::Parameter(format!("rho = {} must be >= 1", self.rho)));
        }
        Ok(())
    }
}

/// `S_α^ρ f(x) = (∫ [r^{-α} (avg_{B(x,r)} |f − f(x)|^ρ)^{1/ρ}]² dr/r)^{1/2}`.
///
/// Balls only change at the distances from `x`, so the radial integral is a
/// finite sum of closed-form pieces.
pub fn strichartz_functional<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    req: &SFuncRequest,
) -> Result<DVector<T>> {
    strichartz_functional_refined(manifold, f, req, &[])
}

/// Same as [`strichartz_functional`] with `extra` radii inserted as
/// additional integration breakpoints. The result must not depend on them.
pub fn strichartz_functional_refined<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    req: &SFuncRequest,
    extra: &[T],
) -> Result<DVector<T>> {
    req.validate()?;
    manifold.check_field(f)?;
    let mut extra: Vec<T> = extra.iter().copied().filter(|&r| r > T::zero()).collect();
    extra.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    let values: Vec<T> = (0..manifold.vertex_count())
        .into_par_iter()
        .map(|x| functional_at(manifold, f, req, x, &extra))
        .collect();
    Ok(DVector::from_vec(values))
}

fn functional_at<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    req: &SFuncRequest,
    x: usize,
    extra: &[T],
) -> T {
    let idx = manifold.ball_index(x);
    let two_alpha = T::lit(2.0 * req.alpha);
    let rho = T::lit(req.rho);
    let exponent = T::lit(2.0 / req.rho);
    let cap = if req.local { Some(T::one()) } else { None };
    let radial = |a: T, b: Option<T>| -> T {
        // ∫_a^b r^{-2α-1} dr, b = ∞ allowed
        let b = match (b, cap) {
            (Some(b), Some(c)) => Some(b.min(c)),
            (None, Some(c)) => Some(c),
            (b, None) => b,
        };
        match b {
            Some(b) if b <= a => T::zero(),
            Some(b) => (a.powf(-two_alpha) - b.powf(-two_alpha)) / two_alpha,
            None => a.powf(-two_alpha) / two_alpha,
        }
    };

    let mut breaks: Vec<T> = idx.dist.clone();
    breaks.extend_from_slice(extra);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    breaks.dedup();

    let fx = f[x];
    let mut oscillation = T::zero();
    let mut members = 0;
    let mut total = T::zero();
    for (k, &b) in breaks.iter().enumerate() {
        while members < idx.dist.len() && idx.dist[members] <= b {
            let y = idx.order[members];
            oscillation += (f[y] - fx).abs().powf(rho) * manifold.measure()[y];
            members += 1;
        }
        if b <= T::zero() || oscillation == T::zero() {
            continue;
        }
        let average = oscillation / idx.prefix_measure[members - 1];
        let piece = radial(b, breaks.get(k + 1).copied());
        if piece > T::zero() {
            total += average.powf(exponent) * piece;
        }
    }
    total.sqrt()
}

/// Outcome of a pointwise inequality `lhs(x) ≤ rhs(x) + tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub holds: bool,
    /// `max_x (lhs − rhs)`; negative when the inequality is strict everywhere.
    pub max_violation: f64,
    /// `min_x (rhs − lhs)`.
    pub min_slack: f64,
    pub tolerance: f64,
}

pub fn pointwise_check<T: Real>(lhs: &DVector<T>, rhs: &DVector<T>, tolerance: f64) -> InequalityCheck {
    let max_violation = lhs
        .iter()
        .zip(rhs.iter())
        .map(|(&a, &b)| (a - b).to_f64_lossy())
        .fold(f64::NEG_INFINITY, f64::max);
    InequalityCheck {
        holds: max_violation <= tolerance,
        max_violation,
        min_slack: -max_violation,
        tolerance,
    }
}

/// `S^{ρ1} f ≤ S^{ρ2} f` pointwise for `ρ1 ≤ ρ2`.
pub fn rho_monotonicity_check<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    alpha: f64,
    rho1: f64,
    rho2: f64,
) -> Result<InequalityCheck> {
    if !(1.0 <= rho1 && rho1 <= rho2) {
        return Err(Error::Parameter(format!(
            "need 1 <= rho1 <= rho2, got {rho1}, {rho2}"
        )));
    }
    let s1 = strichartz_functional(manifold, f, &SFuncRequest::new(alpha, rho1, false)?)?;
    let s2 = strichartz_functional(manifold, f, &SFuncRequest::new(alpha, rho2, false)?)?;
    Ok(pointwise_check(&s1, &s2, 1e-12))
}

/// `S(fg) ≤ ‖g‖_∞ S(f) + ‖f‖_∞ S(g)` pointwise.
pub fn pointwise_subadditivity_check<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    req: &SFuncRequest,
) -> Result<InequalityCheck> {
    let sf = strichartz_functional(manifold, f, req)?;
    let sg = strichartz_functional(manifold, g, req)?;
    let sfg = strichartz_functional(manifold, &f.component_mul(g), req)?;
    let rhs = sf * g.amax() + sg * f.amax();
    Ok(pointwise_check(&sfg, &rhs, 1e-10))
}

/// `S(f + g) ≤ S(f) + S(g)` pointwise.
pub fn minkowski_check<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    g: &DVector<T>,
    req: &SFuncRequest,
) -> Result<InequalityCheck> {
    let sf = strichartz_functional(manifold, f, req)?;
    let sg = strichartz_functional(manifold, g, req)?;
    let sum = strichartz_functional(manifold, &(f + g), req)?;
    Ok(pointwise_check(&sum, &(sf + sg), 1e-10))
}

/// `S(F∘f) ≤ Lip(F) S(f)` pointwise, with the Lipschitz constant certified
/// on `[-‖f‖_∞, ‖f‖_∞]`.
pub fn lipschitz_domination_check<T: Real>(
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    nonlinearity: Nonlinearity,
    req: &SFuncRequest,
) -> Result<InequalityCheck> {
    let lip = T::lit(nonlinearity.lipschitz(f.amax().to_f64_lossy()));
    let sf = strichartz_functional(manifold, f, req)?;
    let sff = strichartz_functional(manifold, &nonlinearity.apply_field(f), req)?;
    Ok(pointwise_check(&sff, &(sf * lip), 1e-10))
}

/// Built-in nonlinearities with Lipschitz certificates. Constants of the
/// polynomial ones depend on the radius `R` of the range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Zero,
    Identity,
    Abs,
    Sin,
    Tanh,
    /// `u²`, Lipschitz `2R`.
    Square,
    /// `u³`, Lipschitz `3R²`.
    Cube,
    /// `|u|²u`, Lipschitz `3R²` on `ℂ = ℝ²`.
    CubicModulus,
}

impl Nonlinearity {
    pub const ALL: [Nonlinearity; 8] = [
        Nonlinearity::Zero,
        Nonlinearity::Identity,
        Nonlinearity::Abs,
        Nonlinearity::Sin,
        Nonlinearity::Tanh,
        Nonlinearity::Square,
        Nonlinearity::Cube,
        Nonlinearity::CubicModulus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Identity => "identity",
            Nonlinearity::Abs => "abs",
            Nonlinearity::Sin => "sin",
            Nonlinearity::Tanh => "tanh",
            Nonlinearity::Square => "square",
            Nonlinearity::Cube => "cube",
            Nonlinearity::CubicModulus => "cubic_modulus",
        }
    }

    /// Lipschitz constant on the ball of radius `radius`.
    pub fn lipschitz(self, radius: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Identity | Nonlinearity::Abs | Nonlinearity::Sin | Nonlinearity::Tanh => {
                1.0
            }
            Nonlinearity::Square => 2.0 * radius,
            Nonlinearity::Cube | Nonlinearity::CubicModulus => 3.0 * radius * radius,
        }
    }

    pub fn apply<T: Real>(self, u: T) -> T {
        match self {
            Nonlinearity::Zero => T::zero(),
            Nonlinearity::Identity => u,
            Nonlinearity::Abs => u.abs(),
            Nonlinearity::Sin => u.sin(),
            Nonlinearity::Tanh => u.tanh(),
            Nonlinearity::Square => u * u,
            Nonlinearity::Cube => u * u * u,
            Nonlinearity::CubicModulus => u.abs() * u.abs() * u,
        }
    }

    /// Complex extension: holomorphic for the analytic ones, `|u|²u` and `|u|`
    /// act on `ℂ = ℝ²` directly.
    pub fn apply_complex<T: Real>(self, u: Complex<T>) -> Complex<T> {
        match self {
            Nonlinearity::Zero => Complex::new(T::zero(), T::zero()),
            Nonlinearity::Identity => u,
            Nonlinearity::Abs => Complex::new(ComplexField::modulus(u), T::zero()),
            Nonlinearity::Sin => ComplexField::sin(u),
            Nonlinearity::Tanh => ComplexField::tanh(u),
            Nonlinearity::Square => u * u,
            Nonlinearity::Cube => u * u * u,
            Nonlinearity::CubicModulus => u * ComplexField::modulus_squared(u),
        }
    }

    pub fn apply_field<T: Real>(self, f: &DVector<T>) -> DVector<T> {
        f.map(|v| self.apply(v))
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        Ok(match key.to_ascii_lowercase().as_str() {
            "zero" | "0" => Nonlinearity::Zero,
            "identity" | "id" | "u" => Nonlinearity::Identity,
            "abs" | "|u|" => Nonlinearity::Abs,
            "sin" => Nonlinearity::Sin,
            "tanh" => Nonlinearity::Tanh,
            "square" | "u^2" | "u2" => Nonlinearity::Square,
            "cube" | "u^3" | "u3" => Nonlinearity::Cube,
            "cubic_modulus" | "|u|^2u" | "|u|2u" => Nonlinearity::CubicModulus,
            _ => return Err(Error::UncertifiedNonlinearity(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationTrial {
    pub trial: u64,
    pub field: FieldKind,
    /// `‖S_α^ρ f‖_p / ‖L^{α/m} f‖_p`.
    pub ratio: f64,
    /// `(‖S^{loc} f‖_p + ‖f‖_p) / (‖L^{α/m} f‖_p + ‖f‖_p)`.
    pub local_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacterizationReport {
    pub alpha: f64,
    pub p: f64,
    pub rho: f64,
    /// `ρ < min(2, p)` fails.
    pub hypothesis_violated: bool,
    pub per_trial: Vec<CharacterizationTrial>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub min_local_ratio: f64,
    pub max_local_ratio: f64,
}

/// Empirical constants `c_1, c_2` relating `‖S_α^ρ f‖_p` and `‖L^{α/m} f‖_p`.
#[allow(clippy::too_many_arguments)]
pub fn characterization_report<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    alpha: f64,
    p: f64,
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<CharacterizationReport> {
    let global = SFuncRequest::new(alpha, rho, false)?;
    let local = SFuncRequest { local: true, ..global };
    let per_trial: Vec<CharacterizationTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Option<CharacterizationTrial>> {
            let (field, f) = trial_field(op, manifold, seed, trial);
            let f_perp = op.project_out_kernel(&f);
            let seminorm = sobolev_norm(op, manifold, &f_perp, alpha, p, true)?;
            if seminorm <= T::lit(T::TOL) * lebesgue_norm(manifold, &f, p) {
                return Ok(None);
            }
            let s = lebesgue_norm(manifold, &strichartz_functional(manifold, &f_perp, &global)?, p);
            let lp = lebesgue_norm(manifold, &f, p);
            let s_loc = lebesgue_norm(manifold, &strichartz_functional(manifold, &f, &local)?, p);
            Ok(Some(CharacterizationTrial {
                trial,
                field,
                ratio: (s / seminorm).to_f64_lossy(),
                local_ratio: ((s_loc + lp) / (seminorm + lp)).to_f64_lossy(),
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let fold = |sel: fn(&CharacterizationTrial) -> f64, max: bool| {
        per_trial.iter().map(sel).fold(
            if max { 0.0 } else { f64::INFINITY },
            if max { f64::max } else { f64::min },
        )
    };
    Ok(CharacterizationReport {
        alpha,
        p,
        rho,
        hypothesis_violated: !(rho < p.min(2.0)),
        min_ratio: fold(|t| t.ratio, false),
        max_ratio: fold(|t| t.ratio, true),
        min_local_ratio: fold(|t| t.local_ratio, false),
        max_local_ratio: fold(|t| t.local_ratio, true),
        per_trial,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityTrial {
    pub trial: u64,
    pub field: FieldKind,
    pub lipschitz: f64,
    pub domination: InequalityCheck,
    /// `‖F(f)‖_{W^{α,p}} / ‖f‖_{W^{α,p}}` (non-homogeneous norms).
    pub norm_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityReport {
    pub nonlinearity: Nonlinearity,
    pub alpha: f64,
    pub p: f64,
    pub rho: f64,
    pub per_trial: Vec<NonlinearityTrial>,
    pub domination_holds: bool,
    pub max_violation: f64,
    pub max_norm_ratio: f64,
}

/// Pointwise `S(F∘f) ≤ Lip(F) S(f)` and the norm-level constant of `f ↦ F(f)`.
#[allow(clippy::too_many_arguments)]
pub fn nonlinearity_report<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    nonlinearity: Nonlinearity,
    alpha: f64,
    p: f64,
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<NonlinearityReport> {
    let req = SFuncRequest::new(alpha, rho, false)?;
    let per_trial: Vec<NonlinearityTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Option<NonlinearityTrial>> {
            let (field, f) = trial_field(op, manifold, seed, trial);
            let norm = sobolev_norm(op, manifold, &f, alpha, p, false)?;
            if norm == T::zero() {
                return Ok(None);
            }
            let image = sobolev_norm(op, manifold, &nonlinearity.apply_field(&f), alpha, p, false)?;
            Ok(Some(NonlinearityTrial {
                trial,
                field,
                lipschitz: nonlinearity.lipschitz(f.amax().to_f64_lossy()),
                domination: lipschitz_domination_check(manifold, &f, nonlinearity, &req)?,
                norm_ratio: (image / norm).to_f64_lossy(),
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(NonlinearityReport {
        nonlinearity,
        alpha,
        p,
        rho,
        domination_holds: per_trial.iter().all(|t| t.domination.holds),
        max_violation: per_trial
            .iter()
            .map(|t| t.domination.max_violation)
            .fold(f64::NEG_INFINITY, f64::max),
        max_norm_ratio: per_trial.iter().map(|t| t.norm_ratio).fold(0.0, f64::max),
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_manifold, GraphSpec};
    use crate::spectral::OperatorForm;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn path2_hand_values() {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::path(2)).unwrap();
        let req = SFuncRequest::new(0.5, 1.0, false).unwrap();
        let s = strichartz_functional(&m, &v(&[1.0, 0.0]), &req).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
        let local = SFuncRequest { local: true, ..req };
        assert_eq!(strichartz_functional(&m, &v(&[1.0, 0.0]), &local).unwrap().amax(), 0.0);
        assert_eq!(strichartz_functional(&m, &v(&[3.0, 3.0]), &req).unwrap().amax(), 0.0);
    }

    #[test]
    fn extra_breakpoints_do_not_change_values() {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::cycle(9)).unwrap();
        let f = DVector::from_fn(9, |i, _| ((i * i) as f64).cos());
        for local in [false, true] {
            let req = SFuncRequest::new(0.3, 1.5, local).unwrap();
            let a = strichartz_functional(&m, &f, &req).unwrap();
            let b = strichartz_functional_refined(&m, &f, &req, &[0.25, 0.5, 1.0, 1.7, 2.2, 3.9, 8.0])
                .unwrap();
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(SFuncRequest::new(1.0, 1.0, false).is_err());
        assert!(SFuncRequest::new(0.5, 0.5, false).is_err());
        assert!(matches!(
            "exp".parse::<Nonlinearity>(),
            Err(Error::UncertifiedNonlinearity(_))
        ));
        assert_eq!("u^3".parse::<Nonlinearity>().unwrap(), Nonlinearity::Cube);
    }

    #[test]
    fn identity_and_zero_nonlinearities() {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::cycle(16)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        let id = nonlinearity_report(&op, &m, Nonlinearity::Identity, 0.5, 2.0, 1.0, 5, 3).unwrap();
        assert!(id.per_trial.iter().all(|t| (t.norm_ratio - 1.0).abs() < 1e-14));
        assert!(id.domination_holds);
        let zero = nonlinearity_report(&op, &m, Nonlinearity::Zero, 0.5, 2.0, 1.0, 5, 3).unwrap();
        assert_eq!(zero.max_norm_ratio, 0.0);
    }

    #[test]
    fn characterization_excludes_constants() {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::cycle(16)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        let r = characterization_report(&op, &m, 0.5, 2.0, 1.0, 10, 7).unwrap();
        assert!(!r.hypothesis_violated);
        assert!(r.min_ratio > 0.0 && r.max_ratio.is_finite());
        assert!(r.min_ratio <= r.max_ratio);
    }
}
