use serde::Serialize;

use super::quadrature::TQuadrature;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The symbols `ψ(x) = x^N e^{-x}(1 − e^{-x})`, `φ(x) = −∫_x^∞ ψ(y) dy/y` and
/// `ζ(x) = ∫_1^∞ ψ(ux) du/u`, with their Calderón normalizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolFamily<T> {
    order: u32,
    /// `ĉ^{-1} = ∫_0^∞ ψ(y) dy/y = Γ(N)(1 − 2^{-N})`.
    calderon_hat_inv: T,
    /// `c^{-1} = ∫_0^∞ ψ(y) dy/y² = Γ(N−1)(1 − 2^{1−N})`.
    calderon_inv: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymbolKind {
    Psi,
    Phi,
    Zeta,
    /// `z^β φ(z)`.
    PhiTilde(f64),
    /// `z^{-β} ψ(z)`, requires `β < N`.
    PsiTilde(f64),
}

fn factorial<T: Real>(k: u32) -> T {
    (1..=k).fold(T::one(), |acc, i| acc * T::lit(f64::from(i)))
}

/// `Γ(N, x) = (N−1)! e^{-x} Σ_{k<N} x^k / k!` for integer `N >= 1`.
fn upper_gamma<T: Real>(n: u32, x: T) -> T {
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..n {
        term = term * x / T::lit(f64::from(k));
        sum += term;
    }
    factorial::<T>(n - 1) * (-x).exp() * sum
}

impl<T: Real> SymbolFamily<T> {
    pub fn new(order: u32) -> Result<Self> {
        if order < 2 {
            return Err(Error::SymbolOrder { n: order, min: 2 });
        }
        let two = T::lit(2.0);
        Ok(Self {
            order,
            calderon_hat_inv: factorial::<T>(order - 1)
                * (T::one() - two.powi(-(order as i32))),
            calderon_inv: factorial::<T>(order - 2) * (T::one() - two.powi(1 - order as i32)),
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn calderon_hat(&self) -> T {
        T::one() / self.calderon_hat_inv
    }

    pub fn calderon_hat_inv(&self) -> T {
        self.calderon_hat_inv
    }

    pub fn calderon(&self) -> T {
        T::one() / self.calderon_inv
    }

    pub fn calderon_inv(&self) -> T {
        self.calderon_inv
    }

    pub fn psi(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let e = (-x).exp();
        if e == T::zero() {
            return T::zero();
        }
        x.powi(self.order as i32) * e * -(-x).exp_m1()
    }

    /// `φ(x) = −[Γ(N, x) − 2^{-N} Γ(N, 2x)]`, so `φ(0) = −ĉ^{-1}`.
    pub fn phi(&self, x: T) -> T {
        -self.tail(x)
    }

    /// `ζ(x) = ∫_x^∞ ψ(y) dy/y` for `x > 0`; `ζ(0) = 0` since `ψ(0) = 0`.
    pub fn zeta(&self, x: T) -> T {
        if x <= T::zero() {
            T::zero()
        } else {
            self.tail(x)
        }
    }

    fn tail(&self, x: T) -> T {
        let x = x.max(T::zero());
        let two = T::lit(2.0);
        upper_gamma(self.order, x) - two.powi(-(self.order as i32)) * upper_gamma(self.order, two * x)
    }

    pub fn eval(&self, which: SymbolKind, x: T) -> Result<T> {
        if !(x >= T::zero()) {
            return Err(Error::Parameter(format!(
                "symbol argument {} must be >= 0",
                x.to_f64_lossy()
            )));
        }
        Ok(match which {
            SymbolKind::Psi => self.psi(x),
            SymbolKind::Phi => self.phi(x),
            SymbolKind::Zeta => self.zeta(x),
            SymbolKind::PhiTilde(beta) => {
                if x == T::zero() {
                    if beta > 0.0 {
                        T::zero()
                    } else if beta == 0.0 {
                        self.phi(x)
                    } else {
                        return Err(Error::Parameter(format!(
                            "z^{beta} φ(z) is singular at 0"
                        )));
                    }
                } else {
                    x.powf(T::lit(beta)) * self.phi(x)
                }
            }
            SymbolKind::PsiTilde(beta) => {
                if beta >= f64::from(self.order) {
                    return Err(Error::DerivedExponent {
                        beta,
                        n: self.order,
                    });
                }
                if x == T::zero() {
                    T::zero()
                } else {
                    x.powf(T::lit(-beta)) * self.psi(x)
                }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalderonConstants {
    pub order: u32,
    pub c: f64,
    pub c_hat: f64,
    /// `∫ψ(y) dy/y²` and `∫ψ(y) dy/y` by log-spaced quadrature.
    pub quadrature_c_inv: f64,
    pub quadrature_c_hat_inv: f64,
    pub residual_c: f64,
    pub residual_c_hat: f64,
}

/// Closed-form Calderón constants with a quadrature cross-check.
pub fn calderon_constant(order: u32) -> Result<CalderonConstants> {
    let family = SymbolFamily::<f64>::new(order)?;
    let quad = TQuadrature::<f64>::log_midpoint(1e-10, 1e3, 4000)?;
    let hat_inv = quad.integrate(|y| family.psi(y));
    let c_inv = quad.integrate(|y| family.psi(y) / y);
    Ok(CalderonConstants {
        order,
        c: family.calderon(),
        c_hat: family.calderon_hat(),
        quadrature_c_inv: c_inv,
        quadrature_c_hat_inv: hat_inv,
        residual_c: ((c_inv - family.calderon_inv()) / family.calderon_inv()).abs(),
        residual_c_hat: ((hat_inv - family.calderon_hat_inv()) / family.calderon_hat_inv()).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let f2 = SymbolFamily::<f64>::new(2).unwrap();
        assert!((f2.psi(1.0) - (-1f64).exp() * (1.0 - (-1f64).exp())).abs() < 1e-16);
        assert!((f2.psi(1.0) - 0.232544).abs() < 1e-6);
        assert_eq!(f2.psi(0.0), 0.0);
        assert_eq!(f2.phi(1e6), 0.0);
        assert_eq!(f2.calderon_hat_inv(), 0.75);
        assert!((f2.calderon_hat() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(f2.calderon_inv(), 0.5);
        assert_eq!(f2.calderon(), 2.0);
        // φ(0) = −∫ψ(y) dy/y
        assert_eq!(f2.phi(0.0), -0.75);
        assert_eq!(SymbolFamily::<f64>::new(4).unwrap().calderon_hat_inv(), 5.625);
        assert!(SymbolFamily::<f64>::new(1).is_err());
    }

    #[test]
    fn phi_derivative_is_psi_over_x() {
        let fam = SymbolFamily::<f64>::new(5).unwrap();
        for &x in &[0.05, 0.3, 1.0, 2.5, 7.0, 20.0] {
            let h = 1e-5 * x;
            let fd = (fam.phi(x + h) - fam.phi(x - h)) / (2.0 * h);
            assert!((fd - fam.psi(x) / x).abs() < 1e-8 * (1.0 + fam.psi(x) / x));
        }
    }

    #[test]
    fn zeta_matches_defining_integral() {
        let fam = SymbolFamily::<f64>::new(3).unwrap();
        let quad = TQuadrature::<f64>::log_midpoint(1.0, 1e4, 20000).unwrap();
        for &x in &[0.01, 0.5, 2.0, 9.0] {
            let direct = quad.integrate(|u| fam.psi(u * x));
            // midpoint rule with a non-vanishing integrand at u = 1 is O(h²)
            assert!((direct - fam.zeta(x)).abs() < 1e-7);
            assert_eq!(fam.zeta(x), -fam.phi(x));
        }
        assert_eq!(fam.zeta(0.0), 0.0);
    }

    #[test]
    fn derived_symbols() {
        let fam = SymbolFamily::<f64>::new(5).unwrap();
        assert!(matches!(
            fam.eval(SymbolKind::PsiTilde(5.0), 1.0),
            Err(Error::DerivedExponent { .. })
        ));
        assert_eq!(fam.eval(SymbolKind::PsiTilde(0.25), 0.0).unwrap(), 0.0);
        let x = 1.7;
        let v = fam.eval(SymbolKind::PhiTilde(0.25), x).unwrap();
        assert!((v - x.powf(0.25) * fam.phi(x)).abs() < 1e-15);
        assert!(fam.eval(SymbolKind::Psi, -1.0).is_err());
    }

    #[test]
    fn quadrature_cross_check() {
        for n in [2, 3, 5] {
            let c = calderon_constant(n).unwrap();
            assert!(c.residual_c < 1e-8, "{c:?}");
            assert!(c.residual_c_hat < 1e-8, "{c:?}");
        }
    }
}
