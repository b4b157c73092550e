//! Brute-force measurement of the product-decomposition constant on the
//! two-point space, with symbols and quadrature written out independently.

use nalgebra::{Matrix2, Vector2};

/// `Γ(n, x)` for integer `n`.
pub fn upper_gamma(n: u32, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..n {
        term *= x / k as f64;
        sum += term;
    }
    (1..n).map(|k| k as f64).product::<f64>() * (-x).exp() * sum
}

pub fn psi(n: u32, x: f64) -> f64 {
    x.powi(n as i32) * (-x).exp() * (1.0 - (-x).exp())
}

pub fn phi(n: u32, x: f64) -> f64 {
    -(upper_gamma(n, x) - 0.5f64.powi(n as i32) * upper_gamma(n, 2.0 * x))
}

/// `b(tL)` on path(2): spectral projectors for eigenvalues 0 and 2.
fn calculus(b: impl Fn(f64) -> f64, t: f64) -> Matrix2<f64> {
    let p0 = Matrix2::new(0.5, 0.5, 0.5, 0.5);
    let p1 = Matrix2::new(0.5, -0.5, -0.5, 0.5);
    p0 * b(0.0) + p1 * b(2.0 * t)
}

/// Trapezoid rule in `u = ln t`.
fn sum_paraproducts(n: u32, f: Vector2<f64>, g: Vector2<f64>) -> Vector2<f64> {
    let (lo, hi, steps) = (-40.0f64, 8.0f64, 48_000usize);
    let h = (hi - lo) / steps as f64;
    let mut acc = Vector2::zeros();
    for k in 0..=steps {
        let t = (lo + k as f64 * h).exp();
        let w = if k == 0 || k == steps { 0.5 * h } else { h };
        let (ps, ph) = (calculus(|x| psi(n, x), t), calculus(|x| phi(n, x), t));
        let (pf, pg, qf, qg) = (ph * f, ph * g, ps * f, ps * g);
        let hh = ps * pf.component_mul(&pg);
        let lh = ph * qf.component_mul(&pg);
        let hl = ph * pf.component_mul(&qg);
        acc += (hh + lh + hl) * w;
    }
    acc
}

pub fn measured_constant(n: u32, f: Vector2<f64>, g: Vector2<f64>) -> f64 {
    let mean = |v: Vector2<f64>| 0.5 * (v[0] + v[1]);
    let (fm, gm) = (Vector2::repeat(mean(f)), Vector2::repeat(mean(g)));
    let (fp, gp) = (f - fm, g - gm);
    let target = f.component_mul(&g) - (fm.component_mul(&g) + f.component_mul(&gm) - fm.component_mul(&gm));
    let s = sum_paraproducts(n, fp, gp);
    target.dot(&s) / s.dot(&s)
}
