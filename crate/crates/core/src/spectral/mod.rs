//! The generator `L` represented by an exact eigendecomposition.
//!
//! Eigenvectors are orthonormal for `⟨f, g⟩_μ = Σ f(x) g(x) μ(x)`, so every
//! symbol `b(L)` is applied exactly as `Σ b(λ_i) ⟨f, e_i⟩_μ e_i`.

mod offdiag;

pub use offdiag::{offdiag_lhs, offdiag_probe, OffDiagReport, OffDiagRow};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{gradient, DiscreteManifold};
use crate::norms::lebesgue_norm;
use crate::scalar::Real;

/// Per-edge coefficients of a divergence-form operator, with their ellipticity
/// bounds `0 < lower <= a_e <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCoefficients<T> {
    pub values: Vec<T>,
    pub lower: T,
    pub upper: T,
}

impl<T: Real> EdgeCoefficients<T> {
    /// Coefficients carried by the manifold's edges, bounded by their range.
    pub fn from_manifold(manifold: &DiscreteManifold<T>) -> Option<Self> {
        let values: Vec<T> = manifold
            .edges()
            .iter()
            .map(|e| e.coefficient)
            .collect::<Option<_>>()?;
        let lower = values.iter().copied().fold(values[0], |a, b| a.min(b));
        let upper = values.iter().copied().fold(values[0], |a, b| a.max(b));
        Some(Self {
            values,
            lower,
            upper,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorForm<T> {
    /// `(Lf)(x) = μ(x)^{-1} Σ_{y~x} w_xy (f(x) − f(y))`.
    Combinatorial,
    /// Combinatorial form with `μ(x)` replaced by the weighted degree.
    Normalized,
    /// Combinatorial form with `w_xy` replaced by `a_e w_xy`.
    Divergence(EdgeCoefficients<T>),
}

#[derive(Debug, Clone)]
pub struct SpectralOperator<T> {
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
    /// `Eᵀ diag(μ)`: maps a field to its spectral coefficients.
    analysis: DMatrix<T>,
    measure: DVector<T>,
    order: T,
    kernel_dim: usize,
}

impl<T: Real> SpectralOperator<T> {
    /// Assembles `L` in the requested form and diagonalizes it.
    pub fn assemble(manifold: &DiscreteManifold<T>, form: &OperatorForm<T>) -> Result<Self> {
        let n = manifold.vertex_count();
        let edges = manifold.edges();
        let mut weights: Vec<T> = edges.iter().map(|e| e.weight).collect();
        if let OperatorForm::Divergence(coeffs) = form {
            if coeffs.values.len() != edges.len() {
                return Err(Error::Parameter(format!(
                    "{} coefficients for {} edges",
                    coeffs.values.len(),
                    edges.len()
                )));
            }
            if !(coeffs.lower > T::zero()) || coeffs.upper < coeffs.lower {
                return Err(Error::Parameter(
                    "coefficient bounds must satisfy 0 < lower <= upper".into(),
                ));
            }
            for (index, (w, &a)) in weights.iter_mut().zip(&coeffs.values).enumerate() {
                if a < coeffs.lower || a > coeffs.upper || !a.is_finite_value() {
                    return Err(Error::CoefficientOutOfRange {
                        index,
                        value: a.to_f64_lossy(),
                        lower: coeffs.lower.to_f64_lossy(),
                        upper: coeffs.upper.to_f64_lossy(),
                    });
                }
                *w *= a;
            }
        }
        let measure = match form {
            OperatorForm::Normalized => {
                DVector::from_iterator(n, (0..n).map(|x| manifold.weighted_degree(x)))
            }
            _ => manifold.measure().clone(),
        };

        let mut stiffness = DMatrix::<T>::zeros(n, n);
        for (e, &w) in edges.iter().zip(&weights) {
            stiffness[(e.u, e.u)] += w;
            stiffness[(e.v, e.v)] += w;
            stiffness[(e.u, e.v)] -= w;
            stiffness[(e.v, e.u)] -= w;
        }
        let inv_sqrt: Vec<T> = measure.iter().map(|&m| T::one() / m.sqrt()).collect();
        let sym = DMatrix::from_fn(n, n, |i, j| stiffness[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
        let norm = sym.norm();
        let eig = SymmetricEigen::try_new(sym, T::default_epsilon(), 1000 * n.max(10)).ok_or(
            Error::Eigensolver {
                n,
                norm: norm.to_f64_lossy(),
            },
        )?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let lambda_max = eig.eigenvalues[order[n - 1]].max(T::one());
        let kernel_tol = T::lit(T::TOL) * lambda_max;
        let mut eigenvalues = DVector::zeros(n);
        let mut eigenvectors = DMatrix::zeros(n, n);
        let mut kernel_dim = 0;
        for (col, &k) in order.iter().enumerate() {
            let mut lambda = eig.eigenvalues[k];
            if lambda <= kernel_tol {
                lambda = T::zero();
                kernel_dim += 1;
            }
            eigenvalues[col] = lambda;
            for i in 0..n {
                eigenvectors[(i, col)] = eig.eigenvectors[(i, k)] * inv_sqrt[i];
            }
        }
        if kernel_dim == 1 {
            // connected graph: the kernel is exactly the constants
            let c = T::one() / measure.sum().sqrt();
            eigenvectors.column_mut(0).fill(c);
        }
        let analysis = DMatrix::from_fn(n, n, |i, j| eigenvectors[(j, i)] * measure[j]);
        Ok(Self {
            eigenvalues,
            eigenvectors,
            analysis,
            measure,
            order: T::lit(2.0),
            kernel_dim,
        })
    }

    /// Rebuilds an operator from stored eigenpairs (`μ`-orthonormal columns,
    /// ascending eigenvalues, kernel first).
    pub fn from_parts(
        eigenvalues: DVector<T>,
        eigenvectors: DMatrix<T>,
        measure: DVector<T>,
        order: T,
        kernel_dim: usize,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n || measure.len() != n {
            return Err(Error::Parameter(format!(
                "eigenpair dimensions disagree: {n} values, {}x{} vectors, {} weights",
                eigenvectors.nrows(),
                eigenvectors.ncols(),
                measure.len()
            )));
        }
        if kernel_dim > n || eigenvalues.as_slice().windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Parameter("eigenvalues must be ascending with the kernel first".into()));
        }
        let analysis = DMatrix::from_fn(n, n, |i, j| eigenvectors[(j, i)] * measure[j]);
        Ok(Self {
            eigenvalues,
            eigenvectors,
            analysis,
            measure,
            order,
            kernel_dim,
        })
    }

    /// Overrides the order parameter `m` (2 for Laplacian-type generators).
    pub fn with_order(mut self, order: T) -> Self {
        self.order = order;
        self
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<T> {
        &self.eigenvectors
    }

    /// Measure defining the inner product of this operator.
    pub fn measure(&self) -> &DVector<T> {
        &self.measure
    }

    pub fn order(&self) -> T {
        self.order
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    pub fn lambda_max(&self) -> T {
        self.eigenvalues[self.dim() - 1]
    }

    /// Smallest positive eigenvalue.
    pub fn lambda_min_positive(&self) -> Option<T> {
        self.eigenvalues.get(self.kernel_dim).copied()
    }

    pub fn inner(&self, f: &DVector<T>, g: &DVector<T>) -> T {
        f.iter()
            .zip(g.iter())
            .zip(self.measure.iter())
            .fold(T::zero(), |acc, ((&a, &b), &m)| acc + a * b * m)
    }

    pub fn l2_norm(&self, f: &DVector<T>) -> T {
        self.inner(f, f).sqrt()
    }

    /// `⟨f, e_i⟩_μ` for every eigenvector. With a one-dimensional kernel the
    /// non-kernel coefficients are taken of `f − f(0)`, so constants map to
    /// exactly zero outside the kernel.
    pub fn coefficients(&self, f: &DVector<T>) -> DVector<T> {
        if self.kernel_dim != 1 || f.is_empty() {
            return &self.analysis * f;
        }
        let shift = f[0];
        let mut c = &self.analysis * f.map(|v| v - shift);
        c[0] = self.analysis.row(0).transpose().dot(f);
        c
    }

    pub fn synthesize(&self, coefficients: &DVector<T>) -> DVector<T> {
        &self.eigenvectors * coefficients
    }

    /// `b(λ_i)` for every eigenvalue; rejects non-finite values.
    pub fn symbol_values(&self, b: impl Fn(T) -> T) -> Result<DVector<T>> {
        let mut out = DVector::zeros(self.dim());
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = b(lambda);
            if !v.is_finite_value() {
                return Err(Error::SymbolUndefined {
                    eigenvalue: lambda.to_f64_lossy(),
                });
            }
            out[i] = v;
        }
        Ok(out)
    }

    /// `Σ s_i ⟨f, e_i⟩ e_i` for precomputed symbol values `s`.
    pub fn apply_diagonal(&self, symbol: &DVector<T>, f: &DVector<T>) -> DVector<T> {
        self.synthesize(&self.coefficients(f).component_mul(symbol))
    }

    /// Exact functional calculus `b(L) f`.
    pub fn apply_symbol(&self, b: impl Fn(T) -> T, f: &DVector<T>) -> Result<DVector<T>> {
        let symbol = self.symbol_values(b)?;
        Ok(self.apply_diagonal(&symbol, f))
    }

    /// `b(L) f` for a complex symbol acting on a complex field.
    pub fn apply_symbol_complex(
        &self,
        b: impl Fn(T) -> Complex<T>,
        f: &DVector<Complex<T>>,
    ) -> Result<DVector<Complex<T>>> {
        let mut re = DVector::zeros(self.dim());
        let mut im = DVector::zeros(self.dim());
        for (i, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = b(lambda);
            if !v.re.is_finite_value() || !v.im.is_finite_value() {
                return Err(Error::SymbolUndefined {
                    eigenvalue: lambda.to_f64_lossy(),
                });
            }
            re[i] = v.re;
            im[i] = v.im;
        }
        let (fr, fi) = split_complex(f);
        let (cr, ci) = (self.coefficients(&fr), self.coefficients(&fi));
        let out_re = self.synthesize(&(re.component_mul(&cr) - im.component_mul(&ci)));
        let out_im = self.synthesize(&(re.component_mul(&ci) + im.component_mul(&cr)));
        Ok(join_complex(&out_re, &out_im))
    }

    /// Heat semigroup `e^{-tL} f`.
    pub fn heat(&self, t: T, f: &DVector<T>) -> DVector<T> {
        let symbol = self.eigenvalues.map(|l| (-t * l).exp());
        self.apply_diagonal(&symbol, f)
    }

    /// Unitary group `e^{itL} f`.
    pub fn schrodinger(&self, t: T, f: &DVector<Complex<T>>) -> DVector<Complex<T>> {
        self.apply_symbol_complex(|l| Complex::new((t * l).cos(), (t * l).sin()), f)
            .expect("unimodular symbol is finite")
    }

    /// Norm of the kernel component of `f`, relative to `‖f‖_μ`.
    pub fn kernel_fraction(&self, f: &DVector<T>) -> T {
        let total = self.l2_norm(f);
        if total == T::zero() {
            return T::zero();
        }
        let c = self.coefficients(f);
        let kernel = (0..self.kernel_dim).fold(T::zero(), |a, i| a + c[i] * c[i]);
        kernel.sqrt() / total
    }

    /// Removes the kernel component (the `μ`-mean on a connected graph).
    pub fn project_out_kernel(&self, f: &DVector<T>) -> DVector<T> {
        let mut out = f.clone();
        for i in 0..self.kernel_dim {
            let e = self.eigenvectors.column(i).into_owned();
            let c = self.inner(f, &e);
            out.axpy(-c, &e, T::one());
        }
        out
    }

    /// `L^β f` (homogeneous, with `0^β := 0` for `β > 0`) or `(1+L)^β f`.
    /// Negative homogeneous powers require `f` orthogonal to the kernel.
    pub fn fractional_power(&self, beta: T, f: &DVector<T>, bessel: bool) -> Result<DVector<T>> {
        if bessel {
            return self.apply_symbol(|l| (T::one() + l).powf(beta), f);
        }
        if beta == T::zero() {
            return Ok(f.clone());
        }
        if beta < T::zero() {
            let frac = self.kernel_fraction(f);
            if frac > T::lit(T::TOL) {
                return Err(Error::KernelComponent {
                    component: frac.to_f64_lossy(),
                });
            }
        }
        let kernel_dim = self.kernel_dim;
        let symbol = DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().enumerate().map(|(i, &l)| {
                if i < kernel_dim {
                    T::zero()
                } else {
                    l.powf(beta)
                }
            }),
        );
        Ok(self.apply_diagonal(&symbol, f))
    }

    /// Dense matrix of `L` in vertex coordinates.
    pub fn matrix(&self) -> DMatrix<T> {
        let d = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * d * &self.analysis
    }
}

pub(crate) fn split_complex<T: Real>(f: &DVector<Complex<T>>) -> (DVector<T>, DVector<T>) {
    (f.map(|z| z.re), f.map(|z| z.im))
}

pub(crate) fn join_complex<T: Real>(re: &DVector<T>, im: &DVector<T>) -> DVector<Complex<T>> {
    DVector::from_iterator(re.len(), re.iter().zip(im.iter()).map(|(&a, &b)| Complex::new(a, b)))
}

#[derive(Debug, Clone, Serialize)]
pub struct RieszTransform<T> {
    /// `|∇ L^{-1/m} f|`.
    #[serde(skip)]
    pub field: DVector<T>,
    /// `(p, ‖Rf‖_p / ‖f‖_p)` for each requested exponent.
    pub ratios: Vec<(f64, T)>,
}

/// Riesz transform `|∇ L^{-1/m} f|` with its `L^p` ratios.
pub fn riesz_transform<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    f: &DVector<T>,
    p_grid: &[f64],
) -> Result<RieszTransform<T>> {
    manifold.check_field(f)?;
    let potential = op.fractional_power(-T::one() / op.order(), f, false)?;
    let field = gradient(manifold, &potential);
    let ratios = p_grid
        .iter()
        .map(|&p| {
            let denom = lebesgue_norm(manifold, f, p);
            let ratio = if denom > T::zero() {
                lebesgue_norm(manifold, &field, p) / denom
            } else {
                T::zero()
            };
            (p, ratio)
        })
        .collect();
    Ok(RieszTransform { field, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_manifold, GraphSpec};

    fn path2_op() -> (DiscreteManifold<f64>, SpectralOperator<f64>) {
        let m = build_manifold(&GraphSpec::path(2)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        (m, op)
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn path2_eigendecomposition() {
        let (_, op) = path2_op();
        assert_eq!(op.eigenvalues()[0], 0.0);
        assert!((op.eigenvalues()[1] - 2.0).abs() < 1e-14);
        let s = 1.0 / 2f64.sqrt();
        let e0 = op.eigenvectors().column(0);
        let e1 = op.eigenvectors().column(1);
        assert!((e0[0] - s).abs() < 1e-15 && (e0[1] - s).abs() < 1e-15);
        assert!((e1[0].abs() - s).abs() < 1e-14 && (e1[0] + e1[1]).abs() < 1e-14);
        assert_eq!(op.kernel_dim(), 1);
    }

    #[test]
    fn path2_heat_value() {
        let (_, op) = path2_op();
        let t = 2f64.ln() / 2.0;
        let u = op
            .apply_symbol(|l| (-t * l).exp(), &v(&[1.0, 0.0]))
            .unwrap();
        assert!((u[0] - 0.75).abs() < 1e-12 && (u[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn identity_and_kernel_symbols() {
        let (_, op) = path2_op();
        let f = v(&[0.3, -1.7]);
        assert!((op.apply_symbol(|_| 1.0, &f).unwrap() - &f).norm() < 1e-14);
        let c = v(&[2.5, 2.5]);
        assert!(op.apply_symbol(|l| l, &c).unwrap().norm() < 1e-14);
        let err = op.apply_symbol(|l| 1.0 / l, &f).unwrap_err();
        assert!(matches!(err, Error::SymbolUndefined { eigenvalue } if eigenvalue == 0.0));
    }

    #[test]
    fn fractional_power_hand_values() {
        let (_, op) = path2_op();
        let half = op.fractional_power(0.5, &v(&[1.0, 0.0]), false).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((half[0] - s).abs() < 1e-14 && (half[1] + s).abs() < 1e-14);
        assert!((op.l2_norm(&half) - 1.0).abs() < 1e-14);

        let f = v(&[0.2, 0.9]);
        assert_eq!(op.fractional_power(0.0, &f, false).unwrap(), f);
        assert!((op.fractional_power(0.0, &f, true).unwrap() - &f).norm() < 1e-14);
        let c = v(&[4.0, 4.0]);
        assert!((op.fractional_power(-0.7, &c, true).unwrap() - &c).norm() < 1e-13);
        assert!(matches!(
            op.fractional_power(-0.5, &f, false),
            Err(Error::KernelComponent { .. })
        ));
    }

    #[test]
    fn riesz_on_path2() {
        let (m, op) = path2_op();
        let r = riesz_transform(&op, &m, &v(&[1.0, -1.0]), &[2.0]).unwrap();
        let s2 = 2f64.sqrt();
        assert!((r.field[0] - s2).abs() < 1e-14 && (r.field[1] - s2).abs() < 1e-14);
        assert!((r.ratios[0].1 - s2).abs() < 1e-14);
        let zero = riesz_transform(&op, &m, &v(&[0.0, 0.0]), &[2.0]).unwrap();
        assert_eq!(zero.ratios[0].1, 0.0);
        assert!(zero.field.iter().all(|&x| x == 0.0));
        assert!(riesz_transform(&op, &m, &v(&[1.0, 0.0]), &[2.0]).is_err());
    }

    #[test]
    fn divergence_with_unit_coefficient_matches_combinatorial() {
        let spec = GraphSpec::parse("divergence_grid(4,4,const:1)", 0).unwrap();
        let m: DiscreteManifold<f64> = build_manifold(&spec).unwrap();
        let a = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        let coeffs = EdgeCoefficients::from_manifold(&m).unwrap();
        let b = SpectralOperator::assemble(&m, &OperatorForm::Divergence(coeffs)).unwrap();
        assert!((a.eigenvalues() - b.eigenvalues()).amax() < 1e-12);

        let bad = EdgeCoefficients {
            values: vec![3.0; m.edges().len()],
            lower: 0.5,
            upper: 2.0,
        };
        assert!(matches!(
            SpectralOperator::assemble(&m, &OperatorForm::Divergence(bad)),
            Err(Error::CoefficientOutOfRange { .. })
        ));
    }

    #[test]
    fn normalized_form_uses_degree_measure() {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::path(3)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Normalized).unwrap();
        assert_eq!(op.measure().as_slice(), &[1.0, 2.0, 1.0]);
        // random-walk Laplacian of the 3-path has spectrum {0, 1, 2}
        assert!((op.eigenvalues() - v(&[0.0, 1.0, 2.0])).amax() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let m: DiscreteManifold<f32> = build_manifold(&GraphSpec::cycle(8)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        let mut f = DVector::zeros(8);
        f[0] = 1.0f32;
        let u = op.heat(0.5, &f);
        let m64: DiscreteManifold<f64> = build_manifold(&GraphSpec::cycle(8)).unwrap();
        let op64 = SpectralOperator::assemble(&m64, &OperatorForm::Combinatorial).unwrap();
        let mut f64v = DVector::zeros(8);
        f64v[0] = 1.0;
        let u64v = op64.heat(0.5, &f64v);
        for i in 0..8 {
            assert!((u[i] as f64 - u64v[i]).abs() < 1e-5);
        }
    }
}
