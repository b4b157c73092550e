mod common;

use nalgebra::Vector2;
use sobolev_core::geometry::{build_manifold, GraphSpec};
use sobolev_core::paraproducts::{product_decomposition, product_normalization, SymbolFamily, TQuadrature};
use sobolev_core::spectral::{OperatorForm, SpectralOperator};

use common::measured_constant;

#[test]
fn measured_constant_is_calderon_hat_cubed() {
    let pairs = [
        (Vector2::new(1.0, -1.0), Vector2::new(1.0, -1.0)),
        (Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)),
        (Vector2::new(2.0, -0.5), Vector2::new(-1.0, 3.0)),
    ];
    for n in [2u32, 3, 5] {
        let fam = SymbolFamily::<f64>::new(n).unwrap();
        let expected = fam.calderon_hat().powi(3);
        assert!((product_normalization(&fam) - expected).abs() <= 1e-14 * expected);
        for (f, g) in pairs {
            let k = measured_constant(n, f, g);
            assert!((k - expected).abs() <= 1e-8 * expected, "N={n}: measured {k}, expected {expected}");
        }
    }
}

#[test]
fn decomposition_is_exact_on_two_points() {
    let m = build_manifold::<f64>(&GraphSpec::path(2)).unwrap();
    let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
    let quad = TQuadrature::standard();
    for n in [2u32, 3, 5] {
        let fam = SymbolFamily::new(n).unwrap();
        for (f, g) in [([1.0, -1.0], [1.0, -1.0]), ([2.0, -0.5], [-1.0, 3.0])] {
            let d = product_decomposition(
                &op,
                &fam,
                &quad,
                &nalgebra::DVector::from_row_slice(&f),
                &nalgebra::DVector::from_row_slice(&g),
            )
            .unwrap();
            assert!(d.relative_residual < 1e-8, "N={n}: {:e}", d.relative_residual);
        }
    }
}
