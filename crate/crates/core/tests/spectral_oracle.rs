use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sobolev_core::geometry::{build_manifold, GraphSpec};
use sobolev_core::spectral::{OperatorForm, SpectralOperator};
use sobolev_core::Manifold;

/// `L` assembled straight from the edge list, without the operator code.
fn dense_generator(m: &Manifold) -> DMatrix<f64> {
    let n = m.vertex_count();
    let mut l = DMatrix::zeros(n, n);
    for e in m.edges() {
        for (a, b) in [(e.u, e.v), (e.v, e.u)] {
            let mu = m.measure()[a];
            l[(a, a)] += e.weight / mu;
            l[(a, b)] -= e.weight / mu;
        }
    }
    l
}

fn weighted_norm(m: &Manifold, v: &DVector<f64>) -> f64 {
    v.iter().zip(m.measure().iter()).map(|(x, w)| x * x * w).sum::<f64>().sqrt()
}

fn noise(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn heat_matches_dense_expm_on_cycles() {
    for n in [8usize, 32, 64] {
        let m = build_manifold::<f64>(&GraphSpec::cycle(n)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        let l = dense_generator(&m);
        let f = noise(n, n as u64);
        for t in [0.01, 0.1, 1.0, 10.0] {
            let oracle = (&l * -t).exp() * &f;
            let ours = op.apply_symbol(|x| (-t * x).exp(), &f).unwrap();
            let rel = weighted_norm(&m, &(&ours - &oracle)) / weighted_norm(&m, &oracle);
            assert!(rel <= 1e-10, "n={n} t={t} rel={rel:e}");
        }
    }
}

#[test]
fn heat_matches_dense_expm_with_nonuniform_measure() {
    let m = build_manifold::<f64>(&GraphSpec::RandomGeometric { n: 40, radius: 0.35, seed: 3 }).unwrap();
    let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
    let l = dense_generator(&m);
    let f = noise(40, 9);
    for t in [0.01, 0.1, 1.0, 10.0] {
        let oracle = (&l * -t).exp() * &f;
        let rel = weighted_norm(&m, &(op.heat(t, &f) - &oracle)) / weighted_norm(&m, &oracle);
        assert!(rel <= 1e-10, "t={t} rel={rel:e}");
    }
}

#[test]
fn assembled_matrix_matches_edge_list() {
    let m = build_manifold::<f64>(&GraphSpec::torus_grid(4, 5)).unwrap();
    let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
    let diff = (op.matrix() - dense_generator(&m)).abs().max();
    assert!(diff < 1e-12, "{diff:e}");
}
