use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sobolev_core::functionals::{
    lipschitz_domination_check, minkowski_check, rho_monotonicity_check, strichartz_functional,
    strichartz_functional_refined, Nonlinearity, SFuncRequest,
};
use sobolev_core::geometry::{build_manifold, geometry_report, gradient, GraphSpec, PoincareRequest};
use sobolev_core::harness::{run_experiment, Experiment, ExperimentConfig};
use sobolev_core::io::to_json_string;
use sobolev_core::norms::{bessel_norm, bmo_norm, lebesgue_norm, maximal_function, sobolev_norm, BmoFlavor};
use sobolev_core::paraproducts::{paraproduct, Flavor, SymbolFamily, TQuadrature};
use sobolev_core::pde::conservation_check;
use sobolev_core::spectral::OperatorForm;
use sobolev_core::{ComplexField, Field, Manifold, Operator};

fn graph() -> impl Strategy<Value = GraphSpec> {
    prop_oneof![
        (4usize..24).prop_map(GraphSpec::cycle),
        (2usize..20).prop_map(GraphSpec::path),
        (3usize..6, 3usize..6).prop_map(|(a, b)| GraphSpec::torus_grid(a, b)),
        (12usize..28, any::<u64>()).prop_map(|(n, seed)| GraphSpec::RandomGeometric { n, radius: 0.55, seed }),
    ]
}

fn setup(spec: &GraphSpec) -> Option<(Manifold, Operator)> {
    let m = build_manifold::<f64>(spec).ok()?;
    let op = Operator::assemble(&m, &OperatorForm::Combinatorial).ok()?;
    Some((m, op))
}

fn noise(n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

fn rel(a: &Field, b: &Field) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn balls_grow_with_radius(spec in graph()) {
        let Some((m, _)) = setup(&spec) else { return Ok(()) };
        let grid = m.radius_grid();
        for x in 0..m.vertex_count() {
            for w in grid.windows(2) {
                let (small, large) = (m.ball(x, w[0]).members, m.ball(x, w[1]).members);
                prop_assert!(small.iter().all(|y| large.contains(y)));
            }
        }
    }

    #[test]
    fn reported_doubling_constant_controls_dilations(spec in graph()) {
        let Some((m, _)) = setup(&spec) else { return Ok(()) };
        let c0 = m.doubling_constant();
        let d = c0.log2();
        for x in 0..m.vertex_count() {
            for &r in &m.radius_grid() {
                if r <= 0.0 {
                    continue;
                }
                for theta in [1.0, 1.5, 2.0, 3.0, 4.0] {
                    let lhs = m.ball_volume(x, theta * r);
                    let rhs = c0 * f64::powf(theta, d) * m.ball_volume(x, r);
                    prop_assert!(lhs <= rhs * (1.0 + 1e-12), "x={x} r={r} theta={theta}");
                }
            }
        }
    }

    #[test]
    fn gradient_is_subadditive(spec in graph(), seed in any::<u64>()) {
        let Some((m, _)) = setup(&spec) else { return Ok(()) };
        let n = m.vertex_count();
        let (f, g) = (noise(n, seed), noise(n, seed ^ 1));
        let lhs = gradient(&m, &(&f + &g));
        let rhs = gradient(&m, &f) + gradient(&m, &g);
        prop_assert!(lhs.iter().zip(rhs.iter()).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn spectral_mapping_and_semigroup_law(spec in graph(), seed in any::<u64>(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let Some((m, op)) = setup(&spec) else { return Ok(()) };
        let f = noise(m.vertex_count(), seed);
        let b1 = |x: f64| 1.0 / (1.0 + x);
        let b2 = |x: f64| (x * 0.3).cos();
        let composed = op.apply_symbol(b1, &op.apply_symbol(b2, &f).unwrap()).unwrap();
        let product = op.apply_symbol(|x| b1(x) * b2(x), &f).unwrap();
        prop_assert!(rel(&composed, &product) < 1e-12);
        let two_steps = op.heat(t, &op.heat(s, &f));
        prop_assert!(rel(&two_steps, &op.heat(s + t, &f)) < 1e-12);
        let mut previous = op.l2_norm(&f);
        for k in 1..8 {
            let now = op.l2_norm(&op.heat(0.25 * k as f64 * (1.0 + t), &f));
            prop_assert!(now <= previous * (1.0 + 1e-14));
            previous = now;
        }
    }

    #[test]
    fn fractional_powers_add(spec in graph(), seed in any::<u64>(), b1 in -1.0f64..1.5, b2 in -1.0f64..1.5) {
        let Some((m, op)) = setup(&spec) else { return Ok(()) };
        let f = op.project_out_kernel(&noise(m.vertex_count(), seed));
        let two = op.fractional_power(b1, &op.fractional_power(b2, &f, false).unwrap(), false).unwrap();
        let one = op.fractional_power(b1 + b2, &f, false).unwrap();
        prop_assert!(rel(&two, &one) < 1e-10, "{:e}", rel(&two, &one));
    }

    #[test]
    fn maximal_function_dominates(spec in graph(), seed in any::<u64>(), s in 1.0f64..3.0) {
        let Some((m, _)) = setup(&spec) else { return Ok(()) };
        let f = noise(m.vertex_count(), seed);
        let mf = maximal_function(&m, &f, s);
        prop_assert!(mf.iter().zip(f.iter()).all(|(a, b)| *a >= b.abs()));
    }

    #[test]
    fn bmo_ignores_constants(spec in graph(), seed in any::<u64>(), c in -10.0f64..10.0) {
        let Some((m, op)) = setup(&spec) else { return Ok(()) };
        let f = noise(m.vertex_count(), seed);
        let shifted = f.add_scalar(c);
        for flavor in [BmoFlavor::Classical, BmoFlavor::Semigroup { op: &op, p: 2.0 }] {
            let a = bmo_norm(&m, &f, flavor).unwrap();
            let b = bmo_norm(&m, &shifted, flavor).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + c.abs()) * a.max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn norms_are_absolutely_homogeneous(spec in graph(), seed in any::<u64>(), c in -5.0f64..5.0) {
        let Some((m, op)) = setup(&spec) else { return Ok(()) };
        let f = noise(m.vertex_count(), seed);
        let cf = &f * c;
        let check = |a: f64, b: f64| (a - c.abs() * b).abs() <= 1e-12 * (1.0 + c.abs() * b);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            prop_assert!(check(lebesgue_norm(&m, &cf, p), lebesgue_norm(&m, &f, p)));
            prop_assert!(check(
                sobolev_norm(&op, &m, &cf, 0.5, p, false).unwrap(),
                sobolev_norm(&op, &m, &f, 0.5, p, false).unwrap()
            ));
            prop_assert!(check(bessel_norm(&op, &m, &cf, 0.8, p).unwrap(), bessel_norm(&op, &m, &f, 0.8, p).unwrap()));
        }
        prop_assert!(check(
            bmo_norm(&m, &cf, BmoFlavor::Classical).unwrap(),
            bmo_norm(&m, &f, BmoFlavor::Classical).unwrap()
        ));
    }

    #[test]
    fn paraproducts_are_bilinear_and_symmetric(spec in graph(), seed in any::<u64>(), a in -3.0f64..3.0) {
        let Some((m, op)) = setup(&spec) else { return Ok(()) };
        let n = m.vertex_count();
        let fam = SymbolFamily::new(5).unwrap();
        let quad = TQuadrature::log_midpoint(1e-4, 1e4, 96).unwrap();
        let (f, f2, g) = (noise(n, seed), noise(n, seed ^ 2), noise(n, seed ^ 3));
        let pp = |x: &Field, y: &Field, fl| paraproduct(&op, &fam, &quad, x, y, fl).unwrap().field;
        for flavor in Flavor::ALL {
            let lhs = pp(&(&f * a + &f2), &g, flavor);
            let rhs = pp(&f, &g, flavor) * a + pp(&f2, &g, flavor);
            prop_assert!((&lhs - &rhs).amax() <= 1e-12 * (1.0 + rhs.amax()), "{flavor}");
        }
        prop_assert_eq!(pp(&f, &g, Flavor::Hh), pp(&g, &f, Flavor::Hh));
        prop_assert_eq!(pp(&f, &g, Flavor::Lh), pp(&g, &f, Flavor::Hl));
        let constant = DVector::from_element(n, a);
        prop_assert!(pp(&constant, &g, Flavor::Lh).amax() == 0.0);
    }

    #[test]
    fn reproducing_integral_per_eigenvalue(n in 2u32..7, log_lambda in -1.0f64..1.0) {
        let fam = SymbolFamily::<f64>::new(n).unwrap();
        let quad = TQuadrature::standard();
        let lambda = 10f64.powf(log_lambda);
        let integral = quad.integrate(|t| fam.psi(t * lambda));
        prop_assert!((integral * fam.calderon_hat() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn square_functional_invariants(spec in graph(), seed in any::<u64>(), c in -4.0f64..4.0, alpha in 0.05f64..0.95, rho in 1.0f64..3.0) {
        let Some((m, _)) = setup(&spec) else { return Ok(()) };
        let n = m.vertex_count();
        let (f, g) = (noise(n, seed), noise(n, seed ^ 5));
        let req = SFuncRequest::new(alpha, rho, false).unwrap();
        prop_assert!(minkowski_check(&m, &f, &g, &req).unwrap().holds);
        let sf = strichartz_functional(&m, &f, &req).unwrap();
        let scf = strichartz_functional(&m, &(&f * c), &req).unwrap();
        prop_assert!((&scf - &sf * c.abs()).amax() <= 1e-12 * (1.0 + sf.amax() * c.abs()));
        let local = strichartz_functional(&m, &f, &SFuncRequest { local: true, ..req }).unwrap();
        prop_assert!(local.iter().zip(sf.iter()).all(|(a, b)| *a <= *b));
        for nl in Nonlinearity::ALL {
            prop_assert!(lipschitz_domination_check(&m, &f, nl, &req).unwrap().holds, "{nl:?}");
        }
        prop_assert!(rho_monotonicity_check(&m, &f, alpha, rho, rho + 0.5).unwrap().holds);
        let extra: Vec<f64> = (1..12).map(|k| 0.37 * k as f64).collect();
        let refined = strichartz_functional_refined(&m, &f, &req, &extra).unwrap();
        prop_assert!((&refined - &sf).amax() < 1e-12 * (1.0 + sf.amax()));
    }

    #[test]
    fn linear_flows(spec in graph(), seed in any::<u64>(), alpha in 0.0f64..1.0) {
        let Some((m, op)) = setup(&spec) else { return Ok(()) };
        let n = m.vertex_count();
        let (re, im) = (noise(n, seed), noise(n, seed ^ 7));
        let u0: ComplexField = re.zip_map(&im, num_complex::Complex::new);
        let report = conservation_check(&op, &u0, alpha, &[0.1, 1.0, 3.0, 10.0]).unwrap();
        prop_assert!(report.conserved, "{:e}", report.max_relative_error);
        prop_assert!(report.heat_monotone);
    }
}

#[test]
fn geometry_report_is_bit_identical() {
    let m = build_manifold::<f64>(&GraphSpec::RandomGeometric { n: 30, radius: 0.4, seed: 11 }).unwrap();
    let req = PoincareRequest::default();
    let a = to_json_string(&geometry_report(&m, 2.0, &req)).unwrap();
    let b = to_json_string(&geometry_report(&m, 2.0, &req)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn report_is_independent_of_thread_count() {
    let mut config = ExperimentConfig::new(Experiment::Leibniz, vec![12, 16]);
    config.run.trials = 6;
    config.leibniz.breakdown = true;
    config.leibniz.nodes = 64;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&config).unwrap().to_json().unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}
