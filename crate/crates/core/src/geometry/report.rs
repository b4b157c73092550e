use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{gradient, DiscreteManifold};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareRequest {
    pub q: f64,
    /// Restrict to balls of radius at most 1.
    pub local: bool,
    pub random_fields: usize,
    pub seed: u64,
}

impl Default for PoincareRequest {
    fn default() -> Self {
        Self {
            q: 2.0,
            local: false,
            random_fields: 16,
            seed: 0,
        }
    }
}

/// Largest ratio found between the two sides of the Poincaré inequality.
/// This is an empirical lower bound on the best constant, not the constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareEstimate<T> {
    pub q: f64,
    pub local: bool,
    pub constant: T,
    pub empirical_lower_bound: bool,
    pub balls_checked: usize,
    pub pairs_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport<T> {
    pub vertex_count: usize,
    pub doubling_constant: T,
    /// `log2` of the doubling constant.
    pub homogeneous_dimension: T,
    pub d_exponent: f64,
    /// `inf_{x, 0<r<=1} μ(B(x,r)) / r^d`.
    pub volume_lower_bound: T,
    pub poincare: PoincareEstimate<T>,
}

impl<T: Real> DiscreteManifold<T> {
    /// `max_{x, r} μ(B(x,2r)) / μ(B(x,r))` over the radius grid.
    pub fn doubling_constant(&self) -> T {
        let grid = self.radius_grid();
        let two = T::lit(2.0);
        let mut best = T::one();
        for x in 0..self.vertex_count() {
            for &r in &grid {
                let ratio = self.ball_volume(x, two * r) / self.ball_volume(x, r);
                if ratio > best {
                    best = ratio;
                }
            }
        }
        best
    }

    /// `inf_{x, 0<r<=1} μ(B(x,r)) / r^d`. The ball is constant on each
    /// `(r_i, r_{i+1}]`, so the infimum sits at right endpoints.
    pub fn volume_lower_bound(&self, d_exponent: f64) -> T {
        let one = T::one();
        let mut candidates: Vec<T> = self
            .sorted_radii()
            .iter()
            .copied()
            .filter(|&r| r <= one)
            .collect();
        candidates.push(one);
        let d = T::lit(d_exponent);
        let mut best: Option<T> = None;
        for x in 0..self.vertex_count() {
            for &r in &candidates {
                let v = self.ball_volume(x, r) / r.powf(d);
                best = Some(best.map_or(v, |b: T| b.min(v)));
            }
        }
        best.expect("non-empty")
    }

    pub fn poincare_estimate(&self, req: &PoincareRequest) -> PoincareEstimate<T> {
        let n = self.vertex_count();
        let q = T::lit(req.q);
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let random: Vec<DVector<T>> = (0..req.random_fields)
            .map(|_| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|_| T::lit(StandardNormal.sample(&mut rng))),
                )
            })
            .collect();
        let random_grads: Vec<DVector<T>> = random.iter().map(|f| gradient(self, f)).collect();

        let mut constant = T::zero();
        let mut balls_checked = 0;
        let mut pairs_checked = 0;
        for x in 0..n {
            let idx = self.ball_index(x);
            let shells = idx.shells();
            // indicators of the balls nested inside the current one
            let mut inner: Vec<(DVector<T>, DVector<T>)> = Vec::new();
            for &(radius, end) in &shells {
                if radius > T::zero() && !(req.local && radius >= T::one()) {
                    let members = &idx.order[..end];
                    balls_checked += 1;
                    let fields = random
                        .iter()
                        .zip(&random_grads)
                        .chain(inner.iter().map(|(f, g)| (f, g)));
                    for (f, g) in fields {
                        pairs_checked += 1;
                        if let Some(ratio) = self.poincare_ratio(members, radius, f, g, q) {
                            if ratio > constant {
                                constant = ratio;
                            }
                        }
                    }
                }
                let mut indicator = DVector::zeros(n);
                for &y in &idx.order[..end] {
                    indicator[y] = T::one();
                }
                let g = gradient(self, &indicator);
                inner.push((indicator, g));
            }
        }
        PoincareEstimate {
            q: req.q,
            local: req.local,
            constant,
            empirical_lower_bound: true,
            balls_checked,
            pairs_checked,
        }
    }

    fn poincare_ratio(
        &self,
        members: &[usize],
        radius: T,
        f: &DVector<T>,
        grad: &DVector<T>,
        q: T,
    ) -> Option<T> {
        let vol = members.iter().fold(T::zero(), |a, &y| a + self.measure[y]);
        let avg = members
            .iter()
            .fold(T::zero(), |a, &y| a + self.measure[y] * f[y])
            / vol;
        let osc = (members
            .iter()
            .fold(T::zero(), |a, &y| a + self.measure[y] * (f[y] - avg).abs().powf(q))
            / vol)
            .powf(T::one() / q);
        let grad_avg = (members
            .iter()
            .fold(T::zero(), |a, &y| a + self.measure[y] * grad[y].powf(q))
            / vol)
            .powf(T::one() / q);
        let rhs = radius * grad_avg;
        if rhs > T::zero() {
            Some(osc / rhs)
        } else {
            None
        }
    }
}

/// Doubling constant, homogeneous dimension, volume lower bound and an
/// empirical Poincaré constant.
pub fn geometry_report<T: Real>(
    manifold: &DiscreteManifold<T>,
    d_exponent: f64,
    poincare: &PoincareRequest,
) -> GeometryReport<T> {
    let doubling_constant = manifold.doubling_constant();
    GeometryReport {
        vertex_count: manifold.vertex_count(),
        doubling_constant,
        homogeneous_dimension: doubling_constant.log2(),
        d_exponent,
        volume_lower_bound: manifold.volume_lower_bound(d_exponent),
        poincare: manifold.poincare_estimate(poincare),
    }
}
