use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum, Real};

/// Midpoint rule in `log t` for `∫_{t_min}^{t_max} F(t) dt/t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TQuadrature<T> {
    t_min: T,
    t_max: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> TQuadrature<T> {
    pub fn log_midpoint(t_min: f64, t_max: f64, node_count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::Quadrature(format!(
                "need 0 < t_min < t_max < ∞, got [{t_min}, {t_max}]"
            )));
        }
        if node_count == 0 {
            return Err(Error::Quadrature("node count must be positive".into()));
        }
        let (lo, hi) = (T::lit(t_min), T::lit(t_max));
        let h = (hi / lo).ln() / T::lit(node_count as f64);
        let half = T::lit(0.5);
        let nodes = (0..node_count)
            .map(|j| lo * ((T::lit(j as f64) + half) * h).exp())
            .collect();
        Ok(Self {
            t_min: lo,
            t_max: hi,
            nodes,
            weights: vec![h; node_count],
        })
    }

    /// 400 nodes on `[1e-6, 1e6]`.
    pub fn standard() -> Self {
        Self::log_midpoint(1e-6, 1e6, 400).expect("valid defaults")
    }

    pub fn t_min(&self) -> T {
        self.t_min
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        let terms: Vec<T> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .collect();
        pairwise_sum(&terms)
    }
}
