use nalgebra::DVector;
use serde::Serialize;

use super::SpectralOperator;
use crate::geometry::DiscreteManifold;
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagRow {
    pub delta: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagReport {
    pub s_minus: f64,
    pub constant_budget: f64,
    /// Largest decay rate whose empirical constant stays within the budget.
    pub delta: f64,
    pub constant_at_delta: f64,
    pub table: Vec<OffDiagRow>,
    /// `max_t ‖e^{-tL} 1 − 1‖_∞`.
    pub conservation_error: f64,
    pub conservation_ok: bool,
    /// Every probed ball already covers the whole space, so no decay is
    /// measurable.
    pub saturated: bool,
    /// `sup |e^{-tL} f − mean(f)|` at the largest probed time.
    pub mean_limit_gap: f64,
    pub samples: usize,
}

struct Sample {
    lhs: f64,
    /// `(avg_{2^k B} |f|^{s})^{1/s}` up to the first ball covering the space.
    averages: Vec<f64>,
}

impl Sample {
    fn rhs(&self, delta: f64) -> f64 {
        let decay = 2f64.powf(-delta);
        let mut sum = 0.0;
        let mut w = 1.0;
        for &a in &self.averages {
            sum += w * a;
            w *= decay;
        }
        // the remaining dilates all equal the last (full) ball
        let last = *self.averages.last().expect("k = 0 present");
        sum + last * w / (1.0 - decay)
    }
}

/// `sup_{B(x, t^{1/m})} |e^{-tL} f|`.
pub fn offdiag_lhs<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    t: T,
    x: usize,
    f: &DVector<T>,
) -> T {
    let u = op.heat(t, f);
    ball_sup(manifold, &u, x, t.powf(T::one() / op.order()))
}

fn ball_sup<T: Real>(manifold: &DiscreteManifold<T>, u: &DVector<T>, x: usize, r: T) -> T {
    let idx = manifold.ball_index(x);
    let count = idx.count_below(r).max(1);
    idx.order[..count]
        .iter()
        .fold(T::zero(), |a, &y| a.max(u[y].abs()))
}

/// Empirical `L^{s_-}`–`L^∞` off-diagonal decay of the heat semigroup.
pub fn offdiag_probe<T: Real>(
    op: &SpectralOperator<T>,
    manifold: &DiscreteManifold<T>,
    t_grid: &[f64],
    s_minus: f64,
    fields: &[DVector<T>],
    constant_budget: f64,
) -> OffDiagReport {
    let n = manifold.vertex_count();
    let total = manifold.total_measure();
    let diameter = manifold
        .sorted_radii()
        .last()
        .copied()
        .unwrap_or(T::zero());
    let ones = DVector::from_element(n, T::one());
    let s = T::lit(s_minus);

    let mut conservation_error = 0.0f64;
    let mut samples = Vec::new();
    let mut saturated = true;
    let mut mean_limit_gap = 0.0f64;
    let t_last = t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    for &t in t_grid {
        let tt = T::lit(t);
        let heat_one = op.heat(tt, &ones);
        conservation_error = conservation_error.max(
            heat_one
                .iter()
                .fold(0.0f64, |a, &v| a.max((v - T::one()).abs().to_f64_lossy())),
        );
        let r = tt.powf(T::one() / op.order());
        if r <= diameter {
            saturated = false;
        }
        for f in fields {
            let u = op.heat(tt, f);
            if t == t_last {
                let mean = manifold.mean(f);
                mean_limit_gap = u
                    .iter()
                    .fold(mean_limit_gap, |a, &v| a.max((v - mean).abs().to_f64_lossy()));
            }
            let powered = f.map(|v| v.abs().powf(s));
            for x in 0..n {
                let lhs = ball_sup(manifold, &u, x, r).to_f64_lossy();
                let idx = manifold.ball_index(x);
                let mut averages = Vec::new();
                let mut radius = r;
                loop {
                    let count = idx.count_below(radius).max(1);
                    let vol = idx.prefix_measure[count - 1];
                    let mass = idx.order[..count]
                        .iter()
                        .fold(T::zero(), |a, &y| a + powered[y] * manifold.measure()[y]);
                    averages.push((mass / vol).powf(T::one() / s).to_f64_lossy());
                    if vol >= total {
                        break;
                    }
                    radius *= T::lit(2.0);
                }
                samples.push(Sample { lhs, averages });
            }
        }
    }

    let constant = |delta: f64| -> f64 {
        samples.iter().fold(0.0f64, |c, s| {
            let rhs = s.rhs(delta);
            if rhs > 0.0 {
                c.max(s.lhs / rhs)
            } else {
                c
            }
        })
    };

    const DELTA_MAX: f64 = 64.0;
    let delta = if constant(DELTA_MAX) <= constant_budget {
        DELTA_MAX
    } else if constant(1e-6) > constant_budget {
        0.0
    } else {
        let (mut lo, mut hi) = (1e-6, DELTA_MAX);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if constant(mid) <= constant_budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let table = [0.5, 1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .map(|delta| OffDiagRow {
            delta,
            constant: constant(delta),
        })
        .collect();

    OffDiagReport {
        s_minus,
        constant_budget,
        delta,
        constant_at_delta: if delta > 0.0 { constant(delta) } else { f64::NAN },
        table,
        conservation_error,
        conservation_ok: conservation_error <= T::TOL,
        saturated,
        mean_limit_gap,
        samples: samples.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_manifold, GraphSpec};
    use crate::spectral::OperatorForm;

    fn cycle(n: usize) -> (DiscreteManifold<f64>, SpectralOperator<f64>) {
        let m = build_manifold(&GraphSpec::cycle(n)).unwrap();
        let op = SpectralOperator::assemble(&m, &OperatorForm::Combinatorial).unwrap();
        (m, op)
    }

    #[test]
    fn constant_field_is_conserved() {
        let (m, op) = cycle(16);
        let ones = DVector::from_element(16, 1.0);
        let r = offdiag_probe(&op, &m, &[0.1, 1.0, 10.0], 1.0, &[ones], 10.0);
        assert!(r.conservation_ok);
        assert!(r.conservation_error <= 1e-10);
        // |e^{-tL}1| = 1 = average of |1| on every ball
        assert!(r.table.iter().all(|row| row.constant <= 1.0 + 1e-10));
    }

    #[test]
    fn large_time_saturates_to_the_mean() {
        let (m, op) = cycle(12);
        let mut f = DVector::zeros(12);
        f[3] = 12.0;
        let r = offdiag_probe(&op, &m, &[1e4], 1.0, &[f], 10.0);
        assert!(r.saturated);
        assert!(r.mean_limit_gap < 1e-10);
    }

    #[test]
    fn decay_rate_is_found_for_localized_data() {
        let (m, op) = cycle(32);
        let mut f = DVector::zeros(32);
        f[16] = 1.0;
        let r = offdiag_probe(&op, &m, &[1.0, 4.0], 1.0, &[f], 10.0);
        assert!(!r.saturated);
        assert!(r.delta > 0.0);
        assert!(r.constant_at_delta <= 10.0 + 1e-9);
        let constants: Vec<f64> = r.table.iter().map(|row| row.constant).collect();
        assert!(constants.windows(2).all(|w| w[0] <= w[1] + 1e-15));
    }
}
