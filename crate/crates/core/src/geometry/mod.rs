//! Finite metric-measure spaces built from weighted graphs.
//!
//! A [`DiscreteManifold`] carries a positive vertex measure, weighted edges
//! with positive lengths and the all-pairs shortest-path metric. Distances are
//! computed once at construction; afterwards the value is immutable and can
//! be shared across threads.

mod generators;
mod report;

pub use generators::{build_manifold, CoefficientField, GraphSpec};
pub use report::{geometry_report, GeometryReport, PoincareEstimate, PoincareRequest};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T> {
    pub u: usize,
    pub v: usize,
    pub weight: T,
    pub length: T,
    /// Divergence-form coefficient `a_e`, when the generator supplies one.
    pub coefficient: Option<T>,
}

impl<T: Real> Edge<T> {
    pub fn new(u: usize, v: usize, weight: T, length: T) -> Self {
        Self {
            u,
            v,
            weight,
            length,
            coefficient: None,
        }
    }
}

/// Vertices of the space sorted by distance from one center, with prefix
/// measures. Every ball around the center is a prefix of `order`.
#[derive(Debug, Clone)]
pub(crate) struct BallIndex<T> {
    pub(crate) order: Vec<usize>,
    pub(crate) dist: Vec<T>,
    pub(crate) prefix_measure: Vec<T>,
}

impl<T: Real> BallIndex<T> {
    /// Number of vertices strictly closer than `r`.
    pub(crate) fn count_below(&self, r: T) -> usize {
        self.dist.partition_point(|&d| d < r)
    }

    /// End positions (exclusive) of the groups of equidistant vertices, paired
    /// with their common distance.
    pub(crate) fn shells(&self) -> Vec<(T, usize)> {
        let mut shells = Vec::new();
        let mut i = 0;
        while i < self.dist.len() {
            let d = self.dist[i];
            let mut j = i + 1;
            while j < self.dist.len() && self.dist[j] == d {
                j += 1;
            }
            shells.push((d, j));
            i = j;
        }
        shells
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteManifold<T> {
    measure: DVector<T>,
    edges: Vec<Edge<T>>,
    adjacency: Vec<Vec<(usize, usize)>>,
    distance: DMatrix<T>,
    sorted_radii: Vec<T>,
    balls: Vec<BallIndex<T>>,
    coords: Option<Vec<[f64; 2]>>,
    generator: Option<GraphSpec>,
}

/// Open ball `B(x, r) = {y : d(x, y) < r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: usize,
    pub radius: T,
    /// Members in ascending vertex order.
    pub members: Vec<usize>,
    pub volume: T,
}

#[derive(PartialEq)]
struct HeapItem<T>(T, usize);

impl<T: PartialOrd> Eq for HeapItem<T> {}

impl<T: PartialOrd> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl<T: Real> DiscreteManifold<T> {
    /// Validates the data and precomputes the metric.
    pub fn new(measure: Vec<T>, edges: Vec<Edge<T>>) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        for (vertex, &m) in measure.iter().enumerate() {
            if !(m > T::zero()) || !m.is_finite_value() {
                return Err(Error::InvalidMeasure { vertex });
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (index, e) in edges.iter().enumerate() {
            let bad = |reason: &str| Error::InvalidEdge {
                index,
                u: e.u,
                v: e.v,
                reason: reason.to_string(),
            };
            if e.u >= n || e.v >= n {
                return Err(bad("endpoint out of range"));
            }
            if e.u == e.v {
                return Err(bad("self-loop"));
            }
            if !(e.weight > T::zero()) || !e.weight.is_finite_value() {
                return Err(bad("non-positive weight"));
            }
            if !(e.length > T::zero()) || !e.length.is_finite_value() {
                return Err(bad("non-positive length"));
            }
            if let Some(a) = e.coefficient {
                if !(a > T::zero()) || !a.is_finite_value() {
                    return Err(bad("non-positive coefficient"));
                }
            }
            adjacency[e.u].push((e.v, index));
            adjacency[e.v].push((e.u, index));
        }
        check_connected(&adjacency)?;

        let mut distance = DMatrix::zeros(n, n);
        for source in 0..n {
            let d = dijkstra(&adjacency, &edges, source);
            for (target, value) in d.into_iter().enumerate() {
                distance[(source, target)] = value;
            }
        }
        // enforce exact symmetry; both directions are shortest paths
        for i in 0..n {
            for j in (i + 1)..n {
                let m = distance[(i, j)].min(distance[(j, i)]);
                distance[(i, j)] = m;
                distance[(j, i)] = m;
            }
        }

        let mut radii: Vec<T> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                radii.push(distance[(i, j)]);
            }
        }
        let sorted_radii = dedup_sorted(radii);

        let measure = DVector::from_vec(measure);
        let balls = (0..n)
            .map(|x| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    distance[(x, a)]
                        .partial_cmp(&distance[(x, b)])
                        .unwrap_or(Ordering::Equal)
                        .then(a.cmp(&b))
                });
                let dist: Vec<T> = order.iter().map(|&y| distance[(x, y)]).collect();
                let mut acc = T::zero();
                let prefix_measure = order
                    .iter()
                    .map(|&y| {
                        acc += measure[y];
                        acc
                    })
                    .collect();
                BallIndex {
                    order,
                    dist,
                    prefix_measure,
                }
            })
            .collect();

        Ok(Self {
            measure,
            edges,
            adjacency,
            distance,
            sorted_radii,
            balls,
            coords: None,
            generator: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Self {
        self.coords = Some(coords);
        self
    }

    pub fn with_generator(mut self, spec: GraphSpec) -> Self {
        self.generator = Some(spec);
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.measure.len()
    }

    pub fn measure(&self) -> &DVector<T> {
        &self.measure
    }

    pub fn total_measure(&self) -> T {
        self.measure.iter().fold(T::zero(), |a, &b| a + b)
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Neighbors of `x` as `(vertex, edge index)` pairs.
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// Sum of incident edge weights.
    pub fn weighted_degree(&self, x: usize) -> T {
        self.adjacency[x]
            .iter()
            .fold(T::zero(), |acc, &(_, e)| acc + self.edges[e].weight)
    }

    pub fn distance(&self, x: usize, y: usize) -> T {
        self.distance[(x, y)]
    }

    pub fn distances(&self) -> &DMatrix<T> {
        &self.distance
    }

    /// Distinct positive pairwise distances, ascending.
    pub fn sorted_radii(&self) -> &[T] {
        &self.sorted_radii
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn generator(&self) -> Option<&GraphSpec> {
        self.generator.as_ref()
    }

    pub fn eccentricity(&self, x: usize) -> T {
        *self.balls[x].dist.last().expect("non-empty")
    }

    pub(crate) fn ball_index(&self, x: usize) -> &BallIndex<T> {
        &self.balls[x]
    }

    /// Radii at which ball membership can change, plus the midpoints between
    /// them, half the smallest radius and a radius beyond the diameter.
    /// Membership is piecewise constant in `r`, so this grid sees every ball.
    pub fn radius_grid(&self) -> Vec<T> {
        let radii = &self.sorted_radii;
        let half = T::lit(0.5);
        let mut grid = Vec::with_capacity(2 * radii.len() + 2);
        if let Some(&first) = radii.first() {
            grid.push(first * half);
        }
        for (i, &r) in radii.iter().enumerate() {
            grid.push(r);
            if let Some(&next) = radii.get(i + 1) {
                grid.push((r + next) * half);
            }
        }
        if let Some(&last) = radii.last() {
            grid.push(last * T::lit(1.5));
        }
        grid
    }

    pub fn ball_volume(&self, x: usize, r: T) -> T {
        let idx = &self.balls[x];
        let count = idx.count_below(r);
        if count == 0 {
            T::zero()
        } else {
            idx.prefix_measure[count - 1]
        }
    }

    /// Open ball of center `x` and radius `r > 0`.
    pub fn ball(&self, x: usize, r: T) -> Ball<T> {
        let idx = &self.balls[x];
        let count = idx.count_below(r);
        let mut members = idx.order[..count].to_vec();
        members.sort_unstable();
        Ball {
            center: x,
            radius: r,
            members,
            volume: if count == 0 {
                T::zero()
            } else {
                idx.prefix_measure[count - 1]
            },
        }
    }

    pub fn check_field(&self, f: &DVector<T>) -> Result<()> {
        if f.len() != self.vertex_count() {
            return Err(Error::FieldLength {
                expected: self.vertex_count(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `μ`-weighted mean of `f`.
    pub fn mean(&self, f: &DVector<T>) -> T {
        f.component_mul(&self.measure).sum() / self.total_measure()
    }
}

/// Edge gradient magnitude
/// `|∇f|(x) = (Σ_{y~x} w_xy (f(y) − f(x))² / ℓ_xy²)^{1/2}`.
pub fn gradient<T: Real>(manifold: &DiscreteManifold<T>, f: &DVector<T>) -> DVector<T> {
    DVector::from_iterator(
        manifold.vertex_count(),
        (0..manifold.vertex_count()).map(|x| {
            manifold
                .neighbors(x)
                .iter()
                .fold(T::zero(), |acc, &(y, e)| {
                    let edge = &manifold.edges()[e];
                    let diff = (f[y] - f[x]) / edge.length;
                    acc + edge.weight * diff * diff
                })
                .sqrt()
        }),
    )
}

fn check_connected(adjacency: &[Vec<(usize, usize)>]) -> Result<()> {
    let n = adjacency.len();
    let mut component = vec![usize::MAX; n];
    let mut components = 0;
    let mut witness = None;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        if components == 1 && witness.is_none() {
            witness = Some(start);
        }
        let mut queue = VecDeque::from([start]);
        component[start] = components;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &adjacency[x] {
                if component[y] == usize::MAX {
                    component[y] = components;
                    queue.push_back(y);
                }
            }
        }
        components += 1;
    }
    match witness {
        None => Ok(()),
        Some(witness) => Err(Error::Disconnected {
            components,
            witness,
        }),
    }
}

fn dijkstra<T: Real>(adjacency: &[Vec<(usize, usize)>], edges: &[Edge<T>], source: usize) -> Vec<T> {
    let n = adjacency.len();
    let mut dist: Vec<Option<T>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(T::zero());
    heap.push(HeapItem(T::zero(), source));
    while let Some(HeapItem(d, x)) = heap.pop() {
        if done[x] {
            continue;
        }
        done[x] = true;
        for &(y, e) in &adjacency[x] {
            let candidate = d + edges[e].length;
            if dist[y].is_none_or(|cur| candidate < cur) {
                dist[y] = Some(candidate);
                heap.push(HeapItem(candidate, y));
            }
        }
    }
    dist.into_iter()
        .map(|d| d.expect("connectivity checked"))
        .collect()
}

fn dedup_sorted<T: Real>(mut values: Vec<T>) -> Vec<T> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let rel = T::default_epsilon() * T::lit(64.0);
    let mut out: Vec<T> = Vec::with_capacity(values.len());
    for v in values {
        if v <= T::zero() {
            continue;
        }
        match out.last() {
            Some(&last) if v - last <= rel * v => {}
            _ => out.push(v),
        }
    }
    out
}
