use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DiscreteManifold, Edge};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-edge coefficient `a_e ∈ [λ, Λ]` of a divergence-form operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientField {
    Constant { value: f64 },
    Random { lower: f64, upper: f64, seed: u64 },
    Checkerboard { lower: f64, upper: f64 },
}

/// Descriptor of a test space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    Path {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    TorusGrid {
        n1: usize,
        n2: usize,
    },
    RandomGeometric {
        n: usize,
        radius: f64,
        seed: u64,
    },
    DivergenceGrid {
        n1: usize,
        n2: usize,
        coefficient: CoefficientField,
    },
}

impl GraphSpec {
    pub fn path(n: usize) -> Self {
        Self::Path { n }
    }

    pub fn cycle(n: usize) -> Self {
        Self::Cycle { n }
    }

    pub fn torus_grid(n1: usize, n2: usize) -> Self {
        Self::TorusGrid { n1, n2 }
    }

    /// Parses descriptors such as `cycle(32)`, `torus_grid(8,8)`,
    /// `random_geometric(100,0.2)` or `divergence_grid(8,8,random:0.5:2)`.
    /// `seed` fills in the seed of random generators when the descriptor
    /// omits it.
    pub fn parse(desc: &str, seed: u64) -> Result<Self> {
        let bad = || Error::InvalidDescriptor(desc.to_string());
        let desc_trim = desc.trim();
        let open = desc_trim.find('(').ok_or_else(bad)?;
        if !desc_trim.ends_with(')') {
            return Err(bad());
        }
        let name = &desc_trim[..open];
        let args: Vec<&str> = desc_trim[open + 1..desc_trim.len() - 1]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        let int = |i: usize| -> Result<usize> {
            args.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(bad)
        };
        let spec = match (name, args.len()) {
            ("path", 1) => Self::Path { n: int(0)? },
            ("cycle", 1) => Self::Cycle { n: int(0)? },
            ("torus_grid", 2) => Self::TorusGrid {
                n1: int(0)?,
                n2: int(1)?,
            },
            ("random_geometric", 2 | 3) => Self::RandomGeometric {
                n: int(0)?,
                radius: args[1].parse().map_err(|_| bad())?,
                seed: match args.get(2) {
                    Some(s) => s.parse().map_err(|_| bad())?,
                    None => seed,
                },
            },
            ("divergence_grid", 3) => Self::DivergenceGrid {
                n1: int(0)?,
                n2: int(1)?,
                coefficient: parse_coefficient(args[2], seed).ok_or_else(bad)?,
            },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

fn parse_coefficient(s: &str, seed: u64) -> Option<CoefficientField> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| parts.get(i).and_then(|p| p.parse::<f64>().ok());
    match parts[0] {
        "const" if parts.len() == 2 => Some(CoefficientField::Constant { value: num(1)? }),
        "random" if parts.len() == 3 || parts.len() == 4 => Some(CoefficientField::Random {
            lower: num(1)?,
            upper: num(2)?,
            seed: match parts.get(3) {
                Some(p) => p.parse().ok()?,
                None => seed,
            },
        }),
        "checker" if parts.len() == 3 => Some(CoefficientField::Checkerboard {
            lower: num(1)?,
            upper: num(2)?,
        }),
        _ => None,
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Path { n } => write!(f, "path({n})"),
            Self::Cycle { n } => write!(f, "cycle({n})"),
            Self::TorusGrid { n1, n2 } => write!(f, "torus_grid({n1},{n2})"),
            Self::RandomGeometric { n, radius, seed } => {
                write!(f, "random_geometric({n},{radius},{seed})")
            }
            Self::DivergenceGrid {
                n1,
                n2,
                coefficient,
            } => {
                let c = match coefficient {
                    CoefficientField::Constant { value } => format!("const:{value}"),
                    CoefficientField::Random { lower, upper, seed } => {
                        format!("random:{lower}:{upper}:{seed}")
                    }
                    CoefficientField::Checkerboard { lower, upper } => {
                        format!("checker:{lower}:{upper}")
                    }
                };
                write!(f, "divergence_grid({n1},{n2},{c})")
            }
        }
    }
}

/// Builds a connected test space with unit vertex measure.
pub fn build_manifold<T: Real>(spec: &GraphSpec) -> Result<DiscreteManifold<T>> {
    let invalid = |why: &str| Error::InvalidDescriptor(format!("{spec}: {why}"));
    let one = T::one();
    let (n, edges, coords) = match *spec {
        GraphSpec::Path { n } => {
            if n < 2 {
                return Err(invalid("path needs at least 2 vertices"));
            }
            let edges = (0..n - 1).map(|i| Edge::new(i, i + 1, one, one)).collect();
            (n, edges, None)
        }
        GraphSpec::Cycle { n } => {
            if n < 3 {
                return Err(invalid("cycle needs at least 3 vertices"));
            }
            let edges = (0..n).map(|i| Edge::new(i, (i + 1) % n, one, one)).collect();
            (n, edges, None)
        }
        GraphSpec::TorusGrid { n1, n2 } => {
            if n1 < 3 || n2 < 3 {
                return Err(invalid("torus sides must be at least 3"));
            }
            let id = |i: usize, j: usize| i * n2 + j;
            let mut edges = Vec::with_capacity(2 * n1 * n2);
            for i in 0..n1 {
                for j in 0..n2 {
                    edges.push(Edge::new(id(i, j), id((i + 1) % n1, j), one, one));
                    edges.push(Edge::new(id(i, j), id(i, (j + 1) % n2), one, one));
                }
            }
            (n1 * n2, edges, None)
        }
        GraphSpec::RandomGeometric { n, radius, seed } => {
            if n < 2 || !(radius > 0.0) {
                return Err(invalid("need n >= 2 and a positive radius"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                    if d < radius && d > 0.0 {
                        edges.push(Edge::new(i, j, one, T::lit(d)));
                    }
                }
            }
            (n, edges, Some(pts))
        }
        GraphSpec::DivergenceGrid {
            n1,
            n2,
            ref coefficient,
        } => {
            if n1 < 1 || n2 < 1 || n1 * n2 < 2 {
                return Err(invalid("grid needs at least 2 vertices"));
            }
            let (lower, upper) = match *coefficient {
                CoefficientField::Constant { value } => (value, value),
                CoefficientField::Random { lower, upper, .. }
                | CoefficientField::Checkerboard { lower, upper } => (lower, upper),
            };
            if !(lower > 0.0) || upper < lower {
                return Err(invalid("coefficient bounds must satisfy 0 < lower <= upper"));
            }
            let mut rng = match *coefficient {
                CoefficientField::Random { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
                _ => None,
            };
            let mut coef = |i: usize, j: usize| -> f64 {
                match *coefficient {
                    CoefficientField::Constant { value } => value,
                    CoefficientField::Random { lower, upper, .. } => {
                        let rng = rng.as_mut().expect("seeded");
                        lower + (upper - lower) * rng.random::<f64>()
                    }
                    CoefficientField::Checkerboard { lower, upper } => {
                        if (i + j).is_multiple_of(2) {
                            lower
                        } else {
                            upper
                        }
                    }
                }
            };
            let id = |i: usize, j: usize| i * n2 + j;
            let mut edges = Vec::new();
            for i in 0..n1 {
                for j in 0..n2 {
                    if i + 1 < n1 {
                        let mut e = Edge::new(id(i, j), id(i + 1, j), one, one);
                        e.coefficient = Some(T::lit(coef(i, j)));
                        edges.push(e);
                    }
                    if j + 1 < n2 {
                        let mut e = Edge::new(id(i, j), id(i, j + 1), one, one);
                        e.coefficient = Some(T::lit(coef(i, j)));
                        edges.push(e);
                    }
                }
            }
            let coords = (0..n1)
                .flat_map(|i| (0..n2).map(move |j| [i as f64, j as f64]))
                .collect();
            (n1 * n2, edges, Some(coords))
        }
    };
    let manifold = DiscreteManifold::new(vec![one; n], edges)?.with_generator(spec.clone());
    Ok(match coords {
        Some(c) => manifold.with_coords(c),
        None => manifold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_is_four_regular() {
        let m: DiscreteManifold<f64> = build_manifold(&GraphSpec::torus_grid(4, 4)).unwrap();
        assert_eq!(m.vertex_count(), 16);
        assert!((0..16).all(|x| m.degree(x) == 4));
    }

    #[test]
    fn descriptors_round_trip_through_display() {
        for desc in [
            "path(2)",
            "cycle(32)",
            "torus_grid(8,8)",
            "random_geometric(40,0.35,9)",
            "divergence_grid(4,5,random:0.5:2:3)",
            "divergence_grid(4,4,const:1)",
            "divergence_grid(3,3,checker:0.5:2)",
        ] {
            let spec = GraphSpec::parse(desc, 0).unwrap();
            assert_eq!(spec.to_string(), desc);
        }
        assert!(GraphSpec::parse("cycle(", 0).is_err());
        assert!(GraphSpec::parse("sphere(3)", 0).is_err());
    }

    #[test]
    fn random_geometric_is_deterministic() {
        let spec = GraphSpec::parse("random_geometric(60,0.3)", 11).unwrap();
        let a: DiscreteManifold<f64> = build_manifold(&spec).unwrap();
        let b: DiscreteManifold<f64> = build_manifold(&spec).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.coords(), b.coords());
    }

    #[test]
    fn sparse_random_geometric_is_rejected() {
        let spec = GraphSpec::RandomGeometric {
            n: 50,
            radius: 0.01,
            seed: 1,
        };
        assert!(matches!(
            build_manifold::<f64>(&spec),
            Err(Error::Disconnected { .. })
        ));
    }

    #[test]
    fn divergence_grid_coefficients_in_bounds() {
        let spec = GraphSpec::parse("divergence_grid(5,5,random:0.5:2)", 4).unwrap();
        let m: DiscreteManifold<f64> = build_manifold(&spec).unwrap();
        assert_eq!(m.edges().len(), 40);
        for e in m.edges() {
            let a = e.coefficient.unwrap();
            assert!((0.5..=2.0).contains(&a));
        }
    }
}
