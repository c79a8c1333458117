//! Seeded synthetic inputs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{CoordSpace, Norm};
use crate::scalar::Scalar;

/// `n` points uniform in `[0, 1)^dim`.
pub fn uniform<T: Scalar>(dim: usize, n: usize, seed: u64, norm: Norm) -> Result<CoordSpace<T>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..n * dim).map(|_| T::of(rng.gen::<f64>())).collect();
    CoordSpace::new(coords, dim, norm)
}

/// `n` points on a line at `2^0, 2^1, …, 2^(n-1)`.
pub fn expline<T: Scalar>(n: usize, norm: Norm) -> Result<CoordSpace<T>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let xs: Vec<T> = (0..n).map(|i| T::of(2f64.powi(i as i32))).collect();
    Ok(CoordSpace::line(&xs, norm))
}

/// Half the points uniform in the unit square, half in a square of side
/// `1e-6` centered at `(3, 3)`.
pub fn two_scale<T: Scalar>(n: usize, seed: u64, norm: Norm) -> Result<CoordSpace<T>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(2 * n);
    for i in 0..n {
        let (x, y) = (rng.gen::<f64>(), rng.gen::<f64>());
        if i % 2 == 0 {
            coords.extend([T::of(x), T::of(y)]);
        } else {
            coords.extend([T::of(3.0 + 1e-6 * (x - 0.5)), T::of(3.0 + 1e-6 * (y - 0.5))]);
        }
    }
    CoordSpace::new(coords, 2, norm)
}

/// A generator spec: `uniform:<dim>:<n>`, `expline:<n>` or `twoscale:<n>`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    Uniform { dim: usize, n: usize },
    Expline { n: usize },
    TwoScale { n: usize },
}

impl Generator {
    pub fn len(&self) -> usize {
        match *self {
            Generator::Uniform { n, .. } | Generator::Expline { n } | Generator::TwoScale { n } => {
                n
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generate<T: Scalar>(&self, seed: u64, norm: Norm) -> Result<CoordSpace<T>> {
        match *self {
            Generator::Uniform { dim, n } => uniform(dim, n, seed, norm),
            Generator::Expline { n } => expline(n, norm),
            Generator::TwoScale { n } => two_scale(n, seed, norm),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Format {
            what: "generator",
            msg: format!("{s:?}: {msg}"),
        };
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| bad("expected a non-negative integer"))
        };
        let g = match parts.as_slice() {
            ["uniform", d, n] => {
                let dim = num(d)?;
                if dim == 0 {
                    return Err(bad("dimension must be positive"));
                }
                Generator::Uniform { dim, n: num(n)? }
            }
            ["expline", n] => Generator::Expline { n: num(n)? },
            ["twoscale", n] => Generator::TwoScale { n: num(n)? },
            _ => {
                return Err(bad(
                    "expected uniform:<dim>:<n>, expline:<n> or twoscale:<n>",
                ))
            }
        };
        if g.is_empty() {
            return Err(bad("needs at least one point"));
        }
        if matches!(g, Generator::Expline { n } if n > 1000) {
            return Err(bad("expline supports at most 1000 points"));
        }
        Ok(g)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Generator::Uniform { dim, n } => write!(f, "uniform:{dim}:{n}"),
            Generator::Expline { n } => write!(f, "expline:{n}"),
            Generator::TwoScale { n } => write!(f, "twoscale:{n}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{spread, Metric, PointId};

    #[test]
    fn parse_and_generate() {
        let g: Generator = "uniform:2:10".parse().unwrap();
        assert_eq!(g, Generator::Uniform { dim: 2, n: 10 });
        assert_eq!(g.to_string(), "uniform:2:10");
        let a: CoordSpace<f64> = g.generate(7, Norm::L2).unwrap();
        let b: CoordSpace<f64> = g.generate(7, Norm::L2).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.point(PointId(3)), b.point(PointId(3)));
        assert!("uniform:2:0".parse::<Generator>().is_err());
        assert!("cube:3".parse::<Generator>().is_err());
        assert!("expline:x".parse::<Generator>().is_err());
    }

    #[test]
    fn expline_spread() {
        let s: CoordSpace<f64> = expline(64, Norm::L2).unwrap();
        assert_eq!(s.point(PointId(63))[0], 2f64.powi(63));
        assert_eq!(spread(&s).unwrap(), 2f64.powi(63) - 1.0);
        let t: CoordSpace<f64> = two_scale(20, 1, Norm::L2).unwrap();
        assert!(t.dist(PointId(1), PointId(3)) < 2e-6);
    }
}
