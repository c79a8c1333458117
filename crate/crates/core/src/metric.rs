//! Finite metric spaces: point ids, distance oracles and the point file reader.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense index of a point in its owning space.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PointId(pub u32);

impl PointId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for PointId {
    #[inline]
    fn from(i: usize) -> Self {
        PointId(u32::try_from(i).expect("point index exceeds u32"))
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite metric space: `n` points with a symmetric distance oracle.
pub trait Metric<T: Scalar>: Sync {
    fn len(&self) -> usize;

    fn dist(&self, a: PointId, b: PointId) -> T;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Scalar, M: Metric<T> + ?Sized> Metric<T> for &M {
    fn len(&self) -> usize {
        (**self).len()
    }
    #[inline]
    fn dist(&self, a: PointId, b: PointId) -> T {
        (**self).dist(a, b)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Default)]
pub enum Norm {
    L1,
    #[default]
    L2,
    Linf,
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" => Ok(Norm::Linf),
            other => Err(Error::Contract(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        })
    }
}

impl Norm {
    /// Distance between two coordinate vectors of equal length.
    #[inline]
    pub fn eval<T: Scalar>(self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Norm::L1 => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs()),
            Norm::L2 => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| {
                    let d = x - y;
                    acc + d * d
                })
                .sqrt(),
            Norm::Linf => a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs())),
        }
    }
}

/// Points stored as a row-major coordinate matrix, measured with a norm.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordSpace<T> {
    coords: Vec<T>,
    dim: usize,
    norm: Norm,
}

impl<T: Scalar> CoordSpace<T> {
    /// Builds a space from a flat row-major buffer. `coords.len()` must be a
    /// multiple of `dim`.
    pub fn new(coords: Vec<T>, dim: usize, norm: Norm) -> Result<Self> {
        if dim == 0 {
            if !coords.is_empty() {
                return Err(Error::Contract("zero dimension with coordinates".into()));
            }
        } else if coords.len() % dim != 0 {
            return Err(Error::Contract(format!(
                "{} coordinates do not split into rows of {dim}",
                coords.len()
            )));
        }
        Ok(CoordSpace { coords, dim, norm })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R], norm: Norm) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {dim} coordinates, found {}", r.len()),
                });
            }
            coords.extend_from_slice(r);
        }
        if dim == 0 && !rows.is_empty() {
            return Err(Error::Contract(format!(
                "{} points of dimension 0",
                rows.len()
            )));
        }
        Ok(CoordSpace { coords, dim, norm })
    }

    /// Convenience constructor for 1-D inputs.
    pub fn line(xs: &[T], norm: Norm) -> Self {
        CoordSpace {
            coords: xs.to_vec(),
            dim: 1,
            norm,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    #[inline]
    pub fn point(&self, p: PointId) -> &[T] {
        let i = p.index() * self.dim;
        &self.coords[i..i + self.dim]
    }

    /// Distance from a stored point to arbitrary coordinates.
    pub fn dist_to_coords(&self, p: PointId, x: &[T]) -> T {
        self.norm.eval(self.point(p), x)
    }
}

impl<T: Scalar> Metric<T> for CoordSpace<T> {
    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    #[inline]
    fn dist(&self, a: PointId, b: PointId) -> T {
        self.norm.eval(self.point(a), self.point(b))
    }
}

/// Wraps a metric and counts oracle calls.
pub struct DistanceCounter<M> {
    inner: M,
    count: AtomicU64,
}

impl<M> DistanceCounter<M> {
    pub fn new(inner: M) -> Self {
        DistanceCounter {
            inner,
            count: AtomicU64::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<T: Scalar, M: Metric<T>> Metric<T> for DistanceCounter<M> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    #[inline]
    fn dist(&self, a: PointId, b: PointId) -> T {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.dist(a, b)
    }
}

/// Reads one point per line. Coordinates are separated by whitespace or
/// commas; blank lines and lines starting with `#` are skipped.
pub fn load_points<T: Scalar, R: BufRead>(reader: R, norm: Norm) -> Result<CoordSpace<T>> {
    let mut coords = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut arity = 0;
        for tok in trimmed.split(|c: char| c == ',' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            let v: T = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("not a number: `{tok}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value `{tok}`"),
                });
            }
            coords.push(v);
            arity += 1;
        }
        match dim {
            None => dim = Some(arity),
            Some(d) if d != arity => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {d} coordinates, found {arity}"),
                })
            }
            Some(_) => {}
        }
    }
    match dim {
        None => Err(Error::EmptyInput),
        Some(0) => Err(Error::Parse {
            line: 0,
            msg: "points have no coordinates".into(),
        }),
        Some(d) => CoordSpace::new(coords, d, norm),
    }
}

/// `d(p, S)` with the achieving member of `S`; ties go to the smallest id.
pub fn dist_to_set<T: Scalar, M: Metric<T> + ?Sized>(
    space: &M,
    p: PointId,
    set: &[PointId],
) -> Result<(T, PointId)> {
    let mut best: Option<(T, PointId)> = None;
    for &s in set {
        let d = space.dist(p, s);
        best = match best {
            Some((bd, bs)) if bd < d || (bd == d && bs <= s) => Some((bd, bs)),
            _ => Some((d, s)),
        };
    }
    best.ok_or_else(|| Error::Contract("distance to an empty set".into()))
}

/// Ratio of the largest to the smallest pairwise distance.
pub fn spread<T: Scalar, M: Metric<T> + ?Sized>(space: &M) -> Result<T> {
    let n = space.len();
    if n < 2 {
        return Err(Error::Contract("spread needs at least two points".into()));
    }
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = space.dist(i.into(), j.into());
            if d == T::zero() {
                return Err(Error::SpreadUndefined(i, j));
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Ok(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, norm: Norm) -> Result<CoordSpace<f64>> {
        load_points(s.as_bytes(), norm)
    }

    #[test]
    fn loads_one_dimensional_points() {
        let s = parse("0\n1\n3\n7", Norm::L2).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.dist(PointId(0), PointId(3)), 7.0);
    }

    #[test]
    fn norms_on_a_345_triangle() {
        let l2 = parse("0 0\n3 4", Norm::L2).unwrap();
        assert_eq!(l2.dist(PointId(0), PointId(1)), 5.0);
        let l1 = parse("0 0\n3 4", Norm::L1).unwrap();
        assert_eq!(l1.dist(PointId(0), PointId(1)), 7.0);
        let linf = parse("0,0\n3,4", Norm::Linf).unwrap();
        assert_eq!(linf.dist(PointId(0), PointId(1)), 4.0);
    }

    #[test]
    fn skips_comments_and_blank_lines() {
        let s = parse("# header\n\n1, 2\n  \n3 4\n", Norm::L1).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.point(PointId(1)), &[3.0, 4.0]);
    }

    #[test]
    fn ragged_rows_name_the_line() {
        match parse("0 0\n1 1\n# c\n2", Norm::L2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_token_and_empty_input() {
        assert!(matches!(
            parse("1\nx\n", Norm::L2),
            Err(Error::Parse { line: 2, .. })
        ));
        assert_eq!(parse("# nothing\n\n", Norm::L2), Err(Error::EmptyInput));
    }

    #[test]
    fn dist_to_set_cases() {
        let s = CoordSpace::line(&[0.0, 1.0, 3.0, 7.0], Norm::L2);
        let set = [PointId(0), PointId(3)];
        assert_eq!(
            dist_to_set(&s, PointId(1), &set).unwrap(),
            (1.0, PointId(0))
        );
        assert_eq!(
            dist_to_set(&s, PointId(3), &set).unwrap(),
            (0.0, PointId(3))
        );
        // brute force: min(d(3,0), d(3,7)) = min(3, 4)
        let s2 = CoordSpace::line(&[0.0, 3.0, 7.0], Norm::L2);
        assert_eq!(
            dist_to_set(&s2, PointId(1), &[PointId(0), PointId(2)]).unwrap(),
            (3.0, PointId(0))
        );
        assert!(dist_to_set(&s, PointId(1), &[]).is_err());
    }

    #[test]
    fn dist_to_set_ties_pick_smallest_id() {
        let s = CoordSpace::line(&[0.0, 1.0, 2.0], Norm::L2);
        let (d, a) = dist_to_set(&s, PointId(1), &[PointId(2), PointId(0)]).unwrap();
        assert_eq!((d, a), (1.0, PointId(0)));
    }

    #[test]
    fn spread_cases() {
        let s = CoordSpace::line(&[0.0, 1.0, 3.0, 7.0], Norm::L2);
        assert_eq!(spread(&s).unwrap(), 7.0);
        assert_eq!(
            spread(&CoordSpace::line(&[0.0, 1.0], Norm::L2)).unwrap(),
            1.0
        );
        assert_eq!(
            spread(&CoordSpace::line(&[0.0, 0.0], Norm::L2)),
            Err(Error::SpreadUndefined(0, 1))
        );
    }

    #[test]
    fn counter_counts_calls() {
        let s = CoordSpace::line(&[0.0, 1.0, 3.0], Norm::L1);
        let c = DistanceCounter::new(&s);
        let _: f64 = c.dist(PointId(0), PointId(1));
        let _: f64 = c.dist(PointId(1), PointId(2));
        assert_eq!(c.count(), 2);
        c.reset();
        assert_eq!(c.count(), 0);
    }

    #[test]
    fn works_for_f32() {
        let s: CoordSpace<f32> = load_points("0 0\n3 4".as_bytes(), Norm::L2).unwrap();
        assert_eq!(s.dist(PointId(0), PointId(1)), 5.0f32);
    }
}
