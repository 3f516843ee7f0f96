//! Integer lattice points and origin-centred boxes.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest lattice dimension handled anywhere in the crate.
pub const MAX_DIM: usize = 3;

/// A point of Z^d for 1 <= d <= [`MAX_DIM`].
///
/// Unused trailing coordinates are kept at zero so that derived `Eq`/`Hash`
/// agree with lattice equality.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Point {
    /// Builds a point from its coordinates.
    ///
    /// Panics when `coords` is empty or longer than [`MAX_DIM`]; use
    /// [`Point::try_new`] for untrusted input.
    pub fn new(coords: &[i64]) -> Self {
        Self::try_new(coords).unwrap_or_else(|| {
            panic!("lattice points need 1..={MAX_DIM} coordinates, got {}", coords.len())
        })
    }

    pub fn try_new(coords: &[i64]) -> Option<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return None;
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Some(Self {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&[0; MAX_DIM][..dim])
    }

    /// Unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut p = Self::origin(dim);
        p.coords[axis] = 1;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Max-norm ‖x‖∞.
    pub fn linf(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Euclidean inner product with a real vector of the same dimension.
    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.coords()
            .iter()
            .zip(theta)
            .map(|(&c, &t)| c as f64 * t)
            .sum()
    }

    /// Representative of the class {x, -x}; used to share values of even functions.
    pub fn canonical_sign(self) -> Self {
        let neg = -self;
        if neg < self {
            neg
        } else {
            self
        }
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for k in 0..MAX_DIM {
            out.coords[k] += rhs.coords[k];
        }
        out
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        self + (-rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        let mut out = self;
        for c in out.coords.iter_mut() {
            *c = -*c;
        }
        out
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            return write!(f, "{}", self.coords[0]);
        }
        write!(f, "(")?;
        for (k, c) in self.coords().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Point::try_new(&v).ok_or_else(|| {
            serde::de::Error::custom(format!(
                "lattice point must have 1..={MAX_DIM} coordinates, got {}",
                v.len()
            ))
        })
    }
}

/// The box {x in Z^d : ‖x‖∞ <= radius} with a fixed lexicographic site order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxLattice {
    dim: usize,
    radius: i64,
    side: usize,
}

impl BoxLattice {
    pub fn new(dim: usize, radius: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Self {
            dim,
            radius: radius as i64,
            side: 2 * radius + 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius as usize
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim && p.linf() <= self.radius
    }

    pub fn index(&self, p: &Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        for &c in p.coords() {
            idx = idx * self.side + (c + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> Point {
        let mut c = [0i64; MAX_DIM];
        for k in (0..self.dim).rev() {
            c[k] = (idx % self.side) as i64 - self.radius;
            idx /= self.side;
        }
        Point::new(&c[..self.dim])
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Number of sites with ‖x‖∞ = r in Z^d.
pub fn shell_size(dim: usize, r: usize) -> usize {
    if r == 0 {
        1
    } else {
        (2 * r + 1).pow(dim as u32) - (2 * r - 1).pow(dim as u32)
    }
}
