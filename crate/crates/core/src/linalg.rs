// SPDX-License-Identifier: Apache-2.0

//! Two-dimensional vectors and 2×2 matrices.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// Anti-clockwise rotation by a quarter turn: `(x, y) -> (-y, x)`.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    /// Scalar cross product `self.x * other.y - self.y * other.x`.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.x == T::zero() && self.y == T::zero()
    }

    /// Sup norm.
    #[inline]
    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs())
    }

    /// Outer product `self ⊗ other`.
    #[inline]
    pub fn outer(self, other: Self) -> Mat2<T> {
        Mat2::new(
            self.x * other.x,
            self.x * other.y,
            self.y * other.x,
            self.y * other.y,
        )
    }

    #[inline]
    pub fn component(self, i: usize) -> T {
        match i {
            0 => self.x,
            1 => self.y,
            _ => panic!("Vec2 component index {i} out of range"),
        }
    }

    #[inline]
    pub fn with_component(mut self, i: usize, v: T) -> Self {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            _ => panic!("Vec2 component index {i} out of range"),
        }
        self
    }

    #[inline]
    pub fn unit(i: usize) -> Self {
        Self::zero().with_component(i, T::one())
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x = self.x + rhs.x;
        self.y = self.y + rhs.y;
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> SubAssign for Vec2<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.x = self.x - rhs.x;
        self.y = self.y - rhs.y;
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> Mat2<T> {
    #[inline]
    pub const fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn identity() -> Self {
        Self::scalar(T::one())
    }

    #[inline]
    pub fn scalar(s: T) -> Self {
        Self::new(s, T::zero(), T::zero(), s)
    }

    /// Matrix with the given vectors as columns.
    #[inline]
    pub fn from_cols(c0: Vec2<T>, c1: Vec2<T>) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    #[inline]
    pub fn col(&self, j: usize) -> Vec2<T> {
        match j {
            0 => Vec2::new(self.a, self.c),
            1 => Vec2::new(self.b, self.d),
            _ => panic!("Mat2 column index {j} out of range"),
        }
    }

    #[inline]
    pub fn transpose(self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    #[inline]
    pub fn det(self) -> T {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn trace(self) -> T {
        self.a + self.d
    }

    /// Inverse, or `None` for an exactly singular matrix.
    pub fn inverse(self) -> Option<Self> {
        let det = self.det();
        if det == T::zero() || !det.is_finite() {
            return None;
        }
        let inv = T::one() / det;
        Some(Self::new(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv))
    }

    #[inline]
    pub fn mul_vec(self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    /// Quadratic form `M v · v`.
    #[inline]
    pub fn quad(self, v: Vec2<T>) -> T {
        self.mul_vec(v).dot(v)
    }

    #[inline]
    pub fn max_abs(self) -> T {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> T {
        match (i, j) {
            (0, 0) => self.a,
            (0, 1) => self.b,
            (1, 0) => self.c,
            (1, 1) => self.d,
            _ => panic!("Mat2 index ({i}, {j}) out of range"),
        }
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    #[inline]
    fn add(self, r: Self) -> Self {
        Self::new(self.a + r.a, self.b + r.b, self.c + r.c, self.d + r.d)
    }
}

impl<T: Real> AddAssign for Mat2<T> {
    #[inline]
    fn add_assign(&mut self, r: Self) {
        *self = *self + r;
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, r: Self) -> Self {
        Self::new(self.a - r.a, self.b - r.b, self.c - r.c, self.d - r.d)
    }
}

impl<T: Real> SubAssign for Mat2<T> {
    #[inline]
    fn sub_assign(&mut self, r: Self) {
        *self = *self - r;
    }
}

impl<T: Real> Neg for Mat2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.a, -self.b, -self.c, -self.d)
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, r: Self) -> Self {
        Self::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

impl<T: Real> Mul<Vec2<T>> for Mat2<T> {
    type Output = Vec2<T>;
    #[inline]
    fn mul(self, v: Vec2<T>) -> Vec2<T> {
        self.mul_vec(v)
    }
}

impl<T> Index<(usize, usize)> for Mat2<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        match (i, j) {
            (0, 0) => &self.a,
            (0, 1) => &self.b,
            (1, 0) => &self.c,
            (1, 1) => &self.d,
            _ => panic!("Mat2 index ({i}, {j}) out of range"),
        }
    }
}
