// SPDX-License-Identifier: Apache-2.0

//! Anisotropy functions `γ(z, p)` and spatial weights `a(z)`.
//!
//! Every density is absolutely one-homogeneous in `p`, positive away from
//! `p = 0` and vanishes at `p = 0`. Gradients at `p = 0` are undefined and
//! reported as [`Error::DegenerateDirection`].

use std::fmt;
use std::sync::Arc;

use crate::error::Error;
use crate::geodesic::GraphSurface;
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

pub type SurfaceHandle<T> = Arc<dyn GraphSurface<T>>;

/// User weight: returns `(a(z), ∇a(z))`.
pub type WeightFn<T> = Arc<dyn Fn(Vec2<T>) -> (T, Vec2<T>) + Send + Sync>;

#[derive(Clone)]
pub enum AnisotropyKind<T: Real> {
    /// `γ(p) = |p|`.
    Isotropic,
    /// `γ(p) = |p| (1 + δ cos kθ)` with `θ` the polar angle of `p`.
    KFold { k: u32, delta: T },
    /// `γ(p) = sqrt(p₁² + δ² p₂²)`.
    Elliptic { delta: T },
    /// `γ(z, p) = sqrt(G⁻¹(z) p · p)` for the metric induced by a graph surface.
    MetricInduced(SurfaceHandle<T>),
}

#[derive(Clone)]
pub enum Weight<T: Real> {
    Unit,
    /// `a(z) = sqrt(det G(z))`.
    MetricDeterminant(SurfaceHandle<T>),
    User(WeightFn<T>),
}

impl<T: Real> fmt::Debug for AnisotropyKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Isotropic => write!(f, "Isotropic"),
            Self::KFold { k, delta } => write!(f, "KFold {{ k: {k}, delta: {delta} }}"),
            Self::Elliptic { delta } => write!(f, "Elliptic {{ delta: {delta} }}"),
            Self::MetricInduced(s) => write!(f, "MetricInduced({s:?})"),
        }
    }
}

impl<T: Real> fmt::Debug for Weight<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unit => write!(f, "Unit"),
            Self::MetricDeterminant(s) => write!(f, "MetricDeterminant({s:?})"),
            Self::User(_) => write!(f, "User(..)"),
        }
    }
}

/// An anisotropy function together with its weight.
#[derive(Clone, Debug)]
pub struct AnisotropyDensity<T: Real> {
    kind: AnisotropyKind<T>,
    weight: Weight<T>,
}

impl<T: Real> AnisotropyDensity<T> {
    /// Validates the parameters of `kind` and pairs it with `weight`.
    ///
    /// k-fold densities must be even (absolute homogeneity) and satisfy
    /// `|δ|(k²-1) < 1`, which makes `θ ↦ γ + γ''` positive on the unit circle.
    pub fn new(kind: AnisotropyKind<T>, weight: Weight<T>) -> Result<Self, Error> {
        match &kind {
            AnisotropyKind::KFold { k, delta } => {
                if *k == 0 || k % 2 == 1 {
                    return Err(Error::InvalidParameter(format!(
                        "k-fold anisotropy needs a positive even k for γ(-p) = γ(p), got k = {k}"
                    )));
                }
                let kf = T::from_count(*k as usize);
                let bound = delta.abs() * (kf * kf - T::one());
                if !(bound < T::one()) || !(delta.abs() < T::one()) {
                    return Err(Error::ConvexityGuard {
                        k: *k,
                        delta: delta.as_f64(),
                        bound: bound.as_f64(),
                    });
                }
            }
            AnisotropyKind::Elliptic { delta } => {
                if !(*delta > T::zero()) || !delta.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "elliptic anisotropy needs delta > 0, got {delta}"
                    )));
                }
            }
            AnisotropyKind::Isotropic | AnisotropyKind::MetricInduced(_) => {}
        }
        Ok(Self { kind, weight })
    }

    pub fn isotropic() -> Self {
        Self {
            kind: AnisotropyKind::Isotropic,
            weight: Weight::Unit,
        }
    }

    pub fn kfold(k: u32, delta: T) -> Result<Self, Error> {
        Self::new(AnisotropyKind::KFold { k, delta }, Weight::Unit)
    }

    pub fn elliptic(delta: T) -> Result<Self, Error> {
        Self::new(AnisotropyKind::Elliptic { delta }, Weight::Unit)
    }

    /// Riemannian density of a graph surface: `γ = sqrt(G⁻¹p·p)`, `a = sqrt(det G)`.
    pub fn metric_induced(surface: SurfaceHandle<T>) -> Self {
        Self {
            kind: AnisotropyKind::MetricInduced(surface.clone()),
            weight: Weight::MetricDeterminant(surface),
        }
    }

    pub fn with_weight(mut self, weight: Weight<T>) -> Self {
        self.weight = weight;
        self
    }

    pub fn kind(&self) -> &AnisotropyKind<T> {
        &self.kind
    }

    pub fn weight_kind(&self) -> &Weight<T> {
        &self.weight
    }

    /// True when neither `γ` nor `a` depend on `z`.
    pub fn is_spatially_homogeneous(&self) -> bool {
        matches!(
            self.kind,
            AnisotropyKind::Isotropic | AnisotropyKind::KFold { .. } | AnisotropyKind::Elliptic { .. }
        ) && matches!(self.weight, Weight::Unit)
    }

    pub fn gamma(&self, z: Vec2<T>, p: Vec2<T>) -> T {
        match &self.kind {
            AnisotropyKind::Isotropic => p.norm(),
            AnisotropyKind::KFold { k, delta } => {
                let (r, cos_k, _) = polar_k(p, *k);
                r * (T::one() + *delta * cos_k)
            }
            AnisotropyKind::Elliptic { delta } => {
                (p.x * p.x + *delta * *delta * p.y * p.y).sqrt()
            }
            AnisotropyKind::MetricInduced(surface) => {
                let jet = surface.jet(z);
                metric_gamma(jet.gradient, p)
            }
        }
    }

    /// Gradient of `p ↦ γ(z, p)`.
    pub fn gamma_p(&self, z: Vec2<T>, p: Vec2<T>) -> Result<Vec2<T>, Error> {
        if p.is_zero() {
            return Err(Error::DegenerateDirection);
        }
        Ok(match &self.kind {
            AnisotropyKind::Isotropic => p * (T::one() / p.norm()),
            AnisotropyKind::KFold { k, delta } => {
                let (r, cos_k, sin_k) = polar_k(p, *k);
                let kf = T::from_count(*k as usize);
                let radial = T::one() + *delta * cos_k;
                let angular = -kf * *delta * sin_k;
                (p * radial + p.perp() * angular) * (T::one() / r)
            }
            AnisotropyKind::Elliptic { delta } => {
                let mp = Vec2::new(p.x, *delta * *delta * p.y);
                mp * (T::one() / self.gamma(z, p))
            }
            AnisotropyKind::MetricInduced(surface) => {
                let g = surface.jet(z).gradient;
                metric_gamma_p(g, p)
            }
        })
    }

    /// Hessian of `p ↦ γ(z, p)`.
    pub fn gamma_pp(&self, z: Vec2<T>, p: Vec2<T>) -> Result<Mat2<T>, Error> {
        if p.is_zero() {
            return Err(Error::DegenerateDirection);
        }
        Ok(match &self.kind {
            AnisotropyKind::Isotropic => {
                let r = p.norm();
                let n = p * (T::one() / r);
                (Mat2::identity() - n.outer(n)).scale(T::one() / r)
            }
            AnisotropyKind::KFold { k, delta } => {
                // One-homogeneous: γ_pp = (g + g'') / r  e_θ ⊗ e_θ.
                let (r, cos_k, _) = polar_k(p, *k);
                let kf = T::from_count(*k as usize);
                let stiffness = T::one() + *delta * (T::one() - kf * kf) * cos_k;
                let e_theta = p.perp() * (T::one() / r);
                e_theta.outer(e_theta).scale(stiffness / r)
            }
            AnisotropyKind::Elliptic { delta } => {
                let m = Mat2::new(T::one(), T::zero(), T::zero(), *delta * *delta);
                let gp = self.gamma_p(z, p)?;
                (m - gp.outer(gp)).scale(T::one() / self.gamma(z, p))
            }
            AnisotropyKind::MetricInduced(surface) => {
                let g = surface.jet(z).gradient;
                let gp = metric_gamma_p(g, p);
                (metric_inverse(g) - gp.outer(gp)).scale(T::one() / metric_gamma(g, p))
            }
        })
    }

    /// Gradient of `z ↦ γ(z, p)`.
    pub fn gamma_z(&self, z: Vec2<T>, p: Vec2<T>) -> Vec2<T> {
        match &self.kind {
            AnisotropyKind::MetricInduced(surface) => {
                let jet = surface.jet(z);
                let gamma = metric_gamma(jet.gradient, p);
                if gamma == T::zero() {
                    return Vec2::zero();
                }
                let det = T::one() + jet.gradient.norm_squared();
                let s = jet.gradient.dot(p);
                let dq = jet.hessian.mul_vec(p) * (-s / det)
                    + jet.hessian.mul_vec(jet.gradient) * (s * s / (det * det));
                dq * (T::one() / gamma)
            }
            _ => Vec2::zero(),
        }
    }

    /// `(a(z), ∇a(z))`.
    pub fn weight(&self, z: Vec2<T>) -> (T, Vec2<T>) {
        match &self.weight {
            Weight::Unit => (T::one(), Vec2::zero()),
            Weight::MetricDeterminant(surface) => {
                let jet = surface.jet(z);
                let a = (T::one() + jet.gradient.norm_squared()).sqrt();
                (a, jet.hessian.mul_vec(jet.gradient) * (T::one() / a))
            }
            Weight::User(f) => f(z),
        }
    }
}

/// `(|p|, cos kθ, sin kθ)` with `θ = atan2(p₂, p₁)`.
#[inline]
fn polar_k<T: Real>(p: Vec2<T>, k: u32) -> (T, T, T) {
    let theta = p.y.atan2(p.x);
    let (s, c) = (T::from_count(k as usize) * theta).sin_cos();
    (p.norm(), c, s)
}

/// `G⁻¹ = I - g⊗g / (1 + |g|²)` for `G = I + g⊗g`.
#[inline]
pub(crate) fn metric_inverse<T: Real>(g: Vec2<T>) -> Mat2<T> {
    let det = T::one() + g.norm_squared();
    Mat2::identity() - g.outer(g).scale(T::one() / det)
}

#[inline]
fn metric_gamma<T: Real>(g: Vec2<T>, p: Vec2<T>) -> T {
    let det = T::one() + g.norm_squared();
    let s = g.dot(p);
    (p.norm_squared() - s * s / det).max(T::zero()).sqrt()
}

#[inline]
fn metric_gamma_p<T: Real>(g: Vec2<T>, p: Vec2<T>) -> Vec2<T> {
    let det = T::one() + g.norm_squared();
    let s = g.dot(p);
    (p - g * (s / det)) * (T::one() / metric_gamma(g, p))
}
