// SPDX-License-Identifier: Apache-2.0

//! Graph surfaces `F(z) = (z₁, z₂, φ(z))` and the Riemannian densities they
//! induce on the parameter plane.

use std::fmt;
use std::sync::Arc;

use crate::anisotropy::AnisotropyDensity;
use crate::curve::PolygonalCurve;
use crate::energy_density::{DensityBundle, SplitMode};
use crate::error::Error;
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

/// Height with its first two derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceJet<T> {
    pub value: T,
    pub gradient: Vec2<T>,
    pub hessian: Mat2<T>,
}

/// A `C³` height function over the plane.
pub trait GraphSurface<T: Real>: Send + Sync + fmt::Debug {
    fn jet(&self, z: Vec2<T>) -> SurfaceJet<T>;

    /// `[∂₁ Hess φ, ∂₂ Hess φ]`.
    fn hessian_derivative(&self, z: Vec2<T>) -> [Mat2<T>; 2];

    fn height(&self, z: Vec2<T>) -> T {
        self.jet(z).value
    }
}

/// `φ ≡ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlatSurface;

impl<T: Real> GraphSurface<T> for FlatSurface {
    fn jet(&self, _z: Vec2<T>) -> SurfaceJet<T> {
        SurfaceJet {
            value: T::zero(),
            gradient: Vec2::zero(),
            hessian: Mat2::zero(),
        }
    }

    fn hessian_derivative(&self, _z: Vec2<T>) -> [Mat2<T>; 2] {
        [Mat2::zero(); 2]
    }
}

/// Smooth compactly supported bump `ψ(s) = exp(-1/(1-s))` for `s < 1`, else 0.
///
/// Returns `[ψ, ψ', ψ'', ψ''']`. With `u = 1/(1-s)`:
/// `ψ' = -u²ψ`, `ψ'' = (u⁴ - 2u³)ψ`, `ψ''' = (-u⁶ + 6u⁵ - 6u⁴)ψ`.
pub fn bump<T: Real>(s: T) -> [T; 4] {
    let zero = [T::zero(); 4];
    if !(s < T::one()) {
        return zero;
    }
    let u = T::one() / (T::one() - s);
    // exp(-u) underflows past -ln(min_positive); the polynomial factors would
    // then produce 0 * inf.
    if !(u < -T::min_positive_value().ln()) {
        return zero;
    }
    let psi = (-u).exp();
    let u2 = u * u;
    let u3 = u2 * u;
    let u4 = u2 * u2;
    let six = T::lit(6.0);
    [
        psi,
        -u2 * psi,
        (u4 - (u3 + u3)) * psi,
        (-u4 * u2 + six * u4 * u - six * u4) * psi,
    ]
}

/// Three bumps `φ(z) = Σ λᵢ ψ(2|z - μᵢ|²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MountainSurface<T> {
    pub centers: [Vec2<T>; 3],
    pub heights: [T; 3],
}

impl<T: Real> Default for MountainSurface<T> {
    /// Centers `(0,0)`, `(2,0)`, `(1,√3)` with heights `1, 3, 4`.
    fn default() -> Self {
        Self {
            centers: [
                Vec2::zero(),
                Vec2::new(T::lit(2.0), T::zero()),
                Vec2::new(T::one(), T::lit(3.0).sqrt()),
            ],
            heights: [T::one(), T::lit(3.0), T::lit(4.0)],
        }
    }
}

impl<T: Real> MountainSurface<T> {
    /// `⅓ Σ μᵢ`.
    pub fn centroid(&self) -> Vec2<T> {
        let sum = self.centers[0] + self.centers[1] + self.centers[2];
        sum * (T::one() / T::lit(3.0))
    }
}

impl<T: Real> GraphSurface<T> for MountainSurface<T> {
    fn jet(&self, z: Vec2<T>) -> SurfaceJet<T> {
        let mut out = SurfaceJet {
            value: T::zero(),
            gradient: Vec2::zero(),
            hessian: Mat2::zero(),
        };
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let sixteen = T::lit(16.0);
        for (mu, lambda) in self.centers.iter().zip(self.heights) {
            let w = z - *mu;
            let [psi, d1, d2, _] = bump(two * w.norm_squared());
            if psi == T::zero() {
                continue;
            }
            out.value = out.value + lambda * psi;
            out.gradient += w * (lambda * four * d1);
            out.hessian += (w.outer(w).scale(sixteen * d2) + Mat2::scalar(four * d1)).scale(lambda);
        }
        out
    }

    fn hessian_derivative(&self, z: Vec2<T>) -> [Mat2<T>; 2] {
        let mut out = [Mat2::zero(); 2];
        let two = T::lit(2.0);
        let sixteen = T::lit(16.0);
        let sixty_four = T::lit(64.0);
        for (mu, lambda) in self.centers.iter().zip(self.heights) {
            let w = z - *mu;
            let [psi, _, d2, d3] = bump(two * w.norm_squared());
            if psi == T::zero() {
                continue;
            }
            // ∂ᵢⱼₖφ = λ (64ψ''' wᵢwⱼwₖ + 16ψ'' (δᵢₖwⱼ + δⱼₖwᵢ + δᵢⱼwₖ))
            for (k, slot) in out.iter_mut().enumerate() {
                let wk = w.component(k);
                let ek = Vec2::unit(k);
                let m = w.outer(w).scale(sixty_four * d3 * wk)
                    + (ek.outer(w) + w.outer(ek) + Mat2::scalar(wk)).scale(sixteen * d2);
                *slot += m.scale(lambda);
            }
        }
        out
    }
}

/// `(G(z), sqrt(det G(z)))` with `G = I + ∇φ ⊗ ∇φ`.
pub fn metric<T: Real>(surface: &dyn GraphSurface<T>, z: Vec2<T>) -> (Mat2<T>, T) {
    let g = surface.jet(z).gradient;
    let metric = Mat2::identity() + g.outer(g);
    (metric, (T::one() + g.norm_squared()).sqrt())
}

/// `(φ, ∇φ, Hess φ)` of the default three-mountain surface.
pub fn mountain_phi<T: Real>(z: Vec2<T>) -> (T, Vec2<T>, Mat2<T>) {
    let jet = MountainSurface::default().jet(z);
    (jet.value, jet.gradient, jet.hessian)
}

/// Geodesic density bundle of a graph surface, split as `Φ⁺ = ½ G₊ p·p` with
/// `G₊ = G + c_φ|z|² I`.
pub fn geodesic_bundle<T: Real>(
    surface: Arc<dyn GraphSurface<T>>,
    c_phi: T,
) -> Result<DensityBundle<T>, Error> {
    if !(c_phi >= T::zero()) {
        return Err(Error::InvalidParameter(format!("c_phi must be >= 0, got {c_phi}")));
    }
    DensityBundle::new(
        AnisotropyDensity::metric_induced(surface),
        SplitMode::GraphShift { c_phi },
    )
}

/// Nodes lifted onto the surface, `(X_j, φ(X_j))`.
pub fn lift<T: Real>(curve: &PolygonalCurve<T>, surface: &dyn GraphSurface<T>) -> Vec<[T; 3]> {
    curve
        .nodes()
        .iter()
        .map(|x| [x.x, x.y, surface.height(*x)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::fd_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bump_values() {
        let [psi0, ..] = bump(0.0_f64);
        assert!((psi0 - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert_eq!(bump(1.0_f64), [0.0; 4]);
        assert_eq!(bump(3.0_f64), [0.0; 4]);
        // e^{-1000} underflows; must not fault.
        let near = bump(0.999_f64);
        assert!(near.iter().all(|v| v.is_finite() && v.abs() < f64::MIN_POSITIVE));
        let edge = bump(1.0_f64 - 1e-17);
        assert!(edge.iter().all(|v| *v == 0.0));
        let [psi, d1, ..] = bump(0.3_f64);
        assert!((d1 + psi / (0.7 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn mountain_point_values() {
        let m = MountainSurface::<f64>::default();
        let (v, g, h) = mountain_phi::<f64>(Vec2::zero());
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g, Vec2::zero());
        let (metric_at_mu1, a) = metric(&m, Vec2::zero());
        assert_eq!(metric_at_mu1, Mat2::identity());
        assert_eq!(a, 1.0);
        assert!(h.a < 0.0 && h.d < 0.0);
        assert!((m.height(m.centers[2]) - 4.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert!((m.height(m.centers[2]) - 1.471_517_764_685_769_2).abs() < 1e-12);
        assert_eq!(m.height(Vec2::new(5.0, 5.0)), 0.0);
        let c = m.centroid();
        assert!((c.x - 1.0).abs() < 1e-15 && (c.y - 3f64.sqrt() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn metric_determinant_identity() {
        let m = MountainSurface::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let z = Vec2::new(rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..2.8));
            let (g, a) = metric(&m, z);
            let grad = m.jet(z).gradient;
            assert!((g.det() - (1.0 + grad.norm_squared())).abs() < 1e-12 * g.det());
            assert!((a * a - g.det()).abs() < 1e-12 * g.det());
            assert_eq!(g.b, g.c);
        }
    }

    #[test]
    fn mountain_derivatives_match_finite_differences() {
        let m = MountainSurface::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut samples: Vec<Vec2<f64>> = (0..100)
            .map(|_| Vec2::new(rng.gen_range(-0.8..2.8), rng.gen_range(-0.8..2.6)))
            .collect();
        // Points straddling 2|z - μ|² = 1 around each center.
        for mu in m.centers {
            for r in [0.70, 0.707_05, 0.707_2, 0.72] {
                samples.push(mu + Vec2::new(r * 0.6, r * 0.8));
            }
        }
        let grad_err = fd_check(|z| m.height(z), |z| m.jet(z).gradient, &samples, 1e-6);
        assert!(grad_err < 1e-6, "gradient fd error {grad_err}");
        for k in 0..2 {
            let e = fd_check(
                |z| m.jet(z).gradient.component(k),
                |z| m.jet(z).hessian.col(k),
                &samples,
                1e-6,
            );
            assert!(e < 1e-6, "hessian column {k} fd error {e}");
            for i in 0..2 {
                let e = fd_check(
                    |z| m.jet(z).hessian.entry(i, k),
                    |z| {
                        let t = m.hessian_derivative(z);
                        Vec2::new(t[0].entry(i, k), t[1].entry(i, k))
                    },
                    &samples,
                    1e-6,
                );
                assert!(e < 1e-5, "third derivative ({i},{k}) fd error {e}");
            }
        }
    }

    #[test]
    fn lift_values() {
        let m = MountainSurface::<f64>::default();
        let curve = PolygonalCurve::sample(8, |rho: f64| {
            let c = m.centroid();
            let u = std::f64::consts::TAU * rho;
            c + Vec2::new(u.cos(), u.sin()) * 2.0
        })
        .unwrap();
        let lifted = lift(&curve, &m);
        for (p, x) in lifted.iter().zip(curve.nodes()) {
            assert_eq!(p[0], x.x);
            assert_eq!(p[1], x.y);
            assert_eq!(p[2], m.jet(*x).value);
        }
        let flat = lift(&curve, &FlatSurface);
        assert!(flat.iter().all(|p| p[2] == 0.0));
        let on_peak = PolygonalCurve::from_nodes(vec![m.centers[2], Vec2::new(5.0, 0.0), Vec2::new(5.0, 5.0)]).unwrap();
        assert!((lift(&on_peak, &m)[0][2] - 1.471_517_764_685_769_2).abs() < 1e-12);
    }
}
