// SPDX-License-Identifier: Apache-2.0

//! `Φ(z, p) = ½ a²(z) γ²(z, p⊥)`, its derivatives, the convex/concave split of
//! `Φ_z`, and the mobility matrix `H(z, p)`.

use std::fmt;
use std::sync::Arc;

use crate::anisotropy::{AnisotropyDensity, AnisotropyKind, SurfaceHandle, Weight};
use crate::error::Error;
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

/// Evaluator for a user-supplied `Φ±_z(z, p)`.
pub type SplitFn<T> = Arc<dyn Fn(Vec2<T>, Vec2<T>) -> Vec2<T> + Send + Sync>;

#[derive(Clone)]
pub enum SplitMode<T: Real> {
    /// `Φ⁺ = Φ`, `Φ⁻ = 0`.
    Homogeneous,
    /// `Φ⁺ = Φ + ½ c_φ |z|²|p|²`, `Φ⁻ = -½ c_φ |z|²|p|²`.
    GraphShift { c_phi: T },
    User { plus: SplitFn<T>, minus: SplitFn<T> },
}

impl<T: Real> fmt::Debug for SplitMode<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Homogeneous => write!(f, "Homogeneous"),
            Self::GraphShift { c_phi } => write!(f, "GraphShift {{ c_phi: {c_phi} }}"),
            Self::User { .. } => write!(f, "User(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Full,
    Plus,
    Minus,
}

#[derive(Clone)]
enum Route<T: Real> {
    /// `Φ = ½|p|²`.
    Isotropic,
    /// `Φ = ½ G(z) p·p`.
    Graph(SurfaceHandle<T>),
    /// Chain rule through `γ` and `a`.
    General,
}

/// Derived calculus of one anisotropy density.
#[derive(Clone)]
pub struct DensityBundle<T: Real> {
    base: AnisotropyDensity<T>,
    split: SplitMode<T>,
    route: Route<T>,
}

impl<T: Real> fmt::Debug for DensityBundle<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityBundle")
            .field("base", &self.base)
            .field("split", &self.split)
            .finish()
    }
}

/// Grid of `(z, p)` probes used to validate a user splitting.
fn validation_samples<T: Real>() -> impl Iterator<Item = (Vec2<T>, Vec2<T>)> {
    let coords = [-2.0, -0.75, 0.0, 0.5, 1.75];
    coords.into_iter().flat_map(move |zx| {
        coords.into_iter().flat_map(move |zy| {
            (0..8).map(move |k| {
                let angle = 0.3 + k as f64 * std::f64::consts::FRAC_PI_4;
                let r = 0.5 + 0.25 * k as f64;
                (
                    Vec2::new(T::lit(zx), T::lit(zy)),
                    Vec2::new(T::lit(r * angle.cos()), T::lit(r * angle.sin())),
                )
            })
        })
    })
}

impl<T: Real> DensityBundle<T> {
    /// Bundles `base` with a splitting. User splittings are checked for
    /// `Φ⁺_z + Φ⁻_z = Φ_z` on a fixed probe grid.
    pub fn new(base: AnisotropyDensity<T>, split: SplitMode<T>) -> Result<Self, Error> {
        if let SplitMode::GraphShift { c_phi } = split {
            if !(c_phi >= T::zero()) {
                return Err(Error::InvalidParameter(format!("c_phi must be >= 0, got {c_phi}")));
            }
        }
        let route = match (base.kind(), base.weight_kind()) {
            (AnisotropyKind::Isotropic, Weight::Unit) => Route::Isotropic,
            (AnisotropyKind::MetricInduced(s), Weight::MetricDeterminant(w)) if Arc::ptr_eq(s, w) => {
                Route::Graph(s.clone())
            }
            _ => Route::General,
        };
        let bundle = Self { base, split, route };
        if let SplitMode::User { plus, minus } = &bundle.split {
            let tol = T::lit(1e-10);
            for (z, p) in validation_samples::<T>() {
                let full = bundle.full_phi_z(z, p);
                let mismatch = (plus(z, p) + minus(z, p) - full).max_abs();
                if !(mismatch <= tol * (T::one() + full.max_abs())) {
                    return Err(Error::SplitMismatch {
                        mismatch: mismatch.as_f64(),
                    });
                }
            }
        }
        Ok(bundle)
    }

    /// Default splitting: `Φ⁻ = 0` for spatially homogeneous densities,
    /// `c_φ = 0` graph shift otherwise.
    pub fn with_default_split(base: AnisotropyDensity<T>) -> Self {
        let split = if base.is_spatially_homogeneous() {
            SplitMode::Homogeneous
        } else {
            SplitMode::GraphShift { c_phi: T::zero() }
        };
        Self::new(base, split).expect("built-in splittings are valid")
    }

    pub fn isotropic() -> Self {
        Self::with_default_split(AnisotropyDensity::isotropic())
    }

    pub fn base(&self) -> &AnisotropyDensity<T> {
        &self.base
    }

    pub fn split(&self) -> &SplitMode<T> {
        &self.split
    }

    /// True when `Φ` does not depend on `z` and the split is trivial.
    pub fn is_spatially_homogeneous(&self) -> bool {
        self.base.is_spatially_homogeneous() && matches!(self.split, SplitMode::Homogeneous)
    }

    pub fn phi(&self, z: Vec2<T>, p: Vec2<T>) -> T {
        let half = T::lit(0.5);
        match &self.route {
            Route::Isotropic => half * p.norm_squared(),
            Route::Graph(surface) => {
                let s = surface.jet(z).gradient.dot(p);
                half * (p.norm_squared() + s * s)
            }
            Route::General => self.phi_via_gamma(z, p),
        }
    }

    /// `½ a²(z) γ²(z, p⊥)` evaluated literally, independent of any fast path.
    pub fn phi_via_gamma(&self, z: Vec2<T>, p: Vec2<T>) -> T {
        let (a, _) = self.base.weight(z);
        let g = self.base.gamma(z, p.perp());
        T::lit(0.5) * a * a * g * g
    }

    /// `Φ_p`. Vanishes at `p = 0`.
    pub fn phi_p(&self, z: Vec2<T>, p: Vec2<T>) -> Vec2<T> {
        match &self.route {
            Route::Isotropic => p,
            Route::Graph(surface) => {
                let g = surface.jet(z).gradient;
                p + g * g.dot(p)
            }
            Route::General => {
                if p.is_zero() {
                    return Vec2::zero();
                }
                // Φ_p = a² γ(p⊥) Aᵀ γ_p(p⊥), Aᵀ v = -v⊥.
                let (a, _) = self.base.weight(z);
                let q = p.perp();
                let gp = self.base.gamma_p(z, q).expect("q is nonzero");
                -gp.perp() * (a * a * self.base.gamma(z, q))
            }
        }
    }

    /// `Φ_pp`. At `p = 0` only the quadratic routes are defined; the general
    /// route falls back to the direction `e₁` by 0-homogeneity.
    pub fn phi_pp(&self, z: Vec2<T>, p: Vec2<T>) -> Mat2<T> {
        match &self.route {
            Route::Isotropic => Mat2::identity(),
            Route::Graph(surface) => {
                let g = surface.jet(z).gradient;
                Mat2::identity() + g.outer(g)
            }
            Route::General => {
                let p = if p.is_zero() { Vec2::unit(0) } else { p };
                let (a, _) = self.base.weight(z);
                let q = p.perp();
                let g = self.base.gamma(z, q);
                let gp = self.base.gamma_p(z, q).expect("q is nonzero");
                let gpp = self.base.gamma_pp(z, q).expect("q is nonzero");
                // Aᵀ M A with A = [[0,-1],[1,0]].
                let m = gp.outer(gp) + gpp.scale(g);
                let rotated = Mat2::new(m.d, -m.c, -m.b, m.a);
                rotated.scale(a * a)
            }
        }
    }

    fn full_phi_z(&self, z: Vec2<T>, p: Vec2<T>) -> Vec2<T> {
        match &self.route {
            Route::Isotropic => Vec2::zero(),
            Route::Graph(surface) => {
                let jet = surface.jet(z);
                jet.hessian.mul_vec(p) * jet.gradient.dot(p)
            }
            Route::General => {
                let (a, grad_a) = self.base.weight(z);
                let q = p.perp();
                let g = self.base.gamma(z, q);
                grad_a * (a * g * g) + self.base.gamma_z(z, q) * (a * a * g)
            }
        }
    }

    /// `Φ_z`, `Φ⁺_z` or `Φ⁻_z`.
    pub fn phi_z(&self, z: Vec2<T>, p: Vec2<T>, part: Part) -> Vec2<T> {
        match (&self.split, part) {
            (_, Part::Full) => self.full_phi_z(z, p),
            (SplitMode::Homogeneous, Part::Plus) => self.full_phi_z(z, p),
            (SplitMode::Homogeneous, Part::Minus) => Vec2::zero(),
            (SplitMode::GraphShift { c_phi }, Part::Plus) => {
                self.full_phi_z(z, p) + z * (*c_phi * p.norm_squared())
            }
            (SplitMode::GraphShift { c_phi }, Part::Minus) => z * (-*c_phi * p.norm_squared()),
            (SplitMode::User { plus, .. }, Part::Plus) => plus(z, p),
            (SplitMode::User { minus, .. }, Part::Minus) => minus(z, p),
        }
    }

    /// `Φ`, `Φ⁺` or `Φ⁻`; `None` for user splittings, which only provide gradients.
    pub fn phi_part(&self, z: Vec2<T>, p: Vec2<T>, part: Part) -> Option<T> {
        let shift = |c: T| T::lit(0.5) * c * z.norm_squared() * p.norm_squared();
        match (&self.split, part) {
            (_, Part::Full) => Some(self.phi(z, p)),
            (SplitMode::Homogeneous, Part::Plus) => Some(self.phi(z, p)),
            (SplitMode::Homogeneous, Part::Minus) => Some(T::zero()),
            (SplitMode::GraphShift { c_phi }, Part::Plus) => Some(self.phi(z, p) + shift(*c_phi)),
            (SplitMode::GraphShift { c_phi }, Part::Minus) => Some(-shift(*c_phi)),
            (SplitMode::User { .. }, _) => None,
        }
    }

    /// `(∂Φ^part_z/∂z, ∂Φ^part_z/∂p)`, entry `(i, k)` is the derivative of
    /// component `i` with respect to coordinate `k`.
    pub fn phi_z_jacobians(&self, z: Vec2<T>, p: Vec2<T>, part: Part) -> (Mat2<T>, Mat2<T>) {
        let full = || -> (Mat2<T>, Mat2<T>) {
            match &self.route {
                Route::Isotropic => (Mat2::zero(), Mat2::zero()),
                Route::Graph(surface) => {
                    let jet = surface.jet(z);
                    let third = surface.hessian_derivative(z);
                    let hp = jet.hessian.mul_vec(p);
                    let s = jet.gradient.dot(p);
                    let dz = hp.outer(hp)
                        + Mat2::from_cols(third[0].mul_vec(p), third[1].mul_vec(p)).scale(s);
                    let dp = hp.outer(jet.gradient) + jet.hessian.scale(s);
                    (dz, dp)
                }
                Route::General if self.base.is_spatially_homogeneous() => (Mat2::zero(), Mat2::zero()),
                Route::General => fd_jacobians(|z, p| self.full_phi_z(z, p), z, p),
            }
        };
        match (&self.split, part) {
            (_, Part::Full) | (SplitMode::Homogeneous, Part::Plus) => full(),
            (SplitMode::Homogeneous, Part::Minus) => (Mat2::zero(), Mat2::zero()),
            (SplitMode::GraphShift { c_phi }, Part::Plus) => {
                let (dz, dp) = full();
                let two = T::lit(2.0);
                (
                    dz + Mat2::scalar(*c_phi * p.norm_squared()),
                    dp + z.outer(p).scale(two * *c_phi),
                )
            }
            (SplitMode::GraphShift { c_phi }, Part::Minus) => {
                let two = T::lit(2.0);
                (
                    Mat2::scalar(-*c_phi * p.norm_squared()),
                    z.outer(p).scale(-two * *c_phi),
                )
            }
            (SplitMode::User { plus, .. }, Part::Plus) => fd_jacobians(|z, p| plus(z, p), z, p),
            (SplitMode::User { minus, .. }, Part::Minus) => fd_jacobians(|z, p| minus(z, p), z, p),
        }
    }

    /// Mobility matrix
    /// `H = a²γ/|γ_p|² [[γ, γ_p·p], [-γ_p·p, γ]]` with `γ, γ_p` at `(z, p⊥)`.
    pub fn h_matrix(&self, z: Vec2<T>, p: Vec2<T>) -> Result<Mat2<T>, Error> {
        if p.is_zero() {
            return Err(Error::DegenerateDirection);
        }
        let (a, _) = self.base.weight(z);
        let q = p.perp();
        let g = self.base.gamma(z, q);
        let gp = self.base.gamma_p(z, q)?;
        let off = gp.dot(p);
        let factor = a * a * g / gp.norm_squared();
        Ok(Mat2::new(g, off, -off, g).scale(factor))
    }

    /// `a(z) γ(z, p⊥)`, the integrand of the discrete energy.
    pub fn length_density(&self, z: Vec2<T>, p: Vec2<T>) -> T {
        let (a, _) = self.base.weight(z);
        a * self.base.gamma(z, p.perp())
    }

    /// `(Φ_p(z, q) - Φ_p(z, p)) · (q - p)`.
    pub fn monotonicity_probe(&self, z: Vec2<T>, p: Vec2<T>, q: Vec2<T>) -> T {
        (self.phi_p(z, q) - self.phi_p(z, p)).dot(q - p)
    }
}

/// Central-difference Jacobians of a vector field in `z` and in `p`.
fn fd_jacobians<T: Real>(
    f: impl Fn(Vec2<T>, Vec2<T>) -> Vec2<T>,
    z: Vec2<T>,
    p: Vec2<T>,
) -> (Mat2<T>, Mat2<T>) {
    let base_step = T::epsilon().cbrt();
    let column = |k: usize, wrt_z: bool| {
        let x = if wrt_z { z } else { p };
        let h = base_step * T::one().max(x.component(k).abs());
        let e = Vec2::unit(k) * h;
        let (fp, fm) = if wrt_z {
            (f(z + e, p), f(z - e, p))
        } else {
            (f(z, p + e), f(z, p - e))
        };
        (fp - fm) * (T::one() / (h + h))
    };
    (
        Mat2::from_cols(column(0, true), column(1, true)),
        Mat2::from_cols(column(0, false), column(1, false)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::{geodesic_bundle, FlatSurface, GraphSurface, MountainSurface};
    use crate::verify::fd_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mountain() -> Arc<dyn GraphSurface<f64>> {
        Arc::new(MountainSurface::default())
    }

    fn bundles() -> Vec<DensityBundle<f64>> {
        vec![
            DensityBundle::isotropic(),
            DensityBundle::with_default_split(AnisotropyDensity::kfold(6, 0.028).unwrap()),
            DensityBundle::with_default_split(AnisotropyDensity::elliptic(0.5).unwrap()),
            geodesic_bundle(mountain(), 0.0).unwrap(),
            geodesic_bundle(mountain(), 0.7).unwrap(),
            // General chain-rule route with a spatial weight.
            DensityBundle::with_default_split(
                AnisotropyDensity::kfold(6, 0.028)
                    .unwrap()
                    .with_weight(Weight::MetricDeterminant(mountain())),
            ),
        ]
    }

    fn sample(rng: &mut ChaCha8Rng) -> (Vec2<f64>, Vec2<f64>) {
        let z = Vec2::new(rng.gen_range(-0.8..2.8), rng.gen_range(-0.8..2.5));
        let p = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        (z, p)
    }

    #[test]
    fn point_values() {
        let z = Vec2::zero();
        let iso = DensityBundle::<f64>::isotropic();
        assert_eq!(iso.phi(z, Vec2::new(3.0, 4.0)), 12.5);
        assert_eq!(iso.phi_p(z, Vec2::new(3.0, 4.0)), Vec2::new(3.0, 4.0));
        let h = iso.h_matrix(z, Vec2::new(0.0, 2.0)).unwrap();
        assert!((h - Mat2::scalar(4.0)).max_abs() < 1e-15);

        let k6 = DensityBundle::with_default_split(AnisotropyDensity::kfold(6, 0.028).unwrap());
        assert!((k6.phi(z, Vec2::new(1.0, 0.0)) - 0.472_392).abs() < 1e-14);
        let h = k6.h_matrix(z, Vec2::new(1.0, 0.0)).unwrap();
        assert!((h.quad(Vec2::new(1.0, 0.0)) - 1.0).abs() < 1e-14);
        for part in [Part::Full, Part::Plus, Part::Minus] {
            assert_eq!(k6.phi_z(Vec2::new(0.3, -1.0), Vec2::new(0.2, 0.7), part), Vec2::zero());
        }
        assert!(matches!(iso.h_matrix(z, Vec2::zero()), Err(Error::DegenerateDirection)));
    }

    #[test]
    fn graph_route_equals_chain_rule() {
        let b = geodesic_bundle(mountain(), 0.0).unwrap();
        let m = MountainSurface::<f64>::default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let (z, p) = sample(&mut rng);
            let g = m.jet(z).gradient;
            let direct = 0.5 * (p.norm_squared() + g.dot(p).powi(2));
            assert!((b.phi(z, p) - direct).abs() <= 1e-12 * (1.0 + direct));
            assert!((b.phi_via_gamma(z, p) - direct).abs() <= 1e-12 * (1.0 + direct));
        }
    }

    #[test]
    fn euler_relation_and_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for b in bundles() {
            for _ in 0..1000 {
                let (z, p) = sample(&mut rng);
                let lambda: f64 = rng.gen_range(-2.0..2.0);
                let phi = b.phi(z, p);
                assert!(phi >= 0.0);
                assert!((b.phi(z, p * lambda) - lambda * lambda * phi).abs() <= 1e-12 * (1.0 + phi));
                assert!((b.phi_p(z, p).dot(p) - 2.0 * phi).abs() <= 1e-12 * (1.0 + phi));
            }
        }
    }

    #[test]
    fn h_quadratic_form_and_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for b in bundles() {
            for _ in 0..1000 {
                let (z, p) = sample(&mut rng);
                let xi = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let h = b.h_matrix(z, p).unwrap();
                assert_eq!(h.a, h.d);
                assert_eq!(h.b, -h.c);
                let (a, _) = b.base().weight(z);
                let q = p.perp();
                let g = b.base().gamma(z, q);
                let gp = b.base().gamma_p(z, q).unwrap();
                let expected = a * a * g * g / gp.norm_squared() * xi.norm_squared();
                assert!((h.quad(xi) - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let samples: Vec<_> = (0..200).map(|_| sample(&mut rng)).collect();
        for b in bundles() {
            for &(z0, p0) in &samples {
                let zs = [z0];
                let e = fd_check(|p| b.phi(z0, p), |p| b.phi_p(z0, p), &[p0], 1e-6);
                assert!(e < 1e-6, "{b:?}: phi_p fd {e}");
                let e = fd_check(|z| b.phi(z, p0), |z| b.phi_z(z, p0, Part::Full), &zs, 1e-6);
                assert!(e < 1e-6, "{b:?}: phi_z fd {e}");
                for part in [Part::Plus, Part::Minus] {
                    let e = fd_check(
                        |z| b.phi_part(z, p0, part).unwrap(),
                        |z| b.phi_z(z, p0, part),
                        &zs,
                        1e-6,
                    );
                    assert!(e < 1e-6, "{b:?}: phi_z {part:?} fd {e}");
                }
                for k in 0..2 {
                    let e = fd_check(
                        |p| b.phi_p(z0, p).component(k),
                        |p| b.phi_pp(z0, p).transpose().col(k),
                        &[p0],
                        1e-6,
                    );
                    assert!(e < 1e-6, "{b:?}: phi_pp row {k} fd {e}");
                    for part in [Part::Plus, Part::Minus] {
                        let (dz, dp) = b.phi_z_jacobians(z0, p0, part);
                        let e = fd_check(|z| b.phi_z(z, p0, part).component(k), |_| dz.transpose().col(k), &zs, 1e-6);
                        assert!(e < 1e-5, "{b:?}: d phi_z/dz {part:?} row {k} fd {e}");
                        let e = fd_check(|p| b.phi_z(z0, p, part).component(k), |_| dp.transpose().col(k), &[p0], 1e-6);
                        assert!(e < 1e-5, "{b:?}: d phi_z/dp {part:?} row {k} fd {e}");
                    }
                }
            }
        }
    }

    #[test]
    fn split_sums_to_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for b in bundles() {
            for _ in 0..1000 {
                let (z, p) = sample(&mut rng);
                let full = b.phi_z(z, p, Part::Full);
                let sum = b.phi_z(z, p, Part::Plus) + b.phi_z(z, p, Part::Minus);
                assert!((sum - full).max_abs() <= 1e-12 * (1.0 + full.max_abs()));
            }
        }
        let b = geodesic_bundle(mountain(), 0.0).unwrap();
        let (z, p) = (Vec2::new(0.2, 0.1), Vec2::new(1.0, 0.5));
        assert_eq!(b.phi_z(z, p, Part::Plus), b.phi_z(z, p, Part::Full));
        assert_eq!(b.phi_z(z, p, Part::Minus), Vec2::zero());
    }

    #[test]
    fn shifted_split_is_convex_concave() {
        // Midpoint convexity of z ↦ Φ⁺ and z ↦ -Φ⁻ with a large shift.
        let b = geodesic_bundle(mountain(), 1e4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let mut plus_violations = 0;
        for _ in 0..1000 {
            let (z0, p) = sample(&mut rng);
            let z1 = z0 + Vec2::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
            let mid = (z0 + z1) * 0.5;
            let f = |z| b.phi_part(z, p, Part::Plus).unwrap();
            if f(mid) > 0.5 * f(z0) + 0.5 * f(z1) + 1e-12 {
                plus_violations += 1;
            }
            let g = |z| -b.phi_part(z, p, Part::Minus).unwrap();
            assert!(g(mid) <= 0.5 * g(z0) + 0.5 * g(z1) + 1e-12);
        }
        assert_eq!(plus_violations, 0);
    }

    #[test]
    fn lipschitz_ratio_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for b in bundles() {
            let mut worst: f64 = 0.0;
            for _ in 0..2000 {
                let (z, p) = sample(&mut rng);
                let q = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                for part in [Part::Plus, Part::Minus] {
                    let num = (b.phi_z(z, p, part) - b.phi_z(z, q, part)).norm();
                    let den = (p.norm() + q.norm()) * (p - q).norm();
                    if den > 1e-9 {
                        worst = worst.max(num / den);
                    }
                }
            }
            assert!(worst.is_finite() && worst < 1e3, "{b:?}: {worst}");
        }
    }

    #[test]
    fn monotonicity_probe() {
        let iso = DensityBundle::<f64>::isotropic();
        let k6 = DensityBundle::with_default_split(AnisotropyDensity::kfold(6, 0.028).unwrap());
        let z = Vec2::zero();
        let p = Vec2::new(0.3, -0.1);
        assert_eq!(k6.monotonicity_probe(z, p, p), 0.0);
        let q = Vec2::new(-0.4, 0.25);
        assert!((iso.monotonicity_probe(z, p, q) - (q - p).norm_squared()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let unit_ball = |rng: &mut ChaCha8Rng| loop {
            let v = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.norm() <= 1.0 {
                return v;
            }
        };
        let mut min_ratio = f64::INFINITY;
        for _ in 0..10_000 {
            let (p, q) = (unit_ball(&mut rng), unit_ball(&mut rng));
            let d = (q - p).norm_squared();
            if d > 1e-12 {
                min_ratio = min_ratio.min(k6.monotonicity_probe(z, p, q) / d);
            }
        }
        assert!(min_ratio > 0.0, "min ratio {min_ratio}");
        for b in bundles() {
            for _ in 0..1000 {
                let (z, p) = sample(&mut rng);
                let q = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                assert!(b.monotonicity_probe(z, p, q) >= -1e-12);
            }
        }
    }

    #[test]
    fn flat_graph_is_isotropic() {
        let flat = geodesic_bundle(Arc::new(FlatSurface) as Arc<dyn GraphSurface<f64>>, 0.0).unwrap();
        let iso = DensityBundle::<f64>::isotropic();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let (z, p) = sample(&mut rng);
            assert_eq!(flat.phi(z, p), iso.phi(z, p));
            assert_eq!(flat.phi_p(z, p), iso.phi_p(z, p));
            assert_eq!(flat.phi_pp(z, p), iso.phi_pp(z, p));
            assert_eq!(flat.h_matrix(z, p).unwrap(), iso.h_matrix(z, p).unwrap());
            assert_eq!(flat.length_density(z, p), iso.length_density(z, p));
            assert_eq!(flat.phi_z(z, p, Part::Plus).max_abs(), 0.0);
        }
    }

    #[test]
    fn user_split_validated() {
        let base = AnisotropyDensity::metric_induced(mountain());
        let reference = DensityBundle::with_default_split(base.clone());
        let r1 = reference.clone();
        let good = DensityBundle::new(
            base.clone(),
            SplitMode::User {
                plus: Arc::new(move |z, p| r1.phi_z(z, p, Part::Full) + z * 2.0),
                minus: Arc::new(|z, _| z * -2.0),
            },
        );
        assert!(good.is_ok());
        let r2 = reference.clone();
        let bad = DensityBundle::new(
            base,
            SplitMode::User {
                plus: Arc::new(move |z, p| r2.phi_z(z, p, Part::Full)),
                minus: Arc::new(|z, _| z),
            },
        );
        assert!(matches!(bad, Err(Error::SplitMismatch { .. })));
    }
}
