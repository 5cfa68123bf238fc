// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use anisoflow::geodesic::{metric, SurfaceJet};
use anisoflow::verify::{sample_points, split_convexity, wulff_boundary};
use anisoflow::*;

/// The tilted plane `φ(z) = s z₁`.
#[derive(Debug)]
struct Plane(f64);

impl GraphSurface<f64> for Plane {
    fn jet(&self, _z: Point) -> SurfaceJet<f64> {
        SurfaceJet { value: 0.0, gradient: Vec2::new(self.0, 0.0), hessian: Mat2::zero() }
    }
    fn hessian_derivative(&self, _z: Point) -> [Mat2<f64>; 2] {
        [Mat2::zero(); 2]
    }
}

#[test]
fn tilted_plane_circle_shrinks_intrinsically() {
    // On the plane the metric is constant, so an intrinsic circle of radius R
    // has radius sqrt(R² - 2t) in the unrolled coordinates.
    let s = 1.0_f64;
    let k = (1.0 + s * s).sqrt();
    let b = geodesic_bundle(Arc::new(Plane(s)), 0.0).unwrap();
    let x0 = Curve::sample(128, |r: f64| {
        let u = std::f64::consts::TAU * r;
        Vec2::new(u.cos() / k, u.sin())
    })
    .unwrap();
    let traj = run(&x0, &b, &Forcing::None, &Params::new(1e-4, 0.25).unwrap(), &mut []).unwrap();
    let expected = 0.5_f64.sqrt();
    for x in traj.final_curve.nodes() {
        let r = ((x.x * k).powi(2) + x.y.powi(2)).sqrt();
        assert!((r - expected).abs() < 2e-3, "{r}");
    }
}

#[test]
fn discrete_energy_is_riemannian_length() {
    let surface = MountainSurface::default();
    let b = geodesic_bundle(Arc::new(MountainSurface::default()), 0.0).unwrap();
    let x = Curve::sample(40, mikula_curve).unwrap();
    let grid = x.grid();
    let nodes = x.nodes();
    let direct = anisoflow::curve::lumped_integral(grid, |j| {
        let d = x.derivative(j);
        let len = |z: Point| metric(&surface, z).0.mul_vec(d).dot(d).sqrt();
        (len(nodes[grid.prev(j)]), len(nodes[j]))
    });
    let e = discrete_energy(&x, &b).unwrap();
    assert!((e - direct).abs() < 1e-12 * direct, "{e} vs {direct}");
    assert!(e > x.length());
}

#[test]
fn hexagonal_wulff_shape() {
    let d = Density::kfold(6, 0.028).unwrap();
    let pts = wulff_boundary(&d, 360).unwrap();
    // Six-fold symmetry: shifting by 60 samples rotates by 60 degrees.
    let (c, s) = (std::f64::consts::FRAC_PI_3.cos(), std::f64::consts::FRAC_PI_3.sin());
    for i in 0..360 {
        let p = pts[i];
        let q = pts[(i + 60) % 360];
        let rotated = Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y);
        assert!((rotated - q).max_abs() < 1e-12);
    }
    // Convex: consecutive turns all have the same sign.
    for i in 0..360 {
        let a = pts[i];
        let b = pts[(i + 1) % 360];
        let c = pts[(i + 2) % 360];
        assert!((b - a).cross(c - b) > 0.0, "reflex vertex at {i}");
    }
}

#[test]
fn graph_shift_is_convex_concave() {
    let zs = sample_points(400, -4.0, 4.0, 7);
    let ps = sample_points(400, -1.0, 1.0, 11);
    let samples: Vec<_> = zs.into_iter().zip(ps).filter(|(_, p)| p.norm() > 0.1).collect();
    let b = geodesic_bundle(Arc::new(MountainSurface::default()), 1e4).unwrap();
    let r = split_convexity(&b, &samples, 1e-9);
    assert_eq!((r.plus_violations, r.minus_violations), (0, 0), "{r:?}");
    // Without the shift the plus part is not convex everywhere.
    let b0 = geodesic_bundle(Arc::new(MountainSurface::default()), 0.0).unwrap();
    assert!(split_convexity(&b0, &samples, 1e-9).plus_violations > 0);
}
