// SPDX-License-Identifier: Apache-2.0

//! Oracles used by the test suites and by `anisoflow verify`: finite
//! difference checks, the shrinking circle, EOC studies and Wulff boundaries.

use std::sync::Arc;

use crate::anisotropy::AnisotropyDensity;
use crate::curve::PolygonalCurve;
use crate::energy_density::{DensityBundle, Part};
use crate::error::Error;
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;
use crate::scheme::{run, Forcing, SchemeParams};

/// Largest central-difference mismatch `|fd - claimed| / (1 + |claimed|)` of a
/// claimed gradient over `samples`, taken componentwise.
pub fn fd_check<T: Real>(
    f: impl Fn(Vec2<T>) -> T,
    grad: impl Fn(Vec2<T>) -> Vec2<T>,
    samples: &[Vec2<T>],
    step: T,
) -> T {
    let mut worst = T::zero();
    for &x in samples {
        let claimed = grad(x);
        for i in 0..2 {
            let e = Vec2::unit(i) * step;
            let fd = (f(x + e) - f(x - e)) / (step + step);
            let c = claimed.component(i);
            worst = worst.max((fd - c).abs() / (T::one() + c.abs()));
        }
    }
    worst
}

/// Radius `sqrt(R₀² - 2t)` of a circle under isotropic flow.
pub fn exact_circle_radius<T: Real>(t: T, r0: T) -> Result<T, Error> {
    let extinction = r0 * r0 * T::lit(0.5);
    if !(t < extinction) || t < T::zero() {
        return Err(Error::BeyondExtinction {
            t: t.as_f64(),
            extinction: extinction.as_f64(),
        });
    }
    Ok((r0 * r0 - (t + t)).sqrt())
}

/// Errors under mesh doubling.
#[derive(Clone, Debug, PartialEq)]
pub struct EocRecord<T> {
    pairs: Vec<(usize, T)>,
}

impl<T: Real> EocRecord<T> {
    pub fn new(pairs: Vec<(usize, T)>) -> Result<Self, Error> {
        for w in pairs.windows(2) {
            if w[1].0 != 2 * w[0].0 {
                return Err(Error::InvalidParameter(format!(
                    "element counts must double, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((j, e)) = pairs.iter().find(|(_, e)| !(*e > T::zero())) {
            return Err(Error::InvalidParameter(format!("error at J = {j} is not positive: {e}")));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(usize, T)] {
        &self.pairs
    }

    /// `log₂(e_J / e_{2J})` for each consecutive pair.
    pub fn eocs(&self) -> Vec<T> {
        self.pairs.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect()
    }

    pub fn last_eoc(&self) -> Option<T> {
        self.eocs().last().copied()
    }
}

/// What the discrete solutions are compared against.
#[derive(Clone, Debug)]
pub enum Reference<T> {
    /// Anti-clockwise circle evolving by isotropic flow.
    ExactCircle { center: Vec2<T>, r0: T },
    /// Same scheme on a finer uniform grid; `elements` must be a multiple of every `J`.
    FineGrid { elements: usize, dt: T },
}

pub type InitialCurve<T> = Arc<dyn Fn(T) -> Vec2<T> + Send + Sync>;

#[derive(Clone)]
pub struct EocSetup<T: Real> {
    pub bundle: DensityBundle<T>,
    pub initial: InitialCurve<T>,
    /// Doubling sequence of element counts with their time steps.
    pub runs: Vec<(usize, T)>,
    pub final_time: T,
    /// Errors are sampled at every multiple of this interval.
    pub compare_every: T,
    pub reference: Reference<T>,
}

/// Error histories split into the lumped `L²` part, the `H¹` seminorm part,
/// and their combination `(‖e‖² + ‖e_ρ‖²)^{1/2}`; each is a max over time.
#[derive(Clone, Debug)]
pub struct EocResult<T> {
    pub combined: EocRecord<T>,
    pub l2: EocRecord<T>,
    pub h1_seminorm: EocRecord<T>,
}

/// Snapshot of a run: curves at the comparison times.
fn snapshots<T: Real>(
    setup: &EocSetup<T>,
    elements: usize,
    dt: T,
) -> Result<Vec<PolygonalCurve<T>>, Error> {
    let stride_f = setup.compare_every / dt;
    let stride = stride_f.round().to_usize().unwrap_or(0);
    if stride == 0 || (stride_f - T::from_count(stride)).abs() > T::lit(1e-6) * stride_f {
        return Err(Error::InvalidParameter(format!(
            "comparison interval {} is not a multiple of dt {}",
            setup.compare_every, dt
        )));
    }
    let x0 = PolygonalCurve::sample(elements, |r| (setup.initial)(r))?;
    let params = SchemeParams::new(dt, setup.final_time)?;
    let mut frames = Vec::new();
    let mut keep = |rec: &crate::scheme::StepRecord<T>, c: &PolygonalCurve<T>| {
        if rec.step.is_multiple_of(stride) {
            frames.push(c.clone());
        }
    };
    run(&x0, &setup.bundle, &Forcing::None, &params, &mut [&mut keep])?;
    Ok(frames)
}

/// `(‖e‖_h², ‖e_ρ‖²)` of a coarse curve against fine reference nodes.
fn fine_errors<T: Real>(coarse: &PolygonalCurve<T>, fine: &PolygonalCurve<T>) -> Result<(T, T), Error> {
    let (jc, jf) = (coarse.len(), fine.len());
    if jf % jc != 0 {
        return Err(Error::InvalidParameter(format!(
            "reference grid {jf} is not a multiple of {jc}"
        )));
    }
    let ratio = jf / jc;
    let grid = coarse.grid();
    let mut l2 = T::zero();
    let mut h1 = T::zero();
    for j in 0..jc {
        let e = coarse.nodes()[j] - fine.nodes()[j * ratio];
        let w = T::lit(0.5) * (grid.width(j) + grid.width(grid.next(j)));
        l2 = l2 + w * e.norm_squared();
        let d = coarse.derivative(j);
        // Fine elements j*ratio - ratio + 1 ..= j*ratio lie inside coarse element j.
        for k in 0..ratio {
            let f = (j * ratio + jf - k) % jf;
            h1 = h1 + fine.grid().width(f) * (d - fine.derivative(f)).norm_squared();
        }
    }
    Ok((l2, h1))
}

/// Same as [`fine_errors`] against the exact circle, with 4-point Gauss quadrature.
fn circle_errors<T: Real>(coarse: &PolygonalCurve<T>, center: Vec2<T>, radius: T) -> (T, T) {
    let grid = coarse.grid();
    let tau = T::TAU();
    let exact = |r: T| center + Vec2::new((tau * r).cos(), (tau * r).sin()) * radius;
    let exact_d = |r: T| Vec2::new(-(tau * r).sin(), (tau * r).cos()) * (tau * radius);
    let gauss = [
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    ];
    let mut l2 = T::zero();
    let mut h1 = T::zero();
    for j in 0..coarse.len() {
        let q = grid.node_param(j);
        let w = T::lit(0.5) * (grid.width(j) + grid.width(grid.next(j)));
        l2 = l2 + w * (coarse.nodes()[j] - exact(q)).norm_squared();
        let h = grid.width(j);
        let start = q - h;
        let d = coarse.derivative(j);
        for (xi, wi) in gauss {
            let r = start + h * T::lit(0.5 * (xi + 1.0));
            h1 = h1 + h * T::lit(0.5 * wi) * (d - exact_d(r)).norm_squared();
        }
    }
    (l2, h1)
}

/// Runs every discretisation of `setup` (concurrently) and measures errors in
/// the discrete `L^∞`-in-time `H¹` norm.
pub fn eoc_study<T: Real>(setup: &EocSetup<T>) -> Result<EocResult<T>, Error> {
    let mut jobs: Vec<(usize, T)> = setup.runs.clone();
    if let Reference::FineGrid { elements, dt } = setup.reference {
        let max_j = setup.runs.iter().map(|r| r.0).max().unwrap_or(0);
        let min_dt = setup.runs.iter().map(|r| r.1).fold(T::infinity(), T::min);
        if elements < 4 * max_j || dt > min_dt * T::lit(0.25) {
            return Err(Error::InvalidParameter(format!(
                "reference J = {elements}, dt = {dt} is not fine enough"
            )));
        }
        jobs.push((elements, dt));
    }
    let results: Vec<Result<Vec<PolygonalCurve<T>>, Error>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(j, dt)| scope.spawn(move || snapshots(setup, j, dt)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("EOC worker panicked"))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }
    let reference = match setup.reference {
        Reference::FineGrid { .. } => runs.pop(),
        Reference::ExactCircle { .. } => None,
    };

    let mut combined = Vec::new();
    let mut l2s = Vec::new();
    let mut h1s = Vec::new();
    for (&(j, _), frames) in setup.runs.iter().zip(&runs) {
        let (mut worst_c, mut worst_l2, mut worst_h1) = (T::zero(), T::zero(), T::zero());
        for (m, frame) in frames.iter().enumerate() {
            let (l2, h1) = match (&setup.reference, &reference) {
                (Reference::ExactCircle { center, r0 }, _) => {
                    let t = T::from_count(m) * setup.compare_every;
                    circle_errors(frame, *center, exact_circle_radius(t, *r0)?)
                }
                (Reference::FineGrid { .. }, Some(fine)) => {
                    let f = fine.get(m).ok_or_else(|| {
                        Error::InvalidParameter("reference run stopped early".into())
                    })?;
                    fine_errors(frame, f)?
                }
                (Reference::FineGrid { .. }, None) => unreachable!("reference run is always present"),
            };
            worst_c = worst_c.max((l2 + h1).sqrt());
            worst_l2 = worst_l2.max(l2.sqrt());
            worst_h1 = worst_h1.max(h1.sqrt());
        }
        combined.push((j, worst_c));
        l2s.push((j, worst_l2));
        h1s.push((j, worst_h1));
    }
    Ok(EocResult {
        combined: EocRecord::new(combined)?,
        l2: EocRecord::new(l2s)?,
        h1_seminorm: EocRecord::new(h1s)?,
    })
}

/// Smooth, non-circular test curve used for EOC studies.
pub fn eoc_initial_curve<T: Real>(rho: T) -> Vec2<T> {
    let u = T::TAU() * rho;
    let r = T::one() + T::lit(0.1) * (T::lit(3.0) * u).cos();
    Vec2::new(r * u.cos(), T::lit(0.8) * r * u.sin())
}

/// EOC setup for the elliptic density: `J ∈ elements`, `Δt = h²/4` relative to
/// `J = 32` at `1/4096`, reference `J = 1024`, up to `t = 1/16`.
pub fn elliptic_eoc_setup<T: Real>(delta: T, elements: &[usize]) -> Result<EocSetup<T>, Error> {
    if elements.is_empty() {
        return Err(Error::InvalidParameter("empty element list".into()));
    }
    let dt_for = |j: usize| {
        let r = T::from_count(j) / T::lit(32.0);
        T::lit(1.0 / 4096.0) / (r * r)
    };
    let coarsest = elements[0];
    let finest = *elements.last().unwrap_or(&coarsest);
    let reference_j = (1024usize).max(4 * finest);
    Ok(EocSetup {
        bundle: DensityBundle::with_default_split(AnisotropyDensity::elliptic(delta)?),
        initial: Arc::new(eoc_initial_curve),
        runs: elements.iter().map(|&j| (j, dt_for(j))).collect(),
        final_time: T::lit(1.0 / 16.0),
        compare_every: dt_for(coarsest),
        reference: Reference::FineGrid {
            elements: reference_j,
            dt: dt_for(reference_j),
        },
    })
}

/// Boundary points `γ_p(n(θ))` of the Wulff shape at `samples` uniform angles.
pub fn wulff_boundary<T: Real>(density: &AnisotropyDensity<T>, samples: usize) -> Result<Vec<Vec2<T>>, Error> {
    if !density.is_spatially_homogeneous() {
        return Err(Error::InvalidParameter(
            "Wulff shape needs a spatially homogeneous density".into(),
        ));
    }
    (0..samples)
        .map(|i| {
            let theta = T::TAU() * T::from_count(i) / T::from_count(samples);
            density.gamma_p(Vec2::zero(), Vec2::new(theta.cos(), theta.sin()))
        })
        .collect()
}

/// Smallest eigenvalue of the symmetric part of `m`.
fn min_sym_eigenvalue<T: Real>(m: Mat2<T>) -> T {
    let s = (m + m.transpose()).scale(T::lit(0.5));
    let mean = s.trace() * T::lit(0.5);
    let diff = (s.a - s.d) * T::lit(0.5);
    mean - (diff * diff + s.b * s.b).sqrt()
}

/// Outcome of sampling the convex/concave splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitConvexity<T> {
    pub samples: usize,
    /// Samples where `z ↦ Φ⁺(z, p)` has a negative Hessian eigenvalue below `-tol`.
    pub plus_violations: usize,
    /// Samples where `z ↦ -Φ⁻(z, p)` has one.
    pub minus_violations: usize,
    pub worst_plus: T,
    pub worst_minus: T,
}

/// Checks `z`-convexity of `Φ⁺` and `z`-concavity of `Φ⁻` at `(z, p)` samples.
pub fn split_convexity<T: Real>(bundle: &DensityBundle<T>, samples: &[(Vec2<T>, Vec2<T>)], tol: T) -> SplitConvexity<T> {
    let mut out = SplitConvexity {
        samples: samples.len(),
        plus_violations: 0,
        minus_violations: 0,
        worst_plus: T::zero(),
        worst_minus: T::zero(),
    };
    for &(z, p) in samples {
        let (dz_plus, _) = bundle.phi_z_jacobians(z, p, Part::Plus);
        let (dz_minus, _) = bundle.phi_z_jacobians(z, p, Part::Minus);
        let scale = T::one() + dz_plus.max_abs() + dz_minus.max_abs();
        let lp = min_sym_eigenvalue(dz_plus) / scale;
        let lm = min_sym_eigenvalue(-dz_minus) / scale;
        out.worst_plus = out.worst_plus.min(lp);
        out.worst_minus = out.worst_minus.min(lm);
        if lp < -tol {
            out.plus_violations += 1;
        }
        if lm < -tol {
            out.minus_violations += 1;
        }
    }
    out
}

/// Deterministic low-discrepancy points in `[lo, hi]²` (additive recurrence).
pub fn sample_points<T: Real>(n: usize, lo: T, hi: T, seed: usize) -> Vec<Vec2<T>> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_3;
    (0..n)
        .map(|i| {
            let k = (i + 1 + 7919 * seed) as f64;
            let u = (0.5 + A1 * k).fract();
            let v = (0.5 + A2 * k).fract();
            Vec2::new(lo + (hi - lo) * T::lit(u), lo + (hi - lo) * T::lit(v))
        })
        .collect()
}

/// One named outcome of [`self_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, value: f64, bound: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed: value <= bound,
        detail: format!("{value:.3e} (bound {bound:.0e})"),
    }
}

/// Fast property checks run by `anisoflow verify`.
pub fn self_check() -> Result<Vec<CheckOutcome>, Error> {
    use crate::geodesic::{geodesic_bundle, GraphSurface, MountainSurface};
    use crate::scheme::solve_step;

    let surface: Arc<dyn GraphSurface<f64>> = Arc::new(MountainSurface::default());
    let bundles = vec![
        ("isotropic", DensityBundle::isotropic()),
        ("kfold(6,0.028)", DensityBundle::with_default_split(AnisotropyDensity::kfold(6, 0.028)?)),
        ("elliptic(0.5)", DensityBundle::with_default_split(AnisotropyDensity::elliptic(0.5)?)),
        ("geodesic c=0", geodesic_bundle(surface.clone(), 0.0)?),
        ("geodesic c=1", geodesic_bundle(surface.clone(), 1.0)?),
    ];
    let zs = sample_points(64, -0.5, 2.5, 1);
    let ps: Vec<Vec2<f64>> = sample_points(64, -2.0, 2.0, 2)
        .into_iter()
        .filter(|p| p.norm() > 0.2)
        .collect();
    let mut out = Vec::new();
    for (name, b) in &bundles {
        let mut worst: f64 = 0.0;
        let mut identity: f64 = 0.0;
        for (z, p) in zs.iter().zip(&ps) {
            worst = worst.max(fd_check(|q| b.phi(*z, q), |q| b.phi_p(*z, q), &[*p], 1e-6));
            worst = worst.max(fd_check(|y| b.phi(y, *p), |y| b.phi_z(y, *p, Part::Full), &[*z], 1e-6));
            for part in [Part::Plus, Part::Minus] {
                if b.phi_part(*z, *p, part).is_some() {
                    worst = worst.max(fd_check(
                        |y| b.phi_part(y, *p, part).unwrap_or(0.0),
                        |y| b.phi_z(y, *p, part),
                        &[*z],
                        1e-6,
                    ));
                }
                let sum = b.phi_z(*z, *p, Part::Plus) + b.phi_z(*z, *p, Part::Minus);
                let full = b.phi_z(*z, *p, Part::Full);
                identity = identity.max((sum - full).max_abs() / (1.0 + full.max_abs()));
            }
            let h = b.h_matrix(*z, *p)?;
            let gamma = b.base().gamma(*z, p.perp());
            let (a, _) = b.base().weight(*z);
            let gp = b.base().gamma_p(*z, p.perp())?;
            let xi = Vec2::new(0.3, -1.1);
            let expected = a * a * gamma * gamma / gp.norm_squared() * xi.norm_squared();
            identity = identity.max((h.quad(xi) - expected).abs() / (1.0 + expected.abs()));
        }
        out.push(outcome(&format!("finite differences, {name}"), worst, 1e-6));
        out.push(outcome(&format!("H identity and split sum, {name}"), identity, 1e-12));
    }

    let mut worst: f64 = 0.0;
    for z in &zs {
        worst = worst.max(fd_check(|y| surface.height(y), |y| surface.jet(y).gradient, &[*z], 1e-6));
        for k in 0..2 {
            worst = worst.max(fd_check(
                |y| surface.jet(y).gradient.component(k),
                |y| surface.jet(y).hessian.col(k),
                &[*z],
                1e-6,
            ));
        }
    }
    out.push(outcome("finite differences, mountain surface", worst, 1e-6));

    let x0 = PolygonalCurve::sample(64, crate::curve::circle(Vec2::zero(), 1.0))?;
    let params = SchemeParams::new(1e-3, 1e-3)?;
    let (x1, report) = solve_step(&x0, &bundles[0].1, &Forcing::None, &params)?;
    let r_expected = regular_polygon_step_radius(64, 1.0, 1e-3);
    let r_err = x1
        .nodes()
        .iter()
        .fold(0.0_f64, |a, x| a.max((x.norm() - r_expected).abs()));
    out.push(outcome("regular polygon step radius", r_err, 1e-10));
    out.push(outcome("stability slack", (-report.relative_slack()).max(0.0), 1e-9));
    Ok(out)
}

/// Circumradius after one isotropic step from a regular `J`-gon of circumradius `r`.
///
/// By symmetry `X_j^{new} = s X_j`; the nodal residual reduces to the scalar
/// linear equation `A(s - 1) + B s = 0`.
pub fn regular_polygon_step_radius<T: Real>(elements: usize, r: T, dt: T) -> T {
    let j = T::from_count(elements);
    let h = T::one() / j;
    let angle = T::TAU() / j;
    let c = (T::one() + T::one()) * j * (T::PI() / j).sin();
    let a = h * r * r * c * c / dt;
    let b = (T::lit(2.0) - T::lit(2.0) * angle.cos()) / h;
    r * a / (a + b)
}
