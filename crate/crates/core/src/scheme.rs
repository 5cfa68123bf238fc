// SPDX-License-Identifier: Apache-2.0

//! Fully discrete time stepping.
//!
//! Given `x^m`, the new curve `x^{m+1}` is a root of the nodal residual
//!
//! ```text
//! R_j = (1/Δt) M_j (X_j - X^m_j)
//!     + ½[Φ_p(X^m_j, d_j) + Φ_p(X^m_{j-1}, d_j)] - ½[Φ_p(X^m_{j+1}, d_{j+1}) + Φ_p(X^m_j, d_{j+1})]
//!     + ½h_j Φ⁺_z(X_j, d_j) + ½h_{j+1} Φ⁺_z(X_j, d_{j+1})
//!     + ½h_j Φ⁻_z(X^m_j, d_j) + ½h_{j+1} Φ⁻_z(X^m_j, d_{j+1})
//!     - F_j
//! ```
//!
//! with `d` the element derivatives of the unknown curve,
//! `M_j = ½[h_j H(X^m_j, d^m_j) + h_{j+1} H(X^m_j, d^m_{j+1})]` the lumped
//! mobility and `F_j` the explicit forcing load. Every accepted unforced step
//! satisfies `(Φ(x^{m+1}),1)^h + (1/Δt)(H(x^m)Δx, Δx)^h ≤ (Φ(x^m),1)^h`,
//! which [`StepReport::stability_slack`] monitors.

use std::fmt;
use std::sync::Arc;

use crate::curve::{discrete_energy, phi_energy, PolygonalCurve};
use crate::cyclic::CyclicBlockTridiagonal;
use crate::energy_density::{DensityBundle, Part};
use crate::error::{Error, NonConvergence};
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Newton,
    /// Lags `Φ_z` and the secant of `Φ_p` at the previous iterate.
    Picard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    AnalyticIfAvailable,
    /// Central differences of the residual with a distance-3 node colouring.
    FdColored,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearSolver {
    CyclicBlock,
    /// Dense Gaussian elimination, only sensible for small `J`.
    Dense,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeParams<T> {
    pub dt: T,
    pub final_time: T,
    /// Sup-norm tolerance on the nodal residual.
    pub newton_tol: T,
    pub newton_max_iter: usize,
    /// Backtracking on the residual sup norm (factor ½, at most 8 halvings).
    pub damping: bool,
    pub solver: Solver,
    pub jacobian: JacobianMode,
    pub linear_solver: LinearSolver,
    /// Stop once the polygon length drops below this; `None` uses `max(10 h, 1e-6)`.
    pub extinction_length: Option<T>,
    /// Iteration count above which a step is logged as slow.
    pub slow_step_warning: usize,
}

impl<T: Real> SchemeParams<T> {
    pub fn new(dt: T, final_time: T) -> Result<Self, Error> {
        let p = Self {
            dt,
            final_time,
            newton_tol: T::lit(1e-10),
            newton_max_iter: 25,
            damping: true,
            solver: Solver::Newton,
            jacobian: JacobianMode::AnalyticIfAvailable,
            linear_solver: LinearSolver::CyclicBlock,
            extinction_length: None,
            slow_step_warning: 10,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.final_time >= T::zero()) || !self.final_time.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "final time must be nonnegative, got {}",
                self.final_time
            )));
        }
        if !(self.newton_tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "newton_tol must be positive, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_max_iter must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of uniform steps to reach `final_time`.
    pub fn step_count(&self) -> usize {
        (self.final_time / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn extinction_threshold(&self, curve: &PolygonalCurve<T>) -> T {
        self.extinction_length
            .unwrap_or_else(|| (T::lit(10.0) * curve.grid().max_width()).max(T::lit(1e-6)))
    }
}

/// Evaluator `f(z, n)` for the forcing, `n` the unit outward normal of an
/// anti-clockwise curve.
pub type ForcingFn<T> = Arc<dyn Fn(Vec2<T>, Vec2<T>) -> T + Send + Sync>;

#[derive(Clone, Default)]
pub enum Forcing<T: Real> {
    #[default]
    None,
    Constant(T),
    Field(ForcingFn<T>),
}

impl<T: Real> fmt::Debug for Forcing<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "None"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl<T: Real> Forcing<T> {
    pub fn is_active(&self) -> bool {
        !matches!(self, Self::None)
    }

    pub fn eval(&self, z: Vec2<T>, normal: Vec2<T>) -> T {
        match self {
            Self::None => T::zero(),
            Self::Constant(c) => *c,
            Self::Field(f) => f(z, normal),
        }
    }
}

/// Outward unit normal of an anti-clockwise curve on an element with derivative `d`.
#[inline]
pub fn outward_normal<T: Real>(d: Vec2<T>) -> Vec2<T> {
    -d.perp() * (T::one() / d.norm())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport<T> {
    pub iterations: usize,
    pub final_residual: T,
    /// Discrete energy `E^h` before and after the step.
    pub energy_before: T,
    pub energy_after: T,
    /// `(Φ, 1)^h` before and after the step.
    pub phi_energy_before: T,
    pub phi_energy_after: T,
    /// `(1/Δt)(H(x^m)Δx, Δx)^h`.
    pub dissipation: T,
    /// `(Φ(x^m),1)^h - (Φ(x^{m+1}),1)^h - dissipation`; nonnegative up to
    /// solver tolerance for unforced steps.
    pub stability_slack: T,
    /// False under forcing, where the stability estimate is not available.
    pub monitor_active: bool,
    pub dt_over_h: T,
}

impl<T: Real> StepReport<T> {
    fn cast_f64(&self) -> StepReport<f64> {
        StepReport {
            iterations: self.iterations,
            final_residual: self.final_residual.as_f64(),
            energy_before: self.energy_before.as_f64(),
            energy_after: self.energy_after.as_f64(),
            phi_energy_before: self.phi_energy_before.as_f64(),
            phi_energy_after: self.phi_energy_after.as_f64(),
            dissipation: self.dissipation.as_f64(),
            stability_slack: self.stability_slack.as_f64(),
            monitor_active: self.monitor_active,
            dt_over_h: self.dt_over_h.as_f64(),
        }
    }

    /// Slack relative to `1 + |(Φ(x^m),1)^h|`.
    pub fn relative_slack(&self) -> T {
        self.stability_slack / (T::one() + self.phi_energy_before.abs())
    }
}

/// Quantities frozen at `x^m` for one time step.
struct StepData<T: Real> {
    /// `M_j / Δt`.
    mass: Vec<Mat2<T>>,
    /// `M_j` itself, for the dissipation term.
    lumped_h: Vec<Mat2<T>>,
    load: Vec<Vec2<T>>,
}

impl<T: Real> StepData<T> {
    fn new(
        x_old: &PolygonalCurve<T>,
        bundle: &DensityBundle<T>,
        forcing: &Forcing<T>,
        dt: T,
    ) -> Result<Self, Error> {
        x_old.check_edges()?;
        let grid = x_old.grid();
        let n = x_old.len();
        let half = T::lit(0.5);
        let nodes = x_old.nodes();
        let d_old = x_old.derivatives();
        let mut lumped_h = Vec::with_capacity(n);
        let mut load = Vec::with_capacity(n);
        for j in 0..n {
            let next = grid.next(j);
            let (h_l, h_r) = (grid.width(j), grid.width(next));
            let h_left = bundle.h_matrix(nodes[j], d_old[j])?;
            let h_right = bundle.h_matrix(nodes[j], d_old[next])?;
            lumped_h.push((h_left.scale(h_l) + h_right.scale(h_r)).scale(half));
            let f = if forcing.is_active() {
                let n_l = outward_normal(d_old[j]);
                let n_r = outward_normal(d_old[next]);
                h_left.mul_vec(n_l) * (half * h_l * forcing.eval(nodes[j], n_l))
                    + h_right.mul_vec(n_r) * (half * h_r * forcing.eval(nodes[j], n_r))
            } else {
                Vec2::zero()
            };
            load.push(f);
        }
        let inv_dt = T::one() / dt;
        Ok(Self {
            mass: lumped_h.iter().map(|m| m.scale(inv_dt)).collect(),
            lumped_h,
            load,
        })
    }
}

fn check_candidate<T: Real>(x: &PolygonalCurve<T>, x_old: &PolygonalCurve<T>) -> Result<(), Error> {
    if x.len() != x_old.len() || x.grid() != x_old.grid() {
        return Err(Error::InvalidParameter("candidate and previous curve live on different grids".into()));
    }
    x.check_edges()
}

/// Residual assembly with precomputed step data.
fn residual_with<T: Real>(
    x_new: &PolygonalCurve<T>,
    x_old: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    data: &StepData<T>,
) -> Result<Vec<Vec2<T>>, Error> {
    check_candidate(x_new, x_old)?;
    let grid = x_old.grid();
    let n = x_old.len();
    let half = T::lit(0.5);
    let old = x_old.nodes();
    let new = x_new.nodes();
    let d_new = x_new.derivatives();
    let flux: Vec<Vec2<T>> = (0..n)
        .map(|e| (bundle.phi_p(old[e], d_new[e]) + bundle.phi_p(old[grid.prev(e)], d_new[e])) * half)
        .collect();
    let homogeneous = bundle.is_spatially_homogeneous();
    let mut r = Vec::with_capacity(n);
    for j in 0..n {
        let next = grid.next(j);
        let mut rj = data.mass[j].mul_vec(new[j] - old[j]) + flux[j] - flux[next];
        if !homogeneous {
            let (h_l, h_r) = (half * grid.width(j), half * grid.width(next));
            rj += bundle.phi_z(new[j], d_new[j], Part::Plus) * h_l;
            rj += bundle.phi_z(new[j], d_new[next], Part::Plus) * h_r;
            rj += bundle.phi_z(old[j], d_new[j], Part::Minus) * h_l;
            rj += bundle.phi_z(old[j], d_new[next], Part::Minus) * h_r;
        }
        rj -= data.load[j];
        r.push(rj);
    }
    Ok(r)
}

/// Nodal residual of the scheme for a candidate `x_new`.
pub fn assemble_residual<T: Real>(
    x_new: &PolygonalCurve<T>,
    x_old: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    forcing: &Forcing<T>,
    params: &SchemeParams<T>,
) -> Result<Vec<Vec2<T>>, Error> {
    let data = StepData::new(x_old, bundle, forcing, params.dt)?;
    residual_with(x_new, x_old, bundle, &data)
}

/// Analytic Jacobian; `with_z_terms = false` gives the Picard operator.
fn jacobian_with<T: Real>(
    x_new: &PolygonalCurve<T>,
    x_old: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    data: &StepData<T>,
    with_z_terms: bool,
) -> Result<CyclicBlockTridiagonal<T>, Error> {
    check_candidate(x_new, x_old)?;
    let grid = x_old.grid();
    let n = x_old.len();
    let half = T::lit(0.5);
    let old = x_old.nodes();
    let new = x_new.nodes();
    let d_new = x_new.derivatives();
    // d flux_e / d d_e, scaled by 1/h_e.
    let stiff: Vec<Mat2<T>> = (0..n)
        .map(|e| {
            (bundle.phi_pp(old[e], d_new[e]) + bundle.phi_pp(old[grid.prev(e)], d_new[e]))
                .scale(half / grid.width(e))
        })
        .collect();
    let mut jac = CyclicBlockTridiagonal::zeros(n);
    let z_terms = with_z_terms && !bundle.is_spatially_homogeneous();
    for j in 0..n {
        let next = grid.next(j);
        jac.diag[j] = data.mass[j] + stiff[j] + stiff[next];
        jac.lower[j] = -stiff[j];
        jac.upper[j] = -stiff[next];
        if z_terms {
            let (h_l, h_r) = (grid.width(j), grid.width(next));
            let (dz_l, dp_l) = bundle.phi_z_jacobians(new[j], d_new[j], Part::Plus);
            let (dz_r, dp_r) = bundle.phi_z_jacobians(new[j], d_new[next], Part::Plus);
            let (_, wp_l) = bundle.phi_z_jacobians(old[j], d_new[j], Part::Minus);
            let (_, wp_r) = bundle.phi_z_jacobians(old[j], d_new[next], Part::Minus);
            jac.diag[j] += (dz_l.scale(h_l) + dp_l + dz_r.scale(h_r) - dp_r + wp_l - wp_r).scale(half);
            jac.lower[j] -= (dp_l + wp_l).scale(half);
            jac.upper[j] += (dp_r + wp_r).scale(half);
        }
    }
    Ok(jac)
}

/// Node colouring in which same-coloured nodes are at cyclic distance ≥ 3.
fn distance3_colors(n: usize) -> Vec<Vec<usize>> {
    let body = n - n % 3;
    let mut colors: Vec<Vec<usize>> = (0..3).map(|c| (c..body).step_by(3).collect()).collect();
    colors.extend((body..n).map(|j| vec![j]));
    colors
}

fn fd_jacobian_with<T: Real>(
    x_new: &PolygonalCurve<T>,
    x_old: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    data: &StepData<T>,
) -> Result<CyclicBlockTridiagonal<T>, Error> {
    check_candidate(x_new, x_old)?;
    let n = x_old.len();
    let grid = x_old.grid();
    let scale = x_new.nodes().iter().fold(T::one(), |a, x| a.max(x.max_abs()));
    let eps = T::epsilon().cbrt() * scale;
    let mut jac = CyclicBlockTridiagonal::zeros(n);
    for color in distance3_colors(n) {
        for comp in 0..2 {
            let shifted = |sign: T| {
                let mut nodes = x_new.nodes().to_vec();
                for &k in &color {
                    nodes[k] += Vec2::unit(comp) * (sign * eps);
                }
                x_new.with_nodes(nodes)
            };
            let rp = residual_with(&shifted(T::one()), x_old, bundle, data)?;
            let rm = residual_with(&shifted(-T::one()), x_old, bundle, data)?;
            let inv = T::one() / (eps + eps);
            for &k in &color {
                let (prev, next) = (grid.prev(k), grid.next(k));
                let col = |row: usize| (rp[row] - rm[row]) * inv;
                set_col(&mut jac.diag[k], comp, col(k));
                set_col(&mut jac.lower[next], comp, col(next));
                set_col(&mut jac.upper[prev], comp, col(prev));
            }
        }
    }
    Ok(jac)
}

fn set_col<T: Real>(m: &mut Mat2<T>, comp: usize, v: Vec2<T>) {
    if comp == 0 {
        m.a = v.x;
        m.c = v.y;
    } else {
        m.b = v.x;
        m.d = v.y;
    }
}

/// `∂R/∂X^{new}` as a cyclic block-tridiagonal matrix.
pub fn assemble_jacobian<T: Real>(
    x_new: &PolygonalCurve<T>,
    x_old: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    forcing: &Forcing<T>,
    params: &SchemeParams<T>,
) -> Result<CyclicBlockTridiagonal<T>, Error> {
    let data = StepData::new(x_old, bundle, forcing, params.dt)?;
    match params.jacobian {
        JacobianMode::AnalyticIfAvailable => jacobian_with(x_new, x_old, bundle, &data, true),
        JacobianMode::FdColored => fd_jacobian_with(x_new, x_old, bundle, &data),
    }
}

fn sup_norm<T: Real>(r: &[Vec2<T>]) -> T {
    r.iter().fold(T::zero(), |a, v| a.max(v.max_abs()))
}

/// Advances one time step from `x_old`.
pub fn solve_step<T: Real>(
    x_old: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    forcing: &Forcing<T>,
    params: &SchemeParams<T>,
) -> Result<(PolygonalCurve<T>, StepReport<T>), Error> {
    params.validate()?;
    let data = StepData::new(x_old, bundle, forcing, params.dt)?;

    let mut x = x_old.clone();
    let mut r = residual_with(&x, x_old, bundle, &data)?;
    let mut norm = sup_norm(&r);
    let mut iterations = 0;
    while !(norm <= params.newton_tol) && iterations < params.newton_max_iter {
        iterations += 1;
        let jac = match (params.solver, params.jacobian) {
            (Solver::Picard, _) => jacobian_with(&x, x_old, bundle, &data, false)?,
            (Solver::Newton, JacobianMode::AnalyticIfAvailable) => jacobian_with(&x, x_old, bundle, &data, true)?,
            (Solver::Newton, JacobianMode::FdColored) => fd_jacobian_with(&x, x_old, bundle, &data)?,
        };
        let rhs: Vec<Vec2<T>> = r.iter().map(|v| -*v).collect();
        let delta = match params.linear_solver {
            LinearSolver::CyclicBlock => jac.solve(&rhs)?,
            LinearSolver::Dense => jac.solve_dense(&rhs)?,
        };

        let mut alpha = T::one();
        let mut halvings = 0;
        loop {
            let trial = x.with_nodes(
                x.nodes()
                    .iter()
                    .zip(&delta)
                    .map(|(xi, di)| *xi + *di * alpha)
                    .collect(),
            );
            let outcome = residual_with(&trial, x_old, bundle, &data);
            let accept_anyway = !params.damping || halvings >= 8;
            match outcome {
                Ok(r_trial) => {
                    let n_trial = sup_norm(&r_trial);
                    if accept_anyway || n_trial < norm {
                        x = trial;
                        r = r_trial;
                        norm = n_trial;
                        break;
                    }
                }
                Err(e) if accept_anyway => return Err(e),
                Err(_) => {}
            }
            alpha = alpha * T::lit(0.5);
            halvings += 1;
        }
    }

    let energy_before = discrete_energy(x_old, bundle)?;
    let phi_energy_before = phi_energy(x_old, bundle);
    let phi_energy_after = phi_energy(&x, bundle);
    let inv_dt = T::one() / params.dt;
    let dissipation = x
        .nodes()
        .iter()
        .zip(x_old.nodes())
        .zip(&data.lumped_h)
        .fold(T::zero(), |acc, ((xn, xo), m)| acc + m.quad(*xn - *xo))
        * inv_dt;
    let report = StepReport {
        iterations,
        final_residual: norm,
        energy_before,
        energy_after: discrete_energy(&x, bundle).unwrap_or(T::nan()),
        phi_energy_before,
        phi_energy_after,
        dissipation,
        stability_slack: phi_energy_before - phi_energy_after - dissipation,
        monitor_active: !forcing.is_active(),
        dt_over_h: params.dt / x_old.grid().max_width(),
    };

    if !(norm <= params.newton_tol) {
        return Err(Error::NonConvergence(Box::new(NonConvergence {
            best_iterate: x.cast(),
            report: report.cast_f64(),
        })));
    }
    x.check_edges()?;
    if iterations > params.slow_step_warning {
        log::warn!(
            "nonlinear solve needed {iterations} iterations (dt/h = {}); the time step may be too large",
            report.dt_over_h
        );
    }
    Ok((x, report))
}

/// Per-step diagnostics recorded by [`run`]. Step 0 is the initial curve.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    pub step: usize,
    pub time: T,
    pub energy: T,
    pub ratio: Option<T>,
    pub min_edge: T,
    pub length: T,
    pub report: Option<StepReport<T>>,
}

pub trait Observer<T: Real> {
    fn observe(&mut self, record: &StepRecord<T>, curve: &PolygonalCurve<T>);
}

impl<T: Real, F: FnMut(&StepRecord<T>, &PolygonalCurve<T>)> Observer<T> for F {
    fn observe(&mut self, record: &StepRecord<T>, curve: &PolygonalCurve<T>) {
        self(record, curve)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason<T> {
    Completed,
    /// Polygon length fell below the extinction threshold.
    Extinction { length: T, threshold: T },
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub records: Vec<StepRecord<T>>,
    pub final_curve: PolygonalCurve<T>,
    pub final_time: T,
    pub stop: StopReason<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn reports(&self) -> impl Iterator<Item = &StepReport<T>> {
        self.records.iter().filter_map(|r| r.report.as_ref())
    }
}

fn record<T: Real>(
    step: usize,
    time: T,
    curve: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    report: Option<StepReport<T>>,
) -> Result<StepRecord<T>, Error> {
    let stats = curve.element_stats();
    Ok(StepRecord {
        step,
        time,
        energy: discrete_energy(curve, bundle)?,
        ratio: stats.ratio,
        min_edge: stats.min_edge,
        length: stats.edge_lengths.iter().fold(T::zero(), |a, &l| a + l),
        report,
    })
}

/// Evolves `x0` up to `params.final_time`, stopping early on extinction.
pub fn run<T: Real>(
    x0: &PolygonalCurve<T>,
    bundle: &DensityBundle<T>,
    forcing: &Forcing<T>,
    params: &SchemeParams<T>,
    observers: &mut [&mut dyn Observer<T>],
) -> Result<Trajectory<T>, Error> {
    params.validate()?;
    x0.check_edges()?;
    let threshold = params.extinction_threshold(x0);
    let steps = params.step_count();
    let first = record(0, T::zero(), x0, bundle, None)?;
    for obs in observers.iter_mut() {
        obs.observe(&first, x0);
    }
    let mut records = vec![first];
    let mut curve = x0.clone();
    let mut time = T::zero();
    for m in 1..=steps {
        let length = records.last().map(|r| r.length).unwrap_or_else(T::zero);
        if length < threshold {
            return Ok(Trajectory {
                records,
                final_curve: curve,
                final_time: time,
                stop: StopReason::Extinction { length, threshold },
            });
        }
        let t = T::from_count(m) * params.dt;
        let (next, report) = solve_step(&curve, bundle, forcing, params).map_err(|e| Error::Step {
            step: m,
            time: t.as_f64(),
            last_good: Box::new(curve.cast()),
            source: Box::new(e),
        })?;
        let rec = record(m, t, &next, bundle, Some(report)).map_err(|e| Error::Step {
            step: m,
            time: t.as_f64(),
            last_good: Box::new(curve.cast()),
            source: Box::new(e),
        })?;
        for obs in observers.iter_mut() {
            obs.observe(&rec, &next);
        }
        records.push(rec);
        curve = next;
        time = t;
    }
    let length = records.last().map(|r| r.length).unwrap_or_else(T::zero);
    let stop = if length < threshold {
        StopReason::Extinction { length, threshold }
    } else {
        StopReason::Completed
    };
    Ok(Trajectory {
        records,
        final_curve: curve,
        final_time: time,
        stop,
    })
}
