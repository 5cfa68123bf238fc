// SPDX-License-Identifier: Apache-2.0

//! Closed polygonal curves on a periodic parameter grid.
//!
//! Node `j` sits at `q_j = j h` for `j = 0..J`, with `q_J` identified with
//! `q_0`. Element `j` is the interval `[q_{j-1}, q_j]`, so its derivative is
//! `d_j = (X_j - X_{j-1}) / h_j` and node `j` is shared by elements `j` and
//! `j + 1` (indices mod `J`).

use crate::energy_density::DensityBundle;
use crate::error::Error;
use crate::linalg::Vec2;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid<T> {
    widths: Vec<T>,
}

impl<T: Real> PeriodicGrid<T> {
    /// `J` elements of width `1/J`.
    pub fn uniform(elements: usize) -> Result<Self, Error> {
        if elements < 3 {
            return Err(Error::InvalidParameter(format!(
                "a closed curve needs at least 3 elements, got {elements}"
            )));
        }
        let h = T::one() / T::from_count(elements);
        Ok(Self {
            widths: vec![h; elements],
        })
    }

    /// Arbitrary positive widths, rescaled to sum to one.
    pub fn from_widths(widths: Vec<T>) -> Result<Self, Error> {
        if widths.len() < 3 {
            return Err(Error::InvalidParameter("a closed curve needs at least 3 elements".into()));
        }
        if widths.iter().any(|w| !(*w > T::zero())) {
            return Err(Error::InvalidParameter("element widths must be positive".into()));
        }
        let total = widths.iter().fold(T::zero(), |a, &w| a + w);
        Ok(Self {
            widths: widths.into_iter().map(|w| w / total).collect(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.widths.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    /// Width `h_j` of element `j`.
    #[inline]
    pub fn width(&self, element: usize) -> T {
        self.widths[element]
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    /// Largest element width.
    pub fn max_width(&self) -> T {
        self.widths.iter().fold(T::zero(), |a, &w| a.max(w))
    }

    #[inline]
    pub fn prev(&self, j: usize) -> usize {
        if j == 0 {
            self.len() - 1
        } else {
            j - 1
        }
    }

    #[inline]
    pub fn next(&self, j: usize) -> usize {
        if j + 1 == self.len() {
            0
        } else {
            j + 1
        }
    }

    /// Parameter `q_j` for `j < J`.
    pub fn node_param(&self, j: usize) -> T {
        self.widths[1..=j].iter().fold(T::zero(), |a, &w| a + w)
    }
}

/// Piecewise field given by its one-sided limits per element:
/// `values[j] = (u(q_{j-1}⁺), u(q_j⁻))`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseField<V> {
    pub values: Vec<(V, V)>,
}

impl<T: Real> PiecewiseField<Vec2<T>> {
    /// Continuous piecewise linear field from nodal values.
    pub fn from_nodal(grid: &PeriodicGrid<T>, nodal: &[Vec2<T>]) -> Self {
        Self {
            values: (0..grid.len()).map(|j| (nodal[grid.prev(j)], nodal[j])).collect(),
        }
    }
}

/// Mass-lumped inner product `½ Σ h_j [(u·v)(q_j⁻) + (u·v)(q_{j-1}⁺)]`.
pub fn lumped_inner<T: Real>(
    u: &PiecewiseField<Vec2<T>>,
    v: &PiecewiseField<Vec2<T>>,
    grid: &PeriodicGrid<T>,
) -> T {
    lumped_integral(grid, |j| {
        let (ul, ur) = u.values[j];
        let (vl, vr) = v.values[j];
        (ul.dot(vl), ur.dot(vr))
    })
}

/// `½ Σ h_j [f(q_{j-1}⁺) + f(q_j⁻)]` for a scalar field given per element as
/// `(left, right)`.
pub fn lumped_integral<T: Real>(grid: &PeriodicGrid<T>, mut f: impl FnMut(usize) -> (T, T)) -> T {
    let half = T::lit(0.5);
    let mut sum = T::zero();
    for j in 0..grid.len() {
        let (left, right) = f(j);
        sum = sum + half * grid.width(j) * (left + right);
    }
    sum
}

/// Per-element geometry of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementStats<T> {
    pub derivatives: Vec<Vec2<T>>,
    pub edge_lengths: Vec<T>,
    /// Longest over shortest edge; `None` when some edge has zero length.
    pub ratio: Option<T>,
    pub min_edge: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalCurve<T> {
    grid: PeriodicGrid<T>,
    nodes: Vec<Vec2<T>>,
}

impl<T: Real> PolygonalCurve<T> {
    /// Curve on a uniform grid with `nodes[j] = X(q_j)`.
    pub fn from_nodes(nodes: Vec<Vec2<T>>) -> Result<Self, Error> {
        let grid = PeriodicGrid::uniform(nodes.len())?;
        Self::with_grid(grid, nodes)
    }

    pub fn with_grid(grid: PeriodicGrid<T>, nodes: Vec<Vec2<T>>) -> Result<Self, Error> {
        if grid.len() != nodes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} nodes for a grid of {} elements",
                nodes.len(),
                grid.len()
            )));
        }
        if let Some(bad) = nodes.iter().position(|x| !(x.x.is_finite() && x.y.is_finite())) {
            return Err(Error::InvalidParameter(format!("node {bad} is not finite")));
        }
        Ok(Self { grid, nodes })
    }

    /// Nodal interpolation `X_j = x₀(q_j)` of a periodic map on a uniform grid.
    /// Consecutive duplicate nodes are rejected.
    pub fn sample(elements: usize, x0: impl Fn(T) -> Vec2<T>) -> Result<Self, Error> {
        let grid = PeriodicGrid::uniform(elements)?;
        let h = T::one() / T::from_count(elements);
        let nodes = (0..elements).map(|j| x0(T::from_count(j) * h)).collect();
        let curve = Self::with_grid(grid, nodes)?;
        curve.check_edges()?;
        Ok(curve)
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn nodes(&self) -> &[Vec2<T>] {
        &self.nodes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn into_nodes(self) -> Vec<Vec2<T>> {
        self.nodes
    }

    /// Same grid, new node positions.
    pub fn with_nodes(&self, nodes: Vec<Vec2<T>>) -> Self {
        assert_eq!(nodes.len(), self.nodes.len());
        Self {
            grid: self.grid.clone(),
            nodes,
        }
    }

    /// Edge vector `X_j - X_{j-1}` of element `j`.
    #[inline]
    pub fn edge(&self, element: usize) -> Vec2<T> {
        self.nodes[element] - self.nodes[self.grid.prev(element)]
    }

    /// Element derivative `d_j`.
    #[inline]
    pub fn derivative(&self, element: usize) -> Vec2<T> {
        self.edge(element) * (T::one() / self.grid.width(element))
    }

    pub fn derivatives(&self) -> Vec<Vec2<T>> {
        (0..self.len()).map(|j| self.derivative(j)).collect()
    }

    /// Errors on the first zero-length edge.
    pub fn check_edges(&self) -> Result<(), Error> {
        match (0..self.len()).find(|&j| self.edge(j).is_zero()) {
            Some(element) => Err(Error::CollapsedEdge { element }),
            None => Ok(()),
        }
    }

    pub fn length(&self) -> T {
        (0..self.len()).fold(T::zero(), |a, j| a + self.edge(j).norm())
    }

    /// Shoelace area, positive for anti-clockwise curves.
    pub fn signed_area(&self) -> T {
        let twice = (0..self.len()).fold(T::zero(), |a, j| {
            a + self.nodes[self.grid.prev(j)].cross(self.nodes[j])
        });
        twice * T::lit(0.5)
    }

    pub fn centroid(&self) -> Vec2<T> {
        let sum = self.nodes.iter().fold(Vec2::zero(), |a, &x| a + x);
        sum * (T::one() / T::from_count(self.len()))
    }

    pub fn element_stats(&self) -> ElementStats<T> {
        let derivatives = self.derivatives();
        let edge_lengths: Vec<T> = (0..self.len()).map(|j| self.edge(j).norm()).collect();
        let min_edge = edge_lengths.iter().fold(T::infinity(), |a, &l| a.min(l));
        let max_edge = edge_lengths.iter().fold(T::zero(), |a, &l| a.max(l));
        let ratio = (min_edge > T::zero()).then(|| max_edge / min_edge);
        ElementStats {
            derivatives,
            edge_lengths,
            ratio,
            min_edge,
        }
    }

    /// True when all turning cross products `d_j × d_{j+1}` share one strict sign.
    pub fn is_convex(&self) -> bool {
        let mut pos = false;
        let mut neg = false;
        for j in 0..self.len() {
            let c = self.edge(j).cross(self.edge(self.grid.next(j)));
            if c > T::zero() {
                pos = true;
            } else if c < T::zero() {
                neg = true;
            } else {
                return false;
            }
        }
        pos != neg
    }

    /// Translate every node by `shift`.
    pub fn translated(&self, shift: Vec2<T>) -> Self {
        self.with_nodes(self.nodes.iter().map(|&x| x + shift).collect())
    }

    /// Same closed polygon starting at node `k`.
    pub fn relabeled(&self, k: usize) -> Self {
        let n = self.len();
        let nodes = (0..n).map(|j| self.nodes[(j + k) % n]).collect();
        let widths = (0..n).map(|j| self.grid.widths[(j + k) % n]).collect();
        Self {
            grid: PeriodicGrid { widths },
            nodes,
        }
    }

    pub fn cast<U: Real>(&self) -> PolygonalCurve<U> {
        PolygonalCurve {
            grid: PeriodicGrid {
                widths: self.grid.widths.iter().map(|w| U::lit(w.as_f64())).collect(),
            },
            nodes: self.nodes.iter().map(|x| x.cast()).collect(),
        }
    }
}

/// `E^h(χ) = (γ(χ, χ_ρ⊥), a(χ))^h`.
pub fn discrete_energy<T: Real>(curve: &PolygonalCurve<T>, bundle: &DensityBundle<T>) -> Result<T, Error> {
    curve.check_edges()?;
    let grid = curve.grid();
    Ok(lumped_integral(grid, |j| {
        let d = curve.derivative(j);
        let left = curve.nodes[grid.prev(j)];
        let right = curve.nodes[j];
        (bundle.length_density(left, d), bundle.length_density(right, d))
    }))
}

/// `(Φ(χ, χ_ρ), 1)^h`, the quantity controlled by the stability estimate.
pub fn phi_energy<T: Real>(curve: &PolygonalCurve<T>, bundle: &DensityBundle<T>) -> T {
    let grid = curve.grid();
    lumped_integral(grid, |j| {
        let d = curve.derivative(j);
        (bundle.phi(curve.nodes[grid.prev(j)], d), bundle.phi(curve.nodes[j], d))
    })
}

/// `x₀(ρ) = (cos u, ½ sin u + sin(cos u) + sin u [⅕ + sin u sin²(3u)])`, `u = 2πρ`.
pub fn mikula_curve<T: Real>(rho: T) -> Vec2<T> {
    let u = T::TAU() * rho;
    let (s, c) = u.sin_cos();
    let s3 = (T::lit(3.0) * u).sin();
    let y = T::lit(0.5) * s + c.sin() + s * (T::lit(0.2) + s * s3 * s3);
    Vec2::new(c, y)
}

/// Anti-clockwise circle.
pub fn circle<T: Real>(center: Vec2<T>, radius: T) -> impl Fn(T) -> Vec2<T> {
    move |rho| {
        let (s, c) = (T::TAU() * rho).sin_cos();
        center + Vec2::new(c, s) * radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::AnisotropyDensity;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn regular_polygon(n: usize) -> PolygonalCurve<f64> {
        PolygonalCurve::sample(n, circle(Vec2::zero(), 1.0)).unwrap()
    }

    #[test]
    fn lumped_inner_examples() {
        let grid = PeriodicGrid::<f64>::uniform(8).unwrap();
        let e1 = Vec2::new(1.0, 0.0);
        let ones = PiecewiseField::from_nodal(&grid, &[e1; 8]);
        assert!((lumped_inner(&ones, &ones, &grid) - 1.0).abs() < 1e-15);
        let mut hat = vec![Vec2::zero(); 8];
        hat[1] = e1;
        let hat = PiecewiseField::from_nodal(&grid, &hat);
        assert!((lumped_inner(&hat, &ones, &grid) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn lumped_inner_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = PeriodicGrid::from_widths(vec![0.1, 0.4, 0.2, 0.3]).unwrap();
        let mut v = || Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let u = PiecewiseField { values: (0..4).map(|_| (v(), v())).collect::<Vec<_>>() };
        let w = PiecewiseField { values: (0..4).map(|_| (v(), v())).collect::<Vec<_>>() };
        let mut direct: f64 = 0.0;
        for j in 0..4 {
            let h = grid.widths()[j];
            direct += 0.5 * h * (u.values[j].1.x * w.values[j].1.x + u.values[j].1.y * w.values[j].1.y);
            direct += 0.5 * h * (u.values[j].0.x * w.values[j].0.x + u.values[j].0.y * w.values[j].0.y);
        }
        assert!((lumped_inner(&u, &w, &grid) - direct).abs() < 1e-15);
    }

    #[test]
    fn regular_polygon_energy_is_perimeter() {
        let iso = DensityBundle::<f64>::isotropic();
        for n in [3, 4, 7, 256] {
            let e = discrete_energy(&regular_polygon(n), &iso).unwrap();
            let perimeter = 2.0 * n as f64 * (std::f64::consts::PI / n as f64).sin();
            assert!((e - perimeter).abs() < 1e-13, "n={n}");
        }
        let e = discrete_energy(&regular_polygon(256), &iso).unwrap();
        assert!((e - 6.283_027_602_288_6).abs() < 1e-12);
    }

    #[test]
    fn element_stats_examples() {
        let stats = regular_polygon(12).element_stats();
        assert!((stats.ratio.unwrap() - 1.0).abs() < 1e-12);
        let square = PolygonalCurve::from_nodes(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_eq!(square.element_stats().ratio, Some(2.0));
        let collapsed =
            PolygonalCurve::from_nodes(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)]).unwrap();
        assert_eq!(collapsed.element_stats().ratio, None);
        assert!(matches!(
            discrete_energy(&collapsed, &DensityBundle::isotropic()),
            Err(Error::CollapsedEdge { element: 1 })
        ));
    }

    #[test]
    fn sampling() {
        let c = regular_polygon(4);
        let expected = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (x, (ex, ey)) in c.nodes().iter().zip(expected) {
            assert!((x.x - ex).abs() < 1e-15 && (x.y - ey).abs() < 1e-15);
        }
        let m = mikula_curve(0.0_f64);
        assert_eq!(m, Vec2::new(1.0, 1f64.sin()));
        let center = Vec2::new(1.0, 3f64.sqrt() / 3.0);
        let c = PolygonalCurve::sample(6, circle(center, 2.0)).unwrap();
        for (j, x) in c.nodes().iter().enumerate() {
            let t = std::f64::consts::TAU * j as f64 / 6.0;
            assert!((*x - (center + Vec2::new(2.0 * t.cos(), 2.0 * t.sin()))).max_abs() < 1e-14);
        }
        assert!(matches!(
            PolygonalCurve::sample(4, |_| Vec2::new(1.0, 1.0)),
            Err(Error::CollapsedEdge { .. })
        ));
        assert!(PolygonalCurve::<f64>::sample(2, |r| Vec2::new(r, r)).is_err());
    }

    #[test]
    fn mikula_energy_matches_quadrature() {
        // Two-point (endpoint) rule per element written out by hand.
        let k6 = DensityBundle::with_default_split(AnisotropyDensity::kfold(6, 0.028).unwrap());
        let c = PolygonalCurve::sample(256, mikula_curve::<f64>).unwrap();
        let mut oracle = 0.0;
        for j in 0..256 {
            let a = c.nodes()[(j + 255) % 256];
            let b = c.nodes()[j];
            let e = b - a;
            let theta = e.perp().y.atan2(e.perp().x);
            oracle += e.norm() * (1.0 + 0.028 * (6.0 * theta).cos());
        }
        let e = discrete_energy(&c, &k6).unwrap();
        assert!((e - oracle).abs() < 1e-12 * oracle);
        let stats = c.element_stats();
        let max = stats.edge_lengths.iter().cloned().fold(0.0, f64::max);
        let min = stats.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(stats.ratio.unwrap(), max / min);
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn convexity_test() {
        assert!(regular_polygon(10).is_convex());
        let c = PolygonalCurve::sample(256, mikula_curve::<f64>).unwrap();
        assert!(!c.is_convex());
    }

    proptest! {
        #[test]
        fn energy_invariant_under_translation_and_relabeling(
            seed in 0u64..1000, dx in -5.0..5.0f64, dy in -5.0..5.0f64, k in 0usize..16,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nodes: Vec<_> = (0..16).map(|j| {
                let t = std::f64::consts::TAU * j as f64 / 16.0;
                let r = rng.gen_range(0.5..1.5);
                Vec2::new(r * t.cos(), r * t.sin())
            }).collect();
            let c = PolygonalCurve::from_nodes(nodes).unwrap();
            let b = DensityBundle::with_default_split(AnisotropyDensity::kfold(6, 0.028).unwrap());
            let e = discrete_energy(&c, &b).unwrap();
            let shifted = discrete_energy(&c.translated(Vec2::new(dx, dy)), &b).unwrap();
            let relabeled = discrete_energy(&c.relabeled(k), &b).unwrap();
            prop_assert!((e - shifted).abs() < 1e-12 * e);
            prop_assert!((e - relabeled).abs() < 1e-12 * e);
            prop_assert!(c.element_stats().ratio.unwrap() >= 1.0);
        }

        #[test]
        fn lumped_inner_symmetric_bilinear(seed in 0u64..1000, alpha in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let grid = PeriodicGrid::<f64>::uniform(5).unwrap();
            let mut field = || PiecewiseField {
                values: (0..5).map(|_| (
                    Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                )).collect::<Vec<_>>(),
            };
            let (u, v, w) = (field(), field(), field());
            let uv = lumped_inner(&u, &v, &grid);
            prop_assert!((uv - lumped_inner(&v, &u, &grid)).abs() < 1e-15);
            let combo = PiecewiseField {
                values: u.values.iter().zip(&w.values)
                    .map(|(a, b)| (a.0 * alpha + b.0, a.1 * alpha + b.1)).collect::<Vec<_>>(),
            };
            let lhs = lumped_inner(&combo, &v, &grid);
            let rhs = alpha * uv + lumped_inner(&w, &v, &grid);
            prop_assert!((lhs - rhs).abs() < 1e-13);
            prop_assert!(lumped_inner(&u, &u, &grid) > 0.0);
        }
    }
}
