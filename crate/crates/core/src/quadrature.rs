//! Six-point triangle quadrature and its extension to convex polygons.

use crate::geom::{triangle_area, Vec3};
use crate::scalar::Real;

/// Barycentric nodes and weights on a triangle. Weights sum to one and are
/// scaled by the triangle area when integrating.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub nodes: [[T; 3]; 6],
    pub weights: [T; 6],
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl<T: Real> QuadratureRule<T> {
    /// Albrecht-Collatz rule: the three edge midpoints with weight 1/30 and
    /// the three points (1/6, 1/6, 2/3) with weight 3/10.
    pub fn albrecht_collatz() -> Self {
        let h = T::half();
        let s = T::lit(1.0 / 6.0);
        let t = T::lit(2.0 / 3.0);
        let z = T::zero();
        let we = T::lit(1.0 / 30.0);
        let wi = T::lit(3.0 / 10.0);
        Self {
            nodes: [[h, h, z], [z, h, h], [h, z, h], [s, s, t], [t, s, s], [s, t, s]],
            weights: [we, we, we, wi, wi, wi],
            degree: 3,
        }
    }

    /// Quadrature points of triangle `abc` with weights already multiplied by its area.
    pub fn triangle_nodes(&self, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> [(Vec3<T>, T); 6] {
        let area = triangle_area(a, b, c);
        std::array::from_fn(|k| {
            let [wa, wb, wc] = self.nodes[k];
            (a * wa + b * wb + c * wc, self.weights[k] * area)
        })
    }

    /// Quadrature points of a convex polygon, fanned from its first vertex.
    pub fn polygon_nodes<'a>(&'a self, ring: &'a [Vec3<T>]) -> impl Iterator<Item = (Vec3<T>, T)> + 'a {
        let n = ring.len();
        (1..n.saturating_sub(1)).flat_map(move |k| self.triangle_nodes(ring[0], ring[k], ring[k + 1]))
    }

    pub fn integrate_triangle(&self, a: Vec3<T>, b: Vec3<T>, c: Vec3<T>, mut f: impl FnMut(Vec3<T>) -> T) -> T {
        self.triangle_nodes(a, b, c).iter().map(|&(p, w)| w * f(p)).sum()
    }

    /// Integral of `f` over a planar convex polygon; zero for fewer than
    /// three vertices or zero area.
    pub fn integrate_polygon(&self, ring: &[Vec3<T>], mut f: impl FnMut(Vec3<T>) -> T) -> T {
        self.polygon_nodes(ring).map(|(p, w)| w * f(p)).sum()
    }
}

impl<T: Real> Default for QuadratureRule<T> {
    fn default() -> Self {
        Self::albrecht_collatz()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^a y^b over the triangle (0,0), (1,0), (0,1).
    fn monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn unit() -> [Vec3<f64>; 3] {
        [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]
    }

    #[test]
    fn weights_sum_to_one() {
        let r = QuadratureRule::<f64>::albrecht_collatz();
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for n in r.nodes {
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_through_stated_degree() {
        let r = QuadratureRule::<f64>::albrecht_collatz();
        let [a, b, c] = unit();
        for deg in 0..=r.degree as u32 {
            for i in 0..=deg {
                let j = deg - i;
                let got = r.integrate_triangle(a, b, c, |p| p.x.powi(i as i32) * p.y.powi(j as i32));
                let want = monomial(i, j);
                assert!((got - want).abs() <= 1e-12 * want, "x^{i} y^{j}: {got} vs {want}");
            }
        }
        // Degree four is not exact.
        let got = r.integrate_triangle(a, b, c, |p| p.x.powi(4));
        assert!((got - monomial(4, 0)).abs() > 1e-4);
    }

    #[test]
    fn constant_gives_area_for_polygons() {
        let r = QuadratureRule::<f64>::default();
        let hex: Vec<Vec3<f64>> = (0..6)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 3.0;
                Vec3::new(t.cos(), t.sin(), 0.3)
            })
            .collect();
        let area = 1.5 * 3f64.sqrt();
        assert!((r.integrate_polygon(&hex, |_| 1.0) - area).abs() < 1e-12 * area);
        assert_eq!(r.integrate_polygon(&hex[..2], |_| 1.0), 0.0);
        let line = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert_eq!(r.integrate_polygon(&line, |_| 1.0), 0.0);
    }

    #[test]
    fn linear_over_square() {
        let r = QuadratureRule::<f64>::default();
        let sq = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(2.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        // Integral of 3x + y over [0,2]x[0,1] = 6 + 1.
        let got = r.integrate_polygon(&sq, |p| 3.0 * p.x + p.y);
        assert!((got - 7.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let r = QuadratureRule::<f32>::default();
        let [a, b, c] = unit().map(|p| p.cast::<f32>());
        assert!((r.integrate_triangle(a, b, c, |p| p.x * p.y) - 1.0 / 24.0).abs() < 1e-6);
    }
}
