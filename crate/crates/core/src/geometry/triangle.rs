use super::{Point, Vector};
use crate::Real;

/// Closest point on triangle `(a, b, c)` to `p`.
///
/// Returns the point and its barycentric weights with respect to `(a, b, c)`.
/// Handles the vertex, edge and interior Voronoi regions separately, so the
/// weights are exact zeros on the regions' borders.
pub fn closest_point_on_triangle<T: Real>(
    p: &Point<T>,
    a: &Point<T>,
    b: &Point<T>,
    c: &Point<T>,
) -> (Point<T>, [T; 3]) {
    let zero = T::zero();
    let one = T::one();
    let ab: Vector<T> = b - a;
    let ac: Vector<T> = c - a;
    let ap: Vector<T> = p - a;

    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= zero && d2 <= zero {
        return (*a, [one, zero, zero]);
    }

    let bp: Vector<T> = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= zero && d4 <= d3 {
        return (*b, [zero, one, zero]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [one - v, v, zero]);
    }

    let cp: Vector<T> = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= zero && d5 <= d6 {
        return (*c, [zero, zero, one]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [one - w, zero, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [zero, one - w, w]);
    }

    let denom = one / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [one - v - w, v, w])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point<f64> {
        Point::new(x, y, z)
    }

    #[test]
    fn regions() {
        let (a, b, c) = (p(0., 0., 0.), p(1., 0., 0.), p(0., 1., 0.));
        let (q, w) = closest_point_on_triangle(&p(0.2, 0.2, 3.0), &a, &b, &c);
        assert!((q - p(0.2, 0.2, 0.0)).norm() < 1e-15);
        assert!((w[0] - 0.6).abs() < 1e-15);

        let (q, w) = closest_point_on_triangle(&p(-1., -1., 0.), &a, &b, &c);
        assert_eq!(q, a);
        assert_eq!(w, [1.0, 0.0, 0.0]);

        let (q, w) = closest_point_on_triangle(&p(0.5, -2.0, 1.0), &a, &b, &c);
        assert!((q - p(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert_eq!(w[2], 0.0);

        let (q, _) = closest_point_on_triangle(&p(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((q - p(0.5, 0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn matches_dense_sampling() {
        let (a, b, c) = (p(0.3, -0.2, 0.1), p(1.4, 0.5, -0.3), p(-0.1, 1.2, 0.6));
        let queries = [p(2., 2., 2.), p(-1., 0.5, -0.5), p(0.5, 0.4, 0.2), p(1.0, -1.0, 0.0)];
        for q in &queries {
            let (cp, w) = closest_point_on_triangle(q, &a, &b, &c);
            let recon = Point::from(a.coords * w[0] + b.coords * w[1] + c.coords * w[2]);
            assert!((recon - cp).norm() < 1e-12);
            let n = 400;
            let mut best = f64::INFINITY;
            for i in 0..=n {
                for j in 0..=(n - i) {
                    let u = i as f64 / n as f64;
                    let v = j as f64 / n as f64;
                    let s = a + (b - a) * u + (c - a) * v;
                    best = best.min((s - q).norm());
                }
            }
            let d = (cp - q).norm();
            assert!(d <= best + 1e-12 && best - d < 5e-3, "{d} vs {best}");
        }
    }
}
