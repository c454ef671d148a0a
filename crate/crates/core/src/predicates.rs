//! Geometric predicates.
//!
//! Sign decisions go through Shewchuk-style adaptive-precision arithmetic
//! (the `robust` crate) and are exact for finite double inputs. Continuous
//! constructions such as circumcenters are plain floating point.

use robust::{Coord, Coord3D};
use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3};
use crate::GeometryError;

/// A point in model units. Two-dimensional data uses `z = 0`.
pub type Point = Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn of(v: f64) -> Sign {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

fn c2(p: &Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn c3(p: &Point) -> Coord3D<f64> {
    Coord3D {
        x: p[0],
        y: p[1],
        z: p[2],
    }
}

fn check_finite(pts: &[Point]) -> Result<(), GeometryError> {
    if pts.iter().all(|p| p.iter().all(|c| c.is_finite())) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

/// Positive when `a, b, c` turn counterclockwise.
#[inline]
pub fn orient2d(a: &Point, b: &Point, c: &Point) -> Sign {
    Sign::of(robust::orient2d(c2(a), c2(b), c2(c)))
}

/// Positive when `d` lies on the side of plane `abc` that makes
/// `det[b-a, c-a, d-a] > 0` (the unit right-handed tetrahedron is positive).
#[inline]
pub fn orient3d(a: &Point, b: &Point, c: &Point, d: &Point) -> Sign {
    Sign::of(-robust::orient3d(c3(a), c3(b), c3(c), c3(d)))
}

/// In-circle test for a counterclockwise triangle.
#[inline]
pub fn incircle_ccw(a: &Point, b: &Point, c: &Point, q: &Point) -> Sign {
    Sign::of(robust::incircle(c2(a), c2(b), c2(c), c2(q)))
}

/// In-sphere test for a positively oriented tetrahedron (see [`orient3d`]).
#[inline]
pub fn insphere_pos(a: &Point, b: &Point, c: &Point, d: &Point, q: &Point) -> Sign {
    Sign::of(-robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(q)))
}

/// Orientation of a full-dimensional simplex: three points (2D) or four (3D).
pub fn orient(simplex: &[Point]) -> Result<Sign, GeometryError> {
    check_finite(simplex)?;
    match simplex.len() {
        3 => Ok(orient2d(&simplex[0], &simplex[1], &simplex[2])),
        4 => Ok(orient3d(&simplex[0], &simplex[1], &simplex[2], &simplex[3])),
        n => Err(GeometryError::Arity(n)),
    }
}

/// `Positive` iff `query` is strictly inside the circumscribing circle/sphere.
pub fn in_circumsphere(simplex: &[Point], query: &Point) -> Result<Sign, GeometryError> {
    let o = orient(simplex)?;
    check_finite(std::slice::from_ref(query))?;
    if o == Sign::Zero {
        return Err(GeometryError::Degenerate);
    }
    let s = match simplex.len() {
        3 => incircle_ccw(&simplex[0], &simplex[1], &simplex[2], query),
        _ => insphere_pos(&simplex[0], &simplex[1], &simplex[2], &simplex[3], query),
    };
    Ok(if o == Sign::Positive { s } else { s.flip() })
}

/// Center and radius of the smallest sphere through `k + 1` affinely
/// independent points (`k <= 3`). For a triangle in 3D this is its circumcircle
/// (center in the triangle's plane).
pub fn circumsphere(points: &[Point]) -> Result<(Point, f64), GeometryError> {
    check_finite(points)?;
    let center = match points.len() {
        1 => points[0],
        2 => geom::midpoint(&points[0], &points[1]),
        3 => triangle_circumcenter(&points[0], &points[1], &points[2])?,
        4 => tet_circumcenter(&points[0], &points[1], &points[2], &points[3])?,
        n => return Err(GeometryError::Arity(n)),
    };
    if points.len() == 2 && geom::dist2(&points[0], &points[1]) == 0.0 {
        return Err(GeometryError::Degenerate);
    }
    let r = geom::dist(&center, &points[0]);
    if !r.is_finite() {
        return Err(GeometryError::Degenerate);
    }
    Ok((center, r))
}

fn triangle_circumcenter(a: &Point, b: &Point, c: &Point) -> Result<Point, GeometryError> {
    let ab = geom::sub(b, a);
    let ac = geom::sub(c, a);
    let n = geom::cross(&ab, &ac);
    let n2 = geom::norm2(&n);
    let scale = geom::norm2(&ab).max(geom::norm2(&ac));
    if n2 <= 1e-28 * scale * scale || n2 == 0.0 {
        return Err(GeometryError::Degenerate);
    }
    // a + (|ac|^2 (n x ab) + |ab|^2 (ac x n)) / (2 |n|^2)
    let t1 = geom::scale(&geom::cross(&n, &ab), geom::norm2(&ac));
    let t2 = geom::scale(&geom::cross(&ac, &n), geom::norm2(&ab));
    let off = geom::scale(&geom::add(&t1, &t2), 0.5 / n2);
    Ok(geom::add(a, &off))
}

fn tet_circumcenter(a: &Point, b: &Point, c: &Point, d: &Point) -> Result<Point, GeometryError> {
    let ba = geom::sub(b, a);
    let ca = geom::sub(c, a);
    let da = geom::sub(d, a);
    let det = geom::dot(&ba, &geom::cross(&ca, &da));
    let scale = geom::norm2(&ba).max(geom::norm2(&ca)).max(geom::norm2(&da));
    if det == 0.0 || det.abs() <= 1e-24 * scale.powf(1.5) {
        return Err(GeometryError::Degenerate);
    }
    let t1 = geom::scale(&geom::cross(&ca, &da), geom::norm2(&ba));
    let t2 = geom::scale(&geom::cross(&da, &ba), geom::norm2(&ca));
    let t3 = geom::scale(&geom::cross(&ba, &ca), geom::norm2(&da));
    let sum = geom::add(&geom::add(&t1, &t2), &t3);
    Ok(geom::add(a, &geom::scale(&sum, 0.5 / det)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orient_examples() {
        let o = orient(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(o, Sign::Positive);
        let o = orient(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(o, Sign::Zero);
        let o = orient(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(o, Sign::Positive);
    }

    #[test]
    fn orient_rejects_non_finite() {
        let r = orient(&[[0.0, 0.0, 0.0], [f64::NAN, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(r, Err(GeometryError::NonFinite));
    }

    #[test]
    fn in_circumsphere_examples() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(in_circumsphere(&tri, &[0.5, 0.5, 0.0]).unwrap(), Sign::Positive);
        assert_eq!(in_circumsphere(&tri, &[2.0, 2.0, 0.0]).unwrap(), Sign::Negative);
        assert_eq!(in_circumsphere(&tri, &[1.0, 1.0, 0.0]).unwrap(), Sign::Zero);
        // clockwise input gives the same answer
        let cw = [tri[0], tri[2], tri[1]];
        assert_eq!(in_circumsphere(&cw, &[0.5, 0.5, 0.0]).unwrap(), Sign::Positive);
        let flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert_eq!(in_circumsphere(&flat, &[0.5, 0.5, 0.0]), Err(GeometryError::Degenerate));
    }

    #[test]
    fn insphere_unit_tet() {
        let tet = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        assert_eq!(in_circumsphere(&tet, &[0.5, 0.5, 0.5]).unwrap(), Sign::Positive);
        assert_eq!(in_circumsphere(&tet, &[1.0, 1.0, 1.0]).unwrap(), Sign::Zero);
        assert_eq!(in_circumsphere(&tet, &[2.0, 2.0, 2.0]).unwrap(), Sign::Negative);
        let swapped = [tet[1], tet[0], tet[2], tet[3]];
        assert_eq!(in_circumsphere(&swapped, &[0.5, 0.5, 0.5]).unwrap(), Sign::Positive);
    }

    #[test]
    fn circumsphere_examples() {
        let (c, r) = circumsphere(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-15);

        let s3 = 3f64.sqrt();
        let reg = [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.5, s3 / 2.0, 0.0],
            [0.5, s3 / 6.0, (2.0f64 / 3.0).sqrt()],
        ];
        let (c, r) = circumsphere(&reg).unwrap();
        assert!((r - 6f64.sqrt() / 4.0).abs() < 1e-14);
        for p in &reg {
            assert!((geom::dist(&c, p) - r).abs() < 1e-14);
        }

        let (c, r) = circumsphere(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        assert_eq!(c, [1.0, 0.0, 0.0]);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn circumsphere_degenerate() {
        assert!(circumsphere(&[[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).is_err());
        assert!(circumsphere(&[[1.0; 3], [1.0; 3]]).is_err());
    }
}
