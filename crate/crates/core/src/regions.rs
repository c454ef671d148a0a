//! Constraint regions: picking regions, petals, snow globes, forbidden
//! (sliver) regions, spindle tori and diametral balls.

use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3};
use crate::predicates::{circumsphere, Point};
use crate::quality::{self, QualityMeasures, RefinementConfig};
use crate::{GeometryError, RegionError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Primitive {
    InsideSphere { center: Point, radius: f64 },
    OutsideSphere { center: Point, radius: f64 },
    /// `normal . x <= offset`
    Halfspace { normal: Vec3, offset: f64 },
    /// `|normal . x - offset| <= half_width`
    Slab { normal: Vec3, offset: f64, half_width: f64 },
    InsideSpindleTorus(SpindleTorus),
}

impl Primitive {
    /// Signed violation: `<= 0` inside, positive outside (length units).
    pub fn violation(&self, p: &Point) -> f64 {
        match self {
            Primitive::InsideSphere { center, radius } => geom::dist(p, center) - radius,
            Primitive::OutsideSphere { center, radius } => radius - geom::dist(p, center),
            Primitive::Halfspace { normal, offset } => geom::dot(normal, p) - offset,
            Primitive::Slab {
                normal,
                offset,
                half_width,
            } => (geom::dot(normal, p) - offset).abs() - half_width,
            Primitive::InsideSpindleTorus(t) => t.violation(p),
        }
    }

    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        self.violation(p) <= slack
    }

    /// A ball enclosing the primitive, if bounded.
    pub fn bounding_ball(&self) -> Option<(Point, f64)> {
        match self {
            Primitive::InsideSphere { center, radius } => Some((*center, *radius)),
            Primitive::InsideSpindleTorus(t) => Some((t.mid, t.radius + t.offset)),
            _ => None,
        }
    }
}

/// Conjunction of primitives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub constraints: Vec<Primitive>,
}

impl Region {
    pub fn new(constraints: Vec<Primitive>) -> Region {
        Region { constraints }
    }

    pub fn and(mut self, c: Primitive) -> Region {
        self.constraints.push(c);
        self
    }

    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        self.constraints.iter().all(|c| c.contains(p, slack))
    }

    pub fn max_violation(&self, p: &Point) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// A ball enclosing the region: the tightest ball over bounded
    /// constraints, refined for the intersection of two balls.
    pub fn bounding_ball(&self) -> Option<(Point, f64)> {
        let balls: Vec<(Point, f64)> = self.constraints.iter().filter_map(|c| c.bounding_ball()).collect();
        let mut best: Option<(Point, f64)> = None;
        for (i, a) in balls.iter().enumerate() {
            if best.map_or(true, |b| a.1 < b.1) {
                best = Some(*a);
            }
            for b in &balls[i + 1..] {
                if let Some(l) = lens_ball(a, b) {
                    if best.map_or(true, |x| l.1 < x.1) {
                        best = Some(l);
                    }
                }
            }
        }
        best
    }
}

/// Smallest ball enclosing the intersection of two balls, when that
/// intersection is a proper lens.
pub fn lens_ball(a: &(Point, f64), b: &(Point, f64)) -> Option<(Point, f64)> {
    let d = geom::dist(&a.0, &b.0);
    if d == 0.0 || d >= a.1 + b.1 || d + a.1 <= b.1 || d + b.1 <= a.1 {
        return None;
    }
    let x = (d * d + a.1 * a.1 - b.1 * b.1) / (2.0 * d);
    if x < 0.0 || x > d {
        return None;
    }
    let h = (a.1 * a.1 - x * x).max(0.0).sqrt();
    let dir = geom::scale(&geom::sub(&b.0, &a.0), 1.0 / d);
    Some((geom::axpy(&a.0, x, &dir), h))
}

/// Ball at the circumcenter with radius `(rho - alpha) l`; every point in it is
/// at least `alpha l` from the element's vertices.
pub fn picking_region(q: &QualityMeasures, cfg: &RefinementConfig) -> Result<Primitive, RegionError> {
    if !(q.rho > cfg.alpha) || !q.rho.is_finite() {
        return Err(RegionError::EmptyPickingRegion {
            rho: q.rho,
            alpha: cfg.alpha,
        });
    }
    Ok(Primitive::InsideSphere {
        center: q.circumcenter,
        radius: (q.rho - cfg.alpha) * q.shortest_edge,
    })
}

/// Disk of radius `rho_star l` through both endpoints of `edge`, centered on
/// the side of `far_side_hint`.
pub fn petal(edge: [Point; 2], rho_star: f64, far_side_hint: &Point) -> Result<Primitive, RegionError> {
    let l = geom::dist(&edge[0], &edge[1]);
    if !(l > 0.0) {
        return Err(RegionError::Geometry(GeometryError::Degenerate));
    }
    if rho_star < 0.5 {
        return Err(RegionError::RatioTooSmall(rho_star));
    }
    let r = rho_star * l;
    let off = (r * r - 0.25 * l * l).max(0.0).sqrt();
    let mid = geom::midpoint(&edge[0], &edge[1]);
    let e = geom::sub(&edge[1], &edge[0]);
    let mut n = geom::scale(&[-e[1], e[0], 0.0], 1.0 / l);
    if geom::dot(&n, &geom::sub(far_side_hint, &mid)) < 0.0 {
        n = geom::scale(&n, -1.0);
    }
    Ok(Primitive::InsideSphere {
        center: geom::axpy(&mid, off, &n),
        radius: r,
    })
}

/// Circumcircle data of a triangle in 3D.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
    pub normal: Vec3,
}

pub fn circumcircle(t: &[Point; 3]) -> Result<Circle, GeometryError> {
    let (center, radius) = circumsphere(t)?;
    let normal = geom::triangle_normal(&t[0], &t[1], &t[2]).ok_or(GeometryError::Degenerate)?;
    Ok(Circle { center, radius, normal })
}

/// Sphere of radius `rho_star l_t` through the facet's circumcircle, centered
/// toward `fourth_vertex`; `None` when the facet's own ratio exceeds `rho_star`.
pub fn snow_globe(facet: &[Point; 3], fourth_vertex: &Point, rho_star: f64) -> Result<Option<Primitive>, RegionError> {
    let c = circumcircle(facet)?;
    let l = quality::shortest_edge(facet);
    if c.radius / l > rho_star {
        return Ok(None);
    }
    let r = rho_star * l;
    let off = (r * r - c.radius * c.radius).max(0.0).sqrt();
    let side = geom::dot(&c.normal, &geom::sub(fourth_vertex, &c.center));
    let n = if side < 0.0 { geom::scale(&c.normal, -1.0) } else { c.normal };
    Ok(Some(Primitive::InsideSphere {
        center: geom::axpy(&c.center, off, &n),
        radius: r,
    }))
}

/// The locus where a fourth vertex forms a sliver with a base triangle:
/// the circumradius of the tetrahedron stays within `rho_star l` and its
/// height stays below the slab half height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenRegion {
    pub base_triangle: [usize; 3],
    pub base: [Point; 3],
    pub circle: Circle,
    /// Shortest side of the base.
    pub l: f64,
    /// Radius of the bounding spheres, `rho_star l`.
    pub sphere_radius: f64,
    /// Axis offset of the bounding sphere centers; `None` when the base's
    /// circumradius already exceeds `rho_star l` (empty region).
    pub sphere_offset: Option<f64>,
    pub slab_half_height: f64,
}

impl ForbiddenRegion {
    /// The two spheres bounding the hourglass, as `(center, radius)`.
    pub fn sphere_pair(&self) -> Option<[(Point, f64); 2]> {
        let h = self.sphere_offset?;
        let c = &self.circle;
        Some([
            (geom::axpy(&c.center, h, &c.normal), self.sphere_radius),
            (geom::axpy(&c.center, -h, &c.normal), self.sphere_radius),
        ])
    }

    /// Height above the base plane and distance from the circumcircle axis.
    pub fn cylindrical(&self, p: &Point) -> (f64, f64) {
        let d = geom::sub(p, &self.circle.center);
        let z = geom::dot(&d, &self.circle.normal);
        let r2 = (geom::norm2(&d) - z * z).max(0.0);
        (z, r2.sqrt())
    }

    /// Membership margin: negative strictly inside (in length units, a
    /// lower-bound style measure good for tolerance decisions).
    pub fn depth(&self, p: &Point) -> f64 {
        let Some(h) = self.sphere_offset else {
            return f64::INFINITY;
        };
        let (z, _) = self.cylindrical(p);
        let slab = z.abs() - self.slab_half_height;
        let c = self.circle.center;
        let up = geom::dist(p, &geom::axpy(&c, h, &self.circle.normal)) - self.sphere_radius;
        let down = geom::dist(p, &geom::axpy(&c, -h, &self.circle.normal)) - self.sphere_radius;
        // inside exactly one of the two balls
        let hourglass = up.min(down).max(-up.max(down));
        slab.max(hourglass)
    }

    /// Strict membership.
    pub fn contains(&self, p: &Point) -> bool {
        let Some(h) = self.sphere_offset else {
            return false;
        };
        let (z, r) = self.cylindrical(p);
        if !(z.abs() < self.slab_half_height) {
            return false;
        }
        let y = self.circle.radius;
        (r * r + z * z - y * y).abs() <= 2.0 * h * z.abs() && z != 0.0
    }

    /// Conservative test against a ball: false only if the region certainly
    /// misses it.
    pub fn may_meet_ball(&self, center: &Point, radius: f64) -> bool {
        let Some(h) = self.sphere_offset else {
            return false;
        };
        let t = self.slab_half_height;
        let y = self.circle.radius;
        let r_lo = (y * y - 2.0 * h * t - t * t).max(0.0).sqrt();
        let r_hi = (y * y + 2.0 * h * t).sqrt();
        let (z, r) = self.cylindrical(center);
        let dz = (z.abs() - t).max(0.0);
        let dr = (r_lo - r).max(r - r_hi).max(0.0);
        dz.hypot(dr) <= radius
    }
}

pub fn forbidden_region(
    ids: [usize; 3],
    base: [Point; 3],
    rho_star: f64,
    sigma_star: f64,
) -> Result<ForbiddenRegion, RegionError> {
    let circle = circumcircle(&base)?;
    let area = geom::triangle_area(&base[0], &base[1], &base[2]);
    if !(area > 0.0) {
        return Err(RegionError::Geometry(GeometryError::Degenerate));
    }
    let l = quality::shortest_edge(&base);
    let big_r = rho_star * l;
    let sphere_offset = if circle.radius <= big_r {
        Some((big_r * big_r - circle.radius * circle.radius).sqrt())
    } else {
        None
    };
    Ok(ForbiddenRegion {
        base_triangle: ids,
        base,
        circle,
        l,
        sphere_radius: big_r,
        sphere_offset,
        slab_half_height: 3.0 * sigma_star * l * l * l / area,
    })
}

/// Forbidden regions for candidate base triangles that are small relative to
/// the driving edge and that may meet the locale ball. Output is sorted by
/// vertex ids.
pub fn enumerate_forbidden<I>(
    triangles: I,
    point: impl Fn(usize) -> Point,
    locale: (Point, f64),
    driving_l: f64,
    cfg: &RefinementConfig,
) -> Vec<ForbiddenRegion>
where
    I: IntoIterator<Item = [usize; 3]>,
{
    let mut out = Vec::new();
    let limit = driving_l * cfg.small_sliver_factor;
    for mut t in triangles {
        t.sort_unstable();
        let base = [point(t[0]), point(t[1]), point(t[2])];
        if !(quality::shortest_edge(&base) < limit) {
            continue;
        }
        let Ok(f) = forbidden_region(t, base, cfg.rho_star, cfg.sigma_star) else {
            continue;
        };
        if f.may_meet_ball(&locale.0, locale.1) {
            out.push(f);
        }
    }
    out.sort_by(|a, b| a.base_triangle.cmp(&b.base_triangle));
    out.dedup_by(|a, b| a.base_triangle == b.base_triangle);
    out
}

/// Strict encroachment of a diametral ball.
pub fn encroaches(p: &Point, ball: &(Point, f64)) -> bool {
    geom::dist2(p, &ball.0) < ball.1 * ball.1 * (1.0 - 1e-12)
}

/// Diametral ball of a segment.
pub fn diametral_ball_segment(a: &Point, b: &Point) -> (Point, f64) {
    (geom::midpoint(a, b), 0.5 * geom::dist(a, b))
}

/// Equatorial ball of a triangle (centered at its circumcenter).
pub fn diametral_ball_triangle(t: &[Point; 3]) -> Result<(Point, f64), GeometryError> {
    circumsphere(t)
}

/// Solid swept by rotating a petal about its edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpindleTorus {
    pub mid: Point,
    pub axis: Vec3,
    /// Petal radius.
    pub radius: f64,
    /// Petal center's distance from the axis.
    pub offset: f64,
}

impl SpindleTorus {
    /// Axial coordinate from the edge midpoint and radial distance.
    pub fn cylindrical(&self, p: &Point) -> (f64, f64) {
        let d = geom::sub(p, &self.mid);
        let a = geom::dot(&d, &self.axis);
        (a, (geom::norm2(&d) - a * a).max(0.0).sqrt())
    }

    pub fn violation(&self, p: &Point) -> f64 {
        let (a, r) = self.cylindrical(p);
        a.hypot(r - self.offset) - self.radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.violation(p) <= 0.0
    }
}

/// Spindle torus of the petal with ratio `rho` on the facet's shortest edge.
pub fn spindle_torus(facet: &[Point; 3], rho: f64) -> Result<SpindleTorus, RegionError> {
    if !(rho >= 2f64.sqrt()) {
        return Err(RegionError::SpindleRatio(rho));
    }
    let (i, j) = [(0, 1), (1, 2), (0, 2)]
        .into_iter()
        .min_by(|&(a, b), &(c, d)| {
            geom::dist(&facet[a], &facet[b]).total_cmp(&geom::dist(&facet[c], &facet[d]))
        })
        .unwrap();
    let l = geom::dist(&facet[i], &facet[j]);
    let axis = geom::normalize(&geom::sub(&facet[j], &facet[i])).ok_or(GeometryError::Degenerate)?;
    let radius = rho * l;
    Ok(SpindleTorus {
        mid: geom::midpoint(&facet[i], &facet[j]),
        axis,
        radius,
        offset: (radius * radius - 0.25 * l * l).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::measure;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn equilateral() -> [Point; 3] {
        let s3 = 3f64.sqrt();
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, s3 / 2.0, 0.0]]
    }

    #[test]
    fn picking_region_examples() {
        let mut cfg = RefinementConfig::default_3d();
        cfg.alpha = 1.5;
        let q = QualityMeasures {
            rho: 3.0,
            sigma: 0.0,
            min_angle: 0.0,
            min_dihedral: 0.0,
            shortest_edge: 2.0,
            circumcenter: [1.0, 2.0, 3.0],
            circumradius: 6.0,
        };
        assert_eq!(
            picking_region(&q, &cfg).unwrap(),
            Primitive::InsideSphere {
                center: [1.0, 2.0, 3.0],
                radius: 3.0
            }
        );
        let q2 = QualityMeasures { rho: 1.5, ..q };
        assert!(picking_region(&q2, &cfg).is_err());
    }

    #[test]
    fn petal_examples() {
        let e = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let Primitive::InsideSphere { center, radius } = petal(e, 1.0, &[0.5, 2.0, 0.0]).unwrap() else {
            panic!()
        };
        assert!((center[1] - 0.75f64.sqrt()).abs() < 1e-15 && radius == 1.0);
        let Primitive::InsideSphere { center, radius } = petal(e, 0.5, &[0.5, 2.0, 0.0]).unwrap() else {
            panic!()
        };
        assert_eq!((center, radius), ([0.5, 0.0, 0.0], 0.5));
        assert!(petal(e, 0.4, &[0.5, 1.0, 0.0]).is_err());
    }

    #[test]
    fn snow_globe_examples() {
        let f = equilateral();
        let g = snow_globe(&f, &[0.5, 0.3, 1.0], 2.0).unwrap().unwrap();
        let Primitive::InsideSphere { center, radius } = g else { panic!() };
        assert!((radius - 2.0).abs() < 1e-12);
        assert!((center[2] - (4.0f64 - 1.0 / 3.0).sqrt()).abs() < 1e-12);
        for p in &f {
            assert!((geom::dist(p, &center) - radius).abs() < 1e-10);
        }
        // obtuse facet with circumradius/shortest = 3
        let flat = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.5 * (1.0 / 35f64.sqrt()), 0.0]];
        let l = quality::shortest_edge(&flat);
        let y = circumcircle(&flat).unwrap().radius;
        assert!(y / l > 2.0);
        assert!(snow_globe(&flat, &[0.0, 0.0, 1.0], 2.0).unwrap().is_none());
    }

    #[test]
    fn forbidden_region_examples() {
        let f = forbidden_region([0, 1, 2], equilateral(), 2.0, 0.01).unwrap();
        assert!((f.slab_half_height - 0.069282).abs() < 1e-6);
        let cen = geom::centroid(&equilateral());
        // a point just above the circumcenter makes a flat tetrahedron whose
        // circumsphere is huge (radius ~3.36), so it is not a sliver apex
        let low = [cen[0], cen[1], 0.05];
        let r = circumsphere(&[equilateral()[0], equilateral()[1], equilateral()[2], low]).unwrap().1;
        assert!((r - 3.36).abs() < 0.01);
        assert!(!f.contains(&low));
        assert!(!f.contains(&[cen[0], cen[1], 1.0]));
        // near the circumcircle the apex does form a sliver
        let rim = geom::axpy(&cen, 1.0 / 3f64.sqrt() + 0.01, &[1.0, 0.0, 0.0]);
        let rim = [rim[0], rim[1], 0.05];
        assert!(f.contains(&rim));
        let r = circumsphere(&[equilateral()[0], equilateral()[1], equilateral()[2], rim]).unwrap().1;
        assert!(r <= 2.0);
        for (c, r) in f.sphere_pair().unwrap() {
            for p in &equilateral() {
                assert!((geom::dist(p, &c) - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn forbidden_membership_implies_sliver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = RefinementConfig::default_3d();
        for _ in 0..20 {
            let base: [Point; 3] = std::array::from_fn(|_| [rng.gen(), rng.gen(), rng.gen::<f64>() * 0.2]);
            let Ok(f) = forbidden_region([0, 1, 2], base, cfg.rho_star, cfg.sigma_star) else {
                continue;
            };
            let Some(h) = f.sphere_offset else { continue };
            let reach = f.sphere_radius + h;
            let mut hits = 0;
            for _ in 0..20_000 {
                let p = geom::add(
                    &f.circle.center,
                    &[rng.gen_range(-reach..reach), rng.gen_range(-reach..reach), rng.gen_range(-reach..reach)],
                );
                if !f.contains(&p) || base.iter().any(|b| geom::dist(b, &p) < f.l) {
                    continue;
                }
                hits += 1;
                let q = measure(&[base[0], base[1], base[2], p]).unwrap();
                assert!(q.rho <= cfg.rho_star * (1.0 + 1e-9), "rho {}", q.rho);
                assert!(q.sigma < cfg.sigma_star * (1.0 + 1e-9), "sigma {}", q.sigma);
                if hits >= 1000 {
                    break;
                }
            }
        }
    }

    #[test]
    fn encroachment_examples() {
        let ball = diametral_ball_segment(&[0.0; 3], &[2.0, 0.0, 0.0]);
        assert!(encroaches(&[1.0, 0.5, 0.0], &ball));
        assert!(!encroaches(&[1.0, 1.5, 0.0], &ball));
        let t = equilateral();
        let b = diametral_ball_triangle(&t).unwrap();
        let c = b.0;
        assert!(encroaches(&[c[0], c[1], 0.1], &b));
    }

    #[test]
    fn spindle_torus_matches_petal_projection() {
        let f = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 4.0, 0.5]];
        let t = spindle_torus(&f, 2.0).unwrap();
        let Primitive::InsideSphere { center, radius } = petal([f[0], f[1]], 2.0, &[0.5, 1.0, 0.0]).unwrap() else {
            panic!()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p: Point = [rng.gen_range(-4.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let (a, r) = t.cylindrical(&p);
            let planar = [0.5 + a, r, 0.0];
            assert_eq!(t.contains(&p), geom::dist(&planar, &center) <= radius);
        }
        assert!(t.contains(&[0.5, 0.5, 0.0]));
        assert!(!t.contains(&[10.0, 0.0, 0.0]));
        assert!(spindle_torus(&f, 1.2).is_err());
    }

    #[test]
    fn enumerate_forbidden_matches_brute_force() {
        let cfg = RefinementConfig::default_3d();
        let pts: Vec<Point> = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.1, 0.0],
            [0.2, 0.9, 0.1],
            [0.6, 0.5, 0.8],
            [3.0, 3.0, 3.0],
        ];
        let mut all = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                for c in b + 1..5 {
                    all.push([a, b, c]);
                }
            }
        }
        let locale = ([0.5, 0.5, 0.4], 0.5);
        let got = enumerate_forbidden(all.clone(), |i| pts[i], locale, 1.0, &cfg);
        let mut want = Vec::new();
        for t in all {
            let base = [pts[t[0]], pts[t[1]], pts[t[2]]];
            if quality::shortest_edge(&base) >= 2.0 {
                continue;
            }
            let f = forbidden_region(t, base, 2.0, 0.01).unwrap();
            if f.may_meet_ball(&locale.0, locale.1) {
                want.push(t);
            }
        }
        let got_ids: Vec<[usize; 3]> = got.iter().map(|f| f.base_triangle).collect();
        assert_eq!(got_ids, want);
        assert!(enumerate_forbidden(Vec::<[usize; 3]>::new(), |i| pts[i], locale, 1.0, &cfg).is_empty());
        // far locale: nothing qualifies
        assert!(enumerate_forbidden([[0, 1, 2]], |i| pts[i], ([50.0, 50.0, 50.0], 0.1), 1.0, &cfg).is_empty());
    }
}
