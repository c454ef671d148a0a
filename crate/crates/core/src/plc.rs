//! Piecewise linear complexes: input vertices, segments, planar facets and
//! hole points, plus the derived feature set used during refinement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geom::{self, Vec3};
use crate::predicates::Point;
use crate::{Dim, PlcError};

/// Minimum angle between segments sharing a vertex (and between segments of
/// one facet in 3D).
pub const MIN_INPUT_ANGLE_DEG: f64 = 60.0;
/// Facets meeting along an edge must not form an acute dihedral angle.
pub const MIN_DIHEDRAL_DEG: f64 = 90.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plc {
    pub dim: Dim,
    pub vertices: Vec<Point>,
    /// Boundary segments (2D). In 3D, extra segments not on any facet edge.
    pub segments: Vec<[usize; 2]>,
    /// Planar polygonal facets (3D), each a vertex loop.
    pub facets: Vec<Vec<usize>>,
    pub holes: Vec<Point>,
    /// Vertices lying in the interior of a facet polygon, as `(facet, vertex)`.
    /// Produced by preprocessing.
    #[serde(default)]
    pub facet_points: Vec<(usize, usize)>,
}

impl Plc {
    pub fn new_2d(vertices: Vec<Point>, segments: Vec<[usize; 2]>, holes: Vec<Point>) -> Plc {
        Plc {
            dim: Dim::Two,
            vertices,
            segments,
            facets: Vec::new(),
            holes,
            facet_points: Vec::new(),
        }
    }

    pub fn new_3d(vertices: Vec<Point>, facets: Vec<Vec<usize>>, holes: Vec<Point>) -> Plc {
        Plc {
            dim: Dim::Three,
            vertices,
            segments: Vec::new(),
            facets,
            holes,
            facet_points: Vec::new(),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the input vertices.
    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        geom::dist(&lo, &hi)
    }

    /// Checks everything the refiner relies on and reports every problem.
    pub fn validate(&self) -> Result<(), PlcError> {
        let mut issues = Vec::new();
        let n = self.vertices.len();
        if n < self.dim.arity() {
            issues.push(format!("need at least {} vertices, got {n}", self.dim.arity()));
        }
        for (i, p) in self.vertices.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                issues.push(format!("vertex {i}: non-finite coordinate"));
            }
            if self.dim == Dim::Two && p[2] != 0.0 {
                issues.push(format!("vertex {i}: 2D vertex with nonzero z"));
            }
        }
        if !issues.is_empty() {
            return Err(PlcError { issues });
        }
        let scale = self.diameter().max(f64::MIN_POSITIVE);

        let mut sorted: Vec<usize> = (0..n).collect();
        sorted.sort_by(|&a, &b| geom::lex_cmp(&self.vertices[a], &self.vertices[b]));
        for w in sorted.windows(2) {
            let (a, b) = (w[0], w[1]);
            if geom::dist(&self.vertices[a], &self.vertices[b]) <= 1e-12 * scale {
                issues.push(format!("vertex {} duplicates vertex {}", a.max(b), a.min(b)));
            }
        }
        // near-duplicates that are not lexicographic neighbours
        if n <= 4000 {
            for i in 0..n {
                for j in i + 1..n {
                    let d = geom::dist(&self.vertices[i], &self.vertices[j]);
                    if d <= 1e-12 * scale && d > 0.0 {
                        issues.push(format!("vertex {j} duplicates vertex {i}"));
                    }
                }
            }
        }

        for (k, s) in self.segments.iter().enumerate() {
            if s[0] >= n || s[1] >= n {
                issues.push(format!("segment {k}: dangling vertex reference"));
            } else if s[0] == s[1] {
                issues.push(format!("segment {k}: zero length"));
            }
        }
        for (k, f) in self.facets.iter().enumerate() {
            if f.len() < 3 {
                issues.push(format!("facet {k}: fewer than three vertices"));
                continue;
            }
            if f.iter().any(|&v| v >= n) {
                issues.push(format!("facet {k}: dangling vertex reference"));
                continue;
            }
            let pts: Vec<Point> = f.iter().map(|&v| self.vertices[v]).collect();
            match newell_normal(&pts) {
                None => issues.push(format!("facet {k}: degenerate polygon")),
                Some(nrm) => {
                    let c = geom::centroid(&pts);
                    let dev = pts
                        .iter()
                        .map(|p| geom::dot(&geom::sub(p, &c), &nrm).abs())
                        .fold(0.0, f64::max);
                    if dev > 1e-8 * scale {
                        issues.push(format!("facet {k}: nonplanar (deviation {dev:.3e})"));
                    }
                }
            }
        }
        for (k, &(f, v)) in self.facet_points.iter().enumerate() {
            if f >= self.facets.len() || v >= n {
                issues.push(format!("facet point {k}: dangling reference"));
            }
        }
        if self.dim == Dim::Two && !self.facets.is_empty() {
            issues.push("2D PLC must not contain facets".into());
        }
        if !issues.is_empty() {
            return Err(PlcError { issues });
        }

        let features = FeatureSet::build(self);
        self.check_segment_geometry(&features, scale, &mut issues);
        self.check_angles(&features, &mut issues);
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PlcError { issues })
        }
    }

    fn check_segment_geometry(&self, f: &FeatureSet, scale: f64, issues: &mut Vec<String>) {
        let p = &self.vertices;
        for (k, s) in f.segments.iter().enumerate() {
            for (v, q) in p.iter().enumerate() {
                if v == s[0] || v == s[1] {
                    continue;
                }
                let (d, t) = geom::point_segment(q, &p[s[0]], &p[s[1]]);
                if d <= 1e-10 * scale && t > 0.0 && t < 1.0 {
                    issues.push(format!("vertex {v} lies on segment {k} ({}-{})", s[0], s[1]));
                }
            }
        }
        if self.dim == Dim::Two {
            let segs = &f.segments;
            for i in 0..segs.len() {
                for j in i + 1..segs.len() {
                    let (a, b) = (segs[i], segs[j]);
                    if a.contains(&b[0]) || a.contains(&b[1]) {
                        continue;
                    }
                    if segments_cross(&p[a[0]], &p[a[1]], &p[b[0]], &p[b[1]]) {
                        issues.push(format!("segments {i} and {j} intersect"));
                    }
                }
            }
        }
    }

    fn check_angles(&self, f: &FeatureSet, issues: &mut Vec<String>) {
        let p = &self.vertices;
        let min_cos = MIN_INPUT_ANGLE_DEG.to_radians().cos();
        // segments meeting at a vertex, restricted to a common facet in 3D
        let groups: Vec<Vec<usize>> = if self.dim == Dim::Two {
            vec![(0..f.segments.len()).collect()]
        } else {
            f.facets.iter().map(|fc| fc.segments.clone()).collect()
        };
        let mut reported = BTreeSet::new();
        for group in &groups {
            let mut at: BTreeMap<usize, Vec<Vec3>> = BTreeMap::new();
            for &s in group {
                let [a, b] = f.segments[s];
                let d = geom::normalize(&geom::sub(&p[b], &p[a])).unwrap_or([0.0; 3]);
                at.entry(a).or_default().push(d);
                at.entry(b).or_default().push(geom::scale(&d, -1.0));
            }
            for (v, dirs) in at {
                for i in 0..dirs.len() {
                    for j in i + 1..dirs.len() {
                        if geom::dot(&dirs[i], &dirs[j]) > min_cos + 1e-12 && reported.insert(v) {
                            issues.push(format!(
                                "segments meet at vertex {v} with an angle below {MIN_INPUT_ANGLE_DEG} degrees"
                            ));
                        }
                    }
                }
            }
        }
        if self.dim == Dim::Three {
            let max_cos = MIN_DIHEDRAL_DEG.to_radians().cos();
            for (s, owners) in f.segment_facets.iter().enumerate() {
                let [a, b] = f.segments[s];
                let mut inward = Vec::new();
                for &fi in owners {
                    for (pi, poly) in f.facets[fi].polygons.iter().enumerate() {
                        if let Some(dir) = polygon_inward(p, poly, a, b, &f.facets[fi].poly_normals[pi]) {
                            inward.push(dir);
                        }
                    }
                }
                for i in 0..inward.len() {
                    for j in i + 1..inward.len() {
                        if geom::dot(&inward[i], &inward[j]) > max_cos + 1e-9 {
                            issues.push(format!("facets meet at an acute dihedral along {a}-{b}"));
                        }
                    }
                }
            }
        }
    }
}

fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    use crate::predicates::{orient2d, Sign};
    let o1 = orient2d(a, b, c);
    let o2 = orient2d(a, b, d);
    let o3 = orient2d(c, d, a);
    let o4 = orient2d(c, d, b);
    if o1 != Sign::Zero && o2 != Sign::Zero && o3 != Sign::Zero && o4 != Sign::Zero {
        return o1 != o2 && o3 != o4;
    }
    // collinear overlaps
    let on = |p: &Point, q: &Point, r: &Point| {
        orient2d(p, q, r) == Sign::Zero && {
            let (_, t) = geom::point_segment(r, p, q);
            t > 0.0 && t < 1.0
        }
    };
    on(a, b, c) || on(a, b, d) || on(c, d, a) || on(c, d, b)
}

/// Newell's polygon normal, normalized.
pub fn newell_normal(pts: &[Point]) -> Option<Vec3> {
    let mut n = [0.0; 3];
    for i in 0..pts.len() {
        let a = &pts[i];
        let b = &pts[(i + 1) % pts.len()];
        n[0] += (a[1] - b[1]) * (a[2] + b[2]);
        n[1] += (a[2] - b[2]) * (a[0] + b[0]);
        n[2] += (a[0] - b[0]) * (a[1] + b[1]);
    }
    let scale = pts
        .iter()
        .map(|p| geom::dist2(p, &pts[0]))
        .fold(0.0, f64::max);
    if geom::norm2(&n) <= 1e-24 * scale * scale {
        return None;
    }
    geom::normalize(&n)
}

/// Direction into polygon `poly` perpendicular to its edge `ab`.
fn polygon_inward(p: &[Point], poly: &[usize], a: usize, b: usize, n: &Vec3) -> Option<Vec3> {
    let k = poly.len();
    for i in 0..k {
        let (u, v) = (poly[i], poly[(i + 1) % k]);
        if (u, v) == (a, b) || (u, v) == (b, a) {
            let e = geom::sub(&p[v], &p[u]);
            return geom::normalize(&geom::cross(n, &e));
        }
    }
    None
}

/// A maximal group of coplanar, edge-connected input polygons.
#[derive(Clone, Debug)]
pub struct Facet {
    pub polygons: Vec<Vec<usize>>,
    pub poly_normals: Vec<Vec3>,
    pub normal: Vec3,
    pub origin: Point,
    pub u: Vec3,
    pub v: Vec3,
    /// Feature segments bounding this facet.
    pub segments: Vec<usize>,
    /// Input vertices on this facet (polygon corners and facet points).
    pub vertices: Vec<usize>,
}

impl Facet {
    pub fn to_local(&self, p: &Point) -> [f64; 2] {
        let d = geom::sub(p, &self.origin);
        [geom::dot(&d, &self.u), geom::dot(&d, &self.v)]
    }

    pub fn from_local(&self, q: [f64; 2]) -> Point {
        geom::axpy(&geom::axpy(&self.origin, q[0], &self.u), q[1], &self.v)
    }

    pub fn plane_distance(&self, p: &Point) -> f64 {
        geom::dot(&geom::sub(p, &self.origin), &self.normal)
    }

    /// True if `p` lies on the facet plane (within `tol`) and inside (or on the
    /// boundary of) one of its polygons.
    pub fn contains(&self, p: &Point, pts: &[Point], tol: f64) -> bool {
        if self.plane_distance(p).abs() > tol {
            return false;
        }
        let q = self.to_local(p);
        self.polygons.iter().any(|poly| {
            let loop2: Vec<[f64; 2]> = poly.iter().map(|&i| self.to_local(&pts[i])).collect();
            point_in_polygon(&q, &loop2, tol)
        })
    }
}

/// Inclusive point-in-polygon test in 2D (boundary within `tol` counts).
pub fn point_in_polygon(q: &[f64; 2], poly: &[[f64; 2]], tol: f64) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (d, _) = geom::point_segment(&[q[0], q[1], 0.0], &[a[0], a[1], 0.0], &[b[0], b[1], 0.0]);
        if d <= tol {
            return true;
        }
        if (a[1] > q[1]) != (b[1] > q[1]) {
            let x = a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if q[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Segments and facets as the refiner sees them. In 3D, coplanar polygons
/// sharing an edge are merged into one facet and their shared edge is not a
/// feature.
#[derive(Clone, Debug, Default)]
pub struct FeatureSet {
    pub segments: Vec<[usize; 2]>,
    pub facets: Vec<Facet>,
    /// For each segment, the facets it bounds.
    pub segment_facets: Vec<Vec<usize>>,
}

impl FeatureSet {
    pub fn build(plc: &Plc) -> FeatureSet {
        if plc.dim == Dim::Two {
            let mut segments: Vec<[usize; 2]> = Vec::new();
            let mut seen = BTreeSet::new();
            for s in &plc.segments {
                let key = (s[0].min(s[1]), s[0].max(s[1]));
                if seen.insert(key) {
                    segments.push([key.0, key.1]);
                }
            }
            let segment_facets = vec![Vec::new(); segments.len()];
            return FeatureSet {
                segments,
                facets: Vec::new(),
                segment_facets,
            };
        }
        let p = &plc.vertices;
        let np = plc.facets.len();
        let normals: Vec<Vec3> = plc
            .facets
            .iter()
            .map(|f| {
                let pts: Vec<Point> = f.iter().map(|&v| p[v]).collect();
                newell_normal(&pts).unwrap_or([0.0, 0.0, 1.0])
            })
            .collect();
        let scale = plc.diameter().max(f64::MIN_POSITIVE);
        // edge -> polygons
        let mut edge_polys: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (k, f) in plc.facets.iter().enumerate() {
            for i in 0..f.len() {
                let (a, b) = (f[i], f[(i + 1) % f.len()]);
                edge_polys.entry((a.min(b), a.max(b))).or_default().push(k);
            }
        }
        let coplanar = |i: usize, j: usize| {
            let c = geom::dot(&normals[i], &normals[j]).abs();
            if c < 1.0 - 1e-10 {
                return false;
            }
            let o = p[plc.facets[i][0]];
            plc.facets[j]
                .iter()
                .all(|&v| geom::dot(&geom::sub(&p[v], &o), &normals[i]).abs() <= 1e-9 * scale)
        };
        // union-find over polygons
        let mut parent: Vec<usize> = (0..np).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut y = x;
            while parent[y] != r {
                let nx = parent[y];
                parent[y] = r;
                y = nx;
            }
            r
        }
        for polys in edge_polys.values() {
            for i in 0..polys.len() {
                for j in i + 1..polys.len() {
                    if coplanar(polys[i], polys[j]) {
                        let (a, b) = (find(&mut parent, polys[i]), find(&mut parent, polys[j]));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
        let mut group_of = vec![usize::MAX; np];
        let mut facets: Vec<Facet> = Vec::new();
        for k in 0..np {
            let r = find(&mut parent, k);
            if group_of[r] == usize::MAX {
                group_of[r] = facets.len();
                let normal = normals[r];
                let origin = p[plc.facets[r][0]];
                let u = geom::any_orthogonal(&normal);
                let v = geom::cross(&normal, &u);
                facets.push(Facet {
                    polygons: Vec::new(),
                    poly_normals: Vec::new(),
                    normal,
                    origin,
                    u,
                    v,
                    segments: Vec::new(),
                    vertices: Vec::new(),
                });
            }
            let g = group_of[r];
            group_of[k] = g;
            facets[g].polygons.push(plc.facets[k].clone());
            // each polygon keeps its own winding normal for inward directions
            facets[g].poly_normals.push(normals[k]);
        }
        let mut segments = Vec::new();
        let mut segment_facets = Vec::new();
        for (&(a, b), polys) in &edge_polys {
            let mut groups: Vec<usize> = polys.iter().map(|&k| group_of[k]).collect();
            groups.sort_unstable();
            // an edge interior to one coplanar group is not a feature
            let interior = groups.len() == 2 && groups[0] == groups[1];
            if interior {
                continue;
            }
            groups.dedup();
            let s = segments.len();
            segments.push([a, b]);
            for &g in &groups {
                facets[g].segments.push(s);
            }
            segment_facets.push(groups);
        }
        for s in &plc.segments {
            let key = [s[0].min(s[1]), s[0].max(s[1])];
            if !segments.contains(&key) {
                segments.push(key);
                segment_facets.push(Vec::new());
            }
        }
        for f in facets.iter_mut() {
            let mut vs: BTreeSet<usize> = BTreeSet::new();
            for poly in &f.polygons {
                vs.extend(poly.iter().copied());
            }
            f.vertices = vs.into_iter().collect();
        }
        for &(fi, v) in &plc.facet_points {
            if fi < np {
                let g = group_of[fi];
                if !facets[g].vertices.contains(&v) {
                    facets[g].vertices.push(v);
                }
            }
        }
        FeatureSet {
            segments,
            facets,
            segment_facets,
        }
    }

    /// Facet index containing input polygon `poly`.
    pub fn facet_of_polygon(&self, plc: &Plc, poly: usize) -> Option<usize> {
        let target = &plc.facets[poly];
        self.facets
            .iter()
            .position(|f| f.polygons.iter().any(|p| p == target))
    }
}
