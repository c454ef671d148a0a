//! Local feature size of a PLC, by brute force over feature pairs.

use crate::geom;
use crate::plc::{point_in_polygon, FeatureSet, Plc};
use crate::predicates::Point;
use crate::AnalysisError;

#[derive(Clone, Debug, PartialEq)]
enum Feature {
    Vertex(usize),
    Segment([usize; 2]),
    Facet(usize),
}

/// `lfs(x)`: radius of the smallest ball centered at `x` that meets two
/// nonincident features (vertices, segments, facets) of the PLC.
#[derive(Clone, Debug)]
pub struct LfsField {
    points: Vec<Point>,
    features: FeatureSet,
    items: Vec<Feature>,
    /// Vertex sets per feature, sorted.
    verts: Vec<Vec<usize>>,
    /// `incident[i * n + j]`
    incident: Vec<bool>,
    tol: f64,
}

impl LfsField {
    pub fn new(plc: &Plc) -> Result<LfsField, AnalysisError> {
        let features = FeatureSet::build(plc);
        let tol = 1e-10 * plc.diameter().max(f64::MIN_POSITIVE);
        let mut items = Vec::new();
        let mut verts = Vec::new();
        for v in 0..plc.vertices.len() {
            items.push(Feature::Vertex(v));
            verts.push(vec![v]);
        }
        for s in &features.segments {
            items.push(Feature::Segment(*s));
            let mut vs = s.to_vec();
            vs.sort_unstable();
            verts.push(vs);
        }
        for (f, facet) in features.facets.iter().enumerate() {
            items.push(Feature::Facet(f));
            let mut vs = facet.vertices.clone();
            vs.sort_unstable();
            verts.push(vs);
        }
        let mut field = LfsField {
            points: plc.vertices.clone(),
            features,
            items,
            verts,
            incident: Vec::new(),
            tol,
        };
        let n = field.items.len();
        field.incident = vec![false; n * n];
        let mut any = false;
        for i in 0..n {
            for j in 0..n {
                let inc = i == j || field.compute_incident(i, j);
                field.incident[i * n + j] = inc;
                any |= !inc;
            }
        }
        if !any {
            return Err(AnalysisError::TooFewFeatures);
        }
        Ok(field)
    }

    fn shares_vertex(&self, i: usize, j: usize) -> bool {
        let (a, b) = (&self.verts[i], &self.verts[j]);
        a.iter().any(|v| b.binary_search(v).is_ok())
    }

    fn contains(&self, outer: usize, inner: usize) -> bool {
        let p = &self.points;
        match (&self.items[outer], &self.items[inner]) {
            (Feature::Segment(s), Feature::Vertex(v)) => geom::point_segment(&p[*v], &p[s[0]], &p[s[1]]).0 <= self.tol,
            (Feature::Facet(f), Feature::Vertex(v)) => self.facet_distance(*f, &p[*v]) <= self.tol,
            (Feature::Facet(f), Feature::Segment(s)) => {
                self.features.segment_facets.iter().zip(&self.features.segments).any(|(owners, seg)| {
                    (seg == s || (seg[0] == s[1] && seg[1] == s[0])) && owners.contains(f)
                }) || (self.facet_distance(*f, &p[s[0]]) <= self.tol && self.facet_distance(*f, &p[s[1]]) <= self.tol)
            }
            _ => false,
        }
    }

    fn compute_incident(&self, i: usize, j: usize) -> bool {
        self.shares_vertex(i, j) || self.contains(i, j) || self.contains(j, i)
    }

    fn facet_distance(&self, f: usize, x: &Point) -> f64 {
        let facet = &self.features.facets[f];
        let q = facet.to_local(x);
        let inside = facet.polygons.iter().any(|poly| {
            let loop2: Vec<[f64; 2]> = poly.iter().map(|&i| facet.to_local(&self.points[i])).collect();
            point_in_polygon(&q, &loop2, 0.0)
        });
        if inside {
            return facet.plane_distance(x).abs();
        }
        let mut d = f64::INFINITY;
        for poly in &facet.polygons {
            for k in 0..poly.len() {
                let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
                d = d.min(geom::point_segment(x, &self.points[a], &self.points[b]).0);
            }
        }
        d
    }

    fn distance(&self, i: usize, x: &Point) -> f64 {
        let p = &self.points;
        match &self.items[i] {
            Feature::Vertex(v) => geom::dist(x, &p[*v]),
            Feature::Segment(s) => geom::point_segment(x, &p[s[0]], &p[s[1]]).0,
            Feature::Facet(f) => self.facet_distance(*f, x),
        }
    }

    pub fn feature_count(&self) -> usize {
        self.items.len()
    }

    pub fn at(&self, x: &Point) -> f64 {
        let n = self.items.len();
        let mut d: Vec<(f64, usize)> = (0..n).map(|i| (self.distance(i, x), i)).collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // the answer is the first distance whose feature has a nonincident
        // partner among the closer ones
        for j in 0..n {
            let fj = d[j].1;
            if d[..j].iter().any(|&(_, fi)| !self.incident[fi * n + fj]) {
                return d[j].0;
            }
        }
        f64::INFINITY
    }

    /// `lfs` at input vertex `v`.
    pub fn at_vertex(&self, v: usize) -> f64 {
        self.at(&self.points[v])
    }
}

/// True if `|f(x) - f(y)| <= |x - y|` (with a relative slack) on every pair.
pub fn lipschitz_check(f: impl Fn(&Point) -> f64, pairs: &[(Point, Point)]) -> bool {
    pairs.iter().all(|(x, y)| {
        let d = geom::dist(x, y);
        (f(x) - f(y)).abs() <= d + 1e-9 * (1.0 + f(x).abs().max(f(y).abs()))
    })
}
