//! Auxiliary points that keep input vertices out of the diametral balls of
//! segments and facet triangles.

use serde::{Deserialize, Serialize};

use crate::analysis::LfsField;
use crate::geom;
use crate::plc::{FeatureSet, Plc};
use crate::predicates::Point;
use crate::quality::RefinementConfig;
use crate::regions;
use crate::triangulation::Mesh;
use crate::Dim;

const SLIDE_SAMPLES: usize = 64;
const CASE_C_SAMPLES: usize = 129;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuxKind {
    /// The projection of the encroaching vertex.
    Projection,
    /// Slid away from a nearby vertex to within `[h, 2h]` of it.
    Slide,
    /// Placed on a facet's boundary segment near the projection. No
    /// guarantee on the resulting size bound.
    #[serde(rename = "HEURISTIC_CASE_C")]
    CaseC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuxTarget {
    Segment([usize; 2]),
    Facet(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxPoint {
    /// Index of the new vertex in the output PLC.
    pub vertex: usize,
    pub point: Point,
    pub kind: AuxKind,
    /// The vertex that encroached.
    pub encroacher: usize,
    pub target: AuxTarget,
    /// Distance from the encroacher to its projection.
    pub h: f64,
    /// Vertex the point was measured from (segment endpoint or nearest
    /// facet vertex), with the distance to it.
    pub anchor: usize,
    pub anchor_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessed {
    pub plc: Plc,
    pub added: Vec<AuxPoint>,
}

impl Preprocessed {
    pub fn identity(plc: &Plc) -> Preprocessed {
        Preprocessed {
            plc: plc.clone(),
            added: Vec::new(),
        }
    }

    pub fn heuristic_count(&self) -> usize {
        self.added.iter().filter(|a| a.kind == AuxKind::CaseC).count()
    }
}

/// Boundary triangles of each facet: the Delaunay triangulation of its
/// vertices, restricted to the facet polygons. Vertex indices are PLC indices.
pub fn facet_triangles(plc: &Plc, features: &FeatureSet) -> Vec<Vec<[usize; 3]>> {
    let mut out = Vec::new();
    for facet in &features.facets {
        let local: Vec<Point> = facet
            .vertices
            .iter()
            .map(|&v| {
                let q = facet.to_local(&plc.vertices[v]);
                [q[0], q[1], 0.0]
            })
            .collect();
        let mut tris = Vec::new();
        if let Ok(mesh) = Mesh::from_points(Dim::Two, &local) {
            let arity = Dim::Two.arity();
            for c in mesh.interior_cells() {
                let vs = mesh.cell_vertices(c);
                let g = geom::centroid(&mesh.cell_points(c));
                let inside = facet.polygons.iter().any(|poly| {
                    let loop2: Vec<[f64; 2]> = poly.iter().map(|&i| facet.to_local(&plc.vertices[i])).collect();
                    crate::plc::point_in_polygon(&[g[0], g[1]], &loop2, 0.0)
                });
                if inside {
                    let mut t = [facet.vertices[vs[0] - arity], facet.vertices[vs[1] - arity], facet.vertices[vs[2] - arity]];
                    t.sort_unstable();
                    tris.push(t);
                }
            }
        }
        tris.sort_unstable();
        out.push(tris);
    }
    out
}

/// Input vertices strictly inside a diametral ball of a segment or facet
/// triangle they are not part of, as `(vertex, target)` pairs.
pub fn encroached_pairs(plc: &Plc) -> Vec<(usize, AuxTarget)> {
    let features = FeatureSet::build(plc);
    let tris = facet_triangles(plc, &features);
    let p = &plc.vertices;
    let mut out = Vec::new();
    for v in 0..p.len() {
        for s in &features.segments {
            if s.contains(&v) {
                continue;
            }
            if regions::encroaches(&p[v], &regions::diametral_ball_segment(&p[s[0]], &p[s[1]])) {
                out.push((v, AuxTarget::Segment(*s)));
            }
        }
        for (f, ts) in tris.iter().enumerate() {
            if features.facets[f].vertices.contains(&v) {
                continue;
            }
            for t in ts {
                let Ok(ball) = regions::diametral_ball_triangle(&[p[t[0]], p[t[1]], p[t[2]]]) else {
                    continue;
                };
                if regions::encroaches(&p[v], &ball) {
                    out.push((v, AuxTarget::Facet(f)));
                    break;
                }
            }
        }
    }
    out
}

fn min_dist_to_vertices(plc: &Plc, x: &Point) -> f64 {
    plc.vertices.iter().map(|q| geom::dist(q, x)).fold(f64::INFINITY, f64::min)
}

/// Inserts vertex `x` into segment `ab` wherever it appears: polygon loops
/// and explicit segments.
fn split_edge(plc: &mut Plc, a: usize, b: usize, x: usize) {
    for poly in plc.facets.iter_mut() {
        let n = poly.len();
        for i in 0..n {
            let (u, v) = (poly[i], poly[(i + 1) % n]);
            if (u == a && v == b) || (u == b && v == a) {
                poly.insert(i + 1, x);
                break;
            }
        }
    }
    let mut segs = Vec::with_capacity(plc.segments.len() + 1);
    for s in &plc.segments {
        if (s[0] == a && s[1] == b) || (s[0] == b && s[1] == a) {
            segs.push([s[0], x]);
            segs.push([x, s[1]]);
        } else {
            segs.push(*s);
        }
    }
    plc.segments = segs;
}

/// Among `samples`, the point farthest from every PLC vertex (first on ties).
fn best_sample(plc: &Plc, samples: impl IntoIterator<Item = Point>) -> Option<Point> {
    let mut best: Option<(f64, Point)> = None;
    for x in samples {
        let d = min_dist_to_vertices(plc, &x);
        if best.map_or(true, |(bd, _)| d > bd) {
            best = Some((d, x));
        }
    }
    best.map(|b| b.1)
}

fn segment_fix(plc: &Plc, p: usize, a: usize, b: usize) -> AuxPoint {
    let pts = &plc.vertices;
    let (pa, pb) = (pts[a], pts[b]);
    let (_, t) = geom::point_segment(&pts[p], &pa, &pb);
    let m = geom::axpy(&pa, t, &geom::sub(&pb, &pa));
    let h = geom::dist(&pts[p], &m);
    let (e, other) = if geom::dist(&pa, &m) <= geom::dist(&pb, &m) { (a, b) } else { (b, a) };
    let pe = pts[e];
    let em = geom::dist(&pe, &m);
    if em >= h {
        return AuxPoint {
            vertex: plc.vertices.len(),
            point: m,
            kind: AuxKind::Projection,
            encroacher: p,
            target: AuxTarget::Segment([a, b]),
            h,
            anchor: e,
            anchor_distance: em,
        };
    }
    let dir = geom::normalize(&geom::sub(&pts[other], &pe)).unwrap_or([1.0, 0.0, 0.0]);
    let samples = (0..SLIDE_SAMPLES).map(|k| geom::axpy(&pe, h + h * k as f64 / (SLIDE_SAMPLES - 1) as f64, &dir));
    let x = best_sample(plc, samples).unwrap();
    AuxPoint {
        vertex: plc.vertices.len(),
        point: x,
        kind: AuxKind::Slide,
        encroacher: p,
        target: AuxTarget::Segment([a, b]),
        h,
        anchor: e,
        anchor_distance: geom::dist(&pe, &x),
    }
}

fn facet_fix(plc: &Plc, features: &FeatureSet, p: usize, f: usize) -> AuxPoint {
    let pts = &plc.vertices;
    let facet = &features.facets[f];
    let tol = 1e-10 * plc.diameter();
    let pd = facet.plane_distance(&pts[p]);
    let m = geom::axpy(&pts[p], -pd, &facet.normal);
    let h = pd.abs();
    // nearest boundary segment of the facet
    let near_seg = facet
        .segments
        .iter()
        .map(|&s| {
            let [a, b] = features.segments[s];
            (geom::point_segment(&m, &pts[a], &pts[b]).0, [a, b])
        })
        .min_by(|x, y| x.0.total_cmp(&y.0));
    let inside = facet.contains(&m, pts, tol);
    if let Some((d, [a, b])) = near_seg {
        if !inside || d < h {
            return case_c(plc, p, a, b, f);
        }
    }
    let (anchor, am) = facet
        .vertices
        .iter()
        .map(|&v| (v, geom::dist(&pts[v], &m)))
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)))
        .unwrap();
    if am >= h {
        return AuxPoint {
            vertex: pts.len(),
            point: m,
            kind: AuxKind::Projection,
            encroacher: p,
            target: AuxTarget::Facet(f),
            h,
            anchor,
            anchor_distance: am,
        };
    }
    let pa = pts[anchor];
    let dir = geom::normalize(&geom::sub(&m, &pa)).unwrap_or_else(|| geom::normalize(&facet.u).unwrap());
    let samples: Vec<Point> = (0..SLIDE_SAMPLES)
        .map(|k| geom::axpy(&pa, h + h * k as f64 / SLIDE_SAMPLES as f64, &dir))
        .filter(|x| facet.contains(x, pts, tol))
        .collect();
    match best_sample(plc, samples) {
        Some(x) => AuxPoint {
            vertex: pts.len(),
            point: x,
            kind: AuxKind::Slide,
            encroacher: p,
            target: AuxTarget::Facet(f),
            h,
            anchor,
            anchor_distance: geom::dist(&pa, &x),
        },
        None => {
            let (_, [a, b]) = near_seg.expect("a facet has boundary segments");
            case_c(plc, p, a, b, f)
        }
    }
}

/// Point on segment `ab` farthest from existing vertices such that `p`
/// encroaches neither piece; the plain segment rule if no sample qualifies.
fn case_c(plc: &Plc, p: usize, a: usize, b: usize, f: usize) -> AuxPoint {
    let pts = &plc.vertices;
    let (pa, pb) = (pts[a], pts[b]);
    let samples: Vec<Point> = (1..CASE_C_SAMPLES - 1)
        .map(|k| geom::axpy(&pa, k as f64 / (CASE_C_SAMPLES - 1) as f64, &geom::sub(&pb, &pa)))
        .filter(|x| {
            !regions::encroaches(&pts[p], &regions::diametral_ball_segment(&pa, x))
                && !regions::encroaches(&pts[p], &regions::diametral_ball_segment(x, &pb))
        })
        .collect();
    let mut aux = match best_sample(plc, samples) {
        Some(x) => AuxPoint {
            vertex: pts.len(),
            point: x,
            kind: AuxKind::CaseC,
            encroacher: p,
            target: AuxTarget::Segment([a, b]),
            h: geom::point_segment(&pts[p], &pa, &pb).0,
            anchor: a,
            anchor_distance: geom::dist(&pa, &x),
        },
        None => segment_fix(plc, p, a, b),
    };
    aux.kind = AuxKind::CaseC;
    let _ = f;
    aux
}

fn polygon_of_facet(plc: &Plc, features: &FeatureSet, f: usize) -> usize {
    let target = &features.facets[f].polygons[0];
    plc.facets.iter().position(|poly| poly == target).unwrap_or(0)
}

/// Adds auxiliary points until no input vertex lies strictly inside the
/// diametral ball of a segment or facet triangle it is not part of. Vertices
/// are handled in increasing order of local feature size.
pub fn preprocess_plc(plc: &Plc, _cfg: &RefinementConfig) -> Preprocessed {
    let mut out = plc.clone();
    let mut added = Vec::new();
    let cap = 10_000 + 50 * plc.vertices.len();
    'outer: while added.len() < cap {
        let features = FeatureSet::build(&out);
        let tris = facet_triangles(&out, &features);
        let mut order: Vec<(f64, usize)> = match LfsField::new(&out) {
            Ok(field) => (0..out.vertices.len()).map(|v| (field.at_vertex(v), v)).collect(),
            Err(_) => (0..out.vertices.len()).map(|v| (0.0, v)).collect(),
        };
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, v) in &order {
            let q = out.vertices[v];
            let mut fix = None;
            for s in &features.segments {
                if s.contains(&v) {
                    continue;
                }
                let ball = regions::diametral_ball_segment(&out.vertices[s[0]], &out.vertices[s[1]]);
                if regions::encroaches(&q, &ball) {
                    fix = Some(segment_fix(&out, v, s[0], s[1]));
                    break;
                }
            }
            if fix.is_none() {
                'facets: for (f, ts) in tris.iter().enumerate() {
                    if features.facets[f].vertices.contains(&v) {
                        continue;
                    }
                    for t in ts {
                        let tri = [out.vertices[t[0]], out.vertices[t[1]], out.vertices[t[2]]];
                        let Ok(ball) = regions::diametral_ball_triangle(&tri) else {
                            continue;
                        };
                        if regions::encroaches(&q, &ball) {
                            fix = Some(facet_fix(&out, &features, v, f));
                            break 'facets;
                        }
                    }
                }
            }
            let Some(aux) = fix else {
                continue;
            };
            out.vertices.push(aux.point);
            match aux.target {
                AuxTarget::Segment([a, b]) => split_edge(&mut out, a, b, aux.vertex),
                AuxTarget::Facet(f) => {
                    let poly = polygon_of_facet(&out, &features, f);
                    out.facet_points.push((poly, aux.vertex));
                }
            }
            added.push(aux);
            continue 'outer;
        }
        break;
    }
    Preprocessed { plc: out, added }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg2() -> RefinementConfig {
        RefinementConfig::default_2d()
    }

    /// Segment (0,0)-(1,0) plus a free-standing vertex `p` inside a box.
    fn with_point(p: Point) -> Plc {
        Plc::new_2d(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 2.0, 0.0], [0.0, 2.0, 0.0], p],
            vec![[0, 1], [1, 2], [2, 3], [3, 0]],
            vec![],
        )
    }

    #[test]
    fn projection_case() {
        let pre = preprocess_plc(&with_point([0.3, 0.1, 0.0]), &cfg2());
        let first = &pre.added[0];
        assert_eq!(first.kind, AuxKind::Projection);
        assert!(geom::dist(&first.point, &[0.3, 0.0, 0.0]) < 1e-12);
        assert!(encroached_pairs(&pre.plc).is_empty());
    }

    #[test]
    fn slide_case_stays_in_interval() {
        let pre = preprocess_plc(&with_point([0.2, 0.24, 0.0]), &cfg2());
        let first = &pre.added[0];
        assert_eq!(first.kind, AuxKind::Slide);
        assert!(first.anchor_distance >= 0.24 - 1e-12 && first.anchor_distance <= 0.48 + 1e-12);
        assert!(first.point[1].abs() < 1e-15);
        assert!(encroached_pairs(&pre.plc).is_empty());
    }

    #[test]
    fn benign_input_is_unchanged() {
        let mut vertices: Vec<Point> = (0..6)
            .map(|k| {
                let t = k as f64 * std::f64::consts::FRAC_PI_3;
                [t.cos(), t.sin(), 0.0]
            })
            .collect();
        vertices.push([0.0, 0.0, 0.0]);
        let plc = Plc::new_2d(vertices, (0..6).map(|k| [k, (k + 1) % 6]).collect(), vec![]);
        let pre = preprocess_plc(&plc, &cfg2());
        assert!(pre.added.is_empty());
        assert_eq!(pre.plc, plc);
    }

    #[test]
    fn split_edge_updates_loops_and_segments() {
        let mut plc = Plc::new_3d(vec![[0.0; 3]; 5], vec![vec![0, 1, 2], vec![1, 0, 3]], vec![]);
        plc.segments.push([0, 1]);
        split_edge(&mut plc, 0, 1, 4);
        assert_eq!(plc.facets[0], vec![0, 4, 1, 2]);
        assert_eq!(plc.facets[1], vec![1, 4, 0, 3]);
        assert_eq!(plc.segments, vec![[0, 4], [4, 1]]);
    }
}
