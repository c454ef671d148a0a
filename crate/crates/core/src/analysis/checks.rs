//! Delaunay, conformity and quality checks on finished meshes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geom;
use crate::predicates::{circumsphere, in_circumsphere, Point, Sign};
use crate::quality::{self, Class, RefinementConfig};
use crate::refiner::{EventKind, RefineOutput};
use crate::triangulation::{CellId, Mesh, VertexId};
use crate::Dim;

/// Uniform bucket grid over a point set.
struct Grid {
    lo: Point,
    h: f64,
    dims: [usize; 3],
    buckets: HashMap<[usize; 3], Vec<usize>>,
}

impl Grid {
    fn new(points: &[(usize, Point)], flat: bool) -> Grid {
        let pts: Vec<Point> = points.iter().map(|p| p.1).collect();
        let (lo, hi) = crate::triangulation::bbox(&pts);
        let n = points.len().max(1) as f64;
        let ext = geom::dist(&lo, &hi).max(f64::MIN_POSITIVE);
        let h = if flat { ext / n.sqrt() } else { ext / n.cbrt() };
        let h = h.max(ext * 1e-6);
        let dims = [0, 1, 2].map(|k| ((hi[k] - lo[k]) / h).floor() as usize + 1);
        let mut g = Grid {
            lo,
            h,
            dims,
            buckets: HashMap::new(),
        };
        for &(id, p) in points {
            let key = g.key(&p);
            g.buckets.entry(key).or_default().push(id);
        }
        g
    }

    fn coord(&self, x: f64, k: usize) -> i64 {
        ((x - self.lo[k]) / self.h).floor() as i64
    }

    fn key(&self, p: &Point) -> [usize; 3] {
        [0, 1, 2].map(|k| self.coord(p[k], k).clamp(0, self.dims[k] as i64 - 1) as usize)
    }

    /// Ids in buckets meeting the box around the ball, or `None` if that box
    /// covers more buckets than there are points.
    fn query(&self, c: &Point, r: f64, limit: usize) -> Option<Vec<usize>> {
        let mut range = [(0usize, 0usize); 3];
        let mut count = 1usize;
        for k in 0..3 {
            let a = self.coord(c[k] - r, k).max(0);
            let b = self.coord(c[k] + r, k).min(self.dims[k] as i64 - 1);
            if a > b {
                return Some(Vec::new());
            }
            range[k] = (a as usize, b as usize);
            count = count.saturating_mul(b as usize - a as usize + 1);
        }
        if count > limit {
            return None;
        }
        let mut out = Vec::new();
        for i in range[0].0..=range[0].1 {
            for j in range[1].0..=range[1].1 {
                for k in range[2].0..=range[2].1 {
                    if let Some(b) = self.buckets.get(&[i, j, k]) {
                        out.extend_from_slice(b);
                    }
                }
            }
        }
        Some(out)
    }
}

/// `(simplex index, vertex)` pairs with the vertex strictly inside the
/// simplex's circumsphere, decided by the exact predicate. Candidate
/// vertices come from a bucket grid; degenerate simplices are checked
/// against every vertex.
pub fn verify_delaunay_simplices(points: &[Point], alive: &[bool], simplices: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let ids: Vec<(usize, Point)> = (0..points.len()).filter(|&i| alive[i]).map(|i| (i, points[i])).collect();
    let flat = simplices.first().map_or(true, |s| s.len() == 3);
    let grid = Grid::new(&ids, flat);
    let all: Vec<usize> = ids.iter().map(|p| p.0).collect();
    let mut out = Vec::new();
    for (si, s) in simplices.iter().enumerate() {
        let pts: Vec<Point> = s.iter().map(|&v| points[v]).collect();
        let cand = match circumsphere(&pts) {
            Ok((c, r)) => grid
                .query(&c, r * (1.0 + 1e-9) + 1e-300, 4 * all.len() + 64)
                .unwrap_or_else(|| all.clone()),
            Err(_) => all.clone(),
        };
        let mut hits: Vec<usize> = cand
            .into_iter()
            .filter(|v| !s.contains(v))
            .filter(|&v| in_circumsphere(&pts, &points[v]) == Ok(Sign::Positive))
            .collect();
        hits.sort_unstable();
        out.extend(hits.into_iter().map(|v| (si, v)));
    }
    out
}

/// Delaunay violations over every live cell of the mesh, scaffold included.
pub fn verify_delaunay(mesh: &Mesh) -> Vec<(CellId, VertexId)> {
    let n = mesh.vertex_slots();
    let points: Vec<Point> = (0..n).map(|v| *mesh.point(v)).collect();
    let alive: Vec<bool> = (0..n).map(|v| mesh.vertex(v).alive).collect();
    let cells: Vec<CellId> = mesh.cell_ids().collect();
    let simplices: Vec<Vec<usize>> = cells.iter().map(|&c| mesh.cell_vertices(c).to_vec()).collect();
    verify_delaunay_simplices(&points, &alive, &simplices)
        .into_iter()
        .map(|(i, v)| (cells[i], v))
        .collect()
}

fn has_edge(mesh: &Mesh, a: VertexId, b: VertexId) -> bool {
    mesh.vertex_star(a).iter().any(|&c| mesh.cell_vertices(c).contains(&b))
}

/// Boundary features that are not unions of mesh faces, described in words.
/// Segments must be chains of mesh edges through every vertex lying on
/// them; facet triangles lying in a facet must tile it exactly, with their
/// unpaired edges on the facet's segments.
pub fn conformity_violations(out: &RefineOutput) -> Vec<String> {
    let mesh = &out.mesh;
    let plc = &out.plc;
    let tol = 1e-9 * plc.diameter().max(f64::MIN_POSITIVE);
    let arity = plc.dim.arity();
    let verts: Vec<VertexId> = mesh.vertex_ids().filter(|&v| !mesh.is_scaffold(v)).collect();
    let mut issues = Vec::new();
    for (k, s) in out.features.segments.iter().enumerate() {
        let (a, b) = (plc.vertices[s[0]], plc.vertices[s[1]]);
        let mut on: Vec<(f64, VertexId)> = verts
            .iter()
            .filter_map(|&v| {
                let (d, t) = geom::point_segment(mesh.point(v), &a, &b);
                (d <= tol).then_some((t, v))
            })
            .collect();
        on.sort_by(|x, y| x.0.total_cmp(&y.0));
        if on.first().map(|x| x.1) != Some(arity + s[0]) || on.last().map(|x| x.1) != Some(arity + s[1]) {
            issues.push(format!("segment {k}: endpoints missing from the mesh"));
            continue;
        }
        for w in on.windows(2) {
            if !has_edge(mesh, w[0].1, w[1].1) {
                issues.push(format!("segment {k}: piece {}-{} is not a mesh edge", w[0].1, w[1].1));
            }
        }
    }
    if plc.dim == Dim::Three {
        let mut faces: BTreeMap<[VertexId; 3], ()> = BTreeMap::new();
        for c in mesh.cell_ids() {
            let vs = mesh.cell_vertices(c);
            for i in 0..4 {
                let mut f = [0; 3];
                let mut j = 0;
                for (k, &v) in vs.iter().enumerate() {
                    if k != i {
                        f[j] = v;
                        j += 1;
                    }
                }
                f.sort_unstable();
                faces.insert(f, ());
            }
        }
        for (fi, facet) in out.features.facets.iter().enumerate() {
            let on_plane: Vec<bool> = (0..mesh.vertex_slots())
                .map(|v| mesh.vertex(v).alive && facet.contains(mesh.point(v), &plc.vertices, tol))
                .collect();
            let mut area = 0.0;
            let mut edges: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
            for f in faces.keys() {
                if !f.iter().all(|&v| on_plane[v]) {
                    continue;
                }
                let pts = [*mesh.point(f[0]), *mesh.point(f[1]), *mesh.point(f[2])];
                if !facet.contains(&geom::centroid(&pts), &plc.vertices, tol) {
                    continue;
                }
                area += geom::triangle_area(&pts[0], &pts[1], &pts[2]);
                for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])] {
                    *edges.entry((a, b)).or_insert(0) += 1;
                }
            }
            let target: f64 = facet
                .polygons
                .iter()
                .map(|poly| {
                    let loc: Vec<[f64; 2]> = poly.iter().map(|&i| facet.to_local(&plc.vertices[i])).collect();
                    let mut s = 0.0;
                    for i in 0..loc.len() {
                        let (p, q) = (loc[i], loc[(i + 1) % loc.len()]);
                        s += p[0] * q[1] - q[0] * p[1];
                    }
                    0.5 * s.abs()
                })
                .sum();
            if (area - target).abs() > 1e-9 * target.max(f64::MIN_POSITIVE) {
                issues.push(format!("facet {fi}: mesh faces cover area {area} of {target}"));
            }
            for (&(a, b), &n) in &edges {
                if n != 1 {
                    continue;
                }
                let m = geom::midpoint(mesh.point(a), mesh.point(b));
                let on_seg = facet.segments.iter().any(|&s| {
                    let [u, v] = out.features.segments[s];
                    geom::point_segment(&m, &plc.vertices[u], &plc.vertices[v]).0 <= tol
                });
                if !on_seg {
                    issues.push(format!("facet {fi}: edge {a}-{b} is exposed inside the facet"));
                }
            }
        }
    }
    issues
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub elements: usize,
    pub max_rho: f64,
    /// Smallest plane angle (2D) or dihedral angle (3D), degrees.
    pub min_angle_deg: f64,
    pub min_sigma: f64,
    /// Elements with `rho > rho_star`.
    pub poor: usize,
    pub slivers: usize,
    /// Slivers with a vertex placed by a fallback event.
    pub excused_slivers: usize,
    /// `(upper bin edge, count)` of the radius-edge ratio.
    pub rho_histogram: Vec<(f64, usize)>,
    /// `(upper bin edge in degrees, count)` of the smallest angle.
    pub angle_histogram: Vec<(f64, usize)>,
}

pub fn quality_summary(out: &RefineOutput, cfg: &RefinementConfig) -> QualitySummary {
    let fallback: std::collections::HashSet<VertexId> = out
        .events
        .events
        .iter()
        .filter(|e| e.kind == EventKind::FallbackSliver)
        .map(|e| e.vertex)
        .collect();
    let rho_edges = [0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, f64::INFINITY];
    let angle_edges = [10.0, 20.0, 26.5, 30.0, 40.0, 50.0, 60.0, 90.0, 180.0];
    let mut s = QualitySummary {
        min_angle_deg: 180.0,
        min_sigma: f64::INFINITY,
        rho_histogram: rho_edges.iter().map(|&e| (e, 0)).collect(),
        angle_histogram: angle_edges.iter().map(|&e| (e, 0)).collect(),
        ..Default::default()
    };
    for (vs, pts) in out.elements.iter().zip(out.element_points()) {
        let q = quality::measure_or_degenerate(&pts);
        s.elements += 1;
        s.max_rho = s.max_rho.max(q.rho);
        let ang = if out.plc.dim == Dim::Two { q.min_angle } else { q.min_dihedral }.to_degrees();
        s.min_angle_deg = s.min_angle_deg.min(ang);
        if out.plc.dim == Dim::Three {
            s.min_sigma = s.min_sigma.min(q.sigma);
        }
        match quality::classify(&q, cfg) {
            Class::LargeRho => s.poor += 1,
            Class::Sliver => {
                s.slivers += 1;
                if vs.iter().any(|v| fallback.contains(v)) {
                    s.excused_slivers += 1;
                }
            }
            Class::Good => {}
        }
        if let Some(b) = s.rho_histogram.iter_mut().find(|b| q.rho <= b.0) {
            b.1 += 1;
        }
        if let Some(b) = s.angle_histogram.iter_mut().find(|b| ang <= b.0) {
            b.1 += 1;
        }
    }
    if !s.min_sigma.is_finite() {
        s.min_sigma = 0.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulation::Mesh;

    #[test]
    fn flipped_diagonal_gives_two_violations() {
        let p = vec![[-1.0, 0.0, 0.0], [0.0, -0.5, 0.0], [1.0, 0.0, 0.0], [0.0, 0.5, 0.0]];
        let tris = vec![vec![0, 1, 2], vec![0, 2, 3]];
        let v = verify_delaunay_simplices(&p, &[true; 4], &tris);
        assert_eq!(v, vec![(0, 3), (1, 1)]);
        let good = vec![vec![0, 1, 3], vec![1, 2, 3]];
        assert!(verify_delaunay_simplices(&p, &[true; 4], &good).is_empty());
    }

    #[test]
    fn single_simplex_is_delaunay() {
        let p = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(verify_delaunay_simplices(&p, &[true; 4], &[vec![0, 1, 2, 3]]).is_empty());
    }

    #[test]
    fn grid_query_agrees_with_mesh_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for dim in [Dim::Two, Dim::Three] {
            let pts: Vec<Point> = (0..300)
                .map(|_| {
                    let z = if dim == Dim::Three { rng.gen::<f64>() } else { 0.0 };
                    [rng.gen(), rng.gen(), z]
                })
                .collect();
            let mesh = Mesh::from_points(dim, &pts).unwrap();
            assert!(verify_delaunay(&mesh).is_empty());
            assert_eq!(verify_delaunay(&mesh), mesh.delaunay_violations());
        }
    }
}
