//! Boundary bookkeeping: subsegments, per-facet triangulations of the facet
//! vertices (whose triangles are the subfacets), a hashed index of their
//! diametral balls and the features each mesh vertex lies on.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::geom;
use crate::plc::{FeatureSet, Plc};
use crate::predicates::{circumsphere, Point};
use crate::regions;
use crate::triangulation::{bbox, CellId, FeatureRef, Mesh, Provenance, VertexId};
use crate::{Dim, MeshError};

/// A piece of a boundary feature: a subsegment or a subfacet triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubFeature {
    Segment(usize),
    Facet(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct SubSegment {
    pub segment: usize,
    pub v: [VertexId; 2],
    pub alive: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct SubFacet {
    pub facet: usize,
    pub v: [VertexId; 3],
    pub ball: (Point, f64),
    pub alive: bool,
}

type GridKey = (i32, i64, i64, i64);

/// Balls bucketed by size class: a ball of radius `r` lives at the level
/// whose cell width is the smallest power of two `>= 2r`, in the cell holding
/// its center. A point query visits the neighboring cells of every level.
#[derive(Clone, Debug, Default)]
pub(crate) struct BallIndex {
    three: bool,
    grid: HashMap<GridKey, Vec<usize>>,
    levels: BTreeMap<i32, usize>,
    entries: Vec<Option<(Point, f64, GridKey)>>,
}

impl BallIndex {
    pub fn new(dim: Dim) -> BallIndex {
        BallIndex {
            three: dim == Dim::Three,
            ..BallIndex::default()
        }
    }

    fn key(&self, p: &Point, level: i32) -> GridKey {
        let w = 2f64.powi(level);
        (
            level,
            (p[0] / w).floor() as i64,
            (p[1] / w).floor() as i64,
            if self.three { (p[2] / w).floor() as i64 } else { 0 },
        )
    }

    pub fn insert(&mut self, id: usize, center: Point, radius: f64) {
        let level = (2.0 * radius).max(1e-300).log2().ceil() as i32;
        let key = self.key(&center, level);
        if self.entries.len() <= id {
            self.entries.resize(id + 1, None);
        }
        self.entries[id] = Some((center, radius, key));
        self.grid.entry(key).or_default().push(id);
        *self.levels.entry(level).or_insert(0) += 1;
    }

    pub fn remove(&mut self, id: usize) {
        let Some(Some((_, _, key))) = self.entries.get(id).cloned() else {
            return;
        };
        if let Some(list) = self.grid.get_mut(&key) {
            list.retain(|&x| x != id);
            if list.is_empty() {
                self.grid.remove(&key);
            }
        }
        if let Some(n) = self.levels.get_mut(&key.0) {
            *n -= 1;
            if *n == 0 {
                self.levels.remove(&key.0);
            }
        }
        self.entries[id] = None;
    }

    /// Ids of balls with `|p - c| < r (1 + slack)`, sorted.
    pub fn query(&self, p: &Point, slack: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let dz = if self.three { 1 } else { 0 };
        for &level in self.levels.keys() {
            let (_, i, j, k) = self.key(p, level);
            for a in -1..=1 {
                for b in -1..=1 {
                    for c in -dz..=dz {
                        if let Some(list) = self.grid.get(&(level, i + a, j + b, k + c)) {
                            for &id in list {
                                let (ctr, r, _) = self.entries[id].unwrap();
                                let lim = r * (1.0 + slack);
                                if geom::dist2(p, &ctr) < lim * lim {
                                    out.push(id);
                                }
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FacetMesh {
    pub mesh: Mesh,
    /// 2D vertex id -> mesh vertex id.
    pub to3d: HashMap<VertexId, VertexId>,
    pub from3d: HashSet<VertexId>,
    pub cell_sub: HashMap<CellId, usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct Boundary {
    pub features: FeatureSet,
    pub plc_points: Vec<Point>,
    pub subsegs: Vec<SubSegment>,
    pub subfacets: Vec<SubFacet>,
    pub seg_lookup: HashMap<(VertexId, VertexId), usize>,
    pub facet_meshes: Vec<FacetMesh>,
    pub balls: BallIndex,
    /// Features each mesh vertex lies on, indexed by vertex id.
    pub vfeat: Vec<Vec<FeatureRef>>,
    pub tol: f64,
}

fn ball_id(sf: SubFeature) -> usize {
    match sf {
        SubFeature::Segment(k) => 2 * k,
        SubFeature::Facet(k) => 2 * k + 1,
    }
}

fn from_ball_id(id: usize) -> SubFeature {
    if id % 2 == 0 {
        SubFeature::Segment(id / 2)
    } else {
        SubFeature::Facet(id / 2)
    }
}

fn pair(a: VertexId, b: VertexId) -> (VertexId, VertexId) {
    (a.min(b), a.max(b))
}

impl Boundary {
    /// Bookkeeping for `plc`, whose vertex `i` is mesh vertex `ids[i]`.
    pub fn new(plc: &Plc, features: FeatureSet, mesh: &Mesh, ids: &[VertexId]) -> Boundary {
        let dim = plc.dim;
        let mut b = Boundary {
            features,
            plc_points: plc.vertices.clone(),
            subsegs: Vec::new(),
            subfacets: Vec::new(),
            seg_lookup: HashMap::new(),
            facet_meshes: Vec::new(),
            balls: BallIndex::new(dim),
            vfeat: vec![Vec::new(); mesh.vertex_slots()],
            tol: 1e-10 * plc.diameter().max(f64::MIN_POSITIVE),
        };
        for (s, seg) in b.features.segments.clone().iter().enumerate() {
            let (u, v) = (ids[seg[0]], ids[seg[1]]);
            b.add_feature(u, FeatureRef::Segment(s));
            b.add_feature(v, FeatureRef::Segment(s));
            b.new_subseg(s, u, v, mesh);
        }
        for f in 0..b.features.facets.len() {
            let verts = b.features.facets[f].vertices.clone();
            let local: Vec<Point> = verts
                .iter()
                .map(|&i| {
                    let q = b.features.facets[f].to_local(&plc.vertices[i]);
                    [q[0], q[1], 0.0]
                })
                .collect();
            let (lo, hi) = bbox(&local);
            b.facet_meshes.push(FacetMesh {
                mesh: Mesh::with_scaffold(Dim::Two, lo, hi),
                to3d: HashMap::new(),
                from3d: HashSet::new(),
                cell_sub: HashMap::new(),
            });
            for &i in &verts {
                b.add_feature(ids[i], FeatureRef::Facet(f));
                // a vertex repeated across merged polygons is inserted once
                let _ = b.insert_facet_vertex(f, ids[i], &plc.vertices[i], mesh);
            }
        }
        b
    }

    pub fn add_feature(&mut self, v: VertexId, f: FeatureRef) {
        if self.vfeat.len() <= v {
            self.vfeat.resize(v + 1, Vec::new());
        }
        if !self.vfeat[v].contains(&f) {
            self.vfeat[v].push(f);
        }
    }

    pub fn features_of(&self, v: VertexId) -> &[FeatureRef] {
        self.vfeat.get(v).map(|x| x.as_slice()).unwrap_or(&[])
    }

    fn new_subseg(&mut self, segment: usize, a: VertexId, b: VertexId, mesh: &Mesh) -> usize {
        let k = self.subsegs.len();
        self.subsegs.push(SubSegment {
            segment,
            v: [a, b],
            alive: true,
        });
        self.seg_lookup.insert(pair(a, b), k);
        let (c, r) = regions::diametral_ball_segment(mesh.point(a), mesh.point(b));
        self.balls.insert(ball_id(SubFeature::Segment(k)), c, r);
        k
    }

    fn kill(&mut self, sf: SubFeature) {
        match sf {
            SubFeature::Segment(k) => {
                self.subsegs[k].alive = false;
                let [a, b] = self.subsegs[k].v;
                if self.seg_lookup.get(&pair(a, b)) == Some(&k) {
                    self.seg_lookup.remove(&pair(a, b));
                }
            }
            SubFeature::Facet(k) => self.subfacets[k].alive = false,
        }
        self.balls.remove(ball_id(sf));
    }

    pub fn alive(&self, sf: SubFeature) -> bool {
        match sf {
            SubFeature::Segment(k) => self.subsegs[k].alive,
            SubFeature::Facet(k) => self.subfacets[k].alive,
        }
    }

    pub fn vertices(&self, sf: SubFeature) -> Vec<VertexId> {
        match sf {
            SubFeature::Segment(k) => self.subsegs[k].v.to_vec(),
            SubFeature::Facet(k) => self.subfacets[k].v.to_vec(),
        }
    }

    pub fn ball(&self, sf: SubFeature, mesh: &Mesh) -> (Point, f64) {
        match sf {
            SubFeature::Segment(k) => {
                let [a, b] = self.subsegs[k].v;
                regions::diametral_ball_segment(mesh.point(a), mesh.point(b))
            }
            SubFeature::Facet(k) => self.subfacets[k].ball,
        }
    }

    /// Live subfeatures whose diametral ball strictly contains `p`.
    pub fn encroached_by(&self, p: &Point) -> Vec<SubFeature> {
        self.balls
            .query(p, -1e-12)
            .into_iter()
            .map(from_ball_id)
            .filter(|&sf| self.alive(sf))
            .collect()
    }

    /// Live subfeatures whose diametral ball contains `p` or nearly so.
    pub fn near(&self, p: &Point) -> Vec<SubFeature> {
        self.balls
            .query(p, 1e-9)
            .into_iter()
            .map(from_ball_id)
            .filter(|&sf| self.alive(sf))
            .collect()
    }

    pub fn live_subsegments(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.subsegs.len()).filter(move |&k| self.subsegs[k].alive)
    }

    pub fn live_subfacets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.subfacets.len()).filter(move |&k| self.subfacets[k].alive)
    }

    /// Splits subsegment `k` at mesh vertex `m`. Returns the new subfeatures,
    /// including subfacets created by inserting `m` into adjacent facets.
    pub fn split_subsegment(&mut self, k: usize, m: VertexId, mesh: &Mesh) -> Result<Vec<SubFeature>, MeshError> {
        let SubSegment { segment, v: [a, b], .. } = self.subsegs[k].clone();
        self.kill(SubFeature::Segment(k));
        self.add_feature(m, FeatureRef::Segment(segment));
        let mut out = vec![
            SubFeature::Segment(self.new_subseg(segment, a, m, mesh)),
            SubFeature::Segment(self.new_subseg(segment, m, b, mesh)),
        ];
        for f in self.features.segment_facets[segment].clone() {
            self.add_feature(m, FeatureRef::Facet(f));
            out.extend(self.insert_facet_vertex(f, m, mesh.point(m), mesh)?);
        }
        Ok(out)
    }

    /// Inserts mesh vertex `m` into the interior of facet `f`.
    pub fn split_facet(&mut self, f: usize, m: VertexId, mesh: &Mesh) -> Result<Vec<SubFeature>, MeshError> {
        self.add_feature(m, FeatureRef::Facet(f));
        self.insert_facet_vertex(f, m, mesh.point(m), mesh)
    }

    fn insert_facet_vertex(&mut self, f: usize, v: VertexId, p: &Point, mesh: &Mesh) -> Result<Vec<SubFeature>, MeshError> {
        let q = self.features.facets[f].to_local(p);
        let fm = &mut self.facet_meshes[f];
        if !fm.from3d.insert(v) {
            return Ok(Vec::new());
        }
        let out = fm.mesh.insert_vertex([q[0], q[1], 0.0], Provenance::Input)?;
        fm.to3d.insert(out.vertex, v);
        let mut dead = Vec::new();
        for c in &out.removed {
            if let Some(s) = fm.cell_sub.remove(c) {
                dead.push(s);
            }
        }
        for s in dead {
            self.kill(SubFeature::Facet(s));
        }
        let mut created = Vec::new();
        for &c in &out.created {
            let fm = &self.facet_meshes[f];
            if fm.mesh.touches_scaffold(c) {
                continue;
            }
            let vs: Vec<VertexId> = fm.mesh.cell_vertices(c).iter().map(|x| fm.to3d[x]).collect();
            let pts = [*mesh.point(vs[0]), *mesh.point(vs[1]), *mesh.point(vs[2])];
            let cen = geom::centroid(&pts);
            if !self.features.facets[f].contains(&cen, &self.plc_points, self.tol) {
                continue;
            }
            let Ok(ball) = circumsphere(&pts) else {
                continue;
            };
            let k = self.subfacets.len();
            self.subfacets.push(SubFacet {
                facet: f,
                v: [vs[0], vs[1], vs[2]],
                ball,
                alive: true,
            });
            self.facet_meshes[f].cell_sub.insert(c, k);
            self.balls.insert(ball_id(SubFeature::Facet(k)), ball.0, ball.1);
            created.push(SubFeature::Facet(k));
        }
        Ok(created)
    }

    /// Segments both vertices lie on.
    pub fn common_segment(&self, a: VertexId, b: VertexId) -> Option<usize> {
        self.features_of(a).iter().find_map(|f| match f {
            FeatureRef::Segment(s) if self.features_of(b).contains(f) => Some(*s),
            _ => None,
        })
    }

    /// True if the mesh face with these vertices (an edge in 2D, a triangle
    /// in 3D) lies on a boundary feature.
    pub fn is_boundary_face(&self, vs: &[VertexId], mesh: &Mesh) -> bool {
        if vs.len() == 2 {
            return self.common_segment(vs[0], vs[1]).is_some();
        }
        let shared: Vec<usize> = self
            .features_of(vs[0])
            .iter()
            .filter_map(|f| match f {
                FeatureRef::Facet(k) => Some(*k),
                _ => None,
            })
            .filter(|k| {
                vs[1..]
                    .iter()
                    .all(|&v| self.features_of(v).contains(&FeatureRef::Facet(*k)))
            })
            .collect();
        if shared.is_empty() {
            return false;
        }
        let pts: Vec<Point> = vs.iter().map(|&v| *mesh.point(v)).collect();
        let cen = geom::centroid(&pts);
        shared
            .iter()
            .any(|&k| self.features.facets[k].contains(&cen, &self.plc_points, self.tol))
    }

    /// The subfeature containing point `x` that lies on a boundary face.
    pub fn subfeature_at(&self, x: &Point, mesh: &Mesh) -> Option<SubFeature> {
        let mut best: Option<(f64, SubFeature)> = None;
        for sf in self.near(x) {
            let d = match sf {
                SubFeature::Segment(k) => {
                    let [a, b] = self.subsegs[k].v;
                    geom::point_segment(x, mesh.point(a), mesh.point(b)).0
                }
                SubFeature::Facet(k) => {
                    let [a, b, c] = self.subfacets[k].v;
                    let y = geom::closest_on_triangle(x, mesh.point(a), mesh.point(b), mesh.point(c));
                    geom::dist(x, &y)
                }
            };
            if best.map_or(true, |(bd, bs)| d < bd || (d == bd && sf < bs)) {
                best = Some((d, sf));
            }
        }
        best.map(|(_, sf)| sf)
    }

    /// Live subsegments bounding facet `f`.
    pub fn facet_subsegments(&self, f: usize) -> Vec<usize> {
        let segs: HashSet<usize> = self.features.facets[f].segments.iter().copied().collect();
        self.live_subsegments()
            .filter(|&k| segs.contains(&self.subsegs[k].segment))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_index_finds_containing_balls() {
        let mut idx = BallIndex::new(Dim::Three);
        idx.insert(0, [0.0, 0.0, 0.0], 1.0);
        idx.insert(1, [5.0, 0.0, 0.0], 0.01);
        idx.insert(2, [0.5, 0.5, 0.5], 100.0);
        assert_eq!(idx.query(&[0.9, 0.0, 0.0], 0.0), vec![0, 2]);
        assert_eq!(idx.query(&[5.005, 0.0, 0.0], 0.0), vec![1, 2]);
        idx.remove(2);
        assert_eq!(idx.query(&[5.005, 0.0, 0.0], 0.0), vec![1]);
        assert!(idx.query(&[1.0, 0.0, 0.0], 0.0).is_empty());
    }

    #[test]
    fn ball_index_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut idx = BallIndex::new(Dim::Three);
        let mut balls = Vec::new();
        for i in 0..300 {
            let c = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let r = 10f64.powf(rng.gen_range(-3.0..0.5));
            idx.insert(i, c, r);
            balls.push((c, r));
        }
        for _ in 0..500 {
            let p = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let want: Vec<usize> = (0..balls.len())
                .filter(|&i| geom::dist2(&p, &balls[i].0) < balls[i].1 * balls[i].1)
                .collect();
            assert_eq!(idx.query(&p, 0.0), want);
        }
    }
}
