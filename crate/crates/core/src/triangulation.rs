//! Incremental Delaunay triangulation (2D) and tetrahedralization (3D).
//!
//! Cells live in a slab with a free list; a cell's `nb[i]` is the neighbor
//! across the facet opposite `v[i]`. Every cell is positively oriented.
//! The domain is enclosed by a scaffold simplex whose vertices carry
//! [`Provenance::Scaffold`]; those cells are stripped at output time.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::geom;
use crate::predicates::{incircle_ccw, insphere_pos, orient2d, orient3d, Point, Sign};
use crate::{Dim, MeshError};

pub type VertexId = usize;
pub type CellId = usize;
pub const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Input,
    FreeSteiner,
    BoundarySteiner,
    Scaffold,
}

/// Boundary feature a vertex was placed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureRef {
    Segment(usize),
    Facet(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexRecord {
    pub point: Point,
    pub provenance: Provenance,
    pub incident_feature: Option<FeatureRef>,
    pub alive: bool,
}

#[derive(Clone, Debug)]
struct Cell {
    v: [usize; 4],
    nb: [usize; 4],
    alive: bool,
    born: u64,
}

#[derive(Clone, Debug, Default)]
pub struct InsertOutcome {
    pub vertex: VertexId,
    pub cavity_size: usize,
    pub created: Vec<CellId>,
    pub removed: Vec<CellId>,
}

#[derive(Clone, Debug, Default)]
pub struct DeleteOutcome {
    pub created: Vec<CellId>,
    pub removed: Vec<CellId>,
    /// The whole triangulation was rebuilt; every cell id changed.
    pub rebuilt: bool,
}

type FacetKey = [usize; 3];

fn facet_key(vs: &[usize]) -> FacetKey {
    let mut k = [NONE; 3];
    k[..vs.len()].copy_from_slice(vs);
    k[..vs.len()].sort_unstable();
    k
}

#[derive(Debug)]
pub struct Mesh {
    dim: Dim,
    vertices: Vec<VertexRecord>,
    cells: Vec<Cell>,
    free: Vec<CellId>,
    vertex_cell: Vec<CellId>,
    hint: AtomicUsize,
    stamp: u64,
    coincide_tol: f64,
    scaffold: usize,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Mesh {
            dim: self.dim,
            vertices: self.vertices.clone(),
            cells: self.cells.clone(),
            free: self.free.clone(),
            vertex_cell: self.vertex_cell.clone(),
            hint: AtomicUsize::new(self.hint.load(Ordering::Relaxed)),
            stamp: self.stamp,
            coincide_tol: self.coincide_tol,
            scaffold: self.scaffold,
        }
    }
}

impl Mesh {
    /// An empty triangulation whose scaffold simplex comfortably encloses the
    /// box `[lo, hi]`.
    pub fn with_scaffold(dim: Dim, lo: Point, hi: Point) -> Mesh {
        let center = geom::midpoint(&lo, &hi);
        let mut radius = geom::dist(&lo, &hi) * 0.5;
        if !(radius > 0.0) {
            radius = 1.0;
        }
        let mut verts: Vec<Point> = match dim {
            Dim::Two => {
                let r = 40.0 * radius;
                (0..3)
                    .map(|k| {
                        let a = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
                        [center[0] + r * a.cos(), center[1] + r * a.sin(), 0.0]
                    })
                    .collect()
            }
            Dim::Three => {
                let r = 60.0 * radius / 3f64.sqrt();
                [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
                    .iter()
                    .map(|d| geom::axpy(&center, r, d))
                    .collect()
            }
        };
        let pos = match dim {
            Dim::Two => orient2d(&verts[0], &verts[1], &verts[2]),
            Dim::Three => orient3d(&verts[0], &verts[1], &verts[2], &verts[3]),
        };
        if pos != Sign::Positive {
            verts.swap(0, 1);
        }
        let arity = dim.arity();
        let vertices: Vec<VertexRecord> = verts
            .into_iter()
            .map(|p| VertexRecord {
                point: p,
                provenance: Provenance::Scaffold,
                incident_feature: None,
                alive: true,
            })
            .collect();
        let mut v = [NONE; 4];
        for (k, slot) in v.iter_mut().enumerate().take(arity) {
            *slot = k;
        }
        let cell = Cell {
            v,
            nb: [NONE; 4],
            alive: true,
            born: 0,
        };
        Mesh {
            dim,
            vertices,
            cells: vec![cell],
            free: Vec::new(),
            vertex_cell: vec![0; arity],
            hint: AtomicUsize::new(0),
            stamp: 0,
            coincide_tol: 1e-12 * geom::dist(&lo, &hi).max(f64::MIN_POSITIVE),
            scaffold: arity,
        }
    }

    /// Delaunay triangulation of a point set (inserted in order) inside a
    /// scaffold. Points become `Input` vertices with ids `arity..`.
    pub fn from_points(dim: Dim, points: &[Point]) -> Result<Mesh, MeshError> {
        let (lo, hi) = bbox(points);
        let mut m = Mesh::with_scaffold(dim, lo, hi);
        for p in points {
            m.insert_vertex(*p, Provenance::Input)?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    fn arity(&self) -> usize {
        self.dim.arity()
    }

    /// Monotone mutation counter.
    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    pub fn vertex(&self, id: VertexId) -> &VertexRecord {
        &self.vertices[id]
    }

    pub fn point(&self, id: VertexId) -> &Point {
        &self.vertices[id].point
    }

    pub fn vertex_slots(&self) -> usize {
        self.vertices.len()
    }

    pub fn set_incident_feature(&mut self, id: VertexId, f: Option<FeatureRef>) {
        self.vertices[id].incident_feature = f;
    }

    pub fn is_scaffold(&self, id: VertexId) -> bool {
        id < self.scaffold
    }

    /// Live vertex ids, scaffold excluded.
    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        (self.scaffold..self.vertices.len()).filter(move |&i| self.vertices[i].alive)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_ids().count()
    }

    pub fn is_alive(&self, c: CellId) -> bool {
        c < self.cells.len() && self.cells[c].alive
    }

    /// Stamp at which cell slot `c` was last (re)created.
    pub fn born(&self, c: CellId) -> u64 {
        self.cells[c].born
    }

    pub fn cell_vertices(&self, c: CellId) -> &[usize] {
        &self.cells[c].v[..self.arity()]
    }

    pub fn cell_neighbors(&self, c: CellId) -> &[usize] {
        &self.cells[c].nb[..self.arity()]
    }

    pub fn cell_points(&self, c: CellId) -> Vec<Point> {
        self.cell_vertices(c).iter().map(|&v| self.vertices[v].point).collect()
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cells.len()).filter(move |&c| self.cells[c].alive)
    }

    pub fn cell_count(&self) -> usize {
        self.cell_ids().count()
    }

    pub fn touches_scaffold(&self, c: CellId) -> bool {
        self.cell_vertices(c).iter().any(|&v| v < self.scaffold)
    }

    /// Cells not incident to a scaffold vertex.
    pub fn interior_cells(&self) -> Vec<CellId> {
        self.cell_ids().filter(|&c| !self.touches_scaffold(c)).collect()
    }

    /// Sorted vertex tuples of all live cells (optionally skipping scaffold).
    pub fn simplex_set(&self, skip_scaffold: bool) -> BTreeSet<Vec<usize>> {
        self.cell_ids()
            .filter(|&c| !skip_scaffold || !self.touches_scaffold(c))
            .map(|c| {
                let mut v = self.cell_vertices(c).to_vec();
                v.sort_unstable();
                v
            })
            .collect()
    }

    pub fn cell_measure(&self, c: CellId) -> f64 {
        let p = self.cell_points(c);
        match self.dim {
            Dim::Two => geom::signed_area2(&p[0], &p[1], &p[2]),
            Dim::Three => geom::tet_volume(&p[0], &p[1], &p[2], &p[3]),
        }
    }

    fn orient_pts(&self, p: &[Point]) -> Sign {
        match self.dim {
            Dim::Two => orient2d(&p[0], &p[1], &p[2]),
            Dim::Three => orient3d(&p[0], &p[1], &p[2], &p[3]),
        }
    }

    fn cell_pts_arr(&self, c: CellId) -> [Point; 4] {
        let mut out = [[0.0; 3]; 4];
        for (k, &v) in self.cell_vertices(c).iter().enumerate() {
            out[k] = self.vertices[v].point;
        }
        out
    }

    /// Orientation of cell `c` with vertex slot `i` replaced by `p`.
    fn orient_replaced(&self, c: CellId, i: usize, p: &Point) -> Sign {
        let mut pts = self.cell_pts_arr(c);
        pts[i] = *p;
        self.orient_pts(&pts[..self.arity()])
    }

    /// Exact strict in-circumsphere test against cell `c`.
    pub fn in_cell_sphere(&self, c: CellId, q: &Point) -> Sign {
        let p = self.cell_pts_arr(c);
        match self.dim {
            Dim::Two => incircle_ccw(&p[0], &p[1], &p[2], q),
            Dim::Three => insphere_pos(&p[0], &p[1], &p[2], &p[3], q),
        }
    }

    /// Closed containment of `p` in cell `c`.
    pub fn cell_contains(&self, c: CellId, p: &Point) -> bool {
        (0..self.arity()).all(|i| self.orient_replaced(c, i, p) != Sign::Negative)
    }

    /// Cell containing `p`, or `None` outside the scaffold. On shared faces
    /// the lowest cell id among the containing cells wins.
    pub fn locate(&self, p: &Point) -> Option<CellId> {
        let found = self.walk(p)?;
        let touching: Vec<usize> = (0..self.arity())
            .filter(|&i| self.orient_replaced(found, i, p) == Sign::Zero)
            .collect();
        if touching.is_empty() {
            return Some(found);
        }
        let mut best = found;
        let mut seen = HashSet::from([found]);
        let mut stack = vec![found];
        while let Some(c) = stack.pop() {
            best = best.min(c);
            for i in 0..self.arity() {
                let n = self.cells[c].nb[i];
                if n == NONE || seen.contains(&n) {
                    continue;
                }
                if self.orient_replaced(c, i, p) == Sign::Zero && self.cell_contains(n, p) {
                    seen.insert(n);
                    stack.push(n);
                }
            }
        }
        Some(best)
    }

    fn walk(&self, p: &Point) -> Option<CellId> {
        let mut c = self.hint.load(Ordering::Relaxed);
        if !self.is_alive(c) {
            c = self.cell_ids().next()?;
        }
        let arity = self.arity();
        let limit = 4 * self.cells.len() + 16;
        for step in 0..limit {
            let mut moved = false;
            for k in 0..arity {
                let i = (k + step) % arity;
                if self.orient_replaced(c, i, p) == Sign::Negative {
                    let n = self.cells[c].nb[i];
                    if n == NONE {
                        return None;
                    }
                    c = n;
                    moved = true;
                    break;
                }
            }
            if !moved {
                self.hint.store(c, Ordering::Relaxed);
                return Some(c);
            }
        }
        // the walk should not cycle on a Delaunay triangulation; scan as a guard
        self.cell_ids().find(|&c| self.cell_contains(c, p))
    }

    fn nearest_cell_vertex(&self, c: CellId, p: &Point) -> (VertexId, f64) {
        self.cell_vertices(c)
            .iter()
            .map(|&v| (v, geom::dist(&self.vertices[v].point, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    /// Bowyer-Watson insertion.
    pub fn insert_vertex(&mut self, p: Point, provenance: Provenance) -> Result<InsertOutcome, MeshError> {
        if !p.iter().all(|c| c.is_finite()) {
            return Err(MeshError::Geometry(crate::GeometryError::NonFinite));
        }
        let mut p = p;
        if self.dim == Dim::Two {
            p[2] = 0.0;
        }
        let c0 = self.locate(&p).ok_or(MeshError::Outside)?;
        let (nv, d) = self.nearest_cell_vertex(c0, &p);
        if d <= self.coincide_tol {
            return Err(MeshError::Coincident(nv));
        }
        let vid = self.vertices.len();
        self.vertices.push(VertexRecord {
            point: p,
            provenance,
            incident_feature: None,
            alive: true,
        });
        self.vertex_cell.push(NONE);
        match self.insert_existing(vid, c0) {
            Ok(out) => Ok(out),
            Err(e) => {
                self.vertices.pop();
                self.vertex_cell.pop();
                Err(e)
            }
        }
    }

    fn insert_existing(&mut self, vid: VertexId, c0: CellId) -> Result<InsertOutcome, MeshError> {
        let p = self.vertices[vid].point;
        let arity = self.arity();
        let mut in_cavity: HashSet<CellId> = HashSet::from([c0]);
        let mut cavity = vec![c0];
        let mut stack = vec![c0];
        let mut rejected: HashSet<CellId> = HashSet::new();
        while let Some(c) = stack.pop() {
            for i in 0..arity {
                let n = self.cells[c].nb[i];
                if n == NONE || in_cavity.contains(&n) || rejected.contains(&n) {
                    continue;
                }
                if self.in_cell_sphere(n, &p) == Sign::Positive {
                    in_cavity.insert(n);
                    cavity.push(n);
                    stack.push(n);
                } else {
                    rejected.insert(n);
                }
            }
        }
        // star-shapedness repair: every boundary facet must see p strictly
        loop {
            let mut grow = None;
            'scan: for &c in &cavity {
                for i in 0..arity {
                    let n = self.cells[c].nb[i];
                    if n != NONE && in_cavity.contains(&n) {
                        continue;
                    }
                    if self.orient_replaced(c, i, &p) != Sign::Positive {
                        grow = Some(n);
                        break 'scan;
                    }
                }
            }
            match grow {
                None => break,
                Some(NONE) => return Err(MeshError::Outside),
                Some(n) => {
                    in_cavity.insert(n);
                    cavity.push(n);
                }
            }
        }
        // new cells, one per boundary facet
        let mut specs: Vec<([usize; 4], usize, usize)> = Vec::new(); // (verts, slot of p, outer)
        for &c in &cavity {
            for i in 0..arity {
                let n = self.cells[c].nb[i];
                if n != NONE && in_cavity.contains(&n) {
                    continue;
                }
                let mut v = self.cells[c].v;
                v[i] = vid;
                specs.push((v, i, n));
            }
        }
        let removed = cavity.clone();
        let mut outer_back: Vec<Option<usize>> = Vec::with_capacity(specs.len());
        for &(_, _, n) in &specs {
            if n == NONE {
                outer_back.push(None);
            } else {
                let slot = self.cells[n].nb[..arity]
                    .iter()
                    .position(|&x| in_cavity.contains(&x) && {
                        // the cavity cell sharing this facet
                        true
                    });
                outer_back.push(slot);
            }
        }
        // resolve back-slots exactly: the outer slot pointing at the source cell
        let mut sources = Vec::with_capacity(specs.len());
        for &c in &cavity {
            for i in 0..arity {
                let n = self.cells[c].nb[i];
                if n != NONE && in_cavity.contains(&n) {
                    continue;
                }
                sources.push(c);
            }
        }
        for (k, &(_, _, n)) in specs.iter().enumerate() {
            if n != NONE {
                outer_back[k] = self.cells[n].nb[..arity].iter().position(|&x| x == sources[k]);
            }
        }
        for &c in &cavity {
            self.cells[c].alive = false;
        }
        for &c in cavity.iter().rev() {
            self.free.push(c);
        }
        self.stamp += 1;
        let mut created = Vec::with_capacity(specs.len());
        for &(v, _, n) in &specs {
            let mut nb = [NONE; 4];
            let _ = n;
            nb[..arity].fill(NONE);
            let id = self.alloc(Cell {
                v,
                nb,
                alive: true,
                born: self.stamp,
            });
            created.push(id);
        }
        let mut ridge: HashMap<FacetKey, (CellId, usize)> = HashMap::new();
        for (k, &(v, pslot, n)) in specs.iter().enumerate() {
            let id = created[k];
            self.cells[id].nb[pslot] = n;
            if n != NONE {
                if let Some(s) = outer_back[k] {
                    self.cells[n].nb[s] = id;
                }
            }
            for j in 0..arity {
                if j == pslot {
                    continue;
                }
                let fv: Vec<usize> = (0..arity).filter(|&x| x != j).map(|x| v[x]).collect();
                let key = facet_key(&fv);
                if let Some((other, oj)) = ridge.remove(&key) {
                    self.cells[id].nb[j] = other;
                    self.cells[other].nb[oj] = id;
                } else {
                    ridge.insert(key, (id, j));
                }
            }
        }
        debug_assert!(ridge.is_empty(), "unmatched ridges after insertion");
        for &id in &created {
            for k in 0..arity {
                let v = self.cells[id].v[k];
                self.vertex_cell[v] = id;
            }
        }
        self.hint.store(created[0], Ordering::Relaxed);
        Ok(InsertOutcome {
            vertex: vid,
            cavity_size: removed.len(),
            created,
            removed,
        })
    }

    fn alloc(&mut self, cell: Cell) -> CellId {
        if let Some(id) = self.free.pop() {
            self.cells[id] = cell;
            id
        } else {
            self.cells.push(cell);
            self.cells.len() - 1
        }
    }

    /// Cells incident to vertex `v`.
    pub fn vertex_star(&self, v: VertexId) -> Vec<CellId> {
        let start = self.vertex_cell[v];
        if start == NONE || !self.is_alive(start) || !self.cell_vertices(start).contains(&v) {
            return self
                .cell_ids()
                .filter(|&c| self.cell_vertices(c).contains(&v))
                .collect();
        }
        let mut seen = HashSet::from([start]);
        let mut out = vec![start];
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            for i in 0..self.arity() {
                if self.cells[c].v[i] == v {
                    continue;
                }
                let n = self.cells[c].nb[i];
                if n != NONE && !seen.contains(&n) && self.cell_vertices(n).contains(&v) {
                    seen.insert(n);
                    out.push(n);
                    stack.push(n);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Vertices sharing an edge with `v` (scaffold included).
    pub fn vertex_neighbors(&self, v: VertexId) -> Vec<VertexId> {
        let mut set = BTreeSet::new();
        for c in self.vertex_star(v) {
            for &u in self.cell_vertices(c) {
                if u != v {
                    set.insert(u);
                }
            }
        }
        set.into_iter().collect()
    }

    /// Removes a non-input vertex and retriangulates its star.
    pub fn delete_vertex(&mut self, v: VertexId) -> Result<DeleteOutcome, MeshError> {
        if v >= self.vertices.len() || !self.vertices[v].alive {
            return Err(MeshError::NoSuchVertex(v));
        }
        match self.vertices[v].provenance {
            Provenance::Input | Provenance::Scaffold => return Err(MeshError::InputVertex(v)),
            _ => {}
        }
        let arity = self.arity();
        let star = self.vertex_star(v);
        let star_set: HashSet<CellId> = star.iter().copied().collect();
        let mut link: BTreeSet<VertexId> = BTreeSet::new();
        // boundary facets of the hole: key -> (outer cell, outer slot)
        let mut hole_facets: HashMap<FacetKey, (CellId, usize)> = HashMap::new();
        let mut star_measure = 0.0;
        for &c in &star {
            star_measure += self.cell_measure(c);
            let i = self.cells[c].v.iter().position(|&x| x == v).unwrap();
            let fv: Vec<usize> = (0..arity).filter(|&x| x != i).map(|x| self.cells[c].v[x]).collect();
            link.extend(fv.iter().copied());
            let n = self.cells[c].nb[i];
            let back = if n == NONE {
                NONE
            } else {
                self.cells[n].nb[..arity].iter().position(|&x| x == c).unwrap_or(NONE)
            };
            hole_facets.insert(facet_key(&fv), (n, back));
        }
        let link: Vec<VertexId> = link.into_iter().collect();
        if let Some(fill) = self.fill_hole(&star, &link, &hole_facets, star_measure) {
            self.vertices[v].alive = false;
            for &c in &star {
                self.cells[c].alive = false;
            }
            for &c in star.iter().rev() {
                self.free.push(c);
            }
            self.stamp += 1;
            let mut created = Vec::with_capacity(fill.len());
            for verts in &fill {
                let id = self.alloc(Cell {
                    v: *verts,
                    nb: [NONE; 4],
                    alive: true,
                    born: self.stamp,
                });
                created.push(id);
            }
            let mut ridge: HashMap<FacetKey, (CellId, usize)> = HashMap::new();
            for &id in &created {
                let verts = self.cells[id].v;
                for j in 0..arity {
                    let fv: Vec<usize> = (0..arity).filter(|&x| x != j).map(|x| verts[x]).collect();
                    let key = facet_key(&fv);
                    if let Some(&(n, back)) = hole_facets.get(&key) {
                        self.cells[id].nb[j] = n;
                        if n != NONE && back != NONE {
                            self.cells[n].nb[back] = id;
                        }
                    } else if let Some((o, oj)) = ridge.remove(&key) {
                        self.cells[id].nb[j] = o;
                        self.cells[o].nb[oj] = id;
                    } else {
                        ridge.insert(key, (id, j));
                    }
                }
                for k in 0..arity {
                    self.vertex_cell[verts[k]] = id;
                }
            }
            debug_assert!(ridge.is_empty());
            let _ = star_set;
            self.hint.store(created[0], Ordering::Relaxed);
            return Ok(DeleteOutcome {
                created,
                removed: star,
                rebuilt: false,
            });
        }
        self.vertices[v].alive = false;
        self.rebuild();
        Ok(DeleteOutcome {
            created: self.cell_ids().collect(),
            removed: star,
            rebuilt: true,
        })
    }

    /// Delaunay retriangulation of a vertex hole from the Delaunay
    /// triangulation of its link. `None` if the result does not match the hole
    /// boundary (degenerate link), in which case the caller rebuilds.
    fn fill_hole(
        &self,
        star: &[CellId],
        link: &[VertexId],
        hole_facets: &HashMap<FacetKey, (CellId, usize)>,
        star_measure: f64,
    ) -> Option<Vec<[usize; 4]>> {
        let arity = self.arity();
        let pts: Vec<Point> = link.iter().map(|&u| self.vertices[u].point).collect();
        let local = Mesh::from_points(self.dim, &pts).ok()?;
        let to_global = |lv: usize| link[lv - local.scaffold];
        let mut out = Vec::new();
        let mut measure = 0.0;
        let mut boundary: HashMap<FacetKey, usize> = HashMap::new();
        for c in local.cell_ids() {
            if local.touches_scaffold(c) {
                continue;
            }
            let cp = local.cell_points(c);
            let cen = geom::centroid(&cp);
            if !star.iter().any(|&s| self.cell_contains(s, &cen)) {
                continue;
            }
            let mut v = [NONE; 4];
            for k in 0..arity {
                v[k] = to_global(local.cells[c].v[k]);
            }
            measure += local.cell_measure(c);
            for j in 0..arity {
                let fv: Vec<usize> = (0..arity).filter(|&x| x != j).map(|x| v[x]).collect();
                *boundary.entry(facet_key(&fv)).or_insert(0) += 1;
            }
            out.push(v);
        }
        let outer: HashSet<FacetKey> = boundary
            .iter()
            .filter(|(_, &n)| n == 1)
            .map(|(k, _)| *k)
            .collect();
        if boundary.values().any(|&n| n > 2) {
            return None;
        }
        let want: HashSet<FacetKey> = hole_facets.keys().copied().collect();
        if outer != want {
            return None;
        }
        if (measure - star_measure).abs() > 1e-9 * star_measure.abs().max(f64::MIN_POSITIVE) {
            return None;
        }
        Some(out)
    }

    /// Rebuilds every cell from the live vertices, in id order.
    pub fn rebuild(&mut self) {
        let arity = self.arity();
        let mut v = [NONE; 4];
        for (k, slot) in v.iter_mut().enumerate().take(arity) {
            *slot = k;
        }
        self.stamp += 1;
        self.cells = vec![Cell {
            v,
            nb: [NONE; 4],
            alive: true,
            born: self.stamp,
        }];
        self.free.clear();
        for x in self.vertex_cell.iter_mut() {
            *x = NONE;
        }
        for k in 0..arity {
            self.vertex_cell[k] = 0;
        }
        self.hint.store(0, Ordering::Relaxed);
        for vid in self.scaffold..self.vertices.len() {
            if !self.vertices[vid].alive {
                continue;
            }
            let p = self.vertices[vid].point;
            let c0 = self.locate(&p).expect("live vertex inside scaffold");
            self.insert_existing(vid, c0).expect("rebuild insertion");
        }
    }

    /// Pairs `(cell, vertex)` with the vertex strictly inside the cell's
    /// circumsphere, by brute force.
    pub fn delaunay_violations(&self) -> Vec<(CellId, VertexId)> {
        let ids: Vec<VertexId> = (0..self.vertices.len()).filter(|&i| self.vertices[i].alive).collect();
        let mut out = Vec::new();
        for c in self.cell_ids() {
            let cv = self.cell_vertices(c);
            for &v in &ids {
                if cv.contains(&v) {
                    continue;
                }
                if self.in_cell_sphere(c, &self.vertices[v].point) == Sign::Positive {
                    out.push((c, v));
                }
            }
        }
        out
    }

    /// Structural self-check used by tests: symmetric adjacency, positive
    /// orientation, matching shared facets.
    pub fn check_topology(&self) -> Result<(), String> {
        let arity = self.arity();
        for c in self.cell_ids() {
            let p = self.cell_points(c);
            if self.orient_pts(&p) != Sign::Positive {
                return Err(format!("cell {c} not positively oriented"));
            }
            for i in 0..arity {
                let n = self.cells[c].nb[i];
                if n == NONE {
                    continue;
                }
                if !self.is_alive(n) {
                    return Err(format!("cell {c} points to dead neighbor {n}"));
                }
                let back = self.cells[n].nb[..arity].iter().position(|&x| x == c);
                let Some(j) = back else {
                    return Err(format!("adjacency {c}->{n} not symmetric"));
                };
                let f1: Vec<usize> = (0..arity).filter(|&x| x != i).map(|x| self.cells[c].v[x]).collect();
                let f2: Vec<usize> = (0..arity).filter(|&x| x != j).map(|x| self.cells[n].v[x]).collect();
                if facet_key(&f1) != facet_key(&f2) {
                    return Err(format!("cells {c} and {n} disagree on shared facet"));
                }
            }
        }
        Ok(())
    }

    /// Facet of cell `c` opposite slot `i`, as vertex ids.
    pub fn facet(&self, c: CellId, i: usize) -> Vec<VertexId> {
        (0..self.arity())
            .filter(|&x| x != i)
            .map(|x| self.cells[c].v[x])
            .collect()
    }
}

pub fn bbox(points: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if points.is_empty() {
        return ([0.0; 3], [1.0, 1.0, 1.0]);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square() -> Mesh {
        Mesh::from_points(
            Dim::Two,
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn square_bootstrap_has_two_triangles() {
        let m = square();
        assert_eq!(m.interior_cells().len(), 2);
        assert!(m.delaunay_violations().is_empty());
        m.check_topology().unwrap();
    }

    #[test]
    fn insert_centroid_into_single_triangle() {
        let mut m = Mesh::from_points(Dim::Two, &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(m.interior_cells().len(), 1);
        m.insert_vertex([1.0 / 3.0, 1.0 / 3.0, 0.0], Provenance::FreeSteiner).unwrap();
        assert_eq!(m.interior_cells().len(), 3);
        m.check_topology().unwrap();
    }

    #[test]
    fn coincident_and_outside_rejected() {
        let mut m = square();
        let e = m.insert_vertex([1.0, 1.0, 0.0], Provenance::FreeSteiner).unwrap_err();
        assert!(matches!(e, MeshError::Coincident(_)));
        let e = m.insert_vertex([1e6, 0.0, 0.0], Provenance::FreeSteiner).unwrap_err();
        assert_eq!(e, MeshError::Outside);
    }

    #[test]
    fn locate_rules() {
        let m = square();
        let c = m.interior_cells()[0];
        let cen = geom::centroid(&m.cell_points(c));
        assert_eq!(m.locate(&cen), Some(c));
        assert_eq!(m.locate(&[1e7, 1e7, 0.0]), None);
        // a point on the shared diagonal goes to the lower id
        let cells = m.interior_cells();
        let shared: Vec<usize> = {
            let a: BTreeSet<usize> = m.cell_vertices(cells[0]).iter().copied().collect();
            m.cell_vertices(cells[1]).iter().copied().filter(|v| a.contains(v)).collect()
        };
        let mid = geom::midpoint(m.point(shared[0]), m.point(shared[1]));
        assert_eq!(m.locate(&mid), Some(cells[0].min(cells[1])));
    }

    #[test]
    fn delete_input_vertex_rejected() {
        let mut m = square();
        assert_eq!(m.delete_vertex(3).unwrap_err(), MeshError::InputVertex(3));
        assert_eq!(m.delete_vertex(99).unwrap_err(), MeshError::NoSuchVertex(99));
    }

    #[test]
    fn delete_degree_four_vertex() {
        // diamond around the origin; the center has degree 4
        let pts = [[1.0, 0.0, 0.0], [0.0, 1.1, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.2, 0.0]];
        let mut m = Mesh::from_points(Dim::Two, &pts).unwrap();
        let before = m.simplex_set(true);
        let out = m.insert_vertex([0.01, 0.02, 0.0], Provenance::FreeSteiner).unwrap();
        assert_eq!(m.interior_cells().len(), 4);
        m.delete_vertex(out.vertex).unwrap();
        assert_eq!(m.interior_cells().len(), 2);
        assert_eq!(m.simplex_set(true), before);
        m.check_topology().unwrap();
    }

    #[test]
    fn cube_corners_bootstrap() {
        let mut pts = Vec::new();
        for &x in &[0.0, 1.0] {
            for &y in &[0.0, 1.0] {
                for &z in &[0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        let m = Mesh::from_points(Dim::Three, &pts).unwrap();
        let n = m.interior_cells().len();
        assert!(n == 5 || n == 6, "got {n} interior tets");
        assert!(m.delaunay_violations().is_empty());
        let vol: f64 = m.interior_cells().iter().map(|&c| m.cell_measure(c)).sum();
        assert!((vol - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_insert_delete_keeps_delaunay() {
        for dim in [Dim::Two, Dim::Three] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let corners: Vec<Point> = (0..dim.arity() + 1)
                .map(|_| [rng.gen(), rng.gen(), if dim == Dim::Three { rng.gen() } else { 0.0 }])
                .collect();
            let mut m = Mesh::from_points(dim, &corners).unwrap();
            let total: f64 = m.cell_ids().map(|c| m.cell_measure(c)).sum();
            let mut free = Vec::new();
            for step in 0..150 {
                if step % 3 == 2 && !free.is_empty() {
                    let k = rng.gen_range(0..free.len());
                    let v = free.swap_remove(k);
                    m.delete_vertex(v).unwrap();
                } else {
                    let p = [rng.gen(), rng.gen(), if dim == Dim::Three { rng.gen() } else { 0.0 }];
                    let out = m.insert_vertex(p, Provenance::FreeSteiner).unwrap();
                    free.push(out.vertex);
                }
            }
            m.check_topology().unwrap();
            assert!(m.delaunay_violations().is_empty(), "{dim:?}");
            let now: f64 = m.cell_ids().map(|c| m.cell_measure(c)).sum();
            assert!((now - total).abs() <= 1e-9 * total);
        }
    }
}
