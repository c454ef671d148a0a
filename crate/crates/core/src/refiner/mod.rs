//! Advancing-front Delaunay refinement.
//!
//! Poor elements are processed shortest edge first. Each one gets a Steiner
//! vertex placed by the max-min optimizer inside its picking region and its
//! petal (2D) or snow globe (3D), away from sliver-forming regions. Tentative
//! vertices that encroach the boundary are rejected and the boundary is split
//! instead, close to the advancing front.

mod boundary;
mod events;
mod multi;
mod preprocess;

use std::cmp::{Ordering as CmpOrdering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashSet, VecDeque};

pub use boundary::SubFeature;
pub use events::{EventKind, EventLog, InsertionEvent, RelocationTrace, StageSummary};
pub use preprocess::{encroached_pairs, preprocess_plc, AuxKind, AuxPoint, AuxTarget, Preprocessed};

use boundary::Boundary;

use crate::geom;
use crate::optimizer::{self, Candidate, Objective, PlacementProblem, WeightPlane};
use crate::plc::{FeatureSet, Plc};
use crate::predicates::Point;
use crate::quality::{
    self, BoundaryHandling, Class, ForbiddenBases, InsertionMode, Ordering, PlacementMode, QualityMeasures,
    RefinementConfig,
};
use crate::regions::{self, ForbiddenRegion, Primitive, Region};
use crate::triangulation::{CellId, FeatureRef, InsertOutcome, Mesh, Provenance, VertexId, NONE};
use crate::{ConfigError, Dim, MeshError, OptimizerError, RefineError};

/// A queued poor element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkItem {
    pub cell: CellId,
    pub l_min: f64,
    /// Queue key under shortest-first ordering.
    pub l_eff: f64,
    /// Mesh stamp at which the cell was created.
    pub born: u64,
    pub seq: u64,
    prio: f64,
}

impl Eq for WorkItem {}

impl Ord for WorkItem {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        self.prio
            .total_cmp(&other.prio)
            .then(self.cell.cmp(&other.cell))
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for WorkItem {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}

/// What processing one work item did.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Inserted { vertex: VertexId, kind: EventKind },
    Boundary { feature: SubFeature, vertex: Option<VertexId> },
    Skipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Interior,
    Exterior,
}

/// A poor element with the geometry needed to place its Steiner vertex.
#[derive(Clone, Debug)]
pub(crate) struct Element {
    pub cell: CellId,
    pub vs: Vec<VertexId>,
    pub pts: Vec<Point>,
    pub q: QualityMeasures,
    pub class: Class,
    pub edge: [VertexId; 2],
    pub l_min: f64,
    pub l_eff: f64,
    pub stage: i32,
}

/// Where a poor element's vertex goes and why.
#[derive(Clone, Debug)]
pub(crate) struct Placement {
    pub point: Point,
    pub kind: EventKind,
    pub candidate: Option<Candidate>,
    /// Index into the placement attempts that produced the point.
    pub problem: Option<PlacementProblem>,
}

#[derive(Clone, Debug)]
struct Driver {
    l_min: f64,
    l_eff: f64,
    stage: i32,
    element: Vec<VertexId>,
    edge: [VertexId; 2],
}

pub struct RefineOutput {
    pub mesh: Mesh,
    /// The PLC actually meshed (after preprocessing).
    pub plc: Plc,
    pub features: FeatureSet,
    /// Interior elements as vertex id tuples, positively oriented.
    pub elements: Vec<Vec<VertexId>>,
    pub events: EventLog,
    pub preprocess: Preprocessed,
    /// Final subsegments as vertex pairs with their segment index.
    pub subsegments: Vec<(usize, [VertexId; 2])>,
    /// Final subfacets as vertex triples with their facet index.
    pub subfacets: Vec<(usize, [VertexId; 3])>,
}

impl RefineOutput {
    pub fn element_points(&self) -> impl Iterator<Item = Vec<Point>> + '_ {
        self.elements
            .iter()
            .map(|e| e.iter().map(|&v| *self.mesh.point(v)).collect())
    }
}

/// Refines `plc` until every interior element meets the quality bounds.
pub fn refine(plc: &Plc, cfg: &RefinementConfig) -> Result<RefineOutput, RefineError> {
    let mut r = Refiner::new(plc, cfg)?;
    r.run()?;
    Ok(r.finish())
}

/// Scaffold plus the PLC's vertices, inserted in order. Vertex `i` of the
/// PLC becomes mesh vertex `arity + i`.
pub fn bootstrap_mesh(plc: &Plc) -> Result<(Mesh, Vec<VertexId>), MeshError> {
    let (lo, hi) = plc.bbox();
    let mut mesh = Mesh::with_scaffold(plc.dim, lo, hi);
    let mut ids = Vec::with_capacity(plc.vertices.len());
    for p in &plc.vertices {
        ids.push(mesh.insert_vertex(*p, Provenance::Input)?.vertex);
    }
    Ok((mesh, ids))
}

/// Re-executes an event sequence on the bootstrap mesh of `plc` (the PLC
/// recorded in [`RefineOutput::plc`]).
pub fn replay(plc: &Plc, events: &[InsertionEvent]) -> Result<Mesh, MeshError> {
    let (mut mesh, _) = bootstrap_mesh(plc)?;
    for e in events {
        if e.kind == EventKind::Delete {
            mesh.delete_vertex(e.vertex)?;
        } else {
            let out = mesh.insert_vertex(e.point, e.kind.provenance())?;
            if out.vertex != e.vertex {
                return Err(MeshError::NoSuchVertex(e.vertex));
            }
        }
    }
    Ok(mesh)
}

/// Signed measure of the simplex `pts` (twice the area in 2D, six times the
/// volume in 3D), in floating point.
fn signed_measure(pts: &[Point]) -> f64 {
    if pts.len() == 3 {
        2.0 * geom::signed_area2(&pts[0], &pts[1], &pts[2])
    } else {
        6.0 * geom::tet_volume(&pts[0], &pts[1], &pts[2], &pts[3])
    }
}

fn aabb_dist2(pts: &[Point], c: &Point) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        let e = (lo - c[k]).max(c[k] - hi).max(0.0);
        d2 += e * e;
    }
    d2
}

/// Cells whose bounding box meets the ball, found by a breadth-first search
/// from the cell holding the center. Sorted.
pub(crate) fn cells_near_ball(mesh: &Mesh, center: &Point, r: f64) -> Vec<CellId> {
    let Some(start) = mesh.locate(center) else {
        return Vec::new();
    };
    let r2 = r * r;
    let mut seen = HashSet::from([start]);
    let mut out = vec![start];
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        for &n in mesh.cell_neighbors(c) {
            if n == NONE || seen.contains(&n) {
                continue;
            }
            seen.insert(n);
            if aabb_dist2(&mesh.cell_points(n), center) <= r2 {
                out.push(n);
                stack.push(n);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Non-scaffold vertices within distance `r` of `center` (strictly inside,
/// with a relative margin, when `strict`). Sorted.
pub(crate) fn vertices_in_ball(mesh: &Mesh, center: &Point, r: f64, strict: bool) -> Vec<VertexId> {
    let lim = if strict { r * r * (1.0 - 1e-12) } else { r * r * (1.0 + 1e-12) };
    let mut set = BTreeSet::new();
    for c in cells_near_ball(mesh, center, r) {
        for &v in mesh.cell_vertices(c) {
            if mesh.is_scaffold(v) {
                continue;
            }
            let d2 = geom::dist2(mesh.point(v), center);
            if if strict { d2 < lim } else { d2 <= lim } {
                set.insert(v);
            }
        }
    }
    set.into_iter().collect()
}

fn edge_present(mesh: &Mesh, a: VertexId, b: VertexId) -> bool {
    mesh.vertex_star(a).iter().any(|&c| mesh.cell_vertices(c).contains(&b))
}

fn face_present(mesh: &Mesh, v: &[VertexId]) -> bool {
    mesh.vertex_star(v[0]).iter().any(|&c| {
        let cv = mesh.cell_vertices(c);
        v[1..].iter().all(|x| cv.contains(x))
    })
}

/// Shortest edge of an element as vertex ids (ties by id pair).
fn shortest_edge_ids(vs: &[VertexId], pts: &[Point]) -> ([VertexId; 2], f64) {
    let mut best: Option<((VertexId, VertexId), f64)> = None;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let d = geom::dist(&pts[i], &pts[j]);
            let key = (vs[i].min(vs[j]), vs[i].max(vs[j]));
            let better = match best {
                None => true,
                Some((bk, bd)) => {
                    let tie = (d - bd).abs() <= 1e-12 * d.max(bd);
                    if tie {
                        key < bk
                    } else {
                        d < bd
                    }
                }
            };
            if better {
                best = Some((key, d));
            }
        }
    }
    let ((a, b), d) = best.unwrap();
    ([a, b], d)
}

pub struct Refiner {
    cfg: RefinementConfig,
    plc: Plc,
    pre: Preprocessed,
    mesh: Mesh,
    bnd: Boundary,
    labels: Vec<(u64, Option<Label>)>,
    queue: BinaryHeap<Reverse<WorkItem>>,
    seq: u64,
    pending: Vec<CellId>,
    all_pending: bool,
    seg_work: VecDeque<usize>,
    facet_work: VecDeque<usize>,
    log: EventLog,
    driver: Option<Driver>,
    round: Option<usize>,
    scale: f64,
}

impl Refiner {
    pub fn new(plc: &Plc, cfg: &RefinementConfig) -> Result<Refiner, RefineError> {
        cfg.validate()?;
        if plc.dim != cfg.dim {
            return Err(ConfigError::Invalid(format!(
                "configuration is for {:?} but the PLC is {:?}",
                cfg.dim, plc.dim
            ))
            .into());
        }
        plc.validate()?;
        let pre = if cfg.preprocess {
            preprocess_plc(plc, cfg)
        } else {
            Preprocessed::identity(plc)
        };
        let plc = pre.plc.clone();
        let (mesh, ids) = bootstrap_mesh(&plc)?;
        let features = FeatureSet::build(&plc);
        let bnd = Boundary::new(&plc, features, &mesh, &ids);
        let seg_work = bnd.live_subsegments().collect();
        let facet_work = bnd.live_subfacets().collect();
        let mut r = Refiner {
            cfg: cfg.clone(),
            scale: plc.diameter().max(f64::MIN_POSITIVE),
            plc,
            pre,
            mesh,
            bnd,
            labels: Vec::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            pending: Vec::new(),
            all_pending: true,
            seg_work,
            facet_work,
            log: EventLog::new(cfg.clone()),
            driver: None,
            round: None,
        };
        r.restore_conformity()?;
        let cells: Vec<CellId> = r.mesh.cell_ids().filter(|&c| !r.mesh.touches_scaffold(c)).collect();
        let mut l0 = f64::INFINITY;
        for c in cells {
            if r.label(c) == Label::Interior {
                l0 = l0.min(quality::shortest_edge(&r.mesh.cell_points(c)));
            }
        }
        r.log.l0 = if l0.is_finite() { l0 } else { r.scale };
        r.flush()?;
        Ok(r)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn config(&self) -> &RefinementConfig {
        &self.cfg
    }

    pub fn events(&self) -> &EventLog {
        &self.log
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    /// Runs until the queue is exhausted.
    pub fn run(&mut self) -> Result<(), RefineError> {
        loop {
            self.flush()?;
            let progressed = match self.cfg.insertion {
                InsertionMode::Single => match self.pop_fresh() {
                    Some(item) => {
                        self.process_single(item)?;
                        true
                    }
                    None => false,
                },
                InsertionMode::Multi => self.multi_insert_round()?,
            };
            if !progressed {
                break;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> RefineOutput {
        let mut r = self;
        let cells: Vec<CellId> = r.mesh.cell_ids().collect();
        let mut elements = Vec::new();
        for c in cells {
            if !r.mesh.touches_scaffold(c) && r.label(c) == Label::Interior {
                elements.push(r.mesh.cell_vertices(c).to_vec());
            }
        }
        let subsegments = r
            .bnd
            .live_subsegments()
            .map(|k| (r.bnd.subsegs[k].segment, r.bnd.subsegs[k].v))
            .collect();
        let subfacets = r
            .bnd
            .live_subfacets()
            .map(|k| (r.bnd.subfacets[k].facet, r.bnd.subfacets[k].v))
            .collect();
        RefineOutput {
            mesh: r.mesh,
            plc: r.plc,
            features: r.bnd.features,
            elements,
            events: r.log,
            preprocess: r.pre,
            subsegments,
            subfacets,
        }
    }

    fn check_cap(&self) -> Result<(), RefineError> {
        let n = self.log.insertions();
        if n > self.cfg.max_insertions {
            return Err(RefineError::InsertionCap {
                cap: self.cfg.max_insertions,
                events: self.log.events.len(),
            });
        }
        Ok(())
    }

    // ---- labels -------------------------------------------------------

    fn stored_label(&self, c: CellId) -> Option<Label> {
        match self.labels.get(c) {
            Some(&(born, l)) if self.mesh.is_alive(c) && born == self.mesh.born(c) => l,
            _ => None,
        }
    }

    fn set_label(&mut self, c: CellId, l: Label) {
        if self.labels.len() <= c {
            self.labels.resize(c + 1, (u64::MAX, None));
        }
        self.labels[c] = (self.mesh.born(c), Some(l));
    }

    /// Interior/exterior label of a cell, resolving unlabeled cells by a
    /// flood fill that never crosses boundary faces. Only meaningful while
    /// the mesh conforms to the boundary.
    fn label(&mut self, c0: CellId) -> Label {
        if let Some(l) = self.stored_label(c0) {
            return l;
        }
        let mut comp = vec![c0];
        let mut seen = HashSet::from([c0]);
        let mut found = None;
        let mut i = 0;
        while i < comp.len() {
            let c = comp[i];
            i += 1;
            if self.mesh.touches_scaffold(c) {
                found.get_or_insert(Label::Exterior);
            }
            let vs = self.mesh.cell_vertices(c).to_vec();
            let nb = self.mesh.cell_neighbors(c).to_vec();
            for k in 0..vs.len() {
                let n = nb[k];
                if n == NONE {
                    found.get_or_insert(Label::Exterior);
                    continue;
                }
                if seen.contains(&n) {
                    continue;
                }
                let fv: Vec<VertexId> = (0..vs.len()).filter(|&j| j != k).map(|j| vs[j]).collect();
                if self.bnd.is_boundary_face(&fv, &self.mesh) {
                    continue;
                }
                if let Some(l) = self.stored_label(n) {
                    found.get_or_insert(l);
                    continue;
                }
                seen.insert(n);
                comp.push(n);
            }
        }
        let label = found.unwrap_or_else(|| {
            let in_hole = self
                .plc
                .holes
                .iter()
                .filter_map(|h| self.mesh.locate(h))
                .any(|c| seen.contains(&c));
            if in_hole {
                Label::Exterior
            } else {
                Label::Interior
            }
        });
        for c in comp {
            self.set_label(c, label);
        }
        label
    }

    // ---- queue --------------------------------------------------------

    fn stage_of(&self, l_eff: f64) -> i32 {
        let x = (l_eff / self.log.l0).ln() / self.cfg.alpha.ln();
        (x + 1e-9).floor() as i32
    }

    /// Smallest half-size of the boundary pieces an element's circumcenter
    /// encroaches.
    fn probe_l_mid(&self, q: &QualityMeasures) -> Option<f64> {
        if !q.circumradius.is_finite() {
            return None;
        }
        self.bnd
            .encroached_by(&q.circumcenter)
            .into_iter()
            .map(|sf| self.bnd.ball(sf, &self.mesh).1)
            .min_by(|a, b| a.total_cmp(b))
    }

    fn consider(&mut self, c: CellId) {
        if !self.mesh.is_alive(c) || self.mesh.touches_scaffold(c) || self.label(c) != Label::Interior {
            return;
        }
        let pts = self.mesh.cell_points(c);
        let q = quality::measure_or_degenerate(&pts);
        if quality::classify(&q, &self.cfg) == Class::Good {
            return;
        }
        let l_eff = quality::queue_key(q.shortest_edge, self.probe_l_mid(&q), self.cfg.alpha);
        self.push(c, q.shortest_edge, l_eff);
    }

    fn push(&mut self, cell: CellId, l_min: f64, l_eff: f64) {
        self.seq += 1;
        let prio = match self.cfg.ordering {
            Ordering::ShortestFirst => l_eff,
            Ordering::Fifo => self.seq as f64,
        };
        self.queue.push(Reverse(WorkItem {
            cell,
            l_min,
            l_eff,
            born: self.mesh.born(cell),
            seq: self.seq,
            prio,
        }));
    }

    fn requeue(&mut self, item: &WorkItem) {
        if self.mesh.is_alive(item.cell) && self.mesh.born(item.cell) == item.born {
            self.push(item.cell, item.l_min, item.l_eff);
        }
    }

    /// Restores conformity, labels new cells and queues the poor ones.
    fn flush(&mut self) -> Result<(), RefineError> {
        self.restore_conformity()?;
        let mut cells = std::mem::take(&mut self.pending);
        if std::mem::take(&mut self.all_pending) {
            cells = self.mesh.cell_ids().collect();
        }
        cells.sort_unstable();
        cells.dedup();
        for c in cells {
            self.consider(c);
        }
        Ok(())
    }

    /// Next live work item, or `None` when the queue is exhausted.
    pub fn pop_fresh(&mut self) -> Option<WorkItem> {
        while let Some(Reverse(item)) = self.queue.pop() {
            if self.mesh.is_alive(item.cell) && self.mesh.born(item.cell) == item.born {
                let stage = self.stage_of(item.l_eff);
                self.log.note_pop(stage, item.l_eff);
                return Some(item);
            }
        }
        None
    }

    pub(crate) fn element(&self, item: &WorkItem) -> Element {
        let c = item.cell;
        let vs = self.mesh.cell_vertices(c).to_vec();
        let pts = self.mesh.cell_points(c);
        let q = quality::measure_or_degenerate(&pts);
        let class = quality::classify(&q, &self.cfg);
        let (edge, l_min) = shortest_edge_ids(&vs, &pts);
        Element {
            cell: c,
            vs,
            pts,
            q,
            class,
            edge,
            l_min,
            l_eff: item.l_eff,
            stage: self.stage_of(item.l_eff),
        }
    }

    fn set_driver(&mut self, e: &Element) {
        self.driver = Some(Driver {
            l_min: e.l_min,
            l_eff: e.l_eff,
            stage: e.stage,
            element: e.vs.clone(),
            edge: e.edge,
        });
    }

    // ---- placement ----------------------------------------------------

    fn smallest_facet(&self, e: &Element) -> ([VertexId; 3], [Point; 3], Point) {
        let ids = [e.vs[0], e.vs[1], e.vs[2], e.vs[3]];
        let pts = [e.pts[0], e.pts[1], e.pts[2], e.pts[3]];
        let f = quality::smallest_facet(ids, &pts);
        let fp = f.map(|v| *self.mesh.point(v));
        let apex = e.vs.iter().find(|v| !f.contains(v)).map(|&v| *self.mesh.point(v)).unwrap();
        (f, fp, apex)
    }

    /// Builds the placement problem for an element and a feasible region.
    pub(crate) fn problem(&self, e: &Element, feasible: Region, extra_sites: &[Point]) -> Option<PlacementProblem> {
        let (b, rb) = feasible.bounding_ball()?;
        let u = e
            .pts
            .iter()
            .map(|p| geom::dist(&b, p) + rb)
            .fold(f64::INFINITY, f64::min);
        let mut sites: Vec<Point> = vertices_in_ball(&self.mesh, &b, rb + u, false)
            .into_iter()
            .map(|v| *self.mesh.point(v))
            .collect();
        sites.extend_from_slice(extra_sites);
        let mut avoid = Vec::new();
        if self.cfg.dim == Dim::Three {
            avoid = self.forbidden_near(&b, rb, e.l_min);
        }
        let mut p = PlacementProblem {
            dim: self.cfg.dim,
            sites,
            feasible,
            avoid,
            objective: Objective::MinDistance,
            weight_planes: Vec::new(),
        };
        if self.cfg.placement == PlacementMode::Angle {
            p.weight_planes = self.weight_planes(&b, rb, e.l_min, &p.avoid);
            if !p.weight_planes.is_empty() {
                p.objective = Objective::WeightedPlaneDistance;
            }
        }
        Some(p)
    }

    fn forbidden_near(&self, b: &Point, rb: f64, l_min: f64) -> Vec<ForbiddenRegion> {
        let reach = rb + 2.0 * self.cfg.rho_star * self.cfg.small_sliver_factor * l_min;
        let cells = cells_near_ball(&self.mesh, b, reach);
        let mut tris: BTreeSet<[usize; 3]> = BTreeSet::new();
        match self.cfg.forbidden_bases {
            ForbiddenBases::MeshFaces => {
                for c in cells {
                    let vs = self.mesh.cell_vertices(c);
                    if vs.iter().any(|&v| self.mesh.is_scaffold(v)) {
                        continue;
                    }
                    for k in 0..4 {
                        let mut t = [0usize; 3];
                        let mut j = 0;
                        for (i, &v) in vs.iter().enumerate() {
                            if i != k {
                                t[j] = v;
                                j += 1;
                            }
                        }
                        t.sort_unstable();
                        tris.insert(t);
                    }
                }
            }
            ForbiddenBases::AllTriples => {
                let vs: Vec<VertexId> = vertices_in_ball(&self.mesh, b, reach, false);
                for i in 0..vs.len() {
                    for j in i + 1..vs.len() {
                        for k in j + 1..vs.len() {
                            tris.insert([vs[i], vs[j], vs[k]]);
                        }
                    }
                }
            }
        }
        regions::enumerate_forbidden(tris, |v| *self.mesh.point(v), (*b, rb), l_min, &self.cfg)
    }

    fn weight_planes(&self, b: &Point, rb: f64, l_min: f64, avoid: &[ForbiddenRegion]) -> Vec<WeightPlane> {
        if self.cfg.dim == Dim::Three {
            return avoid
                .iter()
                .map(|f| {
                    let area = geom::triangle_area(&f.base[0], &f.base[1], &f.base[2]);
                    WeightPlane::through(&f.base[0], f.circle.normal, area)
                })
                .collect();
        }
        let limit = self.cfg.small_sliver_factor * l_min;
        let mut edges: BTreeSet<(VertexId, VertexId)> = BTreeSet::new();
        for c in cells_near_ball(&self.mesh, b, rb + limit) {
            let vs = self.mesh.cell_vertices(c);
            for i in 0..3 {
                let (a, d) = (vs[i], vs[(i + 1) % 3]);
                if !self.mesh.is_scaffold(a) && !self.mesh.is_scaffold(d) {
                    edges.insert((a.min(d), a.max(d)));
                }
            }
        }
        edges
            .into_iter()
            .filter_map(|(a, d)| {
                let (pa, pd) = (self.mesh.point(a), self.mesh.point(d));
                let len = geom::dist(pa, pd);
                if !(len < limit) || geom::point_segment(b, pa, pd).0 > rb + len {
                    return None;
                }
                let e = geom::sub(pd, pa);
                let n = geom::normalize(&[-e[1], e[0], 0.0])?;
                Some(WeightPlane::through(pa, n, len))
            })
            .collect()
    }

    fn circumcenter_placement(e: &Element, kind: EventKind) -> Placement {
        Placement {
            point: e.q.circumcenter,
            kind,
            candidate: None,
            problem: None,
        }
    }

    /// Feasible regions to try, in order, each with the event kind it yields.
    fn attempts(&self, e: &Element) -> Vec<(Primitive, EventKind)> {
        let mut out = Vec::new();
        // optima sit on the region boundary, where the new element's ratio
        // is exactly the target; keep rounding on the good side
        let rho = self.cfg.rho_star * (1.0 - 1e-9);
        if self.cfg.dim == Dim::Two {
            let apex = e.vs.iter().position(|v| !e.edge.contains(v)).unwrap();
            let edge = [*self.mesh.point(e.edge[0]), *self.mesh.point(e.edge[1])];
            if let Ok(p) = regions::petal(edge, rho, &e.pts[apex]) {
                out.push((p, EventKind::Steiner));
            }
            return out;
        }
        let (_, fp, apex) = self.smallest_facet(e);
        if let Ok(Some(g)) = regions::snow_globe(&fp, &apex, rho) {
            out.push((g, EventKind::Steiner));
            if let Ok(c) = regions::circumcircle(&fp) {
                let h = geom::dot(&c.normal, &geom::sub(&apex, &c.center));
                let mirror = geom::axpy(&apex, -2.0 * h, &c.normal);
                if let Ok(Some(g2)) = regions::snow_globe(&fp, &mirror, rho) {
                    out.push((g2, EventKind::Steiner));
                }
            }
        }
        if let Ok(t) = regions::spindle_torus(&fp, rho) {
            out.push((Primitive::InsideSpindleTorus(t), EventKind::Spindle));
        }
        out
    }

    /// Chooses the Steiner point for a poor element. `extra_sites` are
    /// co-inserted candidates; `extra` constrains the feasible region further.
    pub(crate) fn place(&self, e: &Element, extra_sites: &[Point], extra: &[Primitive]) -> Placement {
        if self.cfg.placement == PlacementMode::Circumcenter {
            return Self::circumcenter_placement(e, EventKind::Circumcenter);
        }
        let picking = match regions::picking_region(&e.q, &self.cfg) {
            Ok(p) => p,
            Err(_) if e.class == Class::Sliver => return Self::circumcenter_placement(e, EventKind::FallbackSliver),
            Err(_) => return Self::circumcenter_placement(e, EventKind::Circumcenter),
        };
        for (prim, kind) in self.attempts(e) {
            let mut feasible = Region::new(vec![picking.clone(), prim]);
            feasible.constraints.extend(extra.iter().cloned());
            let Some(problem) = self.problem(e, feasible, extra_sites) else {
                continue;
            };
            match optimizer::solve(&problem) {
                Ok(c) => {
                    let kind = if c.fallback { EventKind::FallbackSliver } else { kind };
                    return Placement {
                        point: c.point,
                        kind,
                        candidate: Some(c),
                        problem: Some(problem),
                    };
                }
                Err(OptimizerError::FeasibleEmpty) | Err(OptimizerError::NoSites) | Err(OptimizerError::NoWeightPlanes) => {}
            }
        }
        Self::circumcenter_placement(e, EventKind::Circumcenter)
    }

    /// Boundary pieces a tentative vertex for `e` would encroach, including
    /// the piece crossed on the way out of the domain.
    pub(crate) fn encroachment(&mut self, e: &Element, p: &Point) -> Vec<SubFeature> {
        let enc = self.bnd.encroached_by(p);
        if !enc.is_empty() {
            return enc;
        }
        if let Some(c) = self.mesh.locate(p) {
            if !self.mesh.touches_scaffold(c) && self.label(c) == Label::Interior {
                return Vec::new();
            }
        }
        let from = geom::centroid(&e.pts);
        self.crossing(e.cell, &from, p).into_iter().collect()
    }

    /// First boundary piece crossed by the segment `from -> to`, where
    /// `from` lies in cell `c0`.
    fn crossing(&self, c0: CellId, from: &Point, to: &Point) -> Option<SubFeature> {
        let n = self.cfg.dim.arity();
        let dir = geom::sub(to, from);
        let mut c = c0;
        let mut t_cur = 0.0f64;
        for _ in 0..1_000_000 {
            let vs = self.mesh.cell_vertices(c).to_vec();
            let pts = self.mesh.cell_points(c);
            let mut exit: Option<(f64, usize)> = None;
            for i in 0..n {
                let mut a = pts.clone();
                a[i] = *from;
                let s0 = signed_measure(&a);
                a[i] = *to;
                let s1 = signed_measure(&a);
                if s1 >= 0.0 || s0 <= s1 {
                    continue;
                }
                let t = s0 / (s0 - s1);
                if t < t_cur - 1e-12 {
                    continue;
                }
                if exit.map_or(true, |(bt, _)| t < bt) {
                    exit = Some((t, i));
                }
            }
            let Some((t, i)) = exit else {
                return None;
            };
            if t >= 1.0 {
                return None;
            }
            let fv: Vec<VertexId> = (0..n).filter(|&j| j != i).map(|j| vs[j]).collect();
            if self.bnd.is_boundary_face(&fv, &self.mesh) {
                let x = geom::axpy(from, t, &dir);
                return self.bnd.subfeature_at(&x, &self.mesh);
            }
            let nb = self.mesh.cell_neighbors(c)[i];
            if nb == NONE {
                return None;
            }
            c = nb;
            t_cur = t;
        }
        None
    }

    // ---- processing ---------------------------------------------------

    /// Handles one poor element: places its vertex, or splits the boundary
    /// when the vertex would encroach it.
    pub fn process_single(&mut self, item: WorkItem) -> Result<Action, RefineError> {
        if !(self.mesh.is_alive(item.cell) && self.mesh.born(item.cell) == item.born) {
            return Ok(Action::Skipped);
        }
        let e = self.element(&item);
        if e.class == Class::Good {
            return Ok(Action::Skipped);
        }
        self.set_driver(&e);
        let placement = self.place(&e, &[], &[]);
        let enc = self.encroachment(&e, &placement.point);
        let action = if enc.is_empty() {
            let v = self.insert_free(&e, &placement)?;
            Action::Inserted {
                vertex: v,
                kind: placement.kind,
            }
        } else {
            let (sf, v) = self.handle_encroachment(&e, &enc)?;
            self.requeue(&item);
            Action::Boundary { feature: sf, vertex: v }
        };
        self.driver = None;
        self.check_cap()?;
        Ok(action)
    }

    /// Inserts a free Steiner vertex for element `e` and logs it.
    pub(crate) fn insert_free(&mut self, e: &Element, pl: &Placement) -> Result<VertexId, RefineError> {
        let out = self.mesh.insert_vertex(pl.point, Provenance::FreeSteiner)?;
        let v = out.vertex;
        let mut ev = self.event(pl.kind, v, pl.point);
        ev.min_distance = Some(self.nearest_neighbor(v));
        ev.driving_distance = Some(
            e.edge
                .iter()
                .map(|&u| geom::dist(self.mesh.point(u), &pl.point))
                .fold(f64::INFINITY, f64::min),
        );
        if let Some(c) = &pl.candidate {
            ev.active = c.active_set.iter().map(|g| format!("{g:?}")).collect();
        }
        self.log.note_insertion(e.stage);
        self.log.events.push(ev);
        self.after_insert(&out);
        Ok(v)
    }

    fn nearest_neighbor(&self, v: VertexId) -> f64 {
        let p = self.mesh.point(v);
        self.mesh
            .vertex_neighbors(v)
            .into_iter()
            .filter(|&u| !self.mesh.is_scaffold(u))
            .map(|u| geom::dist(p, self.mesh.point(u)))
            .fold(f64::INFINITY, f64::min)
    }

    fn event(&self, kind: EventKind, v: VertexId, p: Point) -> InsertionEvent {
        let mut ev = InsertionEvent::new(self.log.events.len(), kind, v, p);
        if let Some(d) = &self.driver {
            ev.driving_l_min = Some(d.l_min);
            ev.l_eff = Some(d.l_eff);
            ev.stage = Some(d.stage);
            ev.element = d.element.clone();
            ev.driving_edge = Some(d.edge);
        }
        ev.round = self.round;
        ev
    }

    fn after_insert(&mut self, out: &InsertOutcome) {
        self.pending.extend_from_slice(&out.created);
        let p = *self.mesh.point(out.vertex);
        for sf in self.bnd.near(&p) {
            self.schedule(sf);
        }
    }

    fn schedule(&mut self, sf: SubFeature) {
        match sf {
            SubFeature::Segment(k) => self.seg_work.push_back(k),
            SubFeature::Facet(k) => self.facet_work.push_back(k),
        }
    }

    /// Half-size of a boundary piece: half a subsegment, or a subfacet's
    /// circumradius.
    fn l_mid(&self, sf: SubFeature) -> f64 {
        self.bnd.ball(sf, &self.mesh).1
    }

    fn handle_encroachment(&mut self, e: &Element, enc: &[SubFeature]) -> Result<(SubFeature, Option<VertexId>), RefineError> {
        let mut best = enc[0];
        let mut l_eff = f64::INFINITY;
        for &sf in enc {
            let lm = self.l_mid(sf);
            l_eff = l_eff.min(quality::queue_key(e.l_min, Some(lm), self.cfg.alpha));
            let bl = self.l_mid(best);
            if lm < bl || (lm == bl && sf < best) {
                best = sf;
            }
        }
        if let Some(d) = self.driver.as_mut() {
            d.l_eff = l_eff;
        }
        let v = match self.cfg.boundary {
            BoundaryHandling::Front => self.handle_encroachment_front(best, l_eff)?,
            BoundaryHandling::Classic => self.handle_encroachment_classic(best)?,
        };
        Ok((best, v))
    }

    /// Deletes free vertices strictly inside the piece's diametral ball and
    /// splits it at its midpoint or circumcenter.
    pub fn handle_encroachment_classic(&mut self, sf: SubFeature) -> Result<Option<VertexId>, RefineError> {
        match sf {
            SubFeature::Segment(k) => {
                let (c, r) = self.bnd.ball(sf, &self.mesh);
                self.delete_free_in_ball(&c, r)?;
                self.split_subsegment_at(k, c, EventKind::BoundaryMidpoint).map(Some)
            }
            SubFeature::Facet(k) => {
                let (c, r) = self.bnd.subfacets[k].ball;
                if let Some(v) = self.facet_cascade(k, &c)? {
                    return Ok(v);
                }
                self.delete_free_in_ball(&c, r)?;
                self.split_subfacet_at(k, c, EventKind::BoundaryMidpoint).map(Some)
            }
        }
    }

    /// Splits the piece close to its vertex with the smallest adjacent edge:
    /// at distance `gamma l_eff` toward the midpoint or circumcenter, clamped
    /// there. Free vertices strictly inside the ball centered at the new
    /// point through that vertex are deleted first.
    pub fn handle_encroachment_front(&mut self, sf: SubFeature, l_eff: f64) -> Result<Option<VertexId>, RefineError> {
        let (target, l_mid) = self.bnd.ball(sf, &self.mesh);
        if let SubFeature::Facet(k) = sf {
            if let Some(v) = self.facet_cascade(k, &target)? {
                return Ok(v);
            }
        }
        let vs = self.bnd.vertices(sf);
        let v = *vs
            .iter()
            .min_by(|&&a, &&b| {
                self.shortest_adjacent(a)
                    .total_cmp(&self.shortest_adjacent(b))
                    .then(a.cmp(&b))
            })
            .unwrap();
        let pv = *self.mesh.point(v);
        let d = self.cfg.gamma * l_eff;
        let (m, kind) = if d >= l_mid * (1.0 - 1e-12) {
            (target, EventKind::BoundaryMidpoint)
        } else {
            let dir = geom::scale(&geom::sub(&target, &pv), 1.0 / geom::dist(&target, &pv));
            (geom::axpy(&pv, d, &dir), EventKind::BoundaryFront)
        };
        let radius = geom::dist(&m, &pv);
        match sf {
            SubFeature::Segment(k) => {
                self.delete_free_in_ball(&m, radius)?;
                self.split_subsegment_at(k, m, kind).map(Some)
            }
            SubFeature::Facet(k) => {
                if kind == EventKind::BoundaryFront {
                    if let Some(v) = self.facet_cascade(k, &m)? {
                        return Ok(v);
                    }
                }
                self.delete_free_in_ball(&m, radius)?;
                self.split_subfacet_at(k, m, kind).map(Some)
            }
        }
    }

    /// If inserting `x` into subfacet `k` would leave the facet or encroach
    /// a subsegment, splits those subsegments instead and returns
    /// `Some(last inserted vertex)`.
    fn facet_cascade(&mut self, k: usize, x: &Point) -> Result<Option<Option<VertexId>>, RefineError> {
        let f = self.bnd.subfacets[k].facet;
        let mut segs: Vec<usize> = self
            .bnd
            .encroached_by(x)
            .into_iter()
            .filter_map(|sf| match sf {
                SubFeature::Segment(s) => Some(s),
                _ => None,
            })
            .collect();
        let inside = self.bnd.features.facets[f].contains(x, &self.bnd.plc_points, self.bnd.tol);
        if segs.is_empty() && !inside {
            if let Some(s) = self.facet_exit_subsegment(k, x) {
                segs.push(s);
            }
        }
        if segs.is_empty() {
            return Ok(None);
        }
        self.facet_work.push_back(k);
        let mut last = None;
        for s in segs {
            if self.bnd.subsegs[s].alive {
                last = self.handle_encroachment_classic(SubFeature::Segment(s))?;
            }
        }
        Ok(Some(last))
    }

    /// The facet subsegment crossed going from subfacet `k` toward `x`, or
    /// the nearest one.
    fn facet_exit_subsegment(&self, k: usize, x: &Point) -> Option<usize> {
        let sfct = &self.bnd.subfacets[k];
        let facet = &self.bnd.features.facets[sfct.facet];
        let pts: Vec<Point> = sfct.v.iter().map(|&v| *self.mesh.point(v)).collect();
        let g = facet.to_local(&geom::centroid(&pts));
        let xl = facet.to_local(x);
        let mut best: Option<(f64, usize)> = None;
        let mut nearest: Option<(f64, usize)> = None;
        for s in self.bnd.facet_subsegments(sfct.facet) {
            let [a, b] = self.bnd.subsegs[s].v;
            let (pa, pb) = (self.mesh.point(a), self.mesh.point(b));
            let d = geom::point_segment(x, pa, pb).0;
            if nearest.map_or(true, |(nd, _)| d < nd) {
                nearest = Some((d, s));
            }
            let (al, bl) = (facet.to_local(pa), facet.to_local(pb));
            if let Some(t) = seg_intersect(g, xl, al, bl) {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, s));
                }
            }
        }
        best.or(nearest).map(|(_, s)| s)
    }

    fn shortest_adjacent(&self, v: VertexId) -> f64 {
        self.nearest_neighbor(v)
    }

    fn delete_free_in_ball(&mut self, c: &Point, r: f64) -> Result<usize, RefineError> {
        let victims: Vec<VertexId> = vertices_in_ball(&self.mesh, c, r, true)
            .into_iter()
            .filter(|&v| self.mesh.vertex(v).provenance == Provenance::FreeSteiner)
            .collect();
        for &v in &victims {
            let p = *self.mesh.point(v);
            let out = self.mesh.delete_vertex(v)?;
            let ev = self.event(EventKind::Delete, v, p);
            self.log.events.push(ev);
            if out.rebuilt {
                self.all_pending = true;
            } else {
                self.pending.extend_from_slice(&out.created);
            }
        }
        Ok(victims.len())
    }

    fn insert_boundary(&mut self, p: Point, kind: EventKind, feature: FeatureRef) -> Result<InsertOutcome, RefineError> {
        let out = self.mesh.insert_vertex(p, Provenance::BoundarySteiner)?;
        self.mesh.set_incident_feature(out.vertex, Some(feature));
        let mut ev = self.event(kind, out.vertex, p);
        ev.feature = Some(feature);
        ev.min_distance = Some(self.nearest_neighbor(out.vertex));
        if let Some(d) = &self.driver {
            self.log.note_insertion(d.stage);
        }
        self.log.events.push(ev);
        Ok(out)
    }

    fn split_subsegment_at(&mut self, k: usize, p: Point, kind: EventKind) -> Result<VertexId, RefineError> {
        let seg = self.bnd.subsegs[k].segment;
        let out = self.insert_boundary(p, kind, FeatureRef::Segment(seg))?;
        let created = self.bnd.split_subsegment(k, out.vertex, &self.mesh)?;
        for sf in created {
            self.schedule(sf);
        }
        self.after_insert(&out);
        self.check_cap()?;
        Ok(out.vertex)
    }

    fn split_subfacet_at(&mut self, k: usize, p: Point, kind: EventKind) -> Result<VertexId, RefineError> {
        let f = self.bnd.subfacets[k].facet;
        let out = self.insert_boundary(p, kind, FeatureRef::Facet(f))?;
        let created = self.bnd.split_facet(f, out.vertex, &self.mesh)?;
        for sf in created {
            self.schedule(sf);
        }
        self.after_insert(&out);
        self.check_cap()?;
        Ok(out.vertex)
    }

    /// True if the piece is a mesh face and no vertex lies strictly inside
    /// its diametral ball.
    fn conforms(&self, sf: SubFeature) -> bool {
        let (c, r) = self.bnd.ball(sf, &self.mesh);
        let own = self.bnd.vertices(sf);
        if vertices_in_ball(&self.mesh, &c, r, true)
            .iter()
            .any(|v| !own.contains(v))
        {
            return false;
        }
        match sf {
            SubFeature::Segment(_) => edge_present(&self.mesh, own[0], own[1]),
            SubFeature::Facet(_) => face_present(&self.mesh, &own),
        }
    }

    /// Splits encroached or missing boundary pieces (subsegments first)
    /// until the mesh conforms.
    fn restore_conformity(&mut self) -> Result<(), RefineError> {
        let saved = self.driver.take();
        let result = (|| {
            loop {
                let sf = if let Some(k) = self.seg_work.pop_front() {
                    SubFeature::Segment(k)
                } else if let Some(k) = self.facet_work.pop_front() {
                    SubFeature::Facet(k)
                } else {
                    break;
                };
                if !self.bnd.alive(sf) || self.conforms(sf) {
                    continue;
                }
                self.handle_encroachment_classic(sf)?;
            }
            Ok(())
        })();
        self.driver = saved;
        result
    }
}

/// Parameter along `p -> q` where it crosses segment `a b` (2D), if it does.
fn seg_intersect(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let w = [a[0] - p[0], a[1] - p[1]];
    let t = (w[0] * s[1] - w[1] * s[0]) / den;
    let u = (w[0] * r[1] - w[1] * r[0]) / den;
    if (0.0..=1.0).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
        Some(t)
    } else {
        None
    }
}
