//! Audits over a finished run and its event log.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::checks::{conformity_violations, quality_summary, verify_delaunay, QualitySummary};
use super::lfs::LfsField;
use crate::geom;
use crate::plc::Plc;
use crate::quality::{BoundaryHandling, PlacementMode, RefinementConfig};
use crate::refiner::{refine, EventKind, EventLog, RefineOutput, StageSummary};
use crate::triangulation::{Mesh, Provenance, VertexId};
use crate::{AnalysisError, Dim, RefineError};

/// Relative slack on distance comparisons against the event log.
pub const AUDIT_REL_TOL: f64 = 1e-9;

/// Events too close to existing vertices, or outside the front band.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontAudit {
    pub events_checked: usize,
    /// Sequence numbers of events with `min_distance < alpha * l_min`.
    pub distance_violations: Vec<usize>,
    /// Steiner events whose distance to the driving edge falls outside
    /// `[alpha * l_min, beta * l_min]`.
    pub band_violations: Vec<usize>,
    /// Rounds whose relocation spacing went down between passes.
    pub relocation_violations: Vec<usize>,
    /// Smallest `min_distance / (alpha * l_min)` seen.
    pub min_distance_ratio: f64,
    /// Events inserted in a lower stage than an earlier event.
    pub stage_regressions: usize,
}

impl FrontAudit {
    pub fn violations(&self) -> usize {
        self.distance_violations.len() + self.band_violations.len() + self.relocation_violations.len()
    }
}

fn below(x: f64, bound: f64) -> bool {
    x < bound * (1.0 - AUDIT_REL_TOL)
}

pub fn front_audit(log: &EventLog, cfg: &RefinementConfig) -> FrontAudit {
    let mut a = FrontAudit {
        min_distance_ratio: f64::INFINITY,
        ..Default::default()
    };
    let mut top_stage = i32::MIN;
    for e in &log.events {
        if !matches!(e.kind, EventKind::Steiner | EventKind::Spindle) {
            continue;
        }
        let (Some(l), Some(d)) = (e.driving_l_min, e.min_distance) else {
            continue;
        };
        a.events_checked += 1;
        a.min_distance_ratio = a.min_distance_ratio.min(d / (cfg.alpha * l));
        if below(d, cfg.alpha * l) {
            a.distance_violations.push(e.seq);
        }
        if e.kind == EventKind::Steiner {
            if let Some(dd) = e.driving_distance {
                if below(dd, cfg.alpha * l) || below(cfg.beta * l, dd) {
                    a.band_violations.push(e.seq);
                }
            }
        }
        if let Some(s) = e.stage {
            if s < top_stage {
                a.stage_regressions += 1;
            }
            top_stage = top_stage.max(s);
        }
    }
    for t in &log.relocation {
        if t.spacing.windows(2).any(|w| w[1] < w[0]) {
            a.relocation_violations.push(t.round);
        }
    }
    if !a.min_distance_ratio.is_finite() {
        a.min_distance_ratio = 0.0;
    }
    a
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SizeAudit {
    pub steiner_vertices: usize,
    /// Largest `lfs(v) / r_v`, with `r_v` the shortest edge at `v`.
    pub max_ratio: f64,
    pub worst_vertex: Option<VertexId>,
    /// `1 / (alpha - 1)`.
    pub bound: f64,
    /// `1.5 * bound`, the asserted limit.
    pub limit: f64,
    pub within_limit: bool,
    /// Free insertions compared against the per-stage growth bound.
    pub stage_checked: usize,
    /// Sequence numbers where `lfs(p)` exceeded the per-stage bound.
    pub stage_flagged: Vec<usize>,
}

/// `lfs(v) / r_v` over every live Steiner vertex, and the per-stage bound
/// `lfs(p) <= (beta^(n+1) - 1) / (beta - 1) * l_min` over free insertions,
/// with `n` counted from the first stage of the run.
pub fn size_optimality_audit(
    mesh: &Mesh,
    plc: &Plc,
    cfg: &RefinementConfig,
    log: &EventLog,
) -> Result<SizeAudit, AnalysisError> {
    let lfs = LfsField::new(plc)?;
    let bound = 1.0 / (cfg.alpha - 1.0);
    let mut a = SizeAudit {
        bound,
        limit: 1.5 * bound,
        ..Default::default()
    };
    for v in mesh.vertex_ids() {
        let prov = mesh.vertex(v).provenance;
        if !matches!(prov, Provenance::FreeSteiner | Provenance::BoundarySteiner) {
            continue;
        }
        let p = mesh.point(v);
        let r = mesh
            .vertex_neighbors(v)
            .into_iter()
            .filter(|&u| !mesh.is_scaffold(u))
            .map(|u| geom::dist(p, mesh.point(u)))
            .fold(f64::INFINITY, f64::min);
        if !r.is_finite() || r <= 0.0 {
            continue;
        }
        a.steiner_vertices += 1;
        let ratio = lfs.at(p) / r;
        if ratio > a.max_ratio {
            a.max_ratio = ratio;
            a.worst_vertex = Some(v);
        }
    }
    a.within_limit = a.max_ratio <= a.limit;
    let first = log.events.iter().filter_map(|e| e.stage).min().unwrap_or(0);
    let b = cfg.beta;
    for e in &log.events {
        if !matches!(e.kind, EventKind::Steiner | EventKind::Spindle) {
            continue;
        }
        let (Some(s), Some(l)) = (e.stage, e.driving_l_min) else {
            continue;
        };
        let n = (s - first) as f64;
        let cap = (b.powf(n + 1.0) - 1.0) / (b - 1.0) * l;
        a.stage_checked += 1;
        if lfs.at(&e.point) > cap * (1.0 + AUDIT_REL_TOL) {
            a.stage_flagged.push(e.seq);
        }
    }
    Ok(a)
}

/// Free insertions charged to each driving shortest edge.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChargeCounts {
    pub edges: usize,
    pub charged: usize,
    pub max_per_edge: usize,
    pub mean_per_edge: f64,
    /// `(charges, number of edges with that many)`.
    pub histogram: Vec<(usize, usize)>,
}

pub fn charge_counts(log: &EventLog) -> ChargeCounts {
    let mut per: BTreeMap<[VertexId; 2], usize> = BTreeMap::new();
    for e in &log.events {
        let free = matches!(
            e.kind,
            EventKind::Steiner | EventKind::Spindle | EventKind::FallbackSliver | EventKind::Circumcenter
        );
        if let (true, Some(mut edge)) = (free, e.driving_edge) {
            edge.sort_unstable();
            *per.entry(edge).or_insert(0) += 1;
        }
    }
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for &n in per.values() {
        *hist.entry(n).or_insert(0) += 1;
    }
    let charged: usize = per.values().sum();
    ChargeCounts {
        edges: per.len(),
        charged,
        max_per_edge: per.values().copied().max().unwrap_or(0),
        mean_per_edge: if per.is_empty() { 0.0 } else { charged as f64 / per.len() as f64 },
        histogram: hist.into_iter().collect(),
    }
}

/// `cfg` with circumcenter placement; queue, boundary handling and
/// preprocessing are unchanged.
pub fn baseline_config(cfg: &RefinementConfig) -> RefinementConfig {
    RefinementConfig {
        placement: PlacementMode::Circumcenter,
        ..cfg.clone()
    }
}

/// Circumcenter placement with midpoint boundary splits and no
/// preprocessing: the textbook refiner.
pub fn classic_baseline_config(cfg: &RefinementConfig) -> RefinementConfig {
    RefinementConfig {
        boundary: BoundaryHandling::Classic,
        preprocess: false,
        ..baseline_config(cfg)
    }
}

pub fn baseline_circumcenter_refine(plc: &Plc, cfg: &RefinementConfig) -> Result<RefineOutput, RefineError> {
    refine(plc, &baseline_config(cfg))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub vertices: usize,
    pub baseline_vertices: usize,
    /// `vertices / baseline_vertices`.
    pub ratio: f64,
    pub charges: ChargeCounts,
    pub baseline_charges: ChargeCounts,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    /// Also run the circumcenter baseline.
    pub baseline: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dim: Dim,
    pub vertices: usize,
    pub steiner_vertices: usize,
    pub elements: usize,
    pub insertions: usize,
    pub delaunay_violations: usize,
    pub conformity_violations: Vec<String>,
    pub quality: QualitySummary,
    pub front: FrontAudit,
    pub size: Option<SizeAudit>,
    /// True when the size limit counts toward `pass`.
    pub size_asserted: bool,
    pub stages: Vec<StageSummary>,
    pub event_counts: BTreeMap<EventKind, usize>,
    /// Fallback events as a fraction of insertions.
    pub fallback_fraction: f64,
    pub charges: ChargeCounts,
    pub preprocess_added: usize,
    pub baseline: Option<BaselineComparison>,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Every check on one run. The size limit is asserted only for preprocessed
/// 2D runs; elsewhere it is reported.
/// `plc` is the input as given to `refine`; the baseline starts from it.
pub fn run_audit(
    plc: &Plc,
    out: &RefineOutput,
    cfg: &RefinementConfig,
    opts: &AuditOptions,
) -> Result<AuditReport, RefineError> {
    let mesh = &out.mesh;
    let log = &out.events;
    let delaunay = verify_delaunay(mesh).len();
    let conformity = conformity_violations(out);
    let quality = quality_summary(out, cfg);
    let front = front_audit(log, cfg);
    let size = size_optimality_audit(mesh, &out.plc, cfg, log).ok();
    let size_asserted = cfg.dim == Dim::Two && cfg.preprocess && size.is_some();
    let mut event_counts = BTreeMap::new();
    for e in &log.events {
        *event_counts.entry(e.kind).or_insert(0) += 1;
    }
    let insertions = log.insertions();
    let fallback = log.count(EventKind::FallbackSliver);
    let charges = charge_counts(log);
    let baseline = if opts.baseline {
        let base = baseline_circumcenter_refine(plc, cfg)?;
        let (n, nb) = (mesh.vertex_count(), base.mesh.vertex_count());
        Some(BaselineComparison {
            vertices: n,
            baseline_vertices: nb,
            ratio: n as f64 / nb.max(1) as f64,
            charges: charges.clone(),
            baseline_charges: charge_counts(&base.events),
        })
    } else {
        None
    };
    let mut failures = Vec::new();
    if delaunay > 0 {
        failures.push(format!("{delaunay} Delaunay violations"));
    }
    if !conformity.is_empty() {
        failures.push(format!("{} conformity violations", conformity.len()));
    }
    if quality.poor > 0 {
        failures.push(format!("{} elements above rho_star", quality.poor));
    }
    if quality.slivers > quality.excused_slivers {
        failures.push(format!("{} slivers not traced to a fallback", quality.slivers - quality.excused_slivers));
    }
    if front.violations() > 0 {
        failures.push(format!("{} front violations", front.violations()));
    }
    if size_asserted {
        if let Some(s) = &size {
            if !s.within_limit {
                failures.push(format!("lfs/r ratio {} exceeds {}", s.max_ratio, s.limit));
            }
        }
    }
    let steiner = mesh
        .vertex_ids()
        .filter(|&v| matches!(mesh.vertex(v).provenance, Provenance::FreeSteiner | Provenance::BoundarySteiner))
        .count();
    Ok(AuditReport {
        dim: cfg.dim,
        vertices: mesh.vertex_count(),
        steiner_vertices: steiner,
        elements: out.elements.len(),
        insertions,
        delaunay_violations: delaunay,
        conformity_violations: conformity,
        quality,
        front,
        size,
        size_asserted,
        stages: log.stages.clone(),
        event_counts,
        fallback_fraction: if insertions == 0 { 0.0 } else { fallback as f64 / insertions as f64 },
        charges,
        preprocess_added: out.preprocess.added.len(),
        baseline,
        pass: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refiner::{InsertionEvent, RelocationTrace};

    fn steiner(seq: usize, l: f64, d: f64, dd: f64) -> InsertionEvent {
        let mut e = InsertionEvent::new(seq, EventKind::Steiner, 10 + seq, [0.0; 3]);
        e.driving_l_min = Some(l);
        e.min_distance = Some(d);
        e.driving_distance = Some(dd);
        e.stage = Some(0);
        e.driving_edge = Some([1, 2]);
        e
    }

    fn log_of(events: Vec<InsertionEvent>) -> (EventLog, RefinementConfig) {
        let cfg = RefinementConfig::default_2d();
        let mut log = EventLog::new(cfg.clone());
        log.events = events;
        (log, cfg)
    }

    #[test]
    fn compliant_log_has_no_violations() {
        let cfg = RefinementConfig::default_2d();
        let (log, _) = log_of(vec![steiner(0, 1.0, cfg.alpha, 1.5), steiner(1, 1.0, 2.0, cfg.beta)]);
        assert_eq!(front_audit(&log, &cfg).violations(), 0);
    }

    #[test]
    fn close_event_is_one_violation() {
        let cfg = RefinementConfig::default_2d();
        let d = 0.9 * cfg.alpha;
        let (log, _) = log_of(vec![steiner(0, 1.0, 1.5, 1.5), steiner(1, 1.0, d, 1.5)]);
        let a = front_audit(&log, &cfg);
        assert_eq!(a.distance_violations, vec![1]);
        assert_eq!(a.violations(), 1);
    }

    #[test]
    fn decreasing_relocation_is_flagged() {
        let (mut log, cfg) = log_of(vec![]);
        log.relocation.push(RelocationTrace {
            round: 0,
            candidates: 2,
            spacing: vec![0.5, 0.6, 0.6],
        });
        log.relocation.push(RelocationTrace {
            round: 1,
            candidates: 2,
            spacing: vec![0.5, 0.4],
        });
        assert_eq!(front_audit(&log, &cfg).relocation_violations, vec![1]);
    }

    #[test]
    fn band_applies_to_steiner_only() {
        let cfg = RefinementConfig::default_2d();
        let mut e = steiner(0, 1.0, 1.5, 10.0);
        let (log, _) = log_of(vec![e.clone()]);
        assert_eq!(front_audit(&log, &cfg).band_violations, vec![0]);
        e.kind = EventKind::Spindle;
        let (log, _) = log_of(vec![e]);
        assert_eq!(front_audit(&log, &cfg).violations(), 0);
    }

    #[test]
    fn charges_group_by_unordered_edge() {
        let mut a = steiner(0, 1.0, 1.5, 1.5);
        let mut b = steiner(1, 1.0, 1.5, 1.5);
        let mut c = steiner(2, 1.0, 1.5, 1.5);
        a.driving_edge = Some([3, 4]);
        b.driving_edge = Some([4, 3]);
        c.driving_edge = Some([5, 6]);
        let (log, _) = log_of(vec![a, b, c]);
        let ch = charge_counts(&log);
        assert_eq!((ch.edges, ch.charged, ch.max_per_edge), (2, 3, 2));
        assert_eq!(ch.histogram, vec![(1, 1), (2, 1)]);
    }

    #[test]
    fn size_bound_for_alpha_1_2() {
        let plc = Plc::new_2d(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1], [1, 2], [2, 3], [3, 0]],
            vec![],
        );
        let cfg = RefinementConfig::default_2d().with_rho_star(2f64.sqrt()).with_alpha(1.2);
        let out = refine(&plc, &cfg).unwrap();
        let a = size_optimality_audit(&out.mesh, &out.plc, &cfg, &out.events).unwrap();
        assert!((a.bound - 5.0).abs() < 1e-12);
        assert!((a.limit - 7.5).abs() < 1e-12);
    }

    #[test]
    fn stage_bound_flags_large_lfs() {
        let plc = Plc::new_2d(
            vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0], [0.0, 10.0, 0.0]],
            vec![[0, 1], [1, 2], [2, 3], [3, 0]],
            vec![],
        );
        let (mesh, _) = crate::refiner::bootstrap_mesh(&plc).unwrap();
        let cfg = RefinementConfig::default_2d();
        let mut e = steiner(0, 0.1, 0.2, 0.2);
        e.point = [5.0, 5.0, 0.0];
        let (log, _) = log_of(vec![e.clone()]);
        let a = size_optimality_audit(&mesh, &plc, &cfg, &log).unwrap();
        assert_eq!(a.stage_flagged, vec![0]);
        e.driving_l_min = Some(10.0);
        let (log, _) = log_of(vec![e]);
        assert!(size_optimality_audit(&mesh, &plc, &cfg, &log).unwrap().stage_flagged.is_empty());
    }
}
