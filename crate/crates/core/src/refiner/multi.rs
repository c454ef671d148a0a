//! Simultaneous insertion: candidates for the next-shortest poor elements
//! are added one at a time and relocated together until adding another
//! would crowd the batch; then all are committed.

use super::{Element, EventKind, Placement, RelocationTrace, Refiner, SubFeature, WorkItem};
use crate::geom;
use crate::optimizer::{self, Candidate, PlacementProblem};
use crate::predicates::Point;
use crate::regions::{Primitive, Region};
use crate::{MeshError, RefineError};

struct Slot {
    item: WorkItem,
    elem: Element,
    feasible: Region,
    cand: Candidate,
    kind: EventKind,
}

/// Smallest distance between two candidates.
fn pairwise_spacing(slots: &[Slot]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..slots.len() {
        for j in i + 1..slots.len() {
            m = m.min(geom::dist(&slots[i].cand.point, &slots[j].cand.point));
        }
    }
    m
}

impl Refiner {
    fn slot_problem(&self, slots: &[Slot], i: usize, cur: &[Candidate], extra: &[Primitive]) -> PlacementProblem {
        let others: Vec<Point> = cur
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, c)| c.point)
            .collect();
        let mut feasible = slots[i].feasible.clone();
        feasible.constraints.extend(extra.iter().cloned());
        self.problem(&slots[i].elem, feasible.clone(), &others).unwrap_or_else(|| {
            let mut p = PlacementProblem::min_distance(self.cfg.dim, others, feasible);
            p.sites.extend(slots[i].elem.pts.iter().copied());
            p
        })
    }

    /// Relocation passes over the batch. Returns the spacing (smallest
    /// candidate objective) before the first pass and after each pass.
    fn relocate_slots(&self, slots: &mut [Slot], extra: &[Primitive]) -> Vec<f64> {
        let mut cur: Vec<Candidate> = slots.iter().map(|s| s.cand.clone()).collect();
        let spacing = |cur: &[Candidate]| {
            (0..cur.len())
                .map(|i| self.slot_problem(slots, i, cur, extra).value(&cur[i].point))
                .fold(f64::INFINITY, f64::min)
        };
        let mut trace = vec![spacing(&cur)];
        if cur.len() > 1 {
            let tol = self.cfg.relocation_tol * self.scale;
            for _ in 0..self.cfg.max_relocation_passes {
                let mut build = |i: usize, c: &[Candidate]| self.slot_problem(slots, i, c, extra);
                let next = optimizer::relocate_round(&cur, &mut build);
                let moved = cur
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| geom::dist(&a.point, &b.point))
                    .fold(0.0, f64::max);
                cur = next;
                trace.push(spacing(&cur));
                if moved <= tol {
                    break;
                }
            }
        }
        for (s, c) in slots.iter_mut().zip(cur) {
            s.cand = c;
        }
        trace
    }

    fn guard_holds(&self, slots: &[Slot]) -> bool {
        let l = slots.iter().map(|s| s.elem.l_min).fold(0.0, f64::max);
        pairwise_spacing(slots) >= self.cfg.alpha * l
    }

    /// One round of simultaneous insertion. Returns false when the queue is
    /// exhausted.
    pub fn multi_insert_round(&mut self) -> Result<bool, RefineError> {
        let round = self.log.relocation.len();
        self.round = Some(round);
        let result = self.multi_round_inner(round);
        self.round = None;
        self.driver = None;
        result
    }

    fn multi_round_inner(&mut self, round: usize) -> Result<bool, RefineError> {
        let mut slots: Vec<Slot> = Vec::new();
        let mut traces: Vec<Vec<f64>> = Vec::new();
        let mut trace: Vec<f64> = Vec::new();
        while slots.len() < self.cfg.batch_cap {
            let Some(item) = self.pop_fresh() else {
                break;
            };
            let elem = self.element(&item);
            if elem.class == crate::quality::Class::Good {
                continue;
            }
            let others: Vec<Point> = slots.iter().map(|s| s.cand.point).collect();
            let pl: Placement = self.place(&elem, &others, &[]);
            let special = pl.candidate.is_none() || pl.kind != EventKind::Steiner;
            if special {
                if slots.is_empty() {
                    self.process_single(item)?;
                    return Ok(true);
                }
                self.requeue(&item);
                break;
            }
            let enc = self.encroachment(&elem, &pl.point);
            if !enc.is_empty() {
                if slots.is_empty() {
                    self.process_single(item)?;
                    return Ok(true);
                }
                // the boundary takes precedence; the rest of the batch is
                // re-placed away from the split piece
                let extra = self.outside_balls(&enc);
                self.set_driver(&elem);
                self.handle_encroachment(&elem, &enc)?;
                self.driver = None;
                self.requeue(&item);
                traces.push(std::mem::take(&mut trace));
                slots = self.resolve_after_boundary(slots, &extra);
                if !slots.is_empty() {
                    trace = self.relocate_slots(&mut slots, &extra);
                }
                break;
            }
            let cand = pl.candidate.clone().unwrap();
            let feasible = pl.problem.as_ref().unwrap().feasible.clone();
            let saved: Vec<Candidate> = slots.iter().map(|s| s.cand.clone()).collect();
            slots.push(Slot {
                item,
                elem,
                feasible,
                cand,
                kind: pl.kind,
            });
            let t = self.relocate_slots(&mut slots, &[]);
            if slots.len() > 1 && !self.guard_holds(&slots) {
                let last = slots.pop().unwrap();
                for (s, c) in slots.iter_mut().zip(saved) {
                    s.cand = c;
                }
                self.requeue(&last.item);
                break;
            }
            trace = t;
        }
        if !trace.is_empty() {
            traces.push(trace);
        }
        for spacing in traces.into_iter().filter(|t| !t.is_empty()) {
            self.log.relocation.push(RelocationTrace {
                round,
                candidates: slots.len(),
                spacing,
            });
        }
        if slots.is_empty() {
            return Ok(!self.queue.is_empty());
        }
        self.commit(slots)?;
        Ok(true)
    }

    fn outside_balls(&self, sfs: &[SubFeature]) -> Vec<Primitive> {
        sfs.iter()
            .map(|&sf| {
                let (center, radius) = self.bnd.ball(sf, &self.mesh);
                Primitive::OutsideSphere { center, radius }
            })
            .collect()
    }

    /// After a boundary split: keeps candidates whose element survived,
    /// re-solving each with the extra constraints. Others are dropped; their
    /// replacement cells get queued by the next flush.
    fn resolve_after_boundary(&mut self, slots: Vec<Slot>, extra: &[Primitive]) -> Vec<Slot> {
        let mut kept: Vec<Slot> = Vec::new();
        for mut s in slots {
            if !(self.mesh.is_alive(s.item.cell) && self.mesh.born(s.item.cell) == s.item.born) {
                continue;
            }
            let cur: Vec<Candidate> = kept.iter().map(|k| k.cand.clone()).chain([s.cand.clone()]).collect();
            kept.push(s);
            let i = kept.len() - 1;
            let problem = self.slot_problem(&kept, i, &cur, extra);
            s = kept.pop().unwrap();
            match optimizer::solve(&problem) {
                Ok(c) if !c.fallback => {
                    s.cand = c;
                    s.feasible.constraints.extend(extra.iter().cloned());
                    kept.push(s);
                    if kept.len() > 1 && !self.guard_holds(&kept) {
                        let last = kept.pop().unwrap();
                        self.requeue(&last.item);
                    }
                }
                _ => self.requeue(&s.item),
            }
        }
        kept
    }

    /// Inserts the batch in order.
    fn commit(&mut self, slots: Vec<Slot>) -> Result<(), RefineError> {
        for s in slots {
            self.set_driver(&s.elem);
            if !self.encroachment(&s.elem, &s.cand.point).is_empty() {
                self.requeue(&s.item);
                continue;
            }
            let pl = Placement {
                point: s.cand.point,
                kind: s.kind,
                candidate: Some(s.cand.clone()),
                problem: None,
            };
            match self.insert_free(&s.elem, &pl) {
                Ok(_) => {}
                Err(RefineError::Mesh(MeshError::Coincident(_))) => self.requeue(&s.item),
                Err(e) => return Err(e),
            }
            self.check_cap()?;
        }
        self.driver = None;
        Ok(())
    }
}
