use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::predicates::Point;
use crate::quality::RefinementConfig;
use crate::triangulation::{FeatureRef, Provenance, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Steiner,
    BoundaryMidpoint,
    BoundaryFront,
    Delete,
    /// Placed without honoring forbidden regions, or a sliver too round for
    /// a picking region, placed at its circumcenter.
    FallbackSliver,
    Spindle,
    /// Circumcenter placement: the baseline refiner, or a poor element whose
    /// feasible set came out empty.
    Circumcenter,
}

impl EventKind {
    pub fn is_insertion(self) -> bool {
        self != EventKind::Delete
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, EventKind::BoundaryMidpoint | EventKind::BoundaryFront)
    }

    pub fn provenance(self) -> Provenance {
        if self.is_boundary() {
            Provenance::BoundarySteiner
        } else {
            Provenance::FreeSteiner
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsertionEvent {
    pub seq: usize,
    pub kind: EventKind,
    pub vertex: VertexId,
    pub point: Point,
    /// Shortest edge of the element that drove this event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driving_l_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_eff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<i32>,
    /// Distance to the nearest vertex present before the insertion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_distance: Option<f64>,
    /// Distance to the nearer endpoint of the driving shortest edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driving_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub driving_edge: Option<[VertexId; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub element: Vec<VertexId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<FeatureRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub active: Vec<String>,
}

impl InsertionEvent {
    pub fn new(seq: usize, kind: EventKind, vertex: VertexId, point: Point) -> InsertionEvent {
        InsertionEvent {
            seq,
            kind,
            vertex,
            point,
            driving_l_min: None,
            l_eff: None,
            stage: None,
            min_distance: None,
            driving_distance: None,
            driving_edge: None,
            element: Vec::new(),
            feature: None,
            round: None,
            active: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: i32,
    pub popped: usize,
    pub insertions: usize,
    pub min_key: f64,
    pub max_key: f64,
}

/// Spacing after each relocation pass of one multi-vertex round.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelocationTrace {
    pub round: usize,
    pub candidates: usize,
    pub spacing: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub config: RefinementConfig,
    /// Smallest shortest edge over the elements of the bootstrap mesh.
    pub l0: f64,
    pub events: Vec<InsertionEvent>,
    pub stages: Vec<StageSummary>,
    pub relocation: Vec<RelocationTrace>,
}

impl EventLog {
    pub fn new(config: RefinementConfig) -> EventLog {
        EventLog {
            config,
            l0: 0.0,
            events: Vec::new(),
            stages: Vec::new(),
            relocation: Vec::new(),
        }
    }

    pub fn insertions(&self) -> usize {
        self.events.iter().filter(|e| e.kind.is_insertion()).count()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub(crate) fn note_pop(&mut self, stage: i32, key: f64) {
        let s = self.stage_mut(stage);
        s.popped += 1;
        s.min_key = s.min_key.min(key);
        s.max_key = s.max_key.max(key);
    }

    pub(crate) fn note_insertion(&mut self, stage: i32) {
        self.stage_mut(stage).insertions += 1;
    }

    fn stage_mut(&mut self, stage: i32) -> &mut StageSummary {
        let i = match self.stages.binary_search_by_key(&stage, |s| s.stage) {
            Ok(i) => i,
            Err(i) => {
                self.stages.insert(
                    i,
                    StageSummary {
                        stage,
                        popped: 0,
                        insertions: 0,
                        min_key: f64::INFINITY,
                        max_key: 0.0,
                    },
                );
                i
            }
        };
        &mut self.stages[i]
    }

    /// One JSON object per event, one per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<InsertionEvent>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dim;

    #[test]
    fn jsonl_round_trip() {
        let mut log = EventLog::new(RefinementConfig::for_dim(Dim::Two));
        let mut e = InsertionEvent::new(0, EventKind::Steiner, 7, [0.1, 1.0 / 3.0, 0.0]);
        e.min_distance = Some(0.25);
        e.driving_edge = Some([3, 4]);
        log.events.push(e);
        log.events.push(InsertionEvent::new(1, EventKind::Delete, 7, [0.1, 1.0 / 3.0, 0.0]));
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"kind\":\"STEINER\""));
        assert_eq!(EventLog::parse_jsonl(&text).unwrap(), log.events);
    }

    #[test]
    fn stage_summaries_stay_sorted() {
        let mut log = EventLog::new(RefinementConfig::for_dim(Dim::Two));
        log.note_pop(2, 1.0);
        log.note_pop(-1, 0.1);
        log.note_insertion(2);
        assert_eq!(log.stages.iter().map(|s| s.stage).collect::<Vec<_>>(), vec![-1, 2]);
        assert_eq!(log.stages[1].insertions, 1);
    }
}
