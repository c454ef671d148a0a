//! Mesh, export, report and event-log writers. Every file carries the run
//! manifest and is written through a temporary file and a rename.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::plc::Plc;
use crate::quality::{self, Class, RefinementConfig};
use crate::refiner::{EventLog, InsertionEvent, RefineOutput};
use crate::triangulation::VertexId;
use crate::{Dim, IoError};

pub const NODE_FORMAT: &str = "triangle-node-1";
pub const EVENTS_FORMAT: &str = "snowglobe-events-1";
pub const REPORT_FORMAT: &str = "snowglobe-report-1";

/// What produced an artifact: inputs, the full configuration, outputs and
/// format versions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub inputs: Vec<String>,
    pub config: RefinementConfig,
    /// Artifact kind (`node`, `ele`, `report`, `events`, `svg`, `vtk`) to path.
    pub outputs: BTreeMap<String, String>,
    pub formats: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(inputs: Vec<String>, config: RefinementConfig) -> RunManifest {
        let formats = [
            ("node", NODE_FORMAT),
            ("events", EVENTS_FORMAT),
            ("report", REPORT_FORMAT),
            ("svg", "svg-1.1"),
            ("vtk", "vtk-legacy-3.0"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            config,
            outputs: BTreeMap::new(),
            formats,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let err = |e: std::io::Error| IoError::File(path.display().to_string(), e);
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// Decimal with 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Live non-scaffold vertices in id order, and the map from mesh id to
/// output index.
pub fn numbering(out: &RefineOutput) -> (Vec<VertexId>, BTreeMap<VertexId, usize>) {
    let ids: Vec<VertexId> = out.mesh.vertex_ids().filter(|&v| !out.mesh.is_scaffold(v)).collect();
    let map = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (ids, map)
}

fn comment_manifest(m: &RunManifest) -> String {
    format!("# manifest: {}\n", m.to_json())
}

/// `.node` text: `count dim 0 1`, then `id x y [z] marker` rows, marker 1 on
/// boundary vertices.
pub fn node_text(out: &RefineOutput, m: &RunManifest, base: usize) -> String {
    let (ids, _) = numbering(out);
    let dim = out.plc.dim.n();
    let on_boundary: HashSet<VertexId> = out
        .subsegments
        .iter()
        .flat_map(|s| s.1)
        .chain(out.subfacets.iter().flat_map(|f| f.1))
        .collect();
    let mut s = comment_manifest(m);
    let _ = writeln!(s, "{} {dim} 0 1", ids.len());
    for (i, &v) in ids.iter().enumerate() {
        let p = out.mesh.point(v);
        let _ = write!(s, "{}", i + base);
        for c in p.iter().take(dim) {
            let _ = write!(s, " {}", fmt_f64(*c));
        }
        let _ = writeln!(s, " {}", u8::from(on_boundary.contains(&v)));
    }
    s
}

/// `.ele` text: `count nodes-per-element 0`, then `id v1 .. vk` rows.
pub fn ele_text(out: &RefineOutput, m: &RunManifest, base: usize) -> String {
    let (_, map) = numbering(out);
    let k = out.plc.dim.arity();
    let mut s = comment_manifest(m);
    let _ = writeln!(s, "{} {k} 0", out.elements.len());
    for (i, e) in out.elements.iter().enumerate() {
        let _ = write!(s, "{}", i + base);
        for v in e {
            let _ = write!(s, " {}", map[v] + base);
        }
        s.push('\n');
    }
    s
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG with one `<path>` per triangle, boundary subsegments as `<line>`s and
/// poor triangles filled red. y points up.
pub fn svg_text(out: &RefineOutput, m: &RunManifest, cfg: &RefinementConfig) -> String {
    let (lo, hi) = out.plc.bbox();
    let w = (hi[0] - lo[0]).max(f64::MIN_POSITIVE);
    let h = (hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = 800.0 / w.max(h);
    let pad = 10.0;
    let tx = |x: f64| pad + (x - lo[0]) * scale;
    let ty = |y: f64| pad + (hi[1] - y) * scale;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.3}" height="{:.3}">"#,
        w * scale + 2.0 * pad,
        h * scale + 2.0 * pad
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(&m.to_json()));
    let _ = writeln!(s, r##"<g stroke="#333" stroke-width="0.5" fill="#dde8f4">"##);
    for (e, pts) in out.elements.iter().zip(out.element_points()) {
        let q = quality::measure_or_degenerate(&pts);
        let poor = quality::classify(&q, cfg) != Class::Good;
        let fill = if poor { r##" fill="#e33""## } else { "" };
        let _ = writeln!(
            s,
            r#"<path d="M{:.4} {:.4} L{:.4} {:.4} L{:.4} {:.4} Z"{fill} data-v="{} {} {}"/>"#,
            tx(pts[0][0]),
            ty(pts[0][1]),
            tx(pts[1][0]),
            ty(pts[1][1]),
            tx(pts[2][0]),
            ty(pts[2][1]),
            e[0],
            e[1],
            e[2]
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g stroke="#000" stroke-width="2">"##);
    for (_, [a, b]) in &out.subsegments {
        let (p, q) = (out.mesh.point(*a), out.mesh.point(*b));
        let _ = writeln!(
            s,
            r#"<line x1="{:.4}" y1="{:.4}" x2="{:.4}" y2="{:.4}"/>"#,
            tx(p[0]),
            ty(p[1]),
            tx(q[0]),
            ty(q[1])
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Legacy VTK unstructured grid (ASCII). The manifest rides along as a
/// field-data byte array named `manifest`.
pub fn vtk_text(out: &RefineOutput, m: &RunManifest) -> String {
    let (ids, map) = numbering(out);
    let k = out.plc.dim.arity();
    let cell_type = if out.plc.dim == Dim::Three { 10 } else { 5 };
    let mut s = String::from("# vtk DataFile Version 3.0\nsnowglobe mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let json = m.to_json();
    let _ = writeln!(s, "FIELD FieldData 1\nmanifest 1 {} unsigned_char", json.len());
    for chunk in json.as_bytes().chunks(32) {
        let row: Vec<String> = chunk.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    let _ = writeln!(s, "POINTS {} double", ids.len());
    for &v in &ids {
        let p = out.mesh.point(v);
        let _ = writeln!(s, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
    }
    let n = out.elements.len();
    let _ = writeln!(s, "CELLS {n} {}", n * (k + 1));
    for e in &out.elements {
        let _ = write!(s, "{k}");
        for v in e {
            let _ = write!(s, " {}", map[v]);
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = writeln!(s, "CELL_DATA {n}\nSCALARS rho double 1\nLOOKUP_TABLE default");
    for pts in out.element_points() {
        let _ = writeln!(s, "{}", fmt_f64(quality::measure_or_degenerate(&pts).rho));
    }
    s
}

/// Event log as JSON lines: a `{"manifest": ...}` line, then one line per
/// event.
pub fn events_text(log: &EventLog, m: &RunManifest) -> String {
    let mut s = serde_json::to_string(&serde_json::json!({ "manifest": m })).expect("manifest serializes");
    s.push('\n');
    s.push_str(&log.to_jsonl());
    s
}

/// Inverse of [`events_text`].
pub fn parse_events(text: &str) -> Result<(Option<RunManifest>, Vec<InsertionEvent>), serde_json::Error> {
    #[derive(Deserialize)]
    struct Head {
        manifest: RunManifest,
    }
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let mut manifest = None;
    if let Some(first) = lines.peek() {
        if let Ok(h) = serde_json::from_str::<Head>(first) {
            manifest = Some(h.manifest);
            lines.next();
        }
    }
    let events = lines.map(serde_json::from_str).collect::<Result<_, _>>()?;
    Ok((manifest, events))
}

/// `{"manifest": ..., "report": ...}`, pretty-printed.
pub fn report_text<T: Serialize>(report: &T, m: &RunManifest) -> String {
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "manifest": m, "report": report }))
        .expect("report serializes");
    s.push('\n');
    s
}

/// Where to write each artifact. Unset paths are skipped.
#[derive(Clone, Debug, Default)]
pub struct OutputPaths {
    /// Stem for `.node` and `.ele`.
    pub mesh: Option<std::path::PathBuf>,
    pub report: Option<std::path::PathBuf>,
    pub events: Option<std::path::PathBuf>,
    pub svg: Option<std::path::PathBuf>,
    pub vtk: Option<std::path::PathBuf>,
}

/// `stem` + `.ext`, keeping any dots already in the stem (`a.1` -> `a.1.node`).
pub fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

impl OutputPaths {
    /// Records every set path in the manifest.
    pub fn record(&self, m: &mut RunManifest) {
        let mut put = |k: &str, p: &Option<std::path::PathBuf>, ext: Option<&str>| {
            if let Some(p) = p {
                let p = match ext {
                    Some(e) => with_suffix(p, e),
                    None => p.clone(),
                };
                m.outputs.insert(k.to_string(), p.display().to_string());
            }
        };
        put("node", &self.mesh, Some("node"));
        put("ele", &self.mesh, Some("ele"));
        put("report", &self.report, None);
        put("events", &self.events, None);
        put("svg", &self.svg, None);
        put("vtk", &self.vtk, None);
    }
}

/// Writes every requested artifact. `report` is serialized as given.
pub fn write_output<T: Serialize>(
    out: &RefineOutput,
    cfg: &RefinementConfig,
    m: &RunManifest,
    paths: &OutputPaths,
    base: usize,
    report: Option<&T>,
) -> Result<(), IoError> {
    if let Some(stem) = &paths.mesh {
        write_atomic(&with_suffix(stem, "node"), node_text(out, m, base).as_bytes())?;
        write_atomic(&with_suffix(stem, "ele"), ele_text(out, m, base).as_bytes())?;
    }
    if let Some(p) = &paths.events {
        write_atomic(p, events_text(&out.events, m).as_bytes())?;
    }
    if let (Some(p), Some(r)) = (&paths.report, report) {
        write_atomic(p, report_text(r, m).as_bytes())?;
    }
    if let Some(p) = &paths.svg {
        write_atomic(p, svg_text(out, m, cfg).as_bytes())?;
    }
    if let Some(p) = &paths.vtk {
        write_atomic(p, vtk_text(out, m).as_bytes())?;
    }
    Ok(())
}

/// `.poly` text for a 2D PLC or `.smesh` text for a 3D one.
pub fn plc_text(plc: &Plc, base: usize) -> String {
    let mut s = String::new();
    let dim = plc.dim.n();
    let _ = writeln!(s, "{} {dim} 0 0", plc.vertices.len());
    for (i, p) in plc.vertices.iter().enumerate() {
        let _ = write!(s, "{}", i + base);
        for c in p.iter().take(dim) {
            let _ = write!(s, " {}", fmt_f64(*c));
        }
        s.push('\n');
    }
    if plc.dim == Dim::Two {
        let _ = writeln!(s, "{} 0", plc.segments.len());
        for (i, [a, b]) in plc.segments.iter().enumerate() {
            let _ = writeln!(s, "{} {} {}", i + base, a + base, b + base);
        }
    } else {
        let _ = writeln!(s, "{} 0", plc.facets.len());
        for f in &plc.facets {
            let _ = write!(s, "{}", f.len());
            for v in f {
                let _ = write!(s, " {}", v + base);
            }
            s.push('\n');
        }
    }
    let _ = writeln!(s, "{}", plc.holes.len());
    for (i, h) in plc.holes.iter().enumerate() {
        let _ = write!(s, "{}", i + base);
        for c in h.iter().take(dim) {
            let _ = write!(s, " {}", fmt_f64(*c));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse::{parse_node, parse_poly, parse_smesh};
    use crate::refiner::refine;

    fn square() -> Plc {
        Plc::new_2d(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1], [1, 2], [2, 3], [3, 0]],
            vec![],
        )
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 1.0 + f64::EPSILON] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn node_round_trip_is_bit_exact() {
        let mut plc = square();
        plc.vertices.push([0.1 + 0.2, 1.0 / 3.0, 0.0]);
        let cfg = RefinementConfig::default_2d();
        let out = refine(&plc, &cfg).unwrap();
        let m = RunManifest::new(vec!["sq.poly".into()], cfg);
        for base in [0, 1] {
            let text = node_text(&out, &m, base);
            let (dim, pts, b) = parse_node(Path::new("x.node"), &text).unwrap();
            assert_eq!((dim, b), (Dim::Two, base));
            let (ids, _) = numbering(&out);
            assert_eq!(pts.len(), ids.len());
            for (p, &v) in pts.iter().zip(&ids) {
                let q = out.mesh.point(v);
                assert_eq!(p[0].to_bits(), q[0].to_bits());
                assert_eq!(p[1].to_bits(), q[1].to_bits());
            }
        }
    }

    #[test]
    fn svg_has_one_path_per_triangle() {
        let mut plc = square();
        plc.vertices.extend([[0.3, 0.4, 0.0], [0.7, 0.6, 0.0], [0.5, 0.2, 0.0]]);
        let cfg = RefinementConfig::default_2d();
        let out = refine(&plc, &cfg).unwrap();
        let m = RunManifest::new(vec![], cfg.clone());
        let svg = svg_text(&out, &m, &cfg);
        assert_eq!(svg.matches("<path ").count(), out.elements.len());
        assert!(svg.contains("<metadata>"));
        assert!(!svg.contains("#e33"));
    }

    #[test]
    fn vtk_uses_tetra_cells() {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
        ];
        let f = vec![
            vec![0, 3, 2, 1],
            vec![4, 5, 6, 7],
            vec![0, 1, 5, 4],
            vec![1, 2, 6, 5],
            vec![2, 3, 7, 6],
            vec![3, 0, 4, 7],
        ];
        let cfg = RefinementConfig::default_3d();
        let out = refine(&Plc::new_3d(v, f, vec![]), &cfg).unwrap();
        let text = vtk_text(&out, &RunManifest::new(vec![], cfg));
        let n = out.elements.len();
        assert!(text.contains(&format!("CELL_TYPES {n}\n")));
        let types = text.split("CELL_TYPES").nth(1).unwrap();
        assert_eq!(types.lines().skip(1).take(n).filter(|l| *l == "10").count(), n);
        assert!(text.contains("POINTS 8 double"));
    }

    #[test]
    fn events_carry_the_manifest() {
        let cfg = RefinementConfig::default_2d();
        let mut plc = square();
        plc.vertices.push([0.5, 0.05, 0.0]);
        let out = refine(&plc, &cfg).unwrap();
        let m = RunManifest::new(vec!["a.poly".into()], cfg);
        let text = events_text(&out.events, &m);
        let (back, events) = parse_events(&text).unwrap();
        assert_eq!(back, Some(m));
        assert_eq!(events, out.events.events);
    }

    #[test]
    fn plc_text_parses_back() {
        let text = plc_text(&square(), 1);
        let inp = parse_poly(Path::new("s.poly"), &text).unwrap();
        assert_eq!(inp.plc, square());
        let cube = Plc::new_3d(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 1.0],
                [1.0, 1.0, 1.0],
                [0.0, 1.0, 1.0],
            ],
            vec![
                vec![0, 3, 2, 1],
                vec![4, 5, 6, 7],
                vec![0, 1, 5, 4],
                vec![1, 2, 6, 5],
                vec![2, 3, 7, 6],
                vec![3, 0, 4, 7],
            ],
            vec![],
        );
        let inp = parse_smesh(Path::new("t.smesh"), &plc_text(&cube, 0)).unwrap();
        assert_eq!(inp.plc, cube);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let bad = dir.path().join("missing").join("b.txt");
        assert!(matches!(write_atomic(&bad, b"x"), Err(IoError::File(..))));
    }
}
