//! Triangle `.node`/`.poly` and TetGen `.node`/`.smesh` readers.

use std::path::{Path, PathBuf};

use crate::plc::{newell_normal, Plc};
use crate::predicates::Point;
use crate::{geom, Dim, IoError};

/// Tolerated distance of a facet corner from the facet plane, relative to
/// the bounding-box diagonal.
pub const PLANARITY_TOL: f64 = 1e-8;

/// A parsed input and the index base its files used.
#[derive(Clone, Debug, PartialEq)]
pub struct Input {
    pub plc: Plc,
    /// 0 or 1, detected from the first vertex id.
    pub base: usize,
    pub paths: Vec<PathBuf>,
}

/// Whitespace-separated tokens of the non-blank, comment-stripped lines,
/// each with its 1-based line number.
struct Lines<'a> {
    path: String,
    rows: Vec<(usize, Vec<&'a str>)>,
    at: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &Path, text: &'a str) -> Lines<'a> {
        let rows = text
            .lines()
            .enumerate()
            .filter_map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((i + 1, toks))
            })
            .collect();
        Lines {
            path: path.display().to_string(),
            rows,
            at: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> IoError {
        IoError::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Line number of the next row, or one past the last.
    fn line(&self) -> usize {
        self.rows
            .get(self.at)
            .map_or_else(|| self.rows.last().map_or(1, |r| r.0 + 1), |r| r.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), IoError> {
        let r = self
            .rows
            .get(self.at)
            .cloned()
            .ok_or_else(|| self.err(self.line(), format!("unexpected end of file, expected {what}")))?;
        self.at += 1;
        Ok(r)
    }

    fn done(&self) -> bool {
        self.at >= self.rows.len()
    }
}

fn int(l: &Lines, line: usize, tok: Option<&&str>, what: &str) -> Result<i64, IoError> {
    let t = tok.ok_or_else(|| l.err(line, format!("missing {what}")))?;
    t.parse::<i64>()
        .map_err(|_| l.err(line, format!("{what}: expected an integer, got '{t}'")))
}

fn count(l: &Lines, line: usize, tok: Option<&&str>, what: &str) -> Result<usize, IoError> {
    let v = int(l, line, tok, what)?;
    usize::try_from(v).map_err(|_| l.err(line, format!("{what} must be non-negative, got {v}")))
}

fn float(l: &Lines, line: usize, tok: Option<&&str>, what: &str) -> Result<f64, IoError> {
    let t = tok.ok_or_else(|| l.err(line, format!("missing {what}")))?;
    let v = t
        .parse::<f64>()
        .map_err(|_| l.err(line, format!("{what}: expected a number, got '{t}'")))?;
    if !v.is_finite() {
        return Err(l.err(line, format!("{what} is not finite")));
    }
    Ok(v)
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::File(path.display().to_string(), e))
}

struct NodeBlock {
    dim: usize,
    points: Vec<Point>,
    base: usize,
}

/// Reads a node list: header `count dim attrs markers`, then `id x y [z] ...`
/// rows. With `allow_empty`, a zero count returns `None` (points live in a
/// separate `.node` file).
fn node_block(l: &mut Lines, allow_empty: bool) -> Result<Option<NodeBlock>, IoError> {
    let (ln, h) = l.next("node header")?;
    if h.len() < 2 {
        return Err(l.err(ln, "malformed header: expected '<count> <dim> [<attributes> <markers>]'"));
    }
    let n = count(l, ln, h.first(), "vertex count")?;
    let dim = count(l, ln, h.get(1), "dimension")?;
    if dim != 2 && dim != 3 {
        return Err(l.err(ln, format!("malformed header: dimension must be 2 or 3, got {dim}")));
    }
    let attrs = if h.len() > 2 { count(l, ln, h.get(2), "attribute count")? } else { 0 };
    let markers = if h.len() > 3 { count(l, ln, h.get(3), "marker flag")? } else { 0 };
    if markers > 1 {
        return Err(l.err(ln, format!("malformed header: marker flag must be 0 or 1, got {markers}")));
    }
    if n == 0 {
        return if allow_empty {
            Ok(None)
        } else {
            Err(l.err(ln, "malformed header: vertex count is 0"))
        };
    }
    let mut points = Vec::with_capacity(n);
    let mut base = 0;
    for k in 0..n {
        let (ln, row) = l.next("vertex row")?;
        let id = int(l, ln, row.first(), "vertex id")?;
        if k == 0 {
            if id != 0 && id != 1 {
                return Err(l.err(ln, format!("first vertex id must be 0 or 1, got {id}")));
            }
            base = id as usize;
        }
        if id != (base + k) as i64 {
            return Err(l.err(ln, format!("vertex ids must be consecutive: expected {}, got {id}", base + k)));
        }
        let want = 1 + dim + attrs + markers;
        if row.len() < 1 + dim {
            return Err(l.err(ln, format!("vertex row needs {want} fields, got {}", row.len())));
        }
        let mut p = [0.0; 3];
        for (c, slot) in p.iter_mut().enumerate().take(dim) {
            *slot = float(l, ln, row.get(1 + c), "coordinate")?;
        }
        points.push(p);
    }
    Ok(Some(NodeBlock { dim, points, base }))
}

/// Reads a standalone `.node` file.
pub fn read_node(path: &Path) -> Result<(Dim, Vec<Point>, usize), IoError> {
    let text = read(path)?;
    parse_node(path, &text)
}

pub fn parse_node(path: &Path, text: &str) -> Result<(Dim, Vec<Point>, usize), IoError> {
    let mut l = Lines::new(path, text);
    let b = node_block(&mut l, false)?.expect("nonempty");
    Ok((Dim::from_n(b.dim).unwrap(), b.points, b.base))
}

fn vertex_ref(l: &Lines, line: usize, tok: Option<&&str>, base: usize, n: usize) -> Result<usize, IoError> {
    let v = int(l, line, tok, "vertex reference")?;
    let i = v - base as i64;
    if i < 0 || i >= n as i64 {
        let last = base + n - 1;
        return Err(l.err(line, format!("dangling vertex reference {v} (vertices are {base}..={last})")));
    }
    Ok(i as usize)
}

fn hole_block(l: &mut Lines, dim: usize) -> Result<Vec<Point>, IoError> {
    if l.done() {
        return Ok(Vec::new());
    }
    let (ln, h) = l.next("hole header")?;
    let n = count(l, ln, h.first(), "hole count")?;
    let mut holes = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, row) = l.next("hole row")?;
        let mut p = [0.0; 3];
        for (c, slot) in p.iter_mut().enumerate().take(dim) {
            *slot = float(l, ln, row.get(1 + c), "hole coordinate")?;
        }
        holes.push(p);
    }
    Ok(holes)
}

/// Points from the file's own node block, or from `<stem>.node`.
fn points_for(path: &Path, l: &mut Lines, paths: &mut Vec<PathBuf>) -> Result<NodeBlock, IoError> {
    if let Some(b) = node_block(l, true)? {
        return Ok(b);
    }
    let node = path.with_extension("node");
    let (dim, points, base) = read_node(&node)?;
    paths.push(node);
    Ok(NodeBlock {
        dim: dim.n(),
        points,
        base,
    })
}

/// Triangle `.poly`: node block (or empty, with a sibling `.node`), segment
/// block, hole block.
pub fn parse_poly(path: &Path, text: &str) -> Result<Input, IoError> {
    let mut paths = vec![path.to_path_buf()];
    let mut l = Lines::new(path, text);
    let nodes = points_for(path, &mut l, &mut paths)?;
    if nodes.dim != 2 {
        return Err(l.err(1, format!(".poly inputs are 2D; got dimension {}", nodes.dim)));
    }
    let n = nodes.points.len();
    let (ln, h) = l.next("segment header")?;
    let ns = count(&l, ln, h.first(), "segment count")?;
    let mut segments = Vec::with_capacity(ns);
    for _ in 0..ns {
        let (ln, row) = l.next("segment row")?;
        let a = vertex_ref(&l, ln, row.get(1), nodes.base, n)?;
        let b = vertex_ref(&l, ln, row.get(2), nodes.base, n)?;
        if a == b {
            return Err(l.err(ln, "segment endpoints coincide"));
        }
        segments.push([a, b]);
    }
    let holes = hole_block(&mut l, 2)?;
    let plc = Plc::new_2d(nodes.points, segments, holes);
    plc.validate()?;
    Ok(Input {
        plc,
        base: nodes.base,
        paths,
    })
}

/// TetGen `.smesh`: node block (or empty), facet block with one polygon
/// per row (`corners v1 .. vk [marker]`), hole block.
pub fn parse_smesh(path: &Path, text: &str) -> Result<Input, IoError> {
    let mut paths = vec![path.to_path_buf()];
    let mut l = Lines::new(path, text);
    let nodes = points_for(path, &mut l, &mut paths)?;
    if nodes.dim != 3 {
        return Err(l.err(1, format!(".smesh inputs are 3D; got dimension {}", nodes.dim)));
    }
    let n = nodes.points.len();
    let (lo, hi) = crate::triangulation::bbox(&nodes.points);
    let scale = geom::dist(&lo, &hi).max(f64::MIN_POSITIVE);
    let (ln, h) = l.next("facet header")?;
    let nf = count(&l, ln, h.first(), "facet count")?;
    let mut facets = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, row) = l.next("facet row")?;
        let k = count(&l, ln, row.first(), "corner count")?;
        if k < 3 {
            return Err(l.err(ln, format!("facet needs at least 3 corners, got {k}")));
        }
        if row.len() < 1 + k {
            return Err(l.err(ln, format!("facet lists {} of {k} corners", row.len() - 1)));
        }
        let f: Vec<usize> = (0..k)
            .map(|i| vertex_ref(&l, ln, row.get(1 + i), nodes.base, n))
            .collect::<Result<_, _>>()?;
        let pts: Vec<Point> = f.iter().map(|&i| nodes.points[i]).collect();
        let normal = newell_normal(&pts).ok_or_else(|| l.err(ln, "degenerate facet"))?;
        let dev = pts
            .iter()
            .map(|p| geom::dot(&normal, &geom::sub(p, &pts[0])).abs())
            .fold(0.0, f64::max);
        if dev > PLANARITY_TOL * scale {
            return Err(l.err(ln, format!("nonplanar facet: corner {dev:.3e} off its plane")));
        }
        facets.push(f);
    }
    let holes = hole_block(&mut l, 3)?;
    let plc = Plc::new_3d(nodes.points, facets, holes);
    plc.validate()?;
    Ok(Input {
        plc,
        base: nodes.base,
        paths,
    })
}

/// Reads a `.poly` or `.smesh` file. A `.node` path is resolved to the
/// sibling `.poly`, else `.smesh`.
pub fn parse_input(path: &Path) -> Result<Input, IoError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "poly" => parse_poly(path, &read(path)?),
        "smesh" => parse_smesh(path, &read(path)?),
        "node" => {
            for alt in ["poly", "smesh"] {
                let p = path.with_extension(alt);
                if p.exists() {
                    return parse_input(&p);
                }
            }
            Err(IoError::Parse {
                path: path.display().to_string(),
                line: 0,
                message: "no .poly or .smesh next to this .node file".into(),
            })
        }
        _ => Err(IoError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: format!("unknown input extension '{ext}' (expected .poly or .smesh)"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "\
# unit square
4 2 0 1
1 0 0 1
2 1 0 1
3 1 1 1
4 0 1 1
4 1
1 1 2 1
2 2 3 1
3 3 4 1
4 4 1 1
0
";

    fn line_of(e: IoError) -> usize {
        match e {
            IoError::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn square_poly() {
        let inp = parse_poly(Path::new("sq.poly"), SQUARE).unwrap();
        assert_eq!(inp.plc.vertices.len(), 4);
        assert_eq!(inp.plc.segments.len(), 4);
        assert!(inp.plc.holes.is_empty());
        assert_eq!(inp.base, 1);
        assert_eq!(inp.plc.segments[3], [3, 0]);
    }

    #[test]
    fn zero_based_with_hole_and_comments() {
        let text = "8 2 0 0\n0 0 0\n1 3 0\n2 3 3\n3 0 3\n4 1 1 # inner\n5 2 1\n6 2 2\n7 1 2\n\
                    8 0\n0 0 1\n1 1 2\n2 2 3\n3 3 0\n4 4 5\n5 5 6\n6 6 7\n7 7 4\n1\n0 1.5 1.5\n";
        let inp = parse_poly(Path::new("h.poly"), text).unwrap();
        assert_eq!(inp.base, 0);
        assert_eq!(inp.plc.holes, vec![[1.5, 1.5, 0.0]]);
    }

    #[test]
    fn dangling_reference_names_its_line() {
        let bad = SQUARE.replace("3 3 4 1", "3 3 99 1");
        let e = parse_poly(Path::new("sq.poly"), &bad).unwrap_err();
        assert!(e.to_string().contains("dangling"), "{e}");
        assert_eq!(line_of(e), 10);
    }

    #[test]
    fn malformed_header() {
        let e = parse_poly(Path::new("x.poly"), "4\n").unwrap_err();
        assert!(e.to_string().contains("malformed header"), "{e}");
        assert_eq!(line_of(e), 1);
        let e = parse_poly(Path::new("x.poly"), "4 5 0 0\n").unwrap_err();
        assert_eq!(line_of(e), 1);
    }

    #[test]
    fn truncated_file() {
        let e = parse_poly(Path::new("x.poly"), "4 2 0 0\n1 0 0\n2 1 0\n").unwrap_err();
        assert!(e.to_string().contains("end of file"), "{e}");
    }

    fn cube_smesh(triangulated: bool, corrupt: Option<&str>) -> String {
        let mut s = String::from("8 3 0 0\n");
        let v = [
            [0, 0, 0],
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [1, 1, 1],
            [0, 1, 1],
        ];
        for (i, p) in v.iter().enumerate() {
            s += &format!("{} {} {} {}\n", i + 1, p[0], p[1], p[2]);
        }
        let quads = [[1, 4, 3, 2], [5, 6, 7, 8], [1, 2, 6, 5], [2, 3, 7, 6], [3, 4, 8, 7], [4, 1, 5, 8]];
        if triangulated {
            s += "12 0\n";
            for q in quads {
                s += &format!("3 {} {} {}\n3 {} {} {}\n", q[0], q[1], q[2], q[0], q[2], q[3]);
            }
        } else {
            s += "6 0\n";
            for q in quads {
                s += &format!("4 {} {} {} {}\n", q[0], q[1], q[2], q[3]);
            }
        }
        s += "0\n";
        if let Some(c) = corrupt {
            s = s.replacen("7 1 1 1", c, 1);
        }
        s
    }

    #[test]
    fn cube_with_triangle_facets() {
        let inp = parse_smesh(Path::new("c.smesh"), &cube_smesh(true, None)).unwrap();
        assert_eq!(inp.plc.facets.len(), 12);
        assert_eq!(inp.plc.dim, Dim::Three);
    }

    #[test]
    fn facet_reference_out_of_range() {
        let text = cube_smesh(false, None).replace("4 2 3 7 6", "4 2 3 99 6");
        let e = parse_smesh(Path::new("c.smesh"), &text).unwrap_err();
        assert!(e.to_string().contains("dangling vertex reference 99"), "{e}");
        assert_eq!(line_of(e), 14);
    }

    #[test]
    fn nonplanar_facet() {
        let text = cube_smesh(false, Some("7 1 1 1.001"));
        let e = parse_smesh(Path::new("c.smesh"), &text).unwrap_err();
        assert!(e.to_string().contains("nonplanar"), "{e}");
    }
}
