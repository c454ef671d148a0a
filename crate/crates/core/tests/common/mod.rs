//! Shared input domains for the integration tests.
#![allow(dead_code)]

use snowglobe::{Plc, Point};

fn p2(x: f64, y: f64) -> Point {
    [x, y, 0.0]
}

fn ring(n0: usize, n: usize) -> Vec<[usize; 2]> {
    (0..n).map(|i| [n0 + i, n0 + (i + 1) % n]).collect()
}

/// Closed polygon loops (outer first), holes given as interior points.
pub fn polygons(loops: &[Vec<(f64, f64)>], holes: &[(f64, f64)]) -> Plc {
    let mut v = Vec::new();
    let mut s = Vec::new();
    for l in loops {
        let base = v.len();
        v.extend(l.iter().map(|&(x, y)| p2(x, y)));
        s.extend(ring(base, l.len()));
    }
    Plc::new_2d(v, s, holes.iter().map(|&(x, y)| p2(x, y)).collect())
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<(f64, f64)> {
    vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
}

fn regular(n: usize, r: f64, cx: f64, cy: f64, phase: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}

pub fn unit_square() -> Plc {
    polygons(&[rect(0.0, 0.0, 1.0, 1.0)], &[])
}

/// Rectilinear spiral corridor.
pub fn spiral() -> Plc {
    let pts = vec![
        (0.0, 0.0),
        (5.0, 0.0),
        (5.0, 5.0),
        (1.0, 5.0),
        (1.0, 2.0),
        (3.0, 2.0),
        (3.0, 3.0),
        (2.0, 3.0),
        (2.0, 4.0),
        (4.0, 4.0),
        (4.0, 1.0),
        (0.0, 1.0),
    ];
    polygons(&[pts], &[])
}

/// The 2D benchmark domains.
pub fn suite_2d() -> Vec<(&'static str, Plc)> {
    vec![
        ("unit-square", unit_square()),
        ("rectangle-4x1", polygons(&[rect(0.0, 0.0, 4.0, 1.0)], &[])),
        (
            "square-with-hole",
            polygons(&[rect(0.0, 0.0, 3.0, 3.0), rect(1.0, 1.0, 2.0, 2.0)], &[(1.5, 1.5)]),
        ),
        (
            "square-two-holes",
            polygons(
                &[rect(0.0, 0.0, 5.0, 3.0), rect(1.0, 1.0, 2.0, 2.0), rect(3.0, 0.8, 4.2, 2.0)],
                &[(1.5, 1.5), (3.5, 1.5)],
            ),
        ),
        (
            "l-shape",
            polygons(&[vec![(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]], &[]),
        ),
        ("hexagon", polygons(&[regular(6, 1.0, 0.0, 0.0, 0.0)], &[])),
        ("octagon", polygons(&[regular(8, 1.0, 0.0, 0.0, 0.3)], &[])),
        ("triangle", polygons(&[regular(3, 1.0, 0.0, 0.0, 0.1)], &[])),
        (
            "u-channel",
            polygons(
                &[vec![(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (2.0, 3.0), (2.0, 1.0), (1.0, 1.0), (1.0, 3.0), (0.0, 3.0)]],
                &[],
            ),
        ),
        (
            "hexagon-with-square-hole",
            polygons(&[regular(6, 3.0, 0.0, 0.0, 0.0), rect(-0.5, -0.5, 0.5, 0.5)], &[(0.0, 0.0)]),
        ),
        ("spiral", spiral()),
        (
            "square-small-hole",
            polygons(&[rect(0.0, 0.0, 4.0, 4.0), rect(0.6, 0.6, 0.8, 0.8)], &[(0.7, 0.7)]),
        ),
        ("square-cluster", {
            let mut plc = polygons(&[rect(0.0, 0.0, 2.0, 2.0)], &[]);
            plc.vertices.extend([p2(1.0, 1.0), p2(1.05, 1.0), p2(1.0, 1.07), p2(0.3, 1.6)]);
            plc
        }),
        (
            "slotted-plate",
            polygons(
                &[vec![(0.0, 0.0), (6.0, 0.0), (6.0, 2.0), (3.1, 2.0), (3.1, 0.5), (2.9, 0.5), (2.9, 2.0), (0.0, 2.0)]],
                &[],
            ),
        ),
        ("square-30-points", square_with_points(30, 30)),
        ("graded-square-100", graded_square(100.0)),
    ]
}

/// Polygon loops around a closed box.
fn box_facets(base: usize, outward: bool) -> Vec<Vec<usize>> {
    let mut f = vec![
        vec![0, 3, 2, 1],
        vec![4, 5, 6, 7],
        vec![0, 1, 5, 4],
        vec![1, 2, 6, 5],
        vec![2, 3, 7, 6],
        vec![3, 0, 4, 7],
    ];
    if !outward {
        for l in f.iter_mut() {
            l.reverse();
        }
    }
    f.into_iter().map(|l| l.into_iter().map(|i| i + base).collect()).collect()
}

fn box_vertices(lo: [f64; 3], hi: [f64; 3]) -> Vec<Point> {
    vec![
        [lo[0], lo[1], lo[2]],
        [hi[0], lo[1], lo[2]],
        [hi[0], hi[1], lo[2]],
        [lo[0], hi[1], lo[2]],
        [lo[0], lo[1], hi[2]],
        [hi[0], lo[1], hi[2]],
        [hi[0], hi[1], hi[2]],
        [lo[0], hi[1], hi[2]],
    ]
}

pub fn cuboid(lo: [f64; 3], hi: [f64; 3]) -> Plc {
    Plc::new_3d(box_vertices(lo, hi), box_facets(0, true), vec![])
}

pub fn unit_cube() -> Plc {
    cuboid([0.0; 3], [1.0; 3])
}

pub fn box_with_box_hole() -> Plc {
    let mut v = box_vertices([0.0; 3], [3.0; 3]);
    v.extend(box_vertices([1.0; 3], [2.0; 3]));
    let mut f = box_facets(0, true);
    f.extend(box_facets(8, false));
    Plc::new_3d(v, f, vec![[1.5, 1.5, 1.5]])
}

/// Right prism over a polygon in the xy-plane.
pub fn prism(poly: &[(f64, f64)], h: f64) -> Plc {
    let n = poly.len();
    let mut v: Vec<Point> = poly.iter().map(|&(x, y)| [x, y, 0.0]).collect();
    v.extend(poly.iter().map(|&(x, y)| [x, y, h]));
    let mut f = vec![(0..n).rev().collect::<Vec<_>>(), (n..2 * n).collect()];
    for i in 0..n {
        let j = (i + 1) % n;
        f.push(vec![i, j, n + j, n + i]);
    }
    Plc::new_3d(v, f, vec![])
}

/// The 3D benchmark domains.
pub fn suite_3d() -> Vec<(&'static str, Plc)> {
    vec![
        ("unit-cube", unit_cube()),
        ("box-2x1x1", cuboid([0.0; 3], [2.0, 1.0, 1.0])),
        ("box-with-box-hole", box_with_box_hole()),
        ("hexagonal-prism", prism(&regular(6, 1.0, 0.0, 0.0, 0.0), 1.5)),
        ("cube-small-hole", {
            let mut v = box_vertices([0.0; 3], [2.0; 3]);
            v.extend(box_vertices([0.4; 3], [0.7; 3]));
            let mut f = box_facets(0, true);
            f.extend(box_facets(8, false));
            Plc::new_3d(v, f, vec![[0.55; 3]])
        }),
        ("cube-cluster", {
            let mut plc = unit_cube();
            plc.vertices.extend([[0.5, 0.5, 0.5], [0.56, 0.5, 0.5], [0.5, 0.58, 0.52]]);
            plc
        }),
        (
            "l-prism",
            prism(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)], 1.0),
        ),
    ]
}

/// Square of side `d` with a centered square hole of side 1, so that
/// `D / l_min` is about `d`.
pub fn graded_square(d: f64) -> Plc {
    let c = 0.5 * d;
    polygons(&[rect(0.0, 0.0, d, d), rect(c - 0.5, c - 0.5, c + 0.5, c + 0.5)], &[(c, c)])
}

/// Square of side `d` with a short interior edge of length 1 (two isolated
/// vertices joined by a segment).
pub fn square_with_crack(d: f64) -> Plc {
    let mut plc = polygons(&[rect(0.0, 0.0, d, d)], &[]);
    let c = 0.37 * d;
    let n = plc.vertices.len();
    plc.vertices.extend([p2(c, c), p2(c + 1.0, c)]);
    plc.segments.push([n, n + 1]);
    plc
}

/// Square of side 1 with `n` interior vertices from a fixed pseudo-random
/// sequence.
pub fn square_with_points(n: usize, seed: u64) -> Plc {
    let mut plc = unit_square();
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64) / ((1u64 << 53) as f64)
    };
    for _ in 0..n {
        let (x, y) = (0.05 + 0.9 * next(), 0.05 + 0.9 * next());
        plc.vertices.push(p2(x, y));
    }
    plc
}
