mod common;

use proptest::prelude::*;

use snowglobe::analysis::{conformity_violations, verify_delaunay};
use snowglobe::geom;
use snowglobe::quality::{self, Class, InsertionMode, RefinementConfig};
use snowglobe::refiner::replay;
use snowglobe::triangulation::{FeatureRef, Provenance};
use snowglobe::{refine, Dim, Plc, RefineOutput};

#[test]
fn suites_validate() {
    for (name, plc) in common::suite_2d().into_iter().chain(common::suite_3d()) {
        plc.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn unit_square_meets_the_angle_bound() {
    let out = refine(&common::unit_square(), &RefinementConfig::for_dim(Dim::Two)).unwrap();
    assert!(!out.elements.is_empty());
    for pts in out.element_points() {
        assert!(quality::min_angle(&pts).to_degrees() >= 26.5, "{pts:?}");
    }
}

#[test]
fn unit_cube_has_no_poor_elements() {
    let cfg = RefinementConfig::for_dim(Dim::Three);
    let out = refine(&common::unit_cube(), &cfg).unwrap();
    for pts in out.element_points() {
        let q = quality::measure(&pts).unwrap();
        assert_ne!(quality::classify(&q, &cfg), Class::LargeRho);
    }
}

fn check_vertices(out: &RefineOutput) {
    let m = &out.mesh;
    let scale = out.plc.diameter();
    let n_input = out.plc.vertices.len();
    for i in 0..n_input {
        assert!(m.vertex(out.plc.dim.arity() + i).alive, "input vertex {i} deleted");
    }
    for v in m.vertex_ids() {
        let rec = m.vertex(v);
        if rec.provenance != Provenance::BoundarySteiner {
            continue;
        }
        let p = m.point(v);
        let d = match rec.incident_feature.expect("boundary vertex without feature") {
            FeatureRef::Segment(s) => {
                let [a, b] = out.features.segments[s];
                geom::point_segment(p, &out.plc.vertices[a], &out.plc.vertices[b]).0
            }
            FeatureRef::Facet(f) => out.features.facets[f].plane_distance(p).abs(),
        };
        assert!(d <= 1e-10 * scale, "vertex {v} is {d} off its feature");
    }
}

#[test]
fn replay_reproduces_the_mesh() {
    for (plc, mode) in [
        (common::suite_2d().remove(4).1, InsertionMode::Single),
        (common::spiral(), InsertionMode::Multi),
        (common::unit_cube(), InsertionMode::Single),
    ] {
        let mut cfg = RefinementConfig::for_dim(plc.dim);
        cfg.insertion = mode;
        let out = refine(&plc, &cfg).unwrap();
        let again = replay(&out.plc, &out.events.events).unwrap();
        assert_eq!(again.simplex_set(false), out.mesh.simplex_set(false));
        for v in out.mesh.vertex_ids() {
            assert_eq!(again.point(v), out.mesh.point(v));
        }
        check_vertices(&out);
    }
}

#[test]
fn repeated_runs_are_identical() {
    let plc = common::suite_2d().remove(2).1;
    let cfg = RefinementConfig::for_dim(Dim::Two);
    let a = refine(&plc, &cfg).unwrap().events.to_jsonl();
    let b = refine(&plc, &cfg).unwrap().events.to_jsonl();
    assert_eq!(a, b);
}

fn scattered(points: Vec<(f64, f64)>) -> Plc {
    let mut plc = common::unit_square();
    plc.vertices.extend(points.into_iter().map(|(x, y)| [x, y, 0.0]));
    plc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random interior points: the run terminates with a Delaunay,
    /// conforming mesh whose elements all meet the ratio bound.
    #[test]
    fn random_point_sets_refine_cleanly(
        pts in prop::collection::vec((0.05f64..0.95, 0.05f64..0.95), 0..12),
        multi in any::<bool>(),
    ) {
        let plc = scattered(pts);
        prop_assume!(plc.validate().is_ok());
        let mut cfg = RefinementConfig::for_dim(Dim::Two);
        cfg.max_insertions = 20_000;
        if multi {
            cfg.insertion = InsertionMode::Multi;
        }
        let out = refine(&plc, &cfg).unwrap();
        prop_assert!(verify_delaunay(&out.mesh).is_empty());
        prop_assert!(conformity_violations(&out).is_empty());
        for pts in out.element_points() {
            let q = quality::measure(&pts).unwrap();
            prop_assert!(q.rho <= cfg.rho_star * (1.0 + 1e-9), "rho {}", q.rho);
        }
        check_vertices(&out);
        let area: f64 = out.element_points().map(|p| geom::triangle_area(&p[0], &p[1], &p[2])).sum();
        prop_assert!((area - 1.0).abs() < 1e-9);
    }
}
