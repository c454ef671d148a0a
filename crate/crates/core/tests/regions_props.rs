use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snowglobe::geom;
use snowglobe::predicates::{circumsphere, Point};
use snowglobe::quality::{measure, smallest_facet, RefinementConfig};
use snowglobe::regions::{forbidden_region, petal, picking_region, snow_globe, spindle_torus, Primitive};

fn unit(rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = geom::norm(&v);
        if n > 0.1 && n <= 1.0 {
            return geom::scale(&v, 1.0 / n);
        }
    }
}

fn rand_pt(rng: &mut ChaCha8Rng) -> Point {
    [rng.gen(), rng.gen(), rng.gen()]
}

fn sphere(p: &Primitive) -> (Point, f64) {
    match p {
        Primitive::InsideSphere { center, radius } => (*center, *radius),
        other => panic!("expected a sphere, got {other:?}"),
    }
}

#[test]
fn boundary_samples_sit_on_the_membership_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = RefinementConfig::default_3d();
    for _ in 0..200 {
        let t: [Point; 3] = std::array::from_fn(|_| rand_pt(&mut rng));
        let fourth = rand_pt(&mut rng);
        let scale = geom::dist(&t[0], &t[1]).max(1e-3);
        let mut prims = Vec::new();
        if let Ok(p) = petal([t[0], t[1]], cfg.rho_star, &t[2]) {
            prims.push(p);
        }
        if let Ok(Some(g)) = snow_globe(&t, &fourth, cfg.rho_star) {
            prims.push(g);
        }
        let n = unit(&mut rng);
        prims.push(Primitive::Halfspace { normal: n, offset: 0.3 });
        prims.push(Primitive::Slab { normal: n, offset: 0.3, half_width: 0.1 });
        for p in &prims {
            for _ in 0..20 {
                let x = match p {
                    Primitive::InsideSphere { center, radius } | Primitive::OutsideSphere { center, radius } => {
                        geom::axpy(center, *radius, &unit(&mut rng))
                    }
                    Primitive::Halfspace { normal, offset } => {
                        let along = geom::any_orthogonal(normal);
                        geom::axpy(&geom::scale(normal, *offset), rng.gen_range(-2.0..2.0), &along)
                    }
                    Primitive::Slab { normal, offset, half_width } => {
                        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        geom::scale(normal, offset + side * half_width)
                    }
                    Primitive::InsideSpindleTorus(_) => unreachable!(),
                };
                assert!(p.violation(&x).abs() <= 1e-8 * scale.max(1.0), "{p:?} at {x:?}");
            }
        }
        // spindle torus: rotate a point of the generating circle about the axis
        if let Ok(s) = spindle_torus(&t, cfg.rho_star) {
            for _ in 0..20 {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let (a, r) = (s.radius * theta.cos(), s.offset + s.radius * theta.sin());
                if r < 0.0 {
                    continue;
                }
                let radial = geom::any_orthogonal(&s.axis);
                let x = geom::axpy(&geom::axpy(&s.mid, a, &s.axis), r, &radial);
                assert!(s.violation(&x).abs() <= 1e-8 * s.radius);
            }
        }
        // forbidden region: the bounding spheres pass through the base
        if let Ok(f) = forbidden_region([0, 1, 2], t, cfg.rho_star, cfg.sigma_star) {
            if let Some(pair) = f.sphere_pair() {
                for (c, r) in pair {
                    for v in &t {
                        assert!((geom::dist(v, &c) - r).abs() <= 1e-10 * r);
                    }
                }
            }
        }
    }
}

#[test]
fn picking_region_lies_inside_the_circumsphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let cfg = RefinementConfig::default_3d();
    let mut checked = 0;
    while checked < 200 {
        let pts: Vec<Point> = (0..4).map(|_| rand_pt(&mut rng)).collect();
        let Ok(q) = measure(&pts) else { continue };
        let Ok(region) = picking_region(&q, &cfg) else { continue };
        let (c, r) = sphere(&region);
        let (cc, big_r) = circumsphere(&pts).unwrap();
        for _ in 0..50 {
            let x = geom::axpy(&c, r * rng.gen::<f64>().cbrt(), &unit(&mut rng));
            assert!(geom::dist(&x, &cc) <= big_r * (1.0 + 1e-12));
            // and every member keeps alpha * l from the vertices
            for p in &pts {
                assert!(geom::dist(&x, p) >= cfg.alpha * q.shortest_edge * (1.0 - 1e-12));
            }
        }
        checked += 1;
    }
}

#[test]
fn snow_globe_passes_through_its_facet() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut globes = 0;
    for _ in 0..2000 {
        let t: [Point; 3] = std::array::from_fn(|_| rand_pt(&mut rng));
        let Ok(Some(g)) = snow_globe(&t, &rand_pt(&mut rng), 2.0) else { continue };
        let (c, r) = sphere(&g);
        for v in &t {
            assert!((geom::dist(v, &c) - r).abs() <= 1e-10 * r);
        }
        globes += 1;
    }
    assert!(globes > 500);
}

/// For poor tetrahedra and rho >= sqrt(2), some point of the picking ball
/// lies in the spindle torus of the smallest facet. Witness by grid search.
#[test]
fn spindle_torus_meets_the_picking_region() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for rho_star in [2f64.sqrt(), 2.0] {
        let cfg = RefinementConfig::default_3d().with_rho_star(rho_star).with_alpha(1.2);
        let mut instances = 0;
        while instances < 100 {
            let pts: [Point; 4] = std::array::from_fn(|_| rand_pt(&mut rng));
            let Ok(q) = measure(&pts) else { continue };
            if !(q.rho > cfg.rho_star) || q.rho > 1e3 {
                continue;
            }
            let (c, r) = sphere(&picking_region(&q, &cfg).unwrap());
            let f = smallest_facet([0, 1, 2, 3], &pts);
            let facet = [pts[f[0]], pts[f[1]], pts[f[2]]];
            let torus = spindle_torus(&facet, cfg.rho_star).unwrap();
            // search the overlap of the two bounding boxes
            let reach = torus.radius + torus.offset;
            let lo: [f64; 3] = std::array::from_fn(|a| (c[a] - r).max(torus.mid[a] - reach));
            let hi: [f64; 3] = std::array::from_fn(|a| (c[a] + r).min(torus.mid[a] + reach));
            let n = 40;
            let mut found = false;
            'search: for i in 0..=n {
                for j in 0..=n {
                    for k in 0..=n {
                        let x: Point = std::array::from_fn(|a| {
                            let s = [i, j, k][a] as f64 / n as f64;
                            lo[a] + s * (hi[a] - lo[a])
                        });
                        if geom::dist(&x, &c) <= r && torus.contains(&x) {
                            found = true;
                            break 'search;
                        }
                    }
                }
            }
            assert!(found, "no witness for {pts:?} (rho {})", q.rho);
            instances += 1;
        }
    }
}
