//! Element quality measures, classification and refinement configuration.

use serde::{Deserialize, Serialize};

use crate::geom;
use crate::predicates::{circumsphere, Point};
use crate::{ConfigError, Dim, GeometryError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMeasures {
    pub rho: f64,
    /// Volume over cube of the shortest edge (0 in 2D).
    pub sigma: f64,
    /// Smallest planar angle (2D), radians.
    pub min_angle: f64,
    /// Smallest dihedral angle (3D), radians.
    pub min_dihedral: f64,
    pub shortest_edge: f64,
    pub circumcenter: Point,
    pub circumradius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Class {
    Good,
    LargeRho,
    Sliver,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    Distance,
    Angle,
    Circumcenter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertionMode {
    Single,
    Multi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    ShortestFirst,
    Fifo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryHandling {
    /// Split next to the advancing front.
    Front,
    /// Midpoint / circumcenter splits.
    Classic,
}

/// Which triangles may serve as bases of forbidden regions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForbiddenBases {
    /// Faces of the current mesh (the only bases a new vertex can join).
    MeshFaces,
    /// Every triple of nearby vertices.
    AllTriples,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementConfig {
    pub dim: Dim,
    pub rho_star: f64,
    pub sigma_star: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub placement: PlacementMode,
    pub insertion: InsertionMode,
    pub ordering: Ordering,
    pub boundary: BoundaryHandling,
    pub preprocess: bool,
    pub max_insertions: usize,
    pub batch_cap: usize,
    pub max_relocation_passes: usize,
    /// Relocation stops once a pass moves no vertex farther than this times
    /// the domain diameter.
    pub relocation_tol: f64,
    /// A base triangle can bound a forbidden region only if its shortest side
    /// is below this multiple of the driving element's shortest edge.
    pub small_sliver_factor: f64,
    pub forbidden_bases: ForbiddenBases,
}

/// Minimum angle targeted by the 2D defaults, degrees.
pub const MIN_ANGLE_2D_DEG: f64 = 26.56;

impl RefinementConfig {
    pub fn default_3d() -> RefinementConfig {
        let rho_star = 2.0;
        let alpha = 1.2;
        RefinementConfig {
            dim: Dim::Three,
            rho_star,
            sigma_star: 0.01,
            alpha,
            beta: 2.0 * rho_star,
            gamma: alpha,
            placement: PlacementMode::Distance,
            insertion: InsertionMode::Single,
            ordering: Ordering::ShortestFirst,
            boundary: BoundaryHandling::Front,
            preprocess: true,
            max_insertions: 1_000_000,
            batch_cap: 64,
            max_relocation_passes: 50,
            relocation_tol: 1e-9,
            small_sliver_factor: rho_star,
            forbidden_bases: ForbiddenBases::MeshFaces,
        }
    }

    pub fn default_2d() -> RefinementConfig {
        let rho_star = 1.0 / (2.0 * MIN_ANGLE_2D_DEG.to_radians().sin());
        let alpha = 1.05;
        RefinementConfig {
            dim: Dim::Two,
            rho_star,
            alpha,
            beta: 2.0 * rho_star,
            gamma: alpha,
            small_sliver_factor: rho_star,
            ..RefinementConfig::default_3d()
        }
    }

    pub fn for_dim(dim: Dim) -> RefinementConfig {
        match dim {
            Dim::Two => RefinementConfig::default_2d(),
            Dim::Three => RefinementConfig::default_3d(),
        }
    }

    /// Sets `rho_star` and the quantities derived from it.
    pub fn with_rho_star(mut self, rho_star: f64) -> RefinementConfig {
        self.rho_star = rho_star;
        self.beta = 2.0 * rho_star;
        self.small_sliver_factor = rho_star;
        self
    }

    /// Sets `alpha`; `gamma` follows unless it was set independently.
    pub fn with_alpha(mut self, alpha: f64) -> RefinementConfig {
        if self.gamma == self.alpha {
            self.gamma = alpha;
        }
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let all = [self.rho_star, self.sigma_star, self.alpha, self.beta, self.gamma];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if self.rho_star <= 1.0 {
            return bad(format!("rho_star must exceed 1, got {}", self.rho_star));
        }
        if self.dim == Dim::Three && self.sigma_star <= 0.0 {
            return bad(format!("sigma_star must be positive, got {}", self.sigma_star));
        }
        if !(self.alpha > 1.0 && self.alpha < self.rho_star) {
            return bad(format!(
                "alpha must satisfy 1 < alpha < rho_star ({} vs {})",
                self.alpha, self.rho_star
            ));
        }
        if !(self.gamma >= self.alpha && self.gamma <= self.beta) {
            return bad(format!(
                "gamma must satisfy alpha <= gamma <= beta ({} not in [{}, {}])",
                self.gamma, self.alpha, self.beta
            ));
        }
        if self.dim == Dim::Three && self.rho_star < 2f64.sqrt() {
            return bad(format!("3D runs need rho_star >= sqrt(2), got {}", self.rho_star));
        }
        if self.max_insertions == 0 || self.batch_cap == 0 {
            return bad("insertion and batch caps must be positive".into());
        }
        if !(self.small_sliver_factor > 0.0) {
            return bad("small_sliver_factor must be positive".into());
        }
        Ok(())
    }
}

fn edges(n: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            e.push((i, j));
        }
    }
    e
}

pub fn shortest_edge(pts: &[Point]) -> f64 {
    edges(pts.len())
        .into_iter()
        .map(|(i, j)| geom::dist(&pts[i], &pts[j]))
        .fold(f64::INFINITY, f64::min)
}

fn angle(u: &Point, v: &Point) -> f64 {
    let c = geom::dot(u, v) / (geom::norm(u) * geom::norm(v));
    c.clamp(-1.0, 1.0).acos()
}

pub fn min_angle(pts: &[Point]) -> f64 {
    (0..3)
        .map(|i| {
            let a = pts[i];
            angle(&geom::sub(&pts[(i + 1) % 3], &a), &geom::sub(&pts[(i + 2) % 3], &a))
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn min_dihedral(pts: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, j) in edges(4) {
        let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
        let Some(e) = geom::normalize(&geom::sub(&pts[j], &pts[i])) else {
            return 0.0;
        };
        let perp = |k: usize| {
            let w = geom::sub(&pts[k], &pts[i]);
            geom::sub(&w, &geom::scale(&e, geom::dot(&w, &e)))
        };
        best = best.min(angle(&perp(others[0]), &perp(others[1])));
    }
    best
}

/// Quality of a triangle (3 points) or tetrahedron (4 points).
pub fn measure(pts: &[Point]) -> Result<QualityMeasures, GeometryError> {
    let l = shortest_edge(pts);
    if !(l > 0.0) {
        return Err(GeometryError::Degenerate);
    }
    let (c, r) = circumsphere(pts)?;
    let (sigma, min_angle_v, min_dihedral_v) = match pts.len() {
        3 => (0.0, min_angle(pts), 0.0),
        4 => {
            let v = geom::tet_volume(&pts[0], &pts[1], &pts[2], &pts[3]).abs();
            (v / (l * l * l), 0.0, min_dihedral(pts))
        }
        n => return Err(GeometryError::Arity(n)),
    };
    Ok(QualityMeasures {
        rho: r / l,
        sigma,
        min_angle: min_angle_v,
        min_dihedral: min_dihedral_v,
        shortest_edge: l,
        circumcenter: c,
        circumradius: r,
    })
}

/// Like [`measure`], but a degenerate element reports `rho = +inf`.
pub fn measure_or_degenerate(pts: &[Point]) -> QualityMeasures {
    measure(pts).unwrap_or(QualityMeasures {
        rho: f64::INFINITY,
        sigma: 0.0,
        min_angle: 0.0,
        min_dihedral: 0.0,
        shortest_edge: shortest_edge(pts),
        circumcenter: geom::centroid(pts),
        circumradius: f64::INFINITY,
    })
}

pub fn classify(q: &QualityMeasures, cfg: &RefinementConfig) -> Class {
    if !(q.rho <= cfg.rho_star) {
        Class::LargeRho
    } else if cfg.dim == Dim::Three && q.sigma < cfg.sigma_star {
        Class::Sliver
    } else {
        Class::Good
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn cmp_len(a: f64, b: f64) -> std::cmp::Ordering {
    if rel_eq(a, b) {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// The facet of a tetrahedron that holds its shortest edge and the shorter
/// of the adjacent edges completing a facet. Returned sorted.
pub fn smallest_facet(ids: [usize; 4], pts: &[Point; 4]) -> [usize; 3] {
    let d = |i: usize, j: usize| geom::dist(&pts[i], &pts[j]);
    let key = |i: usize, j: usize| {
        let (a, b) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
        (a, b)
    };
    let (i, j) = edges(4)
        .into_iter()
        .min_by(|&(a, b), &(c, e)| cmp_len(d(a, b), d(c, e)).then(key(a, b).cmp(&key(c, e))))
        .unwrap();
    let facet_of = |k: usize| {
        let mut f = [ids[i], ids[j], ids[k]];
        f.sort_unstable();
        f
    };
    let others: Vec<usize> = (0..4).filter(|&k| k != i && k != j).collect();
    let adj = |k: usize| d(i, k).min(d(j, k));
    let (k0, k1) = (others[0], others[1]);
    let pick = match cmp_len(adj(k0), adj(k1)) {
        std::cmp::Ordering::Less => k0,
        std::cmp::Ordering::Greater => k1,
        std::cmp::Ordering::Equal => {
            if facet_of(k0) <= facet_of(k1) {
                k0
            } else {
                k1
            }
        }
    };
    facet_of(pick)
}

/// Queue key: the shortest edge, reduced to `l_mid / alpha` when the
/// element's tentative vertex encroaches a boundary feature of size `l_mid`.
pub fn queue_key(l_min: f64, encroached_l_mid: Option<f64>, alpha: f64) -> f64 {
    match encroached_l_mid {
        Some(l_mid) => l_min.min(l_mid / alpha),
        None => l_min,
    }
}
