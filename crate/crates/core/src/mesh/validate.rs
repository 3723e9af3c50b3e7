//! Mesh diagnostics: simple-polygon and conformity checks plus a
//! classification of the geometric assumptions the mesh satisfies
//! (star-shapedness, adjacent-edge gradedness, bounded edge counts, and
//! the split of each element boundary into a graded part and a small
//! exceptional part).

use super::{element_geometry, ElementGeometry, PolygonalMesh};
use nalgebra::Point2;
use std::collections::HashMap;

/// Which regularity assumptions a mesh satisfies, together with the
/// smallest constants that make them true.
#[derive(Debug, Clone)]
pub struct GeometryAssumptions {
    /// Estimated star-shapedness: every element has a kernel ball of
    /// radius at least `g1_kernel_ratio * h_P` (sampled estimate).
    pub g1_kernel_ratio: f64,
    /// Elements whose kernel ratio fell below the 0.05 warning threshold.
    pub g1_warnings: Vec<usize>,
    /// Smallest admissible gradedness constant: the largest ratio between
    /// adjacent edges over all elements.
    pub g2a_gamma2: f64,
    /// Smallest admissible per-element edge-count bound.
    pub g2b_n_star: usize,
    /// Whether every element boundary splits into a gamma2-graded part
    /// plus at most n_star exceptional edges, for the parameters passed
    /// to [`validate_mesh`].
    pub g3_ok: bool,
}

#[derive(Debug, Clone)]
pub struct MeshReport {
    /// Human-readable violations (non-simple loops, negative areas,
    /// conformity defects). Empty for a healthy mesh.
    pub violations: Vec<String>,
    pub total_area: f64,
    /// Per-element ratio h_P / min own edge.
    pub element_gamma: Vec<f64>,
    pub assumptions: GeometryAssumptions,
}

impl MeshReport {
    pub fn is_conforming(&self) -> bool {
        self.violations.is_empty()
    }
}

fn segments_properly_intersect(a: (Point2<f64>, Point2<f64>), b: (Point2<f64>, Point2<f64>)) -> bool {
    let cross = |o: Point2<f64>, p: Point2<f64>, q: Point2<f64>| {
        (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x)
    };
    let (d1, d2) = (cross(a.0, a.1, b.0), cross(a.0, a.1, b.1));
    let (d3, d4) = (cross(b.0, b.1, a.0), cross(b.0, b.1, a.1));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn is_simple(geom: &ElementGeometry) -> bool {
    let n = geom.vertices.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (shared endpoint)
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let a = geom.edges[i].endpoints;
            let b = geom.edges[j].endpoints;
            if segments_properly_intersect(a, b) {
                return false;
            }
        }
    }
    true
}

fn point_in_polygon(p: Point2<f64>, vertices: &[Point2<f64>]) -> bool {
    let mut inside = false;
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Sampled estimate of the largest kernel-ball radius, normalized by h_P.
/// The kernel of a simple polygon is the intersection of the inner
/// half-planes of its edge lines; we maximize the minimal inner distance
/// over a coarse grid of interior candidates plus the centroid.
fn kernel_ratio(geom: &ElementGeometry) -> f64 {
    let min_inner_distance = |c: Point2<f64>| -> f64 {
        geom.edges
            .iter()
            .map(|e| (e.endpoints.0 - c).dot(&e.normal))
            .fold(f64::INFINITY, f64::min)
    };
    let mut best = min_inner_distance(geom.centroid);
    let (mut lo, mut hi) = (geom.vertices[0], geom.vertices[0]);
    for v in &geom.vertices {
        lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    let steps = 12;
    for i in 1..steps {
        for j in 1..steps {
            let c = Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / steps as f64,
                lo.y + (hi.y - lo.y) * j as f64 / steps as f64,
            );
            if point_in_polygon(c, &geom.vertices) {
                best = best.max(min_inner_distance(c));
            }
        }
    }
    (best / geom.diameter).max(0.0)
}

/// Validate raw mesh parts, collecting violations instead of failing.
/// `gamma2` and `n_star` parameterize the G3 feasibility check.
pub fn validate_parts(
    vertices: &[Point2<f64>],
    elements: &[Vec<usize>],
    gamma2: f64,
    n_star: usize,
) -> MeshReport {
    let mut violations = Vec::new();

    // Conformity: every directed edge at most once, every undirected edge
    // at most twice.
    let mut dir: HashMap<(usize, usize), usize> = HashMap::new();
    for (e, loop_) in elements.iter().enumerate() {
        for i in 0..loop_.len() {
            let a = loop_[i];
            let b = loop_[(i + 1) % loop_.len()];
            if a >= vertices.len() || b >= vertices.len() {
                violations.push(format!("element {e}: vertex index out of range"));
                continue;
            }
            let count = dir.entry((a, b)).or_insert(0);
            *count += 1;
            if *count > 1 {
                violations.push(format!(
                    "conformity: edge ({a}, {b}) traversed {count} times in the same direction"
                ));
            }
        }
    }
    for (&(a, b), &c) in &dir {
        let back = dir.get(&(b, a)).copied().unwrap_or(0);
        if c + back > 2 {
            violations.push(format!("conformity: edge ({a}, {b}) shared by {} sides", c + back));
        }
    }

    let mut total_area = 0.0;
    let mut element_gamma = Vec::with_capacity(elements.len());
    let mut worst_adjacent: f64 = 1.0;
    let mut max_edges = 0usize;
    let mut kernel_min: f64 = f64::INFINITY;
    let mut g1_warnings = Vec::new();
    let mut g3_ok = true;

    for (e, loop_) in elements.iter().enumerate() {
        if loop_.iter().any(|&v| v >= vertices.len()) {
            continue;
        }
        let geom = ElementGeometry::from_loop(loop_.iter().map(|&v| vertices[v]).collect());
        if geom.area <= 0.0 {
            violations.push(format!("element {e}: non-positive signed area {}", geom.area));
            continue;
        }
        if !is_simple(&geom) {
            violations.push(format!("element {e}: self-intersecting boundary"));
            continue;
        }
        total_area += geom.area;
        element_gamma.push(geom.gamma());
        max_edges = max_edges.max(geom.n_edges());

        let n = geom.n_edges();
        let mut exceptional = vec![false; n];
        for i in 0..n {
            let (a, b) = (geom.edges[i].length, geom.edges[(i + 1) % n].length);
            let ratio = (a / b).max(b / a);
            worst_adjacent = worst_adjacent.max(ratio);
            if ratio > gamma2 {
                // A violating pair is admissible only with both edges in
                // the exceptional set.
                exceptional[i] = true;
                exceptional[(i + 1) % n] = true;
            }
        }
        if exceptional.iter().filter(|&&x| x).count() > n_star {
            g3_ok = false;
        }

        let kr = kernel_ratio(&geom);
        kernel_min = kernel_min.min(kr);
        if kr < 0.05 {
            g1_warnings.push(e);
        }
    }

    MeshReport {
        violations,
        total_area,
        element_gamma,
        assumptions: GeometryAssumptions {
            g1_kernel_ratio: if kernel_min.is_finite() { kernel_min } else { 0.0 },
            g1_warnings,
            g2a_gamma2: worst_adjacent,
            g2b_n_star: max_edges,
            g3_ok,
        },
    }
}

/// Diagnostics for a constructed mesh; see [`validate_parts`].
pub fn validate_mesh(mesh: &PolygonalMesh, gamma2: f64, n_star: usize) -> MeshReport {
    // Reuse the raw-parts path so the checks agree; geometry recomputation
    // is cheap at diagnostic scale.
    let _ = element_geometry; // geometry helpers shared with the raw path
    validate_parts(mesh.vertices(), mesh.elements(), gamma2, n_star)
}
