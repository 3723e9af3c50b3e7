//! Polygonal meshes of the unit square: storage, derived geometry, the
//! three parametric mesh families used in the experiments, validation
//! against the mesh regularity assumptions, and a JSON interchange format.
//!
//! A mesh stores vertices and counter-clockwise element loops; the edge
//! table with two-sided adjacency is derived on construction. Every edge
//! owns a global direction (low vertex index -> high vertex index) which
//! fixes the orientation of edge moments across neighboring elements.

mod generators;
mod json;
mod validate;

pub use generators::{
    generate_dyadic_square_mesh, generate_hexagonal_collapse_mesh, generate_nside_mesh,
};
pub use validate::{validate_mesh, validate_parts, GeometryAssumptions, MeshReport};

use nalgebra::{Point2, Vector2};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("element {element} references vertex {vertex} out of bounds ({n_vertices} vertices)")]
    BadVertexIndex {
        element: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("element {0} has fewer than 3 vertices")]
    TooFewVertices(usize),
    #[error("edge ({0}, {1}) is shared by more than two elements or traversed twice in the same direction")]
    NonConforming(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// One mesh edge with its global orientation and adjacency.
///
/// The global direction runs from the lower vertex index to the higher.
/// `left` is the element whose counter-clockwise loop traverses the edge
/// in the global direction; `right` (if any) traverses it backwards.
#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub vertices: (usize, usize),
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.left.is_none() || self.right.is_none()
    }
}

/// Position of an edge inside an element loop.
#[derive(Debug, Clone, Copy)]
pub struct EdgeUse {
    /// Index into [`PolygonalMesh::edges`].
    pub edge: usize,
    /// True when the loop traverses the edge in its global direction.
    pub forward: bool,
}

/// A conforming tessellation of a polygonal domain.
#[derive(Debug, Clone)]
pub struct PolygonalMesh {
    vertices: Vec<Point2<f64>>,
    elements: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    element_edges: Vec<Vec<EdgeUse>>,
}

impl PolygonalMesh {
    /// Build a mesh from raw vertices and counter-clockwise element loops,
    /// deriving the edge table. Fails on structural defects (bad indices,
    /// an edge shared by more than two elements or traversed twice in the
    /// same direction); geometric quality is checked by [`validate_mesh`].
    pub fn from_parts(
        vertices: Vec<Point2<f64>>,
        elements: Vec<Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let n_vertices = vertices.len();
        for (e, loop_) in elements.iter().enumerate() {
            if loop_.len() < 3 {
                return Err(MeshError::TooFewVertices(e));
            }
            for &v in loop_ {
                if v >= n_vertices {
                    return Err(MeshError::BadVertexIndex {
                        element: e,
                        vertex: v,
                        n_vertices,
                    });
                }
            }
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut element_edges: Vec<Vec<EdgeUse>> = Vec::with_capacity(elements.len());

        for (e, loop_) in elements.iter().enumerate() {
            let mut uses = Vec::with_capacity(loop_.len());
            for i in 0..loop_.len() {
                let a = loop_[i];
                let b = loop_[(i + 1) % loop_.len()];
                if a == b {
                    return Err(MeshError::DegenerateGeometry(format!(
                        "element {e} repeats vertex {a}"
                    )));
                }
                let key = (a.min(b), a.max(b));
                let forward = a < b;
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: key,
                        left: None,
                        right: None,
                    });
                    edges.len() - 1
                });
                let slot = if forward {
                    &mut edges[id].left
                } else {
                    &mut edges[id].right
                };
                if slot.is_some() {
                    return Err(MeshError::NonConforming(key.0, key.1));
                }
                *slot = Some(e);
                uses.push(EdgeUse { edge: id, forward });
            }
            element_edges.push(uses);
        }

        Ok(Self {
            vertices,
            elements,
            edges,
            element_edges,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, i: usize) -> Point2<f64> {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e]
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn element_edges(&self, e: usize) -> &[EdgeUse] {
        &self.element_edges[e]
    }

    /// Endpoints of an edge in its global direction.
    pub fn edge_endpoints(&self, i: usize) -> (Point2<f64>, Point2<f64>) {
        let (a, b) = self.edges[i].vertices;
        (self.vertices[a], self.vertices[b])
    }
}

/// Per-edge geometry within one element, ordered along the loop.
#[derive(Debug, Clone)]
pub struct EdgeGeometry {
    pub length: f64,
    /// Unit outward normal.
    pub normal: Vector2<f64>,
    /// Endpoints in loop (counter-clockwise) order.
    pub endpoints: (Point2<f64>, Point2<f64>),
}

/// Geometric data of a single polygonal element.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    /// Vertices in counter-clockwise order.
    pub vertices: Vec<Point2<f64>>,
    /// Diameter h_P: maximum pairwise vertex distance.
    pub diameter: f64,
    pub area: f64,
    /// Area centroid from the shoelace moments.
    pub centroid: Point2<f64>,
    pub edges: Vec<EdgeGeometry>,
    pub perimeter: f64,
}

impl ElementGeometry {
    /// Geometry of a counter-clockwise simple polygon.
    pub fn from_loop(vertices: Vec<Point2<f64>>) -> Self {
        let n = vertices.len();
        let mut area2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let cross = p.x * q.y - q.x * p.y;
            area2 += cross;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        let area = 0.5 * area2;
        let centroid = if area.abs() > 0.0 {
            Point2::new(cx / (3.0 * area2), cy / (3.0 * area2))
        } else {
            // Fall back to the vertex average for degenerate loops.
            let s = vertices
                .iter()
                .fold(Vector2::zeros(), |acc, p| acc + p.coords);
            Point2::from(s / n as f64)
        };

        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                diameter = diameter.max((vertices[i] - vertices[j]).norm());
            }
        }

        let mut edges = Vec::with_capacity(n);
        let mut perimeter = 0.0;
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let t = q - p;
            let length = t.norm();
            perimeter += length;
            // CCW traversal keeps the interior on the left, so the outward
            // normal is the right-hand rotation of the tangent.
            let normal = Vector2::new(t.y, -t.x) / length;
            edges.push(EdgeGeometry {
                length,
                normal,
                endpoints: (p, q),
            });
        }

        Self {
            vertices,
            diameter,
            area,
            centroid,
            edges,
            perimeter,
        }
    }

    /// Shortest edge of the element.
    pub fn min_edge(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| e.length)
            .fold(f64::INFINITY, f64::min)
    }

    /// Degeneracy ratio h_P / min edge.
    pub fn gamma(&self) -> f64 {
        self.diameter / self.min_edge()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

/// Geometry of one mesh element.
pub fn element_geometry(mesh: &PolygonalMesh, elem: usize) -> ElementGeometry {
    let pts = mesh.elements[elem]
        .iter()
        .map(|&v| mesh.vertices[v])
        .collect();
    ElementGeometry::from_loop(pts)
}

/// Summary statistics of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub n_elements: usize,
    pub n_edges: usize,
    /// Largest element diameter.
    pub h: f64,
    /// Shortest edge of the mesh.
    pub h_min: f64,
    /// Largest per-element ratio diameter / own shortest edge.
    pub gamma_h: f64,
}

pub fn mesh_stats(mesh: &PolygonalMesh) -> MeshStats {
    let mut h: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut gamma_h: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let g = element_geometry(mesh, e);
        h = h.max(g.diameter);
        h_min = h_min.min(g.min_edge());
        gamma_h = gamma_h.max(g.gamma());
    }
    MeshStats {
        n_elements: mesh.n_elements(),
        n_edges: mesh.n_edges(),
        h,
        h_min,
        gamma_h,
    }
}
