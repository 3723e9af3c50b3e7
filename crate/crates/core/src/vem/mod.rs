//! Local nonconforming virtual element machinery (degrees of freedom,
//! projectors, consistency term), global assembly with weak Dirichlet
//! data, the solve, and error evaluation.
//!
//! Degrees of freedom of a local function v:
//!
//! * per edge, the scaled moments `(1/h_e) int_e v zeta_j` against the
//!   L^2(0,1)-orthonormal edge polynomials, `j < k`, taken in the edge's
//!   global direction (low vertex index to high). Odd-degree moments of
//!   the two incident elements then agree without sign bookkeeping
//!   because both elements use the same parametrization.
//! * per element, the scaled moments `(1/|P|) int_P v q_a` against the
//!   orthonormalized element polynomials of degree up to k-2.

mod global;
mod local;

pub use global::{
    apply_dirichlet, assemble, compute_errors, interpolate, mesh_local_operators, solve_poisson,
    GlobalSystem, Solution,
};
pub use local::{local_operators, local_rhs, local_stiffness, LocalElementOperators};

use crate::linalg::LinalgError;
use crate::mesh::PolygonalMesh;
use crate::poly::PolyError;
use crate::stab::StabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("elliptic projector system is singular on element {element}")]
    SingularProjector { element: usize },
    #[error("element {element}: {source}")]
    Element {
        element: usize,
        source: Box<VemError>,
    },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Stab(#[from] StabError),
    #[error(transparent)]
    Solve(#[from] LinalgError),
}

/// Global DOF numbering: edge-major (k moments per edge), then
/// element-interior moments.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub k: usize,
    pub n_edges: usize,
    pub n_elements: usize,
    pub interior_per_element: usize,
    pub total: usize,
    /// Edges on the domain boundary (their DOFs carry Dirichlet data).
    pub boundary_edges: Vec<bool>,
}

impl DofLayout {
    pub fn new(mesh: &PolygonalMesh, k: usize) -> Self {
        assert!(k >= 1, "polynomial degree must be at least 1");
        let interior_per_element = k * (k - 1) / 2;
        let boundary_edges = mesh.edges().iter().map(|e| e.is_boundary()).collect();
        Self {
            k,
            n_edges: mesh.n_edges(),
            n_elements: mesh.n_elements(),
            interior_per_element,
            total: mesh.n_edges() * k + mesh.n_elements() * interior_per_element,
            boundary_edges,
        }
    }

    pub fn edge_dof(&self, edge: usize, j: usize) -> usize {
        debug_assert!(j < self.k);
        edge * self.k + j
    }

    pub fn interior_dof(&self, element: usize, a: usize) -> usize {
        debug_assert!(a < self.interior_per_element);
        self.n_edges * self.k + element * self.interior_per_element + a
    }

    /// Global indices of an element's local DOFs, edge-major in loop
    /// order, then interior.
    pub fn element_dofs(&self, mesh: &PolygonalMesh, element: usize) -> Vec<usize> {
        let uses = mesh.element_edges(element);
        let mut dofs = Vec::with_capacity(uses.len() * self.k + self.interior_per_element);
        for u in uses {
            for j in 0..self.k {
                dofs.push(self.edge_dof(u.edge, j));
            }
        }
        for a in 0..self.interior_per_element {
            dofs.push(self.interior_dof(element, a));
        }
        dofs
    }

    /// DOFs constrained by Dirichlet data.
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (e, &b) in self.boundary_edges.iter().enumerate() {
            if b {
                for j in 0..self.k {
                    out.push(self.edge_dof(e, j));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_dyadic_square_mesh;

    #[test]
    fn dof_counts() {
        // k=1 quadrilateral: 4 local dofs, no interior
        let mesh = generate_dyadic_square_mesh(1, 0);
        let layout = DofLayout::new(&mesh, 1);
        assert_eq!(layout.total, 4);
        assert_eq!(layout.element_dofs(&mesh, 0).len(), 4);
        let layout = DofLayout::new(&mesh, 3);
        assert_eq!(layout.element_dofs(&mesh, 0).len(), 4 * 3 + 3);
        assert_eq!(layout.dirichlet_dofs().len(), 4 * 3);
    }

    #[test]
    fn dof_counts_hexagon_and_triangle() {
        use nalgebra::Point2;
        // k=2 hexagon: 6*2 + 1 = 13 local dofs
        let hexagon = crate::mesh::PolygonalMesh::from_parts(
            (0..6)
                .map(|i| {
                    let a = std::f64::consts::PI / 3.0 * i as f64;
                    Point2::new(a.cos(), a.sin())
                })
                .collect(),
            vec![vec![0, 1, 2, 3, 4, 5]],
        )
        .unwrap();
        let layout = DofLayout::new(&hexagon, 2);
        assert_eq!(layout.element_dofs(&hexagon, 0).len(), 13);
        // k=3 triangle: 3*3 + 3 = 12 local dofs
        let triangle = crate::mesh::PolygonalMesh::from_parts(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let layout = DofLayout::new(&triangle, 3);
        assert_eq!(layout.element_dofs(&triangle, 0).len(), 12);
    }
}
