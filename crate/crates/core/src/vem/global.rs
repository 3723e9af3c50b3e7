//! Global assembly, weak Dirichlet data, the linear solve and the
//! relative error norms of the discrete solution.

use super::local::{local_operators, local_rhs, local_stiffness, LocalElementOperators};
use super::{DofLayout, VemError};
use crate::linalg::{cg_jacobi, dense_solve, CsrMatrix, LinalgError};
use crate::mesh::{element_geometry, PolygonalMesh};
use crate::poly::{edge_quadrature, polygon_quadrature};
use crate::stab::{stabilization_matrix, StabKind};
use nalgebra::{DVector, Vector2};
use rayon::prelude::*;

/// Largest free block handed to the dense Cholesky; larger systems run
/// preconditioned conjugate gradients.
const DENSE_LIMIT: usize = 3000;
const CG_TOL: f64 = 1e-12;

pub type ScalarField<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);
pub type VectorField<'a> = &'a (dyn Fn(f64, f64) -> Vector2<f64> + Sync);

/// Assembled linear system with Dirichlet bookkeeping.
pub struct GlobalSystem {
    pub layout: DofLayout,
    pub matrix: CsrMatrix,
    pub rhs: DVector<f64>,
    /// Dirichlet values, nonzero only on constrained DOFs.
    pub dirichlet: DVector<f64>,
    /// Free-DOF mask (false on constrained DOFs).
    pub active: Vec<bool>,
}

impl GlobalSystem {
    pub fn n_free(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Dense copy of the free block (desk-scale diagnostics).
    pub fn dense_free_block(&self) -> nalgebra::DMatrix<f64> {
        let index: Vec<usize> = (0..self.layout.total)
            .filter(|&i| self.active[i])
            .collect();
        self.matrix.dense_submatrix(&index)
    }

    /// Solve for the full DOF vector (free values plus Dirichlet data),
    /// verifying the relative residual on the free block.
    pub fn solve(&self) -> Result<DVector<f64>, VemError> {
        // eliminate the constrained DOFs into the load vector
        let mut lifted = DVector::zeros(self.layout.total);
        self.matrix.matvec(&self.dirichlet, &mut lifted);
        let b = &self.rhs - lifted;

        let n_free = self.n_free();
        let mut x = if n_free == 0 {
            DVector::zeros(self.layout.total)
        } else if n_free <= DENSE_LIMIT {
            dense_solve(&self.matrix, &b, &self.active)?
        } else {
            let max_iter = 200 * (n_free as f64).sqrt() as usize + 2000;
            cg_jacobi(&self.matrix, &b, &self.active, CG_TOL, max_iter)?.0
        };

        // residual check on the free block
        let mut ax = DVector::zeros(self.layout.total);
        self.matrix.matvec_masked(&x, &self.active, &mut ax);
        let mut b_masked = b;
        for i in 0..self.layout.total {
            if !self.active[i] {
                b_masked[i] = 0.0;
            }
        }
        let scale = b_masked.norm();
        if scale > 0.0 {
            let res = (&ax - &b_masked).norm() / scale;
            if res > 1e-11 {
                return Err(VemError::Solve(LinalgError::SolveFailure {
                    residual: res,
                    iterations: 0,
                }));
            }
        }

        x += &self.dirichlet;
        Ok(x)
    }
}

/// Weak Dirichlet data: every boundary-edge moment is set to the
/// corresponding scaled moment of g, `(1/h_e) int_e g zeta_j`, evaluated
/// in the edge's global parametrization.
pub fn apply_dirichlet(
    mesh: &PolygonalMesh,
    layout: &DofLayout,
    g: ScalarField,
) -> (DVector<f64>, Vec<bool>) {
    let k = layout.k;
    let zeta = crate::poly::shifted_legendre_orthonormal(k);
    let rule = edge_quadrature(2 * k + 31);
    let mut values = DVector::zeros(layout.total);
    let mut active = vec![true; layout.total];
    for (e, &on_boundary) in layout.boundary_edges.iter().enumerate() {
        if !on_boundary {
            continue;
        }
        let (a, b) = mesh.edge_endpoints(e);
        for j in 0..k {
            let dof = layout.edge_dof(e, j);
            active[dof] = false;
            let row = zeta.row(j).transpose();
            values[dof] = rule.integrate(|t| {
                let p = a + (b - a) * t;
                g(p.x, p.y) * crate::poly::eval_u_poly(row.as_view(), t)
            });
        }
    }
    (values, active)
}

fn element_forward_flags(mesh: &PolygonalMesh, element: usize) -> Vec<bool> {
    mesh.element_edges(element).iter().map(|u| u.forward).collect()
}

/// Local operators for one mesh element (edge parametrizations follow the
/// global edge directions).
pub fn mesh_local_operators(
    mesh: &PolygonalMesh,
    element: usize,
    k: usize,
) -> Result<LocalElementOperators, VemError> {
    let geom = element_geometry(mesh, element);
    local_operators(&geom, k, &element_forward_flags(mesh, element), element)
}

/// Assemble the stiffness matrix and load vector for the Poisson problem
/// with stabilization `kind`, load `f` and Dirichlet data `g`.
pub fn assemble(
    mesh: &PolygonalMesh,
    k: usize,
    kind: StabKind,
    f: ScalarField,
    g: ScalarField,
) -> Result<GlobalSystem, VemError> {
    let layout = DofLayout::new(mesh, k);
    let locals: Vec<(Vec<usize>, nalgebra::DMatrix<f64>, DVector<f64>)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let geom = element_geometry(mesh, e);
            let ops = local_operators(&geom, k, &element_forward_flags(mesh, e), e).map_err(
                |err| VemError::Element {
                    element: e,
                    source: Box::new(err),
                },
            )?;
            let stab = stabilization_matrix(&geom, k, kind).map_err(|err| VemError::Element {
                element: e,
                source: Box::new(VemError::Stab(err)),
            })?;
            let m = local_stiffness(&ops, &stab);
            let b = local_rhs(&ops, f);
            Ok((layout.element_dofs(mesh, e), m, b))
        })
        .collect::<Result<_, VemError>>()?;

    let matrix = CsrMatrix::from_element_blocks(
        layout.total,
        locals.iter().map(|(d, m, _)| (d.as_slice(), m)),
    );
    let mut rhs = DVector::zeros(layout.total);
    for (dofs, _, b) in &locals {
        for (i, &g) in dofs.iter().enumerate() {
            rhs[g] += b[i];
        }
    }

    let (dirichlet, active) = apply_dirichlet(mesh, &layout, g);
    Ok(GlobalSystem {
        layout,
        matrix,
        rhs,
        dirichlet,
        active,
    })
}

/// Discrete solution together with its layout.
pub struct Solution {
    pub layout: DofLayout,
    pub dofs: DVector<f64>,
}

/// Assemble and solve in one step.
pub fn solve_poisson(
    mesh: &PolygonalMesh,
    k: usize,
    kind: StabKind,
    f: ScalarField,
    g: ScalarField,
) -> Result<Solution, VemError> {
    let system = assemble(mesh, k, kind, f, g)?;
    let dofs = system.solve()?;
    Ok(Solution {
        layout: system.layout,
        dofs,
    })
}

/// DOF vector of a smooth function (its virtual interpolant).
pub fn interpolate(mesh: &PolygonalMesh, k: usize, u: ScalarField) -> Result<DVector<f64>, VemError> {
    let layout = DofLayout::new(mesh, k);
    let mut dofs = DVector::zeros(layout.total);
    for e in 0..mesh.n_elements() {
        let ops = mesh_local_operators(mesh, e, k)?;
        let local = ops.interpolate(u);
        for (i, &g) in layout.element_dofs(mesh, e).iter().enumerate() {
            dofs[g] = local[i];
        }
    }
    Ok(dofs)
}

/// Relative errors of the discrete solution:
/// `e0 = |u - P^0_k u_h|_0 / |u|_0` with the enhanced L^2 projection, and
/// `e1 = |grad u - P^0_{k-1} grad u_h|_0 / |grad u|_0` with the gradient
/// projection computed from the DOFs by integration by parts.
pub fn compute_errors(
    mesh: &PolygonalMesh,
    k: usize,
    dofs: &DVector<f64>,
    u: ScalarField,
    grad_u: VectorField,
) -> Result<(f64, f64), VemError> {
    let layout = DofLayout::new(mesh, k);
    let order = 12.max(2 * k + 2);
    let parts: Vec<(f64, f64, f64, f64)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let ops = mesh_local_operators(mesh, e, k)?;
            let local_dofs = DVector::from_iterator(
                layout.element_dofs(mesh, e).len(),
                layout.element_dofs(mesh, e).iter().map(|&g| dofs[g]),
            );
            let value_coeffs = &ops.l2_proj * &local_dofs;
            let gx = &ops.grad_l2_proj[0] * &local_dofs;
            let gy = &ops.grad_l2_proj[1] * &local_dofs;
            let rule = polygon_quadrature(&ops.geom, order)?;
            let n_km1 = gx.len();
            let (mut n0, mut d0, mut n1, mut d1) = (0.0, 0.0, 0.0, 0.0);
            for (p, &w) in rule.nodes.iter().zip(&rule.weights) {
                let qv = ops.eval_q_basis(*p);
                let uh: f64 = (0..qv.len()).map(|i| value_coeffs[i] * qv[i]).sum();
                let gpx: f64 = (0..n_km1).map(|i| gx[i] * qv[i]).sum();
                let gpy: f64 = (0..n_km1).map(|i| gy[i] * qv[i]).sum();
                let ue = u(p.x, p.y);
                let ge = grad_u(p.x, p.y);
                n0 += w * (ue - uh) * (ue - uh);
                d0 += w * ue * ue;
                n1 += w * ((ge.x - gpx).powi(2) + (ge.y - gpy).powi(2));
                d1 += w * (ge.x * ge.x + ge.y * ge.y);
            }
            Ok((n0, d0, n1, d1))
        })
        .collect::<Result<_, VemError>>()?;
    let (n0, d0, n1, d1) = parts.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, p| {
        (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2, acc.3 + p.3)
    });
    Ok(((n0 / d0).sqrt(), (n1 / d1).sqrt()))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        generate_dyadic_square_mesh, generate_hexagonal_collapse_mesh, generate_nside_mesh,
    };
    use approx::assert_relative_eq;

    #[test]
    fn patch_test_linear_k1() {
        // g = trace of u = x + y, f = 0: the method reproduces u exactly
        let mesh = generate_dyadic_square_mesh(2, 0);
        let u = |x: f64, y: f64| x + y;
        let sol = solve_poisson(&mesh, 1, StabKind::Dofi, &|_, _| 0.0, &u).unwrap();
        let interp = interpolate(&mesh, 1, &u).unwrap();
        assert!(
            (&sol.dofs - &interp).norm() < 1e-10 * interp.norm(),
            "patch test dof mismatch: {}",
            (&sol.dofs - &interp).norm()
        );
        let (e0, e1) = compute_errors(&mesh, 1, &sol.dofs, &u, &|_, _| {
            Vector2::new(1.0, 1.0)
        })
        .unwrap();
        assert!(e0 <= 1e-10 && e1 <= 1e-10, "e0={e0}, e1={e1}");
    }

    #[test]
    fn interpolant_errors_vanish_for_linears() {
        let mesh = generate_dyadic_square_mesh(2, 1);
        let u = |x: f64, y: f64| x + y;
        let dofs = interpolate(&mesh, 1, &u).unwrap();
        let (e0, e1) =
            compute_errors(&mesh, 1, &dofs, &u, &|_, _| Vector2::new(1.0, 1.0)).unwrap();
        assert!(e0 <= 1e-10 && e1 <= 1e-10, "e0={e0}, e1={e1}");
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let mesh = generate_dyadic_square_mesh(2, 1);
        let sys = assemble(&mesh, 2, StabKind::DualL2, &|_, _| 1.0, &|_, _| 0.0).unwrap();
        assert!(sys.matrix.max_asymmetry() <= 1e-12);
    }

    #[test]
    fn free_block_positive_definite_all_stabilizations() {
        let mesh = generate_dyadic_square_mesh(4, 1);
        for kind in StabKind::ALL {
            let sys = assemble(&mesh, 2, kind, &|_, _| 1.0, &|_, _| 0.0).unwrap();
            let block = sys.dense_free_block();
            let eig = block.symmetric_eigen().eigenvalues;
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "free block not SPD for {kind}: min eig {min}");
        }
    }

    #[test]
    fn dirichlet_moments() {
        let mesh = generate_dyadic_square_mesh(8, 1);
        let layout = DofLayout::new(&mesh, 1);
        // g = 0: all boundary DOFs zero
        let (v, _) = apply_dirichlet(&mesh, &layout, &|_, _| 0.0);
        assert_eq!(v.norm(), 0.0);
        // g = 1: every boundary constant moment is 1
        let (v, active) = apply_dirichlet(&mesh, &layout, &|_, _| 1.0);
        for (e, &b) in layout.boundary_edges.iter().enumerate() {
            if b {
                assert_relative_eq!(v[layout.edge_dof(e, 0)], 1.0, max_relative = 1e-13);
                assert!(!active[layout.edge_dof(e, 0)]);
            }
        }
        // trig trace on a bottom edge: constant moment equals the average,
        // cross-checked with a 20-point Gauss rule
        let g = |x: f64, y: f64| {
            (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos()
                / (2.0 * std::f64::consts::PI * std::f64::consts::PI)
        };
        let (v, _) = apply_dirichlet(&mesh, &layout, &g);
        let bottom = mesh
            .edges()
            .iter()
            .position(|ed| {
                let (a, b) = (mesh.vertex(ed.vertices.0), mesh.vertex(ed.vertices.1));
                a.y == 0.0 && b.y == 0.0 && a.x.min(b.x) == 0.0
            })
            .unwrap();
        let (a, b) = mesh.edge_endpoints(bottom);
        let gauss = crate::poly::edge_quadrature(39);
        let avg = gauss.integrate(|t| {
            let p = a + (b - a) * t;
            g(p.x, p.y)
        });
        assert_relative_eq!(v[layout.edge_dof(bottom, 0)], avg, max_relative = 1e-12);
    }

    #[test]
    fn patch_test_quadratic_on_general_meshes() {
        // u in P_2 with matching f and g: errors at rounding level
        let u = |x: f64, y: f64| (x + 2.0 * y) * (x + 2.0 * y);
        let grad = |x: f64, y: f64| Vector2::new(2.0 * (x + 2.0 * y), 4.0 * (x + 2.0 * y));
        let f = |_: f64, _: f64| -10.0; // -lap u = -(2 + 8)
        for mesh in [
            generate_hexagonal_collapse_mesh(1, 0.5).unwrap(),
            generate_nside_mesh(1, false).unwrap(),
        ] {
            let sol = solve_poisson(&mesh, 2, StabKind::DualSqrtLb, &f, &u).unwrap();
            let (e0, e1) = compute_errors(&mesh, 2, &sol.dofs, &u, &grad).unwrap();
            assert!(e0 <= 1e-9 && e1 <= 1e-9, "e0={e0}, e1={e1}");
        }
    }
}
