//! Independent brute-force references used to verify the spectral
//! equivalences numerically: a fine piecewise-linear FEM evaluation of the
//! dual seminorm `|gamma* eta|_{-1,P}`, the spectral H^{-1/2} seminorm of
//! piecewise constants on the circle, and the reference-interval inf-sup
//! constant between P_{k-1} and the degree-(k+1) bubble space.
//!
//! Nothing here is used by the production solver path.

use crate::mesh::ElementGeometry;
use crate::poly::{edge_quadrature, shifted_legendre_orthonormal, PolyError};
use nalgebra::{DMatrix, DVector, Point2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle FEM solve failed")]
    SolveFailure,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Piecewise polynomial on an element boundary, edge-major coefficients
/// in the orthonormal edge basis, parametrized along the element loop.
#[derive(Debug, Clone)]
pub struct BoundaryPiecewisePoly {
    pub k: usize,
    pub coeffs: Vec<f64>,
    legendre: DMatrix<f64>,
}

impl BoundaryPiecewisePoly {
    pub fn new(k: usize, coeffs: Vec<f64>) -> Self {
        Self {
            k,
            coeffs,
            legendre: shifted_legendre_orthonormal(k),
        }
    }

    pub fn eval(&self, edge: usize, t: f64) -> f64 {
        (0..self.k)
            .map(|j| {
                self.coeffs[edge * self.k + j]
                    * crate::poly::eval_u_poly(self.legendre.row(j).transpose().as_view(), t)
            })
            .sum()
    }
}

/// Fine P1 triangulation of a polygon with a factored saddle system for
/// the Riesz problem; reusable across right-hand sides.
pub struct RieszOracle {
    stiffness: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// boundary sub-segments: (polygon edge, t0, t1, node a, node b)
    boundary: Vec<(usize, f64, f64, usize, usize)>,
    n_nodes: usize,
}

impl RieszOracle {
    /// Triangulate by a centroid fan refined until every triangle edge is
    /// at most `fineness`, assemble the P1 stiffness, and factor the
    /// saddle system with the zero-boundary-average constraint.
    pub fn new(geom: &ElementGeometry, fineness: f64) -> Result<Self, OracleError> {
        let n_e = geom.n_edges();
        let c = geom.centroid;
        let max_edge = geom
            .vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0_f64, f64::max)
            .max(geom.edges.iter().map(|e| e.length).fold(0.0, f64::max));
        let div = (max_edge / fineness).log2().ceil().max(0.0) as u32;
        let n = 1usize << div;

        // Nodes keyed structurally so shared fan boundaries coincide.
        #[derive(Hash, PartialEq, Eq, Clone, Copy)]
        enum Key {
            Center,
            Vertex(usize),
            Spoke(usize, usize),
            Boundary(usize, usize),
            Interior(usize, usize, usize),
        }
        let mut ids: std::collections::HashMap<Key, usize> = std::collections::HashMap::new();
        let mut nodes: Vec<Point2<f64>> = Vec::new();
        let mut node = |key: Key, pos: Point2<f64>, nodes: &mut Vec<Point2<f64>>| -> usize {
            *ids.entry(key).or_insert_with(|| {
                nodes.push(pos);
                nodes.len() - 1
            })
        };

        let mut tris: Vec<[usize; 3]> = Vec::new();
        let mut boundary = Vec::new();
        for t in 0..n_e {
            let va = geom.vertices[t];
            let vb = geom.vertices[(t + 1) % n_e];
            let a = va - c;
            let b = vb - c;
            let pos = |i: usize, j: usize| c + (a * i as f64 + b * j as f64) / n as f64;
            let key = |i: usize, j: usize| -> Key {
                match (i, j) {
                    (0, 0) => Key::Center,
                    (i, 0) if i == n => Key::Vertex(t),
                    (0, j) if j == n => Key::Vertex((t + 1) % n_e),
                    (i, 0) => Key::Spoke(t, i),
                    (0, j) => Key::Spoke((t + 1) % n_e, j),
                    (i, j) if i + j == n => Key::Boundary(t, j),
                    (i, j) => Key::Interior(t, i, j),
                }
            };
            let mut id = |i: usize, j: usize, nodes: &mut Vec<Point2<f64>>| {
                node(key(i, j), pos(i, j), nodes)
            };
            for i in 0..n {
                for j in 0..(n - i) {
                    let p00 = id(i, j, &mut nodes);
                    let p10 = id(i + 1, j, &mut nodes);
                    let p01 = id(i, j + 1, &mut nodes);
                    tris.push([p00, p10, p01]);
                    if i + j + 2 <= n {
                        let p11 = id(i + 1, j + 1, &mut nodes);
                        tris.push([p10, p11, p01]);
                    }
                }
            }
            for j in 0..n {
                let na = id(n - j, j, &mut nodes);
                let nb = id(n - j - 1, j + 1, &mut nodes);
                boundary.push((t, j as f64 / n as f64, (j + 1) as f64 / n as f64, na, nb));
            }
        }

        let n_nodes = nodes.len();
        let mut k_mat = DMatrix::zeros(n_nodes, n_nodes);
        for tri in &tris {
            let [p, q, r] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
            let area2 = (q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y);
            if area2 <= 0.0 {
                return Err(OracleError::SolveFailure);
            }
            // gradients of the barycentric shape functions
            let grads = [
                nalgebra::Vector2::new(q.y - r.y, r.x - q.x) / area2,
                nalgebra::Vector2::new(r.y - p.y, p.x - r.x) / area2,
                nalgebra::Vector2::new(p.y - q.y, q.x - p.x) / area2,
            ];
            for i in 0..3 {
                for j in 0..3 {
                    k_mat[(tri[i], tri[j])] += 0.5 * area2 * grads[i].dot(&grads[j]);
                }
            }
        }

        // zero-boundary-average constraint: c_i = int_{dP} phi_i
        let mut constraint = DVector::zeros(n_nodes);
        for &(edge, t0, t1, a, b) in &boundary {
            let len = geom.edges[edge].length * (t1 - t0);
            constraint[a] += 0.5 * len;
            constraint[b] += 0.5 * len;
        }

        let mut saddle = DMatrix::zeros(n_nodes + 1, n_nodes + 1);
        saddle.view_mut((0, 0), (n_nodes, n_nodes)).copy_from(&k_mat);
        for i in 0..n_nodes {
            saddle[(i, n_nodes)] = constraint[i];
            saddle[(n_nodes, i)] = constraint[i];
        }
        let lu = saddle.lu();
        Ok(Self {
            stiffness: k_mat,
            lu,
            boundary,
            n_nodes,
        })
    }

    /// Squared dual seminorm `|gamma* eta|^2_{-1,P}`: energy of the Riesz
    /// representer of eta against traces with zero boundary average.
    pub fn seminorm_sq(&self, geom: &ElementGeometry, eta: &BoundaryPiecewisePoly) -> f64 {
        let rule = edge_quadrature(2 * eta.k + 4);
        let mut rhs = DVector::zeros(self.n_nodes + 1);
        for &(edge, t0, t1, a, b) in &self.boundary {
            let len = geom.edges[edge].length * (t1 - t0);
            let mut fa = 0.0;
            let mut fb = 0.0;
            for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                let t = t0 + s * (t1 - t0);
                let v = eta.eval(edge, t);
                fa += w * len * v * (1.0 - s);
                fb += w * len * v * s;
            }
            rhs[a] += fa;
            rhs[b] += fb;
        }
        let sol = self.lu.solve(&rhs).expect("saddle factorization is regular");
        let w = sol.rows(0, self.n_nodes).into_owned();
        (w.transpose() * &self.stiffness * &w)[(0, 0)]
    }
}

/// One-shot evaluation of the dual seminorm; see [`RieszOracle`].
pub fn riesz_dual_seminorm(
    geom: &ElementGeometry,
    eta: &BoundaryPiecewisePoly,
    fineness: f64,
) -> Result<f64, OracleError> {
    Ok(RieszOracle::new(geom, fineness)?.seminorm_sq(geom, eta))
}

/// Spectral H^{-1/2} seminorm of a zero-average piecewise constant on the
/// uniform 2^M grid of the unit-length circle:
/// `sum_{0<|n|<=n_max} |c_n|^2 / |n|` with analytic Fourier coefficients.
/// The mean is subtracted from the input.
pub fn fourier_minus_half(values: &[f64], n_max: usize) -> f64 {
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    let v: Vec<f64> = values.iter().map(|&x| x - mean).collect();
    let h = 1.0 / m as f64;
    let mut acc = 0.0;
    for n in 1..=n_max {
        let freq = n as f64;
        // c_n = sum_k v_k e^{-2 pi i n (k + 1/2) h} * sin(pi n h) / (pi n)
        let (mut re, mut im) = (0.0, 0.0);
        for (kk, &vk) in v.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * freq * (kk as f64 + 0.5) * h;
            re += vk * phase.cos();
            im += vk * phase.sin();
        }
        let sinc = (std::f64::consts::PI * freq * h).sin() / (std::f64::consts::PI * freq);
        let c2 = (re * re + im * im) * sinc * sinc;
        // real input: |c_{-n}| = |c_n|
        acc += 2.0 * c2 / freq;
    }
    acc
}

/// Discrete inf-sup constant on the reference interval: smallest singular
/// value of the coupling between L^2-orthonormal bases of P_{k-1} and of
/// the degree-(k+1) polynomial bubble space on [0, 1].
pub fn infsup_reference(k: usize) -> f64 {
    assert!((1..=8).contains(&k));
    let rule = edge_quadrature(2 * k + 6);
    let legendre = shifted_legendre_orthonormal(k);
    // bubble space: x(1-x) * u^j, orthonormalized in L^2(0,1)
    let bubble = |j: usize, t: f64| t * (1.0 - t) * (t - 0.5).powi(j as i32);
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gram[(i, j)] = rule.integrate(|t| bubble(i, t) * bubble(j, t));
        }
    }
    let transform = crate::poly::orthonormalize(&gram).expect("bubble gram is positive definite");
    let mut coupling = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            coupling[(i, j)] = rule.integrate(|t| {
                let a = crate::poly::eval_u_poly(legendre.row(i).transpose().as_view(), t);
                let b: f64 = (0..k).map(|p| transform[(j, p)] * bubble(p, t)).sum();
                a * b
            });
        }
    }
    coupling
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square_geom() -> ElementGeometry {
        ElementGeometry::from_loop(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
    }

    #[test]
    fn riesz_annihilates_constants() {
        let geom = unit_square_geom();
        let eta = BoundaryPiecewisePoly::new(1, vec![1.0; 4]);
        let v = riesz_dual_seminorm(&geom, &eta, 0.2).unwrap();
        assert!(v.abs() < 1e-18, "constant should give zero, got {v}");
    }

    #[test]
    fn riesz_constant_shift_invariance_and_scaling() {
        let geom = unit_square_geom();
        let oracle = RieszOracle::new(&geom, 0.15).unwrap();
        let eta = BoundaryPiecewisePoly::new(1, vec![1.0, -1.0, 1.0, -1.0]);
        let base = oracle.seminorm_sq(&geom, &eta);
        // (4,2,4,2) = 3 + (1,-1,1,-1): adding a constant changes nothing
        let shifted = BoundaryPiecewisePoly::new(1, vec![4.0, 2.0, 4.0, 2.0]);
        let shifted_val = oracle.seminorm_sq(&geom, &shifted);
        assert_relative_eq!(shifted_val, base, max_relative = 1e-8);
        // quadratic form scaling
        let doubled = BoundaryPiecewisePoly::new(1, vec![2.0, -2.0, 2.0, -2.0]);
        assert_relative_eq!(
            oracle.seminorm_sq(&geom, &doubled),
            4.0 * base,
            max_relative = 1e-9
        );
    }

    #[test]
    fn riesz_self_convergence() {
        let geom = unit_square_geom();
        let eta = BoundaryPiecewisePoly::new(1, vec![1.0, -1.0, 1.0, -1.0]);
        let coarse = riesz_dual_seminorm(&geom, &eta, geom.diameter / 8.0).unwrap();
        let fine = riesz_dual_seminorm(&geom, &eta, geom.diameter / 16.0).unwrap();
        assert!(
            (coarse - fine).abs() / fine < 0.05,
            "self-convergence failed: {coarse} vs {fine}"
        );
    }

    #[test]
    fn fourier_basics() {
        assert_eq!(fourier_minus_half(&[2.5; 16], 64), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let v: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = fourier_minus_half(&v, 1024);
        let mut rotated = v.clone();
        rotated.rotate_right(5);
        let b = fourier_minus_half(&rotated, 1024);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn fourier_truncation_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..6 {
            let v: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = fourier_minus_half(&v, 1 << 10);
            let b = fourier_minus_half(&v, 1 << 11);
            assert!(
                (b - a).abs() / b < 0.01,
                "truncation tail too fat: {a} vs {b}"
            );
        }
    }

    #[test]
    fn fourier_representation_invariance() {
        // the same step profile represented on grids M and M+1
        let coarse: Vec<f64> = vec![1.0, 1.0, -1.0, -1.0, 0.5, 0.5, -0.5, -0.5];
        let fine: Vec<f64> = coarse.iter().flat_map(|&x| [x, x]).collect();
        let a = fourier_minus_half(&coarse, 4096);
        let b = fourier_minus_half(&fine, 4096);
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn infsup_k1_closed_form() {
        // coupling of the constant with the normalized bubble:
        // (1/6) / sqrt(1/30) = sqrt(30)/6
        let v = infsup_reference(1);
        assert_relative_eq!(v, 30.0_f64.sqrt() / 6.0, epsilon = 1e-10);
    }

    #[test]
    fn infsup_uniform_lower_bound() {
        for k in 1..=4 {
            let v = infsup_reference(k);
            assert!(v > 0.1, "inf-sup constant too small at k={k}: {v}");
        }
    }

    #[test]
    fn infsup_basis_independent() {
        // direct route from raw (non-orthonormal) bases: sigma_min of
        // T_a C T_b^T is unchanged by the choice of orthonormalization
        let k = 3;
        let v = infsup_reference(k);
        let rule = edge_quadrature(2 * k + 8);
        let poly = |i: usize, t: f64| (t - 0.5).powi(i as i32);
        let bubble = |j: usize, t: f64| t * (1.0 - t) * (t - 0.5).powi(j as i32);
        let mut a = DMatrix::zeros(k, k);
        let mut b = DMatrix::zeros(k, k);
        let mut c = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                a[(i, j)] = rule.integrate(|t| poly(i, t) * poly(j, t));
                b[(i, j)] = rule.integrate(|t| bubble(i, t) * bubble(j, t));
                c[(i, j)] = rule.integrate(|t| poly(i, t) * bubble(j, t));
            }
        }
        let ta = crate::poly::orthonormalize(&a).unwrap();
        let tb = crate::poly::orthonormalize(&b).unwrap();
        let m = ta * c * tb.transpose();
        let direct = m
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(v, direct, epsilon = 1e-12);
    }
}
