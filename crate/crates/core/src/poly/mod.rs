//! Polynomial bases, calculus and quadrature on edges and star-shaped
//! polygons.
//!
//! All 2D polynomial spaces use scaled monomials `((x - x_c)/h)^a ((y - y_c)/h)^b`
//! in a fixed graded-lexicographic order shared by every module, so matrix
//! layouts are reproducible. 1D polynomials on an edge use powers of
//! `u = t - 1/2` where `t in [0,1]` parametrizes the edge; with the
//! arclength scaling of the edge moments this makes the 1D basis
//! edge-independent.

mod quadrature;

pub use quadrature::{edge_quadrature, polygon_quadrature, EdgeRule, QuadratureRule};

use crate::mesh::ElementGeometry;
use nalgebra::{DMatrix, DVector, Point2, Vector2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("gram matrix not positive definite: pivot {pivot:.3e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

/// Number of bivariate monomials of degree <= `degree`.
pub fn space_dim(degree: i64) -> usize {
    if degree < 0 {
        0
    } else {
        ((degree + 1) * (degree + 2) / 2) as usize
    }
}

/// Exponent pairs in graded-lexicographic order:
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
pub fn exponents(degree: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(space_dim(degree as i64));
    for d in 0..=degree as u32 {
        for j in 0..=d {
            out.push((d - j, j));
        }
    }
    out
}

/// Scaled monomial basis on a 2D domain with center `x_c` and scale `h`.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub degree: usize,
    pub center: Point2<f64>,
    pub scale: f64,
    exps: Vec<(u32, u32)>,
}

impl MonomialBasis {
    pub fn new(degree: usize, center: Point2<f64>, scale: f64) -> Self {
        Self {
            degree,
            center,
            scale,
            exps: exponents(degree),
        }
    }

    /// Basis attached to an element: centroid center, diameter scale.
    pub fn for_element(degree: usize, geom: &ElementGeometry) -> Self {
        Self::new(degree, geom.centroid, geom.diameter)
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exps
    }

    fn local(&self, p: Point2<f64>) -> (f64, f64) {
        (
            (p.x - self.center.x) / self.scale,
            (p.y - self.center.y) / self.scale,
        )
    }

    pub fn eval(&self, i: usize, p: Point2<f64>) -> f64 {
        let (x, y) = self.local(p);
        let (a, b) = self.exps[i];
        x.powi(a as i32) * y.powi(b as i32)
    }

    pub fn eval_all(&self, p: Point2<f64>) -> DVector<f64> {
        let (x, y) = self.local(p);
        DVector::from_iterator(
            self.exps.len(),
            self.exps
                .iter()
                .map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32)),
        )
    }

    pub fn eval_grad(&self, i: usize, p: Point2<f64>) -> Vector2<f64> {
        let (x, y) = self.local(p);
        let (a, b) = self.exps[i];
        let (a, b) = (a as i32, b as i32);
        let gx = if a == 0 {
            0.0
        } else {
            a as f64 * x.powi(a - 1) * y.powi(b) / self.scale
        };
        let gy = if b == 0 {
            0.0
        } else {
            b as f64 * x.powi(a) * y.powi(b - 1) / self.scale
        };
        Vector2::new(gx, gy)
    }

    /// Evaluate a polynomial with the given coefficient vector.
    pub fn eval_poly(&self, coeffs: &DVector<f64>, p: Point2<f64>) -> f64 {
        coeffs.dot(&self.eval_all(p))
    }

    /// Coefficients (in powers of `u = t - 1/2`) of the restriction of a
    /// 2D polynomial to the segment `a + t (b - a)`, `t in [0, 1]`.
    ///
    /// Exact: each scaled coordinate is affine in `u`, so the restriction
    /// is a product of binomial expansions.
    pub fn restrict_to_segment(
        &self,
        coeffs: &DVector<f64>,
        a: Point2<f64>,
        b: Point2<f64>,
    ) -> DVector<f64> {
        let mid = nalgebra::center(&a, &b);
        let alpha = (mid - self.center) / self.scale;
        let beta = (b - a) / self.scale;
        let deg = self.degree;
        let mut out = DVector::zeros(deg + 1);
        let mut pow_x = vec![DVector::<f64>::zeros(deg + 1); deg + 1];
        let mut pow_y = vec![DVector::<f64>::zeros(deg + 1); deg + 1];
        // (alpha + beta u)^p by repeated multiplication
        for (pows, alpha_c, beta_c) in [
            (&mut pow_x, alpha.x, beta.x),
            (&mut pow_y, alpha.y, beta.y),
        ] {
            pows[0][0] = 1.0;
            for p in 1..=deg {
                for j in 0..p {
                    let c = pows[p - 1][j];
                    if c != 0.0 {
                        pows[p][j] += c * alpha_c;
                        pows[p][j + 1] += c * beta_c;
                    }
                }
            }
        }
        for (i, &(p, q)) in self.exps.iter().enumerate() {
            let c = coeffs[i];
            if c == 0.0 {
                continue;
            }
            let (xp, yq) = (&pow_x[p as usize], &pow_y[q as usize]);
            for jx in 0..=p as usize {
                let cx = xp[jx];
                if cx == 0.0 {
                    continue;
                }
                for jy in 0..=q as usize {
                    out[jx + jy] += c * cx * yq[jy];
                }
            }
        }
        out
    }
}

/// Coefficient matrices for exact polynomial differentiation on a
/// [`MonomialBasis`]: `dx * c` are the coefficients of the x-derivative of
/// the polynomial with coefficients `c`, and likewise for `dy` and the
/// Laplacian.
#[derive(Debug, Clone)]
pub struct PolyCalculus {
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
}

pub fn poly_calculus(basis: &MonomialBasis) -> PolyCalculus {
    let n = basis.len();
    let exps = basis.exponents();
    let mut index = std::collections::HashMap::new();
    for (i, &e) in exps.iter().enumerate() {
        index.insert(e, i);
    }
    let mut dx = DMatrix::zeros(n, n);
    let mut dy = DMatrix::zeros(n, n);
    for (i, &(a, b)) in exps.iter().enumerate() {
        if a > 0 {
            dx[(index[&(a - 1, b)], i)] = a as f64 / basis.scale;
        }
        if b > 0 {
            dy[(index[&(a, b - 1)], i)] = b as f64 / basis.scale;
        }
    }
    let laplacian = &dx * &dx + &dy * &dy;
    PolyCalculus { dx, dy, laplacian }
}

/// Lower-triangular Cholesky factor L of a symmetric positive-definite
/// matrix, with an explicit pivot threshold.
pub fn cholesky_lower(gram: &DMatrix<f64>) -> Result<DMatrix<f64>, PolyError> {
    let n = gram.nrows();
    let max_diag = (0..n).map(|i| gram[(i, i)]).fold(0.0_f64, f64::max);
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = gram[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-14 * max_diag {
            return Err(PolyError::NotPositiveDefinite { index: j, pivot: d });
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut v = gram[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / dj;
        }
    }
    Ok(l)
}

fn invert_lower(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = 1.0 / l[(col, col)];
        for i in (col + 1)..n {
            let mut s = 0.0;
            for k in col..i {
                s += l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s / l[(i, i)];
        }
    }
    inv
}

/// Inverse-Cholesky orthonormalization: returns the lower-triangular `T`
/// with `T * gram * T^T = I`. Applied to a graded basis, row `i` of `T`
/// gives the coefficients of the i-th orthonormal function in terms of the
/// original basis, and the construction is nested: function `i` involves
/// only original functions `0..=i`.
pub fn orthonormalize(gram: &DMatrix<f64>) -> Result<DMatrix<f64>, PolyError> {
    Ok(invert_lower(&cholesky_lower(gram)?))
}

/// Orthonormalized polynomial basis over a [`MonomialBasis`]: function
/// `q_i = sum_j coeffs[(i, j)] m_j`, with the Gram matrix of the `q_i`
/// under the source inner product equal to the identity. The transform is
/// nested (lower triangular), so the leading functions span the
/// lower-degree subspaces.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    pub basis: MonomialBasis,
    /// Lower-triangular change of basis from monomials.
    pub coeffs: DMatrix<f64>,
    /// Its inverse (the Cholesky factor of the source Gram): m = factor q.
    pub factor: DMatrix<f64>,
}

impl OrthoBasis {
    /// Orthonormalize against a Gram matrix of the monomials.
    pub fn from_gram(basis: MonomialBasis, gram: &DMatrix<f64>) -> Result<Self, PolyError> {
        let factor = cholesky_lower(gram)?;
        let coeffs = invert_lower(&factor);
        Ok(Self {
            basis,
            coeffs,
            factor,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Values of all orthonormal functions at a point.
    pub fn eval_all(&self, p: Point2<f64>) -> DVector<f64> {
        &self.coeffs * self.basis.eval_all(p)
    }

    /// Monomial coefficients of the i-th function.
    pub fn monomial_row(&self, i: usize) -> DVector<f64> {
        self.coeffs.row(i).transpose()
    }
}

/// L^2(0,1)-orthonormal polynomial basis in powers of `u = t - 1/2`:
/// row `j` holds the coefficients of the degree-`j` function. With the
/// edge moments scaled by 1/h_e these functions are orthonormal on every
/// edge; the degree-0 function is the constant 1 and all higher ones have
/// zero average.
pub fn shifted_legendre_orthonormal(n_funcs: usize) -> DMatrix<f64> {
    let mut gram = DMatrix::zeros(n_funcs, n_funcs);
    for i in 0..n_funcs {
        for j in 0..n_funcs {
            let p = i + j;
            if p % 2 == 0 {
                gram[(i, j)] = 0.5f64.powi(p as i32) / (p + 1) as f64;
            }
        }
    }
    orthonormalize(&gram).expect("power-basis gram is positive definite")
}

/// Evaluate the function with coefficient row `row` (in powers of
/// `u = t - 1/2`) at parameter `t`.
pub fn eval_u_poly(coeffs: nalgebra::DVectorView<f64>, t: f64) -> f64 {
    let u = t - 0.5;
    let mut acc = 0.0;
    for i in (0..coeffs.len()).rev() {
        acc = acc * u + coeffs[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponent_order_is_graded_lex() {
        assert_eq!(
            exponents(2),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        assert_eq!(space_dim(3), 10);
        assert_eq!(space_dim(-1), 0);
    }

    #[test]
    fn monomial_is_one_at_center() {
        let b = MonomialBasis::new(3, Point2::new(0.3, 0.7), 2.0);
        assert_eq!(b.eval(0, Point2::new(0.3, 0.7)), 1.0);
    }

    #[test]
    fn laplacian_of_scaled_x_squared() {
        // alpha = (2,0), scale h: Laplacian is 2/h^2 times the constant.
        let h = 0.5;
        let b = MonomialBasis::new(2, Point2::origin(), h);
        let calc = poly_calculus(&b);
        let i = b.exponents().iter().position(|&e| e == (2, 0)).unwrap();
        let mut c = DVector::zeros(b.len());
        c[i] = 1.0;
        let lap = &calc.laplacian * &c;
        assert_relative_eq!(lap[0], 2.0 / (h * h), max_relative = 1e-14);
        assert!(lap.iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let b = MonomialBasis::new(2, Point2::origin(), 1.0);
        let calc = poly_calculus(&b);
        let mut c = DVector::zeros(b.len());
        c[0] = 1.0;
        assert_eq!((&calc.dx * &c).norm(), 0.0);
    }

    #[test]
    fn laplacian_is_sum_of_second_derivatives() {
        let b = MonomialBasis::new(4, Point2::new(0.1, -0.2), 1.7);
        let calc = poly_calculus(&b);
        let direct = &calc.dx * &calc.dx + &calc.dy * &calc.dy;
        assert_relative_eq!(
            (&calc.laplacian - &direct).norm(),
            0.0,
            epsilon = 1e-13 * calc.laplacian.norm()
        );
    }

    #[test]
    fn segment_restriction_matches_pointwise() {
        let b = MonomialBasis::new(3, Point2::new(0.4, 0.6), 1.3);
        let coeffs = DVector::from_fn(b.len(), |i, _| (i as f64 * 0.77).sin());
        let (a, bb) = (Point2::new(0.1, 0.2), Point2::new(0.9, 0.5));
        let r = b.restrict_to_segment(&coeffs, a, bb);
        for &t in &[0.0, 0.31, 0.5, 0.77, 1.0] {
            let p = a + (bb - a) * t;
            let u = t - 0.5;
            let val_1d: f64 = (0..r.len()).map(|j| r[j] * u.powi(j as i32)).sum();
            assert_relative_eq!(val_1d, b.eval_poly(&coeffs, p), max_relative = 1e-12);
        }
    }

    #[test]
    fn normal_trace_of_x_on_right_edge() {
        // q(x,y) = x on the unit square's right edge equals the constant 1.
        let b = MonomialBasis::new(1, Point2::new(0.5, 0.5), 2.0_f64.sqrt());
        let calc = poly_calculus(&b);
        // coefficients of q = x: x = 0.5 + sqrt(2) * m_(1,0)
        let mut c = DVector::zeros(3);
        c[0] = 0.5;
        c[1] = 2.0_f64.sqrt();
        let grad_x = &calc.dx * &c;
        // normal on right edge is (1, 0), so the trace of grad q . n is dx q
        let tr = b.restrict_to_segment(&grad_x, Point2::new(1.0, 0.0), Point2::new(1.0, 1.0));
        assert_relative_eq!(tr[0], 1.0, max_relative = 1e-14);
        assert!(tr[1].abs() < 1e-14);
    }

    #[test]
    fn orthonormalize_identity_and_diagonal() {
        let id = DMatrix::identity(3, 3);
        let t = orthonormalize(&id).unwrap();
        assert_relative_eq!((&t - &id).norm(), 0.0, epsilon = 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0]));
        let t = orthonormalize(&d).unwrap();
        assert_relative_eq!(t[(0, 0)], 0.5, max_relative = 1e-15);
    }

    #[test]
    fn orthonormalize_hilbert_like_gram() {
        // Gram of {1, x} on [0,1]; after the transform the Gram is I.
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0 / 3.0]);
        let t = orthonormalize(&g).unwrap();
        let gram_after = &t * &g * t.transpose();
        assert_relative_eq!(
            (&gram_after - DMatrix::identity(2, 2)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ortho_basis_gram_is_identity() {
        use crate::mesh::ElementGeometry;
        let geom = ElementGeometry::from_loop(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.8, 0.1),
            Point2::new(1.0, 0.9),
            Point2::new(0.2, 1.1),
        ]);
        let basis = MonomialBasis::for_element(3, &geom);
        let rule = crate::poly::polygon_quadrature(&geom, 8).unwrap();
        let n = basis.len();
        let mut gram = DMatrix::zeros(n, n);
        for (p, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v = basis.eval_all(*p);
            gram += w / geom.area * &v * v.transpose();
        }
        let ortho = OrthoBasis::from_gram(basis, &gram).unwrap();
        // recompute the Gram of the orthonormalized functions
        let mut check = DMatrix::zeros(n, n);
        for (p, &w) in rule.nodes.iter().zip(&rule.weights) {
            let v = ortho.eval_all(*p);
            check += w / geom.area * &v * v.transpose();
        }
        assert_relative_eq!(
            (&check - DMatrix::identity(n, n)).norm(),
            0.0,
            epsilon = 1e-10
        );
        // factor is the inverse of coeffs
        assert_relative_eq!(
            (&ortho.coeffs * &ortho.factor - DMatrix::identity(n, n)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn orthonormalize_rejects_singular() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            orthonormalize(&g),
            Err(PolyError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn orthonormalization_is_idempotent() {
        let g = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.9],
        );
        let t = orthonormalize(&g).unwrap();
        let g2 = &t * &g * t.transpose();
        let t2 = orthonormalize(&g2).unwrap();
        assert_relative_eq!(
            (&t2 - DMatrix::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }
}
