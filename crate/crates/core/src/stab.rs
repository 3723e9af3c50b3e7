//! The dual-space stabilization factory: reflexive generalized inverses
//! through saddle-point systems, the boundary piecewise-polynomial space
//! split into edge constants and average-free parts, five interchangeable
//! edge-constant strategies, and the gradedness constants of the oblique
//! piecewise-linear projector.
//!
//! The form on the boundary space `sigma*(eta, mu)` acts on coefficient
//! vectors in the basis `{1_e} u {average-free orthonormal edge
//! polynomials}`. Its matrix is block diagonal: an edge-constant block
//! `s0` (one of five strategies) plus `h_e^2 I` per edge on the
//! average-free part. The stabilization used by the solver is the
//! reflexive generalized inverse of that matrix, conjugated onto the
//! scaled-moment DOF convention (each boundary DOF carries a 1/h_e
//! factor, so the inverse picks up one h_e per side).

use crate::mesh::ElementGeometry;
use crate::poly::shifted_legendre_orthonormal;
use crate::wavelet::{build_aux_grid, s0_wav_matrix};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StabError {
    #[error("saddle-point system is singular (pivot ratio {0:.3e})")]
    SingularSaddle(f64),
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("dual-basis gram matrix is singular")]
    SingularGram,
    #[error("argument {0} outside the open interval (0, 1)")]
    DomainError(f64),
    #[error(transparent)]
    Wavelet(#[from] crate::wavelet::WaveletError),
}

/// The five stabilization strategies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabKind {
    /// Euclidean product of the degrees of freedom (S1).
    #[serde(rename = "dofi")]
    Dofi,
    /// Dual of the weighted L^2 edge-constant form (S2).
    #[serde(rename = "l2")]
    DualL2,
    /// Dual of the scaled Laplace-Beltrami form on the midpoint dual grid (S3).
    #[serde(rename = "slb")]
    DualScaledLb,
    /// Dual of the square-root Laplace-Beltrami form (S4).
    #[serde(rename = "rlb")]
    #[default]
    DualSqrtLb,
    /// Dual of the wavelet detail-energy form (S5).
    #[serde(rename = "wav")]
    DualWavelet,
}

impl StabKind {
    pub const ALL: [StabKind; 5] = [
        StabKind::Dofi,
        StabKind::DualL2,
        StabKind::DualScaledLb,
        StabKind::DualSqrtLb,
        StabKind::DualWavelet,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            StabKind::Dofi => "dofi",
            StabKind::DualL2 => "l2",
            StabKind::DualScaledLb => "slb",
            StabKind::DualSqrtLb => "rlb",
            StabKind::DualWavelet => "wav",
        }
    }
}

impl std::fmt::Display for StabKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for StabKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dofi" => Ok(StabKind::Dofi),
            "l2" => Ok(StabKind::DualL2),
            "slb" => Ok(StabKind::DualScaledLb),
            "rlb" => Ok(StabKind::DualSqrtLb),
            "wav" => Ok(StabKind::DualWavelet),
            other => Err(format!(
                "unknown stabilization '{other}' (expected dofi|l2|slb|rlb|wav)"
            )),
        }
    }
}

/// Per-edge orthonormal basis of the boundary polynomial space, split as
/// edge constants plus average-free functions. Under the (1/h_e)-scaled
/// edge inner product the same coefficient table serves every edge.
#[derive(Debug, Clone)]
pub struct BoundaryPolySpace {
    pub k: usize,
    pub edge_lengths: Vec<f64>,
    pub perimeter: f64,
    /// Row j: coefficients of the degree-j orthonormal function in powers
    /// of u = t - 1/2. Row 0 is the constant 1; rows >= 1 average-free.
    legendre: DMatrix<f64>,
}

impl BoundaryPolySpace {
    pub fn new(geom: &ElementGeometry, k: usize) -> Self {
        Self {
            k,
            edge_lengths: geom.edges.iter().map(|e| e.length).collect(),
            perimeter: geom.perimeter,
            legendre: shifted_legendre_orthonormal(k),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edge_lengths.len()
    }

    /// Dimension of the full boundary space.
    pub fn dim(&self) -> usize {
        self.n_edges() * self.k
    }

    /// Evaluate the j-th basis function at edge parameter t in [0, 1].
    pub fn eval(&self, j: usize, t: f64) -> f64 {
        crate::poly::eval_u_poly(self.legendre.row(j).transpose().as_view(), t)
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.legendre
    }
}

/// Reflexive generalized inverse of a symmetric PSD matrix through the
/// saddle-point system `[[S, P^T], [P, 0]]`: column i of the result is
/// the primal part of the solution with right-hand side `e_i`.
pub fn generalized_inverse(s: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>, StabError> {
    let n = s.nrows();
    let m = p.nrows();
    assert_eq!(s.ncols(), n, "S must be square");
    assert_eq!(p.ncols(), n, "constraint width must match S");
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(s);
    k.view_mut((0, n), (n, m)).copy_from(&p.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(p);
    let lu = k.full_piv_lu();
    let diag = lu.u();
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0_f64);
    for i in 0..(n + m) {
        let d = diag[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if dmin < 1e-13 * dmax {
        return Err(StabError::SingularSaddle(dmin / dmax));
    }
    let mut rhs = DMatrix::zeros(n + m, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    let sol = lu.solve(&rhs).ok_or(StabError::SingularSaddle(0.0))?;
    let w = sol.view((0, 0), (n, n)).into_owned();
    Ok(0.5 * (&w + w.transpose()))
}

/// Second application of the generalized inverse with the adjoint
/// constraint; under the biorthogonality assumptions this recovers the
/// original matrix.
pub fn double_dagger(
    s_dagger: &DMatrix<f64>,
    p_star: &DMatrix<f64>,
) -> Result<DMatrix<f64>, StabError> {
    generalized_inverse(s_dagger, p_star)
}

/// Weighted L^2 edge-constant form: matrix of
/// `sum_e h_e \int_e (eta - avg(eta)) (mu - avg(mu))` on the
/// characteristic-function basis, where avg is the boundary mean.
pub fn s0_l2(edge_lengths: &[f64], perimeter: f64) -> DMatrix<f64> {
    let n = edge_lengths.len();
    let mut s = DMatrix::zeros(n, n);
    for e in 0..n {
        for f in 0..n {
            let mut acc = 0.0;
            for (ep, &h) in edge_lengths.iter().enumerate() {
                let de = if ep == e { 1.0 } else { 0.0 } - edge_lengths[e] / perimeter;
                let df = if ep == f { 1.0 } else { 0.0 } - edge_lengths[f] / perimeter;
                acc += h * h * de * df;
            }
            s[(e, f)] = acc;
        }
    }
    s
}

/// Stiffness and mass matrices of the periodic continuous piecewise
/// linears (hats) on the midpoint dual grid, in the nodal hat basis.
pub fn hat_matrices(edge_lengths: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = edge_lengths.len();
    assert!(n >= 3, "need a closed boundary with at least 3 edges");
    // dual cell tau_i joins midpoints m_i and m_{i+1}
    let tau: Vec<f64> = (0..n)
        .map(|i| 0.5 * (edge_lengths[i] + edge_lengths[(i + 1) % n]))
        .collect();
    let mut r = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let ip = (i + 1) % n;
        let im = (i + n - 1) % n;
        r[(i, i)] = 1.0 / tau[im] + 1.0 / tau[i];
        r[(i, ip)] -= 1.0 / tau[i];
        r[(ip, i)] -= 1.0 / tau[i];
        m[(i, i)] = (tau[im] + tau[i]) / 3.0;
        m[(i, ip)] += tau[i] / 6.0;
        m[(ip, i)] += tau[i] / 6.0;
    }
    (r, m)
}

/// Gram matrix `G[i][j] = int_{e_i} phi_j` of the dual-grid hats against
/// the edge characteristic functions (exact piecewise-linear integrals).
pub fn hat_edge_gram(edge_lengths: &[f64]) -> DMatrix<f64> {
    let n = edge_lengths.len();
    assert!(n >= 3, "need a closed boundary with at least 3 edges");
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let h = edge_lengths[i];
        let hm = edge_lengths[(i + n - 1) % n];
        let hp = edge_lengths[(i + 1) % n];
        // phi_{i-1} decays over [a_i, m_i], phi_{i+1} grows over [m_i, a_{i+1}];
        // phi_i rises from hm/(hm+h) at a_i to 1 at m_i and falls to
        // hp/(h+hp) at a_{i+1}. All pieces are linear, so trapezoids are exact.
        g[(i, (i + n - 1) % n)] += h * h / (4.0 * (hm + h));
        g[(i, (i + 1) % n)] += h * h / (4.0 * (h + hp));
        g[(i, i)] += 0.25 * h * (hm / (hm + h) + 1.0) + 0.25 * h * (1.0 + hp / (h + hp));
    }
    g
}

/// Coefficients C of the dual basis (biorthogonal to the edge
/// characteristic functions) in the hat basis: `G * C = I`.
pub fn dual_hat_basis(edge_lengths: &[f64]) -> Result<DMatrix<f64>, StabError> {
    let g = hat_edge_gram(edge_lengths);
    g.clone()
        .try_inverse()
        .ok_or(StabError::SingularGram)
}

/// Laplace-Beltrami stiffness and mass in the dual basis:
/// `R~ = C^T R C`, `M~ = C^T M C`.
pub fn lb_matrices(edge_lengths: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), StabError> {
    let (r, m) = hat_matrices(edge_lengths);
    let c = dual_hat_basis(edge_lengths)?;
    Ok((c.transpose() * r * &c, c.transpose() * m * &c))
}

/// Symmetric PSD square root by eigendecomposition, with eigenvalues
/// below `1e-12 * ||A||` clipped to zero.
pub fn matrix_sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>, StabError> {
    let scale = a.norm();
    let asym = (a - a.transpose()).norm();
    if scale > 0.0 && asym > 1e-12 * scale {
        return Err(StabError::NotSymmetric(asym / scale));
    }
    let sym = 0.5 * (a + a.transpose());
    let eig = sym.symmetric_eigen();
    // Clipping below 1e-12 * ||A|| keeps kernel directions exact; without
    // it the square root amplifies O(eps) eigenvalue noise to O(sqrt(eps)).
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    let sqrt_vals = eig
        .eigenvalues
        .map(|l| if l > 1e-12 * lmax { l.sqrt() } else { 0.0 });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose())
}

fn spd_power(a: &DMatrix<f64>, pow: f64) -> DMatrix<f64> {
    let eig = 0.5 * (a + a.transpose());
    let eig = eig.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(0.0).powf(pow));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Scaled Laplace-Beltrami edge-constant block: `Sigma~ = h_P * R~`.
/// This is already the generalized-inverse side of the pair (the form s0
/// is its dagger, and the double dagger gives it back), so it is used as
/// the production block directly.
pub fn s0_slb(geom: &ElementGeometry) -> Result<DMatrix<f64>, StabError> {
    let lengths: Vec<f64> = geom.edges.iter().map(|e| e.length).collect();
    let (r_dual, _) = lb_matrices(&lengths)?;
    Ok(geom.diameter * r_dual)
}

/// Square-root Laplace-Beltrami block:
/// `Sigma~ = M~^{1/2} (M~^{-1/2} R~ M~^{-1/2})^{1/2} M~^{1/2}`.
pub fn s0_rlb(geom: &ElementGeometry) -> Result<DMatrix<f64>, StabError> {
    let lengths: Vec<f64> = geom.edges.iter().map(|e| e.length).collect();
    let (r_dual, m_dual) = lb_matrices(&lengths)?;
    let m_half = spd_power(&m_dual, 0.5);
    let m_inv_half = spd_power(&m_dual, -0.5);
    let inner = matrix_sqrt_spd(&(&m_inv_half * r_dual * &m_inv_half))?;
    Ok(&m_half * inner * &m_half)
}

/// Constraint row for the constant block: coordinates of the projection
/// onto boundary constants, `p_e = h_e / |boundary|`.
pub fn constant_constraint_row(edge_lengths: &[f64], perimeter: f64) -> DMatrix<f64> {
    DMatrix::from_fn(1, edge_lengths.len(), |_, e| edge_lengths[e] / perimeter)
}

/// Matrix of the boundary form sigma* on the split basis, ordered as all
/// edge constants first, then per-edge average-free functions: block
/// diagonal with the given edge-constant block and `h_e^2 I` per edge.
pub fn sigma_star(geom: &ElementGeometry, k: usize, s0_block: &DMatrix<f64>) -> DMatrix<f64> {
    let n_e = geom.n_edges();
    assert_eq!(s0_block.nrows(), n_e);
    let dim = n_e * k;
    let mut s = DMatrix::zeros(dim, dim);
    s.view_mut((0, 0), (n_e, n_e)).copy_from(s0_block);
    for (e, eg) in geom.edges.iter().enumerate() {
        let h2 = eg.length * eg.length;
        for j in 1..k {
            let idx = n_e + e * (k - 1) + (j - 1);
            s[(idx, idx)] = h2;
        }
    }
    s
}

/// Edge-constant form matrix (the "S0" side of the dual pair) for a
/// stabilization kind, on the characteristic-function basis. For the
/// Laplace-Beltrami variants this inverts the explicitly known dual block,
/// which production short-circuits; the tests exercise both routes.
pub fn s0_form_matrix(geom: &ElementGeometry, kind: StabKind) -> Result<DMatrix<f64>, StabError> {
    let lengths: Vec<f64> = geom.edges.iter().map(|e| e.length).collect();
    match kind {
        StabKind::Dofi => Err(StabError::DomainError(0.0)),
        StabKind::DualL2 => Ok(s0_l2(&lengths, geom.perimeter)),
        StabKind::DualWavelet => {
            let grid = build_aux_grid(geom)?;
            Ok(s0_wav_matrix(geom, &grid))
        }
        StabKind::DualScaledLb | StabKind::DualSqrtLb => {
            let sigma = if kind == StabKind::DualScaledLb {
                s0_slb(geom)?
            } else {
                s0_rlb(geom)?
            };
            // dual-basis constants have coefficients (h_e); any row not
            // orthogonal to that kernel works as the constraint
            let ones = DMatrix::from_element(1, lengths.len(), 1.0);
            generalized_inverse(&sigma, &ones)
        }
    }
}

/// Symmetric PSD stabilization matrix on the local DOF layout (edge-major
/// boundary DOFs then interior DOFs).
#[derive(Debug, Clone)]
pub struct StabMatrix {
    pub kind: StabKind,
    pub matrix: DMatrix<f64>,
    pub n_boundary: usize,
}

impl StabMatrix {
    pub fn is_boundary_only(&self) -> bool {
        self.kind != StabKind::Dofi
    }
}

/// Build the stabilization matrix for an element.
///
/// S1 is the identity on all local DOFs (orthonormal-basis moments). For
/// S2-S5 the boundary block is the generalized inverse of sigma* computed
/// blockwise: the edge-constant block from the chosen s0 strategy, the
/// average-free blocks collapsing to the identity in the scaled
/// orthonormal basis, and a zero interior block (the kernel of the
/// elliptic projector is already controlled through the boundary DOFs).
/// The 1/h_e scaling of the edge moments conjugates the constant block by
/// diag(h_e).
pub fn stabilization_matrix(
    geom: &ElementGeometry,
    k: usize,
    kind: StabKind,
) -> Result<StabMatrix, StabError> {
    stabilization_matrix_ext(geom, k, kind, false)
}

/// [`stabilization_matrix`] with an explicit choice for the interior
/// block of the dual kinds: `stabilize_interior` swaps the zero interior
/// block for the identity.
pub fn stabilization_matrix_ext(
    geom: &ElementGeometry,
    k: usize,
    kind: StabKind,
    stabilize_interior: bool,
) -> Result<StabMatrix, StabError> {
    let n_e = geom.n_edges();
    let n_interior = k * (k - 1) / 2;
    let n_boundary = n_e * k;
    let n = n_boundary + n_interior;

    if kind == StabKind::Dofi {
        return Ok(StabMatrix {
            kind,
            matrix: DMatrix::identity(n, n),
            n_boundary,
        });
    }

    let lengths: Vec<f64> = geom.edges.iter().map(|e| e.length).collect();
    let sigma0 = match kind {
        StabKind::DualL2 => {
            let s0 = s0_l2(&lengths, geom.perimeter);
            let p = constant_constraint_row(&lengths, geom.perimeter);
            generalized_inverse(&s0, &p)?
        }
        StabKind::DualWavelet => {
            let grid = build_aux_grid(geom)?;
            let s0 = s0_wav_matrix(geom, &grid);
            let p = constant_constraint_row(&lengths, geom.perimeter);
            generalized_inverse(&s0, &p)?
        }
        StabKind::DualScaledLb => s0_slb(geom)?,
        StabKind::DualSqrtLb => s0_rlb(geom)?,
        StabKind::Dofi => unreachable!(),
    };

    let mut m = DMatrix::zeros(n, n);
    for e in 0..n_e {
        for f in 0..n_e {
            m[(e * k, f * k)] = lengths[e] * sigma0[(e, f)] * lengths[f];
        }
        for j in 1..k {
            m[(e * k + j, e * k + j)] = 1.0;
        }
    }
    if stabilize_interior {
        for a in 0..n_interior {
            m[(n_boundary + a, n_boundary + a)] = 1.0;
        }
    }
    Ok(StabMatrix {
        kind,
        matrix: m,
        n_boundary,
    })
}

/// Eigenvalue deviation `g(a)` of the symmetrized local projector matrix:
/// the two eigenvalues are `1 +- g(a)` for adjacent-edge length fractions
/// `(2a, 2(1-a))`.
pub fn steinbach_g(a: f64) -> Result<f64, StabError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(StabError::DomainError(a));
    }
    let num = (a + 1.0).sqrt() * (3.0 * a * a - 3.0 * a + 1.0);
    let den = (2.0 - a).sqrt() * (a - a * a * a);
    Ok(0.5 * num / den)
}

/// Admissibility constants of the piecewise-linear oblique projector:
/// `a0` is the root of `g(a) = 1` in (0, 1/2) and `c0 = (1 - a0)/a0` the
/// largest adjacent-edge ratio with positive projector eigenvalues.
pub fn steinbach_constants() -> (f64, f64) {
    let (mut lo, mut hi) = (1e-9, 0.5);
    // g is continuous with g(lo) > 1 > g(hi); bisection to ~1e-16
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if steinbach_g(mid).unwrap() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a0 = 0.5 * (lo + hi);
    (a0, (1.0 - a0) / a0)
}
