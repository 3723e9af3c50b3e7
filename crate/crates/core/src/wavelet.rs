//! Periodic fast wavelet transform with a (2,2)-biorthogonal low-pass
//! filter, the auxiliary dyadic boundary grid, and the wavelet-based
//! edge-constant stabilization block.
//!
//! Piecewise constants on the element boundary are transported to a
//! uniform dyadic grid on the unit-length circle; the weighted wavelet
//! detail energy `h_P^2 * sum_j 2^{-j} |delta_j|^2` is then an equivalent
//! of the squared H^{-1/2} boundary seminorm.

use crate::mesh::ElementGeometry;
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("input length {0} is not a power of two >= 2")]
    BadLength(usize),
    #[error("auxiliary grid level {0} exceeds the guardrail (22)")]
    LevelOverflow(u32),
}

/// Low-pass / band-pass filter pair of the (2,2)-biorthogonal wavelet.
///
/// The ten low-pass taps carry the sqrt(2)/2 prefactor already; the
/// band-pass filter is `[1, -1]` with sqrt(2)/2 applied in the transform
/// step. The two unit-weight taps sit at offsets 0 and 1 relative to
/// position 2k, i.e. the filter is applied with a -4 index shift.
#[derive(Debug, Clone, Copy)]
pub struct FilterPair {
    pub lowpass: [f64; 10],
}

impl FilterPair {
    pub fn biorthogonal_2_2() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let raw = [
            3.0 / 128.0,
            -3.0 / 128.0,
            -11.0 / 64.0,
            11.0 / 64.0,
            1.0,
            1.0,
            11.0 / 64.0,
            -11.0 / 64.0,
            -3.0 / 128.0,
            3.0 / 128.0,
        ];
        Self {
            lowpass: raw.map(|c| c * s),
        }
    }

    /// Sum of the taps; sqrt(2) keeps constants constant across levels.
    pub fn sum(&self) -> f64 {
        self.lowpass.iter().sum()
    }

    /// Alternating sum of the taps; zero gives the vanishing moment.
    pub fn alternating_sum(&self) -> f64 {
        self.lowpass
            .iter()
            .enumerate()
            .map(|(l, &w)| if l % 2 == 0 { w } else { -w })
            .sum()
    }
}

/// Coarse and detail coefficients per level, `kappa[j]` and `delta[j]`
/// of length `2^j` for `j = 0..M`.
#[derive(Debug, Clone)]
pub struct WaveletLevels {
    pub kappa: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
}

impl WaveletLevels {
    /// Weighted detail energy `sum_j 2^{-j} |delta_j|^2`.
    pub fn energy(&self) -> f64 {
        self.delta
            .iter()
            .enumerate()
            .map(|(j, d)| {
                let s: f64 = d.iter().map(|&x| x * x).sum();
                s / (1u64 << j) as f64
            })
            .sum()
    }
}

/// Periodic fast wavelet transform of a length-2^M coefficient vector.
///
/// `kappa_{j,k} = sum_l w(l) kappa_{j+1, (2k+l-4) mod 2^{j+1}}` and
/// `delta_{j,k} = sqrt(2)/2 (kappa_{j+1,2k} - kappa_{j+1,2k+1})`.
pub fn fwt_periodic(values: &[f64]) -> Result<WaveletLevels, WaveletError> {
    let n = values.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(WaveletError::BadLength(n));
    }
    let levels = n.trailing_zeros() as usize;
    let filter = FilterPair::biorthogonal_2_2();
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let mut kappa: Vec<Vec<f64>> = vec![Vec::new(); levels];
    let mut delta: Vec<Vec<f64>> = vec![Vec::new(); levels];
    let mut fine = values.to_vec();
    for j in (0..levels).rev() {
        let n_fine = fine.len() as i64;
        let n_coarse = fine.len() / 2;
        let mut kappa_j = vec![0.0; n_coarse];
        let mut delta_j = vec![0.0; n_coarse];
        for k in 0..n_coarse {
            let mut acc = 0.0;
            for (l, &w) in filter.lowpass.iter().enumerate() {
                let idx = (2 * k as i64 + l as i64 - 4).rem_euclid(n_fine) as usize;
                acc += w * fine[idx];
            }
            kappa_j[k] = acc;
            delta_j[k] = half * (fine[2 * k] - fine[2 * k + 1]);
        }
        kappa[j] = kappa_j.clone();
        delta[j] = delta_j;
        fine = kappa_j;
    }
    Ok(WaveletLevels { kappa, delta })
}

/// Auxiliary dyadic grid on an element boundary: `2^level` cells
/// distributed over the edges proportionally to length (largest-remainder
/// rounding with a floor of one cell per edge), plus the node map from
/// the uniform circle grid to arclength positions.
#[derive(Debug, Clone)]
pub struct AuxGrid {
    pub level: u32,
    pub cells_per_edge: Vec<usize>,
    /// Owning edge of each dyadic cell, in boundary order.
    pub edge_of_cell: Vec<usize>,
    /// Arclength positions of the 2^level + 1 grid nodes (first 0, last
    /// the perimeter); strictly increasing.
    pub node_arclength: Vec<f64>,
}

impl AuxGrid {
    pub fn n_cells(&self) -> usize {
        self.edge_of_cell.len()
    }
}

/// Build the auxiliary grid for an element: the level is the smallest M
/// with `M > log2(perimeter / min edge)`.
pub fn build_aux_grid(geom: &ElementGeometry) -> Result<AuxGrid, WaveletError> {
    let min_edge = geom.min_edge();
    let ratio = geom.perimeter / min_edge;
    let level = ratio.log2().floor() as u32 + 1;
    if level > 22 {
        return Err(WaveletError::LevelOverflow(level));
    }
    let n_cells = 1usize << level;
    let n_edges = geom.n_edges();

    // Largest-remainder allocation with a floor of one cell per edge.
    // M > log2(ratio) guarantees every quota exceeds one, so the floor is
    // automatic; the defensive branch handles user-supplied geometry.
    let quotas: Vec<f64> = geom
        .edges
        .iter()
        .map(|e| n_cells as f64 * e.length / geom.perimeter)
        .collect();
    let mut cells: Vec<usize> = quotas.iter().map(|&q| (q.floor() as usize).max(1)).collect();
    let mut assigned: usize = cells.iter().sum();
    if assigned < n_cells {
        let mut order: Vec<usize> = (0..n_edges).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        let mut i = 0;
        while assigned < n_cells {
            cells[order[i % n_edges]] += 1;
            assigned += 1;
            i += 1;
        }
    }
    while assigned > n_cells {
        let worst = (0..n_edges)
            .filter(|&e| cells[e] > 1)
            .max_by(|&a, &b| {
                (cells[a] as f64 - quotas[a])
                    .partial_cmp(&(cells[b] as f64 - quotas[b]))
                    .unwrap()
            })
            .expect("allocation cannot shrink below one cell per edge");
        cells[worst] -= 1;
        assigned -= 1;
    }

    let mut edge_of_cell = Vec::with_capacity(n_cells);
    let mut node_arclength = Vec::with_capacity(n_cells + 1);
    let mut s = 0.0;
    node_arclength.push(0.0);
    for (e, &ne) in cells.iter().enumerate() {
        let h = geom.edges[e].length;
        for i in 1..=ne {
            edge_of_cell.push(e);
            node_arclength.push(s + h * i as f64 / ne as f64);
        }
        s += h;
    }

    Ok(AuxGrid {
        level,
        cells_per_edge: cells,
        edge_of_cell,
        node_arclength,
    })
}

fn indicator_levels(grid: &AuxGrid, edge: usize) -> WaveletLevels {
    let scale = (2.0_f64).powf(-0.5 * grid.level as f64);
    let values: Vec<f64> = grid
        .edge_of_cell
        .iter()
        .map(|&e| if e == edge { scale } else { 0.0 })
        .collect();
    fwt_periodic(&values).expect("aux grid size is a power of two")
}

/// Wavelet bilinear-form value for two piecewise-constant boundary
/// functions given by per-edge values: `h_P^2 sum_j 2^{-j} delta_j(eta)
/// . delta_j(mu)` with `kappa_{M,k} = 2^{-M/2} eta(cell k)`.
pub fn s0_wav_value(
    geom: &ElementGeometry,
    grid: &AuxGrid,
    eta: &[f64],
    mu: &[f64],
) -> f64 {
    let m = grid.level as i32;
    let scale = (2.0_f64).powf(-0.5 * m as f64);
    let to_levels = |vals: &[f64]| {
        let cells: Vec<f64> = grid
            .edge_of_cell
            .iter()
            .map(|&e| scale * vals[e])
            .collect();
        fwt_periodic(&cells).expect("aux grid size is a power of two")
    };
    let (le, lm) = (to_levels(eta), to_levels(mu));
    let h2 = geom.diameter * geom.diameter;
    let mut acc = 0.0;
    for j in 0..le.delta.len() {
        let dot: f64 = le.delta[j]
            .iter()
            .zip(&lm.delta[j])
            .map(|(a, b)| a * b)
            .sum();
        acc += dot / (1u64 << j) as f64;
    }
    h2 * acc
}

/// Assembled wavelet stabilization block on the edge-constant basis.
pub fn s0_wav_matrix(geom: &ElementGeometry, grid: &AuxGrid) -> DMatrix<f64> {
    let n = geom.n_edges();
    let levels: Vec<WaveletLevels> = (0..n).map(|e| indicator_levels(grid, e)).collect();
    let h2 = geom.diameter * geom.diameter;
    let mut s = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut acc = 0.0;
            for j in 0..levels[a].delta.len() {
                let dot: f64 = levels[a].delta[j]
                    .iter()
                    .zip(&levels[b].delta[j])
                    .map(|(x, y)| x * y)
                    .sum();
                acc += dot / (1u64 << j) as f64;
            }
            s[(a, b)] = h2 * acc;
            s[(b, a)] = h2 * acc;
        }
    }
    s
}

/// Detail energy of a piecewise-constant profile on the uniform dyadic
/// circle grid: `sum_j 2^{-j} |delta_j|^2` with the `2^{-M/2}` input
/// scaling. Used for the circle-level norm-equivalence checks.
pub fn circle_detail_energy(values: &[f64]) -> Result<f64, WaveletError> {
    let n = values.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(WaveletError::BadLength(n));
    }
    let m = n.trailing_zeros() as f64;
    let scale = (2.0_f64).powf(-0.5 * m);
    let scaled: Vec<f64> = values.iter().map(|&v| scale * v).collect();
    Ok(fwt_periodic(&scaled)?.energy())
}
