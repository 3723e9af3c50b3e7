//! Experiment driver: mesh-family sweeps over polynomial degree and
//! stabilization kind against the manufactured trigonometric solution,
//! observed-rate tables, CSV/JSON emission, and the diagnostics report
//! (stabilization condition numbers, dual-seminorm oracle ratios, the
//! gradedness constants, and the wavelet norm-equivalence ratios).

use crate::mesh::{
    element_geometry, generate_dyadic_square_mesh, generate_hexagonal_collapse_mesh,
    generate_nside_mesh, mesh_stats, ElementGeometry, MeshError, PolygonalMesh,
};
use crate::oracle::{fourier_minus_half, BoundaryPiecewisePoly, OracleError, RieszOracle};
use crate::stab::{s0_form_matrix, sigma_star, stabilization_matrix, StabError, StabKind};
use crate::vem::{compute_errors, local_stiffness, solve_poisson, VemError};
use crate::wavelet::circle_detail_energy;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Vem(#[from] VemError),
    #[error(transparent)]
    Stab(#[from] StabError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFamily {
    Hexa,
    Nside,
    Dyadic,
    File,
}

impl std::fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MeshFamily::Hexa => "hexa",
            MeshFamily::Nside => "nside",
            MeshFamily::Dyadic => "dyadic",
            MeshFamily::File => "file",
        })
    }
}

impl std::str::FromStr for MeshFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hexa" => Ok(MeshFamily::Hexa),
            "nside" => Ok(MeshFamily::Nside),
            "dyadic" => Ok(MeshFamily::Dyadic),
            "file" => Ok(MeshFamily::File),
            other => Err(format!("unknown family '{other}' (hexa|nside|dyadic|file)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub family: MeshFamily,
    pub levels: Vec<u32>,
    pub k: Vec<usize>,
    pub stab: Vec<StabKind>,
    pub shrink: f64,
    pub nside_growth: bool,
    pub patch_test: bool,
    pub mesh_file: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: MeshFamily::Dyadic,
            levels: vec![1, 2],
            k: vec![1],
            stab: vec![StabKind::Dofi],
            shrink: 0.5,
            nside_growth: false,
            patch_test: false,
            mesh_file: None,
            seed: 7,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.levels.is_empty() || self.k.is_empty() || self.stab.is_empty() {
            return Err(ExperimentError::Config(
                "levels, k and stab must be non-empty".into(),
            ));
        }
        if self.k.iter().any(|&k| !(1..=4).contains(&k)) {
            return Err(ExperimentError::Config("degrees must be in 1..=4".into()));
        }
        if self.family == MeshFamily::File && self.mesh_file.is_none() {
            return Err(ExperimentError::Config(
                "family 'file' requires --mesh-file".into(),
            ));
        }
        Ok(())
    }
}

/// Build the mesh of a family at a refinement level. Dyadic level L maps
/// to (n, m) = (2^(L+2), L+1), so levels 1..4 reproduce the reference
/// sequence (8,2), (16,3), (32,4), (64,5).
pub fn build_mesh(cfg: &ExperimentConfig, level: u32) -> Result<PolygonalMesh, ExperimentError> {
    Ok(match cfg.family {
        MeshFamily::Dyadic => generate_dyadic_square_mesh(1 << (level + 2), level + 1),
        MeshFamily::Hexa => generate_hexagonal_collapse_mesh(level, cfg.shrink)?,
        MeshFamily::Nside => generate_nside_mesh(level, cfg.nside_growth)?,
        MeshFamily::File => {
            let path = cfg.mesh_file.as_ref().expect("validated");
            PolygonalMesh::load_json(path)?
        }
    })
}

/// Manufactured solutions: the trigonometric benchmark and the
/// degree-k polynomial used by the patch test.
pub mod manufactured {
    use nalgebra::Vector2;
    use std::f64::consts::PI;

    pub fn trig_u(x: f64, y: f64) -> f64 {
        (PI * x).cos() * (PI * y).cos() / (2.0 * PI * PI)
    }

    pub fn trig_f(x: f64, y: f64) -> f64 {
        (PI * x).cos() * (PI * y).cos()
    }

    pub fn trig_grad(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(
            -(PI * x).sin() * (PI * y).cos() / (2.0 * PI),
            -(PI * x).cos() * (PI * y).sin() / (2.0 * PI),
        )
    }

    /// u = (x + 2y)^k, with -lap u = -5 k (k-1) (x + 2y)^(k-2).
    pub fn patch_u(k: usize) -> impl Fn(f64, f64) -> f64 + Sync {
        move |x, y| (x + 2.0 * y).powi(k as i32)
    }

    pub fn patch_f(k: usize) -> impl Fn(f64, f64) -> f64 + Sync {
        move |x, y| {
            if k < 2 {
                0.0
            } else {
                -5.0 * (k * (k - 1)) as f64 * (x + 2.0 * y).powi(k as i32 - 2)
            }
        }
    }

    pub fn patch_grad(k: usize) -> impl Fn(f64, f64) -> Vector2<f64> + Sync {
        move |x, y| {
            let d = k as f64 * (x + 2.0 * y).powi(k as i32 - 1);
            Vector2::new(d, 2.0 * d)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRow {
    pub family: String,
    pub level: u32,
    pub k: usize,
    pub stab: String,
    pub n_el: usize,
    pub n_ed: usize,
    pub h: f64,
    pub h_min: f64,
    pub gamma_h: f64,
    pub e0: Option<f64>,
    pub e1: Option<f64>,
    pub rate0: Option<f64>,
    pub rate1: Option<f64>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub version: String,
    pub solver_rel_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub meta: ReportMeta,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentReport {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

/// Solve one (mesh, k, stab) combination and return the relative errors.
pub fn run_single(
    mesh: &PolygonalMesh,
    k: usize,
    kind: StabKind,
    patch_test: bool,
) -> Result<(f64, f64), VemError> {
    if patch_test {
        let u = manufactured::patch_u(k);
        let f = manufactured::patch_f(k);
        let g = manufactured::patch_grad(k);
        let sol = solve_poisson(mesh, k, kind, &f, &u)?;
        compute_errors(mesh, k, &sol.dofs, &u, &|x, y| g(x, y))
    } else {
        let sol = solve_poisson(mesh, k, kind, &manufactured::trig_f, &manufactured::trig_u)?;
        compute_errors(
            mesh,
            k,
            &sol.dofs,
            &manufactured::trig_u,
            &manufactured::trig_grad,
        )
    }
}

/// Run the full sweep. Rates are computed between consecutive levels of
/// the same (k, stab) series; the first level has none. Rows come back
/// sorted by (family, level, k, stab).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();

    let mut rows = Vec::new();
    let meshes: Vec<(u32, Result<PolygonalMesh, ExperimentError>)> = levels
        .iter()
        .map(|&l| (l, build_mesh(cfg, l)))
        .collect();

    for &k in &cfg.k {
        for &kind in &cfg.stab {
            let mut prev: Option<(f64, f64, f64)> = None; // (h, e0, e1)
            for (level, mesh) in &meshes {
                let started = std::time::Instant::now();
                let (stats, outcome) = match mesh {
                    Ok(mesh) => (
                        Some(mesh_stats(mesh)),
                        run_single(mesh, k, kind, cfg.patch_test).map_err(ExperimentError::from),
                    ),
                    Err(e) => (None, Err(ExperimentError::Config(e.to_string()))),
                };
                let wall_ms = started.elapsed().as_secs_f64() * 1e3;
                let mut row = ExperimentRow {
                    family: cfg.family.to_string(),
                    level: *level,
                    k,
                    stab: kind.to_string(),
                    n_el: stats.map_or(0, |s| s.n_elements),
                    n_ed: stats.map_or(0, |s| s.n_edges),
                    h: stats.map_or(f64::NAN, |s| s.h),
                    h_min: stats.map_or(f64::NAN, |s| s.h_min),
                    gamma_h: stats.map_or(f64::NAN, |s| s.gamma_h),
                    e0: None,
                    e1: None,
                    rate0: None,
                    rate1: None,
                    wall_ms,
                    error: None,
                };
                match outcome {
                    Ok((e0, e1)) => {
                        row.e0 = Some(e0);
                        row.e1 = Some(e1);
                        if let Some((ph, p0, p1)) = prev {
                            let dh = (ph / row.h).ln();
                            row.rate0 = Some((p0 / e0).ln() / dh);
                            row.rate1 = Some((p1 / e1).ln() / dh);
                        }
                        prev = Some((row.h, e0, e1));
                    }
                    Err(e) => {
                        row.error = Some(e.to_string());
                        prev = None;
                    }
                }
                rows.push(row);
            }
        }
    }

    rows.sort_by(|a, b| {
        (a.family.as_str(), a.level, a.k, a.stab.as_str())
            .cmp(&(b.family.as_str(), b.level, b.k, b.stab.as_str()))
    });
    Ok(ExperimentReport {
        meta: ReportMeta {
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            solver_rel_residual: 1e-11,
        },
        rows,
    })
}

fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// CSV rendering with the fixed header
/// `family,level,k,stab,N_el,N_ed,h,h_min,gamma_h,e0,e1,rate0,rate1,wall_ms`;
/// floats carry 9 significant digits, missing rates are empty fields.
pub fn to_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("family,level,k,stab,N_el,N_ed,h,h_min,gamma_h,e0,e1,rate0,rate1,wall_ms\n");
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map(fmt9).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.level,
            r.k,
            r.stab,
            r.n_el,
            r.n_ed,
            fmt9(r.h),
            fmt9(r.h_min),
            fmt9(r.gamma_h),
            opt(r.e0),
            opt(r.e1),
            opt(r.rate0),
            opt(r.rate1),
            fmt9(r.wall_ms),
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format '{other}' (csv|json)")),
        }
    }
}

pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), ExperimentError> {
    let text = match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionExport {
    pub family: String,
    pub level: u32,
    pub k: usize,
    pub stab: String,
    pub n_dofs: usize,
    /// Edge-major DOF values (k moments per edge), then element-interior
    /// moments.
    pub dofs: Vec<f64>,
}

/// Solve a single configuration and export the DOF vector (used by the
/// CLI's `--solution-out`). The config must pin exactly one combination.
pub fn export_solution(cfg: &ExperimentConfig) -> Result<SolutionExport, ExperimentError> {
    cfg.validate()?;
    if cfg.levels.len() != 1 || cfg.k.len() != 1 || cfg.stab.len() != 1 {
        return Err(ExperimentError::Config(
            "solution export needs exactly one (level, k, stab) combination".into(),
        ));
    }
    let (level, k, kind) = (cfg.levels[0], cfg.k[0], cfg.stab[0]);
    let mesh = build_mesh(cfg, level)?;
    let sol = if cfg.patch_test {
        let u = manufactured::patch_u(k);
        let f = manufactured::patch_f(k);
        solve_poisson(&mesh, k, kind, &f, &u)?
    } else {
        solve_poisson(&mesh, k, kind, &manufactured::trig_f, &manufactured::trig_u)?
    };
    Ok(SolutionExport {
        family: cfg.family.to_string(),
        level,
        k,
        stab: kind.to_string(),
        n_dofs: sol.dofs.len(),
        dofs: sol.dofs.iter().copied().collect(),
    })
}

/// Condition numbers of the local stiffness restricted to the complement
/// of the constants, one per element.
pub fn stab_condition_numbers(
    mesh: &PolygonalMesh,
    k: usize,
    kind: StabKind,
) -> Result<Vec<f64>, ExperimentError> {
    let mut out = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let ops = crate::vem::mesh_local_operators(mesh, e, k)?;
        let geom = element_geometry(mesh, e);
        let stab = stabilization_matrix(&geom, k, kind)?;
        let m = local_stiffness(&ops, &stab);
        let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // eig[0] is the constant kernel (~0); the block conditioning is
        // lambda_max over the smallest nonzero eigenvalue
        out.push(eig[eig.len() - 1] / eig[1]);
    }
    Ok(out)
}

/// Ratios sigma*(eta,eta) / |gamma* eta|^2_{-1,P} for random boundary
/// polynomials on one element.
pub fn sigma_oracle_ratios(
    geom: &ElementGeometry,
    k: usize,
    kind: StabKind,
    n_samples: usize,
    seed: u64,
    fineness: f64,
) -> Result<Vec<f64>, ExperimentError> {
    let s0 = s0_form_matrix(geom, kind)?;
    let s_full = sigma_star(geom, k, &s0);
    let oracle = RieszOracle::new(geom, fineness)?;
    let n_e = geom.n_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        // edge-major coefficients; remove the boundary-mean of the
        // constant part for conditioning (both forms kill constants)
        let mut coeffs: Vec<f64> = (0..n_e * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean: f64 = (0..n_e)
            .map(|e| coeffs[e * k] * geom.edges[e].length)
            .sum::<f64>()
            / geom.perimeter;
        for e in 0..n_e {
            coeffs[e * k] -= mean;
        }
        // permute into the split layout of sigma_star
        let mut split = DVector::zeros(n_e * k);
        for e in 0..n_e {
            split[e] = coeffs[e * k];
            for j in 1..k {
                split[n_e + e * (k - 1) + (j - 1)] = coeffs[e * k + j];
            }
        }
        let sigma_val = (split.transpose() * &s_full * &split)[(0, 0)];
        let eta = BoundaryPiecewisePoly::new(k, coeffs);
        let oracle_val = oracle.seminorm_sq(geom, &eta);
        out.push(sigma_val / oracle_val);
    }
    Ok(out)
}

/// Ratios between the wavelet detail energy and the spectral seminorm for
/// random zero-average piecewise constants on the uniform circle grid.
pub fn wavelet_fourier_ratios(m: u32, n_samples: usize, seed: u64) -> Vec<f64> {
    let n = 1usize << m;
    let n_max = 1usize << (m + 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let wav = circle_detail_energy(&v).expect("power-of-two grid");
            let fou = fourier_minus_half(&v, n_max);
            wav / fou
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinbachSection {
    pub a0: f64,
    pub c0: f64,
    pub g_half: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionRow {
    pub family: String,
    pub level: u32,
    pub k: usize,
    pub stab: String,
    pub gamma_h: f64,
    pub max: f64,
    pub median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaOracleRow {
    pub family: String,
    pub level: u32,
    pub stab: String,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveletEquivalenceRow {
    pub m: u32,
    pub median_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub steinbach: SteinbachSection,
    pub condition_numbers: Vec<ConditionRow>,
    pub sigma_oracle: Vec<SigmaOracleRow>,
    pub wavelet_equivalence: Vec<WaveletEquivalenceRow>,
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[sorted.len() / 2]
}

/// Auxiliary diagnostics over the configured sweep.
pub fn diagnostics(cfg: &ExperimentConfig) -> Result<DiagnosticsReport, ExperimentError> {
    cfg.validate()?;
    let (a0, c0) = crate::stab::steinbach_constants();
    let steinbach = SteinbachSection {
        a0,
        c0,
        g_half: crate::stab::steinbach_g(0.5).expect("1/2 is in range"),
    };

    let mut condition_numbers = Vec::new();
    let mut sigma_oracle = Vec::new();
    for &level in &cfg.levels {
        let mesh = build_mesh(cfg, level)?;
        let stats = mesh_stats(&mesh);
        for &k in &cfg.k {
            for &kind in &cfg.stab {
                let mut conds = stab_condition_numbers(&mesh, k, kind)?;
                let max = conds.iter().cloned().fold(0.0_f64, f64::max);
                condition_numbers.push(ConditionRow {
                    family: cfg.family.to_string(),
                    level,
                    k,
                    stab: kind.to_string(),
                    gamma_h: stats.gamma_h,
                    max,
                    median: median(&mut conds),
                });
            }
        }
        for kind in [StabKind::DualScaledLb, StabKind::DualSqrtLb, StabKind::DualWavelet] {
            if !cfg.stab.contains(&kind) {
                continue;
            }
            let geom = element_geometry(&mesh, 0);
            let ratios =
                sigma_oracle_ratios(&geom, 2, kind, 5, cfg.seed, geom.diameter / 8.0)?;
            sigma_oracle.push(SigmaOracleRow {
                family: cfg.family.to_string(),
                level,
                stab: kind.to_string(),
                min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
                max_ratio: ratios.iter().cloned().fold(0.0_f64, f64::max),
            });
        }
    }

    let wavelet_equivalence = (4..=9)
        .map(|m| {
            let mut ratios = wavelet_fourier_ratios(m, 20, cfg.seed);
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = ratios.iter().cloned().fold(0.0_f64, f64::max);
            WaveletEquivalenceRow {
                m,
                median_ratio: median(&mut ratios),
                min_ratio: min,
                max_ratio: max,
            }
        })
        .collect();

    Ok(DiagnosticsReport {
        steinbach,
        condition_numbers,
        sigma_oracle,
        wavelet_equivalence,
    })
}
