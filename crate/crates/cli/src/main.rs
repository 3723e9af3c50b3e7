//! Command-line experiment driver: mesh-family sweeps over degree and
//! stabilization with CSV/JSON error tables, plus the auxiliary
//! diagnostics report.
//!
//! Exit codes: 0 on full success, 2 if any row failed, 1 on config error.

use clap::Parser;
use ncvem::experiment::{
    diagnostics, emit_report, export_solution, run_experiment, to_csv, ExperimentConfig,
    MeshFamily, ReportFormat,
};
use ncvem::stab::StabKind;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "ncvem",
    about = "Nonconforming virtual element experiments with five stabilization strategies",
    after_help = "Flags override values from --config. Example:\n  \
        ncvem --family dyadic --levels 1,2,3 --k 1,2 --stab dofi,rlb --out table.csv"
)]
struct Args {
    /// Mesh family: hexa | nside | dyadic | file
    #[arg(long)]
    family: Option<MeshFamily>,
    /// Comma-separated refinement levels (dyadic level L is the
    /// 2^(L+2) x 2^(L+2) grid with 2^(L+1) edges per square side)
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    /// Comma-separated polynomial degrees in 1..=4
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Comma-separated stabilizations: dofi | l2 | slb | rlb | wav
    #[arg(long, value_delimiter = ',')]
    stab: Option<Vec<StabKind>>,
    /// Shrink factor of the hexagonal family's collapsing edges
    #[arg(long)]
    shrink: Option<f64>,
    /// Use the geometric edge-count growth variant of the nside family
    #[arg(long)]
    nside_growth: bool,
    /// Output path (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv | json
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Polygonal mesh JSON for --family file
    #[arg(long)]
    mesh_file: Option<PathBuf>,
    /// Emit the diagnostics report (condition numbers, oracle ratios,
    /// gradedness constants) instead of the error table
    #[arg(long)]
    diagnostics: bool,
    /// Replace the trigonometric solution by a degree-k polynomial
    #[arg(long)]
    patch_test: bool,
    /// JSON config mirroring the flags; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solve a single pinned combination and write its DOF vector as JSON
    #[arg(long)]
    solution_out: Option<PathBuf>,
    /// Seed for randomized diagnostics
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config: {e}"))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(f) = args.family {
        cfg.family = f;
    }
    if let Some(l) = &args.levels {
        cfg.levels = l.clone();
    }
    if let Some(k) = &args.k {
        cfg.k = k.clone();
    }
    if let Some(s) = &args.stab {
        cfg.stab = s.clone();
    }
    if let Some(s) = args.shrink {
        cfg.shrink = s;
    }
    if args.nside_growth {
        cfg.nside_growth = true;
    }
    if args.patch_test {
        cfg.patch_test = true;
    }
    if let Some(p) = &args.mesh_file {
        cfg.mesh_file = Some(p.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run() -> i32 {
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return 1;
    }
    if cfg.family == MeshFamily::File {
        let path = cfg.mesh_file.as_ref().expect("validated");
        if !path.exists() {
            eprintln!("error: mesh file {} does not exist", path.display());
            return 1;
        }
    }

    if let Some(path) = &args.solution_out {
        return match export_solution(&cfg) {
            Ok(export) => {
                let text = serde_json::to_string(&export).expect("solution serializes");
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("error: {e}");
                    1
                } else {
                    0
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        };
    }

    if args.diagnostics {
        match diagnostics(&cfg) {
            Ok(report) => {
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                match &args.out {
                    Some(path) => {
                        if let Err(e) = std::fs::write(path, text) {
                            eprintln!("error: {e}");
                            return 1;
                        }
                    }
                    None => println!("{text}"),
                }
                return 0;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        }
    }

    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let format = args.format.unwrap_or(ReportFormat::Csv);
    match &args.out {
        Some(path) => {
            if let Err(e) = emit_report(&report, format, path) {
                eprintln!("error: {e}");
                return 1;
            }
        }
        None => match format {
            ReportFormat::Csv => print!("{}", to_csv(&report)),
            ReportFormat::Json => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                )
            }
        },
    }
    if report.any_failed() {
        2
    } else {
        0
    }
}

fn main() {
    std::process::exit(run());
}
