//! Batch front end: design traps from target gap intervals, evaluate the
//! forward map, generate geometry and meshes, solve band structures, and run
//! verification sweeps.
//!
//! Exit codes: 0 success; 1 I/O or parse failure; 2 ordering/invariant
//! violation in the inputs; 3 target spectrum not designable; 4 mesh or
//! solver failure; 5 verification ran but a gap certificate or trend check
//! failed; 64 usage error.

use clap::{Parser, Subcommand};
use gapcell::bands::{self, BandsError};
use gapcell::fem::{self, FemError};
use gapcell::formats::{self, DesignDocument};
use gapcell::geometry::{self, GeometryError};
use gapcell::limits::{self, GapTargets, LimitsError};
use gapcell::mesh::{self, MeshError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gapcell", version, about = "Design and verify spectral gaps of trap-screened periodic domains")]
struct Cli {
    /// Suppress the timestamp header line in generated CSV files.
    #[arg(long, global = true)]
    no_header: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute trap parameters (d, b) realizing the target gap intervals.
    Design {
        /// Targets JSON file (`{"targets": [[a,b],...], "L": ...}`).
        targets: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: u32,
        /// Capacity constant for n ≥ 3 (defaults to the unit-disc value for n = 3).
        #[arg(long)]
        kappa: Option<f64>,
        /// Output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the forward map (σ, μ) of a design, with both root paths.
    Forward {
        design: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lay out the unit-cell geometry (boxes, screens, holes) for a design.
    Geometry {
        design: PathBuf,
        /// Hole radii, one per trap or a single value for all traps.
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Triangulate a geometry file into the slit-cell mesh format.
    Mesh {
        geometry: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        h_max: f64,
        #[arg(long, default_value_t = 4.0)]
        hole_refine: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the four variant eigenproblems on a mesh; emit the bands table.
    Bands {
        mesh: PathBuf,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the raw (index, variant, lambda, residual) table.
        #[arg(long)]
        eigen_out: Option<PathBuf>,
    },
    /// Radius sweep: convergence of the scaled endpoints toward (σ, μ).
    Study {
        design: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 0.04)]
        h_max: f64,
        #[arg(long, default_value_t = 4.0)]
        hole_refine: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full verification: sweep, gap certificates and trend flags.
    /// Exit 0 only if every designed gap is certified at every radius and
    /// the deviation trends are monotone.
    Verify {
        design: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 0.04)]
        h_max: f64,
        #[arg(long, default_value_t = 4.0)]
        hole_refine: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Gap-report cutoff L (default 2·μ_m).
        #[arg(long)]
        cutoff: Option<f64>,
        /// Output directory for study.csv, bands_r*.csv, gaps_r*.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Randomized property suites: round trip, path equivalence, interlacing.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

// ---------------------------------------------------------------------------
// Error-to-exit-code mapping
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Io(String),
    Parse(String),
    Domain(LimitsError),
    Geometry(GeometryError),
    Mesh(MeshError),
    Solver(String),
    Certificate(String),
    Selftest(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Parse(m) => write!(f, "parse: {m}"),
            CliError::Domain(e) => write!(f, "invalid-input: {e}"),
            CliError::Geometry(e) => write!(f, "geometry: {e}"),
            CliError::Mesh(e) => write!(f, "mesh: {e}"),
            CliError::Solver(m) => write!(f, "solver: {m}"),
            CliError::Certificate(m) => write!(f, "certificate: {m}"),
            CliError::Selftest(m) => write!(f, "selftest: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Parse(_) => 1,
            CliError::Domain(LimitsError::NotInG { .. }) => 3,
            CliError::Domain(_) | CliError::Geometry(_) => 2,
            CliError::Mesh(_) | CliError::Solver(_) => 4,
            CliError::Certificate(_) => 5,
            CliError::Selftest(_) => 1,
        }
    }
}

impl From<LimitsError> for CliError {
    fn from(e: LimitsError) -> Self {
        CliError::Domain(e)
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Geometry(e)
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Mesh(e)
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<BandsError> for CliError {
    fn from(e: BandsError) -> Self {
        match e {
            BandsError::Geometry(g) => CliError::Geometry(g),
            BandsError::Mesh(m) => CliError::Mesh(m),
            BandsError::Fem(f) => CliError::Solver(f.to_string()),
            BandsError::Limits(l) => CliError::Domain(l),
            BandsError::InconsistentEpsilon { .. } | BandsError::EnclosureViolated { .. } => {
                CliError::Solver(e.to_string())
            }
            BandsError::InvalidSweep(_) | BandsError::UnsupportedDimension(_) => {
                CliError::Domain(LimitsError::InvalidEntry {
                    index: 0,
                    detail: "invalid sweep configuration",
                })
            }
        }
    }
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError::Parse(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// Small I/O helpers
// ---------------------------------------------------------------------------

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn csv_header(no_header: bool) -> String {
    if no_header {
        String::new()
    } else {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("# generated unix={now}\n")
    }
}

fn expand_radii(radii: &[f64], traps: usize) -> Result<Vec<f64>> {
    if radii.len() == traps {
        Ok(radii.to_vec())
    } else if radii.len() == 1 {
        Ok(vec![radii[0]; traps])
    } else {
        Err(CliError::Domain(LimitsError::InvalidEntry {
            index: radii.len(),
            detail: "radii count must be 1 or one per trap",
        }))
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_design(targets_path: &Path, n: u32, kappa: Option<f64>, out: Option<&PathBuf>) -> Result<()> {
    let targets = formats::parse_targets(&read(targets_path)?)?;
    limits::validate_targets(&targets)?;
    let params = limits::design_from_targets(&targets, n, kappa)?;
    let (spectrum, residual) = limits::forward_map(&params)?;
    let doc = DesignDocument::from_params(&params).with_spectrum(&spectrum, residual);
    write_out(out, &formats::write_design(&doc))
}

fn cmd_forward(design_path: &Path, out: Option<&PathBuf>) -> Result<()> {
    let doc = formats::parse_design(&read(design_path)?)?;
    let params = doc.to_params()?;
    let (spectrum, residual) = limits::forward_map(&params)?;
    write_out(out, &formats::write_spectrum(&spectrum, Some(residual)))
}

fn cmd_geometry(design_path: &Path, radii: &[f64], out: Option<&PathBuf>) -> Result<()> {
    let doc = formats::parse_design(&read(design_path)?)?;
    let params = doc.to_params()?;
    if params.n != 2 {
        return Err(CliError::Geometry(GeometryError::UnsupportedDimension(
            params.n,
        )));
    }
    let family = geometry::boxes_from_volumes(&params.b, 2)?;
    let report = geometry::validate_conditions(&family, &params.b);
    if !report.is_ok() {
        return Err(CliError::Geometry(GeometryError::InvalidVolume {
            index: 0,
            detail: "layout violates the trap-placement conditions",
        }));
    }
    let radii = expand_radii(radii, family.trap_count())?;
    let cell = geometry::build_cell(&family, &radii)?;
    write_out(out, &formats::write_geometry(&cell))
}

fn cmd_mesh(geometry_path: &Path, h_max: f64, hole_refine: f64, out: Option<&PathBuf>) -> Result<()> {
    let cell = formats::parse_geometry(&read(geometry_path)?)?;
    let mesh = mesh::triangulate(&cell, h_max, hole_refine)?;
    write_out(out, &mesh::export_mesh(&mesh))
}

fn cmd_bands(
    mesh_path: &Path,
    k_max: usize,
    tol: f64,
    out: Option<&PathBuf>,
    eigen_out: Option<&PathBuf>,
    no_header: bool,
) -> Result<()> {
    let mesh = mesh::import_mesh(&read(mesh_path)?)?;
    let raw = fem::assemble(&mesh)?;
    let mut quads = vec![
        bands::BandQuad {
            neumann: 0.0,
            periodic: 0.0,
            antiperiodic: 0.0,
            dirichlet: 0.0,
        };
        k_max
    ];
    let mut eigen_rows: Vec<(usize, &str, f64, f64)> = Vec::new();
    for variant in fem::Variant::ALL {
        let res = fem::solve_variant(&mesh, &raw, variant, k_max, tol)?;
        for k in 0..k_max {
            let slot = &mut quads[k];
            match variant {
                fem::Variant::Neumann => slot.neumann = res.values[k],
                fem::Variant::Periodic => slot.periodic = res.values[k],
                fem::Variant::Antiperiodic => slot.antiperiodic = res.values[k],
                fem::Variant::Dirichlet => slot.dirichlet = res.values[k],
            }
            eigen_rows.push((k + 1, variant.label(), res.values[k], res.residuals[k]));
        }
    }
    let bs = bands::BandStructure {
        quads,
        epsilon: 1.0,
        tol,
    };
    let table = format!("{}{}", csv_header(no_header), formats::write_bands_csv(&bs));
    write_out(out, &table)?;
    if let Some(p) = eigen_out {
        let table = format!("{}{}", csv_header(no_header), formats::write_eigen_csv(&eigen_rows));
        write_out(Some(p), &table)?;
    }
    Ok(())
}

fn load_design_for_pipeline(path: &Path) -> Result<DesignDocument> {
    formats::parse_design(&read(path)?).map_err(Into::into)
}

fn cmd_study(
    design_path: &Path,
    radii: &[f64],
    h_max: f64,
    hole_refine: f64,
    tol: f64,
    out: Option<&PathBuf>,
    no_header: bool,
) -> Result<()> {
    let doc = load_design_for_pipeline(design_path)?;
    let params = doc.to_params()?;
    let (spectrum, _) = limits::forward_map(&params)?;
    let study = bands::convergence_study(&params, &spectrum, radii, h_max, hole_refine, tol)?;
    let table = format!("{}{}", csv_header(no_header), formats::write_study_csv(&study));
    write_out(out, &table)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    design_path: &Path,
    radii: &[f64],
    h_max: f64,
    hole_refine: f64,
    tol: f64,
    cutoff: Option<f64>,
    out_dir: &Path,
    no_header: bool,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let doc = load_design_for_pipeline(design_path)?;

    // A trap-free design describes the empty cell: nothing can be certified.
    if doc.d.is_empty() {
        let family = gapcell::geometry::CellGeometry::empty().family;
        let bs = bands::band_enclosures(&family, &[], h_max, hole_refine, 4, tol)?;
        let targets = GapTargets {
            intervals: vec![],
            cutoff: cutoff.unwrap_or(100.0),
        };
        let report = bands::gap_report(&bs, &targets);
        let path = out_dir.join("gaps_r1.csv");
        std::fs::write(&path, format!("{}{}", csv_header(no_header), formats::write_gaps_csv(&report)))
            .map_err(|e| CliError::Io(e.to_string()))?;
        return Err(CliError::Certificate(
            "empty cell: no gaps to certify".into(),
        ));
    }

    let params = doc.to_params()?;
    let (spectrum, _) = limits::forward_map(&params)?;
    let m = params.gap_count();
    let targets = GapTargets {
        intervals: spectrum
            .sigma
            .iter()
            .zip(&spectrum.mu)
            .map(|(&s, &u)| [s, u])
            .collect(),
        cutoff: cutoff.unwrap_or(2.0 * spectrum.mu[m - 1]),
    };

    let study = bands::convergence_study(&params, &spectrum, radii, h_max, hole_refine, tol)?;
    let study_csv = format!("{}{}", csv_header(no_header), formats::write_study_csv(&study));
    std::fs::write(out_dir.join("study.csv"), study_csv)
        .map_err(|e| CliError::Io(e.to_string()))?;

    let mut all_certified = true;
    for (i, (r, bs)) in study.bands.iter().enumerate() {
        let report = bands::gap_report(bs, &targets);
        let certified = report.matched_count();
        println!(
            "r={r}: certified gaps matched to targets: {certified}/{m}"
        );
        if certified < m {
            all_certified = false;
        }
        let bands_csv = format!("{}{}", csv_header(no_header), formats::write_bands_csv(bs));
        std::fs::write(out_dir.join(format!("bands_r{}.csv", i + 1)), bands_csv)
            .map_err(|e| CliError::Io(e.to_string()))?;
        let gaps_csv = format!("{}{}", csv_header(no_header), formats::write_gaps_csv(&report));
        std::fs::write(out_dir.join(format!("gaps_r{}.csv", i + 1)), gaps_csv)
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    println!(
        "trend flags: sigma {:?} mu {:?}",
        study.sigma_trend_ok, study.mu_trend_ok
    );

    if !all_certified {
        return Err(CliError::Certificate(
            "a designed gap is not certified at some radius".into(),
        ));
    }
    if !study.all_trends_ok() {
        return Err(CliError::Certificate(
            "deviation trends are not monotone along the sweep".into(),
        ));
    }
    println!("verify: all gaps certified, trends monotone");
    Ok(())
}

fn cmd_selftest(seed: u64, samples: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_round_trip = 0.0f64;
    let mut worst_paths = 0.0f64;
    for _ in 0..samples {
        let m = 1 + rng.gen_range(0..6);
        let spectrum = limits::sample_in_g(&mut rng, m);
        let params = limits::inverse_design(&spectrum, 2, None)?;
        let (fwd, path_dev) = limits::forward_map(&params)?;
        worst_paths = worst_paths.max(path_dev);
        for j in 0..m {
            worst_round_trip = worst_round_trip
                .max((fwd.sigma[j] - spectrum.sigma[j]).abs() / spectrum.sigma[j])
                .max((fwd.mu[j] - spectrum.mu[j]).abs() / spectrum.mu[j]);
            // Interlacing must hold on every forward solve; the negated
            // comparisons also catch NaN.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(fwd.sigma[j] < fwd.mu[j]) || (j + 1 < m && !(fwd.mu[j] < fwd.sigma[j + 1])) {
                return Err(CliError::Selftest(format!(
                    "interlacing violated on sample with m={m}"
                )));
            }
        }
    }
    println!(
        "selftest: {samples} samples, max round-trip deviation {worst_round_trip:.3e}, max path disagreement {worst_paths:.3e}"
    );
    if worst_round_trip > 1e-9 || worst_paths > 1e-9 {
        return Err(CliError::Selftest(format!(
            "deviation beyond 1e-9 (round trip {worst_round_trip:.3e}, paths {worst_paths:.3e})"
        )));
    }
    println!("selftest: PASS");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Design {
            targets,
            n,
            kappa,
            out,
        } => cmd_design(targets, *n, *kappa, out.as_ref()),
        Command::Forward { design, out } => cmd_forward(design, out.as_ref()),
        Command::Geometry { design, radii, out } => cmd_geometry(design, radii, out.as_ref()),
        Command::Mesh {
            geometry,
            h_max,
            hole_refine,
            out,
        } => cmd_mesh(geometry, *h_max, *hole_refine, out.as_ref()),
        Command::Bands {
            mesh,
            k_max,
            tol,
            out,
            eigen_out,
        } => cmd_bands(mesh, *k_max, *tol, out.as_ref(), eigen_out.as_ref(), cli.no_header),
        Command::Study {
            design,
            radii,
            h_max,
            hole_refine,
            tol,
            out,
        } => cmd_study(design, radii, *h_max, *hole_refine, *tol, out.as_ref(), cli.no_header),
        Command::Verify {
            design,
            radii,
            h_max,
            hole_refine,
            tol,
            cutoff,
            out,
        } => cmd_verify(design, radii, *h_max, *hole_refine, *tol, *cutoff, out, cli.no_header),
        Command::Selftest { seed, samples } => cmd_selftest(*seed, *samples),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
