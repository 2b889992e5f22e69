//! Band enclosures, gap certificates and convergence studies.
//!
//! On one mesh, the four variant spectra nest: the Dirichlet space sits
//! inside both quasi-periodic spaces, which sit inside the unconstrained
//! space, so `λ_k^N ≤ λ_k^{θ} ≤ λ_k^D` for θ periodic or antiperiodic. Band
//! `k` of the periodic operator is enclosed by `[λ_k^N, λ_k^D]`; its left
//! end lies in `[λ_k^N, λ_k^{periodic}]` and its right end in
//! `[λ_k^{antiperiodic}, λ_k^D]`.
//!
//! A gap between bands `k` and `k+1` is certified by the strict inequality
//! `λ_k^D < λ_{k+1}^N` on a common discretization; the θ values sharpen the
//! endpoint estimates but are not needed for soundness.
//!
//! Physical eigenvalues are the cell values times `ε^{-2}`; the period cell
//! itself is never rescaled.

use crate::fem::{self, FemError, Variant};
use crate::geometry::{build_cell, boxes_from_volumes, BoxFamily, GeometryError};
use crate::limits::{epsilon_from_radius, hole_radius, DesignParams, GapTargets, LimitSpectrum, LimitsError};
use crate::mesh::{triangulate, MeshError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BandsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Limits(#[from] LimitsError),
    #[error("trap {trap}: hole radius implies ε = {got}, expected {expected} (relative gap > 1e-9)")]
    InconsistentEpsilon { trap: usize, expected: f64, got: f64 },
    #[error("enclosure violated at band {k}: {detail}")]
    EnclosureViolated { k: usize, detail: String },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("band verification supports n = 2 only (got n = {0})")]
    UnsupportedDimension(u32),
}

type Result<T> = std::result::Result<T, BandsError>;

/// Eigenvalue quadruple for one band index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandQuad {
    pub neumann: f64,
    pub periodic: f64,
    pub antiperiodic: f64,
    pub dirichlet: f64,
}

/// Per-index eigenvalue quadruples with the scale that has been applied to
/// them (`epsilon = 1` means raw cell values).
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub quads: Vec<BandQuad>,
    pub epsilon: f64,
    /// Solver tolerance the quadruples were computed at.
    pub tol: f64,
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.quads.len()
    }

    /// Enclosing intervals `[λ_k^N, λ_k^D]` for each band.
    pub fn band_intervals(&self) -> Vec<[f64; 2]> {
        self.quads.iter().map(|q| [q.neumann, q.dirichlet]).collect()
    }

    /// Certified gaps `(λ_k^D, λ_{k+1}^N)` where the inequality is strict.
    pub fn certified_gaps(&self) -> Vec<[f64; 2]> {
        self.quads
            .windows(2)
            .filter(|w| w[0].dirichlet < w[1].neumann)
            .map(|w| [w[0].dirichlet, w[1].neumann])
            .collect()
    }

    /// Outer gap estimates `(λ_k^{antiperiodic}, λ_{k+1}^{periodic})`: the
    /// true gap, when present, is contained in these.
    pub fn estimated_gaps(&self) -> Vec<[f64; 2]> {
        self.quads
            .windows(2)
            .map(|w| [w[0].antiperiodic, w[1].periodic])
            .collect()
    }
}

/// Solve the four variant eigenproblems on one mesh of the trapped cell and
/// assemble the quadruples. The enclosure inequalities are asserted (slack
/// `2·tol` relative).
pub fn band_enclosures(
    family: &BoxFamily,
    radii: &[f64],
    h_max: f64,
    hole_refine: f64,
    k_max: usize,
    tol: f64,
) -> Result<BandStructure> {
    let cell = build_cell(family, radii)?;
    let mesh = triangulate(&cell, h_max, hole_refine)?;
    let raw = fem::assemble(&mesh)?;

    // The four solves are independent; run them on scoped threads and merge
    // in the fixed variant order.
    let mut results: [Option<std::result::Result<fem::EigenResult, FemError>>; 4] =
        [None, None, None, None];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for variant in Variant::ALL {
            let (mesh, raw) = (&mesh, &raw);
            handles.push(scope.spawn(move || fem::solve_variant(mesh, raw, variant, k_max, tol)));
        }
        for (slot, handle) in results.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("variant solve panicked"));
        }
    });
    let [neu, per, anti, dir] = results.map(|r| r.unwrap());
    let (neu, per, anti, dir) = (neu?, per?, anti?, dir?);

    let mut quads = Vec::with_capacity(k_max);
    for k in 0..k_max {
        quads.push(BandQuad {
            neumann: neu.values[k],
            periodic: per.values[k],
            antiperiodic: anti.values[k],
            dirichlet: dir.values[k],
        });
    }

    let bs = BandStructure {
        quads,
        epsilon: 1.0,
        tol,
    };
    for (k, q) in bs.quads.iter().enumerate() {
        let slack = |x: f64| 2.0 * tol * x.abs().max(1.0);
        if q.neumann > q.periodic + slack(q.periodic) {
            return Err(BandsError::EnclosureViolated {
                k: k + 1,
                detail: format!("λ^N = {} > λ^periodic = {}", q.neumann, q.periodic),
            });
        }
        if q.antiperiodic > q.dirichlet + slack(q.dirichlet) {
            return Err(BandsError::EnclosureViolated {
                k: k + 1,
                detail: format!("λ^antiperiodic = {} > λ^D = {}", q.antiperiodic, q.dirichlet),
            });
        }
    }
    Ok(bs)
}

/// Rescale cell eigenvalues to the physical operator: every value times
/// `ε^{-2}`.
pub fn physical_spectrum(bs: &BandStructure, epsilon: f64) -> BandStructure {
    assert!(epsilon > 0.0);
    let s = 1.0 / (epsilon * epsilon);
    BandStructure {
        quads: bs
            .quads
            .iter()
            .map(|q| BandQuad {
                neumann: q.neumann * s,
                periodic: q.periodic * s,
                antiperiodic: q.antiperiodic * s,
                dirichlet: q.dirichlet * s,
            })
            .collect(),
        epsilon: bs.epsilon * epsilon,
        tol: bs.tol,
    }
}

// ---------------------------------------------------------------------------
// Gap report
// ---------------------------------------------------------------------------

/// One inter-band interval in a [`GapReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    /// Band index `k`: the interval separates bands `k` and `k+1` (1-based).
    pub band: usize,
    pub lo: f64,
    pub hi: f64,
    pub certified: bool,
    pub matched_target: Option<usize>,
    /// Largest relative endpoint deviation from the matched target.
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub cutoff: f64,
}

impl GapReport {
    pub fn certified_count(&self) -> usize {
        self.rows.iter().filter(|r| r.certified).count()
    }

    pub fn matched_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.certified && r.matched_target.is_some())
            .count()
    }
}

fn overlap(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[1].min(b[1]) - a[0].max(b[0])).max(0.0)
}

/// List the inter-band intervals below the cutoff, flag the certified ones,
/// and match each certified gap to the target interval it overlaps most.
pub fn gap_report(bs: &BandStructure, targets: &GapTargets) -> GapReport {
    let mut rows = Vec::new();
    for (k, w) in bs.quads.windows(2).enumerate() {
        let (lo, hi) = (w[0].dirichlet, w[1].neumann);
        if lo > targets.cutoff {
            continue;
        }
        let certified = lo < hi;
        let (mut matched, mut deviation) = (None, None);
        if certified {
            let best = targets
                .intervals
                .iter()
                .enumerate()
                .map(|(i, &iv)| (i, overlap([lo, hi], iv)))
                .filter(|&(_, ov)| ov > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, _)) = best {
                let [alpha, beta] = targets.intervals[i];
                matched = Some(i);
                deviation = Some(
                    ((lo - alpha).abs() / alpha).max((hi - beta).abs() / beta),
                );
            }
        }
        rows.push(GapRow {
            band: k + 1,
            lo,
            hi,
            certified,
            matched_target: matched,
            deviation,
        });
    }
    GapReport {
        rows,
        cutoff: targets.cutoff,
    }
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

/// One (radius, gap-index) sample of the study sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub radius: f64,
    pub epsilon: f64,
    /// Gap index `k` (1-based): compares `ε^{-2} λ_k^D` with `σ_k` and
    /// `ε^{-2} λ_{k+1}^N` with `μ_k`.
    pub k: usize,
    pub dirichlet_scaled: f64,
    pub sigma_target: f64,
    pub sigma_dev: f64,
    pub neumann_next_scaled: f64,
    pub mu_target: f64,
    pub mu_dev: f64,
}

/// Study sweep output: per-sample rows, per-gap monotone-trend flags, and the
/// scaled band structures (one per radius, finest last).
#[derive(Debug, Clone)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub sigma_trend_ok: Vec<bool>,
    pub mu_trend_ok: Vec<bool>,
    pub bands: Vec<(f64, BandStructure)>,
}

impl StudyTable {
    pub fn all_trends_ok(&self) -> bool {
        self.sigma_trend_ok.iter().all(|&x| x) && self.mu_trend_ok.iter().all(|&x| x)
    }
}

/// Sweep the hole radius downward and track how the scaled endpoints
/// approach the designed `(σ, μ)`.
///
/// The sweep is parameterized by trap 1's radius; the common scale ε is
/// recovered from the radius law and the remaining traps get their
/// law-consistent radii at the same ε. Re-inverting every trap's radius must
/// reproduce ε to 1e-9 — a self-check of the inversion.
pub fn convergence_study(
    design: &DesignParams,
    spectrum: &LimitSpectrum,
    radii: &[f64],
    h_max: f64,
    hole_refine: f64,
    tol: f64,
) -> Result<StudyTable> {
    if design.n != 2 {
        return Err(BandsError::UnsupportedDimension(design.n));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(BandsError::InvalidSweep(
            "radii must be a strictly descending, non-empty sequence".into(),
        ));
    }
    let m = design.gap_count();
    if spectrum.gap_count() != m {
        return Err(BandsError::InvalidSweep(
            "spectrum gap count does not match the design".into(),
        ));
    }
    let family = boxes_from_volumes(&design.b, 2)?;
    let k_max = m + 2;

    let mut rows = Vec::new();
    let mut bands = Vec::new();
    for &r in radii {
        let eps = epsilon_from_radius(r, design.d[0], 2)?;
        let mut trap_radii = Vec::with_capacity(m);
        for (j, &dj) in design.d.iter().enumerate() {
            let rj = hole_radius(dj, eps, 2);
            let eps_back = epsilon_from_radius(rj, dj, 2)?;
            if (eps_back - eps).abs() > 1e-9 * eps {
                return Err(BandsError::InconsistentEpsilon {
                    trap: j,
                    expected: eps,
                    got: eps_back,
                });
            }
            trap_radii.push(rj);
        }

        let cell_bands = band_enclosures(&family, &trap_radii, h_max, hole_refine, k_max, tol)?;
        let scaled = physical_spectrum(&cell_bands, eps);
        for k in 0..m {
            let dirichlet_scaled = scaled.quads[k].dirichlet;
            let neumann_next_scaled = scaled.quads[k + 1].neumann;
            rows.push(StudyRow {
                radius: r,
                epsilon: eps,
                k: k + 1,
                dirichlet_scaled,
                sigma_target: spectrum.sigma[k],
                sigma_dev: (dirichlet_scaled - spectrum.sigma[k]).abs() / spectrum.sigma[k],
                neumann_next_scaled,
                mu_target: spectrum.mu[k],
                mu_dev: (neumann_next_scaled - spectrum.mu[k]).abs() / spectrum.mu[k],
            });
        }
        bands.push((r, scaled));
    }

    let mut sigma_trend_ok = Vec::with_capacity(m);
    let mut mu_trend_ok = Vec::with_capacity(m);
    for k in 1..=m {
        let devs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| row.k == k)
            .map(|row| (row.sigma_dev, row.mu_dev))
            .collect();
        sigma_trend_ok.push(devs.windows(2).all(|w| w[1].0 < w[0].0));
        mu_trend_ok.push(devs.windows(2).all(|w| w[1].1 < w[0].1));
    }

    Ok(StudyTable {
        rows,
        sigma_trend_ok,
        mu_trend_ok,
        bands,
    })
}

/// Neumann spectrum of the sealed cell (every screen closed): the limit the
/// trapped cell approaches as the holes shrink. Used as the reference scale
/// for "stays bounded away from zero" checks.
pub fn sealed_neumann_reference(
    family: &BoxFamily,
    h_max: f64,
    k_count: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let cell = build_cell(family, &vec![0.0; family.trap_count()])?;
    let mesh = triangulate(&cell, h_max, 1.0)?;
    let raw = fem::assemble(&mesh)?;
    let res = fem::solve_variant(&mesh, &raw, Variant::Neumann, k_count, tol)?;
    Ok(res.values)
}
