//! Closed-form algebra for the limit gap endpoints.
//!
//! A design is a pair of vectors `(d, b)`: hole constants `d_j > 0` and trap
//! volumes `b_j > 0` with `Σ b_j < 1`. The limit spectrum of the trapped cell
//! consists of bands whose gap endpoints `(σ_j, μ_j)` obey
//!
//! ```text
//! σ_j = κ d_j^{n-2} / (4 b_j)   (n ≥ 3)        σ_j = π d_j / (2 b_j)   (n = 2)
//! ```
//!
//! while the `μ_j` are the m real roots of the secular equation
//!
//! ```text
//! 1 + Σ_j σ_j b_j / ((1 - Σ_i b_i)(σ_j - λ)) = 0,
//! ```
//!
//! which interlace: `σ_1 < μ_1 < σ_2 < … < σ_m < μ_m`. Two independent root
//! paths are provided — a companion-matrix/Newton solve of the cleared
//! polynomial ([`solve_mu`]) and the reciprocal eigenvalues of a symmetric
//! coupling matrix ([`mu_via_matrix`]) — and they must agree to 1e-9.
//!
//! The map `(d, b) → (σ, μ)` is a bijection onto the interlaced set 𝒢;
//! [`inverse_design`] evaluates the closed-form inverse, so arbitrary target
//! intervals can be realized exactly in the limit.

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

/// Capacity of the unit disc in three dimensions under the Dirichlet-energy
/// normalization (the default `κ` for `n = 3`).
pub const KAPPA_DISC_3D: f64 = 8.0;

/// Required relative separation between consecutive `σ_j`. Inputs below this
/// margin are rejected rather than perturbed: the interlacing structure
/// collapses at coincident `σ`.
pub const SIGMA_REL_MARGIN: f64 = 1e-9;

/// Largest supported number of gaps.
pub const MAX_GAPS: usize = 64;

/// Errors from the gap-endpoint algebra.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitsError {
    #[error("gap count m={0} unsupported (need 1 ≤ m ≤ {MAX_GAPS})")]
    UnsupportedSize(usize),
    #[error("dimension n={0} unsupported (need n ≥ 2)")]
    UnsupportedDimension(u32),
    #[error("target interval ordering violated at index {index}: {detail}")]
    OrderingViolation { index: usize, detail: &'static str },
    #[error("entry {index} invalid: {detail}")]
    InvalidEntry { index: usize, detail: &'static str },
    #[error("volumes must satisfy Σ b_j < 1 (got {0})")]
    VolumeBudgetExceeded(f64),
    #[error("derived σ not strictly increasing at index {0} (relative margin 1e-9)")]
    NonMonotoneSigma(usize),
    #[error("root {index} escaped its interlacing bracket ({lo}, {hi})")]
    InterlacingFailure { index: usize, lo: f64, hi: f64 },
    #[error("found {found} real secular roots, expected {expected}")]
    RootCountMismatch { found: usize, expected: usize },
    #[error("coupling matrix numerically singular (|eigenvalue| = {0:.3e})")]
    SingularM(f64),
    #[error("spectrum not in the designable set 𝒢 at index {index}: {detail}")]
    NotInG { index: usize, detail: &'static str },
    #[error("κ must be supplied for n ≥ 4")]
    MissingKappa,
    #[error("back-substitution residual {0:.3e} exceeds 1e-10; input too ill-conditioned")]
    IllConditioned(f64),
    #[error("radius {0} not achievable by the hole-radius law on its invertible range")]
    NoSolution(f64),
}

type Result<T> = std::result::Result<T, LimitsError>;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Trap design parameters: dimension, capacity constant, hole constants `d`,
/// trap volumes `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams {
    pub n: u32,
    /// Capacity of the unit `(n-1)`-disc; only consulted for `n ≥ 3`.
    pub kappa: Option<f64>,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
}

impl DesignParams {
    /// Validate and construct. Rejects empty or oversized designs, nonpositive
    /// entries, volume budgets `Σ b ≥ 1`, missing κ for `n ≥ 4`, and designs
    /// whose derived `σ` is not strictly increasing.
    pub fn new(n: u32, kappa: Option<f64>, d: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(LimitsError::UnsupportedDimension(n));
        }
        let m = d.len();
        if m == 0 || m > MAX_GAPS {
            return Err(LimitsError::UnsupportedSize(m));
        }
        if b.len() != m {
            return Err(LimitsError::InvalidEntry {
                index: b.len(),
                detail: "d and b must have equal length",
            });
        }
        for (j, &dj) in d.iter().enumerate() {
            if !(dj > 0.0) || !dj.is_finite() {
                return Err(LimitsError::InvalidEntry {
                    index: j,
                    detail: "hole constant d_j must be positive and finite",
                });
            }
        }
        validate_volumes(&b)?;
        if let Some(k) = kappa {
            if !(k > 0.0) || !k.is_finite() {
                return Err(LimitsError::InvalidEntry {
                    index: 0,
                    detail: "κ must be positive and finite",
                });
            }
        }
        let params = Self { n, kappa, d, b };
        params.resolve_kappa()?;
        // Monotone-σ invariant checked in one place.
        sigma_from_design(&params)?;
        Ok(params)
    }

    /// Number of traps (= number of designed gaps).
    pub fn gap_count(&self) -> usize {
        self.d.len()
    }

    /// The capacity constant actually used: κ as given, defaulting to the
    /// unit-disc value for `n = 3`. Unused for `n = 2`.
    pub fn resolve_kappa(&self) -> Result<f64> {
        resolve_kappa(self.n, self.kappa)
    }
}

fn resolve_kappa(n: u32, kappa: Option<f64>) -> Result<f64> {
    match (n, kappa) {
        (_, Some(k)) => Ok(k),
        (2, None) => Ok(f64::NAN), // never consulted
        (3, None) => Ok(KAPPA_DISC_3D),
        (_, None) => Err(LimitsError::MissingKappa),
    }
}

/// The limit gap endpoints: `m` left ends `σ` and `m` right ends `μ`,
/// strictly interlaced.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSpectrum {
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
}

impl LimitSpectrum {
    /// Validate interlacing (`0 < σ_1`, `σ_j < μ_j < σ_{j+1}`, `σ_m < μ_m`)
    /// and construct.
    pub fn new(sigma: Vec<f64>, mu: Vec<f64>) -> Result<Self> {
        let spectrum = Self { sigma, mu };
        spectrum.check_in_g()?;
        Ok(spectrum)
    }

    pub fn gap_count(&self) -> usize {
        self.sigma.len()
    }

    /// Membership test for the designable set 𝒢.
    pub fn check_in_g(&self) -> Result<()> {
        let m = self.sigma.len();
        if m == 0 || m > MAX_GAPS {
            return Err(LimitsError::UnsupportedSize(m));
        }
        if self.mu.len() != m {
            return Err(LimitsError::NotInG {
                index: 0,
                detail: "σ and μ must have equal length",
            });
        }
        if !(self.sigma[0] > 0.0) {
            return Err(LimitsError::NotInG {
                index: 0,
                detail: "σ_1 must be positive",
            });
        }
        for j in 0..m {
            if !(self.mu[j] > self.sigma[j]) {
                return Err(LimitsError::NotInG {
                    index: j,
                    detail: "need σ_j < μ_j",
                });
            }
            if j + 1 < m && !(self.sigma[j + 1] > self.mu[j]) {
                return Err(LimitsError::NotInG {
                    index: j,
                    detail: "need μ_j < σ_{j+1}",
                });
            }
        }
        Ok(())
    }
}

/// Target gap intervals `(α_j, β_j)` inside a cutoff window `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTargets {
    pub intervals: Vec<[f64; 2]>,
    pub cutoff: f64,
}

/// Coefficients `A_0..A_m` of the cleared secular polynomial
/// `Σ_k A_k λ^{m-k}`; same roots as the rational secular equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularCoefficients {
    pub a: Vec<f64>,
}

impl SecularCoefficients {
    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Horner evaluation of `Σ_k A_k λ^{m-k}`.
    pub fn eval(&self, lambda: f64) -> f64 {
        self.a.iter().fold(0.0, |acc, &c| acc * lambda + c)
    }
}

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

fn validate_volumes(b: &[f64]) -> Result<()> {
    let mut total = 0.0;
    for (j, &bj) in b.iter().enumerate() {
        if !(bj > 0.0) || !bj.is_finite() {
            return Err(LimitsError::InvalidEntry {
                index: j,
                detail: "volume b_j must be positive and finite",
            });
        }
        total += bj;
    }
    if !(total < 1.0) {
        return Err(LimitsError::VolumeBudgetExceeded(total));
    }
    Ok(())
}

/// Shared precondition for the root solvers: σ strictly increasing with the
/// 1e-9 relative margin, all positive; volumes positive with `Σ b < 1`.
fn validate_sigma_b(sigma: &[f64], b: &[f64]) -> Result<()> {
    let m = sigma.len();
    if m == 0 || m > MAX_GAPS {
        return Err(LimitsError::UnsupportedSize(m));
    }
    if b.len() != m {
        return Err(LimitsError::InvalidEntry {
            index: b.len(),
            detail: "σ and b must have equal length",
        });
    }
    if !(sigma[0] > 0.0) || !sigma[0].is_finite() {
        return Err(LimitsError::NonMonotoneSigma(0));
    }
    for j in 0..m - 1 {
        if !(sigma[j + 1] - sigma[j] > SIGMA_REL_MARGIN * sigma[j + 1]) {
            return Err(LimitsError::NonMonotoneSigma(j + 1));
        }
    }
    validate_volumes(b)
}

/// Check the target-interval ordering `0 < α_1`, `α_j < β_j < α_{j+1}`,
/// `β_m < L`; returns the input on success.
pub fn validate_targets(targets: &GapTargets) -> Result<&GapTargets> {
    let m = targets.intervals.len();
    if m == 0 || m > MAX_GAPS {
        return Err(LimitsError::UnsupportedSize(m));
    }
    if !(targets.intervals[0][0] > 0.0) {
        return Err(LimitsError::OrderingViolation {
            index: 0,
            detail: "need 0 < α_1",
        });
    }
    for (j, iv) in targets.intervals.iter().enumerate() {
        if !(iv[1] > iv[0]) {
            return Err(LimitsError::OrderingViolation {
                index: j,
                detail: "need α_j < β_j",
            });
        }
        if j + 1 < m && !(targets.intervals[j + 1][0] > iv[1]) {
            return Err(LimitsError::OrderingViolation {
                index: j,
                detail: "need β_j < α_{j+1}",
            });
        }
    }
    if !(targets.cutoff > targets.intervals[m - 1][1]) {
        return Err(LimitsError::OrderingViolation {
            index: m - 1,
            detail: "need β_m < L",
        });
    }
    Ok(targets)
}

// ---------------------------------------------------------------------------
// Forward map
// ---------------------------------------------------------------------------

/// Left gap endpoints from the design: `σ_j = κ d_j^{n-2}/(4 b_j)` for
/// `n ≥ 3`, `σ_j = π d_j/(2 b_j)` for `n = 2`. Errors if the result is not
/// strictly increasing.
pub fn sigma_from_design(p: &DesignParams) -> Result<Vec<f64>> {
    let kappa = p.resolve_kappa()?;
    let sigma: Vec<f64> = p
        .d
        .iter()
        .zip(&p.b)
        .map(|(&dj, &bj)| {
            if p.n == 2 {
                std::f64::consts::PI * dj / (2.0 * bj)
            } else {
                kappa * dj.powi(p.n as i32 - 2) / (4.0 * bj)
            }
        })
        .collect();
    for j in 0..sigma.len() - 1 {
        if !(sigma[j + 1] - sigma[j] > SIGMA_REL_MARGIN * sigma[j + 1]) {
            return Err(LimitsError::NonMonotoneSigma(j + 1));
        }
    }
    Ok(sigma)
}

/// Coefficients of the secular polynomial obtained by clearing denominators:
/// `A_k = (-1)^{m-k} Σ_{i_1<…<i_k} σ_{i_1}…σ_{i_k} (B + b_{i_1} + … + b_{i_k})`
/// with `B = 1 - Σ b_i` (the exterior volume).
pub fn secular_coefficients(sigma: &[f64], b: &[f64]) -> Result<SecularCoefficients> {
    validate_sigma_b(sigma, b)?;
    let m = sigma.len();
    let exterior = 1.0 - b.iter().sum::<f64>();

    // DP over items: prod[k] = Σ_{|S|=k} Π σ, mixed[k] = Σ_{|S|=k} (Π σ)(Σ b).
    let mut prod = vec![0.0f64; m + 1];
    let mut mixed = vec![0.0f64; m + 1];
    prod[0] = 1.0;
    for j in 0..m {
        for k in (1..=j + 1).rev() {
            mixed[k] += mixed[k - 1] * sigma[j] + prod[k - 1] * sigma[j] * b[j];
            prod[k] += prod[k - 1] * sigma[j];
        }
    }

    let a: Vec<f64> = (0..=m)
        .map(|k| {
            let sign = if (m - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * (exterior * prod[k] + mixed[k])
        })
        .collect();
    Ok(SecularCoefficients { a })
}

/// The rational secular form `g(λ) = 1 + Σ_j σ_j b_j/(B (σ_j - λ))` and its
/// derivative. `g' > 0` away from the poles, so each bracket holds one root.
fn secular_rational(sigma: &[f64], b: &[f64], exterior: f64, lambda: f64) -> (f64, f64) {
    let mut g = 1.0;
    let mut dg = 0.0;
    for (&s, &v) in sigma.iter().zip(b) {
        let w = s * v / (exterior * (s - lambda));
        g += w;
        dg += w / (s - lambda);
    }
    (g, dg)
}

/// Interlacing brackets for the secular roots: `(σ_j, σ_{j+1})` for `j < m`
/// and `(σ_m, hi)` for the last root, with `hi` grown until `g(hi) > 0`.
fn root_brackets(sigma: &[f64], b: &[f64], exterior: f64) -> Vec<(f64, f64)> {
    let m = sigma.len();
    let mut brackets = Vec::with_capacity(m);
    for j in 0..m - 1 {
        brackets.push((sigma[j], sigma[j + 1]));
    }
    // Root sum of the monic polynomial bounds the last root from above.
    let coef_sum: f64 = sigma
        .iter()
        .zip(b)
        .map(|(&s, &v)| s * (exterior + v))
        .sum::<f64>()
        / exterior;
    let mut hi = coef_sum.max(sigma[m - 1] * (1.0 + 1e-6)) + 1.0;
    for _ in 0..200 {
        if secular_rational(sigma, b, exterior, hi).0 > 0.0 {
            break;
        }
        hi = sigma[m - 1] + 2.0 * (hi - sigma[m - 1]);
    }
    brackets.push((sigma[m - 1], hi));
    brackets
}

/// Newton polish of one root inside its bracket, with bisection safeguard.
/// Targets residual `|g| ≤ 1e-13`; terminates on step stall.
fn polish_root(sigma: &[f64], b: &[f64], exterior: f64, bracket: (f64, f64), x0: f64) -> f64 {
    let (mut lo, mut hi) = bracket;
    let width = hi - lo;
    let mut x = x0.clamp(lo + 1e-15 * width, hi - 1e-15 * width);
    for _ in 0..100 {
        let (g, dg) = secular_rational(sigma, b, exterior, x);
        if g.abs() <= 1e-13 {
            break;
        }
        // g is increasing between poles: negative left of the root.
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / dg;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Bisection fallback: locate the sign change of `g` inside `(lo, hi)`.
/// `None` when no root can be bracketed there.
fn bisect_root(sigma: &[f64], b: &[f64], exterior: f64, bracket: (f64, f64)) -> Option<f64> {
    let (pole_lo, mut hi) = bracket;
    let width = hi - pole_lo;
    // g → -∞ at the left pole; walk in until the sign is negative.
    let mut lo = pole_lo + 1e-9 * width;
    let mut shrink = 0;
    while secular_rational(sigma, b, exterior, lo).0 >= 0.0 {
        if shrink >= 200 {
            return None;
        }
        lo = pole_lo + (lo - pole_lo) / 8.0;
        shrink += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if secular_rational(sigma, b, exterior, mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// The `m` roots of the secular equation, ascending. Companion-matrix seeds
/// are polished by Newton on the rational form; every root must land strictly
/// inside its interlacing bracket.
pub fn solve_mu(sigma: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let coeffs = secular_coefficients(sigma, b)?;
    let m = sigma.len();
    let exterior = 1.0 - b.iter().sum::<f64>();
    let brackets = root_brackets(sigma, b, exterior);

    // Companion matrix of the monic polynomial λ^m + c_1 λ^{m-1} + … + c_m.
    // The Schur iteration gets a hard step bound: badly scaled companion
    // matrices (wide σ spreads at large m) can stall it, and the bracketed
    // bisection below recovers any root the seeds miss.
    let mut seeds: Vec<f64> = if m == 1 {
        vec![coeffs.a[1] / -coeffs.a[0]]
    } else {
        let lead = coeffs.a[0];
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for i in 1..m {
            comp[(i, i - 1)] = 1.0;
        }
        for k in 1..=m {
            comp[(0, k - 1)] = -coeffs.a[k] / lead;
        }
        nalgebra::linalg::Schur::try_new(comp, 1e-12, 200 * m)
            .map(|schur| {
                schur
                    .complex_eigenvalues()
                    .iter()
                    .filter(|z| z.im.abs() <= 1e-8 * z.re.abs().max(1.0))
                    .map(|z| z.re)
                    .collect()
            })
            .unwrap_or_default()
    };
    seeds.sort_by(|x, y| x.total_cmp(y));

    // Pair seeds with brackets; fall back to bisection where the companion
    // route produced nothing usable.
    let mut mu = Vec::with_capacity(m);
    for (j, &(lo, hi)) in brackets.iter().enumerate() {
        let seed = seeds.iter().copied().find(|&x| x > lo && x < hi);
        let start = match seed {
            Some(x) => x,
            None => match bisect_root(sigma, b, exterior, (lo, hi)) {
                Some(x) => x,
                None => {
                    return Err(LimitsError::RootCountMismatch {
                        found: mu.len(),
                        expected: m,
                    })
                }
            },
        };
        let root = polish_root(sigma, b, exterior, (lo, hi), start);
        if !(root > lo && root < hi) {
            return Err(LimitsError::InterlacingFailure { index: j, lo, hi });
        }
        mu.push(root);
    }
    Ok(mu)
}

/// Symmetric coupling matrix `M` with `M_ii = (1-b_i)/σ_i` and
/// `M_ij = -√(b_i b_j/(σ_i σ_j))`; its reciprocal eigenvalues are the `μ_j`.
pub fn coupling_matrix(sigma: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
    validate_sigma_b(sigma, b)?;
    let m = sigma.len();
    let mut mat = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            mat[(i, j)] = if i == j {
                (1.0 - b[i]) / sigma[i]
            } else {
                -(b[i] * b[j] / (sigma[i] * sigma[j])).sqrt()
            };
        }
    }
    Ok(mat)
}

/// Independent root path: reciprocals of the eigenvalues of the coupling
/// matrix, ascending. Agrees with [`solve_mu`] to relative 1e-9 on every
/// valid input.
pub fn mu_via_matrix(sigma: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mat = coupling_matrix(sigma, b)?;
    let eigen = mat.symmetric_eigen();
    let mut mu = Vec::with_capacity(sigma.len());
    for &e in eigen.eigenvalues.iter() {
        if e.abs() < 1e-14 {
            return Err(LimitsError::SingularM(e.abs()));
        }
        mu.push(1.0 / e);
    }
    mu.sort_by(|x, y| x.total_cmp(y));
    Ok(mu)
}

/// Forward map `(d, b) → (σ, μ)` evaluated through both root paths; returns
/// the spectrum plus the relative disagreement between the paths.
pub fn forward_map(p: &DesignParams) -> Result<(LimitSpectrum, f64)> {
    let sigma = sigma_from_design(p)?;
    let mu = solve_mu(&sigma, &p.b)?;
    let mu_alt = mu_via_matrix(&sigma, &p.b)?;
    let disagreement = mu
        .iter()
        .zip(&mu_alt)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(1e-300))
        .fold(0.0f64, f64::max);
    Ok((LimitSpectrum { sigma, mu }, disagreement))
}

// ---------------------------------------------------------------------------
// Inverse map
// ---------------------------------------------------------------------------

/// Closed-form inverse: recover `(d, b)` from a spectrum in 𝒢 via
///
/// ```text
/// ρ_j = (μ_j - σ_j)/σ_j · Π_{i≠j} (μ_i - σ_j)/(σ_i - σ_j),
/// b_j = ρ_j / (1 + Σ ρ_i),
/// d_j = 2 σ_j ρ_j / (π (1 + Σ ρ_i))                 (n = 2)
///     = (4 σ_j ρ_j / (κ (1 + Σ ρ_i)))^{1/(n-2)}     (n ≥ 3).
/// ```
///
/// The ρ back-substitution residual is checked against 1e-10 to guard the
/// subtractive cancellation in the products.
pub fn inverse_design(spectrum: &LimitSpectrum, n: u32, kappa: Option<f64>) -> Result<DesignParams> {
    if n < 2 {
        return Err(LimitsError::UnsupportedDimension(n));
    }
    spectrum.check_in_g()?;
    let kappa_val = resolve_kappa(n, kappa)?;
    let m = spectrum.gap_count();
    let (sigma, mu) = (&spectrum.sigma, &spectrum.mu);

    let mut rho = Vec::with_capacity(m);
    for j in 0..m {
        let mut r = (mu[j] - sigma[j]) / sigma[j];
        for i in 0..m {
            if i != j {
                r *= (mu[i] - sigma[j]) / (sigma[i] - sigma[j]);
            }
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(LimitsError::NotInG {
                index: j,
                detail: "ρ_j not positive; interlacing too degenerate",
            });
        }
        rho.push(r);
    }

    // Back-substitute ρ into the linear system it solves: for every k,
    // 1 + Σ_j σ_j ρ_j/(σ_j - μ_k) must vanish.
    let mut worst = 0.0f64;
    for &mk in mu {
        let res: f64 = 1.0
            + sigma
                .iter()
                .zip(&rho)
                .map(|(&s, &r)| s * r / (s - mk))
                .sum::<f64>();
        worst = worst.max(res.abs());
    }
    if worst > 1e-10 {
        return Err(LimitsError::IllConditioned(worst));
    }

    let denom = 1.0 + rho.iter().sum::<f64>();
    let b: Vec<f64> = rho.iter().map(|&r| r / denom).collect();
    let d: Vec<f64> = sigma
        .iter()
        .zip(&rho)
        .map(|(&s, &r)| {
            if n == 2 {
                2.0 * s * r / (std::f64::consts::PI * denom)
            } else {
                (4.0 * s * r / (kappa_val * denom)).powf(1.0 / (n as f64 - 2.0))
            }
        })
        .collect();

    DesignParams::new(n, if n >= 3 { Some(kappa_val) } else { kappa }, d, b)
}

/// Design directly from validated target intervals: the limit spectrum is
/// `(σ, μ) = (α, β)`.
pub fn design_from_targets(
    targets: &GapTargets,
    n: u32,
    kappa: Option<f64>,
) -> Result<DesignParams> {
    validate_targets(targets)?;
    let sigma = targets.intervals.iter().map(|iv| iv[0]).collect();
    let mu = targets.intervals.iter().map(|iv| iv[1]).collect();
    inverse_design(&LimitSpectrum::new(sigma, mu)?, n, kappa)
}

// ---------------------------------------------------------------------------
// Hole-radius law
// ---------------------------------------------------------------------------

/// Physical hole radius at scale ε: `d_j ε^{2/(n-2)}` for `n ≥ 3`,
/// `ε^{-1} exp(-1/(d_j ε²))` for `n = 2`.
pub fn hole_radius(d_j: f64, epsilon: f64, n: u32) -> f64 {
    assert!(d_j > 0.0 && epsilon > 0.0 && n >= 2, "hole_radius domain");
    if n == 2 {
        (-1.0 / (d_j * epsilon * epsilon)).exp() / epsilon
    } else {
        d_j * epsilon.powf(2.0 / (n as f64 - 2.0))
    }
}

/// Invert the hole-radius law for ε.
///
/// For `n ≥ 3` the law is globally monotone and the inverse is algebraic;
/// ε is required to land in `(0, 1]`. For `n = 2` the law increases only up
/// to `ε = √(2/d_j)`, and the inverse is taken on that increasing branch by
/// bisection (ε may exceed 1 there: moderate radii demand it).
pub fn epsilon_from_radius(r: f64, d_j: f64, n: u32) -> Result<f64> {
    if !(r > 0.0) || !(d_j > 0.0) || n < 2 {
        return Err(LimitsError::NoSolution(r));
    }
    if n >= 3 {
        let eps = (r / d_j).powf((n as f64 - 2.0) / 2.0);
        if !(eps > 0.0 && eps <= 1.0 + 1e-12) {
            return Err(LimitsError::NoSolution(r));
        }
        return Ok(eps.min(1.0));
    }
    // n = 2: bisect log(hole_radius) - log(r) on the increasing branch.
    let peak = (2.0 / d_j).sqrt();
    let target = r.ln();
    let log_radius = |e: f64| -1.0 / (d_j * e * e) - e.ln();
    if log_radius(peak) < target {
        return Err(LimitsError::NoSolution(r));
    }
    let (mut lo, mut hi) = (1e-12, peak);
    if log_radius(lo) > target {
        return Err(LimitsError::NoSolution(r));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if log_radius(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * hi {
            break;
        }
    }
    let eps = 0.5 * (lo + hi);
    let achieved = hole_radius(d_j, eps, 2);
    if (achieved - r).abs() > 1e-12 * r {
        return Err(LimitsError::NoSolution(r));
    }
    Ok(eps)
}

// ---------------------------------------------------------------------------
// Maxwell gap map
// ---------------------------------------------------------------------------

/// Gaps of the associated Maxwell operator: `±(√σ_j, √μ_j)`, returned
/// ascending by lower endpoint.
pub fn maxwell_gap_map(spectrum: &LimitSpectrum) -> Vec<[f64; 2]> {
    let m = spectrum.gap_count();
    let mut gaps = Vec::with_capacity(2 * m);
    for j in (0..m).rev() {
        gaps.push([-spectrum.mu[j].sqrt(), -spectrum.sigma[j].sqrt()]);
    }
    for j in 0..m {
        gaps.push([spectrum.sigma[j].sqrt(), spectrum.mu[j].sqrt()]);
    }
    gaps
}

// ---------------------------------------------------------------------------
// Random sampling of 𝒢 (selftest / property suites)
// ---------------------------------------------------------------------------

/// Draw a random interlaced spectrum with `m` gaps. Endpoints keep a 2%
/// relative margin from their neighbours so the sample is comfortably inside
/// the designable set; the σ growth rate is tamed for large `m` to keep the
/// overall spread within a few orders of magnitude (wider spreads are
/// rejected by the ill-conditioning guard of the inverse map).
pub fn sample_in_g<R: Rng>(rng: &mut R, m: usize) -> LimitSpectrum {
    assert!((1..=MAX_GAPS).contains(&m));
    let spread = (6.0 / m as f64).min(1.0);
    let mut sigma = Vec::with_capacity(m);
    let mut x = 0.1 + rng.gen::<f64>() * 2.0;
    for _ in 0..m {
        sigma.push(x);
        x *= 1.1 + rng.gen::<f64>() * 1.5 * spread;
    }
    let mut mu = Vec::with_capacity(m);
    for j in 0..m {
        let hi = if j + 1 < m {
            sigma[j + 1]
        } else {
            sigma[j] * (1.5 + rng.gen::<f64>() * 2.0)
        };
        let w = hi - sigma[j];
        mu.push(sigma[j] + w * (0.02 + 0.96 * rng.gen::<f64>()));
    }
    LimitSpectrum { sigma, mu }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PI: f64 = std::f64::consts::PI;

    fn targets(iv: &[[f64; 2]], cutoff: f64) -> GapTargets {
        GapTargets {
            intervals: iv.to_vec(),
            cutoff,
        }
    }

    #[test]
    fn target_ordering() {
        assert!(validate_targets(&targets(&[[1.0, 2.0]], 10.0)).is_ok());
        assert!(validate_targets(&targets(&[[0.5, 1.0], [2.0, 3.0], [4.0, 5.0]], 6.0)).is_ok());
        let err = validate_targets(&targets(&[[1.0, 2.0], [1.5, 3.0]], 10.0)).unwrap_err();
        assert!(matches!(
            err,
            LimitsError::OrderingViolation { index: 0, .. }
        ));
        let err = validate_targets(&targets(&[[1.0, 2.0]], 1.5)).unwrap_err();
        assert!(matches!(err, LimitsError::OrderingViolation { .. }));
    }

    #[test]
    fn sigma_examples() {
        let p = DesignParams::new(2, None, vec![1.0 / PI], vec![0.5]).unwrap();
        let s = sigma_from_design(&p).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);

        let p = DesignParams::new(3, Some(8.0), vec![1.0], vec![0.5]).unwrap();
        assert!((sigma_from_design(&p).unwrap()[0] - 4.0).abs() < 1e-15);

        // m = 2 reference design for σ = (1, 4).
        let p = DesignParams::new(2, None, vec![0.5 / PI, 2.0 / PI], vec![0.25, 0.25]).unwrap();
        let s = sigma_from_design(&p).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_monotone_guard() {
        let err = DesignParams::new(2, None, vec![1.0, 1.0], vec![0.2, 0.2]).unwrap_err();
        assert!(matches!(err, LimitsError::NonMonotoneSigma(1)));
    }

    #[test]
    fn secular_coefficients_small_cases() {
        let c = secular_coefficients(&[1.0], &[0.5]).unwrap();
        assert_eq!(c.a, vec![-0.5, 1.0]);
        assert!((c.eval(2.0)).abs() < 1e-15);

        // Proportional to λ² - 7.5λ + 8 with leading coefficient B = 0.5.
        let c = secular_coefficients(&[1.0, 4.0], &[0.25, 0.25]).unwrap();
        assert_eq!(c.a, vec![0.5, -3.75, 4.0]);

        let c = secular_coefficients(&[2.0], &[0.5]).unwrap();
        assert!((c.eval(4.0)).abs() < 1e-15);
    }

    /// Independent oracle: coarse sign-change scan of the rational form
    /// followed by plain bisection, no shared code with solve_mu's seeding.
    fn bisect_oracle(sigma: &[f64], b: &[f64]) -> Vec<f64> {
        let exterior = 1.0 - b.iter().sum::<f64>();
        let g = |x: f64| {
            1.0 + sigma
                .iter()
                .zip(b)
                .map(|(&s, &v)| s * v / (exterior * (s - x)))
                .sum::<f64>()
        };
        let m = sigma.len();
        let mut roots = Vec::new();
        for j in 0..m {
            let hi_end = if j + 1 < m {
                sigma[j + 1]
            } else {
                // march right until g > 0
                let mut h = sigma[m - 1] * 2.0 + 1.0;
                while g(h) <= 0.0 {
                    h = sigma[m - 1] + (h - sigma[m - 1]) * 2.0;
                }
                h
            };
            let w = hi_end - sigma[j];
            let mut lo = sigma[j] + 1e-13 * w;
            while g(lo) >= 0.0 {
                lo = sigma[j] + (lo - sigma[j]) / 4.0;
            }
            let mut hi = hi_end - if j + 1 < m { 1e-13 * w } else { 0.0 };
            while g(hi) <= 0.0 {
                hi = hi_end - (hi_end - hi) / 4.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        roots
    }

    #[test]
    fn secular_polynomial_nonzero_at_poles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = 1 + rng.gen_range(0..6);
            let spectrum = sample_in_g(&mut rng, m);
            let p = inverse_design(&spectrum, 2, None).unwrap();
            let sigma = sigma_from_design(&p).unwrap();
            let c = secular_coefficients(&sigma, &p.b).unwrap();
            for &s in &sigma {
                assert!(c.eval(s) != 0.0, "polynomial vanished at a pole");
            }
        }
    }

    #[test]
    fn solve_mu_m1_closed_form() {
        let mu = solve_mu(&[1.0], &[0.5]).unwrap();
        assert!((mu[0] - 2.0).abs() < 1e-12);
        let mu = solve_mu(&[2.0], &[0.5]).unwrap();
        assert!((mu[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn solve_mu_m2_frozen_roots() {
        // Quadratic-formula oracle: roots of λ² - 7.5λ + 8.
        let mu = solve_mu(&[1.0, 4.0], &[0.25, 0.25]).unwrap();
        assert!((mu[0] - 1.2877855495509738).abs() < 1e-12);
        assert!((mu[1] - 6.2122144504490262).abs() < 1e-12);
        let oracle = bisect_oracle(&[1.0, 4.0], &[0.25, 0.25]);
        for (x, y) in mu.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9 * x);
        }
    }

    #[test]
    fn solve_mu_vanishing_volumes() {
        let mu = solve_mu(&[1.0, 4.0], &[1e-12, 1e-12]).unwrap();
        assert!((mu[0] - 1.0).abs() < 1e-9);
        assert!((mu[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn interlacing_holds_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = 1 + rng.gen_range(0..6);
            let spectrum = sample_in_g(&mut rng, m);
            let p = inverse_design(&spectrum, 2, None).unwrap();
            let sigma = sigma_from_design(&p).unwrap();
            let mu = solve_mu(&sigma, &p.b).unwrap();
            for j in 0..m {
                assert!(sigma[j] < mu[j]);
                if j + 1 < m {
                    assert!(mu[j] < sigma[j + 1]);
                }
            }
        }
    }

    #[test]
    fn coupling_matrix_frozen_entries() {
        let m1 = coupling_matrix(&[1.0], &[0.5]).unwrap();
        assert_eq!(m1[(0, 0)], 0.5);

        let m2 = coupling_matrix(&[1.0, 4.0], &[0.25, 0.25]).unwrap();
        assert!((m2[(0, 0)] - 0.75).abs() < 1e-15);
        assert!((m2[(0, 1)] + 0.125).abs() < 1e-15);
        assert!((m2[(1, 0)] + 0.125).abs() < 1e-15);
        assert!((m2[(1, 1)] - 0.1875).abs() < 1e-15);
        // Leading principal minors match (1 - Σ_chosen b)/(Π_chosen σ).
        assert!((m2.view((0, 0), (1, 1)).determinant() - 0.75).abs() < 1e-15);
        assert!((m2.determinant() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn minor_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = 1 + rng.gen_range(0..5);
            let spectrum = sample_in_g(&mut rng, m);
            let p = inverse_design(&spectrum, 2, None).unwrap();
            let sigma = sigma_from_design(&p).unwrap();
            let mat = coupling_matrix(&sigma, &p.b).unwrap();
            for k in 1..=m {
                let minor = mat.view((0, 0), (k, k)).determinant();
                let expect = (1.0 - p.b[..k].iter().sum::<f64>())
                    / sigma[..k].iter().product::<f64>();
                assert!(
                    (minor - expect).abs() <= 1e-11 * expect.abs().max(1.0),
                    "minor {k}: {minor} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn mu_via_matrix_frozen() {
        let mu = mu_via_matrix(&[1.0], &[0.5]).unwrap();
        assert!((mu[0] - 2.0).abs() < 1e-14);
        // Hand eigenvalues from trace 0.9375, det 0.125.
        let mu = mu_via_matrix(&[1.0, 4.0], &[0.25, 0.25]).unwrap();
        assert!((mu[0] - 1.2877855495509738).abs() < 1e-12);
        assert!((mu[1] - 6.2122144504490262).abs() < 1e-12);
    }

    #[test]
    fn path_equivalence_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let m = 1 + rng.gen_range(0..6);
            let spectrum = sample_in_g(&mut rng, m);
            let p = inverse_design(&spectrum, 2, None).unwrap();
            let sigma = sigma_from_design(&p).unwrap();
            let a = solve_mu(&sigma, &p.b).unwrap();
            let c = mu_via_matrix(&sigma, &p.b).unwrap();
            for (x, y) in a.iter().zip(&c) {
                assert!((x - y).abs() <= 1e-9 * x.abs(), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn inverse_design_examples() {
        let spectrum = LimitSpectrum::new(vec![1.0], vec![2.0]).unwrap();
        let p = inverse_design(&spectrum, 2, None).unwrap();
        assert!((p.b[0] - 0.5).abs() < 1e-15);
        assert!((p.d[0] - 1.0 / PI).abs() < 1e-15);

        let spectrum = LimitSpectrum::new(
            vec![1.0, 4.0],
            vec![1.2877855495509738, 6.2122144504490262],
        )
        .unwrap();
        let p = inverse_design(&spectrum, 2, None).unwrap();
        assert!((p.b[0] - 0.25).abs() < 1e-12);
        assert!((p.b[1] - 0.25).abs() < 1e-12);
        // Must invert the forward m=2 example.
        let (fwd, _) = forward_map(&p).unwrap();
        assert!((fwd.sigma[0] - 1.0).abs() < 1e-12 && (fwd.sigma[1] - 4.0).abs() < 1e-12);

        // n = 3 branch: d = 4σb/κ by the σ law, confirmed by round trip.
        let spectrum = LimitSpectrum::new(vec![1.0], vec![2.0]).unwrap();
        let p = inverse_design(&spectrum, 3, Some(8.0)).unwrap();
        assert!((p.d[0] - 0.25).abs() < 1e-15);
        let (fwd, _) = forward_map(&p).unwrap();
        assert!((fwd.sigma[0] - 1.0).abs() < 1e-12 && (fwd.mu[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_design_rejects_non_interlaced() {
        let spectrum = LimitSpectrum {
            sigma: vec![1.0, 4.0],
            mu: vec![5.0, 6.0], // μ_1 > σ_2
        };
        let err = inverse_design(&spectrum, 2, None).unwrap_err();
        assert!(matches!(err, LimitsError::NotInG { index: 0, .. }));
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let m = 1 + rng.gen_range(0..6);
            let spectrum = sample_in_g(&mut rng, m);
            let p = inverse_design(&spectrum, 2, None).unwrap();
            let (fwd, _) = forward_map(&p).unwrap();
            for j in 0..m {
                assert!((fwd.sigma[j] - spectrum.sigma[j]).abs() <= 1e-9 * spectrum.sigma[j]);
                assert!((fwd.mu[j] - spectrum.mu[j]).abs() <= 1e-9 * spectrum.mu[j]);
            }
        }
    }

    #[test]
    fn round_trip_at_the_size_cap() {
        // exercises the bounded-Schur seeding and the bisection fallback
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for m in [32, MAX_GAPS] {
            for _ in 0..5 {
                let spectrum = sample_in_g(&mut rng, m);
                let p = inverse_design(&spectrum, 2, None).unwrap();
                let (fwd, path_dev) = forward_map(&p).unwrap();
                assert!(path_dev <= 1e-9);
                for j in 0..m {
                    assert!((fwd.mu[j] - spectrum.mu[j]).abs() <= 1e-9 * spectrum.mu[j]);
                }
            }
        }
    }

    #[test]
    fn hole_radius_examples() {
        assert!((hole_radius(1.0, 0.5, 2) - 0.036631277777468361).abs() < 1e-15);
        assert!((hole_radius(1.0, 0.25, 4) - 0.25).abs() < 1e-15);
        assert!((hole_radius(2.0, 0.1, 3) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn epsilon_inversion() {
        let e = epsilon_from_radius(0.02, 2.0, 3).unwrap();
        assert!((e - 0.1).abs() < 1e-14);

        let e = epsilon_from_radius(0.036631277777468361, 1.0, 2).unwrap();
        assert!((e - 0.5).abs() < 1e-12);

        let e = epsilon_from_radius(0.01, 1.0, 2).unwrap();
        assert!((e - 0.42822414729170541).abs() < 1e-6);
        assert!((hole_radius(1.0, e, 2) - 0.01).abs() <= 1e-12 * 0.01);

        // Beyond the increasing branch's reach.
        assert!(matches!(
            epsilon_from_radius(10.0, 0.01, 2),
            Err(LimitsError::NoSolution(_))
        ));
    }

    #[test]
    fn maxwell_map_examples() {
        let spectrum = LimitSpectrum::new(vec![1.0], vec![4.0]).unwrap();
        assert_eq!(maxwell_gap_map(&spectrum), vec![[-2.0, -1.0], [1.0, 2.0]]);

        let spectrum = LimitSpectrum::new(vec![1.0, 4.0], vec![2.0, 9.0]).unwrap();
        let gaps = maxwell_gap_map(&spectrum);
        let r2 = 2.0f64.sqrt();
        assert_eq!(gaps, vec![[-3.0, -2.0], [-r2, -1.0], [1.0, r2], [2.0, 3.0]]);

        let spectrum = LimitSpectrum::new(vec![0.25], vec![1.0]).unwrap();
        assert_eq!(maxwell_gap_map(&spectrum), vec![[-1.0, -0.5], [0.5, 1.0]]);
    }

    #[test]
    fn design_from_targets_matches_inverse() {
        let t = targets(&[[1.0, 2.0]], 10.0);
        let p = design_from_targets(&t, 2, None).unwrap();
        assert!((p.b[0] - 0.5).abs() < 1e-15);
        assert!(design_from_targets(&targets(&[[1.0, 2.0], [1.5, 3.0]], 10.0), 2, None).is_err());
    }
}
