//! File formats: JSON documents for designs, spectra, targets and geometry,
//! and the CSV tables emitted by the verification pipeline.
//!
//! Every real number is written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` bit-exactly; exports are deterministic byte-for-byte.
//! Parsing goes through `serde_json`, so any valid JSON spelling of the
//! numbers is accepted.

use crate::bands::{BandStructure, GapReport, StudyTable};
use crate::geometry::{Box2, BoxFamily, CellGeometry, Hole, Screen};
use crate::limits::{DesignParams, GapTargets, LimitSpectrum};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("missing key '{0}'")]
    MissingKey(&'static str),
    #[error("key '{key}': {detail}")]
    BadValue { key: &'static str, detail: String },
}

type Result<T> = std::result::Result<T, FormatError>;

/// 17-significant-digit rendering; round-trips f64 exactly.
pub fn fmt_real(x: f64) -> String {
    format!("{:.16e}", x)
}

fn real_list(xs: &[f64]) -> String {
    let body: Vec<String> = xs.iter().map(|&x| fmt_real(x)).collect();
    format!("[{}]", body.join(", "))
}

fn pair_list(pairs: &[[f64; 2]]) -> String {
    let body: Vec<String> = pairs
        .iter()
        .map(|p| format!("[{}, {}]", fmt_real(p[0]), fmt_real(p[1])))
        .collect();
    format!("[{}]", body.join(", "))
}

// ---------------------------------------------------------------------------
// JSON value helpers
// ---------------------------------------------------------------------------

fn parse_root(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))
}

fn get<'a>(v: &'a Value, key: &'static str) -> Result<&'a Value> {
    v.get(key).ok_or(FormatError::MissingKey(key))
}

fn as_f64(v: &Value, key: &'static str) -> Result<f64> {
    v.as_f64().ok_or(FormatError::BadValue {
        key,
        detail: "expected a number".into(),
    })
}

fn as_u64(v: &Value, key: &'static str) -> Result<u64> {
    v.as_u64().ok_or(FormatError::BadValue {
        key,
        detail: "expected a non-negative integer".into(),
    })
}

fn vec_f64(v: &Value, key: &'static str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or(FormatError::BadValue {
            key,
            detail: "expected an array of numbers".into(),
        })?
        .iter()
        .map(|x| as_f64(x, key))
        .collect()
}

fn vec_pairs(v: &Value, key: &'static str) -> Result<Vec<[f64; 2]>> {
    v.as_array()
        .ok_or(FormatError::BadValue {
            key,
            detail: "expected an array of [lo, hi] pairs".into(),
        })?
        .iter()
        .map(|p| {
            let xs = vec_f64(p, key)?;
            if xs.len() != 2 {
                return Err(FormatError::BadValue {
                    key,
                    detail: format!("expected a pair, got {} numbers", xs.len()),
                });
            }
            Ok([xs[0], xs[1]])
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

pub fn write_targets(t: &GapTargets) -> String {
    format!(
        "{{\n  \"targets\": {},\n  \"L\": {}\n}}\n",
        pair_list(&t.intervals),
        fmt_real(t.cutoff)
    )
}

/// Structural parse only; ordering is checked by `limits::validate_targets`.
pub fn parse_targets(text: &str) -> Result<GapTargets> {
    let root = parse_root(text)?;
    Ok(GapTargets {
        intervals: vec_pairs(get(&root, "targets")?, "targets")?,
        cutoff: as_f64(get(&root, "L")?, "L")?,
    })
}

// ---------------------------------------------------------------------------
// Design and spectrum documents
// ---------------------------------------------------------------------------

/// A design file: parameters plus an optional echo of the implied spectrum
/// and the agreement residual of the two root paths.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignDocument {
    pub n: u32,
    pub kappa: Option<f64>,
    pub d: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub path_residual: Option<f64>,
}

impl DesignDocument {
    pub fn from_params(p: &DesignParams) -> Self {
        DesignDocument {
            n: p.n,
            kappa: p.kappa,
            d: p.d.clone(),
            b: p.b.clone(),
            sigma: None,
            mu: None,
            path_residual: None,
        }
    }

    pub fn with_spectrum(mut self, spectrum: &LimitSpectrum, path_residual: f64) -> Self {
        self.sigma = Some(spectrum.sigma.clone());
        self.mu = Some(spectrum.mu.clone());
        self.path_residual = Some(path_residual);
        self
    }

    /// Validate into [`DesignParams`].
    pub fn to_params(&self) -> std::result::Result<DesignParams, crate::limits::LimitsError> {
        DesignParams::new(self.n, self.kappa, self.d.clone(), self.b.clone())
    }
}

pub fn write_design(doc: &DesignDocument) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"n\": {},\n", doc.n));
    if let Some(k) = doc.kappa {
        out.push_str(&format!("  \"kappa\": {},\n", fmt_real(k)));
    }
    out.push_str(&format!("  \"d\": {},\n", real_list(&doc.d)));
    out.push_str(&format!("  \"b\": {}", real_list(&doc.b)));
    if let Some(sigma) = &doc.sigma {
        out.push_str(&format!(",\n  \"sigma\": {}", real_list(sigma)));
    }
    if let Some(mu) = &doc.mu {
        out.push_str(&format!(",\n  \"mu\": {}", real_list(mu)));
    }
    if let Some(r) = doc.path_residual {
        out.push_str(&format!(",\n  \"path_residual\": {}", fmt_real(r)));
    }
    out.push_str("\n}\n");
    out
}

pub fn parse_design(text: &str) -> Result<DesignDocument> {
    let root = parse_root(text)?;
    let kappa = match root.get("kappa") {
        Some(Value::Null) | None => None,
        Some(v) => Some(as_f64(v, "kappa")?),
    };
    Ok(DesignDocument {
        n: as_u64(get(&root, "n")?, "n")? as u32,
        kappa,
        d: vec_f64(get(&root, "d")?, "d")?,
        b: vec_f64(get(&root, "b")?, "b")?,
        sigma: root.get("sigma").map(|v| vec_f64(v, "sigma")).transpose()?,
        mu: root.get("mu").map(|v| vec_f64(v, "mu")).transpose()?,
        path_residual: root
            .get("path_residual")
            .map(|v| as_f64(v, "path_residual"))
            .transpose()?,
    })
}

pub fn write_spectrum(spectrum: &LimitSpectrum, path_residual: Option<f64>) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"sigma\": {},\n", real_list(&spectrum.sigma)));
    out.push_str(&format!("  \"mu\": {}", real_list(&spectrum.mu)));
    if let Some(r) = path_residual {
        out.push_str(&format!(",\n  \"path_residual\": {}", fmt_real(r)));
    }
    out.push_str("\n}\n");
    out
}

pub fn parse_spectrum(text: &str) -> Result<LimitSpectrum> {
    let root = parse_root(text)?;
    Ok(LimitSpectrum {
        sigma: vec_f64(get(&root, "sigma")?, "sigma")?,
        mu: vec_f64(get(&root, "mu")?, "mu")?,
    })
}

// ---------------------------------------------------------------------------
// Geometry document
// ---------------------------------------------------------------------------

pub fn write_geometry(cell: &CellGeometry) -> String {
    let f = &cell.family;
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"n\": {},\n", f.n));
    out.push_str(&format!("  \"l\": {},\n", fmt_real(f.l)));
    out.push_str(&format!("  \"l_hat\": {},\n", fmt_real(f.l_hat)));
    out.push_str(&format!("  \"lengths\": {},\n", real_list(&f.lengths)));

    let boxes: Vec<String> = f
        .boxes
        .iter()
        .map(|b| {
            format!(
                "{{\"x\": [{}, {}], \"y\": [{}, {}]}}",
                fmt_real(b.x[0]),
                fmt_real(b.x[1]),
                fmt_real(b.y[0]),
                fmt_real(b.y[1])
            )
        })
        .collect();
    out.push_str(&format!("  \"boxes\": [{}],\n", boxes.join(", ")));

    let holes: Vec<String> = cell
        .holes
        .iter()
        .map(|h| {
            format!(
                "{{\"box\": {}, \"center\": [{}, {}], \"radius\": {}, \"flat_radius\": {}}}",
                h.box_index,
                fmt_real(h.center[0]),
                fmt_real(h.center[1]),
                fmt_real(h.radius),
                fmt_real(h.flat_radius)
            )
        })
        .collect();
    out.push_str(&format!("  \"holes\": [{}],\n", holes.join(", ")));

    let screens: Vec<String> = cell
        .screens
        .iter()
        .map(|s| {
            let segs: Vec<String> = s
                .segments
                .iter()
                .map(|seg| {
                    format!(
                        "[[{}, {}], [{}, {}]]",
                        fmt_real(seg[0][0]),
                        fmt_real(seg[0][1]),
                        fmt_real(seg[1][0]),
                        fmt_real(seg[1][1])
                    )
                })
                .collect();
            format!(
                "{{\"box\": {}, \"segments\": [{}]}}",
                s.box_index,
                segs.join(", ")
            )
        })
        .collect();
    out.push_str(&format!("  \"screens\": [{}]\n", screens.join(", ")));
    out.push_str("}\n");
    out
}

pub fn parse_geometry(text: &str) -> Result<CellGeometry> {
    let root = parse_root(text)?;
    let n = as_u64(get(&root, "n")?, "n")? as u32;
    let l = as_f64(get(&root, "l")?, "l")?;
    let l_hat = as_f64(get(&root, "l_hat")?, "l_hat")?;
    let lengths = vec_f64(get(&root, "lengths")?, "lengths")?;

    let boxes = get(&root, "boxes")?
        .as_array()
        .ok_or(FormatError::BadValue {
            key: "boxes",
            detail: "expected an array".into(),
        })?
        .iter()
        .map(|b| {
            let x = vec_f64(get(b, "x")?, "x")?;
            let y = vec_f64(get(b, "y")?, "y")?;
            if x.len() != 2 || y.len() != 2 {
                return Err(FormatError::BadValue {
                    key: "boxes",
                    detail: "box intervals must be pairs".into(),
                });
            }
            Ok(Box2 {
                x: [x[0], x[1]],
                y: [y[0], y[1]],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let holes = get(&root, "holes")?
        .as_array()
        .ok_or(FormatError::BadValue {
            key: "holes",
            detail: "expected an array".into(),
        })?
        .iter()
        .map(|h| {
            let center = vec_f64(get(h, "center")?, "center")?;
            if center.len() != 2 {
                return Err(FormatError::BadValue {
                    key: "center",
                    detail: "expected a pair".into(),
                });
            }
            Ok(Hole {
                box_index: as_u64(get(h, "box")?, "box")? as usize,
                center: [center[0], center[1]],
                radius: as_f64(get(h, "radius")?, "radius")?,
                flat_radius: as_f64(get(h, "flat_radius")?, "flat_radius")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let screens = get(&root, "screens")?
        .as_array()
        .ok_or(FormatError::BadValue {
            key: "screens",
            detail: "expected an array".into(),
        })?
        .iter()
        .map(|s| {
            let segments = get(s, "segments")?
                .as_array()
                .ok_or(FormatError::BadValue {
                    key: "segments",
                    detail: "expected an array".into(),
                })?
                .iter()
                .map(|seg| {
                    let pts = vec_pairs(seg, "segments")?;
                    if pts.len() != 2 {
                        return Err(FormatError::BadValue {
                            key: "segments",
                            detail: "segment must have two endpoints".into(),
                        });
                    }
                    Ok([pts[0], pts[1]])
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Screen {
                box_index: as_u64(get(s, "box")?, "box")? as usize,
                segments,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CellGeometry {
        family: BoxFamily {
            n,
            boxes,
            l,
            l_hat,
            lengths,
        },
        holes,
        screens,
    })
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

/// Bands table: one row per band index.
pub fn write_bands_csv(bs: &BandStructure) -> String {
    let mut out = String::from("k,lamN,lamT1,lamT2,lamD\n");
    for (k, q) in bs.quads.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            k + 1,
            fmt_real(q.neumann),
            fmt_real(q.periodic),
            fmt_real(q.antiperiodic),
            fmt_real(q.dirichlet)
        ));
    }
    out
}

/// Gaps table: inter-band intervals with certification and target matching.
pub fn write_gaps_csv(report: &GapReport) -> String {
    let mut out = String::from("band,lo,hi,certified,matched_target,deviation\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.band,
            fmt_real(row.lo),
            fmt_real(row.hi),
            row.certified,
            row.matched_target
                .map(|i| (i + 1).to_string())
                .unwrap_or_default(),
            row.deviation.map(fmt_real).unwrap_or_default()
        ));
    }
    out
}

/// Study table: scaled endpoints, deviations, and the per-gap trend flags
/// (repeated on each row of that gap).
pub fn write_study_csv(study: &StudyTable) -> String {
    let mut out =
        String::from("r,eps,k,lamD_scaled,sigma,dev_sigma,lamN_next_scaled,mu,dev_mu,trend_sigma,trend_mu\n");
    for row in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_real(row.radius),
            fmt_real(row.epsilon),
            row.k,
            fmt_real(row.dirichlet_scaled),
            fmt_real(row.sigma_target),
            fmt_real(row.sigma_dev),
            fmt_real(row.neumann_next_scaled),
            fmt_real(row.mu_target),
            fmt_real(row.mu_dev),
            study.sigma_trend_ok[row.k - 1],
            study.mu_trend_ok[row.k - 1]
        ));
    }
    out
}

/// Raw eigenvalue table: (index, variant, lambda, residual) rows.
pub fn write_eigen_csv(rows: &[(usize, &str, f64, f64)]) -> String {
    let mut out = String::from("index,variant,lambda,residual\n");
    for &(index, variant, lambda, residual) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            index,
            variant,
            fmt_real(lambda),
            fmt_real(residual)
        ));
    }
    out
}
