//! Slit-conforming triangulation of the unit cell.
//!
//! The mesh is a graded tensor-product grid split into triangles. All screen
//! segments are axis-aligned and land exactly on grid lines, so conformity is
//! structural. The Neumann crack is realized by node duplication: every node
//! strictly inside a screen gets an inner copy (referenced by triangles inside
//! the trap) and keeps its outer copy, so no coupling crosses the screen. The
//! two hole-gap endpoints stay single shared nodes, which keeps the discrete
//! domain connected through the hole.
//!
//! Opposite outer boundaries carry mirror-identical node layouts (the grid is
//! a tensor product), so periodic and antiperiodic identification needs no
//! interpolation.

use crate::geometry::CellGeometry;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),
    #[error("mesh parse error at line {line}: {detail}")]
    ParseError { line: usize, detail: String },
}

type Result<T> = std::result::Result<T, MeshError>;

/// One triangle: counterclockwise node indices plus a region tag
/// (`0` = exterior, `j` = inside trap box `j-1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub v: [usize; 3],
    pub region: u32,
}

/// Triangulation of the slit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    /// Seam pairs along screen interiors: (inner-side node, outer-side node),
    /// coincident coordinates.
    pub seams: Vec<[usize; 2]>,
    /// (left, right) node pairs on x = ∓1/2 with identical transverse
    /// coordinates; includes the corners.
    pub periodic_x: Vec<[usize; 2]>,
    /// (bottom, top) node pairs on y = ∓1/2.
    pub periodic_y: Vec<[usize; 2]>,
    /// Cell corner nodes: (-,-), (+,-), (-,+), (+,+).
    pub corners: [usize; 4],
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: &Triangle) -> f64 {
        let [a, b, c] = t.v.map(|i| self.nodes[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }
}

// ---------------------------------------------------------------------------
// Coordinate lines
// ---------------------------------------------------------------------------

/// Merge hard coordinates (exact geometry lines) with soft ones (refinement
/// band edges), then fill every gap uniformly at the local target size.
fn build_axis(hard: &[f64], soft: &[f64], bands: &[(f64, f64)], h_max: f64, h_fine: f64) -> Result<Vec<f64>> {
    let mut coords: Vec<f64> = hard.to_vec();
    coords.sort_by(|a, b| a.total_cmp(b));
    for w in coords.windows(2) {
        if w[1] - w[0] < 1e-9 && w[1] != w[0] {
            return Err(MeshError::MeshFailure(format!(
                "geometry lines {} and {} closer than the minimum resolvable length",
                w[0], w[1]
            )));
        }
    }
    coords.dedup();
    for &s in soft {
        let s = s.clamp(-0.5, 0.5);
        if coords.iter().all(|&c| (c - s).abs() > 1e-9) {
            coords.push(s);
        }
    }
    coords.sort_by(|a, b| a.total_cmp(b));

    let in_band = |a: f64, b: f64| {
        bands
            .iter()
            .any(|&(lo, hi)| lo - 1e-9 <= a && b <= hi + 1e-9)
    };
    let mut axis = Vec::new();
    for w in coords.windows(2) {
        let (a, b) = (w[0], w[1]);
        let target = if in_band(a, b) { h_fine } else { h_max };
        let nsub = ((b - a) / target).ceil().max(1.0) as usize;
        axis.push(a);
        for i in 1..nsub {
            axis.push(a + (b - a) * i as f64 / nsub as f64);
        }
    }
    axis.push(*coords.last().unwrap());
    Ok(axis)
}

// ---------------------------------------------------------------------------
// Triangulation
// ---------------------------------------------------------------------------

/// Triangulate the slit cell.
///
/// `h_max` is the far-field element size (at most 0.25); near every hole the
/// size is reduced to `h_max / hole_refine`. A positive hole radius below
/// `h_max / hole_refine` is rejected: under-resolved holes silently behave as
/// sealed traps. A radius of exactly zero is an intentionally sealed trap and
/// duplicates the full closed screen.
pub fn triangulate(cell: &CellGeometry, h_max: f64, hole_refine: f64) -> Result<Mesh> {
    if !(h_max > 0.0 && h_max <= 0.25) {
        return Err(MeshError::MeshFailure(format!(
            "h_max = {h_max} outside (0, 0.25]"
        )));
    }
    if !(hole_refine >= 1.0) {
        return Err(MeshError::MeshFailure(format!(
            "hole_refine = {hole_refine} below 1"
        )));
    }
    let h_fine = h_max / hole_refine;

    let mut hard_x = vec![-0.5, 0.5];
    let mut hard_y = vec![-0.5, 0.5];
    let mut soft_x = Vec::new();
    let mut soft_y = Vec::new();
    let mut bands_x = Vec::new();
    let mut bands_y = Vec::new();

    for bx in &cell.family.boxes {
        hard_x.extend_from_slice(&bx.x);
        hard_y.extend_from_slice(&bx.y);
    }
    for h in &cell.holes {
        let bx = cell
            .family
            .boxes
            .get(h.box_index)
            .ok_or_else(|| MeshError::MeshFailure(format!("hole references box {}", h.box_index)))?;
        // The crack carving keys on exact coordinates, so the hole must sit
        // on a vertical box face with its gap strictly inside that face.
        let on_face = h.center[0] == bx.x[0] || h.center[0] == bx.x[1];
        let gap_inside = h.center[1] - h.radius > bx.y[0] && h.center[1] + h.radius < bx.y[1];
        if !on_face || !gap_inside {
            return Err(MeshError::MeshFailure(format!(
                "hole {} does not sit on a vertical face of its box",
                h.box_index
            )));
        }
        if h.radius > 0.0 {
            if h.radius < h_fine - 1e-15 {
                return Err(MeshError::MeshFailure(format!(
                    "hole radius {} below minimum resolvable {} (= h_max/hole_refine)",
                    h.radius, h_fine
                )));
            }
            hard_y.push(h.center[1] - h.radius);
            hard_y.push(h.center[1] + h.radius);
            let w = (2.0 * h.radius).max(2.0 * h_fine);
            soft_x.push(h.center[0] - w);
            soft_x.push(h.center[0] + w);
            soft_y.push(h.center[1] - w);
            soft_y.push(h.center[1] + w);
            bands_x.push((h.center[0] - w, h.center[0] + w));
            bands_y.push((h.center[1] - w, h.center[1] + w));
        }
    }

    let xs = build_axis(&hard_x, &soft_x, &bands_x, h_max, h_fine)?;
    let ys = build_axis(&hard_y, &soft_y, &bands_y, h_max, h_fine)?;
    let (nx, ny) = (xs.len(), ys.len());

    let mut nodes = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            nodes.push([x, y]);
        }
    }
    let id = |ix: usize, iy: usize| iy * nx + ix;

    let region_of = |cx: f64, cy: f64| -> u32 {
        for (j, bx) in cell.family.boxes.iter().enumerate() {
            if bx.contains([cx, cy]) {
                return (j + 1) as u32;
            }
        }
        0
    };

    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let (ll, lr) = (id(ix, iy), id(ix + 1, iy));
            let (ul, ur) = (id(ix, iy + 1), id(ix + 1, iy + 1));
            let region = region_of(0.5 * (xs[ix] + xs[ix + 1]), 0.5 * (ys[iy] + ys[iy + 1]));
            triangles.push(Triangle { v: [ll, lr, ur], region });
            triangles.push(Triangle { v: [ll, ur, ul], region });
        }
    }

    // Node → incident triangle lists, for the seam rewiring below.
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in &tri.v {
            incident[v].push(t);
        }
    }

    // Duplicate screen-interior nodes: inner copy for triangles inside the
    // trap, outer copy stays for the rest.
    let mut seams = Vec::new();
    for (j, bx) in cell.family.boxes.iter().enumerate() {
        let hole = &cell.holes[j];
        let region = (j + 1) as u32;
        let on_boundary = |p: [f64; 2]| -> bool {
            let on_v = (p[0] == bx.x[0] || p[0] == bx.x[1]) && p[1] >= bx.y[0] && p[1] <= bx.y[1];
            let on_h = (p[1] == bx.y[0] || p[1] == bx.y[1]) && p[0] >= bx.x[0] && p[0] <= bx.x[1];
            on_v || on_h
        };
        let in_gap = |p: [f64; 2]| -> bool {
            hole.radius > 0.0
                && p[0] == hole.center[0]
                && p[1] >= hole.center[1] - hole.radius
                && p[1] <= hole.center[1] + hole.radius
        };
        for v in 0..nx * ny {
            let p = nodes[v];
            if !on_boundary(p) || in_gap(p) {
                continue;
            }
            let inner = nodes.len();
            nodes.push(p);
            let mut used = false;
            for &t in &incident[v] {
                if triangles[t].region == region {
                    for slot in triangles[t].v.iter_mut() {
                        if *slot == v {
                            *slot = inner;
                            used = true;
                        }
                    }
                }
            }
            if !used {
                // Screen node with no interior-side triangle cannot happen on
                // a conforming grid; treat as a construction failure.
                return Err(MeshError::MeshFailure(format!(
                    "screen node at ({}, {}) has no interior-side element",
                    p[0], p[1]
                )));
            }
            seams.push([inner, v]);
        }
    }

    let mut periodic_x = Vec::with_capacity(ny);
    for iy in 0..ny {
        periodic_x.push([id(0, iy), id(nx - 1, iy)]);
    }
    let mut periodic_y = Vec::with_capacity(nx);
    for ix in 0..nx {
        periodic_y.push([id(ix, 0), id(ix, ny - 1)]);
    }
    let corners = [id(0, 0), id(nx - 1, 0), id(0, ny - 1), id(nx - 1, ny - 1)];

    let mesh = Mesh {
        nodes,
        triangles,
        seams,
        periodic_x,
        periodic_y,
        corners,
    };
    let report = validate_mesh(&mesh);
    if !report.is_ok() {
        return Err(MeshError::MeshFailure(format!(
            "constructed mesh failed validation: {}",
            report.violations.join("; ")
        )));
    }
    Ok(mesh)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Outcome of [`validate_mesh`]: violations plus quality statistics.
#[derive(Debug, Clone, Default)]
pub struct MeshReport {
    pub violations: Vec<String>,
    pub min_angle_deg: f64,
    pub max_aspect: f64,
    pub area_sum: f64,
}

impl MeshReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every mesh invariant: positive areas, unit area total, coincident
/// seam pairs with disjoint triangle sides, exact periodic offsets, mirror
/// boundary layouts, and the corner group.
pub fn validate_mesh(mesh: &Mesh) -> MeshReport {
    let mut report = MeshReport {
        min_angle_deg: f64::INFINITY,
        ..Default::default()
    };

    let mut area_sum = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(tri);
        if !(area > 0.0) {
            report
                .violations
                .push(format!("triangle {t} has non-positive area {area}"));
            continue;
        }
        area_sum += area;
        let p = tri.v.map(|i| mesh.nodes[i]);
        let mut sides = [0.0f64; 3];
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            sides[k] = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        }
        let longest = sides.iter().cloned().fold(0.0, f64::max);
        let shortest = sides.iter().cloned().fold(f64::INFINITY, f64::min);
        report.max_aspect = report.max_aspect.max(longest / shortest);
        for k in 0..3 {
            // angle at vertex k via the law of cosines
            let (a, b, c) = (sides[k], sides[(k + 2) % 3], sides[(k + 1) % 3]);
            let cosv = ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0);
            report.min_angle_deg = report.min_angle_deg.min(cosv.acos().to_degrees());
        }
    }
    report.area_sum = area_sum;
    if (area_sum - 1.0).abs() > 1e-10 {
        report
            .violations
            .push(format!("triangle areas sum to {area_sum}, not 1"));
    }

    for (k, &[inner, outer]) in mesh.seams.iter().enumerate() {
        if mesh.nodes[inner] != mesh.nodes[outer] {
            report
                .violations
                .push(format!("seam {k} nodes are not coincident"));
        }
    }
    let seam_lookup: std::collections::HashMap<usize, usize> = mesh
        .seams
        .iter()
        .map(|&[inner, outer]| (inner, outer))
        .collect();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in &tri.v {
            if let Some(&outer) = seam_lookup.get(&v) {
                if tri.v.contains(&outer) {
                    report
                        .violations
                        .push(format!("triangle {t} references both sides of a seam"));
                }
            }
        }
    }

    for (axis, pairs) in [(0usize, &mesh.periodic_x), (1usize, &mesh.periodic_y)] {
        for &[lo, hi] in pairs {
            let (a, b) = (mesh.nodes[lo], mesh.nodes[hi]);
            let offset_ok = b[axis] - a[axis] == 1.0 && a[1 - axis] == b[1 - axis];
            if !offset_ok {
                report.violations.push(format!(
                    "periodic pair ({lo}, {hi}) on axis {axis} has wrong offset"
                ));
            }
        }
    }

    // Mirror boundaries: multiset of transverse coordinates must agree.
    for (fixed_axis, wall) in [(0usize, -0.5f64), (1, -0.5)] {
        let collect = |side: f64| -> Vec<f64> {
            let mut v: Vec<f64> = mesh
                .nodes
                .iter()
                .filter(|p| p[fixed_axis] == side)
                .map(|p| p[1 - fixed_axis])
                .collect();
            v.sort_by(|a, b| a.total_cmp(b));
            v
        };
        if collect(wall) != collect(-wall) {
            report.violations.push(format!(
                "boundary discretizations on axis {fixed_axis} walls are not mirror-identical"
            ));
        }
    }

    let want = [[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]];
    for (k, &c) in mesh.corners.iter().enumerate() {
        if mesh.nodes.get(c).copied() != Some(want[k]) {
            report
                .violations
                .push(format!("corner {k} does not sit at {:?}", want[k]));
        }
    }

    report
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

fn fmt_coord(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Serialize to the plain-text mesh format (17 significant digits,
/// round-trips bit-exactly through [`import_mesh`]).
pub fn export_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("gapcell-mesh 1\n");
    out.push_str(&format!("nodes {}\n", mesh.nodes.len()));
    for p in &mesh.nodes {
        out.push_str(&format!("{} {}\n", fmt_coord(p[0]), fmt_coord(p[1])));
    }
    out.push_str(&format!("triangles {}\n", mesh.triangles.len()));
    for t in &mesh.triangles {
        out.push_str(&format!("{} {} {} {}\n", t.v[0], t.v[1], t.v[2], t.region));
    }
    out.push_str(&format!("seams {}\n", mesh.seams.len()));
    for s in &mesh.seams {
        out.push_str(&format!("{} {}\n", s[0], s[1]));
    }
    out.push_str(&format!("periodic_x {}\n", mesh.periodic_x.len()));
    for p in &mesh.periodic_x {
        out.push_str(&format!("{} {}\n", p[0], p[1]));
    }
    out.push_str(&format!("periodic_y {}\n", mesh.periodic_y.len()));
    for p in &mesh.periodic_y {
        out.push_str(&format!("{} {}\n", p[0], p[1]));
    }
    out.push_str(&format!(
        "corners {} {} {} {}\n",
        mesh.corners[0], mesh.corners[1], mesh.corners[2], mesh.corners[3]
    ));
    out
}

struct LineReader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines.next().ok_or(MeshError::ParseError {
            line: self.line_no,
            detail: "unexpected end of file".into(),
        })
    }

    fn fail<T>(&self, detail: impl Into<String>) -> Result<T> {
        Err(MeshError::ParseError {
            line: self.line_no,
            detail: detail.into(),
        })
    }

    fn section(&mut self, keyword: &str) -> Result<usize> {
        let line = self.next()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(keyword) {
            return self.fail(format!("expected section '{keyword}'"));
        }
        let count = it
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or(MeshError::ParseError {
                line: self.line_no,
                detail: format!("bad count for section '{keyword}'"),
            })?;
        Ok(count)
    }

    fn numbers<const K: usize>(&mut self) -> Result<[f64; K]> {
        let line = self.next()?;
        let mut out = [0.0; K];
        let mut it = line.split_whitespace();
        for slot in &mut out {
            *slot = it
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or(MeshError::ParseError {
                    line: self.line_no,
                    detail: "expected number".into(),
                })?;
        }
        Ok(out)
    }

    fn indices<const K: usize>(&mut self, limit: usize) -> Result<[usize; K]> {
        let line = self.next()?;
        let mut out = [0usize; K];
        let mut it = line.split_whitespace();
        for slot in &mut out {
            let v = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or(MeshError::ParseError {
                    line: self.line_no,
                    detail: "expected index".into(),
                })?;
            if v >= limit {
                return self.fail(format!("index {v} out of range (node count {limit})"));
            }
            *slot = v;
        }
        Ok(out)
    }
}

/// Parse the plain-text mesh format.
pub fn import_mesh(text: &str) -> Result<Mesh> {
    let mut r = LineReader {
        lines: text.lines(),
        line_no: 0,
    };
    let header = r.next()?;
    if header.trim() != "gapcell-mesh 1" {
        return r.fail("expected header 'gapcell-mesh 1'");
    }

    let n_nodes = r.section("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let [x, y] = r.numbers::<2>()?;
        nodes.push([x, y]);
    }

    let n_tris = r.section("triangles")?;
    let mut triangles = Vec::with_capacity(n_tris);
    for _ in 0..n_tris {
        let line = r.next()?;
        let mut it = line.split_whitespace();
        let mut v = [0usize; 3];
        for slot in &mut v {
            *slot = it
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&i| i < n_nodes)
                .ok_or(MeshError::ParseError {
                    line: r.line_no,
                    detail: "bad triangle index".into(),
                })?;
        }
        let region = it
            .next()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or(MeshError::ParseError {
                line: r.line_no,
                detail: "bad region tag".into(),
            })?;
        triangles.push(Triangle { v, region });
    }

    let n_seams = r.section("seams")?;
    let mut seams = Vec::with_capacity(n_seams);
    for _ in 0..n_seams {
        seams.push(r.indices::<2>(n_nodes)?);
    }
    let n_px = r.section("periodic_x")?;
    let mut periodic_x = Vec::with_capacity(n_px);
    for _ in 0..n_px {
        periodic_x.push(r.indices::<2>(n_nodes)?);
    }
    let n_py = r.section("periodic_y")?;
    let mut periodic_y = Vec::with_capacity(n_py);
    for _ in 0..n_py {
        periodic_y.push(r.indices::<2>(n_nodes)?);
    }

    let line = r.next()?;
    let mut it = line.split_whitespace();
    if it.next() != Some("corners") {
        return r.fail("expected section 'corners'");
    }
    let mut corners = [0usize; 4];
    for slot in &mut corners {
        let v = it
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&i| i < n_nodes)
            .ok_or(MeshError::ParseError {
                line: r.line_no,
                detail: "bad corner index".into(),
            })?;
        *slot = v;
    }

    Ok(Mesh {
        nodes,
        triangles,
        seams,
        periodic_x,
        periodic_y,
        corners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boxes_from_volumes, build_cell, CellGeometry};

    #[test]
    fn empty_cell_structured_grid() {
        let mesh = triangulate(&CellGeometry::empty(), 0.25, 1.0).unwrap();
        assert_eq!(mesh.node_count(), 25);
        assert_eq!(mesh.triangles.len(), 32);
        assert!(mesh.seams.is_empty());
        assert!(validate_mesh(&mesh).is_ok());
    }

    #[test]
    fn area_partition_and_seam_count() {
        let family = boxes_from_volumes(&[0.5], 2).unwrap();
        let cell = build_cell(&family, &[0.02]).unwrap();
        let mesh = triangulate(&cell, 0.05, 4.0).unwrap();
        let report = validate_mesh(&mesh);
        assert!(report.is_ok(), "{:?}", report.violations);
        assert!((report.area_sum - 1.0).abs() < 1e-10);

        // Seam count = screen nodes minus the two gap endpoints minus the
        // gap-interior nodes. The single trap's hole sits on its right face.
        let bx = &cell.family.boxes[0];
        let on_screen = |p: &[f64; 2]| {
            let on_v = (p[0] == bx.x[0] || p[0] == bx.x[1]) && p[1] >= bx.y[0] && p[1] <= bx.y[1];
            let on_h = (p[1] == bx.y[0] || p[1] == bx.y[1]) && p[0] >= bx.x[0] && p[0] <= bx.x[1];
            let in_gap = p[0] == bx.x[1] && p[1].abs() <= 0.02;
            (on_v || on_h) && !in_gap
        };
        let base_nodes = mesh.node_count() - mesh.seams.len();
        let screen_nodes = mesh.nodes[..base_nodes].iter().filter(|p| on_screen(p)).count();
        assert_eq!(mesh.seams.len(), screen_nodes);
    }

    #[test]
    fn gap_nodes_stay_shared() {
        let family = boxes_from_volumes(&[0.5], 2).unwrap();
        let cell = build_cell(&family, &[0.02]).unwrap();
        let mesh = triangulate(&cell, 0.05, 4.0).unwrap();
        let gap_x = cell.holes[0].center[0];
        // Endpoints and gap-interior nodes are single: they never appear in
        // a seam pair, and at least one interior node exists.
        let gap_nodes: Vec<usize> = (0..mesh.node_count())
            .filter(|&i| mesh.nodes[i][0] == gap_x && mesh.nodes[i][1].abs() <= 0.02)
            .collect();
        assert!(gap_nodes.len() >= 3);
        for &g in &gap_nodes {
            assert!(mesh.seams.iter().all(|s| s[0] != g && s[1] != g));
        }
    }

    #[test]
    fn unresolvable_hole_rejected() {
        let family = boxes_from_volumes(&[0.5], 2).unwrap();
        let cell = build_cell(&family, &[0.005]).unwrap();
        assert!(matches!(
            triangulate(&cell, 0.05, 4.0),
            Err(MeshError::MeshFailure(_))
        ));
    }

    #[test]
    fn off_face_hole_rejected() {
        let family = boxes_from_volumes(&[0.5], 2).unwrap();
        let mut cell = build_cell(&family, &[0.02]).unwrap();
        cell.holes[0].center[0] += 1e-3;
        assert!(matches!(
            triangulate(&cell, 0.05, 4.0),
            Err(MeshError::MeshFailure(_))
        ));
    }

    #[test]
    fn sealed_trap_duplicates_whole_screen() {
        let family = boxes_from_volumes(&[0.5], 2).unwrap();
        let cell = build_cell(&family, &[0.0]).unwrap();
        let mesh = triangulate(&cell, 0.1, 1.0).unwrap();
        assert!(validate_mesh(&mesh).is_ok());
        let bx = &cell.family.boxes[0];
        let base_nodes = mesh.node_count() - mesh.seams.len();
        let boundary_nodes = mesh.nodes[..base_nodes]
            .iter()
            .filter(|p| {
                ((p[0] == bx.x[0] || p[0] == bx.x[1]) && p[1] >= bx.y[0] && p[1] <= bx.y[1])
                    || ((p[1] == bx.y[0] || p[1] == bx.y[1]) && p[0] >= bx.x[0] && p[0] <= bx.x[1])
            })
            .count();
        assert_eq!(mesh.seams.len(), boundary_nodes);
    }

    #[test]
    fn validation_catches_constructed_failures() {
        let mesh = triangulate(&CellGeometry::empty(), 0.25, 1.0).unwrap();

        let mut flipped = mesh.clone();
        flipped.triangles[0].v.swap(0, 1);
        assert!(validate_mesh(&flipped)
            .violations
            .iter()
            .any(|v| v.contains("non-positive area")));

        let mut offset = mesh.clone();
        let bad = offset.periodic_x[1][1];
        offset.nodes[bad][1] += 1e-9;
        assert!(validate_mesh(&offset)
            .violations
            .iter()
            .any(|v| v.contains("wrong offset")));
    }

    #[test]
    fn text_round_trip_bit_exact() {
        let family = boxes_from_volumes(&[0.1, 0.2], 2).unwrap();
        let cell = build_cell(&family, &[0.02, 0.02]).unwrap();
        let mesh = triangulate(&cell, 0.08, 4.0).unwrap();
        let text = export_mesh(&mesh);
        let back = import_mesh(&text).unwrap();
        assert_eq!(mesh, back);
        assert_eq!(export_mesh(&back), text);
    }

    #[test]
    fn truncated_file_reports_line() {
        let mesh = triangulate(&CellGeometry::empty(), 0.25, 1.0).unwrap();
        let text = export_mesh(&mesh);
        let cut: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        match import_mesh(&cut) {
            Err(MeshError::ParseError { line, .. }) => assert!(line > 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
