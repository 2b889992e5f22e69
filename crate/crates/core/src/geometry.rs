//! Unit-cell geometry: trap boxes, screens and holes.
//!
//! Traps are axis-aligned boxes inside the unit cell `Y = (-1/2, 1/2)²`,
//! laid out in a row along the first axis with equal separations:
//!
//! ```text
//! l   = (1/2 + Σb/2)^{1/n}          side of the bounding cube
//! l_j = b_j / l^{n-1}               width of box j (volume b_j exactly)
//! l̂   = (1 - Σb) / (2(m-1) l^{n-1}) gap between consecutive boxes
//! ```
//!
//! With `m-1` gaps of width `l̂` the row closes exactly at `±l/2`, and
//! `l < 1` keeps every closure strictly inside the cell. For a single box
//! the same numerator gives the margin from the box to the bounding cube.
//!
//! Each trap's screen is its boundary with one open hole segment removed,
//! centered on a face midpoint. Holes always open into a wide exterior
//! region — the inter-box gap, or the single box's slack — and never into
//! the thin margin between the box row and the cell wall: every trap except
//! the last uses its right (maximum-x₁) face, the last trap uses its left
//! face when it has a neighbour. A hole facing the thin margin grounds the
//! trap almost directly in the Dirichlet problem while strangling the
//! Neumann exchange with the bulk exterior, and the gap certificates then
//! stay closed at any meshable hole size. The flat-part radius `r_j` bounds
//! how large a hole the face admits; holes must stay strictly below it.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("geometry construction supports n = 2 only (got n = {0})")]
    UnsupportedDimension(u32),
    #[error("volumes must satisfy Σ b_j < 1 (got {0})")]
    VolumeBudgetExceeded(f64),
    #[error("volume {index} invalid: {detail}")]
    InvalidVolume { index: usize, detail: &'static str },
    #[error("hole {0} radius {1} is not strictly below the flat-part radius {2}")]
    HoleTooLarge(usize, f64, f64),
    #[error("radii count {0} does not match box count {1}")]
    RadiiCountMismatch(usize, usize),
}

type Result<T> = std::result::Result<T, GeometryError>;

/// Axis-aligned box, open in both coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2 {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Box2 {
    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    pub fn volume(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] > self.x[0] && p[0] < self.x[1] && p[1] > self.y[0] && p[1] < self.y[1]
    }

    /// Euclidean distance from a point to the box closure (0 inside).
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let dx = (self.x[0] - p[0]).max(0.0).max(p[0] - self.x[1]);
        let dy = (self.y[0] - p[1]).max(0.0).max(p[1] - self.y[1]);
        (dx * dx + dy * dy).sqrt()
    }
}

/// The trap-box row and its layout constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFamily {
    pub n: u32,
    pub boxes: Vec<Box2>,
    pub l: f64,
    pub l_hat: f64,
    pub lengths: Vec<f64>,
}

impl BoxFamily {
    pub fn trap_count(&self) -> usize {
        self.boxes.len()
    }
}

/// A screen: one box boundary minus its hole gap, as straight segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Screen {
    pub box_index: usize,
    pub segments: Vec<[[f64; 2]; 2]>,
}

/// Hole on one vertical face of a trap box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hole {
    pub box_index: usize,
    pub center: [f64; 2],
    /// Half-length of the open gap; `0` means the screen is sealed shut.
    pub radius: f64,
    /// Flat-part radius: largest ball about the center that stays on the face
    /// and meets neither the cell boundary nor another box.
    pub flat_radius: f64,
}

/// Complete slit-cell geometry: boxes, screens, holes.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub family: BoxFamily,
    pub holes: Vec<Hole>,
    pub screens: Vec<Screen>,
}

impl CellGeometry {
    /// The cell with no traps at all.
    pub fn empty() -> Self {
        CellGeometry {
            family: BoxFamily {
                n: 2,
                boxes: Vec::new(),
                l: 0.5f64.sqrt(),
                l_hat: 0.0,
                lengths: Vec::new(),
            },
            holes: Vec::new(),
            screens: Vec::new(),
        }
    }

    pub fn trap_count(&self) -> usize {
        self.family.trap_count()
    }
}

/// One violated geometry condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Closures of boxes i and j intersect or touch.
    Overlap(usize, usize),
    /// Closure of box i is not strictly inside the cell.
    OutsideCell(usize),
    /// Box i admits no positive flat-part radius.
    NoFlatBall(usize),
    /// Computed volume of box i deviates from the requested one.
    VolumeMismatch { index: usize, got: f64, want: f64 },
    /// The row of boxes does not close at ±l/2 as the layout promises.
    LayoutClosure { deviation: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Overlap(i, j) => write!(f, "boxes {i} and {j} have intersecting closures"),
            Violation::OutsideCell(i) => write!(f, "box {i} closure not strictly inside the cell"),
            Violation::NoFlatBall(i) => write!(f, "box {i} has no positive flat-part radius"),
            Violation::VolumeMismatch { index, got, want } => {
                write!(f, "box {index} volume {got} != requested {want}")
            }
            Violation::LayoutClosure { deviation } => {
                write!(f, "box row fails to close at l/2 by {deviation:e}")
            }
        }
    }
}

/// Result of [`validate_conditions`]: empty list means all conditions hold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionReport {
    pub violations: Vec<Violation>,
    /// Per-box flat-part radii (positive when the flat-ball condition holds).
    pub flat_radii: Vec<f64>,
}

impl ConditionReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lay out the trap boxes for the requested volumes.
///
/// Volumes are exact by construction: `l_j · l^{n-1} = b_j`. `m = 0` yields
/// the empty family (used for the reference cell without traps).
pub fn boxes_from_volumes(b: &[f64], n: u32) -> Result<BoxFamily> {
    if n != 2 {
        return Err(GeometryError::UnsupportedDimension(n));
    }
    let mut total = 0.0;
    for (j, &bj) in b.iter().enumerate() {
        if !(bj > 0.0) || !bj.is_finite() {
            return Err(GeometryError::InvalidVolume {
                index: j,
                detail: "volume must be positive and finite",
            });
        }
        total += bj;
    }
    if !(total < 1.0) {
        return Err(GeometryError::VolumeBudgetExceeded(total));
    }

    let m = b.len();
    let nf = n as f64;
    let l = (0.5 + 0.5 * total).powf(1.0 / nf);
    let cross = l.powf(nf - 1.0);
    let gaps = m.saturating_sub(1).max(1) as f64;
    let l_hat = (1.0 - total) / (2.0 * gaps * cross);
    let lengths: Vec<f64> = b.iter().map(|&bj| bj / cross).collect();

    let mut boxes = Vec::with_capacity(m);
    let mut left = -l / 2.0;
    for &lj in &lengths {
        boxes.push(Box2 {
            x: [left, left + lj],
            y: [-l / 2.0, l / 2.0],
        });
        left += lj + l_hat;
    }

    Ok(BoxFamily {
        n,
        boxes,
        l,
        l_hat,
        lengths,
    })
}

/// Which vertical face carries box `j`'s hole: the right face everywhere
/// except the last box of a multi-box row, which uses its left face. Both
/// choices open into an inter-box gap (or the single box's slack).
pub fn hole_face(j: usize, trap_count: usize) -> HoleFace {
    if trap_count >= 2 && j == trap_count - 1 {
        HoleFace::Left
    } else {
        HoleFace::Right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoleFace {
    Left,
    Right,
}

fn hole_center(bx: &Box2, face: HoleFace) -> [f64; 2] {
    let x = match face {
        HoleFace::Left => bx.x[0],
        HoleFace::Right => bx.x[1],
    };
    [x, 0.5 * (bx.y[0] + bx.y[1])]
}

/// Flat-part radius for the hole center on box `j`'s chosen face: limited by
/// half the face length, the distance to the cell boundary, and the distance
/// to every other box.
fn flat_radius(family: &BoxFamily, j: usize) -> f64 {
    let bx = &family.boxes[j];
    let center = hole_center(bx, hole_face(j, family.boxes.len()));
    let mut r = 0.5 * bx.height();
    let wall = 0.5 - center[0].abs().max(center[1].abs());
    r = r.min(wall);
    for (i, other) in family.boxes.iter().enumerate() {
        if i != j {
            r = r.min(other.distance(center));
        }
    }
    r
}

/// Check conditions on the family: pairwise disjoint closures, containment
/// strictly inside the cell, a positive flat-part radius per box, exact
/// volumes, and the row closing at `l/2`. Never fails; returns the list of
/// violations (empty when all hold).
pub fn validate_conditions(family: &BoxFamily, requested: &[f64]) -> ConditionReport {
    let mut report = ConditionReport::default();
    let m = family.boxes.len();

    for i in 0..m {
        let a = &family.boxes[i];
        for j in i + 1..m {
            let b = &family.boxes[j];
            let separated = a.x[1] < b.x[0] || b.x[1] < a.x[0] || a.y[1] < b.y[0] || b.y[1] < a.y[0];
            if !separated {
                report.violations.push(Violation::Overlap(i, j));
            }
        }
        let inside = a.x[0] > -0.5 && a.x[1] < 0.5 && a.y[0] > -0.5 && a.y[1] < 0.5;
        if !inside {
            report.violations.push(Violation::OutsideCell(i));
        }
        if requested.len() == m {
            let got = a.volume();
            let want = requested[i];
            if (got - want).abs() > 1e-14 * want.max(1.0) {
                report
                    .violations
                    .push(Violation::VolumeMismatch { index: i, got, want });
            }
        }
    }

    for j in 0..m {
        let r = flat_radius(family, j);
        report.flat_radii.push(r);
        if !(r > 0.0) {
            report.violations.push(Violation::NoFlatBall(j));
        }
    }

    if m >= 1 {
        // m ≥ 2: gaps close the row exactly at l/2. m = 1: the single box
        // plus its margin fills the bounding cube: l_1 + l̂ = l.
        let right = family.boxes[m - 1].x[1];
        let expected = if m >= 2 {
            family.l / 2.0
        } else {
            family.l / 2.0 - family.l_hat
        };
        let deviation = (right - expected).abs();
        if deviation > 1e-12 || !(family.l < 1.0) {
            report.violations.push(Violation::LayoutClosure { deviation });
        }
    }
    report
}

/// Attach holes (one per box, on the face chosen by [`hole_face`]) and
/// derive screens.
///
/// A radius of exactly `0` seals that trap: its screen is the full closed
/// boundary with no gap. Positive radii must stay strictly below the
/// flat-part radius.
pub fn build_cell(family: &BoxFamily, radii: &[f64]) -> Result<CellGeometry> {
    let m = family.trap_count();
    if radii.len() != m {
        return Err(GeometryError::RadiiCountMismatch(radii.len(), m));
    }

    let mut holes = Vec::with_capacity(m);
    let mut screens = Vec::with_capacity(m);
    for (j, bx) in family.boxes.iter().enumerate() {
        let flat = flat_radius(family, j);
        let r = radii[j];
        if !(r >= 0.0) || r >= flat {
            return Err(GeometryError::HoleTooLarge(j, r, flat));
        }
        let face = hole_face(j, m);
        let center = hole_center(bx, face);
        holes.push(Hole {
            box_index: j,
            center,
            radius: r,
            flat_radius: flat,
        });

        let (x0, x1) = (bx.x[0], bx.x[1]);
        let (y0, y1) = (bx.y[0], bx.y[1]);
        let (cy_lo, cy_hi) = (center[1] - r, center[1] + r);
        let segments = match (face, r > 0.0) {
            (HoleFace::Right, true) => vec![
                [[x0, y0], [x1, y0]],
                [[x1, y0], [x1, cy_lo]],
                [[x1, cy_hi], [x1, y1]],
                [[x1, y1], [x0, y1]],
                [[x0, y1], [x0, y0]],
            ],
            (HoleFace::Left, true) => vec![
                [[x0, y0], [x1, y0]],
                [[x1, y0], [x1, y1]],
                [[x1, y1], [x0, y1]],
                [[x0, y1], [x0, cy_hi]],
                [[x0, cy_lo], [x0, y0]],
            ],
            (_, false) => vec![
                [[x0, y0], [x1, y0]],
                [[x1, y0], [x1, y1]],
                [[x1, y1], [x0, y1]],
                [[x0, y1], [x0, y0]],
            ],
        };
        screens.push(Screen {
            box_index: j,
            segments,
        });
    }

    Ok(CellGeometry {
        family: family.clone(),
        holes,
        screens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_constants_m2() {
        let f = boxes_from_volumes(&[0.1, 0.2], 2).unwrap();
        assert!((f.l - 0.80622577482985497).abs() < 1e-15);
        assert!((f.l_hat - 0.43412157106222960).abs() < 1e-15);
        assert!((f.lengths[0] - 0.12403473458920846).abs() < 1e-15);
        assert!((f.lengths[1] - 0.24806946917841691).abs() < 1e-15);
        assert!((f.boxes[0].x[0] + 0.40311288741492748).abs() < 1e-12);
        assert!((f.boxes[0].x[1] + 0.27907815282571903).abs() < 1e-12);
        assert!((f.boxes[1].x[0] - 0.15504341823651057).abs() < 1e-12);
        assert!((f.boxes[1].x[1] - 0.40311288741492748).abs() < 1e-12);
        let report = validate_conditions(&f, &[0.1, 0.2]);
        assert!(report.is_ok(), "{:?}", report.violations);
    }

    #[test]
    fn layout_m1_exact_area() {
        let f = boxes_from_volumes(&[0.5], 2).unwrap();
        assert!((f.l - 0.86602540378443865).abs() < 1e-15);
        assert!((f.lengths[0] - 0.57735026918962576).abs() < 1e-15);
        assert!((f.boxes[0].volume() - 0.5).abs() < 1e-16);
        assert!(validate_conditions(&f, &[0.5]).is_ok());
    }

    #[test]
    fn volumes_exact_and_row_closes() {
        for b in [vec![0.3], vec![0.05, 0.1, 0.2], vec![0.1; 6]] {
            let f = boxes_from_volumes(&b, 2).unwrap();
            for (bx, &want) in f.boxes.iter().zip(&b) {
                assert!((bx.volume() - want).abs() <= 1e-15 * want.max(1.0));
            }
            let report = validate_conditions(&f, &b);
            assert!(report.is_ok(), "{:?}", report.violations);
            if b.len() >= 2 {
                assert!((f.boxes.last().unwrap().x[1] - f.l / 2.0).abs() < 1e-12);
            }
            assert!(f.l < 1.0);
        }
    }

    #[test]
    fn budget_and_dimension_guards() {
        assert!(matches!(
            boxes_from_volumes(&[0.6, 0.4], 2),
            Err(GeometryError::VolumeBudgetExceeded(_))
        ));
        assert!(matches!(
            boxes_from_volumes(&[0.5], 3),
            Err(GeometryError::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn touching_boxes_violate_disjointness() {
        let f = BoxFamily {
            n: 2,
            boxes: vec![
                Box2 { x: [-0.4, -0.1], y: [-0.3, 0.3] },
                Box2 { x: [-0.1, 0.2], y: [-0.3, 0.3] },
            ],
            l: 0.8,
            l_hat: 0.0,
            lengths: vec![0.3, 0.3],
        };
        let report = validate_conditions(&f, &[]);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Overlap(0, 1))));
    }

    #[test]
    fn corner_on_cell_boundary_violates_containment() {
        let f = BoxFamily {
            n: 2,
            boxes: vec![Box2 { x: [0.1, 0.5], y: [0.1, 0.5] }],
            l: 0.9,
            l_hat: 0.1,
            lengths: vec![0.4],
        };
        let report = validate_conditions(&f, &[]);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::OutsideCell(0))));
    }

    #[test]
    fn cell_with_hole() {
        let f = boxes_from_volumes(&[0.5], 2).unwrap();
        let cell = build_cell(&f, &[0.02]).unwrap();
        assert_eq!(cell.screens[0].segments.len(), 5);
        let h = cell.holes[0];
        // single trap: hole on the right face, which faces the wide slack
        assert_eq!(h.center, [f.boxes[0].x[1], 0.0]);
        assert!(h.flat_radius > 0.02);

        // Hole radius at the flat radius is rejected.
        let flat = cell.holes[0].flat_radius;
        assert!(matches!(
            build_cell(&f, &[flat]),
            Err(GeometryError::HoleTooLarge(0, _, _))
        ));
    }

    #[test]
    fn two_trap_screens_disjoint_and_face_the_gap() {
        let f = boxes_from_volumes(&[0.1, 0.2], 2).unwrap();
        let cell = build_cell(&f, &[0.01, 0.01]).unwrap();
        assert_eq!(cell.screens.len(), 2);
        for s in &cell.screens {
            assert_eq!(s.segments.len(), 5);
        }
        // Screens inherit disjointness from the boxes.
        assert!(f.boxes[0].x[1] < f.boxes[1].x[0]);
        // Both holes open into the inter-box gap.
        assert_eq!(cell.holes[0].center[0], f.boxes[0].x[1]);
        assert_eq!(cell.holes[1].center[0], f.boxes[1].x[0]);
        for h in &cell.holes {
            assert!(h.flat_radius > 0.0);
        }
    }

    #[test]
    fn sealed_trap_has_closed_screen() {
        let f = boxes_from_volumes(&[0.5], 2).unwrap();
        let cell = build_cell(&f, &[0.0]).unwrap();
        assert_eq!(cell.screens[0].segments.len(), 4);
        assert_eq!(cell.holes[0].radius, 0.0);
    }

    #[test]
    fn empty_cell() {
        let cell = CellGeometry::empty();
        assert_eq!(cell.trap_count(), 0);
        assert!(cell.screens.is_empty());
    }
}
