//! Piecewise-linear finite elements on the slit cell.
//!
//! The weak form is the plain Dirichlet energy `∫ (∇u, ∇v) dx`; screens need
//! no explicit treatment because seam nodes are duplicated in the mesh (the
//! natural boundary condition on a crack is automatic). Four variants of the
//! outer boundary condition on `∂Y` are supported:
//!
//! - `Neumann`   — nothing imposed,
//! - `Dirichlet` — all `∂Y` rows/columns removed,
//! - `Periodic`  — each opposite-wall pair merged with factor `+1`,
//! - `Antiperiodic` — merged with factor `-1` per axis crossing (the corner
//!   chain picks up `(-1)(-1) = +1` across the diagonal).
//!
//! Eigenpairs come from shift-inverted subspace iteration with a banded
//! Cholesky factorization of `K - sM` under a reverse Cuthill-McKee ordering;
//! the small shift `s = -1e-6 · tr K / tr M` keeps the singular Neumann
//! stiffness factorizable. Small systems fall back to a dense solve.

pub mod sparse;

use crate::mesh::Mesh;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse::{reverse_cuthill_mckee, BandedCholesky, Csr};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("triangle {0} is degenerate (area below 1e-14)")]
    DegenerateTriangle(usize),
    #[error("mesh carries no periodic pairs for a (anti)periodic variant")]
    MissingPeriodicPairs,
    #[error("periodic identification is inconsistent at node {0}")]
    InconsistentConstraint(usize),
    #[error("eigensolver did not converge in {iterations} iterations (best residual {best_residual:.3e})")]
    ConvergenceFailure {
        iterations: usize,
        best_residual: f64,
    },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

type Result<T> = std::result::Result<T, FemError>;

/// Outer boundary condition on `∂Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Neumann,
    Dirichlet,
    Periodic,
    Antiperiodic,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Neumann,
        Variant::Periodic,
        Variant::Antiperiodic,
        Variant::Dirichlet,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Variant::Neumann => "neumann",
            Variant::Dirichlet => "dirichlet",
            Variant::Periodic => "periodic",
            Variant::Antiperiodic => "antiperiodic",
        }
    }
}

/// Node-indexed stiffness and mass before any boundary reduction.
#[derive(Debug, Clone)]
pub struct RawSystem {
    pub n_nodes: usize,
    pub stiffness: Csr,
    pub mass: Csr,
}

/// Reduced system for one boundary-condition variant.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub variant: Variant,
    pub stiffness: Csr,
    pub mass: Csr,
    /// node → (dof index, coupling factor); `None` for removed Dirichlet rows.
    pub dof_map: Vec<Option<(usize, f64)>>,
    pub n_dofs: usize,
}

impl AssembledSystem {
    /// Expand a reduced vector back to mesh nodes (removed nodes get 0).
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.dof_map
            .iter()
            .map(|entry| entry.map_or(0.0, |(dof, f)| f * reduced[dof]))
            .collect()
    }
}

/// Lowest eigenpairs of `K u = λ M u`.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Columns are the M-orthonormal eigenvectors in reduced dof indexing.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Assemble stiffness and consistent mass with linear elements. Seam pairs
/// stay distinct rows; nothing is imposed on any boundary.
pub fn assemble(mesh: &Mesh) -> Result<RawSystem> {
    let n = mesh.node_count();
    let mut k_triplets = Vec::with_capacity(9 * mesh.triangles.len());
    let mut m_triplets = Vec::with_capacity(9 * mesh.triangles.len());

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.v.map(|i| mesh.nodes[i]);
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        if area <= 1e-14 {
            return Err(FemError::DegenerateTriangle(t));
        }
        // ∇φ_i = (b_i, c_i) / (2A) with b_i = y_j - y_k, c_i = x_k - x_j
        let mut b = [0.0f64; 3];
        let mut c = [0.0f64; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            b[i] = p[j][1] - p[k][1];
            c[i] = p[k][0] - p[j][0];
        }
        for i in 0..3 {
            for j in 0..3 {
                let kij = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
                let mij = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                k_triplets.push((tri.v[i], tri.v[j], kij));
                m_triplets.push((tri.v[i], tri.v[j], mij));
            }
        }
    }

    Ok(RawSystem {
        n_nodes: n,
        stiffness: Csr::from_triplets(n, k_triplets),
        mass: Csr::from_triplets(n, m_triplets),
    })
}

// ---------------------------------------------------------------------------
// Boundary conditions
// ---------------------------------------------------------------------------

fn on_outer_boundary(p: [f64; 2]) -> bool {
    (p[0].abs() - 0.5).abs() <= 1e-12 || (p[1].abs() - 0.5).abs() <= 1e-12
}

/// Union-find with multiplicative factors: `u_node = factor · u_root`.
struct SignedForest {
    parent: Vec<usize>,
    factor: Vec<f64>,
}

impl SignedForest {
    fn new(n: usize) -> Self {
        SignedForest {
            parent: (0..n).collect(),
            factor: vec![1.0; n],
        }
    }

    fn find(&mut self, v: usize) -> (usize, f64) {
        if self.parent[v] == v {
            return (v, 1.0);
        }
        let (root, f_up) = self.find(self.parent[v]);
        self.parent[v] = root;
        self.factor[v] *= f_up;
        (root, self.factor[v])
    }

    /// Impose `u_slave = rel · u_master`.
    fn union(&mut self, slave: usize, master: usize, rel: f64) -> Result<()> {
        let (rs, fs) = self.find(slave);
        let (rm, fm) = self.find(master);
        if rs == rm {
            if (fs - rel * fm).abs() > 1e-9 {
                return Err(FemError::InconsistentConstraint(slave));
            }
            return Ok(());
        }
        // u_rs = u_slave / fs = rel · fm / fs · u_rm
        self.parent[rs] = rm;
        self.factor[rs] = rel * fm / fs;
        Ok(())
    }
}

/// Reduce the raw system for one boundary-condition variant.
pub fn apply_bc(raw: &RawSystem, mesh: &Mesh, variant: Variant) -> Result<AssembledSystem> {
    let n = raw.n_nodes;
    let mut dof_map: Vec<Option<(usize, f64)>> = vec![None; n];

    match variant {
        Variant::Neumann => {
            for (v, slot) in dof_map.iter_mut().enumerate() {
                *slot = Some((v, 1.0));
            }
        }
        Variant::Dirichlet => {
            let mut next = 0usize;
            for (v, slot) in dof_map.iter_mut().enumerate() {
                if !on_outer_boundary(mesh.nodes[v]) {
                    *slot = Some((next, 1.0));
                    next += 1;
                }
            }
        }
        Variant::Periodic | Variant::Antiperiodic => {
            if mesh.periodic_x.is_empty() || mesh.periodic_y.is_empty() {
                return Err(FemError::MissingPeriodicPairs);
            }
            let theta = if variant == Variant::Periodic { 1.0 } else { -1.0 };
            let mut forest = SignedForest::new(n);
            for &[left, right] in &mesh.periodic_x {
                forest.union(right, left, theta)?;
            }
            for &[bottom, top] in &mesh.periodic_y {
                forest.union(top, bottom, theta)?;
            }
            let mut root_dof: Vec<Option<usize>> = vec![None; n];
            let mut next = 0usize;
            for v in 0..n {
                let (root, factor) = forest.find(v);
                let dof = *root_dof[root].get_or_insert_with(|| {
                    let d = next;
                    next += 1;
                    d
                });
                dof_map[v] = Some((dof, factor));
            }
        }
    }

    let n_dofs = dof_map
        .iter()
        .filter_map(|e| e.map(|(d, _)| d + 1))
        .max()
        .unwrap_or(0);

    let reduce = |a: &Csr| -> Csr {
        let mut triplets = Vec::with_capacity(a.nnz());
        for r in 0..a.n {
            let Some((dr, fr)) = dof_map[r] else { continue };
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Some((dc, fc)) = dof_map[c] {
                    triplets.push((dr, dc, fr * fc * v));
                }
            }
        }
        Csr::from_triplets(n_dofs, triplets)
    };

    Ok(AssembledSystem {
        variant,
        stiffness: reduce(&raw.stiffness),
        mass: reduce(&raw.mass),
        dof_map,
        n_dofs,
    })
}

// ---------------------------------------------------------------------------
// Eigensolver
// ---------------------------------------------------------------------------

/// Relative residual of one pair. Near-kernel pairs are measured against the
/// operator scale instead: for a numerically exact kernel vector the natural
/// denominator `‖Ku‖ + λ‖Mu‖` is itself rounding noise.
fn pair_residual(k: &Csr, m: &Csr, k_scale: f64, lam: f64, u: &[f64]) -> f64 {
    let n = u.len();
    let mut ku = vec![0.0; n];
    let mut mu = vec![0.0; n];
    k.matvec(u, &mut ku);
    m.matvec(u, &mut mu);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let num = norm(
        &ku.iter()
            .zip(&mu)
            .map(|(a, b)| a - lam * b)
            .collect::<Vec<_>>(),
    );
    let denom = norm(&ku) + lam.abs() * norm(&mu);
    let floor = k_scale * norm(u);
    if denom > 1e-8 * floor {
        num / denom
    } else {
        num / floor
    }
}

/// Generalized symmetric dense solve via mass-Cholesky whitening; ascending.
fn dense_gevp(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| FemError::Factorization("metric matrix not positive definite".into()))?;
    let l = chol.l();
    let t1 = l
        .solve_lower_triangular(k)
        .ok_or_else(|| FemError::Factorization("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or_else(|| FemError::Factorization("singular mass factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // back-transform: x = L^{-T} q
    let mut q = DMatrix::<f64>::zeros(k.nrows(), order.len());
    for (new, &old) in order.iter().enumerate() {
        q.set_column(new, &eig.eigenvectors.column(old));
    }
    let x = l
        .transpose()
        .solve_upper_triangular(&q)
        .ok_or_else(|| FemError::Factorization("singular mass factor".into()))?;
    Ok((values, x))
}

fn csr_to_dense(a: &Csr) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::zeros(a.n, a.n);
    for r in 0..a.n {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            d[(r, c)] += v;
        }
    }
    d
}

/// Rayleigh-Ritz on the columns of `y`: returns Ritz values (ascending) and
/// M-orthonormal Ritz vectors.
fn rayleigh_ritz(
    k: &Csr,
    m: &Csr,
    y: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (n, b) = (y.nrows(), y.ncols());
    // Normalize columns in the M-norm first: the shift-inverted kernel
    // direction otherwise dwarfs everything and wrecks the Gram conditioning.
    let mut yn = y.clone();
    let mut tmp = vec![0.0; n];
    for j in 0..b {
        let col: Vec<f64> = yn.column(j).iter().copied().collect();
        m.matvec(&col, &mut tmp);
        let nrm = col
            .iter()
            .zip(&tmp)
            .map(|(a, c)| a * c)
            .sum::<f64>()
            .max(1e-300)
            .sqrt();
        for i in 0..n {
            yn[(i, j)] /= nrm;
        }
    }
    let mut my = DMatrix::<f64>::zeros(n, b);
    let mut ky = DMatrix::<f64>::zeros(n, b);
    let mut out = vec![0.0; n];
    for j in 0..b {
        let col: Vec<f64> = yn.column(j).iter().copied().collect();
        m.matvec(&col, &mut out);
        my.set_column(j, &DVector::from_column_slice(&out));
        k.matvec(&col, &mut out);
        ky.set_column(j, &DVector::from_column_slice(&out));
    }
    let gram = yn.transpose() * &my;
    let gram = (&gram + gram.transpose()) * 0.5;
    let h = yn.transpose() * &ky;
    let h = (&h + h.transpose()) * 0.5;
    let (theta, z) = dense_gevp(&h, &gram)?;
    Ok((theta, yn * z))
}

/// Compute the `k` lowest eigenpairs of `K u = λ M u` to the requested
/// relative residual tolerance.
pub fn solve_lowest(system: &AssembledSystem, k_count: usize, tol: f64) -> Result<EigenResult> {
    let n = system.n_dofs;
    if k_count == 0 || k_count > n {
        return Err(FemError::InvalidRequest(format!(
            "requested {k_count} pairs from a {n}-dof system"
        )));
    }
    if !(tol >= 1e-12) {
        return Err(FemError::InvalidRequest(format!(
            "tolerance {tol} below 1e-12"
        )));
    }
    let km = &system.stiffness;
    let mm = &system.mass;
    let k_scale = km.inf_norm().max(1e-300);

    // Block size resolves the multiplicity-4 clusters of the periodic and
    // antiperiodic empty-cell spectra.
    let block = (k_count + 2).max(8).min(n);

    if n <= 3 * block.max(24) {
        let (values, vectors) = dense_gevp(&csr_to_dense(km), &csr_to_dense(mm))?;
        let vals: Vec<f64> = values[..k_count].to_vec();
        let vecs = vectors.columns(0, k_count).into_owned();
        let residuals: Vec<f64> = (0..k_count)
            .map(|j| {
                let col: Vec<f64> = vecs.column(j).iter().copied().collect();
                pair_residual(km, mm, k_scale, vals[j], &col)
            })
            .collect();
        return Ok(EigenResult {
            values: vals,
            vectors: vecs,
            residuals,
        });
    }

    // Shift keeps the factorization positive definite for the singular
    // Neumann/periodic stiffness; magnitude tied to the matrix scale.
    let shift = -1e-6 * km.trace() / mm.trace().max(1e-300);
    let shifted = km.add_scaled(-shift, mm);
    let perm = reverse_cuthill_mckee(&shifted);
    let chol =
        BandedCholesky::factor(&shifted, perm).map_err(FemError::Factorization)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x9ace11);
    let mut x = DMatrix::<f64>::from_fn(n, block, |_, _| rng.gen::<f64>() - 0.5);

    let max_iter = 500;
    let mut best = f64::INFINITY;
    for _iter in 0..max_iter {
        // Y = (K - sM)^{-1} M X, column by column.
        let mut y = DMatrix::<f64>::zeros(n, block);
        let mut rhs = vec![0.0; n];
        let mut sol = vec![0.0; n];
        for j in 0..block {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            mm.matvec(&col, &mut rhs);
            chol.solve(&rhs, &mut sol);
            y.set_column(j, &DVector::from_column_slice(&sol));
        }
        let (theta, ritz) = rayleigh_ritz(km, mm, &y)?;
        x = ritz;

        let worst = (0..k_count)
            .map(|j| {
                let col: Vec<f64> = x.column(j).iter().copied().collect();
                pair_residual(km, mm, k_scale, theta[j], &col)
            })
            .fold(0.0f64, f64::max);
        best = best.min(worst);
        if worst <= tol {
            let values = theta[..k_count].to_vec();
            let vectors = x.columns(0, k_count).into_owned();
            let residuals: Vec<f64> = (0..k_count)
                .map(|j| {
                    let col: Vec<f64> = vectors.column(j).iter().copied().collect();
                    pair_residual(km, mm, k_scale, values[j], &col)
                })
                .collect();
            return Ok(EigenResult {
                values,
                vectors,
                residuals,
            });
        }
    }
    Err(FemError::ConvergenceFailure {
        iterations: max_iter,
        best_residual: best,
    })
}

/// Assemble, reduce and solve one variant in a single call.
pub fn solve_variant(
    mesh: &Mesh,
    raw: &RawSystem,
    variant: Variant,
    k_count: usize,
    tol: f64,
) -> Result<EigenResult> {
    let system = apply_bc(raw, mesh, variant)?;
    solve_lowest(&system, k_count, tol)
}
