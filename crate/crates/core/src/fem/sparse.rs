//! Minimal symmetric sparse kit: CSR storage, reverse Cuthill-McKee
//! ordering, and a banded Cholesky factorization. Sized for cell meshes
//! (tens of thousands of unknowns), where profile methods beat general
//! sparse machinery comfortably.

/// Compressed sparse row matrix, full (not triangular) symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if prev == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            prev = Some((r, c));
            col_idx.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.vals[span])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter()
                    .zip(vals)
                    .filter(|(&c, _)| c == r)
                    .map(|(_, &v)| v)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `self + alpha * other`; patterns need not match.
    pub fn add_scaled(&self, alpha: f64, other: &Csr) -> Csr {
        assert_eq!(self.n, other.n);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            let (cols, vals) = self.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
            let (cols, vals) = other.row(r);
            triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, alpha * v)));
        }
        Csr::from_triplets(self.n, triplets)
    }
}

/// Fill-reducing node order for banded factorization: reverse Cuthill-McKee
/// from a pseudo-peripheral start, per connected component.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &Csr) -> Vec<usize> {
    let n = a.n;
    let degree = |v: usize| a.row(v).0.iter().filter(|&&c| c != v).count();

    let bfs_farthest = |start: usize, visited_scratch: &mut Vec<i32>| -> usize {
        visited_scratch.iter_mut().for_each(|x| *x = -1);
        visited_scratch[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &c in a.row(v).0 {
                if c != v && visited_scratch[c] < 0 {
                    visited_scratch[c] = visited_scratch[v] + 1;
                    queue.push_back(c);
                }
            }
        }
        last
    };

    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut scratch = vec![-1i32; n];
    while let Some(seed) = (0..n).filter(|&v| !placed[v]).min_by_key(|&v| degree(v)) {
        // two BFS sweeps toward a pseudo-peripheral vertex
        let far = bfs_farthest(seed, &mut scratch);
        let start = if placed[far] { seed } else { bfs_farthest(far, &mut scratch) };
        let start = if placed[start] { seed } else { start };

        let mut queue = std::collections::VecDeque::from([start]);
        placed[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row(v)
                .0
                .iter()
                .copied()
                .filter(|&c| c != v && !placed[c])
                .collect();
            nbrs.sort_by_key(|&c| degree(c));
            for c in nbrs {
                placed[c] = true;
                queue.push_back(c);
            }
        }
    }
    order.reverse();
    order
}

/// Banded Cholesky factor of a symmetric positive definite matrix under a
/// given permutation. Storage is the lower band only.
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `data[i * (bw + 1) + d]` holds `L[i, i - d]`, `d = 0..=bw`.
    data: Vec<f64>,
    /// `perm[new] = old`
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
}

impl BandedCholesky {
    /// Factor `a` (SPD) using ordering `perm`. Fails if a pivot is not
    /// strictly positive.
    pub fn factor(a: &Csr, perm: Vec<usize>) -> Result<BandedCholesky, String> {
        let n = a.n;
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let mut bw = 0usize;
        for r in 0..n {
            for &c in a.row(r).0 {
                bw = bw.max(inv_perm[r].abs_diff(inv_perm[c]));
            }
        }
        let stride = bw + 1;
        let mut data = vec![0.0f64; n * stride];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let (i, j) = (inv_perm[r], inv_perm[c]);
                if j <= i {
                    data[i * stride + (i - j)] = v;
                }
            }
        }

        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = data[i * stride + (i - j)];
                let kmin = lo.max(j.saturating_sub(bw));
                for k in kmin..j {
                    s -= data[i * stride + (i - k)] * data[j * stride + (j - k)];
                }
                if j < i {
                    data[i * stride + (i - j)] = s / data[j * stride];
                } else {
                    if s <= 0.0 {
                        return Err(format!("non-positive pivot {s} at index {i}"));
                    }
                    data[i * stride] = s.sqrt();
                }
            }
        }
        Ok(BandedCholesky {
            n,
            bw,
            data,
            perm,
            inv_perm,
        })
    }

    /// Solve `A x = rhs` in the original (unpermuted) indexing.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64]) {
        let stride = self.bw + 1;
        let mut y = vec![0.0f64; self.n];
        for i in 0..self.n {
            let mut s = rhs[self.perm[i]];
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                s -= self.data[i * stride + (i - j)] * y[j];
            }
            y[i] = s / self.data[i * stride];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            let hi = (i + self.bw).min(self.n - 1);
            for j in i + 1..=hi {
                s -= self.data[j * stride + (j - i)] * y[j];
            }
            y[i] = s / self.data[i * stride];
        }
        for i in 0..self.n {
            x[self.perm[i]] = y[i];
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse_permutation(&self) -> &[usize] {
        &self.inv_perm
    }
}
