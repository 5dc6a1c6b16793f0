use std::ops::AddAssign;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sparse::BlockSparse;

/// How the conjugate-gradient iteration is preconditioned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Inverse of each diagonal block.
    BlockJacobi,
    /// Exact block-tridiagonal solve over the leading chain of blocks (the
    /// trajectory) and a dense solve over the remaining blocks (the map).
    #[default]
    Chain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    /// Stop when `||A x - b|| <= tolerance * ||b||`.
    pub tolerance: f64,
    /// Defaults to ten times the system dimension.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub preconditioner: Preconditioner,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: None, preconditioner: Preconditioner::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_norm: f64,
}

fn invert_spd(d: DMatrix<f64>) -> DMatrix<f64> {
    let n = d.nrows();
    d.clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| d.try_inverse())
        .unwrap_or_else(|| DMatrix::identity(n, n))
}

/// `out = m v` for a column-major `rows x cols` matrix.
fn gemv(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for c in 0..cols {
        let x = v[c];
        for r in 0..rows {
            out[r] += m[c * rows + r] * x;
        }
    }
}

/// `out -= m^T v` for a column-major `rows x cols` matrix.
fn sub_gemv_t(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for c in 0..cols {
        let mut acc = 0.0;
        for r in 0..rows {
            acc += m[c * rows + r] * v[r];
        }
        out[c] -= acc;
    }
}

/// `out -= m v` for a column-major `rows x cols` matrix.
fn sub_gemv(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for c in 0..cols {
        let x = v[c];
        for r in 0..rows {
            out[r] -= m[c * rows + r] * x;
        }
    }
}

/// Block LDL^T of a block-tridiagonal matrix: Schur complements
/// `S_k = D_k - B_k^T S_{k-1}^-1 B_k`, `B_k` coupling blocks `k - 1` and `k`.
struct ChainSolver {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    s_inv: Vec<DMatrix<f64>>,
    /// `b[k]` has block `k - 1` as rows and block `k` as columns; `b[0]` is empty.
    b: Vec<DMatrix<f64>>,
}

impl ChainSolver {
    fn new(a: &BlockSparse, damping: f64, len: usize) -> Self {
        let mut s_inv: Vec<DMatrix<f64>> = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        for k in 0..len {
            let n = a.block_size(k);
            let mut d = a.block(k, k).unwrap_or_else(|| DMatrix::zeros(n, n)) + DMatrix::identity(n, n) * damping;
            let bk = if k == 0 {
                DMatrix::zeros(0, 0)
            } else {
                let m = a.block_size(k - 1);
                let bk = a.block(k - 1, k).unwrap_or_else(|| DMatrix::zeros(m, n));
                d -= bk.transpose() * &s_inv[k - 1] * &bk;
                bk
            };
            s_inv.push(invert_spd(d));
            b.push(bk);
        }
        Self {
            offsets: (0..len).map(|k| a.block_offset(k)).collect(),
            sizes: (0..len).map(|k| a.block_size(k)).collect(),
            s_inv,
            b,
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let len = self.sizes.len();
        if len == 0 {
            return;
        }
        let mut y = r[..z.len()].to_vec();
        let mut w = Vec::new();
        for k in 1..len {
            let (op, np) = (self.offsets[k - 1], self.sizes[k - 1]);
            let (ok, nk) = (self.offsets[k], self.sizes[k]);
            w.resize(np, 0.0);
            gemv(self.s_inv[k - 1].as_slice(), np, np, &y[op..op + np], &mut w);
            sub_gemv_t(self.b[k].as_slice(), np, nk, &w, &mut y[ok..ok + nk]);
        }
        for k in (0..len).rev() {
            let (ok, nk) = (self.offsets[k], self.sizes[k]);
            if k + 1 < len {
                let (on, nn) = (self.offsets[k + 1], self.sizes[k + 1]);
                let (head, tail) = z.split_at(on);
                let _ = head;
                sub_gemv(self.b[k + 1].as_slice(), nk, nn, &tail[..nn], &mut y[ok..ok + nk]);
            }
            gemv(self.s_inv[k].as_slice(), nk, nk, &y[ok..ok + nk], &mut z[ok..ok + nk]);
        }
    }
}

enum Precond {
    Blocks(Vec<(usize, DMatrix<f64>)>),
    Dense { offset: usize, inv: DMatrix<f64> },
    Chain { chain: ChainSolver, rest_offset: usize, rest: Box<Precond> },
}

/// Largest trailing system the chain preconditioner inverts densely.
const DENSE_LIMIT: usize = 2000;

impl Precond {
    fn block_jacobi(a: &BlockSparse, damping: f64, from: usize) -> Self {
        Precond::Blocks(
            (from..a.block_count())
                .map(|b| {
                    let n = a.block_size(b);
                    let d = a.block(b, b).unwrap_or_else(|| DMatrix::zeros(n, n)) + DMatrix::identity(n, n) * damping;
                    (a.block_offset(b), invert_spd(d))
                })
                .collect(),
        )
    }

    fn new(a: &BlockSparse, damping: f64, kind: Preconditioner) -> Self {
        match kind {
            Preconditioner::BlockJacobi => Self::block_jacobi(a, damping, 0),
            Preconditioner::Chain => {
                let len = chain_length(a);
                let chain = ChainSolver::new(a, damping, len);
                let rest_offset = if len < a.block_count() { a.block_offset(len) } else { a.dim() };
                let rest_dim = a.dim() - rest_offset;
                let rest = if rest_dim > 0 && rest_dim <= DENSE_LIMIT {
                    let mut d = DMatrix::identity(rest_dim, rest_dim) * damping;
                    for (i, j) in a.block_indices().filter(|&(i, _)| i >= len) {
                        let blk = a.block(i, j).expect("stored block");
                        let (oi, oj) = (a.block_offset(i) - rest_offset, a.block_offset(j) - rest_offset);
                        d.view_mut((oi, oj), blk.shape()).add_assign(&blk);
                        if i != j {
                            d.view_mut((oj, oi), (blk.ncols(), blk.nrows())).add_assign(&blk.transpose());
                        }
                    }
                    Precond::Dense { offset: rest_offset, inv: invert_spd(d) }
                } else {
                    Self::block_jacobi(a, damping, len)
                };
                Precond::Chain { chain, rest_offset, rest: Box::new(rest) }
            }
        }
    }

    fn apply(&self, r: &DVector<f64>, z: &mut DVector<f64>) {
        match self {
            Precond::Blocks(blocks) => {
                for (off, m) in blocks {
                    let n = m.nrows();
                    gemv(m.as_slice(), n, n, &r.as_slice()[*off..off + n], &mut z.as_mut_slice()[*off..off + n]);
                }
            }
            Precond::Dense { offset, inv } => {
                let n = inv.nrows();
                let range = *offset..offset + n;
                gemv(inv.as_slice(), n, n, &r.as_slice()[range.clone()], &mut z.as_mut_slice()[range]);
            }
            Precond::Chain { chain, rest_offset, rest } => {
                chain.apply(r.as_slice(), &mut z.as_mut_slice()[..*rest_offset]);
                rest.apply(r, z);
            }
        }
    }
}

/// Number of leading blocks whose stored couplings among themselves are all
/// between neighbours.
fn chain_length(a: &BlockSparse) -> usize {
    let mut len = a.block_count();
    for (i, j) in a.block_indices() {
        if j > i + 1 {
            len = len.min(j);
        }
    }
    len
}

/// Preconditioned conjugate gradient for `(A + damping I) x = b`, starting
/// from `x = 0`. Deterministic: fixed operation order throughout.
pub fn conjugate_gradient(a: &BlockSparse, damping: f64, b: &DVector<f64>, cfg: &CgConfig) -> CgOutcome {
    let n = a.dim();
    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    if b_norm == 0.0 {
        return CgOutcome { solution: x, iterations: 0, converged: true, residual_norm: 0.0 };
    }
    let target = cfg.tolerance * b_norm;
    let max_iter = cfg.max_iterations.unwrap_or(10 * n);
    let pre = Precond::new(a, damping, cfg.preconditioner);

    let mut r = b.clone();
    let mut z = DVector::zeros(n);
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    let mut r_norm = b_norm;
    let mut iterations = 0;

    while iterations < max_iter && r_norm > target {
        a.mul_vec_into(&p, &mut ap);
        ap.axpy(damping, &p, 1.0);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        iterations += 1;
        r_norm = r.norm();
        if r_norm <= target {
            break;
        }
        pre.apply(&r, &mut z);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.axpy(1.0, &z, beta);
    }
    // Report the true residual rather than the recursively updated one.
    let mut check = DVector::zeros(n);
    a.mul_vec_into(&x, &mut check);
    check.axpy(damping, &x, 1.0);
    let residual_norm = (check - b).norm();
    CgOutcome { solution: x, iterations, converged: residual_norm <= target, residual_norm }
}
