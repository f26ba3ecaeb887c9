//! Synthesis (de-unpooling): the minimum-norm least-squares inverse of
//! [`depool_forward`](super::depool_forward).
//!
//! # The 2x2 bank
//!
//! The Haar-style analysis matrix is square with mutually orthogonal rows of
//! squared norm 4, so its inverse is `Aᵀ / 4`.
//!
//! # The 4x4 bank
//!
//! The 4x4 analysis operator is rank deficient: for an `H x W` field with
//! `m = H/2`, `n = W/2` its rank is `2mn + m + n`, roughly half of `HW`. It
//! factors as `A = G J`:
//!
//! * `J` reflect-pads the field by one sample and takes, for every 2x2 block of
//!   the padded grid, the block sum `TT` and the diagonal difference `UU`
//!   (`+ - / - +`). Both live on an `(m+1) x (n+1)` grid of blocks.
//! * `G` is a fixed stencil over each 2x2 group of blocks:
//!   `MS = a+b+c+d`, `VD = (b-a)+(d-c)`, `HD = (a+b)-(c+d)` on `TT`, and
//!   `DD = (a-b-c+d)/2 + (sum of the four UU)/2`.
//!
//! `J` has full row rank except for four corner dependencies `Lᵀ J = 0`
//! created by the mirrored samples. Minimizing `‖x‖` over all least-squares
//! solutions becomes: minimize `vᵀ W v` over `v ∈ range(J)` with
//! `v` a least-squares solution of `G v = s`, where `W = (J Jᵀ)⁺`, and then
//! `x = Jᵀ W v`.
//!
//! The least-squares set of `G` is `v_p + span(N)` with an explicit null basis
//! `N` of `G` (one checkerboard direction on `TT` plus alternating lines on
//! `UU`). A particular solution comes from a banded Cholesky solve for `TT`
//! (three stencils, one pinned node) and two bidiagonal sweeps for `UU`. The
//! remaining `m + n + 2` coordinates follow from a small dense KKT system.
//! `J Jᵀ` is block diagonal with blocks of at most 8 entries away from tiny
//! shapes, so applying `W` is cheap.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::depool::banded::{BandedCholesky, BandedMatrix};
use crate::depool::bank::{BankKind, KernelBank};
use crate::depool::transform::{depool_adjoint, reflect, SubbandSet};
use crate::error::{Error, Result};
use crate::tensor::Field;

/// `+1` for the first sample of a pair, `-1` for the second.
#[inline]
fn pair_sign(s: usize) -> f64 {
    if s == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn alternating(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    Sum,
    Diff,
}

/// One axis of the padded block grid: `pairs = len/2 + 1` pairs of padded
/// samples, padded index `p` holding original sample `reflect(p - 1)`.
#[derive(Debug, Clone)]
struct PairAxis {
    len: usize,
    pairs: usize,
}

impl PairAxis {
    fn new(len: usize) -> Self {
        PairAxis { len, pairs: len / 2 + 1 }
    }

    #[inline]
    fn source(&self, padded: usize) -> usize {
        reflect(padded as isize - 1, self.len)
    }

    fn row(&self, k: usize, kind: PairKind) -> [(usize, f64); 2] {
        let s = match kind {
            PairKind::Sum => 1.0,
            PairKind::Diff => -1.0,
        };
        [(self.source(2 * k), 1.0), (self.source(2 * k + 1), s)]
    }

    fn gram(&self, k: usize, a: PairKind, k2: usize, b: PairKind) -> f64 {
        let mut acc = 0.0;
        for (i, u) in self.row(k, a) {
            for (j, v) in self.row(k2, b) {
                if i == j {
                    acc += u * v;
                }
            }
        }
        acc
    }

    /// Groups of pairs coupled through shared mirrored samples.
    fn groups(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.pairs).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            parent[i] = r;
            r
        }
        for k in 0..self.pairs {
            for k2 in k + 1..(k + 3).min(self.pairs) {
                let coupled = [PairKind::Sum, PairKind::Diff]
                    .iter()
                    .any(|&a| [PairKind::Sum, PairKind::Diff].iter().any(|&b| self.gram(k, a, k2, b) != 0.0));
                if coupled {
                    let (ra, rb) = (find(&mut parent, k), find(&mut parent, k2));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.pairs];
        for k in 0..self.pairs {
            let r = find(&mut parent, k);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(k);
        }
        groups
    }

    /// Vectors `(alpha, beta)` with `Σ alpha_k sum_k + beta_k diff_k = 0` as
    /// functionals on the original samples; one per mirrored sample.
    fn null_vectors(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let padded = 2 * self.pairs;
        let mut out = Vec::new();
        for p in 0..padded {
            for p2 in p + 1..padded {
                if self.source(p) == self.source(p2) {
                    let mut alpha = vec![0.0; self.pairs];
                    let mut beta = vec![0.0; self.pairs];
                    for (q, val) in [(p, 1.0), (p2, -1.0)] {
                        alpha[q / 2] += 0.5 * val;
                        beta[q / 2] += 0.5 * val * pair_sign(q % 2);
                    }
                    out.push((alpha, beta));
                }
            }
        }
        out
    }
}

#[derive(Debug)]
struct DenseBlock {
    vars: Vec<usize>,
    pinv: Vec<f64>,
}

/// Precomputed minimum-norm synthesis for one shape of the 4x4 bank.
#[derive(Debug)]
pub struct StructuredPlan {
    height: usize,
    width: usize,
    m: usize,
    n: usize,
    rows: PairAxis,
    cols: PairAxis,
    tt_col_major: bool,
    tt_chol: BandedCholesky,
    /// Diagonal of `W` outside the dense blocks (NaN inside them).
    w_diag: Vec<f64>,
    w_blocks: Vec<DenseBlock>,
    cb_tt: Vec<f64>,
    cb_uu: Vec<f64>,
    corner_null: Vec<Vec<(usize, f64)>>,
    kkt: nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl StructuredPlan {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if !height.is_multiple_of(2) || !width.is_multiple_of(2) || height < 4 || width < 4 {
            return Err(Error::shape(format!("4x4 synthesis needs even dimensions of at least 4, got {height}x{width}")));
        }
        let (m, n) = (height / 2, width / 2);
        let rows = PairAxis::new(height);
        let cols = PairAxis::new(width);
        let tt_col_major = m < n;
        let tt_chol = Self::factor_tt(m, n, tt_col_major)?;

        let mut plan = StructuredPlan {
            height,
            width,
            m,
            n,
            rows,
            cols,
            tt_col_major,
            tt_chol,
            w_diag: Vec::new(),
            w_blocks: Vec::new(),
            cb_tt: Vec::new(),
            cb_uu: Vec::new(),
            corner_null: Vec::new(),
            kkt: DMatrix::<f64>::zeros(1, 1).lu(),
        };
        plan.build_weight();
        plan.build_null_basis();
        plan.build_corner_null();
        plan.build_kkt()?;
        Ok(plan)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    fn nodes(&self) -> usize {
        (self.m + 1) * (self.n + 1)
    }

    #[inline]
    fn node(&self, k: usize, l: usize) -> usize {
        k * (self.n + 1) + l
    }

    fn null_dim(&self) -> usize {
        1 + (self.n + 1) + self.m
    }

    // -- TT particular solution ------------------------------------------

    const STENCILS: [[f64; 4]; 3] = [
        [1.0, 1.0, 1.0, 1.0],   // MS
        [-1.0, 1.0, -1.0, 1.0], // VD
        [1.0, 1.0, -1.0, -1.0], // HD
    ];

    /// Unknown index of block node `(k, l)`; the corner `(m, n)` is pinned.
    #[inline]
    fn tt_index(m: usize, n: usize, col_major: bool, k: usize, l: usize) -> Option<usize> {
        if k == m && l == n {
            return None;
        }
        Some(if col_major { l * (m + 1) + k } else { k * (n + 1) + l })
    }

    fn cell_nodes(i: usize, j: usize) -> [(usize, usize); 4] {
        [(i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)]
    }

    fn factor_tt(m: usize, n: usize, col_major: bool) -> Result<BandedCholesky> {
        let dim = (m + 1) * (n + 1) - 1;
        let bw = if col_major { m + 2 } else { n + 2 };
        let mut normal = BandedMatrix::zeros(dim, bw);
        let mut local = [[0.0; 4]; 4];
        for (a, row) in local.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = Self::STENCILS.iter().map(|c| c[a] * c[b]).sum();
            }
        }
        for i in 0..m {
            for j in 0..n {
                let idx = Self::cell_nodes(i, j).map(|(k, l)| Self::tt_index(m, n, col_major, k, l));
                for a in 0..4 {
                    for b in 0..=a {
                        if let (Some(ia), Some(ib)) = (idx[a], idx[b]) {
                            normal.add(ia, ib, local[a][b]);
                        }
                    }
                }
            }
        }
        normal.cholesky()
    }

    fn solve_tt(&self, s: &SubbandSet) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut rhs = vec![0.0; self.tt_chol.dim()];
        for i in 0..m {
            for j in 0..n {
                let f = [s.ms.get(i, j), s.vd.get(i, j), s.hd.get(i, j)];
                for (a, (k, l)) in Self::cell_nodes(i, j).into_iter().enumerate() {
                    if let Some(ia) = Self::tt_index(m, n, self.tt_col_major, k, l) {
                        rhs[ia] += Self::STENCILS.iter().zip(&f).map(|(c, v)| c[a] * v).sum::<f64>();
                    }
                }
            }
        }
        self.tt_chol.solve_in_place(&mut rhs);
        let mut tt = vec![0.0; self.nodes()];
        for k in 0..=m {
            for l in 0..=n {
                if let Some(ia) = Self::tt_index(m, n, self.tt_col_major, k, l) {
                    tt[self.node(k, l)] = rhs[ia];
                }
            }
        }
        tt
    }

    /// Solves `S U Sᵀ = rhs` (pair-sum stencil on both axes) with the last
    /// block row and column of `U` held at zero.
    fn solve_uu(&self, rhs: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut z = rhs.to_vec();
        for j in 0..n {
            for i in (0..m - 1).rev() {
                z[i * n + j] -= z[(i + 1) * n + j];
            }
        }
        for i in 0..m {
            for j in (0..n - 1).rev() {
                z[i * n + j] -= z[i * n + j + 1];
            }
        }
        let mut uu = vec![0.0; self.nodes()];
        for i in 0..m {
            for j in 0..n {
                uu[self.node(i, j)] = z[i * n + j];
            }
        }
        uu
    }

    /// `a - b - c + d` over the four nodes of every cell.
    fn cross_stencil(&self, tt: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(tt[self.node(i, j)] - tt[self.node(i, j + 1)] - tt[self.node(i + 1, j)] + tt[self.node(i + 1, j + 1)]);
            }
        }
        out
    }

    // -- W = (J Jᵀ)⁺ -------------------------------------------------------

    fn build_weight(&mut self) {
        let p = self.nodes();
        let row_groups = self.rows.groups();
        let col_groups = self.cols.groups();
        self.w_diag = vec![f64::NAN; 2 * p];
        let kinds = [PairKind::Sum, PairKind::Diff];
        for rg in &row_groups {
            for cg in &col_groups {
                let mut vars = Vec::with_capacity(2 * rg.len() * cg.len());
                for (kind_idx, _) in kinds.iter().enumerate() {
                    for &k in rg {
                        for &l in cg {
                            vars.push((kind_idx, k, l));
                        }
                    }
                }
                let dim = vars.len();
                let mut block = DMatrix::<f64>::zeros(dim, dim);
                for (a, &(ta, ka, la)) in vars.iter().enumerate() {
                    for (b, &(tb, kb, lb)) in vars.iter().enumerate() {
                        block[(a, b)] = self.rows.gram(ka, kinds[ta], kb, kinds[tb]) * self.cols.gram(la, kinds[ta], lb, kinds[tb]);
                    }
                }
                let flat: Vec<usize> = vars.iter().map(|&(t, k, l)| t * p + self.node(k, l)).collect();
                let is_diagonal = (0..dim).all(|a| (0..dim).all(|b| a == b || block[(a, b)] == 0.0));
                if is_diagonal {
                    for (a, &v) in flat.iter().enumerate() {
                        let d = block[(a, a)];
                        self.w_diag[v] = if d != 0.0 { 1.0 / d } else { 0.0 };
                    }
                    continue;
                }
                let eig = SymmetricEigen::new(block);
                let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                let mut pinv = DMatrix::<f64>::zeros(dim, dim);
                for (e, &lambda) in eig.eigenvalues.iter().enumerate() {
                    if lambda.abs() > 1e-12 * top {
                        let v = eig.eigenvectors.column(e);
                        pinv += (v * v.transpose()) / lambda;
                    }
                }
                let mut row_major = Vec::with_capacity(dim * dim);
                for a in 0..dim {
                    for b in 0..dim {
                        row_major.push(pinv[(a, b)]);
                    }
                }
                self.w_blocks.push(DenseBlock { vars: flat, pinv: row_major });
            }
        }
    }

    fn apply_weight(&self, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(&self.w_diag).map(|(x, d)| if d.is_nan() { 0.0 } else { x * d }).collect();
        for block in &self.w_blocks {
            let dim = block.vars.len();
            for (a, &va) in block.vars.iter().enumerate() {
                out[va] = block.pinv[a * dim..(a + 1) * dim].iter().zip(&block.vars).map(|(w, &vb)| w * v[vb]).sum();
            }
        }
        out
    }

    // -- null spaces ---------------------------------------------------------

    fn build_null_basis(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut cb = vec![0.0; self.nodes()];
        for k in 0..=m {
            for l in 0..=n {
                cb[self.node(k, l)] = alternating(k + l);
            }
        }
        let rhs: Vec<f64> = self.cross_stencil(&cb).iter().map(|v| -v).collect();
        self.cb_uu = self.solve_uu(&rhs);
        self.cb_tt = cb;
    }

    /// `v += N c`.
    fn add_null_combination(&self, c: &[f64], v: &mut [f64]) {
        let (m, n, p) = (self.m, self.n, self.nodes());
        let (tt, uu) = v.split_at_mut(p);
        for (t, b) in tt.iter_mut().zip(&self.cb_tt) {
            *t += c[0] * b;
        }
        for (u, b) in uu.iter_mut().zip(&self.cb_uu) {
            *u += c[0] * b;
        }
        let lines = &c[1..n + 2];
        let row_lines = &c[n + 2..];
        for k in 0..=m {
            let sk = alternating(k);
            for l in 0..=n {
                let mut add = sk * lines[l];
                if k < m {
                    add += alternating(l) * row_lines[k];
                }
                uu[k * (n + 1) + l] += add;
            }
        }
    }

    /// `Nᵀ y`.
    fn null_transpose(&self, y: &[f64]) -> Vec<f64> {
        let (m, n, p) = (self.m, self.n, self.nodes());
        let (tt, uu) = y.split_at(p);
        let mut out = vec![0.0; self.null_dim()];
        out[0] = tt.iter().zip(&self.cb_tt).map(|(a, b)| a * b).sum::<f64>() + uu.iter().zip(&self.cb_uu).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..=m {
            let sk = alternating(k);
            for l in 0..=n {
                let u = uu[k * (n + 1) + l];
                out[1 + l] += sk * u;
                if k < m {
                    out[n + 2 + k] += alternating(l) * u;
                }
            }
        }
        out
    }

    fn build_corner_null(&mut self) {
        let p = self.nodes();
        let row_null = self.rows.null_vectors();
        let col_null = self.cols.null_vectors();
        for (ar, br) in &row_null {
            for (ac, bc) in &col_null {
                let mut sparse = Vec::new();
                for k in 0..=self.m {
                    for l in 0..=self.n {
                        let t = ar[k] * ac[l];
                        if t != 0.0 {
                            sparse.push((self.node(k, l), t));
                        }
                        let u = -br[k] * bc[l];
                        if u != 0.0 {
                            sparse.push((p + self.node(k, l), u));
                        }
                    }
                }
                self.corner_null.push(sparse);
            }
        }
    }

    fn build_kkt(&mut self) -> Result<()> {
        let q = self.null_dim();
        let r = self.corner_null.len();
        let mut kkt = DMatrix::<f64>::zeros(q + r, q + r);
        let mut unit = vec![0.0; q];
        for j in 0..q {
            unit.iter_mut().for_each(|v| *v = 0.0);
            unit[j] = 1.0;
            let mut column = vec![0.0; 2 * self.nodes()];
            self.add_null_combination(&unit, &mut column);
            let weighted = self.apply_weight(&column);
            for (i, v) in self.null_transpose(&weighted).into_iter().enumerate() {
                kkt[(i, j)] = v;
            }
            for (i, l) in self.corner_null.iter().enumerate() {
                let c: f64 = l.iter().map(|&(idx, w)| w * column[idx]).sum();
                kkt[(q + i, j)] = c;
                kkt[(j, q + i)] = c;
            }
        }
        // symmetrize away rounding in H
        for i in 0..q {
            for j in 0..i {
                let avg = 0.5 * (kkt[(i, j)] + kkt[(j, i)]);
                kkt[(i, j)] = avg;
                kkt[(j, i)] = avg;
            }
        }
        let lu = kkt.lu();
        if !lu.is_invertible() {
            return Err(Error::param(format!("singular synthesis system for {}x{}", self.height, self.width)));
        }
        self.kkt = lu;
        Ok(())
    }

    // -- J and Jᵀ ------------------------------------------------------------

    /// `Jᵀ z`: scatter block sums and diagonal differences back to samples.
    fn apply_jt(&self, z: &[f64]) -> Field {
        let (h, w, n, p) = (self.height, self.width, self.n, self.nodes());
        let mut x = vec![0.0; h * w];
        for pr in 0..2 * (self.m + 1) {
            let (k, s) = (pr / 2, pr % 2);
            let row = self.rows.source(pr);
            for pc in 0..2 * (n + 1) {
                let (l, r) = (pc / 2, pc % 2);
                let node = k * (n + 1) + l;
                let v = z[node] + pair_sign(s) * pair_sign(r) * z[p + node];
                x[row * w + self.cols.source(pc)] += v;
            }
        }
        Field::from_vec(h, w, x)
    }

    /// `J x` as `[TT; UU]`.
    #[cfg(test)]
    fn apply_j(&self, x: &Field) -> Vec<f64> {
        let (n, p) = (self.n, self.nodes());
        let mut v = vec![0.0; 2 * p];
        for pr in 0..2 * (self.m + 1) {
            let (k, s) = (pr / 2, pr % 2);
            let row = self.rows.source(pr);
            for pc in 0..2 * (n + 1) {
                let (l, r) = (pc / 2, pc % 2);
                let node = k * (n + 1) + l;
                let sample = x.get(row, self.cols.source(pc));
                v[node] += sample;
                v[p + node] += pair_sign(s) * pair_sign(r) * sample;
            }
        }
        v
    }

    /// `G v` flattened as MS, VD, HD, DD.
    #[cfg(test)]
    fn apply_g(&self, v: &[f64]) -> Vec<f64> {
        let (m, n, p) = (self.m, self.n, self.nodes());
        let mut out = vec![0.0; 4 * m * n];
        let q = m * n;
        for i in 0..m {
            for j in 0..n {
                let nodes = Self::cell_nodes(i, j).map(|(k, l)| self.node(k, l));
                let t = nodes.map(|nd| v[nd]);
                let u: f64 = nodes.iter().map(|&nd| v[p + nd]).sum();
                for (band, c) in Self::STENCILS.iter().enumerate() {
                    out[band * q + i * n + j] = c.iter().zip(&t).map(|(a, b)| a * b).sum();
                }
                out[3 * q + i * n + j] = 0.5 * (t[0] - t[1] - t[2] + t[3]) + 0.5 * u;
            }
        }
        out
    }

    // -- solve ---------------------------------------------------------------

    pub fn solve(&self, s: &SubbandSet) -> Result<Field> {
        if s.original_shape() != (self.height, self.width) {
            return Err(Error::shape(format!(
                "subbands for {:?} given to a {}x{} synthesis plan",
                s.original_shape(),
                self.height,
                self.width
            )));
        }
        let p = self.nodes();
        let tt = self.solve_tt(s);
        let cross = self.cross_stencil(&tt);
        let rhs: Vec<f64> = s.dd.data().iter().zip(&cross).map(|(d, c)| 2.0 * d - c).collect();
        let uu = self.solve_uu(&rhs);
        let mut v = tt;
        v.extend_from_slice(&uu);
        debug_assert_eq!(v.len(), 2 * p);

        let weighted = self.apply_weight(&v);
        let q = self.null_dim();
        let mut rhs = DVector::<f64>::zeros(q + self.corner_null.len());
        for (i, g) in self.null_transpose(&weighted).into_iter().enumerate() {
            rhs[i] = -g;
        }
        for (i, l) in self.corner_null.iter().enumerate() {
            rhs[q + i] = -l.iter().map(|&(idx, w)| w * v[idx]).sum::<f64>();
        }
        let sol = self.kkt.solve(&rhs).ok_or_else(|| Error::param("synthesis KKT solve failed"))?;
        self.add_null_combination(&sol.as_slice()[..q], &mut v);
        Ok(self.apply_jt(&self.apply_weight(&v)))
    }
}

/// A prepared synthesis for one `(height, width, bank)`.
#[derive(Debug)]
pub enum SynthesisPlan {
    /// `x = Aᵀ s / 4`.
    Haar {
        height: usize,
        width: usize,
    },
    Structured(Box<StructuredPlan>),
}

impl SynthesisPlan {
    pub fn build(height: usize, width: usize, kind: BankKind) -> Result<Self> {
        match kind {
            BankKind::Haar2 => {
                if !height.is_multiple_of(2) || !width.is_multiple_of(2) || height < 2 || width < 2 {
                    return Err(Error::shape(format!("2x2 synthesis needs even dimensions, got {height}x{width}")));
                }
                Ok(SynthesisPlan::Haar { height, width })
            }
            BankKind::Depool4 => Ok(SynthesisPlan::Structured(Box::new(StructuredPlan::new(height, width)?))),
        }
    }

    pub fn solve(&self, s: &SubbandSet) -> Result<Field> {
        match self {
            SynthesisPlan::Haar { height, width } => {
                if s.original_shape() != (*height, *width) {
                    return Err(Error::shape("subband shape does not match synthesis plan"));
                }
                Ok(depool_adjoint(s, &KernelBank::haar2())?.scale(0.25))
            }
            SynthesisPlan::Structured(plan) => plan.solve(s),
        }
    }
}

type PlanKey = (usize, usize, BankKind);

/// Build-once, read-many store of synthesis plans keyed by shape and bank.
#[derive(Debug, Default)]
pub struct SynthesisCache {
    plans: RwLock<HashMap<PlanKey, Arc<SynthesisPlan>>>,
}

impl SynthesisCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, height: usize, width: usize, kind: BankKind) -> Result<Arc<SynthesisPlan>> {
        let key = (height, width, kind);
        if let Some(plan) = self.plans.read().expect("plan cache poisoned").get(&key) {
            return Ok(Arc::clone(plan));
        }
        let built = Arc::new(SynthesisPlan::build(height, width, kind)?);
        let mut plans = self.plans.write().expect("plan cache poisoned");
        // another thread may have won the race; keep the first plan
        Ok(Arc::clone(plans.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.plans.read().expect("plan cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Process-wide plan cache used by [`depool_inverse`].
pub fn global_cache() -> &'static SynthesisCache {
    static CACHE: OnceLock<SynthesisCache> = OnceLock::new();
    CACHE.get_or_init(SynthesisCache::new)
}

/// Minimum-norm least-squares inverse of the analysis operator.
pub fn depool_inverse(s: &SubbandSet, bank: &KernelBank) -> Result<Field> {
    depool_inverse_with(global_cache(), s, bank)
}

pub fn depool_inverse_with(cache: &SynthesisCache, s: &SubbandSet, bank: &KernelBank) -> Result<Field> {
    let (h, w) = s.original_shape();
    let plan = cache.get_or_build(h, w, bank.kind())?;
    plan.solve(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depool::transform::depool_forward;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(h: usize, w: usize, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn analysis_factors_through_block_coefficients() {
        let bank = KernelBank::depool4();
        for (h, w) in [(4, 4), (6, 8), (10, 6), (16, 16)] {
            let plan = StructuredPlan::new(h, w).unwrap();
            let x = random_field(h, w, (h * 31 + w) as u64);
            let direct = depool_forward(&x, &bank).unwrap().flatten();
            let factored = plan.apply_g(&plan.apply_j(&x));
            for (a, b) in direct.iter().zip(&factored) {
                assert!((a - b).abs() < 1e-12, "{h}x{w}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn null_basis_is_annihilated() {
        let plan = StructuredPlan::new(8, 10).unwrap();
        let q = plan.null_dim();
        for j in 0..q {
            let mut c = vec![0.0; q];
            c[j] = 1.0;
            let mut v = vec![0.0; 2 * plan.nodes()];
            plan.add_null_combination(&c, &mut v);
            let g = plan.apply_g(&v);
            assert!(g.iter().all(|x| x.abs() < 1e-9), "null column {j}");
        }
    }

    #[test]
    fn corner_dependencies_annihilate_jt() {
        let plan = StructuredPlan::new(8, 6).unwrap();
        assert_eq!(plan.corner_null.len(), 4);
        for l in &plan.corner_null {
            let mut z = vec![0.0; 2 * plan.nodes()];
            for &(i, v) in l {
                z[i] = v;
            }
            let x = plan.apply_jt(&z);
            assert!(x.data().iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn consistent_input_has_zero_residual() {
        let bank = KernelBank::depool4();
        for (h, w) in [(4, 4), (8, 8), (12, 6), (20, 14)] {
            let x = random_field(h, w, 7);
            let s = depool_forward(&x, &bank).unwrap();
            let xr = depool_inverse(&s, &bank).unwrap();
            let s2 = depool_forward(&xr, &bank).unwrap();
            let res: f64 = s.flatten().iter().zip(s2.flatten()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(res < 1e-10, "{h}x{w}: residual {res}");
            // minimum norm never exceeds the norm of the true preimage
            assert!(xr.dot(&xr).unwrap() <= x.dot(&x).unwrap() + 1e-9);
        }
    }

    #[test]
    fn haar_round_trip_is_exact() {
        let bank = KernelBank::haar2();
        let x = random_field(6, 10, 3);
        let s = depool_forward(&x, &bank).unwrap();
        let xr = depool_inverse(&s, &bank).unwrap();
        assert!(xr.max_abs_diff(&x).unwrap() < 1e-14);
    }

    #[test]
    fn zero_subbands_give_zero_field() {
        for bank in [KernelBank::depool4(), KernelBank::haar2()] {
            let s = SubbandSet::zeros((8, 12)).unwrap();
            let x = depool_inverse(&s, &bank).unwrap();
            assert!(x.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn cache_builds_once() {
        let cache = SynthesisCache::new();
        let a = cache.get_or_build(8, 8, BankKind::Depool4).unwrap();
        let b = cache.get_or_build(8, 8, BankKind::Depool4).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get_or_build(8, 8, BankKind::Haar2).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn plan_rejects_wrong_shape() {
        let plan = SynthesisPlan::build(8, 8, BankKind::Depool4).unwrap();
        let s = SubbandSet::zeros((8, 10)).unwrap();
        assert!(matches!(plan.solve(&s), Err(Error::Shape(_))));
        assert!(SynthesisPlan::build(2, 8, BankKind::Depool4).is_err());
    }
}
