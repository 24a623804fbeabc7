//! Compressed sparse row storage for complex operators on the lattice
//! Hilbert space.
//!
//! Operators are assembled from triplets; duplicate `(row, col)` entries are
//! summed when the builder is finalized, after which the operator is
//! immutable.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::weyl::ALGEBRA_TOL;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Triplet accumulator.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    dim: usize,
    triplets: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        TripletBuilder {
            dim,
            triplets: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, cap: usize) -> Self {
        TripletBuilder {
            dim,
            triplets: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `value` at `(row, col)`. Panics on out-of-range indices, which
    /// are programming errors in the assemblers.
    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        assert!(
            row < self.dim && col < self.dim,
            "triplet ({row}, {col}) outside dimension {}",
            self.dim
        );
        self.triplets.push((row, col, value));
    }

    pub fn push_real(&mut self, row: usize, col: usize, value: f64) {
        self.push(row, col, C64::new(value, 0.0));
    }

    /// Sums duplicates, drops exact zeros and compresses. With `hermitian`
    /// set the result is verified to satisfy `|M - M^dag| <= 1e-12`.
    pub fn finalize(mut self, hermitian: bool) -> Result<SparseOperator> {
        self.triplets.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.triplets.len());
        let mut rows = Vec::with_capacity(self.triplets.len());
        for (r, c, v) in self.triplets {
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v == ZERO {
                continue;
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite entry at ({r}, {c})"
                )));
            }
            row_ptr[r + 1] += 1;
            out_cols.push(c);
            out_vals.push(v);
        }
        for r in 0..self.dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let op = SparseOperator {
            dim: self.dim,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
            hermitian: false,
        };
        if hermitian {
            op.into_hermitian()
        } else {
            Ok(op)
        }
    }
}

/// An immutable complex CSR matrix with a verified Hermitian flag.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        SparseOperator {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut b = TripletBuilder::with_capacity(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            b.push(i, i, d);
        }
        let mut op = b.finalize(false).expect("diagonal assembly");
        op.hermitian = diag.iter().all(|d| d.im == 0.0);
        op
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn from_dense(m: &DMatrix<C64>, hermitian: bool) -> Result<Self> {
        let mut b = TripletBuilder::new(m.nrows());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != ZERO {
                    b.push(r, c, m[(r, c)]);
                }
            }
        }
        b.finalize(hermitian)
    }

    /// Sets the Hermitian flag after verifying it.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let res = self.hermitian_residual();
        if res > ALGEBRA_TOL {
            return Err(Error::InvalidParameter(format!(
                "operator flagged Hermitian but |M - M^dag| = {res:e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Stored entries of one row as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// All stored entries sorted by `(row, col)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(pos) => self.vals[span.start + pos],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn adjoint(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.dim, self.nnz());
        for (r, c, v) in self.triplets() {
            b.push(c, r, v.conj());
        }
        let mut out = b.finalize(false).expect("adjoint assembly");
        out.hermitian = self.hermitian;
        out
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        for v in out.vals.iter_mut() {
            *v *= factor;
        }
        out.hermitian = self.hermitian && factor.im == 0.0;
        out.drop_zeros()
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    fn drop_zeros(self) -> Self {
        if self.vals.iter().all(|v| *v != ZERO) {
            return self;
        }
        let hermitian = self.hermitian;
        let mut b = TripletBuilder::with_capacity(self.dim, self.nnz());
        for (r, c, v) in self.triplets() {
            b.push(r, c, v);
        }
        let mut out = b.finalize(false).expect("re-assembly");
        out.hermitian = hermitian;
        out
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: C64, other: &SparseOperator, b: C64) -> Result<Self> {
        self.check_same_dim(other)?;
        let mut tb = TripletBuilder::with_capacity(self.dim, self.nnz() + other.nnz());
        for (r, c, v) in self.triplets() {
            tb.push(r, c, a * v);
        }
        for (r, c, v) in other.triplets() {
            tb.push(r, c, b * v);
        }
        let mut out = tb.finalize(false)?;
        out.hermitian = self.hermitian && other.hermitian && a.im == 0.0 && b.im == 0.0;
        Ok(out)
    }

    pub fn add(&self, other: &SparseOperator) -> Result<Self> {
        self.linear_combination(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &SparseOperator) -> Result<Self> {
        self.linear_combination(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// Sparse product `self * other` using a dense row accumulator.
    pub fn matmul(&self, other: &SparseOperator) -> Result<Self> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let mut acc = vec![ZERO; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in 0..n {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != ZERO {
                    cols.push(c);
                    vals.push(acc[c]);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseOperator {
            dim: n,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        })
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &SparseOperator) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// `{self, other} = self*other + other*self`.
    pub fn anticommutator(&self, other: &SparseOperator) -> Result<Self> {
        self.matmul(other)?.add(&other.matmul(self)?)
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        self.vals.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
    }

    pub fn distance(&self, other: &SparseOperator) -> Result<f64> {
        Ok(self.sub(other)?.max_norm())
    }

    pub fn hermitian_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (r, c, v) in self.triplets() {
            worst = worst.max((v - self.get(c, r).conj()).norm());
        }
        worst
    }

    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok((0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect())
    }

    pub fn apply_vector(&self, x: &DVector<C64>) -> Result<DVector<C64>> {
        Ok(DVector::from_vec(self.apply(x.as_slice())?))
    }

    /// `<x|self|x>` for a vector of matching dimension.
    pub fn expectation(&self, x: &[C64]) -> Result<C64> {
        let y = self.apply(x)?;
        Ok(x.iter().zip(y).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Restriction `P M P` expressed in the basis `indices` (strictly increasing).
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.dim];
        for (i, &idx) in indices.iter().enumerate() {
            if idx >= self.dim {
                return Err(Error::OutOfRange {
                    what: "sector index",
                    value: idx as i64,
                    allowed: format!("< {}", self.dim),
                });
            }
            pos[idx] = i;
        }
        let mut b = TripletBuilder::new(indices.len());
        for (i, &idx) in indices.iter().enumerate() {
            for (c, v) in self.row(idx) {
                if pos[c] != usize::MAX {
                    b.push(i, pos[c], v);
                }
            }
        }
        let mut out = b.finalize(false)?;
        out.hermitian = self.hermitian;
        Ok(out)
    }

    /// Inverse of [`restrict`](Self::restrict): places a sector operator into
    /// the full space, zero elsewhere.
    pub fn embed(&self, indices: &[usize], full_dim: usize) -> Result<Self> {
        if indices.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: indices.len(),
            });
        }
        let mut b = TripletBuilder::with_capacity(full_dim, self.nnz());
        for (r, c, v) in self.triplets() {
            b.push(indices[r], indices[c], v);
        }
        let mut out = b.finalize(false)?;
        out.hermitian = self.hermitian;
        Ok(out)
    }

    /// Compensated (Neumaier) sum of the diagonal.
    pub fn trace(&self) -> C64 {
        let d = self.diagonal();
        C64::new(
            neumaier(d.iter().map(|z| z.re)),
            neumaier(d.iter().map(|z| z.im)),
        )
    }

    /// Text dump: `dim,nnz,hermitian` then `row,col,re,im` sorted by
    /// `(row, col)`, floats in shortest round-trip form.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{},{},{}", self.dim, self.nnz(), self.hermitian);
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{},{},{:?},{:?}", r, c, v.re, v.im);
        }
        s
    }

    /// Parses the output of [`dump`](Self::dump).
    pub fn parse_dump(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Encoding(format!("operator dump: {msg}"));
        let mut lines = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| bad("missing header"))?;
        let h: Vec<&str> = header.split(',').collect();
        if h.len() != 3 {
            return Err(bad("header must be dim,nnz,hermitian"));
        }
        let dim: usize = h[0].parse().map_err(|_| bad("dim"))?;
        let nnz: usize = h[1].parse().map_err(|_| bad("nnz"))?;
        let hermitian: bool = h[2].parse().map_err(|_| bad("hermitian flag"))?;
        let mut b = TripletBuilder::with_capacity(dim, nnz);
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("entry must be row,col,re,im"));
            }
            let r: usize = f[0].parse().map_err(|_| bad("row"))?;
            let c: usize = f[1].parse().map_err(|_| bad("col"))?;
            if r >= dim || c >= dim {
                return Err(bad("index out of range"));
            }
            let re: f64 = f[2].parse().map_err(|_| bad("re"))?;
            let im: f64 = f[3].parse().map_err(|_| bad("im"))?;
            b.push(r, c, C64::new(re, im));
        }
        let op = b.finalize(hermitian)?;
        if op.nnz() != nnz {
            return Err(bad("nnz does not match entry count"));
        }
        Ok(op)
    }

    fn check_same_dim(&self, other: &SparseOperator) -> Result<()> {
        if self.dim != other.dim {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            })
        } else {
            Ok(())
        }
    }
}

fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + comp
}
