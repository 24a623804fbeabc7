//! Single-link algebra: the cyclic shift `U`, the clock `V`, the discrete
//! Fourier basis that diagonalizes `U`, and the electric-field energy `f(V)`.
//!
//! Field-basis indices are 0-based, `k = 0` being the zero-field state, so
//! that `V e_k = exp(-2 pi i k / n) e_k` and `U e_k = e_{(k+1) mod n}`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

/// Max-norm tolerance for exact algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// A dense complex `dim x dim` operator with optional verified structure flags.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<C64>,
    hermitian: bool,
    unitary: bool,
}

impl DenseOperator {
    /// Wraps a matrix without claiming any structure.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        Self::with_flags(matrix, false, false)
    }

    /// Wraps a matrix and verifies the requested flags to [`ALGEBRA_TOL`].
    pub fn with_flags(matrix: DMatrix<C64>, hermitian: bool, unitary: bool) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if matrix
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite operator entry".into()));
        }
        let op = DenseOperator {
            matrix,
            hermitian,
            unitary,
        };
        if hermitian && op.hermitian_residual() > ALGEBRA_TOL {
            return Err(Error::InvalidParameter(format!(
                "operator flagged Hermitian but |M - M^dag| = {:e}",
                op.hermitian_residual()
            )));
        }
        if unitary && op.unitary_residual() > ALGEBRA_TOL {
            return Err(Error::InvalidParameter(format!(
                "operator flagged unitary but |M^dag M - I| = {:e}",
                op.unitary_residual()
            )));
        }
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        DenseOperator {
            matrix: DMatrix::identity(dim, dim),
            hermitian: true,
            unitary: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        DenseOperator {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    pub fn mul(&self, other: &DenseOperator) -> Self {
        DenseOperator {
            matrix: &self.matrix * &other.matrix,
            hermitian: false,
            unitary: self.unitary && other.unitary,
        }
    }

    /// Integer power; negative exponents use the adjoint of a unitary operator.
    pub fn pow(&self, exp: i64) -> Result<Self> {
        let base = if exp < 0 {
            if !self.unitary {
                return Err(Error::InvalidParameter(
                    "negative power of a non-unitary operator".into(),
                ));
            }
            self.adjoint()
        } else {
            self.clone()
        };
        let mut acc = DenseOperator::identity(self.dim());
        acc.hermitian = false;
        for _ in 0..exp.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc.unitary = self.unitary;
        Ok(acc)
    }

    pub fn scale(&self, factor: C64) -> Self {
        DenseOperator {
            matrix: &self.matrix * factor,
            hermitian: self.hermitian && factor.im == 0.0,
            unitary: self.unitary && (factor.norm() - 1.0).abs() < ALGEBRA_TOL,
        }
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Max-norm distance to another operator of the same dimension.
    pub fn distance(&self, other: &DenseOperator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn hermitian_residual(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn unitary_residual(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n)))
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| r == c || self.matrix[(r, c)] == C64::new(0.0, 0.0)))
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.matrix.diagonal().iter().copied().collect()
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Formats a real number with six significant digits, trimming trailing zeros.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{}", trim_zeros(mant), e);
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl fmt::Display for DenseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| {
                    let z = self.matrix[(r, c)];
                    let sign = if z.im.is_sign_negative() && z.im != 0.0 {
                        '-'
                    } else {
                        '+'
                    };
                    format!("{}{}{}i", fmt_sig6(z.re), sign, fmt_sig6(z.im.abs()))
                })
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidDimension(n))
    } else {
        Ok(())
    }
}

/// `exp(i * 2 pi * j / n)` with the phase reduced mod n before evaluation.
pub fn root_of_unity(j: i64, n: usize) -> C64 {
    let n = n as i64;
    let r = j.rem_euclid(n);
    // quarter turns are exact
    if (4 * r) % n == 0 {
        return match 4 * r / n {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
    }
    C64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
}

/// Cyclic shift `U e_k = e_{(k+1) mod n}`.
pub fn shift_operator(n: usize) -> Result<DenseOperator> {
    check_dim(n)?;
    let mut m = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        m[((k + 1) % n, k)] = C64::new(1.0, 0.0);
    }
    DenseOperator::with_flags(m, n == 2, true)
}

/// Clock `V = diag(exp(-2 pi i k / n))`.
pub fn clock_operator(n: usize) -> Result<DenseOperator> {
    check_dim(n)?;
    let m = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            root_of_unity(-(r as i64), n)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    DenseOperator::with_flags(m, n == 2, true)
}

/// Columns are the eigenvectors `u_k = n^{-1/2} sum_l exp(2 pi i k l / n) e_l`
/// of the shift, with `U u_k = exp(-2 pi i k / n) u_k`.
pub fn fourier_eigenbasis(n: usize) -> Result<DenseOperator> {
    check_dim(n)?;
    let norm = 1.0 / (n as f64).sqrt();
    let m = DMatrix::from_fn(n, n, |l, k| root_of_unity((k * l) as i64, n) * norm);
    DenseOperator::with_flags(m, false, true)
}

/// Max-norm of `V^{-k} U^l V^k - exp(2 pi i k l / n) U^l`.
pub fn weyl_relation_residual(n: usize, k: i64, l: i64) -> Result<f64> {
    let u = shift_operator(n)?;
    let v = clock_operator(n)?;
    let kr = k.rem_euclid(n as i64);
    let lr = l.rem_euclid(n as i64);
    let ul = u.pow(lr)?;
    let lhs = v.pow(-kr)?.mul(&ul).mul(&v.pow(kr)?);
    let rhs = ul.scale(root_of_unity(kr * lr, n));
    Ok(lhs.distance(&rhs))
}

/// Eigenvalues of the field energy on each field-basis state:
/// `sin^2(pi k / n)`, or `sin^2(pi (k + 1/2) / n)` for the chiral variant.
pub fn field_energy_spectrum(n: usize, chiral: bool) -> Result<Vec<f64>> {
    check_dim(n)?;
    let shift = if chiral { 0.5 } else { 0.0 };
    Ok((0..n)
        .map(|k| {
            let s = (PI * (k as f64 + shift) / n as f64).sin();
            s * s
        })
        .collect())
}

/// `f(V) = (V - I)(V^dag - I) / 4`, with `V -> exp(-i pi / n) V` when chiral.
pub fn field_energy_operator(n: usize, chiral: bool) -> Result<DenseOperator> {
    let mut v = clock_operator(n)?;
    if chiral {
        v = v.scale(C64::from_polar(1.0, -PI / n as f64));
    }
    let id = DMatrix::<C64>::identity(n, n);
    let a = v.matrix() - &id;
    let mut f = &a * a.adjoint() * C64::new(0.25, 0.0);
    // f is diagonal; drop the rounding noise in the imaginary part.
    for z in f.iter_mut() {
        z.im = 0.0;
    }
    DenseOperator::with_flags(f, true, false)
}

/// Relative error of the quadratic approximation `(pi k / n)^2` of `sin^2(pi k / n)`.
pub fn quadratic_approximation_error(n: usize, k: usize) -> Result<f64> {
    check_dim(n)?;
    if k == 0 || 4 * k >= n {
        return Err(Error::OutOfRange {
            what: "field index k",
            value: k as i64,
            allowed: format!("0 < k < n/4 = {}", n as f64 / 4.0),
        });
    }
    let x = PI * k as f64 / n as f64;
    let s = x.sin();
    Ok((s * s - x * x).abs() / (x * x))
}

/// Builds `sum_i c^dag_{i+1} c_i` on a ring of `n` fermionic modes, restricts it
/// to the one-particle sector (`e_j` = particle on ring site `j`) and returns
/// its max-norm distance from [`shift_operator`].
pub fn ring_hopping_equivalence(n: usize) -> Result<f64> {
    check_dim(n)?;
    if n > 64 {
        return Err(Error::OutOfRange {
            what: "ring size",
            value: n as i64,
            allowed: "2..=64".into(),
        });
    }
    let mut m = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let state: u64 = 1 << j;
        for i in 0..n {
            let to = (i + 1) % n;
            if let Some((out, sign)) = fock_hop(state, i, to) {
                let row = out.trailing_zeros() as usize;
                m[(row, j)] += C64::new(sign, 0.0);
            }
        }
    }
    let u = shift_operator(n)?;
    Ok(max_abs(&(&m - u.matrix())))
}

/// `c^dag_to c_from` on a Fock bitmask with Jordan-Wigner signs.
fn fock_hop(state: u64, from: usize, to: usize) -> Option<(u64, f64)> {
    let parity = |s: u64, site: usize| -> f64 {
        let below = s & ((1u64 << site) - 1);
        if below.count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    };
    if state & (1 << from) == 0 {
        return None;
    }
    let s1 = parity(state, from);
    let mid = state & !(1 << from);
    if mid & (1 << to) != 0 {
        return None;
    }
    let s2 = parity(mid, to);
    Some((mid | (1 << to), s1 * s2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn shift_small_cases() {
        let u2 = shift_operator(2).unwrap();
        assert_eq!(u2.get(0, 1), c(1.0, 0.0));
        assert_eq!(u2.get(1, 0), c(1.0, 0.0));
        assert_eq!(u2.get(0, 0), c(0.0, 0.0));

        let u3 = shift_operator(3).unwrap();
        for k in 0..3 {
            for r in 0..3 {
                let expect = if r == (k + 1) % 3 { 1.0 } else { 0.0 };
                assert_eq!(u3.get(r, k), c(expect, 0.0));
            }
        }
    }

    #[test]
    fn shift_power_is_exact_identity() {
        for n in 2..=16 {
            let u = shift_operator(n).unwrap();
            let un = u.pow(n as i64).unwrap();
            assert_eq!(un.distance(&DenseOperator::identity(n)), 0.0);
        }
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(shift_operator(1), Err(Error::InvalidDimension(1))));
        assert!(matches!(clock_operator(0), Err(Error::InvalidDimension(0))));
        assert!(fourier_eigenbasis(1).is_err());
    }

    #[test]
    fn clock_small_cases() {
        let v2 = clock_operator(2).unwrap();
        assert!((v2.get(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((v2.get(1, 1) - c(-1.0, 0.0)).norm() < 1e-15);
        let v4 = clock_operator(4).unwrap();
        let expect = [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        for (k, e) in expect.iter().enumerate() {
            assert!((v4.get(k, k) - e).norm() < 1e-15);
        }
        assert!(v4.is_diagonal());
    }

    #[test]
    fn clock_power_entries_close_to_one() {
        for n in 2..=16 {
            let v = clock_operator(n).unwrap();
            let vn = v.pow(n as i64).unwrap();
            for (r, cc) in (0..n).flat_map(|r| (0..n).map(move |cc| (r, cc))) {
                let expect = if r == cc { 1.0 } else { 0.0 };
                assert!((vn.get(r, cc) - c(expect, 0.0)).norm() <= ALGEBRA_TOL);
            }
        }
    }

    #[test]
    fn clock_rotates_fourier_basis_down() {
        for n in 2..=9 {
            let v = clock_operator(n).unwrap();
            let w = fourier_eigenbasis(n).unwrap();
            for k in 0..n {
                let vu = v.matrix() * w.matrix().column(k);
                let target = w.matrix().column((k + n - 1) % n);
                let err = (vu - target).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
                assert!(err < 1e-12, "n={n} k={k} err={err}");
            }
        }
    }

    #[test]
    fn fourier_two_point() {
        let w = fourier_eigenbasis(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((w.get(0, 0) - c(s, 0.0)).norm() < 1e-15);
        assert!((w.get(1, 0) - c(s, 0.0)).norm() < 1e-15);
        assert!((w.get(0, 1) - c(s, 0.0)).norm() < 1e-15);
        assert!((w.get(1, 1) - c(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fourier_columns_are_shift_eigenvectors() {
        // n = 5, k = 2: U u_2 = exp(-4 pi i / 5) u_2
        let u = shift_operator(5).unwrap();
        let w = fourier_eigenbasis(5).unwrap();
        let col = w.matrix().column(2).into_owned();
        let lhs = u.matrix() * &col;
        let rhs = &col * C64::from_polar(1.0, -4.0 * PI / 5.0);
        let res = (lhs - rhs).norm();
        assert!(res < 1e-12);
        for n in 2..=16 {
            assert!(fourier_eigenbasis(n).unwrap().unitary_residual() <= 1e-12);
        }
    }

    #[test]
    fn conjugate_bases() {
        // W^dag V W lowers the Fourier label cyclically.
        for n in 2..=12 {
            let v = clock_operator(n).unwrap();
            let w = fourier_eigenbasis(n).unwrap();
            let conj = w.adjoint().mul(&v).mul(&w);
            let lower = shift_operator(n).unwrap().adjoint();
            assert!(conj.distance(&lower) <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn weyl_relation_cases() {
        assert!(weyl_relation_residual(3, 1, 1).unwrap() <= 1e-12);
        for l in -4..8 {
            assert!(weyl_relation_residual(5, 0, l).unwrap() <= 1e-15);
        }
        for k in 0..8 {
            for l in 0..8 {
                assert!(weyl_relation_residual(8, k, l).unwrap() <= 1e-12);
            }
        }
        // negative and unreduced arguments
        assert!(weyl_relation_residual(7, -3, 11).unwrap() <= 1e-12);
    }

    #[test]
    fn field_energy_values() {
        let f4 = field_energy_operator(4, false).unwrap();
        let expect = [0.0, 0.5, 1.0, 0.5];
        for (k, e) in expect.iter().enumerate() {
            assert!((f4.get(k, k).re - e).abs() < 1e-15);
        }
        let f2 = field_energy_operator(2, false).unwrap();
        assert!(f2.get(0, 0).norm() < 1e-15);
        assert!((f2.get(1, 1).re - 1.0).abs() < 1e-15);

        let f3 = field_energy_operator(3, true).unwrap();
        let d: Vec<f64> = f3.diagonal().iter().map(|z| z.re).collect();
        assert!((d[0] - 0.25).abs() < 1e-15);
        assert!((d[2] - 0.25).abs() < 1e-15);
        assert!(d[1] > d[0]);
    }

    #[test]
    fn field_energy_matches_spectrum_helper() {
        for n in 2..=20 {
            for chiral in [false, true] {
                let f = field_energy_operator(n, chiral).unwrap();
                let s = field_energy_spectrum(n, chiral).unwrap();
                for (k, sk) in s.iter().enumerate() {
                    assert!((f.get(k, k).re - sk).abs() <= 1e-12);
                }
                assert!(f.is_diagonal());
            }
        }
    }

    #[test]
    fn quadratic_error() {
        assert!(quadratic_approximation_error(100, 1).unwrap() < 1e-3);
        let e8 = quadratic_approximation_error(8, 1).unwrap();
        assert!(e8 < 0.06 && e8 > 0.04, "{e8}");
        // small-angle limit ~ x^2 / 3
        let n = 10_000;
        let x = PI / n as f64;
        let e = quadratic_approximation_error(n, 1).unwrap();
        assert!((e / (x * x / 3.0) - 1.0).abs() < 1e-3);
        assert!(quadratic_approximation_error(8, 2).is_err());
        assert!(quadratic_approximation_error(8, 0).is_err());
    }

    #[test]
    fn ring_hopping_realizes_shift() {
        for n in [2, 3, 12, 40, 64] {
            assert!(ring_hopping_equivalence(n).unwrap() <= 1e-15, "n={n}");
        }
    }

    #[test]
    fn pretty_printer() {
        let s = format!("{}", fourier_eigenbasis(2).unwrap());
        assert_eq!(s, "0.707107+0i 0.707107+0i\n0.707107+0i -0.707107+0i\n");
        assert_eq!(fmt_sig6(1234567.0), "1.23457e6");
        assert_eq!(fmt_sig6(-0.5), "-0.5");
    }
}
