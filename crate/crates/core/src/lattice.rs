//! The composite site-and-link Hilbert space of the chain.
//!
//! A reference-basis state is a fermion occupation `n_x` per site plus a
//! field index `k` per link. States are numbered by a mixed-radix integer
//! whose digits are `(n_0, ..., n_{L-1}, k_0, ..., k_{links-1})`, `n_0`
//! least significant, sites in radix 2 followed by links in radix `n`.
//!
//! Link `j` joins site `j` and site `j + 1` (site 0 for the closing link
//! of a periodic chain). At open ends the missing link is replaced by a
//! fixed background field index.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseOperator, TripletBuilder};
use crate::weyl::{self, root_of_unity, DenseOperator};
use crate::C64;

/// Largest full Hilbert-space dimension the enumerators accept.
pub const MAX_BASIS_DIM: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Open chain with fixed background field indices beyond both ends.
    Open {
        left_background: usize,
        right_background: usize,
    },
    Periodic,
}

impl Default for Boundary {
    fn default() -> Self {
        Boundary::Open {
            left_background: 0,
            right_background: 0,
        }
    }
}

/// What sits on one side of a site: a dynamical link or a fixed background.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkRef {
    Link(usize),
    Background(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    sites: usize,
    n: usize,
    boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(sites: usize, n: usize, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        if sites == 0 || sites > 62 {
            return Err(Error::OutOfRange {
                what: "site count",
                value: sites as i64,
                allowed: "1..=62".into(),
            });
        }
        match boundary {
            Boundary::Open {
                left_background,
                right_background,
            } => {
                for b in [left_background, right_background] {
                    if b >= n {
                        return Err(Error::OutOfRange {
                            what: "background field index",
                            value: b as i64,
                            allowed: format!("0..{n}"),
                        });
                    }
                }
            }
            Boundary::Periodic => {
                if sites < 2 {
                    return Err(Error::OutOfRange {
                        what: "periodic site count",
                        value: sites as i64,
                        allowed: ">= 2".into(),
                    });
                }
            }
        }
        let spec = LatticeSpec { sites, n, boundary };
        spec.full_dim_checked()?;
        Ok(spec)
    }

    /// Open chain with zero backgrounds.
    pub fn open(sites: usize, n: usize) -> Result<Self> {
        Self::new(sites, n, Boundary::default())
    }

    pub fn periodic(sites: usize, n: usize) -> Result<Self> {
        Self::new(sites, n, Boundary::Periodic)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic)
    }

    pub fn num_links(&self) -> usize {
        match self.boundary {
            Boundary::Open { .. } => self.sites - 1,
            Boundary::Periodic => self.sites,
        }
    }

    fn full_dim_checked(&self) -> Result<usize> {
        let mut dim: usize = 1 << self.sites;
        for _ in 0..self.num_links() {
            dim = dim
                .checked_mul(self.n)
                .filter(|d| *d <= MAX_BASIS_DIM)
                .ok_or_else(|| Error::OutOfRange {
                    what: "Hilbert space dimension",
                    value: i64::MAX,
                    allowed: format!("<= {MAX_BASIS_DIM}"),
                })?;
        }
        Ok(dim)
    }

    /// `2^L * n^links`.
    pub fn full_dim(&self) -> usize {
        self.full_dim_checked().expect("validated at construction")
    }

    /// `true` for odd sites, where the staggering sign `(-1)^x` is negative.
    pub fn is_odd(x: usize) -> bool {
        x % 2 == 1
    }

    /// `(-1)^x`.
    pub fn staggering(x: usize) -> f64 {
        if Self::is_odd(x) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn left_of(&self, x: usize) -> LinkRef {
        match self.boundary {
            Boundary::Open {
                left_background, ..
            } => {
                if x == 0 {
                    LinkRef::Background(left_background)
                } else {
                    LinkRef::Link(x - 1)
                }
            }
            Boundary::Periodic => LinkRef::Link((x + self.sites - 1) % self.sites),
        }
    }

    pub fn right_of(&self, x: usize) -> LinkRef {
        match self.boundary {
            Boundary::Open {
                right_background, ..
            } => {
                if x + 1 == self.sites {
                    LinkRef::Background(right_background)
                } else {
                    LinkRef::Link(x)
                }
            }
            Boundary::Periodic => LinkRef::Link(x),
        }
    }

    /// Nearest-neighbour bonds `(x, y, link)`; the link joins `x` to `y`.
    pub fn bonds(&self) -> Vec<(usize, usize, usize)> {
        (0..self.num_links())
            .map(|j| (j, (j + 1) % self.sites, j))
            .collect()
    }

    fn link_stride(&self, link: usize) -> usize {
        (1usize << self.sites) * self.n.pow(link as u32)
    }

    /// Occupation bits of a state index, site 0 in bit 0.
    pub fn occupation_bits(&self, idx: usize) -> u64 {
        (idx & ((1usize << self.sites) - 1)) as u64
    }

    pub fn occupation(&self, idx: usize, x: usize) -> bool {
        (idx >> x) & 1 == 1
    }

    pub fn link_value(&self, idx: usize, link: usize) -> usize {
        (idx / self.link_stride(link)) % self.n
    }

    /// Index with one link digit replaced.
    pub fn with_link_value(&self, idx: usize, link: usize, k: usize) -> usize {
        let stride = self.link_stride(link);
        let old = (idx / stride) % self.n;
        idx - old * stride + (k % self.n) * stride
    }

    /// Field index on a link reference, background values included.
    pub fn field_at(&self, idx: usize, r: LinkRef) -> usize {
        match r {
            LinkRef::Link(j) => self.link_value(idx, j),
            LinkRef::Background(b) => b,
        }
    }

    /// Exponent `e` of the Gauss-operator eigenvalue `exp(2 pi i e / n)` of a
    /// reference-basis state at site `x`:
    /// `e = n_x - [x odd] - k_right + k_left (mod n)`.
    pub fn gauss_exponent(&self, idx: usize, x: usize) -> usize {
        let n = self.n as i64;
        let occ = self.occupation(idx, x) as i64;
        let odd = Self::is_odd(x) as i64;
        let kr = self.field_at(idx, self.right_of(x)) as i64;
        let kl = self.field_at(idx, self.left_of(x)) as i64;
        (occ - odd - kr + kl).rem_euclid(n) as usize
    }

    /// `c^dag_to c_from` on a reference-basis index with Jordan-Wigner signs
    /// taken over site factors only.
    pub fn hop(&self, idx: usize, from: usize, to: usize) -> Option<(usize, f64)> {
        if !self.occupation(idx, from) {
            return None;
        }
        let s1 = jw_sign(idx, from);
        let mid = idx & !(1usize << from);
        if (mid >> to) & 1 == 1 {
            return None;
        }
        let s2 = jw_sign(mid, to);
        Some((mid | (1usize << to), s1 * s2))
    }

    pub fn check_site(&self, x: usize) -> Result<()> {
        if x >= self.sites {
            Err(Error::OutOfRange {
                what: "site",
                value: x as i64,
                allowed: format!("0..{}", self.sites),
            })
        } else {
            Ok(())
        }
    }

    pub fn check_link(&self, j: usize) -> Result<()> {
        if j >= self.num_links() {
            Err(Error::OutOfRange {
                what: "link",
                value: j as i64,
                allowed: format!("0..{}", self.num_links()),
            })
        } else {
            Ok(())
        }
    }
}

/// `(-1)^(number of occupied sites below x)`.
fn jw_sign(idx: usize, x: usize) -> f64 {
    let below = idx & ((1usize << x) - 1);
    if below.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisState {
    pub occupations: Vec<bool>,
    pub links: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateIndex(pub usize);

impl From<StateIndex> for usize {
    fn from(s: StateIndex) -> usize {
        s.0
    }
}

pub fn encode(state: &BasisState, spec: &LatticeSpec) -> Result<StateIndex> {
    if state.occupations.len() != spec.sites() {
        return Err(Error::Encoding(format!(
            "{} occupations for {} sites",
            state.occupations.len(),
            spec.sites()
        )));
    }
    if state.links.len() != spec.num_links() {
        return Err(Error::Encoding(format!(
            "{} link digits for {} links",
            state.links.len(),
            spec.num_links()
        )));
    }
    let mut idx = 0usize;
    for (j, &k) in state.links.iter().enumerate().rev() {
        if k >= spec.n() {
            return Err(Error::Encoding(format!(
                "link {j} index {k} not below n = {}",
                spec.n()
            )));
        }
        idx = idx * spec.n() + k;
    }
    idx <<= spec.sites();
    for (x, &occ) in state.occupations.iter().enumerate() {
        if occ {
            idx |= 1 << x;
        }
    }
    Ok(StateIndex(idx))
}

pub fn decode(idx: StateIndex, spec: &LatticeSpec) -> Result<BasisState> {
    if idx.0 >= spec.full_dim() {
        return Err(Error::Encoding(format!(
            "index {} not below dimension {}",
            idx.0,
            spec.full_dim()
        )));
    }
    Ok(BasisState {
        occupations: (0..spec.sites())
            .map(|x| spec.occupation(idx.0, x))
            .collect(),
        links: (0..spec.num_links())
            .map(|j| spec.link_value(idx.0, j))
            .collect(),
    })
}

/// Annihilation operator `psi_x` on the full space.
pub fn fermion_annihilation(x: usize, spec: &LatticeSpec) -> Result<SparseOperator> {
    spec.check_site(x)?;
    let dim = spec.full_dim();
    let mut b = TripletBuilder::with_capacity(dim, dim / 2);
    for idx in 0..dim {
        if spec.occupation(idx, x) {
            b.push_real(idx & !(1 << x), idx, jw_sign(idx, x));
        }
    }
    b.finalize(false)
}

/// Number operator `psi_x^dag psi_x`, read off the occupation digit.
pub fn number_operator(x: usize, spec: &LatticeSpec) -> Result<SparseOperator> {
    spec.check_site(x)?;
    let diag: Vec<f64> = (0..spec.full_dim())
        .map(|idx| spec.occupation(idx, x) as u8 as f64)
        .collect();
    Ok(SparseOperator::from_real_diagonal(&diag))
}

/// Embeds a single-link operator on `link`, identity elsewhere.
pub fn link_operator_embed(
    link: usize,
    op: &DenseOperator,
    spec: &LatticeSpec,
) -> Result<SparseOperator> {
    spec.check_link(link)?;
    if op.dim() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: op.dim(),
        });
    }
    let n = spec.n();
    let dim = spec.full_dim();
    let mut b = TripletBuilder::with_capacity(dim, dim);
    for idx in 0..dim {
        let k = spec.link_value(idx, link);
        for row in 0..n {
            let v = op.get(row, k);
            if v != C64::new(0.0, 0.0) {
                b.push(spec.with_link_value(idx, link, row), idx, v);
            }
        }
    }
    let out = b.finalize(false)?;
    if op.is_hermitian() {
        out.into_hermitian()
    } else {
        Ok(out)
    }
}

/// Gauss operator `T_x = exp(2 pi i (n_x + ((-1)^x - 1)/2) / n) V_{x,x+1} V^dag_{x-1,x}`
/// assembled from the embedded clock operators; a missing link at an open
/// end contributes the background eigenvalue `exp(-2 pi i b / n)`.
pub fn gauss_operator(x: usize, spec: &LatticeSpec) -> Result<SparseOperator> {
    spec.check_site(x)?;
    let n = spec.n();
    let dim = spec.full_dim();
    let odd = LatticeSpec::is_odd(x) as i64;
    let charge: Vec<C64> = (0..dim)
        .map(|idx| root_of_unity(spec.occupation(idx, x) as i64 - odd, n))
        .collect();
    let mut t = SparseOperator::from_diagonal(&charge);
    let v = weyl::clock_operator(n)?;
    let clock_on = |r: LinkRef, dagger: bool| -> Result<SparseOperator> {
        match r {
            LinkRef::Link(j) => {
                let m = if dagger { v.adjoint() } else { v.clone() };
                link_operator_embed(j, &m, spec)
            }
            LinkRef::Background(bg) => {
                let phase = root_of_unity(-(bg as i64), n);
                let phase = if dagger { phase.conj() } else { phase };
                Ok(SparseOperator::identity(dim).scale(phase))
            }
        }
    };
    t = t.matmul(&clock_on(spec.right_of(x), false)?)?;
    t = t.matmul(&clock_on(spec.left_of(x), true)?)?;
    Ok(t)
}

/// Reference-basis states obeying Gauss's law at every site, by direct
/// evaluation of the diagonal eigenvalues.
pub fn physical_filter(spec: &LatticeSpec) -> Vec<StateIndex> {
    let zeros = vec![0; spec.sites()];
    filter_by_charges(&zeros, spec)
}

/// States whose Gauss eigenvalue at site `x` is `exp(2 pi i q_x / n)`.
pub fn sector_filter(charges: &[i64], spec: &LatticeSpec) -> Result<Vec<StateIndex>> {
    if charges.len() != spec.sites() {
        return Err(Error::DimensionMismatch {
            expected: spec.sites(),
            got: charges.len(),
        });
    }
    let q: Vec<usize> = charges
        .iter()
        .map(|&c| c.rem_euclid(spec.n() as i64) as usize)
        .collect();
    Ok(filter_by_charges(&q, spec))
}

fn filter_by_charges(q: &[usize], spec: &LatticeSpec) -> Vec<StateIndex> {
    (0..spec.full_dim())
        .into_par_iter()
        .filter(|&idx| (0..spec.sites()).all(|x| spec.gauss_exponent(idx, x) == q[x]))
        .map(StateIndex)
        .collect()
}

/// Odd sites filled, even sites empty, every link at `k0`.
pub fn dirac_sea_state(spec: &LatticeSpec, k0: usize) -> Result<BasisState> {
    if k0 >= spec.n() {
        return Err(Error::OutOfRange {
            what: "field index k0",
            value: k0 as i64,
            allowed: format!("0..{}", spec.n()),
        });
    }
    Ok(BasisState {
        occupations: (0..spec.sites()).map(LatticeSpec::is_odd).collect(),
        links: vec![k0; spec.num_links()],
    })
}

/// Dirac sea with the fermion of odd site `x_odd` moved to even site
/// `x_even`, the links between them shifted by one clock step so that the
/// state stays physical: raised when `x_even < x_odd`, lowered otherwise.
pub fn string_state(spec: &LatticeSpec, x_even: usize, x_odd: usize) -> Result<BasisState> {
    spec.check_site(x_even)?;
    spec.check_site(x_odd)?;
    if LatticeSpec::is_odd(x_even) || !LatticeSpec::is_odd(x_odd) {
        return Err(Error::InvalidParameter(format!(
            "string endpoints need an even and an odd site, got ({x_even}, {x_odd})"
        )));
    }
    let Boundary::Open {
        left_background,
        right_background,
    } = spec.boundary()
    else {
        return Err(Error::InvalidParameter(
            "string states are defined on open chains".into(),
        ));
    };
    if left_background != right_background {
        return Err(Error::InvalidParameter(
            "string states need equal backgrounds at both ends".into(),
        ));
    }
    let n = spec.n();
    let mut s = dirac_sea_state(spec, left_background)?;
    s.occupations[x_odd] = false;
    s.occupations[x_even] = true;
    if x_even < x_odd {
        for k in &mut s.links[x_even..x_odd] {
            *k = (*k + 1) % n;
        }
    } else {
        for k in &mut s.links[x_odd..x_even] {
            *k = (*k + n - 1) % n;
        }
    }
    Ok(s)
}

/// Whether a reference-basis state satisfies Gauss's law everywhere.
pub fn is_physical(idx: StateIndex, spec: &LatticeSpec) -> bool {
    (0..spec.sites()).all(|x| spec.gauss_exponent(idx.0, x) == 0)
}

/// One line per state: `idx,occ_bits,link_digits`, site 0 leftmost, link
/// digits concatenated for `n <= 10` and dot-separated otherwise.
pub fn basis_dump(indices: &[StateIndex], spec: &LatticeSpec) -> String {
    let mut s = String::new();
    for &StateIndex(idx) in indices {
        let occ: String = (0..spec.sites())
            .map(|x| if spec.occupation(idx, x) { '1' } else { '0' })
            .collect();
        let digits: Vec<String> = (0..spec.num_links())
            .map(|j| spec.link_value(idx, j).to_string())
            .collect();
        let sep = if spec.n() <= 10 { "" } else { "." };
        let _ = writeln!(s, "{},{},{}", idx, occ, digits.join(sep));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(l: usize, n: usize) -> LatticeSpec {
        LatticeSpec::open(l, n).unwrap()
    }

    #[test]
    fn encoding_examples() {
        let spec = open(2, 3);
        let zero = BasisState {
            occupations: vec![false, false],
            links: vec![0],
        };
        assert_eq!(encode(&zero, &spec).unwrap(), StateIndex(0));
        let one = BasisState {
            occupations: vec![true, false],
            links: vec![0],
        };
        assert_eq!(encode(&one, &spec).unwrap(), StateIndex(1));
        let bad = BasisState {
            occupations: vec![true, false],
            links: vec![3],
        };
        assert!(matches!(encode(&bad, &spec), Err(Error::Encoding(_))));
        assert!(decode(StateIndex(12), &spec).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        let spec = open(4, 3);
        assert_eq!(spec.full_dim(), 432);
        for idx in 0..432 {
            let s = decode(StateIndex(idx), &spec).unwrap();
            assert_eq!(encode(&s, &spec).unwrap(), StateIndex(idx));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(LatticeSpec::open(3, 1).is_err());
        assert!(LatticeSpec::periodic(1, 3).is_err());
        assert!(LatticeSpec::new(
            3,
            3,
            Boundary::Open {
                left_background: 3,
                right_background: 0
            }
        )
        .is_err());
        assert_eq!(open(4, 3).num_links(), 3);
        assert_eq!(LatticeSpec::periodic(4, 3).unwrap().num_links(), 4);
    }

    #[test]
    fn single_site_annihilation() {
        let spec = open(1, 3);
        let psi = fermion_annihilation(0, &spec).unwrap();
        assert_eq!(psi.dim(), 2);
        assert_eq!(psi.nnz(), 1);
        assert_eq!(psi.get(0, 1), C64::new(1.0, 0.0));
    }

    #[test]
    fn number_operator_reads_occupation() {
        let spec = open(3, 2);
        for x in 0..3 {
            let psi = fermion_annihilation(x, &spec).unwrap();
            let num = psi.adjoint().matmul(&psi).unwrap();
            assert!(num.is_diagonal());
            for idx in 0..spec.full_dim() {
                let s = decode(StateIndex(idx), &spec).unwrap();
                let expect = if s.occupations[x] { 1.0 } else { 0.0 };
                assert_eq!(num.get(idx, idx).re, expect);
            }
            assert_eq!(
                num.distance(&number_operator(x, &spec).unwrap()).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn canonical_anticommutation() {
        for spec in [open(3, 2), open(2, 3), LatticeSpec::periodic(3, 2).unwrap()] {
            let dim = spec.full_dim();
            let id = SparseOperator::identity(dim);
            let psis: Vec<_> = (0..spec.sites())
                .map(|x| fermion_annihilation(x, &spec).unwrap())
                .collect();
            for x in 0..spec.sites() {
                for y in 0..spec.sites() {
                    let ac = psis[x].anticommutator(&psis[y].adjoint()).unwrap();
                    let target = if x == y {
                        id.clone()
                    } else {
                        SparseOperator::zeros(dim)
                    };
                    assert!(ac.distance(&target).unwrap() <= 1e-12);
                    let aa = psis[x].anticommutator(&psis[y]).unwrap();
                    assert!(aa.max_norm() <= 1e-12);
                }
            }
        }
        // the number operator of one site does not anticommute with psi_1
        let spec = open(3, 2);
        let p0 = fermion_annihilation(0, &spec).unwrap();
        let p1 = fermion_annihilation(1, &spec).unwrap();
        let n0 = p0.adjoint().matmul(&p0).unwrap();
        assert!(n0.anticommutator(&p1).unwrap().max_norm() > 0.5);
    }

    #[test]
    fn link_embedding() {
        let spec = open(3, 3);
        let dim = spec.full_dim();
        let id = link_operator_embed(1, &DenseOperator::identity(3), &spec).unwrap();
        assert_eq!(id, SparseOperator::identity(dim).into_hermitian().unwrap());
        let u = weyl::shift_operator(3).unwrap();
        let v = weyl::clock_operator(3).unwrap();
        let u0 = link_operator_embed(0, &u, &spec).unwrap();
        let v1 = link_operator_embed(1, &v, &spec).unwrap();
        assert!(u0.commutator(&v1).unwrap().max_norm() <= 1e-12);
        let uu = u0.adjoint().matmul(&u0).unwrap();
        assert!(uu.distance(&SparseOperator::identity(dim)).unwrap() <= 1e-12);
        let nx = number_operator(2, &spec).unwrap();
        assert!(u0.commutator(&nx).unwrap().max_norm() <= 1e-12);
        assert!(matches!(
            link_operator_embed(0, &weyl::shift_operator(4).unwrap(), &spec),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(link_operator_embed(2, &u, &spec).is_err());
    }

    #[test]
    fn gauss_operator_properties() {
        let spec = open(3, 3);
        let dim = spec.full_dim();
        for x in 0..3 {
            let t = gauss_operator(x, &spec).unwrap();
            assert!(t.is_diagonal());
            let tt = t.adjoint().matmul(&t).unwrap();
            assert!(tt.distance(&SparseOperator::identity(dim)).unwrap() <= 1e-12);
            let mut p = SparseOperator::identity(dim);
            for _ in 0..3 {
                p = p.matmul(&t).unwrap();
            }
            assert!(p.distance(&SparseOperator::identity(dim)).unwrap() <= 1e-12);
            // diagonal entries are single cube roots of unity matching the exponent
            for idx in 0..dim {
                let e = spec.gauss_exponent(idx, x);
                assert!((t.get(idx, idx) - root_of_unity(e as i64, 3)).norm() <= 1e-12);
            }
        }
        let sea = encode(&dirac_sea_state(&spec, 0).unwrap(), &spec).unwrap();
        for x in 0..3 {
            let t = gauss_operator(x, &spec).unwrap();
            assert!((t.get(sea.0, sea.0) - C64::new(1.0, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn gauss_operators_commute() {
        let spec = LatticeSpec::periodic(3, 3).unwrap();
        let ts: Vec<_> = (0..3).map(|x| gauss_operator(x, &spec).unwrap()).collect();
        for a in &ts {
            for b in &ts {
                assert!(a.commutator(b).unwrap().max_norm() <= 1e-12);
            }
        }
    }

    /// Independent brute-force Gauss check written straight from the
    /// eigenvalue condition on decoded states.
    fn brute_physical(spec: &LatticeSpec, charges: &[i64]) -> Vec<StateIndex> {
        let n = spec.n() as i64;
        let (bl, br) = match spec.boundary() {
            Boundary::Open {
                left_background,
                right_background,
            } => (left_background as i64, right_background as i64),
            Boundary::Periodic => (0, 0),
        };
        let mut out = Vec::new();
        for idx in 0..spec.full_dim() {
            let s = decode(StateIndex(idx), spec).unwrap();
            let l = spec.sites();
            let ok = (0..l).all(|x| {
                let stag = if x % 2 == 0 { 0 } else { -1 };
                let right = if spec.is_periodic() || x + 1 < l {
                    s.links[x] as i64
                } else {
                    br
                };
                let left = if spec.is_periodic() {
                    s.links[(x + l - 1) % l] as i64
                } else if x > 0 {
                    s.links[x - 1] as i64
                } else {
                    bl
                };
                (s.occupations[x] as i64 + stag - right + left - charges[x]).rem_euclid(n) == 0
            });
            if ok {
                out.push(StateIndex(idx));
            }
        }
        out
    }

    #[test]
    fn physical_filter_small_open() {
        let spec = open(2, 3);
        let phys = physical_filter(&spec);
        assert_eq!(phys.len(), 2);
        let states: Vec<_> = phys.iter().map(|&i| decode(i, &spec).unwrap()).collect();
        assert!(states.contains(&BasisState {
            occupations: vec![false, true],
            links: vec![0]
        }));
        assert!(states.contains(&BasisState {
            occupations: vec![true, false],
            links: vec![1]
        }));
        assert_eq!(phys, brute_physical(&spec, &[0, 0]));
    }

    #[test]
    fn physical_filter_matches_brute_force() {
        let specs = [
            open(3, 3),
            open(4, 2),
            LatticeSpec::new(
                3,
                4,
                Boundary::Open {
                    left_background: 1,
                    right_background: 3,
                },
            )
            .unwrap(),
            LatticeSpec::periodic(4, 3).unwrap(),
            LatticeSpec::periodic(3, 2).unwrap(),
        ];
        for spec in specs {
            let zeros = vec![0; spec.sites()];
            assert_eq!(physical_filter(&spec), brute_physical(&spec, &zeros));
        }
    }

    #[test]
    fn filter_matches_gauss_operator_diagonals() {
        let spec = open(3, 3);
        let ts: Vec<_> = (0..3).map(|x| gauss_operator(x, &spec).unwrap()).collect();
        let from_ops: Vec<StateIndex> = (0..spec.full_dim())
            .filter(|&i| {
                ts.iter()
                    .all(|t| (t.get(i, i) - C64::new(1.0, 0.0)).norm() <= 1e-12)
            })
            .map(StateIndex)
            .collect();
        assert_eq!(from_ops, physical_filter(&spec));
    }

    #[test]
    fn periodic_charge_rule() {
        // L even: sector nonempty only if N = L/2 (mod n)
        let spec = LatticeSpec::periodic(4, 3).unwrap();
        let phys = physical_filter(&spec);
        assert!(!phys.is_empty());
        for &i in &phys {
            let nf = spec.occupation_bits(i.0).count_ones() as i64;
            assert_eq!((nf - 2).rem_euclid(3), 0);
        }
        // product of all T_x is exp(2 pi i (N - L/2) / n) on each basis state
        let dim = spec.full_dim();
        let mut prod = SparseOperator::identity(dim);
        for x in 0..4 {
            prod = prod.matmul(&gauss_operator(x, &spec).unwrap()).unwrap();
        }
        for idx in 0..dim {
            let nf = spec.occupation_bits(idx).count_ones() as i64;
            assert!((prod.get(idx, idx) - root_of_unity(nf - 2, 3)).norm() <= 1e-12);
        }
        // total charge 3 would need N = 5 > L fermions
        let spec7 = LatticeSpec::periodic(4, 7).unwrap();
        assert!(sector_filter(&[1, 1, 1, 0], &spec7).unwrap().is_empty());
        assert!(!physical_filter(&spec7).is_empty());
    }

    #[test]
    fn sectors_partition_the_basis() {
        let spec = open(2, 2);
        let mut seen = vec![0u32; spec.full_dim()];
        for q0 in 0..2 {
            for q1 in 0..2 {
                for i in sector_filter(&[q0, q1], &spec).unwrap() {
                    seen[i.0] += 1;
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(
            sector_filter(&[0, 0], &spec).unwrap(),
            physical_filter(&spec)
        );
        assert!(sector_filter(&[0], &spec).is_err());
    }

    #[test]
    fn unit_charge_shifts_flux_jump() {
        let spec = open(3, 3);
        let charged = sector_filter(&[0, 0, 1], &spec).unwrap();
        assert_eq!(charged, brute_physical(&spec, &[0, 0, 1]));
        for &i in &charged {
            let s = decode(i, &spec).unwrap();
            // even site 2: k_right(background 0) - k_left = n_2 - 1 (mod 3)
            let jump = (0i64 - s.links[1] as i64).rem_euclid(3);
            assert_eq!(jump, (s.occupations[2] as i64 - 1).rem_euclid(3));
        }
    }

    #[test]
    fn dirac_sea_examples() {
        let spec = open(4, 3);
        let s = dirac_sea_state(&spec, 0).unwrap();
        assert_eq!(s.occupations, vec![false, true, false, true]);
        assert_eq!(s.links, vec![0, 0, 0]);
        assert!(physical_filter(&spec).contains(&encode(&s, &spec).unwrap()));
        let s1 = dirac_sea_state(&spec, 1).unwrap();
        let i1 = encode(&s1, &spec).unwrap();
        assert!(!is_physical(i1, &spec));
        assert_ne!(spec.gauss_exponent(i1.0, 0), 0);
        assert!(dirac_sea_state(&spec, 3).is_err());
    }

    #[test]
    fn string_state_examples() {
        let spec = open(4, 3);
        let s = string_state(&spec, 0, 1).unwrap();
        assert_eq!(s.occupations, vec![true, false, false, true]);
        assert_eq!(s.links, vec![1, 0, 0]);
        assert!(is_physical(encode(&s, &spec).unwrap(), &spec));

        let whole = string_state(&spec, 0, 3).unwrap();
        assert_eq!(whole.links, vec![1, 1, 1]);
        assert!(is_physical(encode(&whole, &spec).unwrap(), &spec));

        let mirrored = string_state(&spec, 2, 1).unwrap();
        assert!(is_physical(encode(&mirrored, &spec).unwrap(), &spec));

        let mut broken = whole.clone();
        broken.links[1] = 0;
        let bi = encode(&broken, &spec).unwrap();
        assert!(!is_physical(bi, &spec));
        let violated: Vec<usize> = (0..4)
            .filter(|&x| spec.gauss_exponent(bi.0, x) != 0)
            .collect();
        assert_eq!(violated, vec![1, 2]);

        assert!(string_state(&spec, 1, 2).is_err());
        assert!(string_state(&LatticeSpec::periodic(4, 3).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn dump_format() {
        let spec = open(2, 3);
        let d = basis_dump(&physical_filter(&spec), &spec);
        assert_eq!(d, "2,01,0\n5,10,1\n");
        let big = open(2, 11);
        let s = BasisState {
            occupations: vec![true, false],
            links: vec![10],
        };
        let i = encode(&s, &big).unwrap();
        assert_eq!(basis_dump(&[i], &big), format!("{},10,10\n", i.0));
        let big3 = open(3, 11);
        let s3 = BasisState {
            occupations: vec![false, false, true],
            links: vec![10, 3],
        };
        let i3 = encode(&s3, &big3).unwrap();
        assert_eq!(basis_dump(&[i3], &big3), format!("{},001,10.3\n", i3.0));
    }
}
