//! Second-order effective Hamiltonian on the physical sector.
//!
//! With `P` the projector on the kernel of `Gamma` and `Q = 1 - P`,
//!
//! ```text
//! H_eff = P H0 P - P H0 Q (u Gamma / gamma_n)^+ Q H0 P
//! ```
//!
//! where `^+` is the pseudo-inverse. `Gamma` is diagonal in the reference
//! basis, so the resolvent is an entrywise reciprocal and the result is
//! exact. Every off-sector image `Q H0 P v` lies in the `2 gamma_n`
//! eigenspace of `Gamma`, which reduces the second term to
//! `(2u)^-1 P H0 Q H0 P`; [`coupling_support_check`] measures that property.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonians::{
    self, gamma_gap, CountertermMode, DensityForm, ModelParams, PenaltyParams,
};
use crate::lattice::{self, Boundary, LatticeSpec, StateIndex};
use crate::sparse::{SparseOperator, TripletBuilder};
use crate::C64;

/// Projector onto a set of reference-basis states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorProjector {
    indices: Vec<usize>,
    position: Vec<Option<usize>>,
}

impl SectorProjector {
    /// `indices` must be strictly increasing and below `dim_full`.
    pub fn new(indices: Vec<usize>, dim_full: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "sector indices must be strictly increasing".into(),
            ));
        }
        let mut position = vec![None; dim_full];
        for (i, &idx) in indices.iter().enumerate() {
            if idx >= dim_full {
                return Err(Error::OutOfRange {
                    what: "sector index",
                    value: idx as i64,
                    allowed: format!("< {dim_full}"),
                });
            }
            position[idx] = Some(i);
        }
        Ok(SectorProjector { indices, position })
    }

    pub fn from_states(states: &[StateIndex], dim_full: usize) -> Result<Self> {
        Self::new(states.iter().map(|s| s.0).collect(), dim_full)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim_full(&self) -> usize {
        self.position.len()
    }

    pub fn dim_sector(&self) -> usize {
        self.indices.len()
    }

    /// An empty sector is a valid outcome, e.g. for incompatible charges on
    /// a periodic chain.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.position.get(idx).is_some_and(|p| p.is_some())
    }

    /// Sector coordinate of a full-space index.
    pub fn position(&self, idx: usize) -> Option<usize> {
        self.position.get(idx).copied().flatten()
    }

    /// `P` as a diagonal 0/1 operator on the full space.
    pub fn operator(&self) -> SparseOperator {
        let diag: Vec<f64> = (0..self.dim_full())
            .map(|i| if self.contains(i) { 1.0 } else { 0.0 })
            .collect();
        SparseOperator::from_real_diagonal(&diag)
    }

    /// `Q = 1 - P`.
    pub fn complement(&self) -> SparseOperator {
        let diag: Vec<f64> = (0..self.dim_full())
            .map(|i| if self.contains(i) { 0.0 } else { 1.0 })
            .collect();
        SparseOperator::from_real_diagonal(&diag)
    }

    /// `P psi` for a full-space vector.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        psi.iter()
            .enumerate()
            .map(|(i, &z)| {
                if self.contains(i) {
                    z
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    /// Sector components of a full-space vector.
    pub fn restrict_vector(&self, psi: &[C64]) -> Vec<C64> {
        self.indices.iter().map(|&i| psi[i]).collect()
    }

    /// Full-space vector from sector components.
    pub fn embed_vector(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim_full()];
        for (&i, &z) in self.indices.iter().zip(v) {
            out[i] = z;
        }
        out
    }
}

/// Projector onto the Gauss-law sector.
pub fn physical_projector(spec: &LatticeSpec) -> SectorProjector {
    SectorProjector::from_states(&lattice::physical_filter(spec), spec.full_dim())
        .expect("filter output is sorted")
}

fn check_dims(h0: &SparseOperator, gamma: &SparseOperator, proj: &SectorProjector) -> Result<()> {
    for d in [gamma.dim(), proj.dim_full()] {
        if d != h0.dim() {
            return Err(Error::DimensionMismatch {
                expected: h0.dim(),
                got: d,
            });
        }
    }
    Ok(())
}

/// `Q H0 P` grouped by off-sector row: `row -> [(sector column, value)]`.
fn off_sector_couplings(
    h0: &SparseOperator,
    proj: &SectorProjector,
) -> BTreeMap<usize, Vec<(usize, C64)>> {
    let cols = h0.adjoint();
    let mut out: BTreeMap<usize, Vec<(usize, C64)>> = BTreeMap::new();
    for (j, &p) in proj.indices().iter().enumerate() {
        // row p of H0^dag holds conj(H0[r, p])
        for (r, v) in cols.row(p) {
            if !proj.contains(r) {
                out.entry(r).or_default().push((j, v.conj()));
            }
        }
    }
    out
}

/// `P H0 P - P H0 Q (u Gamma / gamma_n)^+ Q H0 P` on the sector basis.
pub fn second_order_effective(
    h0: &SparseOperator,
    gamma: &SparseOperator,
    pp: &PenaltyParams,
    n: usize,
    proj: &SectorProjector,
) -> Result<SparseOperator> {
    if pp.u.is_nan() || pp.u <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "penalty u must be > 0 (got {})",
            pp.u
        )));
    }
    check_dims(h0, gamma, proj)?;
    let scale = pp.u / gamma_gap(n);
    let mut b = TripletBuilder::new(proj.dim_sector());
    for (r, c, v) in h0.restrict(proj.indices())?.triplets() {
        b.push(r, c, v);
    }
    for (r, entries) in off_sector_couplings(h0, proj) {
        let g = gamma.get(r, r).re;
        if g == 0.0 {
            continue;
        }
        let inv = 1.0 / (scale * g);
        for &(i, a) in &entries {
            for &(j, bv) in &entries {
                b.push(i, j, -(a.conj() * bv) * inv);
            }
        }
    }
    b.finalize(true)
}

/// `P H0 P - (2u)^-1 P H0 Q H0 P` on the sector basis.
pub fn simplified_effective(
    h0: &SparseOperator,
    pp: &PenaltyParams,
    proj: &SectorProjector,
) -> Result<SparseOperator> {
    if pp.u.is_nan() || pp.u <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "penalty u must be > 0 (got {})",
            pp.u
        )));
    }
    if proj.dim_full() != h0.dim() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            got: proj.dim_full(),
        });
    }
    let inv = 1.0 / (2.0 * pp.u);
    let mut b = TripletBuilder::new(proj.dim_sector());
    for (r, c, v) in h0.restrict(proj.indices())?.triplets() {
        b.push(r, c, v);
    }
    for entries in off_sector_couplings(h0, proj).values() {
        for &(i, a) in entries {
            for &(j, bv) in entries {
                b.push(i, j, -(a.conj() * bv) * inv);
            }
        }
    }
    b.finalize(true)
}

/// Largest relative residual `|(Gamma - 2 gamma_n) w| / (2 gamma_n |w|)` over
/// the images `w = Q H0 P e_p` of the sector basis vectors. Zero images are
/// skipped.
pub fn coupling_support_check(
    h0: &SparseOperator,
    gamma: &SparseOperator,
    proj: &SectorProjector,
    n: usize,
) -> Result<f64> {
    check_dims(h0, gamma, proj)?;
    let target = 2.0 * gamma_gap(n);
    let mut per_col: Vec<(f64, f64)> = vec![(0.0, 0.0); proj.dim_sector()];
    for (r, entries) in off_sector_couplings(h0, proj) {
        let g = gamma.get(r, r).re;
        for (j, v) in entries {
            let w2 = v.norm_sqr();
            per_col[j].0 += w2;
            per_col[j].1 += (g - target).powi(2) * w2;
        }
    }
    Ok(per_col
        .into_iter()
        .filter(|(w2, _)| *w2 > 0.0)
        .map(|(w2, r2)| r2.sqrt() / (target * w2.sqrt()))
        .fold(0.0, f64::max))
}

/// Max-norm of `(a - b) - c I` with `c = tr(a - b) / dim`, i.e. the
/// discrepancy after removing the best constant offset.
pub fn compare_effective(a: &SparseOperator, b: &SparseOperator) -> Result<f64> {
    let d = a.sub(b)?;
    if d.dim() == 0 {
        return Ok(0.0);
    }
    let c = d.trace() / d.dim() as f64;
    let shifted = d.sub(&SparseOperator::identity(d.dim()).scale(c))?;
    Ok(shifted.max_norm())
}

/// One point of the certification grid.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationRecord {
    pub sites: usize,
    pub n: usize,
    pub t_tilde: f64,
    pub w_tilde: f64,
    pub u: f64,
    pub dim_sector: usize,
    /// Projected second-order operator vs the closed-form target, after
    /// constant-offset removal.
    pub residual: f64,
    /// Same comparison against the published density term.
    pub residual_published: f64,
    /// Full resolvent form vs the `(2u)^-1` form, no offset removed.
    pub simplification_residual: f64,
    /// Auto counterterms: second-order operator vs the target with no
    /// density term.
    pub cancellation_residual: f64,
    pub support_residual: f64,
}

/// Grid parameters for [`certify_grid`].
#[derive(Clone, Debug)]
pub struct CertificationGrid {
    pub sites: Vec<usize>,
    pub n_values: Vec<usize>,
    pub t_tilde: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub u: Vec<f64>,
    pub boundary: Boundary,
    pub model: ModelParams,
}

/// Runs every check at one parameter point.
pub fn certify_point(
    spec: &LatticeSpec,
    model: &ModelParams,
    t_tilde: f64,
    w_tilde: f64,
    u: f64,
) -> Result<CertificationRecord> {
    let off = PenaltyParams {
        t_tilde,
        w_tilde,
        u,
        counterterm_mode: CountertermMode::Off,
    };
    let auto = PenaltyParams {
        counterterm_mode: CountertermMode::Auto,
        ..off
    };
    let n = spec.n();
    let proj = physical_projector(spec);
    let gamma = hamiltonians::build_gamma(spec);

    let h0 = hamiltonians::build_uncoupled_hamiltonian(&off, model, spec)?;
    let heff = second_order_effective(&h0, &gamma, &off, n, &proj)?;
    let simplified = simplified_effective(&h0, &off, &proj)?;
    let target = hamiltonians::build_target_effective(&off, model, spec)?;
    let published =
        hamiltonians::build_target_effective_with(&off, model, spec, DensityForm::Published)?;

    let h0_auto = hamiltonians::build_uncoupled_hamiltonian(&auto, model, spec)?;
    let heff_auto = second_order_effective(&h0_auto, &gamma, &auto, n, &proj)?;
    let bare = hamiltonians::build_target_effective_with(&off, model, spec, DensityForm::Omitted)?;

    Ok(CertificationRecord {
        sites: spec.sites(),
        n,
        t_tilde,
        w_tilde,
        u,
        dim_sector: proj.dim_sector(),
        residual: compare_effective(&heff, &target)?,
        residual_published: compare_effective(&heff, &published)?,
        simplification_residual: heff.distance(&simplified)?,
        cancellation_residual: compare_effective(&heff_auto, &bare)?,
        support_residual: coupling_support_check(&h0, &gamma, &proj, n)?,
    })
}

/// Certifies every grid point in parallel; output order is the nested loop
/// order `sites, n, t_tilde, w_tilde, u`.
pub fn certify_grid(grid: &CertificationGrid) -> Result<Vec<CertificationRecord>> {
    let mut points = Vec::new();
    for &l in &grid.sites {
        for &n in &grid.n_values {
            for &tt in &grid.t_tilde {
                for &ww in &grid.w_tilde {
                    for &u in &grid.u {
                        points.push((l, n, tt, ww, u));
                    }
                }
            }
        }
    }
    points
        .into_par_iter()
        .map(|(l, n, tt, ww, u)| {
            let spec = LatticeSpec::new(l, n, grid.boundary)?;
            certify_point(&spec, &grid.model, tt, ww, u)
        })
        .collect()
}

/// Certification CSV: header `L,n,t_tilde,w_tilde,u,residual`.
pub fn certification_csv(records: &[CertificationRecord]) -> String {
    let mut s = String::from("L,n,t_tilde,w_tilde,u,residual\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6e}",
            r.sites, r.n, r.t_tilde, r.w_tilde, r.u, r.residual
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_gamma, build_uncoupled_hamiltonian};
    use crate::lattice::{dirac_sea_state, encode};

    #[test]
    fn projector_algebra() {
        let spec = LatticeSpec::open(3, 3).unwrap();
        let proj = physical_projector(&spec);
        let p = proj.operator();
        let q = proj.complement();
        let id = SparseOperator::identity(spec.full_dim());
        assert!(p.matmul(&p).unwrap().distance(&p).unwrap() <= 1e-12);
        assert!(p.adjoint().distance(&p).unwrap() <= 1e-12);
        assert!(p.matmul(&q).unwrap().max_norm() <= 1e-12);
        assert!(q.matmul(&p).unwrap().max_norm() <= 1e-12);
        assert!(p.add(&q).unwrap().distance(&id).unwrap() <= 1e-12);
    }

    #[test]
    fn projector_examples() {
        let spec = LatticeSpec::open(2, 3).unwrap();
        assert_eq!(physical_projector(&spec).dim_sector(), 2);

        let spec = LatticeSpec::open(4, 3).unwrap();
        let proj = physical_projector(&spec);
        let sea = encode(&dirac_sea_state(&spec, 0).unwrap(), &spec)
            .unwrap()
            .0;
        let mut v = vec![C64::new(0.0, 0.0); spec.full_dim()];
        v[sea] = C64::new(1.0, 0.0);
        assert_eq!(proj.project(&v), v);
        let bad = encode(&dirac_sea_state(&spec, 1).unwrap(), &spec)
            .unwrap()
            .0;
        let mut w = vec![C64::new(0.0, 0.0); spec.full_dim()];
        w[bad] = C64::new(1.0, 0.0);
        assert!(proj.project(&w).iter().all(|z| z.norm() == 0.0));

        let empty = SectorProjector::from_states(
            &lattice::sector_filter(&[1, 1, 1, 0], &LatticeSpec::periodic(4, 7).unwrap()).unwrap(),
            LatticeSpec::periodic(4, 7).unwrap().full_dim(),
        )
        .unwrap();
        assert!(empty.is_empty());
        assert!(SectorProjector::new(vec![3, 1], 5).is_err());
    }

    fn setup(
        l: usize,
        n: usize,
        pp: &PenaltyParams,
    ) -> (LatticeSpec, SparseOperator, SparseOperator, SectorProjector) {
        let spec = LatticeSpec::open(l, n).unwrap();
        let h0 = build_uncoupled_hamiltonian(pp, &ModelParams::default(), &spec).unwrap();
        let gamma = build_gamma(&spec);
        let proj = physical_projector(&spec);
        (spec, h0, gamma, proj)
    }

    #[test]
    fn no_coupling_gives_projected_diagonal() {
        let pp = PenaltyParams {
            t_tilde: 0.0,
            w_tilde: 0.0,
            ..Default::default()
        };
        let (spec, h0, gamma, proj) = setup(3, 3, &pp);
        let heff = second_order_effective(&h0, &gamma, &pp, 3, &proj).unwrap();
        let pdp = h0.restrict(proj.indices()).unwrap();
        assert_eq!(heff.distance(&pdp).unwrap(), 0.0);
        assert!(heff.is_diagonal());
        assert_eq!(
            coupling_support_check(&h0, &gamma, &proj, spec.n()).unwrap(),
            0.0
        );
    }

    #[test]
    fn simplification_is_exact() {
        let pp = PenaltyParams {
            t_tilde: 1.0,
            w_tilde: 0.7,
            u: 50.0,
            counterterm_mode: CountertermMode::Off,
        };
        for (l, n) in [(2, 3), (3, 3), (4, 4), (3, 2)] {
            let (_, h0, gamma, proj) = setup(l, n, &pp);
            let a = second_order_effective(&h0, &gamma, &pp, n, &proj).unwrap();
            let b = simplified_effective(&h0, &pp, &proj).unwrap();
            assert!(a.distance(&b).unwrap() <= 1e-12, "L={l} n={n}");
            assert!(a.hermitian_residual() <= 1e-12);
        }
    }

    #[test]
    fn support_residual_small() {
        let pp = PenaltyParams {
            t_tilde: 1.0,
            w_tilde: 0.7,
            u: 50.0,
            counterterm_mode: CountertermMode::Off,
        };
        for (l, n) in [(3, 3), (4, 4)] {
            let (_, h0, gamma, proj) = setup(l, n, &pp);
            assert!(coupling_support_check(&h0, &gamma, &proj, n).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn compare_removes_offsets() {
        let spec = LatticeSpec::open(3, 3).unwrap();
        let pp = PenaltyParams::default();
        let a = hamiltonians::build_target_effective(&pp, &ModelParams::default(), &spec).unwrap();
        assert_eq!(compare_effective(&a, &a).unwrap(), 0.0);
        let shifted = a
            .add(&SparseOperator::identity(a.dim()).scale_real(5.0))
            .unwrap();
        assert!(compare_effective(&shifted, &a).unwrap() <= 1e-12);
        assert!(compare_effective(&a, &SparseOperator::zeros(a.dim() + 1)).is_err());
    }

    #[test]
    fn central_certification_run() {
        let spec = LatticeSpec::open(3, 3).unwrap();
        let rec = certify_point(&spec, &ModelParams::default(), 1.0, 0.7, 50.0).unwrap();
        assert!(rec.residual <= 1e-10, "{rec:?}");
        assert!(rec.cancellation_residual <= 1e-10);
        assert!(rec.simplification_residual <= 1e-12);
        assert!(rec.residual_published > 1e-3);
    }

    #[test]
    fn invalid_penalty() {
        let pp = PenaltyParams {
            u: 0.0,
            ..Default::default()
        };
        let (_, h0, gamma, proj) = setup(2, 3, &PenaltyParams::default());
        assert!(second_order_effective(&h0, &gamma, &pp, 3, &proj).is_err());
    }

    #[test]
    fn csv_layout() {
        let spec = LatticeSpec::open(2, 3).unwrap();
        let rec = certify_point(&spec, &ModelParams::default(), 1.0, 0.3, 10.0).unwrap();
        let csv = certification_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("L,n,t_tilde,w_tilde,u,residual"));
        assert!(lines.next().unwrap().starts_with("2,3,1,0.3,10,"));
    }
}
