//! Dense diagonalization, exact spectral time evolution and observables.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::effective::{self, SectorProjector};
use crate::error::{Error, Result};
use crate::hamiltonians::{self, ModelParams, PenaltyParams};
use crate::lattice::LatticeSpec;
use crate::sparse::SparseOperator;
use crate::weyl;
use crate::C64;

/// Largest dimension handed to the dense eigensolver unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Tolerance on `| |psi| - 1 |` for input states.
pub const NORM_TOL: f64 = 1e-8;

/// Full spectrum and orthonormal eigenbasis of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` belongs to `eigenvalues()[i]`.
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn ground_energy(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn eigenvector(&self, i: usize) -> Vec<C64> {
        self.eigenvectors.column(i).iter().copied().collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |a, e| a.max(e.abs()))
    }

    /// `max |W diag(E) W^dag - h|`.
    pub fn reconstruction_residual(&self, h: &SparseOperator) -> Result<f64> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: h.dim(),
            });
        }
        let w = &self.eigenvectors;
        let mut scaled = w.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(e);
        }
        let rec = scaled * w.adjoint();
        Ok((rec - h.to_dense())
            .iter()
            .fold(0.0, |a, z| a.max(z.norm())))
    }

    /// Expansion coefficients `W^dag psi`.
    pub fn coefficients(&self, psi: &[C64]) -> Result<DVector<C64>> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.len(),
            });
        }
        Ok(self.eigenvectors.ad_mul(&DVector::from_column_slice(psi)))
    }

    /// `W exp(-i E t) c` for coefficients `c` from [`Self::coefficients`].
    pub fn propagate_coefficients(&self, c: &DVector<C64>, t: f64) -> Vec<C64> {
        let phased = DVector::from_iterator(
            self.dim(),
            c.iter()
                .zip(&self.eigenvalues)
                .map(|(&z, &e)| z * C64::from_polar(1.0, -e * t)),
        );
        (&self.eigenvectors * phased).iter().copied().collect()
    }

    /// `exp(-i H t) psi`.
    pub fn propagate(&self, psi: &[C64], t: f64) -> Result<Vec<C64>> {
        Ok(self.propagate_coefficients(&self.coefficients(psi)?, t))
    }
}

/// Full diagonalization of a Hermitian operator of dimension at most `cap`.
pub fn dense_eigensolve(h: &SparseOperator, cap: usize) -> Result<SpectralDecomposition> {
    if h.dim() > cap {
        return Err(Error::Capacity { dim: h.dim(), cap });
    }
    let herm = h.hermitian_residual();
    if herm > 1e-10 * h.max_norm().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "operator is not Hermitian (residual {herm:e})"
        )));
    }
    let eig = nalgebra::SymmetricEigen::new(h.to_dense());
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(h.dim(), h.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Symmetric representative of a cyclic field index: `k` for `k <= n/2`,
/// `k - n` otherwise.
pub fn sigma(k: usize, n: usize) -> i64 {
    if 2 * k <= n {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// `<psi| Gamma |psi>`.
pub fn gauge_violation(psi: &[C64], gamma: &SparseOperator) -> Result<f64> {
    Ok(gamma.expectation(psi)?.re)
}

/// Maps the components of a state vector to reference-basis states and
/// evaluates the diagonal observables on them.
#[derive(Clone, Debug)]
pub struct Observables {
    spec: LatticeSpec,
    basis: Vec<usize>,
    gamma: Vec<f64>,
    field_energy: Vec<f64>,
}

impl Observables {
    /// Vectors over the whole Hilbert space.
    pub fn full(spec: &LatticeSpec, chiral: bool) -> Result<Self> {
        Self::on_basis(spec, (0..spec.full_dim()).collect(), chiral)
    }

    /// Vectors over the sector basis of `proj`.
    pub fn sector(spec: &LatticeSpec, proj: &SectorProjector, chiral: bool) -> Result<Self> {
        if proj.dim_full() != spec.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.full_dim(),
                got: proj.dim_full(),
            });
        }
        Self::on_basis(spec, proj.indices().to_vec(), chiral)
    }

    fn on_basis(spec: &LatticeSpec, basis: Vec<usize>, chiral: bool) -> Result<Self> {
        let n = spec.n();
        let gamma = basis
            .iter()
            .map(|&idx| {
                (0..spec.sites())
                    .map(|x| hamiltonians::site_penalty(spec.gauss_exponent(idx, x), n))
                    .sum()
            })
            .collect();
        Ok(Observables {
            spec: *spec,
            basis,
            gamma,
            field_energy: weyl::field_energy_spectrum(n, chiral)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    fn check(&self, psi: &[C64]) -> Result<()> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.len(),
            });
        }
        Ok(())
    }

    fn weighted<F: Fn(usize) -> f64>(&self, psi: &[C64], f: F) -> f64 {
        psi.iter()
            .zip(&self.basis)
            .map(|(z, &idx)| z.norm_sqr() * f(idx))
            .sum()
    }

    /// `<n_x>`.
    pub fn occupation(&self, psi: &[C64], x: usize) -> Result<f64> {
        self.check(psi)?;
        self.spec.check_site(x)?;
        Ok(self.weighted(psi, |idx| self.spec.occupation(idx, x) as u8 as f64))
    }

    /// `<sigma(k_link)>`.
    pub fn field_proxy(&self, psi: &[C64], link: usize) -> Result<f64> {
        self.check(psi)?;
        self.spec.check_link(link)?;
        let n = self.spec.n();
        Ok(self.weighted(psi, |idx| sigma(self.spec.link_value(idx, link), n) as f64))
    }

    /// `<f(V)>` on one link.
    pub fn field_energy(&self, psi: &[C64], link: usize) -> Result<f64> {
        self.check(psi)?;
        self.spec.check_link(link)?;
        Ok(self.weighted(psi, |idx| {
            self.field_energy[self.spec.link_value(idx, link)]
        }))
    }

    /// `<Gamma>`.
    pub fn gamma(&self, psi: &[C64]) -> Result<f64> {
        self.check(psi)?;
        Ok(psi
            .iter()
            .zip(&self.gamma)
            .map(|(z, g)| z.norm_sqr() * g)
            .sum())
    }

    fn record(&self, psi: &[C64]) -> Result<Record> {
        let l = self.spec.sites();
        let links = self.spec.num_links();
        Ok(Record {
            occupations: (0..l)
                .map(|x| self.occupation(psi, x))
                .collect::<Result<_>>()?,
            field_proxy: (0..links)
                .map(|j| self.field_proxy(psi, j))
                .collect::<Result<_>>()?,
            field_energy: (0..links)
                .map(|j| self.field_energy(psi, j))
                .collect::<Result<_>>()?,
            gamma: self.gamma(psi)?,
        })
    }
}

/// `<sigma(k_link)>` of a state given on the basis of `obs`.
pub fn field_proxy(psi: &[C64], link: usize, obs: &Observables) -> Result<f64> {
    obs.field_proxy(psi, link)
}

struct Record {
    occupations: Vec<f64>,
    field_proxy: Vec<f64>,
    field_energy: Vec<f64>,
    gamma: f64,
}

/// Observables sampled along a trajectory. Per-time vectors are indexed by
/// sample, then by site or link.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ObservableSeries {
    pub times: Vec<f64>,
    pub occupations: Vec<Vec<f64>>,
    pub field_proxy: Vec<Vec<f64>>,
    pub field_energy: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
    pub fidelity: Option<Vec<f64>>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t | |psi(t)| - 1 |`.
    pub fn norm_drift(&self) -> f64 {
        self.norm.iter().fold(0.0, |a, v| a.max((v - 1.0).abs()))
    }

    /// `max_t |E(t) - E(0)| / max(|E(0)|, 1)`.
    pub fn energy_drift(&self) -> f64 {
        let Some(&e0) = self.energy.first() else {
            return 0.0;
        };
        let scale = e0.abs().max(1.0);
        self.energy
            .iter()
            .fold(0.0, |a, e| a.max((e - e0).abs() / scale))
    }

    pub fn max_gamma(&self) -> f64 {
        self.gamma.iter().fold(0.0, |a, &g| a.max(g))
    }

    /// Header `t,n_0..,Eproxy_0..,fE_0..,gamma_exp[,fidelity]`, values with
    /// 12 significant digits.
    pub fn to_csv(&self) -> String {
        let sites = self.occupations.first().map_or(0, Vec::len);
        let links = self.field_proxy.first().map_or(0, Vec::len);
        let mut cols = vec!["t".to_string()];
        cols.extend((0..sites).map(|x| format!("n_{x}")));
        cols.extend((0..links).map(|j| format!("Eproxy_{j}")));
        cols.extend((0..links).map(|j| format!("fE_{j}")));
        cols.push("gamma_exp".into());
        if self.fidelity.is_some() {
            cols.push("fidelity".into());
        }
        let mut s = cols.join(",");
        s.push('\n');
        for i in 0..self.len() {
            let mut row = vec![self.times[i]];
            row.extend(&self.occupations[i]);
            row.extend(&self.field_proxy[i]);
            row.extend(&self.field_energy[i]);
            row.push(self.gamma[i]);
            if let Some(f) = &self.fidelity {
                row.push(f[i]);
            }
            let cells: Vec<String> = row.iter().map(|v| fmt_sig12(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Scientific notation with 12 significant digits; `-0` prints as `0`.
pub fn fmt_sig12(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

/// `0, dt, 2 dt, ...` up to and including `t_max` (within rounding).
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if dt.is_nan() || dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dt must be > 0 (got {dt})"
        )));
    }
    if t_max.is_nan() || t_max < dt || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_max must be >= dt (got {t_max})"
        )));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "times must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn norm(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_normalized(psi: &[C64]) -> Result<()> {
    let nrm = norm(psi);
    if (nrm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(nrm));
    }
    Ok(())
}

/// `|<a|b>|^2`.
pub fn overlap_sqr(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum::<C64>()
        .norm_sqr()
}

/// Evolves `psi0` under `h` and samples the observables at `times`.
pub fn evolve(
    h: &SparseOperator,
    psi0: &[C64],
    times: &[f64],
    obs: &Observables,
    cap: usize,
) -> Result<ObservableSeries> {
    let dec = dense_eigensolve(h, cap)?;
    evolve_with(&dec, h, psi0, times, obs, None)
}

/// As [`evolve`] with a precomputed decomposition. When `reference` is
/// given, the fidelity `|<ref(t)|psi(t)>|^2` with the reference trajectory
/// is recorded as well.
pub fn evolve_with(
    dec: &SpectralDecomposition,
    h: &SparseOperator,
    psi0: &[C64],
    times: &[f64],
    obs: &Observables,
    reference: Option<&[Vec<C64>]>,
) -> Result<ObservableSeries> {
    check_normalized(psi0)?;
    check_times(times)?;
    if obs.dim() != dec.dim() || h.dim() != dec.dim() {
        return Err(Error::DimensionMismatch {
            expected: dec.dim(),
            got: obs.dim().max(h.dim()),
        });
    }
    if let Some(r) = reference {
        if r.len() != times.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: r.len(),
            });
        }
    }
    let c = dec.coefficients(psi0)?;
    let samples: Vec<(Record, f64, f64, Option<f64>)> = times
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let psi = if t == 0.0 {
                psi0.to_vec()
            } else {
                dec.propagate_coefficients(&c, t)
            };
            let rec = obs.record(&psi)?;
            let e = h.expectation(&psi)?.re;
            let fid = reference.map(|r| overlap_sqr(&r[i], &psi));
            Ok((rec, e, norm(&psi), fid))
        })
        .collect::<Result<_>>()?;

    let mut out = ObservableSeries {
        times: times.to_vec(),
        fidelity: reference.map(|_| Vec::with_capacity(times.len())),
        ..Default::default()
    };
    for (rec, e, nrm, fid) in samples {
        out.occupations.push(rec.occupations);
        out.field_proxy.push(rec.field_proxy);
        out.field_energy.push(rec.field_energy);
        out.gamma.push(rec.gamma);
        out.energy.push(e);
        out.norm.push(nrm);
        if let (Some(f), Some(v)) = (out.fidelity.as_mut(), fid) {
            f.push(v);
        }
    }
    Ok(out)
}

/// One row of a fidelity scan.
#[derive(Clone, Debug, Serialize)]
pub struct FidelityPoint {
    pub u: f64,
    /// `max_t 1 - |<psi_eff(t)|psi_full(t)>|^2`.
    pub infidelity: f64,
    /// Lowest eigenvalue of the penalized Hamiltonian.
    pub ground_full: f64,
    /// Lowest eigenvalue of the second-order effective Hamiltonian.
    pub ground_effective: f64,
    /// Largest `<Gamma>` along the penalized trajectory.
    pub max_leakage: f64,
}

/// Evolves the physical state `psi0` (full-space vector) under the
/// penalized Hamiltonian and under the effective Hamiltonian for every `u`,
/// in parallel, and reports the worst infidelity over the time grid.
#[allow(clippy::too_many_arguments)]
pub fn fidelity_scan(
    spec: &LatticeSpec,
    params: &ModelParams,
    pp: &PenaltyParams,
    u_values: &[f64],
    t_max: f64,
    dt: f64,
    psi0: &[C64],
    cap: usize,
) -> Result<Vec<FidelityPoint>> {
    if let Some(u) = u_values.iter().find(|u| u.is_nan() || **u <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "penalty u must be > 0 (got {u})"
        )));
    }
    if psi0.len() != spec.full_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.full_dim(),
            got: psi0.len(),
        });
    }
    check_normalized(psi0)?;
    let times = time_grid(t_max, dt)?;
    let proj = effective::physical_projector(spec);
    let leak = proj.complement().expectation(psi0)?.re;
    if leak > NORM_TOL {
        return Err(Error::InvalidParameter(
            "initial state must lie in the physical sector".into(),
        ));
    }
    let gamma = hamiltonians::build_gamma(spec);
    let full_obs = Observables::full(spec, params.chiral)?;
    let psi_sector = proj.restrict_vector(psi0);

    u_values
        .par_iter()
        .map(|&u| {
            let pu = PenaltyParams { u, ..*pp };
            let h0 = hamiltonians::build_uncoupled_hamiltonian(&pu, params, spec)?;
            let h1 = hamiltonians::build_penalized(&h0, &gamma, &pu, spec.n())?;
            let heff = effective::second_order_effective(&h0, &gamma, &pu, spec.n(), &proj)?;
            let dec_eff = dense_eigensolve(&heff, cap)?;
            let c_eff = dec_eff.coefficients(&psi_sector)?;
            let reference: Vec<Vec<C64>> = times
                .iter()
                .map(|&t| proj.embed_vector(&dec_eff.propagate_coefficients(&c_eff, t)))
                .collect();
            let dec_full = dense_eigensolve(&h1, cap)?;
            let series = evolve_with(&dec_full, &h1, psi0, &times, &full_obs, Some(&reference))?;
            let infidelity = series
                .fidelity
                .as_ref()
                .expect("reference given")
                .iter()
                .fold(0.0_f64, |a, f| a.max(1.0 - f));
            Ok(FidelityPoint {
                u,
                infidelity,
                ground_full: dec_full.ground_energy().unwrap_or(f64::NAN),
                ground_effective: dec_eff.ground_energy().unwrap_or(f64::NAN),
                max_leakage: series.max_gamma(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln eps` against `ln u`, over points with
/// positive infidelity. `None` with fewer than two such points.
pub fn decay_exponent(points: &[FidelityPoint]) -> Option<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.infidelity > 0.0)
        .map(|p| (p.u.ln(), p.infidelity.ln()))
        .collect();
    if xy.len() < 2 {
        return None;
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn fidelity_csv(points: &[FidelityPoint]) -> String {
    let mut s = String::from("u,epsilon,E0_full,E0_eff,max_gamma\n");
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            p.u,
            fmt_sig12(p.infidelity),
            fmt_sig12(p.ground_full),
            fmt_sig12(p.ground_effective),
            fmt_sig12(p.max_leakage)
        );
    }
    s
}

/// Lowest eigenvalue of `H_n` on the physical sector.
pub fn sector_ground_energy(spec: &LatticeSpec, params: &ModelParams, cap: usize) -> Result<f64> {
    let proj = effective::physical_projector(spec);
    if proj.is_empty() {
        return Err(Error::EmptySector);
    }
    let h = hamiltonians::build_gauge_hamiltonian(params, spec)?.restrict(proj.indices())?;
    Ok(dense_eigensolve(&h, cap)?
        .ground_energy()
        .expect("sector is not empty"))
}

/// `(n, E0(n))` for each `n`, computed in parallel, in input order.
pub fn large_n_trend(
    sites: usize,
    boundary: crate::lattice::Boundary,
    params: &ModelParams,
    n_values: &[usize],
    cap: usize,
) -> Result<Vec<(usize, f64)>> {
    n_values
        .par_iter()
        .map(|&n| {
            let spec = LatticeSpec::new(sites, n, boundary)?;
            Ok((n, sector_ground_energy(&spec, params, cap)?))
        })
        .collect()
}

/// `|E0(n_{i+1}) - E0(n_i)|` for consecutive entries.
pub fn successive_differences(trend: &[(usize, f64)]) -> Vec<f64> {
    trend.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect()
}

pub fn trend_csv(trend: &[(usize, f64)]) -> String {
    let mut s = String::from("n,E0,delta\n");
    for (i, &(n, e)) in trend.iter().enumerate() {
        let d = if i == 0 {
            String::new()
        } else {
            fmt_sig12((e - trend[i - 1].1).abs())
        };
        let _ = writeln!(s, "{n},{},{d}", fmt_sig12(e));
    }
    s
}

/// Ascending eigenvalues, one per line under header `index,energy`.
pub fn spectrum_csv(eigenvalues: &[f64]) -> String {
    let mut s = String::from("index,energy\n");
    for (i, e) in eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt_sig12(*e));
    }
    s
}
