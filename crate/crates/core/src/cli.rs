//! Command-line driver. Exit codes: 0 success, 1 failed identity or
//! certification, 2 usage, configuration or runtime error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{EvolveHamiltonian, Format, RunConfig};
use crate::effective::{self, CertificationGrid, SectorProjector};
use crate::error::{Error, Result};
use crate::hamiltonians;
use crate::lattice::{self, LatticeSpec};
use crate::output::ArtifactWriter;
use crate::solver::{self, Observables, DEFAULT_DENSE_CAP};
use crate::sparse::SparseOperator;
use crate::weyl;
use crate::C64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

/// Default tolerance for `check`.
pub const CHECK_TOL: f64 = 1e-12;
/// Default residual threshold for `effective`.
pub const CERTIFY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "znlgt",
    version,
    about = "Z_n lattice gauge theory exact diagonalization"
)]
pub struct Cli {
    /// TOML or JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding output.directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pass/fail tolerance for check and effective.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Largest dimension handed to the dense eigensolver.
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Verify the operator identities at the configured (L, n).
    Check,
    /// Enumerate the Gauss-law sector.
    Gauss,
    /// Sorted eigenvalues of H_n on the sector.
    Spectrum,
    /// Certify the second-order effective Hamiltonian against the closed form.
    Effective,
    /// Time evolution with observable series.
    Evolve,
    /// Fidelity scan over scan.u_values and/or E0 over scan.n_values.
    Sweep,
}

struct Ctx {
    cfg: RunConfig,
    writer: ArtifactWriter,
    tolerance: Option<f64>,
    cap: usize,
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.tolerance {
        if t.is_nan() || t < 0.0 || !t.is_finite() {
            return Err(Error::Config(format!("--tolerance must be >= 0 (got {t})")));
        }
    }
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    let ctx = Ctx {
        writer: ArtifactWriter::new(dir, &cfg.hash()),
        tolerance: cli.tolerance,
        cap: cli.cap.unwrap_or(DEFAULT_DENSE_CAP),
        cfg,
    };
    match cli.command {
        Command::Check => cmd_check(&ctx),
        Command::Gauss => cmd_gauss(&ctx),
        Command::Spectrum => cmd_spectrum(&ctx),
        Command::Effective => cmd_effective(&ctx),
        Command::Evolve => cmd_evolve(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

/// Residuals of the algebraic identities at the configured lattice.
pub fn identity_residuals(cfg: &RunConfig) -> Result<Vec<(String, f64)>> {
    let spec = cfg.lattice()?;
    let n = spec.n();
    let params = cfg.model_params();
    let pp = cfg.penalty_params();
    let mut out = Vec::new();

    let m = n as i64;
    let mut weyl_res = 0.0f64;
    for k in 0..m {
        for l in 0..m {
            weyl_res = weyl_res.max(weyl::weyl_relation_residual(n, k, l)?);
        }
    }
    out.push(("weyl_relation".into(), weyl_res));

    let id = weyl::DenseOperator::identity(n);
    let u = weyl::shift_operator(n)?;
    let v = weyl::clock_operator(n)?;
    out.push((
        "cyclic_order".into(),
        u.pow(m)?.distance(&id).max(v.pow(m)?.distance(&id)),
    ));

    let w = weyl::fourier_eigenbasis(n)?;
    let d = w.adjoint().mul(&u).mul(&w);
    let fourier = max_of((0..n).flat_map(|r| {
        let d = &d;
        (0..n).map(move |c| {
            let want = if r == c {
                weyl::root_of_unity(-(r as i64), n)
            } else {
                C64::new(0.0, 0.0)
            };
            (d.get(r, c) - want).norm()
        })
    }));
    out.push(("shift_eigenbasis".into(), fourier));

    let f = weyl::field_energy_operator(n, params.chiral)?;
    let s = weyl::field_energy_spectrum(n, params.chiral)?;
    out.push((
        "field_energy_spectrum".into(),
        max_of(f.diagonal().iter().zip(&s).map(|(a, b)| (a - b).norm())),
    ));

    if n <= 64 {
        out.push(("ring_hopping".into(), weyl::ring_hopping_equivalence(n)?));
    }

    let l = spec.sites();
    let dim = spec.full_dim();
    let cs: Vec<SparseOperator> = (0..l)
        .map(|x| lattice::fermion_annihilation(x, &spec))
        .collect::<Result<_>>()?;
    let mut car = 0.0f64;
    let ident = SparseOperator::identity(dim);
    for x in 0..l {
        for y in 0..l {
            let a = cs[x].anticommutator(&cs[y].adjoint())?;
            let want = if x == y {
                ident.clone()
            } else {
                SparseOperator::zeros(dim)
            };
            car = car.max(a.distance(&want)?);
            car = car.max(cs[x].anticommutator(&cs[y])?.max_norm());
        }
    }
    out.push(("canonical_anticommutation".into(), car));

    let h = hamiltonians::build_gauge_hamiltonian(&params, &spec)?;
    let mut comm = 0.0f64;
    for x in 0..l {
        comm = comm.max(
            h.commutator(&lattice::gauss_operator(x, &spec)?)?
                .max_norm(),
        );
    }
    out.push(("gauge_invariance".into(), comm));

    let gamma = hamiltonians::build_gamma(&spec);
    let physical: Vec<usize> = lattice::physical_filter(&spec)
        .iter()
        .map(|s| s.0)
        .collect();
    let zero_diag: Vec<usize> = (0..dim)
        .filter(|&i| gamma.get(i, i).norm() == 0.0)
        .collect();
    let mismatch = if physical == zero_diag { 0.0 } else { 1.0 };
    out.push(("gauss_kernel".into(), mismatch));

    let mut site_sum = SparseOperator::zeros(dim);
    for x in 0..l {
        site_sum = site_sum.add(&hamiltonians::build_site_gamma(x, &spec)?)?;
    }
    out.push(("penalty_from_gauss".into(), site_sum.distance(&gamma)?));

    let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec)?;
    let h1 = hamiltonians::build_penalized(&h0, &gamma, &pp, n)?;
    out.push((
        "hermiticity".into(),
        h.hermitian_residual()
            .max(h0.hermitian_residual())
            .max(h1.hermitian_residual()),
    ));

    let proj = effective::physical_projector(&spec);
    out.push((
        "coupling_support".into(),
        effective::coupling_support_check(&h0, &gamma, &proj, n)?,
    ));
    let a = effective::second_order_effective(&h0, &gamma, &pp, n, &proj)?;
    let b = effective::simplified_effective(&h0, &pp, &proj)?;
    out.push(("resolvent_simplification".into(), a.distance(&b)?));
    Ok(out)
}

fn cmd_check(ctx: &Ctx) -> Result<i32> {
    let tol = ctx.tolerance.unwrap_or(CHECK_TOL);
    let results: Vec<IdentityResult> = identity_residuals(&ctx.cfg)?
        .into_iter()
        .map(|(name, residual)| IdentityResult {
            name,
            residual,
            tolerance: tol,
            pass: residual <= tol,
        })
        .collect();
    let pass = results.iter().all(|r| r.pass);
    for r in &results {
        println!(
            "{} {} residual={:.3e} tol={:.1e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.residual,
            r.tolerance
        );
    }
    let path = ctx.writer.json(
        "check.json",
        json!({
            "L": ctx.cfg.model.sites,
            "n": ctx.cfg.model.n,
            "identities": results,
            "pass": pass,
        }),
    )?;
    println!("wrote {}", path.display());
    Ok(if pass { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_gauss(ctx: &Ctx) -> Result<i32> {
    let spec = ctx.cfg.lattice()?;
    let sector = ctx.cfg.sector(&spec)?;
    let p = ctx
        .writer
        .text("gauss_basis.csv", &lattice::basis_dump(&sector, &spec))?;
    let s = ctx.writer.json(
        "gauss.json",
        json!({
            "dim_full": spec.full_dim(),
            "dim_sector": sector.len(),
            "charges": ctx.cfg.model.charges.clone().unwrap_or_else(|| vec![0; spec.sites()]),
        }),
    )?;
    println!("dim_full={} dim_sector={}", spec.full_dim(), sector.len());
    println!("wrote {}", p.display());
    println!("wrote {}", s.display());
    Ok(EXIT_OK)
}

fn sector_projector(ctx: &Ctx, spec: &LatticeSpec) -> Result<SectorProjector> {
    SectorProjector::from_states(&ctx.cfg.sector(spec)?, spec.full_dim())
}

fn cmd_spectrum(ctx: &Ctx) -> Result<i32> {
    let spec = ctx.cfg.lattice()?;
    let proj = sector_projector(ctx, &spec)?;
    let h = hamiltonians::build_gauge_hamiltonian(&ctx.cfg.model_params(), &spec)?
        .restrict(proj.indices())?;
    let dec = solver::dense_eigensolve(&h, ctx.cap)?;
    let mut wrote = Vec::new();
    if ctx.cfg.wants(Format::Csv) {
        wrote.push(
            ctx.writer
                .text("spectrum.csv", &solver::spectrum_csv(dec.eigenvalues()))?,
        );
    }
    if ctx.cfg.wants(Format::Json) {
        wrote.push(ctx.writer.json(
            "spectrum.json",
            json!({ "dim_sector": dec.dim(), "eigenvalues": dec.eigenvalues() }),
        )?);
    }
    match dec.ground_energy() {
        Some(e0) => println!("dim_sector={} E0={}", dec.dim(), solver::fmt_sig12(e0)),
        None => println!("dim_sector=0"),
    }
    for p in wrote {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn or_single<T: Clone>(v: &[T], fallback: T) -> Vec<T> {
    if v.is_empty() {
        vec![fallback]
    } else {
        v.to_vec()
    }
}

fn cmd_effective(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let c = &cfg.certify;
    let grid = CertificationGrid {
        sites: or_single(&c.sites, cfg.model.sites),
        n_values: or_single(&c.n_values, cfg.model.n),
        t_tilde: or_single(&c.t_tilde, cfg.penalty.t_tilde),
        w_tilde: or_single(&c.w_tilde, cfg.penalty.w_tilde),
        u: or_single(&c.u, cfg.penalty.u),
        boundary: cfg.boundary(),
        model: cfg.model_params(),
    };
    let tol = ctx.tolerance.unwrap_or(CERTIFY_TOL);
    let recs = effective::certify_grid(&grid)?;
    let worst = max_of(recs.iter().map(|r| r.residual));
    let cancel = max_of(recs.iter().map(|r| r.cancellation_residual));
    let published = max_of(recs.iter().map(|r| r.residual_published));
    let pass = worst <= tol;
    let mut wrote = Vec::new();
    if cfg.wants(Format::Csv) {
        wrote.push(
            ctx.writer
                .text("effective.csv", &effective::certification_csv(&recs))?,
        );
    }
    if cfg.wants(Format::Json) {
        wrote.push(ctx.writer.json(
            "effective.json",
            json!({
                "tolerance": tol,
                "max_residual": worst,
                "max_cancellation_residual": cancel,
                "max_published_form_residual": published,
                "pass": pass,
                "points": recs,
            }),
        )?);
    }
    println!(
        "{} points={} max_residual={:.3e} auto_cancellation={:.3e} tol={:.1e}",
        if pass { "PASS" } else { "FAIL" },
        recs.len(),
        worst,
        cancel,
        tol
    );
    for p in wrote {
        println!("wrote {}", p.display());
    }
    Ok(if pass { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_evolve(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    let spec = cfg.lattice()?;
    let params = cfg.model_params();
    let pp = cfg.penalty_params();
    let times = solver::time_grid(cfg.evolve.t_max, cfg.evolve.dt)?;
    let psi_full = cfg.initial_state(&spec)?;
    let start = psi_full
        .iter()
        .position(|z| z.norm() > 0.0)
        .expect("basis state");
    let physical = effective::physical_projector(&spec);

    let series = match cfg.evolve.hamiltonian {
        EvolveHamiltonian::Gauge => {
            let sector = sector_projector(ctx, &spec)?;
            let h = hamiltonians::build_gauge_hamiltonian(&params, &spec)?;
            if sector.contains(start) {
                let h = h.restrict(sector.indices())?;
                let obs = Observables::sector(&spec, &sector, params.chiral)?;
                solver::evolve(
                    &h,
                    &sector.restrict_vector(&psi_full),
                    &times,
                    &obs,
                    ctx.cap,
                )?
            } else {
                let obs = Observables::full(&spec, params.chiral)?;
                solver::evolve(&h, &psi_full, &times, &obs, ctx.cap)?
            }
        }
        EvolveHamiltonian::Effective => {
            if !physical.contains(start) {
                return Err(Error::Config(
                    "evolve.initial must be physical for the effective Hamiltonian".into(),
                ));
            }
            let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec)?;
            let gamma = hamiltonians::build_gamma(&spec);
            let h = effective::second_order_effective(&h0, &gamma, &pp, spec.n(), &physical)?;
            let obs = Observables::sector(&spec, &physical, params.chiral)?;
            solver::evolve(
                &h,
                &physical.restrict_vector(&psi_full),
                &times,
                &obs,
                ctx.cap,
            )?
        }
        EvolveHamiltonian::Penalized => {
            let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec)?;
            let gamma = hamiltonians::build_gamma(&spec);
            let h1 = hamiltonians::build_penalized(&h0, &gamma, &pp, spec.n())?;
            let dec = solver::dense_eigensolve(&h1, ctx.cap)?;
            let obs = Observables::full(&spec, params.chiral)?;
            let reference = if physical.contains(start) {
                let heff =
                    effective::second_order_effective(&h0, &gamma, &pp, spec.n(), &physical)?;
                let dec_eff = solver::dense_eigensolve(&heff, ctx.cap)?;
                let c = dec_eff.coefficients(&physical.restrict_vector(&psi_full))?;
                Some(
                    times
                        .iter()
                        .map(|&t| physical.embed_vector(&dec_eff.propagate_coefficients(&c, t)))
                        .collect::<Vec<_>>(),
                )
            } else {
                None
            };
            solver::evolve_with(&dec, &h1, &psi_full, &times, &obs, reference.as_deref())?
        }
    };

    let mut wrote = Vec::new();
    if cfg.wants(Format::Csv) {
        wrote.push(ctx.writer.text("evolve.csv", &series.to_csv())?);
    }
    if cfg.wants(Format::Json) {
        wrote.push(ctx.writer.json(
            "evolve.json",
            json!({
                "norm_drift": series.norm_drift(),
                "energy_drift": series.energy_drift(),
                "max_gamma": series.max_gamma(),
                "series": series,
            }),
        )?);
    }
    println!(
        "samples={} norm_drift={:.3e} energy_drift={:.3e} max_gamma={:.3e}",
        series.len(),
        series.norm_drift(),
        series.energy_drift(),
        series.max_gamma()
    );
    for p in wrote {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(ctx: &Ctx) -> Result<i32> {
    let cfg = &ctx.cfg;
    if cfg.scan.u_values.is_empty() && cfg.scan.n_values.is_empty() {
        return Err(Error::Config(
            "sweep needs scan.u_values or scan.n_values".into(),
        ));
    }
    let spec = cfg.lattice()?;
    let params = cfg.model_params();
    let mut wrote = Vec::new();
    if !cfg.scan.u_values.is_empty() {
        let psi = cfg.initial_state(&spec)?;
        let pts = solver::fidelity_scan(
            &spec,
            &params,
            &cfg.penalty_params(),
            &cfg.scan.u_values,
            cfg.evolve.t_max,
            cfg.evolve.dt,
            &psi,
            ctx.cap,
        )?;
        let slope = solver::decay_exponent(&pts);
        for p in &pts {
            println!("u={} epsilon={}", p.u, solver::fmt_sig12(p.infidelity));
        }
        match slope {
            Some(s) => println!("decay_exponent={s:.6}"),
            None => println!("decay_exponent=undefined"),
        }
        if cfg.wants(Format::Csv) {
            wrote.push(
                ctx.writer
                    .text("sweep_u.csv", &solver::fidelity_csv(&pts))?,
            );
        }
        if cfg.wants(Format::Json) {
            wrote.push(ctx.writer.json(
                "sweep_u.json",
                json!({ "decay_exponent": slope, "points": pts }),
            )?);
        }
    }
    if !cfg.scan.n_values.is_empty() {
        let trend = solver::large_n_trend(
            spec.sites(),
            cfg.boundary(),
            &params,
            &cfg.scan.n_values,
            ctx.cap,
        )?;
        for (n, e0) in &trend {
            println!("n={n} E0={}", solver::fmt_sig12(*e0));
        }
        if cfg.wants(Format::Csv) {
            wrote.push(ctx.writer.text("sweep_n.csv", &solver::trend_csv(&trend))?);
        }
        if cfg.wants(Format::Json) {
            let rows: Vec<_> = trend
                .iter()
                .map(|(n, e0)| json!({ "n": n, "E0": e0 }))
                .collect();
            wrote.push(ctx.writer.json(
                "sweep_n.json",
                json!({
                    "points": rows,
                    "differences": solver::successive_differences(&trend),
                }),
            )?);
        }
    }
    for p in wrote {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}
