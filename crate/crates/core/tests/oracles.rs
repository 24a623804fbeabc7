//! Independent dense re-derivations of the values the library computes.

use nalgebra::DMatrix;
use znlgt::effective::{self, compare_effective, physical_projector};
use znlgt::hamiltonians::{
    self, gamma_gap, CountertermMode, DensityForm, ModelParams, PenaltyParams,
};
use znlgt::lattice::{self, Boundary, LatticeSpec};
use znlgt::solver::{self, dense_eigensolve, DEFAULT_DENSE_CAP};
use znlgt::{SparseOperator, C64};

fn specs() -> Vec<LatticeSpec> {
    vec![
        LatticeSpec::open(2, 3).unwrap(),
        LatticeSpec::open(3, 3).unwrap(),
        LatticeSpec::open(3, 2).unwrap(),
        LatticeSpec::open(4, 4).unwrap(),
        LatticeSpec::new(
            3,
            5,
            Boundary::Open {
                left_background: 2,
                right_background: 2,
            },
        )
        .unwrap(),
        LatticeSpec::periodic(3, 3).unwrap(),
        LatticeSpec::periodic(4, 2).unwrap(),
    ]
}

/// `P H0 P - P H0 Q (u Gamma / gamma_n)^+ Q H0 P` on the sector, from the
/// dense sector rows `A = P H0`: `A_P - A D A^dag` with `D` the diagonal of
/// `Q (u Gamma / gamma_n)^+ Q`.
fn dense_second_order(
    h0: &SparseOperator,
    gamma: &SparseOperator,
    u: f64,
    n: usize,
    sector: &[usize],
) -> DMatrix<C64> {
    let dim = h0.dim();
    let h = h0.to_dense();
    let a = DMatrix::from_fn(sector.len(), dim, |r, c| h[(sector[r], c)]);
    let mut ad = a.clone();
    for c in 0..dim {
        let g = gamma.get(c, c).re * u / gamma_gap(n);
        let d = if sector.contains(&c) || g.abs() <= 1e-12 {
            0.0
        } else {
            1.0 / g
        };
        ad.column_mut(c).scale_mut(d);
    }
    let app = DMatrix::from_fn(sector.len(), sector.len(), |r, c| a[(r, sector[c])]);
    app - ad * a.adjoint()
}

fn max_dev(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}

#[test]
fn second_order_matches_dense_construction() {
    let params = ModelParams::default();
    for spec in specs() {
        for pp in [
            PenaltyParams::default(),
            PenaltyParams {
                t_tilde: 0.3,
                w_tilde: 1.0,
                u: 10.0,
                counterterm_mode: CountertermMode::Auto,
            },
        ] {
            let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec).unwrap();
            let gamma = hamiltonians::build_gamma(&spec);
            let proj = physical_projector(&spec);
            let got = effective::second_order_effective(&h0, &gamma, &pp, spec.n(), &proj)
                .unwrap()
                .to_dense();
            let want = dense_second_order(&h0, &gamma, pp.u, spec.n(), proj.indices());
            assert!(max_dev(&got, &want) <= 1e-12, "{spec:?}");
        }
    }
}

#[test]
fn closed_form_matches_dense_second_order() {
    let params = ModelParams {
        t: 1.0,
        m: 0.3,
        g2: 0.8,
        chiral: false,
    };
    for spec in specs() {
        if spec.is_periodic() && spec.sites() < 3 {
            continue;
        }
        let pp = PenaltyParams {
            t_tilde: 0.9,
            w_tilde: 0.4,
            u: 20.0,
            counterterm_mode: CountertermMode::Off,
        };
        let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec).unwrap();
        let gamma = hamiltonians::build_gamma(&spec);
        let proj = physical_projector(&spec);
        let dense = dense_second_order(&h0, &gamma, pp.u, spec.n(), proj.indices());
        let dense = SparseOperator::from_dense(&dense, true).unwrap();
        let target = hamiltonians::build_target_effective(&pp, &params, &spec).unwrap();
        assert!(
            compare_effective(&dense, &target).unwrap() <= 1e-10,
            "{spec:?}"
        );
    }
}

#[test]
fn periodic_two_site_target_is_rejected() {
    let spec = LatticeSpec::periodic(2, 3).unwrap();
    assert!(hamiltonians::build_target_effective(
        &PenaltyParams::default(),
        &ModelParams::default(),
        &spec
    )
    .is_err());
}

#[test]
fn published_density_form_deviates() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let pp = PenaltyParams::default();
    let params = ModelParams::default();
    let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec).unwrap();
    let gamma = hamiltonians::build_gamma(&spec);
    let proj = physical_projector(&spec);
    let heff = effective::second_order_effective(&h0, &gamma, &pp, 3, &proj).unwrap();
    let published =
        hamiltonians::build_target_effective_with(&pp, &params, &spec, DensityForm::Published)
            .unwrap();
    let dev = compare_effective(&heff, &published).unwrap();
    // the density term is of order t_tilde^2 / u
    assert!(dev > 1e-3 && dev < 1e-1, "{dev}");
}

#[test]
fn n2_hopping_is_doubled() {
    // for n = 2 the raising and lowering link rotations coincide
    let pp = PenaltyParams::default();
    assert_eq!(
        hamiltonians::effective_hopping_amplitude(&pp, 2),
        -2.0 * 0.7 / 50.0
    );
    assert_eq!(
        hamiltonians::effective_hopping_amplitude(&pp, 3),
        -0.7 / 50.0
    );
}

/// Gauss exponent recomputed from the decoded state.
fn brute_sector_dim(spec: &LatticeSpec) -> usize {
    let n = spec.n() as i64;
    let l = spec.sites();
    (0..spec.full_dim())
        .filter(|&idx| {
            let s = lattice::decode(lattice::StateIndex(idx), spec).unwrap();
            (0..l).all(|x| {
                let right = if x + 1 < l || spec.is_periodic() {
                    s.links[x] as i64
                } else {
                    match spec.boundary() {
                        Boundary::Open {
                            right_background, ..
                        } => right_background as i64,
                        Boundary::Periodic => unreachable!(),
                    }
                };
                let left = if x > 0 {
                    s.links[x - 1] as i64
                } else if spec.is_periodic() {
                    s.links[l - 1] as i64
                } else {
                    match spec.boundary() {
                        Boundary::Open {
                            left_background, ..
                        } => left_background as i64,
                        Boundary::Periodic => unreachable!(),
                    }
                };
                let e = s.occupations[x] as i64 - (x % 2) as i64 - right + left;
                e.rem_euclid(n) == 0
            })
        })
        .count()
}

#[test]
fn sector_dimensions_brute_force() {
    for spec in specs() {
        assert_eq!(
            lattice::physical_filter(&spec).len(),
            brute_sector_dim(&spec),
            "{spec:?}"
        );
    }
    assert_eq!(
        lattice::physical_filter(&LatticeSpec::open(2, 3).unwrap()).len(),
        2
    );
    assert_eq!(LatticeSpec::open(4, 3).unwrap().full_dim(), 432);
}

#[test]
fn periodic_charge_rule() {
    // periodic, even L: nonempty iff the filling N = L/2 mod n, with all
    // charges zero; here only the fermion number constraint is checked
    for (l, n) in [(2, 3), (4, 3), (4, 2), (4, 5)] {
        let spec = LatticeSpec::periodic(l, n).unwrap();
        for idx in lattice::physical_filter(&spec) {
            let filling = spec.occupation_bits(idx.0).count_ones() as usize;
            assert_eq!(filling % n, (l / 2) % n);
        }
    }
}

#[test]
fn ground_state_energy_converges_with_u() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let params = ModelParams::default();
    let pp = PenaltyParams {
        u: 1000.0,
        ..Default::default()
    };
    let h0 = hamiltonians::build_uncoupled_hamiltonian(&pp, &params, &spec).unwrap();
    let gamma = hamiltonians::build_gamma(&spec);
    let h1 = hamiltonians::build_penalized(&h0, &gamma, &pp, 3).unwrap();
    let proj = physical_projector(&spec);
    let heff = effective::second_order_effective(&h0, &gamma, &pp, 3, &proj).unwrap();
    let e_full = dense_eigensolve(&h1, DEFAULT_DENSE_CAP)
        .unwrap()
        .ground_energy()
        .unwrap();
    let e_eff = dense_eigensolve(&heff, DEFAULT_DENSE_CAP)
        .unwrap()
        .ground_energy()
        .unwrap();
    assert!(
        (e_full - e_eff).abs() < 1e-2 * pp.t_tilde,
        "{e_full} {e_eff}"
    );
}

#[test]
fn reconstruction_within_contract() {
    for spec in specs().into_iter().filter(|s| s.full_dim() <= 300) {
        let h = hamiltonians::build_gauge_hamiltonian(&ModelParams::default(), &spec).unwrap();
        let dec = dense_eigensolve(&h, DEFAULT_DENSE_CAP).unwrap();
        let r = dec.reconstruction_residual(&h).unwrap();
        assert!(r <= 1e-10 * dec.spectral_radius().max(1.0), "{spec:?} {r}");
        assert!(dec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let sea = lattice::encode(&lattice::dirac_sea_state(&spec, 0).unwrap(), &spec)
        .unwrap()
        .0;
    let mut psi = vec![C64::new(0.0, 0.0); spec.full_dim()];
    psi[sea] = C64::new(1.0, 0.0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            solver::fidelity_scan(
                &spec,
                &ModelParams::default(),
                &PenaltyParams::default(),
                &[10.0, 40.0],
                2.0,
                0.25,
                &psi,
                4096,
            )
            .unwrap()
            .iter()
            .map(|p| p.infidelity)
            .collect::<Vec<_>>()
        })
    };
    assert_eq!(run(1), run(4));
}
