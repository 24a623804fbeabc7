//! Run configuration: TOML, or JSON with the same schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonians::{CountertermMode, ModelParams, PenaltyParams};
use crate::lattice::{self, Boundary, LatticeSpec, StateIndex};
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Open,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    #[serde(rename = "L")]
    pub sites: usize,
    pub boundary: BoundaryKind,
    pub b_left: usize,
    pub b_right: usize,
    pub t: f64,
    pub m: f64,
    pub g2: f64,
    pub chiral: bool,
    /// Static charge per site selecting a Gauss-law sector; physical sector
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<i64>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ModelParams::default();
        ModelSection {
            n: 3,
            sites: 3,
            boundary: BoundaryKind::Open,
            b_left: 0,
            b_right: 0,
            t: p.t,
            m: p.m,
            g2: p.g2,
            chiral: p.chiral,
            charges: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltySection {
    pub t_tilde: f64,
    pub w_tilde: f64,
    pub u: f64,
    pub counterterm_mode: CountertermMode,
}

impl Default for PenaltySection {
    fn default() -> Self {
        let p = PenaltyParams::default();
        PenaltySection {
            t_tilde: p.t_tilde,
            w_tilde: p.w_tilde,
            u: p.u,
            counterterm_mode: p.counterterm_mode,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    DiracSea { k0: usize },
    String { x_even: usize, x_odd: usize },
    Basis { index: usize },
}

/// Generator used by `evolve`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolveHamiltonian {
    /// `H_n`, on the sector when the initial state is in it.
    #[default]
    Gauge,
    /// `H_(1)` on the full space, with fidelity against the effective run.
    Penalized,
    /// Second-order effective Hamiltonian on the physical sector.
    Effective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub t_max: f64,
    pub dt: f64,
    pub hamiltonian: EvolveHamiltonian,
    pub initial: InitialState,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            t_max: 5.0,
            dt: 0.05,
            hamiltonian: EvolveHamiltonian::Gauge,
            initial: InitialState::DiracSea { k0: 0 },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub u_values: Vec<f64>,
    pub n_values: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".into(),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// Parameter grid for `effective`; unset lists fall back to the single
/// value from `model` / `penalty`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifySection {
    #[serde(rename = "L")]
    pub sites: Vec<usize>,
    pub n_values: Vec<usize>,
    pub t_tilde: Vec<f64>,
    pub w_tilde: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub penalty: PenaltySection,
    pub evolve: EvolveSection,
    pub scan: ScanSection,
    pub output: OutputSection,
    pub certify: CertifySection,
}

fn bound(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    bound(v.is_finite(), || format!("{name} must be finite (got {v})"))
}

impl RunConfig {
    /// Parses and validates; `.json` files are read as JSON, anything else
    /// as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        bound(m.n >= 2, || format!("model.n must be >= 2 (got {})", m.n))?;
        bound(m.sites >= 2, || {
            format!("model.L must be >= 2 (got {})", m.sites)
        })?;
        bound(m.sites <= 62, || {
            format!("model.L must be <= 62 (got {})", m.sites)
        })?;
        bound(m.b_left < m.n, || {
            format!("model.b_left must be < n (got {})", m.b_left)
        })?;
        bound(m.b_right < m.n, || {
            format!("model.b_right must be < n (got {})", m.b_right)
        })?;
        for (k, v) in [("model.t", m.t), ("model.m", m.m), ("model.g2", m.g2)] {
            finite(k, v)?;
        }
        bound(m.t >= 0.0, || format!("model.t must be >= 0 (got {})", m.t))?;
        if let Some(q) = &m.charges {
            bound(q.len() == m.sites, || {
                format!(
                    "model.charges must have L = {} entries (got {})",
                    m.sites,
                    q.len()
                )
            })?;
        }

        let p = &self.penalty;
        for (k, v) in [
            ("penalty.t_tilde", p.t_tilde),
            ("penalty.w_tilde", p.w_tilde),
            ("penalty.u", p.u),
        ] {
            finite(k, v)?;
        }
        bound(p.u > 0.0, || format!("penalty.u must be > 0 (got {})", p.u))?;
        if let CountertermMode::Manual { bond_density } = p.counterterm_mode {
            finite("penalty.counterterm_mode.manual.bond_density", bond_density)?;
        }

        let e = &self.evolve;
        finite("evolve.dt", e.dt)?;
        finite("evolve.t_max", e.t_max)?;
        bound(e.dt > 0.0, || {
            format!("evolve.dt must be > 0 (got {})", e.dt)
        })?;
        bound(e.t_max >= e.dt, || {
            format!("evolve.t_max must be >= dt (got {} < {})", e.t_max, e.dt)
        })?;

        for &u in &self.scan.u_values {
            finite("scan.u_values", u)?;
            bound(u > 0.0, || format!("scan.u_values must be > 0 (got {u})"))?;
        }
        for &n in &self.scan.n_values {
            bound(n >= 2, || format!("scan.n_values must be >= 2 (got {n})"))?;
        }

        let c = &self.certify;
        for &l in &c.sites {
            bound(l >= 2, || format!("certify.L must be >= 2 (got {l})"))?;
        }
        for &n in &c.n_values {
            bound(n >= 2, || {
                format!("certify.n_values must be >= 2 (got {n})")
            })?;
        }
        for (k, vs) in [
            ("certify.t_tilde", &c.t_tilde),
            ("certify.w_tilde", &c.w_tilde),
        ] {
            for &v in vs {
                finite(k, v)?;
            }
        }
        for &u in &c.u {
            finite("certify.u", u)?;
            bound(u > 0.0, || format!("certify.u must be > 0 (got {u})"))?;
        }

        bound(!self.output.directory.is_empty(), || {
            "output.directory must not be empty".into()
        })?;
        self.lattice()?;
        Ok(())
    }

    pub fn boundary(&self) -> Boundary {
        match self.model.boundary {
            BoundaryKind::Open => Boundary::Open {
                left_background: self.model.b_left,
                right_background: self.model.b_right,
            },
            BoundaryKind::Periodic => Boundary::Periodic,
        }
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.model.sites, self.model.n, self.boundary())
            .map_err(|e| Error::Config(format!("model: {e}")))
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            t: self.model.t,
            m: self.model.m,
            g2: self.model.g2,
            chiral: self.model.chiral,
        }
    }

    pub fn penalty_params(&self) -> PenaltyParams {
        PenaltyParams {
            t_tilde: self.penalty.t_tilde,
            w_tilde: self.penalty.w_tilde,
            u: self.penalty.u,
            counterterm_mode: self.penalty.counterterm_mode,
        }
    }

    /// Sector basis selected by `model.charges`, physical by default.
    pub fn sector(&self, spec: &LatticeSpec) -> Result<Vec<StateIndex>> {
        match &self.model.charges {
            Some(q) => lattice::sector_filter(q, spec),
            None => Ok(lattice::physical_filter(spec)),
        }
    }

    /// Full-space vector of `evolve.initial`.
    pub fn initial_state(&self, spec: &LatticeSpec) -> Result<Vec<C64>> {
        let idx = match self.evolve.initial {
            InitialState::DiracSea { k0 } => {
                lattice::encode(&lattice::dirac_sea_state(spec, k0)?, spec)?.0
            }
            InitialState::String { x_even, x_odd } => {
                lattice::encode(&lattice::string_state(spec, x_even, x_odd)?, spec)?.0
            }
            InitialState::Basis { index } => {
                if index >= spec.full_dim() {
                    return Err(Error::OutOfRange {
                        what: "evolve.initial.index",
                        value: index as i64,
                        allowed: format!("0..{}", spec.full_dim()),
                    });
                }
                index
            }
        };
        let mut psi = vec![C64::new(0.0, 0.0); spec.full_dim()];
        psi[idx] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model.n, 3);
        assert_eq!(cfg.model.sites, 3);
    }

    #[test]
    fn toml_and_json_agree() {
        let toml_text = r#"
[model]
n = 4
L = 2
boundary = "periodic"
t = 0.5

[penalty]
counterterm_mode = { manual = { bond_density = 0.25 } }

[evolve]
initial = { kind = "string", x_even = 0, x_odd = 1 }
"#;
        let json_text = r#"{
  "model": {"n": 4, "L": 2, "boundary": "periodic", "t": 0.5},
  "penalty": {"counterterm_mode": {"manual": {"bond_density": 0.25}}},
  "evolve": {"initial": {"kind": "string", "x_even": 0, "x_odd": 1}}
}"#;
        let a = RunConfig::from_toml(toml_text).unwrap();
        let b = RunConfig::from_json(json_text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig::default().hash());
        assert_eq!(a.boundary(), Boundary::Periodic);
    }

    #[test]
    fn violated_bounds_are_named() {
        let err = RunConfig::from_toml("[model]\nn = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("model.n must be >= 2"), "{err}");
        let err = RunConfig::from_toml("[evolve]\ndt = 0.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("evolve.dt must be > 0"), "{err}");
        let err = RunConfig::from_toml("[evolve]\ndt = 1.0\nt_max = 0.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("evolve.t_max must be >= dt"), "{err}");
        let err = RunConfig::from_toml("[penalty]\nu = -1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("penalty.u must be > 0"), "{err}");
        assert!(RunConfig::from_toml("[model]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[model]\ncharges = [0, 0]\n").is_err());
    }

    #[test]
    fn initial_states() {
        let cfg = RunConfig::default();
        let spec = cfg.lattice().unwrap();
        let psi = cfg.initial_state(&spec).unwrap();
        let idx = psi.iter().position(|z| z.re == 1.0).unwrap();
        assert!(lattice::is_physical(StateIndex(idx), &spec));
        let mut cfg = RunConfig::default();
        cfg.evolve.initial = InitialState::Basis { index: 10_000 };
        assert!(cfg.initial_state(&spec).is_err());
    }
}
