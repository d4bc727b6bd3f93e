//! Jaynes-Cummings operators, initial states and the total-excitation
//! subspace structure.
//!
//! The truncated joint space holds oscillator levels `0..=n_max` times the
//! qubit `(g, e)`. Total excitation `m = n + [q = e]` splits it into the
//! subspaces `{|0,g⟩}`, `{|m,g⟩, |m−1,e⟩}` for `1 ≤ m ≤ n_max`, and the
//! orphan `|n_max, e⟩` whose partner `|n_max+1, g⟩` was truncated away.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::{dagger, kron, ComplexOperator, DensityMatrix, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl Qubit {
    pub fn index(self) -> usize {
        match self {
            Qubit::Ground => 0,
            Qubit::Excited => 1,
        }
    }
}

impl FromStr for Qubit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(Qubit::Ground),
            "e" => Ok(Qubit::Excited),
            other => Err(Error::config(
                "qubit",
                format!("unknown label `{other}`, expected g or e"),
            )),
        }
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Qubit::Ground => "g",
            Qubit::Excited => "e",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Oscillator and qubit angular frequency, in units of `g`.
    pub omega: f64,
    /// Coupling strength; sets the time unit.
    pub g: f64,
    /// Fock truncation.
    pub n_max: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            omega: 0.0,
            g: 1.0,
            n_max: 25,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) || !self.g.is_finite() {
            return Err(Error::config("g", "must be positive"));
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(Error::config("omega", "must be non-negative"));
        }
        if self.n_max < 1 {
            return Err(Error::config("n_max", "must be at least 1"));
        }
        if 2 * (self.n_max + 1) > crate::algebra::MAX_DIM {
            return Err(Error::config("n_max", "joint dimension too large"));
        }
        Ok(())
    }

    pub fn joint_dim(&self) -> usize {
        2 * (self.n_max + 1)
    }
}

/// Index of `|n, q⟩` in the oscillator ⊗ qubit basis.
pub fn joint_index(n: usize, q: Qubit) -> usize {
    2 * n + q.index()
}

/// Index of the truncation orphan `|n_max, e⟩`.
pub fn orphan_index(n_max: usize) -> usize {
    joint_index(n_max, Qubit::Excited)
}

/// Total excitation of a joint basis index.
pub fn excitation_of(index: usize) -> usize {
    index / 2 + index % 2
}

/// Truncated annihilation operator with `⟨n−1|a|n⟩ = √n`.
pub fn annihilation(n_max: usize) -> ComplexOperator {
    let d = n_max + 1;
    let mut entries = vec![C64::new(0.0, 0.0); d * d];
    for n in 1..d {
        entries[(n - 1) * d + n] = C64::new((n as f64).sqrt(), 0.0);
    }
    ComplexOperator::from_rows(d, &entries).expect("square by construction")
}

/// `|i⟩⟨j|` in the qubit basis `(g, e)`.
pub fn qubit_sigma(i: Qubit, j: Qubit) -> ComplexOperator {
    let mut entries = [C64::new(0.0, 0.0); 4];
    entries[i.index() * 2 + j.index()] = C64::new(1.0, 0.0);
    ComplexOperator::from_rows(2, &entries).expect("2x2")
}

/// Joint-space operators used throughout the simulation.
#[derive(Clone, Debug)]
pub struct JointOperators {
    pub hamiltonian: ComplexOperator,
    pub sigma_ee: ComplexOperator,
    /// `a ⊗ I`.
    pub lowering: ComplexOperator,
    /// `a† ⊗ I`.
    pub raising: ComplexOperator,
    /// `a†a ⊗ I`.
    pub number: ComplexOperator,
    pub total_excitation: ComplexOperator,
}

impl JointOperators {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let a = annihilation(cfg.n_max);
        let ad = dagger(&a);
        let i_osc = ComplexOperator::identity(cfg.n_max + 1);
        let i_q = ComplexOperator::identity(2);
        let see = qubit_sigma(Qubit::Excited, Qubit::Excited);
        let sge = qubit_sigma(Qubit::Ground, Qubit::Excited);
        let seg = qubit_sigma(Qubit::Excited, Qubit::Ground);

        let levels: Vec<f64> = (0..=cfg.n_max).map(|n| n as f64).collect();
        let number = kron(&ComplexOperator::from_real_diagonal(&levels), &i_q)?;
        let sigma_ee = kron(&i_osc, &see)?;
        let total_excitation = &number + &sigma_ee;
        let coupling = &kron(&ad, &sge)? + &kron(&a, &seg)?;
        let hamiltonian = &total_excitation.scale_real(cfg.omega) + &coupling.scale_real(cfg.g);
        Ok(Self {
            hamiltonian,
            sigma_ee,
            lowering: kron(&a, &i_q)?,
            raising: kron(&ad, &i_q)?,
            number,
            total_excitation,
        })
    }
}

/// `H = ω(a†a ⊗ I + I ⊗ σ_ee) + g(a† ⊗ σ_ge + a ⊗ σ_eg)`.
pub fn build_hamiltonian(cfg: &ModelConfig) -> Result<ComplexOperator> {
    Ok(JointOperators::new(cfg)?.hamiltonian)
}

/// `N = a†a ⊗ I + I ⊗ σ_ee`.
pub fn total_excitation(cfg: &ModelConfig) -> Result<ComplexOperator> {
    Ok(JointOperators::new(cfg)?.total_excitation)
}

/// Eigenspace projectors of the total excitation, `m = 0..=n_max`.
#[derive(Clone, Debug)]
pub struct SubspaceDecomposition {
    pub projectors: Vec<ComplexOperator>,
    pub dims: Vec<usize>,
    /// Basis indices spanned by each projector.
    pub members: Vec<Vec<usize>>,
}

pub fn subspace_decomposition(cfg: &ModelConfig) -> Result<SubspaceDecomposition> {
    cfg.validate()?;
    let dim = cfg.joint_dim();
    let members: Vec<Vec<usize>> = (0..=cfg.n_max)
        .map(|m| subspace_members(m, cfg.n_max))
        .collect();
    let projectors = members
        .iter()
        .map(|idx| {
            let mut diag = vec![0.0; dim];
            for &i in idx {
                diag[i] = 1.0;
            }
            ComplexOperator::from_real_diagonal(&diag)
        })
        .collect();
    let dims = members.iter().map(Vec::len).collect();
    Ok(SubspaceDecomposition {
        projectors,
        dims,
        members,
    })
}

/// Basis indices with total excitation `m`, in the order `(|m,g⟩, |m−1,e⟩)`.
/// `m = n_max + 1` yields the orphan alone.
pub fn subspace_members(m: usize, n_max: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2);
    if m <= n_max {
        out.push(joint_index(m, Qubit::Ground));
    }
    if m >= 1 && m - 1 <= n_max {
        out.push(joint_index(m - 1, Qubit::Excited));
    }
    out
}

/// Thermal oscillator state together with the probability mass cut off by
/// the truncation.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub state: DensityMatrix,
    pub leakage: f64,
}

/// Bose-Einstein weights `n̄ⁿ/(1+n̄)^{n+1}` for `n = 0..=n_max`, unnormalized.
pub fn bose_einstein_weights(n_bar: f64, n_max: usize) -> Vec<f64> {
    if n_bar == 0.0 {
        let mut w = vec![0.0; n_max + 1];
        w[0] = 1.0;
        return w;
    }
    let q = n_bar / (1.0 + n_bar);
    let mut w = Vec::with_capacity(n_max + 1);
    let mut p = 1.0 / (1.0 + n_bar);
    for _ in 0..=n_max {
        w.push(p);
        p *= q;
    }
    w
}

pub fn thermal_state(n_bar: f64, n_max: usize) -> Result<ThermalState> {
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return Err(Error::config("n_bar", "must be non-negative"));
    }
    if n_max < 1 {
        return Err(Error::config("n_max", "must be at least 1"));
    }
    let weights = bose_einstein_weights(n_bar, n_max);
    let leakage = (n_bar / (1.0 + n_bar)).powi(n_max as i32 + 1);
    Ok(ThermalState {
        state: DensityMatrix::diagonal(&weights)?,
        leakage,
    })
}

pub fn fock_state(n: usize, n_max: usize) -> Result<DensityMatrix> {
    DensityMatrix::basis(n, n_max + 1)
}

/// `ρ_osc ⊗ |q⟩⟨q|`.
pub fn initial_joint_state(rho_osc: &DensityMatrix, qubit: Qubit) -> Result<DensityMatrix> {
    let q = DensityMatrix::basis(qubit.index(), 2)?;
    DensityMatrix::new(kron(rho_osc.operator(), q.operator())?)
}
