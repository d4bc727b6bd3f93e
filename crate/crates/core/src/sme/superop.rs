//! Dense superoperators and the literal Euler-Maruyama step.
//!
//! These operate on full density matrices and are the reference form of
//! the conditioned dynamics
//!
//! ```text
//! dρ = −i[H,ρ]dt + (γ/2)(n_T+1)D[a]ρdt + (γ/2)n_T D[a†]ρdt
//!      + k D[σ_ee]ρdt + √(2k) η H[σ_ee]ρ dW
//! dY = ⟨σ_ee⟩ dt + dW/√(8k)
//! ```
//!
//! with `D[O]ρ = 2OρO† − O†Oρ − ρO†O` and `H[O]ρ = Oρ + ρO† − ⟨O+O†⟩ρ`.
//! The trajectory runners use the positivity-preserving split scheme in
//! [`super::propagator`], which agrees with [`step`] to first order in `dt`.

use crate::algebra::{dagger, enforce_hygiene, expectation, ComplexOperator, DensityMatrix, C64};
use crate::error::{Error, Result};
use crate::model::JointOperators;

use super::config::{JumpDirection, SimulationConfig};

fn check_dims(o: &ComplexOperator, rho: &DensityMatrix) -> Result<()> {
    if o.dim() != rho.dim() {
        return Err(Error::Dimension(format!(
            "operator dimension {} does not match state dimension {}",
            o.dim(),
            rho.dim()
        )));
    }
    Ok(())
}

/// `D[O]ρ = 2OρO† − O†Oρ − ρO†O`.
pub fn dissipator(o: &ComplexOperator, rho: &DensityMatrix) -> Result<ComplexOperator> {
    check_dims(o, rho)?;
    let od = dagger(o);
    let r = rho.operator();
    let odo = &od * o;
    let sandwich = &(o * r) * &od;
    Ok(&sandwich.scale_real(2.0) - &odo.anticommutator(r))
}

/// `H[O]ρ = Oρ + ρO† − ⟨O + O†⟩_ρ ρ`.
pub fn info_gain(o: &ComplexOperator, rho: &DensityMatrix) -> Result<ComplexOperator> {
    check_dims(o, rho)?;
    let r = rho.operator();
    let od = dagger(o);
    let mean = expectation(rho, &(o + &od))?;
    Ok(&(&(o * r) + &(r * &od)) - &r.scale(mean))
}

/// Deterministic part of the conditioned evolution.
pub fn drift_with(
    ops: &JointOperators,
    rho: &DensityMatrix,
    cfg: &SimulationConfig,
) -> Result<ComplexOperator> {
    check_dims(&ops.hamiltonian, rho)?;
    let r = rho.operator();
    let mut out = ops.hamiltonian.commutator(r).scale(C64::new(0.0, -1.0));
    if cfg.k > 0.0 {
        out = &out + &dissipator(&ops.sigma_ee, rho)?.scale_real(cfg.k);
    }
    if cfg.gamma > 0.0 {
        let down = 0.5 * cfg.gamma * (cfg.n_t + 1.0);
        let up = 0.5 * cfg.gamma * cfg.n_t;
        out = &out + &dissipator(&ops.lowering, rho)?.scale_real(down);
        if up > 0.0 {
            out = &out + &dissipator(&ops.raising, rho)?.scale_real(up);
        }
    }
    Ok(out)
}

pub fn drift(rho: &DensityMatrix, cfg: &SimulationConfig) -> Result<ComplexOperator> {
    drift_with(&JointOperators::new(&cfg.model)?, rho, cfg)
}

/// One Euler-Maruyama step followed by hygiene.
pub fn step_with(
    ops: &JointOperators,
    rho: &DensityMatrix,
    dw: f64,
    cfg: &SimulationConfig,
) -> Result<DensityMatrix> {
    let mut next = rho.operator() + &drift_with(ops, rho, cfg)?.scale_real(cfg.dt);
    if cfg.k > 0.0 && cfg.eta > 0.0 && dw != 0.0 {
        let noise = info_gain(&ops.sigma_ee, rho)?.scale_real((2.0 * cfg.k).sqrt() * cfg.eta * dw);
        next = &next + &noise;
    }
    enforce_hygiene(next)
}

pub fn step(rho: &DensityMatrix, dw: f64, cfg: &SimulationConfig) -> Result<DensityMatrix> {
    step_with(&JointOperators::new(&cfg.model)?, rho, dw, cfg)
}

/// `dY = ⟨σ_ee⟩ dt + dW/√(8k)` from a known mean.
pub fn record_increment(sigma_ee: f64, dw: f64, dt: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::config(
            "k",
            "measurement record is undefined for k = 0",
        ));
    }
    Ok(sigma_ee * dt + dw / (8.0 * k).sqrt())
}

/// `dW = √(8k) (dY − ⟨σ_ee⟩ dt)`.
pub fn innovation(dy: f64, sigma_ee: f64, dt: f64, k: f64) -> f64 {
    (8.0 * k).sqrt() * (dy - sigma_ee * dt)
}

/// `⟨σ_ee⟩` for a joint-space state (odd basis indices carry the qubit in `e`).
pub fn sigma_ee_expectation(rho: &DensityMatrix) -> f64 {
    (1..rho.dim()).step_by(2).map(|i| rho.get(i, i).re).sum()
}

pub fn synthesize_record(rho: &DensityMatrix, dw: f64, cfg: &SimulationConfig) -> Result<f64> {
    record_increment(sigma_ee_expectation(rho), dw, cfg.dt, cfg.k)
}

pub fn extract_innovation(dy: f64, rho_est: &DensityMatrix, cfg: &SimulationConfig) -> f64 {
    innovation(dy, sigma_ee_expectation(rho_est), cfg.dt, cfg.k)
}

/// `ρ → JρJ†/Tr[JρJ†]` with `J = a†⊗I` (up) or `a⊗I` (down).
pub fn apply_jump_with(
    ops: &JointOperators,
    rho: &DensityMatrix,
    direction: JumpDirection,
) -> Result<DensityMatrix> {
    check_dims(&ops.lowering, rho)?;
    let j = match direction {
        JumpDirection::Up => &ops.raising,
        JumpDirection::Down => &ops.lowering,
    };
    let out = &(j * rho.operator()) * &dagger(j);
    let norm = out.trace().re;
    if !(norm > 1e-14) {
        return Err(Error::ZeroNormJump(format!(
            "{direction} jump on a state with norm {norm:.3e}"
        )));
    }
    enforce_hygiene(out)
}

pub fn apply_jump(
    rho: &DensityMatrix,
    direction: JumpDirection,
    cfg: &SimulationConfig,
) -> Result<DensityMatrix> {
    apply_jump_with(&JointOperators::new(&cfg.model)?, rho, direction)
}
