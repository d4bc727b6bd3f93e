//! Positivity-preserving split integrator for the conditioned dynamics.
//!
//! One step of length `dt` applies, in order:
//!
//! 1. the Gaussian measurement operator for the record `y` (in innovation
//!    units, `y = dW + η√(8k)⟨σ_ee⟩dt`), diagonal in the σ_ee eigenbasis:
//!    `M_i = exp(√(2kη²) b_i y − 2kη² b_i² dt)`;
//! 2. exact dephasing `exp(−k(1−η²)(b_i − b_j)² dt)` for the unread part of
//!    the measurement channel (the whole channel when unconditioned);
//! 3. the bath: no-jump decay `exp(−½ dt Σ L†L)` and, when averaged, the
//!    jump terms `dt Σ LρL†`;
//! 4. the exact unitary `exp(−iH dt)`;
//! 5. renormalization.
//!
//! Every stage is a completely positive map, so states stay positive and
//! pure states stay pure when `η = 1` and no bath acts. Expanding the
//! measurement operator to first order reproduces the Euler-Maruyama step
//! of [`super::superop::step`].

use crate::error::Result;

use super::config::JumpDirection;

/// Which bath contributions the step includes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BathTerms {
    Off,
    /// Full Lindblad dissipators (ensemble-averaged bath).
    Averaged,
    /// Only the no-jump conditioning; jumps are drawn separately.
    NoJump,
}

/// Rates and step size shared by both propagators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPlan {
    pub dt: f64,
    pub k: f64,
    /// Efficiency of the read-out part; 0 for unconditioned evolution.
    pub eta: f64,
    pub gamma: f64,
    pub n_t: f64,
    pub bath: BathTerms,
}

impl StepPlan {
    /// Strength of the read-out part of the measurement.
    pub fn measured_strength(&self) -> f64 {
        self.k * self.eta * self.eta
    }

    pub fn unread_strength(&self) -> f64 {
        self.k * (1.0 - self.eta * self.eta)
    }

    pub fn down_rate(&self) -> f64 {
        self.gamma * (self.n_t + 1.0)
    }

    pub fn up_rate(&self) -> f64 {
        self.gamma * self.n_t
    }

    /// `log M_i` for a measured eigenvalue `b`.
    pub(crate) fn measurement_log_factor(&self, b: f64, y: f64) -> f64 {
        let km = self.measured_strength();
        (2.0 * km).sqrt() * b * y - 2.0 * km * b * b * self.dt
    }

    /// Record in innovation units given the filter's own mean.
    pub(crate) fn observed(&self, innovation: f64, sigma_ee: f64) -> f64 {
        innovation + self.eta * (8.0 * self.k).sqrt() * sigma_ee * self.dt
    }
}

/// Observables recorded at every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    pub sigma_ee: f64,
    /// Subspace probabilities `m = 0..=n_max`.
    pub p_m: Vec<f64>,
    pub purity: f64,
    pub mean_n: f64,
    /// Population outside the retained subspaces (the truncation orphan).
    pub leakage: f64,
}

pub(crate) trait Propagator {
    type State: Clone;

    fn sigma_ee(&self, state: &Self::State) -> f64;

    /// Advances one step; `record` is `None` for unconditioned evolution.
    fn advance(&self, state: &mut Self::State, record: Option<f64>) -> Result<()>;

    fn jump(&self, state: &mut Self::State, direction: JumpDirection) -> Result<()>;

    /// `(⟨a a†⟩, ⟨a†a⟩)` for the jump probabilities of the sampled bath.
    fn jump_moments(&self, state: &Self::State) -> (f64, f64);

    fn observe(&self, state: &Self::State) -> Observables;

    fn min_eigenvalue(&self, state: &Self::State) -> f64;
}
