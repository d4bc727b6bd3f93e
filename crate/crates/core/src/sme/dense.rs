//! Dense propagation with the same split scheme as the block propagator.
//!
//! Used for states with coherences between excitation subspaces, for
//! small generic systems, and as a cross-check of the block path.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::algebra::{enforce_hygiene, ComplexOperator, DensityMatrix, C64};
use crate::error::{Error, Result};
use crate::model::{subspace_members, JointOperators, ModelConfig};

use super::config::JumpDirection;
use super::propagator::{BathTerms, Observables, Propagator, StepPlan};

/// Operators defining a monitored system on a dense Hilbert space.
#[derive(Clone, Debug)]
pub struct DenseSystem {
    pub hamiltonian: ComplexOperator,
    /// Diagonal of the measured observable `B`.
    pub measured: Vec<f64>,
    /// Bath lowering operator; its adjoint raises.
    pub lowering: Option<ComplexOperator>,
    /// Basis indices of each tracked subspace.
    pub subspaces: Vec<Vec<usize>>,
    /// Diagonal of the oscillator number operator.
    pub number: Vec<f64>,
}

impl DenseSystem {
    pub fn jaynes_cummings(model: &ModelConfig, ops: &JointOperators) -> Self {
        let diag =
            |op: &ComplexOperator| (0..op.dim()).map(|i| op.get(i, i).re).collect::<Vec<_>>();
        Self {
            hamiltonian: ops.hamiltonian.clone(),
            measured: diag(&ops.sigma_ee),
            lowering: Some(ops.lowering.clone()),
            subspaces: (0..=model.n_max)
                .map(|m| subspace_members(m, model.n_max))
                .collect(),
            number: diag(&ops.number),
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

pub(crate) struct DensePropagator {
    system: DenseSystem,
    plan: StepPlan,
    unitary: DMatrix<C64>,
    unitary_adj: DMatrix<C64>,
    decay: Vec<f64>,
    lowering: Option<(DMatrix<C64>, DMatrix<C64>)>,
    anti_number: Vec<f64>,
}

fn diagonal_of(m: &DMatrix<C64>, what: &str) -> Result<Vec<f64>> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].norm() > 1e-12 {
                return Err(Error::Dimension(format!("{what} must be diagonal")));
            }
        }
    }
    Ok((0..n).map(|i| m[(i, i)].re).collect())
}

impl DensePropagator {
    pub fn new(system: DenseSystem, plan: StepPlan) -> Result<Self> {
        let dim = system.dim();
        if system.measured.len() != dim || system.number.len() != dim {
            return Err(Error::Dimension(
                "measured/number diagonals do not match H".into(),
            ));
        }
        let eig = SymmetricEigen::new(system.hamiltonian.matrix().clone());
        let phases = eig.eigenvalues.map(|e| C64::new(0.0, -e * plan.dt).exp());
        let unitary =
            &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();
        let unitary_adj = unitary.adjoint();

        let (lowering, number_like, anti_number) = match &system.lowering {
            Some(a) => {
                let a = a.matrix().clone();
                let ad = a.adjoint();
                let n = diagonal_of(&(&ad * &a), "a†a")?;
                let anti = diagonal_of(&(&a * &ad), "aa†")?;
                (Some((a, ad)), n, anti)
            }
            None => (None, vec![0.0; dim], vec![0.0; dim]),
        };
        let decay = if plan.bath == BathTerms::Off {
            vec![1.0; dim]
        } else {
            number_like
                .iter()
                .zip(&anti_number)
                .map(|(n, an)| {
                    (-0.5 * plan.dt * (plan.down_rate() * n + plan.up_rate() * an)).exp()
                })
                .collect()
        };
        Ok(Self {
            system,
            plan,
            unitary,
            unitary_adj,
            decay,
            lowering,
            anti_number,
        })
    }
}

impl Propagator for DensePropagator {
    type State = DensityMatrix;

    fn sigma_ee(&self, rho: &DensityMatrix) -> f64 {
        self.system
            .measured
            .iter()
            .enumerate()
            .map(|(i, b)| b * rho.get(i, i).re)
            .sum()
    }

    fn advance(&self, rho: &mut DensityMatrix, record: Option<f64>) -> Result<()> {
        let y = record.unwrap_or(0.0);
        let dim = rho.dim();
        let b = &self.system.measured;
        let f: Vec<f64> = (0..dim)
            .map(|i| self.plan.measurement_log_factor(b[i], y).exp() * self.decay[i])
            .collect();
        let unread = self.plan.unread_strength() * self.plan.dt;
        let old = rho.operator().matrix();
        let mut next = DMatrix::from_fn(dim, dim, |i, j| {
            old[(i, j)] * (f[i] * f[j] * (-unread * (b[i] - b[j]).powi(2)).exp())
        });
        if self.plan.bath == BathTerms::Averaged {
            if let Some((a, ad)) = &self.lowering {
                let dt = self.plan.dt;
                next += (a * old * ad) * C64::new(dt * self.plan.down_rate(), 0.0);
                if self.plan.up_rate() > 0.0 {
                    next += (ad * old * a) * C64::new(dt * self.plan.up_rate(), 0.0);
                }
            }
        }
        let rotated = &self.unitary * next * &self.unitary_adj;
        *rho = enforce_hygiene(ComplexOperator::from_matrix_unchecked(rotated))?;
        Ok(())
    }

    fn jump(&self, rho: &mut DensityMatrix, direction: JumpDirection) -> Result<()> {
        let (a, ad) = self
            .lowering
            .as_ref()
            .ok_or_else(|| Error::ZeroNormJump("system has no bath operator".into()))?;
        let old = rho.operator().matrix();
        let out = match direction {
            JumpDirection::Down => a * old * ad,
            JumpDirection::Up => ad * old * a,
        };
        let norm = out.trace().re;
        if !(norm > 1e-14) {
            return Err(Error::ZeroNormJump(format!(
                "{direction} jump on a state with norm {norm:.3e}"
            )));
        }
        *rho = enforce_hygiene(ComplexOperator::from_matrix_unchecked(out))?;
        Ok(())
    }

    fn jump_moments(&self, rho: &DensityMatrix) -> (f64, f64) {
        (0..rho.dim()).fold((0.0, 0.0), |(aad, ada), i| {
            let p = rho.get(i, i).re;
            (
                aad + self.anti_number[i] * p,
                ada + self.system.number[i] * p,
            )
        })
    }

    fn observe(&self, rho: &DensityMatrix) -> Observables {
        let pops = rho.populations();
        let p_m: Vec<f64> = self
            .system
            .subspaces
            .iter()
            .map(|idx| idx.iter().map(|&i| pops[i]).sum())
            .collect();
        let retained: f64 = p_m.iter().sum();
        let total: f64 = pops.iter().sum();
        Observables {
            sigma_ee: self.sigma_ee(rho),
            p_m,
            purity: crate::algebra::purity(rho),
            mean_n: pops
                .iter()
                .zip(&self.system.number)
                .map(|(p, n)| p * n)
                .sum(),
            leakage: total - retained,
        }
    }

    fn min_eigenvalue(&self, rho: &DensityMatrix) -> f64 {
        rho.min_eigenvalue()
    }
}
