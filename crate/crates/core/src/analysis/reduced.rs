//! Reduced subspace dynamics as an oracle for the full conditioned evolution.
//!
//! For a state that is a mixture of pure states, one per invariant subspace
//! of a measured observable that commutes with `H`, the subspace weights
//! obey `dp_m = √(8k) p_m (⟨B⟩_m − ⟨B⟩_ρ) dW` and each `|ψ_m⟩` follows its
//! own stochastic Schrödinger equation driven by the same record. This
//! module integrates those equations next to the full dense evolution
//! with one shared noise path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::algebra::{ComplexOperator, DensityMatrix, C64};
use crate::error::{Error, Result};
use crate::model::{orphan_index, subspace_members, JointOperators, ModelConfig};
use crate::sme::{
    BathTerms, DensePropagator, DenseSystem, Propagator, SimulationConfig, StepPlan,
    WienerIncrements,
};

/// Coherence between subspaces above which a state is not of ansatz form.
pub const ANSATZ_TOL: f64 = 1e-12;

/// One invariant subspace: its Hamiltonian and the diagonal of `B` on it.
#[derive(Clone, Debug)]
pub struct SubspaceBlock {
    pub hamiltonian: DMatrix<C64>,
    pub measured: Vec<f64>,
}

/// A block-diagonal system; the full space is the direct sum of the blocks
/// in order.
#[derive(Clone, Debug)]
pub struct SubspaceSystem {
    pub blocks: Vec<SubspaceBlock>,
}

impl SubspaceSystem {
    /// The excitation subspaces of the Jaynes-Cummings model, the orphan
    /// level last.
    pub fn jaynes_cummings(model: &ModelConfig) -> Result<Self> {
        let ops = JointOperators::new(model)?;
        let mut index_sets: Vec<Vec<usize>> = (0..=model.n_max)
            .map(|m| subspace_members(m, model.n_max))
            .collect();
        index_sets.push(vec![orphan_index(model.n_max)]);
        let blocks = index_sets
            .iter()
            .map(|idx| SubspaceBlock {
                hamiltonian: DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
                    ops.hamiltonian.get(idx[i], idx[j])
                }),
                measured: idx.iter().map(|&i| ops.sigma_ee.get(i, i).re).collect(),
            })
            .collect();
        Ok(Self { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.measured.len()).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = acc;
                acc += b.measured.len();
                o
            })
            .collect()
    }

    /// Index ranges of the blocks in the direct-sum basis.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        self.offsets()
            .into_iter()
            .zip(&self.blocks)
            .map(|(o, b)| o..o + b.measured.len())
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Empty("subspace system has no blocks".into()));
        }
        for (m, b) in self.blocks.iter().enumerate() {
            let d = b.measured.len();
            if d == 0 || b.hamiltonian.nrows() != d || b.hamiltonian.ncols() != d {
                return Err(Error::Dimension(format!(
                    "block {m} has inconsistent dimensions"
                )));
            }
            if (&b.hamiltonian - b.hamiltonian.adjoint()).camax() > 1e-12 {
                return Err(Error::InvalidState(format!(
                    "block {m} Hamiltonian is not Hermitian"
                )));
            }
        }
        Ok(())
    }

    fn dense(&self) -> Result<DenseSystem> {
        let dim = self.dim();
        let mut h = DMatrix::zeros(dim, dim);
        for (range, b) in self.ranges().into_iter().zip(&self.blocks) {
            h.view_mut((range.start, range.start), (range.len(), range.len()))
                .copy_from(&b.hamiltonian);
        }
        Ok(DenseSystem {
            hamiltonian: ComplexOperator::new(h)?,
            measured: self
                .blocks
                .iter()
                .flat_map(|b| b.measured.iter().copied())
                .collect(),
            lowering: None,
            subspaces: self.ranges().into_iter().map(|r| r.collect()).collect(),
            number: vec![0.0; dim],
        })
    }

    /// Splits a state of ansatz form into weights and subspace states.
    pub fn decompose(&self, rho: &DensityMatrix) -> Result<(Vec<f64>, Vec<DVector<C64>>)> {
        if rho.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "state has dimension {}, system {}",
                rho.dim(),
                self.dim()
            )));
        }
        let ranges = self.ranges();
        let block_of: Vec<usize> = ranges
            .iter()
            .enumerate()
            .flat_map(|(m, r)| std::iter::repeat_n(m, r.len()))
            .collect();
        for i in 0..rho.dim() {
            for j in 0..rho.dim() {
                if block_of[i] != block_of[j] && rho.get(i, j).norm() > ANSATZ_TOL {
                    return Err(Error::AnsatzViolated(format!(
                        "coherence {:.3e} between subspaces {} and {}",
                        rho.get(i, j).norm(),
                        block_of[i],
                        block_of[j]
                    )));
                }
            }
        }
        let mut weights = Vec::with_capacity(ranges.len());
        let mut states = Vec::with_capacity(ranges.len());
        for (m, r) in ranges.iter().enumerate() {
            let block =
                DMatrix::from_fn(r.len(), r.len(), |i, j| rho.get(r.start + i, r.start + j));
            let p = block.trace().re;
            let mut psi = DVector::zeros(r.len());
            if p > 1e-15 {
                let eig = SymmetricEigen::new(block.clone() / C64::new(p, 0.0));
                let top = eig.eigenvalues.imax();
                if eig.eigenvalues[top] < 1.0 - 1e-9 {
                    return Err(Error::AnsatzViolated(format!(
                        "subspace {m} is mixed (largest eigenvalue {:.6})",
                        eig.eigenvalues[top]
                    )));
                }
                psi.copy_from(&eig.eigenvectors.column(top));
            } else {
                psi[0] = C64::new(1.0, 0.0);
            }
            weights.push(p.max(0.0));
            states.push(psi);
        }
        Ok((weights, states))
    }
}

/// Sampled subspace weights from both integrations.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRun {
    pub times: Vec<f64>,
    pub full: Vec<Vec<f64>>,
    pub reduced: Vec<Vec<f64>>,
}

impl OracleRun {
    /// Largest `|p_m^full − p_m^reduced|` over all samples and subspaces.
    pub fn sup_error(&self) -> f64 {
        self.full
            .iter()
            .zip(&self.reduced)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn mean_b(psi: &DVector<C64>, b: &[f64]) -> f64 {
    psi.iter().zip(b).map(|(c, v)| c.norm_sqr() * v).sum()
}

/// Co-integrates the full conditioned evolution and the reduced equations.
///
/// Uses `cfg.k`, `cfg.dt`, `cfg.t_final`, `cfg.sample_every` and
/// `cfg.seed`; the model and initial state come from `system` and `rho0`.
/// The reduced weights use Euler-Maruyama steps; each subspace state takes
/// an Euler-Maruyama measurement step followed by its exact unitary.
pub fn reduced_dynamics_oracle(
    system: &SubspaceSystem,
    rho0: &DensityMatrix,
    cfg: &SimulationConfig,
) -> Result<OracleRun> {
    let path = WienerIncrements::path(cfg.seed, cfg.dt, cfg.n_steps());
    reduced_dynamics_oracle_on_path(system, rho0, cfg, &path)
}

/// As [`reduced_dynamics_oracle`] with explicit Wiener increments, one per step.
pub fn reduced_dynamics_oracle_on_path(
    system: &SubspaceSystem,
    rho0: &DensityMatrix,
    cfg: &SimulationConfig,
    path: &[f64],
) -> Result<OracleRun> {
    system.validate()?;
    if !(cfg.k > 0.0) || !cfg.k.is_finite() {
        return Err(Error::config("k", "the oracle needs k > 0"));
    }
    if cfg.gamma != 0.0 {
        return Err(Error::config(
            "gamma",
            "the reduced equations hold for gamma = 0 only",
        ));
    }
    if cfg.eta != 1.0 {
        return Err(Error::config("eta", "the reduced equations assume eta = 1"));
    }
    if !(cfg.dt > 0.0) || cfg.sample_every == 0 || cfg.n_steps() == 0 {
        return Err(Error::config("dt", "time grid is empty"));
    }
    if path.len() < cfg.n_steps() {
        return Err(Error::GridMismatch(format!(
            "{} increments for {} steps",
            path.len(),
            cfg.n_steps()
        )));
    }
    let (mut p, mut psi) = system.decompose(rho0)?;
    let plan = StepPlan {
        dt: cfg.dt,
        k: cfg.k,
        eta: 1.0,
        gamma: 0.0,
        n_t: 0.0,
        bath: BathTerms::Off,
    };
    let full_prop = DensePropagator::new(system.dense()?, plan)?;
    let mut rho = rho0.clone();
    let unitaries: Vec<DMatrix<C64>> = system
        .blocks
        .iter()
        .map(|b| {
            let eig = SymmetricEigen::new(b.hamiltonian.clone());
            let phases = eig.eigenvalues.map(|e| C64::new(0.0, -e * cfg.dt).exp());
            &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
        })
        .collect();

    let dt = cfg.dt;
    let s8k = (8.0 * cfg.k).sqrt();
    let s2k = (2.0 * cfg.k).sqrt();
    let mut run = OracleRun {
        times: vec![0.0],
        full: vec![full_prop.observe(&rho).p_m],
        reduced: vec![p.clone()],
    };
    for step in 1..=cfg.n_steps() {
        let dw = path[step - 1];
        let b_full = full_prop.sigma_ee(&rho);
        full_prop.advance(&mut rho, Some(dw + s8k * b_full * dt))?;

        let b_m: Vec<f64> = psi
            .iter()
            .zip(&system.blocks)
            .map(|(v, blk)| mean_b(v, &blk.measured))
            .collect();
        let b_rho: f64 = p.iter().zip(&b_m).map(|(a, b)| a * b).sum();
        // Innovation of the shared record relative to the reduced estimate.
        let dw_red = dw + s8k * (b_full - b_rho) * dt;
        for ((pm, &bm), ((v, blk), u)) in p
            .iter_mut()
            .zip(&b_m)
            .zip(psi.iter_mut().zip(&system.blocks).zip(&unitaries))
        {
            *pm += s8k * *pm * (bm - b_rho) * dw_red;
            let dw_m = dw_red + s8k * (b_rho - bm) * dt;
            for (c, &b) in v.iter_mut().zip(&blk.measured) {
                let d = b - bm;
                *c *= 1.0 - cfg.k * d * d * dt + s2k * d * dw_m;
            }
            let mut next = u * &*v;
            let norm = next.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Divergence(format!(
                    "subspace state vanished at step {step}"
                )));
            }
            next /= C64::new(norm, 0.0);
            *v = next;
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence(format!(
                "reduced weights diverged at step {step}"
            )));
        }
        if step % cfg.sample_every == 0 {
            run.times.push(step as f64 * dt);
            run.full.push(full_prop.observe(&rho).p_m);
            run.reduced.push(p.clone());
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_cfg(k: f64, dt: f64, t_final: f64) -> SimulationConfig {
        SimulationConfig {
            k,
            dt,
            t_final,
            sample_every: (0.05 / dt).round() as usize,
            seed: 21,
            ..Default::default()
        }
    }

    fn ansatz_state(system: &SubspaceSystem, weights: &[(usize, f64)]) -> DensityMatrix {
        let ranges = system.ranges();
        let mut m = DMatrix::zeros(system.dim(), system.dim());
        for &(b, p) in weights {
            // Excited component of each doublet (last index of the block).
            let i = ranges[b].end - 1;
            m[(i, i)] = C64::new(p, 0.0);
        }
        DensityMatrix::new(ComplexOperator::new(m).unwrap()).unwrap()
    }

    #[test]
    fn single_subspace_weight_stays_put() {
        let model = ModelConfig {
            n_max: 3,
            ..Default::default()
        };
        let sys = SubspaceSystem::jaynes_cummings(&model).unwrap();
        let rho = ansatz_state(&sys, &[(2, 1.0)]);
        let run = reduced_dynamics_oracle(&sys, &rho, &oracle_cfg(0.5, 1e-3, 5.0)).unwrap();
        for (f, r) in run.full.iter().zip(&run.reduced) {
            assert!((f[2] - 1.0).abs() < 1e-12);
            assert_eq!(r[2], 1.0);
        }
    }

    #[test]
    fn indistinguishable_subspaces_keep_their_weights() {
        let z = C64::new(0.0, 0.0);
        let g = C64::new(1.3, 0.0);
        let block = SubspaceBlock {
            hamiltonian: DMatrix::from_row_slice(2, 2, &[z, g, g, z]),
            measured: vec![0.0, 1.0],
        };
        let sys = SubspaceSystem {
            blocks: vec![block.clone(), block],
        };
        let rho = ansatz_state(&sys, &[(0, 0.3), (1, 0.7)]);
        let run = reduced_dynamics_oracle(&sys, &rho, &oracle_cfg(1.0, 1e-3, 10.0)).unwrap();
        for (f, r) in run.full.iter().zip(&run.reduced) {
            assert!((f[0] - 0.3).abs() < 1e-9 && (f[1] - 0.7).abs() < 1e-9);
            assert!((r[0] - 0.3).abs() < 1e-12 && (r[1] - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn three_subspace_agreement_improves_with_smaller_steps() {
        let model = ModelConfig {
            n_max: 3,
            ..Default::default()
        };
        let sys = SubspaceSystem::jaynes_cummings(&model).unwrap();
        let rho = ansatz_state(&sys, &[(1, 0.5), (2, 0.3), (3, 0.2)]);
        let coarse_cfg = oracle_cfg(0.1, 1e-3, 5.0);
        let fine_cfg = oracle_cfg(0.1, 5e-4, 5.0);
        let (mut coarse_sum, mut fine_sum) = (0.0, 0.0);
        for seed in 0..8 {
            let fine_path = WienerIncrements::path(seed, fine_cfg.dt, fine_cfg.n_steps());
            let coarse_path: Vec<f64> = fine_path.chunks(2).map(|c| c[0] + c[1]).collect();
            let coarse =
                reduced_dynamics_oracle_on_path(&sys, &rho, &coarse_cfg, &coarse_path).unwrap();
            let fine = reduced_dynamics_oracle_on_path(&sys, &rho, &fine_cfg, &fine_path).unwrap();
            assert!(coarse.sup_error() < 1e-2);
            coarse_sum += coarse.sup_error();
            fine_sum += fine.sup_error();
        }
        assert!(fine_sum <= coarse_sum, "{fine_sum} vs {coarse_sum}");
    }

    #[test]
    fn coherent_or_mixed_blocks_are_rejected() {
        let model = ModelConfig {
            n_max: 2,
            ..Default::default()
        };
        let sys = SubspaceSystem::jaynes_cummings(&model).unwrap();
        let dim = sys.dim();
        let mut psi = vec![C64::new(0.0, 0.0); dim];
        psi[0] = C64::new(0.6, 0.0);
        psi[1] = C64::new(0.8, 0.0);
        let coherent = DensityMatrix::pure(&psi).unwrap();
        assert!(matches!(
            reduced_dynamics_oracle(&sys, &coherent, &oracle_cfg(0.1, 1e-3, 1.0)),
            Err(Error::AnsatzViolated(_))
        ));
        let r = sys.ranges()[1].clone();
        let mut m = DMatrix::zeros(dim, dim);
        m[(r.start, r.start)] = C64::new(0.5, 0.0);
        m[(r.start + 1, r.start + 1)] = C64::new(0.5, 0.0);
        let mixed = DensityMatrix::new(ComplexOperator::new(m).unwrap()).unwrap();
        assert!(matches!(
            sys.decompose(&mixed),
            Err(Error::AnsatzViolated(_))
        ));
    }
}
