//! Block-diagonal propagation in the total-excitation subspaces.
//!
//! `H`, `σ_ee`, the ladder operators of the bath and the jumps all map
//! excitation-diagonal states to excitation-diagonal states, so a state
//! that starts without coherences between subspaces keeps none. Each
//! subspace `m` then carries a 2×2 Hermitian block in the basis
//! `(|m,g⟩, |m−1,e⟩)`; blocks `m = 0` and the orphan `m = n_max+1` use one
//! component only. All coefficients are read off the dense joint operators
//! so both representations share one truncation.

use crate::algebra::{ComplexOperator, DensityMatrix, C64};
use crate::error::{Error, Result};
use crate::model::{subspace_members, JointOperators, ModelConfig};
use nalgebra::DMatrix;

use super::config::JumpDirection;
use super::propagator::{BathTerms, Observables, Propagator, StepPlan};

/// Largest coherence between subspaces tolerated when converting to blocks.
pub const BLOCK_TOL: f64 = 1e-12;

/// One excitation block: populations of `|m,g⟩`, `|m−1,e⟩` and their
/// coherence `⟨m,g|ρ|m−1,e⟩`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Block {
    pub pg: f64,
    pub pe: f64,
    pub c: C64,
}

impl Block {
    fn trace(&self) -> f64 {
        self.pg + self.pe
    }

    fn eigenvalues(&self) -> (f64, f64) {
        let half_gap = (0.25 * (self.pg - self.pe).powi(2) + self.c.norm_sqr()).sqrt();
        let mid = 0.5 * self.trace();
        (mid - half_gap, mid + half_gap)
    }

    fn scale(&mut self, s: f64) {
        self.pg *= s;
        self.pe *= s;
        self.c *= s;
    }
}

/// Excitation-diagonal density matrix, blocks indexed by `m = 0..=n_max+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    pub blocks: Vec<Block>,
}

impl BlockState {
    /// Converts a dense state, or returns `None` if it has coherences
    /// between different excitation numbers.
    pub fn from_dense(rho: &DensityMatrix, n_max: usize) -> Option<Self> {
        let dim = 2 * (n_max + 1);
        if rho.dim() != dim {
            return None;
        }
        let m_of = |i: usize| i / 2 + i % 2;
        for i in 0..dim {
            for j in 0..dim {
                if m_of(i) != m_of(j) && rho.get(i, j).norm() > BLOCK_TOL {
                    return None;
                }
            }
        }
        let blocks = (0..=n_max + 1)
            .map(|m| {
                let (g, e) = components(m, n_max);
                Block {
                    pg: g.map_or(0.0, |i| rho.get(i, i).re),
                    pe: e.map_or(0.0, |i| rho.get(i, i).re),
                    c: match (g, e) {
                        (Some(i), Some(j)) => rho.get(i, j),
                        _ => C64::new(0.0, 0.0),
                    },
                }
            })
            .collect();
        Some(Self { blocks })
    }

    pub fn n_max(&self) -> usize {
        self.blocks.len() - 2
    }

    pub fn to_dense(&self) -> DensityMatrix {
        let n_max = self.n_max();
        let dim = 2 * (n_max + 1);
        let mut m = DMatrix::zeros(dim, dim);
        for (idx, b) in self.blocks.iter().enumerate() {
            let (g, e) = components(idx, n_max);
            if let Some(i) = g {
                m[(i, i)] = C64::new(b.pg, 0.0);
            }
            if let Some(j) = e {
                m[(j, j)] = C64::new(b.pe, 0.0);
            }
            if let (Some(i), Some(j)) = (g, e) {
                m[(i, j)] = b.c;
                m[(j, i)] = b.c.conj();
            }
        }
        DensityMatrix::from_operator_unchecked(ComplexOperator::from_matrix_unchecked(m))
    }

    /// `½‖ρ − σ‖₁`, exact for excitation-diagonal states.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        0.5 * self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let d = Block {
                    pg: a.pg - b.pg,
                    pe: a.pe - b.pe,
                    c: a.c - b.c,
                };
                let (l0, l1) = d.eigenvalues();
                l0.abs() + l1.abs()
            })
            .sum::<f64>()
    }

    fn trace(&self) -> f64 {
        self.blocks.iter().map(Block::trace).sum()
    }
}

fn components(m: usize, n_max: usize) -> (Option<usize>, Option<usize>) {
    let members = subspace_members(m, n_max);
    match (m, members.as_slice()) {
        (0, [g]) => (Some(*g), None),
        (_, [g, e]) => (Some(*g), Some(*e)),
        (_, [e]) => (None, Some(*e)),
        _ => (None, None),
    }
}

/// Per-block constants.
#[derive(Clone, Debug, Default)]
struct BlockCoeffs {
    /// Bloch-vector rotation of `exp(−iH_m dt)`.
    rotation: [[f64; 3]; 3],
    /// Index into the distinct measured eigenvalues, per component.
    b_index: [usize; 2],
    b: [f64; 2],
    /// Unread dephasing of the coherence.
    dephasing: f64,
    /// No-jump bath decay per component.
    decay: [f64; 2],
    /// `a` from this block to `m − 1`, per component.
    lower: [f64; 2],
    /// `a†` from this block to `m + 1`, per component.
    raise: [f64; 2],
    number: [f64; 2],
    anti_number: [f64; 2],
}

pub(crate) struct BlockPropagator {
    plan: StepPlan,
    coeffs: Vec<BlockCoeffs>,
    distinct_b: Vec<f64>,
}

fn entry(op: &ComplexOperator, i: Option<usize>, j: Option<usize>) -> C64 {
    match (i, j) {
        (Some(i), Some(j)) => op.get(i, j),
        _ => C64::new(0.0, 0.0),
    }
}

fn real_entry(op: &ComplexOperator, i: Option<usize>, j: Option<usize>) -> f64 {
    let z = entry(op, i, j);
    debug_assert!(z.im.abs() < 1e-15);
    z.re
}

type M2 = [[C64; 2]; 2];

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn adjoint2(a: &M2) -> M2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn pauli() -> [M2; 3] {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        [[z, one], [one, z]],
        [[z, -i], [i, z]],
        [[one, z], [z, -one]],
    ]
}

/// Rotation `R_ij = ½ Tr(σ_i U σ_j U†)` of `U = exp(−iH dt)` for a 2×2 Hermitian `H`.
fn bloch_rotation(h: &M2, dt: f64) -> [[f64; 3]; 3] {
    let hx = h[0][1].re;
    let hy = -h[0][1].im;
    let hz = 0.5 * (h[0][0].re - h[1][1].re);
    let norm = (hx * hx + hy * hy + hz * hz).sqrt();
    let (c, s) = ((norm * dt).cos(), (norm * dt).sin());
    let f = if norm > 0.0 { s / norm } else { 0.0 };
    let minus_i = C64::new(0.0, -1.0);
    let u: M2 = [
        [
            C64::new(c, 0.0) + minus_i * f * hz,
            minus_i * f * C64::new(hx, -hy),
        ],
        [
            minus_i * f * C64::new(hx, hy),
            C64::new(c, 0.0) - minus_i * f * hz,
        ],
    ];
    let ud = adjoint2(&u);
    let sig = pauli();
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let m = mul2(&mul2(&sig[i], &u), &mul2(&sig[j], &ud));
            r[i][j] = 0.5 * (m[0][0] + m[1][1]).re;
        }
    }
    r
}

impl BlockPropagator {
    pub fn new(model: &ModelConfig, ops: &JointOperators, plan: StepPlan) -> Self {
        let n_max = model.n_max;
        let bath_on = plan.bath != BathTerms::Off;
        let anti_number = &ops.lowering * &ops.raising;
        let mut distinct_b: Vec<f64> = Vec::new();
        let mut coeffs = Vec::with_capacity(n_max + 2);
        for m in 0..=n_max + 1 {
            let (g, e) = components(m, n_max);
            let h: M2 = [
                [entry(&ops.hamiltonian, g, g), entry(&ops.hamiltonian, g, e)],
                [entry(&ops.hamiltonian, e, g), entry(&ops.hamiltonian, e, e)],
            ];
            let b = [
                real_entry(&ops.sigma_ee, g, g),
                real_entry(&ops.sigma_ee, e, e),
            ];
            let mut b_index = [0; 2];
            for (slot, &value) in b_index.iter_mut().zip(&b) {
                *slot = match distinct_b.iter().position(|&v| v == value) {
                    Some(p) => p,
                    None => {
                        distinct_b.push(value);
                        distinct_b.len() - 1
                    }
                };
            }
            let number = [real_entry(&ops.number, g, g), real_entry(&ops.number, e, e)];
            let anti = [
                real_entry(&anti_number, g, g),
                real_entry(&anti_number, e, e),
            ];
            let decay = if bath_on {
                [0, 1].map(|c| {
                    (-0.5 * plan.dt * (plan.down_rate() * number[c] + plan.up_rate() * anti[c]))
                        .exp()
                })
            } else {
                [1.0, 1.0]
            };
            let (lg, le) = if m >= 1 {
                components(m - 1, n_max)
            } else {
                (None, None)
            };
            let (rg, re) = components(m + 1, n_max);
            coeffs.push(BlockCoeffs {
                rotation: bloch_rotation(&h, plan.dt),
                b_index,
                b,
                dephasing: (-plan.unread_strength() * (b[0] - b[1]).powi(2) * plan.dt).exp(),
                decay,
                lower: [
                    real_entry(&ops.lowering, lg, g),
                    real_entry(&ops.lowering, le, e),
                ],
                raise: [
                    real_entry(&ops.raising, rg, g),
                    real_entry(&ops.raising, re, e),
                ],
                number,
                anti_number: anti,
            });
        }
        Self {
            plan,
            coeffs,
            distinct_b,
        }
    }

    fn averaged_jump_terms(&self, old: &[Block], out: &mut [Block]) {
        let dt = self.plan.dt;
        let (down, up) = (self.plan.down_rate(), self.plan.up_rate());
        let last = old.len() - 1;
        for m in 0..=last {
            let mut add = Block::default();
            if m < last && down > 0.0 {
                let src = &old[m + 1];
                let l = self.coeffs[m + 1].lower;
                add.pg += down * l[0] * l[0] * src.pg;
                add.pe += down * l[1] * l[1] * src.pe;
                add.c += src.c * (down * l[0] * l[1]);
            }
            if m > 0 && up > 0.0 {
                let src = &old[m - 1];
                let r = self.coeffs[m - 1].raise;
                add.pg += up * r[0] * r[0] * src.pg;
                add.pe += up * r[1] * r[1] * src.pe;
                add.c += src.c * (up * r[0] * r[1]);
            }
            out[m].pg += dt * add.pg;
            out[m].pe += dt * add.pe;
            out[m].c += add.c * dt;
        }
    }

    fn normalize(state: &mut BlockState) -> Result<()> {
        let tr = state.trace();
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Divergence(format!(
                "trace {tr:.3e} is not positive; reduce dt"
            )));
        }
        let inv = 1.0 / tr;
        for b in &mut state.blocks {
            b.scale(inv);
        }
        Ok(())
    }
}

impl Propagator for BlockPropagator {
    type State = BlockState;

    fn sigma_ee(&self, state: &BlockState) -> f64 {
        state
            .blocks
            .iter()
            .zip(&self.coeffs)
            .map(|(b, c)| c.b[0] * b.pg + c.b[1] * b.pe)
            .sum()
    }

    fn advance(&self, state: &mut BlockState, record: Option<f64>) -> Result<()> {
        let y = record.unwrap_or(0.0);
        let mut factors = [1.0f64; 4];
        let mut factors_vec;
        let factors: &[f64] = if self.distinct_b.len() <= factors.len() {
            for (f, &b) in factors.iter_mut().zip(&self.distinct_b) {
                *f = self.plan.measurement_log_factor(b, y).exp();
            }
            &factors[..self.distinct_b.len()]
        } else {
            factors_vec = Vec::with_capacity(self.distinct_b.len());
            factors_vec.extend(
                self.distinct_b
                    .iter()
                    .map(|&b| self.plan.measurement_log_factor(b, y).exp()),
            );
            &factors_vec
        };

        let old = (self.plan.bath == BathTerms::Averaged).then(|| state.blocks.clone());

        for (blk, co) in state.blocks.iter_mut().zip(&self.coeffs) {
            let fg = factors[co.b_index[0]] * co.decay[0];
            let fe = factors[co.b_index[1]] * co.decay[1];
            blk.pg *= fg * fg;
            blk.pe *= fe * fe;
            blk.c *= fg * fe * co.dephasing;
        }
        if let Some(old) = old {
            self.averaged_jump_terms(&old, &mut state.blocks);
        }
        for (blk, co) in state.blocks.iter_mut().zip(&self.coeffs) {
            let t = blk.pg + blk.pe;
            let v = [2.0 * blk.c.re, -2.0 * blk.c.im, blk.pg - blk.pe];
            let r = &co.rotation;
            let x = r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2];
            let yv = r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2];
            let z = r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2];
            blk.pg = 0.5 * (t + z);
            blk.pe = 0.5 * (t - z);
            blk.c = C64::new(0.5 * x, -0.5 * yv);
        }
        Self::normalize(state)
    }

    fn jump(&self, state: &mut BlockState, direction: JumpDirection) -> Result<()> {
        let n = state.blocks.len();
        let mut out = vec![Block::default(); n];
        for (m, src) in state.blocks.iter().enumerate() {
            let co = &self.coeffs[m];
            let (target, f) = match direction {
                JumpDirection::Down if m >= 1 => (m - 1, co.lower),
                JumpDirection::Up if m + 1 < n => (m + 1, co.raise),
                _ => continue,
            };
            out[target].pg += f[0] * f[0] * src.pg;
            out[target].pe += f[1] * f[1] * src.pe;
            out[target].c += src.c * (f[0] * f[1]);
        }
        let mut next = BlockState { blocks: out };
        let norm = next.trace();
        if !(norm > 1e-14) {
            return Err(Error::ZeroNormJump(format!(
                "{direction} jump on a state with norm {norm:.3e}"
            )));
        }
        Self::normalize(&mut next)?;
        *state = next;
        Ok(())
    }

    fn jump_moments(&self, state: &BlockState) -> (f64, f64) {
        state
            .blocks
            .iter()
            .zip(&self.coeffs)
            .fold((0.0, 0.0), |(aad, ada), (b, c)| {
                (
                    aad + c.anti_number[0] * b.pg + c.anti_number[1] * b.pe,
                    ada + c.number[0] * b.pg + c.number[1] * b.pe,
                )
            })
    }

    fn observe(&self, state: &BlockState) -> Observables {
        let n_max = state.n_max();
        let p_m: Vec<f64> = state.blocks[..=n_max].iter().map(Block::trace).collect();
        let leakage = state.blocks[n_max + 1].trace();
        let purity = state
            .blocks
            .iter()
            .map(|b| b.pg * b.pg + b.pe * b.pe + 2.0 * b.c.norm_sqr())
            .sum();
        let mean_n = state
            .blocks
            .iter()
            .zip(&self.coeffs)
            .map(|(b, c)| c.number[0] * b.pg + c.number[1] * b.pe)
            .sum();
        Observables {
            sigma_ee: self.sigma_ee(state),
            p_m,
            purity,
            mean_n,
            leakage,
        }
    }

    fn min_eigenvalue(&self, state: &BlockState) -> f64 {
        state
            .blocks
            .iter()
            .map(|b| b.eigenvalues().0)
            .fold(f64::INFINITY, f64::min)
    }
}
