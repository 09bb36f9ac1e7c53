//! Hamiltonian simulation of a block-encoded matrix.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::block::{make_complex_pair, BlockEncoding, StatePreparationPair};
use crate::linalg::{hermitian_part, operator_norm_distance, unitary_evolution, CMatrix, C64};
use crate::ops::{Adjoint, Embedded, OpRef, Operator, Sequence};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationPath {
    /// Exact exponential of the verified block.
    OracleExponential,
    /// Chebyshev expansion over powers of the qubitized walk.
    LcuTaylor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub t: f64,
    pub eps: f64,
    pub path: SimulationPath,
    /// Fixed expansion order; chosen from the remainder bound when `None`.
    pub order: Option<usize>,
}

impl SimulationConfig {
    pub fn new(t: f64, eps: f64, path: SimulationPath) -> Self {
        SimulationConfig { t, eps, path, order: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return Err(Error::input(format!("simulation time must be finite and ≥ 0, got {}", self.t)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::input(format!("simulation eps must lie in (0, 1), got {}", self.eps)));
        }
        Ok(())
    }
}

/// An encoding of `exp(−iHt)` with its provenance.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub encoding: BlockEncoding,
    pub path: SimulationPath,
    pub t: f64,
    pub eps: f64,
    /// Hermitian part of `α·block` of the input encoding.
    pub hamiltonian: CMatrix,
    /// `exp(−iHt)` computed classically.
    pub exact: CMatrix,
    /// Controlled walk invocations (expansion path only).
    pub query_count: usize,
    pub order: usize,
    /// Ancillas of the encoding as stated by the simulation contract.
    pub declared_ancillas: usize,
    /// `‖exact − α·block‖`.
    pub measured_error: f64,
}

impl Simulation {
    /// Unitary used downstream: the exact exponential for the oracle path,
    /// the polar part of `α·block` otherwise.
    pub fn unitary(&self) -> CMatrix {
        match self.path {
            SimulationPath::OracleExponential => self.exact.clone(),
            SimulationPath::LcuTaylor => polar_unitary(&self.encoding.scaled_block()),
        }
    }
}

fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    u * vt
}

/// `J_0(τ), …, J_K(τ)` by Miller's backward recurrence.
pub fn bessel_j(tau: f64, k_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    if tau == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let a = tau.abs();
    let start = k_max.max(a as usize) + 30 + (a.sqrt() * 10.0) as usize;
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / a * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            vals.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    // J_0 + 2ΣJ_{2k} = 1
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for k in 0..=k_max {
        let v = vals[k] / norm;
        out[k] = if tau < 0.0 && k % 2 == 1 { -v } else { v };
    }
    out
}

/// Smallest `K` with `2Σ_{k>K}(τ/2)^k/k! ≤ target`.
pub fn chebyshev_order(tau: f64, target: f64) -> usize {
    let half = tau.abs() / 2.0;
    let term = |k: usize| (1..=k).fold(1.0, |acc, j| acc * half / j as f64);
    let tail = |k: usize| {
        let mut s = 0.0;
        let mut j = k + 1;
        loop {
            let t = term(j);
            s += t;
            if t < 1e-18 * s.max(1e-300) || j > k + 400 {
                break;
            }
            j += 1;
        }
        2.0 * s
    };
    let mut k = 0;
    while tail(k) > target {
        k += 1;
    }
    k
}

/// `(H⊗I)(|0⟩⟨1|⊗U + |1⟩⟨0|⊗U†)(H⊗I)`: Hermitian and unitary, with
/// the Hermitian part of `U`'s block in its own block.
struct HermitianDilation {
    u: OpRef,
}

impl HermitianDilation {
    fn hadamard(v: &mut [C64]) {
        let half = v.len() / 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b) = v.split_at_mut(half);
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let (p, q) = (*x, *y);
            *x = (p + q) * s;
            *y = (p - q) * s;
        }
    }
}

impl Operator for HermitianDilation {
    fn qubits(&self) -> usize {
        self.u.qubits() + 1
    }
    fn apply(&self, v: &mut [C64]) {
        Self::hadamard(v);
        let half = v.len() / 2;
        let (a, b) = v.split_at_mut(half);
        a.swap_with_slice(b);
        self.u.apply(a);
        self.u.apply_adjoint(b);
        Self::hadamard(v);
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        self.apply(v)
    }
}

/// Qubitized walk `(2Π₀ − I)·U'` on `[h, ancillas, system]`.
struct Walk {
    dilation: HermitianDilation,
    system: usize,
}

impl Walk {
    fn reflect(&self, v: &mut [C64]) {
        let keep = 1usize << self.system;
        v.iter_mut().skip(keep).for_each(|z| *z = -*z);
    }
}

impl Operator for Walk {
    fn qubits(&self) -> usize {
        self.dilation.qubits()
    }
    fn apply(&self, v: &mut [C64]) {
        self.dilation.apply(v);
        self.reflect(v);
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        self.reflect(v);
        self.dilation.apply(v);
    }
}

/// `Σ_j |j⟩⟨j| ⊗ W^j`, realised as `K` walk steps each controlled on `j ≥ k`.
struct PowerSelect {
    walk: Walk,
    select: usize,
    order: usize,
}

impl Operator for PowerSelect {
    fn qubits(&self) -> usize {
        self.select + self.walk.qubits()
    }
    fn apply(&self, v: &mut [C64]) {
        let d = self.walk.dim();
        for (j, chunk) in v.chunks_mut(d).enumerate() {
            for _ in 0..j.min(self.order) {
                self.walk.apply(chunk);
            }
        }
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        let d = self.walk.dim();
        for (j, chunk) in v.chunks_mut(d).enumerate() {
            for _ in 0..j.min(self.order) {
                self.walk.apply_adjoint(chunk);
            }
        }
    }
}

/// Encodes `exp(−iHt)` where `H` is the Hermitian part of `α·block(be)`.
pub fn simulate_hamiltonian(be: &BlockEncoding, cfg: &SimulationConfig) -> Result<Simulation> {
    cfg.validate()?;
    let hamiltonian = hermitian_part(&be.scaled_block());
    let exact = unitary_evolution(&hamiltonian, cfg.t);
    let declared_ancillas = be.ancillas + 2;
    match cfg.path {
        SimulationPath::OracleExponential => {
            let encoding = BlockEncoding::of_unitary(exact.clone(), "exp(-iHt)")?.padded(2);
            let encoding = BlockEncoding { epsilon: cfg.eps, ..encoding };
            Ok(Simulation {
                encoding,
                path: cfg.path,
                t: cfg.t,
                eps: cfg.eps,
                hamiltonian,
                exact,
                query_count: 0,
                order: 0,
                declared_ancillas,
                measured_error: 0.0,
            })
        }
        SimulationPath::LcuTaylor => {
            let tau = be.alpha * cfg.t;
            let order = match cfg.order {
                Some(k) => {
                    if chebyshev_order(tau, cfg.eps / 2.0) > k {
                        return Err(Error::Range(format!("order {k} leaves a remainder above ε/2 for αt = {tau}")));
                    }
                    k
                }
                None => chebyshev_order(tau, cfg.eps / 2.0),
            };
            let j = bessel_j(tau, order);
            let minus_i = C64::new(0.0, -1.0);
            let y: Vec<C64> = (0..=order)
                .map(|k| if k == 0 { C64::new(j[0], 0.0) } else { minus_i.powu(k as u32) * (2.0 * j[k]) })
                .collect();
            let beta: f64 = y.iter().map(|v| v.norm()).sum();
            let pair = make_complex_pair(&y, beta)?;
            let walk = Walk { dilation: HermitianDilation { u: be.op.clone() }, system: be.system };
            let encoding = walk_lcu(&pair, walk, order, be.system)?;
            let measured_error = operator_norm_distance(&exact, &encoding.scaled_block())?;
            if measured_error > cfg.eps {
                return Err(Error::contract(format!(
                    "expansion of order {order} misses exp(−iHt) by {measured_error:e} > ε = {:e}",
                    cfg.eps
                )));
            }
            Ok(Simulation {
                encoding: BlockEncoding { epsilon: cfg.eps, ..encoding },
                path: cfg.path,
                t: cfg.t,
                eps: cfg.eps,
                hamiltonian,
                exact,
                query_count: order,
                order,
                declared_ancillas,
                measured_error,
            })
        }
    }
}

fn walk_lcu(pair: &StatePreparationPair, walk: Walk, order: usize, system: usize) -> Result<BlockEncoding> {
    let inner = walk.qubits();
    let total = pair.b + inner;
    let targets: Vec<usize> = (0..pair.b).collect();
    let select: OpRef = Arc::new(PowerSelect { walk, select: pair.b, order });
    let p_r: OpRef = Arc::new(Embedded { inner: pair.p_r.clone(), total, targets: targets.clone() });
    let p_l_dag: OpRef = Arc::new(Embedded { inner: Arc::new(Adjoint(pair.p_l.clone())), total, targets });
    let op = Sequence { qubits: total, ops: vec![p_r, select, p_l_dag] };
    BlockEncoding::new(Arc::new(op), pair.beta, total - system, 0.0, "exp(-iHt)")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_unitary, unitary_dilation};
    use crate::ops::DenseOp;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn z_half() -> BlockEncoding {
        let h = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(-0.5)]);
        BlockEncoding::new(Arc::new(DenseOp::new(unitary_dilation(&h).unwrap()).unwrap()), 1.0, 1, 0.0, "Z/2").unwrap()
    }

    #[test]
    fn bessel_values() {
        let j = bessel_j(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((j[3] - 0.019_563_353_982_668_4).abs() < 1e-14);
        let j = bessel_j(12.0, 2);
        assert!((j[0] - 0.047_689_310_796_833_5).abs() < 1e-13);
        assert_eq!(bessel_j(0.0, 2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_time_is_identity() {
        for path in [SimulationPath::OracleExponential, SimulationPath::LcuTaylor] {
            let s = simulate_hamiltonian(&z_half(), &SimulationConfig::new(0.0, 1e-4, path)).unwrap();
            let u = s.encoding.scaled_block();
            assert!((u - CMatrix::identity(2, 2)).norm() < 1e-12);
        }
    }

    #[test]
    fn z_half_at_pi() {
        let want = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, -1.0), c(0.0), c(0.0), C64::new(0.0, 1.0)]);
        let cfg = SimulationConfig::new(std::f64::consts::PI, 1e-6, SimulationPath::OracleExponential);
        let s = simulate_hamiltonian(&z_half(), &cfg).unwrap();
        assert!((s.exact.clone() - &want).norm() < 1e-12);
        assert!((s.encoding.scaled_block() - &want).norm() < 1e-12);
        assert!(is_unitary(&s.encoding.op.to_matrix(), 1e-12));
        let s = simulate_hamiltonian(&z_half(), &SimulationConfig { path: SimulationPath::LcuTaylor, ..cfg }).unwrap();
        assert!(s.measured_error <= 1e-6);
        assert!((s.unitary() - want).norm() < 1e-5);
    }

    #[test]
    fn fixed_order_too_small_fails() {
        let cfg = SimulationConfig { order: Some(2), ..SimulationConfig::new(4.0, 1e-4, SimulationPath::LcuTaylor) };
        assert!(matches!(simulate_hamiltonian(&z_half(), &cfg), Err(Error::Range(_))));
    }

    #[test]
    fn order_grows_with_time_and_precision() {
        let a = chebyshev_order(3.0, 1e-2);
        let b = chebyshev_order(6.0, 1e-2);
        let c = chebyshev_order(6.0, 1e-4);
        assert!(a < b && b < c);
        assert!(c < 6 + 25);
    }
}
