//! Block-encodings and their algebra.
//!
//! Layout convention: ancilla qubits are the most significant, so the
//! encoded block is the top-left `2^s × 2^s` corner of the unitary.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{
    hermitian_eigen, operator_norm_distance, qubits_for, spectral_norm, unitary_dilation, CMatrix, C64, ONE, ZERO,
};
use crate::ops::{Adjoint, DenseOp, Embedded, OpRef, PaddedOp, SelectOp, Sequence, StatePrepOp, SwapRegisters};
use crate::{Error, Result};

mod targets;
pub use targets::*;

/// `(α, a, ε)` block-encoding of a `2^s`-dimensional matrix.
#[derive(Clone)]
pub struct BlockEncoding {
    pub op: OpRef,
    pub alpha: f64,
    pub ancillas: usize,
    pub system: usize,
    pub epsilon: f64,
    pub label: String,
}

impl fmt::Debug for BlockEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockEncoding")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("ancillas", &self.ancillas)
            .field("system", &self.system)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl BlockEncoding {
    pub fn new(op: OpRef, alpha: f64, ancillas: usize, epsilon: f64, label: &str) -> Result<Self> {
        let q = op.qubits();
        if ancillas > q {
            return Err(Error::dimension(format!("{ancillas} ancillas on a {q}-qubit unitary")));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::input(format!("alpha must be positive, got {alpha}")));
        }
        Ok(BlockEncoding { op, alpha, ancillas, system: q - ancillas, epsilon, label: label.into() })
    }

    /// `(1, 0, 0)`-encoding of a unitary matrix.
    pub fn of_unitary(u: CMatrix, label: &str) -> Result<Self> {
        BlockEncoding::new(Arc::new(DenseOp::new(u)?), 1.0, 0, 0.0, label)
    }

    pub fn qubits(&self) -> usize {
        self.ancillas + self.system
    }

    pub fn subject_dim(&self) -> usize {
        1 << self.system
    }

    /// `(⟨0|^a ⊗ I) U (|0⟩^a ⊗ I)`.
    pub fn block(&self) -> CMatrix {
        let d = self.subject_dim();
        let mut m = CMatrix::zeros(d, d);
        let mut col = vec![ZERO; self.op.dim()];
        for j in 0..d {
            col.iter_mut().for_each(|z| *z = ZERO);
            col[j] = ONE;
            self.op.apply(&mut col);
            for i in 0..d {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    /// `α` times the block.
    pub fn scaled_block(&self) -> CMatrix {
        self.block() * C64::new(self.alpha, 0.0)
    }

    /// Encodes the adjoint of the subject with the same parameters.
    pub fn adjoint(&self) -> BlockEncoding {
        BlockEncoding { op: Arc::new(Adjoint(self.op.clone())), label: format!("{}†", self.label), ..self.clone() }
    }

    /// Adds `extra` identity ancillas in front of the existing ones.
    pub fn padded(&self, extra: usize) -> BlockEncoding {
        if extra == 0 {
            return self.clone();
        }
        BlockEncoding {
            op: Arc::new(PaddedOp { inner: self.op.clone(), extra }),
            ancillas: self.ancillas + extra,
            ..self.clone()
        }
    }
}

/// Result of checking a block-encoding against a claimed subject.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub label: String,
    pub alpha: f64,
    pub ancillas: usize,
    pub claimed_epsilon: f64,
    pub measured_epsilon: f64,
    pub subject_norm: f64,
    pub pass: bool,
}

/// Floating-point allowance on top of the claimed error.
pub const VERIFY_SLACK: f64 = 1e-10;

/// Spectral distance between `subject` and `α·block`.
pub fn verify_block_encoding(be: &BlockEncoding, subject: &CMatrix) -> Result<VerificationReport> {
    verify_with_slack(be, subject, 0.0)
}

/// As [`verify_block_encoding`] with an extra known allowance (fixed-point
/// rounding, truncation gaps) added to the claimed error.
pub fn verify_with_slack(be: &BlockEncoding, subject: &CMatrix, slack: f64) -> Result<VerificationReport> {
    if subject.nrows() != be.subject_dim() || subject.ncols() != be.subject_dim() {
        return Err(Error::dimension(format!(
            "subject is {:?}, encoding has {} system qubits",
            subject.shape(),
            be.system
        )));
    }
    let measured = operator_norm_distance(subject, &be.scaled_block())?;
    let claimed = be.epsilon + slack;
    Ok(VerificationReport {
        label: be.label.clone(),
        alpha: be.alpha,
        ancillas: be.ancillas,
        claimed_epsilon: claimed,
        measured_epsilon: measured,
        subject_norm: spectral_norm(subject),
        pass: measured <= claimed + VERIFY_SLACK * be.alpha.max(1.0),
    })
}

/// `(G†⊗I)(I_a⊗SWAP)(G⊗I)` for a purification `|ρ⟩` ordered `[a, s]`; the
/// block is `Tr_a |ρ⟩⟨ρ|`.
pub fn purified_density_encoding(g: OpRef, a: usize, s: usize, label: &str) -> Result<BlockEncoding> {
    if g.qubits() != a + s {
        return Err(Error::dimension(format!("G has {} qubits, split is {a}+{s}", g.qubits())));
    }
    let total = a + 2 * s;
    let g_front: OpRef = Arc::new(Embedded { inner: g.clone(), total, targets: (0..a + s).collect() });
    let swap: OpRef =
        Arc::new(SwapRegisters { total, first: (a..a + s).collect(), second: (a + s..total).collect() });
    let g_back: OpRef = Arc::new(Adjoint(g_front.clone()));
    let op = Sequence { qubits: total, ops: vec![g_front, swap, g_back] };
    BlockEncoding::new(Arc::new(op), 1.0, a + s, 0.0, label)
}

/// Purified-density encoding from the amplitudes of `|ρ⟩`.
pub fn purified_from_vector(psi: &[C64], a: usize, s: usize, label: &str) -> Result<BlockEncoding> {
    purified_density_encoding(Arc::new(StatePrepOp::new(psi)?), a, s, label)
}

/// `I/n` through the purification `Σ_j |j⟩|j⟩/√n`.
pub fn rho3_encoding(n: usize) -> Result<BlockEncoding> {
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::input(format!("maximally mixed state needs n = 2^k ≥ 2, got {n}")));
    }
    let amp = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut psi = vec![ZERO; n * n];
    for j in 0..n {
        psi[j * n + j] = amp;
    }
    let s = qubits_for(n);
    purified_from_vector(&psi, s, s, "rho3")
}

/// `(β, b, ε_y)` state-preparation pair for signed coefficients.
#[derive(Clone)]
pub struct StatePreparationPair {
    pub p_l: OpRef,
    pub p_r: OpRef,
    pub c: Vec<C64>,
    pub d: Vec<C64>,
    pub beta: f64,
    pub b: usize,
    pub y: Vec<C64>,
    pub epsilon_y: f64,
}

impl fmt::Debug for StatePreparationPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StatePreparationPair")
            .field("y", &self.y)
            .field("beta", &self.beta)
            .field("b", &self.b)
            .field("epsilon_y", &self.epsilon_y)
            .finish()
    }
}

impl StatePreparationPair {
    /// `β·c_j*·d_j` for every slot.
    pub fn realized(&self) -> Vec<C64> {
        self.c.iter().zip(&self.d).map(|(c, d)| c.conj() * d * self.beta).collect()
    }

    /// `Σ_j |β·c_j*·d_j − y_j|` over all `2^b` slots.
    pub fn coefficient_error(&self) -> f64 {
        self.realized()
            .iter()
            .enumerate()
            .map(|(j, r)| (r - self.y.get(j).copied().unwrap_or(ZERO)).norm())
            .sum()
    }
}

/// Exact pair with the sign of each `y_j` carried by `d_j`.
pub fn make_signed_pair(y: &[f64], beta: f64) -> Result<StatePreparationPair> {
    make_complex_pair(&real_coefficients(y), beta)
}

/// Exact pair for complex coefficients; the phase of `y_j` sits in `d_j`.
pub fn make_complex_pair(y: &[C64], beta: f64) -> Result<StatePreparationPair> {
    let pair = build_pair(y, beta)?;
    Ok(StatePreparationPair { epsilon_y: pair.coefficient_error(), ..pair })
}

/// Pair realising `y + δ` with `‖δ‖₁ = eps_y`, reported against `y`.
pub fn make_perturbed_pair(y: &[f64], beta: f64, eps_y: f64, seed: u64) -> Result<StatePreparationPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = y.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let shifted: Vec<f64> = y
        .iter()
        .zip(&raw)
        .map(|(v, r)| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            v + sign * eps_y * r / total
        })
        .collect();
    let mut pair = build_pair(&real_coefficients(&shifted), beta)?;
    pair.y = real_coefficients(y);
    pair.epsilon_y = pair.coefficient_error();
    Ok(pair)
}

fn real_coefficients(y: &[f64]) -> Vec<C64> {
    y.iter().map(|v| C64::new(*v, 0.0)).collect()
}

fn build_pair(y: &[C64], beta: f64) -> Result<StatePreparationPair> {
    if y.is_empty() {
        return Err(Error::input("no coefficients"));
    }
    let l1: f64 = y.iter().map(|v| v.norm()).sum();
    if !(l1 > 0.0) || !l1.is_finite() {
        return Err(Error::input("coefficients must be finite and not all zero"));
    }
    if beta < l1 * (1.0 - 1e-12) {
        return Err(Error::input(format!("beta {beta} is below ‖y‖₁ = {l1}")));
    }
    let spare = (1.0 - (l1 / beta).powi(2)).max(0.0);
    let slots = y.len() + usize::from(spare > 1e-24);
    let b = qubits_for(slots).max(1);
    let mut c = vec![ZERO; 1 << b];
    let mut d = vec![ZERO; 1 << b];
    for (j, v) in y.iter().enumerate() {
        let mag = v.norm();
        let phase = if mag > 0.0 { v / mag } else { ONE };
        c[j] = C64::new((mag * l1).sqrt() / beta, 0.0);
        d[j] = phase * (mag / l1).sqrt();
    }
    if slots > y.len() {
        c[y.len()] = C64::new(spare.sqrt(), 0.0);
    }
    Ok(StatePreparationPair {
        p_l: Arc::new(StatePrepOp::new(&c)?),
        p_r: Arc::new(StatePrepOp::new(&d)?),
        c,
        d,
        beta,
        b,
        y: y.to_vec(),
        epsilon_y: 0.0,
    })
}

/// `(P_L†⊗I)·SELECT·(P_R⊗I)` over encodings sharing `α` and system size.
pub fn lcu_combine(pair: &StatePreparationPair, encodings: &[BlockEncoding], label: &str) -> Result<BlockEncoding> {
    let first = encodings.first().ok_or_else(|| Error::input("no encodings to combine"))?;
    if encodings.len() != pair.y.len() {
        return Err(Error::dimension(format!("{} coefficients for {} encodings", pair.y.len(), encodings.len())));
    }
    let alpha = first.alpha;
    for e in encodings {
        if e.system != first.system {
            return Err(Error::dimension(format!("{} acts on {} qubits, {} on {}", e.label, e.system, first.label, first.system)));
        }
        if (e.alpha - alpha).abs() > 1e-12 * alpha {
            return Err(Error::input(format!("{} has alpha {}, expected {alpha}", e.label, e.alpha)));
        }
    }
    let l = encodings.iter().map(|e| e.ancillas).max().unwrap_or(0);
    let inner = l + first.system;
    let total = pair.b + inner;
    let branches = encodings.iter().map(|e| Some(e.padded(l - e.ancillas).op)).collect();
    let select: OpRef = Arc::new(SelectOp { select_qubits: pair.b, target_qubits: inner, branches });
    let sel_targets: Vec<usize> = (0..pair.b).collect();
    let p_r: OpRef = Arc::new(Embedded { inner: pair.p_r.clone(), total, targets: sel_targets.clone() });
    let p_l_dag: OpRef =
        Arc::new(Embedded { inner: Arc::new(Adjoint(pair.p_l.clone())), total, targets: sel_targets });
    let op = Sequence { qubits: total, ops: vec![p_r, select, p_l_dag] };
    let eps_a = encodings.iter().map(|e| e.epsilon).fold(0.0, f64::max);
    let epsilon = alpha * pair.epsilon_y + alpha * pair.beta * eps_a;
    BlockEncoding::new(Arc::new(op), alpha * pair.beta, l + pair.b, epsilon, label)
}

/// Parameters of the `A^{−c} B A^{−c}` sandwich.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativePowerParams {
    pub kappa: f64,
    pub varsigma1: f64,
    pub zeta1: f64,
    pub c_exp: f64,
}

impl NegativePowerParams {
    /// `ζ₁ = ς₁ / (κ^{1+c}·max(1,c)·log(κ^c/ς₁)·log²(κ(c+1)log(1/ς₁)))` with unit constant.
    pub fn new(kappa: f64, varsigma1: f64, c_exp: f64) -> Result<Self> {
        if !(kappa >= 2.0) {
            return Err(Error::input(format!("kappa must be at least 2, got {kappa}")));
        }
        if !(varsigma1 > 0.0 && varsigma1 <= 0.5) {
            return Err(Error::input(format!("varsigma1 must lie in (0, 1/2], got {varsigma1}")));
        }
        let l1 = (kappa.powf(c_exp) / varsigma1).ln();
        let l2 = (kappa * (c_exp + 1.0) * (1.0 / varsigma1).ln()).ln();
        let zeta1 = varsigma1 / (kappa.powf(1.0 + c_exp) * c_exp.max(1.0) * l1 * l2 * l2);
        Ok(NegativePowerParams { kappa, varsigma1, zeta1, c_exp })
    }

    /// Smallest admissible `κ`: `max(2, ⌈1/λ_min⌉)`.
    pub fn kappa_for(a: &CMatrix) -> Result<f64> {
        let (vals, _) = hermitian_eigen(a);
        let lo = vals.first().copied().unwrap_or(0.0);
        let hi = vals.last().copied().unwrap_or(0.0);
        if !(lo > 0.0) {
            return Err(Error::Range(format!("matrix is not positive definite (λ_min = {lo:e})")));
        }
        if hi > 1.0 + 1e-9 {
            return Err(Error::Range(format!("matrix exceeds the identity (λ_max = {hi})")));
        }
        Ok((1.0 / lo).ceil().max(2.0))
    }
}

/// Outcome of the sandwich: the encoding and its parameters.
#[derive(Debug, Clone)]
pub struct Sandwich {
    pub encoding: BlockEncoding,
    pub params: NegativePowerParams,
    /// Distance of the `A` encoding from its subject, compared with `ζ₁`.
    pub a_error: f64,
}

/// Encodes `A^{−c} B A^{−c}` with an idealized `A^{−c}/(2κ^c)` oracle.
///
/// `a_block` is the matrix carried by the `A` encoding; `A^{−c}` is read off
/// its eigendecomposition and dilated with one ancilla.
pub fn sandwich_negative_power(
    a_block: &CMatrix,
    a_error: f64,
    be_b: &BlockEncoding,
    c_exp: f64,
    varsigma1: f64,
) -> Result<Sandwich> {
    if a_block.nrows() != be_b.subject_dim() {
        return Err(Error::dimension("A and B act on different spaces"));
    }
    let kappa = NegativePowerParams::kappa_for(a_block)?;
    let params = NegativePowerParams::new(kappa, varsigma1, c_exp)?;
    let scale = 2.0 * kappa.powf(c_exp);
    let (vals, vecs) = hermitian_eigen(a_block);
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| C64::new(v.powf(-c_exp) / scale, 0.0)),
    ));
    let m = &vecs * diag * vecs.adjoint();
    let dil: OpRef = Arc::new(DenseOp::new(unitary_dilation(&m)?)?);

    // qubit order [a_left, ancillas of B, a_right, system]
    let ab = be_b.ancillas;
    let s = be_b.system;
    let total = ab + 2 + s;
    let sys: Vec<usize> = (ab + 2..total).collect();
    let right_targets: Vec<usize> = std::iter::once(ab + 1).chain(sys.iter().copied()).collect();
    let left_targets: Vec<usize> = std::iter::once(0).chain(sys.iter().copied()).collect();
    let b_targets: Vec<usize> = (1..=ab).chain(sys.iter().copied()).collect();
    let ops: Vec<OpRef> = vec![
        Arc::new(Embedded { inner: dil.clone(), total, targets: right_targets }),
        Arc::new(Embedded { inner: be_b.op.clone(), total, targets: b_targets }),
        Arc::new(Embedded { inner: dil, total, targets: left_targets }),
    ];
    let k2c = kappa.powf(2.0 * c_exp);
    let alpha = 4.0 * k2c * be_b.alpha;
    let epsilon = 4.0 * kappa.powf(c_exp) * be_b.alpha * varsigma1 + 4.0 * k2c * be_b.epsilon;
    let encoding = BlockEncoding::new(Arc::new(Sequence { qubits: total, ops }), alpha, ab + 2, epsilon, "L_s")?;
    Ok(Sandwich { encoding, params, a_error })
}

/// One seeded check of the combination error law: random encodings of
/// `A_j` claimed against `A_j + E_j` with `‖E_j‖ = eps_a`, combined through a
/// pair with coefficient error `eps_y`.
pub fn lcu_law_trial(seed: u64, terms: usize, eps_y: f64, eps_a: f64) -> Result<crate::prep::BoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = 2;
    let mut random = |scale: f64| -> CMatrix {
        let m = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let norm = spectral_norm(&m).max(1e-12);
        m * C64::new(scale / norm, 0.0)
    };
    let mut encodings = Vec::with_capacity(terms);
    let mut claimed = Vec::with_capacity(terms);
    for j in 0..terms {
        let a = random(0.9);
        let e = random(eps_a);
        let u = unitary_dilation(&a)?;
        let mut be = BlockEncoding::new(Arc::new(DenseOp::new(u)?), 1.0, 1, eps_a, &format!("A{j}"))?;
        be.epsilon = eps_a;
        encodings.push(be);
        claimed.push(a + e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let y: Vec<f64> = (0..terms).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let beta = y.iter().map(|v| v.abs()).sum::<f64>() + eps_y + 0.1;
    let pair = make_perturbed_pair(&y, beta, eps_y, seed)?;
    let be = lcu_combine(&pair, &encodings, "trial")?;
    let subject = claimed.iter().zip(&y).fold(CMatrix::zeros(d, d), |acc, (m, c)| acc + m * C64::new(*c, 0.0));
    let measured = operator_norm_distance(&subject, &be.scaled_block())?;
    Ok(crate::prep::BoundCheck { measured, bound: be.epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_unitary;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn real(rows: &[&[f64]]) -> CMatrix {
        CMatrix::from_fn(rows.len(), rows.len(), |i, j| c(rows[i][j]))
    }

    #[test]
    fn trivial_encodings() {
        let id = BlockEncoding::of_unitary(CMatrix::identity(4, 4), "I").unwrap();
        let r = verify_block_encoding(&id, &CMatrix::identity(4, 4)).unwrap();
        assert!(r.pass && r.measured_epsilon == 0.0);
        let h = real(&[&[1.0, 1.0], &[1.0, -1.0]]) * c(0.5f64.sqrt());
        let r = verify_block_encoding(&BlockEncoding::of_unitary(h.clone(), "H").unwrap(), &h).unwrap();
        assert!(r.measured_epsilon < 1e-15);
        assert!(verify_block_encoding(&id, &CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn purified_encoding_small_states() {
        let zero = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        let be = purified_from_vector(&zero, 1, 1, "pure").unwrap();
        assert!(is_unitary(&be.op.to_matrix(), 1e-12));
        let r = verify_block_encoding(&be, &real(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert!(r.measured_epsilon < 1e-12);
        let h = 0.5f64.sqrt();
        let bell = vec![c(h), c(0.0), c(0.0), c(h)];
        let be = purified_from_vector(&bell, 1, 1, "bell").unwrap();
        let r = verify_block_encoding(&be, &(CMatrix::identity(2, 2) * c(0.5))).unwrap();
        assert!(r.measured_epsilon < 1e-12);
    }

    #[test]
    fn rho3_is_maximally_mixed() {
        for n in [2, 4, 8] {
            let be = rho3_encoding(n).unwrap();
            assert_eq!(be.ancillas, 2 * qubits_for(n));
            let r = verify_block_encoding(&be, &(CMatrix::identity(n, n) * c(1.0 / n as f64))).unwrap();
            assert!(r.pass && r.measured_epsilon < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn signed_pair_cases() {
        let p = make_signed_pair(&[1.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(p.b, 2);
        assert!((p.p_l.to_matrix() - CMatrix::identity(4, 4)).norm() < 1e-14);
        assert!((p.p_r.to_matrix() - CMatrix::identity(4, 4)).norm() < 1e-14);

        let p = make_signed_pair(&[-0.5, 1.0, 0.5], 3.0).unwrap();
        let r = p.realized();
        for (j, y) in [-0.5, 1.0, 0.5, 0.0].iter().enumerate() {
            assert!((r[j] - c(*y)).norm() < 1e-15);
        }
        assert!(p.epsilon_y < 1e-15);
        assert!(make_signed_pair(&[1.0, -2.0], 2.5).is_err());

        let q = make_perturbed_pair(&[-0.5, 1.0, 0.5], 3.0, 1e-3, 7).unwrap();
        assert!((q.epsilon_y - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn lcu_trivial_cases() {
        let h = 0.5f64.sqrt();
        let bell = vec![c(h), c(0.0), c(0.0), c(h)];
        let a = purified_from_vector(&bell, 1, 1, "bell").unwrap();
        let single = lcu_combine(&make_signed_pair(&[1.0], 1.0).unwrap(), std::slice::from_ref(&a), "one").unwrap();
        assert_eq!(single.ancillas, a.ancillas + 1);
        assert!((single.block() - a.block()).norm() < 1e-14);
        let half = lcu_combine(&make_signed_pair(&[0.5, 0.5], 1.0).unwrap(), &[a.clone(), a.clone()], "avg").unwrap();
        assert!((half.block() - a.block()).norm() < 1e-14);
    }

    #[test]
    fn lcu_pads_smaller_encodings() {
        let zero = vec![c(1.0), c(0.0), c(0.0), c(0.0)];
        let small = purified_from_vector(&zero, 1, 1, "p").unwrap();
        let big = rho3_encoding(2).unwrap().padded(1);
        let y = [0.75, -0.25];
        let be = lcu_combine(&make_signed_pair(&y, 1.0).unwrap(), &[small.clone(), big.clone()], "mix").unwrap();
        let want = small.block() * c(0.75) - big.block() * c(0.25);
        assert!(verify_block_encoding(&be, &want).unwrap().measured_epsilon < 1e-14);
        assert!(is_unitary(&be.op.to_matrix(), 1e-10));
    }

    #[test]
    fn lcu_error_law_holds() {
        for seed in 0..10 {
            let exact = lcu_law_trial(seed, 3, 0.0, 0.0).unwrap();
            assert!(exact.measured < 1e-12, "{exact:?}");
            let noisy = lcu_law_trial(seed, 3, 1e-3, 1e-3).unwrap();
            assert!(noisy.holds() && noisy.measured > 0.0, "{noisy:?}");
        }
    }

    #[test]
    fn zeta_is_small_and_ordered() {
        let p = NegativePowerParams::new(4.0, 0.1, 0.5).unwrap();
        assert!(p.zeta1 > 0.0 && p.zeta1 < p.varsigma1);
        assert!(NegativePowerParams::new(1.0, 0.1, 0.5).is_err());
        assert!(NegativePowerParams::new(4.0, 0.6, 0.5).is_err());
        assert_eq!(NegativePowerParams::kappa_for(&(CMatrix::identity(2, 2) * c(0.3))).unwrap(), 4.0);
        assert!(NegativePowerParams::kappa_for(&real(&[&[1.0, 0.0], &[0.0, 0.0]])).is_err());
    }

    #[test]
    fn sandwich_two_vertex_closed_form() {
        // ρ₂ = diag(0.5, 0.5), 𝓛 = [[.5,−.5],[−.5,.5]] encoded through a dilation
        let a = CMatrix::identity(2, 2) * c(0.5);
        let l = real(&[&[0.5, -0.5], &[-0.5, 0.5]]);
        let be_b = BlockEncoding::new(Arc::new(DenseOp::new(unitary_dilation(&l).unwrap()).unwrap()), 1.0, 1, 0.0, "L")
            .unwrap();
        let s = sandwich_negative_power(&a, 0.0, &be_b, 0.5, 0.25).unwrap();
        assert_eq!(s.params.kappa, 2.0);
        assert_eq!(s.encoding.alpha, 4.0 * 2.0 * 1.0);
        assert_eq!(s.encoding.ancillas, 3);
        let want = real(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        let r = verify_block_encoding(&s.encoding, &want).unwrap();
        assert!(r.measured_epsilon < 1e-12, "{r:?}");
    }
}
