//! Matrix-free unitary operators.
//!
//! Qubit 0 is the most significant bit of a basis index. Operators acting on
//! a subset of qubits read their own index with the first listed target as
//! the most significant bit.

use std::sync::Arc;

use crate::linalg::{vec_norm, CMatrix, C64, ONE, ZERO};
use crate::{Error, Result};

/// A unitary that can be applied to a statevector in place.
pub trait Operator: Send + Sync {
    fn qubits(&self) -> usize;
    fn apply(&self, v: &mut [C64]);
    fn apply_adjoint(&self, v: &mut [C64]);

    fn dim(&self) -> usize {
        1 << self.qubits()
    }

    /// Dense matrix, column by column. Only sensible for small operators.
    fn to_matrix(&self) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        let mut col = vec![ZERO; d];
        for j in 0..d {
            col.iter_mut().for_each(|z| *z = ZERO);
            col[j] = ONE;
            self.apply(&mut col);
            for i in 0..d {
                m[(i, j)] = col[i];
            }
        }
        m
    }
}

pub type OpRef = Arc<dyn Operator>;

/// Index bookkeeping for applying a `k`-qubit operator to chosen qubits of an
/// `n`-qubit register.
#[derive(Debug, Clone)]
pub struct QubitMap {
    /// Basis offsets for each local index of the target qubits.
    offsets: Vec<usize>,
    /// Base indices with every target qubit cleared.
    bases: Vec<usize>,
}

impl QubitMap {
    pub fn new(total: usize, targets: &[usize]) -> Self {
        let k = targets.len();
        let bit = |q: usize| 1usize << (total - 1 - q);
        let offsets = (0..1usize << k)
            .map(|local| {
                targets
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| local >> (k - 1 - pos) & 1 == 1)
                    .map(|(_, &q)| bit(q))
                    .sum()
            })
            .collect();
        let mask: usize = targets.iter().map(|&q| bit(q)).sum();
        let bases = (0..1usize << total).filter(|i| i & mask == 0).collect();
        QubitMap { offsets, bases }
    }

    pub fn for_each_block(&self, v: &mut [C64], mut f: impl FnMut(&mut [C64])) {
        let mut buf = vec![ZERO; self.offsets.len()];
        for &b in &self.bases {
            for (slot, &o) in buf.iter_mut().zip(&self.offsets) {
                *slot = v[b + o];
            }
            f(&mut buf);
            for (slot, &o) in buf.iter().zip(&self.offsets) {
                v[b + o] = *slot;
            }
        }
    }

    /// Like `for_each_block`, also passing the base index.
    pub fn for_each_block_at(&self, v: &mut [C64], mut f: impl FnMut(usize, &mut [C64])) {
        let mut buf = vec![ZERO; self.offsets.len()];
        for &b in &self.bases {
            for (slot, &o) in buf.iter_mut().zip(&self.offsets) {
                *slot = v[b + o];
            }
            f(b, &mut buf);
            for (slot, &o) in buf.iter().zip(&self.offsets) {
                v[b + o] = *slot;
            }
        }
    }
}

/// Applies `op` to `targets` of an `total`-qubit vector.
pub fn apply_on(op: &dyn Operator, v: &mut [C64], total: usize, targets: &[usize], adjoint: bool) {
    debug_assert_eq!(op.qubits(), targets.len());
    if targets.iter().enumerate().all(|(i, &q)| q == total - targets.len() + i) {
        // contiguous low qubits: plain chunks
        for chunk in v.chunks_mut(op.dim()) {
            if adjoint {
                op.apply_adjoint(chunk)
            } else {
                op.apply(chunk)
            }
        }
        return;
    }
    QubitMap::new(total, targets).for_each_block(v, |blk| {
        if adjoint {
            op.apply_adjoint(blk)
        } else {
            op.apply(blk)
        }
    });
}

pub fn matvec(m: &CMatrix, v: &mut [C64]) {
    let out: Vec<C64> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect();
    v.copy_from_slice(&out);
}

pub fn matvec_adjoint(m: &CMatrix, v: &mut [C64]) {
    let out: Vec<C64> = (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].conj() * v[i]).sum())
        .collect();
    v.copy_from_slice(&out);
}

/// An explicit unitary matrix.
#[derive(Debug, Clone)]
pub struct DenseOp {
    matrix: CMatrix,
    qubits: usize,
}

impl DenseOp {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let d = matrix.nrows();
        if !matrix.is_square() || !d.is_power_of_two() {
            return Err(Error::dimension(format!(
                "dense operator must be 2^k square, got {:?}",
                matrix.shape()
            )));
        }
        if !crate::linalg::is_unitary(&matrix, crate::UNITARY_TOL) {
            return Err(Error::contract("matrix is not unitary"));
        }
        Ok(DenseOp { qubits: d.trailing_zeros() as usize, matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

impl Operator for DenseOp {
    fn qubits(&self) -> usize {
        self.qubits
    }
    fn apply(&self, v: &mut [C64]) {
        matvec(&self.matrix, v)
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        matvec_adjoint(&self.matrix, v)
    }
    fn to_matrix(&self) -> CMatrix {
        self.matrix.clone()
    }
}

/// State preparation `|0⟩ ↦ |ψ⟩`, completed to a unitary by a phased
/// Householder reflection.
#[derive(Debug, Clone)]
pub struct StatePrepOp {
    qubits: usize,
    phase: C64,
    /// Reflection vector (unnormalised); `None` when the map is the identity.
    w: Option<Vec<C64>>,
    w_norm_sqr: f64,
}

impl StatePrepOp {
    pub fn new(psi: &[C64]) -> Result<Self> {
        let d = psi.len();
        if !d.is_power_of_two() {
            return Err(Error::dimension(format!("state length {d} is not 2^k")));
        }
        let norm = vec_norm(psi);
        if (norm - 1.0).abs() > crate::NORM_TOL {
            return Err(Error::contract(format!("state norm {norm} ≠ 1")));
        }
        let phase = if psi[0].norm() > 1e-300 { psi[0] / psi[0].norm() } else { ONE };
        // H e0 = phase* ψ with H = I − 2ww†/‖w‖², w = e0 − phase* ψ
        let mut w: Vec<C64> = psi.iter().map(|z| -(phase.conj() * z)).collect();
        w[0] += ONE;
        let w_norm_sqr: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        Ok(StatePrepOp {
            qubits: d.trailing_zeros() as usize,
            phase,
            w: (w_norm_sqr > 1e-28).then_some(w),
            w_norm_sqr,
        })
    }

    fn reflect(&self, v: &mut [C64]) {
        if let Some(w) = &self.w {
            let c = crate::linalg::inner(w, v) * (2.0 / self.w_norm_sqr);
            for (x, wi) in v.iter_mut().zip(w) {
                *x -= c * wi;
            }
        }
    }
}

impl Operator for StatePrepOp {
    fn qubits(&self) -> usize {
        self.qubits
    }
    fn apply(&self, v: &mut [C64]) {
        self.reflect(v);
        v.iter_mut().for_each(|z| *z *= self.phase);
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        v.iter_mut().for_each(|z| *z *= self.phase.conj());
        self.reflect(v);
    }
}

/// Identity on `extra` new most-significant qubits, `inner` on the rest.
pub struct PaddedOp {
    pub inner: OpRef,
    pub extra: usize,
}

impl Operator for PaddedOp {
    fn qubits(&self) -> usize {
        self.inner.qubits() + self.extra
    }
    fn apply(&self, v: &mut [C64]) {
        for chunk in v.chunks_mut(self.inner.dim()) {
            self.inner.apply(chunk);
        }
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        for chunk in v.chunks_mut(self.inner.dim()) {
            self.inner.apply_adjoint(chunk);
        }
    }
}

/// `inner` applied to a chosen qubit subset of a larger register.
pub struct Embedded {
    pub inner: OpRef,
    pub total: usize,
    pub targets: Vec<usize>,
}

impl Operator for Embedded {
    fn qubits(&self) -> usize {
        self.total
    }
    fn apply(&self, v: &mut [C64]) {
        apply_on(self.inner.as_ref(), v, self.total, &self.targets, false)
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        apply_on(self.inner.as_ref(), v, self.total, &self.targets, true)
    }
}

/// Product `ops[last] ⋯ ops[0]` (ops applied in list order).
pub struct Sequence {
    pub qubits: usize,
    pub ops: Vec<OpRef>,
}

impl Operator for Sequence {
    fn qubits(&self) -> usize {
        self.qubits
    }
    fn apply(&self, v: &mut [C64]) {
        for op in &self.ops {
            op.apply(v);
        }
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        for op in self.ops.iter().rev() {
            op.apply_adjoint(v);
        }
    }
}

/// Swaps two equally sized qubit groups.
pub struct SwapRegisters {
    pub total: usize,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl Operator for SwapRegisters {
    fn qubits(&self) -> usize {
        self.total
    }
    fn apply(&self, v: &mut [C64]) {
        let bit = |q: usize| 1usize << (self.total - 1 - q);
        let mut out = vec![ZERO; v.len()];
        for (idx, amp) in v.iter().enumerate() {
            let mut j = idx;
            for (&a, &b) in self.first.iter().zip(&self.second) {
                let (ba, bb) = (idx & bit(a) != 0, idx & bit(b) != 0);
                if ba != bb {
                    j ^= bit(a) | bit(b);
                }
            }
            out[j] = *amp;
        }
        v.copy_from_slice(&out);
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        self.apply(v)
    }
}

/// `inner†`.
pub struct Adjoint(pub OpRef);

impl Operator for Adjoint {
    fn qubits(&self) -> usize {
        self.0.qubits()
    }
    fn apply(&self, v: &mut [C64]) {
        self.0.apply_adjoint(v)
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        self.0.apply(v)
    }
}

/// `Σ_j |j⟩⟨j| ⊗ U_j` with the select register most significant; missing or
/// `None` branches act as the identity.
pub struct SelectOp {
    pub select_qubits: usize,
    pub target_qubits: usize,
    pub branches: Vec<Option<OpRef>>,
}

impl SelectOp {
    fn run(&self, v: &mut [C64], adjoint: bool) {
        let d = 1usize << self.target_qubits;
        for (j, chunk) in v.chunks_mut(d).enumerate() {
            if let Some(Some(op)) = self.branches.get(j) {
                if adjoint {
                    op.apply_adjoint(chunk)
                } else {
                    op.apply(chunk)
                }
            }
        }
    }
}

impl Operator for SelectOp {
    fn qubits(&self) -> usize {
        self.select_qubits + self.target_qubits
    }
    fn apply(&self, v: &mut [C64]) {
        self.run(v, false)
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        self.run(v, true)
    }
}

/// Multiplies basis states by a phase: `|x⟩ ↦ phase(x)|x⟩`.
pub struct DiagonalOp {
    pub qubits: usize,
    pub phases: Arc<dyn Fn(usize) -> C64 + Send + Sync>,
}

impl Operator for DiagonalOp {
    fn qubits(&self) -> usize {
        self.qubits
    }
    fn apply(&self, v: &mut [C64]) {
        v.iter_mut().enumerate().for_each(|(i, z)| *z *= (self.phases)(i));
    }
    fn apply_adjoint(&self, v: &mut [C64]) {
        v.iter_mut().enumerate().for_each(|(i, z)| *z *= (self.phases)(i).conj());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_unitary;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn state_prep_maps_zero_to_target() {
        let psi = vec![c(0.0), C64::new(0.6, 0.0), C64::new(0.0, 0.8), c(0.0)];
        let op = StatePrepOp::new(&psi).unwrap();
        let m = op.to_matrix();
        assert!(is_unitary(&m, 1e-12));
        for i in 0..4 {
            assert!((m[(i, 0)] - psi[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn state_prep_identity_case() {
        let psi = vec![c(1.0), c(0.0)];
        let m = StatePrepOp::new(&psi).unwrap().to_matrix();
        assert!((m - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn embedded_matches_kronecker() {
        // X on qubit 0 of a 2-qubit register equals X ⊗ I
        let x = DenseOp::new(CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])).unwrap();
        let op = Embedded { inner: Arc::new(x.clone()), total: 2, targets: vec![0] };
        let expect = x.matrix().kronecker(&CMatrix::identity(2, 2));
        assert!((op.to_matrix() - expect).norm() < 1e-15);
        let op = Embedded { inner: Arc::new(x.clone()), total: 2, targets: vec![1] };
        let expect = CMatrix::identity(2, 2).kronecker(x.matrix());
        assert!((op.to_matrix() - expect).norm() < 1e-15);
    }

    #[test]
    fn select_and_adjoint() {
        let x: OpRef = Arc::new(DenseOp::new(CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])).unwrap());
        let sel = SelectOp { select_qubits: 1, target_qubits: 1, branches: vec![None, Some(x)] };
        let m = sel.to_matrix();
        // CNOT
        assert_eq!(m[(3, 2)], c(1.0));
        assert_eq!(m[(0, 0)], c(1.0));
        let psi = vec![c(0.6), c(0.0), c(0.0), c(0.8)];
        let prep: OpRef = Arc::new(StatePrepOp::new(&psi).unwrap());
        let both = Sequence { qubits: 2, ops: vec![prep.clone(), Arc::new(Adjoint(prep))] };
        assert!((both.to_matrix() - CMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn swap_registers_permutes() {
        let op = SwapRegisters { total: 2, first: vec![0], second: vec![1] };
        let m = op.to_matrix();
        // |01⟩ ↔ |10⟩
        assert_eq!(m[(2, 1)], c(1.0));
        assert_eq!(m[(1, 2)], c(1.0));
        assert_eq!(m[(0, 0)], c(1.0));
    }
}
