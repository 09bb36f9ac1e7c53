//! Hybrid statevector simulator.
//!
//! Dense registers (index, coefficient, flag) carry complex amplitudes.
//! Arithmetic registers are only ever permuted between basis states, so each
//! distinct assignment of their values is kept as a classical label on its
//! own branch of dense amplitudes.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::{is_unitary, CMatrix, C64, ZERO};
use crate::ops::QubitMap;
use crate::{Error, Result};

/// Unsigned fixed point with `int_bits` integer and `frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FixedPointSpec {
    pub int_bits: u32,
    pub frac_bits: u32,
}

impl FixedPointSpec {
    /// `bits` wide with one integer bit, i.e. range `[0, 2)`.
    pub fn unit(bits: u32) -> Self {
        FixedPointSpec { int_bits: 1, frac_bits: bits - 1 }
    }

    pub fn new(int_bits: u32, frac_bits: u32) -> Self {
        assert!(int_bits + frac_bits <= 63, "labels are limited to 63 bits");
        FixedPointSpec { int_bits, frac_bits }
    }

    pub fn bits(&self) -> u32 {
        self.int_bits + self.frac_bits
    }

    pub fn ulp(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_raw(&self) -> u64 {
        (1u64 << self.bits()) - 1
    }

    /// Upper end of the representable range (exclusive).
    pub fn range(&self) -> f64 {
        (self.int_bits as f64).exp2()
    }

    /// Round-to-nearest-even encoding.
    pub fn encode(&self, value: f64) -> Result<u64> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Overflow(format!("{value} is not representable as unsigned fixed point")));
        }
        let scaled = (value * (self.frac_bits as f64).exp2()).round_ties_even();
        if scaled > self.max_raw() as f64 {
            return Err(Error::Overflow(format!("{value} exceeds range [0, {})", self.range())));
        }
        Ok(scaled as u64)
    }

    pub fn decode(&self, raw: u64) -> f64 {
        raw as f64 * self.ulp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RegisterKind {
    Index,
    Coefficient,
    Flag,
    Arithmetic(FixedPointSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Register {
    pub name: String,
    pub qubits: usize,
    pub kind: RegisterKind,
}

impl Register {
    pub fn index(name: &str, qubits: usize) -> Self {
        Register { name: name.into(), qubits, kind: RegisterKind::Index }
    }
    pub fn coefficient(name: &str, qubits: usize) -> Self {
        Register { name: name.into(), qubits, kind: RegisterKind::Coefficient }
    }
    pub fn flag(name: &str, qubits: usize) -> Self {
        Register { name: name.into(), qubits, kind: RegisterKind::Flag }
    }
    pub fn arithmetic(name: &str, spec: FixedPointSpec) -> Self {
        Register { name: name.into(), qubits: spec.bits() as usize, kind: RegisterKind::Arithmetic(spec) }
    }

    pub fn is_arithmetic(&self) -> bool {
        matches!(self.kind, RegisterKind::Arithmetic(_))
    }
}

/// Ordered registers; earlier registers are more significant.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegisterLayout {
    pub registers: Vec<Register>,
}

impl RegisterLayout {
    pub fn new(registers: Vec<Register>) -> Result<Self> {
        let mut layout = RegisterLayout::default();
        for r in registers {
            layout.push(r)?;
        }
        Ok(layout)
    }

    fn push(&mut self, r: Register) -> Result<()> {
        if r.qubits == 0 {
            return Err(Error::input(format!("register `{}` has no qubits", r.name)));
        }
        if self.registers.iter().any(|x| x.name == r.name) {
            return Err(Error::input(format!("duplicate register `{}`", r.name)));
        }
        self.registers.push(r);
        Ok(())
    }

    pub fn total_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.qubits).sum()
    }

    pub fn dense_qubits(&self) -> usize {
        self.registers.iter().filter(|r| !r.is_arithmetic()).map(|r| r.qubits).sum()
    }

    pub fn get(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::input(format!("no register `{name}`")))
    }

    /// First dense qubit position and width of a dense register.
    pub fn dense_span(&self, name: &str) -> Result<(usize, usize)> {
        let mut off = 0;
        for r in &self.registers {
            if r.is_arithmetic() {
                continue;
            }
            if r.name == name {
                return Ok((off, r.qubits));
            }
            off += r.qubits;
        }
        Err(Error::input(format!("no dense register `{name}`")))
    }

    pub fn dense_targets(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut qs = Vec::new();
        for n in names {
            let (o, w) = self.dense_span(n)?;
            qs.extend(o..o + w);
        }
        Ok(qs)
    }

    /// Position of an arithmetic register in the label vector.
    pub fn label_slot(&self, name: &str) -> Result<(usize, FixedPointSpec)> {
        let mut slot = 0;
        for r in &self.registers {
            if let RegisterKind::Arithmetic(spec) = r.kind {
                if r.name == name {
                    return Ok((slot, spec));
                }
                slot += 1;
            }
        }
        Err(Error::input(format!("no arithmetic register `{name}`")))
    }

    pub fn label_count(&self) -> usize {
        self.registers.iter().filter(|r| r.is_arithmetic()).count()
    }
}

/// Reads a register value out of a dense basis index.
#[derive(Debug, Clone, Copy)]
pub struct DenseField {
    shift: usize,
    mask: usize,
}

impl DenseField {
    pub fn get(&self, idx: usize) -> usize {
        (idx >> self.shift) & self.mask
    }
    pub fn set(&self, idx: usize, value: usize) -> usize {
        (idx & !(self.mask << self.shift)) | ((value & self.mask) << self.shift)
    }
}

/// Reduced density operator over named registers.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    pub matrix: CMatrix,
    pub subsystem: Vec<String>,
}

impl DensityOperator {
    /// Hermitian, unit trace and positive semidefinite within tolerance.
    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        if (m - m.adjoint()).iter().any(|z| z.norm() > 1e-12) {
            return Err(Error::contract("density operator is not Hermitian"));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::contract(format!("density operator trace {tr}")));
        }
        let (vals, _) = crate::linalg::hermitian_eigen(m);
        if vals.first().is_some_and(|v| *v < -1e-10) {
            return Err(Error::contract(format!("density operator has eigenvalue {}", vals[0])));
        }
        Ok(())
    }

    pub fn real(&self) -> crate::linalg::RMatrix {
        self.matrix.map(|z| z.re)
    }
}

/// Hybrid branch statevector.
#[derive(Debug, Clone)]
pub struct SimState {
    layout: RegisterLayout,
    branches: BTreeMap<Vec<u64>, Vec<C64>>,
}

/// Amplitudes below this are dropped when branches are split.
const PRUNE: f64 = 1e-300;

impl SimState {
    /// All registers in `|0⟩`.
    pub fn zero(layout: RegisterLayout) -> Self {
        let mut v = vec![ZERO; 1 << layout.dense_qubits()];
        v[0] = C64::new(1.0, 0.0);
        let mut branches = BTreeMap::new();
        branches.insert(vec![0; layout.label_count()], v);
        SimState { layout, branches }
    }

    pub fn from_branches(layout: RegisterLayout, branches: BTreeMap<Vec<u64>, Vec<C64>>) -> Result<Self> {
        let d = 1 << layout.dense_qubits();
        for (labels, v) in &branches {
            if labels.len() != layout.label_count() || v.len() != d {
                return Err(Error::dimension("branch does not match layout"));
            }
        }
        Ok(SimState { layout, branches })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn branches(&self) -> &BTreeMap<Vec<u64>, Vec<C64>> {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn field(&self, name: &str) -> Result<DenseField> {
        let (off, w) = self.layout.dense_span(name)?;
        Ok(DenseField { shift: self.layout.dense_qubits() - off - w, mask: (1 << w) - 1 })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.branches.values().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if (n - 1.0).abs() > crate::NORM_TOL {
            return Err(Error::contract(format!("state norm {n}")));
        }
        Ok(())
    }

    pub fn scale(&mut self, s: C64) {
        self.branches.values_mut().flatten().for_each(|z| *z *= s);
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm_sqr().sqrt();
        if n <= 0.0 {
            return Err(Error::contract("cannot normalise the zero state"));
        }
        self.scale(C64::new(1.0 / n, 0.0));
        Ok(n)
    }

    /// `⟨self|other⟩`; layouts must match.
    pub fn inner(&self, other: &SimState) -> C64 {
        self.branches
            .iter()
            .filter_map(|(l, v)| other.branches.get(l).map(|w| crate::linalg::inner(v, w)))
            .sum()
    }

    /// Adds a register in `|0⟩` at the end of the layout.
    pub fn add_register(&mut self, r: Register) -> Result<()> {
        let arith = r.is_arithmetic();
        let q = r.qubits;
        self.layout.push(r)?;
        if arith {
            let old = std::mem::take(&mut self.branches);
            self.branches = old
                .into_iter()
                .map(|(mut l, v)| {
                    l.push(0);
                    (l, v)
                })
                .collect();
        } else {
            for v in self.branches.values_mut() {
                let mut nv = vec![ZERO; v.len() << q];
                for (i, z) in v.iter().enumerate() {
                    nv[i << q] = *z;
                }
                *v = nv;
            }
        }
        Ok(())
    }

    /// Removes a register that is in `|0⟩` on every branch.
    pub fn remove_register(&mut self, name: &str) -> Result<()> {
        let reg = self.layout.get(name)?.clone();
        if let RegisterKind::Arithmetic(_) = reg.kind {
            let (slot, _) = self.layout.label_slot(name)?;
            if self.branches.keys().any(|l| l[slot] != 0) {
                return Err(Error::contract(format!("register `{name}` is not uncomputed")));
            }
            let old = std::mem::take(&mut self.branches);
            self.branches = old
                .into_iter()
                .map(|(mut l, v)| {
                    l.remove(slot);
                    (l, v)
                })
                .collect();
        } else {
            let f = self.field(name)?;
            for v in self.branches.values() {
                if v.iter().enumerate().any(|(i, z)| f.get(i) != 0 && z.norm() > 1e-9) {
                    return Err(Error::contract(format!("register `{name}` is not in |0⟩")));
                }
            }
            let dq = self.layout.dense_qubits();
            let (off, w) = self.layout.dense_span(name)?;
            let low = dq - off - w;
            for v in self.branches.values_mut() {
                let nv: Vec<C64> = (0..v.len() >> w)
                    .map(|i| {
                        let hi = i >> low;
                        let lo = i & ((1 << low) - 1);
                        v[(hi << (low + w)) | lo]
                    })
                    .collect();
                *v = nv;
            }
        }
        self.layout.registers.retain(|r| r.name != name);
        Ok(())
    }

    /// Applies a unitary to the concatenation of dense registers `targets`.
    pub fn apply_unitary(&mut self, u: &CMatrix, targets: &[&str]) -> Result<()> {
        let qs = self.layout.dense_targets(targets)?;
        if u.nrows() != 1 << qs.len() || !u.is_square() {
            return Err(Error::dimension(format!("unitary {:?} on {} qubits", u.shape(), qs.len())));
        }
        if !is_unitary(u, crate::UNITARY_TOL) {
            return Err(Error::contract("apply_unitary: matrix is not unitary"));
        }
        let map = QubitMap::new(self.layout.dense_qubits(), &qs);
        for v in self.branches.values_mut() {
            map.for_each_block(v, |blk| crate::ops::matvec(u, blk));
        }
        Ok(())
    }

    /// Applies `f(control values)` to `targets`, for dense `controls`
    /// disjoint from the targets. `None` means identity.
    pub fn apply_controlled(
        &mut self,
        controls: &[&str],
        targets: &[&str],
        f: impl Fn(&[usize]) -> Result<Option<CMatrix>>,
    ) -> Result<()> {
        self.apply_mixed_controlled(controls, targets, |c, _| f(c))
    }

    /// Applies a per-branch unitary chosen from the arithmetic labels.
    pub fn apply_label_controlled(
        &mut self,
        targets: &[&str],
        f: impl Fn(&[u64]) -> Result<Option<CMatrix>>,
    ) -> Result<()> {
        self.apply_mixed_controlled(&[], targets, |_, l| f(l))
    }

    /// Unitary on `targets` chosen from dense control values and branch labels.
    pub fn apply_mixed_controlled(
        &mut self,
        controls: &[&str],
        targets: &[&str],
        f: impl Fn(&[usize], &[u64]) -> Result<Option<CMatrix>>,
    ) -> Result<()> {
        let fields: Vec<DenseField> = controls.iter().map(|c| self.field(c)).collect::<Result<_>>()?;
        let qs = self.layout.dense_targets(targets)?;
        if fields.iter().any(|fl| {
            qs.iter().any(|&q| (fl.mask << fl.shift) >> (self.layout.dense_qubits() - 1 - q) & 1 == 1)
        }) {
            return Err(Error::input("control and target registers overlap"));
        }
        let map = QubitMap::new(self.layout.dense_qubits(), &qs);
        let dim = 1usize << qs.len();
        for (labels, v) in self.branches.iter_mut() {
            let mut cache: HashMap<Vec<usize>, Option<CMatrix>> = HashMap::new();
            let mut err = None;
            map.for_each_block_at(v, |base, blk| {
                if err.is_some() || blk.iter().all(|z| z.norm_sqr() <= PRUNE) {
                    return;
                }
                let key: Vec<usize> = fields.iter().map(|fl| fl.get(base)).collect();
                if !cache.contains_key(&key) {
                    match f(&key, labels) {
                        Ok(Some(m)) if m.nrows() != dim || !is_unitary(&m, crate::UNITARY_TOL) => {
                            err = Some(Error::contract("controlled operation is not a unitary of the right size"));
                            return;
                        }
                        Ok(m) => {
                            cache.insert(key.clone(), m);
                        }
                        Err(e) => {
                            err = Some(e);
                            return;
                        }
                    }
                }
                if let Some(m) = &cache[&key] {
                    crate::ops::matvec(m, blk);
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(())
    }

    /// Rewrites arithmetic labels as a function of the dense `controls`.
    ///
    /// `f` must act as a bijection on labels for each fixed control value;
    /// branches are split by control value first and merged afterwards.
    pub fn map_labels(
        &mut self,
        controls: &[&str],
        mut f: impl FnMut(&[usize], &mut Vec<u64>) -> Result<()>,
    ) -> Result<()> {
        let fields: Vec<DenseField> = controls.iter().map(|c| self.field(c)).collect::<Result<_>>()?;
        let d = 1usize << self.layout.dense_qubits();
        let old = std::mem::take(&mut self.branches);
        let mut out: BTreeMap<Vec<u64>, Vec<C64>> = BTreeMap::new();
        for (labels, v) in old {
            let mut parts: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
            for (i, z) in v.iter().enumerate() {
                if z.norm_sqr() > PRUNE {
                    parts.entry(fields.iter().map(|f| f.get(i)).collect()).or_default().push(i);
                }
            }
            for (ctrl, idxs) in parts {
                let mut nl = labels.clone();
                f(&ctrl, &mut nl)?;
                let target = out.entry(nl).or_insert_with(|| vec![ZERO; d]);
                for i in idxs {
                    target[i] += v[i];
                }
            }
        }
        self.branches = out;
        Ok(())
    }

    /// Probability that `pred(dense index, labels)` holds.
    pub fn probability(&self, pred: impl Fn(usize, &[u64]) -> bool) -> f64 {
        self.branches
            .iter()
            .map(|(l, v)| v.iter().enumerate().filter(|(i, _)| pred(*i, l)).map(|(_, z)| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Zeroes amplitudes where `pred` fails (unnormalised projection).
    pub fn project(&mut self, pred: impl Fn(usize, &[u64]) -> bool) {
        for (l, v) in self.branches.iter_mut() {
            for (i, z) in v.iter_mut().enumerate() {
                if !pred(i, l) {
                    *z = ZERO;
                }
            }
        }
    }

    /// `self − 2⟨s|self⟩ s` for a normalised `s` with the same layout.
    pub fn reflect_about(&mut self, s: &SimState) {
        let c = s.inner(self) * 2.0;
        for (l, w) in &s.branches {
            let d = w.len();
            let v = self.branches.entry(l.clone()).or_insert_with(|| vec![ZERO; d]);
            for (x, y) in v.iter_mut().zip(w) {
                *x -= c * y;
            }
        }
    }

    /// Reduced density operator over dense registers `keep` (in that order).
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::input("partial trace needs at least one kept register"));
        }
        for k in keep {
            if self.layout.get(k)?.is_arithmetic() {
                return Err(Error::input(format!("kept register `{k}` must be dense")));
            }
        }
        let fields: Vec<(DenseField, usize)> = keep
            .iter()
            .map(|k| Ok((self.field(k)?, self.layout.get(k)?.qubits)))
            .collect::<Result<_>>()?;
        let kq: usize = fields.iter().map(|f| f.1).sum();
        let dk = 1usize << kq;
        let keep_index = |i: usize| fields.iter().fold(0usize, |acc, (f, w)| (acc << w) | f.get(i));
        let mut rest_mask = 0usize;
        for (f, _) in &fields {
            rest_mask |= f.mask << f.shift;
        }
        let mut rho = CMatrix::zeros(dk, dk);
        for v in self.branches.values() {
            let mut by_rest: BTreeMap<usize, Vec<(usize, C64)>> = BTreeMap::new();
            for (i, z) in v.iter().enumerate() {
                if z.norm_sqr() > PRUNE {
                    by_rest.entry(i & !rest_mask).or_default().push((keep_index(i), *z));
                }
            }
            for entries in by_rest.values() {
                for &(a, za) in entries {
                    for &(b, zb) in entries {
                        rho[(a, b)] += za * zb.conj();
                    }
                }
            }
        }
        Ok(DensityOperator { matrix: rho, subsystem: keep.iter().map(|s| s.to_string()).collect() })
    }

    /// Flattens to a full statevector in layout order, arithmetic labels as basis bits.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let names: Vec<String> = self.layout.registers.iter().map(|r| r.name.clone()).collect();
        self.to_dense_ordered(&names.iter().map(|s| s.as_str()).collect::<Vec<_>>())
    }

    /// Flattens with registers in the given order (earlier is more significant).
    pub fn to_dense_ordered(&self, order: &[&str]) -> Result<Vec<C64>> {
        if order.len() != self.layout.registers.len() {
            return Err(Error::input("register order must list every register once"));
        }
        let total = self.layout.total_qubits();
        if total > 26 {
            return Err(Error::Range(format!("{total} qubits is too many to flatten")));
        }
        enum Src {
            Label(usize),
            Dense(DenseField),
        }
        let mut parts = Vec::with_capacity(order.len());
        for name in order {
            let r = self.layout.get(name)?;
            let src = if r.is_arithmetic() {
                Src::Label(self.layout.label_slot(name)?.0)
            } else {
                Src::Dense(self.field(name)?)
            };
            if parts.iter().any(|(n, _, _)| n == name) {
                return Err(Error::input(format!("register `{name}` listed twice")));
            }
            parts.push((*name, r.qubits, src));
        }
        let mut out = vec![ZERO; 1 << total];
        for (labels, v) in &self.branches {
            for (i, z) in v.iter().enumerate() {
                if *z == ZERO {
                    continue;
                }
                let idx = parts.iter().fold(0usize, |acc, (_, w, src)| {
                    let val = match src {
                        Src::Label(s) => labels[*s] as usize,
                        Src::Dense(f) => f.get(i),
                    };
                    (acc << w) | val
                });
                out[idx] += *z;
            }
        }
        Ok(out)
    }

    /// Born-rule marginal of one register.
    pub fn marginal(&self, register: &str) -> Result<BTreeMap<u64, f64>> {
        let reg = self.layout.get(register)?;
        let mut probs = BTreeMap::new();
        if reg.is_arithmetic() {
            let (slot, _) = self.layout.label_slot(register)?;
            for (l, v) in &self.branches {
                *probs.entry(l[slot]).or_insert(0.0) += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
            }
        } else {
            let f = self.field(register)?;
            for v in self.branches.values() {
                for (i, z) in v.iter().enumerate() {
                    *probs.entry(f.get(i) as u64).or_insert(0.0) += z.norm_sqr();
                }
            }
        }
        Ok(probs)
    }

    /// Histogram of `shots` measurements of `register`, deterministic in `seed`.
    pub fn sample_measurement(&self, register: &str, shots: usize, seed: u64) -> Result<BTreeMap<u64, usize>> {
        if shots == 0 {
            return Err(Error::input("shots must be ≥ 1"));
        }
        let probs: Vec<(u64, f64)> = self.marginal(register)?.into_iter().collect();
        let total: f64 = probs.iter().map(|p| p.1).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hist = BTreeMap::new();
        for _ in 0..shots {
            let outcome = sample_index(&probs.iter().map(|p| p.1).collect::<Vec<_>>(), total, &mut rng);
            *hist.entry(probs[outcome].0).or_insert(0) += 1;
        }
        Ok(hist)
    }

    /// Branch labels and amplitudes as JSON, for debugging.
    pub fn to_json(&self) -> serde_json::Value {
        let branches: Vec<serde_json::Value> = self
            .branches
            .iter()
            .map(|(l, v)| {
                serde_json::json!({
                    "labels": l,
                    "re": v.iter().map(|z| z.re).collect::<Vec<_>>(),
                    "im": v.iter().map(|z| z.im).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "layout": self.layout, "branches": branches })
    }
}

/// Draws an index from unnormalised weights.
pub fn sample_index(weights: &[f64], total: f64, rng: &mut impl Rng) -> usize {
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

pub fn hadamard(qubits: usize) -> CMatrix {
    let d = 1 << qubits;
    let s = (d as f64).sqrt().recip();
    CMatrix::from_fn(d, d, |i, j| {
        let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(sign * s, 0.0)
    })
}

/// Unitary whose first column is the (real, normalised) `amplitudes`, padded with zeros.
pub fn prep_unitary(amplitudes: &[C64], qubits: usize) -> Result<CMatrix> {
    let d = 1 << qubits;
    if amplitudes.len() > d {
        return Err(Error::dimension(format!("{} amplitudes in {} slots", amplitudes.len(), d)));
    }
    let mut psi = amplitudes.to_vec();
    psi.resize(d, ZERO);
    use crate::ops::Operator;
    Ok(crate::ops::StatePrepOp::new(&psi)?.to_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn two_qubits() -> SimState {
        SimState::zero(RegisterLayout::new(vec![Register::index("a", 1), Register::index("b", 1)]).unwrap())
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = SimState::zero(RegisterLayout::new(vec![Register::index("a", 1)]).unwrap());
        s.apply_unitary(&hadamard(1), &["a"]).unwrap();
        let v = &s.branches()[&vec![]];
        assert!((v[0].re - FRAC_1_SQRT_2).abs() < 1e-15 && (v[1].re - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let mut s = two_qubits();
        let m = CMatrix::from_element(2, 2, ONE);
        assert!(matches!(s.apply_unitary(&m, &["a"]), Err(Error::Contract(_))));
    }

    #[test]
    fn trace_of_product_and_bell() {
        let s = two_qubits();
        let rho = s.partial_trace(&["a"]).unwrap();
        assert!((rho.matrix[(0, 0)] - ONE).norm() < 1e-15);
        let mut bell = two_qubits();
        bell.apply_unitary(&hadamard(1), &["a"]).unwrap();
        bell.apply_controlled(&["a"], &["b"], |c| {
            Ok((c[0] == 1).then(|| CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])))
        })
        .unwrap();
        let rho = bell.partial_trace(&["a"]).unwrap();
        rho.validate().unwrap();
        let half = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!((rho.matrix - half).norm() < 1e-15);
    }

    #[test]
    fn fixed_point_rounding_is_half_even() {
        let spec = FixedPointSpec::new(1, 2);
        assert_eq!(spec.encode(0.125).unwrap(), 0); // 0.5 ulp ties to even 0
        assert_eq!(spec.encode(0.375).unwrap(), 2); // 1.5 ulp ties to even 2
        assert!(spec.encode(2.0).is_err());
        assert!(spec.encode(-0.1).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut s = SimState::zero(RegisterLayout::new(vec![Register::index("a", 1)]).unwrap());
        assert_eq!(s.sample_measurement("a", 50, 3).unwrap()[&0], 50);
        s.apply_unitary(&hadamard(1), &["a"]).unwrap();
        let h1 = s.sample_measurement("a", 10_000, 9).unwrap();
        let h2 = s.sample_measurement("a", 10_000, 9).unwrap();
        assert_eq!(h1, h2);
        let zeros = h1[&0] as f64;
        // 5σ binomial bound around 5000
        assert!((zeros - 5000.0).abs() <= 5.0 * 50.0);
    }

    #[test]
    fn add_and_remove_registers() {
        let mut s = two_qubits();
        s.apply_unitary(&hadamard(1), &["b"]).unwrap();
        s.add_register(Register::flag("f", 1)).unwrap();
        s.add_register(Register::arithmetic("x", FixedPointSpec::unit(4))).unwrap();
        assert_eq!(s.layout().total_qubits(), 7);
        s.check_normalized().unwrap();
        s.remove_register("f").unwrap();
        s.remove_register("x").unwrap();
        assert!(s.remove_register("b").is_err());
        let rho = s.partial_trace(&["b"]).unwrap();
        assert!((rho.matrix[(0, 1)].re - 0.5).abs() < 1e-15);
    }
}
