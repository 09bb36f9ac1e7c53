//! Reversible fixed-point arithmetic on branch labels.
//!
//! Every gate has the form `out += f(inputs)` and its uncompute subtracts the
//! same value, so each is a bijection on basis labels.

use serde::Serialize;

use crate::linalg::{CMatrix, C64};
use crate::qsim::{FixedPointSpec, SimState};
use crate::{Error, Result};

/// Rounds `num / 2^shift` to nearest, ties to even.
pub fn shr_round_even(num: u128, shift: u32) -> u128 {
    if shift == 0 {
        return num;
    }
    if shift >= 128 {
        return 0;
    }
    let q = num >> shift;
    let rem = num & ((1u128 << shift) - 1);
    let half = 1u128 << (shift - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Rounds `num / den` to nearest, ties to even.
pub fn div_round_even(num: u128, den: u128) -> u128 {
    let q = num / den;
    let r = num % den;
    if 2 * r > den || (2 * r == den && q & 1 == 1) {
        q + 1
    } else {
        q
    }
}

/// Re-expresses `raw` with `from` fractional bits at `to` fractional bits.
pub fn rescale(raw: u128, from: u32, to: u32) -> u128 {
    if to >= from {
        raw << (to - from)
    } else {
        shr_round_even(raw, from - to)
    }
}

fn check_fits(raw: u128, spec: FixedPointSpec, what: &str) -> Result<u64> {
    if raw > spec.max_raw() as u128 {
        return Err(Error::Overflow(format!(
            "{what}: {} exceeds register range [0, {})",
            raw as f64 * spec.ulp(),
            spec.range()
        )));
    }
    Ok(raw as u64)
}

/// Rounded product of two labels, expressed in `out`.
pub fn mul_raw(a: u64, sa: FixedPointSpec, b: u64, sb: FixedPointSpec, out: FixedPointSpec) -> Result<u64> {
    let p = a as u128 * b as u128;
    let raw = rescale(p, sa.frac_bits + sb.frac_bits, out.frac_bits);
    check_fits(raw, out, "multiply")
}

/// `a` expressed in `out`, rounded.
pub fn convert_raw(a: u64, sa: FixedPointSpec, out: FixedPointSpec) -> Result<u64> {
    check_fits(rescale(a as u128, sa.frac_bits, out.frac_bits), out, "convert")
}

/// `x^k` by repeated rounded multiplication in `out`.
pub fn pow_raw(x: u64, sx: FixedPointSpec, k: u32, out: FixedPointSpec) -> Result<u64> {
    let mut acc = out.encode(1.0)?;
    let xo = convert_raw(x, sx, out).or_else(|e| if k == 0 { Ok(0) } else { Err(e) })?;
    for _ in 0..k {
        acc = mul_raw(acc, out, xo, out, out)?;
    }
    Ok(acc)
}

/// Guard bits carried by the series evaluation beyond the output precision.
pub const EXP_GUARD_BITS: u32 = 8;

/// Fixed-point `Σ_{j≤k} (−λx)^j/j!` with the alternating series split into
/// nonnegative even and odd accumulators.
pub fn exp_neg_lambda_raw(x: u64, sx: FixedPointSpec, lambda: f64, order: u32, out: FixedPointSpec) -> Result<u64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::input(format!("lambda must be positive, got {lambda}")));
    }
    let w = out.frac_bits + EXP_GUARD_BITS;
    if w > 56 {
        return Err(Error::Range(format!("working precision {w} bits is too wide")));
    }
    let one = 1u128 << w;
    let lam = (lambda * (w as f64).exp2()).round_ties_even() as u128;
    let xw = rescale(x as u128, sx.frac_bits, w);
    let y = shr_round_even(lam * xw, w);
    let limit = 1u128 << (w + 12);
    let (mut pos, mut neg) = (one, 0u128);
    let mut term = one;
    for j in 1..=order as u128 {
        term = div_round_even(shr_round_even(term * y, w), j);
        if term > limit {
            return Err(Error::Overflow(format!("exp series term exceeds working range at order {j}")));
        }
        if j % 2 == 0 {
            pos += term;
        } else {
            neg += term;
        }
    }
    if neg > pos {
        return Err(Error::Overflow("truncated exp series is negative".into()));
    }
    check_fits(shr_round_even(pos - neg, EXP_GUARD_BITS), out, "exp_neg_lambda")
}

/// Smallest Taylor order whose remainder `y^{k+1}/(k+1)!` is at most `tol`.
pub fn exp_order_for(y_max: f64, tol: f64) -> u32 {
    let mut k = 0u32;
    let mut rem = y_max;
    while rem > tol && k < 200 {
        k += 1;
        rem *= y_max / (k as f64 + 1.0);
    }
    k
}

/// Outcome of sweeping the exp gate over its input register.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpGateSweep {
    pub bits: u32,
    pub lambda: f64,
    pub order: u32,
    pub checked: u64,
    pub violations: u64,
    /// Largest `|got − e^{−λx}|` seen.
    pub max_error: f64,
}

/// Compares every `step`-th input of a `bits`-bit unit register against
/// `e^{−λx}` with bound `(λx)^{k+1}/(k+1)! + k·2^{−bits}`.
pub fn exp_gate_sweep(bits: u32, lambda: f64, order: u32, step: usize) -> Result<ExpGateSweep> {
    let s = FixedPointSpec::unit(bits);
    let fact: f64 = (1..=order + 1).map(|i| i as f64).product();
    let mut sweep = ExpGateSweep { bits, lambda, order, checked: 0, violations: 0, max_error: 0.0 };
    for x in (0..=s.max_raw()).step_by(step.max(1)) {
        let y = lambda * s.decode(x);
        let bound = y.powi(order as i32 + 1) / fact + order as f64 * s.ulp();
        let err = (s.decode(exp_neg_lambda_raw(x, s, lambda, order, s)?) - (-y).exp()).abs();
        sweep.checked += 1;
        sweep.max_error = sweep.max_error.max(err);
        if err > bound {
            sweep.violations += 1;
        }
    }
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GateKind {
    Mul,
    Add,
    Square,
    Power(u32),
    ExpNegLambda { lambda: f64, order: u32 },
}

/// An arithmetic gate bound to named registers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArithmeticGate {
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub out: String,
}

impl ArithmeticGate {
    pub fn new(kind: GateKind, inputs: &[&str], out: &str) -> Result<Self> {
        let arity = match kind {
            GateKind::Mul | GateKind::Add => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::input(format!("{kind:?} takes {arity} inputs")));
        }
        if inputs.contains(&out) {
            return Err(Error::input("gate output must differ from its inputs"));
        }
        Ok(ArithmeticGate { kind, inputs: inputs.iter().map(|s| s.to_string()).collect(), out: out.into() })
    }

    /// Value added to the output label for the given input labels.
    pub fn value(&self, labels: &[u64], specs: &[FixedPointSpec], out: FixedPointSpec) -> Result<u64> {
        match self.kind {
            GateKind::Mul => mul_raw(labels[0], specs[0], labels[1], specs[1], out),
            GateKind::Add => {
                let a = rescale(labels[0] as u128, specs[0].frac_bits, out.frac_bits);
                let b = rescale(labels[1] as u128, specs[1].frac_bits, out.frac_bits);
                check_fits(a + b, out, "add")
            }
            GateKind::Square => mul_raw(labels[0], specs[0], labels[0], specs[0], out),
            GateKind::Power(k) => pow_raw(labels[0], specs[0], k, out),
            GateKind::ExpNegLambda { lambda, order } => exp_neg_lambda_raw(labels[0], specs[0], lambda, order, out),
        }
    }

    pub fn apply(&self, state: &mut SimState) -> Result<()> {
        self.run(state, false)
    }

    pub fn uncompute(&self, state: &mut SimState) -> Result<()> {
        self.run(state, true)
    }

    fn run(&self, state: &mut SimState, undo: bool) -> Result<()> {
        let ins: Vec<&str> = self.inputs.iter().map(|s| s.as_str()).collect();
        compute_into(state, &[], &ins, &self.out, undo, |_, l, specs, out| self.value(l, specs, out))
    }
}

/// `out ±= f(dense controls, input labels)` on every branch.
pub fn compute_into(
    state: &mut SimState,
    controls: &[&str],
    inputs: &[&str],
    out: &str,
    undo: bool,
    f: impl Fn(&[usize], &[u64], &[FixedPointSpec], FixedPointSpec) -> Result<u64>,
) -> Result<()> {
    let layout = state.layout();
    let slots: Vec<(usize, FixedPointSpec)> = inputs.iter().map(|n| layout.label_slot(n)).collect::<Result<_>>()?;
    let (oslot, ospec) = layout.label_slot(out)?;
    if slots.iter().any(|s| s.0 == oslot) {
        return Err(Error::input("gate output must differ from its inputs"));
    }
    let specs: Vec<FixedPointSpec> = slots.iter().map(|s| s.1).collect();
    let mut buf = Vec::with_capacity(slots.len());
    state.map_labels(controls, |ctrl, labels| {
        buf.clear();
        buf.extend(slots.iter().map(|s| labels[s.0]));
        let v = f(ctrl, &buf, &specs, ospec)?;
        let cur = labels[oslot];
        labels[oslot] = if undo {
            cur.checked_sub(v).ok_or_else(|| Error::contract(format!("uncompute of `{out}` underflows")))?
        } else {
            check_fits(cur as u128 + v as u128, ospec, out)?
        };
        Ok(())
    })
}

/// Writes classical values `values[control]` into `out` (QRAM-style lookup).
pub fn load_table(state: &mut SimState, control: &str, out: &str, values: &[u64], undo: bool) -> Result<()> {
    compute_into(state, &[control], &[], out, undo, |c, _, _, _| {
        values.get(c[0]).copied().ok_or_else(|| Error::input(format!("no table entry for index {}", c[0])))
    })
}

pub fn qma_multiply(state: &mut SimState, a: &str, b: &str, out: &str) -> Result<()> {
    ArithmeticGate::new(GateKind::Mul, &[a, b], out)?.apply(state)
}

/// `b ← a + b` in place.
pub fn qma_add(state: &mut SimState, a: &str, b: &str) -> Result<()> {
    compute_into(state, &[], &[a], b, false, |_, l, s, out| convert_raw(l[0], s[0], out))
}

pub fn exp_neg_lambda_gate(state: &mut SimState, x: &str, out: &str, lambda: f64, order: u32) -> Result<()> {
    ArithmeticGate::new(GateKind::ExpNegLambda { lambda, order }, &[x], out)?.apply(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RotationMode {
    /// `|0⟩ → (v/C)|0⟩ + √(1−(v/C)²)|1⟩`
    Amplitude,
    /// `|0⟩ → √v|0⟩ + √(1−v)|1⟩`
    SqrtAmplitude,
}

/// Real rotation taking `|0⟩` to `c|0⟩ + √(1−c²)|1⟩`.
pub fn rotation(c: f64) -> CMatrix {
    let s = (1.0 - c * c).max(0.0).sqrt();
    CMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)])
}

fn rotation_cosine(v: f64, scale: f64, mode: RotationMode) -> Result<f64> {
    let c = match mode {
        RotationMode::Amplitude => {
            if !(scale > 0.0) {
                return Err(Error::input("rotation scale must be positive"));
            }
            v / scale
        }
        RotationMode::SqrtAmplitude => {
            if v > 1.0 + 1e-12 {
                return Err(Error::Range(format!("sqrt rotation value {v} exceeds 1")));
            }
            v.min(1.0).sqrt()
        }
    };
    if c > 1.0 + 1e-12 {
        return Err(Error::Range(format!("rotation ratio {c} exceeds 1")));
    }
    Ok(c.min(1.0))
}

/// Rotates the one-qubit `ancilla` by the value of arithmetic register `control`.
///
/// The ancilla must be `|0⟩` on entry; `condition` restricts the rotation to
/// basis states where a dense register holds a given value.
pub fn controlled_rotation(
    state: &mut SimState,
    control: &str,
    ancilla: &str,
    scale: f64,
    mode: RotationMode,
    condition: Option<(&str, usize)>,
) -> Result<()> {
    let anc = state.field(ancilla)?;
    if state.layout().get(ancilla)?.qubits != 1 {
        return Err(Error::input("rotation ancilla must be a single qubit"));
    }
    if state.probability(|i, _| anc.get(i) == 1) > 1e-20 {
        return Err(Error::contract(format!("ancilla `{ancilla}` is not |0⟩")));
    }
    rotate(state, control, ancilla, scale, mode, condition, false)
}

/// Inverse of [`controlled_rotation`]; no precondition on the ancilla.
pub fn controlled_rotation_adjoint(
    state: &mut SimState,
    control: &str,
    ancilla: &str,
    scale: f64,
    mode: RotationMode,
    condition: Option<(&str, usize)>,
) -> Result<()> {
    rotate(state, control, ancilla, scale, mode, condition, true)
}

fn rotate(
    state: &mut SimState,
    control: &str,
    ancilla: &str,
    scale: f64,
    mode: RotationMode,
    condition: Option<(&str, usize)>,
    adjoint: bool,
) -> Result<()> {
    let (slot, spec) = state.layout().label_slot(control)?;
    let controls: Vec<&str> = condition.iter().map(|c| c.0).collect();
    let want = condition.map(|c| c.1);
    state.apply_mixed_controlled(&controls, &[ancilla], |ctrl, labels| {
        if want.is_some_and(|w| ctrl[0] != w) {
            return Ok(None);
        }
        let c = rotation_cosine(spec.decode(labels[slot]), scale, mode)?;
        let r = rotation(c);
        Ok(Some(if adjoint { r.adjoint() } else { r }))
    })
}
