//! `|Ψ⟩` for vertices of arbitrary nonzero norm.

use serde::Serialize;

use super::{amplitude_amplification, apply_r_u, coefficient_amplitudes, data_registers, spec_for};
use super::{AmplificationStats, PrepConfig, Purification, QramOracle};
use crate::arith::{
    compute_into, controlled_rotation, exp_neg_lambda_raw, exp_order_for, load_table, mul_raw, RotationMode,
};
use crate::graph::{KernelParams, VertexSet};
use crate::linalg::qubits_for;
use crate::qsim::{hadamard, prep_unitary, FixedPointSpec, Register, RegisterLayout, SimState};
use crate::{Error, Result};

/// Label formats used by the arithmetic stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiSpecs {
    pub norm: FixedPointSpec,
    pub square: FixedPointSpec,
    pub power: FixedPointSpec,
    pub exp: FixedPointSpec,
    pub exp_order: u32,
}

impl PsiSpecs {
    pub fn new(vs: &VertexSet, kp: &KernelParams, frac_bits: u32) -> Result<Self> {
        let r = vs.max_norm();
        let exp_order = exp_order_for(kp.lambda * r * r, (-(frac_bits as f64) - 2.0).exp2());
        Ok(PsiSpecs {
            norm: spec_for(r, frac_bits)?,
            square: spec_for(r * r, frac_bits)?,
            power: spec_for(r.max(1.0).powi(kp.p as i32), frac_bits)?,
            exp: spec_for(1.0, frac_bits)?,
            exp_order,
        })
    }

    /// `‖x‖^k` as the power gate computes it.
    pub fn power_raw(&self, norm: u64, k: usize) -> Result<u64> {
        let x = crate::arith::convert_raw(norm, self.norm, self.power)?;
        let mut acc = self.power.encode(1.0)?;
        for _ in 0..k {
            acc = mul_raw(acc, self.power, x, self.power, self.power)?;
        }
        Ok(acc)
    }

    pub fn exp_raw(&self, norm: u64, lambda: f64) -> Result<u64> {
        let sq = mul_raw(norm, self.norm, norm, self.norm, self.square)?;
        exp_neg_lambda_raw(sq, self.square, lambda, self.exp_order, self.exp)
    }

    /// `exp(−λ‖x‖²)‖x‖^k` label, in the power format.
    pub fn g_raw(&self, norm: u64, k: usize, lambda: f64) -> Result<u64> {
        mul_raw(self.exp_raw(norm, lambda)?, self.exp, self.power_raw(norm, k)?, self.power, self.power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiReport {
    pub amplification: AmplificationStats,
    /// Rotation scale `C`, the largest `exp(−λ‖x_i‖²)‖x_i‖^k` over `i` and `k`.
    pub c_scale: f64,
    /// `Σ_i Σ_k a_k g_ik²` from the classical label values.
    pub upsilon_expected: f64,
    pub specs: PsiSpecs,
    /// `log(p+1) + (p+2)log(mn) + p log m + 1`.
    pub declared_ancillas: usize,
}

struct Ctx<'a> {
    n_regs: Vec<String>,
    kp: &'a KernelParams,
    specs: PsiSpecs,
    norms: Vec<u64>,
}

impl Ctx<'_> {
    /// Register 3 stage: `O^k` copies, their product, then the copies removed.
    fn power(&self, st: &mut SimState, undo: bool) -> Result<()> {
        let p = self.kp.p;
        for (b, r) in self.n_regs.iter().enumerate() {
            compute_into(st, &["i", "k"], &[], r, false, |c, _, _, _| {
                Ok(if c[1] + b >= p { self.norms[c[0]] } else { 0 })
            })?;
        }
        let ins: Vec<&str> = self.n_regs.iter().map(|s| s.as_str()).collect();
        compute_into(st, &["k"], &ins, "pow", undo, |c, l, s, out| {
            let mut acc = out.encode(1.0)?;
            for (b, x) in l.iter().enumerate() {
                if c[0] + b >= p {
                    let xo = crate::arith::convert_raw(*x, s[b], out)?;
                    acc = mul_raw(acc, out, xo, out, out)?;
                }
            }
            Ok(acc)
        })?;
        for (b, r) in self.n_regs.iter().enumerate() {
            compute_into(st, &["i", "k"], &[], r, true, |c, _, _, _| {
                Ok(if c[1] + b >= p { self.norms[c[0]] } else { 0 })
            })?;
        }
        Ok(())
    }

    /// Register 4 stage: two `O` copies multiplied into `‖x‖²`.
    fn square(&self, st: &mut SimState, undo: bool) -> Result<()> {
        load_table(st, "i", "oa", &self.norms, false)?;
        load_table(st, "i", "ob", &self.norms, false)?;
        compute_into(st, &[], &["oa", "ob"], "sq", undo, |_, l, s, out| mul_raw(l[0], s[0], l[1], s[1], out))?;
        load_table(st, "i", "ob", &self.norms, true)?;
        load_table(st, "i", "oa", &self.norms, true)
    }

    /// `exp(−λ‖x‖²)` with the square computed and removed around it.
    fn exp(&self, st: &mut SimState, undo: bool) -> Result<()> {
        let (lambda, order) = (self.kp.lambda, self.specs.exp_order);
        self.square(st, false)?;
        compute_into(st, &[], &["sq"], "ex", undo, |_, l, s, out| {
            exp_neg_lambda_raw(l[0], s[0], lambda, order, out)
        })?;
        self.square(st, true)
    }

    /// Register 3 final value `exp(−λ‖x‖²)‖x‖^k`, intermediates removed.
    fn g(&self, st: &mut SimState, undo: bool) -> Result<()> {
        self.power(st, false)?;
        self.exp(st, false)?;
        compute_into(st, &[], &["ex", "pow"], "g", undo, |_, l, s, out| mul_raw(l[0], s[0], l[1], s[1], out))?;
        self.exp(st, true)?;
        self.power(st, true)
    }
}

/// Builds `|Ψ⟩` and `ρ₁ = Tr_{2,5}|Ψ⟩⟨Ψ|`.
pub fn build_psi_state(vs: &VertexSet, kp: &KernelParams, cfg: &PrepConfig) -> Result<(Purification, PsiReport)> {
    cfg.validate()?;
    vs.require_unpadded_count()?;
    if vs.norms().iter().any(|r| *r <= 0.0) {
        return Err(Error::input("every vertex needs a nonzero norm"));
    }
    let n = vs.n();
    let p = kp.p;
    let specs = PsiSpecs::new(vs, kp, cfg.frac_bits)?;
    let oracle = QramOracle::new(vs, specs.norm, cfg.eps_x, cfg.seed)?;
    let norms = oracle.norm_labels().to_vec();

    // classical scale C from the same label arithmetic the circuit performs
    let mut c_raw = 0u64;
    let mut upsilon_expected = 0.0;
    for &r in &norms {
        for k in 0..=p {
            let g = specs.g_raw(r, k, kp.lambda)?;
            c_raw = c_raw.max(g);
            upsilon_expected += kp.coeffs_a[k] * specs.power.decode(g).powi(2);
        }
    }
    let c_scale = specs.power.decode(c_raw);
    if c_scale <= 0.0 {
        return Err(Error::Amplification("rotation scale C is zero".into()));
    }

    let iq = qubits_for(n);
    let coeff = coefficient_amplitudes(&kp.coeffs_a, cfg.eps_a, cfg.seed ^ 0xA5)?;
    let kq = qubits_for(coeff.len());
    let data = data_registers("y", p);
    let n_regs = data_registers("o", p);
    let mut regs = vec![Register::index("i", iq), Register::coefficient("k", kq), Register::flag("anc", 1)];
    regs.extend(data.iter().map(|d| Register::index(d, oracle.block_qubits)));
    regs.extend(n_regs.iter().map(|r| Register::arithmetic(r, specs.norm)));
    regs.push(Register::arithmetic("oa", specs.norm));
    regs.push(Register::arithmetic("ob", specs.norm));
    regs.push(Register::arithmetic("sq", specs.square));
    regs.push(Register::arithmetic("ex", specs.exp));
    regs.push(Register::arithmetic("pow", specs.power));
    regs.push(Register::arithmetic("g", specs.power));
    let mut st = SimState::zero(RegisterLayout::new(regs)?);

    // index and coefficient superpositions
    st.apply_unitary(&hadamard(iq), &["i"])?;
    st.apply_unitary(&prep_unitary(&coeff, kq)?, &["k"])?;
    let ctx = Ctx { n_regs: n_regs.clone(), kp, specs, norms };
    // norms, powers and the Gaussian factor into `g`
    ctx.g(&mut st, false)?;
    // rotate by g, then uncompute
    controlled_rotation(&mut st, "g", "anc", c_scale, RotationMode::Amplitude, None)?;
    ctx.g(&mut st, true)?;
    for r in n_regs.iter().map(|s| s.as_str()).chain(["oa", "ob", "sq", "ex", "pow", "g"]) {
        st.remove_register(r)?;
    }
    let anc = st.field("anc")?;
    let aa = amplitude_amplification(&mut st, |i, _| anc.get(i) == 0)?;
    let a_sum = kp.a_sum;
    let upsilon = aa.initial_probability * n as f64 * a_sum * c_scale * c_scale;
    st.remove_register("anc")?;
    // load the tensor-power data
    apply_r_u(&mut st, "i", "k", &data, &oracle)?;
    let rho = st.partial_trace(&["i"])?;
    let mut purifier = vec!["k".to_string()];
    purifier.extend(data);
    let mq = qubits_for(vs.m());
    let nmq = qubits_for(vs.m() * n);
    let report = PsiReport {
        amplification: AmplificationStats {
            initial_amplitude: aa.initial_probability,
            iterations: aa.iterations,
            residual: aa.residual,
            upsilon,
            ..Default::default()
        },
        c_scale,
        upsilon_expected,
        specs,
        declared_ancillas: qubits_for(p + 1) + (p + 2) * nmq + p * mq + 1,
    };
    Ok((Purification { state: st, rho, purifier, system: vec!["i".into()] }, report))
}
