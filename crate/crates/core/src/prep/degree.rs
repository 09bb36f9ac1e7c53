//! `|φ⟩` and `ρ₂ = D/Tr(D)`, steps (1)–(11) of the degree construction.

use serde::Serialize;

use super::{amplitude_amplification, spec_for, AmplificationOutcome, AmplificationStats, EstimatorMode, PrepConfig, Purification};
use crate::arith::{
    compute_into, controlled_rotation, exp_neg_lambda_raw, exp_order_for, load_table, rescale,
    shr_round_even, RotationMode,
};
use crate::graph::{KernelParams, VertexSet};
use crate::linalg::{qubits_for, CMatrix, C64, ZERO};
use crate::qsim::{hadamard, prep_unitary, FixedPointSpec, Register, RegisterLayout, SimState};
use crate::{Error, Result};

/// Which weight the degree circuit evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DegreeKernel {
    /// `exp(−λ‖x_i−x_j‖²)` via the exp gate on the estimated distance.
    Gaussian,
    /// The order-`p` Taylor weight, so that `D` is the degree matrix of `W_p`.
    Truncated,
}

/// Writes `‖x_i−x_j‖²` (or its estimate) into `out`, controlled on `i_reg`, `j_reg`.
pub fn distance_estimation(
    state: &mut SimState,
    i_reg: &str,
    j_reg: &str,
    out: &str,
    vs: &VertexSet,
    mode: EstimatorMode,
    undo: bool,
) -> Result<()> {
    let (_, spec) = state.layout().label_slot(out)?;
    let n = vs.n();
    let hi = spec.range() - spec.ulp();
    let table: Vec<u64> = (0..n * n)
        .map(|s| {
            let (i, j) = (s / n, s % n);
            spec.encode(mode.estimate(vs.sq_distance(i, j), 0.0, hi, s as u64))
        })
        .collect::<Result<_>>()?;
    compute_into(state, &[i_reg, j_reg], &[], out, undo, |c, _, _, _| Ok(table[c[0] * n + c[1]]))
}

/// Writes per-index estimates of `⟨φ_i|ψ_i⟩` into `out`, controlled on `i_reg`.
pub fn inner_product_estimation(
    state: &mut SimState,
    i_reg: &str,
    out: &str,
    values: &[f64],
    mode: EstimatorMode,
    undo: bool,
) -> Result<Vec<f64>> {
    let (_, spec) = state.layout().label_slot(out)?;
    let est: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| mode.estimate(v.clamp(0.0, 1.0), 0.0, 1.0, 0x1000 + i as u64))
        .collect();
    let labels = est.iter().map(|v| spec.encode(*v)).collect::<Result<Vec<_>>>()?;
    load_table(state, i_reg, out, &labels, undo)?;
    Ok(labels.iter().map(|l| spec.decode(*l)).collect())
}

/// Fixed-point `exp(−λ(a²+b²))·Σ_k a_k s^k` with `s = (a²+b²−d)/2`.
#[allow(clippy::too_many_arguments)]
pub fn truncated_weight_raw(
    ni: u64,
    nj: u64,
    norm: FixedPointSpec,
    dist: u64,
    dspec: FixedPointSpec,
    kp: &KernelParams,
    exp_order: u32,
    out: FixedPointSpec,
) -> Result<u64> {
    let w = out.frac_bits + 4;
    let sq = |x: u64| rescale(x as u128 * x as u128, 2 * norm.frac_bits, w) as i128;
    let (a2, b2) = (sq(ni), sq(nj));
    let d = rescale(dist as u128, dspec.frac_bits, w) as i128;
    let s = (a2 + b2 - d) / 2;
    let coeff = |a: f64| (a * (w as f64).exp2()).round_ties_even() as i128;
    let mut acc = coeff(kp.coeffs_a[kp.p]);
    for k in (0..kp.p).rev() {
        let prod = acc * s;
        let q = if prod >= 0 {
            shr_round_even(prod as u128, w) as i128
        } else {
            -(shr_round_even((-prod) as u128, w) as i128)
        };
        acc = q + coeff(kp.coeffs_a[k]);
    }
    let sum_spec = FixedPointSpec::new(norm.int_bits * 2 + 1, w);
    let e_spec = FixedPointSpec::new(1, w);
    let e = exp_neg_lambda_raw((a2 + b2) as u64, sum_spec, kp.lambda, exp_order, e_spec)? as i128;
    if acc < 0 {
        return Err(Error::Range("truncated weight is negative; use an even order or the Gaussian kernel".into()));
    }
    let v = shr_round_even((acc * e) as u128, w);
    let raw = rescale(v, w, out.frac_bits);
    if raw > out.max_raw() as u128 {
        return Err(Error::Overflow("truncated weight exceeds its register".into()));
    }
    Ok(raw as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub amplification: AmplificationStats,
    /// Discarding `i = j`.
    pub discard: AmplificationOutcome,
    /// Amplifying the `R_p` ancilla.
    pub degree: AmplificationOutcome,
    /// `⟨φ_i|ψ_i⟩` as written by the estimator.
    pub inner_products: Vec<f64>,
    /// `n(n−1)p₀`.
    pub trace_estimate: f64,
    pub kernel: DegreeKernel,
    /// `2(1 + log n + log(mn))`.
    pub declared_ancillas: usize,
}

/// Builds `|φ⟩ = Σ_i √(d_ii/τ)|i⟩|i⟩` and `ρ₂`.
pub fn build_degree_state(
    vs: &VertexSet,
    kp: &KernelParams,
    kernel: DegreeKernel,
    cfg: &PrepConfig,
) -> Result<(Purification, DegreeReport)> {
    cfg.validate()?;
    vs.require_unpadded_count()?;
    let n = vs.n();
    let iq = qubits_for(n);
    let f = cfg.frac_bits;
    let r2 = vs.max_norm().powi(2);
    let norm_spec = spec_for(vs.max_norm(), f)?;
    let dist_spec = spec_for(4.0 * r2 + 1.0, f)?;
    let w_spec = spec_for(1.0, f)?;
    let exp_order = match kernel {
        DegreeKernel::Gaussian => exp_order_for(kp.lambda * (4.0 * r2 + 1.0), (-(f as f64) - 2.0).exp2()),
        DegreeKernel::Truncated => exp_order_for(kp.lambda * 2.0 * r2, (-(f as f64) - 6.0).exp2()),
    };
    let norms: Vec<u64> = vs.norms().iter().map(|r| norm_spec.encode(*r)).collect::<Result<_>>()?;
    let mode = cfg.estimator;

    let layout = RegisterLayout::new(vec![
        Register::flag("r1", 1),
        Register::index("i", iq),
        Register::index("j", iq),
        Register::flag("r5", 1),
        Register::flag("rp", 1),
        Register::index("r0", iq),
    ])?;
    let mut st = SimState::zero(layout);
    // (1)
    st.apply_unitary(&hadamard(iq), &["i"])?;
    st.apply_unitary(&hadamard(iq), &["j"])?;
    // (2)–(3)
    st.add_register(Register::arithmetic("dist", dist_spec))?;
    st.add_register(Register::arithmetic("w", w_spec))?;
    st.add_register(Register::arithmetic("ni", norm_spec))?;
    st.add_register(Register::arithmetic("nj", norm_spec))?;
    let weight = |st: &mut SimState, undo: bool| -> Result<()> {
        match kernel {
            DegreeKernel::Gaussian => compute_into(st, &[], &["dist"], "w", undo, |_, l, s, out| {
                exp_neg_lambda_raw(l[0], s[0], kp.lambda, exp_order, out)
            }),
            DegreeKernel::Truncated => {
                load_table(st, "i", "ni", &norms, false)?;
                load_table(st, "j", "nj", &norms, false)?;
                compute_into(st, &[], &["ni", "nj", "dist"], "w", undo, |_, l, s, out| {
                    truncated_weight_raw(l[0], l[1], s[0], l[2], s[2], kp, exp_order, out)
                })?;
                load_table(st, "j", "nj", &norms, true)?;
                load_table(st, "i", "ni", &norms, true)
            }
        }
    };
    distance_estimation(&mut st, "i", "j", "dist", vs, mode, false)?;
    weight(&mut st, false)?;
    // (4)
    let (fi, fj) = (st.field("i")?, st.field("j")?);
    let discard = amplitude_amplification(&mut st, |x, _| fi.get(x) != fj.get(x))?;
    // (5)–(6)
    st.apply_unitary(&hadamard(1), &["r1"])?;
    controlled_rotation(&mut st, "w", "r5", 1.0, RotationMode::Amplitude, Some(("r1", 0)))?;
    weight(&mut st, true)?;
    distance_estimation(&mut st, "i", "j", "dist", vs, mode, true)?;
    for r in ["dist", "w", "ni", "nj"] {
        st.remove_register(r)?;
    }
    // (7)
    let sub = sub_states(&st, n, iq)?;
    let truth: Vec<f64> = sub.iter().map(|v| overlap(v, iq)).collect();
    st.add_register(Register::arithmetic("ip", spec_for(1.0, f)?))?;
    let inner_products = inner_product_estimation(&mut st, "i", "ip", &truth, mode, false)?;
    // (8)
    controlled_rotation(&mut st, "ip", "rp", 1.0, RotationMode::SqrtAmplitude, None)?;
    let prep_q = iq + 2;
    let unprep: Vec<CMatrix> = sub
        .iter()
        .map(|v| Ok(prep_unitary(v, prep_q)?.adjoint()))
        .collect::<Result<_>>()?;
    st.apply_controlled(&["i"], &["r1", "j", "r5"], |c| Ok(Some(unprep[c[0]].clone())))?;
    inner_product_estimation(&mut st, "i", "ip", &truth, mode, true)?;
    st.remove_register("ip")?;
    for r in ["r1", "j", "r5"] {
        st.remove_register(r)?;
    }
    // (9)
    let rp = st.field("rp")?;
    let degree = amplitude_amplification(&mut st, |x, _| rp.get(x) == 0)?;
    st.remove_register("rp")?;
    // (10)
    st.apply_controlled(&["i"], &["r0"], |c| {
        let d = 1 << iq;
        Ok(Some(CMatrix::from_fn(d, d, |a, b| if a == b ^ c[0] { C64::new(1.0, 0.0) } else { ZERO })))
    })?;
    // (11)
    let rho = st.partial_trace(&["i"])?;

    let p0 = degree.initial_probability;
    let trace_estimate = (n * (n - 1)) as f64 * p0;
    let r = min_weight(vs, kp, kernel);
    let report = DegreeReport {
        amplification: AmplificationStats {
            initial_amplitude: p0,
            iterations: degree.iterations,
            residual: degree.residual,
            tau: trace_estimate,
            p0,
            r,
            ..Default::default()
        },
        discard,
        degree,
        inner_products,
        trace_estimate,
        kernel,
        declared_ancillas: 2 * (1 + iq + qubits_for(n * vs.m())),
    };
    Ok((Purification { state: st, rho, purifier: vec!["r0".into()], system: vec!["i".into()] }, report))
}

/// `√n`-rescaled sub-vectors over `(r1, j, r5)` for each `i`.
fn sub_states(st: &SimState, n: usize, iq: usize) -> Result<Vec<Vec<C64>>> {
    let (f1, fi, fj, f5) = (st.field("r1")?, st.field("i")?, st.field("j")?, st.field("r5")?);
    let mut sub = vec![vec![ZERO; 1 << (iq + 2)]; n];
    let scale = (n as f64).sqrt();
    for v in st.branches().values() {
        for (x, z) in v.iter().enumerate() {
            if *z != ZERO {
                let local = (f1.get(x) << (iq + 1)) | (fj.get(x) << 1) | f5.get(x);
                sub[fi.get(x)][local] += z * scale;
            }
        }
    }
    Ok(sub)
}

/// `⟨φ|ψ⟩` where the sub-vector is `(|0⟩|φ⟩ + |1⟩|ψ⟩)/√2`.
fn overlap(v: &[C64], iq: usize) -> f64 {
    let half = 1 << (iq + 1);
    let ip: C64 = v[..half].iter().zip(&v[half..]).map(|(a, b)| a.conj() * b).sum();
    2.0 * ip.re
}

/// `r = min_{i≠j} w_ij`.
pub fn min_weight(vs: &VertexSet, kp: &KernelParams, kernel: DegreeKernel) -> f64 {
    let w = match kernel {
        DegreeKernel::Gaussian => crate::graph::build_weight_matrix(vs, kp),
        DegreeKernel::Truncated => crate::graph::build_taylor_weight_matrix(vs, kp).matrix,
    };
    let n = vs.n();
    (0..n)
        .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
        .map(|(i, j)| w[(i, j)])
        .fold(f64::INFINITY, f64::min)
}
