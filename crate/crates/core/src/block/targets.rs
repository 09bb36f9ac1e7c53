//! Encodings of the Laplacian-family targets built from the prepared
//! density operators.

use serde::Serialize;

use super::{
    lcu_combine, make_signed_pair, purified_from_vector, rho3_encoding, sandwich_negative_power, verify_with_slack,
    BlockEncoding, Sandwich, StatePreparationPair, VerificationReport,
};
use crate::graph::{
    build_taylor_weight_matrix, build_weight_matrix, exact_graph, taylor_graph, GraphMatrices, KernelParams,
    VertexSet,
};
use crate::linalg::{operator_norm_distance, to_complex, CMatrix, RMatrix};
use crate::prep::{
    build_degree_state, build_phi_state, build_psi_state, min_weight, AmplificationStats, DegreeKernel, DegreeReport,
    EstimatorMode, ErrorBudget, PrepConfig, PsiReport, Purification,
};
use crate::{Error, Result};

/// A purified-density encoding of a prepared density operator.
#[derive(Debug, Clone)]
pub struct DensitySource {
    pub encoding: BlockEncoding,
    /// Reduced state actually prepared.
    pub rho: CMatrix,
    /// Graph-model density operator it approximates.
    pub ideal: CMatrix,
    /// `‖rho − ideal‖`.
    pub deviation: f64,
}

impl DensitySource {
    fn new(pur: &Purification, ideal: RMatrix, state_bound: f64, label: &str) -> Result<Self> {
        let mut encoding =
            purified_from_vector(&pur.vector()?, pur.purifier_qubits(), pur.system_qubits(), label)?;
        encoding.epsilon = 2.0 * state_bound;
        let ideal = to_complex(&ideal);
        let deviation = operator_norm_distance(&pur.rho.matrix, &ideal)?;
        Ok(DensitySource { encoding, rho: pur.rho.matrix.clone(), ideal, deviation })
    }

    /// Checks the encoding reproduces the prepared state exactly.
    pub fn verify_exact(&self) -> Result<VerificationReport> {
        let mut be = self.encoding.clone();
        be.epsilon = 0.0;
        verify_with_slack(&be, &self.rho, 0.0)
    }

    /// Checks the encoding against the graph-model density operator.
    pub fn verify_ideal(&self) -> Result<VerificationReport> {
        verify_with_slack(&self.encoding, &self.ideal, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingConfig {
    pub prep: PrepConfig,
    pub kernel: DegreeKernel,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig { prep: PrepConfig::default(), kernel: DegreeKernel::Truncated }
    }
}

/// Everything the combinations draw on.
#[derive(Debug, Clone)]
pub struct DensityEncodings {
    pub n: usize,
    pub kp: KernelParams,
    pub kernel: DegreeKernel,
    pub rho0: Option<DensitySource>,
    pub rho1: DensitySource,
    pub rho2: DensitySource,
    pub rho3: BlockEncoding,
    pub psi: PsiReport,
    pub degree: DegreeReport,
    pub budget: ErrorBudget,
    /// Graph model matching the degree kernel.
    pub graph: GraphMatrices,
    /// Truncated weights `W_p` with zero diagonal.
    pub weights_p: RMatrix,
    /// Un-zeroed diagonal of the truncated kernel, `Δ_ii`.
    pub diagonal: Vec<f64>,
    pub unit_norm: bool,
}

/// Rounding allowance of a reduced state prepared with `frac_bits` bits.
pub fn fixed_point_bound(n: usize, frac_bits: u32) -> f64 {
    (n as f64) * (10.0 - frac_bits as f64).exp2()
}

impl DensityEncodings {
    pub fn build(vs: &VertexSet, kp: &KernelParams, cfg: &EncodingConfig) -> Result<Self> {
        let n = vs.n();
        let prep = &cfg.prep;
        let fp = fixed_point_bound(n, prep.frac_bits);
        let taylor = build_taylor_weight_matrix(vs, kp);
        let graph = match cfg.kernel {
            DegreeKernel::Truncated => taylor_graph(vs, kp)?,
            DegreeKernel::Gaussian => exact_graph(vs, kp)?,
        };
        let eps_d = match prep.estimator {
            EstimatorMode::Exact => 0.0,
            EstimatorMode::Noisy { eps, .. } => eps,
        };
        let budget = ErrorBudget::derive(
            n,
            kp.p,
            kp.a_sum,
            vs.max_norm(),
            kp.lambda,
            min_weight(vs, kp, cfg.kernel),
            prep.eps_x,
            eps_d,
        );

        let mut m1 = taylor.matrix.clone();
        for (i, d) in taylor.diagonal.iter().enumerate() {
            m1[(i, i)] = *d;
        }
        let trace_m1: f64 = taylor.diagonal.iter().sum();
        let (psi_pur, psi) = build_psi_state(vs, kp, prep)?;
        let rho1 = DensitySource::new(&psi_pur, &m1 / trace_m1, fp + budget.eps1, "rho1")?;

        let (deg_pur, degree) = build_degree_state(vs, kp, cfg.kernel, prep)?;
        let rho2 = DensitySource::new(&deg_pur, &graph.degree / graph.trace_degree, fp + budget.eps2, "rho2")?;

        let unit_norm = vs.is_unit_norm(1e-10);
        let rho0 = if unit_norm {
            let (phi_pur, _) = build_phi_state(vs, kp, prep)?;
            Some(DensitySource::new(&phi_pur, &m1 / trace_m1, fp + budget.eps0, "rho0")?)
        } else {
            None
        };
        Ok(DensityEncodings {
            n,
            kp: kp.clone(),
            kernel: cfg.kernel,
            rho0,
            rho1,
            rho2,
            rho3: rho3_encoding(n)?,
            psi,
            degree,
            budget,
            graph,
            weights_p: taylor.matrix,
            diagonal: taylor.diagonal,
            unit_norm,
        })
    }

    pub fn upsilon(&self) -> f64 {
        self.psi.amplification.upsilon
    }

    /// Classical `Tr(D)` of the graph model.
    pub fn classical_trace(&self) -> f64 {
        self.graph.trace_degree
    }

    /// `n(n−1)p₀` from the degree pipeline.
    pub fn estimated_trace(&self) -> f64 {
        estimate_trace_d(&self.degree.amplification, self.n)
    }

    /// `max_i |1 − Δ_ii|`.
    pub fn diagonal_gap(&self) -> f64 {
        self.diagonal.iter().map(|d| (1.0 - d).abs()).fold(0.0, f64::max)
    }

    fn rho0(&self) -> Result<&DensitySource> {
        self.rho0.as_ref().ok_or_else(|| Error::input("ρ₀ needs unit-norm vertices"))
    }
}

/// `Tr(D) = n(n−1)p₀`.
pub fn estimate_trace_d(stats: &AmplificationStats, n: usize) -> f64 {
    (n * (n - 1)) as f64 * stats.p0
}

/// Which `Tr(D)` feeds the combination coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceSource {
    Classical,
    Estimated,
}

/// Coefficients and bookkeeping of one linear combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinationSpec {
    /// `Tr(I)/Tr(D)`.
    pub c: f64,
    pub d_coef: f64,
    pub e_coef: f64,
    pub l: usize,
    pub trace_d: f64,
    pub trace_source: TraceSource,
    pub upsilon: f64,
    pub y: Vec<f64>,
    pub beta: f64,
    /// Known structural residual between the combination and its target.
    pub residual_bound: f64,
}

/// An encoded target together with its reference matrix.
#[derive(Debug, Clone)]
pub struct Combination {
    pub encoding: BlockEncoding,
    pub pair: StatePreparationPair,
    pub spec: CombinationSpec,
    /// Graph-model matrix the encoding approximates.
    pub subject: CMatrix,
}

impl Combination {
    pub fn verify(&self) -> Result<VerificationReport> {
        verify_with_slack(&self.encoding, &self.subject, self.spec.residual_bound)
    }
}

fn combine(
    enc: &DensityEncodings,
    y: Vec<f64>,
    beta: f64,
    parts: &[&BlockEncoding],
    label: &str,
) -> Result<(BlockEncoding, StatePreparationPair, usize)> {
    let pair = make_signed_pair(&y, beta)?;
    let owned: Vec<BlockEncoding> = parts.iter().map(|b| (*b).clone()).collect();
    let l = owned.iter().map(|b| b.ancillas).max().unwrap_or(0);
    let be = lcu_combine(&pair, &owned, label)?;
    debug_assert_eq!(be.system, crate::linalg::qubits_for(enc.n));
    Ok((be, pair, l))
}

fn trace_value(enc: &DensityEncodings, source: TraceSource) -> Result<f64> {
    let t = match source {
        TraceSource::Classical => enc.classical_trace(),
        TraceSource::Estimated => enc.estimated_trace(),
    };
    if !(t > 0.0) {
        return Err(Error::Degenerate(format!("Tr(D) estimate {t} is not positive")));
    }
    Ok(t)
}

/// `𝓛 = ρ₂ − (Υ/T)ρ₁ + (n/T)ρ₃`.
pub fn encode_cal_l(enc: &DensityEncodings, source: TraceSource) -> Result<Combination> {
    let t = trace_value(enc, source)?;
    let n = enc.n as f64;
    let upsilon = enc.upsilon();
    let y = vec![-upsilon / t, 1.0, n / t];
    let beta = y.iter().map(|v| v.abs()).sum::<f64>().max(3.0);
    let (encoding, pair, l) =
        combine(enc, y.clone(), beta, &[&enc.rho1.encoding, &enc.rho2.encoding, &enc.rho3], "calL")?;
    let subject = to_complex(&(&enc.graph.laplacian / enc.classical_trace()));
    // diag(I − Δ)/T survives the combination; trace estimation error scales the whole block
    let gap = enc.diagonal_gap() / t;
    let scale = (enc.classical_trace() / t - 1.0).abs() * crate::linalg::spectral_norm(&subject);
    Ok(Combination {
        encoding,
        pair,
        spec: CombinationSpec {
            c: n / t,
            d_coef: 0.0,
            e_coef: 0.0,
            l,
            trace_d: t,
            trace_source: source,
            upsilon,
            y,
            beta,
            residual_bound: gap + scale,
        },
        subject,
    })
}

/// `L̄ = ρ₂ − dρ₀ + eρ₃` on unit-norm vertices, `d = nã/T`, `e = ãn/T`.
pub fn encode_bar_l_unit_norm(enc: &DensityEncodings, source: TraceSource) -> Result<Combination> {
    let rho0 = enc.rho0()?;
    let t = trace_value(enc, source)?;
    let n = enc.n as f64;
    let at = enc.kp.a_tilde_sum;
    let (d, e) = (n * at / t, at * n / t);
    let y = vec![1.0, -d, e];
    let beta = 1.0 + d + e;
    let (encoding, pair, l) =
        combine(enc, y.clone(), beta, &[&enc.rho2.encoding, &rho0.encoding, &enc.rho3], "barL")?;
    let subject = to_complex(&(&enc.graph.laplacian / enc.classical_trace()));
    let scale = (enc.classical_trace() / t - 1.0).abs() * crate::linalg::spectral_norm(&subject);
    Ok(Combination {
        encoding,
        pair,
        spec: CombinationSpec {
            c: n / t,
            d_coef: d,
            e_coef: e,
            l,
            trace_d: t,
            trace_source: source,
            upsilon: enc.upsilon(),
            y,
            beta,
            residual_bound: scale,
        },
        subject,
    })
}

/// Vertex norms of the input, deciding how `W/n` is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormCase {
    Unit,
    General,
}

/// `W/n` as `ã(ρ₀ − ρ₃)` (unit norms) or `(Υ/n)ρ₁ − ρ₃` (general).
///
/// The general form carries `diag(Δ − 1)/n`, which is included in the subject.
pub fn encode_w_over_n(enc: &DensityEncodings, case: NormCase) -> Result<Combination> {
    let n = enc.n as f64;
    let w = &enc.weights_p;
    let (y, parts, subject) = match case {
        NormCase::Unit => {
            let at = enc.kp.a_tilde_sum;
            (vec![at, -at], vec![&enc.rho0()?.encoding, &enc.rho3], w / n)
        }
        NormCase::General => {
            let mut m = w.clone();
            for (i, d) in enc.diagonal.iter().enumerate() {
                m[(i, i)] = d - 1.0;
            }
            (vec![enc.upsilon() / n, -1.0], vec![&enc.rho1.encoding, &enc.rho3], m / n)
        }
    };
    let beta = y.iter().map(|v| v.abs()).sum::<f64>();
    let (encoding, pair, l) = combine(enc, y.clone(), beta, &parts, "W/n")?;
    Ok(Combination {
        encoding,
        pair,
        spec: CombinationSpec {
            c: 0.0,
            d_coef: 0.0,
            e_coef: 0.0,
            l,
            trace_d: enc.classical_trace(),
            trace_source: TraceSource::Classical,
            upsilon: enc.upsilon(),
            y,
            beta,
            residual_bound: 0.0,
        },
        subject: to_complex(&subject),
    })
}

/// `L_s = ρ₂^{−1/2} 𝓛 ρ₂^{−1/2}` with reference `D^{−1/2} L D^{−1/2}`.
pub fn encode_l_s(enc: &DensityEncodings, cal_l: &Combination, varsigma1: f64) -> Result<(Sandwich, CMatrix, f64)> {
    let a_block = enc.rho2.encoding.block();
    let s = sandwich_negative_power(&a_block, enc.rho2.deviation, &cal_l.encoding, 0.5, varsigma1)?;
    let subject = to_complex(&enc.graph.sym_normalized);
    let slack = 4.0 * s.params.kappa * cal_l.spec.residual_bound;
    Ok((s, subject, slack))
}

/// Reference `W` for either kernel, used by the `W` target.
pub fn weight_reference(vs: &VertexSet, kp: &KernelParams, kernel: DegreeKernel) -> RMatrix {
    match kernel {
        DegreeKernel::Truncated => build_taylor_weight_matrix(vs, kp).matrix,
        DegreeKernel::Gaussian => build_weight_matrix(vs, kp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::verify_block_encoding;
    use crate::linalg::{spectral_norm, C64};

    fn build(rows: Vec<Vec<f64>>, lambda: f64, p: usize) -> (VertexSet, KernelParams, DensityEncodings) {
        let vs = VertexSet::new(rows).unwrap();
        let kp = KernelParams::new(lambda, p).unwrap();
        let enc = DensityEncodings::build(&vs, &kp, &EncodingConfig::default()).unwrap();
        (vs, kp, enc)
    }

    fn random4() -> Vec<Vec<f64>> {
        vec![vec![0.31, -0.52], vec![-0.44, 0.18], vec![0.12, 0.63], vec![-0.27, -0.35]]
    }

    fn square() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]]
    }

    #[test]
    fn density_sources_are_exact_and_close() {
        let (_, _, enc) = build(square(), 0.5, 2);
        for src in [&enc.rho1, &enc.rho2, enc.rho0.as_ref().unwrap()] {
            let r = src.verify_exact().unwrap();
            assert!(r.measured_epsilon < 1e-10, "{r:?}");
            assert!(src.deviation < 1e-9, "{} {}", src.encoding.label, src.deviation);
            assert!(src.verify_ideal().unwrap().pass);
        }
        let n = 4.0;
        let v = verify_block_encoding(&enc.rho3, &(CMatrix::identity(4, 4) * C64::new(1.0 / n, 0.0))).unwrap();
        assert!(v.measured_epsilon < 1e-10);
    }

    #[test]
    fn cal_l_two_vertices() {
        let (_, _, enc) = build(vec![vec![0.6, 0.0], vec![0.0, 0.5]], 0.25, 8);
        let comb = encode_cal_l(&enc, TraceSource::Classical).unwrap();
        let want = CMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5].map(|v| C64::new(v, 0.0)));
        assert!((comb.subject.clone() - &want).norm() < 1e-12);
        let r = comb.verify().unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.measured_epsilon < 1e-5);
        assert_eq!(comb.encoding.alpha, comb.spec.beta);
        assert_eq!(comb.encoding.ancillas, comb.spec.l + 2);
    }

    #[test]
    fn cal_l_regular_has_uniform_diagonal() {
        let (_, _, enc) = build(square(), 0.5, 4);
        let comb = encode_cal_l(&enc, TraceSource::Classical).unwrap();
        let b = comb.encoding.scaled_block();
        let tol = comb.spec.residual_bound + 1e-8;
        for i in 0..4 {
            assert!((b[(i, i)].re - 0.25).abs() < tol, "{}", b[(i, i)]);
        }
        assert!(comb.verify().unwrap().pass);
    }

    #[test]
    fn cal_l_random_meets_tolerance() {
        let (_, _, enc) = build(random4(), 0.25, 8);
        assert!(enc.diagonal_gap() / enc.classical_trace() < 1e-7);
        let comb = encode_cal_l(&enc, TraceSource::Classical).unwrap();
        let r = comb.verify().unwrap();
        assert!(r.measured_epsilon <= 1e-5, "{r:?}");
        assert!(r.pass);
        // the all-ones vector stays in the kernel
        let ones = CMatrix::from_element(4, 1, C64::new(0.5, 0.0));
        let k = comb.encoding.scaled_block() * ones;
        assert!(k.norm() <= comb.spec.residual_bound + 1e-8);
        let est = encode_cal_l(&enc, TraceSource::Estimated).unwrap();
        assert!(est.verify().unwrap().pass);
    }

    #[test]
    fn trace_estimate_matches_classical() {
        let (_, _, enc) = build(random4(), 0.5, 4);
        assert!((enc.estimated_trace() - enc.classical_trace()).abs() < 1e-6);
        let (_, _, enc2) = build(vec![vec![0.6, 0.0], vec![0.0, 0.5]], 0.5, 4);
        let w12 = enc2.weights_p[(0, 1)];
        assert!((enc2.estimated_trace() - 2.0 * w12).abs() < 1e-9);
        assert!((enc2.degree.amplification.p0 - w12).abs() < 1e-9);
    }

    #[test]
    fn bar_l_matches_cal_l_on_unit_norms() {
        let (_, _, enc) = build(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], 0.5, 4);
        let bar = encode_bar_l_unit_norm(&enc, TraceSource::Classical).unwrap();
        let cal = encode_cal_l(&enc, TraceSource::Classical).unwrap();
        let rb = bar.verify().unwrap();
        assert!(rb.pass, "{rb:?}");
        let diff = spectral_norm(&(bar.encoding.scaled_block() - cal.encoding.scaled_block()));
        assert!(diff <= rb.claimed_epsilon + cal.spec.residual_bound + 1e-8, "{diff}");
        assert!((bar.encoding.scaled_block().trace().re - 1.0).abs() < 1e-8);
        // d·ρ₀ − e·ρ₃ carries W_p/Tr(D)
        let rho0 = enc.rho0.as_ref().unwrap();
        let part = &rho0.rho * C64::new(bar.spec.d_coef, 0.0)
            - CMatrix::identity(2, 2) * C64::new(bar.spec.e_coef / 2.0, 0.0);
        let want = to_complex(&(&enc.weights_p / enc.classical_trace()));
        assert!(spectral_norm(&(part - want)) < 1e-9);
    }

    #[test]
    fn w_over_n_cases() {
        let (_, _, enc) = build(vec![vec![0.6, 0.0], vec![0.0, 0.5]], 0.5, 4);
        let comb = encode_w_over_n(&enc, NormCase::General).unwrap();
        let b = comb.encoding.scaled_block();
        let r = comb.verify().unwrap();
        assert!(r.pass && r.measured_epsilon < 1e-8, "{r:?}");
        assert!(b[(0, 1)].re > 0.0);
        assert!((b[(0, 1)] - b[(1, 0)]).norm() < 1e-10);
        let w12 = enc.weights_p[(0, 1)];
        assert!((b[(0, 1)].re - w12 / 2.0).abs() < 1e-8);
        assert!((b[(0, 0)].re - (enc.diagonal[0] - 1.0) / 2.0).abs() < 1e-8);

        let (_, _, unit) = build(square(), 0.5, 4);
        let comb = encode_w_over_n(&unit, NormCase::Unit).unwrap();
        let r = comb.verify().unwrap();
        assert!(r.pass && r.measured_epsilon < 1e-8, "{r:?}");
        assert!(encode_w_over_n(&enc, NormCase::Unit).is_err());
    }

    #[test]
    fn l_s_cases() {
        let (_, _, enc) = build(vec![vec![0.6, 0.0], vec![0.0, 0.5]], 0.25, 8);
        let cal = encode_cal_l(&enc, TraceSource::Classical).unwrap();
        let (s, subject, slack) = encode_l_s(&enc, &cal, 0.25).unwrap();
        let want = CMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0].map(|v| C64::new(v, 0.0)));
        assert!((subject - &want).norm() < 1e-12);
        let r = verify_with_slack(&s.encoding, &want, slack).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(s.encoding.alpha, 4.0 * s.params.kappa * cal.encoding.alpha);

        let (_, _, enc) = build(random4(), 0.25, 8);
        let cal = encode_cal_l(&enc, TraceSource::Classical).unwrap();
        let (s, subject, slack) = encode_l_s(&enc, &cal, 0.1).unwrap();
        let r = verify_with_slack(&s.encoding, &subject, slack).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(s.a_error <= s.params.zeta1);

        // D ∝ I: L_s = n·𝓛
        let (_, _, reg) = build(square(), 0.5, 4);
        let cal = encode_cal_l(&reg, TraceSource::Classical).unwrap();
        let (s, _, slack) = encode_l_s(&reg, &cal, 0.1).unwrap();
        let want = cal.subject.clone() * C64::new(4.0, 0.0);
        assert!(verify_with_slack(&s.encoding, &want, slack).unwrap().pass);
    }
}
