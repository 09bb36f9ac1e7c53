//! Purification states for the block-encodings: `|Φ⟩`, `|Ψ⟩` and `|φ⟩`.

mod budget;
mod degree;
mod phi;
mod psi;

pub use budget::*;
pub use degree::*;
pub use phi::*;
pub use psi::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::graph::VertexSet;
use crate::linalg::{qubits_for, C64, ZERO};
use crate::qsim::{FixedPointSpec, Register, RegisterLayout, SimState};
use crate::{Error, Result};

/// Behaviour of the distance and inner-product estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EstimatorMode {
    /// Writes the true value.
    Exact,
    /// True value plus uniform noise in `[−eps, eps]`, replaced by an
    /// arbitrary value with probability `2·delta`.
    Noisy { eps: f64, delta: f64, seed: u64 },
}

impl EstimatorMode {
    /// One estimate per call; deterministic in the seed and `stream`.
    pub fn estimate(&self, truth: f64, lo: f64, hi: f64, stream: u64) -> f64 {
        match *self {
            EstimatorMode::Exact => truth,
            EstimatorMode::Noisy { eps, delta, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
                if rng.random::<f64>() < 2.0 * delta {
                    lo + (hi - lo) * rng.random::<f64>()
                } else {
                    (truth + eps * (2.0 * rng.random::<f64>() - 1.0)).clamp(lo, hi)
                }
            }
        }
    }
}

/// Shared knobs for the state-preparation pipelines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrepConfig {
    /// Fractional bits of every arithmetic register.
    pub frac_bits: u32,
    /// ℓ₂ error injected into each amplitude-encoded vertex.
    pub eps_x: f64,
    /// ℓ₂ error injected into the coefficient state.
    pub eps_a: f64,
    pub estimator: EstimatorMode,
    pub seed: u64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig { frac_bits: 40, eps_x: 0.0, eps_a: 0.0, estimator: EstimatorMode::Exact, seed: 0 }
    }
}

impl PrepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(8..=50).contains(&self.frac_bits) {
            return Err(Error::input(format!("frac_bits must lie in 8..=50, got {}", self.frac_bits)));
        }
        for (name, v) in [("eps_x", self.eps_x), ("eps_a", self.eps_a)] {
            if !(0.0..2.0).contains(&v) {
                return Err(Error::input(format!("{name} must lie in [0, 2), got {v}")));
            }
        }
        if let EstimatorMode::Noisy { eps, delta, .. } = self.estimator {
            if !(eps > 0.0) || !(0.0..0.5).contains(&delta) {
                return Err(Error::input("noisy estimator needs eps > 0 and delta in [0, 0.5)"));
            }
        }
        Ok(())
    }
}

/// Returns a unit vector at ℓ₂ distance exactly `eps` from the unit vector `x`.
pub fn perturb_unit(x: &[C64], eps: f64, rng: &mut impl Rng) -> Result<Vec<C64>> {
    if eps == 0.0 {
        return Ok(x.to_vec());
    }
    if x.len() < 2 {
        return Err(Error::input("cannot perturb a one-dimensional state"));
    }
    // random direction orthogonal to x
    let mut u: Vec<C64> = loop {
        let mut u: Vec<C64> = (0..x.len()).map(|_| C64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
        let ov = crate::linalg::inner(x, &u);
        for (a, b) in u.iter_mut().zip(x) {
            *a -= ov * b;
        }
        let nu = crate::linalg::vec_norm(&u);
        if nu > 1e-6 {
            u.iter_mut().for_each(|z| *z /= nu);
            break u;
        }
    };
    let theta = 2.0 * (eps / 2.0).asin();
    let (s, c) = theta.sin_cos();
    for (a, b) in u.iter_mut().zip(x) {
        *a = b * c + *a * s;
    }
    Ok(u)
}

/// Amplitude-encoding (`U`) and norm (`O`) oracles over a vertex set.
#[derive(Debug, Clone)]
pub struct QramOracle {
    /// `|x_i⟩` per vertex, possibly perturbed, on `block_qubits` qubits.
    states: Vec<Vec<C64>>,
    /// Fixed-point `‖x_i‖` labels.
    norm_labels: Vec<u64>,
    pub norm_spec: FixedPointSpec,
    pub block_qubits: usize,
    pub eps_x: f64,
}

impl QramOracle {
    pub fn new(vs: &VertexSet, norm_spec: FixedPointSpec, eps_x: f64, seed: u64) -> Result<Self> {
        let block_qubits = qubits_for(vs.m()).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::with_capacity(vs.n());
        for i in 0..vs.n() {
            let dir = vs.direction(i)?;
            let mut v: Vec<C64> = dir.iter().map(|x| C64::new(*x, 0.0)).collect();
            v.resize(1 << block_qubits, ZERO);
            states.push(perturb_unit(&v, eps_x, &mut rng)?);
        }
        let norm_labels = vs.norms().iter().map(|r| norm_spec.encode(*r)).collect::<Result<_>>()?;
        Ok(QramOracle { states, norm_labels, norm_spec, block_qubits, eps_x })
    }

    /// `U|i⟩|0⟩ = |i⟩|x_i⟩`.
    pub fn state(&self, i: usize) -> &[C64] {
        &self.states[i]
    }

    /// `O|i⟩|0⟩ = |i⟩|‖x_i‖⟩`.
    pub fn norm_labels(&self) -> &[u64] {
        &self.norm_labels
    }
}

/// `Σ_k √(c_k/Σc)|k⟩` on `ceil(log₂ len)` qubits, at ℓ₂ distance `eps` from ideal.
pub fn coefficient_amplitudes(coeffs: &[f64], eps: f64, seed: u64) -> Result<Vec<C64>> {
    if coeffs.is_empty() || coeffs.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
        return Err(Error::input("coefficients must be finite and nonnegative"));
    }
    let total: f64 = coeffs.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("coefficients are all zero"));
    }
    let q = qubits_for(coeffs.len()).max(1);
    let mut v: Vec<C64> = coeffs.iter().map(|c| C64::new((c / total).sqrt(), 0.0)).collect();
    v.resize(1 << q, ZERO);
    perturb_unit(&v, eps, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Coefficient state in a one-register [`SimState`] named `k`.
pub fn prepare_coefficient_state(coeffs: &[f64], eps: f64, seed: u64) -> Result<SimState> {
    let amps = coefficient_amplitudes(coeffs, eps, seed)?;
    let q = qubits_for(amps.len());
    let mut st = SimState::zero(RegisterLayout::new(vec![Register::coefficient("k", q)])?);
    st.apply_unitary(&crate::qsim::prep_unitary(&amps, q)?, &["k"])?;
    Ok(st)
}

/// Result of one amplitude-amplification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplificationOutcome {
    /// Good-subspace probability before amplification.
    pub initial_probability: f64,
    pub iterations: usize,
    /// Bad-subspace probability discarded by the final post-selection.
    pub residual: f64,
}

/// `floor(π/(4θ))` with `θ = asin(√a)`.
pub fn grover_iterations(probability: f64) -> usize {
    let theta = probability.clamp(0.0, 1.0).sqrt().asin();
    (std::f64::consts::PI / (4.0 * theta)).floor() as usize
}

/// Amplifies the subspace selected by `good` using the exactly known amplitude,
/// then post-selects onto it.
pub fn amplitude_amplification(
    state: &mut SimState,
    good: impl Fn(usize, &[u64]) -> bool,
) -> Result<AmplificationOutcome> {
    let a = state.probability(&good);
    if a <= 1e-14 {
        return Err(Error::Amplification(format!("good-subspace probability {a:e} is too small")));
    }
    let start = state.clone();
    // Q = −S_s S_χ
    let grover = |s: &mut SimState| {
        let mut good_part = s.clone();
        good_part.project(&good);
        good_part.scale(C64::new(-1.0, 0.0));
        let mut out = s.clone();
        out.project(|i, l| !good(i, l));
        add_into(&mut out, &good_part);
        out.reflect_about(&start);
        out.scale(C64::new(-1.0, 0.0));
        *s = out;
    };
    let mut iterations = grover_iterations(a);
    for _ in 0..iterations {
        grover(state);
    }
    let mut residual = 1.0 - state.probability(&good);
    if residual >= 1e-6 {
        let mut extra = state.clone();
        grover(&mut extra);
        let r2 = 1.0 - extra.probability(&good);
        if r2 < residual {
            *state = extra;
            residual = r2;
            iterations += 1;
        }
    }
    state.project(&good);
    state.normalize()?;
    Ok(AmplificationOutcome { initial_probability: a, iterations, residual: residual.max(0.0) })
}

fn add_into(acc: &mut SimState, other: &SimState) {
    let mut merged = acc.branches().clone();
    for (l, w) in other.branches() {
        let v = merged.entry(l.clone()).or_insert_with(|| vec![ZERO; w.len()]);
        for (x, y) in v.iter_mut().zip(w) {
            *x += y;
        }
    }
    *acc = SimState::from_branches(acc.layout().clone(), merged).expect("same layout");
}

/// Normalisers and success amplitudes measured along the pipelines.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AmplificationStats {
    pub initial_amplitude: f64,
    pub iterations: usize,
    pub residual: f64,
    #[serde(rename = "Upsilon")]
    pub upsilon: f64,
    pub tau: f64,
    pub p0: f64,
    pub r: f64,
}

/// Precision budget and the state errors it implies.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub eps_x: f64,
    pub eps_a: f64,
    pub eps_a_tilde: f64,
    pub eps_d: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub eps_y: f64,
    pub eps_l: f64,
    pub eps: f64,
}

impl ErrorBudget {
    /// Fills the state errors from the component precisions.
    ///
    /// `a` is `Σa_k`, `r` the smallest off-diagonal Gaussian weight.
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        n: usize,
        p: usize,
        a: f64,
        max_norm: f64,
        lambda: f64,
        r: f64,
        eps_x: f64,
        eps_d: f64,
    ) -> Self {
        let p2 = (p * p) as f64;
        let eps0 = (n as f64).sqrt() * p2 * eps_x;
        let eps1 = (a * n as f64).sqrt() * p2 * max_norm.max(1.0).powi(p as i32) * eps_x;
        let eps2 = if r > 0.0 { lambda * eps_d / (2.0 * r.sqrt()) } else { f64::INFINITY };
        ErrorBudget {
            eps_x,
            eps_a: eps_x,
            eps_a_tilde: eps_x,
            eps_d,
            eps0,
            eps1,
            eps2,
            eps_l: eps1.min(eps2),
            ..Default::default()
        }
    }
}

/// Fixed-point format holding values below `bound` with `frac_bits` fractional bits.
pub fn spec_for(bound: f64, frac_bits: u32) -> Result<FixedPointSpec> {
    // headroom for rounded products landing just above `bound`
    let bound = bound * (1.0 + 1e-6) + 1e-9;
    let mut int_bits = 1;
    while (int_bits as f64).exp2() <= bound {
        int_bits += 1;
    }
    if int_bits + frac_bits > 62 {
        return Err(Error::Range(format!("values up to {bound} need more than 62 label bits")));
    }
    Ok(FixedPointSpec::new(int_bits, frac_bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::hadamard;

    #[test]
    fn coefficient_state_cases() {
        let one = coefficient_amplitudes(&[1.0], 0.0, 0).unwrap();
        assert_eq!(one.len(), 2);
        assert!((one[0].re - 1.0).abs() < 1e-15);
        let u = coefficient_amplitudes(&[1.0; 4], 0.0, 0).unwrap();
        assert!(u.iter().all(|z| (z.re - 0.5).abs() < 1e-15));
        assert!(coefficient_amplitudes(&[0.0, 0.0], 0.0, 0).is_err());

        let kp = crate::graph::KernelParams::new(0.5, 3).unwrap();
        let st = prepare_coefficient_state(&kp.coeffs_a_tilde, 0.0, 0).unwrap();
        let v = &st.branches()[&vec![]];
        for (k, a) in kp.coeffs_a_tilde.iter().enumerate() {
            assert!((v[k].re - (a / kp.a_tilde_sum).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_has_exact_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0), ZERO, ZERO];
        for eps in [1e-6, 1e-3, 0.1] {
            let y = perturb_unit(&x, eps, &mut rng).unwrap();
            assert!((crate::linalg::vec_norm(&y) - 1.0).abs() < 1e-12);
            assert!((crate::linalg::vec_distance(&x, &y) - eps).abs() < 1e-12);
        }
    }

    fn uniform(qubits: usize) -> SimState {
        let mut s = SimState::zero(RegisterLayout::new(vec![Register::index("r", qubits)]).unwrap());
        s.apply_unitary(&hadamard(qubits), &["r"]).unwrap();
        s
    }

    #[test]
    fn amplification_cases() {
        let mut s = uniform(2);
        let out = amplitude_amplification(&mut s, |_, _| true).unwrap();
        assert_eq!(out.iterations, 0);

        // one marked item out of four: sin²θ = 1/4
        let mut s = uniform(2);
        let out = amplitude_amplification(&mut s, |i, _| i == 3).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.residual < 1e-12);
        assert!((s.branches()[&vec![]][3].norm() - 1.0).abs() < 1e-12);

        // discard split for n = 4: drop i = j
        let mut s = uniform(4);
        let out = amplitude_amplification(&mut s, |x, _| x >> 2 != x & 3).unwrap();
        assert!((out.initial_probability - 0.75).abs() < 1e-12);
        assert_eq!(out.iterations, grover_iterations(0.75));
        assert!(s.probability(|x, _| x >> 2 == x & 3) < 1e-24);
        s.check_normalized().unwrap();

        let mut s = uniform(1);
        assert!(amplitude_amplification(&mut s, |_, _| false).is_err());
    }

    #[test]
    fn noisy_estimator_is_seeded() {
        let m = EstimatorMode::Noisy { eps: 0.01, delta: 0.0, seed: 3 };
        let a = m.estimate(0.5, 0.0, 1.0, 7);
        assert_eq!(a, m.estimate(0.5, 0.0, 1.0, 7));
        assert!((a - 0.5).abs() <= 0.01);
        assert_eq!(EstimatorMode::Exact.estimate(0.3, 0.0, 1.0, 0), 0.3);
    }
}
