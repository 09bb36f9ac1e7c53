//! `|Φ⟩` for unit-norm vertices.

use serde::Serialize;

use super::{coefficient_amplitudes, PrepConfig, QramOracle};
use crate::graph::{KernelParams, VertexSet};
use crate::linalg::qubits_for;
use crate::qsim::{hadamard, prep_unitary, DensityOperator, FixedPointSpec, Register, RegisterLayout, SimState};
use crate::{Error, Result};

/// A prepared purification together with its reduced state.
#[derive(Debug, Clone)]
pub struct Purification {
    pub state: SimState,
    pub rho: DensityOperator,
    /// Registers traced out to obtain `rho`.
    pub purifier: Vec<String>,
    /// Registers `rho` lives on.
    pub system: Vec<String>,
}

impl Purification {
    /// Amplitudes ordered `[purifier, system]`.
    pub fn vector(&self) -> Result<Vec<crate::linalg::C64>> {
        let order: Vec<&str> = self.purifier.iter().chain(&self.system).map(|s| s.as_str()).collect();
        self.state.to_dense_ordered(&order)
    }

    pub fn purifier_qubits(&self) -> usize {
        self.purifier.iter().map(|r| self.state.layout().get(r).map_or(0, |x| x.qubits)).sum()
    }

    pub fn system_qubits(&self) -> usize {
        self.system.iter().map(|r| self.state.layout().get(r).map_or(0, |x| x.qubits)).sum()
    }
}

/// Register names of the `p` data blocks.
pub fn data_registers(prefix: &str, p: usize) -> Vec<String> {
    (0..p).map(|b| format!("{prefix}{b}")).collect()
}

/// `R_U = Σ_k |k⟩⟨k| ⊗ I^{p−k} U^k`: the last `k` data blocks receive `|x_i⟩`.
pub fn apply_r_u(
    state: &mut SimState,
    index_reg: &str,
    coeff_reg: &str,
    data_regs: &[String],
    oracle: &QramOracle,
) -> Result<()> {
    let p = data_regs.len();
    for r in data_regs {
        let f = state.field(r)?;
        if state.probability(|i, _| f.get(i) != 0) > 1e-20 {
            return Err(Error::contract(format!("data register `{r}` is not zeroed")));
        }
    }
    let q = oracle.block_qubits;
    for (b, r) in data_regs.iter().enumerate() {
        state.apply_controlled(&[index_reg, coeff_reg], &[r.as_str()], |c| {
            if c[1] + b >= p {
                Ok(Some(prep_unitary(oracle.state(c[0]), q)?))
            } else {
                Ok(None)
            }
        })?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiStats {
    /// Registers of the purification, as declared by the layout.
    pub live_qubits: usize,
    /// `p·log m + log(p+1)`.
    pub declared_ancillas: usize,
}

/// `|Φ⟩` and `ρ₀ = (W_p + ãI)/(nã)`.
pub fn build_phi_state(vs: &VertexSet, kp: &KernelParams, cfg: &PrepConfig) -> Result<(Purification, PhiStats)> {
    cfg.validate()?;
    vs.require_unpadded_count()?;
    if !vs.is_unit_norm(1e-10) {
        return Err(Error::input("build_phi_state needs unit-norm vertices; use build_psi_state"));
    }
    let p = kp.p;
    let iq = qubits_for(vs.n());
    let coeff = coefficient_amplitudes(&kp.coeffs_a_tilde, cfg.eps_a, cfg.seed ^ 0xA5)?;
    let kq = qubits_for(coeff.len());
    let oracle = QramOracle::new(vs, FixedPointSpec::new(2, cfg.frac_bits), cfg.eps_x, cfg.seed)?;
    let data = data_registers("x", p);
    let mut regs = vec![Register::index("i", iq), Register::coefficient("k", kq)];
    regs.extend(data.iter().map(|d| Register::index(d, oracle.block_qubits)));
    let mut state = SimState::zero(RegisterLayout::new(regs)?);
    state.apply_unitary(&hadamard(iq), &["i"])?;
    state.apply_unitary(&prep_unitary(&coeff, kq)?, &["k"])?;
    apply_r_u(&mut state, "i", "k", &data, &oracle)?;
    let rho = state.partial_trace(&["i"])?;
    let mut purifier = vec!["k".to_string()];
    purifier.extend(data);
    let stats = PhiStats {
        live_qubits: state.layout().total_qubits(),
        declared_ancillas: p * qubits_for(vs.m()) + qubits_for(p + 1),
    };
    Ok((Purification { state, rho, purifier, system: vec!["i".into()] }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_taylor_weight_matrix;
    use crate::linalg::to_complex;
    use nalgebra::DMatrix;

    fn circle(n: usize, offset: f64) -> VertexSet {
        let rows = (0..n)
            .map(|i| {
                let t = offset + 2.0 * std::f64::consts::PI * i as f64 / n as f64 + 0.3 * (i * i) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        VertexSet::new(rows).unwrap()
    }

    #[test]
    fn rho0_matches_graph_model() {
        let vs = circle(4, 0.2);
        for p in [2, 3] {
            let kp = KernelParams::new(0.5, p).unwrap();
            let (pur, _) = build_phi_state(&vs, &kp, &PrepConfig::default()).unwrap();
            pur.rho.validate().unwrap();
            let w = to_complex(&build_taylor_weight_matrix(&vs, &kp).matrix);
            let n = 4.0;
            let lhs = pur.rho.matrix.clone() * crate::linalg::C64::new(n * kp.a_tilde_sum, 0.0)
                - DMatrix::identity(4, 4) * crate::linalg::C64::new(kp.a_tilde_sum, 0.0);
            assert!((lhs - w).norm() < 1e-9);
            for i in 0..4 {
                assert!((pur.rho.matrix[(i, i)].re - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn antipodal_pair() {
        let vs = VertexSet::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let kp = KernelParams::new(0.5, 4).unwrap();
        let (pur, _) = build_phi_state(&vs, &kp, &PrepConfig::default()).unwrap();
        let w12 = (-1.0f64).exp() * kp.series(-1.0);
        assert!((pur.rho.matrix[(0, 1)].re - w12 / (2.0 * kp.a_tilde_sum)).abs() < 1e-12);
    }

    #[test]
    fn non_unit_rejected() {
        let vs = VertexSet::new(vec![vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let kp = KernelParams::new(0.5, 2).unwrap();
        assert!(matches!(build_phi_state(&vs, &kp, &PrepConfig::default()), Err(Error::Input(_))));
    }

    #[test]
    fn r_u_rejects_dirty_data() {
        let vs = circle(2, 0.0);
        let oracle = QramOracle::new(&vs, FixedPointSpec::unit(8), 0.0, 0).unwrap();
        let layout = RegisterLayout::new(vec![
            Register::index("i", 1),
            Register::coefficient("k", 1),
            Register::index("x0", 1),
        ])
        .unwrap();
        let mut st = SimState::zero(layout);
        st.apply_unitary(&hadamard(1), &["x0"]).unwrap();
        assert!(apply_r_u(&mut st, "i", "k", &["x0".into()], &oracle).is_err());
    }
}
