//! Direct statevector builders with injected component errors, used to check
//! the state-preparation error bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{coefficient_amplitudes, perturb_unit};
use crate::graph::{KernelParams, VertexSet};
use crate::linalg::{qubits_for, vec_distance, vec_norm, C64, ZERO};
use crate::Result;

/// Measured error next to the bound it must respect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub measured: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.measured <= self.bound
    }
}

pub fn kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn tensor_power(x: &[C64], k: usize) -> Vec<C64> {
    (0..k).fold(vec![C64::new(1.0, 0.0)], |acc, _| kron(&acc, x))
}

/// `Σ_k c_k |k⟩|0⟩^{⊗(p−k)}|x⟩^{⊗k}`.
pub fn feature_branch(x: &[C64], coeffs: &[C64], p: usize) -> Vec<C64> {
    let bd = x.len();
    let block = bd.pow(p as u32);
    let mut zero = vec![ZERO; bd];
    zero[0] = C64::new(1.0, 0.0);
    let mut out = vec![ZERO; coeffs.len() * block];
    for (k, c) in coeffs.iter().enumerate().take(p + 1) {
        let v = kron(&tensor_power(&zero, p - k), &tensor_power(x, k));
        for (o, z) in out[k * block..(k + 1) * block].iter_mut().zip(v) {
            *o = c * z;
        }
    }
    out
}

fn directions(vs: &VertexSet) -> Result<Vec<Vec<C64>>> {
    let bq = qubits_for(vs.m()).max(1);
    (0..vs.n())
        .map(|i| {
            let mut v: Vec<C64> = vs.direction(i)?.into_iter().map(|x| C64::new(x, 0.0)).collect();
            v.resize(1 << bq, ZERO);
            Ok(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiErrorSample {
    /// Per vertex: measured `‖Φ̂(x_i)−Φ(x_i)‖` against `ε_ã + (1+…+p)ε_x`.
    pub branches: Vec<BoundCheck>,
    /// `‖Φ̂−Φ‖` against `√n·p²·ε_x`.
    pub global: BoundCheck,
}

/// `|Φ⟩` with `ε_ã = ε_x` injected into the coefficient state and every `|x_i⟩`.
pub fn phi_error_trial(vs: &VertexSet, kp: &KernelParams, eps_x: f64, seed: u64) -> Result<PhiErrorSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = kp.p;
    let ideal_c = coefficient_amplitudes(&kp.coeffs_a_tilde, 0.0, 0)?;
    let noisy_c = perturb_unit(&ideal_c, eps_x, &mut rng)?;
    let n = vs.n();
    let per_bound = eps_x + (p * (p + 1) / 2) as f64 * eps_x;
    let mut branches = Vec::with_capacity(n);
    let mut total = 0.0;
    for x in directions(vs)? {
        let xh = perturb_unit(&x, eps_x, &mut rng)?;
        let d = vec_distance(&feature_branch(&xh, &noisy_c, p), &feature_branch(&x, &ideal_c, p));
        total += d * d / n as f64;
        branches.push(BoundCheck { measured: d, bound: per_bound });
    }
    let global = BoundCheck { measured: total.sqrt(), bound: (n as f64).sqrt() * (p * p) as f64 * eps_x };
    Ok(PhiErrorSample { branches, global })
}

/// The `(max‖x_i‖)^p` factor, present only when some norm exceeds one.
pub fn norm_factor(vs: &VertexSet, p: usize) -> f64 {
    let r = vs.max_norm();
    if r > 1.0 {
        r.powi(p as i32)
    } else {
        1.0
    }
}

/// `|Ψ⟩` with `ε_a = ε_x` injected; bound `√(an)·p²·(max‖x_i‖)^p·ε_x`.
pub fn psi_error_trial(vs: &VertexSet, kp: &KernelParams, eps_x: f64, seed: u64) -> Result<BoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = kp.p;
    let a = kp.a_sum;
    let ideal_c = coefficient_amplitudes(&kp.coeffs_a, 0.0, 0)?;
    let noisy_c = perturb_unit(&ideal_c, eps_x, &mut rng)?;
    let dirs = directions(vs)?;
    let mut upsilon = 0.0;
    let mut diff = 0.0;
    for (i, x) in dirs.iter().enumerate() {
        let r = vs.norms()[i];
        let e = (-kp.lambda * r * r).exp();
        let scale = |c: &[C64]| -> Vec<C64> {
            c.iter().enumerate().map(|(k, z)| z * (a.sqrt() * e * r.powi(k as i32))).collect()
        };
        let xh = perturb_unit(x, eps_x, &mut rng)?;
        let ideal = feature_branch(x, &scale(&ideal_c), p);
        let noisy = feature_branch(&xh, &scale(&noisy_c), p);
        upsilon += vec_norm(&ideal).powi(2);
        diff += vec_distance(&noisy, &ideal).powi(2);
    }
    let n = vs.n() as f64;
    Ok(BoundCheck {
        measured: (diff / upsilon).sqrt(),
        bound: (a * n).sqrt() * (p * p) as f64 * norm_factor(vs, p) * eps_x,
    })
}

/// `|φ⟩` from distance estimates carrying uniform noise of width `ε_d`;
/// bound `‖φ̂−φ‖² ≤ λ²ε_d²/(4r)`.
pub fn degree_error_trial(vs: &VertexSet, kp: &KernelParams, eps_d: f64, seed: u64) -> Result<BoundCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = vs.n();
    let mut d = vec![0.0; n];
    let mut dh = vec![0.0; n];
    let mut r = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = vs.sq_distance(i, j);
            let wh = (w + eps_d * (2.0 * rng.random::<f64>() - 1.0)).max(0.0);
            d[i] += (-kp.lambda * w).exp();
            dh[i] += (-kp.lambda * wh).exp();
            r = r.min((-kp.lambda * w).exp());
        }
    }
    let tau: f64 = d.iter().sum();
    let sq: f64 = d.iter().zip(&dh).map(|(a, b)| (b.sqrt() - a.sqrt()).powi(2)).sum::<f64>() / tau;
    Ok(BoundCheck { measured: sq, bound: kp.lambda.powi(2) * eps_d * eps_d / (4.0 * r) })
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
        let nv = vec_norm(&v);
        if nv > 1e-3 {
            return v.into_iter().map(|z| z / nv).collect();
        }
    }
}

/// `‖a·x − b·y‖ ≤ (a−b) + b·ε` for unit `x`, `y` with `‖x−y‖ ≤ ε` and `a ≥ b > 0`.
pub fn scaled_state_trial(rng: &mut impl Rng, dim: usize) -> Result<BoundCheck> {
    let x = random_unit(dim, rng);
    let eps = 0.5 * rng.random::<f64>();
    let y = perturb_unit(&x, eps, rng)?;
    let b = 0.1 + rng.random::<f64>();
    let a = b + rng.random::<f64>();
    let diff: Vec<C64> = x.iter().zip(&y).map(|(u, v)| u * a - v * b).collect();
    Ok(BoundCheck { measured: vec_norm(&diff), bound: (a - b) + b * eps })
}

/// `‖x^{⊗p} − y^{⊗p}‖ ≤ p‖x−y‖` for unit `x`, `y`.
pub fn tensor_power_trial(rng: &mut impl Rng, dim: usize, p: usize, eps: f64) -> Result<BoundCheck> {
    let x = random_unit(dim, rng);
    let y = perturb_unit(&x, eps, rng)?;
    let m = vec_distance(&tensor_power(&x, p), &tensor_power(&y, p));
    Ok(BoundCheck { measured: m, bound: p as f64 * vec_distance(&x, &y) })
}
