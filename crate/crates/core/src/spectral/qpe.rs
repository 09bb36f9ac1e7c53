//! Phase estimation on the maximally mixed input and eigenpair extraction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::linalg::{hermitian_eigen, is_unitary, CMatrix, C64, ZERO};
use crate::qsim::sample_index;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpeConfig {
    pub bits: usize,
    pub shots: usize,
    pub seed: u64,
}

impl Default for QpeConfig {
    fn default() -> Self {
        QpeConfig { bits: 10, shots: 8192, seed: 0 }
    }
}

impl QpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.bits) {
            return Err(Error::input(format!("phase bits must lie in 1..=16, got {}", self.bits)));
        }
        if self.shots == 0 {
            return Err(Error::input("shots must be ≥ 1"));
        }
        Ok(())
    }
}

/// Phase register statistics and the post-measurement states behind them.
#[derive(Debug, Clone)]
pub struct QpeOutcome {
    pub bits: usize,
    pub n: usize,
    /// Born probability of each phase bin.
    pub probabilities: Vec<f64>,
    /// Sampled counts per bin.
    pub histogram: Vec<u64>,
    /// Bin of every shot, in shot order.
    pub samples: Vec<usize>,
    /// System ⊗ reference amplitudes for each bin (row = system index).
    amplitudes: Vec<CMatrix>,
}

impl QpeOutcome {
    /// Reduced system state after observing `bin`, or `None` for an
    /// impossible outcome.
    pub fn conditional_state(&self, bin: usize) -> Option<CMatrix> {
        let p = self.probabilities[bin];
        (p > 1e-300).then(|| &self.amplitudes[bin] * self.amplitudes[bin].adjoint() / C64::new(p, 0.0))
    }

    pub fn resolution(&self) -> f64 {
        (-(self.bits as f64)).exp2()
    }
}

/// Per-shot seed derived from the master seed.
pub fn shot_seed(master: u64, shot: usize) -> u64 {
    let mut z = master ^ (shot as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Textbook phase estimation of `u` on the first half of
/// `|ω⟩ = n^{−1/2} Σ_j |j⟩|j⟩`; an eigenphase `e^{2πiφ}` peaks at bin `2^b·φ`.
pub fn run_qpe(u: &CMatrix, cfg: &QpeConfig) -> Result<QpeOutcome> {
    cfg.validate()?;
    if !is_unitary(u, 1e-8) {
        return Err(Error::contract("phase estimation needs a unitary"));
    }
    let n = u.nrows();
    let big_n = 1usize << cfg.bits;
    // register x holds (E^x ⊗ I)|ω⟩ after the controlled powers
    let omega = CMatrix::identity(n, n) * C64::new(1.0 / (n as f64).sqrt() / (big_n as f64).sqrt(), 0.0);
    let mut regs: Vec<CMatrix> = vec![omega; big_n];
    let mut power = u.clone();
    for q in 0..cfg.bits {
        let bit = 1usize << q;
        for (x, m) in regs.iter_mut().enumerate() {
            if x & bit != 0 {
                *m = &power * &*m;
            }
        }
        power = &power * &power;
    }
    // inverse QFT on the phase register, one column per (system, reference) index
    let fft = FftPlanner::new().plan_fft_forward(big_n);
    let scale = C64::new(1.0 / (big_n as f64).sqrt(), 0.0);
    let mut buf = vec![ZERO; big_n];
    for r in 0..n {
        for c in 0..n {
            for (x, m) in regs.iter().enumerate() {
                buf[x] = m[(r, c)];
            }
            fft.process(&mut buf);
            for (x, m) in regs.iter_mut().enumerate() {
                m[(r, c)] = buf[x] * scale;
            }
        }
    }
    let probabilities: Vec<f64> = regs.iter().map(|m| m.norm_squared()).collect();
    let total: f64 = probabilities.iter().sum();
    let samples: Vec<usize> = (0..cfg.shots)
        .map(|s| sample_index(&probabilities, total, &mut ChaCha8Rng::seed_from_u64(shot_seed(cfg.seed, s))))
        .collect();
    let mut histogram = vec![0u64; big_n];
    for &s in &samples {
        histogram[s] += 1;
    }
    Ok(QpeOutcome { bits: cfg.bits, n, probabilities, histogram, samples, amplitudes: regs })
}

/// How phases map back to eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// Phases in `[0, 1)`; the cluster at zero is the trivial kernel and dropped.
    Laplacian,
    /// Phases in `[−1/2, 1/2)`; nothing is dropped.
    Signed,
}

/// A run of occupied phase bins.
#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub bins: Vec<usize>,
    pub count: u64,
    pub phase: f64,
    pub eigenvalue: f64,
    /// Dimension of the recovered eigenspace.
    pub multiplicity: usize,
    #[serde(skip)]
    pub vectors: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Empirical frequency of the dropped zero-phase cluster.
    pub zero_weight: f64,
    pub d: usize,
}

impl SpectralResult {
    /// One unit vector per returned cluster (the leading one of a subspace).
    pub fn eigenvectors(&self) -> Vec<Vec<C64>> {
        self.clusters.iter().map(|c| c.vectors[0].clone()).collect()
    }
}

/// Minimum count for a bin to belong to a cluster.
pub fn occupancy_threshold(shots: usize) -> u64 {
    ((0.002 * shots as f64).ceil() as u64).max(3)
}

fn circular_runs(occupied: &[bool]) -> Vec<Vec<usize>> {
    let n = occupied.len();
    if occupied.iter().all(|o| *o) {
        return vec![(0..n).collect()];
    }
    // start scanning just after an empty bin so no run is split by the wrap
    let start = occupied.iter().position(|o| !o).expect("some bin is empty");
    let mut runs = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    for k in 1..=n {
        let b = (start + k) % n;
        if occupied[b] {
            cur.push(b);
        } else if !cur.is_empty() {
            runs.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        runs.push(cur);
    }
    runs
}

/// Joins runs separated by at most `gap` empty bins.
fn merge_close_runs(runs: Vec<Vec<usize>>, big_n: usize, gap: usize) -> Vec<Vec<usize>> {
    let mut merged: Vec<Vec<usize>> = Vec::new();
    for run in runs {
        if let Some(last) = merged.last_mut() {
            let end = *last.last().expect("runs are non-empty");
            if (run[0] + big_n - end) % big_n <= gap + 1 {
                last.extend(run);
                continue;
            }
        }
        merged.push(run);
    }
    // the scan is circular: the last run may touch the first
    if merged.len() > 1 {
        let end = *merged.last().and_then(|r| r.last()).expect("non-empty");
        let start = merged[0][0];
        if (start + big_n - end) % big_n <= gap + 1 {
            let last = merged.pop().expect("non-empty");
            let first = std::mem::take(&mut merged[0]);
            merged[0] = last.into_iter().chain(first).collect();
        }
    }
    merged
}

/// Phase from the most populated bin and its larger neighbour, which
/// bracket the true phase.
fn peak_phase(hist: &[u64], bins: &[usize]) -> f64 {
    let big_n = hist.len();
    let peak = *bins.iter().max_by_key(|b| (hist[**b], std::cmp::Reverse(**b))).expect("non-empty");
    let (lo, hi) = ((peak + big_n - 1) % big_n, (peak + 1) % big_n);
    let (nb, off) = if hist[hi] >= hist[lo] { (hi, 1.0) } else { (lo, -1.0) };
    let (cp, cn) = (hist[peak] as f64, hist[nb] as f64);
    (peak as f64 + off * cn / (cp + cn)) / big_n as f64
}

/// Groups sampled phases into clusters, drops the zero cluster in
/// Laplacian mode and returns the `d` smallest eigenvalues with the
/// eigenvectors carried by the post-measurement states. `d = 0` keeps every
/// resolved cluster.
pub fn extract_d_smallest(out: &QpeOutcome, t: f64, d: usize, mode: PhaseMode) -> Result<SpectralResult> {
    let shots = out.samples.len();
    if !(t > 0.0) {
        return Err(Error::input("evolution time must be positive"));
    }
    let big_n = out.histogram.len();
    let thr = occupancy_threshold(shots);
    let occupied: Vec<bool> = out.histogram.iter().map(|c| *c >= thr).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut clusters = Vec::new();
    let mut zero_weight = 0.0;
    let min_count = (0.3 * shots as f64 / out.n as f64).max(1.0) as u64;
    for bins in merge_close_runs(circular_runs(&occupied), big_n, 2) {
        let count: u64 = bins.iter().map(|b| out.histogram[*b]).sum();
        if count < min_count && !bins.contains(&0) {
            continue;
        }
        let mean = peak_phase(&out.histogram, &bins);
        let mut phase = mean.rem_euclid(1.0);
        if mode == PhaseMode::Signed && phase >= 0.5 {
            phase -= 1.0;
        }
        let is_zero = mode == PhaseMode::Laplacian && bins.contains(&0);
        if is_zero {
            zero_weight = count as f64 / shots as f64;
            continue;
        }
        let mut rho = CMatrix::zeros(out.n, out.n);
        for b in &bins {
            if let Some(state) = out.conditional_state(*b) {
                rho += state * C64::new(out.histogram[*b] as f64, 0.0);
            }
        }
        rho /= C64::new(count as f64, 0.0);
        let (vals, vecs) = hermitian_eigen(&rho);
        let top = *vals.last().unwrap_or(&0.0);
        let mut vectors = Vec::new();
        for (i, v) in vals.iter().enumerate().rev() {
            if *v >= 0.25 * top && *v > 1e-12 {
                vectors.push(aligned(vecs.column(i).iter().cloned().collect()));
            }
        }
        clusters.push(Cluster {
            bins,
            count,
            phase,
            eigenvalue: two_pi * phase / t,
            multiplicity: vectors.len(),
            vectors,
        });
    }
    clusters.sort_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue));
    if clusters.len() < d {
        return Err(Error::Resolution(format!(
            "{} eigenphase clusters resolved at {} bits, {d} requested",
            clusters.len(),
            out.bits
        )));
    }
    if d > 0 {
        clusters.truncate(d);
    }
    Ok(SpectralResult { eigenvalues: clusters.iter().map(|c| c.eigenvalue).collect(), clusters, zero_weight, d })
}

/// Removes the global phase: the largest component becomes real positive.
pub fn aligned(mut v: Vec<C64>) -> Vec<C64> {
    if let Some(big) = v.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let ph = big.conj() / big.norm();
            v.iter_mut().for_each(|z| *z *= ph);
        }
    }
    v
}

/// `ρ₂^{−1/2}|v⟩/‖ρ₂^{−1/2}|v⟩‖` for each vector.
pub fn recover_lr_eigenvectors(vectors: &[Vec<C64>], rho2: &CMatrix) -> Result<Vec<Vec<C64>>> {
    let (vals, _) = hermitian_eigen(rho2);
    if vals.first().is_none_or(|v| *v <= 1e-14) {
        return Err(Error::Degenerate("ρ₂ is singular".into()));
    }
    let inv_sqrt = crate::linalg::hermitian_function(rho2, |x| 1.0 / x.sqrt());
    vectors
        .iter()
        .map(|v| {
            if v.len() != rho2.nrows() {
                return Err(Error::dimension("vector and ρ₂ sizes differ"));
            }
            let w = &inv_sqrt * nalgebra::DVector::from_column_slice(v);
            let norm = w.norm();
            Ok(aligned(w.iter().map(|z| z / norm).collect()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitary_evolution;

    fn diag_unitary(phases: &[f64]) -> CMatrix {
        let d = nalgebra::DVector::from_iterator(
            phases.len(),
            phases.iter().map(|p| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * p)),
        );
        CMatrix::from_diagonal(&d)
    }

    #[test]
    fn exact_phases_are_certain() {
        let u = diag_unitary(&[0.0, 0.25, 0.5, 0.75]);
        let out = run_qpe(&u, &QpeConfig { bits: 2, shots: 400, seed: 3 }).unwrap();
        for (k, p) in out.probabilities.iter().enumerate() {
            assert!((p - 0.25).abs() < 1e-12, "bin {k}: {p}");
        }
        assert_eq!(out.histogram.iter().sum::<u64>(), 400);
        // each bin's post-measurement state is the matching eigenvector
        for k in 0..4 {
            let rho = out.conditional_state(k).unwrap();
            assert!((rho[(k, k)].re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extraction_drops_zero_and_sorts() {
        let u = diag_unitary(&[0.0, 0.5, 0.25, 0.75]);
        let t = 1.0;
        let out = run_qpe(&u, &QpeConfig { bits: 4, shots: 2000, seed: 1 }).unwrap();
        let res = extract_d_smallest(&out, t, 3, PhaseMode::Laplacian).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert_eq!(res.eigenvalues, vec![0.25 * two_pi, 0.5 * two_pi, 0.75 * two_pi]);
        assert!((res.zero_weight - 0.25).abs() < 5.0 * (0.25f64 * 0.75 / 2000.0).sqrt());
        assert!((res.clusters[0].vectors[0][2].norm() - 1.0).abs() < 1e-12);
        let signed = extract_d_smallest(&out, t, 4, PhaseMode::Signed).unwrap();
        assert!((signed.eigenvalues[0] + 0.5 * two_pi).abs() < 1e-12);
    }

    #[test]
    fn close_pair_is_a_resolution_error() {
        let u = diag_unitary(&[0.0, 0.25, 0.25 + 1e-4, 0.5]);
        let out = run_qpe(&u, &QpeConfig { bits: 4, shots: 4000, seed: 2 }).unwrap();
        let err = extract_d_smallest(&out, 1.0, 3, PhaseMode::Laplacian).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
        let ok = extract_d_smallest(&out, 1.0, 2, PhaseMode::Laplacian).unwrap();
        assert_eq!(ok.clusters[0].multiplicity, 2);
    }

    #[test]
    fn two_vertex_laplacian_phase() {
        let l = CMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5].map(|v| C64::new(v, 0.0)));
        let t = 0.9 * 2.0 * std::f64::consts::PI;
        let u = unitary_evolution(&l, t).adjoint();
        let out = run_qpe(&u, &QpeConfig { bits: 8, shots: 2000, seed: 5 }).unwrap();
        let res = extract_d_smallest(&out, t, 1, PhaseMode::Laplacian).unwrap();
        assert!((res.eigenvalues[0] - 1.0).abs() * t / (2.0 * std::f64::consts::PI) <= out.resolution());
        let v = &res.clusters[0].vectors[0];
        let f = (v[0] - v[1]).norm_sqr() / 2.0;
        assert!(f > 0.99, "{f}");
    }

    #[test]
    fn lr_recovery_closed_form() {
        let rho2 = CMatrix::from_row_slice(2, 2, &[0.8, 0.0, 0.0, 0.2].map(|v| C64::new(v, 0.0)));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![C64::new(s, 0.0), C64::new(-s, 0.0)];
        let w = recover_lr_eigenvectors(&[v], &rho2).unwrap();
        // D^{-1/2}(1,−1) ∝ (1/√0.8, −1/√0.2) = (1, −2)/norm
        let norm = 5f64.sqrt();
        assert!((w[0][0].norm() - 1.0 / norm).abs() < 1e-12);
        assert!((w[0][1].norm() - 2.0 / norm).abs() < 1e-12);
        let singular = CMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0].map(|v| C64::new(v, 0.0)));
        assert!(recover_lr_eigenvectors(&[vec![C64::new(1.0, 0.0); 2]], &singular).is_err());
    }
}
