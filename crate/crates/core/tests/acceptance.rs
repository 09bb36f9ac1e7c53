//! Acceptance criteria, one line per criterion.

use std::time::Instant;

use qlap_core::arith::exp_gate_sweep;
use qlap_core::block::{
    encode_bar_l_unit_norm, encode_cal_l, DensityEncodings, EncodingConfig, NormCase, TraceSource,
};
use qlap_core::graph::{build_taylor_weight_matrix, taylor_graph, KernelParams, VertexSet};
use qlap_core::linalg::{spectral_norm, to_complex, CMatrix, C64};
use qlap_core::prep::{
    build_degree_state, build_phi_state, degree_error_trial, scaled_state_trial, tensor_power_trial, phi_error_trial,
    psi_error_trial, DegreeKernel, PrepConfig,
};
use qlap_core::spectral::{full_pipeline, simulate_hamiltonian, PipelineConfig, QpeConfig, SimulationConfig, SimulationPath, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn unit_instance(seed: u64, n: usize) -> VertexSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            vec![a.cos(), a.sin()]
        })
        .collect();
    VertexSet::new(rows).unwrap()
}

/// Vertices with norms in `[0.2, 1]`.
fn ball_instance(seed: u64, n: usize) -> VertexSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let a = rng.random::<f64>() * std::f64::consts::TAU;
            let r = 0.2 + 0.8 * rng.random::<f64>();
            vec![r * a.cos(), r * a.sin()]
        })
        .collect();
    VertexSet::new(rows).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_rho0_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let vs = unit_instance(100 + seed, 4);
        let p = 2 + (seed % 2) as usize;
        let kp = KernelParams::new(0.5, p).unwrap();
        let (pur, _) = build_phi_state(&vs, &kp, &PrepConfig::default()).map_err(|e| e.to_string())?;
        let be = qlap_core::block::purified_from_vector(
            &pur.vector().unwrap(),
            pur.purifier_qubits(),
            pur.system_qubits(),
            "rho0",
        )
        .unwrap();
        let at = kp.a_tilde_sum;
        let lhs = be.block() * C64::new(4.0 * at, 0.0) - CMatrix::identity(4, 4) * C64::new(at, 0.0);
        let w = to_complex(&build_taylor_weight_matrix(&vs, &kp).matrix);
        worst = worst.max(spectral_norm(&(lhs - w)));
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-9 && secs < 10.0, format!("max ‖nãρ₀ − ãI − W_p‖ = {worst:.2e}, {secs:.2} s"))
}

fn c2_degree_identity() -> Outcome {
    let mut worst_diag: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for (k, n) in [2usize, 4, 8].into_iter().enumerate() {
        let vs = ball_instance(200 + k as u64, n);
        let kp = KernelParams::new(0.5, 4).unwrap();
        let g = taylor_graph(&vs, &kp).unwrap();
        let (pur, rep) =
            build_degree_state(&vs, &kp, DegreeKernel::Truncated, &PrepConfig::default()).map_err(|e| e.to_string())?;
        for i in 0..n {
            worst_diag = worst_diag.max((pur.rho.matrix[(i, i)].re - g.degree[(i, i)] / g.trace_degree).abs());
        }
        worst_trace = worst_trace.max((rep.trace_estimate - g.trace_degree).abs() / g.trace_degree);
    }
    check(
        worst_diag <= 1e-8 && worst_trace <= 1e-6,
        format!("max |ρ₂ᵢᵢ − dᵢᵢ/Tr D| = {worst_diag:.2e}, Tr D relative error = {worst_trace:.2e}"),
    )
}

fn c3_cal_l() -> Outcome {
    let vs = ball_instance(300, 4);
    let kp = KernelParams::new(0.25, 8).unwrap();
    let enc = DensityEncodings::build(&vs, &kp, &EncodingConfig::default()).map_err(|e| e.to_string())?;
    let comb = encode_cal_l(&enc, TraceSource::Estimated).map_err(|e| e.to_string())?;
    let block = comb.encoding.scaled_block();
    let err = spectral_norm(&(block.clone() - &comb.subject));
    let ones = CMatrix::from_element(4, 1, C64::new(0.5, 0.0));
    let kernel = (block * ones).norm();
    check(err <= 1e-5 && kernel <= 1e-5, format!("‖block − L_p/Tr L_p‖ = {err:.2e}, ‖block·𝟙‖ = {kernel:.2e}"))
}

fn pipeline(target: Target, vs: &VertexSet, kp: &KernelParams, seed: u64) -> Result<qlap_core::spectral::PipelineOutput, String> {
    let cfg = PipelineConfig {
        target,
        qpe: QpeConfig { bits: 10, shots: 8192, seed },
        norm_case: if vs.is_unit_norm(1e-8) { NormCase::Unit } else { NormCase::General },
        ..Default::default()
    };
    full_pipeline(vs, kp, &cfg).map_err(|e| e.to_string())
}

fn failed_checks(report: &qlap_core::spectral::PipelineReport) -> Vec<String> {
    let mut bad: Vec<String> = report.checks.iter().filter(|c| !c.pass).map(|c| format!("{}={:.3e}", c.name, c.value)).collect();
    bad.extend(report.encoding_verifications.iter().filter(|v| !v.pass).map(|v| format!("{} encoding", v.label)));
    bad
}

fn c4_end_to_end() -> Outcome {
    let start = Instant::now();
    let vs = ball_instance(400, 4);
    let kp = KernelParams::new(0.25, 8).unwrap();
    let out = pipeline(Target::L, &vs, &kp, 4)?;
    let secs = start.elapsed().as_secs_f64();
    let r = &out.report;
    let bad = failed_checks(r);
    let fid = r.fidelities.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        bad.is_empty() && r.eigenvalues.len() == 3 && secs < 60.0,
        format!("{} eigenvalues, min fidelity {fid:.4}, {secs:.1} s, failing: {bad:?}", r.eigenvalues.len()),
    )
}

fn c5_error_budgets() -> Outcome {
    let mut violations = 0usize;
    let mut trials = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for _ in 0..1000 {
        trials += 2;
        violations += usize::from(!scaled_state_trial(&mut rng, 3).unwrap().holds());
        let p = 2 + rng.random_range(0..4usize);
        let eps = 0.3 * rng.random::<f64>();
        violations += usize::from(!tensor_power_trial(&mut rng, 3, p, eps).unwrap().holds());
    }
    let unit = unit_instance(501, 4);
    let inside = ball_instance(502, 4);
    let outside = VertexSet::new(vec![vec![1.4, 0.2], vec![-0.3, 0.9], vec![0.5, -1.2], vec![0.1, 0.4]]).unwrap();
    for seed in 0..1000u64 {
        let kp = KernelParams::new(0.5, 2 + (seed % 3) as usize).unwrap();
        let eps = 1e-4 * (1 + seed % 50) as f64;
        let phi = phi_error_trial(&unit, &kp, eps, seed).unwrap();
        violations += phi.branches.iter().filter(|b| !b.holds()).count() + usize::from(!phi.global.holds());
        trials += phi.branches.len() + 1;
        for vs in [&inside, &outside] {
            trials += 1;
            violations += usize::from(!psi_error_trial(vs, &kp, eps, seed).unwrap().holds());
        }
        trials += 1;
        violations += usize::from(!degree_error_trial(&inside, &kp, eps, seed).unwrap().holds());
    }
    check(violations == 0, format!("{violations} violations in {trials} bound checks"))
}

fn c6_simulation_contract() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut monotone = true;
    let mut sublinear = true;
    let mut rows = Vec::new();
    for n in [2usize, 4] {
        let vs = ball_instance(600 + n as u64, n);
        let kp = KernelParams::new(0.5, 2).unwrap();
        let enc = DensityEncodings::build(&vs, &kp, &EncodingConfig::default()).map_err(|e| e.to_string())?;
        let cal = encode_cal_l(&enc, TraceSource::Classical).map_err(|e| e.to_string())?;
        let mut counts = std::collections::BTreeMap::new();
        for eps in [1e-2, 1e-4] {
            let mut last = 0;
            for t in [1.0, 2.0, 4.0] {
                let sim = simulate_hamiltonian(&cal.encoding, &SimulationConfig::new(t, eps, SimulationPath::LcuTaylor))
                    .map_err(|e| e.to_string())?;
                worst_ratio = worst_ratio.max(sim.measured_error / eps);
                monotone &= sim.query_count >= last;
                last = sim.query_count;
                counts.insert((t as u32, (eps * 1e4) as u32), sim.query_count);
                rows.push(format!("n={n} ε={eps:.0e} t={t} K={}", sim.query_count));
            }
        }
        for t in [1u32, 2, 4] {
            let (coarse, fine) = (counts[&(t, 100)], counts[&(t, 1)]);
            // a hundredfold tighter ε may at most double the query count
            sublinear &= fine <= 2 * coarse;
        }
    }
    check(
        worst_ratio <= 1.0 && monotone && sublinear,
        format!("max error/ε = {worst_ratio:.3}, monotone = {monotone}, sublinear = {sublinear}; {}", rows.join(", ")),
    )
}

fn c7_exp_gate() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for lambda in [0.25, 0.5, 1.0] {
        for k in [2u32, 4, 8] {
            let sw = exp_gate_sweep(12, lambda, k, 1).map_err(|e| e.to_string())?;
            violations += sw.violations;
            checked += sw.checked;
        }
    }
    check(violations == 0, format!("{violations} violations over {checked} inputs"))
}

fn c8_generalizations() -> Outcome {
    let vs = ball_instance(800, 4);
    let kp = KernelParams::new(0.25, 8).unwrap();
    let mut bad = Vec::new();
    let mut notes = Vec::new();
    for (target, seed) in [(Target::Ls, 81), (Target::Lr, 82)] {
        let out = pipeline(target, &vs, &kp, seed)?;
        bad.extend(failed_checks(&out.report).into_iter().map(|b| format!("{target:?}:{b}")));
        for c in out.report.checks.iter().filter(|c| c.name.starts_with("lr_residual") && c.value > 1e-6) {
            bad.push(format!("{}={:.3e}", c.name, c.value));
        }
        notes.push(format!("{target:?} multiplicities {:?}", out.report.multiplicities));
    }
    let unit = unit_instance(803, 4);
    let out = pipeline(Target::W, &unit, &kp, 83)?;
    bad.extend(failed_checks(&out.report).into_iter().map(|b| format!("W:{b}")));
    notes.push(format!("W multiplicities {:?}", out.report.multiplicities));
    check(bad.is_empty(), format!("{}; failing: {bad:?}", notes.join(", ")))
}

fn c9_cross_path() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..3u64 {
        let vs = unit_instance(900 + seed, 4);
        let kp = KernelParams::new(0.25, 8).unwrap();
        let enc = DensityEncodings::build(&vs, &kp, &EncodingConfig::default()).map_err(|e| e.to_string())?;
        let bar = encode_bar_l_unit_norm(&enc, TraceSource::Estimated).map_err(|e| e.to_string())?;
        let cal = encode_cal_l(&enc, TraceSource::Estimated).map_err(|e| e.to_string())?;
        worst = worst.max(spectral_norm(&(bar.encoding.scaled_block() - cal.encoding.scaled_block())));
    }
    check(worst <= 1e-5, format!("max ‖L̄ block − 𝓛 block‖ = {worst:.2e}"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("block-encoding identity for rho0", c1_rho0_identity),
        ("degree identity and trace estimate", c2_degree_identity),
        ("normalized Laplacian combination", c3_cal_l),
        ("end-to-end spectrum", c4_end_to_end),
        ("error-budget property suites", c5_error_budgets),
        ("simulation error and query counts", c6_simulation_contract),
        ("exp gate exhaustive check", c7_exp_gate),
        ("Ls, Lr and W targets", c8_generalizations),
        ("unit-norm cross-path agreement", c9_cross_path),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
