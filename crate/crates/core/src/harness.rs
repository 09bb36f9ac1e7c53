//! Run configuration, batch runs with atomic report persistence, and the
//! machine-readable verification suite.

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arith::exp_gate_sweep;
use crate::block::{
    encode_bar_l_unit_norm, encode_cal_l, lcu_law_trial, DensityEncodings, EncodingConfig, NormCase, TraceSource,
};
use crate::graph::{truncation_error_report, KernelParams, VertexSet};
use crate::linalg::spectral_norm;
use crate::prep::{
    degree_error_trial, scaled_state_trial, tensor_power_trial, phi_error_trial, psi_error_trial, BoundCheck, DegreeKernel,
    EstimatorMode, PrepConfig,
};
use crate::spectral::{
    full_pipeline, simulate_hamiltonian, PipelineConfig, PipelineReport, QpeConfig, SimulationConfig, SimulationPath,
    Target,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormCaseSetting {
    /// Unit iff every norm is within `1e−8` of one.
    Auto,
    Unit,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorSetting {
    Exact,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeKernelSetting {
    Truncated,
    Gaussian,
}

/// Flat key = value run description. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV of vertices, one per line. Relative paths resolve against the config file.
    pub input: PathBuf,
    pub target: Target,
    pub lambda: f64,
    pub p: usize,
    /// Eigenpairs to report; 0 keeps every resolved eigenvalue.
    pub d: usize,
    pub norm_case: NormCaseSetting,
    pub estimator_mode: EstimatorSetting,
    /// Noise amplitude and failure probability of the noisy estimator.
    pub estimator_eps: f64,
    pub estimator_delta: f64,
    pub eps_x: f64,
    pub eps_a: f64,
    pub frac_bits: u32,
    pub degree_kernel: DegreeKernelSetting,
    pub trace_source: TraceSource,
    pub simulation_path: SimulationPath,
    pub sim_eps: f64,
    pub varsigma1: f64,
    pub qpe_bits: usize,
    pub qpe_shots: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub verify_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let qpe = QpeConfig::default();
        RunConfig {
            input: PathBuf::from("vertices.csv"),
            target: Target::L,
            lambda: 0.5,
            p: 4,
            d: 0,
            norm_case: NormCaseSetting::Auto,
            estimator_mode: EstimatorSetting::Exact,
            estimator_eps: 1e-3,
            estimator_delta: 0.01,
            eps_x: 0.0,
            eps_a: 0.0,
            frac_bits: 40,
            degree_kernel: DegreeKernelSetting::Truncated,
            trace_source: TraceSource::Estimated,
            simulation_path: SimulationPath::OracleExponential,
            sim_eps: 1e-6,
            varsigma1: 1e-3,
            qpe_bits: qpe.bits,
            qpe_shots: qpe.shots,
            seed: 0,
            output: PathBuf::from("report.json"),
            verify_only: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative `input` and `output` become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.input, &mut cfg.output] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serialises")
    }

    pub fn resolve_norm_case(&self, vs: &VertexSet) -> NormCase {
        match self.norm_case {
            NormCaseSetting::Unit => NormCase::Unit,
            NormCaseSetting::General => NormCase::General,
            NormCaseSetting::Auto if vs.is_unit_norm(1e-8) => NormCase::Unit,
            NormCaseSetting::Auto => NormCase::General,
        }
    }

    pub fn kernel_params(&self) -> Result<KernelParams> {
        KernelParams::new(self.lambda, self.p).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn pipeline_config(&self, vs: &VertexSet) -> PipelineConfig {
        let estimator = match self.estimator_mode {
            EstimatorSetting::Exact => EstimatorMode::Exact,
            EstimatorSetting::Noisy => {
                EstimatorMode::Noisy { eps: self.estimator_eps, delta: self.estimator_delta, seed: self.seed }
            }
        };
        let kernel = match self.degree_kernel {
            DegreeKernelSetting::Truncated => DegreeKernel::Truncated,
            DegreeKernelSetting::Gaussian => DegreeKernel::Gaussian,
        };
        PipelineConfig {
            target: self.target,
            d: (self.d > 0).then_some(self.d),
            encoding: EncodingConfig {
                prep: PrepConfig {
                    frac_bits: self.frac_bits,
                    eps_x: self.eps_x,
                    eps_a: self.eps_a,
                    estimator,
                    seed: self.seed,
                },
                kernel,
            },
            trace_source: self.trace_source,
            norm_case: self.resolve_norm_case(vs),
            path: self.simulation_path,
            sim_eps: self.sim_eps,
            qpe: QpeConfig { bits: self.qpe_bits, shots: self.qpe_shots, seed: self.seed },
            varsigma1: self.varsigma1,
            verify_only: self.verify_only,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    VerificationFailed,
    IoOrConfig,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::VerificationFailed => 1,
            RunStatus::IoOrConfig => 2,
        }
    }

    /// Bad data, unreadable files and bad configs are exit 2; numerical failures exit 1.
    pub fn of_error(e: &Error) -> Self {
        let mut root = e;
        while let Error::Stage { source, .. } = root {
            root = source;
        }
        if e.is_io_or_config() || matches!(root, Error::Input(_)) {
            RunStatus::IoOrConfig
        } else {
            RunStatus::VerificationFailed
        }
    }
}

/// What lands on disk: the resolved config next to the pipeline report.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord<'a> {
    pub config: &'a RunConfig,
    pub report: &'a PipelineReport,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub report: Option<PipelineReport>,
    pub error: Option<Error>,
}

impl fmt::Display for RunOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.error, &self.report) {
            (Some(e), _) => write!(f, "error: {e}"),
            (None, Some(r)) => {
                write!(f, "target {:?}, n = {}: eigenvalues {:?}", r.target, r.n, r.eigenvalues)?;
                for c in r.checks.iter().filter(|c| !c.pass) {
                    write!(f, "\nfailed check {}: {:e} vs {:e}", c.name, c.value, c.bound)?;
                }
                Ok(())
            }
            (None, None) => write!(f, "no report"),
        }
    }
}

/// Writes via a sibling temp file and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| Error::Config(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(Error::Io)
}

pub fn run(cfg: &RunConfig) -> RunOutcome {
    let fail = |e: Error| RunOutcome { status: RunStatus::of_error(&e), report: None, error: Some(e) };
    let vs = match VertexSet::load(&cfg.input) {
        Ok(vs) => vs,
        Err(Error::Io(e)) => return fail(Error::Io(e)),
        Err(e) => return fail(Error::Config(format!("{}: {e}", cfg.input.display()))),
    };
    let kp = match cfg.kernel_params() {
        Ok(kp) => kp,
        Err(e) => return fail(e),
    };
    let out = match full_pipeline(&vs, &kp, &cfg.pipeline_config(&vs)) {
        Ok(out) => out,
        Err(e) => return fail(e),
    };
    let record = RunRecord { config: cfg, report: &out.report };
    let mut json = serde_json::to_string_pretty(&record).expect("report serialises");
    json.push('\n');
    if let Err(e) = write_atomic(&cfg.output, json.as_bytes()) {
        return fail(e);
    }
    let status = if out.report.pass { RunStatus::Ok } else { RunStatus::VerificationFailed };
    RunOutcome { status, report: Some(out.report), error: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteSize {
    Small,
    Medium,
}

impl std::str::FromStr for SuiteSize {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(SuiteSize::Small),
            "medium" => Ok(SuiteSize::Medium),
            other => Err(Error::Config(format!("unknown size `{other}` (expected small or medium)"))),
        }
    }
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteLine {
    pub module: &'static str,
    pub check: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest `measured / bound` seen, or the raw measurement when the bound is zero.
    pub worst: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Default)]
struct Tally {
    trials: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn add(&mut self, c: BoundCheck) {
        self.trials += 1;
        self.violations += usize::from(!c.holds());
        let r = if c.bound > 0.0 { c.measured / c.bound } else { c.measured };
        self.worst = self.worst.max(r);
    }

    fn line(self, module: &'static str, check: impl Into<String>) -> SuiteLine {
        SuiteLine {
            module,
            check: check.into(),
            trials: self.trials,
            violations: self.violations,
            worst: self.worst,
            pass: self.violations == 0,
            error: None,
        }
    }
}

fn errored(module: &'static str, check: impl Into<String>, e: Error) -> SuiteLine {
    SuiteLine { module, check: check.into(), trials: 0, violations: 0, worst: 0.0, pass: false, error: Some(e.to_string()) }
}

fn tallied(module: &'static str, check: String, f: impl FnOnce(&mut Tally) -> Result<()>) -> SuiteLine {
    let mut t = Tally::default();
    match f(&mut t) {
        Ok(()) => t.line(module, check),
        Err(e) => errored(module, check, e),
    }
}

/// Seeded instance with norms in `[0.2, 1]`, or straddling one when `outside`.
fn suite_instance(seed: u64, n: usize, m: usize, radius: (f64, f64)) -> Result<VertexSet> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let r = radius.0 + (radius.1 - radius.0) * rng.random::<f64>();
            v.into_iter().map(|x| x * r / norm).collect()
        })
        .collect();
    VertexSet::new(rows)
}

/// Every module's invariant suite as one line per check. Deterministic in `size`.
pub fn verify_suite(size: SuiteSize) -> Vec<SuiteLine> {
    let (sizes, prep_trials, gate_bits): (&[usize], u64, u32) = match size {
        SuiteSize::Small => (&[2, 4], 50, 8),
        SuiteSize::Medium => (&[2, 4, 8], 200, 12),
    };
    let mut lines = Vec::new();

    lines.push(tallied("error-propagation", "scaled_state ‖ax − by‖ ≤ (a−b) + bε".into(), |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
        for _ in 0..1000 {
            t.add(scaled_state_trial(&mut rng, 3)?);
        }
        Ok(())
    }));
    for p in 2..=5usize {
        lines.push(tallied("error-propagation", format!("tensor_power ‖x^⊗p − y^⊗p‖ ≤ pε, p = {p}"), |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xA2 + p as u64);
            for k in 0..1000 {
                let eps = 0.3 * (k % 100 + 1) as f64 / 100.0;
                t.add(tensor_power_trial(&mut rng, 3, p, eps)?);
            }
            Ok(())
        }));
    }

    for lambda in [0.25, 0.5, 1.0] {
        for order in [2u32, 4, 8] {
            let check = format!("exp gate, {gate_bits} bits, λ = {lambda}, order {order}");
            lines.push(match exp_gate_sweep(gate_bits, lambda, order, 1) {
                Ok(sw) => SuiteLine {
                    module: "arith",
                    check,
                    trials: sw.checked as usize,
                    violations: sw.violations as usize,
                    worst: sw.max_error,
                    pass: sw.violations == 0,
                    error: None,
                },
                Err(e) => errored("arith", check, e),
            });
        }
    }

    for &n in sizes {
        let seed = 0x5EED + n as u64;
        let kp = KernelParams::new(0.5, 3).expect("valid kernel");
        lines.push(tallied("prep", format!("phi per-branch and global error, n = {n}"), |t| {
            let vs = suite_instance(seed, n, 2, (1.0, 1.0))?;
            for s in 0..prep_trials {
                let sample = phi_error_trial(&vs, &kp, 1e-4 * (1 + s % 20) as f64, s)?;
                sample.branches.iter().for_each(|&b| t.add(b));
                t.add(sample.global);
            }
            Ok(())
        }));
        for (label, radius) in [("norms ≤ 1", (0.2, 1.0)), ("norms > 1", (0.5, 1.6))] {
            lines.push(tallied("prep", format!("psi error, {label}, n = {n}"), |t| {
                let vs = suite_instance(seed + 1, n, 2, radius)?;
                for s in 0..prep_trials {
                    t.add(psi_error_trial(&vs, &kp, 1e-4 * (1 + s % 20) as f64, s)?);
                }
                Ok(())
            }));
        }
        lines.push(tallied("prep", format!("degree state error, n = {n}"), |t| {
            let vs = suite_instance(seed + 2, n, 2, (0.2, 1.0))?;
            for s in 0..prep_trials {
                t.add(degree_error_trial(&vs, &kp, 1e-4 * (1 + s % 20) as f64, s)?);
            }
            Ok(())
        }));
        lines.push(tallied("graph", format!("Taylor truncation bound, n = {n}"), |t| {
            let vs = suite_instance(seed + 3, n, 2, (0.2, 1.0))?;
            let rep = truncation_error_report(&vs, &kp);
            for &(_, _, measured, bound) in &rep.entries {
                t.add(BoundCheck { measured, bound });
            }
            Ok(())
        }));
        lines.extend(block_checks(n, seed));
    }

    lines.push(tallied("block", "LCU error law α·ε_y + α·β·ε_A".into(), |t| {
        for s in 0..200u64 {
            t.add(lcu_law_trial(s, 2 + (s % 3) as usize, 1e-3 * (1 + s % 10) as f64, 1e-3)?);
        }
        Ok(())
    }));

    lines.push(tallied("spectral", "LCU simulation error ≤ ε".into(), |t| {
        let vs = suite_instance(0x51, 2, 2, (0.2, 1.0))?;
        let kp = KernelParams::new(0.5, 2)?;
        let enc = DensityEncodings::build(&vs, &kp, &EncodingConfig::default())?;
        let cal = encode_cal_l(&enc, TraceSource::Classical)?;
        for eps in [1e-2, 1e-4] {
            for time in [1.0, 2.0, 4.0] {
                let sim = simulate_hamiltonian(&cal.encoding, &SimulationConfig::new(time, eps, SimulationPath::LcuTaylor))?;
                t.add(BoundCheck { measured: sim.measured_error, bound: eps });
            }
        }
        Ok(())
    }));

    for (target, unit) in [(Target::L, false), (Target::Ls, false), (Target::Lr, false), (Target::W, true)] {
        let check = format!("pipeline checks, target {target:?}, n = 2");
        lines.push(tallied("spectral", check, |t| {
            let vs = suite_instance(0x60, 2, 2, if unit { (1.0, 1.0) } else { (0.2, 1.0) })?;
            let kp = KernelParams::new(0.5, 4)?;
            let cfg = PipelineConfig {
                target,
                norm_case: if unit { NormCase::Unit } else { NormCase::General },
                qpe: QpeConfig { bits: 8, shots: 4096, seed: 7 },
                ..Default::default()
            };
            let out = full_pipeline(&vs, &kp, &cfg)?;
            for c in &out.report.checks {
                t.add(BoundCheck { measured: if c.pass { 0.0 } else { 1.0 }, bound: 0.5 });
            }
            for v in &out.report.encoding_verifications {
                t.add(BoundCheck { measured: if v.pass { 0.0 } else { 1.0 }, bound: 0.5 });
            }
            Ok(())
        }));
    }
    lines
}

fn block_checks(n: usize, seed: u64) -> Vec<SuiteLine> {
    let kp = KernelParams::new(0.5, 4).expect("valid kernel");
    let build = |unit: bool| -> Result<DensityEncodings> {
        let vs = suite_instance(seed + 10, n, 2, if unit { (1.0, 1.0) } else { (0.2, 1.0) })?;
        DensityEncodings::build(&vs, &kp, &EncodingConfig::default())
    };
    let mut lines = Vec::new();
    lines.push(tallied("block", format!("density encodings ρ₁ ρ₂ ρ₃, n = {n}"), |t| {
        let enc = build(false)?;
        for src in [&enc.rho1, &enc.rho2] {
            let r = src.verify_exact()?;
            t.add(BoundCheck { measured: r.measured_epsilon, bound: r.claimed_epsilon + crate::block::VERIFY_SLACK });
        }
        let r3 = crate::block::verify_block_encoding(&enc.rho3, &enc.rho3.block())?;
        t.add(BoundCheck { measured: r3.measured_epsilon, bound: crate::block::VERIFY_SLACK });
        Ok(())
    }));
    lines.push(tallied("block", format!("𝓛 = L/Tr L combination, n = {n}"), |t| {
        let enc = build(false)?;
        let r = encode_cal_l(&enc, TraceSource::Estimated)?.verify()?;
        t.add(BoundCheck { measured: r.measured_epsilon, bound: r.claimed_epsilon + crate::block::VERIFY_SLACK });
        Ok(())
    }));
    lines.push(tallied("block", format!("unit-norm L̄ agrees with 𝓛, n = {n}"), |t| {
        let enc = build(true)?;
        let bar = encode_bar_l_unit_norm(&enc, TraceSource::Estimated)?;
        let cal = encode_cal_l(&enc, TraceSource::Estimated)?;
        let gap = spectral_norm(&(bar.encoding.scaled_block() - cal.encoding.scaled_block()));
        let residual = bar.spec.residual_bound + cal.spec.residual_bound;
        t.add(BoundCheck { measured: gap, bound: 1e-5 + residual });
        Ok(())
    }));
    lines
}

/// The suite as JSON lines, newline terminated.
pub fn suite_to_jsonl(lines: &[SuiteLine]) -> String {
    lines.iter().map(|l| serde_json::to_string(l).expect("line serialises") + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg = RunConfig::from_toml_str("lambda = 0.25\ntarget = \"Lr\"\n").unwrap();
        assert_eq!(cfg.lambda, 0.25);
        assert_eq!(cfg.target, Target::Lr);
        assert_eq!(cfg.p, 4);
        assert!(matches!(RunConfig::from_toml_str("lamda = 0.3"), Err(Error::Config(_))));
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn auto_norm_case() {
        let cfg = RunConfig::default();
        let unit = VertexSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0 + 5e-9]]).unwrap();
        let off = VertexSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0 + 1e-6]]).unwrap();
        assert_eq!(cfg.resolve_norm_case(&unit), NormCase::Unit);
        assert_eq!(cfg.resolve_norm_case(&off), NormCase::General);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_input_is_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { input: dir.path().join("nope.csv"), output: dir.path().join("out.json"), ..Default::default() };
        let out = run(&cfg);
        assert_eq!(out.status.exit_code(), 2);
        assert!(!cfg.output.exists());
    }
}
