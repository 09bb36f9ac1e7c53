//! Browser bindings: Taylor truncation explorer, QPE histogram for a small
//! vertex set, and the fixed-point exp gate against `e^{−λx}`.
//!
//! Every export returns a JSON string so the page needs no glue beyond
//! `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qlap_core::arith::exp_neg_lambda_raw;
use qlap_core::graph::{KernelParams, VertexSet};
use qlap_core::qsim::FixedPointSpec;
use qlap_core::spectral::{full_pipeline, PipelineConfig, QpeConfig, Target};

#[derive(Debug, Serialize)]
pub struct TruncationCurve {
    pub dot: Vec<f64>,
    pub exact: Vec<f64>,
    pub taylor: Vec<f64>,
    pub max_error: f64,
}

/// Weight between two unit vectors as a function of their inner product.
pub fn truncation_curve(lambda: f64, p: usize, samples: usize) -> qlap_core::Result<TruncationCurve> {
    let kp = KernelParams::new(lambda, p)?;
    let samples = samples.clamp(2, 2001);
    let dot: Vec<f64> = (0..samples).map(|i| -1.0 + 2.0 * i as f64 / (samples - 1) as f64).collect();
    let exact: Vec<f64> = dot.iter().map(|c| (-lambda * (2.0 - 2.0 * c)).exp()).collect();
    let taylor: Vec<f64> = dot.iter().map(|&c| (-2.0 * lambda).exp() * kp.series(c)).collect();
    let max_error = exact.iter().zip(&taylor).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(TruncationCurve { dot, exact, taylor, max_error })
}

#[derive(Debug, Serialize)]
pub struct HistogramView {
    pub bits: usize,
    /// `[bin, count]` for occupied bins.
    pub histogram: Vec<[u64; 2]>,
    pub eigenvalues: Vec<f64>,
    pub reference_eigenvalues: Vec<f64>,
    pub pass: bool,
}

pub fn qpe_view(csv: &str, target: &str, lambda: f64, p: usize, bits: usize, shots: usize, seed: u64) -> qlap_core::Result<HistogramView> {
    let vs = VertexSet::from_csv(csv)?;
    if vs.n() > 8 {
        return Err(qlap_core::Error::Input("the demo is limited to 8 vertices".into()));
    }
    let kp = KernelParams::new(lambda, p)?;
    let cfg = PipelineConfig { target: target.parse::<Target>()?, qpe: QpeConfig { bits, shots, seed }, ..Default::default() };
    let report = full_pipeline(&vs, &kp, &cfg)?.report;
    Ok(HistogramView {
        bits,
        histogram: report.qpe.map(|q| q.histogram).unwrap_or_default(),
        eigenvalues: report.eigenvalues,
        reference_eigenvalues: report.reference_eigenvalues,
        pass: report.pass,
    })
}

#[derive(Debug, Serialize)]
pub struct GateCurve {
    pub x: Vec<f64>,
    pub gate: Vec<f64>,
    pub exact: Vec<f64>,
}

/// Every input of a `bits`-bit unit register through the order-`order` exp gate.
pub fn gate_curve(bits: u32, lambda: f64, order: u32) -> qlap_core::Result<GateCurve> {
    let s = FixedPointSpec::unit(bits.clamp(2, 12));
    let mut curve = GateCurve { x: Vec::new(), gate: Vec::new(), exact: Vec::new() };
    for raw in 0..=s.max_raw() {
        let x = s.decode(raw);
        curve.x.push(x);
        curve.gate.push(s.decode(exp_neg_lambda_raw(raw, s, lambda, order, s)?));
        curve.exact.push((-lambda * x).exp());
    }
    Ok(curve)
}

fn to_json<T: Serialize>(r: qlap_core::Result<T>) -> Result<String, String> {
    r.map(|v| serde_json::to_string(&v).expect("plain data serialises")).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn truncation_explorer(lambda: f64, p: usize, samples: usize) -> Result<String, String> {
    to_json(truncation_curve(lambda, p, samples))
}

#[wasm_bindgen]
pub fn qpe_histogram(csv: &str, target: &str, lambda: f64, p: usize, bits: usize, shots: usize, seed: u64) -> Result<String, String> {
    to_json(qpe_view(csv, target, lambda, p, bits, shots, seed))
}

#[wasm_bindgen]
pub fn exp_gate_curve(bits: u32, lambda: f64, order: u32) -> Result<String, String> {
    to_json(gate_curve(bits, lambda, order))
}
