use qlap_wasm_demo::{exp_gate_curve, qpe_histogram, truncation_explorer};
use serde_json::Value;

#[test]
fn truncation_error_shrinks_with_order() {
    let err = |p| {
        let v: Value = serde_json::from_str(&truncation_explorer(0.5, p, 101).unwrap()).unwrap();
        v["max_error"].as_f64().unwrap()
    };
    assert!(err(8) < err(4) && err(4) < err(2));
    assert!(truncation_explorer(-1.0, 4, 10).is_err());
}

#[test]
fn two_vertex_histogram_has_one_eigenvalue() {
    let v: Value = serde_json::from_str(&qpe_histogram("0.6,0\n0,0.8\n", "L", 0.5, 4, 8, 2048, 3).unwrap()).unwrap();
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 1);
    assert!(!v["histogram"].as_array().unwrap().is_empty());
    assert_eq!(v["pass"], true);
    assert!(qpe_histogram("0.1,x\n", "L", 0.5, 4, 8, 64, 0).is_err());
    assert!(qpe_histogram("1,0\n0,1\n", "Q", 0.5, 4, 8, 64, 0).is_err());
}

#[test]
fn gate_curve_tracks_exponential() {
    let v: Value = serde_json::from_str(&exp_gate_curve(8, 1.0, 8).unwrap()).unwrap();
    let gate = v["gate"].as_array().unwrap();
    let exact = v["exact"].as_array().unwrap();
    assert_eq!(gate.len(), 256);
    let worst = gate.iter().zip(exact).map(|(g, e)| (g.as_f64().unwrap() - e.as_f64().unwrap()).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-2, "{worst}");
}
