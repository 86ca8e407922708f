use secrecy_isac_wasm::{robust_scan_json, solve_json, steered_pattern_json};
use serde_json::Value;

const SMALL: &str =
    r#"{"array": {"num_antennas": 6}, "users": {"count": 2}, "solver": {"restarts": 0}}"#;

#[test]
fn solve_returns_pattern_and_traces() {
    let v: Value = serde_json::from_str(&solve_json(SMALL, 3).unwrap()).unwrap();
    let angles = v["angles_deg"].as_array().unwrap();
    let gains = v["gains"].as_array().unwrap();
    assert_eq!(angles.len(), 361);
    assert_eq!(gains.len(), 361);
    assert!(gains.iter().all(|g| g.as_f64().unwrap() >= 0.0));
    assert_eq!(
        v["objective_trace"].as_array().unwrap().len(),
        v["iterations"].as_u64().unwrap() as usize
    );
    assert!(
        v["robust_sum_secrecy_rate"].as_f64().unwrap()
            <= v["sum_secrecy_rate"].as_f64().unwrap() + 1e-12
    );
}

#[test]
fn empty_config_uses_defaults() {
    let v: Value = serde_json::from_str(&solve_json("  ", 0).unwrap()).unwrap();
    assert_eq!(v["seed"].as_u64(), Some(0));
}

#[test]
fn bad_config_is_an_error() {
    assert!(solve_json(r#"{"array": {"num_antennas": "x"}}"#, 0).is_err());
    assert!(solve_json(r#"{"users": {"count": 9}}"#, 0).is_err());
}

#[test]
fn steered_pattern_peaks_at_steer_angle() {
    let v: Value = serde_json::from_str(&steered_pattern_json(16, 20.0).unwrap()).unwrap();
    let angles: Vec<f64> = v["angles_deg"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let gains: Vec<f64> = v["gains"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let (i, peak) = gains
        .iter()
        .enumerate()
        .fold((0, 0.0), |b, (i, &g)| if g > b.1 { (i, g) } else { b });
    assert!((angles[i] - 20.0).abs() < 1e-9);
    // Unit-norm beam: peak gain N.
    assert!((peak - 16.0).abs() < 1e-9);
}

#[test]
fn robust_scan_has_one_point_per_delta() {
    let v: Value = serde_json::from_str(&robust_scan_json(SMALL, 1, &[0.0, 2.0]).unwrap()).unwrap();
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[1]["delta_deg"].as_f64(), Some(2.0));
}
