use involute_wasm::{bracket_json, deformed_vs_limit_json, spin_spin_json};
use serde_json::Value;

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn spin_spin_conserves_energy() {
    let v = json(&spin_spin_json([1.0, 0.0, 1.0], [0.0, 2.0, 0.0], 5.0, 1e-2, 10).unwrap());
    assert_eq!(v["completed"], true);
    assert_eq!(v["times"].as_array().unwrap().len(), 51);
    let first = &v["states"][0];
    let norm: f64 = (0..3).map(|i| first[i].as_f64().unwrap().powi(2)).sum();
    assert!((norm - 1.0).abs() < 1e-12);
    for d in v["drift"].as_array().unwrap() {
        assert!(d[1].as_f64().unwrap() < 1e-6, "{d}");
    }
    assert!(spin_spin_json([0.0; 3], [0.0, 1.0, 0.0], 1.0, 0.1, 1).is_err());
}

#[test]
fn deformed_and_limit_start_together() {
    let v = json(&deformed_vs_limit_json(0.5, 2.0, 1e-2, 20).unwrap());
    assert_eq!(v["deformed"]["states"][0], v["limit"]["states"][0]);
    assert_eq!(v["deformed"]["completed"], true);
    assert!(deformed_vs_limit_json(0.0, 1.0, 0.1, 1).is_err());
    assert!(deformed_vs_limit_json(0.5, 1.0, 0.0, 1).is_err());
}

#[test]
fn bracket_of_coordinates() {
    let v = json(&bracket_json("su2", "x", "y", "x=1,y=2,z=3").unwrap());
    assert_eq!(v["bracket"], "z");
    assert_eq!(v["value"], 3.0);
    let v = json(&bracket_json("sb2c_deformed", "x", "y", "").unwrap());
    assert_eq!(v["space"], "sb2c");
    assert!(v["value"].is_null());
    assert!(bracket_json("su2", "x", "q", "").is_err());
    assert!(bracket_json("su3", "x", "y", "").is_err());
}
