use epfx::model_file::{load_model, read_model, save_model, ModelFileError, SCHEMA_VERSION};
use epfx::oracle::french_sized_model;
use epfx_core::mlp::EpochRecord;
use serde_json::Value;

fn model() -> epfx_core::TrainedModel {
    let mut m = french_sized_model(21);
    m.history.push(EpochRecord { epoch: 0, train_loss: 1.25, val_mae: 1.5 });
    m
}

#[test]
fn roundtrip_is_bit_exact() {
    let m = model();
    let bytes = save_model(&m);
    let back = load_model(&bytes).unwrap();
    assert_eq!(back, m);
    assert_eq!(save_model(&back), bytes);
    let n = m.spec.n_inputs();
    for k in 0..100 {
        let x: Vec<f64> = (0..n).map(|i| 45.0 + 20.0 * ((k * n + i) as f64 * 0.37).sin()).collect();
        let a = m.predict_prices(&x).unwrap();
        let b = back.predict_prices(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
}

#[test]
fn truncated_stream_is_corrupt() {
    let bytes = save_model(&model());
    for cut in [0, 1, bytes.len() / 3, bytes.len() - 3] {
        assert!(matches!(load_model(&bytes[..cut]), Err(ModelFileError::CorruptPayload(_))), "cut at {cut}");
    }
}

#[test]
fn future_schema_version_is_rejected() {
    let mut v: Value = serde_json::from_slice(&save_model(&model())).unwrap();
    v["schema_version"] = Value::from(SCHEMA_VERSION + 1);
    let err = load_model(&serde_json::to_vec(&v).unwrap()).unwrap_err();
    assert_eq!(err, ModelFileError::SchemaVersionMismatch { found: SCHEMA_VERSION as u64 + 1, expected: SCHEMA_VERSION });
}

#[test]
fn inconsistent_layers_are_corrupt() {
    let mut v: Value = serde_json::from_slice(&save_model(&model())).unwrap();
    v["layers"][1]["bias"].as_array_mut().unwrap().pop();
    assert!(matches!(load_model(&serde_json::to_vec(&v).unwrap()), Err(ModelFileError::CorruptPayload(_))));
}

#[test]
fn unreadable_files_map_to_model_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, b"{\"schema_version\": 99}").unwrap();
    assert_eq!(read_model(&path).unwrap_err().kind, epfx::ErrorKind::ModelMismatch);
}
