use nonsparse::artifact::{load_model, save_model, ModelArtifact};
use nonsparse::pipeline::{fit, FitOptions};
use nonsparse::predict::predict_all;
use nonsparse::simulate::{generate_replicate, generate_truth, noise_sd, CellConfig};
use nonsparse::{Dataset64, FittedModel64};

fn fitted() -> (FittedModel64, Dataset64) {
    let cell = CellConfig::default();
    let truth = generate_truth(&cell, 3).unwrap();
    let sigma = noise_sd(&cell, &truth);
    let (train, test) = generate_replicate(&cell, &truth, sigma, 3, 0, 0, 0).unwrap();
    let mut opts = FitOptions::default();
    opts.selection.sigma = Some(sigma);
    (fit(&train, &opts).unwrap().model, test)
}

#[test]
fn round_trip_preserves_predictions_exactly() {
    let (model, test) = fitted();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fit.json");
    save_model(&model, &path).unwrap();
    let back: FittedModel64 = load_model(&path).unwrap();
    assert_eq!(back.selected, model.selected);
    assert_eq!(back.theta, model.theta);
    assert_eq!(back.transform, model.transform);
    let a = predict_all(&model, test.design()).unwrap();
    let b = predict_all(&back, test.design()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_foreign_or_newer_files() {
    let (model, _) = fitted();
    let mut art = ModelArtifact::from_model(&model);
    art.version += 1;
    let err = ModelArtifact::from_json(&art.to_json().unwrap())
        .unwrap()
        .into_model::<f64>()
        .unwrap_err();
    assert!(err.to_string().contains("version"), "{err}");
    let mut art = ModelArtifact::from_model(&model);
    art.alpha.pop();
    assert!(art.into_model::<f64>().is_err());
    assert!(ModelArtifact::from_json("{\"kind\": 3}").is_err());
}

#[test]
fn loads_into_single_precision() {
    let (model, test) = fitted();
    let art = ModelArtifact::from_model(&model);
    let small: nonsparse::FittedModel32 = art.into_model().unwrap();
    let x = test.design().map(|v| v as f32);
    let p32 = predict_all(&small, &x).unwrap();
    let p64 = predict_all(&model, test.design()).unwrap();
    for (a, b) in p32.y_sub_new.iter().zip(p64.y_sub_new.iter()) {
        assert!((*a as f64 - b).abs() < 1e-3 * (1.0 + b.abs()));
    }
}
