use closure_lab_wasm_demo::demo::{axis, collapse_curves, score_landscape, Viewer};

#[test]
fn landscape_is_seed_reproducible_and_sized() {
    let a = score_landscape(9, 500, 7).unwrap();
    assert_eq!(a.len(), 81);
    assert_eq!(a, score_landscape(9, 500, 7).unwrap());
    assert!(a.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(score_landscape(1, 500, 7).is_err());
}

#[test]
fn collapse_rejects_unstable_systems() {
    assert!(collapse_curves(1.0, 4, 5, 1).is_err());
    assert!(collapse_curves(0.5, 0, 5, 1).is_err());
    assert_eq!(collapse_curves(0.5, 2, 5, 1).unwrap().len(), 10);
}

#[test]
fn viewer_matches_repeated_runs() {
    let mut a = Viewer::new(32, 5, 100.0).unwrap();
    let mut b = Viewer::new(32, 5, 100.0).unwrap();
    a.advance(24).unwrap();
    b.advance(12).unwrap();
    b.advance(12).unwrap();
    assert_eq!(a.layer(0), b.layer(0));
    assert_eq!(a.layer(1), b.layer(1));
    assert_eq!(axis(0.0, 2.0, 3), vec![0.0, 1.0, 2.0]);
}
