use deepsearch_merge::*;
use proptest::prelude::*;

fn map(entries: &[(&str, Tensor)]) -> ParameterMap {
    entries.iter().map(|(k, t)| (k.to_string(), t.clone())).collect()
}

fn pair() -> (ParameterMap, ParameterMap) {
    let v = map(&[
        ("lm.w", Tensor::f64(vec![2, 2], vec![1.0, -2.0, 3.5, 0.0])),
        ("lm.b", Tensor::f32(vec![2], vec![0.25, 7.0])),
        ("vision.w", Tensor::f32(vec![3], vec![0.1, 0.2, 0.3])),
    ]);
    let t = map(&[
        ("lm.w", Tensor::f64(vec![2, 2], vec![3.0, 2.0, -1.5, 4.0])),
        ("lm.b", Tensor::f32(vec![2], vec![1.25, -7.0])),
        ("text_only.w", Tensor::scalar(9.0)),
    ]);
    (v, t)
}

#[test]
fn alpha_one_is_theta_v() {
    let (v, t) = pair();
    assert_eq!(interpolate(&v, &t, &MergeSpec::new(1.0).unwrap()).unwrap(), v);
}

#[test]
fn alpha_zero_takes_theta_t_on_shared_keys_only() {
    let (v, t) = pair();
    let out = interpolate(&v, &t, &MergeSpec::new(0.0).unwrap()).unwrap();
    assert_eq!(out["lm.w"], t["lm.w"]);
    assert_eq!(out["lm.b"], t["lm.b"]);
    assert_eq!(out["vision.w"], v["vision.w"]);
    assert!(!out.contains_key("text_only.w"));
}

#[test]
fn key_filter_limits_merged_keys() {
    let (v, t) = pair();
    let spec = MergeSpec::new(0.5).unwrap().with_key_filter(&["*.w"]).unwrap();
    let out = interpolate(&v, &t, &spec).unwrap();
    assert_eq!(out["lm.b"], v["lm.b"]);
    assert_eq!(out["lm.w"].data.to_f64(), vec![2.0, 0.0, 1.0, 2.0]);
}

#[test]
fn shape_and_finiteness_are_checked() {
    let (v, mut t) = pair();
    t.insert("lm.b".into(), Tensor::f32(vec![1, 2], vec![0.0, 0.0]));
    assert!(matches!(
        interpolate(&v, &t, &MergeSpec::default()),
        Err(MergeError::ShapeMismatch { key, .. }) if key == "lm.b"
    ));
    let (mut v, t) = pair();
    v.insert("lm.b".into(), Tensor::f32(vec![2], vec![f32::NAN, 0.0]));
    assert!(matches!(interpolate(&v, &t, &MergeSpec::default()), Err(MergeError::NonFiniteInput { .. })));
}

#[test]
fn files_round_trip() {
    let (v, _) = pair();
    let dir = tempfile::tempdir().unwrap();
    for name in ["m.safetensors", "m.txt"] {
        let p = dir.path().join(name);
        save(&p, &v).unwrap();
        assert_eq!(load(&p).unwrap(), v, "{name}");
    }
    let text = format::to_text(&v);
    assert!(text.contains("lm.b\tf32\t2\t0.25 7\n"), "{text}");
    assert!(format::from_text("k\tf64\t2\t1").is_err());
    assert!(format::from_binary(b"garbage").is_err());
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -1.0..1.0f64, Just(0.0)]
}

proptest! {
    #[test]
    fn convex_and_idempotent(vs in prop::collection::vec((finite(), finite()), 1..40), alpha in 0.0..=1.0f64) {
        let (a, b): (Vec<f64>, Vec<f64>) = vs.into_iter().unzip();
        let n = a.len();
        let va = map(&[("k", Tensor::f64(vec![n], a.clone()))]);
        let vb = map(&[("k", Tensor::f64(vec![n], b.clone()))]);
        let spec = MergeSpec::new(alpha).unwrap();
        let out = interpolate(&va, &vb, &spec).unwrap()["k"].data.to_f64();
        for i in 0..n {
            prop_assert!(out[i] >= a[i].min(b[i]) && out[i] <= a[i].max(b[i]));
        }
        prop_assert_eq!(interpolate(&va, &va, &spec).unwrap(), va.clone());
        // linearity, up to rounding
        let back = interpolate(&va, &vb, &MergeSpec::new(1.0 - alpha).unwrap()).unwrap()["k"].data.to_f64();
        for i in 0..n {
            let scale = a[i].abs().max(b[i].abs()).max(1.0);
            prop_assert!((out[i] + back[i] - a[i] - b[i]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn f32_storage_stays_convex(vs in prop::collection::vec((-1e3..1e3f32, -1e3..1e3f32), 1..20), alpha in 0.0..=1.0f64) {
        let (a, b): (Vec<f32>, Vec<f32>) = vs.into_iter().unzip();
        let n = a.len();
        let out = interpolate(
            &map(&[("k", Tensor::f32(vec![n], a.clone()))]),
            &map(&[("k", Tensor::f32(vec![n], b.clone()))]),
            &MergeSpec::new(alpha).unwrap(),
        ).unwrap();
        let TensorData::F32(o) = &out["k"].data else { panic!("dtype changed") };
        for i in 0..n {
            prop_assert!(o[i] >= a[i].min(b[i]) && o[i] <= a[i].max(b[i]));
        }
    }
}
