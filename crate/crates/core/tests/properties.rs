use bmrtrack::bmr::{encode_slice, intersection_kernel, normalize, reconstruct};
use bmrtrack::classifier::{loss, predict, ClassifierState, Label, Sample, TrainingSet};
use bmrtrack::config::{ColorSetting, RunConfig, ScaleMode};
use bmrtrack::eval::{auc, center_error, overlap, precision_curve, success_curve};
use bmrtrack::features::{build_feature_vector, ColorMode};
use bmrtrack::imgproc::{lab_to_srgb, resize_image, srgb_to_lab};
use bmrtrack::tracker::{argmax, sample_particles, MotionModel, MAX_SCALE, MIN_SCALE};
use bmrtrack::{BBox, Image, TargetState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..max_len)
}

fn bbox() -> impl Strategy<Value = BBox> {
    (-50.0f64..300.0, -50.0f64..300.0, 1.0f64..120.0, 1.0f64..120.0).prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
}

fn patch(channels: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(any::<u8>(), 32 * 32 * channels)
        .prop_map(move |data| Image::new(32, 32, channels, data).unwrap())
}

proptest! {
    #[test]
    fn quantization_error_is_bounded(phi in unit_vec(80), c in 2usize..9) {
        let hat = reconstruct(&encode_slice(&phi, c).unwrap()).unwrap();
        let delta = 1.0 / c as f64;
        for (p, h) in phi.iter().zip(&hat) {
            let e = p - h;
            prop_assert!(e >= 0.0 && e <= delta + 1e-15);
            if *p < 1.0 {
                prop_assert!(e < delta);
            }
        }
    }

    #[test]
    fn maps_are_nested(phi in unit_vec(60)) {
        let b = encode_slice(&phi, 4).unwrap();
        for j in 1..b.levels() {
            for (hi, lo) in b.map(j).iter().zip(b.map(j - 1)) {
                prop_assert!(hi <= lo);
            }
        }
    }

    #[test]
    fn on_grid_kernel_is_exact(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..80)
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 4.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 4.0).collect();
        let explicit = encode_slice(&x, 4).unwrap().dot(&encode_slice(&y, 4).unwrap()).unwrap();
        let exact = intersection_kernel(&x, &y).unwrap();
        prop_assert!((explicit - exact).abs() < 1e-12);
    }

    #[test]
    fn normalized_maps_have_unit_norm(phi in unit_vec(200)) {
        let b = normalize(encode_slice(&phi, 4).unwrap());
        let sq: f64 = b.as_slice().iter().map(|v| v * v).sum();
        prop_assert!(sq == 0.0 || (sq - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn features_lie_in_unit_interval(img in patch(3), gray in any::<bool>()) {
        let mode = if gray { ColorMode::Gray } else { ColorMode::Color };
        let fv = build_feature_vector(&img, mode).unwrap();
        prop_assert_eq!(fv.len(), mode.feature_dim(32));
        prop_assert!(fv.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let lo = fv.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fv.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo == 0.0 && (hi == 1.0 || hi == 0.0));
    }

    #[test]
    fn gray_patches_work_in_gray_mode(img in patch(1)) {
        prop_assert_eq!(build_feature_vector(&img, ColorMode::Gray).unwrap().len(), 752);
        prop_assert!(build_feature_vector(&img, ColorMode::Color).is_err());
    }

    #[test]
    fn lab_round_trips(r in 0u8.., g in 0u8.., b in 0u8..) {
        let rgb = [f64::from(r), f64::from(g), f64::from(b)];
        let back = lab_to_srgb(srgb_to_lab(rgb));
        for (a, b) in rgb.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn resize_has_requested_shape(w in 1usize..40, h in 1usize..40, ow in 1usize..40, oh in 1usize..40, v in any::<u8>()) {
        let img = Image::filled(w, h, &[v, v / 2, 255 - v]).unwrap();
        let out = resize_image(&img, ow, oh).unwrap();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (ow, oh, 3));
        // A constant image stays constant under interpolation.
        prop_assert!(out.data().chunks_exact(3).all(|px| px == [v, v / 2, 255 - v]));
    }

    #[test]
    fn prediction_is_antisymmetric(w in prop::collection::vec(-5.0f64..5.0, 1..30), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..w.len()).map(|_| rng.random::<f64>()).collect();
        let pos = predict(&ClassifierState { w: w.clone() }, &b).unwrap();
        let neg = predict(&ClassifierState { w: w.iter().map(|v| -v).collect() }, &b).unwrap();
        prop_assert!((pos + neg - 1.0).abs() < 1e-12);
        prop_assert!(pos > 0.0 && pos < 1.0);
    }

    #[test]
    fn loss_is_positive_and_log_two_at_zero(
        rows in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 4), any::<bool>()), 1..20),
        w in prop::collection::vec(-3.0f64..3.0, 4)
    ) {
        let data = TrainingSet::new(rows.into_iter().map(|(features, p)| Sample {
            features,
            label: if p { Label::Positive } else { Label::Negative },
        }).collect());
        let l = loss(&ClassifierState { w }, &data).unwrap();
        prop_assert!(l > 0.0 && l.is_finite());
        prop_assert_eq!(loss(&ClassifierState::zeros(4), &data).unwrap(), std::f64::consts::LN_2);
    }

    #[test]
    fn overlap_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let o = overlap(&a, &b);
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert_eq!(o, overlap(&b, &a));
        prop_assert!((overlap(&a, &a) - 1.0).abs() < 1e-12);
        prop_assert_eq!(center_error(&a, &b), center_error(&b, &a));
    }

    #[test]
    fn curves_are_monotone(values in prop::collection::vec(0.0f64..=1.0, 1..60), errors in prop::collection::vec(0.0f64..80.0, 1..60)) {
        let s = success_curve(&values).unwrap();
        prop_assert!(s.values.windows(2).all(|w| w[1] <= w[0]));
        let p = precision_curve(&errors).unwrap();
        prop_assert!(p.values.windows(2).all(|w| w[1] >= w[0]));
        let a = auc(&s);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn particles_respect_scale_bounds(s in 0.01f64..30.0, seed in any::<u64>()) {
        let prev = TargetState::new(50.0, 50.0, s);
        let mm = MotionModel { sigma_x: 6.0, sigma_y: 6.0, sigma_s: 0.5 };
        let set = sample_particles(&prev, &mm, 64, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(set.states.iter().all(|p| (MIN_SCALE..=MAX_SCALE).contains(&p.s)));
    }

    #[test]
    fn argmax_picks_first_maximum(values in prop::collection::vec(0u8..4, 1..30)) {
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let i = argmax(&v).unwrap();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(v[i], max);
        prop_assert!(v[..i].iter().all(|&x| x < max));
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), workers in 0usize..16, rho in 0.01f64..0.99, gray in any::<bool>(), rel in any::<bool>()) {
        let cfg = RunConfig {
            seed,
            workers,
            rho,
            color_mode: if gray { ColorSetting::Gray } else { ColorSetting::Auto },
            scale_mode: if rel { ScaleMode::Relative } else { ScaleMode::Absolute },
            ..RunConfig::default()
        };
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), text);
    }
}
