use promptfuse::encoders::{
    encode_temporal, AudioConfig, AudioEncoder, ModalityEncoder, RawImage, VisionConfig,
    VisionEncoder, CHANNELS, IMAGE_SIDE,
};
use promptfuse::synthetic::WINDOW_LEN;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vision() -> VisionEncoder {
    VisionEncoder::init(
        VisionConfig {
            width: 16,
            heads: 2,
            layers: 1,
            ffn: 32,
        },
        11,
    )
    .unwrap()
}

fn random_image(rng: &mut ChaCha8Rng) -> RawImage {
    let data = (0..IMAGE_SIDE * IMAGE_SIDE * CHANNELS)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    RawImage::new(IMAGE_SIDE, IMAGE_SIDE, data).unwrap()
}

fn close(a: &[f32], b: &[f32], tol: f32) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn temporal_features_ignore_frame_order(seed in any::<u64>(), frames in 2usize..6) {
        let enc = vision();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<RawImage> = (0..frames).map(|_| random_image(&mut rng)).collect();
        let mut reversed = items.clone();
        reversed.reverse();
        reversed.rotate_left(1);
        let a = encode_temporal(&items, &enc).unwrap();
        let b = encode_temporal(&reversed, &enc).unwrap();
        prop_assert!(close(a.data(), b.data(), 1e-5));
    }

    #[test]
    fn copies_of_one_frame_match_that_frame(seed in any::<u64>(), k in 1usize..6) {
        let enc = vision();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frame = random_image(&mut rng);
        let one = encode_temporal(std::slice::from_ref(&frame), &enc).unwrap();
        let many = encode_temporal(&vec![frame.clone(); k], &enc).unwrap();
        prop_assert!(close(one.data(), many.data(), 1e-5));
        let direct = enc.encode(&frame).unwrap();
        prop_assert!(close(one.row(0), direct.row(0), 1e-6));
    }

    #[test]
    fn audio_window_order_is_irrelevant(seed in any::<u64>(), windows in 2usize..5) {
        let enc = AudioEncoder::init(AudioConfig { width: 16 }, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let items: Vec<Vec<f32>> = (0..windows)
            .map(|_| (0..WINDOW_LEN).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut rotated = items.clone();
        rotated.rotate_left(1);
        let a = encode_temporal(&items, &enc).unwrap();
        let b = encode_temporal(&rotated, &enc).unwrap();
        prop_assert!(close(a.data(), b.data(), 1e-5));
    }
}

#[test]
fn summary_row_responds_to_every_patch() {
    let enc = vision();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random_image(&mut rng);
    let cls = enc.encode(&base).unwrap().row(0).to_vec();
    for py in 0..IMAGE_SIDE / 2 {
        for px in 0..IMAGE_SIDE / 2 {
            let mut img = base.clone();
            let [r, g, b] = img.pixel(2 * py, 2 * px);
            img.set_pixel(2 * py, 2 * px, [1.0 - r, 1.0 - g, 1.0 - b]);
            let changed = enc.encode(&img).unwrap().row(0).to_vec();
            assert_ne!(
                cls, changed,
                "patch ({py},{px}) does not reach the summary row"
            );
        }
    }
}

#[test]
fn frozen_encoding_is_bit_stable() {
    let enc = vision();
    let before = enc.params.digest();
    let img = random_image(&mut ChaCha8Rng::seed_from_u64(4));
    let a = enc.encode(&img).unwrap();
    let b = enc.encode(&img).unwrap();
    assert_eq!(a, b);
    assert_eq!(before, enc.params.digest());
    assert_eq!(a.shape(), [1 + 16, 16]);
}
