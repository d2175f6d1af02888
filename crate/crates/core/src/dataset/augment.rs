use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gesture::{DigitImage, IMAGE_PIXELS, IMAGE_SIDE};

/// Random affine augmentation ranges. Rotation in degrees, zoom as a scale factor,
/// shift as a fraction of image width/height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub rotation_deg: (f64, f64),
    pub zoom: (f64, f64),
    pub shift: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { rotation_deg: (0.0, 180.0), zoom: (0.9, 1.1), shift: (-0.1, 0.1), seed: 0 }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ordered = |(lo, hi): (f64, f64)| lo <= hi && lo.is_finite() && hi.is_finite();
        if !ordered(self.rotation_deg) || self.rotation_deg.0 < -360.0 || self.rotation_deg.1 > 360.0 {
            return Err("rotation range must be ordered and within [-360, 360]".into());
        }
        if !ordered(self.zoom) || !(self.zoom.0 > 0.0) {
            return Err("zoom range must be ordered and positive".into());
        }
        if !ordered(self.shift) {
            return Err("shift range must be ordered".into());
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AugmentParams {
        let mut draw = |(lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        AugmentParams {
            rotation_deg: draw(self.rotation_deg),
            zoom: draw(self.zoom),
            shift_x: draw(self.shift),
            shift_y: draw(self.shift),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub rotation_deg: f64,
    pub zoom: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self { rotation_deg: 0.0, zoom: 1.0, shift_x: 0.0, shift_y: 0.0 };
}

pub fn augment<R: Rng + ?Sized>(image: &DigitImage, cfg: &AugmentConfig, rng: &mut R) -> DigitImage {
    augment_with(image, &cfg.sample(rng))
}

/// Augmented copy of every image, one draw per image from a stream seeded by `cfg.seed`.
pub fn augment_all(images: &[DigitImage], cfg: &AugmentConfig) -> Vec<DigitImage> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    images.iter().map(|img| augment(img, cfg, &mut rng)).collect()
}

/// Rotation about the image center, then zoom, then shift, applied as a single
/// affine map. Each output pixel is bilinearly sampled from the source through the
/// inverse map; samples falling outside read as zero.
pub fn augment_with(image: &DigitImage, p: &AugmentParams) -> DigitImage {
    let n = IMAGE_SIDE as f64;
    let center = (n - 1.0) / 2.0;
    let (sin, cos) = p.rotation_deg.to_radians().sin_cos();
    let (dx, dy) = (p.shift_x * n, p.shift_y * n);
    let src = image.pixels();
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= IMAGE_SIDE as isize || c >= IMAGE_SIDE as isize {
            0.0
        } else {
            src[r as usize * IMAGE_SIDE + c as usize] as f64
        }
    };
    let mut out = vec![0.0f32; IMAGE_PIXELS];
    for (i, px) in out.iter_mut().enumerate() {
        let (r, c) = ((i / IMAGE_SIDE) as f64, (i % IMAGE_SIDE) as f64);
        // undo shift and zoom, then rotate back
        let u = (c - center - dx) / p.zoom;
        let v = (r - center - dy) / p.zoom;
        let sc = cos * u + sin * v + center;
        let sr = -sin * u + cos * v + center;
        let (r0, c0) = (sr.floor(), sc.floor());
        let (fr, fc) = (sr - r0, sc - c0);
        let (r0, c0) = (r0 as isize, c0 as isize);
        let v = (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1))
            + fr * ((1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1));
        *px = (v as f32).clamp(0.0, 1.0);
    }
    DigitImage::new(out, image.label()).expect("bilinear samples stay in [0, 1]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64) -> DigitImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..IMAGE_PIXELS).map(|_| rng.random::<f32>()).collect();
        DigitImage::new(px, Some((seed % 10) as u8)).unwrap()
    }

    #[test]
    fn identity_is_exact() {
        let img = random_image(1);
        let out = augment_with(&img, &AugmentParams::IDENTITY);
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn half_turn_moves_single_pixel_to_mirror_position() {
        for (r, c) in [(3usize, 5usize), (10, 20), (0, 27), (14, 14)] {
            let mut px = vec![0.0f32; IMAGE_PIXELS];
            px[r * IMAGE_SIDE + c] = 1.0;
            let img = DigitImage::new(px, None).unwrap();
            let out = augment_with(&img, &AugmentParams { rotation_deg: 180.0, ..AugmentParams::IDENTITY });
            let (best, _) = out
                .pixels()
                .iter()
                .enumerate()
                .fold((0, -1.0f32), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            let (br, bc) = (best / IMAGE_SIDE, best % IMAGE_SIDE);
            assert!(br.abs_diff(27 - r) <= 1 && bc.abs_diff(27 - c) <= 1, "({r},{c}) -> ({br},{bc})");
        }
    }

    #[test]
    fn shift_moves_content() {
        let mut px = vec![0.0f32; IMAGE_PIXELS];
        px[10 * IMAGE_SIDE + 10] = 1.0;
        let img = DigitImage::new(px, None).unwrap();
        let shift = 2.0 / 28.0;
        let out = augment_with(&img, &AugmentParams { shift_x: shift, shift_y: -shift, ..AugmentParams::IDENTITY });
        assert!((out.get(8, 12) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn config_validation() {
        assert!(AugmentConfig::default().validate().is_ok());
        assert!(AugmentConfig { rotation_deg: (0.0, 400.0), ..Default::default() }.validate().is_err());
        assert!(AugmentConfig { zoom: (0.0, 1.0), ..Default::default() }.validate().is_err());
    }

    // Largest total bilinear weight a single source pixel can receive along one
    // axis when the output grid is sampled at spacing 1/zoom.
    fn tent_sum_bound(zoom: f64) -> f64 {
        let h = 1.0 / zoom;
        1.0 + 2.0 * (1.0 - h).max(0.0) + 2.0 * (1.0 - 2.0 * h).max(0.0)
    }

    proptest! {
        #[test]
        fn outputs_bounded_and_label_kept(seed in 0u64..1000, aug_seed in 0u64..1000) {
            let img = random_image(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(aug_seed);
            let out = augment(&img, &AugmentConfig::default(), &mut rng);
            let max_in = img.pixels().iter().cloned().fold(0.0f32, f32::max);
            prop_assert_eq!(out.label(), img.label());
            prop_assert!(out.pixels().iter().all(|&p| (0.0..=max_in + 1e-6).contains(&p)));
        }

        #[test]
        fn mean_bounded_by_zoom(seed in 0u64..1000, zoom in 0.5f64..2.0) {
            let img = random_image(seed);
            let out = augment_with(&img, &AugmentParams { zoom, ..AugmentParams::IDENTITY });
            let bound = tent_sum_bound(zoom).powi(2);
            prop_assert!(out.mean() <= bound * img.mean() + 1e-9);
        }
    }
}
