#![allow(dead_code)]

use dehaze::{ImageGray, ImageRgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rgb(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ImageRgb {
    let data = (0..w * h * 3).map(|_| rng.random::<f64>()).collect();
    ImageRgb::from_vec(w, h, data).unwrap()
}

pub fn random_gray(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ImageGray {
    let data = (0..w * h).map(|_| rng.random::<f64>()).collect();
    ImageGray::from_vec(w, h, data).unwrap()
}

/// A haze-free outdoor-like scene: a sky gradient over a ground plane of
/// randomly placed colored blocks with fine texture and dark shadows.
pub fn clean_scene(w: usize, h: usize, seed: u64) -> ImageRgb {
    let mut rng = rng(seed);
    let horizon = h / 3;
    let blocks: Vec<(usize, usize, usize, usize, [f64; 3])> = (0..24)
        .map(|_| {
            let bw = rng.random_range(w / 12..w / 4);
            let bh = rng.random_range(h / 8..h / 2);
            let x0 = rng.random_range(0..w - bw);
            let y0 = rng.random_range(horizon / 2..h - bh);
            let color = [
                rng.random_range(0.05..0.9),
                rng.random_range(0.05..0.9),
                rng.random_range(0.05..0.9),
            ];
            (x0, y0, bw, bh, color)
        })
        .collect();
    let texture: Vec<f64> = (0..w * h).map(|_| rng.random_range(-0.015..0.015)).collect();
    ImageRgb::from_fn(w, h, |x, y| {
        let mut px = if y < horizon {
            let t = y as f64 / horizon as f64;
            [0.45 + 0.2 * t, 0.6 + 0.15 * t, 0.85 + 0.1 * t]
        } else {
            let t = (y - horizon) as f64 / (h - horizon) as f64;
            [0.35 - 0.2 * t, 0.4 - 0.15 * t, 0.25 - 0.1 * t]
        };
        for &(x0, y0, bw, bh, c) in &blocks {
            if (x0..x0 + bw).contains(&x) && (y0..y0 + bh).contains(&y) {
                let shade = if x - x0 < bw / 5 { 0.35 } else { 1.0 };
                px = c.map(|v| v * shade);
            }
        }
        let n = texture[y * w + x];
        px.map(|v| v + n)
    })
    .unwrap()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Prints one verdict line and fails the test when `ok` is false.
pub fn verdict(id: &str, what: &str, ok: bool, detail: String) {
    println!("[{}] {id} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{id} {what} failed: {detail}");
}
