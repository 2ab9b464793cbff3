#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raga_moodkit::catalog::Rasa;
use raga_moodkit::classifiers::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-ish blobs, one per class, centred on a scaled unit vector.
pub fn blobs(classes: &[Rasa], per_class: usize, dim: usize, spread: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, &rasa) in classes.iter().enumerate() {
        for _ in 0..per_class {
            let row: Vec<f64> = (0..dim)
                .map(|j| {
                    let centre = if j % classes.len() == c { 3.0 } else { 0.0 };
                    centre + spread * (r.gen::<f64>() - 0.5)
                })
                .collect();
            x.push(row);
            y.push(rasa);
        }
    }
    Dataset::new(x, y).unwrap()
}

pub fn random_rows(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..n).map(|_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()).collect()
}

pub fn three() -> [Rasa; 3] {
    [Rasa::Karuna, Rasa::Shantha, Rasa::Veera]
}
