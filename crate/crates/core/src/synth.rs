//! Deterministic synthetic signals and teacher posteriors for fixtures,
//! demos and the acceptance suite.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::network::HeadSplit;
use crate::ops::softmax;
use crate::training::TeacherPosterior;

pub fn sine(freq_hz: f64, samples: usize, sample_rate: u32, amplitude: f64, phase: f64) -> Vec<f32> {
    let sr = sample_rate as f64;
    (0..samples)
        .map(|i| (amplitude * (2.0 * PI * freq_hz * i as f64 / sr + phase).sin()) as f32)
        .collect()
}

/// Linear sweep from `f0` to `f1` over the clip.
pub fn chirp(f0: f64, f1: f64, samples: usize, sample_rate: u32, amplitude: f64) -> Vec<f32> {
    let sr = sample_rate as f64;
    let duration = samples as f64 / sr;
    let k = (f1 - f0) / duration;
    (0..samples)
        .map(|i| {
            let t = i as f64 / sr;
            (amplitude * (2.0 * PI * (f0 * t + 0.5 * k * t * t)).sin()) as f32
        })
        .collect()
}

/// Gaussian white noise with standard deviation `amplitude / 3`, clipped to `±amplitude`.
pub fn white_noise(samples: usize, amplitude: f64, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, amplitude / 3.0).expect("valid std");
    (0..samples)
        .map(|_| normal.sample(&mut rng).clamp(-amplitude, amplitude) as f32)
        .collect()
}

/// Per-timestep posteriors drawn as `softmax(N(0, temperature²))` within each head.
pub fn random_posterior(
    clip_id: &str,
    timesteps: usize,
    split: &HeadSplit,
    temperature: f64,
    rng: &mut impl Rng,
) -> TeacherPosterior {
    let classes = split.total();
    let mut probs = Vec::with_capacity(timesteps * classes);
    for _ in 0..timesteps {
        for head in split.heads() {
            let logits: Vec<f64> = head
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    temperature * z
                })
                .collect();
            probs.extend(softmax(&logits).expect("non-empty head").iter().map(|&p| p as f32));
        }
    }
    TeacherPosterior::new(clip_id, timesteps, classes, probs).expect("consistent sizes")
}

/// A teacher that always puts `peak_mass` on one object class and one scene
/// class and spreads the rest uniformly within each head.
pub fn peaked_posterior(
    clip_id: &str,
    timesteps: usize,
    split: &HeadSplit,
    object_class: usize,
    scene_class: usize,
    peak_mass: f64,
) -> TeacherPosterior {
    let mut row = Vec::with_capacity(split.total());
    for (head, peak) in split.heads().into_iter().zip([object_class, scene_class]) {
        let n = head.len();
        let rest = (1.0 - peak_mass) / (n - 1).max(1) as f64;
        row.extend((0..n).map(|i| if i == peak % n { peak_mass } else { rest } as f32));
    }
    let probs = (0..timesteps).flat_map(|_| row.iter().copied()).collect();
    TeacherPosterior::new(clip_id, timesteps, split.total(), probs).expect("consistent sizes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posteriors_are_normalized_per_head() {
        let split = HeadSplit::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for post in [
            random_posterior("a", 2, &split, 2.0, &mut rng),
            peaked_posterior("b", 3, &split, 5, 7, 0.6),
        ] {
            for t in 0..post.timesteps {
                let row = post.timestep(t);
                for head in split.heads() {
                    let s: f64 = row[head].iter().map(|&p| p as f64).sum();
                    assert!((s - 1.0).abs() < 1e-4, "{s}");
                }
            }
        }
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let a = white_noise(1000, 100.0, 4);
        assert_eq!(a, white_noise(1000, 100.0, 4));
        assert!(a.iter().all(|v| v.abs() <= 100.0));
    }
}
