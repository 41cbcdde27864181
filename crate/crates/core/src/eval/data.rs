//! Labeled datasets and the synthetic generator.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernel::Point;
use crate::transfer::TransferKind;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Point,
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated { spec: GeneratorSpec, m: usize },
    File(PathBuf),
    Split { parent: Box<Provenance>, seed: u64, holdout: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    provenance: Provenance,
}

impl Dataset {
    /// Checks binary labels and a common dimension.
    pub fn new(samples: Vec<LabeledSample>, provenance: Provenance) -> Result<Self> {
        if let Some(first) = samples.first() {
            let dim = first.x.dim();
            for (i, s) in samples.iter().enumerate() {
                if s.x.dim() != dim {
                    return Err(invalid(format!("sample {i} has dimension {}, expected {dim}", s.x.dim())));
                }
                if s.y > 1 {
                    return Err(invalid(format!("sample {i} has label {}, expected 0 or 1", s.y)));
                }
            }
        }
        Ok(Self { samples, provenance })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Dimension of the points, `None` for an empty dataset.
    pub fn dim(&self) -> Option<usize> {
        self.samples.first().map(|s| s.x.dim())
    }

    pub fn points(&self) -> Vec<Point> {
        self.samples.iter().map(|s| s.x.clone()).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Fraction of samples labeled 1.
    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.y == 1).count() as f64 / self.len() as f64
    }

    /// Seeded shuffle, then the last `round(holdout_fraction * m)` samples form the holdout.
    pub fn split(&self, holdout_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
            return Err(invalid(format!("holdout fraction must lie in (0, 1), got {holdout_fraction}")));
        }
        let m = self.len();
        if m < 2 {
            return Err(invalid("need at least two samples to split"));
        }
        let n_holdout = ((holdout_fraction * m as f64).round() as usize).clamp(1, m - 1);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pick = |idx: &[usize]| idx.iter().map(|&i| self.samples[i].clone()).collect::<Vec<_>>();
        let (train_idx, holdout_idx) = order.split_at(m - n_holdout);
        let parent = Box::new(self.provenance.clone());
        Ok((
            Dataset {
                samples: pick(train_idx),
                provenance: Provenance::Split { parent: parent.clone(), seed, holdout: false },
            },
            Dataset { samples: pick(holdout_idx), provenance: Provenance::Split { parent, seed, holdout: true } },
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelNoise {
    /// `y ~ Bernoulli(phi(<w*, x>))`.
    Probabilistic,
    /// `y = 1[phi(<w*, x>) >= 1/2]`.
    DeterministicThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dim: usize,
    pub w_star: Point,
    pub transfer: TransferKind,
    pub label_noise: LabelNoise,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(w_star: Point, transfer: TransferKind, label_noise: LabelNoise, seed: u64) -> Result<Self> {
        if (w_star.norm() - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("w* must have unit norm, got {}", w_star.norm())));
        }
        Ok(Self { dim: w_star.dim(), w_star, transfer, label_noise, seed })
    }

    /// `w*` drawn uniformly from the sphere with its own seed.
    pub fn with_random_direction(
        dim: usize,
        transfer: TransferKind,
        label_noise: LabelNoise,
        direction_seed: u64,
        seed: u64,
    ) -> Result<Self> {
        if dim < 1 {
            return Err(invalid("dimension must be at least 1"));
        }
        let w = sphere_point(&mut ChaCha8Rng::seed_from_u64(direction_seed), dim);
        Self::new(w, transfer, label_noise, seed)
    }

    /// Probability of label 1 at `x`.
    pub fn conditional(&self, x: &Point) -> f64 {
        self.transfer.eval_unchecked(self.w_star.dot(x))
    }
}

fn sphere_point(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-12 {
            if let Ok(p) = Point::new(v.into_iter().map(|c| c / norm).collect()) {
                return p;
            }
        }
    }
}

/// Draws `m` points uniformly on the unit sphere and labels them through the
/// spec's transfer function. Reproducible from `spec.seed`.
pub fn generate(spec: &GeneratorSpec, m: usize) -> Result<Dataset> {
    if spec.dim < 1 {
        return Err(invalid("dimension must be at least 1"));
    }
    if spec.w_star.dim() != spec.dim {
        return Err(invalid(format!("w* has dimension {}, spec says {}", spec.w_star.dim(), spec.dim)));
    }
    if m < 1 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = (0..m)
        .map(|_| {
            let x = sphere_point(&mut rng, spec.dim);
            let p = spec.conditional(&x);
            let y = match spec.label_noise {
                LabelNoise::Probabilistic => u8::from(rng.random::<f64>() < p),
                LabelNoise::DeterministicThreshold => u8::from(p >= 0.5),
            };
            LabeledSample { x, y }
        })
        .collect();
    Ok(Dataset { samples, provenance: Provenance::Generated { spec: spec.clone(), m } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(transfer: TransferKind, noise: LabelNoise, seed: u64) -> GeneratorSpec {
        GeneratorSpec::with_random_direction(5, transfer, noise, 99, seed).unwrap()
    }

    #[test]
    fn deterministic_zero_one_labels_follow_the_halfspace() {
        let s = spec(TransferKind::ZeroOne, LabelNoise::DeterministicThreshold, 3);
        let d = generate(&s, 500).unwrap();
        for sample in d.samples() {
            assert_eq!(sample.y, u8::from(s.w_star.dot(&sample.x) >= 0.0));
            assert!((sample.x.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_data() {
        let s = spec(TransferKind::sigmoid(3.0).unwrap(), LabelNoise::Probabilistic, 7);
        assert_eq!(generate(&s, 300).unwrap(), generate(&s, 300).unwrap());
        let other = spec(TransferKind::sigmoid(3.0).unwrap(), LabelNoise::Probabilistic, 8);
        assert_ne!(generate(&s, 300).unwrap(), generate(&other, 300).unwrap());
    }

    #[test]
    fn rejects_bad_requests() {
        let s = spec(TransferKind::ZeroOne, LabelNoise::Probabilistic, 1);
        assert!(generate(&s, 0).is_err());
        assert!(GeneratorSpec::with_random_direction(0, TransferKind::ZeroOne, LabelNoise::Probabilistic, 1, 1).is_err());
        let not_unit = Point::new(vec![0.5, 0.0]).unwrap();
        assert!(GeneratorSpec::new(not_unit, TransferKind::ZeroOne, LabelNoise::Probabilistic, 1).is_err());
    }

    #[test]
    fn split_partitions_the_data() {
        let s = spec(TransferKind::ZeroOne, LabelNoise::Probabilistic, 1);
        let d = generate(&s, 100).unwrap();
        let (train, holdout) = d.split(0.2, 5).unwrap();
        assert_eq!((train.len(), holdout.len()), (80, 20));
        let mut all: Vec<Vec<f64>> =
            train.samples().iter().chain(holdout.samples()).map(|s| s.x.coords().to_vec()).collect();
        let mut orig: Vec<Vec<f64>> = d.samples().iter().map(|s| s.x.coords().to_vec()).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, orig);
        assert_eq!(d.split(0.2, 5).unwrap(), (train, holdout));
    }
}
