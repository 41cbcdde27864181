#![allow(dead_code)]

use halfspace::eval::{Dataset, LabeledSample, Provenance};
use halfspace::kernel::Point;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A point of the closed unit ball, drawn by rejection from the cube.
pub fn ball_point(rng: &mut impl Rng, dim: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return Point::new(v).expect("inside the ball");
        }
    }
}

pub fn unit_point(rng: &mut impl Rng, dim: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-3 {
            return Point::new(v.into_iter().map(|c| c / n).collect()).expect("unit vector");
        }
    }
}

pub fn ball_points(seed: u64, m: usize, dim: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| ball_point(&mut rng, dim)).collect()
}

pub fn random_dataset(seed: u64, m: usize, dim: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..m).map(|_| LabeledSample { x: ball_point(&mut rng, dim), y: rng.random_range(0..2) }).collect();
    Dataset::new(samples, Provenance::File("memory".into())).unwrap()
}

/// Strategy over points in the unit ball of dimension `dim`.
pub fn ball(dim: usize) -> impl Strategy<Value = Point> {
    proptest::collection::vec(-1.0f64..=1.0, dim).prop_map(|v| {
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let v = if n > 1.0 { v.into_iter().map(|c| c / n).collect() } else { v };
        Point::new(v).unwrap()
    })
}
