//! Weight initialization.
//!
//! Weight matrices use uniform Xavier/Glorot bounds ±sqrt(6/(fan_in+fan_out)),
//! biases start at zero, embedding rows at N(0, 0.1²).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::Tensor;

pub fn xavier_uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Tensor::matrix(rows, cols, data).expect("consistent shape")
}

pub fn zeros_vector(len: usize) -> Tensor {
    Tensor::vector(vec![0.0; len])
}

pub fn constant_vector(len: usize, v: f64) -> Tensor {
    Tensor::vector(vec![v; len])
}

pub fn normal_embedding(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Tensor {
    let dist = Normal::new(0.0, std).expect("valid std");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::matrix(rows, cols, data).expect("consistent shape")
}
