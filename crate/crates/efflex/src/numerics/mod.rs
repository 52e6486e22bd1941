//! Dense-matrix engine, tape-based reverse-mode gradients, AdamW, and
//! seeded initialization. Everything the trainable pipeline runs on.

pub mod matrix;
pub mod optim;
pub mod tape;

pub use matrix::{cosine_flat, leaky_relu, matmul, matmul_nt, matmul_tn, softmax_rows, Matrix};
pub use optim::{AdamW, LrSchedule, ParamTensor};
pub use tape::{Tape, Var};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic, platform-independent RNG stream.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Xavier-uniform initialization: entries uniform in ±sqrt(6/(rows+cols)).
pub fn xavier_init(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.random_range(-bound..bound);
    }
    m
}
