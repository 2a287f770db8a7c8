//! Growth measurements over network shapes.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::network::{Activation, NetworkError};
use crate::preimage::{compute_preimage, EngineOptions, PreimageError};
use crate::random::{random_network, random_rational, NetworkSpec};

/// Largest total piecewise width accepted by [`bench_shape`].
pub const MAX_BENCH_WIDTH: usize = 12;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("shape {shape}: {width} piecewise units exceed the limit of {MAX_BENCH_WIDTH}")]
    TooWide { shape: String, width: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Preimage(#[from] PreimageError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub shape: String,
    pub piecewise_width: usize,
    pub omega_bound: u128,
    pub enumerated: u128,
    pub feasible: usize,
    pub forks: usize,
    pub peak_constraints: usize,
    #[serde(serialize_with = "millis")]
    pub wall_time: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1000.0)
}

pub fn shape_name(shape: &[usize]) -> String {
    shape.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
}

/// Builds a seeded random network of the given shape (hidden layers use
/// `hidden`, the output layer is identity), picks a random input, and times
/// the preimage of its image.
pub fn bench_shape(
    shape: &[usize],
    seed: u64,
    hidden: Activation,
    options: &EngineOptions,
) -> Result<BenchRow, BenchError> {
    let spec = NetworkSpec::new(shape, hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_network(&mut rng, &spec)?;
    let width = net.piecewise_width();
    if width > MAX_BENCH_WIDTH {
        return Err(BenchError::TooWide { shape: shape_name(shape), width });
    }
    let x0: Vec<_> = (0..net.input_dim()).map(|_| random_rational(&mut rng, 9, 9)).collect();
    let target = net.forward(&x0)?;
    let start = Instant::now();
    let pre = compute_preimage(&net, &target, options)?;
    let wall_time = start.elapsed();
    log::info!("bench {}: {} branches in {:?}", shape_name(shape), pre.branches.len(), wall_time);
    Ok(BenchRow {
        shape: shape_name(shape),
        piecewise_width: width,
        omega_bound: pre.omega_bound,
        enumerated: pre.enumerated_count,
        feasible: pre.branches.len(),
        forks: pre.stats.forks,
        peak_constraints: pre.stats.peak_constraints,
        wall_time,
    })
}

pub fn bench(
    shapes: &[Vec<usize>],
    seed: u64,
    hidden: Activation,
    options: &EngineOptions,
) -> Result<Vec<BenchRow>, BenchError> {
    shapes.iter().map(|s| bench_shape(s, seed, hidden.clone(), options)).collect()
}

pub fn rows_to_text(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>6} {:>10} {:>9} {:>7} {:>8} {:>10}",
        "shape", "width", "enumerated", "feasible", "forks", "peak", "time_ms"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>10} {:>9} {:>7} {:>8} {:>10.3}",
            r.shape,
            r.piecewise_width,
            r.enumerated,
            r.feasible,
            r.forks,
            r.peak_constraints,
            r.wall_time.as_secs_f64() * 1000.0
        );
    }
    out
}
