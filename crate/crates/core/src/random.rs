//! Seeded generators for rationals, matrices and networks.

use rand::Rng;

use crate::linsys::Matrix;
use crate::network::{Activation, Layer, Network, NetworkError};
use crate::rational::{frac, Rational};

/// Uniform `p/q` with `|p| ≤ max_num` and `1 ≤ q ≤ max_den`.
pub fn random_rational<R: Rng + ?Sized>(rng: &mut R, max_num: i64, max_den: i64) -> Rational {
    let p = rng.gen_range(-max_num..=max_num);
    let q = rng.gen_range(1..=max_den.max(1));
    frac(p, q)
}

/// Like [`random_rational`] but never zero.
pub fn random_nonzero_rational<R: Rng + ?Sized>(rng: &mut R, max_num: i64, max_den: i64) -> Rational {
    loop {
        let r = random_rational(rng, max_num.max(1), max_den);
        if r != Rational::from_integer(0.into()) {
            return r;
        }
    }
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, max_num: i64, max_den: i64) -> Matrix {
    (0..rows).map(|_| (0..cols).map(|_| random_rational(rng, max_num, max_den)).collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    /// Layer widths from input to output, e.g. `[2, 3, 2]`.
    pub shape: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
    pub max_num: i64,
    pub max_den: i64,
}

impl NetworkSpec {
    pub fn new(shape: &[usize], hidden: Activation) -> Self {
        NetworkSpec { shape: shape.to_vec(), hidden, output: Activation::Identity, max_num: 9, max_den: 9 }
    }
}

/// Parses a shape such as `2-6-1`.
pub fn parse_shape(text: &str) -> Option<Vec<usize>> {
    let dims: Option<Vec<usize>> = text.split(['-', 'x', ',']).map(|d| d.trim().parse().ok()).collect();
    dims.filter(|d| d.len() >= 2 && d.iter().all(|&n| n > 0))
}

pub fn random_network<R: Rng + ?Sized>(rng: &mut R, spec: &NetworkSpec) -> Result<Network, NetworkError> {
    let layers = spec
        .shape
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i + 2 == spec.shape.len() { spec.output.clone() } else { spec.hidden.clone() };
            let weights = random_matrix(rng, w[1], w[0], spec.max_num, spec.max_den);
            let biases = (0..w[1]).map(|_| random_rational(rng, spec.max_num, spec.max_den)).collect();
            Layer::new(weights, biases, act)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Network::new(spec.shape[0], layers)
}
