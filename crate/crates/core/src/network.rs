//! Exact feed-forward networks: model-file ingestion, validation and forward
//! evaluation.
//!
//! Model file layout:
//!
//! ```json
//! {"input_dim": 2,
//!  "layers": [{"weights": [[1, 0], [0, "1/2"]], "biases": [0, 0.25],
//!              "activation": {"prelu": {"alpha": "1/10"}}}]}
//! ```
//!
//! Numbers may be JSON numbers (read from their decimal text, so `0.1` is
//! exactly `1/10`) or strings holding `p/q` or decimal literals.
//!
//! Output activations that are invertible scalar functions other than the
//! ones supported here (e.g. `tanh`) are handled outside the library: apply
//! the inverse to the target and declare the output layer `identity`.

use num_traits::{Signed, Zero};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::linsys::Matrix;
use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Activation {
    Identity,
    /// `αx + β`
    Linear {
        alpha: Rational,
        beta: Rational,
    },
    /// `x` if `x > 0`, else `αx`, with `α > 0`.
    PRelu {
        alpha: Rational,
    },
    Relu,
}

impl Activation {
    pub fn is_piecewise(&self) -> bool {
        matches!(self, Activation::PRelu { .. } | Activation::Relu)
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        match self {
            Activation::Identity => x.clone(),
            Activation::Linear { alpha, beta } => alpha * x + beta,
            Activation::PRelu { alpha } => {
                if x.is_positive() {
                    x.clone()
                } else {
                    alpha * x
                }
            }
            Activation::Relu => {
                if x.is_positive() {
                    x.clone()
                } else {
                    Rational::zero()
                }
            }
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Activation::Identity => json!("identity"),
            Activation::Relu => json!("relu"),
            Activation::PRelu { alpha } => json!({"prelu": {"alpha": format_rational(alpha)}}),
            Activation::Linear { alpha, beta } => {
                json!({"linear": {"alpha": format_rational(alpha), "beta": format_rational(beta)}})
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("dimension mismatch at {path}: expected {expected}, found {found}")]
    DimensionMismatch { path: String, expected: usize, found: usize },
    #[error("invalid activation at {path}: {message}")]
    InvalidActivation { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> NetworkError {
    NetworkError::Schema { path: path.into(), message: message.into() }
}

/// `activation(W·x + b)` with `W` of shape outputs × inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    weights: Matrix,
    biases: Vec<Rational>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<Rational>, activation: Activation) -> Result<Self, NetworkError> {
        Self::validated(weights, biases, activation, "layer")
    }

    fn validated(
        weights: Matrix,
        biases: Vec<Rational>,
        activation: Activation,
        path: &str,
    ) -> Result<Self, NetworkError> {
        if weights.is_empty() {
            return Err(schema(format!("{path}.weights"), "layer must have at least one unit"));
        }
        let cols = weights[0].len();
        if cols == 0 {
            return Err(schema(format!("{path}.weights[0]"), "layer must have at least one input"));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != cols {
                return Err(NetworkError::DimensionMismatch {
                    path: format!("{path}.weights[{i}]"),
                    expected: cols,
                    found: row.len(),
                });
            }
        }
        if biases.len() != weights.len() {
            return Err(NetworkError::DimensionMismatch {
                path: format!("{path}.biases"),
                expected: weights.len(),
                found: biases.len(),
            });
        }
        match &activation {
            Activation::Linear { alpha, .. } if alpha.is_zero() => {
                return Err(NetworkError::InvalidActivation {
                    path: format!("{path}.activation"),
                    message: "linear alpha must be nonzero".into(),
                });
            }
            Activation::PRelu { alpha } if !alpha.is_positive() => {
                return Err(NetworkError::InvalidActivation {
                    path: format!("{path}.activation"),
                    message: "prelu alpha must be positive (use relu for alpha = 0)".into(),
                });
            }
            _ => {}
        }
        Ok(Layer { weights, biases, activation })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[Rational] {
        &self.biases
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights[0].len()
    }

    pub fn with_activation(&self, activation: Activation) -> Result<Layer, NetworkError> {
        Layer::new(self.weights.clone(), self.biases.clone(), activation)
    }

    /// Pre-activation values `W·x + b`.
    pub fn pre_activation(&self, input: &[Rational]) -> Vec<Rational> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<Rational>() + b)
            .collect()
    }

    pub fn forward(&self, input: &[Rational]) -> Vec<Rational> {
        self.pre_activation(input).iter().map(|z| self.activation.apply(z)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self, NetworkError> {
        if input_dim == 0 {
            return Err(schema("input_dim", "must be positive"));
        }
        if layers.is_empty() {
            return Err(schema("layers", "network needs at least one layer"));
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.inputs() != width {
                return Err(NetworkError::DimensionMismatch {
                    path: format!("layers[{i}].weights"),
                    expected: width,
                    found: layer.inputs(),
                });
            }
            width = layer.outputs();
        }
        Ok(Network { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::outputs)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Sum of the widths of layers with piecewise activations.
    pub fn piecewise_width(&self) -> usize {
        self.layers.iter().filter(|l| l.activation.is_piecewise()).map(Layer::outputs).sum()
    }

    pub fn forward(&self, input: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
        if input.len() != self.input_dim {
            return Err(NetworkError::DimensionMismatch {
                path: "input".into(),
                expected: self.input_dim,
                found: input.len(),
            });
        }
        let mut values = input.to_vec();
        for layer in &self.layers {
            values = layer.forward(&values);
        }
        Ok(values)
    }

    /// Same weights with every layer's activation replaced.
    pub fn map_activations(&self, f: impl Fn(usize, &Activation) -> Activation) -> Result<Network, NetworkError> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| l.with_activation(f(i, &l.activation)))
            .collect::<Result<_, _>>()?;
        Network::new(self.input_dim, layers)
    }

    pub fn to_json(&self) -> Value {
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| {
                json!({
                    "weights": l.weights.iter().map(|r| r.iter().map(format_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "biases": l.biases.iter().map(format_rational).collect::<Vec<_>>(),
                    "activation": l.activation.to_json(),
                })
            })
            .collect();
        json!({"input_dim": self.input_dim, "layers": layers})
    }
}

/// Parses a UTF-8 JSON model document.
pub fn parse_model(document: &[u8]) -> Result<Network, NetworkError> {
    let text = std::str::from_utf8(document).map_err(|e| schema("$", format!("not UTF-8: {e}")))?;
    let root: Value = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
    let obj = root.as_object().ok_or_else(|| schema("$", "expected an object"))?;

    let input_dim = obj
        .get("input_dim")
        .ok_or_else(|| schema("input_dim", "missing"))?
        .as_u64()
        .ok_or_else(|| schema("input_dim", "expected a positive integer"))? as usize;
    let layers_value = obj.get("layers").ok_or_else(|| schema("layers", "missing"))?;
    let layers_array = layers_value.as_array().ok_or_else(|| schema("layers", "expected an array"))?;

    let mut layers = Vec::with_capacity(layers_array.len());
    let mut width = input_dim;
    for (i, lv) in layers_array.iter().enumerate() {
        let path = format!("layers[{i}]");
        let lo = lv.as_object().ok_or_else(|| schema(&path, "expected an object"))?;
        let weights_value = lo.get("weights").ok_or_else(|| schema(format!("{path}.weights"), "missing"))?;
        let rows =
            weights_value.as_array().ok_or_else(|| schema(format!("{path}.weights"), "expected an array of rows"))?;
        let mut weights = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let rpath = format!("{path}.weights[{r}]");
            let entries = row.as_array().ok_or_else(|| schema(&rpath, "expected an array"))?;
            weights.push(
                entries
                    .iter()
                    .enumerate()
                    .map(|(c, v)| number(v, &format!("{rpath}[{c}]")))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let biases_value = lo.get("biases").ok_or_else(|| schema(format!("{path}.biases"), "missing"))?;
        let biases = biases_value
            .as_array()
            .ok_or_else(|| schema(format!("{path}.biases"), "expected an array"))?
            .iter()
            .enumerate()
            .map(|(k, v)| number(v, &format!("{path}.biases[{k}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let activation = match lo.get("activation") {
            None => Activation::Identity,
            Some(v) => activation(v, &format!("{path}.activation"))?,
        };
        let layer = Layer::validated(weights, biases, activation, &path)?;
        if layer.inputs() != width {
            return Err(NetworkError::DimensionMismatch {
                path: format!("{path}.weights"),
                expected: width,
                found: layer.inputs(),
            });
        }
        width = layer.outputs();
        layers.push(layer);
    }
    Network::new(input_dim, layers)
}

fn number(value: &Value, path: &str) -> Result<Rational, NetworkError> {
    let text = match value {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(schema(path, "expected a number or a rational string")),
    };
    parse_rational(&text).map_err(|e| schema(path, e.to_string()))
}

fn params<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>, NetworkError> {
    value.as_object().ok_or_else(|| schema(path, "expected an object of parameters"))
}

fn activation(value: &Value, path: &str) -> Result<Activation, NetworkError> {
    match value {
        Value::String(s) => match s.as_str() {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            other => Err(schema(path, format!("unknown activation `{other}`"))),
        },
        Value::Object(map) if map.len() == 1 => {
            let (name, body) = map.iter().next().expect("one entry");
            let p = params(body, &format!("{path}.{name}"))?;
            let get = |key: &str, default: Option<Rational>| -> Result<Rational, NetworkError> {
                match (p.get(key), default) {
                    (Some(v), _) => number(v, &format!("{path}.{name}.{key}")),
                    (None, Some(d)) => Ok(d),
                    (None, None) => Err(schema(format!("{path}.{name}.{key}"), "missing")),
                }
            };
            match name.as_str() {
                "prelu" => Ok(Activation::PRelu { alpha: get("alpha", None)? }),
                "linear" => {
                    Ok(Activation::Linear { alpha: get("alpha", None)?, beta: get("beta", Some(Rational::zero()))? })
                }
                other => Err(schema(path, format!("unknown activation `{other}`"))),
            }
        }
        _ => Err(schema(path, "expected an activation name or a single-key object")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    #[test]
    fn identity_model() {
        let net = parse_model(
            br#"{"input_dim": 2, "layers": [{"weights": [[1,0],[0,1]], "biases": [0,0], "activation": "identity"}]}"#,
        )
        .unwrap();
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.output_dim(), 2);
        assert_eq!(net.forward(&[int(3), int(-1)]).unwrap(), vec![int(3), int(-1)]);
    }

    #[test]
    fn chain_violation() {
        let err = parse_model(
            br#"{"input_dim": 3, "layers": [
                {"weights": [[1,0,0],[0,1,0]], "biases": [0,0]},
                {"weights": [[1,0,0],[0,1,0]], "biases": [0,0]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err, NetworkError::DimensionMismatch { path: "layers[1].weights".into(), expected: 2, found: 3 });
    }

    #[test]
    fn decimals_are_exact() {
        let net = parse_model(br#"{"input_dim": 1, "layers": [{"weights": [[0.1]], "biases": ["-1/3"]}]}"#).unwrap();
        assert_eq!(net.layers()[0].weights()[0][0], frac(1, 10));
        assert_eq!(net.layers()[0].biases()[0], frac(-1, 3));
    }

    #[test]
    fn activation_validation() {
        let with = |act: &str| {
            parse_model(
                format!(r#"{{"input_dim": 1, "layers": [{{"weights": [[1]], "biases": [0], "activation": {act}}}]}}"#)
                    .as_bytes(),
            )
        };
        assert!(matches!(with(r#"{"linear": {"alpha": 0}}"#), Err(NetworkError::InvalidActivation { .. })));
        assert!(matches!(with(r#"{"prelu": {"alpha": "0"}}"#), Err(NetworkError::InvalidActivation { .. })));
        assert!(matches!(with(r#"{"prelu": {"alpha": -1}}"#), Err(NetworkError::InvalidActivation { .. })));
        assert!(matches!(with(r#""tanh""#), Err(NetworkError::Schema { .. })));
        assert_eq!(
            with(r#"{"linear": {"alpha": "2", "beta": "1/3"}}"#).unwrap().layers()[0].activation(),
            &Activation::Linear { alpha: int(2), beta: frac(1, 3) }
        );
    }

    #[test]
    fn schema_errors_carry_positions() {
        let err = parse_model(br#"{"input_dim": 1, "layers": [{"weights": [["x"]], "biases": [0]}]}"#).unwrap_err();
        assert!(matches!(err, NetworkError::Schema { ref path, .. } if path == "layers[0].weights[0][0]"), "{err}");
        assert!(matches!(parse_model(b"not json"), Err(NetworkError::Schema { .. })));
        let err = parse_model(br#"{"input_dim": 1, "layers": [{"weights": [[1]], "biases": [0, 1]}]}"#).unwrap_err();
        assert!(matches!(err, NetworkError::DimensionMismatch { expected: 1, found: 2, .. }));
    }

    #[test]
    fn forward_activations() {
        let relu = Network::new(
            1,
            vec![Layer::new(vec![vec![int(1)], vec![int(-1)]], vec![int(0), int(0)], Activation::Relu).unwrap()],
        )
        .unwrap();
        assert_eq!(relu.forward(&[int(2)]).unwrap(), vec![int(2), int(0)]);

        let prelu = Network::new(
            1,
            vec![Layer::new(vec![vec![int(1)]], vec![int(-1)], Activation::PRelu { alpha: frac(1, 10) }).unwrap()],
        )
        .unwrap();
        assert_eq!(prelu.forward(&[frac(1, 2)]).unwrap(), vec![frac(-1, 20)]);
        assert!(matches!(prelu.forward(&[int(1), int(2)]), Err(NetworkError::DimensionMismatch { .. })));
    }

    #[test]
    fn json_round_trip() {
        let net = parse_model(
            br#"{"input_dim": 2, "layers": [
                {"weights": [[1,"2/3"],[0.5,-1]], "biases": [0,1], "activation": {"prelu": {"alpha": "1/10"}}},
                {"weights": [[1,1]], "biases": [0], "activation": {"linear": {"alpha": 2, "beta": "1/3"}}}]}"#,
        )
        .unwrap();
        let text = net.to_json().to_string();
        assert_eq!(parse_model(text.as_bytes()).unwrap(), net);
    }
}
