//! The single-hidden-layer perceptron used as the heating-load model.
//!
//! Weights travel through the optimizers as one flat vector. The canonical
//! order is: hidden weights row-major (one row of 8 input weights per hidden
//! neuron), hidden biases, output weights, output bias. With five hidden
//! neurons that is 40 + 5 + 5 + 1 = 51 values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Sample, ScaledSet, Scaler, FEATURE_COUNT};

/// Hidden neurons in the reference topology.
pub const HIDDEN: usize = 5;

/// Flat length of a weight vector for the reference topology.
pub const WEIGHT_COUNT: usize = weight_count(HIDDEN);

/// Beyond this magnitude tansig is within 1e-17 of ±1.
const SATURATION: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("weight vector has {found} entries, topology needs {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("weight {index} is not finite")]
    NonFinite { index: usize },
    #[error("training set is empty")]
    EmptySet,
    #[error("hidden layer must have at least one neuron")]
    NoHidden,
}

pub const fn weight_count(hidden: usize) -> usize {
    FEATURE_COUNT * hidden + hidden + hidden + 1
}

/// `2 / (1 + e^(-2x)) - 1`, evaluated on `|x|` so the result is exactly odd
/// and the exponential never overflows.
#[inline]
pub fn tansig(x: f64) -> f64 {
    let a = x.abs();
    let y = if a > SATURATION {
        1.0
    } else {
        2.0 / (1.0 + (-2.0 * a).exp()) - 1.0
    };
    y.copysign(x)
}

/// Network shape. Only the hidden width varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl Default for Topology {
    fn default() -> Self {
        Topology::with_hidden(HIDDEN)
    }
}

impl Topology {
    pub fn with_hidden(hidden: usize) -> Self {
        Topology {
            inputs: FEATURE_COUNT,
            hidden,
            outputs: 1,
        }
    }

    pub fn weight_count(&self) -> usize {
        weight_count(self.hidden)
    }
}

/// Flat weight vector; the individual every optimizer manipulates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(hidden: usize) -> Self {
        WeightVector(vec![0.0; weight_count(hidden)])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

/// Structured view of the network weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// One row of input weights per hidden neuron.
    pub hidden_weights: Vec<[f64; FEATURE_COUNT]>,
    pub hidden_biases: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl MlpParams {
    pub fn hidden(&self) -> usize {
        self.hidden_biases.len()
    }

    pub fn topology(&self) -> Topology {
        Topology::with_hidden(self.hidden())
    }

    pub fn encode(&self) -> WeightVector {
        encode(self)
    }

    /// Runs the network on one scaled input row.
    pub fn forward(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let mut out = self.output_bias;
        for ((row, b), w) in self
            .hidden_weights
            .iter()
            .zip(&self.hidden_biases)
            .zip(&self.output_weights)
        {
            let pre = row.iter().zip(x).fold(*b, |acc, (wi, xi)| acc + wi * xi);
            out += w * tansig(pre);
        }
        out
    }
}

/// Splits a flat vector into the structured parameters.
pub fn decode(v: &[f64], hidden: usize) -> Result<MlpParams, MlpError> {
    if hidden == 0 {
        return Err(MlpError::NoHidden);
    }
    let expected = weight_count(hidden);
    if v.len() != expected {
        return Err(MlpError::WrongLength {
            expected,
            found: v.len(),
        });
    }
    let (w1, rest) = v.split_at(FEATURE_COUNT * hidden);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let hidden_weights = w1
        .chunks_exact(FEATURE_COUNT)
        .map(|c| {
            let mut row = [0.0; FEATURE_COUNT];
            row.copy_from_slice(c);
            row
        })
        .collect();
    Ok(MlpParams {
        hidden_weights,
        hidden_biases: b1.to_vec(),
        output_weights: w2.to_vec(),
        output_bias: b2[0],
    })
}

pub fn encode(p: &MlpParams) -> WeightVector {
    let mut v = Vec::with_capacity(weight_count(p.hidden()));
    for row in &p.hidden_weights {
        v.extend_from_slice(row);
    }
    v.extend_from_slice(&p.hidden_biases);
    v.extend_from_slice(&p.output_weights);
    v.push(p.output_bias);
    WeightVector(v)
}

/// Forward pass straight off the flat vector. `w.len()` must equal
/// `weight_count(hidden)`.
#[inline]
pub fn forward_flat(w: &[f64], hidden: usize, x: &[f64; FEATURE_COUNT]) -> f64 {
    let bias_at = FEATURE_COUNT * hidden;
    let out_at = bias_at + hidden;
    let mut out = w[out_at + hidden];
    for j in 0..hidden {
        let row = &w[j * FEATURE_COUNT..(j + 1) * FEATURE_COUNT];
        let mut pre = w[bias_at + j];
        for k in 0..FEATURE_COUNT {
            pre += row[k] * x[k];
        }
        out += w[out_at + j] * tansig(pre);
    }
    out
}

/// Forward pass that also writes `d output / d w` into `grad`
/// (same layout and length as `w`).
pub fn forward_with_gradient(
    w: &[f64],
    hidden: usize,
    x: &[f64; FEATURE_COUNT],
    grad: &mut [f64],
) -> f64 {
    let bias_at = FEATURE_COUNT * hidden;
    let out_at = bias_at + hidden;
    let mut out = w[out_at + hidden];
    for j in 0..hidden {
        let row = &w[j * FEATURE_COUNT..(j + 1) * FEATURE_COUNT];
        let mut pre = w[bias_at + j];
        for k in 0..FEATURE_COUNT {
            pre += row[k] * x[k];
        }
        let z = tansig(pre);
        let v = w[out_at + j];
        out += v * z;
        // d tansig / d pre = 1 - z^2
        let delta = v * (1.0 - z * z);
        for k in 0..FEATURE_COUNT {
            grad[j * FEATURE_COUNT + k] = delta * x[k];
        }
        grad[bias_at + j] = delta;
        grad[out_at + j] = z;
    }
    grad[out_at + hidden] = 1.0;
    out
}

/// Mean squared error of the flat-vector network over a scaled set.
pub fn mse_objective(v: &[f64], hidden: usize, set: &ScaledSet) -> Result<f64, MlpError> {
    if set.is_empty() {
        return Err(MlpError::EmptySet);
    }
    let expected = weight_count(hidden);
    if v.len() != expected {
        return Err(MlpError::WrongLength {
            expected,
            found: v.len(),
        });
    }
    Ok(mse_unchecked(v, hidden, set))
}

/// Sequential row-order sum; callers guarantee a non-empty set and matching length.
#[inline]
pub(crate) fn mse_unchecked(v: &[f64], hidden: usize, set: &ScaledSet) -> f64 {
    let mut sum = 0.0;
    for (x, t) in set.inputs.iter().zip(&set.targets) {
        let e = forward_flat(v, hidden, x) - t;
        sum += e * e;
    }
    sum / set.len() as f64
}

/// Where a trained model came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub training_mse: Option<f64>,
}

/// Network weights bundled with the scaler they were trained against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub topology: Topology,
    pub weights: WeightVector,
    pub scaler: Scaler,
    pub provenance: Provenance,
}

impl TrainedModel {
    pub fn new(
        params: &MlpParams,
        scaler: Scaler,
        provenance: Provenance,
    ) -> Result<Self, MlpError> {
        let model = TrainedModel {
            topology: params.topology(),
            weights: params.encode(),
            scaler,
            provenance,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_weights(
        weights: WeightVector,
        hidden: usize,
        scaler: Scaler,
        provenance: Provenance,
    ) -> Result<Self, MlpError> {
        let model = TrainedModel {
            topology: Topology::with_hidden(hidden),
            weights,
            scaler,
            provenance,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        if self.topology.hidden == 0 {
            return Err(MlpError::NoHidden);
        }
        let expected = self.topology.weight_count();
        if self.weights.len() != expected {
            return Err(MlpError::WrongLength {
                expected,
                found: self.weights.len(),
            });
        }
        if let Some(index) = self.weights.0.iter().position(|w| !w.is_finite()) {
            return Err(MlpError::NonFinite { index });
        }
        Ok(())
    }

    pub fn params(&self) -> MlpParams {
        decode(&self.weights.0, self.topology.hidden).expect("validated on construction")
    }

    /// Network output in scaled target units.
    pub fn forward_scaled(&self, scaled: &[f64; FEATURE_COUNT]) -> f64 {
        forward_flat(&self.weights.0, self.topology.hidden, scaled)
    }

    /// Heating load in kWh/m² for raw features (X1..X8 order).
    pub fn predict_features(&self, features: &[f64; FEATURE_COUNT]) -> f64 {
        let scaled = self.scaler.scale_features(features);
        self.scaler.unscale_target(self.forward_scaled(&scaled))
    }

    pub fn predict(&self, sample: &Sample) -> f64 {
        self.predict_features(&sample.features())
    }

    pub fn predict_all(&self, samples: &[Sample]) -> Vec<f64> {
        samples.iter().map(|s| self.predict(s)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let model: TrainedModel = serde_json::from_str(text)?;
        model
            .validate()
            .map_err(|e| serde::de::Error::custom(e.to_string()))?;
        Ok(model)
    }
}

/// Output-layer weights of the published BBO-trained network.
pub const REFERENCE_OUTPUT_WEIGHTS: [f64; HIDDEN] = [0.9076, 0.0050, -0.3986, -0.4754, -0.2692];

pub const REFERENCE_OUTPUT_BIAS: f64 = 0.0283;

/// Hidden-layer weights of the published network, one row per hidden neuron;
/// columns are RC, SA, WA, RA, OH, orientation, GA, GAD.
pub const REFERENCE_HIDDEN_WEIGHTS: [[f64; FEATURE_COUNT]; HIDDEN] = [
    [-0.8459, 0.2944, -0.7562, 0.1225, -0.2456, 0.3266, -1.0020, 0.6090],
    [-0.2863, 0.4134, -0.1649, -0.8857, 0.8828, -0.9327, 0.1703, 0.4336],
    [0.7094, -0.5079, -0.6916, 0.6346, -0.3142, -0.0794, -0.4306, 0.9990],
    [-1.1274, -0.0470, -0.1336, 0.6061, 0.0406, 0.3088, -0.8939, -0.6135],
    [0.1514, 0.2735, -0.8389, 0.1982, -0.6465, -1.0777, 0.2336, 0.6753],
];

pub const REFERENCE_HIDDEN_BIASES: [f64; HIDDEN] = [1.7120, 0.8560, 0.0000, -0.8560, 1.7120];

/// The published BBO-trained network, paired with `scaler`.
pub fn reference_params() -> MlpParams {
    MlpParams {
        hidden_weights: REFERENCE_HIDDEN_WEIGHTS.to_vec(),
        hidden_biases: REFERENCE_HIDDEN_BIASES.to_vec(),
        output_weights: REFERENCE_OUTPUT_WEIGHTS.to_vec(),
        output_bias: REFERENCE_OUTPUT_BIAS,
    }
}

pub fn reference_bbo_predictor(scaler: Scaler) -> TrainedModel {
    let provenance = Provenance {
        algorithm: "bbo-reference".into(),
        config: serde_json::json!({ "source": "published BBO-MLP constants" }),
        seed: None,
        training_mse: None,
    };
    TrainedModel::new(&reference_params(), scaler, provenance).expect("constants are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Range;

    fn unit_scaler() -> Scaler {
        let r = Range { min: -1.0, max: 1.0 };
        Scaler {
            features: [r; FEATURE_COUNT],
            target: Range { min: 0.0, max: 10.0 },
        }
    }

    #[test]
    fn tansig_values() {
        assert_eq!(tansig(0.0), 0.0);
        // 2 / (1 + e^-2) - 1 = tanh(1)
        assert!((tansig(1.0) - 0.761_594_155_955_764_9).abs() < 1e-15);
        for x in [0.3, 1.7, 5.0, 19.9, 25.0] {
            assert_eq!(tansig(-x), -tansig(x));
        }
        assert_eq!(tansig(1e3), 1.0);
        assert_eq!(tansig(-1e6), -1.0);
        assert!((tansig(20.0) - 20f64.tanh()).abs() < 1e-17);
    }

    #[test]
    fn decode_places_hidden_biases_after_40_weights() {
        let v: Vec<f64> = (0..WEIGHT_COUNT).map(|i| i as f64).collect();
        let p = decode(&v, HIDDEN).unwrap();
        assert_eq!(p.hidden_biases, vec![40.0, 41.0, 42.0, 43.0, 44.0]);
        assert_eq!(p.hidden_weights[1][0], 8.0);
        assert_eq!(p.output_weights, vec![45.0, 46.0, 47.0, 48.0, 49.0]);
        assert_eq!(p.output_bias, 50.0);
        assert_eq!(encode(&p).0, v);
    }

    #[test]
    fn decode_zeros_and_wrong_length() {
        let p = decode(&[0.0; WEIGHT_COUNT], HIDDEN).unwrap();
        assert!(p.hidden_weights.iter().flatten().all(|&w| w == 0.0));
        assert_eq!(p.output_bias, 0.0);
        assert_eq!(
            decode(&[0.0; 50], HIDDEN),
            Err(MlpError::WrongLength {
                expected: 51,
                found: 50
            })
        );
    }

    #[test]
    fn forward_constant_networks() {
        let mut w = vec![0.0; WEIGHT_COUNT];
        w[50] = 0.5;
        let x = [0.3, -0.2, 0.9, 1.0, -1.0, 0.0, 0.5, -0.7];
        assert_eq!(forward_flat(&w, HIDDEN, &x), 0.5);

        let mut w = vec![0.0; WEIGHT_COUNT];
        w[45..50].fill(1.0);
        assert_eq!(forward_flat(&w, HIDDEN, &x), 0.0);
    }

    #[test]
    fn structured_and_flat_forward_agree() {
        let p = reference_params();
        let w = p.encode();
        let x = [0.1, -0.4, 0.2, 0.9, -1.0, 0.33, 0.0, 1.0];
        assert_eq!(p.forward(&x), forward_flat(&w.0, HIDDEN, &x));
    }

    #[test]
    fn mse_two_rows() {
        let set = ScaledSet {
            inputs: vec![[0.0; FEATURE_COUNT]; 2],
            targets: vec![-1.0, 1.0],
        };
        let w = vec![0.0; WEIGHT_COUNT];
        assert_eq!(mse_objective(&w, HIDDEN, &set).unwrap(), 1.0);
        assert_eq!(
            mse_objective(&w, HIDDEN, &ScaledSet::default()),
            Err(MlpError::EmptySet)
        );
    }

    #[test]
    fn mse_zero_on_perfect_fit() {
        let p = reference_params();
        let inputs: Vec<_> = (0..7)
            .map(|i| {
                let t = i as f64 / 7.0;
                [t, -t, t * t, 0.5, -0.5, t - 0.5, 0.1, 0.9]
            })
            .collect();
        let targets = inputs.iter().map(|x| p.forward(x)).collect();
        let set = ScaledSet { inputs, targets };
        assert_eq!(mse_objective(&p.encode().0, HIDDEN, &set).unwrap(), 0.0);
    }

    #[test]
    fn gradient_output_bias_column_is_one() {
        let w = vec![0.0; WEIGHT_COUNT];
        let mut g = vec![f64::NAN; WEIGHT_COUNT];
        forward_with_gradient(&w, HIDDEN, &[0.2; FEATURE_COUNT], &mut g);
        assert_eq!(g[50], 1.0);
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn reference_constants() {
        let m = reference_bbo_predictor(unit_scaler());
        let p = m.params();
        assert_eq!(p.output_weights[0], 0.9076);
        assert_eq!(p.hidden_biases, vec![1.7120, 0.8560, 0.0000, -0.8560, 1.7120]);
        assert_eq!(p.hidden_weights[0][6], -1.0020);
        assert_eq!(p.output_bias, 0.0283);
    }

    #[test]
    fn predict_inverts_target_scaling() {
        let zero = TrainedModel::from_weights(
            WeightVector::zeros(HIDDEN),
            HIDDEN,
            unit_scaler(),
            Provenance {
                algorithm: "zero".into(),
                config: serde_json::Value::Null,
                seed: None,
                training_mse: None,
            },
        )
        .unwrap();
        let s = Sample::from_features([0.7, 600.0, 300.0, 150.0, 3.5, 3.0, 0.1, 2.0], 20.0);
        assert_eq!(zero.predict(&s), 5.0);
        assert_eq!(zero.predict(&s), zero.predict(&s));
    }

    #[test]
    fn model_json_round_trip_is_exact() {
        let mut w: Vec<f64> = (0..WEIGHT_COUNT).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        w[7] = std::f64::consts::PI * 1e-7;
        let m = TrainedModel::from_weights(
            WeightVector(w),
            HIDDEN,
            unit_scaler(),
            Provenance {
                algorithm: "test".into(),
                config: serde_json::json!({"pop": 3}),
                seed: Some(9),
                training_mse: Some(0.125),
            },
        )
        .unwrap();
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_model_json_is_rejected() {
        let m = reference_bbo_predictor(unit_scaler());
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        v["weights"].as_array_mut().unwrap().pop();
        assert!(TrainedModel::from_json(&v.to_string()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn codec_is_a_bijection(v in proptest::collection::vec(-10.0..10.0f64, WEIGHT_COUNT)) {
                let p = decode(&v, HIDDEN).unwrap();
                prop_assert_eq!(encode(&p).0, v);
            }

            #[test]
            fn tansig_bounded(x in -1.0e6..1.0e6f64) {
                let y = tansig(x);
                prop_assert!(y.is_finite() && (-1.0..=1.0).contains(&y));
                prop_assert_eq!(tansig(-x), -y);
            }

            #[test]
            fn forward_is_lipschitz_in_each_input(
                w in proptest::collection::vec(-3.0..3.0f64, WEIGHT_COUNT),
                x in proptest::array::uniform8(-1.0..1.0f64),
                k in 0usize..FEATURE_COUNT,
                delta in -0.5..0.5f64,
            ) {
                let p = decode(&w, HIDDEN).unwrap();
                let mut y = x;
                y[k] += delta;
                let l1: f64 = p.output_weights.iter().map(|v| v.abs()).sum();
                let max_row = p
                    .hidden_weights
                    .iter()
                    .flat_map(|r| r.iter())
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                let bound = l1 * max_row * delta.abs();
                let change = (p.forward(&y) - p.forward(&x)).abs();
                prop_assert!(change <= bound + 1e-12, "{change} > {bound}");
            }
        }
    }
}
