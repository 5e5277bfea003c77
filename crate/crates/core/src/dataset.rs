//! Loading, validation, splitting and scaling of the building energy
//! records (UCI energy-efficiency / ENB2012 layout).

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Number of input features per record.
pub const FEATURE_COUNT: usize = 8;

/// Records in the published corpus.
pub const CANONICAL_ROWS: usize = 768;

/// Train fraction used throughout the experiments.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Seed of the canonical 70/30 partition shared by every experiment.
pub const DEFAULT_SPLIT_SEED: u64 = 20_190_925;

/// Feature names in column order (X1..X8).
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "relative_compactness",
    "surface_area",
    "wall_area",
    "roof_area",
    "overall_height",
    "orientation",
    "glazing_area",
    "glazing_area_distribution",
];

const HEADER: [&str; 9] = ["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "Y1"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: expected X1..X8,Y1[,Y2], found {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("row {row}: field `{field}` = {value} violates {rule}")]
    Invariant {
        row: usize,
        field: &'static str,
        value: f64,
        rule: &'static str,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("split of {n} rows at fraction {fraction} leaves one side empty")]
    DegenerateSplit { n: usize, fraction: f64 },
    #[error("feature `{0}` is constant over the fitted rows")]
    ConstantFeature(&'static str),
    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
}

/// One building record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub relative_compactness: f64,
    pub surface_area: f64,
    pub wall_area: f64,
    pub roof_area: f64,
    pub overall_height: f64,
    pub orientation: f64,
    pub glazing_area: f64,
    pub glazing_area_distribution: f64,
    /// Heating load, kWh/m².
    pub heating_load: f64,
}

impl Sample {
    /// Builds a sample from features in X1..X8 order plus the target.
    pub fn from_features(features: [f64; FEATURE_COUNT], heating_load: f64) -> Self {
        Sample {
            relative_compactness: features[0],
            surface_area: features[1],
            wall_area: features[2],
            roof_area: features[3],
            overall_height: features[4],
            orientation: features[5],
            glazing_area: features[6],
            glazing_area_distribution: features[7],
            heating_load,
        }
    }

    /// Features in X1..X8 order (RC, SA, WA, RA, OH, orientation, GA, GAD).
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.relative_compactness,
            self.surface_area,
            self.wall_area,
            self.roof_area,
            self.overall_height,
            self.orientation,
            self.glazing_area,
            self.glazing_area_distribution,
        ]
    }

    /// Checks the record invariants; `row` is only used for error messages.
    pub fn validate(&self, row: usize) -> Result<(), DatasetError> {
        validate_features(&self.features(), row)?;
        if !self.heating_load.is_finite() {
            return Err(DatasetError::Invariant {
                row,
                field: "heating_load",
                value: self.heating_load,
                rule: "finite",
            });
        }
        Ok(())
    }
}

/// Validates a feature vector without a target (used for prediction inputs).
pub fn validate_features(features: &[f64; FEATURE_COUNT], row: usize) -> Result<(), DatasetError> {
    let fail = |i: usize, rule: &'static str| DatasetError::Invariant {
        row,
        field: FEATURE_NAMES[i],
        value: features[i],
        rule,
    };
    for (i, &v) in features.iter().enumerate() {
        if !v.is_finite() {
            return Err(fail(i, "finite"));
        }
    }
    for i in 0..5 {
        if features[i] <= 0.0 {
            return Err(fail(i, "> 0"));
        }
    }
    let orientation = features[5];
    if orientation.fract() != 0.0 || !(2.0..=5.0).contains(&orientation) {
        return Err(fail(5, "integer in 2..=5"));
    }
    if !(0.0..=0.4).contains(&features[6]) {
        return Err(fail(6, "range [0, 0.4]"));
    }
    let gad = features[7];
    if gad.fract() != 0.0 || !(0.0..=5.0).contains(&gad) {
        return Err(fail(7, "integer in 0..=5"));
    }
    Ok(())
}

/// Records in load order plus provenance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    /// `<path>#sha256:<hex>` of the file the samples were read from.
    pub source: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, source: impl Into<String>) -> Self {
        Dataset {
            samples,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Hex SHA-256 recorded in `source`, if any.
    pub fn checksum(&self) -> Option<&str> {
        self.source.rsplit_once("#sha256:").map(|(_, h)| h)
    }

    /// Copies the rows at `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<Vec<Sample>, DatasetError> {
        indices
            .iter()
            .map(|&i| {
                self.samples.get(i).copied().ok_or(DatasetError::IndexOutOfRange {
                    index: i,
                    len: self.samples.len(),
                })
            })
            .collect()
    }
}

/// Reads an ENB2012-style CSV: header `X1..X8,Y1` with an optional ignored `Y2`.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let samples = parse_csv(&bytes)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    Ok(Dataset::new(samples, format!("{}#sha256:{digest}", path.display())))
}

/// Parses CSV bytes; data rows are numbered from 1 in error messages.
pub fn parse_csv(bytes: &[u8]) -> Result<Vec<Sample>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DatasetError::MalformedRow {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let header_ok = (header.len() == 9 || (header.len() == 10 && header[9] == "Y2"))
        && header.iter().zip(HEADER).all(|(h, e)| h == e);
    if !header_ok {
        return Err(DatasetError::Header(header));
    }
    let width = header.len();

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(DatasetError::MalformedRow {
                row,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let mut values = [0.0; 9];
        for (j, slot) in values.iter_mut().enumerate() {
            let cell = &record[j];
            *slot = cell.parse::<f64>().map_err(|_| DatasetError::MalformedRow {
                row,
                message: format!("column {} is not a number: {cell:?}", HEADER[j]),
            })?;
        }
        let mut features = [0.0; FEATURE_COUNT];
        features.copy_from_slice(&values[..FEATURE_COUNT]);
        let sample = Sample::from_features(features, values[8]);
        sample.validate(row)?;
        samples.push(sample);
    }
    Ok(samples)
}

/// A train/test partition of dataset row indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSplit {
    pub seed: u64,
    pub train_fraction: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.train_indices.len() + self.test_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when train and test are disjoint and together cover `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Shuffles `0..n` with a seeded ChaCha stream; the first `round(n * fraction)`
/// indices train, the rest test.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<DataSplit, DatasetError> {
    split_len(dataset.len(), train_fraction, seed)
}

pub fn split_len(n: usize, train_fraction: f64, seed: u64) -> Result<DataSplit, DatasetError> {
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Fraction(train_fraction));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(DatasetError::DegenerateSplit {
            n,
            fraction: train_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let test_indices = order.split_off(n_train);
    Ok(DataSplit {
        seed,
        train_fraction,
        train_indices: order,
        test_indices,
    })
}

/// Min/max of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn forward(&self, x: f64) -> f64 {
        2.0 * (x - self.min) / (self.max - self.min) - 1.0
    }

    fn inverse(&self, y: f64) -> f64 {
        (y + 1.0) * 0.5 * (self.max - self.min) + self.min
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

/// Affine min-max map of every feature and the target onto [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub features: [Range; FEATURE_COUNT],
    pub target: Range,
}

/// Output of [`Scaler::apply`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledSample {
    pub features: [f64; FEATURE_COUNT],
    pub target: f64,
    /// Set when any input or the target fell outside the fitted range.
    pub extrapolated: bool,
}

impl Scaler {
    /// Fits on the given rows. The harness only ever passes training rows here.
    pub fn fit(samples: &[Sample]) -> Result<Scaler, DatasetError> {
        if samples.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut features = [Range {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }; FEATURE_COUNT];
        let mut target = features[0];
        for s in samples {
            for (r, v) in features.iter_mut().zip(s.features()) {
                r.min = r.min.min(v);
                r.max = r.max.max(v);
            }
            target.min = target.min.min(s.heating_load);
            target.max = target.max.max(s.heating_load);
        }
        for (i, r) in features.iter().enumerate() {
            if r.max <= r.min {
                return Err(DatasetError::ConstantFeature(FEATURE_NAMES[i]));
            }
        }
        if target.max <= target.min {
            return Err(DatasetError::ConstantFeature("heating_load"));
        }
        Ok(Scaler { features, target })
    }

    pub fn scale_features(&self, features: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for (o, (r, &x)) in out.iter_mut().zip(self.features.iter().zip(features)) {
            *o = r.forward(x);
        }
        out
    }

    pub fn unscale_features(&self, scaled: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        for (o, (r, &y)) in out.iter_mut().zip(self.features.iter().zip(scaled)) {
            *o = r.inverse(y);
        }
        out
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        self.target.forward(y)
    }

    pub fn unscale_target(&self, y: f64) -> f64 {
        self.target.inverse(y)
    }

    /// Scales one record. Out-of-range values extrapolate linearly and are flagged.
    pub fn apply(&self, sample: &Sample) -> ScaledSample {
        let raw = sample.features();
        let extrapolated = !self.target.contains(sample.heating_load)
            || self.features.iter().zip(raw).any(|(r, x)| !r.contains(x));
        ScaledSample {
            features: self.scale_features(&raw),
            target: self.scale_target(sample.heating_load),
            extrapolated,
        }
    }

    /// Scales a batch of records into the flat layout the network consumes.
    pub fn transform(&self, samples: &[Sample]) -> ScaledSet {
        let mut inputs = Vec::with_capacity(samples.len());
        let mut targets = Vec::with_capacity(samples.len());
        for s in samples {
            let scaled = self.apply(s);
            inputs.push(scaled.features);
            targets.push(scaled.target);
        }
        ScaledSet { inputs, targets }
    }
}

/// Scaled inputs and targets, row-aligned.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScaledSet {
    pub inputs: Vec<[f64; FEATURE_COUNT]>,
    pub targets: Vec<f64>,
}

impl ScaledSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.features();
        write!(
            f,
            "RC={} SA={} WA={} RA={} OH={} O={} GA={} GAD={} HL={}",
            x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], self.heating_load
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER_LINE: &str = "X1,X2,X3,X4,X5,X6,X7,X8,Y1,Y2\n";

    fn row(ga: f64) -> String {
        format!("0.98,514.5,294,110.25,7,2,{ga},0,15.55,21.33\n")
    }

    fn toy(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64;
                let features = [
                    0.6 + 0.01 * t,
                    500.0 + t,
                    250.0 + t,
                    110.0 + t,
                    3.5 + t,
                    2.0 + (i % 4) as f64,
                    0.1 * (i % 5) as f64,
                    (i % 6) as f64,
                ];
                Sample::from_features(features, 10.0 + t)
            })
            .collect();
        Dataset::new(samples, "toy")
    }

    #[test]
    fn header_only_is_an_empty_dataset() {
        let samples = parse_csv(HEADER_LINE.as_bytes()).unwrap();
        assert!(samples.is_empty());
        let ds = Dataset::new(samples, "empty");
        assert!(matches!(split(&ds, 0.7, 1), Err(DatasetError::Empty)));
    }

    #[test]
    fn y2_column_is_optional() {
        let text = "X1,X2,X3,X4,X5,X6,X7,X8,Y1\n0.98,514.5,294,110.25,7,2,0,0,15.55\n";
        let samples = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].heating_load, 15.55);
        assert_eq!(samples[0].surface_area, 514.5);
    }

    #[test]
    fn glazing_area_out_of_range_names_the_row() {
        let text = format!("{HEADER_LINE}{}{}", row(0.1), row(0.7));
        let err = parse_csv(text.as_bytes()).unwrap_err();
        match err {
            DatasetError::Invariant { row, field, .. } => {
                assert_eq!(row, 2);
                assert_eq!(field, "glazing_area");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn non_numeric_and_short_rows_are_rejected() {
        let text = format!("{HEADER_LINE}0.98,abc,294,110.25,7,2,0,0,15.55,21.33\n");
        let err = parse_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedRow { row: 1, .. }), "{err}");
        let text = format!("{HEADER_LINE}{}0.98,514.5,294\n", row(0.0));
        let err = parse_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedRow { row: 2, .. }), "{err}");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = parse_csv(b"a,b,c\n1,2,3\n").unwrap_err();
        assert!(matches!(err, DatasetError::Header(_)));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            load_csv("/definitely/not/here.csv"),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn split_rounds_and_partitions() {
        let s = split_len(768, 0.7, 3).unwrap();
        assert_eq!(s.train_indices.len(), 538);
        assert_eq!(s.test_indices.len(), 230);
        assert!(s.is_partition_of(768));
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let ds = toy(10);
        let a = split(&ds, 0.5, 11).unwrap();
        let b = split(&ds, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let c = split(&ds, 0.5, 12).unwrap();
        assert!(a.is_partition_of(10) && c.is_partition_of(10));
        let perm = |s: &DataSplit| [s.train_indices.clone(), s.test_indices.clone()].concat();
        assert_ne!(perm(&a), perm(&c));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(split_len(10, f, 0), Err(DatasetError::Fraction(_))));
        }
        assert!(matches!(
            split_len(1, 0.5, 0),
            Err(DatasetError::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn scaler_maps_endpoints_and_midpoint() {
        let lo = Sample::from_features([0.5, 500.0, 200.0, 100.0, 3.0, 2.0, 0.0, 0.0], 0.0);
        let hi = Sample::from_features([1.0, 800.0, 400.0, 200.0, 7.0, 5.0, 0.4, 5.0], 10.0);
        let scaler = Scaler::fit(&[lo, hi]).unwrap();
        let a = scaler.apply(&lo);
        let b = scaler.apply(&hi);
        assert!(a.features.iter().all(|&v| v == -1.0) && a.target == -1.0);
        assert!(b.features.iter().all(|&v| v == 1.0) && b.target == 1.0);
        assert!(!a.extrapolated && !b.extrapolated);
        assert_eq!(scaler.scale_target(5.0), 0.0);
        assert_eq!(scaler.unscale_target(0.0), 5.0);
    }

    #[test]
    fn scaler_extrapolates_and_flags() {
        let lo = Sample::from_features([0.5, 500.0, 200.0, 100.0, 3.0, 2.0, 0.0, 0.0], 0.0);
        let hi = Sample::from_features([1.0, 800.0, 400.0, 200.0, 7.0, 5.0, 0.4, 5.0], 10.0);
        let scaler = Scaler::fit(&[lo, hi]).unwrap();
        let mut beyond = hi;
        // 10 % of the range past the max: 2 * 1.1 - 1 = 1.2
        beyond.surface_area = 800.0 + 0.1 * 300.0;
        let s = scaler.apply(&beyond);
        assert!(s.extrapolated);
        assert!((s.features[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_is_named() {
        let a = Sample::from_features([0.5, 500.0, 200.0, 100.0, 3.0, 2.0, 0.0, 0.0], 0.0);
        let mut b = a;
        b.relative_compactness = 0.9;
        b.surface_area = 600.0;
        b.roof_area = 120.0;
        b.overall_height = 7.0;
        b.orientation = 3.0;
        b.glazing_area = 0.1;
        b.glazing_area_distribution = 1.0;
        b.heating_load = 3.0;
        match Scaler::fit(&[a, b]) {
            Err(DatasetError::ConstantFeature(name)) => assert_eq!(name, "wall_area"),
            other => panic!("expected constant wall_area, got {other:?}"),
        }
    }

    #[test]
    fn fit_ignores_rows_it_is_not_given() {
        let ds = toy(20);
        let s = split(&ds, 0.7, 5).unwrap();
        let train = ds.select(&s.train_indices).unwrap();
        let before = Scaler::fit(&train).unwrap();
        let mut mutated = ds.clone();
        let t = s.test_indices[0];
        mutated.samples[t].surface_area = 1.0e6;
        mutated.samples[t].heating_load = -1.0e6;
        let after = Scaler::fit(&mutated.select(&s.train_indices).unwrap()).unwrap();
        assert_eq!(before, after);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scaler_round_trip(
                lo in -1.0e3..1.0e3f64,
                width in 1.0e-3..1.0e3f64,
                t in 0.0..=1.0f64,
            ) {
                let r = Range { min: lo, max: lo + width };
                let x = lo + t * width;
                let back = r.inverse(r.forward(x));
                prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0), "{x} -> {back}");
            }

            #[test]
            fn split_partitions_any_seed(n in 2usize..200, seed in any::<u64>(), f in 0.05..0.95f64) {
                match split_len(n, f, seed) {
                    Ok(s) => {
                        prop_assert!(s.is_partition_of(n));
                        prop_assert_eq!(s.clone(), split_len(n, f, seed).unwrap());
                    }
                    Err(DatasetError::DegenerateSplit { .. }) => {}
                    Err(e) => prop_assert!(false, "{e}"),
                }
            }
        }
    }
}
