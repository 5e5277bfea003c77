//! Accuracy criteria and the score-based model ranking.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("observed has {observed} values, predicted has {predicted}")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("need at least {0} values")]
    TooShort(usize),
    #[error("observed values are all equal; R² is undefined")]
    ConstantObserved,
    #[error("observed value at {0} is zero; MAPE is undefined")]
    ZeroObserved(usize),
    #[error("ranking needs at least two models, got {0}")]
    TooFewModels(usize),
    #[error("model `{model}`: {what}")]
    BadReport { model: String, what: String },
    #[error("malformed table: {0}")]
    Table(String),
}

fn check(observed: &[f64], predicted: &[f64], min_len: usize) -> Result<(), MetricsError> {
    if observed.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    if observed.len() < min_len {
        return Err(MetricsError::TooShort(min_len));
    }
    Ok(())
}

pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(observed, predicted, 1)?;
    let sse: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p) * (o - p))
        .sum();
    Ok((sse / observed.len() as f64).sqrt())
}

pub fn mae(observed: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(observed, predicted, 1)?;
    let sae: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).abs()).sum();
    Ok(sae / observed.len() as f64)
}

/// Coefficient of determination, `1 - SS_res / SS_tot`. Negative for
/// predictors worse than the observed mean.
pub fn r2(observed: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(observed, predicted, 2)?;
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - mean) * (o - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ConstantObserved);
    }
    let ss_res: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (p - o) * (p - o))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean absolute percentage error, in percent.
pub fn mape(observed: &[f64], predicted: &[f64]) -> Result<f64, MetricsError> {
    check(observed, predicted, 1)?;
    if let Some(i) = observed.iter().position(|&o| o == 0.0) {
        return Err(MetricsError::ZeroObserved(i));
    }
    let s: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| ((o - p) / o).abs())
        .sum();
    Ok(100.0 * s / observed.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Test => "test",
        })
    }
}

/// Accuracy of one model on one phase, in heating-load units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub phase: Phase,
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
    /// Percent. Informational only; not used in ranking.
    pub mape: f64,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(phase: Phase, observed: &[f64], predicted: &[f64]) -> Result<Self, MetricsError> {
        Ok(MetricReport {
            phase,
            rmse: rmse(observed, predicted)?,
            mae: mae(observed, predicted)?,
            r2: r2(observed, predicted)?,
            mape: mape(observed, predicted)?,
            n: observed.len(),
        })
    }

    /// Report carrying only the three ranked criteria (e.g. parsed from a table).
    pub fn from_triple(phase: Phase, rmse: f64, mae: f64, r2: f64) -> Self {
        MetricReport {
            phase,
            rmse,
            mae,
            r2,
            mape: f64::NAN,
            n: 0,
        }
    }

    /// True when every pair of fields agrees within `tol`.
    pub fn approx_eq(&self, other: &MetricReport, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol || (a.is_nan() && b.is_nan());
        self.phase == other.phase
            && self.n == other.n
            && close(self.rmse, other.rmse)
            && close(self.mae, other.mae)
            && close(self.r2, other.r2)
            && close(self.mape, other.mape)
    }
}

/// Train and test accuracy of one named model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReports {
    pub model: String,
    pub train: MetricReport,
    pub test: MetricReport,
}

/// Criterion scores of one model in one phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseScores {
    pub rmse: u32,
    pub mae: u32,
    pub r2: u32,
    pub overall: u32,
    pub rank: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRow {
    pub model: String,
    pub train: PhaseScores,
    pub test: PhaseScores,
}

/// Rows follow the input model order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTable {
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn row(&self, model: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// Score-table layout: criterion scores, OS and rank per phase.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record([
            "Model", "Train RMSE", "Train MAE", "Train R2", "Train OS", "Train Rank", "Test RMSE",
            "Test MAE", "Test R2", "Test OS", "Test Rank",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.model.clone()];
            for s in [r.train, r.test] {
                rec.extend([s.rmse, s.mae, s.r2, s.overall, s.rank].map(|v| v.to_string()));
            }
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Scores a criterion: each model gets `M - (#models strictly better)`, so the
/// best gets M and ties share the higher score.
fn criterion_scores(values: &[f64], higher_is_better: bool) -> Vec<u32> {
    let m = values.len() as u32;
    values
        .iter()
        .map(|&v| {
            let better = values
                .iter()
                .filter(|&&o| if higher_is_better { o > v } else { o < v })
                .count() as u32;
            m - better
        })
        .collect()
}

/// Competition ranking by descending overall score: 1 + #models with a higher score.
fn ranks(overall: &[u32]) -> Vec<u32> {
    overall
        .iter()
        .map(|&s| 1 + overall.iter().filter(|&&o| o > s).count() as u32)
        .collect()
}

fn phase_scores(reports: &[&MetricReport]) -> Vec<PhaseScores> {
    let rmse = criterion_scores(&reports.iter().map(|r| r.rmse).collect::<Vec<_>>(), false);
    let mae = criterion_scores(&reports.iter().map(|r| r.mae).collect::<Vec<_>>(), false);
    let r2 = criterion_scores(&reports.iter().map(|r| r.r2).collect::<Vec<_>>(), true);
    let overall: Vec<u32> = (0..reports.len()).map(|i| rmse[i] + mae[i] + r2[i]).collect();
    let rank = ranks(&overall);
    (0..reports.len())
        .map(|i| PhaseScores {
            rmse: rmse[i],
            mae: mae[i],
            r2: r2[i],
            overall: overall[i],
            rank: rank[i],
        })
        .collect()
}

/// Per phase and criterion, the best model scores M down to 1 for the worst;
/// the three scores sum to the overall score that sets the rank.
pub fn score_models(models: &[ModelReports]) -> Result<RankTable, MetricsError> {
    if models.len() < 2 {
        return Err(MetricsError::TooFewModels(models.len()));
    }
    let mut names = HashSet::new();
    for m in models {
        let bad = |what: String| MetricsError::BadReport {
            model: m.model.clone(),
            what,
        };
        if !names.insert(m.model.as_str()) {
            return Err(bad("duplicate model name".into()));
        }
        for (report, phase) in [(&m.train, Phase::Train), (&m.test, Phase::Test)] {
            if report.phase != phase {
                return Err(bad(format!("missing {phase} report")));
            }
            if ![report.rmse, report.mae, report.r2].iter().all(|v| v.is_finite()) {
                return Err(bad(format!("non-finite {phase} metric")));
            }
        }
    }
    let train = phase_scores(&models.iter().map(|m| &m.train).collect::<Vec<_>>());
    let test = phase_scores(&models.iter().map(|m| &m.test).collect::<Vec<_>>());
    Ok(RankTable {
        rows: models
            .iter()
            .zip(train.into_iter().zip(test))
            .map(|(m, (train, test))| RankRow {
                model: m.model.clone(),
                train,
                test,
            })
            .collect(),
    })
}

/// Metric-table layout: model, then RMSE/MAE/R² for train and test, four decimals.
pub fn reports_to_csv(models: &[ModelReports]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "Model", "Train RMSE", "Train MAE", "Train R2", "Test RMSE", "Test MAE", "Test R2",
    ])
    .expect("in-memory write");
    for m in models {
        let mut rec = vec![m.model.clone()];
        for r in [&m.train, &m.test] {
            rec.extend([r.rmse, r.mae, r.r2].map(|v| format!("{v:.4}")));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Parses the metric-table layout written by [`reports_to_csv`].
pub fn reports_from_csv(text: &str) -> Result<Vec<ModelReports>, MetricsError> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| MetricsError::Table(e.to_string()))?;
        if rec.len() != 7 {
            return Err(MetricsError::Table(format!(
                "row {}: expected 7 columns, found {}",
                i + 1,
                rec.len()
            )));
        }
        let num = |j: usize| {
            rec[j].parse::<f64>().map_err(|_| {
                MetricsError::Table(format!("row {}: column {} is not a number", i + 1, j + 1))
            })
        };
        out.push(ModelReports {
            model: rec[0].to_string(),
            train: MetricReport::from_triple(Phase::Train, num(1)?, num(2)?, num(3)?),
            test: MetricReport::from_triple(Phase::Test, num(4)?, num(5)?, num(6)?),
        });
    }
    Ok(out)
}
