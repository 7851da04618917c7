//! Base learners behind a single fit / predict-probability contract.

pub mod forest;
pub mod gbdt;
mod matrix;
pub mod platt;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{ForestModel, ForestParams, MaxFeatures};
pub use gbdt::{GbdtModel, GbdtParams};
pub use matrix::Matrix;
pub use svm::{SvmModel, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Gbdt,
    RandomForest,
    Svm,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Gbdt => "gbdt",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::Svm => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerParams {
    Gbdt(GbdtParams),
    RandomForest(ForestParams),
    Svm(SvmParams),
}

impl LearnerParams {
    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerParams::Gbdt(_) => LearnerKind::Gbdt,
            LearnerParams::RandomForest(_) => LearnerKind::RandomForest,
            LearnerParams::Svm(_) => LearnerKind::Svm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub params: LearnerParams,
    pub seed: u64,
    /// Reweight samples so both classes carry equal total weight.
    #[serde(default)]
    pub balanced: bool,
}

fn on_grid(v: f64, grid: &[f64]) -> bool {
    grid.iter()
        .any(|g| (v - g).abs() <= 1e-12 * g.abs().max(1.0))
}

fn on_int_grid(v: usize, grid: &[usize]) -> bool {
    grid.contains(&v)
}

impl LearnerSpec {
    pub fn new(params: LearnerParams, seed: u64) -> Self {
        Self {
            params,
            seed,
            balanced: false,
        }
    }

    pub fn kind(&self) -> LearnerKind {
        self.params.kind()
    }

    /// The Stage 1 ensemble members, in voting order.
    pub fn sse_members(seed: u64) -> [LearnerSpec; 3] {
        [
            LearnerSpec::new(LearnerParams::Gbdt(GbdtParams::sse()), seed),
            LearnerSpec::new(LearnerParams::RandomForest(ForestParams::sse()), seed),
            LearnerSpec::new(LearnerParams::Svm(SvmParams::sse()), seed),
        ]
    }

    /// Hyperparameters that fall outside the tuning grids the presets were
    /// selected from. An empty list means every value is on its grid.
    pub fn out_of_range(&self) -> Vec<&'static str> {
        let mut flags = Vec::new();
        match &self.params {
            LearnerParams::Gbdt(p) => {
                if !on_grid(p.learning_rate, &[0.01, 0.05, 0.1, 0.2]) {
                    flags.push("learning_rate");
                }
                if !on_int_grid(p.n_estimators, &[100, 200, 300, 400, 500]) {
                    flags.push("n_estimators");
                }
                if !on_int_grid(p.max_depth, &[3, 5, 7, 10]) {
                    flags.push("max_depth");
                }
                if !on_grid(p.subsample, &[0.6, 0.7, 0.8]) {
                    flags.push("subsample");
                }
                if !on_grid(p.reg_alpha, &[0.01, 0.05, 0.1]) {
                    flags.push("reg_alpha");
                }
                if !on_grid(p.reg_lambda, &[0.01, 0.05, 0.1]) {
                    flags.push("reg_lambda");
                }
            }
            LearnerParams::RandomForest(p) => {
                if !on_int_grid(p.max_depth, &[3, 5, 7, 10]) {
                    flags.push("max_depth");
                }
                if !on_int_grid(p.n_estimators, &[100, 200, 300, 400, 500]) {
                    flags.push("n_estimators");
                }
                if p.max_features == MaxFeatures::All {
                    flags.push("max_features");
                }
            }
            LearnerParams::Svm(p) => {
                let grid = [0.001, 0.01, 0.1, 1.0, 10.0];
                if !on_grid(p.c, &grid) {
                    flags.push("c");
                }
                if !on_grid(p.gamma, &grid) {
                    flags.push("gamma");
                }
            }
        }
        flags
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{}: {what}", self.kind().as_str())));
        match &self.params {
            LearnerParams::Gbdt(p) => {
                if !positive(p.learning_rate) || !positive(p.subsample) || p.subsample > 1.0 {
                    return bad("learning_rate must be > 0 and subsample in (0, 1]");
                }
                if p.reg_alpha < 0.0 || p.reg_lambda < 0.0 || p.min_child_weight < 0.0 {
                    return bad("regularization terms must be non-negative");
                }
                if p.n_estimators == 0 {
                    return bad("n_estimators must be positive");
                }
            }
            LearnerParams::RandomForest(p) => {
                if p.n_estimators == 0 {
                    return bad("n_estimators must be positive");
                }
            }
            LearnerParams::Svm(p) => {
                if !positive(p.c) || !positive(p.gamma) || !positive(p.tolerance) {
                    return bad("c, gamma and tolerance must be positive");
                }
            }
        }
        Ok(())
    }
}

/// Class probabilities for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub p_negative: f64,
    pub p_positive: f64,
}

impl ProbabilityRow {
    pub fn from_positive(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self {
            p_negative: 1.0 - p,
            p_positive: p,
        }
    }

    pub fn get(&self, positive: bool) -> f64 {
        if positive {
            self.p_positive
        } else {
            self.p_negative
        }
    }

    /// Positive iff strictly more likely than not.
    pub fn predicted(&self) -> bool {
        self.p_positive > self.p_negative
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
enum Fitted {
    Gbdt(GbdtModel),
    RandomForest(ForestModel),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedLearner {
    spec: LearnerSpec,
    feature_dim: usize,
    fitted: Fitted,
}

fn class_weights(y: &[bool], balanced: bool) -> Vec<f64> {
    if !balanced {
        return vec![1.0; y.len()];
    }
    let n = y.len() as f64;
    let pos = y.iter().filter(|v| **v).count() as f64;
    let neg = n - pos;
    y.iter()
        .map(|&v| n / (2.0 * if v { pos } else { neg }))
        .collect()
}

impl TrainedLearner {
    pub fn fit(spec: &LearnerSpec, x: &Matrix, y: &[bool]) -> Result<Self> {
        spec.validate()?;
        if x.rows() != y.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        if y.len() < 2 {
            return Err(Error::Fit(format!(
                "need at least 2 samples, got {}",
                y.len()
            )));
        }
        let pos = y.iter().filter(|v| **v).count();
        if pos == 0 || pos == y.len() {
            return Err(Error::Fit(format!(
                "training labels are single-class ({} samples, all {})",
                y.len(),
                if pos == 0 { "negative" } else { "positive" }
            )));
        }
        if x.cols() == 0 {
            return Err(Error::Shape("feature matrix has no columns".into()));
        }
        if x.iter_rows().any(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Fit(
                "feature matrix contains non-finite values".into(),
            ));
        }
        let w = class_weights(y, spec.balanced);
        let fitted = match &spec.params {
            LearnerParams::Gbdt(p) => Fitted::Gbdt(GbdtModel::fit(x, y, &w, p, spec.seed)),
            LearnerParams::RandomForest(p) => {
                Fitted::RandomForest(ForestModel::fit(x, y, &w, p, spec.seed))
            }
            LearnerParams::Svm(p) => Fitted::Svm(SvmModel::fit(x, y, &w, p, spec.seed)),
        };
        log::debug!(
            "fitted {} on {} rows x {} cols ({} positive)",
            spec.kind().as_str(),
            x.rows(),
            x.cols(),
            pos
        );
        Ok(Self {
            spec: *spec,
            feature_dim: x.cols(),
            fitted,
        })
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<ProbabilityRow> {
        if x.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.feature_dim,
                x.len()
            )));
        }
        let p = match &self.fitted {
            Fitted::Gbdt(m) => m.predict_positive(x),
            Fitted::RandomForest(m) => m.predict_positive(x),
            Fitted::Svm(m) => m.predict_positive(x),
        };
        Ok(ProbabilityRow::from_positive(p))
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<ProbabilityRow>> {
        if x.cols() != self.feature_dim && x.rows() > 0 {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.feature_dim,
                x.cols()
            )));
        }
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("learner blob: {e}")))
    }
}

/// False for NaN as well as for non-positive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_points() -> (Matrix, Vec<bool>) {
        (
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![false, true],
        )
    }

    fn all_specs() -> [LearnerSpec; 3] {
        LearnerSpec::sse_members(3)
    }

    #[test]
    fn separable_pair_is_fitted_by_every_kind() {
        let (x, y) = two_points();
        for spec in all_specs() {
            let m = TrainedLearner::fit(&spec, &x, &y).unwrap();
            let rows = m.predict_proba(&x).unwrap();
            let pred: Vec<bool> = rows.iter().map(|r| r.predicted()).collect();
            assert_eq!(pred, y, "{:?}", spec.kind());
        }
    }

    #[test]
    fn single_class_is_a_fit_error() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        for spec in all_specs() {
            let err = TrainedLearner::fit(&spec, &x, &[true, true]).unwrap_err();
            assert!(matches!(err, Error::Fit(_)));
        }
    }

    #[test]
    fn wrong_width_is_a_shape_error() {
        let (x, y) = two_points();
        let m = TrainedLearner::fit(&all_specs()[0], &x, &y).unwrap();
        assert!(matches!(m.predict_row(&[1.0]), Err(Error::Shape(_))));
        let bad = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(matches!(
            TrainedLearner::fit(&all_specs()[0], &bad, &y),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn presets_sit_on_their_grids() {
        for spec in all_specs() {
            assert!(spec.out_of_range().is_empty(), "{:?}", spec.kind());
        }
        for p in [
            GbdtParams::drug(),
            GbdtParams::weapon(),
            GbdtParams::credential(),
        ] {
            assert!(LearnerSpec::new(LearnerParams::Gbdt(p), 0)
                .out_of_range()
                .is_empty());
        }
        let mut p = SvmParams::sse();
        p.c = 0.5;
        assert_eq!(
            LearnerSpec::new(LearnerParams::Svm(p), 0).out_of_range(),
            vec!["c"]
        );
    }

    #[test]
    fn blob_round_trips_exactly() {
        let (x, y) = two_points();
        for spec in all_specs() {
            let m = TrainedLearner::fit(&spec, &x, &y).unwrap();
            let back = TrainedLearner::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn balanced_weights_equalize_class_mass() {
        let y = [true, false, false, false];
        let w = class_weights(&y, true);
        assert_eq!(w[0], 2.0);
        assert!((w[1..].iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }
}
