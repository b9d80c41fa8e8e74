//! From-scratch classifiers over wavelet feature vectors, plus splitting,
//! standardization, evaluation and the four-way comparison report.

mod forest;
mod knn;
mod metrics;
mod mlp;
mod split;
mod standardize;
mod svm;

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::signal_io::{ChannelId, Command};
use crate::wavelet::{FeatureSchema, FeatureVector};

pub use forest::{fit_forest, ForestModel, ForestParams, Node};
pub use knn::{fit_knn, squared_distance, KnnModel, KnnParams};
pub use metrics::{percent, ConfusionMatrix, TABLE_ORDER};
pub use mlp::{fit_mlp, softmax, Layer, Mlp, MlpModel, MlpParams};
pub use split::{split_stratified, stratified_folds, Split};
pub use standardize::Standardizer;
pub use svm::{
    dual_objective, fit_svm, max_kkt_violation, solve_binary, BinaryMachine, BinarySolution, Gamma, Kernel, KernelKind,
    SvmModel, SvmParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Svm,
    Knn,
    Rf,
    Mlp,
}

impl ClassifierKind {
    /// Report order.
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Svm,
        ClassifierKind::Knn,
        ClassifierKind::Mlp,
        ClassifierKind::Rf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Knn => "knn",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Label used in the comparison report.
    pub fn display(self) -> &'static str {
        match self {
            ClassifierKind::Svm => "SVM",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Rf => "Random Forest",
            ClassifierKind::Mlp => "ANN",
        }
    }

    /// Published overall accuracy for this classifier.
    pub fn baseline(self) -> f64 {
        match self {
            ClassifierKind::Svm => 0.70,
            ClassifierKind::Knn => 0.55,
            ClassifierKind::Mlp => 0.50,
            ClassifierKind::Rf => 0.48,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "knn" => Ok(ClassifierKind::Knn),
            "rf" | "forest" | "random_forest" => Ok(ClassifierKind::Rf),
            "mlp" | "ann" => Ok(ClassifierKind::Mlp),
            other => Err(Error::invalid(format!(
                "unknown classifier `{other}` (expected svm, knn, rf or mlp)"
            ))),
        }
    }
}

/// Hyperparameters for every kind; each trainer reads its own block.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub svm: SvmParams,
    pub knn: KnnParams,
    pub rf: ForestParams,
    pub mlp: MlpParams,
}

/// Fitted classifier state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Svm(SvmModel),
    Knn(KnnModel),
    Rf(ForestModel),
    Mlp(MlpModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Svm(_) => ClassifierKind::Svm,
            Classifier::Knn(_) => ClassifierKind::Knn,
            Classifier::Rf(_) => ClassifierKind::Rf,
            Classifier::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    /// Prediction on an already standardized vector.
    pub fn predict(&self, z: &[f64]) -> (Command, f64) {
        match self {
            Classifier::Svm(m) => m.predict(z),
            Classifier::Knn(m) => m.predict(z),
            Classifier::Rf(m) => m.predict(z),
            Classifier::Mlp(m) => m.predict(z),
        }
    }
}

/// How and on what a model was trained.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainMeta {
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub train_fraction: f64,
    /// Trial ids held out for testing, ascending.
    pub test_trials: Vec<u64>,
    pub n_train: usize,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub params: ClassifierParams,
    pub standardizer: Standardizer,
    /// Feature layout; `None` for models trained directly on raw vectors.
    pub schema: Option<FeatureSchema>,
    pub schema_id: String,
    pub n_features: usize,
    /// Classes present at training time, in command order.
    pub labels: Vec<Command>,
    pub preprocess: PreprocessConfig,
    pub classifier: Classifier,
    pub train_meta: TrainMeta,
}

fn raw_schema_id(d: usize) -> String {
    format!("raw:{d}")
}

fn check_training_set(x: &[Vec<f64>], y: &[Command]) -> Result<usize> {
    let first = x.first().ok_or_else(|| Error::Empty("training set".into()))?;
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    let d = first.len();
    if d == 0 {
        return Err(Error::Shape("feature vectors are empty".into()));
    }
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training feature".into()));
        }
    }
    Ok(d)
}

/// Fit a standardizer on `x`, then the chosen classifier on the scaled data.
pub fn train(
    kind: ClassifierKind,
    x: &[Vec<f64>],
    y: &[Command],
    params: &ClassifierParams,
    seed: u64,
) -> Result<TrainedModel> {
    let d = check_training_set(x, y)?;
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.apply_all(x)?;
    let classifier = match kind {
        ClassifierKind::Svm => Classifier::Svm(fit_svm(&z, y, &params.svm)?),
        ClassifierKind::Knn => Classifier::Knn(fit_knn(&z, y, &params.knn)?),
        ClassifierKind::Rf => Classifier::Rf(fit_forest(&z, y, &params.rf, seed)?),
        ClassifierKind::Mlp => Classifier::Mlp(fit_mlp(&z, y, &params.mlp, seed)?),
    };
    Ok(TrainedModel {
        kind,
        params: params.clone(),
        standardizer,
        schema: None,
        schema_id: raw_schema_id(d),
        n_features: d,
        labels: svm::present_classes(y),
        preprocess: PreprocessConfig::default(),
        classifier,
        train_meta: TrainMeta {
            seed,
            n_train: x.len(),
            ..TrainMeta::default()
        },
    })
}

impl TrainedModel {
    /// Attach the feature layout the training vectors followed.
    pub fn bind_schema(mut self, schema: FeatureSchema) -> Result<Self> {
        if schema.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: schema.len(),
            });
        }
        self.schema_id = schema.id();
        self.schema = Some(schema);
        Ok(self)
    }

    pub fn selected_channels(&self) -> &[ChannelId] {
        self.schema.as_ref().map_or(&[], |s| s.channels.as_slice())
    }

    /// Predict from a feature vector; its schema must match the model's.
    pub fn predict(&self, features: &FeatureVector) -> Result<(Command, f64)> {
        if features.schema_id != self.schema_id {
            return Err(Error::Shape(format!(
                "feature schema `{}` does not match model schema `{}`",
                features.schema_id, self.schema_id
            )));
        }
        self.predict_values(&features.values)
    }

    /// Predict from bare values; only the length is checked.
    pub fn predict_values(&self, x: &[f64]) -> Result<(Command, f64)> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let z = self.standardizer.apply(x)?;
        Ok(self.classifier.predict(&z))
    }

    /// Confusion matrix over a labeled test set.
    pub fn evaluate(&self, x: &[Vec<f64>], y: &[Command]) -> Result<ConfusionMatrix> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!("{} feature rows but {} labels", x.len(), y.len())));
        }
        let mut m = ConfusionMatrix::new();
        for (xi, &yi) in x.iter().zip(y) {
            m.record(yi, self.predict_values(xi)?.0);
        }
        Ok(m)
    }

    pub fn to_text(&self) -> Result<String> {
        let body = serde_json::to_string(self).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let sum = hex::encode(Sha256::digest(body.as_bytes()));
        Ok(format!("{MODEL_MAGIC}\nsha256:{sum}\n{body}\n"))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parts = text.splitn(3, '\n');
        let magic = parts.next().unwrap_or_default().trim_end_matches('\r');
        if magic != MODEL_MAGIC {
            return Err(Error::ModelFormat(format!(
                "expected header `{MODEL_MAGIC}`, found `{}`",
                magic.chars().take(40).collect::<String>()
            )));
        }
        let sum_line = parts.next().unwrap_or_default().trim_end_matches('\r');
        let expected = sum_line
            .strip_prefix("sha256:")
            .ok_or_else(|| Error::ModelFormat("missing checksum line".into()))?;
        let body = parts.next().unwrap_or_default().trim_end_matches(['\n', '\r']);
        let found = hex::encode(Sha256::digest(body.as_bytes()));
        if found != expected {
            return Err(Error::ModelFormat(format!(
                "checksum mismatch: header says {expected}, content hashes to {found}"
            )));
        }
        serde_json::from_str(body).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub const MODEL_MAGIC: &str = "EEGCHAIR-MODEL v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub kind: ClassifierKind,
    pub accuracy: f64,
    pub baseline: f64,
    pub confusion: ConfusionMatrix,
}

/// Overall accuracy of every classifier on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub n_train: usize,
    pub n_test: usize,
}

impl ComparisonReport {
    pub fn accuracy(&self, kind: ClassifierKind) -> Option<f64> {
        self.rows.iter().find(|r| r.kind == kind).map(|r| r.accuracy)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Accuracy of different classifiers ({} train / {} test)",
            self.n_train, self.n_test
        );
        let _ = writeln!(out, "{:<16}{:<12}Published baseline", "Classifier", "Accuracy");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<16}{:<12}{}",
                r.kind.display(),
                percent(r.accuracy),
                percent(r.baseline)
            );
        }
        for r in &self.rows {
            let _ = writeln!(out, "\n[{}]", r.kind.display());
            out.push_str(&r.confusion.render_table());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("classifier,accuracy,published_baseline\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.kind.name(), r.accuracy, r.baseline);
        }
        out
    }
}

/// Train every kind on the same training data and score it on the same
/// test data. Returns the report and the fitted models in report order.
pub fn compare_classifiers(
    train_x: &[Vec<f64>],
    train_y: &[Command],
    test_x: &[Vec<f64>],
    test_y: &[Command],
    params: &ClassifierParams,
    seed: u64,
) -> Result<(ComparisonReport, Vec<TrainedModel>)> {
    if test_x.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let mut rows = Vec::new();
    let mut models = Vec::new();
    for kind in ClassifierKind::ALL {
        let model = train(kind, train_x, train_y, params, seed)?;
        let confusion = model.evaluate(test_x, test_y)?;
        rows.push(ComparisonRow {
            kind,
            accuracy: confusion.overall_accuracy(),
            baseline: kind.baseline(),
            confusion,
        });
        models.push(model);
    }
    Ok((
        ComparisonReport {
            rows,
            n_train: train_x.len(),
            n_test: test_x.len(),
        },
        models,
    ))
}

/// 5-fold search over C ∈ {0.1, 1, 10} and gamma ∈ {0.5, 1, 2} × auto.
/// Returns the best parameters (first in grid order on ties).
pub fn grid_search_svm(x: &[Vec<f64>], y: &[Command], base: &SvmParams, seed: u64) -> Result<SvmParams> {
    check_training_set(x, y)?;
    let folds = stratified_folds(y, 5, seed)?;
    let auto = Standardizer::fit(x)
        .and_then(|s| s.apply_all(x))
        .map(|z| Gamma::AUTO.resolve(&z))?;
    let mut best = (*base, -1.0);
    for c in [0.1, 1.0, 10.0] {
        for g in [0.5, 1.0, 2.0] {
            let p = SvmParams {
                c,
                gamma: Gamma::Value(g * auto),
                ..*base
            };
            let mut correct = 0usize;
            for f in 0..5 {
                let tr: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
                let te: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
                if te.is_empty() {
                    continue;
                }
                let tx: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
                let ty: Vec<Command> = tr.iter().map(|&i| y[i]).collect();
                let params = ClassifierParams {
                    svm: p,
                    ..ClassifierParams::default()
                };
                let m = train(ClassifierKind::Svm, &tx, &ty, &params, seed)?;
                for &i in &te {
                    if m.predict_values(&x[i])?.0 == y[i] {
                        correct += 1;
                    }
                }
            }
            let acc = correct as f64 / y.len() as f64;
            if acc > best.1 {
                best = (p, acc);
            }
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::FeatureMode;

    fn blobs() -> (Vec<Vec<f64>>, Vec<Command>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (k, c) in Command::ALL.iter().enumerate() {
            for j in 0..8 {
                let a = k as f64 * 10.0;
                x.push(vec![
                    a + (j % 3) as f64 * 0.3,
                    -a + (j / 3) as f64 * 0.2,
                    (j as f64).sin(),
                ]);
                y.push(*c);
            }
        }
        (x, y)
    }

    #[test]
    fn model_file_round_trip_and_tamper_detection() {
        let (x, y) = blobs();
        let m = train(ClassifierKind::Svm, &x, &y, &ClassifierParams::default(), 3).unwrap();
        let text = m.to_text().unwrap();
        let back = TrainedModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text().unwrap(), text);

        let tampered = text.replacen("\"c\":1.0", "\"c\":2.0", 1);
        assert_ne!(tampered, text);
        assert!(matches!(TrainedModel::from_text(&tampered), Err(Error::ModelFormat(_))));
        let wrong_version = text.replacen("v1", "v9", 1);
        assert!(matches!(
            TrainedModel::from_text(&wrong_version),
            Err(Error::ModelFormat(_))
        ));
    }

    #[test]
    fn every_kind_round_trips_and_fits_blobs() {
        let (x, y) = blobs();
        let params = ClassifierParams {
            knn: KnnParams { k: 3 },
            rf: ForestParams {
                n_trees: 10,
                ..ForestParams::default()
            },
            mlp: MlpParams {
                learning_rate: 0.1,
                ..MlpParams::default()
            },
            ..ClassifierParams::default()
        };
        for kind in ClassifierKind::ALL {
            let m = train(kind, &x, &y, &params, 1).unwrap();
            assert_eq!(m.evaluate(&x, &y).unwrap().overall_accuracy(), 1.0, "{kind}");
            assert_eq!(TrainedModel::from_text(&m.to_text().unwrap()).unwrap(), m);
        }
    }

    #[test]
    fn schema_is_enforced() {
        let (x, y) = blobs();
        let m = train(ClassifierKind::Knn, &x, &y, &ClassifierParams::default(), 0).unwrap();
        assert!(matches!(m.predict_values(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let fv = FeatureVector {
            values: x[0].clone(),
            schema_id: "other".into(),
        };
        assert!(m.predict(&fv).is_err());
        let ok = FeatureVector {
            values: x[0].clone(),
            schema_id: "raw:3".into(),
        };
        assert_eq!(m.predict(&ok).unwrap().0, Command::Left);
        let bad = FeatureSchema::new(vec![ChannelId::O1], FeatureMode::Details);
        assert!(m.bind_schema(bad).is_err());
    }

    #[test]
    fn report_schema_and_baseline_column() {
        let (x, y) = blobs();
        let params = ClassifierParams {
            knn: KnnParams { k: 3 },
            rf: ForestParams {
                n_trees: 5,
                ..ForestParams::default()
            },
            ..ClassifierParams::default()
        };
        let (r, models) = compare_classifiers(&x, &y, &x, &y, &params, 0).unwrap();
        assert_eq!(models.len(), 4);
        let kinds: Vec<ClassifierKind> = r.rows.iter().map(|row| row.kind).collect();
        assert_eq!(kinds, ClassifierKind::ALL.to_vec());
        assert!(r.rows.iter().all(|row| (0.0..=1.0).contains(&row.accuracy)));
        let text = r.render_text();
        for (name, base) in [("SVM", "70%"), ("KNN", "55%"), ("ANN", "50%"), ("Random Forest", "48%")] {
            assert!(text.lines().any(|l| l.starts_with(name) && l.ends_with(base)), "{name}");
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("classifier,accuracy,published_baseline\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ANN".parse::<ClassifierKind>().unwrap(), ClassifierKind::Mlp);
        assert_eq!("rf".parse::<ClassifierKind>().unwrap(), ClassifierKind::Rf);
        assert!("tree".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn grid_search_returns_grid_point() {
        let (x, y) = blobs();
        let p = grid_search_svm(&x, &y, &SvmParams::default(), 0).unwrap();
        assert!([0.1, 1.0, 10.0].contains(&p.c));
        assert!(matches!(p.gamma, Gamma::Value(_)));
    }
}
