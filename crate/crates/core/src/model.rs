//! Classifier families behind one enum, hyperparameter parsing, and the
//! versioned JSON model envelope.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Rasa, Scaler};
use crate::classifiers::{
    gnb_fit, knn_fit, logreg_fit, Classifier, Dataset, GaussianNbModel, KnnModel, KnnParams,
    LogRegModel, LogRegParams, ModelError,
};
use crate::ensemble::{forest_fit, mlp_fit, ForestModel, ForestParams, MlpModel, MlpParams};
use crate::store::StoreConfig;
use crate::svm::{ovo_train, SvmModel, SvmParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Knn,
    NaiveBayes,
    Logreg,
    Svm,
    Forest,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Knn,
        Family::NaiveBayes,
        Family::Logreg,
        Family::Svm,
        Family::Forest,
        Family::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Knn => "knn",
            Family::NaiveBayes => "naive_bayes",
            Family::Logreg => "logreg",
            Family::Svm => "svm",
            Family::Forest => "forest",
            Family::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ParamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "knn" => Ok(Family::Knn),
            "naive_bayes" | "gnb" | "nb" => Ok(Family::NaiveBayes),
            "logreg" | "logistic" => Ok(Family::Logreg),
            "svm" => Ok(Family::Svm),
            "forest" | "random_forest" | "rf" => Ok(Family::Forest),
            "mlp" | "ann" => Ok(Family::Mlp),
            other => Err(ParamError::new("family", format!("unknown family {other:?}"))),
        }
    }
}

/// A bad hyperparameter, naming the offending field.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ParamError {
    pub field: String,
    pub message: String,
}

impl ParamError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum FamilyParams {
    Knn(KnnParams),
    NaiveBayes,
    Logreg(LogRegParams),
    Svm(SvmParams),
    Forest(ForestParams),
    Mlp(MlpParams),
}

fn parse_num<T: FromStr>(field: &str, value: &str) -> Result<T, ParamError> {
    value
        .trim()
        .parse()
        .map_err(|_| ParamError::new(field, format!("cannot parse {value:?}")))
}

fn parse_with<T, E: fmt::Display>(
    field: &str,
    value: &str,
    f: impl FnOnce(&str) -> Result<T, E>,
) -> Result<T, ParamError> {
    f(value.trim()).map_err(|e| ParamError::new(field, e.to_string()))
}

impl FamilyParams {
    pub fn defaults(family: Family) -> Self {
        match family {
            Family::Knn => FamilyParams::Knn(KnnParams::default()),
            Family::NaiveBayes => FamilyParams::NaiveBayes,
            Family::Logreg => FamilyParams::Logreg(LogRegParams::default()),
            Family::Svm => FamilyParams::Svm(SvmParams::default()),
            Family::Forest => FamilyParams::Forest(ForestParams::default()),
            Family::Mlp => FamilyParams::Mlp(MlpParams::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            FamilyParams::Knn(_) => Family::Knn,
            FamilyParams::NaiveBayes => Family::NaiveBayes,
            FamilyParams::Logreg(_) => Family::Logreg,
            FamilyParams::Svm(_) => Family::Svm,
            FamilyParams::Forest(_) => Family::Forest,
            FamilyParams::Mlp(_) => Family::Mlp,
        }
    }

    /// Tunable knobs of the family; used to prefer simpler models on ties.
    pub fn hyperparameter_count(&self) -> usize {
        match self {
            FamilyParams::Knn(_) => 3,
            FamilyParams::NaiveBayes => 0,
            FamilyParams::Logreg(_) => 2,
            FamilyParams::Svm(_) => 2,
            FamilyParams::Forest(_) => 6,
            FamilyParams::Mlp(_) => 4,
        }
    }

    pub fn is_knn_single_neighbour(&self) -> bool {
        matches!(self, FamilyParams::Knn(p) if p.k == 1)
    }

    /// Sets the random seed of seeded families; no-op elsewhere.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            FamilyParams::Forest(p) => p.seed = seed,
            FamilyParams::Mlp(p) => p.seed = seed,
            _ => {}
        }
        self
    }

    /// Applies one `key=value` assignment. Keys are case-insensitive.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        let key_lc = key.trim().to_ascii_lowercase();
        let k = key_lc.as_str();
        let family = self.family();
        let unknown = || Err(ParamError::new(k, format!("not a parameter of {family}")));
        match self {
            FamilyParams::Knn(p) => match k {
                "k" | "n_neighbors" => p.k = parse_num(k, value)?,
                "metric" => p.metric = parse_with(k, value, str::parse)?,
                "weights" => p.weights = parse_with(k, value, str::parse)?,
                _ => return unknown(),
            },
            FamilyParams::NaiveBayes => return unknown(),
            FamilyParams::Logreg(p) => match k {
                "max_iter" => p.max_iter = parse_num(k, value)?,
                "learning_rate" | "lr" => p.learning_rate = parse_num(k, value)?,
                _ => return unknown(),
            },
            FamilyParams::Svm(p) => match k {
                "c" => p.c = parse_num(k, value)?,
                "gamma" => p.gamma = parse_num(k, value)?,
                "tol" => p.tol = parse_num(k, value)?,
                "max_iter" => p.max_iter = parse_num(k, value)?,
                "kernel" if value.trim().eq_ignore_ascii_case("rbf") => {}
                "kernel" => return Err(ParamError::new(k, "only the rbf kernel is supported")),
                _ => return unknown(),
            },
            FamilyParams::Forest(p) => match k {
                "n_estimators" => p.n_estimators = parse_num(k, value)?,
                "criterion" => p.criterion = parse_with(k, value, str::parse)?,
                "max_depth" => {
                    p.max_depth = if value.trim().eq_ignore_ascii_case("none") {
                        None
                    } else {
                        Some(parse_num(k, value)?)
                    }
                }
                "max_features" => p.max_features = parse_num(k, value)?,
                "min_samples_leaf" => p.min_samples_leaf = parse_num(k, value)?,
                "min_samples_split" => p.min_samples_split = parse_num(k, value)?,
                "bootstrap" => p.bootstrap = parse_num(k, value)?,
                "seed" => p.seed = parse_num(k, value)?,
                _ => return unknown(),
            },
            FamilyParams::Mlp(p) => match k {
                "hidden" => {
                    let sizes: Vec<usize> = value
                        .split(['x', ';', '/'])
                        .map(|s| parse_num(k, s))
                        .collect::<Result<_, _>>()?;
                    p.hidden = sizes.try_into().map_err(|v: Vec<usize>| {
                        ParamError::new(k, format!("need exactly 4 hidden sizes, got {}", v.len()))
                    })?;
                }
                "epochs" => p.epochs = parse_num(k, value)?,
                "batch_size" => p.batch_size = parse_num(k, value)?,
                "learning_rate" | "lr" => p.learning_rate = parse_num(k, value)?,
                "seed" => p.seed = parse_num(k, value)?,
                _ => return unknown(),
            },
        }
        Ok(())
    }

    /// Range checks that need no data.
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ParamError::new(field, format!("must be positive, got {v}")))
            }
        };
        let at_least = |field: &str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(ParamError::new(field, format!("must be at least {min}, got {v}")))
            }
        };
        match self {
            FamilyParams::Knn(p) => at_least("k", p.k, 1),
            FamilyParams::NaiveBayes => Ok(()),
            FamilyParams::Logreg(p) => {
                at_least("max_iter", p.max_iter, 1)?;
                positive("learning_rate", p.learning_rate)
            }
            FamilyParams::Svm(p) => {
                positive("C", p.c)?;
                positive("gamma", p.gamma)?;
                positive("tol", p.tol)?;
                at_least("max_iter", p.max_iter, 1)
            }
            FamilyParams::Forest(p) => {
                at_least("n_estimators", p.n_estimators, 1)?;
                if !(p.max_features > 0.0 && p.max_features <= 1.0) {
                    return Err(ParamError::new(
                        "max_features",
                        format!("must lie in (0, 1], got {}", p.max_features),
                    ));
                }
                if let Some(d) = p.max_depth {
                    at_least("max_depth", d, 1)?;
                }
                at_least("min_samples_leaf", p.min_samples_leaf, 1)?;
                at_least("min_samples_split", p.min_samples_split, 2)
            }
            FamilyParams::Mlp(p) => {
                for &h in &p.hidden {
                    at_least("hidden", h, 1)?;
                }
                at_least("epochs", p.epochs, 1)?;
                at_least("batch_size", p.batch_size, 1)?;
                positive("learning_rate", p.learning_rate)
            }
        }
    }

    pub fn fit(&self, data: &Dataset) -> Result<TrainedModel, ModelError> {
        Ok(match self {
            FamilyParams::Knn(p) => TrainedModel::Knn(knn_fit(data, *p)?),
            FamilyParams::NaiveBayes => TrainedModel::NaiveBayes(gnb_fit(data)?),
            FamilyParams::Logreg(p) => TrainedModel::Logreg(logreg_fit(data, *p)?),
            FamilyParams::Svm(p) => TrainedModel::Svm(ovo_train(data, *p)?),
            FamilyParams::Forest(p) => TrainedModel::Forest(forest_fit(data, *p)?),
            FamilyParams::Mlp(p) => TrainedModel::Mlp(mlp_fit(data, p.clone())?),
        })
    }
}

impl fmt::Display for FamilyParams {
    /// Compact `key=value` list in the style of the result tables.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyParams::Knn(p) => write!(
                f,
                "n_neighbors={},metric={},weights={}",
                p.k, p.metric, p.weights
            ),
            FamilyParams::NaiveBayes => f.write_str("-"),
            FamilyParams::Logreg(p) => {
                write!(f, "max_iter={},learning_rate={}", p.max_iter, p.learning_rate)
            }
            FamilyParams::Svm(p) => write!(f, "kernel=rbf,C={},gamma={}", p.c, p.gamma),
            FamilyParams::Forest(p) => {
                let depth = p.max_depth.map_or("none".to_string(), |d| d.to_string());
                write!(
                    f,
                    "criterion={},max_depth={},max_features={},min_samples_leaf={},min_samples_split={},n_estimators={}",
                    p.criterion, depth, p.max_features, p.min_samples_leaf, p.min_samples_split, p.n_estimators
                )
            }
            FamilyParams::Mlp(p) => write!(
                f,
                "hidden={}x{}x{}x{},epochs={},batch_size={},learning_rate={}",
                p.hidden[0], p.hidden[1], p.hidden[2], p.hidden[3], p.epochs, p.batch_size, p.learning_rate
            ),
        }
    }
}

/// Any fitted classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Knn(KnnModel),
    NaiveBayes(GaussianNbModel),
    Logreg(LogRegModel),
    Svm(SvmModel),
    Forest(ForestModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            TrainedModel::Knn(m) => m,
            TrainedModel::NaiveBayes(m) => m,
            TrainedModel::Logreg(m) => m,
            TrainedModel::Svm(m) => m,
            TrainedModel::Forest(m) => m,
            TrainedModel::Mlp(m) => m,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            TrainedModel::Knn(_) => Family::Knn,
            TrainedModel::NaiveBayes(_) => Family::NaiveBayes,
            TrainedModel::Logreg(_) => Family::Logreg,
            TrainedModel::Svm(_) => Family::Svm,
            TrainedModel::Forest(_) => Family::Forest,
            TrainedModel::Mlp(_) => Family::Mlp,
        }
    }

    /// Scores laid out over all six rasas; classes unseen in training score 0.
    pub fn rasa_scores(&self, x: &[f64]) -> [f64; Rasa::COUNT] {
        let mut out = [0.0; Rasa::COUNT];
        for (c, s) in self.classes().iter().zip(self.predict_scores(x)) {
            out[c.index()] = s;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl Classifier for TrainedModel {
    fn classes(&self) -> &[Rasa] {
        self.inner().classes()
    }

    fn predict_scores(&self, x: &[f64]) -> Vec<f64> {
        self.inner().predict_scores(x)
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    family: Family,
    class_order: Vec<Rasa>,
    params: serde_json::Value,
}

impl Serialize for TrainedModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::Error;
        let params = match self {
            TrainedModel::Knn(m) => serde_json::to_value(m),
            TrainedModel::NaiveBayes(m) => serde_json::to_value(m),
            TrainedModel::Logreg(m) => serde_json::to_value(m),
            TrainedModel::Svm(m) => serde_json::to_value(m),
            TrainedModel::Forest(m) => serde_json::to_value(m),
            TrainedModel::Mlp(m) => serde_json::to_value(m),
        }
        .map_err(S::Error::custom)?;
        Envelope {
            format_version: FORMAT_VERSION,
            family: self.family(),
            class_order: self.classes().to_vec(),
            params,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrainedModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let env = Envelope::deserialize(d)?;
        if env.format_version != FORMAT_VERSION {
            return Err(D::Error::custom(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                env.format_version
            )));
        }
        let p = env.params;
        let model = match env.family {
            Family::Knn => serde_json::from_value(p).map(TrainedModel::Knn),
            Family::NaiveBayes => serde_json::from_value(p).map(TrainedModel::NaiveBayes),
            Family::Logreg => serde_json::from_value(p).map(TrainedModel::Logreg),
            Family::Svm => serde_json::from_value(p).map(TrainedModel::Svm),
            Family::Forest => serde_json::from_value(p).map(TrainedModel::Forest),
            Family::Mlp => serde_json::from_value(p).map(TrainedModel::Mlp),
        }
        .map_err(D::Error::custom)?;
        if model.classes() != env.class_order.as_slice() {
            return Err(D::Error::custom("class_order disagrees with the stored model"));
        }
        Ok(model)
    }
}

/// A model plus everything needed to score new audio with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub model: TrainedModel,
    pub params: FamilyParams,
    pub scaler: Scaler,
    /// Feature space (MFCC settings and segment plan) the model was trained in.
    pub features: StoreConfig,
    pub train_accuracy: f64,
    pub config: serde_json::Value,
}

impl ModelBundle {
    pub fn fingerprint(&self) -> &str {
        &self.features.fingerprint
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
