//! One interface over the four classifier families.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gbdt::{self, GbdtConfig, GbdtEnsemble, SplitStrategy};
use crate::lstm::{self, LstmConfig, LstmModel};
use crate::matrix::Matrix;
use crate::svm::{self, SvmConfig, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "gbdt-exact")]
    GbdtExact,
    #[serde(rename = "gbdt-hist")]
    GbdtHist,
    #[serde(rename = "svm")]
    Svm,
    #[serde(rename = "lstm")]
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lstm, ModelKind::Svm, ModelKind::GbdtExact, ModelKind::GbdtHist];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::GbdtExact => "gbdt-exact",
            ModelKind::GbdtHist => "gbdt-hist",
            ModelKind::Svm => "svm",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::config("model", format!("unknown model '{s}'")))
    }
}

/// Hyperparameters for every family; the GBDT strategy is set by the kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfigs {
    pub gbdt: GbdtConfig,
    pub svm: SvmConfig,
    pub lstm: LstmConfig,
}

impl ModelConfigs {
    pub fn gbdt_for(&self, strategy: SplitStrategy) -> GbdtConfig {
        GbdtConfig {
            strategy,
            ..self.gbdt.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gbdt.validate()?;
        self.svm.validate()?;
        self.lstm.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Model {
    Gbdt(GbdtEnsemble),
    Svm(SvmModel),
    Lstm(LstmModel),
}

pub trait Classifier: Send + Sync {
    fn predict_class(&self, x: &[f64]) -> Result<usize>;

    fn predict_batch(&self, x: &Matrix) -> Result<Vec<usize>> {
        (0..x.rows()).into_par_iter().map(|r| self.predict_class(x.row(r))).collect()
    }
}

pub trait Trainer: Sync {
    fn name(&self) -> String;
    fn fit(&self, data: &Dataset) -> Result<Box<dyn Classifier>>;
}

impl Classifier for Model {
    fn predict_class(&self, x: &[f64]) -> Result<usize> {
        match self {
            Model::Gbdt(m) => m.predict(x).map(|p| p.0),
            Model::Svm(m) => m.predict(x).map(|p| p.0),
            Model::Lstm(m) => m.predict(x).map(|p| p.0),
        }
    }
}

pub fn train_model(kind: ModelKind, data: &Dataset, configs: &ModelConfigs) -> Result<Model> {
    let k = data.num_classes();
    Ok(match kind {
        ModelKind::GbdtExact => Model::Gbdt(gbdt::train(&data.x, &data.y, k, &configs.gbdt_for(SplitStrategy::Exact))?),
        ModelKind::GbdtHist => {
            Model::Gbdt(gbdt::train(&data.x, &data.y, k, &configs.gbdt_for(SplitStrategy::Histogram))?)
        }
        ModelKind::Svm => Model::Svm(svm::train(&data.x, &data.y, k, &configs.svm)?),
        ModelKind::Lstm => Model::Lstm(lstm::train(&data.x, &data.y, data.channels, k, &configs.lstm)?),
    })
}

/// Trainer for one family with fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct KindTrainer {
    pub kind: ModelKind,
    pub configs: ModelConfigs,
}

impl Trainer for KindTrainer {
    fn name(&self) -> String {
        self.kind.tag().to_string()
    }

    fn fit(&self, data: &Dataset) -> Result<Box<dyn Classifier>> {
        Ok(Box::new(train_model(self.kind, data, &self.configs)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.tag().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.tag()));
        }
        let err = "gbm".parse::<ModelKind>().unwrap_err();
        assert!(err.to_string().contains("unknown model 'gbm'"));
    }
}
