//! Uniform front end over the four feature pipelines compared in
//! evaluation: raw features (NA), vectorised PCA, NTSL and TAISL.

use crate::adapt::{
    flatten_samples, ntsl_fit, pca_fit, taisl_fit, AdaptationConfig, AdaptationModel, AlignmentSet, LabeledTensorSet,
    PcaModel,
};
use crate::tucker::{project, TensorSubspace};
use crate::{DenseTensor, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Na,
    Pca,
    Ntsl,
    Taisl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Na, Method::Pca, Method::Ntsl, Method::Taisl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Na => "na",
            Method::Pca => "pca",
            Method::Ntsl => "ntsl",
            Method::Taisl => "taisl",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?} (expected na, pca, ntsl or taisl)")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fitted feature map for source and target samples.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    /// Raw samples, flattened.
    Identity {
        sample_dims: Vec<usize>,
    },
    Pca(PcaModel),
    /// NTSL (identity alignment) or TAISL.
    Tensor {
        method: Method,
        subspace: TensorSubspace,
        alignment: AlignmentSet,
        loss_trace: Vec<(usize, f64)>,
    },
}

/// Fits `method`. PCA keeps `Π cfg.dims` components, capped by the
/// sample dimension and the pooled sample count.
pub fn fit_method(
    method: Method,
    xs: &LabeledTensorSet,
    xt: &LabeledTensorSet,
    cfg: &AdaptationConfig,
) -> Result<(FittedModel, Vec<String>)> {
    let tensor = |m: AdaptationModel| {
        let model = FittedModel::Tensor {
            method,
            subspace: m.subspace,
            alignment: m.alignment,
            loss_trace: m.loss_trace,
        };
        (model, m.warnings)
    };
    match method {
        Method::Na => {
            if xs.sample_dims() != xt.sample_dims() {
                return Err(Error::DimensionMismatch(format!(
                    "source samples are {:?}, target samples are {:?}",
                    xs.sample_dims(),
                    xt.sample_dims()
                )));
            }
            Ok((
                FittedModel::Identity {
                    sample_dims: xs.sample_dims().to_vec(),
                },
                Vec::new(),
            ))
        }
        Method::Pca => {
            let flat: usize = xs.sample_dims().iter().product();
            let pooled = xs.num_samples() + xt.num_samples();
            let components = cfg
                .dims
                .iter()
                .product::<usize>()
                .min(flat)
                .min(pooled.saturating_sub(1))
                .max(1);
            Ok((FittedModel::Pca(pca_fit(xs, xt, components)?), Vec::new()))
        }
        Method::Ntsl => ntsl_fit(xs, xt, cfg).map(tensor),
        Method::Taisl => taisl_fit(xs, xt, cfg).map(tensor),
    }
}

impl FittedModel {
    pub fn method(&self) -> Method {
        match self {
            FittedModel::Identity { .. } => Method::Na,
            FittedModel::Pca(_) => Method::Pca,
            FittedModel::Tensor { method, .. } => *method,
        }
    }

    pub fn loss_trace(&self) -> &[(usize, f64)] {
        match self {
            FittedModel::Tensor { loss_trace, .. } => loss_trace,
            _ => &[],
        }
    }

    fn check_dims(&self, data: &DenseTensor) -> Result<()> {
        let expected = match self {
            FittedModel::Identity { sample_dims } => sample_dims.clone(),
            FittedModel::Pca(p) => {
                return if data.data().len() / data.num_samples().max(1) == p.mean.len() {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch(format!(
                        "{} samples for a {}-dim PCA model",
                        data.shape(),
                        p.mean.len()
                    )))
                }
            }
            FittedModel::Tensor { subspace, .. } => subspace.ambient_dims(),
        };
        if data.order() != expected.len() + 1 || data.dims()[..expected.len()] != expected[..] {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a model over {expected:?}",
                data.shape()
            )));
        }
        Ok(())
    }

    /// Source features, one row per sample.
    pub fn source_features(&self, data: &DenseTensor) -> Result<Matrix> {
        self.check_dims(data)?;
        match self {
            FittedModel::Identity { .. } => Ok(flatten_samples(data)),
            FittedModel::Pca(p) => p.transform(data),
            FittedModel::Tensor {
                subspace, alignment, ..
            } => Ok(flatten_samples(&project(&alignment.apply(data)?, subspace)?)),
        }
    }

    /// Target features, one row per sample.
    pub fn target_features(&self, data: &DenseTensor) -> Result<Matrix> {
        self.check_dims(data)?;
        match self {
            FittedModel::Identity { .. } => Ok(flatten_samples(data)),
            FittedModel::Pca(p) => p.transform(data),
            FittedModel::Tensor { subspace, .. } => Ok(flatten_samples(&project(data, subspace)?)),
        }
    }

    /// Source samples after alignment, still in the ambient space; raw
    /// samples for models without an alignment.
    pub fn aligned_source(&self, data: &DenseTensor) -> Result<Matrix> {
        self.check_dims(data)?;
        match self {
            FittedModel::Tensor { alignment, .. } => Ok(flatten_samples(&alignment.apply(data)?)),
            _ => Ok(flatten_samples(data)),
        }
    }
}
