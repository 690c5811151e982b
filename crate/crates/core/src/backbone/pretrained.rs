//! Loading and saving backbone weights as safetensors files.
//!
//! The weight file only has to cover the feature extractor: tensors present
//! in the file but absent from the model (a classifier head, for instance)
//! are ignored with a log line, while model tensors missing from the file or
//! stored with the wrong shape are hard errors naming the tensor.

use std::path::Path;

use burn::module::{ModuleVisitor, Param};
use burn::tensor::backend::Backend;
use burn::tensor::{ElementConversion, Tensor};
use burn::store::{ApplyError, ModuleSnapshot, ModuleStore, SafetensorsStore};

use crate::error::{Error, Result};

/// Write all parameters of a module to a safetensors file.
pub fn save_weights<B: Backend, M: ModuleSnapshot<B>>(module: &M, path: &Path) -> Result<()> {
    let mut store = SafetensorsStore::from_file(path);
    store.collect_from(module).map_err(|e| Error::WeightFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Load weights from a safetensors file into an already built module.
pub fn load_pretrained<B: Backend, M: ModuleSnapshot<B>>(mut module: M, path: &Path) -> Result<M> {
    if !path.is_file() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    // validation off so the detailed ApplyResult comes back and errors can
    // name the offending tensor
    let mut store = SafetensorsStore::from_file(path)
        .validate(false)
        .allow_partial(true);
    let result = store.apply_to(&mut module).map_err(|e| Error::WeightFile {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    if let Some(err) = result.errors.first() {
        let tensor = match err {
            ApplyError::ShapeMismatch { path, .. }
            | ApplyError::DTypeMismatch { path, .. }
            | ApplyError::AdapterError { path, .. }
            | ApplyError::LoadError { path, .. } => path.clone(),
        };
        return Err(Error::WeightTensor {
            tensor,
            detail: err.to_string(),
        });
    }
    if let Some((name, container)) = result.missing.first() {
        return Err(Error::WeightTensor {
            tensor: name.clone(),
            detail: format!(
                "missing from {} ({container}); {} tensors missing in total",
                path.display(),
                result.missing.len()
            ),
        });
    }
    for name in &result.unused {
        log::info!("ignoring unused tensor {name} in {}", path.display());
    }
    log::info!(
        "loaded {} tensors from {}, checksum {:.6}",
        result.applied.len(),
        path.display(),
        param_checksum(&module)
    );
    Ok(module)
}

struct ChecksumVisitor {
    sum: f64,
    count: usize,
}

impl<B: Backend> ModuleVisitor<B> for ChecksumVisitor {
    fn visit_float<const D: usize>(&mut self, param: &Param<Tensor<B, D>>) {
        let s: f64 = param.val().abs().sum().into_scalar().elem();
        self.sum += s;
        self.count += param.val().shape().num_elements();
    }
}

/// Sum of absolute values over all float parameters; a cheap fingerprint to
/// tell weight sets apart in logs.
pub fn param_checksum<B: Backend, M: burn::module::Module<B>>(module: &M) -> f64 {
    let mut visitor = ChecksumVisitor { sum: 0.0, count: 0 };
    module.visit(&mut visitor);
    visitor.sum
}
