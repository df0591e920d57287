use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mlp, ModelConfig, MultiBranchModel, Parameters, Standardization};
use crate::data::write_json;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    model_config: ModelConfig,
    standardization: Standardization,
    parameters: BTreeMap<String, LayerFile>,
}

fn layer_name(network: &str, k: usize) -> String {
    format!("{network}.{k}")
}

pub fn save_model(model: &MultiBranchModel, path: impl AsRef<Path>) -> Result<()> {
    let mut parameters = BTreeMap::new();
    for (name, net) in model.params.networks() {
        for (k, layer) in net.layers.iter().enumerate() {
            parameters.insert(
                layer_name(name, k),
                LayerFile {
                    w: layer.w.chunks(layer.inputs).map(<[f64]>::to_vec).collect(),
                    b: layer.b.clone(),
                },
            );
        }
    }
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model_config: model.config.clone(),
        standardization: model.standardization.clone(),
        parameters,
    };
    write_json(path.as_ref(), &file)
}

fn fill(net: &mut Mlp, name: &str, layers: &mut BTreeMap<String, LayerFile>) -> Result<()> {
    for (k, layer) in net.layers.iter_mut().enumerate() {
        let key = layer_name(name, k);
        let stored = layers
            .remove(&key)
            .ok_or_else(|| Error::Shape(format!("model file lacks layer {key}")))?;
        let rows_ok = stored.w.len() == layer.outputs && stored.w.iter().all(|r| r.len() == layer.inputs);
        if !rows_ok || stored.b.len() != layer.outputs {
            return Err(Error::Shape(format!(
                "layer {key} does not have shape {}x{}",
                layer.outputs, layer.inputs
            )));
        }
        layer.w = stored.w.concat();
        layer.b = stored.b;
    }
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MultiBranchModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value.get("format_version").and_then(serde_json::Value::as_u64);
    if version != Some(MODEL_FORMAT_VERSION) {
        return Err(Error::Version {
            found: version.unwrap_or(0),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let mut file: ModelFile = serde_json::from_value(value)?;
    let config = file.model_config;
    config.validate()?;

    let mut params = Parameters::zeros(&config);
    if let Some(n) = &mut params.main.network1 {
        fill(n, "network1", &mut file.parameters)?;
    }
    if let Some(n) = &mut params.main.network2 {
        fill(n, "network2", &mut file.parameters)?;
    }
    fill(&mut params.main.network3, "network3", &mut file.parameters)?;
    fill(&mut params.category_head, "category_head", &mut file.parameters)?;
    if let Some(extra) = file.parameters.keys().next() {
        return Err(Error::Shape(format!("unexpected layer {extra} in model file")));
    }

    let s = &file.standardization;
    let sizes_ok = s.mean.mean.len() == config.branch_input()
        && s.mean.std.len() == config.branch_input()
        && s.cov.mean.len() == config.branch_input()
        && s.cov.std.len() == config.branch_input()
        && s.var.mean.len() == config.var_size()
        && s.var.std.len() == config.var_size();
    if !sizes_ok {
        return Err(Error::Shape("standardization statistics do not match the model config".into()));
    }
    Ok(MultiBranchModel {
        config,
        standardization: file.standardization,
        params,
    })
}
