use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TsModel;

pub const SCHEMA_VERSION: u64 = 1;

/// Configuration echo stored next to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub clusters: usize,
    pub fuzziness: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub antecedent_columns: Vec<String>,
    pub consequent_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u64,
    pub model: TsModel,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn new(model: TsModel, provenance: Provenance) -> Self {
        ModelFile {
            schema_version: SCHEMA_VERSION,
            model,
            provenance,
        }
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u64,
}

/// Pretty-printed JSON; floats are written in shortest round-trip form.
pub fn write_model<W: Write>(file: &ModelFile, mut writer: W) -> Result<()> {
    let text = serde_json::to_string_pretty(file)
        .map_err(|e| Error::CorruptPayload(e.to_string()))?;
    writer
        .write_all(text.as_bytes())
        .and_then(|_| writer.write_all(b"\n"))
        .map_err(|e| Error::io("<model writer>", e))
}

pub fn read_model<R: Read>(mut reader: R) -> Result<ModelFile> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<model reader>", e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    let probe: VersionProbe = serde_json::from_value(value.clone())
        .map_err(|e| Error::CorruptPayload(e.to_string()))?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::CorruptPayload(e.to_string()))?;
    file.model
        .validate()
        .map_err(|e| Error::CorruptPayload(e.to_string()))?;
    Ok(file)
}

pub fn save_model(file: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(file, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(bytes.as_slice())
}
