//! Model files: `"APNN"`, version u32, header length u32, JSON header, then each
//! tensor as little-endian f32 in header order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelSpec, Network};
use super::train::{ConfusionMatrix, ModelBundle, TrainReport, TrainingMetadata};
use super::{NnError, Tensor};

pub const MODEL_MAGIC: &[u8; 4] = b"APNN";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub model: ModelSpec,
    pub tensors: Vec<TensorEntry>,
    pub metadata: TrainingMetadata,
}

impl ModelBundle {
    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            model: self.spec().clone(),
            tensors: self
                .network
                .named_tensors()
                .into_iter()
                .map(|(name, t)| TensorEntry { name, shape: t.shape().to_vec() })
                .collect(),
            metadata: self.metadata.clone(),
        }
    }
}

fn format_err(msg: impl Into<String>) -> NnError {
    NnError::Format(msg.into())
}

pub fn encode_model(bundle: &ModelBundle) -> Result<Vec<u8>, NnError> {
    let header = serde_json::to_vec(&bundle.header()).map_err(|e| format_err(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in bundle.network.named_tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelBundle, NnError> {
    if bytes.len() < 12 {
        return Err(format_err("file too short for header"));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_bytes = bytes.get(12..12 + header_len).ok_or_else(|| format_err("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(header_bytes).map_err(|e| format_err(format!("header: {e}")))?;
    let mut net = Network::<f32>::new(header.model.clone(), 0).map_err(|e| format_err(e.to_string()))?;

    let mut payload = &bytes[12 + header_len..];
    let slots = net.named_tensors_mut();
    if slots.len() != header.tensors.len() {
        return Err(format_err(format!(
            "header lists {} tensors, architecture has {}",
            header.tensors.len(),
            slots.len()
        )));
    }
    for ((name, slot), entry) in slots.into_iter().zip(&header.tensors) {
        if name != entry.name || slot.shape() != entry.shape.as_slice() {
            return Err(format_err(format!(
                "tensor {} {:?} does not match architecture slot {name} {:?}",
                entry.name,
                entry.shape,
                slot.shape()
            )));
        }
        let n = slot.len() * 4;
        if payload.len() < n {
            return Err(format_err(format!("payload truncated in tensor {name}")));
        }
        let data = payload[..n].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        *slot = Tensor::new(entry.shape.clone(), data)?;
        payload = &payload[n..];
    }
    if !payload.is_empty() {
        return Err(format_err(format!("{} trailing payload bytes", payload.len())));
    }
    Ok(ModelBundle::new(net, header.metadata))
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<(), NnError> {
    fs::write(path, encode_model(bundle)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle, NnError> {
    decode_model(&fs::read(path)?)
}

/// `epoch,train_loss,train_acc,val_loss,val_acc`, one row per epoch.
pub fn metrics_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for m in &report.epochs {
        writeln!(s, "{},{:.6},{:.6},{:.6},{:.6}", m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc).unwrap();
    }
    s
}

/// Ten rows of ten counts; rows are true digits.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut s = String::new();
    for row in &cm.0 {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
