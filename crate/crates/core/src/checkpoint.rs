//! Versioned JSON container for the trained encoder, NLU heads and policy.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::AttributeSchema;
use crate::encoder::EncoderParams;
use crate::error::{Md3Error, Result};
use crate::nlu::NluParams;
use crate::nn::Tensors;
use crate::policy::PolicyParams;

pub const FORMAT: &str = "md3-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub attributes: usize,
    pub hidden: usize,
    pub embed: usize,
    pub vocab: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub schema_hash: String,
    pub dims: Dims,
    pub encoder: EncoderParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlu: Option<NluParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyParams>,
}

impl Checkpoint {
    pub fn new(schema: &AttributeSchema, encoder: EncoderParams) -> Self {
        let c = &encoder.config;
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            schema_hash: schema.hash(),
            dims: Dims {
                attributes: c.n_attributes,
                hidden: c.hidden,
                embed: c.embed_dim,
                vocab: encoder.vocab.len(),
            },
            encoder,
            nlu: None,
            policy: None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut ck: Checkpoint = serde_json::from_slice(&bytes)?;
        ck.encoder.vocab.reindex();
        ck.validate()?;
        Ok(ck)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Md3Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let c = &self.encoder.config;
        let dims_ok = self.dims.attributes == c.n_attributes
            && self.dims.hidden == c.hidden
            && self.dims.embed == c.embed_dim
            && self.dims.vocab == self.encoder.vocab.len()
            && self.encoder.weights.embeddings.rows == self.dims.vocab;
        if !dims_ok {
            return Err(Md3Error::InvalidConfig(
                "checkpoint dimensions are inconsistent".into(),
            ));
        }
        if let Some(nlu) = &self.nlu {
            if nlu.n_attributes() != c.n_attributes || nlu.rep_dim() != c.rep_dim() {
                return Err(Md3Error::InvalidConfig(
                    "NLU section does not match the encoder".into(),
                ));
            }
            if !nlu.all_finite() {
                return Err(Md3Error::Numeric {
                    tensor: "nlu".into(),
                });
            }
        }
        if let Some(p) = &self.policy {
            if p.w_diff.len() != c.rep_dim() {
                return Err(Md3Error::InvalidConfig(
                    "policy section does not match the encoder".into(),
                ));
            }
        }
        if !self.encoder.weights.all_finite() {
            return Err(Md3Error::Numeric {
                tensor: "encoder".into(),
            });
        }
        Ok(())
    }

    /// Fails unless the checkpoint was trained for `schema`.
    pub fn check_schema(&self, schema: &AttributeSchema) -> Result<()> {
        if self.schema_hash != schema.hash() {
            return Err(Md3Error::Schema(
                "checkpoint was trained on a different schema".into(),
            ));
        }
        Ok(())
    }
}
