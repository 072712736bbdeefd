//! Native JSON model format. The field layout is documented in
//! `docs/model-format.md`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sha256_hex, Flavor, ModelParts, TokenId, TokenizerModel};
use crate::pretokenize::PretokenizerConfig;

pub const MODEL_FORMAT: &str = "litetoken-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NativeModel {
    pub format: String,
    pub version: u32,
    pub flavor: Flavor,
    pub pretokenizer: PretokenizerConfig,
    /// Hex-encoded token bytes, indexed by id.
    pub vocab: Vec<String>,
    pub base_ids: Vec<TokenId>,
    /// `[left, right, result]` triples in rank order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merges: Vec<[TokenId; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranks: Vec<u32>,
    #[serde(default)]
    pub specials: Vec<TokenId>,
    /// Removed tokens, present only in pruned tokenizers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imr: Option<Vec<TokenId>>,
    /// Free-form record of how the file was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl NativeModel {
    pub fn from_model(model: &TokenizerModel, imr: Option<&BTreeSet<TokenId>>) -> Self {
        NativeModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            flavor: model.flavor(),
            pretokenizer: model.pretokenizer().config().clone(),
            vocab: model.ids().map(|id| hex::encode(model.bytes_of(id))).collect(),
            base_ids: model.base_ids().collect(),
            merges: model
                .merges()
                .iter()
                .map(|m| [m.left, m.right, m.result])
                .collect(),
            ranks: model.ranks().to_vec(),
            specials: model.specials().collect::<BTreeSet<_>>().into_iter().collect(),
            imr: imr.map(|s| s.iter().copied().collect()),
            config: None,
        }
    }

    /// Hash of the model content, ignoring any removal set and config.
    pub fn content_hash(&self) -> Result<String> {
        let mut bare = self.clone();
        bare.imr = None;
        bare.config = None;
        Ok(sha256_hex(&serde_json::to_vec(&bare)?))
    }

    pub fn into_model(self) -> Result<(TokenizerModel, Option<BTreeSet<TokenId>>)> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Integrity(format!("unknown model format {:?}", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Integrity(format!("unsupported model version {}", self.version)));
        }
        let vocab = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, h)| {
                hex::decode(h).map_err(|e| Error::Integrity(format!("token {i}: bad hex: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let parts = ModelParts {
            vocab,
            base_ids: self.base_ids.into_iter().collect(),
            merges: self.merges.into_iter().map(|[l, r, o]| (l, r, o)).collect(),
            ranks: self.ranks,
            flavor: Some(self.flavor),
            pretokenizer: self.pretokenizer,
            specials: self.specials.into_iter().collect(),
        };
        let model = TokenizerModel::from_parts(parts)?;
        Ok((model, self.imr.map(|v| v.into_iter().collect())))
    }
}

impl TokenizerModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NativeModel::from_model(self, None))?)
    }

    /// Parses a native model document. Any embedded removal set is ignored;
    /// use [`crate::LiteTokenizer::from_json`] to keep it.
    pub fn from_json(text: &str) -> Result<Self> {
        let native: NativeModel = serde_json::from_str(text)?;
        Ok(native.into_model()?.0)
    }
}
