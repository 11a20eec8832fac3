//! The five-way shot breakdown every session is built around.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One aspect of the staged shot. Declaration order is the canonical
/// processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubProcessKind {
    Scene,
    Character,
    Motion,
    Lighting,
    Cinematography,
}

impl SubProcessKind {
    pub const ALL: [SubProcessKind; 5] = [
        SubProcessKind::Scene,
        SubProcessKind::Character,
        SubProcessKind::Motion,
        SubProcessKind::Lighting,
        SubProcessKind::Cinematography,
    ];

    pub fn order_index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubProcessKind::Scene => "scene",
            SubProcessKind::Character => "character",
            SubProcessKind::Motion => "motion",
            SubProcessKind::Lighting => "lighting",
            SubProcessKind::Cinematography => "cinematography",
        }
    }
}

impl fmt::Display for SubProcessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown sub-process kind `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for SubProcessKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase();
        SubProcessKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

/// Enriched directive for a single sub-process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubProcessSpec {
    pub kind: SubProcessKind,
    pub guidance: String,
    pub order_index: usize,
    /// Motion labels in play order. Only meaningful for `Motion`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub motions: Vec<String>,
    /// Whether the camera itself travels. Only meaningful for `Cinematography`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub camera_moves: bool,
}

impl SubProcessSpec {
    pub fn new(kind: SubProcessKind, guidance: impl Into<String>) -> Self {
        Self {
            kind,
            guidance: guidance.into(),
            order_index: kind.order_index(),
            motions: Vec::new(),
            camera_moves: false,
        }
    }

    pub fn with_motions<I, S>(mut self, motions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.motions = motions.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_camera_moves(mut self, moves: bool) -> Self {
        self.camera_moves = moves;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecompositionError {
    #[error("expected 5 sub-processes, got {0}")]
    Cardinality(usize),
    #[error("sub-process `{0}` appears more than once")]
    DuplicateKind(SubProcessKind),
    #[error("missing sub-process `{0}`")]
    MissingKind(SubProcessKind),
    #[error("guidance for `{0}` is empty")]
    EmptyGuidance(SubProcessKind),
    #[error("guidance for `{0}` only repeats the description")]
    UnenrichedGuidance(SubProcessKind),
}

/// The ordered five-part plan for one description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    items: Vec<SubProcessSpec>,
    source_description_id: String,
}

impl Decomposition {
    /// Validates and sorts `items` into canonical order. Missing kinds are
    /// reported before duplicates so the error names what the agent forgot.
    pub fn new(
        items: Vec<SubProcessSpec>,
        source_description_id: impl Into<String>,
        source_text: &str,
    ) -> Result<Self, DecompositionError> {
        for kind in SubProcessKind::ALL {
            if !items.iter().any(|s| s.kind == kind) {
                return Err(DecompositionError::MissingKind(kind));
            }
        }
        for (i, s) in items.iter().enumerate() {
            if items[..i].iter().any(|o| o.kind == s.kind) {
                return Err(DecompositionError::DuplicateKind(s.kind));
            }
        }
        if items.len() != 5 {
            return Err(DecompositionError::Cardinality(items.len()));
        }
        let raw = source_text.trim();
        let mut items = items;
        for s in &mut items {
            if s.guidance.trim().is_empty() {
                return Err(DecompositionError::EmptyGuidance(s.kind));
            }
            if s.guidance.trim() == raw {
                return Err(DecompositionError::UnenrichedGuidance(s.kind));
            }
            s.order_index = s.kind.order_index();
        }
        items.sort_by_key(|s| s.order_index);
        Ok(Self { items, source_description_id: source_description_id.into() })
    }

    pub fn items(&self) -> &[SubProcessSpec] {
        &self.items
    }

    pub fn get(&self, kind: SubProcessKind) -> &SubProcessSpec {
        &self.items[kind.order_index()]
    }

    pub fn source_description_id(&self) -> &str {
        &self.source_description_id
    }

    /// True when the plan asks for both character travel and camera travel,
    /// a combination that converges less reliably.
    pub fn has_character_and_camera_motion(&self) -> bool {
        !self.get(SubProcessKind::Motion).motions.is_empty()
            && self.get(SubProcessKind::Cinematography).camera_moves
    }
}

/// The user's free-text request with a stable id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoDescription {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("video description is empty")]
pub struct EmptyDescription;

impl VideoDescription {
    /// The id is a content hash prefix, so the same text always maps to the
    /// same id.
    pub fn new(text: impl Into<String>) -> Result<Self, EmptyDescription> {
        use sha2::{Digest, Sha256};
        let text = text.into();
        if text.trim().is_empty() {
            return Err(EmptyDescription);
        }
        let id = hex::encode(&Sha256::digest(text.trim().as_bytes())[..6]);
        Ok(Self { id, text })
    }
}
