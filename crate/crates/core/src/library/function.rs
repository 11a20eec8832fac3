use serde::{Deserialize, Serialize};

use super::scan::{self, ParamKind, SourceParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    AgentComposed,
    AgentUpdated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    /// Semantic type, e.g. `object`, `meters`, `vec3`. `any` when unknown.
    pub semantic_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default = "regular", skip_serializing_if = "is_regular")]
    pub kind: ParamKind,
}

fn regular() -> ParamKind {
    ParamKind::Regular
}

fn is_regular(k: &ParamKind) -> bool {
    *k == ParamKind::Regular
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BodyParseError {
    #[error("body of `{name}` does not parse: {source}")]
    Syntax {
        name: String,
        #[source]
        source: SourceParseError,
    },
    #[error("body defines `{found}` but the function is named `{name}`")]
    NameMismatch { name: String, found: String },
    #[error("declared parameters of `{name}` ({declared}) differ from its definition ({defined})")]
    ParamMismatch { name: String, declared: String, defined: String },
}

/// One engine-script function of the library.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryFunction {
    pub name: String,
    pub params: Vec<Param>,
    pub body: String,
    pub docstring: String,
    pub version: u32,
    pub provenance: Provenance,
}

impl LibraryFunction {
    /// Builds a function from its source, deriving name and parameters from
    /// the `def` header. Parameter types start out as `any`.
    pub fn from_body(
        body: impl Into<String>,
        docstring: impl Into<String>,
        provenance: Provenance,
    ) -> Result<Self, BodyParseError> {
        let body = body.into();
        let header = scan::parse_function_definition(&body)
            .map_err(|source| BodyParseError::Syntax { name: "<unnamed>".into(), source })?;
        let params = header
            .params
            .into_iter()
            .map(|p| Param {
                name: p.name,
                semantic_type: "any".into(),
                units: None,
                default: p.default,
                kind: p.kind,
            })
            .collect();
        Ok(Self {
            name: header.name,
            params,
            body,
            docstring: docstring.into(),
            version: 1,
            provenance,
        })
    }

    /// Annotates a parameter's semantic type and units.
    pub fn typed(mut self, param: &str, semantic_type: &str, units: Option<&str>) -> Self {
        if let Some(p) = self.params.iter_mut().find(|p| p.name == param) {
            p.semantic_type = semantic_type.to_string();
            p.units = units.map(str::to_string);
        }
        self
    }

    /// Re-checks the body against `name` and `params`.
    pub fn check(&self) -> Result<(), BodyParseError> {
        let header = scan::parse_function_definition(&self.body)
            .map_err(|source| BodyParseError::Syntax { name: self.name.clone(), source })?;
        if header.name != self.name {
            return Err(BodyParseError::NameMismatch { name: self.name.clone(), found: header.name });
        }
        let declared: Vec<_> = self.params.iter().map(|p| (p.name.as_str(), p.default.is_some(), p.kind)).collect();
        let defined: Vec<_> = header.params.iter().map(|p| (p.name.as_str(), p.has_default, p.kind)).collect();
        if declared != defined {
            return Err(BodyParseError::ParamMismatch {
                name: self.name.clone(),
                declared: self.signature_params(),
                defined: header.params.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(", "),
            });
        }
        Ok(())
    }

    fn signature_params(&self) -> String {
        self.params
            .iter()
            .map(|p| {
                let mut s = match p.kind {
                    ParamKind::VarArgs => format!("*{}", p.name),
                    ParamKind::VarKwargs => format!("**{}", p.name),
                    _ => p.name.clone(),
                };
                if p.semantic_type != "any" {
                    s.push_str(": ");
                    s.push_str(&p.semantic_type);
                    if let Some(u) = &p.units {
                        s.push_str(&format!(" [{u}]"));
                    }
                }
                if let Some(d) = &p.default {
                    s.push_str(" = ");
                    s.push_str(d);
                }
                s
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// `name(a: type [units], b = default)  # docstring`
    pub fn signature_line(&self) -> String {
        format!("{}({})  # {}", self.name, self.signature_params(), self.docstring)
    }

    pub fn body_sha256(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.body.as_bytes()))
    }
}
