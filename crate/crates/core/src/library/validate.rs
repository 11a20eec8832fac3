use serde::{Deserialize, Serialize};

use super::scan::{self, Call, ParamKind, SourceParseError};
use super::{FunctionLibrary, LibraryFunction};
use crate::subprocess::SubProcessKind;

/// Engine-script source produced for one sub-process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptSnippet {
    pub subprocess_kind: SubProcessKind,
    pub source: String,
    pub calls: Vec<Call>,
    pub iteration_of_origin: u32,
    /// Version of the library the snippet was written against.
    pub library_version: u64,
}

impl ScriptSnippet {
    pub fn new(
        subprocess_kind: SubProcessKind,
        source: impl Into<String>,
        iteration_of_origin: u32,
        library_version: u64,
    ) -> Result<Self, SourceParseError> {
        let source = source.into();
        if source.trim().is_empty() {
            return Err(SourceParseError { line: 1, message: "empty snippet".into() });
        }
        let calls = scan::extract_calls(&source)?;
        Ok(Self { subprocess_kind, source, calls, iteration_of_origin, library_version })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnknownCall {
    pub name: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ArityProblem {
    TooManyPositional { max: usize, got: usize },
    MissingRequired { params: Vec<String> },
    UnknownKeyword { keyword: String },
    DuplicateBinding { param: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArityIssue {
    pub function: String,
    pub line: usize,
    #[serde(flatten)]
    pub problem: ArityProblem,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub unknown: Vec<UnknownCall>,
    pub arity: Vec<ArityIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.unknown.is_empty() && self.arity.is_empty()
    }

    /// Human-readable problem list for corrective prompts.
    pub fn describe(&self) -> String {
        let mut lines = Vec::new();
        for u in &self.unknown {
            lines.push(format!("line {}: `{}` is not a library function", u.line, u.name));
        }
        for a in &self.arity {
            let what = match &a.problem {
                ArityProblem::TooManyPositional { max, got } => {
                    format!("takes at most {max} positional arguments but {got} were given")
                }
                ArityProblem::MissingRequired { params } => {
                    format!("missing required argument(s): {}", params.join(", "))
                }
                ArityProblem::UnknownKeyword { keyword } => format!("has no parameter named `{keyword}`"),
                ArityProblem::DuplicateBinding { param } => format!("got multiple values for `{param}`"),
            };
            lines.push(format!("line {}: `{}` {what}", a.line, a.function));
        }
        lines.join("\n")
    }
}

/// Checks that every call in `snippet` resolves in `lib` with a compatible
/// argument list. Functions defined inside the snippet itself also resolve.
pub fn validate_snippet(snippet: &ScriptSnippet, lib: &FunctionLibrary) -> ValidationReport {
    let local_defs = local_definitions(&snippet.source);
    let mut report = ValidationReport::default();
    for call in &snippet.calls {
        match lib.get(&call.name) {
            Some(f) => report.arity.extend(check_arity(call, f)),
            None if local_defs.iter().any(|d| d == &call.name) => {}
            None => report.unknown.push(UnknownCall { name: call.name.clone(), line: call.line }),
        }
    }
    report
}

fn local_definitions(src: &str) -> Vec<String> {
    src.lines()
        .filter_map(|l| l.trim_start().strip_prefix("def "))
        .filter_map(|rest| rest.split('(').next())
        .map(|n| n.trim().to_string())
        .collect()
}

fn check_arity(call: &Call, f: &LibraryFunction) -> Vec<ArityIssue> {
    let issue = |problem| ArityIssue { function: call.name.clone(), line: call.line, problem };
    if call.args.iter().any(|a| a.starts_with('*')) {
        // splatted arguments cannot be counted statically
        return Vec::new();
    }
    let mut issues = Vec::new();
    let positional_params: Vec<_> = f.params.iter().filter(|p| p.kind == ParamKind::Regular).collect();
    let has_varargs = f.params.iter().any(|p| p.kind == ParamKind::VarArgs);
    let has_varkw = f.params.iter().any(|p| p.kind == ParamKind::VarKwargs);

    let mut bound: Vec<&str> = Vec::new();
    let mut positional = 0usize;
    for arg in &call.args {
        match scan::keyword_arg(arg) {
            Some((kw, _)) => {
                let known = f
                    .params
                    .iter()
                    .any(|p| p.name == kw && matches!(p.kind, ParamKind::Regular | ParamKind::KeywordOnly));
                if !known {
                    if !has_varkw {
                        issues.push(issue(ArityProblem::UnknownKeyword { keyword: kw.to_string() }));
                    }
                } else if bound.contains(&kw) {
                    issues.push(issue(ArityProblem::DuplicateBinding { param: kw.to_string() }));
                } else {
                    bound.push(kw);
                }
            }
            None => {
                if let Some(p) = positional_params.get(positional) {
                    if bound.contains(&p.name.as_str()) {
                        issues.push(issue(ArityProblem::DuplicateBinding { param: p.name.clone() }));
                    }
                    bound.push(&p.name);
                }
                positional += 1;
            }
        }
    }
    if positional > positional_params.len() && !has_varargs {
        issues.push(issue(ArityProblem::TooManyPositional { max: positional_params.len(), got: positional }));
    }
    let missing: Vec<String> = f
        .params
        .iter()
        .filter(|p| matches!(p.kind, ParamKind::Regular | ParamKind::KeywordOnly))
        .filter(|p| p.default.is_none() && !bound.contains(&p.name.as_str()))
        .map(|p| p.name.clone())
        .collect();
    if !missing.is_empty() {
        issues.push(issue(ArityProblem::MissingRequired { params: missing }));
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::seed_library;

    fn snippet(src: &str) -> ScriptSnippet {
        ScriptSnippet::new(SubProcessKind::Character, src, 0, 1).unwrap()
    }

    #[test]
    fn import_with_one_arg_is_ok() {
        let r = validate_snippet(&snippet("obj = import_asset('asset:corgi')\n"), &seed_library());
        assert!(r.is_ok(), "{r:?}");
    }

    #[test]
    fn unknown_name_reported_once() {
        let r = validate_snippet(&snippet("fly_to_moon(obj)\n"), &seed_library());
        assert_eq!(r.unknown, vec![UnknownCall { name: "fly_to_moon".into(), line: 1 }]);
        assert!(r.arity.is_empty());
    }

    #[test]
    fn missing_required_argument() {
        let r = validate_snippet(&snippet("scale_to_real_height(obj)\n"), &seed_library());
        assert_eq!(r.arity.len(), 1);
        assert_eq!(
            r.arity[0].problem,
            ArityProblem::MissingRequired { params: vec!["target_height_meters".into()] }
        );
    }

    #[test]
    fn keyword_arguments() {
        let lib = seed_library();
        assert!(validate_snippet(&snippet("scale_to_real_height(obj, target_height_meters=1.8)"), &lib).is_ok());
        let r = validate_snippet(&snippet("scale_to_real_height(obj, 1.8, height=2)"), &lib);
        assert_eq!(r.arity[0].problem, ArityProblem::UnknownKeyword { keyword: "height".into() });
        let r = validate_snippet(&snippet("scale_to_real_height(obj, 1.8, target_height_meters=2)"), &lib);
        assert_eq!(r.arity[0].problem, ArityProblem::DuplicateBinding { param: "target_height_meters".into() });
        let r = validate_snippet(&snippet("place_object(a, b, c)"), &lib);
        assert_eq!(r.arity[0].problem, ArityProblem::TooManyPositional { max: 2, got: 3 });
    }

    #[test]
    fn defaults_optional_and_local_defs_resolve() {
        let lib = seed_library();
        assert!(validate_snippet(&snippet("place_camera((0, -8, 2), (0, 0, 1))"), &lib).is_ok());
        let src = "def helper(o):\n    place_object(o, (0, 0, 0))\nhelper(import_asset('asset:x'))\n";
        assert!(validate_snippet(&snippet(src), &lib).is_ok());
    }

    #[test]
    fn empty_snippet_is_a_parse_error() {
        assert!(ScriptSnippet::new(SubProcessKind::Scene, "  \n", 0, 1).is_err());
    }
}
