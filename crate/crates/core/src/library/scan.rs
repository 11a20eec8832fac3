//! Lexical scanning of engine-script (Python) source.
//!
//! This is not a parser. It tokenizes just enough to find bare-identifier
//! call expressions and `def` headers while skipping strings and comments.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SourceParseError {
    pub line: usize,
    pub message: String,
}

impl SourceParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Open(char),
    Close(char),
    Comma,
    Str,
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
    line: usize,
}

const KEYWORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif",
    "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda",
    "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield", "None",
    "True", "False",
];

/// Python builtins a snippet may call without them being library functions.
pub const BUILTINS: &[&str] = &[
    "abs", "bool", "dict", "enumerate", "float", "int", "len", "list", "max", "min", "print",
    "range", "reversed", "round", "set", "sorted", "str", "sum", "tuple", "zip",
];

fn is_string_prefix(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "r" | "b" | "f" | "u" | "rb" | "br" | "fr" | "rf"
    )
}

fn tokenize(src: &str) -> Result<Vec<Token>, SourceParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut stack: Vec<(char, usize)> = Vec::new();

    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '"' | '\'' => {
                let start = i;
                let start_line = line;
                i = skip_string(bytes, i, &mut line)
                    .ok_or_else(|| SourceParseError::new(start_line, "unterminated string literal"))?;
                toks.push(Token { tok: Tok::Str, start, end: i, line: start_line });
            }
            c if c == '_' || c.is_ascii_alphabetic() || !c.is_ascii() => {
                let start = i;
                while i < bytes.len() {
                    let b = bytes[i];
                    if b == b'_' || b.is_ascii_alphanumeric() || b >= 0x80 {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &src[start..i];
                if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') && is_string_prefix(word) {
                    let start_line = line;
                    i = skip_string(bytes, i, &mut line).ok_or_else(|| {
                        SourceParseError::new(start_line, "unterminated string literal")
                    })?;
                    toks.push(Token { tok: Tok::Str, start, end: i, line: start_line });
                } else {
                    toks.push(Token { tok: Tok::Ident(word.to_string()), start, end: i, line });
                }
            }
            '(' | '[' | '{' => {
                stack.push((c, line));
                toks.push(Token { tok: Tok::Open(c), start: i, end: i + 1, line });
                i += 1;
            }
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    Some((open, l)) => {
                        return Err(SourceParseError::new(
                            line,
                            format!("`{c}` closes `{open}` opened on line {l}"),
                        ))
                    }
                    None => return Err(SourceParseError::new(line, format!("unmatched `{c}`"))),
                }
                toks.push(Token { tok: Tok::Close(c), start: i, end: i + 1, line });
                i += 1;
            }
            ',' => {
                toks.push(Token { tok: Tok::Comma, start: i, end: i + 1, line });
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            c => {
                toks.push(Token { tok: Tok::Punct(c), start: i, end: i + 1, line });
                i += 1;
            }
        }
    }
    if let Some((open, l)) = stack.pop() {
        return Err(SourceParseError::new(l, format!("`{open}` is never closed")));
    }
    Ok(toks)
}

/// Returns the index just past the closing quote, or `None` if unterminated.
fn skip_string(bytes: &[u8], mut i: usize, line: &mut usize) -> Option<usize> {
    let q = bytes[i];
    let triple = bytes.len() >= i + 3 && bytes[i + 1] == q && bytes[i + 2] == q;
    i += if triple { 3 } else { 1 };
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\\' {
            if bytes.get(i + 1) == Some(&b'\n') {
                *line += 1;
            }
            i += 2;
            continue;
        }
        if b == b'\n' {
            if !triple {
                return None;
            }
            *line += 1;
        }
        if b == q {
            if !triple {
                return Some(i + 1);
            }
            if bytes.len() >= i + 3 && bytes[i + 1] == q && bytes[i + 2] == q {
                return Some(i + 3);
            }
        }
        i += 1;
    }
    None
}

/// Index of the token closing the bracket opened at `open`.
fn matching_close(toks: &[Token], open: usize) -> usize {
    let mut depth = 0usize;
    for (j, t) in toks.iter().enumerate().skip(open) {
        match t.tok {
            Tok::Open(_) => depth += 1,
            Tok::Close(_) => {
                depth -= 1;
                if depth == 0 {
                    return j;
                }
            }
            _ => {}
        }
    }
    // tokenize() guarantees balance
    unreachable!("unbalanced brackets after tokenize")
}

/// Splits the argument tokens between `open` and `close` at depth-0 commas.
fn split_args(src: &str, toks: &[Token], open: usize, close: usize) -> Vec<String> {
    let mut args = Vec::new();
    let mut depth = 0usize;
    let mut seg_start = toks[open].end;
    for t in &toks[open + 1..close] {
        match t.tok {
            Tok::Open(_) => depth += 1,
            Tok::Close(_) => depth -= 1,
            Tok::Comma if depth == 0 => {
                args.push(src[seg_start..t.start].trim().to_string());
                seg_start = t.end;
            }
            _ => {}
        }
    }
    let last = src[seg_start..toks[close].start].trim();
    if !last.is_empty() {
        args.push(last.to_string());
    }
    args
}

/// A call expression `name(arg, ...)` found in source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Call {
    pub name: String,
    pub args: Vec<String>,
    pub line: usize,
}

/// Extracts every call whose callee is a bare identifier. Method calls
/// (`obj.f()`), definitions, keywords and builtins are skipped. Calls nested
/// inside arguments are reported as well, in source order.
pub fn extract_calls(src: &str) -> Result<Vec<Call>, SourceParseError> {
    let toks = tokenize(src)?;
    let mut calls = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        let Tok::Ident(name) = &t.tok else { continue };
        if !matches!(toks.get(i + 1).map(|n| &n.tok), Some(Tok::Open('('))) {
            continue;
        }
        if KEYWORDS.contains(&name.as_str()) || BUILTINS.contains(&name.as_str()) {
            continue;
        }
        if i > 0 {
            match &toks[i - 1].tok {
                Tok::Punct('.') => continue,
                Tok::Ident(prev) if prev == "def" || prev == "class" => continue,
                _ => {}
            }
        }
        let close = matching_close(&toks, i + 1);
        calls.push(Call { name: name.clone(), args: split_args(src, &toks, i + 1, close), line: t.line });
    }
    Ok(calls)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Regular,
    KeywordOnly,
    VarArgs,
    VarKwargs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderParam {
    pub name: String,
    pub has_default: bool,
    pub kind: ParamKind,
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionHeader {
    pub name: String,
    pub params: Vec<HeaderParam>,
}

/// Checks that `body` is exactly one top-level `def` and returns its header.
/// Leading comments, blank lines and decorators are allowed.
pub fn parse_function_definition(body: &str) -> Result<FunctionHeader, SourceParseError> {
    let toks = tokenize(body)?;
    let first = toks
        .iter()
        .position(|t| !matches!(t.tok, Tok::Punct('@')) && !is_decorator_token(body, t))
        .ok_or_else(|| SourceParseError::new(1, "empty function body"))?;
    let def = &toks[first];
    if def.tok != Tok::Ident("def".into()) {
        return Err(SourceParseError::new(def.line, "expected a `def` statement"));
    }
    if line_indent(body, def.start) != 0 {
        return Err(SourceParseError::new(def.line, "`def` must start at column 0"));
    }
    let name = match toks.get(first + 1).map(|t| &t.tok) {
        Some(Tok::Ident(n)) => n.clone(),
        _ => return Err(SourceParseError::new(def.line, "missing function name")),
    };
    if !matches!(toks.get(first + 2).map(|t| &t.tok), Some(Tok::Open('('))) {
        return Err(SourceParseError::new(def.line, "missing parameter list"));
    }
    let close = matching_close(&toks, first + 2);
    let params = split_args(body, &toks, first + 2, close)
        .into_iter()
        .filter(|p| p != "/")
        .try_fold((Vec::new(), false), |(mut acc, mut kw_only), p| {
            if p == "*" {
                return Ok((acc, true));
            }
            let param = parse_param(&p, kw_only)
                .ok_or_else(|| SourceParseError::new(def.line, format!("bad parameter `{p}`")))?;
            if param.kind == ParamKind::VarArgs {
                kw_only = true;
            }
            acc.push(param);
            Ok((acc, kw_only))
        })?
        .0;

    // header ends at the first depth-0 ':' after the parameter list
    let colon = toks[close + 1..]
        .iter()
        .find(|t| t.tok == Tok::Punct(':'))
        .ok_or_else(|| SourceParseError::new(def.line, "missing `:` after header"))?;
    let rest = &body[colon.end..];
    let mut saw_body = !rest.lines().next().unwrap_or("").trim().is_empty()
        && !rest.lines().next().unwrap_or("").trim_start().starts_with('#');
    let header_lines = body[..colon.end].lines().count();
    for (offset, l) in rest.lines().enumerate().skip(1) {
        let trimmed = l.trim();
        if trimmed.is_empty() || (trimmed.starts_with('#') && !starts_inside_string(&toks, body, l)) {
            continue;
        }
        if !l.starts_with(char::is_whitespace) && !starts_inside_string(&toks, body, l) {
            return Err(SourceParseError::new(
                header_lines + offset,
                "more than one top-level statement",
            ));
        }
        saw_body = true;
    }
    if !saw_body {
        return Err(SourceParseError::new(def.line, "function has no body"));
    }
    Ok(FunctionHeader { name, params })
}

fn is_decorator_token(src: &str, t: &Token) -> bool {
    // any token on a line whose first non-space char is '@'
    let line_start = src[..t.start].rfind('\n').map_or(0, |p| p + 1);
    src[line_start..].trim_start().starts_with('@')
}

fn line_indent(src: &str, pos: usize) -> usize {
    let line_start = src[..pos].rfind('\n').map_or(0, |p| p + 1);
    pos - line_start
}

/// True if the line `l` (a slice of `src`) begins inside a string token,
/// e.g. the continuation of a triple-quoted docstring.
fn starts_inside_string(toks: &[Token], src: &str, l: &str) -> bool {
    let off = l.as_ptr() as usize - src.as_ptr() as usize;
    toks.iter().any(|t| t.tok == Tok::Str && t.start < off && off < t.end)
}

fn parse_param(p: &str, kw_only: bool) -> Option<HeaderParam> {
    let (kind, rest) = if let Some(r) = p.strip_prefix("**") {
        (ParamKind::VarKwargs, r)
    } else if let Some(r) = p.strip_prefix('*') {
        (ParamKind::VarArgs, r)
    } else if kw_only {
        (ParamKind::KeywordOnly, p)
    } else {
        (ParamKind::Regular, p)
    };
    let (lhs, default) = match split_default(rest) {
        Some((l, d)) => (l, Some(d.trim().to_string())),
        None => (rest, None),
    };
    let name = lhs.split(':').next()?.trim();
    if name.is_empty() || !name.chars().all(|c| c == '_' || c.is_alphanumeric()) {
        return None;
    }
    Some(HeaderParam { name: name.to_string(), has_default: default.is_some(), kind, default })
}

/// Splits `name: T = default` at the first `=` that is not part of `==`, `<=` etc.
fn split_default(p: &str) -> Option<(&str, &str)> {
    let b = p.as_bytes();
    for (i, &c) in b.iter().enumerate() {
        if c == b'=' {
            let prev = if i > 0 { b[i - 1] } else { b' ' };
            let next = b.get(i + 1).copied().unwrap_or(b' ');
            if next != b'=' && !matches!(prev, b'=' | b'!' | b'<' | b'>') {
                return Some((&p[..i], &p[i + 1..]));
            }
        }
    }
    None
}

/// Parses a call argument as `name=value` if it is a keyword argument.
pub fn keyword_arg(arg: &str) -> Option<(&str, &str)> {
    let (lhs, rhs) = split_default(arg)?;
    let lhs = lhs.trim();
    if !lhs.is_empty() && lhs.chars().all(|c| c == '_' || c.is_alphanumeric()) {
        Some((lhs, rhs.trim()))
    } else {
        None
    }
}
