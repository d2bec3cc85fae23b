//! A deliberately small subset of YAML: nested mappings by indentation,
//! scalars (plain, single- or double-quoted), flow lists `[a, b]` and block
//! lists of scalars (`- a`). No anchors, tags, multi-line strings or nested
//! lists. Every node remembers its 1-based source line.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Scalar {
    pub text: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Scalar(Scalar),
    List { items: Vec<Scalar>, line: usize },
    Map(Mapping),
}

impl Node {
    pub fn line(&self) -> usize {
        match self {
            Node::Scalar(s) => s.line,
            Node::List { line, .. } => *line,
            Node::Map(m) => m.line,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Node::Scalar(_) => "scalar",
            Node::List { .. } => "list",
            Node::Map(_) => "mapping",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mapping {
    pub entries: Vec<(String, Node)>,
    pub line: usize,
}

struct Line<'a> {
    no: usize,
    indent: usize,
    body: &'a str,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::config("<syntax>", line, msg)
}

/// Drops a trailing `# comment` that is outside quotes.
fn strip_comment(s: &str) -> &str {
    let mut quote = None;
    let mut prev_space = true;
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '#' && prev_space => return &s[..i],
            None => {}
        }
        prev_space = c == ' ';
    }
    s
}

fn unquote(raw: &str, line: usize) -> Result<String> {
    let raw = raw.trim();
    if let Some(inner) = raw.strip_prefix('"') {
        let inner = inner
            .strip_suffix('"')
            .ok_or_else(|| err(line, "unterminated double-quoted string"))?;
        let mut out = String::new();
        let mut chars = inner.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                Some('\\') => out.push('\\'),
                Some('"') => out.push('"'),
                other => return Err(err(line, format!("unsupported escape \\{}", other.unwrap_or(' ')))),
            }
        }
        Ok(out)
    } else if let Some(inner) = raw.strip_prefix('\'') {
        let inner = inner
            .strip_suffix('\'')
            .ok_or_else(|| err(line, "unterminated single-quoted string"))?;
        Ok(inner.replace("''", "'"))
    } else {
        Ok(raw.to_string())
    }
}

fn split_flow(inner: &str, line: usize) -> Result<Vec<Scalar>> {
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut items = Vec::new();
    let mut quote = None;
    let mut start = 0;
    for (i, c) in inner.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '[' || c == ']' || c == '{' => return Err(err(line, "nested collections are not supported")),
            None if c == ',' => {
                items.push(Scalar { text: unquote(&inner[start..i], line)?, line });
                start = i + 1;
            }
            None => {}
        }
    }
    items.push(Scalar { text: unquote(&inner[start..], line)?, line });
    if items.iter().any(|s| s.text.is_empty()) {
        return Err(err(line, "empty list element"));
    }
    Ok(items)
}

fn value_node(rest: &str, line: usize) -> Result<Node> {
    let rest = rest.trim();
    if let Some(inner) = rest.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| err(line, "unterminated flow list"))?;
        return Ok(Node::List { items: split_flow(inner, line)?, line });
    }
    if rest.starts_with('{') || rest.starts_with('&') || rest.starts_with('*') || rest.starts_with('|') || rest.starts_with('>') {
        return Err(err(line, format!("unsupported syntax `{rest}`")));
    }
    Ok(Node::Scalar(Scalar { text: unquote(rest, line)?, line }))
}

fn split_key(body: &str, no: usize) -> Result<(&str, &str)> {
    let (key, rest) = body
        .split_once(':')
        .ok_or_else(|| err(no, format!("expected `key: value`, found `{body}`")))?;
    let key = key.trim();
    if key.is_empty() || key.contains(char::is_whitespace) || key.starts_with(['"', '\'', '-']) {
        return Err(err(no, format!("invalid key `{key}`")));
    }
    if !(rest.is_empty() || rest.starts_with(' ')) {
        return Err(err(no, format!("expected a space after `{key}:`")));
    }
    Ok((key, rest))
}

fn parse_mapping(lines: &[Line<'_>], pos: &mut usize, indent: usize) -> Result<Mapping> {
    let mut map = Mapping {
        entries: Vec::new(),
        line: lines.get(*pos).map_or(0, |l| l.no),
    };
    while let Some(l) = lines.get(*pos) {
        if l.indent < indent {
            break;
        }
        if l.indent > indent {
            return Err(err(l.no, "unexpected indentation"));
        }
        if l.body.starts_with("- ") || l.body == "-" {
            return Err(err(l.no, "list item where a key was expected"));
        }
        let (key, rest) = split_key(l.body, l.no)?;
        if map.entries.iter().any(|(k, _)| k == key) {
            return Err(Error::config(key, l.no, "duplicate key"));
        }
        *pos += 1;
        let node = if !rest.trim().is_empty() {
            value_node(rest, l.no)?
        } else {
            match lines.get(*pos) {
                Some(next) if next.indent > indent && next.body.starts_with('-') => {
                    let child = next.indent;
                    let mut items = Vec::new();
                    while let Some(item) = lines.get(*pos).filter(|n| n.indent == child) {
                        let v = item
                            .body
                            .strip_prefix('-')
                            .filter(|v| v.is_empty() || v.starts_with(' '))
                            .ok_or_else(|| err(item.no, "expected `- value`"))?;
                        match value_node(v, item.no)? {
                            Node::Scalar(s) if !s.text.is_empty() => items.push(s),
                            _ => return Err(err(item.no, "block list items must be plain scalars")),
                        }
                        *pos += 1;
                    }
                    Node::List { items, line: l.no }
                }
                Some(next) if next.indent > indent => {
                    let mut child = parse_mapping(lines, pos, next.indent)?;
                    child.line = l.no;
                    Node::Map(child)
                }
                _ => Node::Map(Mapping { entries: Vec::new(), line: l.no }),
            }
        };
        map.entries.push((key.to_string(), node));
    }
    Ok(map)
}

/// Parses a document into its top-level mapping.
pub fn parse(text: &str) -> Result<Mapping> {
    let mut lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let no = n + 1;
        let without = strip_comment(raw.trim_end_matches('\r')).trim_end();
        if without.trim().is_empty() || without.trim() == "---" {
            continue;
        }
        let body = without.trim_start_matches(' ');
        if body.starts_with('\t') {
            return Err(err(no, "tabs are not allowed for indentation"));
        }
        lines.push(Line {
            no,
            indent: without.len() - body.len(),
            body,
        });
    }
    let mut pos = 0;
    let indent = lines.first().map_or(0, |l| l.indent);
    let map = parse_mapping(&lines, &mut pos, indent)?;
    if let Some(l) = lines.get(pos) {
        return Err(err(l.no, "unexpected dedent"));
    }
    Ok(map)
}

/// Quotes a scalar when the plain form would not read back identically.
pub fn render_scalar(s: &str) -> String {
    let plain_ok = !s.is_empty()
        && s.trim() == s
        && !s.contains(['#', ':', '"', '\'', '[', ']', ',', '{', '}', '\t', '\n', '\\'])
        && !s.starts_with(['-', '&', '*', '|', '>']);
    if plain_ok {
        return s.to_string();
    }
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
