//! Placeholder substitution for externally supplied prompt templates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Substitutes `{placeholder}` markers from the value map. A marker is a
/// brace-wrapped run of lowercase letters and underscores; anything else
/// involving braces passes through untouched. Markers without a mapped
/// value are configuration errors, so template typos fail loudly.
pub fn render_template(template: &str, values: &BTreeMap<&str, String>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let chars: Vec<char> = template.chars().collect();
    let mut index = 0;
    while index < chars.len() {
        if chars[index] == '{' {
            if let Some((name, end)) = read_placeholder(&chars, index) {
                match values.get(name.as_str()) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(Error::Config(format!(
                            "template references unknown placeholder {{{name}}}"
                        )));
                    }
                }
                index = end + 1;
                continue;
            }
        }
        out.push(chars[index]);
        index += 1;
    }
    Ok(out)
}

/// Returns the placeholder name and closing-brace position starting at
/// an opening brace, if the span matches the marker grammar.
fn read_placeholder(chars: &[char], start: usize) -> Option<(String, usize)> {
    let mut name = String::new();
    let mut index = start + 1;
    while index < chars.len() {
        let ch = chars[index];
        if ch == '}' {
            if name.is_empty() {
                return None;
            }
            return Some((name, index));
        }
        if ch.is_ascii_lowercase() || ch == '_' {
            name.push(ch);
            index += 1;
        } else {
            return None;
        }
    }
    None
}

/// Checks that a template mentions every placeholder its slot provides,
/// catching templates wired into the wrong role at load time.
pub fn ensure_placeholders(template: &str, required: &[&str]) -> Result<()> {
    for name in required {
        let marker = format!("{{{name}}}");
        if !template.contains(&marker) {
            return Err(Error::Config(format!(
                "template is missing the {marker} placeholder"
            )));
        }
    }
    Ok(())
}
