//! Textual screening that keeps agent queries read-only and single-statement.

const WRITE_KEYWORDS: [&str; 8] = [
    "INSERT", "UPDATE", "DELETE", "DROP", "ALTER", "CREATE", "ATTACH", "REPLACE",
];

/// Rejects statements the sandbox refuses to run, returning the message
/// that will be surfaced as engine-error feedback. The screen works on a
/// stripped copy of the SQL so keywords inside comments or string
/// literals cannot trigger it.
pub fn screen_statement(sql: &str) -> Result<(), String> {
    let stripped = strip_comments_and_literals(sql);

    if let Some(keyword) = first_keyword(&stripped) {
        let upper = keyword.to_uppercase();
        if WRITE_KEYWORDS.contains(&upper.as_str()) {
            return Err(format!(
                "{upper} statements are not permitted in the read-only sandbox"
            ));
        }
    }

    let logical = stripped.trim_end();
    if let Some(position) = logical.find(';') {
        if position + 1 < logical.len() {
            return Err(
                "multiple statements are not permitted; submit a single statement".to_string(),
            );
        }
    }
    Ok(())
}

/// Replaces string literals, quoted identifiers, and comments with
/// spaces, preserving everything else.
fn strip_comments_and_literals(sql: &str) -> String {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = String::with_capacity(sql.len());
    let mut index = 0;
    while index < chars.len() {
        let ch = chars[index];
        match ch {
            '-' if chars.get(index + 1) == Some(&'-') => {
                while index < chars.len() && chars[index] != '\n' {
                    index += 1;
                }
            }
            '/' if chars.get(index + 1) == Some(&'*') => {
                index += 2;
                while index < chars.len() {
                    if chars[index] == '*' && chars.get(index + 1) == Some(&'/') {
                        index += 2;
                        break;
                    }
                    index += 1;
                }
                out.push(' ');
            }
            '\'' | '"' | '`' => {
                index = skip_quoted(&chars, index, ch);
                out.push(' ');
            }
            '[' => {
                while index < chars.len() && chars[index] != ']' {
                    index += 1;
                }
                index += 1;
                out.push(' ');
            }
            _ => {
                out.push(ch);
                index += 1;
            }
        }
    }
    out
}

/// Advances past a quoted region, honoring doubled-quote escapes.
fn skip_quoted(chars: &[char], start: usize, quote: char) -> usize {
    let mut index = start + 1;
    while index < chars.len() {
        if chars[index] == quote {
            if chars.get(index + 1) == Some(&quote) {
                index += 2;
                continue;
            }
            return index + 1;
        }
        index += 1;
    }
    index
}

fn first_keyword(stripped: &str) -> Option<String> {
    let mut word = String::new();
    for ch in stripped.chars() {
        if ch.is_ascii_alphabetic() || ch == '_' {
            word.push(ch);
        } else if !word.is_empty() {
            break;
        } else if !ch.is_whitespace() && ch != '(' {
            break;
        }
    }
    if word.is_empty() {
        None
    } else {
        Some(word)
    }
}
