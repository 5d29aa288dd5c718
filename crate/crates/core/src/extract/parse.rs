use unicode_normalization::UnicodeNormalization;

/// NFC, trimmed, internal whitespace collapsed to single spaces. Case is kept.
pub fn normalize_name(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Lowercase with every run of non-alphanumerics turned into one `_`.
pub fn normalize_relation(s: &str) -> String {
    let mut out = String::new();
    let mut gap = false;
    for c in s.nfc().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    out
}

/// Drops list markers such as `- `, `* `, `3. ` or `3) `.
fn strip_marker(line: &str) -> &str {
    let t = line.trim();
    if let Some(rest) = t.strip_prefix(['-', '*', '•']) {
        return rest.trim_start();
    }
    let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(['.', ')']) {
            return r.trim_start();
        }
    }
    t
}

/// One name per nonblank line.
pub fn parse_names(answer: &str) -> Vec<String> {
    answer
        .lines()
        .map(|l| normalize_name(strip_marker(l)))
        .filter(|n| !n.is_empty())
        .collect()
}

/// Lines of the form `x | r | y` (optionally wrapped in parentheses).
/// Each nonblank line yields `Ok((raw, [x, r, y]))` or `Err(raw)`.
pub fn parse_triples(answer: &str) -> Vec<Result<(String, [String; 3]), String>> {
    answer
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|raw| {
            let body = strip_marker(raw);
            let body = body
                .strip_prefix('(')
                .and_then(|b| b.strip_suffix(')'))
                .unwrap_or(body);
            let parts: Vec<String> = body.split('|').map(normalize_name).collect();
            match <[String; 3]>::try_from(parts) {
                Ok(f) if f.iter().all(|p| !p.is_empty()) => Ok((raw.to_string(), f)),
                _ => Err(raw.to_string()),
            }
        })
        .collect()
}
