use super::Verdict;

/// Read a verdict from a short completion.
///
/// The first alphabetic token decides: `includ…` is Include, `exclud…` is
/// Exclude, case-insensitively. Output mentioning both words is
/// Uninterpretable, as is anything else.
pub fn parse_verdict(raw: &str) -> Verdict {
    let lower = raw.to_lowercase();
    let first = lower
        .split(|c: char| !c.is_alphabetic())
        .find(|token| !token.is_empty());
    let mentions_include = lower.contains("includ");
    let mentions_exclude = lower.contains("exclud");
    match first {
        Some(token) if token.starts_with("includ") && !mentions_exclude => Verdict::Include,
        Some(token) if token.starts_with("exclud") && !mentions_include => Verdict::Exclude,
        _ => Verdict::Uninterpretable,
    }
}
