//! Answer normalization shared by matching, aggregation and the mock backend.

/// Lowercases, strips punctuation and splits on whitespace.
///
/// Apostrophes are dropped rather than split so "don't" stays one token.
pub fn normalize_answer(raw: &str) -> Vec<String> {
    let cleaned: String = raw
        .chars()
        .filter_map(|c| {
            if c == '\'' || c == '\u{2019}' {
                None
            } else if c.is_alphanumeric() || c.is_whitespace() {
                Some(c)
            } else {
                Some(' ')
            }
        })
        .collect();
    cleaned
        .split_whitespace()
        .map(|t| t.to_lowercase())
        .collect()
}

/// Normalized answer joined back into a single string.
pub fn normalized_string(raw: &str) -> String {
    normalize_answer(raw).join(" ")
}

/// Position of `needle` as a contiguous run inside `haystack`.
pub(crate) fn find_subsequence(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer("Yes."), vec!["yes"]);
        assert_eq!(normalize_answer("A yellow cup"), vec!["a", "yellow", "cup"]);
        assert!(normalize_answer("").is_empty());
        assert_eq!(normalize_answer("  NO!!  "), vec!["no"]);
        assert_eq!(normalize_answer("cup,glass"), vec!["cup", "glass"]);
        assert_eq!(normalize_answer("Don't"), vec!["dont"]);
    }

    #[test]
    fn subsequence_is_token_aligned() {
        let hay = normalize_answer("the mug is on top of the keyboard");
        assert_eq!(find_subsequence(&hay, &normalize_answer("on top of")), Some(3));
        assert_eq!(find_subsequence(&hay, &normalize_answer("top of the")), Some(4));
        assert_eq!(find_subsequence(&hay, &normalize_answer("under")), None);
        let hay = normalize_answer("one frontier");
        assert_eq!(find_subsequence(&hay, &normalize_answer("on")), None);
    }
}
