//! Term canonicalization shared by node identity and search cache keys.

/// Canonical form of a term: whitespace collapsed to single spaces, trimmed,
/// and case-folded. Node ids and cache keys both use this rule so that graph
/// growth and cache hits agree on entity identity.
pub fn canonical_term(term: &str) -> String {
    term.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace_and_case() {
        assert_eq!(canonical_term("  Parkinson's   Disease \n"), "parkinson's disease");
        assert_eq!(canonical_term("Levodopa"), "levodopa");
    }

    #[test]
    fn empty_and_blank_map_to_empty() {
        assert_eq!(canonical_term(""), "");
        assert_eq!(canonical_term(" \t\n"), "");
    }

    #[test]
    fn idempotent() {
        let once = canonical_term("  BOTULISM  toxin ");
        assert_eq!(canonical_term(&once), once);
    }
}
