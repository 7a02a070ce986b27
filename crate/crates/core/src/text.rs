//! Tokenization shared by the criterion matrix and the family keyword rules.

const STOP_WORDS: [&str; 50] = [
    "the", "and", "for", "with", "that", "this", "are", "was", "were", "from", "into", "onto",
    "over", "under", "about", "such", "their", "they", "them", "then", "than", "also", "other",
    "which", "while", "when", "where", "who", "whom", "whose", "what", "will", "would", "can",
    "could", "should", "may", "might", "must", "has", "have", "had", "not", "but", "all", "any",
    "each", "its", "our", "your",
];

pub fn is_stop_word(token: &str) -> bool {
    STOP_WORDS.contains(&token)
}

/// Lowercase alphanumeric runs, no filtering.
pub fn raw_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercase alphanumeric runs of at least three characters, stop words removed.
pub fn tokenize(text: &str) -> Vec<String> {
    raw_tokens(text)
        .into_iter()
        .filter(|t| t.chars().count() >= 3 && !is_stop_word(t))
        .collect()
}

/// True when `phrase` (already tokenized) occurs as a contiguous run in `tokens`.
pub fn contains_phrase(tokens: &[String], phrase: &[&str]) -> bool {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return false;
    }
    tokens
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_drops_short_and_stop_words() {
        assert_eq!(
            tokenize("The AI engineer, with cloud-native skills"),
            vec!["engineer", "cloud", "native", "skills"]
        );
    }

    #[test]
    fn raw_tokens_keep_short_terms() {
        assert_eq!(raw_tokens("UI/UX designer"), vec!["ui", "ux", "designer"]);
    }

    #[test]
    fn phrase_matching_is_contiguous() {
        let toks = raw_tokens("senior user interface developer");
        assert!(contains_phrase(&toks, &["user", "interface"]));
        assert!(!contains_phrase(&toks, &["user", "developer"]));
    }
}
