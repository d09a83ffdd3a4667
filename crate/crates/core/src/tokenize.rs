//! Byte-level-BPE style pre-tokenization.
//!
//! Splits text into the word pieces a GPT-2 family tokenizer sees before
//! merging: contractions, a run of letters or digits with at most one leading
//! space, punctuation runs, and whitespace. The synthetic uniform model scores
//! one token per piece, and the validator uses the piece count as its default
//! token counter.

use std::sync::OnceLock;

use regex::Regex;

fn pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+")
            .expect("static pattern")
    })
}

/// Split `text` into pieces whose concatenation is `text`.
pub fn pretokenize(text: &str) -> Vec<&str> {
    pattern().find_iter(text).map(|m| m.as_str()).collect()
}

pub fn count_pieces(text: &str) -> usize {
    pattern().find_iter(text).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_names_split_on_words_and_punctuation() {
        assert_eq!(pretokenize(" Jane Austen."), vec![" Jane", " Austen", "."]);
        assert_eq!(pretokenize(" Wilde."), vec![" Wilde", "."]);
        assert_eq!(count_pieces(" Jane Austen."), 3);
        assert_eq!(count_pieces(" Wilde."), 2);
    }

    proptest::proptest! {
        #[test]
        fn pieces_concatenate_to_input(s in "\\PC{0,40}") {
            proptest::prop_assert_eq!(pretokenize(&s).concat(), s);
        }
    }
}
