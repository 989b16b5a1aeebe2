//! Word-level tokenizer and vocabulary.
//!
//! Tokens are alphanumeric runs and single punctuation characters; line
//! breaks become the SEP token so rendered input layouts keep their
//! structure. The vocabulary is built from the corpus with a size cap,
//! most-frequent-first with lexicographic tiebreaks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SEP: usize = 4;

const SPECIAL_TOKENS: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<unk>", "<sep>"];

/// Split text into word/punctuation tokens; newlines yield "<sep>".
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        if i > 0 {
            tokens.push("<sep>".to_string());
        }
        let mut word = String::new();
        for ch in line.chars() {
            if ch.is_alphanumeric() {
                word.push(ch);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                if !ch.is_whitespace() {
                    tokens.push(ch.to_string());
                }
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    id_to_token: Vec<String>,
    #[serde(skip)]
    token_to_id: HashMap<String, usize>,
}

impl Vocab {
    /// Build from corpus texts, keeping at most `cap` tokens (specials
    /// included). Ties in frequency break lexicographically.
    pub fn build<'a>(texts: impl Iterator<Item = &'a str>, cap: usize) -> Vocab {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for token in tokenize(text) {
                if token != "<sep>" {
                    *counts.entry(token).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

        let mut id_to_token: Vec<String> =
            SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let budget = cap.saturating_sub(SPECIAL_TOKENS.len());
        id_to_token.extend(ranked.into_iter().take(budget).map(|(t, _)| t));
        Vocab::from_tokens(id_to_token)
    }

    pub fn from_tokens(id_to_token: Vec<String>) -> Vocab {
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            id_to_token,
            token_to_id,
        }
    }

    /// Restore the lookup map after deserialization.
    pub fn rebuild_index(self) -> Vocab {
        Vocab::from_tokens(self.id_to_token)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.id_to_token.get(id).map(String::as_str).unwrap_or("<unk>")
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    /// Join tokens with spaces; SEP renders as a newline.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if id == SEP {
                out.push('\n');
                continue;
            }
            if matches!(id, PAD | BOS | EOS) {
                continue;
            }
            if !out.is_empty() && !out.ends_with('\n') {
                out.push(' ');
            }
            out.push_str(self.token(id));
        }
        out
    }

    /// Content hash over the token list, for checkpoint integrity.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.id_to_token.join("\n").as_bytes());
        digest.iter().take(16).map(|b| format!("{:02x}", b)).collect()
    }
}
