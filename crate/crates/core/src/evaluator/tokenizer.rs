use serde::{Deserialize, Serialize};

/// Id reserved for the empty document.
pub const EMPTY_TOKEN: u32 = 0;

/// Lowercased alphanumeric runs; whitespace and punctuation separate tokens.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<u32>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Option<Self> {
        (!ids.is_empty()).then_some(Self { ids })
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Hashes words into `[1, vocab_size)`; id 0 is the empty-text token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    vocab_size: usize,
}

impl Tokenizer {
    pub fn new(vocab_size: usize) -> Self {
        assert!(
            vocab_size >= 2,
            "vocabulary needs the reserved id plus one word id"
        );
        Self { vocab_size }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn token_id(&self, word: &str) -> u32 {
        1 + (fnv1a(word.as_bytes()) % (self.vocab_size as u64 - 1)) as u32
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let ids: Vec<u32> = words(text).iter().map(|w| self.token_id(w)).collect();
        if ids.is_empty() {
            TokenSequence {
                ids: vec![EMPTY_TOKEN],
            }
        } else {
            TokenSequence { ids }
        }
    }
}
