use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Dense term id. [`TermId::OOV`] marks tokens absent from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermId(pub u32);

impl TermId {
    pub const OOV: TermId = TermId(u32::MAX);

    pub fn is_oov(self) -> bool {
        self == Self::OOV
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijection between tokens and dense ids `0..len`, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TermId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `token`, assigning the next one if unseen.
    pub fn intern(&mut self, token: &str) -> TermId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = TermId(self.tokens.len() as u32);
        assert!(id != TermId::OOV, "vocabulary overflow");
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn lookup(&self, token: &str) -> TermId {
        self.ids.get(token).copied().unwrap_or(TermId::OOV)
    }

    /// Token for `id`; `None` for the OOV sentinel or out-of-range ids.
    pub fn token(&self, id: TermId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds from tokens listed in id order.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let mut v = Self::new();
        for t in &tokens {
            v.intern(t);
        }
        v
    }
}

/// Interns every token of every document in order.
pub fn build_vocabulary<'a, I, D>(docs: I) -> Vocabulary
where
    I: IntoIterator<Item = D>,
    D: IntoIterator<Item = &'a String>,
{
    let mut v = Vocabulary::new();
    for d in docs {
        for t in d {
            v.intern(t);
        }
    }
    v
}
