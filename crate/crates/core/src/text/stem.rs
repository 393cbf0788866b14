use rust_stemmers::Algorithm;

/// Maps a lowercased token to its stem.
pub trait Stemmer {
    /// Identifier recorded in index metadata.
    fn id(&self) -> &str;
    fn stem(&self, token: &str) -> String;
}

/// Porter2 (Snowball English), applied until the output stops changing so
/// that re-stemming a stem is a no-op.
pub struct PorterStemmer {
    inner: rust_stemmers::Stemmer,
}

impl PorterStemmer {
    pub fn new() -> Self {
        Self {
            inner: rust_stemmers::Stemmer::create(Algorithm::English),
        }
    }
}

impl Default for PorterStemmer {
    fn default() -> Self {
        Self::new()
    }
}

impl Stemmer for PorterStemmer {
    fn id(&self) -> &str {
        "porter"
    }

    fn stem(&self, token: &str) -> String {
        let mut cur = token.to_string();
        for _ in 0..8 {
            let next = self.inner.stem(&cur).into_owned();
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

/// No stemming.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityStemmer;

impl Stemmer for IdentityStemmer {
    fn id(&self) -> &str {
        "none"
    }

    fn stem(&self, token: &str) -> String {
        token.to_string()
    }
}
