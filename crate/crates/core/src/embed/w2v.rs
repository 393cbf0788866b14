//! word2vec text and binary formats.
//!
//! Values are stored as 32-bit floats in both encodings. Text values are
//! parsed as `f32` and widened, so a text file and its binary conversion
//! load to bitwise-equal matrices.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingFormat {
    Word2vecText,
    Word2vecBinary,
}

impl EmbeddingFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "word2vec-text" | "text" => Ok(Self::Word2vecText),
            "word2vec-binary" | "binary" => Ok(Self::Word2vecBinary),
            other => Err(Error::Config(format!("unknown embedding format {other:?}"))),
        }
    }
}

/// Vectors as they appear in a file, before alignment to a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub dim: usize,
    pub tokens: Vec<String>,
    /// Row-major, `tokens.len() * dim`.
    pub data: Vec<f32>,
}

impl WordVectors {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn parse_header(line: &str, offset: u64) -> Result<(usize, usize)> {
    let bad = |m: &str| Error::parse("embeddings", offset, m);
    let mut it = line.split_whitespace();
    let count = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("header lacks a vocabulary size"))?;
    let dim: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("header lacks a dimension"))?;
    if it.next().is_some() {
        return Err(bad("header has extra fields"));
    }
    if dim == 0 {
        return Err(bad("dimension must be positive"));
    }
    Ok((count, dim))
}

pub fn parse_text(bytes: &[u8]) -> Result<WordVectors> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("embeddings", e.valid_up_to() as u64, "invalid utf-8"))?;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| Error::parse("embeddings", 0, "empty file"))?;
    let (count, dim) = parse_header(header, 0)?;
    let mut offset = header.len() as u64;
    let mut tokens = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for line in lines {
        let at = offset;
        offset += line.len() as u64;
        let mut f = line.split_whitespace();
        let Some(tok) = f.next() else { continue };
        if tokens.len() == count {
            return Err(Error::parse("embeddings", at, format!("more than {count} vectors")));
        }
        let before = data.len();
        for v in f {
            let x: f32 = v
                .parse()
                .map_err(|_| Error::parse("embeddings", at, format!("bad value {v:?} for {tok}")))?;
            data.push(x);
        }
        if data.len() - before != dim {
            return Err(Error::parse(
                "embeddings",
                at,
                format!("{tok} has {} values, expected {dim}", data.len() - before),
            ));
        }
        tokens.push(tok.to_string());
    }
    if tokens.len() != count {
        return Err(Error::parse(
            "embeddings",
            offset,
            format!("truncated: {} of {count} vectors", tokens.len()),
        ));
    }
    Ok(WordVectors { dim, tokens, data })
}

pub fn parse_binary(bytes: &[u8]) -> Result<WordVectors> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse("embeddings", 0, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse("embeddings", 0, "header is not utf-8"))?;
    let (count, dim) = parse_header(header, 0)?;
    let mut pos = nl + 1;
    let mut tokens = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for i in 0..count {
        while pos < bytes.len() && (bytes[pos] == b'\n' || bytes[pos] == b' ') {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos] != b' ' {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(Error::parse(
                "embeddings",
                start as u64,
                format!("truncated: {i} of {count} vectors"),
            ));
        }
        let tok = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::parse("embeddings", start as u64, "token is not utf-8"))?;
        pos += 1;
        let need = 4 * dim;
        if bytes.len() - pos < need {
            return Err(Error::parse(
                "embeddings",
                pos as u64,
                format!("truncated vector for {tok}"),
            ));
        }
        for c in bytes[pos..pos + need].chunks_exact(4) {
            data.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
        }
        pos += need;
        tokens.push(tok.to_string());
    }
    Ok(WordVectors { dim, tokens, data })
}

pub fn write_text<W: Write>(w: &mut W, wv: &WordVectors) -> Result<()> {
    writeln!(w, "{} {}", wv.tokens.len(), wv.dim)?;
    for (i, t) in wv.tokens.iter().enumerate() {
        write!(w, "{t}")?;
        for x in wv.row(i) {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(w: &mut W, wv: &WordVectors) -> Result<()> {
    writeln!(w, "{} {}", wv.tokens.len(), wv.dim)?;
    for (i, t) in wv.tokens.iter().enumerate() {
        w.write_all(t.as_bytes())?;
        w.write_all(b" ")?;
        for x in wv.row(i) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_word_vectors(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<WordVectors> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    match format {
        EmbeddingFormat::Word2vecText => parse_text(&bytes),
        EmbeddingFormat::Word2vecBinary => parse_binary(&bytes),
    }
}

pub fn save_word_vectors(path: impl AsRef<Path>, wv: &WordVectors, format: EmbeddingFormat) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    match format {
        EmbeddingFormat::Word2vecText => write_text(&mut w, wv)?,
        EmbeddingFormat::Word2vecBinary => write_binary(&mut w, wv)?,
    }
    w.flush().map_err(|e| Error::file(path, e))
}
