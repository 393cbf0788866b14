//! Single-file index persistence. The layout is described in
//! `docs/formats.md`; postings are stored and checked against the forward
//! store on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use super::index::{IndexMeta, InvertedIndex, StoredDocument};
use crate::binio::{write_str, FieldReader};
use crate::error::{Error, Result};
use crate::text::{PubDate, TermId, Vocabulary};

pub const INDEX_MAGIC: &[u8; 4] = b"RRIX";
pub const INDEX_VERSION: u32 = 1;

pub fn write_index<W: Write>(w: &mut W, ix: &InvertedIndex) -> Result<()> {
    w.write_all(INDEX_MAGIC)?;
    w.write_u32::<LittleEndian>(INDEX_VERSION)?;
    write_str(w, &ix.meta.stemmer)?;
    write_str(w, &ix.meta.stopword_hash)?;
    write_str(w, &ix.meta.corpus_hash)?;
    w.write_u32::<LittleEndian>(ix.vocab.len() as u32)?;
    for t in ix.vocab.tokens() {
        write_str(w, t)?;
    }
    w.write_u32::<LittleEndian>(ix.docs.len() as u32)?;
    for d in &ix.docs {
        write_str(w, &d.doc_id)?;
        match &d.date {
            None => w.write_u8(0)?,
            Some(p) => {
                w.write_u8(1)?;
                w.write_u16::<LittleEndian>(p.year)?;
                w.write_u8(p.month.unwrap_or(0))?;
                w.write_u8(p.day.unwrap_or(0))?;
            }
        }
        w.write_u32::<LittleEndian>(d.terms.len() as u32)?;
        for t in &d.terms {
            w.write_u32::<LittleEndian>(t.0)?;
        }
    }
    for p in &ix.postings {
        w.write_u32::<LittleEndian>(p.len() as u32)?;
        for x in p {
            w.write_u32::<LittleEndian>(x.doc)?;
            w.write_u32::<LittleEndian>(x.tf)?;
        }
    }
    Ok(())
}

pub fn read_index<R: Read>(r: R) -> Result<InvertedIndex> {
    let mut r = FieldReader::new(r, "index");
    r.magic(INDEX_MAGIC)?;
    let version = r.u32()?;
    if version != INDEX_VERSION {
        return Err(r.err(4, format!("unsupported index version {version}")));
    }
    let meta = IndexMeta {
        stemmer: r.string()?,
        stopword_hash: r.string()?,
        corpus_hash: r.string()?,
    };
    let nv = r.u32()? as usize;
    let mut tokens = Vec::with_capacity(nv);
    for _ in 0..nv {
        tokens.push(r.string()?);
    }
    let vocab = Vocabulary::from_tokens(tokens);
    if vocab.len() != nv {
        return Err(r.err(12, "vocabulary has repeated tokens"));
    }
    let nd = r.u32()? as usize;
    let mut docs: Vec<StoredDocument> = Vec::with_capacity(nd);
    for _ in 0..nd {
        let at = r.pos();
        let doc_id = r.string()?;
        let date = match r.u8()? {
            0 => None,
            1 => {
                let year = r.u16()?;
                let m = r.u8()?;
                let d = r.u8()?;
                Some(PubDate {
                    year,
                    month: (m != 0).then_some(m),
                    day: (d != 0).then_some(d),
                })
            }
            f => return Err(r.err(at, format!("bad date flag {f}"))),
        };
        let len = r.u32()? as usize;
        let mut raw = vec![0u32; len];
        r.u32s(&mut raw)?;
        if raw.iter().any(|&t| t as usize >= nv) {
            return Err(r.err(at, format!("document {doc_id} has an out-of-range term id")));
        }
        if docs.last().is_some_and(|p| p.doc_id >= doc_id) {
            return Err(r.err(at, "documents are not in ascending doc_id order"));
        }
        docs.push(StoredDocument {
            doc_id,
            terms: raw.into_iter().map(TermId).collect(),
            date,
        });
    }
    let posting_start = r.pos();
    let mut stored = Vec::with_capacity(nv);
    for _ in 0..nv {
        let n = r.u32()? as usize;
        let mut raw = vec![0u32; 2 * n];
        r.u32s(&mut raw)?;
        stored.push(raw);
    }
    r.end()?;
    let ix = InvertedIndex::from_parts(meta, vocab, docs)?;
    for (t, raw) in stored.iter().enumerate() {
        let p = &ix.postings[t];
        let same = raw.len() == 2 * p.len()
            && p.iter().zip(raw.chunks(2)).all(|(x, c)| x.doc == c[0] && x.tf == c[1]);
        if !same {
            return Err(Error::parse(
                "index",
                posting_start,
                format!("postings for term {t} disagree with the document store"),
            ));
        }
    }
    Ok(ix)
}

pub fn save_index(path: impl AsRef<Path>, ix: &InvertedIndex) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    write_index(&mut w, ix)?;
    w.flush().map_err(|e| Error::file(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    read_index(BufReader::new(f))
}
