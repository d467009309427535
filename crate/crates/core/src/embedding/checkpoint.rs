//! Embedding checkpoint files.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "TSEMBED\0"
//! version      u32      1
//! dimension    u32
//! n_terms      u32
//! n_docs       u32
//! n_categories u32
//! terms        n_terms × (u32 byte length, UTF-8 bytes)
//! center       n_terms × dimension f64
//! context      n_terms × dimension f64
//! documents    n_docs × dimension f64
//! categories   n_categories × dimension f64
//! kappa        n_terms f64
//! ```
//!
//! The text export has one line per term: `term kappa u_1 ... u_p`.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

use super::EmbeddingSpace;

const MAGIC: &[u8; 8] = b"TSEMBED\0";
const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(mut out: W, space: &EmbeddingSpace, terms: &[String]) -> io::Result<()> {
    if terms.len() != space.num_terms() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "term list does not match the embedding space",
        ));
    }
    out.write_all(MAGIC)?;
    for n in [
        VERSION,
        space.dim as u32,
        space.num_terms() as u32,
        space.num_docs() as u32,
        space.num_categories() as u32,
    ] {
        out.write_all(&n.to_le_bytes())?;
    }
    for term in terms {
        out.write_all(&(term.len() as u32).to_le_bytes())?;
        out.write_all(term.as_bytes())?;
    }
    for block in [
        &space.center,
        &space.context,
        &space.docs,
        &space.categories,
        &space.kappa,
    ] {
        for x in block.iter() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(EmbeddingSpace, Vec<String>)> {
    let bad = |m: &str| Error::Format(format!("embedding checkpoint: {m}"));
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let read_u32 = |input: &mut R| -> Result<u32> {
        let mut b = [0u8; 4];
        input.read_exact(&mut b).map_err(|_| bad("truncated header"))?;
        Ok(u32::from_le_bytes(b))
    };
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut input)? as usize;
    let n_terms = read_u32(&mut input)? as usize;
    let n_docs = read_u32(&mut input)? as usize;
    let n_cats = read_u32(&mut input)? as usize;

    let mut terms = Vec::with_capacity(n_terms);
    for _ in 0..n_terms {
        let len = read_u32(&mut input)? as usize;
        let mut buf = vec![0u8; len];
        input.read_exact(&mut buf).map_err(|_| bad("truncated term table"))?;
        terms.push(String::from_utf8(buf).map_err(|_| bad("term is not UTF-8"))?);
    }
    let mut read_block = |count: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; count * 8];
        input.read_exact(&mut buf).map_err(|_| bad("truncated vector block"))?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    };
    let center = read_block(n_terms * dim)?;
    let context = read_block(n_terms * dim)?;
    let docs = read_block(n_docs * dim)?;
    let categories = read_block(n_cats * dim)?;
    let kappa = read_block(n_terms)?;
    let space = EmbeddingSpace::from_parts(dim, center, context, docs, categories, kappa)?;
    Ok((space, terms))
}

pub fn write_text_export<W: Write>(mut out: W, space: &EmbeddingSpace, terms: &[String]) -> io::Result<()> {
    for (i, term) in terms.iter().enumerate() {
        write!(out, "{term} {}", space.kappa[i])?;
        for x in &space.center[i * space.dim..(i + 1) * space.dim] {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let space = EmbeddingSpace::random(3, 2, 2, 5, 1.5, 9);
        let terms: Vec<String> = ["a", "bé", "c_d"].iter().map(|s| s.to_string()).collect();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &space, &terms).unwrap();
        assert_eq!(
            buf.len(),
            8 + 20 + (4 * 3 + 1 + 3 + 3) + 8 * (3 * 5 * 2 + 2 * 5 + 2 * 5 + 3)
        );
        let (back, back_terms) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, space);
        assert_eq!(back_terms, terms);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOTMAGIC"[..]).is_err());
        let space = EmbeddingSpace::random(1, 1, 1, 2, 1.0, 1);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &space, &["x".to_string()]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }

    #[test]
    fn text_export_lines() {
        let space = EmbeddingSpace::random(2, 1, 1, 3, 1.0, 1);
        let mut buf = Vec::new();
        write_text_export(&mut buf, &space, &["a".into(), "b".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(' ').count(), 5);
        assert!(lines[0].starts_with("a 1 "));
    }
}
