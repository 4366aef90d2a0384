//! File formats.
//!
//! COO text: a header line `I1 I2 I3 nnz` followed by `nnz` lines of
//! `i1 i2 i3 value`, whitespace separated, indices 1-based.
//!
//! Dense binary: magic `DT3\0`, three little-endian `u64` extents, then
//! `I1*I2*I3` little-endian `f64` values in canonical (mode-1 column) order.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::dense::DenseTensor3;
use super::shape::Shape3;
use super::sparse::SparseTensor3;
use crate::error::{NortError, Result};

pub const DENSE_MAGIC: [u8; 4] = *b"DT3\0";

pub fn read_coo<R: Read>(reader: R) -> Result<SparseTensor3> {
    let mut reader = BufReader::new(reader);
    let mut line = String::new();
    let mut offset = 0usize;
    let mut header: Option<(Shape3, usize)> = None;
    let mut entries = Vec::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        let start = offset;
        offset += n;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(NortError::parse(
                start,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        match header {
            None => {
                let mut nums = [0usize; 4];
                for (slot, f) in nums.iter_mut().zip(&fields) {
                    *slot = f
                        .parse()
                        .map_err(|_| NortError::parse(start, format!("bad header field {f:?}")))?;
                }
                let shape = Shape3::new(nums[0], nums[1], nums[2])
                    .map_err(|e| NortError::parse(start, e.to_string()))?;
                header = Some((shape, nums[3]));
                entries.reserve(nums[3]);
            }
            Some((shape, _)) => {
                let mut idx = [0usize; 3];
                for (k, slot) in idx.iter_mut().enumerate() {
                    let one_based: usize = fields[k].parse().map_err(|_| {
                        NortError::parse(start, format!("bad index {:?}", fields[k]))
                    })?;
                    if one_based == 0 || one_based > shape.dims()[k] {
                        return Err(NortError::parse(
                            start,
                            format!("index {one_based} outside extent {}", shape.dims()[k]),
                        ));
                    }
                    *slot = one_based - 1;
                }
                let value: f64 = fields[3]
                    .parse()
                    .map_err(|_| NortError::parse(start, format!("bad value {:?}", fields[3])))?;
                entries.push((idx, value));
            }
        }
    }
    let (shape, nnz) = header.ok_or_else(|| NortError::parse(0, "missing header"))?;
    if entries.len() != nnz {
        return Err(NortError::parse(
            offset,
            format!("header declares {nnz} entries, found {}", entries.len()),
        ));
    }
    SparseTensor3::from_entries(shape, entries)
}

pub fn write_coo<W: Write>(t: &SparseTensor3, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let [a, b, c] = t.shape().dims();
    writeln!(w, "{a} {b} {c} {}", t.nnz())?;
    for (idx, v) in t.iter() {
        // `{:?}` on f64 prints the shortest string that parses back exactly.
        writeln!(w, "{} {} {} {:?}", idx[0] + 1, idx[1] + 1, idx[2] + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dense<R: Read>(reader: R) -> Result<DenseTensor3> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| NortError::parse(0, "truncated magic"))?;
    if magic != DENSE_MAGIC {
        return Err(NortError::parse(0, "bad magic, expected DT3\\0"));
    }
    let mut dims = [0usize; 3];
    let mut buf = [0u8; 8];
    for (k, d) in dims.iter_mut().enumerate() {
        r.read_exact(&mut buf)
            .map_err(|_| NortError::parse(4 + 8 * k, "truncated extents"))?;
        *d = usize::try_from(u64::from_le_bytes(buf))
            .map_err(|_| NortError::parse(4 + 8 * k, "extent exceeds usize"))?;
    }
    let shape =
        Shape3::new(dims[0], dims[1], dims[2]).map_err(|e| NortError::parse(4, e.to_string()))?;
    let mut data = Vec::with_capacity(shape.numel());
    for i in 0..shape.numel() {
        r.read_exact(&mut buf)
            .map_err(|_| NortError::parse(28 + 8 * i, "truncated values"))?;
        data.push(f64::from_le_bytes(buf));
    }
    let end = 28 + 8 * shape.numel();
    if r.read(&mut buf)? != 0 {
        return Err(NortError::parse(end, "trailing bytes after values"));
    }
    DenseTensor3::from_vec(shape, data)
}

pub fn write_dense<W: Write>(t: &DenseTensor3, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(&DENSE_MAGIC)?;
    for d in t.shape().dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_coo(path: impl AsRef<Path>) -> Result<SparseTensor3> {
    read_coo(std::fs::File::open(path)?)
}

pub fn save_coo(t: &SparseTensor3, path: impl AsRef<Path>) -> Result<()> {
    write_coo(t, std::fs::File::create(path)?)
}

pub fn load_dense(path: impl AsRef<Path>) -> Result<DenseTensor3> {
    read_dense(std::fs::File::open(path)?)
}

pub fn save_dense(t: &DenseTensor3, path: impl AsRef<Path>) -> Result<()> {
    write_dense(t, std::fs::File::create(path)?)
}
