//! Little-endian primitives shared by the packed file formats.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub fn write_magic(w: &mut impl Write, magic: &[u8; 4], version: u32) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(version)?;
    Ok(())
}

/// Reads and checks the 4-byte magic, returning the version field.
pub fn read_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<u32> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)
        .map_err(|_| Error::Format("file too short for header".into()))?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(r.read_u32::<LittleEndian>()?)
}

pub fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_str(r: &mut impl Read) -> Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("string length {len} is implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_f64s(w: &mut impl Write, vals: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in vals {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)
        .map_err(|_| Error::Format(format!("expected {n} float64 values")))?;
    Ok(out)
}

/// Packs booleans LSB-first, eight per byte.
pub fn pack_bits(bits: impl IntoIterator<Item = bool>) -> Vec<u8> {
    let mut out = Vec::new();
    for (i, b) in bits.into_iter().enumerate() {
        if i % 8 == 0 {
            out.push(0);
        }
        if b {
            *out.last_mut().expect("pushed") |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

pub use byteorder::LittleEndian as LE;
pub use byteorder::{ReadBytesExt as ReadLe, WriteBytesExt as WriteLe};
