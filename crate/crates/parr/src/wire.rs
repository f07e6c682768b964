//! Little-endian binary primitives shared by the checkpoint, network, and
//! replay snapshot formats.
//!
//! Every on-disk format in this crate is a flat sequence of the fields below,
//! so round-trips are bit-exact by construction.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub fn write_u8(w: &mut dyn Write, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub fn write_u32(w: &mut dyn Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u64(w: &mut dyn Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u128(w: &mut dyn Write, v: u128) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64(w: &mut dyn Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64_slice(w: &mut dyn Write, vs: &[f64]) -> Result<()> {
    for &v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

pub fn write_bool(w: &mut dyn Write, v: bool) -> Result<()> {
    write_u8(w, u8::from(v))
}

pub fn write_bytes(w: &mut dyn Write, bytes: &[u8]) -> Result<()> {
    write_u64(w, bytes.len() as u64)?;
    w.write_all(bytes)?;
    Ok(())
}

pub fn read_u8(r: &mut dyn Read) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

pub fn read_u32(r: &mut dyn Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_u64(r: &mut dyn Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_u128(r: &mut dyn Read) -> Result<u128> {
    let mut buf = [0u8; 16];
    r.read_exact(&mut buf)?;
    Ok(u128::from_le_bytes(buf))
}

pub fn read_f64(r: &mut dyn Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn read_f64_vec(r: &mut dyn Read, len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

pub fn read_bool(r: &mut dyn Read) -> Result<bool> {
    match read_u8(r)? {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Format(format!("invalid bool byte {other}"))),
    }
}

pub fn read_bytes(r: &mut dyn Read) -> Result<Vec<u8>> {
    let len = read_u64(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Reads a fixed magic tag and fails with a format error if it differs.
pub fn expect_magic(r: &mut dyn Read, magic: &[u8]) -> Result<()> {
    let mut buf = vec![0u8; magic.len()];
    r.read_exact(&mut buf)?;
    if buf != magic {
        return Err(Error::Format(format!(
            "bad magic: expected {:?}, got {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

/// Reads a u32 version field and validates it against the supported value.
pub fn expect_version(r: &mut dyn Read, supported: u32) -> Result<()> {
    let v = read_u32(r)?;
    if v != supported {
        return Err(Error::Format(format!(
            "unsupported format version {v} (supported: {supported})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_primitives() {
        let mut buf = Vec::new();
        write_u8(&mut buf, 7).unwrap();
        write_u32(&mut buf, 0xDEAD_BEEF).unwrap();
        write_u64(&mut buf, u64::MAX - 3).unwrap();
        write_u128(&mut buf, u128::MAX / 5).unwrap();
        write_f64(&mut buf, -0.125).unwrap();
        write_bool(&mut buf, true).unwrap();
        write_bytes(&mut buf, b"abc").unwrap();

        let mut r: &[u8] = &buf;
        assert_eq!(read_u8(&mut r).unwrap(), 7);
        assert_eq!(read_u32(&mut r).unwrap(), 0xDEAD_BEEF);
        assert_eq!(read_u64(&mut r).unwrap(), u64::MAX - 3);
        assert_eq!(read_u128(&mut r).unwrap(), u128::MAX / 5);
        assert_eq!(read_f64(&mut r).unwrap(), -0.125);
        assert!(read_bool(&mut r).unwrap());
        assert_eq!(read_bytes(&mut r).unwrap(), b"abc");
        assert!(r.is_empty());
    }

    #[test]
    fn magic_mismatch_is_format_error() {
        let mut r: &[u8] = b"NOPE";
        let err = expect_magic(&mut r, b"GOOD").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn f64_bits_survive() {
        for v in [f64::MIN_POSITIVE, -0.0, 1.0 / 3.0, f64::MAX] {
            let mut buf = Vec::new();
            write_f64(&mut buf, v).unwrap();
            let mut r: &[u8] = &buf;
            assert_eq!(read_f64(&mut r).unwrap().to_bits(), v.to_bits());
        }
    }
}
