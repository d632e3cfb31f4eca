//! Binary dumps of dense matrices for cross-checking against other tools.
//!
//! Layout: the magic `HDLR`, then `u32` rows, `u32` cols and a reserved
//! `u32` (zero), all little-endian, followed by the entries as row-major
//! little-endian `f64`.

use std::io::{Read, Write};

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HDLR";
pub const HEADER_LEN: usize = 16;

pub fn write_dump(mut w: impl Write, a: MatRef<'_, f64>) -> Result<()> {
    let dim = |n: usize| u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} does not fit in u32")));
    let (m, n) = (dim(a.nrows())?, dim(a.ncols())?);
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * a.nrows() * a.ncols());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&m.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            buf.extend_from_slice(&a[(i, j)].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_dump(mut r: impl Read) -> Result<Mat<f64>> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap()) as usize;
    let (m, n) = (word(4), word(8));
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != 8 * m * n {
        return Err(Error::Format(format!(
            "expected {} payload bytes for {m}x{n}, found {}",
            8 * m * n,
            data.len()
        )));
    }
    Ok(Mat::from_fn(m, n, |i, j| {
        let k = 8 * (i * n + j);
        f64::from_le_bytes(data[k..k + 8].try_into().unwrap())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_layout() {
        let a = Mat::from_fn(2, 3, |i, j| (10 * i + j) as f64);
        let mut buf = Vec::new();
        write_dump(&mut buf, a.as_ref()).unwrap();
        assert_eq!(buf.len(), 16 + 6 * 8);
        assert_eq!(&buf[..4], b"HDLR");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[12..16], &[0; 4]);
        // row-major: second entry is a[(0, 1)]
        assert_eq!(&buf[24..32], &1.0f64.to_le_bytes());
        assert_eq!(read_dump(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(read_dump(&b"HDL"[..]), Err(Error::Format(_))));
        let mut buf = Vec::new();
        write_dump(&mut buf, Mat::<f64>::zeros(2, 2).as_ref()).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_dump(buf.as_slice()), Err(Error::Format(_))));
        buf[0] = b'H';
        buf.pop();
        assert!(matches!(read_dump(buf.as_slice()), Err(Error::Format(_))));
    }
}
