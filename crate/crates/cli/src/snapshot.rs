//! Binary snapshot records.
//!
//! Layout (little endian): magic `CGQG`, u32 version, u32 nx, u32 ny,
//! u32 layers, f64 dt, f64 time, u64 params hash, then `layers * ny * nx`
//! f64 values, layer-major and row-major within a layer.

use crate::error::{CliError, Result};
use closure_lab::LayeredField;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"CGQG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 44;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dt: f64,
    pub params_hash: u64,
    pub field: LayeredField,
}

impl Snapshot {
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 8 * self.field.values.len()
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let f = &self.field;
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        for d in [f.nx, f.ny, f.layers] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.dt.to_le_bytes());
        buf.extend_from_slice(&f.time.to_le_bytes());
        buf.extend_from_slice(&self.params_hash.to_le_bytes());
        for v in &f.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut b).expect("vec write");
        b
    }

    /// Reads one record; `Ok(None)` on a clean end of stream.
    pub fn read_from(r: &mut impl Read) -> std::result::Result<Option<Self>, String> {
        let mut head = [0u8; HEADER_LEN];
        let mut got = 0;
        while got < HEADER_LEN {
            match r.read(&mut head[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err("truncated header".into()),
                Ok(n) => got += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.to_string()),
            }
        }
        if &head[..4] != MAGIC {
            return Err("bad magic".into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(head[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(head[o..o + 8].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let (nx, ny, layers) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
        let dt = f64_at(20);
        let time = f64_at(28);
        let params_hash = u64::from_le_bytes(head[36..44].try_into().unwrap());
        let n = nx
            .checked_mul(ny)
            .and_then(|v| v.checked_mul(layers))
            .filter(|&n| n > 0 && n <= 1 << 28)
            .ok_or_else(|| format!("implausible shape {layers}x{ny}x{nx}"))?;
        let mut data = vec![0u8; 8 * n];
        r.read_exact(&mut data)
            .map_err(|_| "truncated data".to_string())?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut field =
            LayeredField::from_values(nx, ny, layers, values).map_err(|e| e.to_string())?;
        field.time = time;
        Ok(Some(Snapshot {
            dt,
            params_hash,
            field,
        }))
    }

    pub fn from_bytes(b: &[u8]) -> std::result::Result<Self, String> {
        let mut r = b;
        let s = Self::read_from(&mut r)?.ok_or("empty input")?;
        if !r.is_empty() {
            return Err(format!("{} trailing bytes", r.len()));
        }
        Ok(s)
    }
}

/// Reads every record of a concatenated snapshot file.
pub fn read_series(path: &std::path::Path) -> Result<Vec<Snapshot>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let mut out = Vec::new();
    while let Some(s) = Snapshot::read_from(&mut r).map_err(|e| CliError::format(path, e))? {
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(nx: usize, ny: usize, layers: usize, values: Vec<f64>, time: f64) -> Snapshot {
        let mut field = LayeredField::from_values(nx, ny, layers, values).unwrap();
        field.time = time;
        Snapshot {
            dt: 7200.0,
            params_hash: 0xdead_beef_0123_4567,
            field,
        }
    }

    #[test]
    fn header_layout() {
        let s = snap(2, 1, 1, vec![1.5, -2.0], 3600.0);
        let b = s.to_bytes();
        assert_eq!(b.len(), HEADER_LEN + 16);
        assert_eq!(&b[..4], b"CGQG");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..16], &1u32.to_le_bytes());
        assert_eq!(&b[16..20], &1u32.to_le_bytes());
        assert_eq!(&b[20..28], &7200.0f64.to_le_bytes());
        assert_eq!(&b[28..36], &3600.0f64.to_le_bytes());
        assert_eq!(&b[44..52], &1.5f64.to_le_bytes());
    }

    #[test]
    fn rejects_corrupt_input() {
        let b = snap(2, 2, 2, vec![0.0; 8], 0.0).to_bytes();
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Snapshot::from_bytes(&bad).is_err());
        let mut bad = b.clone();
        bad[4] = 9;
        assert!(Snapshot::from_bytes(&bad).is_err());
        assert!(Snapshot::from_bytes(&b[..b.len() - 1]).is_err());
        assert!(Snapshot::from_bytes(&b[..10]).is_err());
        let mut long = b.clone();
        long.push(0);
        assert!(Snapshot::from_bytes(&long).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            nx in 1usize..6,
            ny in 1usize..6,
            layers in 1usize..3,
            bits in prop::collection::vec(any::<u64>(), 72),
            time in any::<f64>(),
        ) {
            // arbitrary bit patterns, NaN payloads included
            let values: Vec<f64> = bits[..nx * ny * layers].iter().map(|&b| f64::from_bits(b)).collect();
            let s = snap(nx, ny, layers, values, time);
            let back = Snapshot::from_bytes(&s.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), s.to_bytes());
            prop_assert_eq!(back.field.time.to_bits(), time.to_bits());
        }
    }
}
