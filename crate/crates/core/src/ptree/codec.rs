//! Flat little-endian snapshot layout:
//!
//! ```text
//! p          f64
//! n          u64
//! signs      n x i8   (-1, 0, +1)
//! weights    n x f64  (|x_i|^p)
//! ```
//!
//! Internal sums are not stored; they are rebuilt on load.

use super::{check_exponent, WeightedVectorTree};
use crate::error::{Error, Result};

const HEADER_LEN: usize = 16;

impl WeightedVectorTree {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 9 * self.len);
        out.extend_from_slice(&self.p.to_le_bytes());
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        out.extend(self.signs.iter().map(|&s| s as u8));
        for w in self.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Decode(format!(
                "need at least {HEADER_LEN} header bytes, got {}",
                bytes.len()
            )));
        }
        let p = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
        check_exponent(p).map_err(|e| Error::Decode(e.to_string()))?;
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let n = usize::try_from(n).map_err(|_| Error::Decode(format!("length {n} too large")))?;
        if n == 0 {
            return Err(Error::Decode("length is zero".into()));
        }
        let expected = n
            .checked_mul(9)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Decode(format!("length {n} too large")))?;
        if bytes.len() != expected {
            return Err(Error::Decode(format!(
                "expected {expected} bytes for n = {n}, got {}",
                bytes.len()
            )));
        }
        let sign_bytes = &bytes[HEADER_LEN..HEADER_LEN + n];
        let weight_bytes = &bytes[HEADER_LEN + n..];

        let capacity = n.next_power_of_two();
        let mut nodes = vec![0.0; 2 * capacity];
        let mut signs = Vec::with_capacity(n);
        for (i, (&sb, chunk)) in sign_bytes.iter().zip(weight_bytes.chunks_exact(8)).enumerate() {
            let s = sb as i8;
            let w = f64::from_le_bytes(chunk.try_into().unwrap());
            if !(-1..=1).contains(&s) {
                return Err(Error::Decode(format!("sign byte {sb:#04x} at index {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Decode(format!("weight {w} at index {i}")));
            }
            if (s == 0) != (w == 0.0) {
                return Err(Error::Decode(format!(
                    "sign {s} inconsistent with weight {w} at index {i}"
                )));
            }
            signs.push(s);
            nodes[capacity + i] = w;
        }
        let mut tree = Self {
            p,
            len: n,
            capacity,
            nodes,
            signs,
        };
        tree.rebuild();
        Ok(tree)
    }
}
