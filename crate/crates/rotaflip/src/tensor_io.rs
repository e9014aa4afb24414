//! Binary tensor file format used for checkpoints and fixtures.
//!
//! Layout: magic `RTFL`, format version `u16`, precision tag `u8`
//! (1 = single, 2 = double), four `u32` shape fields (N, C, H, W), then the
//! raw little-endian element payload. Round-trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Precision, Scalar, Tensor};

const MAGIC: &[u8; 4] = b"RTFL";
const VERSION: u16 = 1;

pub fn encode_tensor<T: Scalar>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 2 + 1 + 16 + t.len() * T::BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::PRECISION.tag());
    for d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut out);
    }
    out
}

pub fn decode_tensor<T: Scalar>(bytes: &[u8], origin: &str) -> Result<Tensor<T>> {
    let err = |offset: usize, message: String| Error::Parse {
        path: origin.to_string(),
        offset,
        message,
    };
    if bytes.len() < 23 {
        return Err(err(bytes.len(), "truncated header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(err(0, format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(err(4, format!("unsupported format version {version}")));
    }
    let precision = Precision::from_tag(bytes[6])
        .map_err(|e| err(6, e.to_string()))?;
    if precision != T::PRECISION {
        return Err(err(
            6,
            format!(
                "precision tag {:?} does not match requested {:?}",
                precision,
                T::PRECISION
            ),
        ));
    }
    let mut shape = [0usize; 4];
    for (i, d) in shape.iter_mut().enumerate() {
        let o = 7 + i * 4;
        *d = u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    }
    let count: usize = shape.iter().product();
    let payload = &bytes[23..];
    if payload.len() != count * T::BYTES {
        return Err(err(
            23,
            format!(
                "payload is {} bytes, shape {:?} needs {}",
                payload.len(),
                shape,
                count * T::BYTES
            ),
        ));
    }
    let data = payload
        .chunks_exact(T::BYTES)
        .map(T::read_le)
        .collect::<Vec<_>>();
    Tensor::from_vec(shape, data)
}

pub fn write_tensor<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_tensor(t))?;
    Ok(())
}

pub fn read_tensor<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact_in_both_precisions() {
        let data: Vec<f64> = (0..24).map(|i| (i as f64) * 0.1 - 1.2).collect();
        let t64 = Tensor::<f64>::from_vec([2, 3, 2, 2], data.clone()).unwrap();
        let back64 = decode_tensor::<f64>(&encode_tensor(&t64), "mem").unwrap();
        assert_eq!(t64, back64);

        let t32 = t64.cast::<f32>();
        let back32 = decode_tensor::<f32>(&encode_tensor(&t32), "mem").unwrap();
        assert_eq!(t32, back32);
    }

    #[test]
    fn precision_tag_mismatch_is_rejected() {
        let t = Tensor::<f32>::zeros([1, 1, 2, 2]);
        let bytes = encode_tensor(&t);
        let e = decode_tensor::<f64>(&bytes, "mem").unwrap_err();
        assert!(e.to_string().contains("precision"));
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let t = Tensor::<f64>::zeros([1, 1, 2, 2]);
        let mut bytes = encode_tensor(&t);
        bytes.truncate(bytes.len() - 3);
        let e = decode_tensor::<f64>(&bytes, "mem").unwrap_err();
        assert!(e.to_string().contains("byte 23"), "{e}");
    }
}
