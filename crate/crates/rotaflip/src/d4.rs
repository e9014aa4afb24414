//! The dihedral group of the square acting on H x W maps.
//!
//! Eight elements, encoded 0..7: codes 0-3 are counterclockwise rotations by
//! `k * 90` degrees, codes 4-7 are the horizontal flip composed with those
//! rotations. All transforms are index permutations; no interpolation ever
//! happens, so applying a code and then its inverse restores a map bit for
//! bit.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One symmetry of the square. The discriminant is the wire encoding used in
/// files and logs. Rotations are counterclockwise; `FlipHRotN` means "rotate
/// by N, then flip horizontally". Geometrically code 5 is the anti-diagonal
/// reflection, code 6 the vertical flip, and code 7 the main-diagonal
/// reflection (transpose).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum D4Code {
    Identity = 0,
    Rot90 = 1,
    Rot180 = 2,
    Rot270 = 3,
    FlipH = 4,
    FlipHRot90 = 5,
    FlipV = 6,
    FlipHRot270 = 7,
}

/// All eight codes in wire order.
pub const ALL_CODES: [D4Code; 8] = [
    D4Code::Identity,
    D4Code::Rot90,
    D4Code::Rot180,
    D4Code::Rot270,
    D4Code::FlipH,
    D4Code::FlipHRot90,
    D4Code::FlipV,
    D4Code::FlipHRot270,
];

impl D4Code {
    pub fn from_index(i: usize) -> Result<D4Code> {
        ALL_CODES
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("D4 code {i} out of range 0..8")))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// True for the four reflections (codes 4-7).
    pub fn is_reflection(self) -> bool {
        self.index() >= 4
    }

    /// True if the code maps an H x W rectangle onto itself; the 90/270
    /// degree types swap the axes and therefore need square maps.
    pub fn preserves_rect(self) -> bool {
        matches!(
            self,
            D4Code::Identity | D4Code::Rot180 | D4Code::FlipH | D4Code::FlipV
        )
    }
}

/// Group composition: `compose(a, b)` is "apply `b`, then `a`", so that
/// `apply(m, compose(a, b)) == apply(apply(m, b), a)`.
pub fn compose(a: D4Code, b: D4Code) -> D4Code {
    // Write each element as f^s r^k (flip then rotation exponent). The
    // dihedral relation r f = f r^-1 gives the closed form below.
    let (sa, ka) = (a.index() / 4, a.index() % 4);
    let (sb, kb) = (b.index() / 4, b.index() % 4);
    let s = sa ^ sb;
    let k = if sb == 0 { (ka + kb) % 4 } else { (kb + 4 - ka) % 4 };
    ALL_CODES[s * 4 + k]
}

/// Inverse element: rotations invert to the complementary rotation,
/// reflections are involutions.
pub fn invert(t: D4Code) -> D4Code {
    let i = t.index();
    if i < 4 {
        ALL_CODES[(4 - i) % 4]
    } else {
        t
    }
}

fn check_dims(h: usize, w: usize, t: D4Code) -> Result<()> {
    if !t.preserves_rect() && h != w {
        return Err(Error::NonSquare { height: h, width: w });
    }
    Ok(())
}

/// Applies `t` to an `h x w` map stored row-major in `src`, writing into
/// `dst` (same length). Rejects non-square maps for the axis-swapping codes.
pub fn apply_into<T: Copy>(src: &[T], h: usize, w: usize, t: D4Code, dst: &mut [T]) -> Result<()> {
    assert_eq!(src.len(), h * w, "source length must be h*w");
    assert_eq!(dst.len(), h * w, "destination length must be h*w");
    check_dims(h, w, t)?;
    match t {
        D4Code::Identity => dst.copy_from_slice(src),
        D4Code::Rot90 => {
            // out[i][j] = in[j][W-1-i]
            let s = h;
            for i in 0..s {
                for j in 0..s {
                    dst[i * s + j] = src[j * s + (s - 1 - i)];
                }
            }
        }
        D4Code::Rot180 => {
            for (d, s) in dst.iter_mut().zip(src.iter().rev()) {
                *d = *s;
            }
        }
        D4Code::Rot270 => {
            // out[i][j] = in[H-1-j][i]
            let s = h;
            for i in 0..s {
                for j in 0..s {
                    dst[i * s + j] = src[(s - 1 - j) * s + i];
                }
            }
        }
        D4Code::FlipH => {
            // out[i][j] = in[i][W-1-j]
            for i in 0..h {
                let row = &src[i * w..(i + 1) * w];
                for j in 0..w {
                    dst[i * w + j] = row[w - 1 - j];
                }
            }
        }
        D4Code::FlipHRot90 => {
            // rot90 then flipH: out[i][j] = in[S-1-j][S-1-i]
            let s = h;
            for i in 0..s {
                for j in 0..s {
                    dst[i * s + j] = src[(s - 1 - j) * s + (s - 1 - i)];
                }
            }
        }
        D4Code::FlipV => {
            // out[i][j] = in[H-1-i][j]
            for i in 0..h {
                let (src_row, dst_row) = (
                    &src[(h - 1 - i) * w..(h - i) * w],
                    &mut dst[i * w..(i + 1) * w],
                );
                dst_row.copy_from_slice(src_row);
            }
        }
        D4Code::FlipHRot270 => {
            // rot270 then flipH: transpose, out[i][j] = in[j][i]
            let s = h;
            for i in 0..s {
                for j in 0..s {
                    dst[i * s + j] = src[j * s + i];
                }
            }
        }
    }
    Ok(())
}

/// Allocating variant of [`apply_into`].
pub fn apply<T: Copy>(src: &[T], h: usize, w: usize, t: D4Code) -> Result<Vec<T>> {
    let mut dst = src.to_vec();
    apply_into(src, h, w, t, &mut dst)?;
    Ok(dst)
}

/// The eight transformed versions of a square map, ordered by code 0..7.
pub fn orbit<T: Copy>(src: &[T], h: usize, w: usize) -> Result<Vec<Vec<T>>> {
    if h != w {
        return Err(Error::NonSquare { height: h, width: w });
    }
    ALL_CODES
        .iter()
        .map(|&t| apply(src, h, w, t))
        .collect()
}

/// Uniform draw over all eight codes.
pub fn sample_code(stream: &mut RngStream) -> D4Code {
    // next_f64 has 53 random bits; the top three select the code exactly
    // uniformly.
    ALL_CODES[(stream.next_f64() * 8.0) as usize]
}

/// Uniform draw over the seven non-identity codes; the sensitivity-check
/// alternative to [`sample_code`].
pub fn sample_code_excluding_identity(stream: &mut RngStream) -> D4Code {
    let i = 1 + ((stream.next_f64() * 7.0) as usize).min(6);
    ALL_CODES[i]
}
