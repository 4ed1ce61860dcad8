//! Bit-sequence helpers shared by the codec, demodulator and file formats.

use crate::error::{Error, Result};

/// A sequence of bits, most significant first.
pub type Bits = Vec<bool>;

/// Parses a string of `'0'`/`'1'` characters.
pub fn parse_bits(s: &str) -> Result<Bits> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidPacket(format!("unexpected character `{other}` in bit string"))),
        })
        .collect()
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn count_ones(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}

/// Hex form of a bit sequence. Lengths that are not a multiple of four are
/// zero-padded on the right and suffixed with `/<bit length>`.
pub fn to_hex(bits: &[bool]) -> String {
    let mut s: String = bits
        .chunks(4)
        .map(|nib| {
            let v = (0..4).fold(0u32, |acc, i| (acc << 1) | nib.get(i).copied().unwrap_or(false) as u32);
            char::from_digit(v, 16).unwrap()
        })
        .collect();
    if bits.len() % 4 != 0 {
        s.push_str(&format!("/{}", bits.len()));
    }
    s
}

/// Inverse of [`to_hex`].
pub fn from_hex(s: &str) -> Result<Bits> {
    let s = s.trim();
    let (digits, len) = match s.split_once('/') {
        Some((d, n)) => {
            let n: usize = n
                .parse()
                .map_err(|_| Error::InvalidPacket(format!("bad bit length in `{s}`")))?;
            (d, Some(n))
        }
        None => (s, None),
    };
    let mut bits = Bits::with_capacity(digits.len() * 4);
    for c in digits.chars() {
        let v = c
            .to_digit(16)
            .ok_or_else(|| Error::InvalidPacket(format!("bad hex digit `{c}` in `{s}`")))?;
        bits.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
    }
    if let Some(n) = len {
        if n > bits.len() || bits.len() - n >= 4 {
            return Err(Error::InvalidPacket(format!("bit length {n} does not match `{digits}`")));
        }
        bits.truncate(n);
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn string_forms() {
        assert_eq!(parse_bits("0101").unwrap(), vec![false, true, false, true]);
        assert_eq!(bits_to_string(&parse_bits("110").unwrap()), "110");
        assert!(parse_bits("012").is_err());
        assert_eq!(to_hex(&parse_bits("00011111").unwrap()), "1f");
        assert_eq!(to_hex(&parse_bits("11").unwrap()), "c/2");
        assert!(from_hex("c/7").is_err());
        assert!(from_hex("xz").is_err());
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..80)) {
            prop_assert_eq!(from_hex(&to_hex(&bits)).unwrap(), bits);
        }
    }
}
