// SPDX-License-Identifier: Apache-2.0

//! Binary PGM (P5) output for iteration maps.

use std::path::Path;

use aim_core::mandelbrot::IterationMap;

use crate::formats::{write_bytes, FormatError};

pub fn encode_pgm(map: &IterationMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width, map.height).into_bytes();
    out.extend(map.gray());
    out
}

pub fn write_pgm(map: &IterationMap, path: &Path) -> Result<(), FormatError> {
    write_bytes(path, &encode_pgm(map))
}

/// Width, height, maxval and pixel offset of a P5 image.
pub fn parse_pgm_header(bytes: &[u8]) -> Option<(usize, usize, u32, usize)> {
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if bytes.get(i) == Some(&b'#') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).ok()?);
    }
    if fields[0] != "P5" || i >= bytes.len() {
        return None;
    }
    // exactly one whitespace byte separates the header from the pixels
    Some((
        fields[1].parse().ok()?,
        fields[2].parse().ok()?,
        fields[3].parse().ok()?,
        i + 1,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_saturated_pixel() {
        let map = IterationMap {
            width: 1,
            height: 1,
            max_iter: 7,
            counts: vec![7],
        };
        let bytes = encode_pgm(&map);
        assert_eq!(bytes, b"P5\n1 1\n255\n\xff");
        assert_eq!(parse_pgm_header(&bytes), Some((1, 1, 255, bytes.len() - 1)));
    }

    #[test]
    fn header_round_trip() {
        let map = IterationMap {
            width: 5,
            height: 3,
            max_iter: 10,
            counts: (0..15).map(|c| c % 11).collect(),
        };
        let bytes = encode_pgm(&map);
        let (w, h, max, off) = parse_pgm_header(&bytes).unwrap();
        assert_eq!((w, h, max), (5, 3, 255));
        assert_eq!(bytes.len() - off, 15);
        assert_eq!(bytes[off + 10], 255);
        assert!(parse_pgm_header(b"P6\n1 1\n255\n\0").is_none());
    }
}
