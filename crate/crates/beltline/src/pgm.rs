//! Binary PGM (P5, maxval 255) reading and writing.

use std::io::{self, Write};
use std::path::Path;

use beltline_core::vision::Frame;

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("not a binary PGM file")]
    Magic,
    #[error("malformed PGM header: {0}")]
    Header(&'static str),
    #[error("only maxval 255 is supported, got {0}")]
    Maxval(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.pixels());
    out
}

pub fn write(frame: &Frame, mut w: impl Write) -> io::Result<()> {
    w.write_all(&encode(frame))
}

pub fn save(frame: &Frame, path: &Path) -> io::Result<()> {
    std::fs::write(path, encode(frame))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u32, PgmError> {
        self.skip_blank();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::Header(what))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Frame, PgmError> {
    if !bytes.starts_with(b"P5") {
        return Err(PgmError::Magic);
    }
    let mut c = Cursor { bytes, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if maxval != 255 {
        return Err(PgmError::Maxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(c.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::Header("missing separator after maxval"));
    }
    let data = &bytes[c.pos + 1..];
    let expected = width as usize * height as usize;
    if data.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: data.len(),
        });
    }
    Frame::from_pixels(width, height, data[..expected].to_vec()).map_err(|_| PgmError::Header("dimensions"))
}

pub fn load(path: &Path) -> Result<Frame, PgmError> {
    decode(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let f = Frame::filled(3, 2, 7);
        let bytes = encode(&f);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(bytes.len(), 11 + 6);
    }

    #[test]
    fn comments_are_skipped() {
        let mut bytes = b"P5 # made by hand\n2 # w\n1\n255\n".to_vec();
        bytes.extend([1, 2]);
        let f = decode(&bytes).unwrap();
        assert_eq!(f.pixels(), &[1, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(decode(b"P2\n1 1\n255\n0"), Err(PgmError::Magic)));
        assert!(matches!(decode(b"P5\n1 1\n65535\n00"), Err(PgmError::Maxval(65535))));
        assert!(matches!(decode(b"P5\n2 2\n255\n\x01"), Err(PgmError::Truncated { .. })));
    }
}
