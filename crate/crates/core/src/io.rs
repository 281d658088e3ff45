//! Binary PGM (P5), CSV and JSON helpers.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Grey-level image as stored in a P5 file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples.
    pub data: Vec<u16>,
}

impl Pgm {
    pub fn new(width: usize, height: usize, maxval: u16, data: Vec<u16>) -> Result<Self> {
        if maxval == 0 || data.len() != width * height {
            return Err(Error::Format(format!(
                "pgm: {}x{} image needs {} samples, got {} (maxval {maxval})",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > maxval) {
            return Err(Error::Format(format!("pgm: sample {v} exceeds maxval {maxval}")));
        }
        Ok(Self {
            width,
            height,
            maxval,
            data,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        if self.maxval < 256 {
            out.extend(self.data.iter().map(|&v| v as u8));
        } else {
            for v in &self.data {
                out.extend_from_slice(&v.to_be_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("pgm: {what}"));
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("magic is not P5"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("non-numeric header field"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval == 0 || maxval > 65535 {
            return Err(bad("maxval out of range"));
        }
        pos += 1;
        let n = width * height;
        let body = &bytes[pos.min(bytes.len())..];
        let data: Vec<u16> = if maxval < 256 {
            if body.len() < n {
                return Err(bad("truncated raster"));
            }
            body[..n].iter().map(|&b| b as u16).collect()
        } else {
            if body.len() < 2 * n {
                return Err(bad("truncated raster"));
            }
            body[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        Pgm::new(width, height, maxval as u16, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| io_error(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(|e| io_error(path, e))?)
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Format(format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Pretty JSON with a trailing newline; field order follows the struct.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

/// CSV text from a header and rows of numbers, `{:.12e}` formatted.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
