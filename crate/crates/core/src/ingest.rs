//! Manifest and embedding file formats.
//!
//! The manifest is a comma-separated file with the exact header
//! `image_id,subject_id,race,gender,capture_date,embedding_index`, one image
//! per line, dates as `YYYY-MM-DD`. Fields are never quoted, so ids may not
//! contain commas or line breaks.
//!
//! The embedding container is a 16-byte header followed by the payload:
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 4    | ASCII magic `EMB1`              |
//! | 4      | 4    | dimension, `u32` little-endian  |
//! | 8      | 8    | count, `u64` little-endian      |
//! | 16     | 4·d·n| row-major `f32` little-endian   |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::data_model::{earliest_capture_date, DemographicGroup, EmbeddingStore, ImageRecord};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "image_id,subject_id,race,gender,capture_date,embedding_index";
pub const IMAGE_MANIFEST_HEADER: &str = "image_id,path";
pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";
pub const EMBEDDING_HEADER_LEN: u64 = 16;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Splits text into `(line_no, line)` pairs, 1-based, tolerating CRLF and a
/// single trailing newline.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let text = text.strip_suffix('\n').unwrap_or(text);
    text.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn bad_row(line: usize, reason: impl Into<String>) -> Error {
    Error::BadRow {
        line,
        reason: reason.into(),
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ImageRecord>> {
    let mut lines = numbered_lines(text);
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    if header != MANIFEST_HEADER {
        return Err(Error::MalformedHeader {
            expected: MANIFEST_HEADER.into(),
            found: header.into(),
        });
    }
    let earliest = earliest_capture_date();
    let mut records = Vec::new();
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(bad_row(line, format!("expected 6 fields, found {}", fields.len())));
        }
        for (name, value) in ["image_id", "subject_id", "race", "gender"].iter().zip(&fields) {
            if value.is_empty() {
                return Err(bad_row(line, format!("empty {name}")));
            }
        }
        let capture_date =
            NaiveDate::parse_from_str(fields[4], DATE_FORMAT).map_err(|_| bad_row(line, "invalid date"))?;
        if capture_date < earliest {
            return Err(bad_row(line, "date before 1900-01-01"));
        }
        let embedding_index = fields[5]
            .parse::<usize>()
            .map_err(|_| bad_row(line, "invalid embedding_index"))?;
        records.push(ImageRecord {
            image_id: fields[0].into(),
            subject_id: fields[1].into(),
            group: DemographicGroup::new(fields[2], fields[3]),
            capture_date,
            embedding_index,
        });
    }
    Ok(records)
}

/// Reads a dataset manifest; one record per data row, in file order.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    parse_manifest(&read_text(path.as_ref())?)
}

fn check_field(value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.contains([',', '\n', '\r']) {
        return Err(Error::InvalidArgument(format!(
            "{what} `{value}` is empty or contains a comma or line break"
        )));
    }
    Ok(())
}

pub fn format_manifest(records: &[ImageRecord]) -> Result<String> {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(MANIFEST_HEADER);
    out.push('\n');
    for r in records {
        check_field(&r.image_id, "image_id")?;
        check_field(&r.subject_id, "subject_id")?;
        check_field(&r.group.race, "race")?;
        check_field(&r.group.gender, "gender")?;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.image_id,
            r.subject_id,
            r.group.race,
            r.group.gender,
            r.capture_date.format(DATE_FORMAT),
            r.embedding_index
        ));
    }
    Ok(out)
}

pub fn write_manifest(records: &[ImageRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_manifest(records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Decodes an embedding container from `reader`, given the total byte length
/// of the source. The payload buffer is allocated only after the length has
/// been checked against the header.
pub fn decode_embeddings<R: Read>(mut reader: R, total_len: u64) -> Result<EmbeddingStore> {
    if total_len < EMBEDDING_HEADER_LEN {
        let mut magic = [0u8; 4];
        if total_len < 4 || reader.read_exact(&mut magic).is_err() || &magic != EMBEDDING_MAGIC {
            return Err(Error::BadMagic);
        }
        return Err(Error::TruncatedFile {
            expected: EMBEDDING_HEADER_LEN,
            actual: total_len,
        });
    }
    let mut header = [0u8; EMBEDDING_HEADER_LEN as usize];
    reader
        .read_exact(&mut header)
        .map_err(|e| Error::io("<embeddings>", e))?;
    if &header[0..4] != EMBEDDING_MAGIC {
        return Err(Error::BadMagic);
    }
    let dimension = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    if dimension == 0 {
        return Err(Error::InvalidHeader("dimension is zero".into()));
    }
    let payload = (dimension as u64)
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(EMBEDDING_HEADER_LEN))
        .ok_or_else(|| Error::InvalidHeader("dimension x count overflows".into()))?;
    if payload != total_len {
        return Err(Error::TruncatedFile {
            expected: payload,
            actual: total_len,
        });
    }
    let floats = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(dimension))
        .ok_or_else(|| Error::InvalidHeader("count does not fit in memory".into()))?;
    let mut data = Vec::with_capacity(floats);
    let mut buf = [0u8; 4096];
    let mut remaining = floats * 4;
    while remaining > 0 {
        let take = remaining.min(buf.len());
        reader
            .read_exact(&mut buf[..take])
            .map_err(|e| Error::io("<embeddings>", e))?;
        for chunk in buf[..take].chunks_exact(4) {
            let value = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { index: data.len() });
            }
            data.push(value);
        }
        remaining -= take;
    }
    EmbeddingStore::new(dimension, data)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    decode_embeddings(BufReader::new(file), len)
}

pub fn encode_embeddings<W: Write>(store: &EmbeddingStore, mut writer: W) -> std::io::Result<()> {
    let dimension = u32::try_from(store.dimension())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32"))?;
    writer.write_all(EMBEDDING_MAGIC)?;
    writer.write_all(&dimension.to_le_bytes())?;
    writer.write_all(&(store.count() as u64).to_le_bytes())?;
    for value in store.as_flat() {
        writer.write_all(&value.to_le_bytes())?;
    }
    writer.flush()
}

pub fn write_embeddings(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_embeddings(store, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// One row of an image manifest: an image id and the path of its PNG.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageEntry {
    pub image_id: String,
    pub path: String,
}

pub fn parse_image_manifest(text: &str) -> Result<Vec<ImageEntry>> {
    let mut lines = numbered_lines(text);
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    if header != IMAGE_MANIFEST_HEADER {
        return Err(Error::MalformedHeader {
            expected: IMAGE_MANIFEST_HEADER.into(),
            found: header.into(),
        });
    }
    lines
        .map(|(line, row)| match row.split_once(',') {
            Some((id, path)) if !id.is_empty() && !path.is_empty() && !path.contains(',') => Ok(ImageEntry {
                image_id: id.into(),
                path: path.into(),
            }),
            _ => Err(bad_row(line, "expected `image_id,path`")),
        })
        .collect()
}

pub fn read_image_manifest(path: impl AsRef<Path>) -> Result<Vec<ImageEntry>> {
    parse_image_manifest(&read_text(path.as_ref())?)
}

pub fn write_image_manifest(entries: &[ImageEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(IMAGE_MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        check_field(&e.image_id, "image_id")?;
        check_field(&e.path, "path")?;
        out.push_str(&e.image_id);
        out.push(',');
        out.push_str(&e.path);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
