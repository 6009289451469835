//! Tag files.
//!
//! Binary layout, little-endian: magic `ADTG`, version `u16`, 32-byte
//! config hash, tag count `u64`, then per tag `trial_id u64`, `kind u8`,
//! `channel u8`, `time_ns u64`.
//!
//! Text layout: `#` header lines (including `# config_hash=<hex>`), then
//! `trial_id,kind,channel,time_ns` per line.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tag::{Channel, TimeTag, TrialKind};

pub const MAGIC: &[u8; 4] = b"ADTG";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 32 + 8;
const RECORD_LEN: usize = 8 + 1 + 1 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagFormat {
    Text,
    Binary,
}

#[derive(Debug, Error)]
pub enum TagIoError {
    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error("unsupported tag file: {0}")]
    Version(String),
}

/// Contents of a tag file.
#[derive(Debug, Clone, PartialEq)]
pub struct TagFile {
    pub format: TagFormat,
    pub config_hash: [u8; 32],
    pub tags: Vec<TimeTag>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TagIoError + '_ {
    move |source| TagIoError::Io { path: path.display().to_string(), source }
}

pub fn write_tags(
    tags: &[TimeTag],
    path: impl AsRef<Path>,
    format: TagFormat,
    config_hash: &[u8; 32],
) -> Result<(), TagIoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        TagFormat::Binary => write_binary(&mut w, tags, config_hash),
        TagFormat::Text => write_text(&mut w, tags, config_hash),
    };
    res.and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_binary(w: &mut impl Write, tags: &[TimeTag], hash: &[u8; 32]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(hash)?;
    w.write_all(&(tags.len() as u64).to_le_bytes())?;
    for t in tags {
        let mut rec = [0u8; RECORD_LEN];
        rec[0..8].copy_from_slice(&t.trial_id.to_le_bytes());
        rec[8] = t.kind.code();
        rec[9] = t.channel.code();
        rec[10..18].copy_from_slice(&t.time_ns.to_le_bytes());
        w.write_all(&rec)?;
    }
    Ok(())
}

fn write_text(w: &mut impl Write, tags: &[TimeTag], hash: &[u8; 32]) -> std::io::Result<()> {
    writeln!(w, "# afc-dlcz tags version={VERSION}")?;
    writeln!(w, "# config_hash={}", hex::encode(hash))?;
    writeln!(w, "# count={}", tags.len())?;
    writeln!(w, "# trial_id,kind,channel,time_ns")?;
    for t in tags {
        writeln!(w, "{},{},{},{}", t.trial_id, t.kind.code(), t.channel.code(), t.time_ns)?;
    }
    Ok(())
}

/// Reads either format; a file starting with `#` is text, anything else
/// must carry the binary magic.
pub fn read_tags(path: impl AsRef<Path>) -> Result<TagFile, TagIoError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    parse_tags(&bytes)
}

pub fn parse_tags(bytes: &[u8]) -> Result<TagFile, TagIoError> {
    if bytes.first() == Some(&b'#') {
        parse_text(bytes)
    } else {
        parse_binary(bytes)
    }
}

fn parse_binary(b: &[u8]) -> Result<TagFile, TagIoError> {
    if b.len() < 6 || &b[0..4] != MAGIC {
        return Err(TagIoError::Version("missing ADTG magic".into()));
    }
    let version = u16::from_le_bytes([b[4], b[5]]);
    if version != VERSION {
        return Err(TagIoError::Version(format!("format version {version}, expected {VERSION}")));
    }
    if b.len() < HEADER_LEN {
        return Err(TagIoError::Parse { offset: b.len() as u64, message: "truncated header".into() });
    }
    let mut config_hash = [0u8; 32];
    config_hash.copy_from_slice(&b[6..38]);
    let count = u64::from_le_bytes(b[38..46].try_into().expect("8 bytes"));
    let body = b.len() - HEADER_LEN;
    let expect = count.checked_mul(RECORD_LEN as u64);
    if expect != Some(body as u64) {
        let complete = (body / RECORD_LEN) as u64;
        return Err(TagIoError::Parse {
            offset: (HEADER_LEN as u64) + complete.min(count) * RECORD_LEN as u64,
            message: format!("header announces {count} tags but the body holds {body} bytes"),
        });
    }
    let mut tags = Vec::with_capacity(count as usize);
    for (k, rec) in b[HEADER_LEN..].chunks_exact(RECORD_LEN).enumerate() {
        let offset = (HEADER_LEN + k * RECORD_LEN) as u64;
        let kind = TrialKind::from_code(rec[8])
            .ok_or_else(|| TagIoError::Parse { offset: offset + 8, message: format!("bad trial kind {}", rec[8]) })?;
        let channel = Channel::from_code(rec[9])
            .ok_or_else(|| TagIoError::Parse { offset: offset + 9, message: format!("bad channel {}", rec[9]) })?;
        tags.push(TimeTag {
            trial_id: u64::from_le_bytes(rec[0..8].try_into().expect("8 bytes")),
            kind,
            channel,
            time_ns: u64::from_le_bytes(rec[10..18].try_into().expect("8 bytes")),
        });
    }
    Ok(TagFile { format: TagFormat::Binary, config_hash, tags })
}

fn parse_text(b: &[u8]) -> Result<TagFile, TagIoError> {
    let text = std::str::from_utf8(b).map_err(|e| TagIoError::Parse {
        offset: e.valid_up_to() as u64,
        message: "invalid UTF-8".into(),
    })?;
    let mut config_hash = None;
    let mut version_seen = false;
    let mut tags = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let here = offset;
        offset += line.len() as u64;
        let line = line.trim_end_matches(['\n', '\r']);
        if let Some(h) = line.strip_prefix('#') {
            let h = h.trim();
            if let Some(v) = h.strip_prefix("afc-dlcz tags version=") {
                if v != VERSION.to_string() {
                    return Err(TagIoError::Version(format!("format version {v}, expected {VERSION}")));
                }
                version_seen = true;
            } else if let Some(hx) = h.strip_prefix("config_hash=") {
                let v = hex::decode(hx).ok().filter(|v| v.len() == 32).ok_or_else(|| TagIoError::Parse {
                    offset: here,
                    message: "config_hash must be 64 hex digits".into(),
                })?;
                let mut arr = [0u8; 32];
                arr.copy_from_slice(&v);
                config_hash = Some(arr);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        tags.push(parse_line(line).map_err(|message| TagIoError::Parse { offset: here, message })?);
    }
    if !version_seen {
        return Err(TagIoError::Version("text header lacks the version line".into()));
    }
    let config_hash = config_hash.ok_or(TagIoError::Parse { offset: 0, message: "missing config_hash header".into() })?;
    Ok(TagFile { format: TagFormat::Text, config_hash, tags })
}

fn parse_line(line: &str) -> Result<TimeTag, String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 4 {
        return Err(format!("expected 4 fields, got {}", f.len()));
    }
    let num = |s: &str, what: &str| s.parse::<u64>().map_err(|e| format!("bad {what} {s:?}: {e}"));
    let kind = TrialKind::from_code(num(f[1], "kind")? as u8)
        .filter(|_| f[1].len() == 1)
        .ok_or_else(|| format!("bad trial kind {:?}", f[1]))?;
    let channel = Channel::from_code(num(f[2], "channel")? as u8)
        .filter(|_| f[2].len() == 1)
        .ok_or_else(|| format!("bad channel {:?}", f[2]))?;
    Ok(TimeTag { trial_id: num(f[0], "trial_id")?, kind, channel, time_ns: num(f[3], "time_ns")? })
}
