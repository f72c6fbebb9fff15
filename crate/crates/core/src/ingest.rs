//! Tweet corpus ingestion.
//!
//! Two wire formats are supported:
//!
//! * the SNAP 2009 three-line format (`T <timestamp>`, `U http://twitter.com/<user>`,
//!   `W <text>`, blocks separated by blank lines), and
//! * line-delimited flat JSON objects with `user`, `text` and `created_at` fields.
//!
//! Malformed entries never abort a parse. They are skipped and tallied in
//! [`ParseOutcome::malformed`]. Input is consumed in batches cut at record
//! boundaries and each batch is split into chunks that are parsed under the
//! caller's [`Execution`]; record order is always preserved.

use std::fmt;
use std::io::{self, Read, Write};
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Platform limit on handle length. Longer runs in retweet markers are truncated.
pub const MAX_USERNAME_LEN: usize = 15;

const SNAP_TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
const SNAP_HEADER_PREFIX: &str = "total number:";
const SNAP_URL_HOST: &str = "twitter.com/";

/// Bytes read per streaming batch before a cut at the last record boundary.
const STREAM_BATCH_BYTES: usize = 8 << 20;
/// Smallest chunk handed to a single parse task.
const MIN_CHUNK_BYTES: usize = 64 << 10;

pub(crate) fn is_username_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Validate a handle and fold it to lowercase.
pub fn normalize_username(raw: &str) -> Result<String> {
    let valid =
        !raw.is_empty() && raw.len() <= MAX_USERNAME_LEN && raw.bytes().all(is_username_byte);
    if valid {
        Ok(raw.to_ascii_lowercase())
    } else {
        Err(Error::InvalidUsername(raw.to_string()))
    }
}

/// One normalized tweet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TweetRecord {
    author: String,
    timestamp: i64,
    text: String,
}

impl TweetRecord {
    /// Builds a record, lowercasing the author and replacing any line breaks
    /// in `text` with spaces.
    pub fn new(author: &str, timestamp: i64, text: &str) -> Result<Self> {
        let author = normalize_username(author)?;
        let text = if text.contains(['\n', '\r']) {
            text.replace(['\n', '\r'], " ")
        } else {
            text.to_string()
        };
        Ok(Self {
            author,
            timestamp,
            text,
        })
    }

    pub fn author(&self) -> &str {
        &self.author
    }

    /// Seconds since the Unix epoch, UTC.
    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Usernames following each `RT @` marker of a tweet, in textual order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct RetweetChain {
    relays: Vec<String>,
}

impl RetweetChain {
    pub fn relays(&self) -> &[String] {
        &self.relays
    }

    pub fn len(&self) -> usize {
        self.relays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }

    pub fn into_relays(self) -> Vec<String> {
        self.relays
    }
}

/// Extract the retweet chain from tweet text.
///
/// A marker is `RT` (any case), exactly one space, then `@`, not preceded by a
/// handle character (so `ART @x` is not a marker). The username is the maximal
/// run of `[A-Za-z0-9_]` after the `@`, truncated to 15 characters. Markers
/// followed by no handle character are ignored. A trailing colon is optional.
pub fn extract_retweet_chain(text: &str) -> RetweetChain {
    let bytes = text.as_bytes();
    let mut relays = Vec::new();
    let mut i = 0;
    while i + 4 <= bytes.len() {
        let is_marker = bytes[i].eq_ignore_ascii_case(&b'r')
            && bytes[i + 1].eq_ignore_ascii_case(&b't')
            && bytes[i + 2] == b' '
            && bytes[i + 3] == b'@'
            && (i == 0 || !is_username_byte(bytes[i - 1]));
        if !is_marker {
            i += 1;
            continue;
        }
        let start = i + 4;
        let mut end = start;
        while end < bytes.len() && is_username_byte(bytes[end]) {
            end += 1;
        }
        if end > start {
            let cut = end.min(start + MAX_USERNAME_LEN);
            relays.push(text[start..cut].to_ascii_lowercase());
        }
        i = end.max(start);
    }
    RetweetChain { relays }
}

/// Supported corpus wire formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireFormat {
    Snap,
    Jsonl,
}

impl FromStr for WireFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "snap" => Ok(WireFormat::Snap),
            "jsonl" => Ok(WireFormat::Jsonl),
            other => Err(Error::Domain(format!("unknown wire format {other:?}"))),
        }
    }
}

impl fmt::Display for WireFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WireFormat::Snap => "snap",
            WireFormat::Jsonl => "jsonl",
        })
    }
}

/// Records recovered from a stream plus the number of skipped entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseOutcome {
    pub records: Vec<TweetRecord>,
    pub malformed: u64,
}

impl ParseOutcome {
    /// Entries examined: kept records plus malformed ones.
    pub fn entries_seen(&self) -> u64 {
        self.records.len() as u64 + self.malformed
    }

    pub fn append(&mut self, mut other: ParseOutcome) {
        self.records.append(&mut other.records);
        self.malformed += other.malformed;
    }
}

/// Parse a SNAP-format timestamp (`YYYY-MM-DD HH:MM:SS`, UTC).
pub fn parse_snap_timestamp(raw: &str) -> Result<i64> {
    NaiveDateTime::parse_from_str(raw.trim(), SNAP_TIME_FORMAT)
        .map(|dt| dt.and_utc().timestamp())
        .map_err(|_| Error::InvalidTimestamp(raw.to_string()))
}

/// Format epoch seconds as a SNAP timestamp.
pub fn format_snap_timestamp(timestamp: i64) -> Result<String> {
    DateTime::from_timestamp(timestamp, 0)
        .map(|dt| dt.format(SNAP_TIME_FORMAT).to_string())
        .ok_or_else(|| Error::InvalidTimestamp(timestamp.to_string()))
}

fn username_from_profile_url(url: &str) -> Option<String> {
    let url = url.trim();
    let lower = url.to_ascii_lowercase();
    let rest_at = ["https://", "http://", ""]
        .iter()
        .find(|scheme| lower.starts_with(*scheme))
        .map(|scheme| scheme.len())?;
    let mut rest = &lower[rest_at..];
    let mut offset = rest_at;
    if let Some(stripped) = rest.strip_prefix("www.") {
        rest = stripped;
        offset += 4;
    }
    if !rest.starts_with(SNAP_URL_HOST) {
        return None;
    }
    offset += SNAP_URL_HOST.len();
    let handle = url[offset..].trim_end_matches('/');
    normalize_username(handle).ok()
}

/// Splits a line into its single-letter tag and the value after one separator.
fn snap_tag(line: &str) -> Option<(u8, &str)> {
    let bytes = line.as_bytes();
    match bytes.first() {
        Some(&tag @ (b'T' | b'U' | b'W')) => match bytes.get(1) {
            None => Some((tag, "")),
            Some(b' ' | b'\t') => Some((tag, &line[2..])),
            _ => None,
        },
        _ => None,
    }
}

#[derive(Default)]
struct PartialBlock {
    timestamp: Option<i64>,
    author: Option<String>,
    seen_user_line: bool,
    broken: bool,
}

fn parse_snap_chunk(chunk: &[u8]) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    let mut current: Option<PartialBlock> = None;

    let text = String::from_utf8_lossy(chunk);
    for raw in text.split('\n') {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if current.take().is_some() {
                out.malformed += 1;
            }
            continue;
        }
        match snap_tag(line) {
            Some((b'T', value)) => {
                if current.take().is_some() {
                    out.malformed += 1;
                }
                let timestamp = parse_snap_timestamp(value).ok();
                current = Some(PartialBlock {
                    broken: timestamp.is_none(),
                    timestamp,
                    ..Default::default()
                });
            }
            Some((b'U', value)) => {
                let block = current.get_or_insert_with(|| PartialBlock {
                    broken: true,
                    ..Default::default()
                });
                if block.seen_user_line {
                    block.broken = true;
                }
                block.seen_user_line = true;
                block.author = username_from_profile_url(value);
                if block.author.is_none() {
                    block.broken = true;
                }
            }
            Some((_, value)) => {
                // W line closes the block.
                match current.take() {
                    Some(PartialBlock {
                        timestamp: Some(timestamp),
                        author: Some(author),
                        broken: false,
                        ..
                    }) => match TweetRecord::new(&author, timestamp, value) {
                        Ok(record) => out.records.push(record),
                        Err(_) => out.malformed += 1,
                    },
                    _ => out.malformed += 1,
                }
            }
            None => match current.as_mut() {
                Some(block) => block.broken = true,
                None if line.starts_with(SNAP_HEADER_PREFIX) => {}
                None => {
                    current = Some(PartialBlock {
                        broken: true,
                        ..Default::default()
                    })
                }
            },
        }
    }
    if current.is_some() {
        out.malformed += 1;
    }
    out
}

#[derive(serde::Deserialize)]
struct JsonTweet {
    user: String,
    text: String,
    created_at: JsonTimestamp,
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum JsonTimestamp {
    Epoch(i64),
    Snap(String),
}

#[derive(Serialize)]
struct JsonTweetOut<'a> {
    user: &'a str,
    text: &'a str,
    created_at: i64,
}

fn parse_jsonl_line(line: &[u8]) -> Option<TweetRecord> {
    let tweet: JsonTweet = serde_json::from_slice(line).ok()?;
    let timestamp = match tweet.created_at {
        JsonTimestamp::Epoch(ts) => ts,
        JsonTimestamp::Snap(raw) => parse_snap_timestamp(&raw).ok()?,
    };
    TweetRecord::new(&tweet.user, timestamp, &tweet.text).ok()
}

fn parse_jsonl_chunk(chunk: &[u8]) -> ParseOutcome {
    let mut out = ParseOutcome::default();
    for line in chunk.split(|&b| b == b'\n') {
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        match parse_jsonl_line(line) {
            Some(record) => out.records.push(record),
            None => out.malformed += 1,
        }
    }
    out
}

/// Offsets where a new record may start. Cutting input at any of these
/// yields the same records as parsing it whole.
fn is_boundary(format: WireFormat, input: &[u8], pos: usize) -> bool {
    if pos == 0 || input[pos - 1] != b'\n' {
        return false;
    }
    match format {
        WireFormat::Jsonl => true,
        WireFormat::Snap => {
            input[pos] == b'T' && matches!(input.get(pos + 1), Some(b' ' | b'\t') | None)
        }
    }
}

fn next_boundary(format: WireFormat, input: &[u8], from: usize) -> usize {
    (from..input.len())
        .find(|&pos| is_boundary(format, input, pos))
        .unwrap_or(input.len())
}

fn split_chunks(format: WireFormat, input: &[u8], pieces: usize) -> Vec<&[u8]> {
    let target = (input.len() / pieces.max(1)).max(MIN_CHUNK_BYTES);
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < input.len() {
        let end = if start + target >= input.len() {
            input.len()
        } else {
            next_boundary(format, input, start + target)
        };
        chunks.push(&input[start..end]);
        start = end;
    }
    chunks
}

fn chunk_target(exec: Execution) -> usize {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::current_num_threads() * 4;
    }
    let _ = exec;
    1
}

/// Parse an in-memory buffer in the given format.
pub fn parse_bytes(format: WireFormat, input: &[u8], exec: Execution) -> ParseOutcome {
    let chunks = split_chunks(format, input, chunk_target(exec));
    let parsed = exec.map_slice(&chunks, |chunk| match format {
        WireFormat::Snap => parse_snap_chunk(chunk),
        WireFormat::Jsonl => parse_jsonl_chunk(chunk),
    });
    let mut out = ParseOutcome::default();
    for part in parsed {
        out.append(part);
    }
    out
}

/// Parse a stream of SNAP three-line blocks.
pub fn parse_snap_stream<R: Read>(reader: R, exec: Execution) -> Result<ParseOutcome> {
    parse_stream(WireFormat::Snap, reader, exec)
}

/// Parse a stream of line-delimited JSON tweets.
pub fn parse_jsonl_stream<R: Read>(reader: R, exec: Execution) -> Result<ParseOutcome> {
    parse_stream(WireFormat::Jsonl, reader, exec)
}

/// Parse a stream batch by batch, cutting each batch at its last record
/// boundary so no record straddles two batches.
pub fn parse_stream<R: Read>(
    format: WireFormat,
    reader: R,
    exec: Execution,
) -> Result<ParseOutcome> {
    parse_stream_batched(format, reader, exec, STREAM_BATCH_BYTES)
}

fn parse_stream_batched<R: Read>(
    format: WireFormat,
    mut reader: R,
    exec: Execution,
    batch_bytes: usize,
) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut buf: Vec<u8> = Vec::new();
    // Everything before this offset is known to hold no boundary.
    let mut scanned = 1;
    loop {
        let read = (&mut reader)
            .take(batch_bytes as u64)
            .read_to_end(&mut buf)?;
        if read == 0 {
            out.append(parse_bytes(format, &buf, exec));
            return Ok(out);
        }
        let cut = (scanned.min(buf.len())..buf.len())
            .rev()
            .find(|&pos| is_boundary(format, &buf, pos));
        match cut {
            Some(cut) => {
                out.append(parse_bytes(format, &buf[..cut], exec));
                buf.drain(..cut);
                scanned = 1;
            }
            None => scanned = buf.len().max(1),
        }
    }
}

/// Serialize records as SNAP blocks, each followed by a blank line.
pub fn write_snap<'a, W, I>(mut writer: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a TweetRecord>,
{
    for record in records {
        let stamp = format_snap_timestamp(record.timestamp)?;
        write!(
            writer,
            "T {stamp}\nU http://twitter.com/{}\nW {}\n\n",
            record.author, record.text
        )?;
    }
    writer.flush()?;
    Ok(())
}

/// Serialize records as one JSON object per line with epoch `created_at`.
pub fn write_jsonl<'a, W, I>(mut writer: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a TweetRecord>,
{
    for record in records {
        let row = JsonTweetOut {
            user: &record.author,
            text: &record.text,
            created_at: record.timestamp,
        };
        serde_json::to_writer(&mut writer, &row).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Serialize records in the requested wire format.
pub fn write_records<'a, W, I>(format: WireFormat, writer: W, records: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a TweetRecord>,
{
    match format {
        WireFormat::Snap => write_snap(writer, records),
        WireFormat::Jsonl => write_jsonl(writer, records),
    }
}
