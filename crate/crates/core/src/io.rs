//! Time-tag stream files.
//!
//! Binary layout: a 32-byte header (`"QTT1"`, tick length in femtoseconds as a
//! little-endian `u64`, channel count as `u8`, zero padding) followed by one
//! little-endian 64-bit word per tag. The CSV variant starts with a
//! `# tick_fs=<n> channels=<k>` comment and has one `tick,channel` line per tag.
//!
//! Readers and writers stream; neither ever holds more than a fixed-size buffer.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timetag::{decode_record, encode_record, TickDuration, TimeTag, DEFAULT_TICK_FS};

pub const MAGIC: [u8; 4] = *b"QTT1";
pub const HEADER_LEN: usize = 32;
pub const RECORD_LEN: usize = 8;

const IO_BUFFER: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub tick_femtoseconds: u64,
    pub channel_count: u8,
}

impl Default for StreamHeader {
    fn default() -> Self {
        Self {
            tick_femtoseconds: DEFAULT_TICK_FS,
            channel_count: 4,
        }
    }
}

impl StreamHeader {
    pub fn tick(&self) -> Result<TickDuration> {
        TickDuration::from_femtoseconds(self.tick_femtoseconds)
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        out[4..12].copy_from_slice(&self.tick_femtoseconds.to_le_bytes());
        out[12] = self.channel_count;
        out
    }

    pub fn from_bytes(bytes: &[u8; HEADER_LEN]) -> Result<Self> {
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let header = Self {
            tick_femtoseconds: u64::from_le_bytes(bytes[4..12].try_into().unwrap()),
            channel_count: bytes[12],
        };
        if header.tick_femtoseconds == 0 {
            return Err(Error::Domain("header tick_femtoseconds is zero".into()));
        }
        Ok(header)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Bin,
    Csv,
}

impl Format {
    /// `.csv` files are CSV, everything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Bin,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Bin => "qtt",
            Format::Csv => "csv",
        }
    }
}

/// Tracks the sort order shared by both writers and readers.
#[derive(Debug, Default)]
struct OrderCheck {
    count: u64,
    last: Option<TimeTag>,
}

impl OrderCheck {
    /// Ticks may tie across channels, never on the same channel.
    fn accept(&mut self, tag: TimeTag) -> Result<()> {
        if let Some(prev) = self.last {
            if tag <= prev {
                return Err(Error::Unsorted {
                    index: self.count,
                    tick: tag.tick(),
                    previous: prev.tick(),
                });
            }
        }
        self.last = Some(tag);
        self.count += 1;
        Ok(())
    }
}

/// Anything that accepts a sorted sequence of tags.
pub trait TagSink {
    fn push(&mut self, tag: TimeTag) -> Result<()>;
    fn finish(self) -> Result<u64>;
}

pub struct BinaryWriter<W: Write> {
    inner: BufWriter<W>,
    order: OrderCheck,
}

impl<W: Write> BinaryWriter<W> {
    pub fn new(inner: W, header: &StreamHeader) -> Result<Self> {
        let mut inner = BufWriter::with_capacity(IO_BUFFER, inner);
        inner.write_all(&header.to_bytes())?;
        Ok(Self {
            inner,
            order: OrderCheck::default(),
        })
    }
}

impl<W: Write> TagSink for BinaryWriter<W> {
    fn push(&mut self, tag: TimeTag) -> Result<()> {
        self.order.accept(tag)?;
        self.inner.write_all(&encode_record(tag))?;
        Ok(())
    }

    fn finish(mut self) -> Result<u64> {
        self.inner.flush()?;
        Ok(self.order.count)
    }
}

pub struct CsvWriter<W: Write> {
    inner: BufWriter<W>,
    order: OrderCheck,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(inner: W, header: &StreamHeader) -> Result<Self> {
        let mut inner = BufWriter::with_capacity(IO_BUFFER, inner);
        writeln!(
            inner,
            "# tick_fs={} channels={}",
            header.tick_femtoseconds, header.channel_count
        )?;
        Ok(Self {
            inner,
            order: OrderCheck::default(),
        })
    }
}

impl<W: Write> TagSink for CsvWriter<W> {
    fn push(&mut self, tag: TimeTag) -> Result<()> {
        self.order.accept(tag)?;
        writeln!(self.inner, "{},{}", tag.tick(), tag.channel())?;
        Ok(())
    }

    fn finish(mut self) -> Result<u64> {
        self.inner.flush()?;
        Ok(self.order.count)
    }
}

pub struct BinaryReader<R: Read> {
    inner: BufReader<R>,
    header: StreamHeader,
    order: OrderCheck,
    done: bool,
}

impl<R: Read> BinaryReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut inner = BufReader::with_capacity(IO_BUFFER, inner);
        let mut head = [0u8; HEADER_LEN];
        let got = read_full(&mut inner, &mut head)?;
        if got < 4 {
            let mut magic = [0u8; 4];
            magic[..got].copy_from_slice(&head[..got]);
            return Err(Error::BadMagic(magic));
        }
        if got < HEADER_LEN {
            if head[..4] != MAGIC {
                return Err(Error::BadMagic(head[..4].try_into().unwrap()));
            }
            return Err(Error::Truncated(got));
        }
        let header = StreamHeader::from_bytes(&head)?;
        Ok(Self {
            inner,
            header,
            order: OrderCheck::default(),
            done: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    fn next_tag(&mut self) -> Result<Option<TimeTag>> {
        let mut rec = [0u8; RECORD_LEN];
        match read_full(&mut self.inner, &mut rec)? {
            0 => Ok(None),
            RECORD_LEN => {
                let tag = decode_record(rec, self.order.count)?;
                self.order.accept(tag)?;
                Ok(Some(tag))
            }
            partial => Err(Error::Truncated(partial)),
        }
    }
}

impl<R: Read> Iterator for BinaryReader<R> {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_tag().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

pub struct CsvReader<R: Read> {
    lines: io::Lines<BufReader<R>>,
    header: StreamHeader,
    order: OrderCheck,
    line_no: u64,
    pending: Option<String>,
    done: bool,
}

impl<R: Read> CsvReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut lines = BufReader::with_capacity(IO_BUFFER, inner).lines();
        let mut header = StreamHeader::default();
        let mut line_no = 0;
        let mut pending = None;
        let mut saw_tick = false;
        // leading comments carry the header fields
        for line in lines.by_ref() {
            let line = line?;
            line_no += 1;
            let trimmed = line.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    let Some((key, value)) = field.split_once('=') else {
                        continue;
                    };
                    let parsed = value.parse::<u64>().map_err(|_| Error::Csv {
                        line: line_no,
                        reason: format!("bad header value `{field}`"),
                    });
                    match key {
                        "tick_fs" => {
                            header.tick_femtoseconds = parsed?;
                            saw_tick = true;
                        }
                        "channels" => {
                            header.channel_count = u8::try_from(parsed?).map_err(|_| Error::Csv {
                                line: line_no,
                                reason: "channel count exceeds 255".into(),
                            })?;
                        }
                        _ => {}
                    }
                }
            } else if trimmed.is_empty() || trimmed == "tick,channel" {
                continue;
            } else {
                pending = Some(line);
                break;
            }
        }
        if !saw_tick {
            return Err(Error::Csv {
                line: 1,
                reason: "missing `# tick_fs=<n>` header comment".into(),
            });
        }
        if header.tick_femtoseconds == 0 {
            return Err(Error::Domain("header tick_fs is zero".into()));
        }
        Ok(Self {
            lines,
            header,
            order: OrderCheck::default(),
            line_no,
            pending,
            done: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    fn parse(&mut self, line: &str) -> Result<TimeTag> {
        let bad = |reason: String| Error::Csv {
            line: self.line_no,
            reason,
        };
        let (tick, channel) = line
            .trim()
            .split_once(',')
            .ok_or_else(|| bad(format!("expected `tick,channel`, got `{line}`")))?;
        let tick: u64 = tick.trim().parse().map_err(|_| bad(format!("bad tick `{tick}`")))?;
        let channel: u8 = channel
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad channel `{channel}`")))?;
        let tag = TimeTag::new(tick, channel).map_err(|e| match e {
            Error::Domain(reason) => Error::CorruptRecord {
                index: self.order.count,
                reason,
            },
            other => other,
        })?;
        self.order.accept(tag)?;
        Ok(tag)
    }

    fn next_tag(&mut self) -> Result<Option<TimeTag>> {
        let line = match self.pending.take() {
            Some(line) => line,
            None => loop {
                match self.lines.next() {
                    None => return Ok(None),
                    Some(line) => {
                        let line = line?;
                        self.line_no += 1;
                        if !line.trim().is_empty() {
                            break line;
                        }
                    }
                }
            },
        };
        self.parse(&line).map(Some)
    }
}

impl<R: Read> Iterator for CsvReader<R> {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_tag().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// A streaming reader over either file format.
pub enum TagReader<R: Read> {
    Bin(BinaryReader<R>),
    Csv(CsvReader<R>),
}

impl<R: Read> TagReader<R> {
    pub fn header(&self) -> &StreamHeader {
        match self {
            TagReader::Bin(r) => r.header(),
            TagReader::Csv(r) => r.header(),
        }
    }
}

impl<R: Read> Iterator for TagReader<R> {
    type Item = Result<TimeTag>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            TagReader::Bin(r) => r.next(),
            TagReader::Csv(r) => r.next(),
        }
    }
}

/// Opens a tag file, detecting the format from its first bytes.
pub fn open(path: &Path) -> Result<TagReader<BufReader<File>>> {
    let mut file = BufReader::new(File::open(path)?);
    let head = file.fill_buf()?;
    if head.starts_with(&MAGIC) || (head.len() < 4 && MAGIC.starts_with(head) && !head.is_empty()) {
        Ok(TagReader::Bin(BinaryReader::new(file)?))
    } else if head.first() == Some(&b'#') {
        Ok(TagReader::Csv(CsvReader::new(file)?))
    } else {
        let mut magic = [0u8; 4];
        let n = head.len().min(4);
        magic[..n].copy_from_slice(&head[..n]);
        Err(Error::BadMagic(magic))
    }
}

pub fn read_all(path: &Path) -> Result<(StreamHeader, Vec<TimeTag>)> {
    let reader = open(path)?;
    let header = *reader.header();
    let tags = reader.collect::<Result<Vec<_>>>()?;
    Ok((header, tags))
}

pub fn write_all<'a>(
    path: &Path,
    format: Format,
    header: &StreamHeader,
    tags: impl IntoIterator<Item = &'a TimeTag>,
) -> Result<u64> {
    let file = File::create(path)?;
    match format {
        Format::Bin => drain(BinaryWriter::new(file, header)?, tags),
        Format::Csv => drain(CsvWriter::new(file, header)?, tags),
    }
}

fn drain<'a, S: TagSink>(mut sink: S, tags: impl IntoIterator<Item = &'a TimeTag>) -> Result<u64> {
    for &tag in tags {
        sink.push(tag)?;
    }
    sink.finish()
}

/// Rewrites a tag file in another format without loading it.
pub fn convert(input: &Path, output: &Path, format: Format) -> Result<u64> {
    let reader = open(input)?;
    let header = *reader.header();
    let file = File::create(output)?;
    match format {
        Format::Bin => pipe(reader, BinaryWriter::new(file, &header)?),
        Format::Csv => pipe(reader, CsvWriter::new(file, &header)?),
    }
}

fn pipe<R: Read, S: TagSink>(reader: TagReader<R>, mut sink: S) -> Result<u64> {
    for tag in reader {
        sink.push(tag?)?;
    }
    sink.finish()
}
