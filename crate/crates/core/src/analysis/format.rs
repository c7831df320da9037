//! Binary timestamp files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header  "HOMD" | u16 version | [u8; 32] config hash | u64 record count   (46 bytes)
//! record  u64 (channel | trial_index << 8) | u64 time in ps since trial start
//! ```
//!
//! Records are sorted by `(trial_index, time)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"HOMD";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 46;
pub const RECORD_LEN: usize = 16;
/// Largest trial index that fits the 56-bit field.
pub const MAX_TRIAL_INDEX: u64 = (1 << 56) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    Spad1 = 0,
    Spad2a = 1,
    Spad2b = 2,
    Marker = 3,
}

impl Channel {
    pub fn from_u8(v: u8) -> Option<Channel> {
        match v {
            0 => Some(Channel::Spad1),
            1 => Some(Channel::Spad2a),
            2 => Some(Channel::Spad2b),
            3 => Some(Channel::Marker),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimestampRecord {
    pub channel: Channel,
    pub trial_index: u64,
    pub time_ps: u64,
}

impl TimestampRecord {
    pub fn new(channel: Channel, trial_index: u64, time_ps: u64) -> Self {
        TimestampRecord {
            channel,
            trial_index,
            time_ps,
        }
    }

    pub fn time_ns(&self) -> f64 {
        self.time_ps as f64 * 1e-3
    }

    fn key(&self) -> (u64, u64) {
        (self.trial_index, self.time_ps)
    }

    pub fn encode(&self) -> [u8; RECORD_LEN] {
        let mut buf = [0u8; RECORD_LEN];
        let word = self.channel as u64 | (self.trial_index << 8);
        buf[..8].copy_from_slice(&word.to_le_bytes());
        buf[8..].copy_from_slice(&self.time_ps.to_le_bytes());
        buf
    }

    pub fn decode(buf: &[u8; RECORD_LEN]) -> Result<Self> {
        let word = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes"));
        let time_ps = u64::from_le_bytes(buf[8..].try_into().expect("8 bytes"));
        let channel = Channel::from_u8((word & 0xff) as u8)
            .ok_or_else(|| Error::Format(format!("unknown channel {}", word & 0xff)))?;
        Ok(TimestampRecord {
            channel,
            trial_index: word >> 8,
            time_ps,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub version: u16,
    pub config_hash: [u8; 32],
    pub record_count: u64,
}

impl FileHeader {
    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut buf = [0u8; HEADER_LEN];
        buf[..4].copy_from_slice(&MAGIC);
        buf[4..6].copy_from_slice(&self.version.to_le_bytes());
        buf[6..38].copy_from_slice(&self.config_hash);
        buf[38..].copy_from_slice(&self.record_count.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8; HEADER_LEN]) -> Result<Self> {
        if buf[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        Ok(FileHeader {
            version,
            config_hash: buf[6..38].try_into().expect("32 bytes"),
            record_count: u64::from_le_bytes(buf[38..].try_into().expect("8 bytes")),
        })
    }
}

/// Streaming writer. The record count is patched into the header by
/// [`TimestampWriter::finish`].
pub struct TimestampWriter<W: Write + Seek> {
    inner: BufWriter<W>,
    hash: [u8; 32],
    count: u64,
    last: Option<(u64, u64)>,
}

impl TimestampWriter<File> {
    pub fn create(path: impl AsRef<Path>, config_hash: [u8; 32]) -> Result<Self> {
        TimestampWriter::new(File::create(path)?, config_hash)
    }
}

impl<W: Write + Seek> TimestampWriter<W> {
    pub fn new(inner: W, config_hash: [u8; 32]) -> Result<Self> {
        let mut inner = BufWriter::with_capacity(1 << 16, inner);
        let header = FileHeader {
            version: FORMAT_VERSION,
            config_hash,
            record_count: 0,
        };
        inner.write_all(&header.encode())?;
        Ok(TimestampWriter {
            inner,
            hash: config_hash,
            count: 0,
            last: None,
        })
    }

    pub fn write(&mut self, rec: &TimestampRecord) -> Result<()> {
        if rec.trial_index > MAX_TRIAL_INDEX {
            return Err(Error::Format(format!(
                "trial index {} too large",
                rec.trial_index
            )));
        }
        if self.last.is_some_and(|last| rec.key() < last) {
            return Err(Error::OutOfOrder {
                position: self.count,
            });
        }
        self.inner.write_all(&rec.encode())?;
        self.last = Some(rec.key());
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(self) -> Result<W> {
        let mut inner = self.inner.into_inner().map_err(|e| e.into_error())?;
        let header = FileHeader {
            version: FORMAT_VERSION,
            config_hash: self.hash,
            record_count: self.count,
        };
        inner.seek(SeekFrom::Start(0))?;
        inner.write_all(&header.encode())?;
        inner.seek(SeekFrom::End(0))?;
        inner.flush()?;
        Ok(inner)
    }
}

/// Streaming reader yielding records in file order. Memory use does not
/// depend on the file size.
pub struct TimestampReader<R: Read> {
    inner: BufReader<R>,
    header: FileHeader,
    position: u64,
    last: Option<(u64, u64)>,
    done: bool,
}

impl TimestampReader<File> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        TimestampReader::new(File::open(path)?)
    }
}

impl<R: Read> TimestampReader<R> {
    pub fn new(inner: R) -> Result<Self> {
        let mut inner = BufReader::with_capacity(1 << 16, inner);
        let mut buf = [0u8; HEADER_LEN];
        inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => Error::Format("file shorter than header".into()),
            _ => Error::Io(e),
        })?;
        Ok(TimestampReader {
            inner,
            header: FileHeader::decode(&buf)?,
            position: 0,
            last: None,
            done: false,
        })
    }

    pub fn header(&self) -> &FileHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<TimestampRecord>> {
        if self.position == self.header.record_count {
            let mut probe = [0u8; 1];
            return match self.inner.read(&mut probe)? {
                0 => Ok(None),
                _ => Err(Error::Format("trailing bytes after last record".into())),
            };
        }
        let mut buf = [0u8; RECORD_LEN];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| match e.kind() {
                io::ErrorKind::UnexpectedEof => Error::Format(format!(
                    "truncated at record {} of {}",
                    self.position, self.header.record_count
                )),
                _ => Error::Io(e),
            })?;
        let rec = TimestampRecord::decode(&buf)?;
        if self.last.is_some_and(|last| rec.key() < last) {
            return Err(Error::OutOfOrder {
                position: self.position,
            });
        }
        self.last = Some(rec.key());
        self.position += 1;
        Ok(Some(rec))
    }
}

impl<R: Read> Iterator for TimestampReader<R> {
    type Item = Result<TimestampRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.next_record().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Opens `path` as a record stream.
pub fn parse_timestamps(path: impl AsRef<Path>) -> Result<TimestampReader<File>> {
    TimestampReader::open(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample() -> Vec<TimestampRecord> {
        vec![
            TimestampRecord::new(Channel::Spad1, 0, 0),
            TimestampRecord::new(Channel::Spad2a, 0, 2_900_000),
            TimestampRecord::new(Channel::Spad2b, 0, 2_900_000),
            TimestampRecord::new(Channel::Marker, 5, 0),
            TimestampRecord::new(Channel::Spad1, MAX_TRIAL_INDEX, 1),
        ]
    }

    fn write_all(recs: &[TimestampRecord]) -> Vec<u8> {
        let mut w = TimestampWriter::new(Cursor::new(Vec::new()), [7; 32]).unwrap();
        for r in recs {
            w.write(r).unwrap();
        }
        w.finish().unwrap().into_inner()
    }

    #[test]
    fn round_trip() {
        let bytes = write_all(&sample());
        assert_eq!(bytes.len(), HEADER_LEN + RECORD_LEN * 5);
        let r = TimestampReader::new(Cursor::new(bytes)).unwrap();
        assert_eq!(r.header().record_count, 5);
        assert_eq!(r.header().config_hash, [7; 32]);
        let back: Vec<_> = r.collect::<Result<_>>().unwrap();
        assert_eq!(back, sample());
    }

    #[test]
    fn empty_body() {
        let bytes = write_all(&[]);
        let r = TimestampReader::new(Cursor::new(bytes)).unwrap();
        assert_eq!(r.count(), 0);
    }

    #[test]
    fn writer_rejects_disorder() {
        let mut w = TimestampWriter::new(Cursor::new(Vec::new()), [0; 32]).unwrap();
        w.write(&TimestampRecord::new(Channel::Spad1, 3, 0))
            .unwrap();
        let err = w
            .write(&TimestampRecord::new(Channel::Spad1, 2, 0))
            .unwrap_err();
        assert!(matches!(err, Error::OutOfOrder { position: 1 }));
    }

    #[test]
    fn reader_reports_position_of_disorder() {
        let mut bytes = write_all(&sample()[..3]);
        // swap records 1 and 2 into an out-of-order pair: put trial 9 first
        let bad = TimestampRecord::new(Channel::Spad2a, 9, 0).encode();
        bytes[HEADER_LEN + RECORD_LEN..HEADER_LEN + 2 * RECORD_LEN].copy_from_slice(&bad);
        let res: Result<Vec<_>> = TimestampReader::new(Cursor::new(bytes)).unwrap().collect();
        assert!(matches!(res, Err(Error::OutOfOrder { position: 2 })));
    }

    #[test]
    fn bad_magic_version_truncation_and_trailing_bytes() {
        let good = write_all(&sample());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            TimestampReader::new(Cursor::new(bad)),
            Err(Error::Format(_))
        ));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(
            TimestampReader::new(Cursor::new(bad)),
            Err(Error::Format(_))
        ));
        let short = good[..good.len() - 3].to_vec();
        let res: Result<Vec<_>> = TimestampReader::new(Cursor::new(short)).unwrap().collect();
        assert!(matches!(res, Err(Error::Format(_))));
        let mut long = good.clone();
        long.push(0);
        let res: Result<Vec<_>> = TimestampReader::new(Cursor::new(long)).unwrap().collect();
        assert!(matches!(res, Err(Error::Format(_))));
        assert!(TimestampReader::new(Cursor::new(vec![0u8; 10])).is_err());
    }

    #[test]
    fn unknown_channel_is_rejected() {
        let mut buf = TimestampRecord::new(Channel::Spad1, 1, 1).encode();
        buf[0] = 17;
        assert!(TimestampRecord::decode(&buf).is_err());
    }
}
