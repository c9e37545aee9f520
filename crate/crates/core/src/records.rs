//! PRHT record files.
//!
//! Little-endian layout:
//!
//! ```text
//! header   "PRHT" | version u32 | seed u64 | v_sq v_anti tap_power eff_a eff_b (f64) | n_records u64
//! record   phi f64 | x_a f64 | theta_index u16 | pad u16 x3 | x_b f64          (32 bytes)
//! trailer  "CFGH" | sha-256 of the run configuration (32 bytes)                 (optional)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampler::{GaussianModel, HomodyneRecord, ANGLE_STEP_DEG};

pub const MAGIC: &[u8; 4] = b"PRHT";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 4 + 4 + 8 + 5 * 8 + 8;
pub const RECORD_BYTES: usize = 32;
const TRAILER_MAGIC: &[u8; 4] = b"CFGH";

#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub seed: u64,
    pub model: GaussianModel,
    pub n_records: u64,
}

impl RecordHeader {
    fn encode(&self) -> [u8; HEADER_BYTES] {
        let mut buf = [0u8; HEADER_BYTES];
        buf[0..4].copy_from_slice(MAGIC);
        buf[4..8].copy_from_slice(&VERSION.to_le_bytes());
        buf[8..16].copy_from_slice(&self.seed.to_le_bytes());
        let m = &self.model;
        for (i, v) in [m.v_sq, m.v_anti, m.tap_power, m.eff_a, m.eff_b]
            .iter()
            .enumerate()
        {
            buf[16 + 8 * i..24 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        buf[56..64].copy_from_slice(&self.n_records.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8; HEADER_BYTES]) -> Result<Self> {
        if &buf[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let f = |i: usize| f64::from_le_bytes(buf[16 + 8 * i..24 + 8 * i].try_into().unwrap());
        let model = GaussianModel {
            v_sq: f(0),
            v_anti: f(1),
            tap_power: f(2),
            eff_a: f(3),
            eff_b: f(4),
        };
        model.validate()?;
        Ok(Self {
            seed: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
            model,
            n_records: u64::from_le_bytes(buf[56..64].try_into().unwrap()),
        })
    }
}

pub fn encode_record(r: &HomodyneRecord) -> [u8; RECORD_BYTES] {
    let mut buf = [0u8; RECORD_BYTES];
    buf[0..8].copy_from_slice(&r.phi.to_le_bytes());
    buf[8..16].copy_from_slice(&r.x_a.to_le_bytes());
    buf[16..18].copy_from_slice(&r.theta_index.to_le_bytes());
    buf[24..32].copy_from_slice(&r.x_b.to_le_bytes());
    buf
}

pub fn decode_record(buf: &[u8]) -> HomodyneRecord {
    let f = |o: usize| f64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
    HomodyneRecord {
        phi: f(0),
        x_a: f(8),
        theta_index: u16::from_le_bytes([buf[16], buf[17]]),
        x_b: f(24),
    }
}

pub struct RecordWriter {
    out: BufWriter<File>,
    expected: u64,
    written: u64,
}

impl RecordWriter {
    pub fn create(path: &Path, header: &RecordHeader) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&header.encode())?;
        Ok(Self {
            out,
            expected: header.n_records,
            written: 0,
        })
    }

    pub fn write(&mut self, records: &[HomodyneRecord]) -> Result<()> {
        for r in records {
            self.out.write_all(&encode_record(r))?;
        }
        self.written += records.len() as u64;
        Ok(())
    }

    /// Checks the record count against the header and appends the
    /// configuration hash trailer.
    pub fn finish(mut self, config_hash: Option<&[u8; 32]>) -> Result<()> {
        if self.written != self.expected {
            return Err(Error::Format(format!(
                "header announced {} records, wrote {}",
                self.expected, self.written
            )));
        }
        if let Some(h) = config_hash {
            self.out.write_all(TRAILER_MAGIC)?;
            self.out.write_all(h)?;
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Streaming reader yielding records in blocks.
pub struct RecordReader {
    input: BufReader<File>,
    header: RecordHeader,
    remaining: u64,
}

impl RecordReader {
    pub fn open(path: &Path) -> Result<Self> {
        let mut input = BufReader::with_capacity(1 << 20, File::open(path)?);
        let mut buf = [0u8; HEADER_BYTES];
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let header = RecordHeader::decode(&buf)?;
        let remaining = header.n_records;
        Ok(Self {
            input,
            header,
            remaining,
        })
    }

    pub fn header(&self) -> &RecordHeader {
        &self.header
    }

    /// Next block of at most `max` records; empty once exhausted.
    pub fn next_block(&mut self, max: usize) -> Result<Vec<HomodyneRecord>> {
        let n = (max as u64).min(self.remaining) as usize;
        let mut bytes = vec![0u8; n * RECORD_BYTES];
        self.input
            .read_exact(&mut bytes)
            .map_err(|_| Error::Format("file ends before announced record count".into()))?;
        self.remaining -= n as u64;
        Ok(bytes
            .chunks_exact(RECORD_BYTES)
            .map(decode_record)
            .collect())
    }

    pub fn read_all(mut self) -> Result<Vec<HomodyneRecord>> {
        let n = self.remaining as usize;
        self.next_block(n)
    }

    /// Configuration hash from the trailer, if present. Consumes the reader.
    pub fn trailer(mut self) -> Result<Option<[u8; 32]>> {
        while self.remaining > 0 {
            self.next_block(1 << 16)?;
        }
        let mut tag = [0u8; 4];
        if self.input.read_exact(&mut tag).is_err() || &tag != TRAILER_MAGIC {
            return Ok(None);
        }
        let mut h = [0u8; 32];
        self.input
            .read_exact(&mut h)
            .map_err(|_| Error::Format("truncated trailer".into()))?;
        Ok(Some(h))
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[HomodyneRecord]) -> Result<()> {
    writeln!(out, "phi,x_a,theta_deg,x_b")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.phi,
            r.x_a,
            r.theta_index as f64 * ANGLE_STEP_DEG,
            r.x_b
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::sampler::{sample_records, AngleSchedule};

    #[test]
    fn file_round_trip_with_trailer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.prht");
        let model = GaussianModel::pure(0.3, 0.1, 0.98, 0.98).unwrap();
        let sched = AngleSchedule {
            indices: vec![1, 4],
            samples_per_angle: 1000,
        };
        let recs = sample_records(&model, &sched, 9, Execution::Sequential).unwrap();
        let header = RecordHeader {
            seed: 9,
            model,
            n_records: recs.len() as u64,
        };
        let mut w = RecordWriter::create(&path, &header).unwrap();
        w.write(&recs).unwrap();
        w.finish(Some(&[7u8; 32])).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_BYTES + 2000 * RECORD_BYTES + 36);
        assert_eq!(&bytes[0..4], b"PRHT");

        let reader = RecordReader::open(&path).unwrap();
        assert_eq!(reader.header(), &header);
        assert_eq!(reader.read_all().unwrap(), recs);
        assert_eq!(
            RecordReader::open(&path).unwrap().trailer().unwrap(),
            Some([7u8; 32])
        );
    }

    #[test]
    fn count_mismatch_and_truncation_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.prht");
        let header = RecordHeader {
            seed: 1,
            model: GaussianModel::vacuum(0.1),
            n_records: 5,
        };
        let w = RecordWriter::create(&path, &header).unwrap();
        assert!(w.finish(None).is_err());
        let mut r = RecordReader::open(&path).unwrap();
        assert!(r.next_block(5).is_err());
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(RecordReader::open(&path).is_err());
    }

    #[test]
    fn csv_columns() {
        let r = HomodyneRecord {
            phi: 0.5,
            x_a: -1.25,
            theta_index: 3,
            x_b: 2.0,
        };
        let mut out = Vec::new();
        write_csv(&mut out, &[r]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "phi,x_a,theta_deg,x_b\n0.5,-1.25,45,2\n"
        );
    }
}
