//! `EMC1` binary layout (all little-endian):
//!
//! ```text
//! magic "EMC1" | u16 version | u32 d | u32 m | u64 train_count | u64 test_count
//! train records, then test records; each record is d x f32 followed by a u16 label
//! ```
//!
//! A JSON sidecar `<path>.meta.json` carries the source, creation
//! parameters and class names.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{check_vector, DatasetMeta, EmbeddingDataset, Split};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMC1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug)]
pub struct ReadOptions {
    /// Reject datasets where some class is missing from a split.
    pub require_all_classes: bool,
    /// Read the sidecar when present.
    pub load_meta: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        Self {
            require_all_classes: true,
            load_meta: true,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_dataset(ds: &EmbeddingDataset, path: &Path) -> Result<()> {
    ds.validate(false)?;
    let d = u32::try_from(ds.d).map_err(|_| Error::Dataset("dimension exceeds u32".into()))?;
    let m = u32::try_from(ds.m).map_err(|_| Error::Dataset("class count exceeds u32".into()))?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&d.to_le_bytes()).map_err(io)?;
    w.write_all(&m.to_le_bytes()).map_err(io)?;
    w.write_all(&(ds.train.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&(ds.test.len() as u64).to_le_bytes()).map_err(io)?;
    for split in [&ds.train, &ds.test] {
        for (v, l) in split.iter() {
            for x in v {
                w.write_all(&x.to_le_bytes()).map_err(io)?;
            }
            w.write_all(&(l as u16).to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    let meta = serde_json::to_string_pretty(&ds.meta)?;
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(meta_path, e))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<EmbeddingDataset> {
    read_dataset_with(path, ReadOptions::default())
}

pub fn read_dataset_with(path: &Path, opts: ReadOptions) -> Result<EmbeddingDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut ds = decode(&bytes)?;
    if opts.load_meta {
        let meta_path = sidecar_path(path);
        if meta_path.exists() {
            let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            ds.meta = serde_json::from_str(&text)?;
        }
    }
    if opts.require_all_classes {
        if let Some(msg) = ds.missing_classes().into_iter().next() {
            return Err(Error::Dataset(msg));
        }
    }
    Ok(ds)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!(
                    "truncated file: need {n} bytes for {what}, {} left",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<EmbeddingDataset> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(format_err(0, format!("bad magic {magic:02x?}, expected \"EMC1\"")));
    }
    let version = cur.u16("version")?;
    if version != VERSION {
        return Err(format_err(4, format!("unsupported format version {version}")));
    }
    let d = cur.u32("dimension")? as usize;
    let m = cur.u32("class count")? as usize;
    if d == 0 {
        return Err(format_err(6, "dimension is zero"));
    }
    if m == 0 || m > usize::from(u16::MAX) + 1 {
        return Err(format_err(10, format!("class count {m} out of range")));
    }
    let counts = [cur.u64("train count")?, cur.u64("test count")?];
    debug_assert_eq!(cur.pos, HEADER_LEN);

    let record_len = d * 4 + 2;
    let expected = counts
        .iter()
        .try_fold(HEADER_LEN as u128, |acc, &c| {
            Some(acc + u128::from(c) * record_len as u128)
        })
        .unwrap_or(u128::MAX);
    if (bytes.len() as u128) < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated file: header declares {expected} bytes, found {}", bytes.len()),
        ));
    }
    if (bytes.len() as u128) > expected {
        return Err(format_err(
            expected as usize,
            format!("{} trailing bytes after last record", bytes.len() as u128 - expected),
        ));
    }

    let mut splits = [Split::new(d), Split::new(d)];
    let mut v = vec![0f32; d];
    for (split, &count) in splits.iter_mut().zip(&counts) {
        *split = Split::with_capacity(d, count as usize);
        for _ in 0..count {
            let start = cur.pos;
            let raw = cur.take(d * 4, "record vector")?;
            for (x, chunk) in v.iter_mut().zip(raw.chunks_exact(4)) {
                *x = f32::from_le_bytes(chunk.try_into().unwrap());
            }
            if let Err(msg) = check_vector(&v) {
                let offset = v
                    .iter()
                    .position(|x| !x.is_finite())
                    .map_or(start, |j| start + 4 * j);
                return Err(format_err(offset, msg));
            }
            let label_at = cur.pos;
            let label = cur.u16("label")?;
            if usize::from(label) >= m {
                return Err(format_err(label_at, format!("label {label} >= class count {m}")));
            }
            split.push(&v, label);
        }
    }
    let [train, test] = splits;
    Ok(EmbeddingDataset {
        d,
        m,
        train,
        test,
        meta: DatasetMeta::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EmbeddingDataset {
        let mut train = Split::new(2);
        train.push(&[1.0, -0.5], 0);
        train.push(&[0.25, 3.0], 1);
        let mut test = Split::new(2);
        test.push(&[f32::MIN_POSITIVE, 7.0], 1);
        test.push(&[2.0, 2.0], 0);
        EmbeddingDataset {
            d: 2,
            m: 2,
            train,
            test,
            meta: DatasetMeta {
                source: "unit".into(),
                params: serde_json::json!({"x": 1}),
                class_names: vec!["a".into(), "b".into()],
            },
        }
    }

    fn encode(ds: &EmbeddingDataset) -> Vec<u8> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.emc");
        write_dataset(ds, &p).unwrap();
        fs::read(p).unwrap()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let ds = tiny();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tiny.emc");
        write_dataset(&ds, &p).unwrap();
        assert!(sidecar_path(&p).exists());
        let back = read_dataset(&p).unwrap();
        assert_eq!(back, ds);
        assert_eq!(fs::metadata(&p).unwrap().len(), (HEADER_LEN + 4 * 10) as u64);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&tiny());
        assert_eq!(&bytes[0..4], b"EMC1");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[14..22].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[22..30].try_into().unwrap()), 2);
        // First record: 1.0f32, -0.5f32, label 0.
        assert_eq!(&bytes[30..34], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[38..40], &[0, 0]);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode(&tiny());
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn wrong_version() {
        let mut bytes = encode(&tiny());
        bytes[4] = 2;
        let err = decode(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 4, .. }), "{err}");
    }

    #[test]
    fn truncation_and_trailing_bytes() {
        let bytes = encode(&tiny());
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        assert!(matches!(decode(&bytes[..12]), Err(Error::Format { offset: 10, .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long), Err(Error::Format { .. })));
    }

    #[test]
    fn bad_label_reports_its_offset() {
        let mut bytes = encode(&tiny());
        // Second train record's label lives at 30 + 10 + 8.
        bytes[48] = 5;
        match decode(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 48),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonfinite_component_reports_its_offset() {
        let mut bytes = encode(&tiny());
        bytes[34..38].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 34),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_vector_rejected() {
        let mut bytes = encode(&tiny());
        bytes[30..38].fill(0);
        assert!(matches!(decode(&bytes), Err(Error::Format { offset: 30, .. })));
    }

    #[test]
    fn missing_class_is_strict_error_but_lenient_read_works() {
        let mut ds = tiny();
        let mut test = Split::new(2);
        test.push(&[1.0, 1.0], 0);
        ds.test = test;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gap.emc");
        write_dataset(&ds, &p).unwrap();
        let err = read_dataset(&p).unwrap_err();
        assert!(err.to_string().contains("class 1 (b)"), "{err}");
        let lenient = read_dataset_with(
            &p,
            ReadOptions {
                require_all_classes: false,
                load_meta: true,
            },
        )
        .unwrap();
        assert_eq!(lenient.missing_classes().len(), 1);
    }

    #[test]
    fn wide_header_dimension() {
        let mut train = Split::new(2048);
        let mut test = Split::new(2048);
        let v: Vec<f32> = (0..2048).map(|i| (i as f32).sin() + 0.01).collect();
        train.push(&v, 0);
        test.push(&v, 0);
        let ds = EmbeddingDataset {
            d: 2048,
            m: 1,
            train,
            test,
            meta: DatasetMeta::default(),
        };
        let back = decode(&encode(&ds)).unwrap();
        assert_eq!(back.d, 2048);
        assert_eq!(back.train.vector(0), &v[..]);
    }
}
