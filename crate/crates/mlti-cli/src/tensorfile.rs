//! Binary tensor persistence. One file holds one tensor in any of the four
//! kinds: dense, paired, tt (plain train), gtt (paired train). All integers
//! and floats are little-endian; the payload is the flat interleaved
//! column-major buffer for dense kinds and the concatenated cores in logical
//! index order for trains. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use mlti::shape::Shape;
use mlti::{DenseTensor, PairedTensor, PairedTensorTrain, TensorTrain};
use ndarray::{Array3, Array4};

use crate::{CliError, CliResult};

pub const MAGIC: [u8; 8] = *b"MLTITNSR";
pub const FORMAT_VERSION: u32 = 1;
/// The only defined ordering tag: mode pairs interleaved, column-major.
pub const ORDER_INTERLEAVED: u32 = 0;

const KIND_DENSE: u32 = 0;
const KIND_PAIRED: u32 = 1;
const KIND_TT: u32 = 2;
const KIND_GTT: u32 = 3;

/// Caps that keep a corrupt header from driving huge allocations.
const MAX_ORDER: u64 = 64;
const MAX_ENTRIES: u64 = 1 << 28;

#[derive(Debug, Clone)]
pub enum TensorPayload {
    Dense(DenseTensor),
    Paired(PairedTensor),
    Train(TensorTrain),
    PairedTrain(PairedTensorTrain),
}

impl TensorPayload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TensorPayload::Dense(_) => "dense",
            TensorPayload::Paired(_) => "paired",
            TensorPayload::Train(_) => "tt",
            TensorPayload::PairedTrain(_) => "gtt",
        }
    }

    fn kind_code(&self) -> u32 {
        match self {
            TensorPayload::Dense(_) => KIND_DENSE,
            TensorPayload::Paired(_) => KIND_PAIRED,
            TensorPayload::Train(_) => KIND_TT,
            TensorPayload::PairedTrain(_) => KIND_GTT,
        }
    }
}

struct Decoder<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Decoder<R> {
    fn fail<T>(&self, message: impl Into<String>) -> CliResult<T> {
        Err(CliError::Format {
            offset: self.offset,
            message: message.into(),
        })
    }

    fn bytes(&mut self, buf: &mut [u8]) -> CliResult<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) => self.fail(format!("unexpected end of file ({e})")),
        }
    }

    fn u32(&mut self) -> CliResult<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> CliResult<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn sizes(&mut self, count: usize, what: &str) -> CliResult<Vec<usize>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let v = self.u64()?;
            if v == 0 || v > MAX_ENTRIES {
                return self.fail(format!("implausible {what} {v}"));
            }
            out.push(v as usize);
        }
        Ok(out)
    }

    fn floats(&mut self, count: usize) -> CliResult<Vec<f64>> {
        let mut out = vec![0.0f64; count];
        let mut b = [0u8; 8];
        for slot in out.iter_mut() {
            self.bytes(&mut b)?;
            *slot = f64::from_le_bytes(b);
        }
        Ok(out)
    }

    fn order(&mut self) -> CliResult<usize> {
        let d = self.u32()? as u64;
        if d == 0 || d > MAX_ORDER {
            return self.fail(format!("implausible tensor order {d}"));
        }
        Ok(d as usize)
    }

    fn checked_product(&self, sizes: &[usize]) -> CliResult<usize> {
        let mut total: u64 = 1;
        for &s in sizes {
            total = total.saturating_mul(s as u64);
            if total > MAX_ENTRIES {
                return self.fail("payload larger than the format cap");
            }
        }
        Ok(total as usize)
    }
}

struct Encoder<W> {
    inner: W,
}

impl<W: Write> Encoder<W> {
    fn u32(&mut self, v: u32) -> CliResult<()> {
        self.inner.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    fn u64s(&mut self, vs: impl IntoIterator<Item = usize>) -> CliResult<()> {
        for v in vs {
            self.inner.write_all(&(v as u64).to_le_bytes())?;
        }
        Ok(())
    }

    fn floats<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) -> CliResult<()> {
        for v in vs {
            self.inner.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

pub fn write_tensor_file(path: &Path, payload: &TensorPayload) -> CliResult<()> {
    let file = File::create(path)?;
    let mut enc = Encoder {
        inner: BufWriter::new(file),
    };
    enc.inner.write_all(&MAGIC)?;
    enc.u32(FORMAT_VERSION)?;
    enc.u32(payload.kind_code())?;
    enc.u32(ORDER_INTERLEAVED)?;
    match payload {
        TensorPayload::Dense(x) => {
            enc.u32(x.shape().order() as u32)?;
            enc.u64s(x.shape().sizes().iter().copied())?;
            enc.floats(x.data())?;
        }
        TensorPayload::Paired(x) => {
            enc.u32(x.row_shape().order() as u32)?;
            enc.u64s(x.row_shape().sizes().iter().copied())?;
            enc.u64s(x.col_shape().sizes().iter().copied())?;
            enc.floats(x.data())?;
        }
        TensorPayload::Train(t) => {
            enc.u32(t.order() as u32)?;
            enc.u64s(t.mode_sizes())?;
            enc.u64s(t.ranks())?;
            for core in t.cores() {
                enc.floats(core.iter())?;
            }
        }
        TensorPayload::PairedTrain(t) => {
            enc.u32(t.order() as u32)?;
            enc.u64s(t.row_shape().sizes().iter().copied())?;
            enc.u64s(t.col_shape().sizes().iter().copied())?;
            enc.u64s(t.ranks())?;
            for core in t.cores() {
                enc.floats(core.iter())?;
            }
        }
    }
    enc.inner.flush()?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> CliResult<TensorPayload> {
    let file = File::open(path)?;
    let mut dec = Decoder {
        inner: BufReader::new(file),
        offset: 0,
    };
    let mut magic = [0u8; 8];
    dec.bytes(&mut magic)?;
    if magic != MAGIC {
        return Err(CliError::Format {
            offset: 0,
            message: "not a tensor file (bad magic)".into(),
        });
    }
    let version = dec.u32()?;
    if version != FORMAT_VERSION {
        return dec.fail(format!("unsupported format version {version}"));
    }
    let kind = dec.u32()?;
    let ordering = dec.u32()?;
    if ordering != ORDER_INTERLEAVED {
        return dec.fail(format!("unknown ordering tag {ordering}"));
    }

    let payload = match kind {
        KIND_DENSE => {
            let d = dec.order()?;
            let sizes = dec.sizes(d, "mode size")?;
            let total = dec.checked_product(&sizes)?;
            let data = dec.floats(total)?;
            TensorPayload::Dense(DenseTensor::new(Shape::new(sizes)?, data)?)
        }
        KIND_PAIRED => {
            let d = dec.order()?;
            let rows = dec.sizes(d, "row size")?;
            let cols = dec.sizes(d, "column size")?;
            let total = (dec.checked_product(&rows)? as u64)
                .saturating_mul(dec.checked_product(&cols)? as u64);
            if total > MAX_ENTRIES {
                return dec.fail("payload larger than the format cap");
            }
            let data = dec.floats(total as usize)?;
            TensorPayload::Paired(PairedTensor::new(Shape::new(rows)?, Shape::new(cols)?, data)?)
        }
        KIND_TT => {
            let d = dec.order()?;
            let sizes = dec.sizes(d, "mode size")?;
            let ranks = dec.sizes(d + 1, "rank")?;
            if ranks[0] != 1 || ranks[d] != 1 {
                return dec.fail("train boundary ranks must be 1");
            }
            let mut cores = Vec::with_capacity(d);
            for n in 0..d {
                let count = dec.checked_product(&[ranks[n], sizes[n], ranks[n + 1]])?;
                let data = dec.floats(count)?;
                let core = Array3::from_shape_vec((ranks[n], sizes[n], ranks[n + 1]), data)
                    .expect("core buffer length was just checked");
                cores.push(core);
            }
            TensorPayload::Train(TensorTrain::from_cores(cores)?)
        }
        KIND_GTT => {
            let d = dec.order()?;
            let rows = dec.sizes(d, "row size")?;
            let cols = dec.sizes(d, "column size")?;
            let ranks = dec.sizes(d + 1, "rank")?;
            if ranks[0] != 1 || ranks[d] != 1 {
                return dec.fail("train boundary ranks must be 1");
            }
            let mut cores = Vec::with_capacity(d);
            for n in 0..d {
                let count =
                    dec.checked_product(&[ranks[n], rows[n], cols[n], ranks[n + 1]])?;
                let data = dec.floats(count)?;
                let core =
                    Array4::from_shape_vec((ranks[n], rows[n], cols[n], ranks[n + 1]), data)
                        .expect("core buffer length was just checked");
                cores.push(core);
            }
            TensorPayload::PairedTrain(PairedTensorTrain::from_cores(cores)?)
        }
        other => return dec.fail(format!("unknown tensor kind {other}")),
    };

    let mut probe = [0u8; 1];
    if dec.inner.read(&mut probe)? != 0 {
        return dec.fail("trailing bytes after the payload");
    }
    Ok(payload)
}

/// Read a file that must contain a system operator: paired or gtt kind.
pub fn read_operator(path: &Path) -> CliResult<mlti::systems::Operator> {
    match read_tensor_file(path)? {
        TensorPayload::Paired(p) => Ok(mlti::systems::Operator::Dense(p)),
        TensorPayload::PairedTrain(t) => Ok(mlti::systems::Operator::Train(t)),
        other => Err(CliError::Invalid(format!(
            "{} holds a {} tensor; system operators need the paired or gtt kind",
            path.display(),
            other.kind_name()
        ))),
    }
}
