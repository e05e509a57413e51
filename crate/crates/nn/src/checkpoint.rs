//! Binary network checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! "AMBCNET1"  u32 version
//! u32 len, UTF-8 metadata ("key=value" lines)
//! repeated until EOF:
//!     u32 name_len, name bytes, u32 rank, rank x u32 dims, f32 payload
//! ```

use std::collections::BTreeMap;
use std::io::{ErrorKind, Read, Write};
use std::path::Path;

use crate::{NnError, Result, Sequential, Tensor};

pub const MAGIC: &[u8; 8] = b"AMBCNET1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    /// Snapshot of every persistent tensor (parameters and running
    /// statistics) of `net`.
    pub fn capture(net: &Sequential<f32>, metadata: BTreeMap<String, String>) -> Self {
        let tensors = net
            .named_tensors()
            .into_iter()
            .map(|(name, t, _)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect();
        Checkpoint { metadata, tensors }
    }

    /// Copies the stored tensors into `net`, which must have exactly the same
    /// tensor table (names, order and shapes).
    pub fn restore(&self, net: &mut Sequential<f32>) -> Result<()> {
        let mut targets = net.named_tensors_mut();
        if targets.len() != self.tensors.len() {
            return Err(NnError::ShapeTable(format!(
                "network has {} tensors, checkpoint has {}",
                targets.len(),
                self.tensors.len()
            )));
        }
        for ((name, t, _), stored) in targets.iter().zip(&self.tensors) {
            if *name != stored.name || t.shape() != stored.shape.as_slice() {
                return Err(NnError::ShapeTable(format!(
                    "expected `{name}` {:?}, found `{}` {:?}",
                    t.shape(),
                    stored.name,
                    stored.shape
                )));
            }
        }
        for ((_, t, _), stored) in targets.iter_mut().zip(&self.tensors) {
            t.data_mut().copy_from_slice(&stored.data);
            t.zero_grad();
        }
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    /// Parsed metadata value; a missing or malformed entry is an error.
    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.meta(key)
            .ok_or_else(|| NnError::Metadata(format!("missing `{key}`")))?
            .parse()
            .map_err(|_| NnError::Metadata(format!("malformed `{key}`")))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(NnError::Metadata(format!("unencodable entry `{k}`")));
            }
            meta.push_str(&format!("{k}={v}\n"));
        }
        write_u32(&mut w, meta.len())?;
        w.write_all(meta.as_bytes())?;
        for t in &self.tensors {
            write_u32(&mut w, t.name.len())?;
            w.write_all(t.name.as_bytes())?;
            write_u32(&mut w, t.shape.len())?;
            for &d in &t.shape {
                write_u32(&mut w, d)?;
            }
            let mut buf = Vec::with_capacity(4 * t.data.len());
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(NnError::VersionMismatch(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let version = read_u32(&mut r, "version")?;
        if version != FORMAT_VERSION {
            return Err(NnError::VersionMismatch(format!(
                "format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let len = read_u32(&mut r, "metadata length")? as usize;
        let mut meta = vec![0u8; len];
        read_exact(&mut r, &mut meta, "metadata")?;
        let meta = String::from_utf8(meta).map_err(|_| NnError::Metadata("not UTF-8".into()))?;
        let mut metadata = BTreeMap::new();
        for line in meta.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| NnError::Metadata(format!("line without `=`: {line}")))?;
            metadata.insert(k.to_string(), v.to_string());
        }
        let mut tensors = Vec::new();
        loop {
            let mut first = [0u8; 4];
            match r.read(&mut first)? {
                0 => break,
                n if n < 4 => read_exact(&mut r, &mut first[n..], "tensor name length")?,
                _ => {}
            }
            let name_len = u32::from_le_bytes(first) as usize;
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name, "tensor name")?;
            let name = String::from_utf8(name).map_err(|_| NnError::Metadata("tensor name not UTF-8".into()))?;
            let rank = read_u32(&mut r, "tensor rank")? as usize;
            let shape = (0..rank)
                .map(|_| read_u32(&mut r, "tensor dims").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let count: usize = shape.iter().product();
            let mut bytes = vec![0u8; 4 * count];
            read_exact(&mut r, &mut bytes, "tensor payload")?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Checkpoint { metadata, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Tensor by name, as a [`Tensor`].
    pub fn tensor(&self, name: &str) -> Option<Tensor<f32>> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| Tensor::new(t.shape.clone(), t.data.clone()).expect("consistent record"))
    }
}

fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| NnError::Metadata(format!("{v} does not fit in 32 bits")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => NnError::Truncated(what),
        _ => NnError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}
