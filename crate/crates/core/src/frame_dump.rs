//! Binary frame dump for golden-file tests.
//!
//! Layout, all little-endian: the magic `AMBCFRM1`, then `N, M, K, T, P` as
//! `u32`, then the `T x K` ambient symbols and the `T x M x K` observations,
//! row-major, each complex value as an `(f32 re, f32 im)` pair.

use std::io::{self, Read, Write};

use crate::channel::Frame;
use crate::C64;

pub const FRAME_MAGIC: &[u8; 8] = b"AMBCFRM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub n_tags: u32,
    pub n_antennas: u32,
    pub str_samples: u32,
    pub frame_len: u32,
    pub n_pilots: u32,
}

/// A frame as read back from a dump, at `f32` precision.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDump {
    pub header: FrameHeader,
    pub ambient: Vec<[f32; 2]>,
    pub obs: Vec<[f32; 2]>,
}

fn u32_of(v: usize) -> io::Result<u32> {
    u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"))
}

pub fn write_frame<W: Write>(frame: &Frame, mut out: W) -> io::Result<()> {
    out.write_all(FRAME_MAGIC)?;
    for dim in [
        frame.n_tags,
        frame.n_antennas,
        frame.str_samples,
        frame.frame_len(),
        frame.pilot_len,
    ] {
        out.write_all(&u32_of(dim)?.to_le_bytes())?;
    }
    let put = |out: &mut W, z: &C64| -> io::Result<()> {
        out.write_all(&(z.re as f32).to_le_bytes())?;
        out.write_all(&(z.im as f32).to_le_bytes())
    };
    for z in &frame.ambient {
        put(&mut out, z)?;
    }
    for z in &frame.obs {
        put(&mut out, z)?;
    }
    out.flush()
}

pub fn read_frame<R: Read>(mut input: R) -> io::Result<FrameDump> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != FRAME_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not an AMBCFRM1 frame dump"));
    }
    let mut dims = [0u32; 5];
    for d in &mut dims {
        let mut b = [0u8; 4];
        input.read_exact(&mut b)?;
        *d = u32::from_le_bytes(b);
    }
    let header = FrameHeader {
        n_tags: dims[0],
        n_antennas: dims[1],
        str_samples: dims[2],
        frame_len: dims[3],
        n_pilots: dims[4],
    };
    let (m, k, t) = (dims[1] as usize, dims[2] as usize, dims[3] as usize);
    let mut take = |count: usize| -> io::Result<Vec<[f32; 2]>> {
        let mut buf = vec![0u8; count * 8];
        input.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| {
                [
                    f32::from_le_bytes(c[0..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..8].try_into().unwrap()),
                ]
            })
            .collect())
    };
    let ambient = take(t * k)?;
    let obs = take(t * m * k)?;
    Ok(FrameDump { header, ambient, obs })
}
