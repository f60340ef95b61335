//! Flat parameter export: `b"RMQF"`, version byte, representation tag byte,
//! `u16` rank, `u32` dims, then the live and target vectors, each as a `u64`
//! length followed by little-endian `f64`s.

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RMQF";
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ReprTag {
    Tabular = 1,
    Mlp = 2,
    CommHead = 3,
}

impl TryFrom<u8> for ReprTag {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(ReprTag::Tabular),
            2 => Ok(ReprTag::Mlp),
            3 => Ok(ReprTag::CommHead),
            other => Err(Error::Blob(format!("unknown representation tag {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlob {
    pub tag: ReprTag,
    pub shape: Vec<u32>,
    pub params: Vec<f64>,
    pub target: Vec<f64>,
}

impl ParamBlob {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * (self.params.len() + self.target.len()));
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.tag as u8);
        out.extend_from_slice(&(self.shape.len() as u16).to_le_bytes());
        for d in &self.shape {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in [&self.params, &self.target] {
            out.extend_from_slice(&(v.len() as u64).to_le_bytes());
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Blob("bad magic".into()));
        }
        let version = cur.take(1)?[0];
        if version != VERSION {
            return Err(Error::Blob(format!("unsupported version {version}")));
        }
        let tag = ReprTag::try_from(cur.take(1)?[0])?;
        let rank = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let shape = (0..rank)
            .map(|_| Ok(u32::from_le_bytes(cur.take(4)?.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        let params = cur.vector()?;
        let target = cur.vector()?;
        if cur.pos != bytes.len() {
            return Err(Error::Blob("trailing bytes".into()));
        }
        Ok(ParamBlob {
            tag,
            shape,
            params,
            target,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Blob("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        let len = u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize;
        if len > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::Blob("truncated".into()));
        }
        (0..len)
            .map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap())))
            .collect()
    }
}
