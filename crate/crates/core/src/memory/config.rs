//! Whole-system configurations and their canonical byte images.
//!
//! A configuration is the full system state: memory contents plus every
//! process's protocol-local state, poised instruction, and status. Snapshot
//! and restore round-trip bit-exactly through a versioned image format, which
//! the exploration engine also streams into a hash for memoization.
//!
//! Image layout (all integers big-endian):
//!   magic `CLIM` · u16 version (=1) · configuration bytes · 8-byte SHA-256
//! integrity tag over everything before the tag. The configuration bytes are
//! the canonical encodings of the memory, the process table, and the step
//! counter, in that order.

use sha2::{Digest, Sha256};

use super::{Instruction, Memory};
use crate::value::{put_u32, put_u64, put_u8, ByteReader, ByteSink, DecodeError, Value};

const IMAGE_MAGIC: &[u8; 4] = b"CLIM";
const IMAGE_VERSION: u16 = 1;
const TAG_LEN: usize = 8;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum ProcessStatus {
    Running,
    Decided(Value),
}

/// One simulated process: its protocol-local state, the instruction it is
/// poised to perform (None once decided), and its status.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ProcessEntry {
    pub state: Value,
    pub poised: Option<(u64, Instruction)>,
    pub status: ProcessStatus,
}

impl ProcessEntry {
    pub fn is_running(&self) -> bool {
        matches!(self.status, ProcessStatus::Running)
    }

    pub fn decided_value(&self) -> Option<&Value> {
        match &self.status {
            ProcessStatus::Decided(v) => Some(v),
            ProcessStatus::Running => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Configuration {
    pub memory: Memory,
    pub processes: Vec<ProcessEntry>,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("not a configuration image (bad magic)")]
    BadMagic,
    #[error("unsupported image version {0}")]
    Version(u16),
    #[error("image integrity check failed")]
    Integrity,
    #[error("image decode failed: {0}")]
    Decode(#[from] DecodeError),
    #[error("trailing bytes after configuration")]
    TrailingBytes,
}

/// Canonical, versioned, byte-stable serialization of a [`Configuration`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConfigurationImage(pub Vec<u8>);

impl Configuration {
    pub fn num_running(&self) -> usize {
        self.processes.iter().filter(|p| p.is_running()).count()
    }

    pub fn all_decided(&self) -> bool {
        self.num_running() == 0
    }

    /// Distinct decided values, in first-decided order not guaranteed;
    /// deterministic because process order is fixed.
    pub fn decided_values(&self) -> Vec<Value> {
        let mut seen = Vec::new();
        for p in &self.processes {
            if let Some(v) = p.decided_value() {
                if !seen.contains(v) {
                    seen.push(v.clone());
                }
            }
        }
        seen
    }

    pub fn encode(&self, out: &mut impl ByteSink) {
        self.memory.encode(out);
        put_u32(out, self.processes.len() as u32);
        for p in &self.processes {
            p.state.encode(out);
            match &p.poised {
                None => put_u8(out, 0),
                Some((loc, instr)) => {
                    put_u8(out, 1);
                    put_u64(out, *loc);
                    instr.encode(out);
                }
            }
            match &p.status {
                ProcessStatus::Running => put_u8(out, 0),
                ProcessStatus::Decided(v) => {
                    put_u8(out, 1);
                    v.encode(out);
                }
            }
        }
        put_u64(out, self.steps);
    }

    pub fn decode(rd: &mut ByteReader<'_>) -> Result<Configuration, DecodeError> {
        let memory = Memory::decode(rd)?;
        let n = rd.u32()? as usize;
        let mut processes = Vec::with_capacity(n.min(1 << 12));
        for _ in 0..n {
            let state = rd.value()?;
            let poised = match rd.u8()? {
                0 => None,
                1 => {
                    let loc = rd.u64()?;
                    Some((loc, Instruction::decode(rd)?))
                }
                tag => {
                    return Err(DecodeError::BadTag { what: "poised", tag, at: rd.pos() })
                }
            };
            let status = match rd.u8()? {
                0 => ProcessStatus::Running,
                1 => ProcessStatus::Decided(rd.value()?),
                tag => {
                    return Err(DecodeError::BadTag { what: "status", tag, at: rd.pos() })
                }
            };
            processes.push(ProcessEntry { state, poised, status });
        }
        let steps = rd.u64()?;
        Ok(Configuration { memory, processes, steps })
    }

    pub fn snapshot(&self) -> ConfigurationImage {
        let mut bytes = Vec::with_capacity(256);
        bytes.extend_from_slice(IMAGE_MAGIC);
        bytes.extend_from_slice(&IMAGE_VERSION.to_be_bytes());
        self.encode(&mut bytes);
        let tag = Sha256::digest(&bytes);
        bytes.extend_from_slice(&tag[..TAG_LEN]);
        ConfigurationImage(bytes)
    }

    pub fn restore(image: &ConfigurationImage) -> Result<Configuration, ImageError> {
        let bytes = &image.0;
        if bytes.len() < IMAGE_MAGIC.len() + 2 + TAG_LEN {
            return Err(ImageError::BadMagic);
        }
        if &bytes[..4] != IMAGE_MAGIC {
            return Err(ImageError::BadMagic);
        }
        let version = u16::from_be_bytes(bytes[4..6].try_into().unwrap());
        if version != IMAGE_VERSION {
            return Err(ImageError::Version(version));
        }
        let (body, tag) = bytes.split_at(bytes.len() - TAG_LEN);
        let expect = Sha256::digest(body);
        if tag != &expect[..TAG_LEN] {
            return Err(ImageError::Integrity);
        }
        let mut rd = ByteReader::new(&body[6..]);
        let config = Configuration::decode(&mut rd)?;
        if !rd.is_empty() {
            return Err(ImageError::TrailingBytes);
        }
        Ok(config)
    }

    /// 128-bit fingerprint of the canonical encoding, for memoization.
    pub fn fingerprint(&self) -> [u8; 16] {
        let mut hasher = Sha256::new();
        self.encode(&mut hasher);
        let digest = hasher.finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        out
    }
}
