//! Binary envelope shared by every persisted artifact.
//!
//! An enveloped artifact is an 8-byte header followed by a body:
//!
//! | offset | size | field                 |
//! |--------|------|-----------------------|
//! | 0      | 4    | magic `BTF1`          |
//! | 4      | 1    | parameter-set id      |
//! | 5      | 1    | type tag              |
//! | 6      | 2    | reserved, zero        |
//!
//! Bodies are sequences of little-endian 32-bit torus words unless a type
//! says otherwise. Protocol messages carry bare bodies, so the byte counts in
//! the transmission ledger are body sizes; the envelope is only used for
//! files written by the CLI.

use crate::error::{Error, Result};
use crate::torus_lwe::ParamSet;

pub const MAGIC: [u8; 4] = *b"BTF1";
pub const HEADER_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum TypeTag {
    SecretKey = 1,
    Ciphertext = 2,
    CiphertextList = 3,
    PublicKeySet = 4,
    EvaluationKey = 5,
    DecryptionKey = 6,
    TriviumKey = 7,
    HomTriviumState = 8,
}

impl TypeTag {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => Self::SecretKey,
            2 => Self::Ciphertext,
            3 => Self::CiphertextList,
            4 => Self::PublicKeySet,
            5 => Self::EvaluationKey,
            6 => Self::DecryptionKey,
            7 => Self::TriviumKey,
            8 => Self::HomTriviumState,
            _ => return Err(Error::Decode(format!("unknown type tag {v}"))),
        })
    }
}

pub fn header(set: ParamSet, tag: TypeTag) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(&MAGIC);
    h[4] = set.id();
    h[5] = tag as u8;
    h
}

/// Splits an enveloped buffer into its parameter set, tag and body.
pub fn open(bytes: &[u8]) -> Result<(ParamSet, TypeTag, &[u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode("buffer shorter than header".into()));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Decode("reserved header bytes are not zero".into()));
    }
    let set = ParamSet::from_id(bytes[4])?;
    let tag = TypeTag::from_u8(bytes[5])?;
    Ok((set, tag, &bytes[HEADER_LEN..]))
}

pub fn put_words(out: &mut Vec<u8>, words: &[u32]) {
    out.reserve(words.len() * 4);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

pub fn get_words(bytes: &[u8]) -> Result<Vec<u32>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Decode(format!(
            "{} bytes is not a whole number of words",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Types with a fixed binary body.
pub trait Wire: Sized {
    const TAG: TypeTag;

    fn param_set(&self) -> ParamSet;

    fn write_body(&self, out: &mut Vec<u8>);

    fn read_body(set: ParamSet, body: &[u8]) -> Result<Self>;

    fn to_body(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_body(&mut out);
        out
    }

    fn to_enveloped(&self) -> Vec<u8> {
        let mut out = header(self.param_set(), Self::TAG).to_vec();
        self.write_body(&mut out);
        out
    }

    fn from_enveloped(bytes: &[u8]) -> Result<Self> {
        let (set, tag, body) = open(bytes)?;
        if tag != Self::TAG {
            return Err(Error::Decode(format!(
                "expected {:?}, found {:?}",
                Self::TAG,
                tag
            )));
        }
        Self::read_body(set, body)
    }
}
