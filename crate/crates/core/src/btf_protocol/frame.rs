//! Length-prefixed frames.
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | `len`, little-endian: bytes that follow |
//! | 4      | 1    | channel id                              |
//! | 5      | 1    | artifact id                             |
//! | 6      | 1    | secure flag (0 or 1)                    |
//! | 7      | ...  | payload                                 |
//! | ...    | 32   | HMAC-SHA256 tag, secure frames only     |
//!
//! The tag covers bytes 4 up to the end of the payload under the channel's
//! pre-shared key, standing in for the authenticated channel.

use std::collections::BTreeMap;

use hmac::{Hmac, KeyInit, Mac};
use rand::Rng;
use sha2::Sha256;

use super::{Artifact, Channel};
use crate::error::{Error, Result};

pub const FRAME_HEADER_LEN: usize = 7;
pub const MAC_LEN: usize = 32;

type HmacSha256 = Hmac<Sha256>;

/// Pre-shared MAC keys, one per channel.
#[derive(Clone)]
pub struct ChannelKeys {
    keys: BTreeMap<Channel, [u8; 32]>,
}

impl std::fmt::Debug for ChannelKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ChannelKeys({} channels)", self.keys.len())
    }
}

impl ChannelKeys {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let keys = Channel::ALL
            .iter()
            .map(|&c| {
                let mut k = [0u8; 32];
                rng.fill(&mut k);
                (c, k)
            })
            .collect();
        Self { keys }
    }

    fn mac(&self, channel: Channel) -> HmacSha256 {
        <HmacSha256 as KeyInit>::new_from_slice(&self.keys[&channel]).expect("any key length")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub channel: Channel,
    pub artifact: Artifact,
    pub secure: bool,
    pub payload: Vec<u8>,
}

impl ProtocolMessage {
    pub fn new(channel: Channel, artifact: Artifact, payload: Vec<u8>) -> Self {
        Self {
            channel,
            artifact,
            secure: false,
            payload,
        }
    }

    pub fn secure(mut self) -> Self {
        self.secure = true;
        self
    }

    /// Bytes on the wire for this message.
    pub fn frame_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len() + if self.secure { MAC_LEN } else { 0 }
    }

    pub fn encode(&self, keys: &ChannelKeys) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frame_len());
        out.extend_from_slice(&((self.frame_len() - 4) as u32).to_le_bytes());
        out.extend_from_slice(&[self.channel.id(), self.artifact.id(), self.secure as u8]);
        out.extend_from_slice(&self.payload);
        if self.secure {
            let mut mac = keys.mac(self.channel);
            mac.update(&out[4..]);
            out.extend_from_slice(&mac.finalize().into_bytes());
        }
        out
    }

    pub fn decode(frame: &[u8], keys: &ChannelKeys) -> Result<Self> {
        if frame.len() < FRAME_HEADER_LEN {
            return Err(Error::Decode("frame shorter than header".into()));
        }
        let len = u32::from_le_bytes([frame[0], frame[1], frame[2], frame[3]]) as usize;
        if len != frame.len() - 4 {
            return Err(Error::LengthMismatch {
                expected: len + 4,
                found: frame.len(),
            });
        }
        let channel = Channel::from_id(frame[4])?;
        let artifact = Artifact::from_id(frame[5])?;
        let secure = match frame[6] {
            0 => false,
            1 => true,
            v => return Err(Error::Decode(format!("secure flag {v}"))),
        };
        let end = if secure {
            if frame.len() < FRAME_HEADER_LEN + MAC_LEN {
                return Err(Error::BadMac(channel));
            }
            let end = frame.len() - MAC_LEN;
            let mut mac = keys.mac(channel);
            mac.update(&frame[4..end]);
            mac.verify_slice(&frame[end..]).map_err(|_| Error::BadMac(channel))?;
            end
        } else {
            frame.len()
        };
        Ok(Self {
            channel,
            artifact,
            secure,
            payload: frame[FRAME_HEADER_LEN..end].to_vec(),
        })
    }
}
