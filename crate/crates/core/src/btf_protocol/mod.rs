//! Three-party transciphering protocol (client, server, trusted party) and
//! the two two-party baselines it is compared against.
//!
//! Every message crosses a framed transport and is appended to a
//! [`TransmissionLedger`](crate::harness::TransmissionLedger) with its exact
//! payload length. Each party is a separate state machine that only sees the
//! bytes addressed to it.

mod frame;
mod party;
mod session;
mod transport;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use frame::{ChannelKeys, ProtocolMessage, FRAME_HEADER_LEN, MAC_LEN};
pub use party::{check_separation, Holding, PartyState, Role};
pub use session::{
    expected_flows, new_session, BtfSession, Network, OrigTcSession, PkReissue, Session, SessionConfig, StFheSession,
    VerifyOutcome,
};
pub use transport::{CountingTransport, InProcTransport, Link, SocketTransport, Transport, TransportKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "TP->C")]
    TpToC,
    #[serde(rename = "TP->S")]
    TpToS,
    #[serde(rename = "C->S")]
    CToS,
    #[serde(rename = "S->C")]
    SToC,
    #[serde(rename = "S->TP")]
    SToTp,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::TpToC, Channel::TpToS, Channel::CToS, Channel::SToC, Channel::SToTp];

    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get((id as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Decode(format!("unknown channel {id}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::TpToC => "TP->C",
            Channel::TpToS => "TP->S",
            Channel::CToS => "C->S",
            Channel::SToC => "S->C",
            Channel::SToTp => "S->TP",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// What a message carries.
///
/// `Dk`, `EncW` and `EncWPrime` only occur in the baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Artifact {
    #[serde(rename = "pk_k")]
    PkK,
    #[serde(rename = "pk_c")]
    PkC,
    #[serde(rename = "evk")]
    Evk,
    #[serde(rename = "E(dk,k')")]
    EncDk,
    #[serde(rename = "IV")]
    Iv,
    #[serde(rename = "k'")]
    KPrime,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "c'")]
    CPrime,
    #[serde(rename = "Enc(r)")]
    EncR,
    #[serde(rename = "r")]
    R,
    #[serde(rename = "dk")]
    Dk,
    #[serde(rename = "Enc(w)")]
    EncW,
    #[serde(rename = "Enc(w')")]
    EncWPrime,
}

impl Artifact {
    pub const ALL: [Artifact; 13] = [
        Artifact::PkK,
        Artifact::PkC,
        Artifact::Evk,
        Artifact::EncDk,
        Artifact::Iv,
        Artifact::KPrime,
        Artifact::C,
        Artifact::CPrime,
        Artifact::EncR,
        Artifact::R,
        Artifact::Dk,
        Artifact::EncW,
        Artifact::EncWPrime,
    ];

    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&a| a == self).expect("listed") as u8 + 1
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .get((id as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Decode(format!("unknown artifact {id}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            Artifact::PkK => "pk_k",
            Artifact::PkC => "pk_c",
            Artifact::Evk => "evk",
            Artifact::EncDk => "E(dk,k')",
            Artifact::Iv => "IV",
            Artifact::KPrime => "k'",
            Artifact::C => "c",
            Artifact::CPrime => "c'",
            Artifact::EncR => "Enc(r)",
            Artifact::R => "r",
            Artifact::Dk => "dk",
            Artifact::EncW => "Enc(w)",
            Artifact::EncWPrime => "Enc(w')",
        }
    }
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "btf")]
    Btf,
    #[serde(rename = "st-fhe")]
    StFhe,
    #[serde(rename = "orig-tc")]
    OrigTc,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Btf, Model::StFhe, Model::OrigTc];

    pub fn name(self) -> &'static str {
        match self {
            Model::Btf => "btf",
            Model::StFhe => "st-fhe",
            Model::OrigTc => "orig-tc",
        }
    }

    /// Every `(channel, artifact)` pair the model may send.
    pub fn flows(self) -> &'static [(Channel, Artifact)] {
        use Artifact::*;
        use Channel::*;
        match self {
            Model::Btf => &[
                (TpToC, PkK),
                (TpToC, R),
                (TpToS, PkC),
                (TpToS, Evk),
                (TpToS, R),
                (CToS, Iv),
                (CToS, KPrime),
                (CToS, EncDk),
                (CToS, C),
                (CToS, CPrime),
                (SToTp, EncR),
            ],
            Model::StFhe => &[(CToS, Evk), (CToS, EncW), (CToS, EncWPrime), (SToC, EncR)],
            Model::OrigTc => &[
                (CToS, PkC),
                (CToS, Evk),
                (CToS, Dk),
                (CToS, Iv),
                (CToS, C),
                (CToS, CPrime),
                (SToC, EncR),
            ],
        }
    }

    pub fn allows(self, channel: Channel, artifact: Artifact) -> bool {
        self.flows().contains(&(channel, artifact))
    }

    pub fn check(self, channel: Channel, artifact: Artifact) -> Result<()> {
        if self.allows(channel, artifact) {
            Ok(())
        } else {
            Err(Error::ChannelViolation {
                model: self,
                channel,
                artifact,
            })
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "btf" => Ok(Model::Btf),
            "st-fhe" | "stfhe" | "st_fhe" => Ok(Model::StFhe),
            "orig-tc" | "origtc" | "orig_tc" => Ok(Model::OrigTc),
            _ => Err(Error::InvalidParams(format!("unknown model {s}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "KDP")]
    Kdp,
    #[serde(rename = "INP")]
    Inp,
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "VS")]
    Vs,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Kdp, Phase::Inp, Phase::Rs, Phase::Vs];

    /// Key distribution and initialisation form the setup stage.
    pub fn is_setup(self) -> bool {
        matches!(self, Phase::Kdp | Phase::Inp)
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::Kdp => "KDP",
            Phase::Inp => "INP",
            Phase::Rs => "RS",
            Phase::Vs => "VS",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `k′`: a uniformly random pad as long as the serialized dk.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey {
    bytes: Vec<u8>,
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey({} bytes)", self.bytes.len())
    }
}

impl SessionKey {
    pub fn generate<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; len];
        rng.fill(&mut bytes[..]);
        Self { bytes }
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// `E(dk, k′)`: the serialized dk XORed with the pad. The same call strips
/// the layer again.
pub fn double_encrypt(dk_body: &[u8], k_prime: &SessionKey) -> Result<Vec<u8>> {
    if dk_body.len() != k_prime.len() {
        return Err(Error::LengthMismatch {
            expected: dk_body.len(),
            found: k_prime.len(),
        });
    }
    Ok(dk_body.iter().zip(&k_prime.bytes).map(|(a, b)| a ^ b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn ids_round_trip() {
        for c in Channel::ALL {
            assert_eq!(Channel::from_id(c.id()).unwrap(), c);
        }
        for a in Artifact::ALL {
            assert_eq!(Artifact::from_id(a.id()).unwrap(), a);
        }
        assert!(Channel::from_id(0).is_err());
        assert!(Artifact::from_id(14).is_err());
    }

    #[test]
    fn flow_tables() {
        assert!(Model::Btf.allows(Channel::CToS, Artifact::EncDk));
        assert!(!Model::Btf.allows(Channel::CToS, Artifact::Dk));
        assert!(!Model::Btf.allows(Channel::SToC, Artifact::EncR));
        assert!(matches!(
            Model::StFhe.check(Channel::CToS, Artifact::PkC),
            Err(Error::ChannelViolation { .. })
        ));
        assert_eq!("ST-FHE".parse::<Model>().unwrap(), Model::StFhe);
    }

    #[test]
    fn pad_is_an_involution() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let body: Vec<u8> = (0..64).map(|i| i as u8).collect();
        let k = SessionKey::generate(body.len(), &mut rng);
        let e = double_encrypt(&body, &k).unwrap();
        assert_eq!(e.len(), body.len());
        assert_eq!(double_encrypt(&e, &k).unwrap(), body);
        let pad: Vec<u8> = e.iter().zip(&body).map(|(a, b)| a ^ b).collect();
        assert_eq!(pad, k.as_bytes());
        assert!(double_encrypt(&body[1..], &k).is_err());
    }
}
