use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::btf_protocol::{Artifact, Channel, Model, Phase};
use crate::error::{Error, Result};
use crate::torus_lwe::ParamSet;

/// Client id recorded for sends shared by every client.
pub const SHARED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub phase: Phase,
    pub client: u32,
    pub channel: Channel,
    pub artifact: Artifact,
    /// Payload length.
    pub bytes: u64,
    /// Length on the wire, framing and tag included.
    pub frame_bytes: u64,
    pub secure: bool,
    /// A replacement public key sent because the previous one ran out.
    pub reissue: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionLedger {
    pub model: Model,
    pub params: String,
    pub l_w: usize,
    pub entries: Vec<LedgerEntry>,
}

impl TransmissionLedger {
    pub fn new(model: Model, set: ParamSet, l_w: usize) -> Self {
        Self {
            model,
            params: set.name().to_string(),
            l_w,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: LedgerEntry) {
        self.entries.push(entry);
    }

    pub fn total_where(&self, keep: impl Fn(&LedgerEntry) -> bool) -> u64 {
        self.entries.iter().filter(|e| keep(e)).map(|e| e.bytes).sum()
    }

    pub fn total(&self) -> u64 {
        self.total_where(|_| true)
    }

    pub fn frame_total(&self) -> u64 {
        self.entries.iter().map(|e| e.frame_bytes).sum()
    }

    pub fn phase_total(&self, phase: Phase) -> u64 {
        self.total_where(|e| e.phase == phase)
    }

    pub fn channel_total(&self, channel: Channel) -> u64 {
        self.total_where(|e| e.channel == channel)
    }

    /// Bytes on `channel` during key distribution and initialisation.
    pub fn setup_total(&self, channel: Channel) -> u64 {
        self.total_where(|e| e.channel == channel && e.phase.is_setup())
    }

    pub fn has_phase(&self, phase: Phase) -> bool {
        self.entries.iter().any(|e| e.phase == phase)
    }

    /// Distinct `(channel, artifact)` pairs sent.
    pub fn flows(&self) -> BTreeSet<(Channel, Artifact)> {
        self.entries.iter().map(|e| (e.channel, e.artifact)).collect()
    }

    /// How often each pair was sent, replacement keys excluded.
    pub fn flow_counts(&self) -> BTreeMap<(Channel, Artifact), usize> {
        let mut out = BTreeMap::new();
        for e in self.entries.iter().filter(|e| !e.reissue) {
            *out.entry((e.channel, e.artifact)).or_default() += 1;
        }
        out
    }

    /// Payload size of the first send of `artifact`.
    pub fn size_of(&self, artifact: Artifact) -> Option<u64> {
        self.entries.iter().find(|e| e.artifact == artifact).map(|e| e.bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(phase: Phase, channel: Channel, artifact: Artifact, bytes: u64) -> LedgerEntry {
        LedgerEntry {
            phase,
            client: 0,
            channel,
            artifact,
            bytes,
            frame_bytes: bytes + 7,
            secure: false,
            reissue: false,
        }
    }

    #[test]
    fn totals_are_sums() {
        let mut l = TransmissionLedger::new(Model::Btf, ParamSet::Tfhe128, 64);
        l.push(entry(Phase::Kdp, Channel::CToS, Artifact::Iv, 10));
        l.push(entry(Phase::Kdp, Channel::TpToS, Artifact::Evk, 100));
        l.push(entry(Phase::Rs, Channel::CToS, Artifact::C, 8));
        assert_eq!(l.total(), 118);
        assert_eq!(l.setup_total(Channel::CToS), 10);
        assert_eq!(l.channel_total(Channel::CToS), 18);
        assert_eq!(l.phase_total(Phase::Inp), 0);
        assert_eq!(l.frame_total(), 118 + 21);
        assert_eq!(l.flows().len(), 3);
        let back = TransmissionLedger::from_json(&l.to_json()).unwrap();
        assert_eq!(back, l);
    }
}
