use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ledger::TransmissionLedger;
use crate::btf_protocol::{Artifact, Channel, Model, Phase};
use crate::error::{Error, Result};
use crate::serial::Wire;
use crate::torus_lwe::{LweCiphertext, LweSecretKey, ParamSet};
use crate::trivium::KEY_BITS;

pub const KIB: f64 = 1024.0;
pub const MIB: f64 = 1024.0 * 1024.0;

/// Sizes with 1024-based units.
pub fn format_bytes(b: u64) -> String {
    let x = b as f64;
    if x >= MIB {
        format!("{:.2} MB", x / MIB)
    } else if x >= KIB {
        format!("{:.2} KB", x / KIB)
    } else {
        format!("{b} B")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupRow {
    pub model: Model,
    /// Setup-stage bytes per channel.
    pub channels: BTreeMap<Channel, u64>,
    pub client_to_server: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetupReport {
    pub params: String,
    pub l_w: usize,
    pub rows: Vec<SetupRow>,
    /// ST-FHE client-to-server setup bytes over BTF's.
    pub ratio_st_fhe: f64,
    /// Orig-TC client-to-server setup bytes over BTF's.
    pub ratio_orig_tc: f64,
}

impl SetupReport {
    pub fn row(&self, model: Model) -> &SetupRow {
        self.rows.iter().find(|r| r.model == model).expect("every model present")
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "setup stage, {} (l_w = {})", self.params, self.l_w);
        let _ = writeln!(s, "{:<8} {:>8} {:>14} {:>12}", "model", "channel", "bytes", "size");
        for row in &self.rows {
            for (ch, b) in &row.channels {
                let _ = writeln!(s, "{:<8} {:>8} {:>14} {:>12}", row.model.name(), ch.label(), b, format_bytes(*b));
            }
        }
        let _ = writeln!(s, "ST-FHE / BTF  (C->S): {:.2}x", self.ratio_st_fhe);
        let _ = writeln!(s, "Orig-TC / BTF (C->S): {:.2}x", self.ratio_orig_tc);
        s
    }
}

/// Per-channel setup totals and client-to-server reduction ratios from one
/// ledger per model.
pub fn report_setup(ledgers: &[&TransmissionLedger]) -> Result<SetupReport> {
    let first = ledgers
        .first()
        .ok_or_else(|| Error::IncompleteRun("no ledgers".into()))?;
    let mut rows = Vec::new();
    for model in Model::ALL {
        let l = ledgers
            .iter()
            .find(|l| l.model == model)
            .ok_or_else(|| Error::IncompleteRun(format!("no {model} run")))?;
        if l.params != first.params || l.l_w != first.l_w {
            return Err(Error::IncompleteRun(format!("{model} ran with different parameters")));
        }
        if !l.has_phase(Phase::Kdp) {
            return Err(Error::IncompleteRun(format!("{model} has no key distribution")));
        }
        let channels = Channel::ALL
            .iter()
            .map(|&c| (c, l.setup_total(c)))
            .filter(|&(_, b)| b > 0)
            .collect();
        rows.push(SetupRow {
            model,
            channels,
            client_to_server: l.setup_total(Channel::CToS),
        });
    }
    let c2s = |m: Model| rows.iter().find(|r| r.model == m).expect("present").client_to_server as f64;
    let btf = c2s(Model::Btf);
    if btf == 0.0 {
        return Err(Error::IncompleteRun("BTF sent nothing client to server".into()));
    }
    Ok(SetupReport {
        params: first.params.clone(),
        l_w: first.l_w,
        ratio_st_fhe: c2s(Model::StFhe) / btf,
        ratio_orig_tc: c2s(Model::OrigTc) / btf,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateExpansion {
    pub params: String,
    pub l_w: usize,
    pub ciphertext_bytes: u64,
    pub template_bytes: u64,
    /// `l_w / 8` bytes of stream ciphertext.
    pub stream_bytes: u64,
    pub factor: f64,
    /// Against a 0.5 KB stream ciphertext.
    pub factor_half_kb: f64,
    /// Against 0.5 KB, converting the template's MB to KB by 1000.
    pub factor_half_kb_mixed_units: f64,
    /// One FHE ciphertext against a one-byte plaintext result.
    pub result_factor: f64,
}

impl TemplateExpansion {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "template expansion, {} (l_w = {})", self.params, self.l_w);
        let _ = writeln!(s, "FHE template        {:>12} B ({})", self.template_bytes, format_bytes(self.template_bytes));
        let _ = writeln!(s, "stream ciphertext   {:>12} B", self.stream_bytes);
        let _ = writeln!(s, "expansion           {:>12.1}x", self.factor);
        let _ = writeln!(s, "vs 0.5 KB           {:>12.1}x", self.factor_half_kb);
        let _ = writeln!(s, "vs 0.5 KB (MB=1000 KB){:>8.1}x", self.factor_half_kb_mixed_units);
        let _ = writeln!(s, "result vs 1-byte r  {:>12.1}x", self.result_factor);
        s
    }
}

/// FHE template size against the stream ciphertext it replaces on the wire.
pub fn report_template_expansion(set: ParamSet, l_w: usize) -> TemplateExpansion {
    let ct = LweCiphertext::trivial(set, 0).to_body().len() as u64;
    let template = ct * l_w as u64;
    let stream = l_w.div_ceil(8) as u64;
    TemplateExpansion {
        params: set.name().to_string(),
        l_w,
        ciphertext_bytes: ct,
        template_bytes: template,
        stream_bytes: stream,
        factor: template as f64 / stream as f64,
        factor_half_kb: template as f64 / 512.0,
        factor_half_kb_mixed_units: (template as f64 / MIB) * 1000.0 / 0.5,
        result_factor: ct as f64,
    }
}

/// Serialized sizes of every stored or transmitted item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSizes {
    pub params: String,
    pub l_w: usize,
    pub ciphertext: u64,
    pub sk: u64,
    pub k: u64,
    pub iv: u64,
    pub pk_k: u64,
    pub pk_c: u64,
    pub evk: u64,
    pub dk: u64,
    pub k_prime: u64,
}

impl UnitSizes {
    /// Sizes read off a BTF key-distribution ledger, plus the serialized
    /// sizes of a ciphertext and a secret key.
    pub fn from_btf_ledger(ledger: &TransmissionLedger) -> Result<Self> {
        if ledger.model != Model::Btf {
            return Err(Error::IncompleteRun("unit sizes come from a BTF run".into()));
        }
        let set: ParamSet = ledger.params.parse()?;
        let get = |a: Artifact| {
            ledger
                .size_of(a)
                .ok_or_else(|| Error::IncompleteRun(format!("ledger has no {a}")))
        };
        let sk = LweSecretKey::from_bits(set, &vec![false; set.lwe().n])?;
        Ok(Self {
            params: ledger.params.clone(),
            l_w: ledger.l_w,
            ciphertext: LweCiphertext::trivial(set, 0).to_body().len() as u64,
            sk: sk.to_body().len() as u64,
            k: (KEY_BITS / 8) as u64,
            iv: get(Artifact::Iv)?,
            pk_k: get(Artifact::PkK)?,
            pk_c: get(Artifact::PkC)?,
            evk: get(Artifact::Evk)?,
            dk: get(Artifact::EncDk)?,
            k_prime: get(Artifact::KPrime)?,
        })
    }

    pub fn template(&self) -> u64 {
        self.ciphertext * self.l_w as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelScaling {
    pub model: Model,
    pub server_evk: u64,
    pub server_pk_c: u64,
    pub server_dk: u64,
    pub server_templates: u64,
    pub server_total: u64,
    pub trusted_party_total: u64,
    pub clients_total: u64,
    /// Setup-stage bytes per channel, all clients together.
    pub setup: BTreeMap<Channel, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub n_c: u64,
    pub units: UnitSizes,
    pub models: Vec<ModelScaling>,
}

impl ScalingReport {
    pub fn model(&self, model: Model) -> &ModelScaling {
        self.models.iter().find(|m| m.model == model).expect("every model present")
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "stored keys and setup traffic, {} clients, {}", self.n_c, self.units.params);
        let _ = writeln!(
            s,
            "{:<8} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "model", "server evk", "server pk_c", "server dk", "server total", "setup C->S"
        );
        for m in &self.models {
            let _ = writeln!(
                s,
                "{:<8} {:>12} {:>12} {:>12} {:>12} {:>12}",
                m.model.name(),
                format_bytes(m.server_evk),
                format_bytes(m.server_pk_c),
                format_bytes(m.server_dk),
                format_bytes(m.server_total),
                format_bytes(m.setup.get(&Channel::CToS).copied().unwrap_or(0)),
            );
        }
        s
    }
}

/// Closed-form storage and setup traffic for `n_c` clients, each with one
/// registered template. The three-party model keeps one global key set;
/// the baselines keep one per client.
pub fn report_scaling(units: &UnitSizes, n_c: u64) -> Result<ScalingReport> {
    if n_c == 0 {
        return Err(Error::InvalidParams("at least one client".into()));
    }
    let u = units;
    let n = n_c;
    let scaling = |model, evk, pk_c, dk, tp, clients, setup: Vec<(Channel, u64)>| {
        let templates = n * u.template();
        ModelScaling {
            model,
            server_evk: evk,
            server_pk_c: pk_c,
            server_dk: dk,
            server_templates: templates,
            server_total: evk + pk_c + dk + templates,
            trusted_party_total: tp,
            clients_total: clients,
            setup: setup.into_iter().collect(),
        }
    };
    let models = vec![
        scaling(
            Model::Btf,
            u.evk,
            u.pk_c,
            n * u.dk,
            u.sk + u.evk,
            n * u.k,
            vec![
                (Channel::TpToC, n * u.pk_k),
                (Channel::TpToS, u.pk_c + u.evk),
                (Channel::CToS, n * (u.iv + u.k_prime + u.dk)),
            ],
        ),
        scaling(Model::StFhe, n * u.evk, 0, 0, 0, n * u.sk, vec![(Channel::CToS, n * u.evk)]),
        scaling(
            Model::OrigTc,
            n * u.evk,
            n * u.pk_c,
            n * u.dk,
            0,
            n * (u.sk + u.k),
            vec![(Channel::CToS, n * (u.pk_c + u.evk + u.dk + u.iv))],
        ),
    ];
    Ok(ScalingReport {
        n_c,
        units: units.clone(),
        models,
    })
}
