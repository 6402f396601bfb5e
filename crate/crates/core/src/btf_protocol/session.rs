//! Protocol runs. Each session owns its parties and a [`Network`]; parties
//! never touch each other's fields and only exchange framed bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::frame::{ChannelKeys, ProtocolMessage};
use super::party::{check_separation, Holding, PartyState, Role};
use super::transport::{CountingTransport, Link, Transport, TransportKind};
use super::{double_encrypt, Artifact, Channel, Model, Phase, SessionKey};
use crate::error::{Error, Result};
use crate::etm_circuits::{etm, EtmConfig};
use crate::gate_boot::{make_evaluation_key, BootstrapParams, EvaluationKey};
use crate::harness::{LedgerEntry, Timings, TransmissionLedger, SHARED};
use crate::hom_trivium::{efhe_init_with, efhe_keystream, encode_iv, hom_stream_decrypt, HomDecryptionKey, HomTriviumState, Policy};
use crate::serial::Wire;
use crate::torus_lwe::{
    decrypt, keygen, make_public_key, pk_encrypt_bits, read_list, write_list, LweCiphertext, LweSecretKey, ParamSet,
    PublicKeySet,
};
use crate::trivium::{e_encrypt, e_init, e_keygen, pack_bits, unpack_bits, TriviumKey, TriviumState, KEY_BITS, SECURITY_LEVEL};

/// When a fresh `pk_c` is issued once the first one is in use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PkReissue {
    /// Only when the remaining samples cannot cover the next encryption.
    #[default]
    OnExhaustion,
    /// Before every verification.
    EveryVerification,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub set: ParamSet,
    pub l_w: usize,
    pub threshold: u64,
    pub seed: u64,
    pub transport: TransportKind,
    pub clients: u32,
    /// Samples per issued `pk_c`.
    pub pk_c_samples: usize,
    pub reissue: PkReissue,
    pub policy: Policy,
    pub fused_adders: bool,
}

impl SessionConfig {
    /// One client, threshold `⌊l_w/4⌋`, `pk_c` holding `l_w` samples.
    pub fn new(set: ParamSet, l_w: usize) -> Self {
        Self {
            set,
            l_w,
            threshold: l_w as u64 / 4,
            seed: 0,
            transport: TransportKind::InProc,
            clients: 1,
            pk_c_samples: l_w,
            reissue: PkReissue::default(),
            policy: Policy::default(),
            fused_adders: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threshold(mut self, t: u64) -> Self {
        self.threshold = t;
        self
    }

    pub fn with_transport(mut self, t: TransportKind) -> Self {
        self.transport = t;
        self
    }

    pub fn with_clients(mut self, n: u32) -> Self {
        self.clients = n;
        self
    }

    pub fn etm(&self) -> EtmConfig {
        EtmConfig::new(self.l_w)
            .with_threshold(self.threshold)
            .with_fused(self.fused_adders)
    }

    pub fn validate(&self) -> Result<()> {
        self.etm().validate()?;
        if self.clients == 0 || self.clients == SHARED {
            return Err(Error::InvalidParams("client count out of range".into()));
        }
        if self.pk_c_samples < self.l_w {
            return Err(Error::InvalidParams("pk_c must cover one template".into()));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOutcome {
    /// The decision the client ends up with.
    pub r: bool,
    pub client: Option<bool>,
    pub server: Option<bool>,
}

/// Framed, authenticated, ledgered message passing.
pub struct Network {
    model: Model,
    transport: CountingTransport,
    keys: ChannelKeys,
    ledger: TransmissionLedger,
    phase: Phase,
}

impl Network {
    pub fn new(model: Model, config: &SessionConfig) -> Self {
        Self {
            model,
            transport: CountingTransport::new(config.transport.build()),
            keys: ChannelKeys::generate(&mut config.rng(3)),
            ledger: TransmissionLedger::new(model, config.set, config.l_w),
            phase: Phase::Kdp,
        }
    }

    pub fn ledger(&self) -> &TransmissionLedger {
        &self.ledger
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Bytes handed to the transport, as counted by the wrapper.
    pub fn wire_bytes(&self) -> u64 {
        self.transport.total_bytes()
    }

    pub fn wire_bytes_on(&self, channel: Channel) -> u64 {
        self.transport.bytes(channel)
    }

    /// Frames, records and transmits `msg` for `client`. Fails on pairs the
    /// model does not allow.
    pub fn send(&mut self, client: u32, msg: ProtocolMessage, reissue: bool) -> Result<()> {
        self.model.check(msg.channel, msg.artifact)?;
        let frame = msg.encode(&self.keys);
        self.ledger.push(LedgerEntry {
            phase: self.phase,
            client,
            channel: msg.channel,
            artifact: msg.artifact,
            bytes: msg.payload.len() as u64,
            frame_bytes: frame.len() as u64,
            secure: msg.secure,
            reissue,
        });
        self.transport.send_frame(
            Link {
                client,
                channel: msg.channel,
            },
            frame,
        )
    }

    /// Next message for `client` on `channel`, which must carry `wanted`.
    pub fn recv(&mut self, client: u32, channel: Channel, wanted: Artifact) -> Result<Vec<u8>> {
        let frame = self.transport.recv_frame(Link { client, channel })?;
        let msg = ProtocolMessage::decode(&frame, &self.keys)?;
        if msg.artifact != wanted || msg.channel != channel {
            return Err(Error::UnexpectedMessage {
                wanted,
                got: msg.artifact,
            });
        }
        Ok(msg.payload)
    }
}

fn state(role: Role, client: Option<u32>, items: impl IntoIterator<Item = (Holding, bool)>) -> PartyState {
    PartyState {
        role,
        client,
        holdings: items.into_iter().filter(|&(_, b)| b).map(|(h, _)| h).collect(),
    }
}

fn check_len(w: &[bool], l_w: usize) -> Result<()> {
    if w.len() != l_w {
        return Err(Error::LengthMismatch {
            expected: l_w,
            found: w.len(),
        });
    }
    Ok(())
}

fn fhe_keygen(set: ParamSet, rng: &mut ChaCha20Rng) -> Result<(LweSecretKey, Arc<EvaluationKey>)> {
    let bp = BootstrapParams::of(set);
    let sk = keygen(&bp.lwe, rng);
    let evk = make_evaluation_key(&sk, &bp, rng)?;
    Ok((sk, Arc::new(evk)))
}

fn r_byte(payload: &[u8]) -> Result<bool> {
    match payload {
        [0] => Ok(false),
        [1] => Ok(true),
        _ => Err(Error::Decode("result must be one byte, 0 or 1".into())),
    }
}

/// A client of either transciphering model.
struct Client {
    rng: ChaCha20Rng,
    sk: Option<LweSecretKey>,
    k: Option<TriviumKey>,
    cipher: Option<TriviumState>,
    result: Option<bool>,
}

impl Client {
    fn new(config: &SessionConfig, id: u32) -> Self {
        Self {
            rng: config.rng(100 + id as u64),
            sk: None,
            k: None,
            cipher: None,
            result: None,
        }
    }

    fn state(&self, id: u32) -> PartyState {
        state(
            Role::Client,
            Some(id),
            [
                (Holding::Sk, self.sk.is_some()),
                (Holding::K, self.k.is_some()),
                (Holding::CipherState, self.cipher.is_some()),
            ],
        )
    }

    /// `c = w ⊕ k̄` for the next `|w|` keystream bits.
    fn stream_encrypt(&mut self, w: &[bool], timings: &mut Timings, phase: Phase, label: &str) -> Result<Vec<u8>> {
        let cipher = self.cipher.as_mut().ok_or(Error::MissingKey("client cipher state"))?;
        let kbar = timings.time(phase, Role::Client, "E.KeyStream", || cipher.keystream(w.len()));
        let c = timings.time(phase, Role::Client, label, || e_encrypt(w, &kbar))?;
        Ok(pack_bits(&c))
    }
}

/// Server-side record for one client.
#[derive(Default)]
struct Record {
    iv: Option<Vec<bool>>,
    dk: Option<HomDecryptionKey>,
    hom: Option<HomTriviumState>,
    kbar: Option<Vec<LweCiphertext>>,
    template: Option<Vec<LweCiphertext>>,
    evk: Option<Arc<EvaluationKey>>,
    pk_c: Option<PublicKeySet>,
    result: Option<bool>,
}

#[derive(Default)]
struct Server {
    evk: Option<Arc<EvaluationKey>>,
    pk_c: Option<PublicKeySet>,
    records: BTreeMap<u32, Record>,
}

impl Server {
    fn state(&self) -> PartyState {
        let any = |f: fn(&Record) -> bool| self.records.values().any(f);
        state(
            Role::Server,
            None,
            [
                (Holding::Evk, self.evk.is_some() || any(|r| r.evk.is_some())),
                (Holding::PkC, self.pk_c.is_some() || any(|r| r.pk_c.is_some())),
                (Holding::Dk, any(|r| r.dk.is_some())),
                (Holding::Iv, any(|r| r.iv.is_some())),
                (Holding::HomCipherState, any(|r| r.hom.is_some())),
                (Holding::EncKbar, any(|r| r.kbar.is_some())),
                (Holding::EncW, any(|r| r.template.is_some())),
            ],
        )
    }

    fn record(&mut self, client: u32) -> &mut Record {
        self.records.entry(client).or_default()
    }

    fn evk_for(&self, client: u32) -> Result<Arc<EvaluationKey>> {
        self.records
            .get(&client)
            .and_then(|r| r.evk.clone())
            .or_else(|| self.evk.clone())
            .ok_or(Error::MissingKey("evaluation key"))
    }

    fn inp(&mut self, client: u32, set: ParamSet, policy: Policy, l_w: usize, timings: &mut Timings) -> Result<()> {
        let evk = self.evk_for(client)?;
        let rec = self.record(client);
        let iv = rec.iv.as_ref().ok_or(Error::MissingKey("IV"))?;
        let dk = rec.dk.as_ref().ok_or(Error::MissingKey("homomorphic decryption key"))?;
        let enc_iv = timings.time(Phase::Inp, Role::Server, "Enc(IV)", || encode_iv(set, iv));
        let mut hom = timings.time(Phase::Inp, Role::Server, "E^FHE.Init", || efhe_init_with(&enc_iv, dk, evk, policy))?;
        let kbar = timings.time(Phase::Inp, Role::Server, "E^FHE.KeyStream", || efhe_keystream(&mut hom, l_w))?;
        rec.hom = Some(hom);
        rec.kbar = Some(kbar);
        Ok(())
    }

    /// `Enc(w) = Enc(c, pk_c) ⊕ Enc(k̄)`.
    fn transcipher(&mut self, client: u32, c: &[bool], phase: Phase, timings: &mut Timings) -> Result<Vec<LweCiphertext>> {
        let evk = self.evk_for(client)?;
        let shared = &mut self.pk_c;
        let rec = self.records.get_mut(&client).ok_or(Error::MissingKey("client record"))?;
        let pk = match rec.pk_c.as_mut() {
            Some(pk) => pk,
            None => shared.as_mut().ok_or(Error::MissingKey("pk_c"))?,
        };
        let label = if phase == Phase::Rs { "Enc(c,pk_c)" } else { "Enc(c',pk_c)" };
        let enc_c = timings.time(phase, Role::Server, label, || pk_encrypt_bits(c, pk))?;
        let kbar = match rec.kbar.take() {
            Some(k) => k,
            None => {
                let hom = rec.hom.as_mut().ok_or(Error::MissingKey("homomorphic cipher state"))?;
                timings.time(phase, Role::Server, "E^FHE.KeyStream", || efhe_keystream(hom, c.len()))?
            }
        };
        timings.time(phase, Role::Server, "Eval(E^-1)", || hom_stream_decrypt(&enc_c, &kbar, &evk))
    }

    fn pk_c_remaining(&self, client: u32) -> usize {
        self.records
            .get(&client)
            .and_then(|r| r.pk_c.as_ref())
            .or(self.pk_c.as_ref())
            .map_or(0, |pk| pk.remaining())
    }

    fn etm(&mut self, client: u32, enc_w2: &[LweCiphertext], config: &EtmConfig, timings: &mut Timings) -> Result<LweCiphertext> {
        let evk = self.evk_for(client)?;
        let template = self
            .records
            .get(&client)
            .and_then(|r| r.template.as_ref())
            .ok_or(Error::NoTemplate(client))?;
        timings.time(Phase::Vs, Role::Server, "Eval(ETM)", || etm(template, enc_w2, config, &evk))
    }

    fn has_template(&self, client: u32) -> bool {
        self.records.get(&client).is_some_and(|r| r.template.is_some())
    }

    fn stream_position(&self, client: u32) -> Option<u64> {
        let r = self.records.get(&client)?;
        let hom = r.hom.as_ref()?;
        Some(hom.steps() - r.kbar.as_ref().map_or(0, |k| k.len() as u64))
    }
}

struct TrustedParty {
    rng: ChaCha20Rng,
    sk: Option<LweSecretKey>,
    evk: Option<Arc<EvaluationKey>>,
}

impl TrustedParty {
    fn state(&self) -> PartyState {
        state(
            Role::TrustedParty,
            None,
            [(Holding::Sk, self.sk.is_some()), (Holding::Evk, self.evk.is_some())],
        )
    }

    fn issue(&mut self, samples: usize) -> Result<Vec<u8>> {
        let sk = self.sk.as_ref().ok_or(Error::MissingKey("secret key"))?;
        let set = sk.set;
        Ok(make_public_key(sk, samples, &set.lwe(), &mut self.rng)?.to_body())
    }
}

/// Common interface of the three models.
pub trait Session {
    fn model(&self) -> Model;

    fn config(&self) -> &SessionConfig;

    /// Key distribution.
    fn kdp(&mut self) -> Result<()>;

    /// Cipher initialisation on both sides.
    fn inp(&mut self) -> Result<()>;

    fn setup(&mut self) -> Result<()> {
        self.kdp()?;
        self.inp()
    }

    fn register(&mut self, client: u32, w: &[bool]) -> Result<()>;

    fn verify(&mut self, client: u32, w2: &[bool]) -> Result<VerifyOutcome>;

    fn network(&self) -> &Network;

    fn ledger(&self) -> &TransmissionLedger {
        self.network().ledger()
    }

    fn timings(&self) -> &Timings;

    fn party_states(&self) -> Vec<PartyState>;

    fn check_separation(&self) -> Result<()> {
        for s in self.party_states() {
            check_separation(self.model(), &s)?;
        }
        Ok(())
    }

    /// The FHE secret key able to open this client's ciphertexts, for test
    /// oracles.
    fn oracle_secret_key(&self, client: u32) -> Option<&LweSecretKey>;

    /// The stored encrypted template of a client.
    fn template(&self, client: u32) -> Option<&[LweCiphertext]>;
}

pub fn new_session(model: Model, config: SessionConfig) -> Result<Box<dyn Session>> {
    Ok(match model {
        Model::Btf => Box::new(BtfSession::new(config)?),
        Model::StFhe => Box::new(StFheSession::new(config)?),
        Model::OrigTc => Box::new(OrigTcSession::new(config)?),
    })
}

fn check_client(config: &SessionConfig, client: u32) -> Result<()> {
    if client >= config.clients {
        return Err(Error::InvalidParams(format!("no client {client}")));
    }
    Ok(())
}

/// The three-party model.
pub struct BtfSession {
    config: SessionConfig,
    net: Network,
    timings: Timings,
    tp: TrustedParty,
    server: Server,
    clients: Vec<Client>,
    /// Whether the trusted party still holds a `pk_c` body from key
    /// distribution. It is dropped once sent.
    kdp_done: bool,
}

impl BtfSession {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            net: Network::new(Model::Btf, &config),
            timings: Timings::default(),
            tp: TrustedParty {
                rng: config.rng(1),
                sk: None,
                evk: None,
            },
            server: Server::default(),
            clients: (0..config.clients).map(|i| Client::new(&config, i)).collect(),
            kdp_done: false,
            config,
        })
    }

    pub fn client_key(&self, client: u32) -> Option<&TriviumKey> {
        self.clients.get(client as usize)?.k.as_ref()
    }

    pub fn server_dk(&self, client: u32) -> Option<&HomDecryptionKey> {
        self.server.records.get(&client)?.dk.as_ref()
    }

    /// Buffered `Enc(k̄)` from initialisation, if not yet consumed.
    pub fn server_keystream(&self, client: u32) -> Option<&[LweCiphertext]> {
        self.server.records.get(&client)?.kbar.as_deref()
    }

    /// Keystream bits consumed by each side.
    pub fn stream_positions(&self, client: u32) -> (Option<u64>, Option<u64>) {
        let c = self.clients.get(client as usize).and_then(|c| c.cipher.as_ref()).map(|s| s.steps());
        (c, self.server.stream_position(client))
    }

    pub fn server_result(&self, client: u32) -> Option<bool> {
        self.server.records.get(&client)?.result
    }

    pub fn client_result(&self, client: u32) -> Option<bool> {
        self.clients.get(client as usize)?.result
    }

    fn reissue_pk_c(&mut self) -> Result<()> {
        let body = self.tp.issue(self.config.pk_c_samples)?;
        self.net
            .send(SHARED, ProtocolMessage::new(Channel::TpToS, Artifact::PkC, body), true)?;
        let body = self.net.recv(SHARED, Channel::TpToS, Artifact::PkC)?;
        self.server.pk_c = Some(PublicKeySet::read_body(self.config.set, &body)?);
        Ok(())
    }

    fn client_kdp(&mut self, i: u32) -> Result<()> {
        let set = self.config.set;
        let body = self.tp.issue(KEY_BITS)?;
        self.net.send(i, ProtocolMessage::new(Channel::TpToC, Artifact::PkK, body), false)?;

        let client = &mut self.clients[i as usize];
        let mut pk_k = PublicKeySet::read_body(set, &self.net.recv(i, Channel::TpToC, Artifact::PkK)?)?;
        let key = e_keygen(SECURITY_LEVEL, &mut client.rng)?;
        let dk = self
            .timings
            .time(Phase::Kdp, Role::Client, "Enc(k,pk_k)", || HomDecryptionKey::encrypt(&key, &mut pk_k))?;
        let dk_body = dk.to_body();
        let k_prime = SessionKey::generate(dk_body.len(), &mut client.rng);
        let enc_dk = self
            .timings
            .time(Phase::Kdp, Role::Client, "E(dk,k')", || double_encrypt(&dk_body, &k_prime))?;
        client.k = Some(key);
        self.net
            .send(i, ProtocolMessage::new(Channel::CToS, Artifact::Iv, key.iv.to_vec()), false)?;
        self.net.send(
            i,
            ProtocolMessage::new(Channel::CToS, Artifact::KPrime, k_prime.as_bytes().to_vec()).secure(),
            false,
        )?;
        self.net
            .send(i, ProtocolMessage::new(Channel::CToS, Artifact::EncDk, enc_dk), false)?;

        let iv = self.net.recv(i, Channel::CToS, Artifact::Iv)?;
        let k_prime = SessionKey::from_bytes(self.net.recv(i, Channel::CToS, Artifact::KPrime)?);
        let enc_dk = self.net.recv(i, Channel::CToS, Artifact::EncDk)?;
        let dk_body = self
            .timings
            .time(Phase::Kdp, Role::Server, "E^-1(E(dk,k'),k')", || double_encrypt(&enc_dk, &k_prime))?;
        let rec = self.server.record(i);
        rec.dk = Some(HomDecryptionKey::read_body(set, &dk_body)?);
        rec.iv = Some(unpack_bits(&iv, iv.len() * 8));
        Ok(())
    }

    fn deliver_result(&mut self, client: u32, r: bool) -> Result<()> {
        for ch in [Channel::TpToC, Channel::TpToS] {
            self.net
                .send(client, ProtocolMessage::new(ch, Artifact::R, vec![r as u8]).secure(), false)?;
        }
        let r_c = r_byte(&self.net.recv(client, Channel::TpToC, Artifact::R)?)?;
        self.clients[client as usize].result = Some(r_c);
        let r_s = r_byte(&self.net.recv(client, Channel::TpToS, Artifact::R)?)?;
        self.server.record(client).result = Some(r_s);
        Ok(())
    }
}

impl Session for BtfSession {
    fn model(&self) -> Model {
        Model::Btf
    }

    fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn kdp(&mut self) -> Result<()> {
        self.net.phase = Phase::Kdp;
        let set = self.config.set;
        let rng = &mut self.tp.rng;
        let (sk, evk) = self
            .timings
            .time(Phase::Kdp, Role::TrustedParty, "Enc.KeyGen", || fhe_keygen(set, rng))?;
        self.tp.sk = Some(sk);
        self.tp.evk = Some(evk.clone());

        let pk_c = self.tp.issue(self.config.pk_c_samples)?;
        self.net
            .send(SHARED, ProtocolMessage::new(Channel::TpToS, Artifact::PkC, pk_c), false)?;
        self.net
            .send(SHARED, ProtocolMessage::new(Channel::TpToS, Artifact::Evk, evk.to_body()), false)?;
        let pk_c = self.net.recv(SHARED, Channel::TpToS, Artifact::PkC)?;
        self.server.pk_c = Some(PublicKeySet::read_body(set, &pk_c)?);
        let evk = self.net.recv(SHARED, Channel::TpToS, Artifact::Evk)?;
        self.server.evk = Some(Arc::new(EvaluationKey::read_body(set, &evk)?));

        for i in 0..self.config.clients {
            self.client_kdp(i)?;
        }
        self.kdp_done = true;
        self.check_separation()
    }

    fn inp(&mut self) -> Result<()> {
        if !self.kdp_done {
            return Err(Error::MissingKey("key distribution has not run"));
        }
        self.net.phase = Phase::Inp;
        for i in 0..self.config.clients {
            let client = &mut self.clients[i as usize];
            let k = client.k.as_ref().ok_or(Error::MissingKey("client key"))?;
            client.cipher = Some(self.timings.time(Phase::Inp, Role::Client, "E.Init", || e_init(k)));
            self.server
                .inp(i, self.config.set, self.config.policy, self.config.l_w, &mut self.timings)?;
        }
        self.check_separation()
    }

    fn register(&mut self, client: u32, w: &[bool]) -> Result<()> {
        check_client(&self.config, client)?;
        check_len(w, self.config.l_w)?;
        self.net.phase = Phase::Rs;
        let c = self.clients[client as usize].stream_encrypt(w, &mut self.timings, Phase::Rs, "E(w,kbar)")?;
        self.net.send(client, ProtocolMessage::new(Channel::CToS, Artifact::C, c), false)?;

        let c = unpack_bits(&self.net.recv(client, Channel::CToS, Artifact::C)?, self.config.l_w);
        if self.server.pk_c_remaining(client) < c.len() {
            self.reissue_pk_c()?;
        }
        let enc_w = self.server.transcipher(client, &c, Phase::Rs, &mut self.timings)?;
        self.server.record(client).template = Some(enc_w);
        self.check_separation()
    }

    fn verify(&mut self, client: u32, w2: &[bool]) -> Result<VerifyOutcome> {
        check_client(&self.config, client)?;
        check_len(w2, self.config.l_w)?;
        if !self.server.has_template(client) {
            return Err(Error::NoTemplate(client));
        }
        self.net.phase = Phase::Vs;
        self.clients[client as usize].result = None;
        self.server.record(client).result = None;
        let c2 = self.clients[client as usize].stream_encrypt(w2, &mut self.timings, Phase::Vs, "E(w',kbar)")?;
        self.net
            .send(client, ProtocolMessage::new(Channel::CToS, Artifact::CPrime, c2), false)?;

        let c2 = unpack_bits(&self.net.recv(client, Channel::CToS, Artifact::CPrime)?, self.config.l_w);
        if self.config.reissue == PkReissue::EveryVerification || self.server.pk_c_remaining(client) < c2.len() {
            self.reissue_pk_c()?;
        }
        let enc_w2 = self.server.transcipher(client, &c2, Phase::Vs, &mut self.timings)?;
        let etm_config = self.config.etm();
        let enc_r = self.server.etm(client, &enc_w2, &etm_config, &mut self.timings)?;
        self.net
            .send(client, ProtocolMessage::new(Channel::SToTp, Artifact::EncR, enc_r.to_body()), false)?;

        let enc_r = LweCiphertext::read_body(self.config.set, &self.net.recv(client, Channel::SToTp, Artifact::EncR)?)?;
        let sk = self.tp.sk.as_ref().ok_or(Error::MissingKey("secret key"))?;
        let r = self
            .timings
            .time(Phase::Vs, Role::TrustedParty, "Dec(Enc(r),sk)", || decrypt(&enc_r, sk))?;
        self.deliver_result(client, r)?;
        self.check_separation()?;
        let client_r = self.clients[client as usize]
            .result
            .ok_or_else(|| Error::IncompleteRun("no result notification".into()))?;
        Ok(VerifyOutcome {
            r: client_r,
            client: Some(client_r),
            server: self.server.records[&client].result,
        })
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn timings(&self) -> &Timings {
        &self.timings
    }

    fn party_states(&self) -> Vec<PartyState> {
        let mut out = vec![self.tp.state(), self.server.state()];
        out.extend(self.clients.iter().enumerate().map(|(i, c)| c.state(i as u32)));
        out
    }

    fn oracle_secret_key(&self, _client: u32) -> Option<&LweSecretKey> {
        self.tp.sk.as_ref()
    }

    fn template(&self, client: u32) -> Option<&[LweCiphertext]> {
        self.server.records.get(&client)?.template.as_deref()
    }
}

/// Two-party model with all data encrypted under the client's FHE key.
pub struct StFheSession {
    config: SessionConfig,
    net: Network,
    timings: Timings,
    server: Server,
    clients: Vec<Client>,
}

impl StFheSession {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            net: Network::new(Model::StFhe, &config),
            timings: Timings::default(),
            server: Server::default(),
            clients: (0..config.clients).map(|i| Client::new(&config, i)).collect(),
            config,
        })
    }

    fn encrypt(&mut self, client: u32, w: &[bool], phase: Phase, label: &str) -> Result<Vec<u8>> {
        let c = &mut self.clients[client as usize];
        let sk = c.sk.as_ref().ok_or(Error::MissingKey("client secret key"))?;
        let rng = &mut c.rng;
        let cts: Vec<LweCiphertext> = self
            .timings
            .time(phase, Role::Client, label, || w.iter().map(|&b| sk.encrypt(b, rng)).collect());
        let mut body = Vec::new();
        write_list(&cts, &mut body);
        Ok(body)
    }
}

impl Session for StFheSession {
    fn model(&self) -> Model {
        Model::StFhe
    }

    fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn kdp(&mut self) -> Result<()> {
        self.net.phase = Phase::Kdp;
        let set = self.config.set;
        for i in 0..self.config.clients {
            let rng = &mut self.clients[i as usize].rng;
            let (sk, evk) = self
                .timings
                .time(Phase::Kdp, Role::Client, "Enc.KeyGen", || fhe_keygen(set, rng))?;
            self.clients[i as usize].sk = Some(sk);
            self.net
                .send(i, ProtocolMessage::new(Channel::CToS, Artifact::Evk, evk.to_body()), false)?;
            let evk = self.net.recv(i, Channel::CToS, Artifact::Evk)?;
            self.server.record(i).evk = Some(Arc::new(EvaluationKey::read_body(set, &evk)?));
        }
        self.check_separation()
    }

    fn inp(&mut self) -> Result<()> {
        Ok(())
    }

    fn register(&mut self, client: u32, w: &[bool]) -> Result<()> {
        check_client(&self.config, client)?;
        check_len(w, self.config.l_w)?;
        self.net.phase = Phase::Rs;
        let body = self.encrypt(client, w, Phase::Rs, "Enc(w,sk)")?;
        self.net
            .send(client, ProtocolMessage::new(Channel::CToS, Artifact::EncW, body), false)?;
        let body = self.net.recv(client, Channel::CToS, Artifact::EncW)?;
        self.server.record(client).template = Some(read_list(self.config.set, &body)?);
        self.check_separation()
    }

    fn verify(&mut self, client: u32, w2: &[bool]) -> Result<VerifyOutcome> {
        check_client(&self.config, client)?;
        check_len(w2, self.config.l_w)?;
        if !self.server.has_template(client) {
            return Err(Error::NoTemplate(client));
        }
        self.net.phase = Phase::Vs;
        let body = self.encrypt(client, w2, Phase::Vs, "Enc(w',sk)")?;
        self.net
            .send(client, ProtocolMessage::new(Channel::CToS, Artifact::EncWPrime, body), false)?;
        let enc_w2 = read_list(self.config.set, &self.net.recv(client, Channel::CToS, Artifact::EncWPrime)?)?;
        let etm_config = self.config.etm();
        let enc_r = self.server.etm(client, &enc_w2, &etm_config, &mut self.timings)?;
        self.net
            .send(client, ProtocolMessage::new(Channel::SToC, Artifact::EncR, enc_r.to_body()), false)?;
        let enc_r = LweCiphertext::read_body(self.config.set, &self.net.recv(client, Channel::SToC, Artifact::EncR)?)?;
        let c = &mut self.clients[client as usize];
        let sk = c.sk.as_ref().ok_or(Error::MissingKey("client secret key"))?;
        let r = self
            .timings
            .time(Phase::Vs, Role::Client, "Dec(Enc(r),sk)", || decrypt(&enc_r, sk))?;
        c.result = Some(r);
        self.check_separation()?;
        Ok(VerifyOutcome {
            r,
            client: Some(r),
            server: None,
        })
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn timings(&self) -> &Timings {
        &self.timings
    }

    fn party_states(&self) -> Vec<PartyState> {
        let mut out = vec![self.server.state()];
        out.extend(self.clients.iter().enumerate().map(|(i, c)| c.state(i as u32)));
        out
    }

    fn oracle_secret_key(&self, client: u32) -> Option<&LweSecretKey> {
        self.clients.get(client as usize)?.sk.as_ref()
    }

    fn template(&self, client: u32) -> Option<&[LweCiphertext]> {
        self.server.records.get(&client)?.template.as_deref()
    }
}

/// Two-party transciphering: the client ships its own public and evaluation
/// keys and the encrypted cipher key.
pub struct OrigTcSession {
    config: SessionConfig,
    net: Network,
    timings: Timings,
    server: Server,
    clients: Vec<Client>,
    kdp_done: bool,
}

impl OrigTcSession {
    pub fn new(config: SessionConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            net: Network::new(Model::OrigTc, &config),
            timings: Timings::default(),
            server: Server::default(),
            clients: (0..config.clients).map(|i| Client::new(&config, i)).collect(),
            kdp_done: false,
            config,
        })
    }

    fn send_pk_c(&mut self, client: u32, reissue: bool) -> Result<()> {
        let set = self.config.set;
        let c = &mut self.clients[client as usize];
        let sk = c.sk.as_ref().ok_or(Error::MissingKey("client secret key"))?;
        let body = make_public_key(sk, self.config.pk_c_samples, &set.lwe(), &mut c.rng)?.to_body();
        self.net
            .send(client, ProtocolMessage::new(Channel::CToS, Artifact::PkC, body), reissue)?;
        let body = self.net.recv(client, Channel::CToS, Artifact::PkC)?;
        self.server.record(client).pk_c = Some(PublicKeySet::read_body(set, &body)?);
        Ok(())
    }

    fn stream_phase(&mut self, client: u32, w: &[bool], phase: Phase) -> Result<Vec<LweCiphertext>> {
        let (artifact, label) = match phase {
            Phase::Rs => (Artifact::C, "E(w,kbar)"),
            _ => (Artifact::CPrime, "E(w',kbar)"),
        };
        let c = self.clients[client as usize].stream_encrypt(w, &mut self.timings, phase, label)?;
        self.net
            .send(client, ProtocolMessage::new(Channel::CToS, artifact, c), false)?;
        let c = unpack_bits(&self.net.recv(client, Channel::CToS, artifact)?, self.config.l_w);
        let every = phase == Phase::Vs && self.config.reissue == PkReissue::EveryVerification;
        if every || self.server.pk_c_remaining(client) < c.len() {
            self.send_pk_c(client, true)?;
        }
        self.server.transcipher(client, &c, phase, &mut self.timings)
    }
}

impl Session for OrigTcSession {
    fn model(&self) -> Model {
        Model::OrigTc
    }

    fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn kdp(&mut self) -> Result<()> {
        self.net.phase = Phase::Kdp;
        let set = self.config.set;
        for i in 0..self.config.clients {
            let c = &mut self.clients[i as usize];
            let rng = &mut c.rng;
            let (sk, evk) = self
                .timings
                .time(Phase::Kdp, Role::Client, "Enc.KeyGen", || fhe_keygen(set, rng))?;
            let key = e_keygen(SECURITY_LEVEL, &mut c.rng)?;
            let rng = &mut c.rng;
            let dk = self.timings.time(Phase::Kdp, Role::Client, "Enc(k,sk)", || HomDecryptionKey {
                set,
                bits: key.key_bits().into_iter().map(|b| sk.encrypt(b, rng)).collect(),
            });
            c.sk = Some(sk);
            c.k = Some(key);
            self.send_pk_c(i, false)?;
            self.net
                .send(i, ProtocolMessage::new(Channel::CToS, Artifact::Evk, evk.to_body()), false)?;
            self.net
                .send(i, ProtocolMessage::new(Channel::CToS, Artifact::Dk, dk.to_body()), false)?;
            self.net
                .send(i, ProtocolMessage::new(Channel::CToS, Artifact::Iv, key.iv.to_vec()), false)?;

            let evk = self.net.recv(i, Channel::CToS, Artifact::Evk)?;
            let dk = self.net.recv(i, Channel::CToS, Artifact::Dk)?;
            let iv = self.net.recv(i, Channel::CToS, Artifact::Iv)?;
            let rec = self.server.record(i);
            rec.evk = Some(Arc::new(EvaluationKey::read_body(set, &evk)?));
            rec.dk = Some(HomDecryptionKey::read_body(set, &dk)?);
            rec.iv = Some(unpack_bits(&iv, iv.len() * 8));
        }
        self.kdp_done = true;
        self.check_separation()
    }

    fn inp(&mut self) -> Result<()> {
        if !self.kdp_done {
            return Err(Error::MissingKey("key distribution has not run"));
        }
        self.net.phase = Phase::Inp;
        for i in 0..self.config.clients {
            let client = &mut self.clients[i as usize];
            let k = client.k.as_ref().ok_or(Error::MissingKey("client key"))?;
            client.cipher = Some(self.timings.time(Phase::Inp, Role::Client, "E.Init", || e_init(k)));
            self.server
                .inp(i, self.config.set, self.config.policy, self.config.l_w, &mut self.timings)?;
        }
        self.check_separation()
    }

    fn register(&mut self, client: u32, w: &[bool]) -> Result<()> {
        check_client(&self.config, client)?;
        check_len(w, self.config.l_w)?;
        self.net.phase = Phase::Rs;
        let enc_w = self.stream_phase(client, w, Phase::Rs)?;
        self.server.record(client).template = Some(enc_w);
        self.check_separation()
    }

    fn verify(&mut self, client: u32, w2: &[bool]) -> Result<VerifyOutcome> {
        check_client(&self.config, client)?;
        check_len(w2, self.config.l_w)?;
        if !self.server.has_template(client) {
            return Err(Error::NoTemplate(client));
        }
        self.net.phase = Phase::Vs;
        let enc_w2 = self.stream_phase(client, w2, Phase::Vs)?;
        let etm_config = self.config.etm();
        let enc_r = self.server.etm(client, &enc_w2, &etm_config, &mut self.timings)?;
        self.net
            .send(client, ProtocolMessage::new(Channel::SToC, Artifact::EncR, enc_r.to_body()), false)?;
        let enc_r = LweCiphertext::read_body(self.config.set, &self.net.recv(client, Channel::SToC, Artifact::EncR)?)?;
        let c = &mut self.clients[client as usize];
        let sk = c.sk.as_ref().ok_or(Error::MissingKey("client secret key"))?;
        let r = self
            .timings
            .time(Phase::Vs, Role::Client, "Dec(Enc(r),sk)", || decrypt(&enc_r, sk))?;
        c.result = Some(r);
        self.check_separation()?;
        Ok(VerifyOutcome {
            r,
            client: Some(r),
            server: None,
        })
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn timings(&self) -> &Timings {
        &self.timings
    }

    fn party_states(&self) -> Vec<PartyState> {
        let mut out = vec![self.server.state()];
        out.extend(self.clients.iter().enumerate().map(|(i, c)| c.state(i as u32)));
        out
    }

    fn oracle_secret_key(&self, client: u32) -> Option<&LweSecretKey> {
        self.clients.get(client as usize)?.sk.as_ref()
    }

    fn template(&self, client: u32) -> Option<&[LweCiphertext]> {
        self.server.records.get(&client)?.template.as_deref()
    }
}

/// Distinct `(channel, artifact)` pairs of a complete run.
pub fn expected_flows(model: Model) -> BTreeSet<(Channel, Artifact)> {
    model.flows().iter().copied().collect()
}
