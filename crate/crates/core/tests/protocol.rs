mod common;

use btf::btf_protocol::{
    double_encrypt, expected_flows, new_session, Artifact, BtfSession, Channel, Holding, Model, Network, OrigTcSession,
    Phase, ProtocolMessage, Role, Session, SessionConfig, SessionKey, StFheSession, TransportKind,
};
use btf::error::Error;
use btf::etm_circuits::hamming;
use btf::hom_trivium::HomDecryptionKey;
use btf::serial::Wire;
use btf::torus_lwe::{decrypt, decrypt_bits, make_public_key, ParamSet};
use btf::trivium::{e_init, e_keygen, KEY_BITS};
use rand::Rng;

const SET: ParamSet = ParamSet::Tfhe80;
const LW: usize = 16;

fn config() -> SessionConfig {
    SessionConfig::new(SET, LW).with_seed(11)
}

fn ct_bytes() -> u64 {
    SET.lwe().ciphertext_bytes() as u64
}

fn flipped(w: &[bool], n: usize) -> Vec<bool> {
    let mut v = w.to_vec();
    for b in v.iter_mut().take(n) {
        *b = !*b;
    }
    v
}

fn all_once(model: Model) -> std::collections::BTreeMap<(Channel, Artifact), usize> {
    expected_flows(model).into_iter().map(|f| (f, 1)).collect()
}

#[test]
fn key_distribution_sizes() {
    let dk = HomDecryptionKey::serialized_len(SET) as u64;
    let evk = btf::gate_boot::BootstrapParams::of(SET).evk_bytes() as u64;
    let pk_c = LW as u64 * ct_bytes();

    let mut btf = BtfSession::new(config()).unwrap();
    btf.kdp().unwrap();
    let l = btf.ledger();
    assert_eq!(l.size_of(Artifact::EncDk), Some(dk));
    assert_eq!(l.size_of(Artifact::KPrime), Some(dk));
    assert_eq!(l.size_of(Artifact::Iv), Some(10));
    assert_eq!(l.size_of(Artifact::PkK), Some(KEY_BITS as u64 * ct_bytes()));
    assert_eq!(l.size_of(Artifact::PkC), Some(pk_c));
    assert_eq!(l.size_of(Artifact::Evk), Some(evk));
    assert_eq!(l.setup_total(Channel::CToS), 10 + 2 * dk);
    assert_eq!(l.setup_total(Channel::TpToS), pk_c + evk);
    assert_eq!(l.frame_total(), btf.network().wire_bytes());

    let mut st = StFheSession::new(config()).unwrap();
    st.kdp().unwrap();
    assert_eq!(st.ledger().setup_total(Channel::CToS), evk);

    let mut orig = OrigTcSession::new(config()).unwrap();
    orig.kdp().unwrap();
    assert_eq!(orig.ledger().setup_total(Channel::CToS), pk_c + evk + dk + 10);
    assert_eq!(orig.ledger().frame_total(), orig.network().wire_bytes());
}

#[test]
fn server_recovers_encrypted_key() {
    let mut s = BtfSession::new(config()).unwrap();
    s.kdp().unwrap();
    let sk = s.oracle_secret_key(0).unwrap();
    let bits = decrypt_bits(&s.server_dk(0).unwrap().bits, sk).unwrap();
    assert_eq!(bits, s.client_key(0).unwrap().key_bits());
    for st in s.party_states() {
        if st.role == Role::Server {
            assert!(st.holds(Holding::Dk) && st.holds(Holding::Iv));
            assert!(!st.holds(Holding::KPrime));
        }
    }
}

#[test]
fn padded_key_reveals_nothing() {
    let k = common::keys80();
    let mut rng = common::rng(5);
    let (mut hits, mut total) = (0, 0);
    for _ in 0..10 {
        let key = e_keygen(80, &mut rng).unwrap();
        let mut pk = make_public_key(&k.sk, KEY_BITS, &SET.lwe(), &mut rng).unwrap();
        let dk = HomDecryptionKey::encrypt(&key, &mut pk).unwrap();
        let body = dk.to_body();
        let pad = SessionKey::generate(body.len(), &mut rng);
        let padded = double_encrypt(&body, &pad).unwrap();
        assert_eq!(padded.len(), body.len());
        assert_eq!(double_encrypt(&padded, &pad).unwrap(), body);
        let guess = HomDecryptionKey::read_body(SET, &padded).unwrap();
        let bits = decrypt_bits(&guess.bits, &k.sk).unwrap();
        hits += bits.iter().zip(key.key_bits()).filter(|(a, b)| **a == *b).count();
        total += KEY_BITS;
    }
    let rate = hits as f64 / total as f64;
    assert!((rate - 0.5).abs() < 0.07, "recovery rate {rate}");
}

#[test]
fn channel_rules_are_enforced() {
    let cfg = config();
    let mut net = Network::new(Model::Btf, &cfg);
    for (ch, a) in [
        (Channel::CToS, Artifact::Dk),
        (Channel::SToC, Artifact::EncR),
        (Channel::TpToS, Artifact::KPrime),
        (Channel::CToS, Artifact::Evk),
    ] {
        let err = net.send(0, ProtocolMessage::new(ch, a, vec![0]), false).unwrap_err();
        assert!(matches!(err, Error::ChannelViolation { .. }), "{ch} {a:?}");
    }
    assert!(net.ledger().entries.is_empty());

    let mut net = Network::new(Model::OrigTc, &cfg);
    net.send(0, ProtocolMessage::new(Channel::CToS, Artifact::Dk, vec![1, 2]), false)
        .unwrap();
    assert!(matches!(
        net.recv(0, Channel::CToS, Artifact::Iv),
        Err(Error::UnexpectedMessage { wanted: Artifact::Iv, got: Artifact::Dk })
    ));
}

#[test]
fn phases_must_run_in_order() {
    let w = vec![false; LW];
    for model in [Model::Btf, Model::OrigTc] {
        let mut s = new_session(model, config()).unwrap();
        assert!(matches!(s.inp(), Err(Error::MissingKey(_))));
        assert!(matches!(s.verify(0, &w), Err(Error::NoTemplate(0))));
        s.kdp().unwrap();
        assert!(matches!(s.register(0, &w), Err(Error::MissingKey(_))));
        assert!(matches!(s.register(0, &w[1..]), Err(Error::LengthMismatch { .. })));
    }
    let mut s = new_session(Model::StFhe, config()).unwrap();
    assert!(matches!(s.register(0, &w), Err(Error::MissingKey(_))));
    assert!(SessionConfig::new(SET, 64).with_threshold(128).validate().is_err());
}

#[test]
fn seeded_runs_are_reproducible() {
    let run = |cfg: SessionConfig| {
        let mut s = BtfSession::new(cfg).unwrap();
        s.kdp().unwrap();
        (s.ledger().to_json(), s.network().wire_bytes(), *s.client_key(0).unwrap())
    };
    let a = run(config());
    let b = run(config().with_transport(TransportKind::Socket));
    assert_eq!(a, b);
    let c = run(config().with_seed(12));
    assert_eq!(a.0, c.0);
    assert_ne!(a.2, c.2);
}

#[test]
fn shared_keys_across_clients() {
    let mut s = BtfSession::new(config().with_clients(3)).unwrap();
    s.kdp().unwrap();
    let counts = s.ledger().flow_counts();
    assert_eq!(counts[&(Channel::TpToS, Artifact::Evk)], 1);
    assert_eq!(counts[&(Channel::TpToS, Artifact::PkC)], 1);
    assert_eq!(counts[&(Channel::TpToC, Artifact::PkK)], 3);
    assert_eq!(counts[&(Channel::CToS, Artifact::EncDk)], 3);
    let sk = s.oracle_secret_key(0).unwrap();
    for i in 0..3 {
        let bits = decrypt_bits(&s.server_dk(i).unwrap().bits, sk).unwrap();
        assert_eq!(bits, s.client_key(i).unwrap().key_bits());
    }
    assert_ne!(s.client_key(0), s.client_key(1));
}

#[test]
fn btf_end_to_end() {
    let cfg = config().with_threshold(3).with_transport(TransportKind::Socket);
    let mut s = BtfSession::new(cfg).unwrap();
    s.kdp().unwrap();
    s.inp().unwrap();
    assert_eq!(s.ledger().phase_total(Phase::Inp), 0);
    assert!(!s.ledger().has_phase(Phase::Inp));
    let sk = s.oracle_secret_key(0).unwrap().clone();
    let kbar = decrypt_bits(s.server_keystream(0).unwrap(), &sk).unwrap();
    let mut oracle = e_init(s.client_key(0).unwrap());
    assert_eq!(kbar, oracle.keystream(LW));
    let (c, srv) = s.stream_positions(0);
    assert_eq!(c, srv);

    let mut rng = common::rng(3);
    let w: Vec<bool> = (0..LW).map(|_| rng.random()).collect();
    s.register(0, &w).unwrap();
    assert_eq!(s.ledger().size_of(Artifact::C), Some(LW as u64 / 8));
    assert_eq!(decrypt_bits(s.template(0).unwrap(), &sk).unwrap(), w);
    let (c, srv) = s.stream_positions(0);
    assert_eq!(c, Some(1152 + LW as u64));
    assert_eq!(c, srv);

    for (flips, want) in [(0, true), (3, true), (4, false)] {
        let w2 = flipped(&w, flips);
        assert_eq!(hamming(&w, &w2).unwrap(), flips as u64);
        let out = s.verify(0, &w2).unwrap();
        assert_eq!(out.r, want, "{flips} flips");
        assert_eq!(out.client, Some(want));
        assert_eq!(out.server, Some(want));
        assert_eq!(s.client_result(0), Some(want));
        assert_eq!(s.server_result(0), Some(want));
        assert_eq!(s.stream_positions(0).0, s.stream_positions(0).1);
    }

    let l = s.ledger();
    assert_eq!(l.flows(), expected_flows(Model::Btf));
    assert_eq!(l.channel_total(Channel::SToC), 0);
    assert_eq!(l.size_of(Artifact::EncR), Some(ct_bytes()));
    assert_eq!(l.size_of(Artifact::R), Some(1));
    assert!(l.entries.iter().filter(|e| e.artifact == Artifact::R).all(|e| e.secure));
    let reissued: Vec<_> = l.entries.iter().filter(|e| e.reissue).collect();
    assert_eq!(reissued.len(), 3);
    assert!(reissued.iter().all(|e| e.artifact == Artifact::PkC && e.phase == Phase::Vs));
    let mut counts = all_once(Model::Btf);
    for f in [
        (Channel::CToS, Artifact::CPrime),
        (Channel::SToTp, Artifact::EncR),
        (Channel::TpToC, Artifact::R),
        (Channel::TpToS, Artifact::R),
    ] {
        counts.insert(f, 3);
    }
    assert_eq!(l.flow_counts(), counts);
    assert_eq!(l.frame_total(), s.network().wire_bytes());
    s.check_separation().unwrap();

    let t = s.timings();
    assert!(t.dominates(&["E^FHE.Init", "E^FHE.KeyStream"], &[Phase::Kdp, Phase::Inp]));
    assert!(t.dominates(&["Eval(E^-1)"], &[Phase::Rs]));
}

#[test]
fn baselines_agree_with_plaintext_matcher() {
    let mut st = StFheSession::new(config()).unwrap();
    let mut orig = OrigTcSession::new(config()).unwrap();
    let mut rng = common::rng(4);
    let w: Vec<bool> = (0..LW).map(|_| rng.random()).collect();
    for s in [&mut st as &mut dyn Session, &mut orig] {
        s.setup().unwrap();
        s.register(0, &w).unwrap();
        let sk = s.oracle_secret_key(0).unwrap();
        assert_eq!(decrypt_bits(s.template(0).unwrap(), sk).unwrap(), w);
        let out = s.verify(0, &flipped(&w, 4)).unwrap();
        assert!(out.r);
        assert_eq!(out.server, None);
        assert!(!s.verify(0, &flipped(&w, 5)).unwrap().r);
        assert_eq!(s.ledger().flows(), expected_flows(s.model()));
        assert_eq!(s.ledger().channel_total(Channel::TpToS), 0);
        s.check_separation().unwrap();
    }
    let st_sk = st.oracle_secret_key(0).unwrap();
    let enc = st.template(0).unwrap();
    assert!(decrypt(&enc[0], st_sk).is_ok());
    assert_eq!(orig.ledger().entries.iter().filter(|e| e.reissue).count(), 2);
}
