mod common;

use btf::serial::Wire;
use btf::torus_lwe::{
    decrypt, distance, keygen, lwe_add, make_public_key, pk_encrypt, LweCiphertext, LweSecretKey, ParamSet,
};
use proptest::prelude::*;
use rand::Rng;

fn round_trips(set: ParamSet, seed: u64) {
    let mut rng = common::rng(seed);
    let params = set.lwe();
    let sk = keygen(&params, &mut rng);
    let mut pk = make_public_key(&sk, 10_000, &params, &mut rng).unwrap();
    let mut failures = 0;
    for _ in 0..10_000 {
        let m: bool = rng.random();
        let ct = pk_encrypt(m, &mut pk).unwrap();
        failures += (decrypt(&ct, &sk).unwrap() != m) as usize;
        let ct = sk.encrypt(m, &mut rng);
        failures += (decrypt(&ct, &sk).unwrap() != m) as usize;
    }
    assert_eq!(failures, 0);
    assert_eq!(pk.remaining(), 0);
    assert!(pk_encrypt(false, &mut pk).is_err());
}

#[test]
fn public_key_round_trip_tfhe80() {
    round_trips(ParamSet::Tfhe80, 1);
}

#[test]
fn public_key_round_trip_tfhe128() {
    round_trips(ParamSet::Tfhe128, 2);
}

fn signed_error(sk: &LweSecretKey, ct: &LweCiphertext) -> f64 {
    sk.phase(ct).unwrap() as i32 as f64 / 4294967296.0
}

#[test]
fn noise_variances_add() {
    let mut rng = common::rng(3);
    let params = ParamSet::Tfhe128.lwe();
    let sk = keygen(&params, &mut rng);
    let sigma = 2f64.powi(-12);
    let trials = 10_000;
    let (mut single, mut sum) = (0.0, 0.0);
    for _ in 0..trials {
        let x = sk.encrypt_torus(0, sigma, &mut rng);
        let y = sk.encrypt_torus(0, sigma, &mut rng);
        single += signed_error(&sk, &x).powi(2);
        sum += signed_error(&sk, &lwe_add(&x, &y).unwrap()).powi(2);
    }
    let single = single / trials as f64;
    let sum = sum / trials as f64;
    assert!((single / (sigma * sigma) - 1.0).abs() < 0.1, "single {single}");
    assert!((sum / (2.0 * sigma * sigma) - 1.0).abs() < 0.1, "sum {sum}");
}

#[test]
fn midpoint_breaks_to_one() {
    let sk = LweSecretKey::from_bits(ParamSet::Tfhe80, &[false; 500]).unwrap();
    let mut ct = LweCiphertext::trivial(ParamSet::Tfhe80, 1 << 29);
    ct.a = vec![0; 500];
    assert!(decrypt(&ct, &sk).unwrap());
    ct.b = (1 << 29) - 1;
    assert!(!decrypt(&ct, &sk).unwrap());
    assert_eq!(distance(0, u32::MAX), 1);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn phase_is_linear(seed in any::<u64>(), mx in any::<u32>(), my in any::<u32>()) {
        let mut rng = common::rng(seed);
        let sk = keygen(&ParamSet::Tfhe80.lwe(), &mut rng);
        let x = sk.encrypt_torus(mx, 0.0, &mut rng);
        let y = sk.encrypt_torus(my, 0.0, &mut rng);
        prop_assert_eq!(sk.phase(&x).unwrap(), mx);
        prop_assert_eq!(sk.phase(&lwe_add(&x, &y).unwrap()).unwrap(), mx.wrapping_add(my));
        prop_assert_eq!(sk.phase(&x.neg()).unwrap(), mx.wrapping_neg());
    }

    #[test]
    fn ciphertexts_serialize_exactly(seed in any::<u64>(), bit in any::<bool>(), wide in any::<bool>()) {
        let set = if wide { ParamSet::Tfhe128 } else { ParamSet::Tfhe80 };
        let mut rng = common::rng(seed);
        let sk = keygen(&set.lwe(), &mut rng);
        let ct = sk.encrypt(bit, &mut rng);
        let body = ct.to_body();
        prop_assert_eq!(body.len(), (sk.n() + 1) * 4);
        let back = LweCiphertext::from_enveloped(&ct.to_enveloped()).unwrap();
        prop_assert_eq!(&back, &ct);
        prop_assert_eq!(decrypt(&back, &sk).unwrap(), bit);
        let sk2 = LweSecretKey::from_enveloped(&sk.to_enveloped()).unwrap();
        prop_assert_eq!(sk2, sk);
    }
}
