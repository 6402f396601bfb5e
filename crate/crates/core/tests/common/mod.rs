#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use btf::gate_boot::{make_evaluation_key, BootstrapParams, EvaluationKey};
use btf::torus_lwe::{keygen, LweSecretKey, ParamSet};
use btf::trivium::{pack_bits, TriviumKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub struct Keys {
    pub sk: LweSecretKey,
    pub evk: Arc<EvaluationKey>,
}

fn build(set: ParamSet, seed: u64) -> Keys {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bp = BootstrapParams::of(set);
    let sk = keygen(&bp.lwe, &mut rng);
    let evk = Arc::new(make_evaluation_key(&sk, &bp, &mut rng).unwrap());
    Keys { sk, evk }
}

pub fn keys80() -> &'static Keys {
    static K: OnceLock<Keys> = OnceLock::new();
    K.get_or_init(|| build(ParamSet::Tfhe80, 80))
}

pub fn keys128() -> &'static Keys {
    static K: OnceLock<Keys> = OnceLock::new();
    K.get_or_init(|| build(ParamSet::Tfhe128, 128))
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Literal shift-array model of the cipher, kept deliberately naive.
pub fn naive_keystream(key: &TriviumKey, bytes: usize) -> Vec<u8> {
    let mut s = vec![false; 289];
    for (i, b) in key.key_bits().into_iter().enumerate() {
        s[1 + i] = b;
    }
    for (i, b) in key.iv_bits().into_iter().enumerate() {
        s[94 + i] = b;
    }
    s[286] = true;
    s[287] = true;
    s[288] = true;
    let mut z = Vec::new();
    for r in 0..1152 + 8 * bytes {
        let mut t1 = s[66] ^ s[93];
        let mut t2 = s[162] ^ s[177];
        let mut t3 = s[243] ^ s[288];
        if r >= 1152 {
            z.push(t1 ^ t2 ^ t3);
        }
        t1 ^= (s[91] & s[92]) ^ s[171];
        t2 ^= (s[175] & s[176]) ^ s[264];
        t3 ^= (s[286] & s[287]) ^ s[69];
        for i in (2..=288).rev() {
            s[i] = s[i - 1];
        }
        s[1] = t3;
        s[94] = t1;
        s[178] = t2;
    }
    pack_bits(&z)
}

