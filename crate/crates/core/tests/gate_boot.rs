mod common;

use btf::gate_boot::{gate_batch, make_evaluation_key, mux_batch, noise_budget, BootstrapParams, GateOp, MIN_FRESH_BUDGET};
use btf::serial::Wire;
use btf::torus_lwe::{decrypt, decrypt_bits, keygen, LweCiphertext, ParamSet};
use proptest::prelude::*;
use rand::Rng;

fn table_draws(keys: &common::Keys, draws: usize, seed: u64) {
    let mut rng = common::rng(seed);
    for op in GateOp::ALL {
        let inputs: Vec<(bool, bool)> = (0..draws).map(|i| (i & 1 == 1, i & 2 == 2)).collect();
        let cts: Vec<_> = inputs
            .iter()
            .map(|&(x, y)| (keys.sk.encrypt(x, &mut rng), keys.sk.encrypt(y, &mut rng)))
            .collect();
        let items: Vec<_> = cts.iter().map(|(x, y)| (op, x, y)).collect();
        let out = decrypt_bits(&gate_batch(&items, &keys.evk).unwrap(), &keys.sk).unwrap();
        let bad = inputs.iter().zip(&out).filter(|(&(x, y), &r)| op.eval(x, y) != r).count();
        assert_eq!(bad, 0, "{op:?}");
    }
    let cases: Vec<[bool; 3]> = (0..draws).map(|i| [i & 1 == 1, i & 2 == 2, i & 4 == 4]).collect();
    let cts: Vec<Vec<LweCiphertext>> = cases
        .iter()
        .map(|c| c.iter().map(|&b| keys.sk.encrypt(b, &mut rng)).collect())
        .collect();
    let items: Vec<_> = cts.iter().map(|c| (&c[0], &c[1], &c[2])).collect();
    let out = decrypt_bits(&mux_batch(&items, &keys.evk).unwrap(), &keys.sk).unwrap();
    for (c, r) in cases.iter().zip(out) {
        assert_eq!(r, if c[0] { c[1] } else { c[2] }, "mux {c:?}");
    }
}

#[test]
fn truth_tables_tfhe80() {
    table_draws(common::keys80(), 200, 1);
}

#[test]
fn truth_tables_tfhe128() {
    table_draws(common::keys128(), 64, 2);
}

#[test]
fn xor_with_zero_keeps_the_bit() {
    let k = common::keys80();
    let mut rng = common::rng(3);
    let bits: Vec<bool> = (0..1000).map(|_| rng.random()).collect();
    let xs: Vec<_> = bits.iter().map(|&b| k.sk.encrypt(b, &mut rng)).collect();
    let zero = k.sk.encrypt(false, &mut rng);
    let items: Vec<_> = xs.iter().map(|x| (GateOp::Xor, x, &zero)).collect();
    let out = gate_batch(&items, &k.evk).unwrap();
    assert_eq!(decrypt_bits(&out, &k.sk).unwrap(), bits);
    assert!(out.iter().all(|c| noise_budget(c) >= MIN_FRESH_BUDGET));
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: GateOp,
    x: usize,
    y: usize,
}

/// 64 gates in 20 layers over 8 inputs; every gate reads at least one wire of
/// the layer just before it, so the depth is exactly 20.
fn random_circuit(rng: &mut impl Rng) -> Vec<Vec<Node>> {
    let mut layers = Vec::new();
    let (mut wires, mut prev) = (8usize, 0..8usize);
    for l in 0..20 {
        let width = if l < 4 { 4 } else { 3 };
        let layer: Vec<Node> = (0..width)
            .map(|_| Node {
                op: GateOp::ALL[rng.random_range(0..4)],
                x: rng.random_range(prev.clone()),
                y: rng.random_range(0..wires),
            })
            .collect();
        prev = wires..wires + width;
        wires += width;
        layers.push(layer);
    }
    assert_eq!(layers.iter().map(Vec::len).sum::<usize>(), 64);
    layers
}

#[test]
fn depth_twenty_circuit_matches_plaintext() {
    let k = common::keys80();
    let mut rng = common::rng(4);
    let circuit = random_circuit(&mut rng);
    let inputs: Vec<Vec<bool>> = (0..100).map(|_| (0..8).map(|_| rng.random()).collect()).collect();
    let mut plain = inputs.clone();
    let mut enc: Vec<Vec<LweCiphertext>> = inputs
        .iter()
        .map(|v| v.iter().map(|&b| k.sk.encrypt(b, &mut rng)).collect())
        .collect();
    for layer in &circuit {
        let items: Vec<_> = enc
            .iter()
            .flat_map(|w| layer.iter().map(move |n| (n.op, &w[n.x], &w[n.y])))
            .collect();
        let out = gate_batch(&items, &k.evk).unwrap();
        for (i, chunk) in out.chunks(layer.len()).enumerate() {
            enc[i].extend(chunk.iter().cloned());
        }
        for w in &mut plain {
            let next: Vec<bool> = layer.iter().map(|n| n.op.eval(w[n.x], w[n.y])).collect();
            w.extend(next);
        }
    }
    for (p, e) in plain.iter().zip(&enc) {
        assert_eq!(&decrypt_bits(&e[8..], &k.sk).unwrap(), &p[8..]);
    }
}

#[test]
fn evaluation_keys_are_reproducible() {
    let bp = BootstrapParams::of(ParamSet::Tfhe80);
    let make = |seed| {
        let mut rng = common::rng(seed);
        let sk = keygen(&bp.lwe, &mut rng);
        make_evaluation_key(&sk, &bp, &mut rng).unwrap().to_body()
    };
    let a = make(9);
    assert_eq!(a, make(9));
    assert_ne!(a, make(10));
    let mib = (1u64 << 20) as f64;
    assert!((18.9..=28.3).contains(&(a.len() as f64 / mib)));
    let big = BootstrapParams::of(ParamSet::Tfhe128).evk_bytes() as f64 / mib;
    assert!((33.3..=49.9).contains(&big), "{big}");
    assert_eq!(common::keys128().evk.serialized_len() as f64 / mib, big);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gates_compose_pairwise(bits in prop::collection::vec(any::<bool>(), 3), seed in any::<u64>()) {
        let k = common::keys80();
        let mut rng = common::rng(seed);
        let c: Vec<_> = bits.iter().map(|&b| k.sk.encrypt(b, &mut rng)).collect();
        let first = gate_batch(&[(GateOp::Nand, &c[0], &c[1]), (GateOp::Or, &c[1], &c[2])], &k.evk).unwrap();
        let r = gate_batch(&[(GateOp::Xor, &first[0], &first[1])], &k.evk).unwrap();
        let want = !(bits[0] && bits[1]) ^ (bits[1] || bits[2]);
        prop_assert_eq!(decrypt(&r[0], &k.sk).unwrap(), want);
    }
}
