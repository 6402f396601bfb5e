//! Trivium evaluated over gate-bootstrapped ciphertexts.
//!
//! The homomorphic state mirrors [`crate::trivium::TriviumState`] bit for bit:
//! decrypting every cell after any number of rounds gives the plaintext state
//! after the same number of rounds.
//!
//! Two evaluation policies are available. [`Policy::Gate`] evaluates every
//! AND and XOR with its own bootstrap. [`Policy::Lazy`] keeps XOR chains as
//! `{0, 1/2}`-encoded linear sums and bootstraps once per new state bit: the
//! feedback `t ⊕ d·e` is the sign bootstrap of `2·t + d + e − 3/8`, and a sum
//! is refreshed early only if its noise budget runs out. Noiseless operands
//! (the public IV and the constants loaded into the state) are folded in the
//! clear, so bits that depend on at most one encrypted cell cost nothing.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gate_boot::{gate_input, linear, noise_budget, refresh_half_input, EvaluationKey, GateOp};
use crate::serial::{get_words, header, open, put_words, TypeTag, Wire};
use crate::torus_lwe::{decode, pk_encrypt_bits, LweCiphertext, ParamSet, PublicKeySet, Torus, EIGHTH};
use crate::trivium::{load, Ring, TriviumKey, AND_TAPS, CROSS_TAPS, IV_BITS, KEY_BITS, OUT_TAPS, STATE_BITS, WARMUP_ROUNDS};

const HALF: Torus = 1 << 31;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Policy {
    /// One bootstrap per binary gate.
    Gate,
    /// One bootstrap per new state bit and per output bit.
    #[default]
    Lazy,
}

impl Policy {
    fn id(self) -> u32 {
        match self {
            Policy::Gate => 0,
            Policy::Lazy => 1,
        }
    }

    fn from_id(id: u32) -> Result<Self> {
        match id {
            0 => Ok(Policy::Gate),
            1 => Ok(Policy::Lazy),
            _ => Err(Error::Decode(format!("unknown policy {id}"))),
        }
    }
}

/// `Enc(k, pk_k)`: the Trivium key under the FHE public key, one ciphertext
/// per key bit.
#[derive(Clone, Debug, PartialEq)]
pub struct HomDecryptionKey {
    pub set: ParamSet,
    pub bits: Vec<LweCiphertext>,
}

impl HomDecryptionKey {
    pub fn encrypt(key: &TriviumKey, pk: &mut PublicKeySet) -> Result<Self> {
        Ok(Self {
            set: pk.set,
            bits: pk_encrypt_bits(&key.key_bits(), pk)?,
        })
    }

    pub fn serialized_len(set: ParamSet) -> usize {
        KEY_BITS * set.lwe().ciphertext_bytes()
    }
}

impl Wire for HomDecryptionKey {
    const TAG: TypeTag = TypeTag::DecryptionKey;

    fn param_set(&self) -> ParamSet {
        self.set
    }

    fn write_body(&self, out: &mut Vec<u8>) {
        crate::torus_lwe::write_list(&self.bits, out);
    }

    fn read_body(set: ParamSet, body: &[u8]) -> Result<Self> {
        let expected = Self::serialized_len(set);
        if body.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: body.len(),
            });
        }
        Ok(Self {
            set,
            bits: crate::torus_lwe::read_list(set, body)?,
        })
    }
}

/// `Enc(IV)`: the public IV as noiseless ciphertexts.
pub fn encode_iv(set: ParamSet, iv_bits: &[bool]) -> Vec<LweCiphertext> {
    iv_bits.iter().map(|&b| LweCiphertext::trivial_bit(set, b)).collect()
}

#[derive(Clone)]
pub struct HomTriviumState {
    reg: Ring<LweCiphertext>,
    steps: u64,
    policy: Policy,
    bootstraps: u64,
    evk: Arc<EvaluationKey>,
}

impl std::fmt::Debug for HomTriviumState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HomTriviumState")
            .field("steps", &self.steps)
            .field("policy", &self.policy)
            .field("bootstraps", &self.bootstraps)
            .finish()
    }
}

/// Encrypted operands of a parity plus its public part.
struct Parity {
    enc: Vec<LweCiphertext>,
    constant: bool,
}

impl Parity {
    fn new() -> Self {
        Self {
            enc: Vec::new(),
            constant: false,
        }
    }

    fn push(&mut self, ct: &LweCiphertext) {
        match ct.trivial_value() {
            Some(v) => self.constant ^= decode(v),
            None => self.enc.push(ct.clone()),
        }
    }

    /// `Σ 2·xᵢ + constant/2`, refreshing the running sum whenever its budget
    /// is exhausted.
    fn half_sum(&self, evk: &EvaluationKey, spent: &mut u64) -> Result<LweCiphertext> {
        let mut acc = linear(&[(&self.enc[0], 2)], if self.constant { HALF } else { 0 })?;
        for x in &self.enc[1..] {
            if noise_budget(&acc) == 0 {
                let q = evk.bootstrap_sign(&refresh_half_input(&acc)?)?;
                *spent += 1;
                acc = linear(&[(&q, 2)], 0)?;
            }
            acc.add_scaled_assign(x, 2)?;
        }
        Ok(acc)
    }
}

enum Slot {
    Ready(LweCiphertext),
    Boot(usize),
}

impl Slot {
    fn resolve(self, fresh: &[LweCiphertext]) -> LweCiphertext {
        match self {
            Slot::Ready(ct) => ct,
            Slot::Boot(i) => fresh[i].clone(),
        }
    }
}

/// Queues sign-bootstrap inputs, deciding noiseless ones in the clear.
struct Batch {
    lins: Vec<LweCiphertext>,
}

impl Batch {
    fn new() -> Self {
        Self { lins: Vec::new() }
    }

    fn push(&mut self, lin: LweCiphertext, spent: &mut u64) -> Slot {
        if let Some(v) = lin.trivial_value() {
            return Slot::Ready(LweCiphertext::trivial_bit(lin.set, v < HALF));
        }
        *spent += 1;
        self.lins.push(lin);
        Slot::Boot(self.lins.len() - 1)
    }

    fn run(self, evk: &EvaluationKey) -> Result<Vec<LweCiphertext>> {
        if self.lins.is_empty() {
            return Ok(Vec::new());
        }
        evk.bootstrap_sign_many(&self.lins)
    }
}

impl HomTriviumState {
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    /// Bootstraps spent so far.
    pub fn bootstraps(&self) -> u64 {
        self.bootstraps
    }

    pub fn evaluation_key(&self) -> &Arc<EvaluationKey> {
        &self.evk
    }

    /// `Enc(s(i))`, 1-based.
    pub fn bit(&self, i: usize) -> &LweCiphertext {
        self.reg.get(i)
    }

    pub fn bits(&self) -> Vec<LweCiphertext> {
        self.reg.iter().cloned().collect()
    }

    fn lazy_feedback(&mut self, j: usize, batch: &mut Batch) -> Result<Slot> {
        let s = |i: usize| self.reg.get(i);
        let mut p = Parity::new();
        for i in [OUT_TAPS[j][0], OUT_TAPS[j][1], CROSS_TAPS[j]] {
            p.push(s(i));
        }
        let (d, e) = (s(AND_TAPS[j][0]), s(AND_TAPS[j][1]));
        let product = match (d.trivial_value().map(decode), e.trivial_value().map(decode)) {
            (Some(x), Some(y)) => {
                p.constant ^= x & y;
                None
            }
            (Some(x), None) | (None, Some(x)) => {
                if x {
                    p.push(if d.is_trivial() { e } else { d });
                }
                None
            }
            (None, None) => Some((d.clone(), e.clone())),
        };
        let mut spent = 0;
        let slot = match (p.enc.len(), product) {
            (0, None) => Slot::Ready(LweCiphertext::trivial_bit(d.set, p.constant)),
            (1, None) => Slot::Ready(if p.constant { p.enc[0].not() } else { p.enc[0].clone() }),
            (_, None) => {
                let h = p.half_sum(&self.evk, &mut spent)?;
                batch.push(refresh_half_input(&h)?, &mut spent)
            }
            (0, Some((d, e))) => {
                let lin = linear(&[(&d, 1), (&e, 1)], (if p.constant { HALF } else { 0 }).wrapping_sub(3 * EIGHTH))?;
                batch.push(lin, &mut spent)
            }
            (_, Some((d, e))) => {
                let mut lin = p.half_sum(&self.evk, &mut spent)?;
                lin.add_assign(&d)?;
                lin.add_assign(&e)?;
                lin.add_const((3 * EIGHTH).wrapping_neg());
                batch.push(lin, &mut spent)
            }
        };
        self.bootstraps += spent;
        Ok(slot)
    }

    fn lazy_output(&mut self, batch: &mut Batch) -> Result<Slot> {
        let mut p = Parity::new();
        for [x, y] in OUT_TAPS {
            p.push(self.reg.get(x));
            p.push(self.reg.get(y));
        }
        let mut spent = 0;
        let slot = match p.enc.len() {
            0 => Slot::Ready(LweCiphertext::trivial_bit(self.reg.get(1).set, p.constant)),
            1 => Slot::Ready(if p.constant { p.enc[0].not() } else { p.enc[0].clone() }),
            _ => {
                let h = p.half_sum(&self.evk, &mut spent)?;
                batch.push(refresh_half_input(&h)?, &mut spent)
            }
        };
        self.bootstraps += spent;
        Ok(slot)
    }

    fn gate_stage(
        &mut self,
        items: &[(GateOp, &LweCiphertext, &LweCiphertext)],
        batch: &mut Batch,
    ) -> Result<Vec<Slot>> {
        let mut spent = 0;
        let slots = items
            .iter()
            .map(|(op, x, y)| Ok(batch.push(gate_input(*op, x, y)?, &mut spent)))
            .collect::<Result<Vec<_>>>()?;
        self.bootstraps += spent;
        Ok(slots)
    }
}

/// One round for every state in lockstep, batching their bootstraps.
fn round_many(states: &mut [HomTriviumState], emit: bool) -> Result<Vec<Option<LweCiphertext>>> {
    let Some(first) = states.first() else {
        return Ok(Vec::new());
    };
    let evk = first.evk.clone();
    let policy = first.policy;
    if states.iter().any(|s| s.policy != policy || !Arc::ptr_eq(&s.evk, &evk)) {
        return Err(Error::InvalidParams("lockstep states must share policy and key".into()));
    }
    let mut out = Vec::with_capacity(states.len());
    match policy {
        Policy::Lazy => {
            let mut batch = Batch::new();
            let mut plans = Vec::with_capacity(states.len());
            for st in states.iter_mut() {
                let fb = [st.lazy_feedback(0, &mut batch)?, st.lazy_feedback(1, &mut batch)?, st.lazy_feedback(2, &mut batch)?];
                let z = if emit { Some(st.lazy_output(&mut batch)?) } else { None };
                plans.push((fb, z));
            }
            let fresh = batch.run(&evk)?;
            for (st, (fb, z)) in states.iter_mut().zip(plans) {
                out.push(z.map(|z| z.resolve(&fresh)));
                st.reg.shift(fb.map(|s| s.resolve(&fresh)));
                st.steps += 1;
            }
        }
        Policy::Gate => {
            let mut batch = Batch::new();
            let mut stage_a = Vec::with_capacity(states.len());
            for st in states.iter_mut() {
                let reg = st.reg.clone();
                let s = |i: usize| reg.get(i);
                let mut items: Vec<(GateOp, &LweCiphertext, &LweCiphertext)> =
                    OUT_TAPS.iter().map(|&[x, y]| (GateOp::Xor, s(x), s(y))).collect();
                items.extend(AND_TAPS.iter().map(|&[x, y]| (GateOp::And, s(x), s(y))));
                stage_a.push(st.gate_stage(&items, &mut batch)?);
            }
            let fresh = batch.run(&evk)?;
            let a: Vec<Vec<LweCiphertext>> =
                stage_a.into_iter().map(|v| v.into_iter().map(|s| s.resolve(&fresh)).collect()).collect();

            let mut batch = Batch::new();
            let mut stage_b = Vec::with_capacity(states.len());
            for (st, a) in states.iter_mut().zip(&a) {
                let cross: Vec<LweCiphertext> = CROSS_TAPS.iter().map(|&i| st.reg.get(i).clone()).collect();
                let mut items: Vec<(GateOp, &LweCiphertext, &LweCiphertext)> =
                    (0..3).map(|j| (GateOp::Xor, &a[j], &cross[j])).collect();
                if emit {
                    items.push((GateOp::Xor, &a[0], &a[1]));
                }
                stage_b.push(st.gate_stage(&items, &mut batch)?);
            }
            let fresh = batch.run(&evk)?;
            let b: Vec<Vec<LweCiphertext>> =
                stage_b.into_iter().map(|v| v.into_iter().map(|s| s.resolve(&fresh)).collect()).collect();

            let mut batch = Batch::new();
            let mut stage_c = Vec::with_capacity(states.len());
            for ((st, a), b) in states.iter_mut().zip(&a).zip(&b) {
                let mut items: Vec<(GateOp, &LweCiphertext, &LweCiphertext)> =
                    (0..3).map(|j| (GateOp::Xor, &b[j], &a[3 + j])).collect();
                if emit {
                    items.push((GateOp::Xor, &b[3], &a[2]));
                }
                stage_c.push(st.gate_stage(&items, &mut batch)?);
            }
            let fresh = batch.run(&evk)?;
            for (st, c) in states.iter_mut().zip(stage_c) {
                let mut c = c.into_iter().map(|s| s.resolve(&fresh));
                let fb = [c.next().expect("t1"), c.next().expect("t2"), c.next().expect("t3")];
                out.push(c.next());
                st.reg.shift(fb);
                st.steps += 1;
            }
        }
    }
    Ok(out)
}

fn check_inputs(ct_iv: &[LweCiphertext], dk: &HomDecryptionKey, evk: &EvaluationKey) -> Result<()> {
    if ct_iv.len() != IV_BITS {
        return Err(Error::LengthMismatch {
            expected: IV_BITS,
            found: ct_iv.len(),
        });
    }
    if dk.bits.len() != KEY_BITS {
        return Err(Error::LengthMismatch {
            expected: KEY_BITS,
            found: dk.bits.len(),
        });
    }
    let n = evk.params.lwe.n;
    for ct in ct_iv.iter().chain(&dk.bits) {
        if ct.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: ct.n(),
            });
        }
    }
    Ok(())
}

/// Homomorphic key/IV loading and warm-up under the default policy.
pub fn efhe_init(ct_iv: &[LweCiphertext], dk: &HomDecryptionKey, evk: Arc<EvaluationKey>) -> Result<HomTriviumState> {
    efhe_init_with(ct_iv, dk, evk, Policy::default())
}

pub fn efhe_init_with(
    ct_iv: &[LweCiphertext],
    dk: &HomDecryptionKey,
    evk: Arc<EvaluationKey>,
    policy: Policy,
) -> Result<HomTriviumState> {
    Ok(efhe_init_many(&[(ct_iv, dk)], evk, policy)?.remove(0))
}

/// Several independent initialisations sharing one key, run in lockstep so
/// that each round's bootstraps form a single batch.
pub fn efhe_init_many(
    inputs: &[(&[LweCiphertext], &HomDecryptionKey)],
    evk: Arc<EvaluationKey>,
    policy: Policy,
) -> Result<Vec<HomTriviumState>> {
    let set = evk.params.set();
    let mut states = Vec::with_capacity(inputs.len());
    for (ct_iv, dk) in inputs {
        check_inputs(ct_iv, dk, &evk)?;
        let reg = load(
            &dk.bits,
            ct_iv,
            LweCiphertext::trivial_bit(set, false),
            LweCiphertext::trivial_bit(set, true),
        );
        states.push(HomTriviumState {
            reg,
            steps: 0,
            policy,
            bootstraps: 0,
            evk: evk.clone(),
        });
    }
    for _ in 0..WARMUP_ROUNDS {
        round_many(&mut states, false)?;
    }
    Ok(states)
}

/// Next `l` encrypted keystream bits, each a `{0, 1/4}` encoding.
pub fn efhe_keystream(state: &mut HomTriviumState, l: usize) -> Result<Vec<LweCiphertext>> {
    Ok(efhe_keystream_many(std::slice::from_mut(state), l)?.remove(0))
}

/// [`efhe_keystream`] for several states in lockstep.
pub fn efhe_keystream_many(states: &mut [HomTriviumState], l: usize) -> Result<Vec<Vec<LweCiphertext>>> {
    let mut out = vec![Vec::with_capacity(l); states.len()];
    for _ in 0..l {
        for (o, z) in out.iter_mut().zip(round_many(states, true)?) {
            o.push(z.expect("emitting round"));
        }
    }
    Ok(out)
}

/// `Enc(c) ⊕ Enc(k̄)`, one XOR gate per bit.
pub fn hom_stream_decrypt(
    enc_c: &[LweCiphertext],
    enc_kbar: &[LweCiphertext],
    evk: &EvaluationKey,
) -> Result<Vec<LweCiphertext>> {
    if enc_c.len() != enc_kbar.len() {
        return Err(Error::LengthMismatch {
            expected: enc_c.len(),
            found: enc_kbar.len(),
        });
    }
    let items: Vec<_> = enc_c.iter().zip(enc_kbar).map(|(c, k)| (GateOp::Xor, c, k)).collect();
    crate::gate_boot::gate_batch(&items, evk)
}

impl HomTriviumState {
    /// Enveloped snapshot of the state; the evaluation key is not included.
    pub fn checkpoint(&self) -> Vec<u8> {
        let set = self.evk.params.set();
        let mut out = header(set, TypeTag::HomTriviumState).to_vec();
        put_words(
            &mut out,
            &[
                self.steps as u32,
                (self.steps >> 32) as u32,
                self.bootstraps as u32,
                (self.bootstraps >> 32) as u32,
                self.policy.id(),
            ],
        );
        for ct in self.reg.iter() {
            ct.write_body(&mut out);
            let v = ct.var.to_bits();
            put_words(&mut out, &[v as u32, (v >> 32) as u32]);
        }
        out
    }

    /// Resumes from a [`checkpoint`](Self::checkpoint) taken under `evk`.
    pub fn restore(bytes: &[u8], evk: Arc<EvaluationKey>) -> Result<Self> {
        let (set, tag, body) = open(bytes)?;
        if tag != TypeTag::HomTriviumState {
            return Err(Error::Decode(format!("expected state checkpoint, found {tag:?}")));
        }
        if set != evk.params.set() {
            return Err(Error::InvalidParams(format!("checkpoint is {set}, key is {}", evk.params.set())));
        }
        let ct_len = set.lwe().ciphertext_bytes();
        let expected = 20 + STATE_BITS * (ct_len + 8);
        if body.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: body.len(),
            });
        }
        let w = get_words(&body[..20])?;
        let steps = w[0] as u64 | (w[1] as u64) << 32;
        let bootstraps = w[2] as u64 | (w[3] as u64) << 32;
        let policy = Policy::from_id(w[4])?;
        let cells = body[20..]
            .chunks_exact(ct_len + 8)
            .map(|chunk| {
                let mut ct = LweCiphertext::read_body(set, &chunk[..ct_len])?;
                let v = get_words(&chunk[ct_len..])?;
                ct.var = f64::from_bits(v[0] as u64 | (v[1] as u64) << 32);
                Ok(ct)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reg: Ring::new(cells),
            steps,
            policy,
            bootstraps,
            evk,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_lwe::ONE;

    #[test]
    fn policy_ids() {
        for p in [Policy::Gate, Policy::Lazy] {
            assert_eq!(Policy::from_id(p.id()).unwrap(), p);
        }
        assert!(Policy::from_id(7).is_err());
        assert_eq!(Policy::default(), Policy::Lazy);
    }

    #[test]
    fn decryption_key_size() {
        assert_eq!(HomDecryptionKey::serialized_len(ParamSet::Tfhe128), 201_920);
        assert_eq!(HomDecryptionKey::serialized_len(ParamSet::Tfhe80), 160_320);
    }

    #[test]
    fn iv_encoding_is_noiseless() {
        let cts = encode_iv(ParamSet::Tfhe80, &[true, false]);
        assert_eq!(cts[0].trivial_value(), Some(ONE));
        assert_eq!(cts[1].trivial_value(), Some(0));
    }
}
