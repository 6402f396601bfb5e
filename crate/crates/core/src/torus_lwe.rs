//! Torus arithmetic and LWE encryption of single bits.
//!
//! The torus ℝ/ℤ is discretized to 32-bit words: the word `x` stands for
//! `x · 2⁻³²`, and wrapping integer arithmetic is torus arithmetic. A bit `m`
//! is encoded as `m · 2³⁰`, i.e. `0` or `1/4`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::serial::{get_words, put_words, TypeTag, Wire};

pub type Torus = u32;

/// Encoding of the bit 1.
pub const ONE: Torus = 1 << 30;
/// One eighth of the torus, the decision margin of every encoding here.
pub const EIGHTH: Torus = 1 << 29;

pub fn encode(bit: bool) -> Torus {
    if bit {
        ONE
    } else {
        0
    }
}

/// Nearest torus word to the real `x` (taken modulo 1).
pub fn from_f64(x: f64) -> Torus {
    let frac = x - x.floor();
    ((frac * 4294967296.0).round() as u64) as u32
}

/// Centered real representative in `[-1/2, 1/2)`.
pub fn to_f64(t: Torus) -> f64 {
    (t as i32) as f64 / 4294967296.0
}

/// Distance between two torus words, in words.
pub fn distance(x: Torus, y: Torus) -> u32 {
    let d = x.wrapping_sub(y);
    d.min(d.wrapping_neg())
}

/// Decodes a phase: 1 iff it is at least as close to `1/4` as to `0`.
pub fn decode(phase: Torus) -> bool {
    distance(phase, ONE) <= distance(phase, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum ParamSet {
    #[serde(rename = "tfhe80")]
    Tfhe80,
    #[serde(rename = "tfhe128")]
    Tfhe128,
}

impl ParamSet {
    pub const ALL: [ParamSet; 2] = [ParamSet::Tfhe80, ParamSet::Tfhe128];

    pub fn id(self) -> u8 {
        match self {
            ParamSet::Tfhe80 => 1,
            ParamSet::Tfhe128 => 2,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(ParamSet::Tfhe80),
            2 => Ok(ParamSet::Tfhe128),
            _ => Err(Error::Decode(format!("unknown parameter set id {id}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamSet::Tfhe80 => "TFHE80",
            ParamSet::Tfhe128 => "TFHE128",
        }
    }

    pub fn lwe(self) -> LweParams {
        LweParams::of(self)
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfhe80" => Ok(ParamSet::Tfhe80),
            "tfhe128" => Ok(ParamSet::Tfhe128),
            other => Err(Error::InvalidParams(format!("unknown parameter set {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LweParams {
    pub set: ParamSet,
    pub n: usize,
    /// Standard deviation of fresh encryption noise, as a fraction of the torus.
    pub sigma: f64,
}

impl LweParams {
    pub fn tfhe80() -> Self {
        Self {
            set: ParamSet::Tfhe80,
            n: 500,
            sigma: 2.44e-5,
        }
    }

    pub fn tfhe128() -> Self {
        Self {
            set: ParamSet::Tfhe128,
            n: 630,
            sigma: 3.0517578125e-5,
        }
    }

    pub fn of(set: ParamSet) -> Self {
        match set {
            ParamSet::Tfhe80 => Self::tfhe80(),
            ParamSet::Tfhe128 => Self::tfhe128(),
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Serialized size of one ciphertext.
    pub fn ciphertext_bytes(&self) -> usize {
        (self.n + 1) * 4
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("LWE dimension must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma < 0.125) {
            return Err(Error::InvalidParams(format!("noise {} out of range", self.sigma)));
        }
        Ok(())
    }
}

/// Rounded Gaussian on the discretized torus, drawn with `rand_distr`'s
/// ziggurat sampler and rounded to the nearest word.
#[derive(Clone, Copy, Debug)]
pub struct TorusGaussian {
    normal: Option<Normal<f64>>,
}

impl TorusGaussian {
    pub fn new(sigma: f64) -> Self {
        let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
        Self { normal }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Torus {
        match &self.normal {
            Some(n) => ((n.sample(rng) * 4294967296.0).round() as i64) as u32,
            None => 0,
        }
    }
}

/// Binary LWE secret key.
#[derive(Clone, PartialEq, Eq)]
pub struct LweSecretKey {
    pub set: ParamSet,
    s: Vec<u32>,
}

impl fmt::Debug for LweSecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LweSecretKey({}, n={})", self.set, self.s.len())
    }
}

impl LweSecretKey {
    pub fn from_bits(set: ParamSet, bits: &[bool]) -> Result<Self> {
        let n = set.lwe().n;
        if bits.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bits.len(),
            });
        }
        Ok(Self {
            set,
            s: bits.iter().map(|&b| b as u32).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.s.iter().map(|&b| b == 1)
    }

    pub(crate) fn words(&self) -> &[u32] {
        &self.s
    }

    /// `b − ⟨a, s⟩` for the pair `(a, b)`.
    pub fn phase_of(&self, a: &[Torus], b: Torus) -> Result<Torus> {
        if a.len() != self.s.len() {
            return Err(Error::DimensionMismatch {
                expected: self.s.len(),
                found: a.len(),
            });
        }
        let dot = a
            .iter()
            .zip(&self.s)
            .fold(0u32, |acc, (&x, &s)| acc.wrapping_add(x.wrapping_mul(s)));
        Ok(b.wrapping_sub(dot))
    }

    pub fn phase(&self, ct: &LweCiphertext) -> Result<Torus> {
        self.phase_of(&ct.a, ct.b)
    }

    /// Encrypts the torus value `mu` with noise of standard deviation `sigma`.
    pub fn encrypt_torus<R: Rng + ?Sized>(&self, mu: Torus, sigma: f64, rng: &mut R) -> LweCiphertext {
        let a: Vec<Torus> = (0..self.s.len()).map(|_| rng.random()).collect();
        let e = TorusGaussian::new(sigma).sample(rng);
        let dot = a
            .iter()
            .zip(&self.s)
            .fold(0u32, |acc, (&x, &s)| acc.wrapping_add(x.wrapping_mul(s)));
        LweCiphertext {
            set: self.set,
            a,
            b: dot.wrapping_add(mu).wrapping_add(e),
            var: sigma * sigma,
        }
    }

    /// Secret-key encryption of a bit at the parameter set's noise level.
    pub fn encrypt<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> LweCiphertext {
        self.encrypt_torus(encode(bit), self.set.lwe().sigma, rng)
    }
}

impl Wire for LweSecretKey {
    const TAG: TypeTag = TypeTag::SecretKey;

    fn param_set(&self) -> ParamSet {
        self.set
    }

    /// Bits packed LSB-first.
    fn write_body(&self, out: &mut Vec<u8>) {
        for chunk in self.s.chunks(8) {
            out.push(chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i)));
        }
    }

    fn read_body(set: ParamSet, body: &[u8]) -> Result<Self> {
        let n = set.lwe().n;
        if body.len() != n.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: n.div_ceil(8),
                found: body.len(),
            });
        }
        let s = (0..n).map(|i| ((body[i / 8] >> (i % 8)) & 1) as u32).collect();
        Ok(Self { set, s })
    }
}

pub fn keygen<R: Rng + ?Sized>(params: &LweParams, rng: &mut R) -> LweSecretKey {
    LweSecretKey {
        set: params.set,
        s: (0..params.n).map(|_| rng.random::<bool>() as u32).collect(),
    }
}

/// LWE pair `(a, b)`.
///
/// `var` is a running estimate of the phase noise variance (as a fraction of
/// the torus, squared). It is bookkeeping only: it is not serialized and does
/// not take part in equality.
#[derive(Clone, Debug)]
pub struct LweCiphertext {
    pub set: ParamSet,
    pub a: Vec<Torus>,
    pub b: Torus,
    pub var: f64,
}

impl PartialEq for LweCiphertext {
    fn eq(&self, other: &Self) -> bool {
        self.set == other.set && self.a == other.a && self.b == other.b
    }
}

impl Eq for LweCiphertext {}

impl LweCiphertext {
    /// Noiseless encryption of a public value: `(0, mu)`.
    pub fn trivial(set: ParamSet, mu: Torus) -> Self {
        Self {
            set,
            a: vec![0; set.lwe().n],
            b: mu,
            var: 0.0,
        }
    }

    pub fn trivial_bit(set: ParamSet, bit: bool) -> Self {
        Self::trivial(set, encode(bit))
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.a.iter().all(|&x| x == 0)
    }

    /// For trivial ciphertexts, the public value they carry.
    pub fn trivial_value(&self) -> Option<Torus> {
        self.is_trivial().then_some(self.b)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.a.len() != other.a.len() {
            return Err(Error::DimensionMismatch {
                expected: self.a.len(),
                found: other.a.len(),
            });
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check(other)?;
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x = x.wrapping_add(*y);
        }
        self.b = self.b.wrapping_add(other.b);
        self.var += other.var;
        Ok(())
    }

    pub fn sub_assign(&mut self, other: &Self) -> Result<()> {
        self.check(other)?;
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x = x.wrapping_sub(*y);
        }
        self.b = self.b.wrapping_sub(other.b);
        self.var += other.var;
        Ok(())
    }

    /// Adds `k · other`.
    pub fn add_scaled_assign(&mut self, other: &Self, k: i32) -> Result<()> {
        self.check(other)?;
        let kw = k as u32;
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x = x.wrapping_add(y.wrapping_mul(kw));
        }
        self.b = self.b.wrapping_add(other.b.wrapping_mul(kw));
        self.var += (k as f64) * (k as f64) * other.var;
        Ok(())
    }

    pub fn add_const(&mut self, mu: Torus) {
        self.b = self.b.wrapping_add(mu);
    }

    pub fn neg(&self) -> Self {
        Self {
            set: self.set,
            a: self.a.iter().map(|x| x.wrapping_neg()).collect(),
            b: self.b.wrapping_neg(),
            var: self.var,
        }
    }

    /// Homomorphic NOT in the `{0, 1/4}` encoding: `1/4 − x`.
    pub fn not(&self) -> Self {
        let mut out = self.neg();
        out.add_const(ONE);
        out
    }
}

impl Wire for LweCiphertext {
    const TAG: TypeTag = TypeTag::Ciphertext;

    fn param_set(&self) -> ParamSet {
        self.set
    }

    fn write_body(&self, out: &mut Vec<u8>) {
        put_words(out, &self.a);
        out.extend_from_slice(&self.b.to_le_bytes());
    }

    fn read_body(set: ParamSet, body: &[u8]) -> Result<Self> {
        let expected = set.lwe().ciphertext_bytes();
        if body.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: body.len(),
            });
        }
        let mut words = get_words(body)?;
        let b = words.pop().expect("nonempty");
        Ok(Self {
            set,
            a: words,
            b,
            var: set.lwe().sigma.powi(2),
        })
    }
}

/// A run of ciphertexts with a concatenated body.
pub fn write_list(cts: &[LweCiphertext], out: &mut Vec<u8>) {
    for ct in cts {
        ct.write_body(out);
    }
}

pub fn read_list(set: ParamSet, body: &[u8]) -> Result<Vec<LweCiphertext>> {
    let size = set.lwe().ciphertext_bytes();
    if body.len() % size != 0 {
        return Err(Error::Decode(format!(
            "{} bytes is not a whole number of {size}-byte ciphertexts",
            body.len()
        )));
    }
    body.chunks_exact(size)
        .map(|c| LweCiphertext::read_body(set, c))
        .collect()
}

pub fn lwe_add(x: &LweCiphertext, y: &LweCiphertext) -> Result<LweCiphertext> {
    let mut out = x.clone();
    out.add_assign(y)?;
    Ok(out)
}

pub fn decrypt(ct: &LweCiphertext, sk: &LweSecretKey) -> Result<bool> {
    Ok(decode(sk.phase(ct)?))
}

pub fn decrypt_bits(cts: &[LweCiphertext], sk: &LweSecretKey) -> Result<Vec<bool>> {
    cts.iter().map(|c| decrypt(c, sk)).collect()
}

/// Ordered single-use encryptions of zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PublicKeySet {
    pub set: ParamSet,
    samples: Vec<LweCiphertext>,
    used: usize,
}

impl PublicKeySet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.samples.len() - self.used
    }

    pub fn samples(&self) -> &[LweCiphertext] {
        &self.samples
    }

    fn next_sample(&mut self) -> Result<&LweCiphertext> {
        let s = self
            .samples
            .get(self.used)
            .ok_or(Error::ExhaustedPublicKey { used: self.used })?;
        self.used += 1;
        Ok(s)
    }
}

impl Wire for PublicKeySet {
    const TAG: TypeTag = TypeTag::PublicKeySet;

    fn param_set(&self) -> ParamSet {
        self.set
    }

    /// Only the samples travel; a received set starts unconsumed.
    fn write_body(&self, out: &mut Vec<u8>) {
        write_list(&self.samples, out);
    }

    fn read_body(set: ParamSet, body: &[u8]) -> Result<Self> {
        Ok(Self {
            set,
            samples: read_list(set, body)?,
            used: 0,
        })
    }
}

pub fn make_public_key<R: Rng + ?Sized>(
    sk: &LweSecretKey,
    count: usize,
    params: &LweParams,
    rng: &mut R,
) -> Result<PublicKeySet> {
    if count == 0 {
        return Err(Error::InvalidParams("public key needs at least one sample".into()));
    }
    if params.n != sk.n() {
        return Err(Error::DimensionMismatch {
            expected: sk.n(),
            found: params.n,
        });
    }
    let samples = (0..count).map(|_| sk.encrypt_torus(0, params.sigma, rng)).collect();
    Ok(PublicKeySet {
        set: sk.set,
        samples,
        used: 0,
    })
}

/// `(a, b) + (0, Ecd(bit))` for the next unused sample `(a, b)`.
pub fn pk_encrypt(bit: bool, pk: &mut PublicKeySet) -> Result<LweCiphertext> {
    let mut ct = pk.next_sample()?.clone();
    ct.add_const(encode(bit));
    Ok(ct)
}

pub fn pk_encrypt_bits(bits: &[bool], pk: &mut PublicKeySet) -> Result<Vec<LweCiphertext>> {
    if pk.remaining() < bits.len() {
        return Err(Error::ExhaustedPublicKey { used: pk.used() });
    }
    bits.iter().map(|&b| pk_encrypt(b, pk)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(11)
    }

    #[test]
    fn decode_boundaries() {
        assert!(!decode(0));
        assert!(decode(ONE));
        assert!(decode(EIGHTH));
        assert!(!decode(EIGHTH - 1));
        assert!(decode(ONE + (1 << 27) - 1));
        assert!(decode(ONE - (1 << 27) + 1));
        assert!(decode(1 << 31));
        assert!(!decode((1u32 << 31) + EIGHTH + 1));
    }

    #[test]
    fn float_conversion() {
        assert_eq!(from_f64(0.25), ONE);
        assert_eq!(from_f64(-0.125), EIGHTH.wrapping_neg());
        assert_eq!(from_f64(1.25), ONE);
        assert!((to_f64(from_f64(-0.3)) + 0.3).abs() < 1e-9);
    }

    #[test]
    fn key_lengths() {
        let mut r = rng();
        assert_eq!(keygen(&LweParams::tfhe128(), &mut r).n(), 630);
        assert_eq!(keygen(&LweParams::tfhe80(), &mut r).n(), 500);
    }

    #[test]
    fn distinct_seeds_give_distinct_keys() {
        let p = LweParams::tfhe128();
        let a = keygen(&p, &mut ChaCha20Rng::seed_from_u64(1));
        let b = keygen(&p, &mut ChaCha20Rng::seed_from_u64(2));
        assert_ne!(a, b);
    }

    #[test]
    fn zero_noise_encryptions_have_exact_phase() {
        let p = LweParams::tfhe128().with_sigma(0.0);
        let mut r = rng();
        let sk = keygen(&p, &mut r);
        let mut pk = make_public_key(&sk, 2, &p, &mut r).unwrap();
        let zero = pk_encrypt(false, &mut pk).unwrap();
        let one = pk_encrypt(true, &mut pk).unwrap();
        assert_eq!(sk.phase(&zero).unwrap(), 0);
        assert_eq!(sk.phase(&one).unwrap(), ONE);
        assert!(!decrypt(&zero, &sk).unwrap());
        assert!(decrypt(&one, &sk).unwrap());
    }

    #[test]
    fn exhaustion() {
        let p = LweParams::tfhe80();
        let mut r = rng();
        let sk = keygen(&p, &mut r);
        let mut pk = make_public_key(&sk, 3, &p, &mut r).unwrap();
        for _ in 0..3 {
            pk_encrypt(true, &mut pk).unwrap();
        }
        assert!(matches!(
            pk_encrypt(true, &mut pk),
            Err(Error::ExhaustedPublicKey { used: 3 })
        ));
        assert!(make_public_key(&sk, 0, &p, &mut r).is_err());
    }

    #[test]
    fn single_sample_encrypts_zero() {
        for set in ParamSet::ALL {
            let p = set.lwe();
            let mut r = rng();
            let sk = keygen(&p, &mut r);
            let pk = make_public_key(&sk, 1, &p, &mut r).unwrap();
            assert!(!decrypt(&pk.samples()[0], &sk).unwrap());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut r = rng();
        let sk = keygen(&LweParams::tfhe128(), &mut r);
        let ct = LweCiphertext::trivial(ParamSet::Tfhe80, 0);
        assert!(matches!(decrypt(&ct, &sk), Err(Error::DimensionMismatch { .. })));
        let other = LweCiphertext::trivial(ParamSet::Tfhe128, 0);
        assert!(lwe_add(&ct, &other).is_err());
    }

    #[test]
    fn serialized_sizes() {
        let mut r = rng();
        for (set, size) in [(ParamSet::Tfhe128, 2524), (ParamSet::Tfhe80, 2004)] {
            let sk = keygen(&set.lwe(), &mut r);
            let ct = sk.encrypt(true, &mut r);
            let body = ct.to_body();
            assert_eq!(body.len(), size);
            assert_eq!(LweCiphertext::read_body(set, &body).unwrap(), ct);
            let env = ct.to_enveloped();
            assert_eq!(env.len(), size + 8);
            assert_eq!(LweCiphertext::from_enveloped(&env).unwrap(), ct);
            let skb = sk.to_body();
            assert_eq!(skb.len(), set.lwe().n.div_ceil(8));
            assert_eq!(LweSecretKey::read_body(set, &skb).unwrap(), sk);
        }
    }

    #[test]
    fn public_key_sizes() {
        let p = LweParams::tfhe128();
        let mut r = rng();
        let sk = keygen(&p, &mut r);
        let pk = make_public_key(&sk, 80, &p, &mut r).unwrap();
        assert_eq!(pk.to_body().len(), 201_920);
        let back = PublicKeySet::read_body(p.set, &pk.to_body()).unwrap();
        assert_eq!(back.len(), 80);
        assert_eq!(back.used(), 0);
    }

    #[test]
    fn gaussian_zero_sigma_is_zero() {
        let g = TorusGaussian::new(0.0);
        let mut r = rng();
        assert!((0..100).all(|_| g.sample(&mut r) == 0));
    }
}
