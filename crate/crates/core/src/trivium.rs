//! Plaintext Trivium (eSTREAM): 80-bit key and IV, 288-bit state in three
//! registers of 93, 84 and 111 bits, 1152 warm-up rounds.
//!
//! State bits are numbered `s1..s288` as in the cipher's specification. Key
//! bit `i` (0-based, LSB-first within [`TriviumKey::key`]) loads `s(i+1)` and
//! IV bit `i` loads `s(94+i)`. Keystream bytes are packed LSB-first.

use rand::Rng;

use crate::error::{Error, Result};

pub const KEY_BITS: usize = 80;
pub const IV_BITS: usize = 80;
pub const STATE_BITS: usize = 288;
pub const WARMUP_ROUNDS: u64 = 4 * STATE_BITS as u64;
/// The only symmetric security level Trivium offers.
pub const SECURITY_LEVEL: u32 = 80;

/// Taps of one round, 1-based: output `z = t1 + t2 + t3` with
/// `t1 = s66 + s93`, `t2 = s162 + s177`, `t3 = s243 + s288`, and feedback
/// `s94 ← t1 + s91·s92 + s171`, `s178 ← t2 + s175·s176 + s264`,
/// `s1 ← t3 + s286·s287 + s69`.
pub(crate) const OUT_TAPS: [[usize; 2]; 3] = [[66, 93], [162, 177], [243, 288]];
pub(crate) const AND_TAPS: [[usize; 2]; 3] = [[91, 92], [175, 176], [286, 287]];
pub(crate) const CROSS_TAPS: [usize; 3] = [171, 264, 69];

/// A shift register over `s1..s288` where one step moves every cell up by one
/// position and writes the three feedback values into `s1`, `s94`, `s178`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Ring<T> {
    cells: Vec<T>,
    head: usize,
}

impl<T> Ring<T> {
    /// `cells[i]` becomes `s(i+1)`.
    pub fn new(cells: Vec<T>) -> Self {
        assert_eq!(cells.len(), STATE_BITS);
        Self { cells, head: 0 }
    }

    fn slot(&self, i: usize) -> usize {
        (self.head + i - 1) % STATE_BITS
    }

    /// `s(i)`, 1-based.
    pub fn get(&self, i: usize) -> &T {
        &self.cells[self.slot(i)]
    }

    /// One shift: `[t1, t2, t3]` enter at `s94`, `s178`, `s1`.
    pub fn shift(&mut self, feedback: [T; 3]) {
        let [t1, t2, t3] = feedback;
        self.head = (self.head + STATE_BITS - 1) % STATE_BITS;
        let (a, b, c) = (self.slot(1), self.slot(94), self.slot(178));
        self.cells[a] = t3;
        self.cells[b] = t1;
        self.cells[c] = t2;
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        (1..=STATE_BITS).map(move |i| self.get(i))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct TriviumKey {
    pub key: [u8; KEY_BITS / 8],
    pub iv: [u8; IV_BITS / 8],
}

impl std::fmt::Debug for TriviumKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TriviumKey(iv={})", self.iv_hex())
    }
}

fn hex_to_reg(hex: &str) -> Result<[u8; 10]> {
    let raw = hex::decode(hex.trim()).map_err(|e| Error::Decode(format!("hex: {e}")))?;
    if raw.len() != 10 {
        return Err(Error::LengthMismatch {
            expected: 10,
            found: raw.len(),
        });
    }
    let mut out = [0u8; 10];
    for (j, o) in out.iter_mut().enumerate() {
        *o = raw[9 - j].reverse_bits();
    }
    Ok(out)
}

fn reg_to_hex(reg: &[u8; 10]) -> String {
    let raw: Vec<u8> = reg.iter().rev().map(|b| b.reverse_bits()).collect();
    hex::encode_upper(raw)
}

impl TriviumKey {
    /// Parses key and IV in the hex convention of the eSTREAM test vectors
    /// (byte string reversed, most significant bit first).
    pub fn from_hex(key: &str, iv: &str) -> Result<Self> {
        Ok(Self {
            key: hex_to_reg(key)?,
            iv: hex_to_reg(iv)?,
        })
    }

    pub fn key_hex(&self) -> String {
        reg_to_hex(&self.key)
    }

    pub fn iv_hex(&self) -> String {
        reg_to_hex(&self.iv)
    }

    pub fn key_bits(&self) -> Vec<bool> {
        unpack_bits(&self.key, KEY_BITS)
    }

    pub fn iv_bits(&self) -> Vec<bool> {
        unpack_bits(&self.iv, IV_BITS)
    }
}

/// Draws a uniform key and IV.
pub fn e_keygen<R: Rng + ?Sized>(level: u32, rng: &mut R) -> Result<TriviumKey> {
    if level != SECURITY_LEVEL {
        return Err(Error::UnsupportedLevel(level));
    }
    let mut key = TriviumKey {
        key: [0; 10],
        iv: [0; 10],
    };
    rng.fill(&mut key.key[..]);
    rng.fill(&mut key.iv[..]);
    Ok(key)
}

/// Loads the 288-bit state from key and IV bits, with `s286..s288 = 1`.
pub(crate) fn load<T: Clone>(key: &[T], iv: &[T], zero: T, one: T) -> Ring<T> {
    let mut cells = vec![zero; STATE_BITS];
    cells[..KEY_BITS].clone_from_slice(key);
    cells[93..93 + IV_BITS].clone_from_slice(iv);
    for c in &mut cells[285..] {
        *c = one.clone();
    }
    Ring::new(cells)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TriviumState {
    reg: Ring<bool>,
    steps: u64,
}

impl TriviumState {
    /// Rounds taken so far, warm-up included.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// `s(i)`, 1-based.
    pub fn bit(&self, i: usize) -> bool {
        *self.reg.get(i)
    }

    pub fn bits(&self) -> Vec<bool> {
        self.reg.iter().copied().collect()
    }

    fn round(&mut self) -> bool {
        let s = |i: usize| *self.reg.get(i);
        let t = OUT_TAPS.map(|[x, y]| s(x) ^ s(y));
        let z = t[0] ^ t[1] ^ t[2];
        let fb: [bool; 3] = std::array::from_fn(|j| {
            let [x, y] = AND_TAPS[j];
            t[j] ^ (s(x) & s(y)) ^ s(CROSS_TAPS[j])
        });
        self.reg.shift(fb);
        self.steps += 1;
        z
    }

    /// Next `l` keystream bits.
    pub fn keystream(&mut self, l: usize) -> Vec<bool> {
        (0..l).map(|_| self.round()).collect()
    }

    /// Next `8·n` keystream bits packed LSB-first.
    pub fn keystream_bytes(&mut self, n: usize) -> Vec<u8> {
        pack_bits(&self.keystream(8 * n))
    }
}

/// State after key/IV loading and the 1152 warm-up rounds.
pub fn e_init(key: &TriviumKey) -> TriviumState {
    let reg = load(&key.key_bits(), &key.iv_bits(), false, true);
    let mut state = TriviumState { reg, steps: 0 };
    for _ in 0..WARMUP_ROUNDS {
        state.round();
    }
    state
}

pub fn e_keystream(state: &mut TriviumState, l: usize) -> Vec<bool> {
    state.keystream(l)
}

/// `c = m ⊕ k̄`.
pub fn e_encrypt(m: &[bool], kbar: &[bool]) -> Result<Vec<bool>> {
    if m.len() != kbar.len() {
        return Err(Error::LengthMismatch {
            expected: m.len(),
            found: kbar.len(),
        });
    }
    Ok(m.iter().zip(kbar).map(|(a, b)| a ^ b).collect())
}

/// Packs bits LSB-first; a trailing partial byte is zero-padded.
pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (j, &b)| acc | ((b as u8) << j)))
        .collect()
}

/// First `len` bits of `bytes`, LSB-first.
pub fn unpack_bits(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn hex_round_trip() {
        let k = TriviumKey::from_hex("0053A6F94C9FF24598EB", "0D74DB42A91077DE45AC").unwrap();
        assert_eq!(k.key_hex(), "0053A6F94C9FF24598EB");
        assert_eq!(k.iv_hex(), "0D74DB42A91077DE45AC");
        assert!(TriviumKey::from_hex("00", "00").is_err());
    }

    #[test]
    fn keygen_levels() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        assert!(matches!(e_keygen(128, &mut rng), Err(Error::UnsupportedLevel(128))));
        let a = e_keygen(80, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = e_keygen(80, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.key.len(), 10);
    }

    #[test]
    fn warmup_counts_rounds() {
        let k = TriviumKey::from_hex("00000000000000000000", "00000000000000000000").unwrap();
        let mut s = e_init(&k);
        assert_eq!(s.steps(), 1152);
        let before = s.clone();
        assert!(s.keystream(0).is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn ring_shift_layout() {
        let mut r = Ring::new((1..=288).collect::<Vec<usize>>());
        r.shift([1000, 2000, 3000]);
        assert_eq!(*r.get(1), 3000);
        assert_eq!(*r.get(2), 1);
        assert_eq!(*r.get(93), 92);
        assert_eq!(*r.get(94), 1000);
        assert_eq!(*r.get(95), 94);
        assert_eq!(*r.get(177), 176);
        assert_eq!(*r.get(178), 2000);
        assert_eq!(*r.get(288), 287);
    }

    #[test]
    fn packing() {
        let bits = [true, false, true, true, false, false, false, false, true];
        assert_eq!(pack_bits(&bits), vec![0b0000_1101, 1]);
        assert_eq!(unpack_bits(&[0b0000_1101, 1], 9), bits);
    }

    #[test]
    fn encrypt_contract() {
        let m = [true, false, true];
        assert_eq!(e_encrypt(&m, &[false; 3]).unwrap(), m);
        assert!(matches!(e_encrypt(&m, &[false; 2]), Err(Error::LengthMismatch { .. })));
    }
}
