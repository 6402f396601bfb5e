use rand::Rng;
use num_complex::Complex64;

use super::fft::{FftScratch, NegacyclicFft};
use super::params::BootstrapParams;
use super::simd;
use crate::error::{Error, Result};
use crate::serial::{get_words, put_words, TypeTag, Wire};
use crate::torus_lwe::{LweCiphertext, LweSecretKey, ParamSet, Torus, TorusGaussian};

/// Bootstrapping key plus key-switching key.
///
/// The bootstrapping key is kept both as torus words (its serialized form)
/// and in the transform domain used by blind rotation.
pub struct EvaluationKey {
    pub params: BootstrapParams,
    bsk: Vec<u32>,
    bsk_fft: Vec<Complex64>,
    ksk: Vec<u32>,
    fft: NegacyclicFft,
}

impl std::fmt::Debug for EvaluationKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "EvaluationKey({}, {} bytes)", self.params.set(), self.params.evk_bytes())
    }
}

impl PartialEq for EvaluationKey {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.bsk == other.bsk && self.ksk == other.ksk
    }
}

struct Scratch {
    acc: Vec<u32>,
    rot: Vec<u32>,
    digits: Vec<i32>,
    spec: Vec<Complex64>,
    out: Vec<Complex64>,
    fft: FftScratch,
}

impl EvaluationKey {
    fn rows(&self) -> usize {
        (self.params.k + 1) * self.params.decomp_levels
    }

    pub fn bsk_bytes(&self) -> usize {
        self.bsk.len() * 4
    }

    pub fn ksk_bytes(&self) -> usize {
        self.ksk.len() * 4
    }

    pub fn serialized_len(&self) -> usize {
        self.bsk_bytes() + self.ksk_bytes()
    }

    fn scratch(&self) -> Scratch {
        let p = &self.params;
        let polys = p.k + 1;
        let half = p.big_n / 2;
        Scratch {
            acc: vec![0; polys * p.big_n],
            rot: vec![0; polys * p.big_n],
            digits: vec![0; p.decomp_levels * p.big_n],
            spec: vec![Complex64::default(); self.rows() * half],
            out: vec![Complex64::default(); polys * half],
            fft: self.fft.scratch(),
        }
    }

    fn from_parts(params: BootstrapParams, bsk: Vec<u32>, ksk: Vec<u32>) -> Self {
        let fft = NegacyclicFft::new(params.big_n);
        let half = params.big_n / 2;
        let mut scratch = fft.scratch();
        let mut bsk_fft = vec![Complex64::default(); bsk.len() / 2];
        for (poly, spec) in bsk.chunks_exact(params.big_n).zip(bsk_fft.chunks_exact_mut(half)) {
            fft.forward_torus(poly, spec, &mut scratch);
        }
        Self {
            params,
            bsk,
            bsk_fft,
            ksk,
            fft,
        }
    }

    /// Modulus switch of a torus word to `ℤ/2N`.
    fn switch(&self, x: Torus) -> usize {
        let log2n = (2 * self.params.big_n).trailing_zeros();
        let shift = 32 - log2n;
        (x.wrapping_add(1 << (shift - 1)) >> shift) as usize
    }

    /// Blind rotation of the constant test polynomial `mu` by the phase of
    /// each input, followed by sample extraction. Each result lives under
    /// the ring key (dimension `k·N`) and encrypts `+mu` when the phase lies
    /// in `[0, 1/2)` and `−mu` otherwise.
    ///
    /// The inputs advance through the key in lockstep so every slice of the
    /// bootstrapping key is fetched once per batch.
    pub(crate) fn blind_rotate_extract(&self, inputs: &[&LweCiphertext], mu: Torus) -> Result<Vec<Extracted>> {
        let p = &self.params;
        for ct in inputs {
            if ct.n() != p.lwe.n {
                return Err(Error::DimensionMismatch {
                    expected: p.lwe.n,
                    found: ct.n(),
                });
            }
        }
        let big_n = p.big_n;
        let half = big_n / 2;
        let polys = p.k + 1;
        let levels = p.decomp_levels;
        let rows = self.rows();
        let key_stride = rows * polys * half;
        let mut batch: Vec<Scratch> = inputs.iter().map(|_| self.scratch()).collect();

        let test = vec![mu; big_n];
        for (s, ct) in batch.iter_mut().zip(inputs) {
            let shift = (2 * big_n - self.switch(ct.b)) % (2 * big_n);
            mul_monomial(&test, shift, &mut s.acc[p.k * big_n..]);
        }

        for i in 0..p.lwe.n {
            let key = &self.bsk_fft[i * key_stride..(i + 1) * key_stride];
            for (s, ct) in batch.iter_mut().zip(inputs) {
                let abar = self.switch(ct.a[i]) % (2 * big_n);
                if abar == 0 {
                    continue;
                }
                let (e, negate) = if abar >= big_n { (abar - big_n, true) } else { (abar, false) };
                for c in 0..polys {
                    let poly = c * big_n..(c + 1) * big_n;
                    simd::rotate_minus(&s.acc[poly.clone()], e, negate, &mut s.rot[poly.clone()]);
                    simd::decompose(&s.rot[poly], p.decomp_base_log, levels, &mut s.digits);
                    for j in 0..levels {
                        let r = c * levels + j;
                        self.fft.forward_i32(
                            &s.digits[j * big_n..(j + 1) * big_n],
                            &mut s.spec[r * half..(r + 1) * half],
                            &mut s.fft,
                        );
                    }
                }
                simd::mac(&mut s.out, &s.spec, key, rows, polys, half);
                for c in 0..polys {
                    self.fft.backward_add(
                        &mut s.out[c * half..(c + 1) * half],
                        &mut s.acc[c * big_n..(c + 1) * big_n],
                        &mut s.fft,
                    );
                }
            }
        }

        Ok(batch
            .into_iter()
            .map(|s| {
                let mut a = Vec::with_capacity(p.k * big_n);
                for c in 0..p.k {
                    let mask = &s.acc[c * big_n..(c + 1) * big_n];
                    a.push(mask[0]);
                    a.extend((1..big_n).map(|j| mask[big_n - j].wrapping_neg()));
                }
                Extracted { a, b: s.acc[p.k * big_n] }
            })
            .collect())
    }

    /// Switches extracted samples back to the LWE key, one pass over the
    /// key-switching key for the whole batch.
    pub(crate) fn key_switch(&self, items: &[Extracted]) -> Vec<LweCiphertext> {
        let p = &self.params;
        let n = p.lwe.n;
        let width = n + 1;
        let base_log = p.ks_base_log;
        let levels = p.ks_levels;
        let total = base_log as usize * levels;
        let round = if total < 32 { 1u32 << (31 - total) } else { 0 };
        let mask = (1u32 << base_log) - 1;
        let half_base = 1i32 << (base_log - 1);
        let mut outs: Vec<Vec<u32>> = items
            .iter()
            .map(|x| {
                let mut o = vec![0u32; width];
                o[n] = x.b;
                o
            })
            .collect();
        let mut digits = vec![0i32; items.len() * levels];
        for j in 0..p.k * p.big_n {
            for (e, x) in items.iter().enumerate() {
                let mut v = x.a[j].wrapping_add(round) >> (32 - total);
                let mut carry = 0i32;
                for lev in (0..levels).rev() {
                    let mut d = (v & mask) as i32 + carry;
                    v >>= base_log;
                    carry = 0;
                    if d >= half_base {
                        d -= 1 << base_log;
                        carry = 1;
                    }
                    digits[e * levels + lev] = d;
                }
            }
            for lev in 0..levels {
                let off = (j * levels + lev) * width;
                let row = &self.ksk[off..off + width];
                for (e, out) in outs.iter_mut().enumerate() {
                    let d = digits[e * levels + lev];
                    if d != 0 {
                        simd::sub_scaled(out, row, d as u32);
                    }
                }
            }
        }
        outs.into_iter()
            .map(|mut out| {
                let b = out.pop().expect("nonempty");
                LweCiphertext {
                    set: p.set(),
                    a: out,
                    b,
                    var: p.output_variance(),
                }
            })
            .collect()
    }
}

/// A sample extracted from the accumulator, under the ring key.
#[derive(Clone, Debug)]
pub(crate) struct Extracted {
    pub a: Vec<Torus>,
    pub b: Torus,
}

impl Extracted {
    pub fn add_assign(&mut self, other: &Extracted) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x = x.wrapping_add(*y);
        }
        self.b = self.b.wrapping_add(other.b);
    }
}

/// `dst = X^e · src` in `ℤ[X]/(X^N + 1)`, for `e` in `[0, 2N)`.
pub(crate) fn mul_monomial(src: &[u32], e: usize, dst: &mut [u32]) {
    let n = src.len();
    let (e, negate) = if e >= n { (e - n, true) } else { (e, false) };
    for j in 0..n {
        let v = if j >= e {
            src[j - e]
        } else {
            src[j + n - e].wrapping_neg()
        };
        dst[j] = if negate { v.wrapping_neg() } else { v };
    }
}

fn glwe_encrypt_zero<R: Rng + ?Sized>(
    ring_key: &[u32],
    p: &BootstrapParams,
    fft: &NegacyclicFft,
    noise: &TorusGaussian,
    rng: &mut R,
    out: &mut [u32],
) {
    let n = p.big_n;
    let (masks, body) = out.split_at_mut(p.k * n);
    for b in body.iter_mut() {
        *b = noise.sample(rng);
    }
    for (c, mask) in masks.chunks_exact_mut(n).enumerate() {
        for m in mask.iter_mut() {
            *m = rng.random();
        }
        let prod = fft.mul_torus(mask, &ring_key[c * n..(c + 1) * n]);
        for (b, x) in body.iter_mut().zip(prod) {
            *b = b.wrapping_add(x);
        }
    }
}

pub fn make_evaluation_key<R: Rng + ?Sized>(
    sk: &LweSecretKey,
    bp: &BootstrapParams,
    rng: &mut R,
) -> Result<EvaluationKey> {
    bp.validate()?;
    if sk.set != bp.set() || sk.n() != bp.lwe.n {
        return Err(Error::InvalidParams(format!(
            "secret key for {} does not match {} bootstrap parameters",
            sk.set,
            bp.set()
        )));
    }
    let big_n = bp.big_n;
    let polys = bp.k + 1;
    let levels = bp.decomp_levels;
    let fft = NegacyclicFft::new(big_n);
    let ring_key: Vec<u32> = (0..bp.k * big_n).map(|_| rng.random::<bool>() as u32).collect();

    let bsk_noise = TorusGaussian::new(bp.bsk_sigma);
    let ggsw_len = polys * levels * polys * big_n;
    let mut bsk = vec![0u32; bp.lwe.n * ggsw_len];
    for (ggsw, &bit) in bsk.chunks_exact_mut(ggsw_len).zip(sk.words()) {
        for (r, row) in ggsw.chunks_exact_mut(polys * big_n).enumerate() {
            glwe_encrypt_zero(&ring_key, bp, &fft, &bsk_noise, rng, row);
            let block = r / levels;
            let level = r % levels;
            let gadget = 1u32 << (32 - (level as u32 + 1) * bp.decomp_base_log);
            let head = &mut row[block * big_n];
            *head = head.wrapping_add(gadget.wrapping_mul(bit));
        }
    }

    let ks_noise_sigma = bp.ks_sigma;
    let width = bp.lwe.n + 1;
    let mut ksk = Vec::with_capacity(bp.k * big_n * bp.ks_levels * width);
    for &bit in &ring_key {
        for lev in 0..bp.ks_levels {
            let gadget = 1u32 << (32 - (lev as u32 + 1) * bp.ks_base_log);
            let ct = sk.encrypt_torus(gadget.wrapping_mul(bit), ks_noise_sigma, rng);
            ksk.extend_from_slice(&ct.a);
            ksk.push(ct.b);
        }
    }
    Ok(EvaluationKey::from_parts(*bp, bsk, ksk))
}

impl Wire for EvaluationKey {
    const TAG: TypeTag = TypeTag::EvaluationKey;

    fn param_set(&self) -> ParamSet {
        self.params.set()
    }

    /// Bootstrapping key words, then key-switching key words.
    fn write_body(&self, out: &mut Vec<u8>) {
        put_words(out, &self.bsk);
        put_words(out, &self.ksk);
    }

    fn read_body(set: ParamSet, body: &[u8]) -> Result<Self> {
        let params = BootstrapParams::of(set);
        if body.len() != params.evk_bytes() {
            return Err(Error::LengthMismatch {
                expected: params.evk_bytes(),
                found: body.len(),
            });
        }
        let (b, k) = body.split_at(params.bsk_bytes());
        Ok(Self::from_parts(params, get_words(b)?, get_words(k)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_rotation() {
        let src = [1u32, 2, 3, 4];
        let mut dst = [0u32; 4];
        mul_monomial(&src, 1, &mut dst);
        assert_eq!(dst, [4u32.wrapping_neg(), 1, 2, 3]);
        mul_monomial(&src, 4, &mut dst);
        assert_eq!(dst, src.map(|x: u32| x.wrapping_neg()));
        mul_monomial(&src, 7, &mut dst);
        assert_eq!(dst, [2, 3, 4, 1u32.wrapping_neg()]);
        mul_monomial(&src, 0, &mut dst);
        assert_eq!(dst, src);
    }

    #[test]
    fn decomposition_recomposes() {
        let xs: Vec<u32> = vec![0, 1, 0x8000_0000, 0xffff_ffff, 0x1234_5678, 0x7fff_f000, 0x0008_0000];
        for (base_log, levels) in [(12u32, 2usize), (8, 3), (3, 9), (6, 4)] {
            let total = base_log as usize * levels;
            let mut acc = vec![0u32; xs.len()];
            let mut all = vec![0i32; xs.len() * levels];
            simd::decompose(&xs, base_log, levels, &mut all);
            for level in 0..levels {
                let d = &all[level * xs.len()..(level + 1) * xs.len()];
                let w = 1u32 << (32 - (level as u32 + 1) * base_log);
                for (a, &di) in acc.iter_mut().zip(d) {
                    assert!(di >= -(1 << (base_log - 1)) && di < (1 << (base_log - 1)));
                    *a = a.wrapping_add((di as u32).wrapping_mul(w));
                }
            }
            for (x, a) in xs.iter().zip(&acc) {
                let err = crate::torus_lwe::distance(*x, *a) as u64;
                assert!(err <= 1u64 << (31 - total), "base {base_log} x {x:#x}");
            }
        }
    }
}
