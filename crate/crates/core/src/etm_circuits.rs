//! Encrypted threshold matching: `r = [HD(w, w′) ≤ t]` over bootstrapped bits.
//!
//! The circuit XORs the two templates, counts the differing positions with a
//! column-compression adder tree, and compares the count against the public
//! threshold with a carry chain specialised to the constant. Every layer is
//! bootstrapped as one batch.

use crate::error::{Error, Result};
use crate::gate_boot::{gate_input, majority_input, xor3_input, EvaluationKey, GateOp};
use crate::torus_lwe::LweCiphertext;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EtmConfig {
    /// Template length in bits.
    pub l_w: usize,
    /// Largest accepted Hamming distance.
    pub t: u64,
    /// Full adders as one parity and one majority bootstrap each instead of
    /// two XOR, two AND and one OR gate.
    pub fused: bool,
}

impl EtmConfig {
    /// Threshold `⌊0.25·l_w⌋`.
    pub fn new(l_w: usize) -> Self {
        Self {
            l_w,
            t: l_w as u64 / 4,
            fused: true,
        }
    }

    pub fn with_threshold(mut self, t: u64) -> Self {
        self.t = t;
        self
    }

    pub fn with_fused(mut self, fused: bool) -> Self {
        self.fused = fused;
        self
    }

    /// Bits needed to hold a count up to `l_w`.
    pub fn count_width(&self) -> usize {
        count_width(self.l_w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_w == 0 {
            return Err(Error::InvalidParams("template length must be positive".into()));
        }
        let width = self.count_width();
        if width < 64 && self.t >> width != 0 {
            return Err(Error::WidthMismatch {
                width,
                threshold: self.t,
            });
        }
        Ok(())
    }
}

pub fn count_width(l_w: usize) -> usize {
    (usize::BITS - l_w.leading_zeros()) as usize
}

/// Plaintext Hamming distance.
pub fn hamming(w: &[bool], w2: &[bool]) -> Result<u64> {
    if w.len() != w2.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            found: w2.len(),
        });
    }
    Ok(w.iter().zip(w2).filter(|(a, b)| a != b).count() as u64)
}

/// Plaintext matcher.
pub fn etm_plain(w: &[bool], w2: &[bool], config: &EtmConfig) -> Result<bool> {
    config.validate()?;
    check_len(w.len(), config)?;
    Ok(hamming(w, w2)? <= config.t)
}

fn check_len(found: usize, config: &EtmConfig) -> Result<()> {
    if found != config.l_w {
        return Err(Error::LengthMismatch {
            expected: config.l_w,
            found,
        });
    }
    Ok(())
}

enum Cell {
    Ready(LweCiphertext),
    Boot(usize),
    /// Sum of an unfused full adder, ready after its second layer.
    Late(usize),
}

fn sequence(evk: &EvaluationKey, lins: Vec<LweCiphertext>) -> Result<Vec<LweCiphertext>> {
    if lins.is_empty() {
        Ok(Vec::new())
    } else {
        evk.bootstrap_sign_many(&lins)
    }
}

/// One compression layer: every column of weight `2^j` holding two or more
/// bits is reduced by full adders on triples and a half adder on a left-over
/// pair. Carries into a column at or past `width` are dropped, as the total
/// fits in `width` bits.
fn compress(columns: Vec<Vec<LweCiphertext>>, width: usize, fused: bool, evk: &EvaluationKey) -> Result<Vec<Vec<LweCiphertext>>> {
    let mut lins = Vec::new();
    let mut plan: Vec<(usize, Cell)> = Vec::new();
    let push = |lins: &mut Vec<LweCiphertext>, lin: LweCiphertext| {
        lins.push(lin);
        lins.len() - 1
    };
    // Unfused adders need a second layer: (a ⊕ b) ⊕ c and (a ⊕ b)·c.
    let mut second: Vec<(usize, usize, LweCiphertext)> = Vec::new();
    let mut ors: Vec<(usize, usize, usize)> = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        if col.len() < 2 {
            plan.extend(col.iter().cloned().map(|c| (j, Cell::Ready(c))));
            continue;
        }
        let mut chunks = col.chunks_exact(3);
        for t in &mut chunks {
            if fused {
                let s = push(&mut lins, xor3_input(&t[0], &t[1], &t[2])?);
                plan.push((j, Cell::Boot(s)));
                if j + 1 < width {
                    let c = push(&mut lins, majority_input(&t[0], &t[1], &t[2])?);
                    plan.push((j + 1, Cell::Boot(c)));
                }
            } else {
                let x = push(&mut lins, gate_input(GateOp::Xor, &t[0], &t[1])?);
                let a = push(&mut lins, gate_input(GateOp::And, &t[0], &t[1])?);
                second.push((j, x, t[2].clone()));
                ors.push((j, a, second.len() - 1));
            }
        }
        match chunks.remainder() {
            [x] => plan.push((j, Cell::Ready(x.clone()))),
            [x, y] => {
                let s = push(&mut lins, gate_input(GateOp::Xor, x, y)?);
                plan.push((j, Cell::Boot(s)));
                if j + 1 < width {
                    let c = push(&mut lins, gate_input(GateOp::And, x, y)?);
                    plan.push((j + 1, Cell::Boot(c)));
                }
            }
            _ => {}
        }
    }
    let first = sequence(evk, lins)?;

    let (mut mid, mut carries, mut top) = (Vec::new(), Vec::new(), Vec::new());
    if !second.is_empty() {
        let mut lins = Vec::new();
        let mut late = Vec::new();
        for (j, x, c) in &second {
            late.push(lins.len());
            plan.push((*j, Cell::Late(lins.len())));
            lins.push(gate_input(GateOp::Xor, &first[*x], c)?);
            lins.push(gate_input(GateOp::And, &first[*x], c)?);
        }
        mid = sequence(evk, lins)?;
        let mut lins = Vec::new();
        for (j, a, k) in &ors {
            if j + 1 < width {
                carries.push(j + 1);
                lins.push(gate_input(GateOp::Or, &first[*a], &mid[late[*k] + 1])?);
            }
        }
        top = sequence(evk, lins)?;
    }
    let mut out = vec![Vec::new(); width];
    for (j, cell) in plan {
        out[j].push(match cell {
            Cell::Ready(c) => c,
            Cell::Boot(i) => first[i].clone(),
            Cell::Late(i) => mid[i].clone(),
        });
    }
    for (j, c) in carries.into_iter().zip(top.drain(..)) {
        out[j].push(c);
    }
    Ok(out)
}

/// Encrypted population count of `bits`, least significant bit first, in
/// `count_width(bits.len())` ciphertexts.
pub fn hom_popcount(bits: &[LweCiphertext], fused: bool, evk: &EvaluationKey) -> Result<Vec<LweCiphertext>> {
    let width = count_width(bits.len());
    let Some(first) = bits.first() else {
        return Ok(Vec::new());
    };
    let mut columns = vec![Vec::new(); width];
    columns[0] = bits.to_vec();
    while columns.iter().any(|c| c.len() > 1) {
        columns = compress(columns, width, fused, evk)?;
    }
    Ok(columns
        .into_iter()
        .map(|mut c| c.pop().unwrap_or_else(|| LweCiphertext::trivial_bit(first.set, false)))
        .collect())
}

/// Encrypted Hamming distance of two equal-length ciphertext vectors.
pub fn hom_hamming(
    enc_w: &[LweCiphertext],
    enc_w2: &[LweCiphertext],
    fused: bool,
    evk: &EvaluationKey,
) -> Result<Vec<LweCiphertext>> {
    if enc_w.len() != enc_w2.len() {
        return Err(Error::LengthMismatch {
            expected: enc_w.len(),
            found: enc_w2.len(),
        });
    }
    let diff = enc_w
        .iter()
        .zip(enc_w2)
        .map(|(a, b)| gate_input(GateOp::Xor, a, b))
        .collect::<Result<Vec<_>>>()?;
    let diff = sequence(evk, diff)?;
    hom_popcount(&diff, fused, evk)
}

/// `Enc([count ≤ t])` for an encrypted count, least significant bit first.
///
/// Scans from the least significant bit keeping `gt = [count mod 2^i > t mod
/// 2^i]`: a zero threshold bit turns the step into `aᵢ ∨ gt`, a one into
/// `aᵢ ∧ gt`. The result is `¬gt`.
pub fn hom_leq(count: &[LweCiphertext], t: u64, evk: &EvaluationKey) -> Result<LweCiphertext> {
    let width = count.len();
    if width < 64 && t >> width != 0 {
        return Err(Error::WidthMismatch { width, threshold: t });
    }
    let first = count
        .first()
        .ok_or_else(|| Error::InvalidParams("empty count".into()))?;
    let mut gt = LweCiphertext::trivial_bit(first.set, false);
    for (i, a) in count.iter().enumerate() {
        let op = if t >> i & 1 == 1 { GateOp::And } else { GateOp::Or };
        gt = evk.bootstrap_sign(&gate_input(op, a, &gt)?)?;
    }
    Ok(gt.not())
}

/// `Enc(r)` with `r = [HD(w, w′) ≤ t]`.
pub fn etm(
    enc_w: &[LweCiphertext],
    enc_w2: &[LweCiphertext],
    config: &EtmConfig,
    evk: &EvaluationKey,
) -> Result<LweCiphertext> {
    config.validate()?;
    check_len(enc_w.len(), config)?;
    check_len(enc_w2.len(), config)?;
    let count = hom_hamming(enc_w, enc_w2, config.fused, evk)?;
    hom_leq(&count, config.t, evk)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(count_width(1), 1);
        assert_eq!(count_width(3), 2);
        assert_eq!(count_width(4), 3);
        assert_eq!(count_width(64), 7);
        assert_eq!(count_width(2048), 12);
    }

    #[test]
    fn default_threshold() {
        assert_eq!(EtmConfig::new(64).t, 16);
        assert_eq!(EtmConfig::new(2048).t, 512);
        assert_eq!(EtmConfig::new(10).t, 2);
        assert!(EtmConfig::new(64).fused);
    }

    #[test]
    fn threshold_must_fit() {
        EtmConfig::new(64).with_threshold(127).validate().unwrap();
        assert!(matches!(
            EtmConfig::new(64).with_threshold(128).validate(),
            Err(Error::WidthMismatch { width: 7, threshold: 128 })
        ));
        assert!(EtmConfig::new(0).validate().is_err());
    }

    #[test]
    fn plaintext_matcher() {
        let w = [true, false, true, true];
        let x = [false, false, true, false];
        assert_eq!(hamming(&w, &x).unwrap(), 2);
        let c = EtmConfig::new(4);
        assert!(!etm_plain(&w, &x, &c).unwrap());
        assert!(etm_plain(&w, &x, &c.with_threshold(2)).unwrap());
        assert!(etm_plain(&w, &w, &c).unwrap());
        assert!(hamming(&w, &x[1..]).is_err());
    }
}
