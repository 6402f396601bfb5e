use super::key::EvaluationKey;
use super::params::BootstrapParams;
use crate::error::{Error, Result};
use crate::torus_lwe::{decode, LweCiphertext, Torus, EIGHTH, ONE};

const QUARTER: Torus = ONE;
const THREE_EIGHTHS: Torus = 3 * EIGHTH;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateOp {
    And,
    Xor,
    Nand,
    Or,
}

impl GateOp {
    pub const ALL: [GateOp; 4] = [GateOp::And, GateOp::Xor, GateOp::Nand, GateOp::Or];

    pub fn eval(self, x: bool, y: bool) -> bool {
        match self {
            GateOp::And => x & y,
            GateOp::Xor => x ^ y,
            GateOp::Nand => !(x & y),
            GateOp::Or => x | y,
        }
    }
}

/// Builds `Σ kᵢ·ctᵢ + offset`.
pub fn linear(terms: &[(&LweCiphertext, i32)], offset: Torus) -> Result<LweCiphertext> {
    let (first, _) = terms
        .first()
        .ok_or_else(|| Error::InvalidParams("empty linear combination".into()))?;
    let mut out = LweCiphertext::trivial(first.set, offset);
    out.a = vec![0; first.n()];
    for (ct, k) in terms {
        out.add_scaled_assign(ct, *k)?;
    }
    Ok(out)
}

/// Input of a gate bootstrap computing `op(x, y)`.
pub fn gate_input(op: GateOp, x: &LweCiphertext, y: &LweCiphertext) -> Result<LweCiphertext> {
    if x.n() != y.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            found: y.n(),
        });
    }
    match op {
        GateOp::And => linear(&[(x, 1), (y, 1)], THREE_EIGHTHS.wrapping_neg()),
        GateOp::Or => linear(&[(x, 1), (y, 1)], EIGHTH.wrapping_neg()),
        GateOp::Nand => linear(&[(x, -1), (y, -1)], THREE_EIGHTHS),
        GateOp::Xor => linear(&[(x, 2), (y, 2)], QUARTER.wrapping_neg()),
    }
}

/// Input of a bootstrap copying a `{0, 1/4}`-encoded bit.
pub fn refresh_input(x: &LweCiphertext) -> Result<LweCiphertext> {
    linear(&[(x, 1)], EIGHTH.wrapping_neg())
}

/// Input of a bootstrap re-encoding a `{0, 1/2}`-encoded bit.
pub fn refresh_half_input(h: &LweCiphertext) -> Result<LweCiphertext> {
    linear(&[(h, 1)], QUARTER.wrapping_neg())
}

/// Input of a bootstrap computing `a ⊕ b ⊕ c`.
pub fn xor3_input(a: &LweCiphertext, b: &LweCiphertext, c: &LweCiphertext) -> Result<LweCiphertext> {
    linear(&[(a, 2), (b, 2), (c, 2)], QUARTER.wrapping_neg())
}

/// Input of a bootstrap computing the majority of three bits.
pub fn majority_input(a: &LweCiphertext, b: &LweCiphertext, c: &LweCiphertext) -> Result<LweCiphertext> {
    linear(&[(a, 1), (b, 1), (c, 1)], THREE_EIGHTHS.wrapping_neg())
}

impl EvaluationKey {
    /// Gate bootstrap of a linear combination: returns a fresh encryption of
    /// 1 when the phase of `lin` lies in `[0, 1/2)` and of 0 otherwise.
    ///
    /// Noiseless trivial inputs are decided in the clear.
    pub fn bootstrap_sign(&self, lin: &LweCiphertext) -> Result<LweCiphertext> {
        Ok(self.bootstrap_sign_many(std::slice::from_ref(lin))?.remove(0))
    }

    /// [`bootstrap_sign`](Self::bootstrap_sign) over independent inputs,
    /// sharing key traffic across the batch.
    pub fn bootstrap_sign_many(&self, lins: &[LweCiphertext]) -> Result<Vec<LweCiphertext>> {
        let mut out: Vec<Option<LweCiphertext>> = lins
            .iter()
            .map(|l| l.trivial_value().map(|v| LweCiphertext::trivial_bit(l.set, v < (1 << 31))))
            .collect();
        let pending: Vec<&LweCiphertext> = lins.iter().filter(|l| l.trivial_value().is_none()).collect();
        if !pending.is_empty() {
            let mut ext = self.blind_rotate_extract(&pending, EIGHTH)?;
            for x in &mut ext {
                x.b = x.b.wrapping_add(EIGHTH);
            }
            let mut fresh = self.key_switch(&ext).into_iter();
            for slot in out.iter_mut().filter(|o| o.is_none()) {
                *slot = fresh.next();
            }
        }
        Ok(out.into_iter().map(|o| o.expect("filled")).collect())
    }

    /// Bootstrapped copy of a `{0, 1/4}`-encoded bit.
    pub fn refresh(&self, x: &LweCiphertext) -> Result<LweCiphertext> {
        self.bootstrap_sign(&refresh_input(x)?)
    }

    /// Bootstrapped `{0, 1/4}` encoding of a `{0, 1/2}`-encoded bit.
    pub fn refresh_half(&self, h: &LweCiphertext) -> Result<LweCiphertext> {
        self.bootstrap_sign(&refresh_half_input(h)?)
    }

    /// Three-input parity in one bootstrap.
    pub fn xor3(&self, a: &LweCiphertext, b: &LweCiphertext, c: &LweCiphertext) -> Result<LweCiphertext> {
        self.bootstrap_sign(&xor3_input(a, b, c)?)
    }

    /// Three-input majority in one bootstrap.
    pub fn majority(&self, a: &LweCiphertext, b: &LweCiphertext, c: &LweCiphertext) -> Result<LweCiphertext> {
        self.bootstrap_sign(&majority_input(a, b, c)?)
    }
}

/// Bootstrapped binary gate.
pub fn gate(op: GateOp, x: &LweCiphertext, y: &LweCiphertext, evk: &EvaluationKey) -> Result<LweCiphertext> {
    evk.bootstrap_sign(&gate_input(op, x, y)?)
}

/// Independent binary gates evaluated as one batch.
pub fn gate_batch(items: &[(GateOp, &LweCiphertext, &LweCiphertext)], evk: &EvaluationKey) -> Result<Vec<LweCiphertext>> {
    let lins = items
        .iter()
        .map(|(op, x, y)| gate_input(*op, x, y))
        .collect::<Result<Vec<_>>>()?;
    evk.bootstrap_sign_many(&lins)
}

/// `sel ? a : b`, as two blind rotations sharing one key switch.
pub fn mux(sel: &LweCiphertext, a: &LweCiphertext, b: &LweCiphertext, evk: &EvaluationKey) -> Result<LweCiphertext> {
    Ok(mux_batch(&[(sel, a, b)], evk)?.remove(0))
}

/// Independent multiplexers evaluated as one batch.
pub fn mux_batch(items: &[(&LweCiphertext, &LweCiphertext, &LweCiphertext)], evk: &EvaluationKey) -> Result<Vec<LweCiphertext>> {
    let mut out: Vec<Option<LweCiphertext>> = Vec::with_capacity(items.len());
    let mut rotate = Vec::new();
    for &(sel, a, b) in items {
        for ct in [a, b] {
            if ct.n() != sel.n() {
                return Err(Error::DimensionMismatch {
                    expected: sel.n(),
                    found: ct.n(),
                });
            }
        }
        match sel.trivial_value() {
            Some(s) => out.push(Some(if decode(s) { a.clone() } else { b.clone() })),
            None => {
                out.push(None);
                rotate.push(linear(&[(sel, 1), (a, 1)], THREE_EIGHTHS.wrapping_neg())?);
                rotate.push(linear(&[(sel, -1), (b, 1)], QUARTER.wrapping_sub(THREE_EIGHTHS))?);
            }
        }
    }
    if !rotate.is_empty() {
        let refs: Vec<&LweCiphertext> = rotate.iter().collect();
        let ext = evk.blind_rotate_extract(&refs, EIGHTH)?;
        let sums: Vec<_> = ext
            .chunks_exact(2)
            .map(|pair| {
                let mut x = pair[0].clone();
                x.add_assign(&pair[1]);
                x.b = x.b.wrapping_add(QUARTER);
                x
            })
            .collect();
        let mut fresh = evk.key_switch(&sums).into_iter();
        for slot in out.iter_mut().filter(|o| o.is_none()) {
            let mut ct = fresh.next().expect("one per rotation pair");
            ct.var += evk.params.blind_rotation_variance();
            *slot = Some(ct);
        }
    }
    Ok(out.into_iter().map(|o| o.expect("filled")).collect())
}

/// Conservative count of further additions of bootstrapped ciphertexts that
/// `ct` tolerates before it must be bootstrapped.
pub fn noise_budget(ct: &LweCiphertext) -> u32 {
    BootstrapParams::of(ct.set).noise_budget_of(ct.var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus_lwe::{lwe_add, ParamSet};

    #[test]
    fn truth_tables() {
        let expect = [
            (GateOp::And, [false, false, false, true]),
            (GateOp::Xor, [false, true, true, false]),
            (GateOp::Nand, [true, true, true, false]),
            (GateOp::Or, [false, true, true, true]),
        ];
        for (op, table) in expect {
            for (i, want) in table.iter().enumerate() {
                assert_eq!(op.eval(i & 2 != 0, i & 1 != 0), *want);
            }
        }
    }

    #[test]
    fn budget_definition() {
        let p = BootstrapParams::tfhe128();
        let mut ct = LweCiphertext::trivial(ParamSet::Tfhe128, 0);
        ct.var = p.output_variance();
        let fresh = noise_budget(&ct);
        assert!(fresh >= super::super::params::MIN_FRESH_BUDGET);
        let mut acc = ct.clone();
        let mut last = fresh;
        for _ in 0..fresh {
            acc = lwe_add(&acc, &ct).unwrap();
            let b = noise_budget(&acc);
            assert!(b <= last);
            last = b;
        }
        assert_eq!(last, 0);
        assert_eq!(noise_budget(&lwe_add(&acc, &ct).unwrap()), 0);
    }
}
