use crate::error::{Error, Result};
use crate::torus_lwe::{LweParams, ParamSet};

/// Gate-error target per bootstrapped gate.
pub const GATE_ERROR_TARGET: f64 = 9.5367431640625e-7; // 2^-20

/// Two-sided Gaussian tail point for [`GATE_ERROR_TARGET`].
const TAIL_Z: f64 = 4.9;

/// Smallest noise budget a freshly bootstrapped ciphertext may have.
pub const MIN_FRESH_BUDGET: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapParams {
    pub lwe: LweParams,
    /// Ring dimension.
    pub big_n: usize,
    /// Number of mask polynomials.
    pub k: usize,
    pub decomp_base_log: u32,
    pub decomp_levels: usize,
    pub bsk_sigma: f64,
    pub ks_base_log: u32,
    pub ks_levels: usize,
    pub ks_sigma: f64,
}

impl BootstrapParams {
    pub fn tfhe128() -> Self {
        Self {
            lwe: LweParams::tfhe128(),
            big_n: 1024,
            k: 1,
            decomp_base_log: 12,
            decomp_levels: 2,
            bsk_sigma: 4.656612873077393e-10, // 2^-31
            ks_base_log: 3,
            ks_levels: 9,
            ks_sigma: 7.62939453125e-6, // 2^-17
        }
    }

    pub fn tfhe80() -> Self {
        Self {
            lwe: LweParams::tfhe80(),
            big_n: 1024,
            k: 1,
            decomp_base_log: 12,
            decomp_levels: 2,
            bsk_sigma: 4.656612873077393e-10, // 2^-31
            ks_base_log: 6,
            ks_levels: 4,
            ks_sigma: 9.5367431640625e-7, // 2^-20
        }
    }

    pub fn of(set: ParamSet) -> Self {
        match set {
            ParamSet::Tfhe80 => Self::tfhe80(),
            ParamSet::Tfhe128 => Self::tfhe128(),
        }
    }

    pub fn set(&self) -> ParamSet {
        self.lwe.set
    }

    pub fn validate(&self) -> Result<()> {
        self.lwe.validate()?;
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if !self.big_n.is_power_of_two() || self.big_n < 4 {
            return bad("ring dimension must be a power of two");
        }
        if self.k == 0 {
            return bad("at least one mask polynomial is required");
        }
        let bsk_bits = self.decomp_base_log as usize * self.decomp_levels;
        let ks_bits = self.ks_base_log as usize * self.ks_levels;
        if !(24..=32).contains(&bsk_bits) || !(24..=32).contains(&ks_bits) {
            return bad("each decomposition must keep between 24 and 32 bits");
        }
        if self.decomp_base_log < 1 || self.ks_base_log < 1 {
            return bad("decomposition bases must be at least 2");
        }
        if self.noise_budget_of(self.output_variance()) < MIN_FRESH_BUDGET {
            return bad("bootstrapping noise leaves too little headroom");
        }
        Ok(())
    }

    pub fn ciphertext_bytes(&self) -> usize {
        self.lwe.ciphertext_bytes()
    }

    /// Serialized size of the bootstrapping key.
    pub fn bsk_bytes(&self) -> usize {
        let rows = (self.k + 1) * self.decomp_levels;
        self.lwe.n * rows * (self.k + 1) * self.big_n * 4
    }

    /// Serialized size of the key-switching key.
    pub fn ksk_bytes(&self) -> usize {
        self.k * self.big_n * self.ks_levels * self.ciphertext_bytes()
    }

    pub fn evk_bytes(&self) -> usize {
        self.bsk_bytes() + self.ksk_bytes()
    }

    /// Phase variance contributed by rounding the input to `ℤ/2N`.
    pub fn mod_switch_variance(&self) -> f64 {
        let step = 1.0 / (2 * self.big_n) as f64;
        (1.0 + self.lwe.n as f64 / 2.0) * step * step / 12.0
    }

    /// Variance after blind rotation and sample extraction.
    pub fn blind_rotation_variance(&self) -> f64 {
        let n = self.lwe.n as f64;
        let big_n = self.big_n as f64;
        let k = self.k as f64;
        let l = self.decomp_levels as f64;
        let bg = (1u64 << self.decomp_base_log) as f64;
        let digits = (bg * bg + 2.0) / 12.0;
        let approx = 2f64.powi(-2 * (self.decomp_base_log as i32 * self.decomp_levels as i32)) / 12.0;
        n * ((k + 1.0) * l * big_n * digits * self.bsk_sigma.powi(2) + (1.0 + k * big_n / 2.0) * approx)
    }

    pub fn key_switch_variance(&self) -> f64 {
        let kn = (self.k * self.big_n) as f64;
        let b = (1u64 << self.ks_base_log) as f64;
        let digits = (b * b + 2.0) / 12.0;
        let approx = 2f64.powi(-2 * (self.ks_base_log as i32 * self.ks_levels as i32)) / 12.0;
        kn * (self.ks_levels as f64 * digits * self.ks_sigma.powi(2) + approx / 2.0)
    }

    /// Estimated phase variance of any bootstrapped output.
    pub fn output_variance(&self) -> f64 {
        self.blind_rotation_variance() + self.key_switch_variance()
    }

    /// Largest phase variance a bootstrap input may carry while meeting the
    /// gate-error target with margin 1/8.
    pub fn max_input_variance(&self) -> f64 {
        let v = (0.125 / TAIL_Z).powi(2);
        v - self.mod_switch_variance()
    }

    /// Noise budget for a ciphertext with phase variance `var`: how many
    /// further additions of freshly bootstrapped ciphertexts it can absorb
    /// and still enter a two-input gate.
    pub fn noise_budget_of(&self, var: f64) -> u32 {
        let cap = self.max_input_variance() / 2.0;
        let room = (cap - var) / self.output_variance();
        if room <= 0.0 {
            0
        } else {
            room.floor() as u32
        }
    }
}
