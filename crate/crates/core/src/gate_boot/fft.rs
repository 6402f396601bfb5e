//! Negacyclic transform for products in `ℤ[X]/(X^N + 1)`.
//!
//! A real polynomial of degree `< N` is folded into `N/2` complex points
//! `(p_j + i·p_{j+N/2})·ζ^j` with `ζ = e^{iπ/N}` and sent through a complex
//! FFT of size `N/2`. Pointwise products in that domain are negacyclic
//! products of the polynomials.

use dyn_stack::{PodBuffer, PodStack};
use num_complex::Complex64;
use tfhe_fft::ordered::FftAlgo;
use tfhe_fft::unordered::{Method, Plan};

/// Work space for one transform at a time.
pub type FftScratch = PodBuffer;

/// The transform domain is in a plan-specific permuted order; spectra are
/// only meaningful against other spectra of the same `N`.
#[derive(Clone)]
pub struct NegacyclicFft {
    n: usize,
    plan: std::sync::Arc<Plan>,
    twist_re: Vec<f64>,
    twist_im: Vec<f64>,
    untwist_re: Vec<f64>,
    untwist_im: Vec<f64>,
}

impl std::fmt::Debug for NegacyclicFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NegacyclicFft(N={})", self.n)
    }
}

impl NegacyclicFft {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 4, "ring dimension must be a power of two");
        let half = n / 2;
        let algo = if half >= 8 { FftAlgo::Dit8 } else { FftAlgo::Dit2 };
        let plan = Plan::new(half, Method::UserProvided { base_algo: algo, base_n: half });
        let scale = 1.0 / half as f64;
        let twist: Vec<Complex64> = (0..half)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * j as f64 / n as f64))
            .collect();
        Self {
            n,
            plan: std::sync::Arc::new(plan),
            twist_re: twist.iter().map(|w| w.re).collect(),
            twist_im: twist.iter().map(|w| w.im).collect(),
            untwist_re: twist.iter().map(|w| w.re * scale).collect(),
            untwist_im: twist.iter().map(|w| -w.im * scale).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spectrum_len(&self) -> usize {
        self.n / 2
    }

    pub fn scratch(&self) -> FftScratch {
        PodBuffer::try_new(self.plan.fft_scratch()).expect("fft scratch allocation")
    }

    /// Transforms signed integer coefficients.
    pub fn forward_i32(&self, poly: &[i32], out: &mut [Complex64], scratch: &mut FftScratch) {
        let half = self.n / 2;
        let (lo, hi) = poly.split_at(half);
        super::simd::fold_i32(lo, hi, &self.twist_re, &self.twist_im, &mut out[..half]);
        self.plan.fwd(&mut out[..half], PodStack::new(scratch));
    }

    /// Transforms torus coefficients, read as centered signed words.
    pub fn forward_torus(&self, poly: &[u32], out: &mut [Complex64], scratch: &mut FftScratch) {
        let half = self.n / 2;
        let (lo, hi) = poly.split_at(half);
        super::simd::fold_u32(lo, hi, &self.twist_re, &self.twist_im, &mut out[..half]);
        self.plan.fwd(&mut out[..half], PodStack::new(scratch));
    }

    /// Inverts `spec` in place and adds the rounded coefficients, modulo 2³²,
    /// into `acc`.
    pub fn backward_add(&self, spec: &mut [Complex64], acc: &mut [u32], scratch: &mut FftScratch) {
        let half = self.n / 2;
        self.plan.inv(&mut spec[..half], PodStack::new(scratch));
        let (lo, hi) = acc.split_at_mut(half);
        super::simd::unfold_add(&spec[..half], &self.untwist_re, &self.untwist_im, lo, hi);
    }

    /// Negacyclic product of two torus polynomials, computed exactly as long
    /// as the true integer coefficients stay well below 2⁵².
    pub fn mul_torus(&self, x: &[u32], y: &[u32]) -> Vec<u32> {
        let half = self.n / 2;
        let mut scratch = self.scratch();
        let mut fx = vec![Complex64::default(); half];
        let mut fy = vec![Complex64::default(); half];
        self.forward_torus(x, &mut fx, &mut scratch);
        self.forward_torus(y, &mut fy, &mut scratch);
        for (a, b) in fx.iter_mut().zip(&fy) {
            *a *= b;
        }
        let mut out = vec![0u32; self.n];
        self.backward_add(&mut fx, &mut out, &mut scratch);
        out
    }
}

/// Schoolbook negacyclic product, used as a reference.
pub fn mul_naive(x: &[u32], y: &[u32]) -> Vec<u32> {
    let n = x.len();
    let mut out = vec![0u32; n];
    for (i, &a) in x.iter().enumerate() {
        for (j, &b) in y.iter().enumerate() {
            let p = a.wrapping_mul(b);
            let k = i + j;
            if k < n {
                out[k] = out[k].wrapping_add(p);
            } else {
                out[k - n] = out[k - n].wrapping_sub(p);
            }
        }
    }
    out
}
