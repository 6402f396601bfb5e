//! Hot loops of blind rotation and key switching, compiled twice: once for
//! the baseline target and once with AVX2/FMA, picked at run time.

use num_complex::Complex64;

/// `1.5 · 2⁵²`: adding it to a double of magnitude below 2⁵¹ leaves the
/// nearest integer, modulo 2³², in the low mantissa bits.
const MAGIC: f64 = 6755399441055744.0;
const TWO32: f64 = 4294967296.0;
const INV_TWO32: f64 = 1.0 / 4294967296.0;

#[inline(always)]
fn round_wrap(x: f64) -> u32 {
    let q = (x * INV_TWO32 + MAGIC) - MAGIC;
    let r = x - q * TWO32;
    (r + MAGIC).to_bits() as u32
}

#[cfg(target_arch = "x86_64")]
pub(crate) fn has_avx2() -> bool {
    use std::sync::OnceLock;
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
}

macro_rules! dispatch {
    ($(#[$m:meta])* $vis:vis fn $name:ident($($arg:ident: $ty:ty),* $(,)?) $body:block) => {
        $(#[$m])*
        $vis fn $name($($arg: $ty),*) {
            #[inline(always)]
            fn generic($($arg: $ty),*) $body

            #[cfg(target_arch = "x86_64")]
            #[target_feature(enable = "avx2,fma")]
            unsafe fn avx2($($arg: $ty),*) {
                generic($($arg),*)
            }

            #[cfg(target_arch = "x86_64")]
            if has_avx2() {
                // SAFETY: the required CPU features were detected above.
                unsafe { return avx2($($arg),*) }
            }
            generic($($arg),*)
        }
    };
}

/// `out[j] = (lo[j] + i·hi[j]) · (wr[j] + i·wi[j])`.
pub(crate) fn fold_i32(lo: &[i32], hi: &[i32], wr: &[f64], wi: &[f64], out: &mut [Complex64]) {
    let h = out.len();
    assert!(lo.len() >= h && hi.len() >= h && wr.len() >= h && wi.len() >= h);
    #[cfg(target_arch = "x86_64")]
    if has_avx2() && h % 4 == 0 {
        // SAFETY: features detected; lengths asserted above.
        unsafe { return fold_i32_avx2(lo, hi, wr, wi, out) }
    }
    for j in 0..h {
        let (a, b) = (lo[j] as f64, hi[j] as f64);
        out[j] = Complex64::new(a * wr[j] - b * wi[j], a * wi[j] + b * wr[j]);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn fold_i32_avx2(lo: &[i32], hi: &[i32], wr: &[f64], wi: &[f64], out: &mut [Complex64]) {
    use std::arch::x86_64::*;
    let po = out.as_mut_ptr() as *mut f64;
    for j in (0..out.len()).step_by(4) {
        let a = _mm256_cvtepi32_pd(_mm_loadu_si128(lo.as_ptr().add(j) as *const __m128i));
        let b = _mm256_cvtepi32_pd(_mm_loadu_si128(hi.as_ptr().add(j) as *const __m128i));
        let c = _mm256_loadu_pd(wr.as_ptr().add(j));
        let s = _mm256_loadu_pd(wi.as_ptr().add(j));
        let re = _mm256_fmsub_pd(a, c, _mm256_mul_pd(b, s));
        let im = _mm256_fmadd_pd(a, s, _mm256_mul_pd(b, c));
        let x = _mm256_unpacklo_pd(re, im);
        let y = _mm256_unpackhi_pd(re, im);
        _mm256_storeu_pd(po.add(2 * j), _mm256_permute2f128_pd(x, y, 0x20));
        _mm256_storeu_pd(po.add(2 * j + 4), _mm256_permute2f128_pd(x, y, 0x31));
    }
}

/// Same as [`fold_i32`] for torus words read as centered signed integers.
pub(crate) fn fold_u32(lo: &[u32], hi: &[u32], wr: &[f64], wi: &[f64], out: &mut [Complex64]) {
    for j in 0..out.len() {
        let (a, b) = (lo[j] as i32 as f64, hi[j] as i32 as f64);
        out[j] = Complex64::new(a * wr[j] - b * wi[j], a * wi[j] + b * wr[j]);
    }
}

/// Multiplies `spec` by `wr + i·wi`, rounds, and adds the real and
/// imaginary parts into `lo` and `hi` modulo 2³².
pub(crate) fn unfold_add(spec: &[Complex64], wr: &[f64], wi: &[f64], lo: &mut [u32], hi: &mut [u32]) {
    let h = spec.len();
    assert!(lo.len() >= h && hi.len() >= h && wr.len() >= h && wi.len() >= h);
    #[cfg(target_arch = "x86_64")]
    if has_avx2() && h % 4 == 0 {
        // SAFETY: features detected; lengths asserted above.
        unsafe { return unfold_add_avx2(spec, wr, wi, lo, hi) }
    }
    for j in 0..h {
        let s = spec[j];
        let re = s.re * wr[j] - s.im * wi[j];
        let im = s.re * wi[j] + s.im * wr[j];
        lo[j] = lo[j].wrapping_add(round_wrap(re));
        hi[j] = hi[j].wrapping_add(round_wrap(im));
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn unfold_add_avx2(spec: &[Complex64], wr: &[f64], wi: &[f64], lo: &mut [u32], hi: &mut [u32]) {
    use std::arch::x86_64::*;
    let ps = spec.as_ptr() as *const f64;
    let magic = _mm256_set1_pd(MAGIC);
    let two32 = _mm256_set1_pd(TWO32);
    let inv = _mm256_set1_pd(INV_TWO32);
    let pick = _mm256_setr_epi32(0, 2, 4, 6, 1, 3, 5, 7);
    let wrap = |x: __m256d| {
        let q = _mm256_sub_pd(_mm256_fmadd_pd(x, inv, magic), magic);
        let r = _mm256_fnmadd_pd(q, two32, x);
        let bits = _mm256_castpd_si256(_mm256_add_pd(r, magic));
        _mm256_castsi256_si128(_mm256_permutevar8x32_epi32(bits, pick))
    };
    for j in (0..spec.len()).step_by(4) {
        let a = _mm256_loadu_pd(ps.add(2 * j));
        let b = _mm256_loadu_pd(ps.add(2 * j + 4));
        let t0 = _mm256_permute2f128_pd(a, b, 0x20);
        let t1 = _mm256_permute2f128_pd(a, b, 0x31);
        let sr = _mm256_unpacklo_pd(t0, t1);
        let si = _mm256_unpackhi_pd(t0, t1);
        let c = _mm256_loadu_pd(wr.as_ptr().add(j));
        let s = _mm256_loadu_pd(wi.as_ptr().add(j));
        let re = _mm256_fmsub_pd(sr, c, _mm256_mul_pd(si, s));
        let im = _mm256_fmadd_pd(sr, s, _mm256_mul_pd(si, c));
        let pl = lo.as_mut_ptr().add(j) as *mut __m128i;
        let ph = hi.as_mut_ptr().add(j) as *mut __m128i;
        _mm_storeu_si128(pl, _mm_add_epi32(_mm_loadu_si128(pl), wrap(re)));
        _mm_storeu_si128(ph, _mm_add_epi32(_mm_loadu_si128(ph), wrap(im)));
    }
}

#[inline(always)]
fn mac_generic(out: &mut [Complex64], lhs: &[Complex64], rhs: &[Complex64], rows: usize, cols: usize, half: usize) {
    for c in 0..cols {
        for m in 0..half {
            let mut acc = Complex64::default();
            for r in 0..rows {
                let d = lhs[r * half + m];
                let g = rhs[(r * cols + c) * half + m];
                acc.re += d.re * g.re - d.im * g.im;
                acc.im += d.re * g.im + d.im * g.re;
            }
            out[c * half + m] = acc;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn mac_avx2(out: &mut [Complex64], lhs: &[Complex64], rhs: &[Complex64], rows: usize, cols: usize, half: usize) {
    use std::arch::x86_64::*;
    let po = out.as_mut_ptr() as *mut f64;
    let pl = lhs.as_ptr() as *const f64;
    let pr = rhs.as_ptr() as *const f64;
    let finish = |a: __m256d, b: __m256d| _mm256_addsub_pd(a, _mm256_permute_pd(b, 0b0101));
    let z = _mm256_setzero_pd();
    let mut c = 0;
    while c < cols {
        let c1 = if c + 1 < cols { c + 1 } else { c };
        let mut m = 0;
        while m < half {
            let mut acc = [z; 8];
            for r in 0..rows {
                let d0 = _mm256_loadu_pd(pl.add(2 * (r * half + m)));
                let d1 = _mm256_loadu_pd(pl.add(2 * (r * half + m) + 4));
                let (re0, im0) = (_mm256_movedup_pd(d0), _mm256_permute_pd(d0, 0b1111));
                let (re1, im1) = (_mm256_movedup_pd(d1), _mm256_permute_pd(d1, 0b1111));
                let k0 = pr.add(2 * ((r * cols + c) * half + m));
                let k1 = pr.add(2 * ((r * cols + c1) * half + m));
                let (g00, g01) = (_mm256_loadu_pd(k0), _mm256_loadu_pd(k0.add(4)));
                let (g10, g11) = (_mm256_loadu_pd(k1), _mm256_loadu_pd(k1.add(4)));
                acc[0] = _mm256_fmadd_pd(re0, g00, acc[0]);
                acc[1] = _mm256_fmadd_pd(im0, g00, acc[1]);
                acc[2] = _mm256_fmadd_pd(re1, g01, acc[2]);
                acc[3] = _mm256_fmadd_pd(im1, g01, acc[3]);
                acc[4] = _mm256_fmadd_pd(re0, g10, acc[4]);
                acc[5] = _mm256_fmadd_pd(im0, g10, acc[5]);
                acc[6] = _mm256_fmadd_pd(re1, g11, acc[6]);
                acc[7] = _mm256_fmadd_pd(im1, g11, acc[7]);
            }
            let o0 = po.add(2 * (c * half + m));
            let o1 = po.add(2 * (c1 * half + m));
            _mm256_storeu_pd(o1, finish(acc[4], acc[5]));
            _mm256_storeu_pd(o1.add(4), finish(acc[6], acc[7]));
            _mm256_storeu_pd(o0, finish(acc[0], acc[1]));
            _mm256_storeu_pd(o0.add(4), finish(acc[2], acc[3]));
            m += 4;
        }
        c += 2;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn mac_avx512(out: &mut [Complex64], lhs: &[Complex64], rhs: &[Complex64], rows: usize, cols: usize, half: usize) {
    use std::arch::x86_64::*;
    let po = out.as_mut_ptr() as *mut f64;
    let pl = lhs.as_ptr() as *const f64;
    let pr = rhs.as_ptr() as *const f64;
    let one = _mm512_set1_pd(1.0);
    let finish = |a: __m512d, b: __m512d| _mm512_fmaddsub_pd(a, one, _mm512_permute_pd(b, 0b0101_0101));
    let z = _mm512_setzero_pd();
    let mut c = 0;
    while c < cols {
        let c1 = if c + 1 < cols { c + 1 } else { c };
        let mut m = 0;
        while m < half {
            let mut acc = [z; 8];
            for r in 0..rows {
                let d0 = _mm512_loadu_pd(pl.add(2 * (r * half + m)));
                let d1 = _mm512_loadu_pd(pl.add(2 * (r * half + m) + 8));
                let (re0, im0) = (_mm512_movedup_pd(d0), _mm512_permute_pd(d0, 0xff));
                let (re1, im1) = (_mm512_movedup_pd(d1), _mm512_permute_pd(d1, 0xff));
                let k0 = pr.add(2 * ((r * cols + c) * half + m));
                let k1 = pr.add(2 * ((r * cols + c1) * half + m));
                let (g00, g01) = (_mm512_loadu_pd(k0), _mm512_loadu_pd(k0.add(8)));
                let (g10, g11) = (_mm512_loadu_pd(k1), _mm512_loadu_pd(k1.add(8)));
                acc[0] = _mm512_fmadd_pd(re0, g00, acc[0]);
                acc[1] = _mm512_fmadd_pd(im0, g00, acc[1]);
                acc[2] = _mm512_fmadd_pd(re1, g01, acc[2]);
                acc[3] = _mm512_fmadd_pd(im1, g01, acc[3]);
                acc[4] = _mm512_fmadd_pd(re0, g10, acc[4]);
                acc[5] = _mm512_fmadd_pd(im0, g10, acc[5]);
                acc[6] = _mm512_fmadd_pd(re1, g11, acc[6]);
                acc[7] = _mm512_fmadd_pd(im1, g11, acc[7]);
            }
            let o0 = po.add(2 * (c * half + m));
            let o1 = po.add(2 * (c1 * half + m));
            _mm512_storeu_pd(o1, finish(acc[4], acc[5]));
            _mm512_storeu_pd(o1.add(8), finish(acc[6], acc[7]));
            _mm512_storeu_pd(o0, finish(acc[0], acc[1]));
            _mm512_storeu_pd(o0.add(8), finish(acc[2], acc[3]));
            m += 8;
        }
        c += 2;
    }
}

#[cfg(target_arch = "x86_64")]
fn has_avx512() -> bool {
    use std::sync::OnceLock;
    static FLAG: OnceLock<bool> = OnceLock::new();
    *FLAG.get_or_init(|| is_x86_feature_detected!("avx512f"))
}

/// `out[c·half + m] = Σ_r lhs[r·half + m] · rhs[(r·cols + c)·half + m]`.
pub(crate) fn mac(out: &mut [Complex64], lhs: &[Complex64], rhs: &[Complex64], rows: usize, cols: usize, half: usize) {
    assert!(out.len() >= cols * half && lhs.len() >= rows * half && rhs.len() >= rows * cols * half);
    #[cfg(target_arch = "x86_64")]
    if has_avx512() && half % 8 == 0 {
        // SAFETY: as below.
        unsafe { return mac_avx512(out, lhs, rhs, rows, cols, half) }
    }
    #[cfg(target_arch = "x86_64")]
    if has_avx2() && half % 4 == 0 {
        // SAFETY: features detected; bounds asserted above.
        unsafe { return mac_avx2(out, lhs, rhs, rows, cols, half) }
    }
    mac_generic(out, lhs, rhs, rows, cols, half)
}

dispatch! {
    /// `acc −= d · row` on torus words.
    pub(crate) fn sub_scaled(acc: &mut [u32], row: &[u32], d: u32) {
        for (o, &r) in acc.iter_mut().zip(row) {
            *o = o.wrapping_sub(r.wrapping_mul(d));
        }
    }
}

dispatch! {
    /// `dst = X^e · src − src` in `ℤ[X]/(X^N + 1)` for `e` in `(0, N)`;
    /// `negate` selects `X^(e+N)` instead.
    pub(crate) fn rotate_minus(src: &[u32], e: usize, negate: bool, dst: &mut [u32]) {
        let n = src.len();
        let (head, tail) = dst.split_at_mut(e);
        let flip = if negate { 0u32.wrapping_sub(1) } else { 1 };
        for ((d, &s), &x) in tail.iter_mut().zip(&src[..n - e]).zip(&src[e..]) {
            *d = s.wrapping_mul(flip).wrapping_sub(x);
        }
        for ((d, &s), &x) in head.iter_mut().zip(&src[n - e..]).zip(&src[..e]) {
            *d = s.wrapping_neg().wrapping_mul(flip).wrapping_sub(x);
        }
    }
}

/// Signed gadget digits, level 0 most significant, written level-major
/// into `out` (`levels · N` entries).
pub(crate) fn decompose(poly: &[u32], base_log: u32, levels: usize, out: &mut [i32]) {
    let n = poly.len();
    assert!(out.len() >= levels * n && base_log as usize * levels <= 32);
    #[cfg(target_arch = "x86_64")]
    if has_avx2() && n % 8 == 0 {
        // SAFETY: features detected; lengths asserted above.
        unsafe { return decompose_avx2(poly, base_log, levels, out) }
    }
    let total = base_log as usize * levels;
    let round = if total < 32 { 1u32 << (31 - total) } else { 0 };
    let mask = (1u32 << base_log) - 1;
    let half = 1u32 << (base_log - 1);
    for (j, &x) in poly.iter().enumerate() {
        let mut v = x.wrapping_add(round) >> (32 - total);
        let mut c = 0;
        for lev in (0..levels).rev() {
            let d = (v & mask) + c;
            v >>= base_log;
            c = (d >= half) as u32;
            out[lev * n + j] = d as i32 - ((c << base_log) as i32);
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn decompose_avx2(poly: &[u32], base_log: u32, levels: usize, out: &mut [i32]) {
    use std::arch::x86_64::*;
    let n = poly.len();
    let total = base_log as usize * levels;
    let round = _mm256_set1_epi32(if total < 32 { 1i32 << (31 - total) } else { 0 });
    let mask = _mm256_set1_epi32((1i32 << base_log) - 1);
    let below = _mm256_set1_epi32((1i32 << (base_log - 1)) - 1);
    let one = _mm256_set1_epi32(1);
    let shift = _mm_cvtsi32_si128((32 - total) as i32);
    let step = _mm_cvtsi32_si128(base_log as i32);
    for j in (0..n).step_by(8) {
        let x = _mm256_loadu_si256(poly.as_ptr().add(j) as *const __m256i);
        let mut v = _mm256_srl_epi32(_mm256_add_epi32(x, round), shift);
        let mut c = _mm256_setzero_si256();
        for lev in (0..levels).rev() {
            let d = _mm256_add_epi32(_mm256_and_si256(v, mask), c);
            v = _mm256_srl_epi32(v, step);
            c = _mm256_and_si256(_mm256_cmpgt_epi32(d, below), one);
            let o = _mm256_sub_epi32(d, _mm256_sll_epi32(c, step));
            _mm256_storeu_si256(out.as_mut_ptr().add(lev * n + j) as *mut __m256i, o);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_wrap_matches_reference() {
        for x in [0.0f64, 0.4, 0.6, -0.6, -1.4, 4294967296.7, -4294967297.2, 1.0e15 + 3.0, -7.0e14] {
            let want = (x.round() as i64) as u32;
            assert_eq!(round_wrap(x), want, "{x}");
        }
    }

    #[test]
    fn rotate_minus_matches_definition() {
        let src = [1u32, 2, 3, 4];
        let mut dst = [0u32; 4];
        rotate_minus(&src, 1, false, &mut dst);
        // X·src = (-4, 1, 2, 3)
        assert_eq!(dst, [(-5i32) as u32, (-1i32) as u32, (-1i32) as u32, (-1i32) as u32]);
        rotate_minus(&src, 1, true, &mut dst);
        // X^5·src = (4, -1, -2, -3)
        assert_eq!(dst, [3, (-3i32) as u32, (-5i32) as u32, (-7i32) as u32]);
    }

    #[test]
    fn kernels_match_scalar() {
        let n = 64usize;
        let lo: Vec<i32> = (0..n as i32).map(|i| (i * 37 % 101) - 50).collect();
        let hi: Vec<i32> = (0..n as i32).map(|i| (i * 53 % 97) - 40).collect();
        let wr: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).cos()).collect();
        let wi: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut a = vec![Complex64::default(); n];
        fold_i32(&lo, &hi, &wr, &wi, &mut a);
        let lo_u: Vec<u32> = lo.iter().map(|&x| x as u32).collect();
        let hi_u: Vec<u32> = hi.iter().map(|&x| x as u32).collect();
        let mut b = vec![Complex64::default(); n];
        fold_u32(&lo_u, &hi_u, &wr, &wi, &mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9);
        }
        let spec: Vec<Complex64> = (0..n).map(|i| Complex64::new(3.1e13 * i as f64 - 7e14, 1.7e12 * i as f64)).collect();
        let (mut l1, mut h1) = (vec![5u32; n], vec![9u32; n]);
        unfold_add(&spec, &wr, &wi, &mut l1, &mut h1);
        for j in 0..n {
            let s = spec[j];
            let re = s.re * wr[j] - s.im * wi[j];
            let im = s.re * wi[j] + s.im * wr[j];
            // fused multiply-adds may move a value across a rounding boundary
            assert!((l1[j].wrapping_sub(5u32.wrapping_add(round_wrap(re))) as i32).abs() <= 1);
            assert!((h1[j].wrapping_sub(9u32.wrapping_add(round_wrap(im))) as i32).abs() <= 1);
        }
        let poly: Vec<u32> = (0..n as u32).map(|i| i.wrapping_mul(2654435761)).collect();
        for (base_log, levels) in [(12, 2), (3, 9), (6, 4)] {
            let mut d = vec![0i32; levels * n];
            decompose(&poly, base_log, levels, &mut d);
            let total = base_log * levels as u32;
            for j in 0..n {
                let mut sum = 0u32;
                for lev in 0..levels {
                    let x = d[lev * n + j];
                    assert!(x.abs() <= 1 << (base_log - 1));
                    sum = sum.wrapping_add((x as u32).wrapping_shl(32 - (lev as u32 + 1) * base_log));
                }
                let err = poly[j].wrapping_sub(sum) as i32;
                assert!((err.unsigned_abs() as u64) <= 1u64 << (31 - total.min(31)), "{base_log}x{levels}");
            }
        }
    }

    #[test]
    fn mac_matches_generic() {
        let half = 8;
        let rows = 3;
        for cols in 1..4 {
            let lhs: Vec<Complex64> = (0..rows * half).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
            let rhs: Vec<Complex64> =
                (0..rows * cols * half).map(|i| Complex64::new(0.5 * i as f64, 2.0 - i as f64)).collect();
            let mut a = vec![Complex64::default(); cols * half];
            let mut b = vec![Complex64::default(); cols * half];
            mac(&mut a, &lhs, &rhs, rows, cols, half);
            #[cfg(target_arch = "x86_64")]
            if has_avx2() {
                let mut d = vec![Complex64::default(); cols * half];
                unsafe { mac_avx2(&mut d, &lhs, &rhs, rows, cols, half) };
                assert_eq!(a, d);
            }
            mac_generic(&mut b, &lhs, &rhs, rows, cols, half);
            assert_eq!(a, b, "cols={cols}");
        }
    }
}
