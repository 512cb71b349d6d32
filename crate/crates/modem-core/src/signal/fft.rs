//! Thin wrappers over rustfft: cached plans, forward/inverse transforms and
//! FFT-based linear convolution.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::C64;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

#[derive(Default)]
struct PlanCache {
    planner: Option<FftPlanner<f64>>,
    fwd: HashMap<usize, Arc<dyn Fft<f64>>>,
    inv: HashMap<usize, Arc<dyn Fft<f64>>>,
}

fn with_plan(len: usize, inverse: bool, buf: &mut [C64]) {
    PLANS.with(|c| {
        let mut c = c.borrow_mut();
        let planner = c.planner.get_or_insert_with(FftPlanner::new);
        let plan = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let map = if inverse { &mut c.inv } else { &mut c.fwd };
        let plan = map.entry(len).or_insert(plan).clone();
        drop(c);
        plan.process(buf);
    });
}

/// In-place forward FFT (no normalization).
pub fn fft_in_place(buf: &mut [C64]) {
    let n = buf.len();
    if n > 1 {
        with_plan(n, false, buf);
    }
}

/// In-place inverse FFT, normalized by 1/N.
pub fn ifft_in_place(buf: &mut [C64]) {
    let n = buf.len();
    if n > 1 {
        with_plan(n, true, buf);
        let s = 1.0 / n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Linear convolution via zero-padded FFT; output length a+b-1.
pub fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = next_pow2(out_len);
    let mut fa = vec![C64::new(0.0, 0.0); n];
    let mut fb = vec![C64::new(0.0, 0.0); n];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fft_in_place(&mut fa);
    fft_in_place(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft_in_place(&mut fa);
    fa.truncate(out_len);
    fa
}

/// Convolve a complex signal with a real FIR.
pub fn convolve_real_taps(a: &[C64], taps: &[f64]) -> Vec<C64> {
    let tc: Vec<C64> = taps.iter().map(|&t| C64::new(t, 0.0)).collect();
    convolve(a, &tc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolve_matches_direct() {
        let a: Vec<C64> = (0..13).map(|i| C64::new(i as f64, -(i as f64) * 0.5)).collect();
        let b: Vec<C64> = (0..7).map(|i| C64::new(1.0 - i as f64 * 0.3, 0.25 * i as f64)).collect();
        let fast = convolve(&a, &b);
        let mut slow = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                slow[i + j] += ai * bj;
            }
        }
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s).norm() < 1e-10);
        }
    }

    #[test]
    fn fft_round_trip() {
        let x: Vec<C64> = (0..64).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let mut y = x.clone();
        fft_in_place(&mut y);
        ifft_in_place(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn fft_tone_lands_on_expected_bin() {
        // independent check of bin convention: e^{j2pi k n / N} -> bin k
        let n = 256;
        let k = 19;
        let mut x: Vec<C64> = (0..n)
            .map(|i| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * i as f64 / n as f64))
            .collect();
        fft_in_place(&mut x);
        let peak = x
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, k);
        assert!((x[k].norm() - n as f64).abs() < 1e-9);
    }
}
