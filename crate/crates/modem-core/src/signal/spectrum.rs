//! Segment-averaged periodogram (Welch) estimation, shared by the SNR
//! accounting in the channel simulator and the frequency-response probe.

use std::f64::consts::PI;

use super::fft::fft_in_place;
use super::C64;

/// Power spectral density on a uniform frequency grid. `power` is a density
/// (per Hz): integrating `power * df` over the grid recovers signal power.
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df()
    }

    /// Smallest frequency interval containing `frac` of total power,
    /// trimming (1-frac)/2 off each edge of the cumulative distribution.
    pub fn containment_band(&self, frac: f64) -> (f64, f64) {
        assert!(frac > 0.0 && frac <= 1.0);
        let total: f64 = self.power.iter().sum();
        if total <= 0.0 {
            return (self.freqs[0], self.freqs[self.freqs.len() - 1]);
        }
        let tail = (1.0 - frac) / 2.0 * total;
        let mut acc = 0.0;
        let mut lo = 0;
        for (i, p) in self.power.iter().enumerate() {
            acc += p;
            if acc >= tail {
                lo = i;
                break;
            }
        }
        acc = 0.0;
        let mut hi = self.power.len() - 1;
        for (i, p) in self.power.iter().enumerate().rev() {
            acc += p;
            if acc >= tail {
                hi = i;
                break;
            }
        }
        (self.freqs[lo], self.freqs[hi.max(lo)])
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn welch_accumulate(segments: Vec<Vec<C64>>, fs: f64, window: &[f64]) -> Vec<f64> {
    let seg_len = window.len();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (segments.len() as f64 * fs * win_power);
    let mut acc = vec![0.0; seg_len];
    for mut seg in segments {
        for (s, w) in seg.iter_mut().zip(window) {
            *s *= *w;
        }
        fft_in_place(&mut seg);
        for (a, s) in acc.iter_mut().zip(&seg) {
            *a += s.norm_sqr();
        }
    }
    for a in &mut acc {
        *a *= scale;
    }
    acc
}

fn split_segments<T: Copy>(x: &[T], seg_len: usize) -> (usize, Vec<&[T]>) {
    let seg_len = seg_len.min(x.len()).max(2);
    let hop = (seg_len / 2).max(1);
    let mut segs = Vec::new();
    let mut start = 0;
    while start + seg_len <= x.len() {
        segs.push(&x[start..start + seg_len]);
        start += hop;
    }
    if segs.is_empty() {
        segs.push(x);
    }
    (seg_len, segs)
}

/// Welch PSD of a complex signal; two-sided grid from -fs/2 to fs/2,
/// ascending (fftshift order).
pub fn welch_complex(x: &[C64], fs: f64, seg_len: usize) -> Psd {
    assert!(!x.is_empty());
    let (seg_len, segs) = split_segments(x, seg_len);
    let window = hann(seg_len);
    let raw = welch_accumulate(segs.iter().map(|s| s.to_vec()).collect(), fs, &window);
    let half = seg_len / 2;
    let df = fs / seg_len as f64;
    let mut freqs = Vec::with_capacity(seg_len);
    let mut power = Vec::with_capacity(seg_len);
    for i in 0..seg_len {
        let k = (i + half) % seg_len; // negative freqs first
        freqs.push((i as f64 - half as f64) * df);
        power.push(raw[k]);
    }
    Psd { freqs, power }
}

/// Welch PSD of a real signal; one-sided grid from 0 to fs/2 with doubled
/// interior bins so the density integrates to the signal power.
pub fn welch_real(x: &[f64], fs: f64, seg_len: usize) -> Psd {
    assert!(!x.is_empty());
    let (seg_len, segs) = split_segments(x, seg_len);
    let window = hann(seg_len);
    let complex_segs = segs
        .iter()
        .map(|s| s.iter().map(|&v| C64::new(v, 0.0)).collect())
        .collect();
    let raw = welch_accumulate(complex_segs, fs, &window);
    let half = seg_len / 2;
    let df = fs / seg_len as f64;
    let mut freqs = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let fold = if k == 0 || (seg_len % 2 == 0 && k == half) {
            1.0
        } else {
            2.0
        };
        freqs.push(k as f64 * df);
        power.push(raw[k] * fold);
    }
    Psd { freqs, power }
}
