//! Sample-domain foundation: signal containers, spectral helpers, frequency
//! conversion, resampling, reference sequences, correlation, and raw I/Q
//! file exchange.
//!
//! Conventions used throughout the crate:
//!
//! * complex baseband samples are `Complex64`, real passband samples are `f64`
//! * sample rates are Hz as `f64`; times are seconds
//! * a baseband signal of rate `r` occupies the band `(-r/2, r/2)` around its
//!   (implicit) center frequency

use num_complex::Complex64;

use crate::{Error, Result};

pub mod convert;
pub mod fft;
mod kernel;
pub mod iqfile;
pub mod resample;
pub mod sequences;
pub mod spectrum;

pub use convert::{digital_down_convert, digital_up_convert};
pub use iqfile::{read_iq, write_iq};
pub use resample::resample;
pub use sequences::{generate_lfm, generate_msequence, msequence_chips, LfmSpec, MSequenceSpec};

pub(crate) use kernel::SincKernel;

pub type C64 = Complex64;

// ---------------------------------------------------------------------------
// containers
// ---------------------------------------------------------------------------

/// Complex baseband signal at a given sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<C64>,
    pub sample_rate: f64,
}

/// Real passband signal at a given sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PassbandSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<C64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::param("sample_rate must be positive"));
        }
        Ok(BasebandSignal {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean squared magnitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Sum of squared magnitudes divided by the sample rate (time integral of
    /// instantaneous power), so signals at different rates compare directly.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.sample_rate
    }
}

impl PassbandSignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::param("sample_rate must be positive"));
        }
        Ok(PassbandSignal {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.sample_rate
    }
}

// ---------------------------------------------------------------------------
// correlation
// ---------------------------------------------------------------------------

/// Full linear cross-correlation of `a` against `b` (complex conjugate on
/// `b`), computed via FFT. Output length is `a.len() + b.len() - 1`.
///
/// Index convention: if `a` is a copy of `b` delayed by `d` samples, the
/// magnitude peak sits at output index `b.len() - 1 + d`; see
/// [`xcorr_peak_lag`].
pub fn cross_correlate(a: &BasebandSignal, b: &BasebandSignal) -> Result<Vec<C64>> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::param(format!(
            "cross_correlate: sample rates differ ({} vs {})",
            a.sample_rate, b.sample_rate
        )));
    }
    if a.samples.is_empty() || b.samples.is_empty() {
        return Err(Error::param("cross_correlate: empty input"));
    }
    Ok(xcorr_slices(&a.samples, &b.samples))
}

/// Correlation core over bare sample slices (no rate semantics).
pub(crate) fn xcorr_slices(a: &[C64], b: &[C64]) -> Vec<C64> {
    // xcorr(a, b) = conv(a, reversed(conj(b)))
    let rev: Vec<C64> = b.iter().rev().map(|s| s.conj()).collect();
    fft::convolve(a, &rev)
}

/// Lag (in samples, possibly negative) of the magnitude peak of a
/// correlation produced by [`cross_correlate`].
pub fn xcorr_peak_lag(corr: &[C64], b_len: usize) -> isize {
    let mut best = 0usize;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, c) in corr.iter().enumerate() {
        let m = c.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    best as isize - (b_len as isize - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_xcorr(a: &[C64], b: &[C64]) -> Vec<C64> {
        // O(N^2) reference: c[i] = sum_j a[j] * conj(b[j - (i - (Nb-1))])
        let n = a.len() + b.len() - 1;
        let shift = b.len() as isize - 1;
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            let lag = i as isize - shift;
            for (j, &aj) in a.iter().enumerate() {
                let k = j as isize - lag;
                if k >= 0 && (k as usize) < b.len() {
                    *o += aj * b[k as usize].conj();
                }
            }
        }
        out
    }

    fn sig(samples: Vec<C64>) -> BasebandSignal {
        BasebandSignal::new(samples, 1000.0).unwrap()
    }

    #[test]
    fn xcorr_matches_direct_reference() {
        let mut seed = 0x1234_5678_u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as f64 / (1u64 << 31) as f64 - 1.0
        };
        for (na, nb) in [(64, 64), (128, 33), (17, 100), (1024, 257)] {
            let a: Vec<C64> = (0..na).map(|_| C64::new(next(), next())).collect();
            let b: Vec<C64> = (0..nb).map(|_| C64::new(next(), next())).collect();
            let fast = xcorr_slices(&a, &b);
            let slow = direct_xcorr(&a, &b);
            assert_eq!(fast.len(), slow.len());
            let scale: f64 = slow.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).norm() <= 1e-9 * scale.max(1.0), "{f} vs {s}");
            }
        }
    }

    #[test]
    fn xcorr_impulse_identity() {
        let a = sig(vec![C64::new(1.0, 0.0)]);
        let c = cross_correlate(&a, &a).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn xcorr_peak_at_delay() {
        let b: Vec<C64> = (0..211)
            .map(|i| C64::new(((i * 37 + 11) % 17) as f64 - 8.0, ((i * 53) % 13) as f64 - 6.0))
            .collect();
        for d in [0usize, 1, 5, 100] {
            let mut a = vec![C64::new(0.0, 0.0); d];
            a.extend_from_slice(&b);
            let c = cross_correlate(&sig(a), &sig(b.clone())).unwrap();
            assert_eq!(xcorr_peak_lag(&c, b.len()), d as isize);
        }
    }

    #[test]
    fn xcorr_conjugate_symmetry() {
        // xcorr(a, b)[i] = conj(xcorr(b, a)[n - 1 - i])
        let a = sig((0..40).map(|i| C64::new(i as f64 * 0.1 - 2.0, (i % 7) as f64)).collect());
        let b = sig((0..25).map(|i| C64::new((i % 5) as f64 - 2.0, i as f64 * 0.2)).collect());
        let ab = cross_correlate(&a, &b).unwrap();
        let ba = cross_correlate(&b, &a).unwrap();
        let n = ab.len();
        for i in 0..n {
            let d = (ab[i] - ba[n - 1 - i].conj()).norm();
            assert!(d < 1e-9, "index {i}: {d}");
        }
    }

    #[test]
    fn xcorr_rejects_empty_and_rate_mismatch() {
        let one = sig(vec![C64::new(1.0, 0.0)]);
        let empty = sig(vec![]);
        assert!(cross_correlate(&empty, &one).is_err());
        assert!(cross_correlate(&one, &empty).is_err());
        let other = BasebandSignal::new(vec![C64::new(1.0, 0.0)], 2000.0).unwrap();
        assert!(cross_correlate(&one, &other).is_err());
    }

    #[test]
    fn power_and_energy() {
        let s = BasebandSignal::new(vec![C64::new(3.0, 4.0); 100], 200.0).unwrap();
        assert!((s.power() - 25.0).abs() < 1e-12);
        assert!((s.energy() - 25.0 * 100.0 / 200.0).abs() < 1e-12);
        assert!((s.duration() - 0.5).abs() < 1e-15);
        assert!(BasebandSignal::new(vec![], 0.0).is_err());
        assert!(PassbandSignal::new(vec![], -1.0).is_err());
    }
}
