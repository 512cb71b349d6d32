//! Digital up/down conversion between complex baseband and real passband.
//!
//! The DDC front end mirrors a hardware receive chain: a single-pole
//! high-pass on the raw passband samples (cutoff 0.1% of the target baseband
//! rate) strips ADC-style DC offset before mixing, and the windowed-sinc
//! decimation kernel provides the anti-alias/anti-image filtering (>= 80 dB
//! stopband, transition ~6% of the narrower bandwidth).

use std::f64::consts::TAU;

use super::{BasebandSignal, PassbandSignal, SincKernel, C64};
use crate::{Error, Result};

/// Interpolate a complex baseband signal to `out_rate` and mix it up to
/// `f_center`. The output is the real part of the mixed analytic signal, so
/// a unit-power baseband input yields a half-power passband waveform.
pub fn digital_up_convert(
    bb: &BasebandSignal,
    f_center: f64,
    out_rate: f64,
) -> Result<PassbandSignal> {
    let b = bb.sample_rate;
    if !(f_center.is_finite() && f_center > b / 2.0) {
        return Err(Error::param(format!(
            "digital_up_convert: f_center {f_center} must exceed half the baseband rate {b}"
        )));
    }
    if !(out_rate.is_finite() && out_rate >= 2.0 * (f_center + b / 2.0)) {
        return Err(Error::param(format!(
            "digital_up_convert: out_rate {out_rate} below Nyquist for band edge {}",
            f_center + b / 2.0
        )));
    }
    let step = b / out_rate;
    let n_out = (bb.samples.len() as f64 / step).floor() as usize;
    let kernel = SincKernel::for_step(step);
    let interp = kernel.resample_c(&bb.samples, 0.0, step, n_out);
    let w = TAU * f_center / out_rate;
    let samples: Vec<f64> = interp
        .iter()
        .enumerate()
        .map(|(n, &z)| {
            let ph = w * n as f64;
            z.re * ph.cos() - z.im * ph.sin()
        })
        .collect();
    PassbandSignal::new(samples, out_rate)
}

/// Mix a real passband signal down to complex baseband at `bb_rate`.
///
/// No amplitude correction is applied: a unit cosine at exactly `f_center`
/// comes out as a constant 0.5+0j once transients settle (the other mixing
/// image is filtered off). `duc` followed by `ddc` therefore reproduces the
/// original baseband signal scaled by 1/2.
pub fn digital_down_convert(
    pb: &PassbandSignal,
    f_center: f64,
    bb_rate: f64,
) -> Result<BasebandSignal> {
    let fs = pb.sample_rate;
    if !(bb_rate > 0.0 && bb_rate <= fs) {
        return Err(Error::param(format!(
            "digital_down_convert: bb_rate {bb_rate} must be in (0, {fs}]"
        )));
    }
    if !(f_center.is_finite() && f_center >= bb_rate / 2.0) {
        return Err(Error::param(format!(
            "digital_down_convert: f_center {f_center} must be >= half the baseband rate {bb_rate}"
        )));
    }
    if f_center + bb_rate / 2.0 > fs / 2.0 + 1e-9 {
        return Err(Error::param(format!(
            "digital_down_convert: band edge {} exceeds passband Nyquist {}",
            f_center + bb_rate / 2.0,
            fs / 2.0
        )));
    }

    // DC blocker on the raw passband stream.
    let r = 1.0 - TAU * (0.001 * bb_rate) / fs;
    let g = (1.0 + r) / 2.0;
    let mut blocked = Vec::with_capacity(pb.samples.len());
    let mut y_prev = 0.0;
    let mut x_prev = 0.0;
    for &x in &pb.samples {
        let y = g * (x - x_prev) + r * y_prev;
        blocked.push(y);
        x_prev = x;
        y_prev = y;
    }

    // Mix down; the image at -2 f_center is removed by the decimation filter.
    let w = TAU * f_center / fs;
    let mixed: Vec<C64> = blocked
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let ph = w * n as f64;
            C64::new(x * ph.cos(), -x * ph.sin())
        })
        .collect();

    let step = fs / bb_rate;
    let n_out = (mixed.len() as f64 / step).floor() as usize;
    let kernel = SincKernel::for_step(step);
    let samples = kernel.resample_c(&mixed, 0.0, step, n_out);
    BasebandSignal::new(samples, bb_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_bb(f: f64, rate: f64, n: usize) -> BasebandSignal {
        let s: Vec<C64> = (0..n)
            .map(|i| C64::from_polar(1.0, TAU * f * i as f64 / rate))
            .collect();
        BasebandSignal::new(s, rate).unwrap()
    }

    #[test]
    fn pure_carrier_mixes_to_half_dc() {
        // cos(2 pi 100 kHz t) sampled at 1 MHz -> ddc at 100 kHz, 50 kHz rate
        let fs = 1.0e6;
        let n = 200_000;
        let pb = PassbandSignal::new(
            (0..n).map(|i| (TAU * 100e3 * i as f64 / fs).cos()).collect(),
            fs,
        )
        .unwrap();
        let bb = digital_down_convert(&pb, 100e3, 50e3).unwrap();
        let skip = 2000; // DC blocker + kernel transients at 50 kHz rate
        let body = &bb.samples[skip..bb.samples.len() - skip];
        for z in body {
            assert!((z - C64::new(0.5, 0.0)).norm() < 5e-3, "{z}");
        }
    }

    #[test]
    fn out_of_band_tone_is_rejected() {
        let fs = 1.0e6;
        let n = 100_000;
        let pb = PassbandSignal::new(
            (0..n).map(|i| (TAU * 300e3 * i as f64 / fs).cos()).collect(),
            fs,
        )
        .unwrap();
        let bb = digital_down_convert(&pb, 100e3, 50e3).unwrap();
        let skip = 600;
        let body = &bb.samples[skip..bb.samples.len() - skip];
        let p: f64 = body.iter().map(|z| z.norm_sqr()).sum::<f64>() / body.len() as f64;
        // input tone power is 0.5; require <= -60 dB relative
        assert!(p / 0.5 < 1e-6, "leakage {:.2} dB", 10.0 * (p / 0.5).log10());
    }

    #[test]
    fn duc_ddc_round_trip() {
        // band-limited random-ish baseband at 10 kHz through a 100 kHz carrier
        let rate = 10e3;
        let n = 4000;
        let mut s = vec![C64::new(0.0, 0.0); n];
        for (f, a) in [(1.1e3, 1.0), (-2.7e3, 0.6), (3.9e3, 0.3), (0.4e3, 0.8)] {
            for (i, v) in s.iter_mut().enumerate() {
                *v += C64::from_polar(a, TAU * f * i as f64 / rate + 0.7 * a);
            }
        }
        let bb = BasebandSignal::new(s, rate).unwrap();
        let pb = digital_up_convert(&bb, 100e3, 1.0e6).unwrap();
        let back = digital_down_convert(&pb, 100e3, rate).unwrap();

        // compare against 0.5 * original after trimming transients
        let skip = 200;
        let m = back.samples.len().min(bb.samples.len()) - skip;
        let mut err = 0.0;
        let mut sig = 0.0;
        for i in skip..m {
            let want = bb.samples[i] * 0.5;
            err += (back.samples[i] - want).norm_sqr();
            sig += want.norm_sqr();
        }
        let rel_db = 10.0 * (err / sig).log10();
        assert!(rel_db < -40.0, "round-trip error {rel_db:.1} dB");
    }

    #[test]
    fn duc_energy_is_half_baseband_energy() {
        let rate = 10e3;
        let bb = tone_bb(2.3e3, rate, 5000);
        let pb = digital_up_convert(&bb, 60e3, 500e3).unwrap();
        let ratio = pb.energy() / bb.energy();
        assert!((ratio - 0.5).abs() < 0.005, "ratio {ratio}");
    }

    #[test]
    fn dc_baseband_becomes_pure_carrier() {
        // constant 1+0j at 10 kHz -> cosine at 100 kHz, amplitude 1
        let bb = BasebandSignal::new(vec![C64::new(1.0, 0.0); 2000], 10e3).unwrap();
        let pb = digital_up_convert(&bb, 100e3, 1e6).unwrap();
        let skip = 6000; // interpolation edge
        for (n, &s) in pb.samples.iter().enumerate().skip(skip).take(pb.len() - 2 * skip) {
            let expect = (TAU * 100e3 * n as f64 / 1e6).cos();
            assert!((s - expect).abs() < 1e-3, "sample {n}");
        }
    }

    #[test]
    fn offset_tone_lands_at_f_center_plus_offset() {
        // +5 kHz baseband tone over a 100 kHz carrier -> spectral peak at 105 kHz
        let bb = tone_bb(5e3, 20e3, 4000);
        let pb = digital_up_convert(&bb, 100e3, 1e6).unwrap();
        let n = pb.samples.len().next_power_of_two();
        let mut buf: Vec<C64> = pb.samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        buf.resize(n, C64::new(0.0, 0.0));
        crate::signal::fft::fft_in_place(&mut buf);
        let peak = buf[..n / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
            .unwrap()
            .0;
        let f_peak = peak as f64 * 1e6 / n as f64;
        let bin = 1e6 / n as f64;
        assert!((f_peak - 105e3).abs() <= bin, "peak at {f_peak}");
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let bb = BasebandSignal::new(vec![], 10e3).unwrap();
        let pb = digital_up_convert(&bb, 100e3, 1e6).unwrap();
        assert!(pb.is_empty());
    }

    #[test]
    fn conversion_parameter_checks() {
        let bb = tone_bb(1e3, 10e3, 100);
        // carrier not above half the baseband rate
        assert!(digital_up_convert(&bb, 4e3, 1e6).is_err());
        assert!(digital_up_convert(&bb, 5e3, 1e6).is_err());
        // output rate below Nyquist for the upper band edge
        assert!(digital_up_convert(&bb, 100e3, 150e3).is_err());
        let pb = PassbandSignal::new(vec![0.0; 100], 1e6).unwrap();
        assert!(digital_down_convert(&pb, 499e3, 50e3).is_err());
        assert!(digital_down_convert(&pb, 100e3, 2e6).is_err());
    }
}
