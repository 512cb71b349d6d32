//! Reference sequences: maximal-length LFSR sequences and linear FM sweeps.

use std::f64::consts::TAU;

use super::{BasebandSignal, C64};
use crate::{Error, Result};

/// Known primitive polynomials per degree, as bitmasks with bit `i` set for
/// the x^i term (both the x^degree and constant bits are always set). The
/// first entry of each row is the default for that degree. Every entry is
/// verified by the state-cycle test below.
const PRIMITIVE_POLYS: [(u32, &[u32]); 15] = [
    (2, &[0x7]),
    (3, &[0xB, 0xD]),
    (4, &[0x13, 0x19]),
    (5, &[0x25, 0x29]),
    (6, &[0x43, 0x61]),
    (7, &[0x89, 0x83, 0xC1]),
    (8, &[0x11D, 0x171]),
    (9, &[0x221, 0x211]),
    (10, &[0x409, 0x481]),
    (11, &[0x805, 0xA01]),
    (12, &[0x1053, 0x1941]),
    (13, &[0x201B, 0x3601]),
    (14, &[0x4443, 0x6111]),
    (15, &[0x8003, 0xC001]),
    (16, &[0x1100B, 0x1A011]),
];

/// Spec for a maximal-length sequence generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MSequenceSpec {
    pub degree: u32,
    /// Full polynomial mask; see [`PRIMITIVE_POLYS`] layout.
    pub taps: u32,
    /// Initial register state; the low `degree` bits must be nonzero.
    pub seed: u32,
}

impl MSequenceSpec {
    /// Default generator: degree 9, x^9 + x^5 + 1 (511 chips).
    pub const DEFAULT: MSequenceSpec = MSequenceSpec {
        degree: 9,
        taps: 0x221,
        seed: 1,
    };

    /// Table default for a degree in 2..=16, seed 1.
    pub fn with_degree(degree: u32) -> Result<Self> {
        let row = PRIMITIVE_POLYS
            .iter()
            .find(|(d, _)| *d == degree)
            .ok_or_else(|| Error::param(format!("m-sequence: no table default for degree {degree}")))?;
        Ok(MSequenceSpec {
            degree,
            taps: row.1[0],
            seed: 1,
        })
    }

    pub fn new(degree: u32, taps: u32, seed: u32) -> Result<Self> {
        if !(2..=31).contains(&degree) {
            return Err(Error::param(format!(
                "m-sequence degree {degree} outside 2..=31"
            )));
        }
        if taps & 1 == 0 || (taps >> degree) != 1 {
            return Err(Error::param(format!(
                "m-sequence taps {taps:#x} must have the constant and x^{degree} bits set and nothing higher"
            )));
        }
        // Degrees covered by the table must match a known primitive
        // polynomial; higher degrees are accepted structurally.
        if let Some(row) = PRIMITIVE_POLYS.iter().find(|(d, _)| *d == degree) {
            if !row.1.contains(&taps) {
                return Err(Error::param(format!(
                    "taps {taps:#x} not a known primitive polynomial of degree {degree}"
                )));
            }
        }
        Ok(MSequenceSpec { degree, taps, seed })
    }

    pub fn period(&self) -> usize {
        (1usize << self.degree) - 1
    }
}

/// One period (2^degree - 1 bits) of the m-sequence as 0/1 values.
/// Any nonzero seed yields the same cycle up to rotation.
pub fn generate_msequence(spec: &MSequenceSpec) -> Result<Vec<u8>> {
    let d = spec.degree;
    if !(2..=31).contains(&d) || (spec.taps >> d) != 1 {
        return Err(Error::param("m-sequence spec invalid; construct via MSequenceSpec::new"));
    }
    let reg_mask = (1u32 << d) - 1;
    let mut reg = spec.seed & reg_mask;
    if reg == 0 {
        return Err(Error::param(
            "m-sequence seed must be nonzero in the low `degree` bits",
        ));
    }
    // Fibonacci form: feedback mask bit (j-1) carries the coefficient of
    // x^(degree-j); the constant term maps to the newest register bit.
    let mut fb_mask = 0u32;
    for i in 0..d {
        if (spec.taps >> i) & 1 == 1 {
            fb_mask |= 1 << (d - 1 - i);
        }
    }
    let n = spec.period();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(((reg >> (d - 1)) & 1) as u8);
        let fb = (reg & fb_mask).count_ones() & 1;
        reg = ((reg << 1) | fb) & reg_mask;
    }
    Ok(out)
}

/// One period mapped to bipolar chips: bit 0 -> +1.0, bit 1 -> -1.0.
pub fn msequence_chips(spec: &MSequenceSpec) -> Result<Vec<f64>> {
    Ok(generate_msequence(spec)?
        .into_iter()
        .map(|b| if b == 0 { 1.0 } else { -1.0 })
        .collect())
}

/// Linear FM sweep description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfmSpec {
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
    pub amplitude: f64,
}

impl LfmSpec {
    pub fn new(f_start: f64, f_end: f64, duration: f64) -> Self {
        LfmSpec {
            f_start,
            f_end,
            duration,
            amplitude: 1.0,
        }
    }
}

/// Complex baseband linear FM sweep; instantaneous frequency runs from
/// `f_start` to `f_end` over `duration` with a constant envelope.
pub fn generate_lfm(spec: &LfmSpec, sample_rate: f64) -> Result<BasebandSignal> {
    if !(spec.duration > 0.0 && spec.duration.is_finite()) {
        return Err(Error::param("generate_lfm: duration must be positive"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::param("generate_lfm: sample_rate must be positive"));
    }
    let nyq = sample_rate / 2.0;
    if spec.f_start.abs() > nyq || spec.f_end.abs() > nyq {
        return Err(Error::param(format!(
            "generate_lfm: sweep endpoints ({}, {}) exceed Nyquist {nyq}",
            spec.f_start, spec.f_end
        )));
    }
    let n = (spec.duration * sample_rate).round() as usize;
    let k = (spec.f_end - spec.f_start) / spec.duration;
    let samples: Vec<C64> = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            C64::from_polar(spec.amplitude, TAU * (spec.f_start * t + 0.5 * k * t * t))
        })
        .collect();
    BasebandSignal::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::cross_correlate;

    /// Direct LFSR state-cycle check: every table entry must run through all
    /// 2^d - 1 nonzero states before repeating.
    #[test]
    fn table_polynomials_are_primitive() {
        for (degree, polys) in PRIMITIVE_POLYS {
            for &taps in polys {
                let d = degree;
                let reg_mask = (1u32 << d) - 1;
                let mut fb_mask = 0u32;
                for i in 0..d {
                    if (taps >> i) & 1 == 1 {
                        fb_mask |= 1 << (d - 1 - i);
                    }
                }
                let period = (1usize << d) - 1;
                let mut reg = 1u32;
                let mut steps = 0usize;
                loop {
                    let fb = (reg & fb_mask).count_ones() & 1;
                    reg = ((reg << 1) | fb) & reg_mask;
                    steps += 1;
                    if reg == 1 {
                        break;
                    }
                    assert!(steps <= period, "degree {degree} taps {taps:#x} cycles early");
                }
                assert_eq!(steps, period, "degree {degree} taps {taps:#x}");
            }
        }
    }

    #[test]
    fn degree_3_sequence() {
        let spec = MSequenceSpec::new(3, 0xB, 0b001).unwrap();
        let seq = generate_msequence(&spec).unwrap();
        assert_eq!(seq.len(), 7);
        assert_eq!(seq.iter().filter(|&&b| b == 1).count(), 4);
        assert_eq!(seq.iter().filter(|&&b| b == 0).count(), 3);
    }

    #[test]
    fn balance_property() {
        // ones exceed zeros by exactly one in each period
        for degree in [5u32, 9, 10, 12] {
            let mut spec = MSequenceSpec::with_degree(degree).unwrap();
            spec.seed = 0x15;
            let seq = generate_msequence(&spec).unwrap();
            let ones = seq.iter().filter(|&&b| b == 1).count();
            assert_eq!(2 * ones, seq.len() + 1, "degree {degree}");
        }
    }

    #[test]
    fn default_sequence_has_two_valued_autocorrelation() {
        let chips = msequence_chips(&MSequenceSpec::DEFAULT).unwrap();
        let n = chips.len();
        assert_eq!(n, 511);
        for lag in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += chips[i] * chips[(i + lag) % n];
            }
            if lag == 0 {
                assert!((acc - n as f64).abs() < 1e-9);
            } else {
                assert!((acc + 1.0).abs() < 1e-9, "lag {lag}: {acc}");
            }
        }
    }

    #[test]
    fn seed_rotates_but_does_not_change_cycle() {
        let a = generate_msequence(&MSequenceSpec::DEFAULT).unwrap();
        let b = generate_msequence(&MSequenceSpec::new(9, 0x221, 0x1f3).unwrap()).unwrap();
        let doubled: Vec<u8> = a.iter().chain(a.iter()).copied().collect();
        let found = (0..a.len()).any(|r| doubled[r..r + a.len()] == b[..]);
        assert!(found, "seeded sequence is not a rotation of the base cycle");
    }

    #[test]
    fn msequence_rejects_bad_specs() {
        assert!(MSequenceSpec::new(1, 0x3, 1).is_err());
        assert!(MSequenceSpec::new(32, 0x3, 1).is_err());
        // even constant term
        assert!(MSequenceSpec::new(3, 0xA, 1).is_err());
        // not primitive (x^4 + x^3 + x^2 + x + 1 divides x^5 - 1)
        assert!(MSequenceSpec::new(4, 0x1F, 1).is_err());
        // zero seed
        let mut spec = MSequenceSpec::DEFAULT;
        spec.seed = 0;
        assert!(generate_msequence(&spec).is_err());
        spec.seed = 1 << 9;
        assert!(generate_msequence(&spec).is_err());
    }

    #[test]
    fn lfm_endpoints_and_slope() {
        // instantaneous frequency from the phase difference ridge
        let rate = 1e6;
        let sweep = generate_lfm(&LfmSpec::new(-100e3, 100e3, 10e-3), rate).unwrap();
        assert_eq!(sweep.samples.len(), 10_000);
        let f_inst =
            |i: usize| (sweep.samples[i + 1] * sweep.samples[i].conj()).arg() / TAU * rate;
        // sample the ridge at several points; expected slope 20 MHz/s
        let k = 200e3 / 10e-3;
        for i in [100usize, 2500, 5000, 9000] {
            let t = (i as f64 + 0.5) / rate;
            let expect = -100e3 + k * t;
            assert!((f_inst(i) - expect).abs() < 200.0, "sample {i}");
        }
        let slope = (f_inst(9000) - f_inst(100)) / (8900.0 / rate);
        assert!((slope / k - 1.0).abs() < 1e-3, "slope {slope}");
    }

    #[test]
    fn lfm_degenerate_sweep_is_dc() {
        let sweep = generate_lfm(
            &LfmSpec {
                f_start: 0.0,
                f_end: 0.0,
                duration: 1e-3,
                amplitude: 0.7,
            },
            100e3,
        )
        .unwrap();
        for z in &sweep.samples {
            assert!((z - C64::new(0.7, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn lfm_constant_envelope_and_length() {
        let sweep = generate_lfm(&LfmSpec::new(10e3, 40e3, 2.5e-3), 200e3).unwrap();
        assert_eq!(sweep.samples.len(), 500);
        for z in &sweep.samples {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lfm_matched_filter_compresses_to_time_bandwidth_product() {
        let rate = 250e3;
        let spec = LfmSpec::new(-50e3, 50e3, 10e-3); // TB = 1000
        let sweep = generate_lfm(&spec, rate).unwrap();
        let corr = cross_correlate(&sweep, &sweep).unwrap();
        let n = sweep.samples.len();
        let peak_idx = corr
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak_idx, n - 1, "peak must sit at zero lag");
        let peak = corr[peak_idx].norm();
        // -3 dB main-lobe width ~ rate/bandwidth samples; compression ratio
        // = duration / lobe width ~ TB
        let half = peak / 2f64.sqrt();
        let mut lo = peak_idx;
        while lo > 0 && corr[lo - 1].norm() > half {
            lo -= 1;
        }
        let mut hi = peak_idx;
        while hi + 1 < corr.len() && corr[hi + 1].norm() > half {
            hi += 1;
        }
        let width = (hi - lo + 1) as f64;
        let compression = n as f64 / width;
        let tb = 100e3 * 10e-3;
        assert!(
            compression > 0.5 * tb && compression < 2.0 * tb,
            "compression {compression}, TB {tb}"
        );
    }

    #[test]
    fn lfm_rejects_out_of_band_sweep() {
        assert!(generate_lfm(&LfmSpec::new(0.0, 120e3, 1e-3), 200e3).is_err());
        assert!(generate_lfm(&LfmSpec::new(-120e3, 0.0, 1e-3), 200e3).is_err());
        assert!(generate_lfm(&LfmSpec::new(0.0, 10e3, 0.0), 200e3).is_err());
    }
}
