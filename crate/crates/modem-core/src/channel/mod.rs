//! Simulated underwater acoustic channel: tapped multipath with fractional
//! delays, bulk Doppler dilation, flat noise plus tonal interferers, optional
//! transducer response shaping and Thorp absorption, and the virtual-time
//! half-duplex medium the link layer runs over.
//!
//! Everything is deterministic: the noise realization is a pure function of
//! `rng_seed` and the output length, so identical models and inputs produce
//! bit-identical outputs.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::signal::fft::{convolve, convolve_real_taps, fft_in_place, ifft_in_place, next_pow2};
use crate::signal::spectrum::welch_real;
use crate::signal::{BasebandSignal, PassbandSignal, SincKernel, C64};
use crate::{Error, Result};

mod medium;

pub use medium::{half_duplex_link, EndpointId, LogEntry, LogKind, Medium, MediumEvent, TxClass};

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

/// Tapped-delay-line channel description plus the impairments applied around
/// it. `taps` are `(delay seconds, complex gain)`; the first tap's delay is
/// the propagation latency seen by the medium.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub taps: Vec<(f64, C64)>,
    pub doppler_scale: f64,
    /// One-sided flat noise density, W/Hz, at the receiver input.
    pub noise_psd: f64,
    /// Narrowband interferers as (frequency Hz, average power W).
    pub interferers: Vec<(f64, f64)>,
    /// Bulk attenuation applied to the transmitted signal.
    pub attenuation_db: f64,
    /// Optional transducer shaping as (frequency Hz, gain dB) knots,
    /// interpolated linearly and applied zero-phase. Identity when absent.
    pub response_curve: Option<Vec<(f64, f64)>>,
    /// Range for Thorp frequency-dependent absorption; 0 disables it.
    pub thorp_range_km: f64,
    /// Half-duplex receive blackout after an endpoint's own transmission.
    pub turnaround: f64,
    pub rng_seed: u64,
}

impl ChannelModel {
    /// Unit channel: one zero-delay unit tap, no Doppler, no noise.
    pub fn identity() -> ChannelModel {
        ChannelModel {
            taps: vec![(0.0, C64::new(1.0, 0.0))],
            doppler_scale: 1.0,
            noise_psd: 0.0,
            interferers: Vec::new(),
            attenuation_db: 0.0,
            response_curve: None,
            thorp_range_km: 0.0,
            turnaround: 3e-3,
            rng_seed: 0,
        }
    }

    /// Default harbor-like model: a direct path and three reflections with
    /// millisecond-scale spread. The noise floor is calibrated so that a
    /// unit-amplitude chirp link attenuated by 22 dB operates with a small
    /// but visible per-symbol error rate (the regime the packet-size sweep
    /// explores).
    pub fn marina() -> ChannelModel {
        let db = |d: f64| 10f64.powf(d / 20.0);
        ChannelModel {
            taps: vec![
                (0.0, C64::new(1.0, 0.0)),
                (1.5e-3, C64::new(db(-6.0), 0.0)),
                (3.1e-3, C64::new(db(-9.0), 0.0)),
                (5.0e-3, C64::new(db(-12.0), 0.0)),
            ],
            doppler_scale: 1.0,
            noise_psd: 2e-9,
            interferers: Vec::new(),
            attenuation_db: 0.0,
            response_curve: None,
            thorp_range_km: 0.0,
            turnaround: 3e-3,
            rng_seed: 0x0cea_0cea,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::param("channel needs at least one tap"));
        }
        for &(d, g) in &self.taps {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::param("tap delays must be finite and >= 0"));
            }
            if !g.re.is_finite() || !g.im.is_finite() {
                return Err(Error::param("tap gains must be finite"));
            }
        }
        if !(self.doppler_scale > 0.0) || !self.doppler_scale.is_finite() {
            return Err(Error::param("doppler_scale must be positive"));
        }
        if !(self.noise_psd >= 0.0) {
            return Err(Error::param("noise_psd must be >= 0"));
        }
        for &(f, p) in &self.interferers {
            if !f.is_finite() || !(p >= 0.0) {
                return Err(Error::param("interferers need finite frequency and power >= 0"));
            }
        }
        if let Some(curve) = &self.response_curve {
            if curve.len() < 2 {
                return Err(Error::param("response_curve needs at least two points"));
            }
            if !curve.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(Error::param("response_curve frequencies must be ascending"));
            }
        }
        if !(self.thorp_range_km >= 0.0) {
            return Err(Error::param("thorp_range_km must be >= 0"));
        }
        if !(self.turnaround >= 0.0) {
            return Err(Error::param("turnaround must be >= 0"));
        }
        Ok(())
    }

    pub fn max_delay(&self) -> f64 {
        self.taps.iter().map(|t| t.0).fold(0.0, f64::max)
    }

    /// Propagation latency: delay of the earliest tap.
    pub fn latency(&self) -> f64 {
        self.taps.iter().map(|t| t.0).fold(f64::INFINITY, f64::min)
    }

    fn is_identity_taps(&self) -> bool {
        self.taps.len() == 1 && self.taps[0].0 == 0.0 && self.taps[0].1 == C64::new(1.0, 0.0)
    }

    fn has_shaping(&self) -> bool {
        self.response_curve.is_some() || self.thorp_range_km > 0.0
    }

    fn all_real_gains(&self) -> bool {
        self.taps.iter().all(|t| t.1.im == 0.0)
    }

    /// Net shaping gain in dB at a (positive) passband frequency.
    fn shaping_gain_db(&self, f: f64) -> f64 {
        let mut g = 0.0;
        if let Some(curve) = &self.response_curve {
            g += interp_clamped(curve, f);
        }
        if self.thorp_range_km > 0.0 {
            g -= thorp_db_per_km(f) * self.thorp_range_km;
        }
        g
    }

    pub fn from_toml_str(text: &str) -> Result<ChannelModel> {
        let file: ModelFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("channel config: {e}")))?;
        file.into_model()
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<ChannelModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        ChannelModel::from_toml_str(&text)
    }
}

/// Thorp's absorption formula, dB per km, frequency in Hz.
fn thorp_db_per_km(f_hz: f64) -> f64 {
    let f2 = (f_hz / 1000.0) * (f_hz / 1000.0); // kHz squared
    0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 3e-3
}

fn interp_clamped(knots: &[(f64, f64)], x: f64) -> f64 {
    if x <= knots[0].0 {
        return knots[0].1;
    }
    if x >= knots[knots.len() - 1].0 {
        return knots[knots.len() - 1].1;
    }
    let i = knots.partition_point(|k| k.0 <= x) - 1;
    let (x0, y0) = knots[i];
    let (x1, y1) = knots[i + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

// ---------------------------------------------------------------------------
// config file schema
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    taps: Vec<TapEntry>,
    #[serde(default = "default_scale")]
    doppler_scale: f64,
    #[serde(default)]
    noise_psd: f64,
    #[serde(default)]
    attenuation_db: f64,
    #[serde(default)]
    interferers: Vec<InterfererEntry>,
    #[serde(default)]
    response_curve: Vec<CurveEntry>,
    #[serde(default)]
    thorp_range_km: f64,
    #[serde(default = "default_turnaround")]
    turnaround: f64,
    #[serde(default)]
    rng_seed: u64,
}

fn default_scale() -> f64 {
    1.0
}

fn default_turnaround() -> f64 {
    3e-3
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TapEntry {
    delay: f64,
    gain_db: f64,
    #[serde(default)]
    phase_deg: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterfererEntry {
    frequency: f64,
    power: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveEntry {
    frequency: f64,
    gain_db: f64,
}

impl ModelFile {
    fn into_model(self) -> Result<ChannelModel> {
        if self.schema_version != 1 {
            return Err(Error::Config(format!(
                "unsupported channel schema_version {}",
                self.schema_version
            )));
        }
        let taps = self
            .taps
            .iter()
            .map(|t| {
                let gain = 10f64.powf(t.gain_db / 20.0);
                (t.delay, C64::from_polar(gain, t.phase_deg.to_radians()))
            })
            .collect();
        let model = ChannelModel {
            taps,
            doppler_scale: self.doppler_scale,
            noise_psd: self.noise_psd,
            interferers: self.interferers.iter().map(|i| (i.frequency, i.power)).collect(),
            attenuation_db: self.attenuation_db,
            response_curve: if self.response_curve.is_empty() {
                None
            } else {
                Some(self.response_curve.iter().map(|c| (c.frequency, c.gain_db)).collect())
            },
            thorp_range_km: self.thorp_range_km,
            turnaround: self.turnaround,
            rng_seed: self.rng_seed,
        };
        model.validate()?;
        Ok(model)
    }
}

// ---------------------------------------------------------------------------
// FIR construction
// ---------------------------------------------------------------------------

/// Composite multipath FIR for real tap gains at rate `fs`. Returns the taps
/// and the lead (group shift) to trim from the convolution output. `None`
/// when the tap set is the identity.
fn multipath_fir_real(taps: &[(f64, C64)], fs: f64) -> Option<(Vec<f64>, usize)> {
    if taps.len() == 1 && taps[0].0 == 0.0 && taps[0].1 == C64::new(1.0, 0.0) {
        return None;
    }
    let kernel = SincKernel::for_step(1.0);
    let w = kernel.half_width();
    let max_delay = taps.iter().map(|t| t.0).fold(0.0, f64::max);
    let d = (max_delay * fs).ceil() as usize;
    let mut h = vec![0.0; d + 2 * w + 1];
    place_taps(&mut h, taps, fs, w as f64, &kernel, |t| t.1.re);
    Some((h, w))
}

/// Baseband multipath FIR: each tap's gain picks up the carrier phase
/// `exp(-j 2 pi f_center tau)` in addition to its own complex gain.
fn multipath_fir_baseband(
    taps: &[(f64, C64)],
    f_center: f64,
    fs: f64,
) -> Option<(Vec<C64>, usize)> {
    if taps.len() == 1 && taps[0].0 == 0.0 && taps[0].1 == C64::new(1.0, 0.0) {
        return None;
    }
    let kernel = SincKernel::for_step(1.0);
    let w = kernel.half_width();
    let max_delay = taps.iter().map(|t| t.0).fold(0.0, f64::max);
    let d = (max_delay * fs).ceil() as usize;
    let mut h = vec![C64::new(0.0, 0.0); d + 2 * w + 1];
    let wf = w as f64;
    for &(delay, gain) in taps {
        let rotated = gain * C64::from_polar(1.0, -2.0 * PI * f_center * delay);
        let center = delay * fs + wf;
        let lo = ((center - wf).ceil().max(0.0)) as usize;
        let hi = ((center + wf).floor() as usize).min(h.len() - 1);
        for n in lo..=hi {
            h[n] += rotated * kernel.eval_at(n as f64 - center);
        }
    }
    Some((h, w))
}

fn place_taps(
    h: &mut [f64],
    taps: &[(f64, C64)],
    fs: f64,
    lead: f64,
    kernel: &SincKernel,
    gain_of: impl Fn(&(f64, C64)) -> f64,
) {
    let w = lead;
    for tap in taps {
        let g = gain_of(tap);
        let center = tap.0 * fs + w;
        let lo = ((center - w).ceil().max(0.0)) as usize;
        let hi = ((center + w).floor() as usize).min(h.len() - 1);
        for n in lo..=hi {
            h[n] += g * kernel.eval_at(n as f64 - center);
        }
    }
}

/// Zero-phase FIR realizing the model's shaping gain at passband rate `fs`.
/// `offset` shifts the evaluation frequency (used to re-center the curve for
/// baseband application).
fn shaping_fir(model: &ChannelModel, fs: f64, offset: f64, complex_out: bool) -> (Vec<C64>, usize) {
    const GRID: usize = 4096;
    const HALF: usize = 512;
    let mut spec = vec![C64::new(0.0, 0.0); GRID];
    for (k, s) in spec.iter_mut().enumerate() {
        let f = if k <= GRID / 2 {
            k as f64 * fs / GRID as f64
        } else {
            (k as f64 - GRID as f64) * fs / GRID as f64
        };
        let g = model.shaping_gain_db(if complex_out { f + offset } else { f.abs() });
        *s = C64::new(10f64.powf(g / 20.0), 0.0);
    }
    ifft_in_place(&mut spec);
    // center the response: taps -HALF..=HALF with a Kaiser window
    let beta = 8.0;
    let denom = bessel_i0(beta);
    let mut h = Vec::with_capacity(2 * HALF + 1);
    for i in 0..=2 * HALF {
        let n = i as isize - HALF as isize;
        let idx = n.rem_euclid(GRID as isize) as usize;
        let x = n as f64 / HALF as f64;
        let w = bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()) / denom;
        h.push(spec[idx] * w);
    }
    (h, HALF)
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

// ---------------------------------------------------------------------------
// propagation
// ---------------------------------------------------------------------------

/// Number of output samples for the deterministic stage: input (after
/// Doppler) plus the full multipath spread.
fn spread_samples(model: &ChannelModel, fs: f64) -> usize {
    (model.max_delay() * fs).ceil() as usize
}

fn doppler_len(n: usize, scale: f64) -> usize {
    if scale == 1.0 || n == 0 {
        n
    } else {
        ((n as f64 - 1.0) / scale).floor() as usize + 1
    }
}

/// Deterministic (noiseless) part of `propagate`; shared with the SNR
/// accounting so both see exactly the same signal path.
fn propagate_det(sig: &PassbandSignal, model: &ChannelModel) -> Vec<f64> {
    let fs = sig.sample_rate;
    let mut x = if model.doppler_scale != 1.0 {
        let kernel = SincKernel::for_step(model.doppler_scale);
        let n_out = doppler_len(sig.samples.len(), model.doppler_scale);
        kernel.resample_r(&sig.samples, 0.0, model.doppler_scale, n_out)
    } else {
        sig.samples.clone()
    };

    let n_keep = x.len() + spread_samples(model, fs);
    if !model.is_identity_taps() || model.has_shaping() {
        if model.all_real_gains() {
            // compose multipath and shaping into one real FIR
            let mp = multipath_fir_real(&model.taps, fs);
            let sh = if model.has_shaping() {
                let (h, lead) = shaping_fir(model, fs, 0.0, false);
                Some((h.iter().map(|c| c.re).collect::<Vec<f64>>(), lead))
            } else {
                None
            };
            let (fir, lead) = match (mp, sh) {
                (Some((a, la)), Some((b, lb))) => {
                    let ac: Vec<C64> = a.iter().map(|&v| C64::new(v, 0.0)).collect();
                    let composed = convolve_real_taps(&ac, &b);
                    (composed.iter().map(|c| c.re).collect(), la + lb)
                }
                (Some(ab), None) => ab,
                (None, Some(ab)) => ab,
                (None, None) => unreachable!(),
            };
            let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
            let y = convolve_real_taps(&xc, &fir);
            x = y
                .iter()
                .skip(lead)
                .take(n_keep)
                .map(|c| c.re)
                .collect();
        } else {
            x = passband_frequency_domain(&x, model, fs, n_keep);
        }
        x.resize(n_keep, 0.0);
    }

    if model.attenuation_db != 0.0 {
        let scale = 10f64.powf(-model.attenuation_db / 20.0);
        for v in &mut x {
            *v *= scale;
        }
    }
    x
}

/// Conjugate-symmetric spectral multiply covering complex tap gains (and any
/// shaping) on a real passband signal.
fn passband_frequency_domain(x: &[f64], model: &ChannelModel, fs: f64, n_keep: usize) -> Vec<f64> {
    let l = next_pow2(n_keep + 8192);
    let mut buf = vec![C64::new(0.0, 0.0); l];
    for (b, &v) in buf.iter_mut().zip(x) {
        *b = C64::new(v, 0.0);
    }
    fft_in_place(&mut buf);
    let half = l / 2;
    for k in 0..=half {
        let f = k as f64 * fs / l as f64;
        let mut h = C64::new(0.0, 0.0);
        for &(delay, gain) in &model.taps {
            h += gain * C64::from_polar(1.0, -2.0 * PI * f * delay);
        }
        if model.has_shaping() {
            h *= 10f64.powf(model.shaping_gain_db(f) / 20.0);
        }
        if k == 0 || k == half {
            h = C64::new(h.re, 0.0); // DC and Nyquist must stay real
        }
        buf[k] *= h;
        if k > 0 && k < half {
            buf[l - k] *= h.conj();
        }
    }
    ifft_in_place(&mut buf);
    buf.iter().take(n_keep).map(|c| c.re).collect()
}

/// Push a passband signal through the channel. The output covers the input
/// plus the multipath spread; the same model applied twice gives bit-identical
/// results.
pub fn propagate(sig: &PassbandSignal, model: &ChannelModel) -> Result<PassbandSignal> {
    model.validate()?;
    if sig.samples.is_empty() {
        return Ok(sig.clone());
    }
    let mut y = propagate_det(sig, model);
    add_noise_real(&mut y, model, sig.sample_rate);
    PassbandSignal::new(y, sig.sample_rate)
}

fn add_noise_real(y: &mut [f64], model: &ChannelModel, fs: f64) {
    let mut rng = ChaCha12Rng::seed_from_u64(model.rng_seed);
    let phases: Vec<f64> = model
        .interferers
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    if model.noise_psd > 0.0 {
        let sigma = (model.noise_psd * fs / 2.0).sqrt();
        for v in y.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v += sigma * n;
        }
    }
    for (&(f, p), &phi) in model.interferers.iter().zip(&phases) {
        if p <= 0.0 {
            continue;
        }
        let a = (2.0 * p).sqrt();
        for (n, v) in y.iter_mut().enumerate() {
            *v += a * (2.0 * PI * f * n as f64 / fs + phi).cos();
        }
    }
}

/// Complex-baseband equivalent of [`propagate`] for a signal centered at
/// `f_center`. Taps pick up their carrier phases, Doppler becomes a resample
/// plus carrier rotation, and the noise level matches what the passband path
/// delivers in-band (per-quadrature variance `noise_psd * sample_rate`).
pub fn propagate_baseband(
    sig: &BasebandSignal,
    f_center: f64,
    model: &ChannelModel,
) -> Result<BasebandSignal> {
    model.validate()?;
    if sig.samples.is_empty() {
        return Ok(sig.clone());
    }
    let fs = sig.sample_rate;
    let a = model.doppler_scale;
    let mut x = if a != 1.0 {
        let kernel = SincKernel::for_step(a);
        let n_out = doppler_len(sig.samples.len(), a);
        let mut warped = kernel.resample_c(&sig.samples, 0.0, a, n_out);
        // passband dilation x(at) shows up at baseband as x(at) rotated by
        // the carrier offset f_center*(a-1)
        let rot = 2.0 * PI * f_center * (a - 1.0) / fs;
        for (n, v) in warped.iter_mut().enumerate() {
            *v *= C64::from_polar(1.0, rot * n as f64);
        }
        warped
    } else {
        sig.samples.clone()
    };

    let n_keep = x.len() + spread_samples(model, fs);
    if let Some((fir, lead)) = multipath_fir_baseband(&model.taps, f_center, fs) {
        let y = convolve(&x, &fir);
        x = y.into_iter().skip(lead).take(n_keep).collect();
        x.resize(n_keep, C64::new(0.0, 0.0));
    }
    if model.has_shaping() {
        x = baseband_shaping(&x, model, f_center, fs);
    }

    if model.attenuation_db != 0.0 {
        let scale = 10f64.powf(-model.attenuation_db / 20.0);
        for v in &mut x {
            *v *= scale;
        }
    }

    add_noise_baseband(&mut x, model, f_center, fs);
    BasebandSignal::new(x, fs)
}

fn baseband_shaping(x: &[C64], model: &ChannelModel, f_center: f64, fs: f64) -> Vec<C64> {
    let l = next_pow2(x.len() + 4096);
    let mut buf = vec![C64::new(0.0, 0.0); l];
    buf[..x.len()].copy_from_slice(x);
    fft_in_place(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let f = if k <= l / 2 {
            k as f64 * fs / l as f64
        } else {
            (k as f64 - l as f64) * fs / l as f64
        };
        *b *= 10f64.powf(model.shaping_gain_db(f + f_center) / 20.0);
    }
    ifft_in_place(&mut buf);
    buf.truncate(x.len());
    buf
}

fn add_noise_baseband(y: &mut [C64], model: &ChannelModel, f_center: f64, fs: f64) {
    let mut rng = ChaCha12Rng::seed_from_u64(model.rng_seed);
    let phases: Vec<f64> = model
        .interferers
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    if model.noise_psd > 0.0 {
        // per-quadrature variance N0*fs keeps the in-band SNR equal to the
        // passband path's (which halves signal power via Re[])
        let sigma = (model.noise_psd * fs).sqrt();
        for v in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += C64::new(sigma * re, sigma * im);
        }
    }
    for (&(f, p), &phi) in model.interferers.iter().zip(&phases) {
        if p <= 0.0 {
            continue;
        }
        let df = f - f_center;
        if df.abs() > fs / 2.0 {
            continue; // outside the represented band
        }
        let a = (2.0 * p).sqrt();
        for (n, v) in y.iter_mut().enumerate() {
            *v += C64::from_polar(a, 2.0 * PI * df * n as f64 / fs + phi);
        }
    }
}

// ---------------------------------------------------------------------------
// SNR accounting
// ---------------------------------------------------------------------------

/// Ground-truth receiver SNR: in-band signal power after taps and attenuation
/// over in-band noise power. The band is the transmit signal's 99% power
/// containment interval (debiased). Zero noise returns +infinity.
pub fn snr_at_receiver(model: &ChannelModel, tx: &PassbandSignal) -> Result<f64> {
    model.validate()?;
    if tx.samples.is_empty() {
        return Err(Error::param("snr_at_receiver: empty signal"));
    }
    let y = propagate_det(tx, model);
    let energy: f64 = y.iter().map(|v| v * v).sum();
    let p_signal = energy / tx.samples.len() as f64;

    let psd = welch_real(&tx.samples, tx.sample_rate, 4096);
    let (lo, hi) = psd.containment_band(0.99);
    let bw = ((hi - lo) / 0.99).max(psd.df());

    let mut p_noise = model.noise_psd * bw;
    for &(f, p) in &model.interferers {
        if f >= lo && f <= hi {
            p_noise += p;
        }
    }
    if p_noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (p_signal / p_noise).log10())
}

// ---------------------------------------------------------------------------
// time-varying channels
// ---------------------------------------------------------------------------

/// Piecewise-linear per-tap gain offsets over a recording's duration. Offsets
/// are in dB relative to the model's static tap gains.
#[derive(Debug, Clone)]
pub struct TimeVaryingProfile {
    trajectories: Vec<Vec<(f64, f64)>>,
    duration: f64,
}

impl TimeVaryingProfile {
    pub fn new(trajectories: Vec<Vec<(f64, f64)>>, duration: f64) -> Result<TimeVaryingProfile> {
        if !(duration > 0.0) {
            return Err(Error::param("profile duration must be positive"));
        }
        if trajectories.is_empty() {
            return Err(Error::param("profile needs at least one trajectory"));
        }
        for traj in &trajectories {
            if traj.is_empty() {
                return Err(Error::param("every trajectory needs at least one knot"));
            }
            if !traj.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(Error::param("trajectory times must be ascending"));
            }
        }
        Ok(TimeVaryingProfile {
            trajectories,
            duration,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn tap_count(&self) -> usize {
        self.trajectories.len()
    }

    /// Gain offset for one tap at time `t`, clamped to the trajectory ends.
    pub fn gain_db_at(&self, tap: usize, t: f64) -> f64 {
        interp_clamped(&self.trajectories[tap], t)
    }

    /// Load from CSV with header `time_s,tap_index,gain_db`.
    pub fn from_csv_str(text: &str) -> Result<TimeVaryingProfile> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty CIR trace".into()))?;
        if header.trim() != "time_s,tap_index,gain_db" {
            return Err(Error::Config(format!(
                "CIR trace header must be `time_s,tap_index,gain_db`, got `{}`",
                header.trim()
            )));
        }
        let mut rows: Vec<(f64, usize, f64)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Config(format!("CIR trace row {}: missing field", i + 2)))?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("CIR trace row {}: {e}", i + 2)))
            };
            let t = parse(parts.next())?;
            let tap = parse(parts.next())? as usize;
            let g = parse(parts.next())?;
            rows.push((t, tap, g));
        }
        let n_taps = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let duration = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let mut trajectories = vec![Vec::new(); n_taps];
        for (t, tap, g) in rows {
            trajectories[tap].push((t, g));
        }
        for traj in &mut trajectories {
            traj.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        }
        TimeVaryingProfile::new(trajectories, duration.max(f64::MIN_POSITIVE))
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<TimeVaryingProfile> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        TimeVaryingProfile::from_csv_str(&text)
    }
}

/// Like [`propagate`], but tap gains follow the profile's trajectories.
/// Processes in 25 ms blocks with overlap-add; gains are held per block.
pub fn propagate_time_varying(
    sig: &PassbandSignal,
    model: &ChannelModel,
    profile: &TimeVaryingProfile,
) -> Result<PassbandSignal> {
    model.validate()?;
    if profile.tap_count() != model.taps.len() {
        return Err(Error::param(format!(
            "profile has {} trajectories for {} taps",
            profile.tap_count(),
            model.taps.len()
        )));
    }
    if !model.all_real_gains() {
        return Err(Error::param("time-varying propagation needs real tap gains"));
    }
    if model.doppler_scale != 1.0 {
        return Err(Error::param("time-varying propagation does not model Doppler"));
    }
    if sig.samples.is_empty() {
        return Ok(sig.clone());
    }

    let fs = sig.sample_rate;
    let n = sig.samples.len();
    let n_keep = n + spread_samples(model, fs);
    let block = ((0.025 * fs) as usize).max(256);
    let kernel = SincKernel::for_step(1.0);
    let w = kernel.half_width();
    let d = spread_samples(model, fs);

    let mut acc = vec![0.0; n_keep + 2 * w + 1];
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let t_mid = (start + end) as f64 / 2.0 / fs;
        let taps: Vec<(f64, C64)> = model
            .taps
            .iter()
            .enumerate()
            .map(|(i, &(delay, g))| {
                let off = 10f64.powf(profile.gain_db_at(i, t_mid) / 20.0);
                (delay, g * off)
            })
            .collect();
        let mut fir = vec![0.0; d + 2 * w + 1];
        place_taps(&mut fir, &taps, fs, w as f64, &kernel, |t| t.1.re);
        let seg: Vec<C64> = sig.samples[start..end].iter().map(|&v| C64::new(v, 0.0)).collect();
        let y = convolve_real_taps(&seg, &fir);
        for (i, v) in y.iter().enumerate() {
            let idx = start + i;
            if idx < acc.len() {
                acc[idx] += v.re;
            }
        }
        start = end;
    }
    let mut out: Vec<f64> = acc[w..w + n_keep].to_vec();

    if model.has_shaping() {
        let (h, lead) = shaping_fir(model, fs, 0.0, false);
        let hr: Vec<f64> = h.iter().map(|c| c.re).collect();
        let oc: Vec<C64> = out.iter().map(|&v| C64::new(v, 0.0)).collect();
        let y = convolve_real_taps(&oc, &hr);
        out = y.iter().skip(lead).take(n_keep).map(|c| c.re).collect();
    }
    if model.attenuation_db != 0.0 {
        let scale = 10f64.powf(-model.attenuation_db / 20.0);
        for v in &mut out {
            *v *= scale;
        }
    }
    add_noise_real(&mut out, model, fs);
    PassbandSignal::new(out, fs)
}
