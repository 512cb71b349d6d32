//! OFDM receive chain: preamble detection, Doppler estimation and
//! compensation, guard folding, channel estimation, equalization, and soft
//! differential demapping.

use std::f64::consts::PI;

use super::{
    pilot_symbol, score_bit_errors, OfdmConfig, PreambleKind, Role, DIFF_REF, PN_SEGMENT_LEN,
};
use crate::signal::fft::{convolve, fft_in_place};
use crate::signal::{msequence_chips, BasebandSignal, MSequenceSpec, SincKernel, C64};
use crate::{Error, Result};

/// Per-frame receiver verdict. `per_subcarrier_errors` and `ber` stay unset
/// until [`RxDiagnostics::score`] is given the reference bits.
#[derive(Debug, Clone)]
pub struct RxDiagnostics {
    pub detected: bool,
    pub timing_offset: usize,
    pub doppler_scale: f64,
    /// In-band SNR in dB from the power ratio of the detected frame to the
    /// noise-only window preceding it; NaN when no such window exists.
    pub snr_estimate: f64,
    pub per_subcarrier_errors: Option<Vec<u32>>,
    pub ber: f64,
}

impl RxDiagnostics {
    fn not_detected(timing_offset: usize, doppler_scale: f64) -> RxDiagnostics {
        RxDiagnostics {
            detected: false,
            timing_offset,
            doppler_scale,
            snr_estimate: f64::NAN,
            per_subcarrier_errors: None,
            ber: f64::NAN,
        }
    }

    /// Fill the error fields by comparing decoded bits against the reference.
    pub fn score(&mut self, tx_bits: &[u8], rx_bits: &[u8], config: &OfdmConfig) -> Result<()> {
        let map = score_bit_errors(tx_bits, rx_bits, config)?;
        self.ber = map.ber();
        self.per_subcarrier_errors = Some(map.per_subcarrier);
        Ok(())
    }
}

/// Bring the signal to the critical rate (1 sample per subcarrier spacing
/// cycle). Integer multiples of the bandwidth are decimated.
fn to_critical_rate(sig: &BasebandSignal, config: &OfdmConfig) -> Result<Vec<C64>> {
    let ratio = sig.sample_rate / config.bandwidth;
    if (ratio - 1.0).abs() < 1e-9 {
        return Ok(sig.samples.clone());
    }
    let m = ratio.round();
    if m >= 2.0 && (ratio - m).abs() < 1e-6 && !sig.samples.is_empty() {
        let kernel = SincKernel::for_step(m);
        let n_out = ((sig.samples.len() - 1) as f64 / m).floor() as usize + 1;
        return Ok(kernel.resample_c(&sig.samples, 0.0, m, n_out));
    }
    Err(Error::param(format!(
        "sample rate {} is not an integer multiple of the bandwidth {}",
        sig.sample_rate, config.bandwidth
    )))
}

/// Best preamble alignment and its normalized metric in [0, 1].
pub fn detect_preamble(sig: &BasebandSignal, config: &OfdmConfig) -> Result<(usize, f64)> {
    config.validate()?;
    let r = to_critical_rate(sig, config)?;
    Ok(detect_core(&r, config))
}

fn detect_core(r: &[C64], config: &OfdmConfig) -> (usize, f64) {
    match &config.preamble {
        PreambleKind::MseqXcorr(spec) => detect_mseq(r, spec),
        PreambleKind::PnAutocorr => detect_pn(r),
    }
}

/// Normalized matched filter: |corr| over the template and window energies.
fn detect_mseq(r: &[C64], spec: &MSequenceSpec) -> (usize, f64) {
    let chips = match msequence_chips(spec) {
        Ok(c) => c,
        Err(_) => return (0, 0.0),
    };
    let l = chips.len();
    if r.len() < l {
        return (0, 0.0);
    }
    let rev: Vec<C64> = chips.iter().rev().map(|&c| C64::new(c, 0.0)).collect();
    let corr = convolve(r, &rev);
    let mut energy = vec![0.0; r.len() + 1];
    for (i, v) in r.iter().enumerate() {
        energy[i + 1] = energy[i] + v.norm_sqr();
    }
    let mut best = (0usize, 0.0f64);
    for d in 0..=r.len() - l {
        let e = energy[d + l] - energy[d];
        if e <= 0.0 {
            continue;
        }
        let m = corr[d + l - 1].norm() / (e * l as f64).sqrt();
        if m > best.1 {
            best = (d, m);
        }
    }
    best
}

/// Sliding autocorrelation at the segment lag: the repeated PN segment gives
/// a metric near 1 at alignment.
fn detect_pn(r: &[C64]) -> (usize, f64) {
    let l = PN_SEGMENT_LEN;
    if r.len() < 2 * l + 1 {
        return (0, 0.0);
    }
    let mut p = C64::new(0.0, 0.0);
    let mut e = 0.0;
    for i in 0..l {
        p += r[i] * r[i + l].conj();
        e += r[i + l].norm_sqr();
    }
    let mut best = (0usize, 0.0f64);
    for d in 0..=r.len() - 2 * l {
        if e > 1e-300 {
            let m = p.norm() / e;
            if m > best.1 {
                best = (d, m);
            }
        }
        if d + 2 * l < r.len() {
            p += r[d + l] * r[d + 2 * l].conj() - r[d] * r[d + l].conj();
            e += r[d + 2 * l].norm_sqr() - r[d + l].norm_sqr();
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Doppler
// ---------------------------------------------------------------------------

fn estimate_doppler(r: &[C64], offset: usize, config: &OfdmConfig) -> f64 {
    match &config.preamble {
        PreambleKind::MseqXcorr(spec) => estimate_doppler_mseq(r, offset, spec, config),
        PreambleKind::PnAutocorr => estimate_doppler_pn(r, offset, config),
    }
}

/// Correlation magnitude of a scale-hypothesis template near `offset`.
/// The template models both the time dilation and the carrier rotation a
/// resampled passband waveform picks up at baseband.
fn mseq_scale_metric(r: &[C64], offset: usize, chips: &[f64], a: f64, config: &OfdmConfig) -> f64 {
    let kernel = SincKernel::for_step(1.0);
    let n_t = (((chips.len() - 1) as f64) / a).floor() as usize;
    let resampled = kernel.resample_r(chips, 0.0, a, n_t);
    let rho = 2.0 * PI * config.f_center * (a - 1.0) / config.bandwidth;
    let tpl: Vec<C64> = resampled
        .iter()
        .enumerate()
        .map(|(i, &c)| C64::from_polar(c.abs().max(1e-12), rho * i as f64) * c.signum())
        .collect();
    let norm = tpl.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let w = 25usize;
    let lo = offset.saturating_sub(w);
    let hi = (offset + w).min(r.len().saturating_sub(n_t));
    let mut best = 0.0f64;
    for d in lo..=hi.max(lo) {
        if d + n_t > r.len() {
            break;
        }
        let c: C64 = r[d..d + n_t]
            .iter()
            .zip(&tpl)
            .map(|(x, t)| x * t.conj())
            .sum();
        let m = c.norm() / norm.max(1e-300);
        if m > best {
            best = m;
        }
    }
    best
}

/// Matched-filter bank over a coarse then fine scale grid with parabolic
/// refinement of the winning triple.
fn estimate_doppler_mseq(
    r: &[C64],
    offset: usize,
    spec: &MSequenceSpec,
    config: &OfdmConfig,
) -> f64 {
    let chips = match msequence_chips(spec) {
        Ok(c) => c,
        Err(_) => return 1.0,
    };
    let coarse_step = 1e-4;
    let mut best = (1.0f64, 0.0f64);
    for k in -20i32..=20 {
        let a = 1.0 + k as f64 * coarse_step;
        let m = mseq_scale_metric(r, offset, &chips, a, config);
        if m > best.1 {
            best = (a, m);
        }
    }
    let fine_step = 1e-5;
    let mut fine: Vec<f64> = Vec::with_capacity(25);
    let mut best_j = 0usize;
    let mut best_m = 0.0f64;
    for (j, k) in (-12i32..=12).enumerate() {
        let a = best.0 + k as f64 * fine_step;
        let m = mseq_scale_metric(r, offset, &chips, a, config);
        if m > best_m {
            best_m = m;
            best_j = j;
        }
        fine.push(m);
    }
    let center = best.0 + (best_j as i32 - 12) as f64 * fine_step;
    if best_j == 0 || best_j + 1 >= fine.len() {
        return center;
    }
    let (ml, m0, mr) = (fine[best_j - 1], fine[best_j], fine[best_j + 1]);
    let denom = ml - 2.0 * m0 + mr;
    if denom.abs() < 1e-300 {
        return center;
    }
    let delta = (0.5 * (ml - mr) / denom).clamp(-1.0, 1.0);
    center + delta * fine_step
}

/// Two-stage PN estimate: segment-peak spacing resolves the coarse scale, the
/// autocorrelation phase refines it. The phase term wraps every
/// `fs / (f_c * L)` in scale, so the spacing estimate picks the branch.
fn estimate_doppler_pn(r: &[C64], offset: usize, config: &OfdmConfig) -> f64 {
    let l = PN_SEGMENT_LEN;
    let seg = match MSequenceSpec::with_degree(10).and_then(|s| msequence_chips(&s)) {
        Ok(c) => c,
        Err(_) => return 1.0,
    };
    // incoherent sub-segment matched filter, immune to carrier rotation
    let metric = |d: usize| -> f64 {
        if d + l > r.len() {
            return 0.0;
        }
        let mut acc = 0.0;
        let sub = 64;
        let mut s = 0;
        while s < l {
            let e = (s + sub).min(l);
            let c: C64 = (s..e).map(|i| r[d + i] * seg[i]).sum();
            acc += c.norm();
            s = e;
        }
        acc
    };
    let refine = |p: usize| -> f64 {
        if p == 0 {
            return p as f64;
        }
        let (ml, m0, mr) = (metric(p - 1), metric(p), metric(p + 1));
        let denom = ml - 2.0 * m0 + mr;
        if denom.abs() < 1e-300 {
            return p as f64;
        }
        p as f64 + (0.5 * (ml - mr) / denom).clamp(-1.0, 1.0)
    };
    let argmax = |lo: usize, hi: usize| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for d in lo..=hi {
            let m = metric(d);
            if best.map(|b| m > b.1).unwrap_or(true) {
                best = Some((d, m));
            }
        }
        best.map(|b| b.0)
    };

    // fine scale from the autocorrelation phase at the detected alignment
    let wrap = config.bandwidth / (config.f_center * l as f64);
    let delta = if offset + 2 * l <= r.len() {
        let p: C64 = (0..l).map(|i| r[offset + i] * r[offset + l + i].conj()).sum();
        -p.arg() * wrap / (2.0 * PI)
    } else {
        0.0
    };

    // coarse scale from the spacing of the two segment peaks
    let w = 25usize;
    let p1 = argmax(offset.saturating_sub(w), offset + w);
    let a_spacing = p1.and_then(|p1| {
        let lo2 = (p1 + l).saturating_sub(60);
        let hi2 = p1 + l + 60;
        argmax(lo2, hi2).map(|p2| {
            let spacing = refine(p2) - refine(p1);
            l as f64 / spacing
        })
    });

    match a_spacing {
        Some(a_sp) if a_sp.is_finite() && (a_sp - 1.0 - delta).abs() <= 1.5 * wrap => {
            let m = ((a_sp - 1.0 - delta) / wrap).round();
            1.0 + delta + m * wrap
        }
        _ => 1.0 + delta,
    }
}

/// Undo a Doppler dilation: remove the carrier rotation, then resample back
/// to the nominal rate.
fn compensate_doppler(r: &[C64], a: f64, config: &OfdmConfig) -> Vec<C64> {
    if (a - 1.0).abs() < 2e-6 || r.is_empty() {
        return r.to_vec();
    }
    let rho = 2.0 * PI * config.f_center * (a - 1.0) / config.bandwidth;
    let derot: Vec<C64> = r
        .iter()
        .enumerate()
        .map(|(n, v)| v * C64::from_polar(1.0, -rho * n as f64))
        .collect();
    let kernel = SincKernel::for_step(1.0 / a);
    let n_out = (((r.len() - 1) as f64) * a).floor() as usize + 1;
    kernel.resample_c(&derot, 0.0, 1.0 / a, n_out)
}

// ---------------------------------------------------------------------------
// channel estimation and equalization
// ---------------------------------------------------------------------------

/// Least-squares gains at the pilots, linearly interpolated (magnitude and
/// unwrapped phase) across the rest of the band and extrapolated past the
/// outermost pilots. Null bins carry a zero marker.
pub fn estimate_channel_pilots(block_symbols: &[C64], config: &OfdmConfig) -> Result<Vec<C64>> {
    let n = config.n_subcarriers;
    if block_symbols.len() != n {
        return Err(Error::param(format!(
            "block has {} symbols for {} subcarriers",
            block_symbols.len(),
            n
        )));
    }
    let pos: Vec<usize> = (0..n).filter(|&k| config.map.role(k) == Role::Pilot).collect();
    if pos.len() < 2 {
        return Err(Error::param("channel estimation needs at least 2 pilots"));
    }
    let hp: Vec<C64> = pos.iter().map(|&k| block_symbols[k] / pilot_symbol(k)).collect();
    let mags: Vec<f64> = hp.iter().map(|h| h.norm()).collect();
    let mut phases = Vec::with_capacity(hp.len());
    let mut last = hp[0].arg();
    phases.push(last);
    for h in &hp[1..] {
        let mut d = h.arg() - last;
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        last += d;
        phases.push(last);
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        if config.map.role(k) == Role::Null {
            continue;
        }
        let j = match pos.binary_search(&k) {
            Ok(i) => i.min(pos.len() - 2),
            Err(i) => i.saturating_sub(1).min(pos.len() - 2),
        };
        let t = (k as f64 - pos[j] as f64) / (pos[j + 1] - pos[j]) as f64;
        let m = (mags[j] + (mags[j + 1] - mags[j]) * t).max(0.0);
        let p = phases[j] * (1.0 - t) + phases[j + 1] * t;
        out[k] = C64::from_polar(m, p);
    }
    Ok(out)
}

/// ZF equalization with an erasure mark on bins whose estimated gain sits
/// more than 30 dB below the median.
fn equalize(block_symbols: &[C64], config: &OfdmConfig) -> Result<(Vec<C64>, Vec<bool>)> {
    let h = estimate_channel_pilots(block_symbols, config)?;
    let mut mags: Vec<f64> = (0..config.n_subcarriers)
        .filter(|&k| config.map.role(k) != Role::Null)
        .map(|k| h[k].norm())
        .collect();
    mags.sort_by(f64::total_cmp);
    let median = mags[mags.len() / 2];
    let floor = median * 10f64.powf(-1.5);
    let n = config.n_subcarriers;
    let mut eq = vec![C64::new(0.0, 0.0); n];
    let mut erased = vec![false; n];
    for k in 0..n {
        if config.map.role(k) == Role::Null {
            continue;
        }
        if h[k].norm() < floor {
            erased[k] = true;
        } else {
            eq[k] = block_symbols[k] / h[k];
        }
    }
    Ok((eq, erased))
}

// ---------------------------------------------------------------------------
// full receive chain
// ---------------------------------------------------------------------------

/// Soft-output receive: returns one soft value per payload bit (positive
/// means bit 0; zero marks an erasure) plus diagnostics.
pub fn ofdm_receive_soft(
    sig: &BasebandSignal,
    config: &OfdmConfig,
) -> Result<(Vec<f64>, RxDiagnostics)> {
    config.validate()?;
    let r = to_critical_rate(sig, config)?;
    let (offset, metric) = detect_core(&r, config);
    if metric < config.detection_threshold {
        return Ok((Vec::new(), RxDiagnostics::not_detected(offset, 1.0)));
    }
    let a = estimate_doppler(&r, offset, config);
    if (a - 1.0).abs() > config.doppler_window {
        return Ok((Vec::new(), RxDiagnostics::not_detected(offset, a)));
    }

    let (buf, start_offset) = if (a - 1.0).abs() >= 2e-6 {
        let w = compensate_doppler(&r, a, config);
        let (o2, m2) = detect_core(&w, config);
        let o2 = if m2 >= 0.8 * config.detection_threshold {
            o2
        } else {
            (offset as f64 * a).round() as usize
        };
        (w, o2)
    } else {
        (r, offset)
    };

    let n = config.n_subcarriers;
    let g = config.guard_samples();
    let start = start_offset + config.preamble_len();
    let use_pilots = config.map.pilot_count() >= 2;
    let mut soft = Vec::with_capacity(config.frame_payload_bits());
    for b in 0..config.blocks_per_frame {
        let lo = start + b * (n + g);
        let mut y = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            if let Some(v) = buf.get(lo + i) {
                y[i] = *v;
            }
        }
        // fold the zero-padded tail back onto the block head
        for i in 0..g {
            if let Some(v) = buf.get(lo + n + i) {
                y[i] += *v;
            }
        }
        fft_in_place(&mut y);
        let syms: Vec<C64> = (0..n).map(|k| y[(k + n / 2) % n]).collect();
        let (eq, erased) = if use_pilots {
            equalize(&syms, config)?
        } else {
            (syms, vec![false; n])
        };
        demap_block(&eq, &erased, config, &mut soft);
    }

    let frame_end = (start + config.blocks_per_frame * (n + g)).min(buf.len());
    let snr = estimate_snr(&buf, start_offset, frame_end);
    Ok((
        soft,
        RxDiagnostics {
            detected: true,
            timing_offset: offset,
            doppler_scale: a,
            snr_estimate: snr,
            per_subcarrier_errors: None,
            ber: f64::NAN,
        },
    ))
}

/// Hard-decision receive. Erasures fall to bit 0.
pub fn ofdm_receive(sig: &BasebandSignal, config: &OfdmConfig) -> Result<(Vec<u8>, RxDiagnostics)> {
    let (soft, diag) = ofdm_receive_soft(sig, config)?;
    let bits = soft.iter().map(|&s| if s < 0.0 { 1u8 } else { 0u8 }).collect();
    Ok((bits, diag))
}

/// Differential soft demap of one equalized block, appending to `soft`.
fn demap_block(eq: &[C64], erased: &[bool], config: &OfdmConfig, soft: &mut Vec<f64>) {
    let mut prev = DIFF_REF;
    let mut prev_erased = false;
    for k in 0..config.n_subcarriers {
        match config.map.role(k) {
            Role::Null => {
                prev = DIFF_REF;
                prev_erased = false;
            }
            Role::Pilot => {
                prev = eq[k];
                prev_erased = erased[k];
            }
            Role::Data => {
                let z = eq[k] * prev.conj();
                let bad = erased[k] || prev_erased;
                match config.modulation {
                    super::Modulation::Dbpsk => soft.push(if bad { 0.0 } else { z.re }),
                    super::Modulation::Dqpsk => {
                        soft.push(if bad { 0.0 } else { z.re });
                        soft.push(if bad { 0.0 } else { z.im });
                    }
                }
                prev = eq[k];
                prev_erased = erased[k];
            }
        }
    }
}

/// Frame power over preceding noise-only power, in dB.
fn estimate_snr(buf: &[C64], start_offset: usize, frame_end: usize) -> f64 {
    let noise_end = start_offset.saturating_sub(8);
    if noise_end < 64 || frame_end <= start_offset {
        return f64::NAN;
    }
    let p_noise =
        buf[..noise_end].iter().map(|v| v.norm_sqr()).sum::<f64>() / noise_end as f64;
    let span = &buf[start_offset..frame_end];
    let p_frame = span.iter().map(|v| v.norm_sqr()).sum::<f64>() / span.len() as f64;
    if p_noise <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * ((p_frame - p_noise).max(p_noise * 1e-9) / p_noise).log10()
}
