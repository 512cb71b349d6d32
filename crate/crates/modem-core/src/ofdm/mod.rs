//! ZP-OFDM transceiver. Transmit side: differential bit mapping onto data
//! subcarriers, IFFT, per-block gain normalization, preamble plus zero-padded
//! guard framing. Receive side (in [`rx`]): preamble detection, Doppler
//! estimation and compensation, guard folding, FFT, pilot channel estimation,
//! ZF equalization, and soft differential demapping.
//!
//! Subcarrier index `k` runs 0..N in fftshift order: `k = 0` is the lowest
//! frequency (-bandwidth/2), `k = N/2` is the band center. FFT bin for
//! subcarrier `k` is `(k + N/2) mod N`. Waveforms are critically sampled
//! (rate = bandwidth).

mod rx;
#[cfg(test)]
mod tests;

pub use rx::{
    detect_preamble, estimate_channel_pilots, ofdm_receive, ofdm_receive_soft, RxDiagnostics,
};

use std::f64::consts::FRAC_1_SQRT_2;

use crate::fec::splitmix64;
use crate::signal::fft::ifft_in_place;
use crate::signal::{msequence_chips, generate_msequence, BasebandSignal, MSequenceSpec, C64};
use crate::{Error, Result};

/// Differential reference pinned at the start of each contiguous non-null
/// subcarrier run; the first data symbol of a run is decodable against this
/// constant once the block is equalized (or over a flat channel).
pub const DIFF_REF: C64 = C64::new(1.0, 0.0);

/// PN preamble segment: degree-10 m-sequence, 1023 chips, sent twice.
const PN_SEGMENT_LEN: usize = 1023;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Dbpsk,
    Dqpsk,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Dbpsk => 1,
            Modulation::Dqpsk => 2,
        }
    }

    /// Bipolar map: bit 0 -> +1 on the axis it controls.
    fn map(self, bits: &[u8]) -> C64 {
        match self {
            Modulation::Dbpsk => C64::new(1.0 - 2.0 * (bits[0] & 1) as f64, 0.0),
            Modulation::Dqpsk => C64::new(
                (1.0 - 2.0 * (bits[0] & 1) as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * (bits[1] & 1) as f64) * FRAC_1_SQRT_2,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Data,
    Pilot,
    Null,
}

/// Per-subcarrier role assignment in ascending (fftshift) index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubcarrierMap {
    roles: Vec<Role>,
}

impl SubcarrierMap {
    pub fn all_data(n: usize) -> SubcarrierMap {
        SubcarrierMap { roles: vec![Role::Data; n] }
    }

    /// Pilots every `pilot_stride` bins, `edge_nulls / 2` null bins at each
    /// band edge, data elsewhere.
    pub fn pilot_layout(n: usize, pilot_stride: usize, edge_nulls: usize) -> SubcarrierMap {
        let half = edge_nulls / 2;
        let roles = (0..n)
            .map(|k| {
                if k < half || k >= n - (edge_nulls - half) {
                    Role::Null
                } else if pilot_stride > 0 && k % pilot_stride == 0 {
                    Role::Pilot
                } else {
                    Role::Data
                }
            })
            .collect();
        SubcarrierMap { roles }
    }

    /// 8064 data + 127 pilot + 1 null: every 64th bin is a pilot except the
    /// center bin, which stays null.
    pub fn high_rate() -> SubcarrierMap {
        let n = 8192;
        let roles = (0..n)
            .map(|k| {
                if k == n / 2 {
                    Role::Null
                } else if k % 64 == 0 {
                    Role::Pilot
                } else {
                    Role::Data
                }
            })
            .collect();
        SubcarrierMap { roles }
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn role(&self, k: usize) -> Role {
        self.roles[k]
    }

    pub fn set_role(&mut self, k: usize, role: Role) {
        self.roles[k] = role;
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn data_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Data).count()
    }

    pub fn pilot_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Pilot).count()
    }

    pub fn null_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Null).count()
    }

    /// Data subcarrier indices in ascending order.
    pub fn data_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == Role::Data)
            .map(|(k, _)| k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreambleKind {
    /// Two identical 1023-chip PN segments; sliding autocorrelation at the
    /// segment lag detects the repeat.
    PnAutocorr,
    /// Single m-sequence, matched-filter detection.
    MseqXcorr(MSequenceSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    pub n_subcarriers: usize,
    pub bandwidth: f64,
    pub f_center: f64,
    pub guard_time: f64,
    pub modulation: Modulation,
    pub map: SubcarrierMap,
    pub blocks_per_frame: usize,
    pub preamble: PreambleKind,
    /// Target per-block RMS amplitude of the time-domain waveform.
    pub tx_gain: f64,
    /// Normalized detection metric threshold.
    pub detection_threshold: f64,
    /// Accepted packets must have |doppler_scale - 1| within this window.
    pub doppler_window: f64,
    /// Silence between frames; enters the rate arithmetic only.
    pub interframe_gap: f64,
}

impl OfdmConfig {
    /// 208.33 kHz band at 150 kHz center, DQPSK over 8064 data subcarriers,
    /// 4 blocks per frame, 10 ms guards, 511-chip matched-filter preamble.
    pub fn high_rate() -> OfdmConfig {
        OfdmConfig {
            n_subcarriers: 8192,
            bandwidth: 208_333.0,
            f_center: 150_000.0,
            guard_time: 10e-3,
            modulation: Modulation::Dqpsk,
            map: SubcarrierMap::high_rate(),
            blocks_per_frame: 4,
            preamble: PreambleKind::MseqXcorr(MSequenceSpec::DEFAULT),
            tx_gain: 1.0,
            detection_threshold: 0.6,
            doppler_window: 0.01,
            interframe_gap: 10e-3,
        }
    }

    fn marina(bandwidth: f64, guard_time: f64, modulation: Modulation) -> OfdmConfig {
        OfdmConfig {
            n_subcarriers: 8192,
            bandwidth,
            f_center: 100_000.0,
            guard_time,
            modulation,
            map: SubcarrierMap::all_data(8192),
            blocks_per_frame: 1,
            preamble: PreambleKind::PnAutocorr,
            tx_gain: 1.0,
            detection_threshold: 0.6,
            doppler_window: 0.01,
            interframe_gap: 10e-3,
        }
    }

    /// Short-range 50 kHz DBPSK configuration (28.8 kbit/s block rate; the
    /// guard is fitted to that figure, not measured).
    pub fn marina_50k_dbpsk() -> OfdmConfig {
        OfdmConfig::marina(50_000.0, 120.6e-3, Modulation::Dbpsk)
    }

    /// Short-range 100 kHz DBPSK configuration (57.6 kbit/s block rate).
    pub fn marina_100k_dbpsk() -> OfdmConfig {
        OfdmConfig::marina(100_000.0, 60.3e-3, Modulation::Dbpsk)
    }

    /// Short-range 100 kHz DQPSK configuration (115.2 kbit/s block rate).
    pub fn marina_100k_dqpsk() -> OfdmConfig {
        OfdmConfig::marina(100_000.0, 60.3e-3, Modulation::Dqpsk)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers < 16 || self.n_subcarriers % 2 != 0 {
            return Err(Error::param("n_subcarriers must be even and at least 16"));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::param("bandwidth must be positive"));
        }
        if !(self.f_center > 0.0) {
            return Err(Error::param("f_center must be positive"));
        }
        if !(self.guard_time >= 0.0) || !(self.interframe_gap >= 0.0) {
            return Err(Error::param("guard_time and interframe_gap must be nonnegative"));
        }
        if self.blocks_per_frame < 1 {
            return Err(Error::param("blocks_per_frame must be at least 1"));
        }
        if self.map.len() != self.n_subcarriers {
            return Err(Error::param(format!(
                "subcarrier map has {} entries for {} subcarriers",
                self.map.len(),
                self.n_subcarriers
            )));
        }
        if !(self.tx_gain > 0.0) {
            return Err(Error::param("tx_gain must be positive"));
        }
        if !(self.detection_threshold > 0.0 && self.detection_threshold < 1.0) {
            return Err(Error::param("detection_threshold must be in (0, 1)"));
        }
        if !(self.doppler_window > 0.0) {
            return Err(Error::param("doppler_window must be positive"));
        }
        if let PreambleKind::MseqXcorr(spec) = &self.preamble {
            generate_msequence(spec)?;
        }
        Ok(())
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.n_subcarriers as f64
    }

    pub fn block_duration(&self) -> f64 {
        self.n_subcarriers as f64 / self.bandwidth
    }

    pub fn guard_samples(&self) -> usize {
        (self.guard_time * self.bandwidth).round() as usize
    }

    pub fn preamble_len(&self) -> usize {
        match &self.preamble {
            PreambleKind::PnAutocorr => 2 * PN_SEGMENT_LEN,
            PreambleKind::MseqXcorr(spec) => spec.period(),
        }
    }

    /// Samples per frame at the critical rate.
    pub fn frame_samples(&self) -> usize {
        self.preamble_len()
            + self.blocks_per_frame * (self.n_subcarriers + self.guard_samples())
    }

    pub fn frame_duration(&self) -> f64 {
        self.frame_samples() as f64 / self.bandwidth
    }

    /// Payload bits carried by one frame.
    pub fn frame_payload_bits(&self) -> usize {
        self.blocks_per_frame * self.map.data_count() * self.modulation.bits_per_symbol()
    }
}

/// Known pilot symbol for subcarrier `k`: a fixed pseudo-random QPSK point so
/// pilot energy does not pile into a time-domain impulse.
pub fn pilot_symbol(k: usize) -> C64 {
    let mut s = 0x70D0_5EED ^ ((k as u64) << 1);
    let h = splitmix64(&mut s);
    let re = if h & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if h & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    C64::new(re, im)
}

/// One transmitted frame with its frequency-domain content preserved.
#[derive(Debug, Clone)]
pub struct OfdmFrame {
    pub payload_bits: Vec<u8>,
    pub config: OfdmConfig,
    /// Per block, all N subcarrier symbols in fftshift order.
    pub block_symbols: Vec<Vec<C64>>,
    pub waveform: BasebandSignal,
}

pub(crate) fn preamble_samples(config: &OfdmConfig) -> Result<Vec<C64>> {
    let chips = match &config.preamble {
        PreambleKind::MseqXcorr(spec) => msequence_chips(spec)?,
        PreambleKind::PnAutocorr => {
            let seg = msequence_chips(&MSequenceSpec::with_degree(10)?)?;
            let mut both = seg.clone();
            both.extend_from_slice(&seg);
            both
        }
    };
    Ok(chips
        .iter()
        .map(|&c| C64::new(c * config.tx_gain, 0.0))
        .collect())
}

/// Differentially encode one block of payload bits onto the subcarrier grid.
/// Pilots carry their known symbol and re-anchor the chain; the chain restarts
/// at [`DIFF_REF`] after every null gap.
fn encode_block(bits: &[u8], config: &OfdmConfig) -> Vec<C64> {
    let n = config.n_subcarriers;
    let bps = config.modulation.bits_per_symbol();
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut prev = DIFF_REF;
    let mut pos = 0;
    for k in 0..n {
        match config.map.role(k) {
            Role::Null => prev = DIFF_REF,
            Role::Pilot => {
                x[k] = pilot_symbol(k);
                prev = x[k];
            }
            Role::Data => {
                let m = config.modulation.map(&bits[pos..pos + bps]);
                pos += bps;
                x[k] = prev * m;
                prev = x[k];
            }
        }
    }
    x
}

/// IFFT of a symbol vector given in fftshift order, RMS-normalized to
/// `tx_gain`.
fn block_time_domain(symbols: &[C64], config: &OfdmConfig) -> Vec<C64> {
    let n = config.n_subcarriers;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (k, &s) in symbols.iter().enumerate() {
        buf[(k + n / 2) % n] = s;
    }
    ifft_in_place(&mut buf);
    let rms = (buf.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        let s = config.tx_gain / rms;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
    buf
}

pub fn build_frame(bits: &[u8], config: &OfdmConfig) -> Result<OfdmFrame> {
    config.validate()?;
    let want = config.frame_payload_bits();
    if bits.len() != want {
        return Err(Error::param(format!(
            "payload is {} bits, config carries {want} bits per frame",
            bits.len()
        )));
    }
    let per_block = config.map.data_count() * config.modulation.bits_per_symbol();
    let guard = config.guard_samples();
    let mut wave = Vec::with_capacity(config.frame_samples());
    wave.extend(preamble_samples(config)?);
    let mut block_symbols = Vec::with_capacity(config.blocks_per_frame);
    for b in 0..config.blocks_per_frame {
        let x = encode_block(&bits[b * per_block..(b + 1) * per_block], config);
        wave.extend(block_time_domain(&x, config));
        wave.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(guard));
        block_symbols.push(x);
    }
    Ok(OfdmFrame {
        payload_bits: bits.to_vec(),
        config: config.clone(),
        block_symbols,
        waveform: BasebandSignal::new(wave, config.bandwidth)?,
    })
}

pub fn ofdm_transmit(bits: &[u8], config: &OfdmConfig) -> Result<BasebandSignal> {
    Ok(build_frame(bits, config)?.waveform)
}

/// Information rate of a configuration: payload bits per frame, scaled by the
/// code rate, over the frame period including the inter-frame gap.
pub fn compute_data_rate(config: &OfdmConfig, fec_rate: f64) -> f64 {
    debug_assert!(fec_rate > 0.0 && fec_rate <= 1.0);
    let bits = config.frame_payload_bits() as f64 * fec_rate;
    if bits == 0.0 {
        return 0.0;
    }
    let period = self::frame_period(config);
    bits / period
}

fn frame_period(config: &OfdmConfig) -> f64 {
    config.preamble_len() as f64 / config.bandwidth
        + config.blocks_per_frame as f64 * (config.block_duration() + config.guard_time)
        + config.interframe_gap
}

/// Bit error bookkeeping at data-subcarrier resolution. Subcarrier axis is
/// the ordinal over data subcarriers (0..K in ascending frequency), matching
/// the grouping used by rate adaptation.
#[derive(Debug, Clone)]
pub struct BitErrorMap {
    /// errors[block][data_ordinal]
    pub per_block_subcarrier: Vec<Vec<u32>>,
    /// Summed over blocks, length K.
    pub per_subcarrier: Vec<u32>,
    pub bit_errors: usize,
    pub total_bits: usize,
}

impl BitErrorMap {
    pub fn ber(&self) -> f64 {
        if self.total_bits == 0 {
            return 0.0;
        }
        self.bit_errors as f64 / self.total_bits as f64
    }
}

/// Compare transmitted and received payload bits of one frame.
pub fn score_bit_errors(
    tx_bits: &[u8],
    rx_bits: &[u8],
    config: &OfdmConfig,
) -> Result<BitErrorMap> {
    let want = config.frame_payload_bits();
    if tx_bits.len() != want || rx_bits.len() != want {
        return Err(Error::param(format!(
            "scoring needs two payloads of {want} bits, got {} and {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    let k_count = config.map.data_count();
    let bps = config.modulation.bits_per_symbol();
    let mut per_block = vec![vec![0u32; k_count]; config.blocks_per_frame];
    let mut pos = 0;
    for block in per_block.iter_mut() {
        for cell in block.iter_mut() {
            for _ in 0..bps {
                if (tx_bits[pos] ^ rx_bits[pos]) & 1 != 0 {
                    *cell += 1;
                }
                pos += 1;
            }
        }
    }
    let mut per_subcarrier = vec![0u32; k_count];
    for block in &per_block {
        for (acc, &e) in per_subcarrier.iter_mut().zip(block) {
            *acc += e;
        }
    }
    let bit_errors = per_subcarrier.iter().map(|&e| e as usize).sum();
    Ok(BitErrorMap {
        per_block_subcarrier: per_block,
        per_subcarrier,
        bit_errors,
        total_bits: want,
    })
}
