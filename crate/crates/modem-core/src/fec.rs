//! Forward error correction: a terminated rate-1/2 convolutional code with
//! soft-decision Viterbi decoding, and a seeded random bit interleaver.
//!
//! The default code has constraint length 12, generators 4335/5723 (octal).
//! Soft values follow the convention positive <-> bit 0 (bipolar +1), so a
//! hard bit maps to `1.0 - 2.0 * bit`.

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// convolutional code
// ---------------------------------------------------------------------------

/// Rate-1/2 convolutional code description. Generator masks are polynomial
/// taps over the shift register, most significant bit = newest input bit;
/// both masks must have exactly `constraint_length` significant bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvCodeSpec {
    pub constraint_length: u32,
    pub generators: [u32; 2],
    /// Append `constraint_length - 1` zero tail bits so the trellis ends in
    /// the zero state.
    pub terminated: bool,
}

impl Default for ConvCodeSpec {
    fn default() -> Self {
        ConvCodeSpec {
            constraint_length: 12,
            generators: [0o4335, 0o5723],
            terminated: true,
        }
    }
}

impl ConvCodeSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.constraint_length;
        if !(3..=16).contains(&k) {
            return Err(Error::param(format!(
                "constraint_length {k} outside supported range 3..=16"
            )));
        }
        for g in self.generators {
            if g >> (k - 1) != 1 {
                return Err(Error::param(format!(
                    "generator {g:#o} does not have exactly {k} significant bits"
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        1usize << (self.constraint_length - 1)
    }

    /// Tail bits appended when terminated.
    pub fn tail_len(&self) -> usize {
        if self.terminated {
            (self.constraint_length - 1) as usize
        } else {
            0
        }
    }

    /// Coded length for `info_len` information bits.
    pub fn coded_len(&self, info_len: usize) -> usize {
        2 * (info_len + self.tail_len())
    }
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Encode `bits` (0/1 values); output is interleaved generator outputs
/// `[g0(0), g1(0), g0(1), g1(1), ...]` including tail bits if terminated.
pub fn conv_encode(bits: &[u8], spec: &ConvCodeSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    let k = spec.constraint_length;
    let [g0, g1] = spec.generators;
    let mut out = Vec::with_capacity(spec.coded_len(bits.len()));
    let mut sr: u32 = 0;
    let mut push = |sr: &mut u32, bit: u8| {
        debug_assert!(bit <= 1);
        *sr = (*sr >> 1) | ((bit as u32) << (k - 1));
        out.push(parity(*sr & g0));
        out.push(parity(*sr & g1));
    };
    for &b in bits {
        if b > 1 {
            return Err(Error::param("conv_encode: bits must be 0/1"));
        }
        push(&mut sr, b);
    }
    for _ in 0..spec.tail_len() {
        push(&mut sr, 0);
    }
    Ok(out)
}

/// Soft-decision Viterbi decoder. Holds trellis scratch memory, so one
/// instance serves one decode at a time; clone or create per thread.
pub struct ViterbiDecoder {
    spec: ConvCodeSpec,
    /// Packed output bits per shift-register value: bit0 = g0, bit1 = g1.
    outputs: Vec<u8>,
    metrics: Vec<f64>,
    next_metrics: Vec<f64>,
}

impl ViterbiDecoder {
    pub fn new(spec: ConvCodeSpec) -> Result<Self> {
        spec.validate()?;
        let k = spec.constraint_length;
        let [g0, g1] = spec.generators;
        let outputs = (0..(1u32 << k))
            .map(|sr| parity(sr & g0) | (parity(sr & g1) << 1))
            .collect();
        let n = spec.n_states();
        Ok(ViterbiDecoder {
            spec,
            outputs,
            metrics: vec![0.0; n],
            next_metrics: vec![0.0; n],
        })
    }

    pub fn spec(&self) -> &ConvCodeSpec {
        &self.spec
    }

    /// Decode a soft coded stream (2 values per trellis step) into
    /// information bits. For a terminated stream the tail is stripped.
    pub fn decode(&mut self, soft: &[f64]) -> Result<Vec<u8>> {
        if soft.len() % 2 != 0 {
            return Err(Error::param("viterbi: soft length must be even"));
        }
        let n_steps = soft.len() / 2;
        let tail = self.spec.tail_len();
        if n_steps < tail + 1 {
            return Err(Error::param(format!(
                "viterbi: {n_steps} steps too short for termination tail {tail}"
            )));
        }
        let k = self.spec.constraint_length;
        let n_states = self.spec.n_states();
        let half = n_states >> 1;
        let low_mask = (half - 1) as u32; // K-2 bits

        // encoder starts in the zero state
        self.metrics.fill(f64::NEG_INFINITY);
        self.metrics[0] = 0.0;

        let words_per_step = n_states.div_ceil(64);
        let mut decisions = vec![0u64; words_per_step * n_steps];

        for step in 0..n_steps {
            let s0 = soft[2 * step];
            let s1 = soft[2 * step + 1];
            // branch metric per shift-register value, indexed by output pair
            let bm = [s0 + s1, -s0 + s1, s0 - s1, -s0 - s1];
            let dwords = &mut decisions[step * words_per_step..(step + 1) * words_per_step];
            for t in 0..n_states {
                let u = (t >> (k - 2)) as u32;
                let base = ((t as u32) & low_mask) << 1;
                let mut best = f64::NEG_INFINITY;
                let mut best_z = 0u64;
                for z in 0..2u32 {
                    let s = (base | z) as usize;
                    let m = self.metrics[s];
                    if m == f64::NEG_INFINITY {
                        continue;
                    }
                    let sr = (u << (k - 1)) | s as u32;
                    let cand = m + bm[self.outputs[sr as usize] as usize];
                    if cand > best {
                        best = cand;
                        best_z = z as u64;
                    }
                }
                self.next_metrics[t] = best;
                dwords[t >> 6] |= best_z << (t & 63);
            }
            std::mem::swap(&mut self.metrics, &mut self.next_metrics);
        }

        // terminated: the tail forces the zero state; otherwise best end state
        let mut state = if self.spec.terminated {
            0usize
        } else {
            let mut best = 0usize;
            for s in 1..n_states {
                if self.metrics[s] > self.metrics[best] {
                    best = s;
                }
            }
            best
        };

        let mut bits = vec![0u8; n_steps];
        for step in (0..n_steps).rev() {
            let dwords = &decisions[step * words_per_step..(step + 1) * words_per_step];
            let z = ((dwords[state >> 6] >> (state & 63)) & 1) as u32;
            bits[step] = (state >> (k - 2)) as u8;
            state = ((((state as u32) & low_mask) << 1) | z) as usize;
        }
        bits.truncate(n_steps - tail);
        Ok(bits)
    }
}

/// One-shot convenience wrapper around [`ViterbiDecoder`].
pub fn viterbi_decode(soft: &[f64], spec: &ConvCodeSpec) -> Result<Vec<u8>> {
    ViterbiDecoder::new(*spec)?.decode(soft)
}

/// Map hard coded bits to the bipolar soft convention.
pub fn bits_to_soft(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| 1.0 - 2.0 * b as f64).collect()
}

// ---------------------------------------------------------------------------
// interleaver
// ---------------------------------------------------------------------------

/// Multiplicative mixer in the splitmix style; full 64-bit period, stateless
/// apart from the counter.
#[inline]
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterleaverSpec {
    pub length: usize,
    pub seed: u64,
}

/// Seeded random permutation with its inverse; construction verifies the
/// permutation is a bijection.
#[derive(Debug, Clone)]
pub struct Interleaver {
    spec: InterleaverSpec,
    perm: Vec<u32>,
    inv: Vec<u32>,
}

impl Interleaver {
    pub fn new(spec: InterleaverSpec) -> Result<Self> {
        if spec.length == 0 || spec.length > u32::MAX as usize {
            return Err(Error::param(format!(
                "interleaver length {} out of range",
                spec.length
            )));
        }
        let n = spec.length;
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut state = spec.seed;
        for i in (1..n).rev() {
            let j = (splitmix64(&mut state) % (i as u64 + 1)) as usize;
            perm.swap(i, j);
        }
        let mut inv = vec![u32::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if inv[p as usize] != u32::MAX {
                return Err(Error::param("interleaver permutation is not a bijection"));
            }
            inv[p as usize] = i as u32;
        }
        debug_assert!(inv.iter().all(|&v| v != u32::MAX));
        Ok(Interleaver { spec, perm, inv })
    }

    pub fn spec(&self) -> &InterleaverSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.spec.length
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interleave<T: Copy>(&self, data: &[T]) -> Result<Vec<T>> {
        if data.len() != self.len() {
            return Err(Error::param(format!(
                "interleave: data length {} != interleaver length {}",
                data.len(),
                self.len()
            )));
        }
        Ok(self.perm.iter().map(|&p| data[p as usize]).collect())
    }

    pub fn deinterleave<T: Copy>(&self, data: &[T]) -> Result<Vec<T>> {
        if data.len() != self.len() {
            return Err(Error::param(format!(
                "deinterleave: data length {} != interleaver length {}",
                data.len(),
                self.len()
            )));
        }
        Ok(self.inv.iter().map(|&p| data[p as usize]).collect())
    }
}
