//! Arbitrary-ratio resampling for time compression/dilation.

use super::{BasebandSignal, SincKernel};
use crate::{Error, Result};

/// Time-scale a baseband signal: output sample `n` is the input evaluated at
/// position `factor * n`, so a tone at `f` moves to `f * factor` and the
/// duration scales by `1/factor`. The sample rate label is unchanged.
///
/// `factor` is restricted to [0.9, 1.1]; the intended use is Doppler-scale
/// compression/dilation, not general rate conversion (see
/// [`digital_up_convert`](super::digital_up_convert) and friends for that).
pub fn resample(sig: &BasebandSignal, factor: f64) -> Result<BasebandSignal> {
    if !(0.9..=1.1).contains(&factor) {
        return Err(Error::param(format!(
            "resample: factor {factor} outside [0.9, 1.1]"
        )));
    }
    if sig.samples.is_empty() {
        return Err(Error::param("resample: empty input"));
    }
    let n_out = ((sig.samples.len() - 1) as f64 / factor).floor() as usize + 1;
    let kernel = SincKernel::for_step(factor);
    let samples = kernel.resample_c(&sig.samples, 0.0, factor, n_out);
    BasebandSignal::new(samples, sig.sample_rate)
}
