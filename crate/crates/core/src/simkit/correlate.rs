//! Hanbury Brown–Twiss correlation of click streams.

use super::stream::ClickStream;
use crate::error::{invalid, Error, Result};
use crate::instrument::normalize_g2;
use crate::spectrum::Histogram;

/// Counts every (start, stop) pair with delay in bins of width `bin_width`
/// centred on k·bin_width, |k| ≤ `half_bins`. Only starts in
/// [`window.0`, `window.1`) are used.
pub fn coincidence_counts(starts: &[f64], stops: &[f64], bin_width: f64, half_bins: usize, window: (f64, f64)) -> Vec<f64> {
    let n_bins = 2 * half_bins + 1;
    let reach = (half_bins as f64 + 0.5) * bin_width;
    let mut counts = vec![0.0; n_bins];
    let mut first = 0usize;
    for &t1 in starts.iter().filter(|t| **t >= window.0 && **t < window.1) {
        while first < stops.len() && stops[first] < t1 - reach {
            first += 1;
        }
        for &t2 in &stops[first..] {
            let d = t2 - t1 + reach;
            if d >= 2.0 * reach {
                break;
            }
            let k = ((d / bin_width) as usize).min(n_bins - 1);
            counts[k] += 1.0;
        }
    }
    counts
}

/// Normalized g²(τ) histogram over delays −span..span. A single-channel
/// stream is first split 50:50 with the stream's own seed.
///
/// Start clicks are taken only from [span, T − span) so that every bin sees
/// the same exposure; the normalization uses that reduced exposure.
pub fn correlate_stream(s: &ClickStream, bin_width: f64, span: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if !(span >= bin_width && span.is_finite()) {
        return Err(invalid(format!("span {span} must be ≥ the bin width {bin_width}")));
    }
    let split;
    let stream = if s.channels.len() == 1 {
        split = s.split()?;
        &split
    } else {
        s
    };
    let half_bins = (span / bin_width).round() as usize;
    let reach = (half_bins as f64 + 0.5) * bin_width;
    let exposure = s.duration - 2.0 * reach;
    if !(exposure > 0.0) {
        return Err(invalid(format!("stream of {} s is too short for a ±{span} s correlation", s.duration)));
    }
    let (a, b) = (&stream.channels[0], &stream.channels[1]);
    let n_starts = a.iter().filter(|t| **t >= reach && **t < s.duration - reach).count();
    if n_starts == 0 || b.is_empty() {
        return Err(Error::EmptyData("no clicks to correlate on one of the channels".into()));
    }
    let counts = coincidence_counts(a, b, bin_width, half_bins, (reach, s.duration - reach));
    let raw = Histogram::new(-(half_bins as f64) * bin_width, bin_width, counts)?;
    normalize_g2(&raw, n_starts as f64 / exposure, b.len() as f64 / s.duration, exposure)
}
