//! Waiting-time (WT), active-time (AT) and active-number (AN) sequences.
//!
//! A WT is a maximal run of zero-count slots strictly between two active runs;
//! idle slots before the first and after the last invocation are not WTs. An
//! AT is the length of a maximal run of invoked slots and the matching AN is
//! the number of invocations inside it, so `ats.len() == wts.len() + 1`
//! whenever the series has an invocation.

use std::collections::HashMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace_store::InvocationSeries;

macro_rules! sequence_newtype {
    ($name:ident, $elem:ty) => {
        #[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<$elem>);

        impl Deref for $name {
            type Target = [$elem];

            fn deref(&self) -> &[$elem] {
                &self.0
            }
        }

        impl From<Vec<$elem>> for $name {
            fn from(values: Vec<$elem>) -> Self {
                $name(values)
            }
        }

        impl $name {
            pub fn into_inner(self) -> Vec<$elem> {
                self.0
            }
        }
    };
}

sequence_newtype!(WtSequence, u32);
sequence_newtype!(AtSequence, u32);
sequence_newtype!(AnSequence, u64);

/// All run-length features of one series, from a single scan.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Runs {
    pub wts: WtSequence,
    pub ats: AtSequence,
    pub ans: AnSequence,
    pub leading_idle: usize,
    pub trailing_idle: usize,
}

pub fn scan_runs(counts: &[u32]) -> Runs {
    let mut runs = Runs::default();
    let mut idle = 0usize;
    let mut active_len = 0u32;
    let mut active_sum = 0u64;
    let mut seen_active = false;
    for &c in counts {
        if c > 0 {
            if active_len == 0 {
                if seen_active {
                    runs.wts.0.push(idle as u32);
                } else {
                    runs.leading_idle = idle;
                }
                idle = 0;
            }
            active_len += 1;
            active_sum += u64::from(c);
            seen_active = true;
        } else {
            if active_len > 0 {
                runs.ats.0.push(active_len);
                runs.ans.0.push(active_sum);
                active_len = 0;
                active_sum = 0;
            }
            idle += 1;
        }
    }
    if active_len > 0 {
        runs.ats.0.push(active_len);
        runs.ans.0.push(active_sum);
    }
    if seen_active {
        runs.trailing_idle = idle;
    } else {
        runs.leading_idle = idle;
    }
    runs
}

pub fn extract_wts(s: &InvocationSeries) -> WtSequence {
    scan_runs(&s.counts).wts
}

pub fn extract_ats(s: &InvocationSeries) -> AtSequence {
    scan_runs(&s.counts).ats
}

pub fn extract_ans(s: &InvocationSeries) -> AnSequence {
    scan_runs(&s.counts).ans
}

/// Drop the first and last WT; the boundary WTs of an observation window are
/// the least trustworthy.
pub fn trim_boundary_wts(w: &WtSequence) -> WtSequence {
    if w.len() <= 2 {
        return WtSequence::default();
    }
    WtSequence(w[1..w.len() - 1].to_vec())
}

/// Most frequent value; ties go to the larger value so that a split periodic
/// interval (e.g. 1438 + 1) resolves to the period rather than the fragment.
fn merge_mode(values: &[u32]) -> Option<u32> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by_key(|&(v, n)| (n, v))
        .map(|(v, _)| v)
}

/// Merge small WTs into adjacent near-mode WTs.
///
/// A value is near the mode when it lies within `mode_tolerance × mode` of it,
/// and small when it is below `small_threshold × mode`. Each near-mode WT scans
/// outward and absorbs (adds to itself) consecutive small neighbours, stopping
/// at the sequence end, at another near-mode WT, at an already merged WT or at
/// any value that is not small. Absorbed entries disappear; order is kept and
/// the total is preserved.
pub fn merge_adjacent_wts(w: &WtSequence, mode_tolerance: f64, small_threshold: f64) -> WtSequence {
    let Some(mode) = merge_mode(w) else {
        return WtSequence::default();
    };
    let mode_f = f64::from(mode);
    let near = |v: u32| (f64::from(v) - mode_f).abs() <= mode_tolerance * mode_f;
    let small = |v: u32| f64::from(v) < small_threshold * mode_f;

    let n = w.len();
    let mut absorbed = vec![false; n];
    let mut merged = vec![false; n];
    let mut values: Vec<u64> = w.iter().map(|&v| u64::from(v)).collect();

    for i in 0..n {
        if absorbed[i] || !near(w[i]) {
            continue;
        }
        let mut j = i + 1;
        while j < n && !near(w[j]) && !absorbed[j] && !merged[j] && small(w[j]) {
            values[i] += u64::from(w[j]);
            absorbed[j] = true;
            merged[i] = true;
            j += 1;
        }
        let mut j = i;
        while j > 0 {
            j -= 1;
            if near(w[j]) || absorbed[j] || merged[j] || !small(w[j]) {
                break;
            }
            values[i] += u64::from(w[j]);
            absorbed[j] = true;
            merged[i] = true;
        }
    }
    WtSequence(
        values
            .into_iter()
            .zip(absorbed)
            .filter(|(_, gone)| !gone)
            .map(|(v, _)| u32::try_from(v).unwrap_or(u32::MAX))
            .collect(),
    )
}

/// Nearest-rank percentile: the smallest value with at least `p` percent of the
/// data at or below it.
pub fn percentile<T: Copy + PartialOrd>(values: &[T], p: f64) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Empty("percentile"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("percentile input must be ordered"));
    Ok(sorted[nearest_rank(sorted.len(), p)])
}

/// Index of the nearest-rank `p` percentile in a sorted slice of length `n > 0`.
pub fn nearest_rank(n: usize, p: f64) -> usize {
    let rank = (p / 100.0 * n as f64).ceil() as usize;
    rank.clamp(1, n) - 1
}

pub fn mean(values: &[u32]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("mean"));
    }
    Ok(values.iter().map(|&v| f64::from(v)).sum::<f64>() / values.len() as f64)
}

/// Population standard deviation.
pub fn std_dev(values: &[u32]) -> Result<f64> {
    let m = mean(values)?;
    let var = values
        .iter()
        .map(|&v| (f64::from(v) - m).powi(2))
        .sum::<f64>()
        / values.len() as f64;
    Ok(var.sqrt())
}

/// Population standard deviation over the mean. Zero for an all-zero input.
pub fn coeff_of_variation(values: &[u32]) -> Result<f64> {
    let m = mean(values)?;
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(std_dev(values)? / m)
}

/// Midpoint median (the mean of the two middle values for even lengths).
pub fn median(values: &[u32]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    Ok(median_of_sorted(&sorted))
}

pub fn median_of_sorted(sorted: &[u32]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        f64::from(sorted[n / 2])
    } else {
        (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
    }
}

/// The `n` most frequent values with their counts; count descending, ties to
/// the smaller value.
pub fn top_modes(values: &[u32], n: usize) -> Vec<(u32, usize)> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    top_modes_from_counts(counts.into_iter(), n)
}

pub fn top_modes_from_counts(
    counts: impl Iterator<Item = (u32, usize)>,
    n: usize,
) -> Vec<(u32, usize)> {
    let mut modes: Vec<(u32, usize)> = counts.collect();
    modes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    modes.truncate(n);
    modes
}

/// Round half away from zero for the non-negative values used here.
pub fn round_half_up(x: f64) -> u32 {
    (x + 0.5).floor().max(0.0) as u32
}
