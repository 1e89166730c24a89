//! Strain envelopes, extremum-preserving decimation and the largest-cycle
//! loss.
//!
//! The envelope of a strain signal over a window of `w` steps is
//! `s_u[n] = max s[n−k]`, `s_l[n] = min s[n−k]` for `k ∈ [⌈−w/2⌉, ⌈w/2⌉]`,
//! truncated at the signal edges. Both the envelope and the block decimation
//! used afterwards keep the global maximum and minimum of the signal
//! unchanged, so the largest cycle of a startup can be computed from the
//! low-rate enveloped trajectory.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::StartupParams;

/// Measured speed, opening and strain at `f_m`, from rest to the startup time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredTrajectory {
    pub f_m: f64,
    pub omega: Vec<f64>,
    pub opening: Vec<f64>,
    pub strain: Vec<f64>,
    pub params: StartupParams,
}

impl MeasuredTrajectory {
    pub fn len(&self) -> usize {
        self.strain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strain.is_empty()
    }

    /// Startup time (s): the last sample sits at `t_st`.
    pub fn t_st(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 / self.f_m
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.strain.len();
        if n == 0 {
            return Err(Error::ValidationFailure("trajectory has no samples".into()));
        }
        if self.omega.len() != n || self.opening.len() != n {
            return Err(Error::ValidationFailure("column lengths differ".into()));
        }
        if !(self.f_m.is_finite() && self.f_m > 0.0) {
            return Err(Error::ValidationFailure("sampling rate must be positive".into()));
        }
        for (name, col) in [
            ("omega", &self.omega),
            ("opening", &self.opening),
            ("strain", &self.strain),
        ] {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::ValidationFailure(format!(
                    "non-finite {name} sample at index {i}"
                )));
            }
        }
        Ok(())
    }

    /// Writes the `time_s,omega,opening,strain` CSV format.
    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time_s", "omega", "opening", "strain"])?;
        for n in 0..self.len() {
            wtr.write_record(&[
                (n as f64 / self.f_m).to_string(),
                self.omega[n].to_string(),
                self.opening[n].to_string(),
                self.strain[n].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }

    /// Reads a measurement CSV and brings it to `f_m`.
    ///
    /// The raw rate is inferred from the time column and must be an integer
    /// multiple of `f_m`. Speed and opening are decimated (block start
    /// value); strain keeps one extreme sample per block, and the blocks
    /// holding the global maximum and minimum always emit them, so the
    /// largest cycle of the resampled signal equals that of the raw one.
    pub fn from_csv_reader<R: Read>(reader: R, f_m: f64, params: StartupParams) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let expected = ["time_s", "omega", "opening", "strain"];
        if header.len() != expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
            return Err(Error::ValidationFailure(format!(
                "expected header {}, got {}",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut time, mut omega, mut opening, mut strain) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::ValidationFailure(e.to_string()))?;
            if rec.len() != 4 {
                return Err(Error::ValidationFailure(format!(
                    "row {} has {} columns, expected 4",
                    line + 2,
                    rec.len()
                )));
            }
            let parse = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| {
                    Error::ValidationFailure(format!("row {}: cannot parse '{}'", line + 2, &rec[i]))
                })
            };
            time.push(parse(0)?);
            omega.push(parse(1)?);
            opening.push(parse(2)?);
            strain.push(parse(3)?);
        }
        if time.len() < 2 {
            return Err(Error::ValidationFailure("need at least two samples".into()));
        }
        let raw_rate = uniform_rate(&time)?;
        let stride = integer_ratio(raw_rate, f_m)?;
        let traj = MeasuredTrajectory {
            f_m,
            omega: omega.iter().step_by(stride).copied().collect(),
            opening: opening.iter().step_by(stride).copied().collect(),
            strain: decimate_preserving_extremes(&strain, stride),
            params,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, f_m: f64, params: StartupParams) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?, f_m, params)
    }
}

fn uniform_rate(time: &[f64]) -> Result<f64> {
    if time.iter().any(|t| !t.is_finite()) {
        return Err(Error::ValidationFailure("non-finite time stamp".into()));
    }
    let span = time[time.len() - 1] - time[0];
    let dt = span / (time.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::ValidationFailure("time stamps must increase".into()));
    }
    for (i, w) in time.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-3 * dt {
            return Err(Error::ValidationFailure(format!(
                "non-uniform sampling at row {}",
                i + 3
            )));
        }
    }
    Ok(1.0 / dt)
}

fn integer_ratio(high: f64, low: f64) -> Result<usize> {
    let ratio = high / low;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-6 * ratio.max(1.0) {
        return Err(Error::IncompatibleRates { f_m: high, f_e: low });
    }
    Ok(stride as usize)
}

/// One sample per block of `stride`: the block extreme farthest from the
/// block mean, overridden so that the global max and min survive.
fn decimate_preserving_extremes(signal: &[f64], stride: usize) -> Vec<f64> {
    if stride == 1 {
        return signal.to_vec();
    }
    let blocks: Vec<&[f64]> = signal.chunks(stride).collect();
    let mut out: Vec<f64> = blocks
        .iter()
        .map(|b| {
            let mean = b.iter().sum::<f64>() / b.len() as f64;
            let (lo, hi) = min_max(b);
            if hi - mean >= mean - lo {
                hi
            } else {
                lo
            }
        })
        .collect();
    let argmax = argext(signal, |a, b| a > b);
    let argmin = argext(signal, |a, b| a < b);
    let (bmax, bmin) = (argmax / stride, argmin / stride);
    out[bmax] = signal[argmax];
    if bmin != bmax {
        out[bmin] = signal[argmin];
    } else if out.len() > 1 {
        // both extremes share a block: move the minimum to a neighbour
        let nb = if bmin + 1 < out.len() { bmin + 1 } else { bmin - 1 };
        out[nb] = signal[argmin];
    }
    out
}

fn argext(s: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in s.iter().enumerate() {
        if better(v, s[best]) {
            best = i;
        }
    }
    best
}

fn min_max(s: &[f64]) -> (f64, f64) {
    s.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Enveloped trajectory at `f_e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopedTrajectory {
    pub f_e: f64,
    pub omega: Vec<f64>,
    pub opening: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// Envelope window in source steps.
    pub window_w: usize,
}

impl EnvelopedTrajectory {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }
}

/// Reach of the centered window to the left and right of `n`.
fn window_reach(w: usize) -> (usize, usize) {
    // k ∈ [⌈−w/2⌉, ⌈w/2⌉] on s[n − k]
    (w.div_ceil(2), w / 2)
}

/// Sliding max/min over the centered window, O(n) with monotonic deques.
pub fn compute_envelope(signal: &[f64], w: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if signal.is_empty() {
        return Err(Error::EmptySignal);
    }
    let w = w.max(1);
    let (left, right) = window_reach(w);
    let len = signal.len();
    let mut upper = Vec::with_capacity(len);
    let mut lower = Vec::with_capacity(len);
    // indices with decreasing (max) / increasing (min) values
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut next = 0usize;
    for n in 0..len {
        let hi = (n + right).min(len - 1);
        while next <= hi {
            let v = signal[next];
            while maxq.back().is_some_and(|&j| signal[j] <= v) {
                maxq.pop_back();
            }
            maxq.push_back(next);
            while minq.back().is_some_and(|&j| signal[j] >= v) {
                minq.pop_back();
            }
            minq.push_back(next);
            next += 1;
        }
        let lo = n.saturating_sub(left);
        while maxq.front().is_some_and(|&j| j < lo) {
            maxq.pop_front();
        }
        while minq.front().is_some_and(|&j| j < lo) {
            minq.pop_front();
        }
        upper.push(signal[maxq[0]]);
        lower.push(signal[minq[0]]);
    }
    Ok((upper, lower))
}

/// Block-decimates an envelope from `f_m` to `f_e`: block max of the upper
/// bound, block min of the lower bound, block-start speed and opening.
pub fn downsample_envelope(
    upper: &[f64],
    lower: &[f64],
    omega: &[f64],
    opening: &[f64],
    f_m: f64,
    f_e: f64,
    window_w: usize,
) -> Result<EnvelopedTrajectory> {
    if upper.is_empty() {
        return Err(Error::EmptySignal);
    }
    let stride = integer_ratio(f_m, f_e).map_err(|_| Error::IncompatibleRates { f_m, f_e })?;
    let block_max = upper
        .chunks(stride)
        .map(|b| b.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let block_min = lower
        .chunks(stride)
        .map(|b| b.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Ok(EnvelopedTrajectory {
        f_e,
        omega: omega.iter().step_by(stride).copied().collect(),
        opening: opening.iter().step_by(stride).copied().collect(),
        upper: block_max,
        lower: block_min,
        window_w,
    })
}

/// Envelope over `window_s` seconds followed by decimation to `f_e`.
pub fn envelope_trajectory(
    traj: &MeasuredTrajectory,
    window_s: f64,
    f_e: f64,
) -> Result<EnvelopedTrajectory> {
    let w = ((window_s * traj.f_m).round() as usize).max(1);
    let (upper, lower) = compute_envelope(&traj.strain, w)?;
    downsample_envelope(&upper, &lower, &traj.omega, &traj.opening, traj.f_m, f_e, w)
}

/// Amplitude of the largest strain cycle over a startup.
pub trait LargestCycle {
    fn largest_cycle(&self) -> f64;
}

impl LargestCycle for MeasuredTrajectory {
    fn largest_cycle(&self) -> f64 {
        let (lo, hi) = min_max(&self.strain);
        (hi - lo).max(0.0)
    }
}

impl LargestCycle for EnvelopedTrajectory {
    fn largest_cycle(&self) -> f64 {
        let hi = self.upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.lower.iter().copied().fold(f64::INFINITY, f64::min);
        (hi - lo).max(0.0)
    }
}
