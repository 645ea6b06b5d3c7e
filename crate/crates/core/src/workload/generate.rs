use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EtcMatrix, ExecEstimate, GopId, StreamId, VideoStream, VmTypeCatalog, Workload, WorkloadError};

/// Execution-time profile of one VM type relative to the per-GOP base work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecProfile {
    pub type_id: String,
    /// Multiplier on the GOP's base execution time.
    pub speed_factor: f64,
    /// Per-GOP multiplicative jitter: the factor is scaled by U(1-jitter, 1+jitter).
    pub jitter: f64,
    /// Coefficient of variation: std_dev = cv * mean.
    pub cv: f64,
}

impl ExecProfile {
    pub fn new(type_id: &str, speed_factor: f64, jitter: f64, cv: f64) -> Self {
        ExecProfile {
            type_id: type_id.to_string(),
            speed_factor,
            jitter,
            cv,
        }
    }

    /// Profiles for [`VmTypeCatalog::ec2_default`]. The GPU type is fastest on
    /// average; CPU-optimized is close behind for many GOPs at a third of the price.
    pub fn ec2_defaults() -> Vec<ExecProfile> {
        vec![
            ExecProfile::new("g2.2xlarge", 1.0, 0.1, 0.1),
            ExecProfile::new("c4.xlarge", 1.4, 0.25, 0.1),
            ExecProfile::new("r3.xlarge", 1.6, 0.25, 0.1),
            ExecProfile::new("m4.large", 2.0, 0.25, 0.1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub num_requests: usize,
    pub horizon_seconds: f64,
    /// Video durations are drawn uniformly from `[min, max]` seconds.
    pub duration_range: [f64; 2],
    pub gop_playback_seconds: f64,
    /// Base execution time of a GOP (on a speed-factor-1 type) is drawn
    /// uniformly from this range.
    pub base_exec_range: [f64; 2],
    pub profiles: Vec<ExecProfile>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            num_requests: 100,
            horizon_seconds: 3600.0,
            duration_range: [10.0, 600.0],
            gop_playback_seconds: 2.0,
            base_exec_range: [0.3, 0.9],
            profiles: ExecProfile::ec2_defaults(),
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let err = |m: String| Err(WorkloadError::Config(m));
        if self.num_requests == 0 {
            return err("num_requests must be at least 1".into());
        }
        if !(self.horizon_seconds > 0.0) {
            return err("horizon_seconds must be positive".into());
        }
        let [lo, hi] = self.duration_range;
        if !(lo > 0.0) || lo > hi {
            return err(format!("invalid duration range [{lo}, {hi}]"));
        }
        if !(self.gop_playback_seconds > 0.0) {
            return err("gop_playback_seconds must be positive".into());
        }
        let [blo, bhi] = self.base_exec_range;
        if !(blo > 0.0) || blo > bhi {
            return err(format!("invalid base execution range [{blo}, {bhi}]"));
        }
        for p in &self.profiles {
            if !(p.speed_factor > 0.0) || !(0.0..1.0).contains(&p.jitter) || !(p.cv >= 0.0) {
                return err(format!("invalid execution profile for `{}`", p.type_id));
            }
        }
        Ok(())
    }
}

/// Relative deadlines of a stream of `duration` seconds cut into GOPs of
/// `gop_playback` seconds: `⌈duration / gop_playback⌉` GOPs at `j * gop_playback`.
pub fn partition_stream(duration: f64, gop_playback: f64) -> Vec<f64> {
    let n = (duration / gop_playback).ceil().max(0.0) as usize;
    (0..n).map(|j| j as f64 * gop_playback).collect()
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Synthesize `num_requests` streams over the horizon. Inter-arrival times
/// are Normal(horizon / n, mean / 3) truncated at zero.
pub fn generate_workload(
    params: &GeneratorParams,
    catalog: &VmTypeCatalog,
    seed: u64,
) -> Result<Workload, WorkloadError> {
    params.validate()?;
    let profiles = catalog
        .iter()
        .map(|t| {
            params
                .profiles
                .iter()
                .find(|p| p.type_id == t.type_id)
                .ok_or_else(|| {
                    WorkloadError::Config(format!("no execution profile for type `{}`", t.type_id))
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_gap = params.horizon_seconds / params.num_requests as f64;
    let gap = Normal::new(mean_gap, mean_gap / 3.0)
        .map_err(|e| WorkloadError::Config(e.to_string()))?;

    let mut etc = EtcMatrix::new(catalog.len());
    let mut streams = Vec::with_capacity(params.num_requests);
    let mut t = 0.0;
    for s in 0..params.num_requests {
        t += gap.sample(&mut rng).max(0.0);
        let duration = uniform(&mut rng, params.duration_range);
        let id = StreamId(s as u64);
        let deadlines = partition_stream(duration, params.gop_playback_seconds);
        for j in 0..deadlines.len() {
            let base = uniform(&mut rng, params.base_exec_range);
            let row = profiles
                .iter()
                .map(|p| {
                    let jit = if p.jitter > 0.0 {
                        rng.random_range(1.0 - p.jitter..=1.0 + p.jitter)
                    } else {
                        1.0
                    };
                    let mean = base * p.speed_factor * jit;
                    ExecEstimate::new(mean, p.cv * mean)
                })
                .collect::<Result<Vec<_>, _>>()?;
            etc.insert_row(
                GopId {
                    stream: id,
                    index: j as u32,
                },
                row,
            )?;
        }
        streams.push(VideoStream::new(id, t, duration, &deadlines));
    }
    // arrivals are cumulative sums of non-negative gaps, hence already sorted
    Ok(Workload { streams, etc })
}
