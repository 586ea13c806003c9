//! Wall-clock timing of the streaming engine.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use wden_core::stream::{Lookahead, StreamGeometry, StreamReport, StreamState};
use wden_core::{DemucsConfig, ModelParams};

use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Affinity {
    /// Pinned to this CPU.
    Pinned(usize),
    Unpinned,
}

impl std::fmt::Display for Affinity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Affinity::Pinned(cpu) => write!(f, "pinned to cpu {cpu}"),
            Affinity::Unpinned => f.write_str("unpinned"),
        }
    }
}

/// Restricts the calling thread to one CPU where the platform allows it.
#[cfg(target_os = "linux")]
pub fn pin_single_core() -> Affinity {
    // SAFETY: cpu_set_t is plain data; both calls only read/write `set`.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        if libc::sched_getaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &mut set) != 0 {
            return Affinity::Unpinned;
        }
        let Some(cpu) = (0..libc::CPU_SETSIZE as usize).find(|&c| libc::CPU_ISSET(c, &set)) else {
            return Affinity::Unpinned;
        };
        let mut one: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu, &mut one);
        if libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &one) == 0 {
            Affinity::Pinned(cpu)
        } else {
            Affinity::Unpinned
        }
    }
}

#[cfg(not(target_os = "linux"))]
pub fn pin_single_core() -> Affinity {
    Affinity::Unpinned
}

/// Times `frames` calls of `step` and reports them against `geometry`.
pub fn time_frames<F>(geometry: &StreamGeometry, frames: usize, mut step: F) -> Result<StreamReport>
where
    F: FnMut(usize) -> Result<()>,
{
    let mut times = Vec::with_capacity(frames);
    for k in 0..frames {
        let t0 = Instant::now();
        step(k)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(StreamReport::new(geometry, times))
}

#[derive(Clone, Debug)]
pub struct BenchResult {
    pub report: StreamReport,
    pub affinity: Affinity,
}

/// Streams `seconds` of seeded white noise one stride per push and times
/// every push.
pub fn bench_stream(
    params: &ModelParams,
    config: &DemucsConfig,
    seconds: f64,
    seed: u64,
    mode: Lookahead,
    single_core: bool,
) -> Result<BenchResult> {
    let affinity = if single_core {
        pin_single_core()
    } else {
        Affinity::Unpinned
    };
    if single_core && affinity == Affinity::Unpinned {
        log::warn!("could not pin to a single core; timing unpinned");
    }
    let mut state = StreamState::new(params, config, 0.0, mode)?;
    let geometry = state.geometry();
    let stride = geometry.stride;
    let frames = ((seconds * f64::from(config.sample_rate)) as usize)
        .div_ceil(stride)
        .max(1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let input: Vec<f64> = (0..frames * stride)
        .map(|_| rng.random_range(-0.5..0.5))
        .collect();
    let report = time_frames(&geometry, frames, |k| {
        state.push(&input[k * stride..(k + 1) * stride])?;
        Ok(())
    })?;
    Ok(BenchResult { report, affinity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_frames() {
        let config = DemucsConfig::toy();
        let params = wden_core::model::init_params(&config, 0).unwrap();
        let r = bench_stream(&params, &config, 0.1, 0, Lookahead::Paper, false).unwrap();
        let stride = r.report.stride_ms / 1000.0 * 16000.0;
        assert_eq!(
            r.report.frame_times.len(),
            (1600.0 / stride).ceil() as usize
        );
        assert!(r.report.rtf > 0.0);
    }
}
