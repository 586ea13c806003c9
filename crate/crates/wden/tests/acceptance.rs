//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always print; exits non-zero on any FAIL.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wden::{bench, synth};
use wden_core::augment::{band_stop, draw_band, echo_train, mel, RevechoParams};
use wden_core::model::{init_params, network};
use wden_core::objective::{loss_sc, total_loss, DEFAULT_RESOLUTIONS};
use wden_core::resample::{downsample, downsample_adjoint, upsample, upsample_adjoint, SincFilter};
use wden_core::stream::{running_scale, stream_signal, Lookahead, StreamGeometry};
use wden_core::train::{
    self, conditioned_pair, grad_check, nudge_biases, CheckOptions, FitOptions, MIN_CONDITIONING,
};
use wden_core::{DemucsConfig, ModelParams, Tensor};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn rel_l2(y: &[f64], reference: &[f64]) -> f64 {
    let diff: Vec<f64> = y.iter().zip(reference).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(reference)
}

/// `d ⊙ network(x ⊘ d)` with `d` the running standard deviation.
fn offline(params: &ModelParams, config: &DemucsConfig, x: &[f64]) -> Vec<f64> {
    let d = running_scale(config, x);
    let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a / b).collect();
    let plain = DemucsConfig {
        normalize: false,
        ..*config
    };
    let y = network(params, &plain, &Tensor::from_signal(&xn)).expect("offline forward");
    y.data().iter().zip(&d).map(|(a, b)| a * b).collect()
}

fn streaming_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_chunk: f64 = 0.0;
    for hidden in [32, 48, 64] {
        let config = DemucsConfig {
            depth: 3,
            ..DemucsConfig::reference(hidden)
        };
        for seed in 0..10u64 {
            let params = init_params(&config, seed).unwrap();
            let x = white(4000, 100 + seed);
            let y = stream_signal(&params, &config, &x, 256, 0.0, Lookahead::Exact).unwrap();
            worst = worst.max(rel_l2(&y, &offline(&params, &config, &x)));
            if seed < 2 {
                for chunk in [1, 100, 0] {
                    let z =
                        stream_signal(&params, &config, &x, chunk, 0.0, Lookahead::Exact).unwrap();
                    let d = z
                        .iter()
                        .zip(&y)
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    worst_chunk = worst_chunk.max(d);
                }
            }
        }
    }
    outcome(
        worst < 1e-4 && worst_chunk < 1e-6,
        format!("max rel L2 {worst:.2e} (< 1e-4), max chunking diff {worst_chunk:.2e} (< 1e-6), 3 configs x 10 seeds"),
    )
}

fn gradient_suite() -> Outcome {
    let runs: Vec<(usize, f64, usize, u64)> = std::thread::scope(|s| {
        let handles: Vec<_> = [1usize, 2]
            .into_iter()
            .map(|u| {
                s.spawn(move || {
                    let config = DemucsConfig {
                        resample: u,
                        ..DemucsConfig::toy()
                    };
                    let mut params = init_params(&config, 0).unwrap();
                    nudge_biases(&mut params, 0.05, 0);
                    let (batch, data_seed) = conditioned_pair(
                        &params,
                        &config,
                        1200,
                        0,
                        MIN_CONDITIONING,
                        &DEFAULT_RESOLUTIONS,
                    )
                    .unwrap();
                    let opts = CheckOptions {
                        per_tensor: None,
                        ..CheckOptions::default()
                    };
                    let r = grad_check(&params, &config, &batch, 0.5, &DEFAULT_RESOLUTIONS, &opts)
                        .unwrap();
                    let checked = r.tensors.iter().map(|t| t.checked).sum();
                    (u, r.max_rel_err, checked, data_seed)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail = runs
        .iter()
        .map(|(u, e, n, s)| format!("U={u}: {e:.2e} over {n} entries (data seed {s})"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(
        worst < 1e-3,
        format!("{detail}; h = 1e-5, T = 1200, tolerance 1e-3"),
    )
}

fn loss_identities() -> Outcome {
    let y = synth::voiced(4000, 16_000, 3);
    let y_hat = white(4000, 4);
    let same = total_loss(&y, &y, 0.5, &DEFAULT_RESOLUTIONS)
        .unwrap()
        .total
        .abs();
    let mut sc_err: f64 = 0.0;
    for alpha in [0.5, 2.0] {
        let scaled: Vec<f64> = y.iter().map(|v| alpha * v).collect();
        for cfg in &DEFAULT_RESOLUTIONS {
            sc_err = sc_err.max((loss_sc(&y, &scaled, cfg).unwrap() - (1.0 - alpha).abs()).abs());
        }
    }
    let l1 = y
        .iter()
        .zip(&y_hat)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / y.len() as f64;
    let l1_err = (total_loss(&y, &y_hat, 0.0, &DEFAULT_RESOLUTIONS)
        .unwrap()
        .total
        - l1)
        .abs();
    outcome(
        same < 1e-10 && sc_err < 1e-10 && l1_err < 1e-10,
        format!("|loss(y,y)| {same:.1e}, max |L_sc(y,ay) - |1-a|| {sc_err:.1e}, |loss_b=0 - L1| {l1_err:.1e}"),
    )
}

fn frame_geometry() -> Outcome {
    let config = DemucsConfig::reference(48);
    let g = StreamGeometry::new(&config, Lookahead::Paper).unwrap();
    // receptive field at the upsampled rate: r <- (r - 1) S + K per layer
    let mut r: usize = 1;
    for _ in 0..5 {
        r = (r - 1) * 4 + 8;
    }
    let frame = r.div_ceil(4);
    let ms = |n: usize| n * 1000 / 16_000;
    let want = (16, 37, 3, 40);
    let got = (
        g.ms(g.stride),
        g.ms(g.model_frame),
        g.ms(g.lookahead),
        g.ms(g.total_frame()),
    );
    let pass = config.depth == 5
        && (
            config.kernel,
            config.stride,
            config.resample,
            config.sample_rate,
        ) == (8, 4, 4, 16_000)
        && g.stride == 4usize.pow(5) / 4
        && g.model_frame == frame
        && (ms(g.stride), ms(frame), ms(48), ms(frame + 48)) == want
        && got == want;
    outcome(
        pass,
        format!(
            "stride {} ms, model frame {} ms, lookahead {} ms, total frame {} ms",
            got.0, got.1, got.2, got.3
        ),
    )
}

fn resample_checks() -> Outcome {
    let f = SincFilter::default();
    let n = 4096;
    let edge = 256;
    let mut worst_snr = f64::INFINITY;
    let mut worst_adj: f64 = 0.0;
    for factor in [2, 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(factor as u64);
        // sinusoids below 0.8 of Nyquist
        let mut x = vec![0.0; n];
        for _ in 0..12 {
            let freq = rng.random_range(0.0..0.4);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.1..1.0);
            for (t, v) in x.iter_mut().enumerate() {
                *v += amp * (2.0 * PI * freq * t as f64 + phase).sin();
            }
        }
        let back = downsample(&upsample(&x, factor, &f).unwrap(), factor, &f).unwrap();
        let err: Vec<f64> = back[edge..n - edge]
            .iter()
            .zip(&x[edge..n - edge])
            .map(|(a, b)| a - b)
            .collect();
        let snr = 20.0 * (norm(&x[edge..n - edge]) / norm(&err)).log10();
        worst_snr = worst_snr.min(snr);

        let a = white(n, 10 + factor as u64);
        let up = upsample(&a, factor, &f).unwrap();
        let g = white(up.len(), 20 + factor as u64);
        let lhs = dot(&up, &g);
        let rhs = dot(&a, &upsample_adjoint(&g, factor, &f).unwrap());
        worst_adj = worst_adj.max((lhs - rhs).abs() / (norm(&up) * norm(&g)));

        let down = downsample(&up, factor, &f).unwrap();
        let h = white(down.len(), 30 + factor as u64);
        let lhs = dot(&down, &h);
        let rhs = dot(&up, &downsample_adjoint(&h, up.len(), factor, &f).unwrap());
        worst_adj = worst_adj.max((lhs - rhs).abs() / (norm(&down) * norm(&h)));
    }
    outcome(
        worst_snr > 40.0 && worst_adj < 1e-10,
        format!("round-trip SNR {worst_snr:.1} dB (> 40), adjoint error {worst_adj:.1e} (< 1e-10), factors 2 and 4"),
    )
}

fn revecho_closed_form() -> Outcome {
    let sr = 16_000.0;
    let p = RevechoParams {
        initial: 0.3,
        delay: 0.030,
        rt60: 0.3,
        jitter: 0.0,
    };
    let rho = 10f64.powf(-3.0 * p.delay / p.rt60);
    let count = 10;
    let mut x = vec![0.0; 16_000];
    x[0] = 1.0;
    let factors = p.draw_jitter(&mut ChaCha8Rng::seed_from_u64(0));
    let tail = echo_train(&x, &p, &factors, sr);
    let mut expected = vec![0.0; x.len()];
    for k in 1..=count {
        expected[k * 480] = p.initial * rho.powi(k as i32);
    }
    let support_ok = tail
        .iter()
        .zip(&expected)
        .all(|(a, b)| (*a == 0.0) == (*b == 0.0));
    let value_err = tail
        .iter()
        .zip(&expected)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    // N and ρ^N over random draws
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bound_ok = p.count() == count && (p.rho() - rho).abs() < 1e-14;
    for _ in 0..1000 {
        let q = RevechoParams::sample(&mut rng);
        let r = 10f64.powf(-3.0 * q.delay / q.rt60);
        let n = q.count() as i32;
        bound_ok &= r.powi(n) <= 1e-3 * (1.0 + 1e-9) && r.powi(n - 1) > 1e-3 * (1.0 - 1e-9);
    }
    outcome(
        support_ok && value_err < 1e-12 && bound_ok,
        format!(
            "tau 30 ms, RT60 0.3 s: N = {}, rho^N = {:.3e}, echo positions exact: {support_ok}, max gain error {value_err:.1e}; rho^N <= 1e-3 < rho^(N-1) over 1000 draws: {bound_ok}",
            p.count(),
            p.rho().powi(p.count() as i32)
        ),
    )
}

/// Amplitude of the `freq` (Hz) component over `x[a..b]`.
fn tone_amplitude(x: &[f64], freq: f64, sr: f64, a: usize, b: usize) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate().take(b).skip(a) {
        let w = 2.0 * PI * freq * t as f64 / sr;
        c += v * w.cos();
        s += v * w.sin();
    }
    2.0 * (c * c + s * s).sqrt() / (b - a) as f64
}

fn bandmask_checks() -> Outcome {
    let sr = 16_000.0;
    let top = mel(sr / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut width_err: f64 = 0.0;
    for _ in 0..1000 {
        let (f0, f1) = draw_band(0.2, sr, &mut rng).unwrap();
        assert!(f0 >= 0.0 && f1 <= sr / 2.0 + 1e-9);
        width_err = width_err.max(((mel(f1) - mel(f0)) / top - 0.2).abs());
    }

    let n = 48_000;
    let (a, b) = (16_000, 32_000);
    let mut worst_stop = f64::INFINITY;
    let mut worst_pass: f64 = 0.0;
    for _ in 0..8 {
        let (f0, f1) = draw_band(0.2, sr, &mut rng).unwrap();
        let (m0, m1) = (mel(f0), mel(f1));
        let to_hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let mut probes = vec![(to_hz(0.5 * (m0 + m1)), true)];
        for m in [m0 - 0.05 * top, m1 + 0.05 * top] {
            if m > 0.02 * top && m < 0.98 * top {
                probes.push((to_hz(m), false));
            }
        }
        for (freq, stop) in probes {
            let x: Vec<f64> = (0..n)
                .map(|t| (2.0 * PI * freq * t as f64 / sr).sin())
                .collect();
            let y = band_stop(&x, f0, f1, sr);
            let db = 20.0
                * (tone_amplitude(&x, freq, sr, a, b) / tone_amplitude(&y, freq, sr, a, b)).log10();
            if stop {
                worst_stop = worst_stop.min(db);
            } else {
                worst_pass = worst_pass.max(db.abs());
            }
        }
    }
    outcome(
        worst_stop >= 20.0 && worst_pass <= 1.0 && width_err <= 0.01,
        format!(
            "stop-band attenuation >= {worst_stop:.1} dB, pass-band change <= {worst_pass:.3} dB, band width 20% of mel axis within {:.1e}",
            width_err
        ),
    )
}

fn toy_overfit() -> Outcome {
    let config = DemucsConfig::toy();
    let drops: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..3u64)
            .map(|seed| {
                s.spawn(move || {
                    let mut params = init_params(&config, seed).unwrap();
                    let y = synth::voiced(4000, 16_000, seed);
                    let batch = wden_core::augment::PairBatch::new(
                        Tensor::from_signal(&y),
                        Tensor::from_signal(&vec![0.0; y.len()]),
                    )
                    .unwrap();
                    let opts = FitOptions {
                        seed,
                        ..FitOptions::default()
                    };
                    let curve = train::overfit(&mut params, &config, &batch, 500, &opts).unwrap();
                    1.0 - curve[500] / curve[0]
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut sorted = drops.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[1];
    let listed = drops
        .iter()
        .map(|d| format!("{:.1}%", 100.0 * d))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        median >= 0.5,
        format!(
            "loss drop over 500 steps: {listed}; median {:.1}% (>= 50%)",
            100.0 * median
        ),
    )
}

fn rtf_protocol() -> Outcome {
    let g = StreamGeometry::new(&DemucsConfig::reference(48), Lookahead::Paper).unwrap();
    let stride = Duration::from_secs_f64(g.stride as f64 / f64::from(g.sample_rate));
    let r = bench::time_frames(&g, 60, |_| {
        std::thread::sleep(stride);
        Ok(())
    })
    .unwrap();
    let mean = r.frame_times.iter().sum::<f64>() / r.frame_times.len() as f64;
    let by_definition = mean / 0.016;
    outcome(
        (r.rtf - 1.0).abs() <= 0.05 && (r.rtf - by_definition).abs() < 1e-12,
        format!(
            "RTF {:.4} with a one-stride sleep per frame (1.0 +- 0.05)",
            r.rtf
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("streaming equivalence", streaming_equivalence),
        ("gradient suite", gradient_suite),
        ("loss identities", loss_identities),
        ("frame geometry", frame_geometry),
        ("resample round trip", resample_checks),
        ("revecho closed form", revecho_closed_form),
        ("bandmask", bandmask_checks),
        ("toy overfit", toy_overfit),
        ("RTF protocol", rtf_protocol),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {name}: {} [{:.1} s]",
            o.detail,
            t0.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
