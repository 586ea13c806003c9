//! JSON and text renderings of the reports printed by the tool. Every JSON
//! object carries `"v": 1`.

use serde_json::{json, Value};
use wden_core::objective::LossReport;
use wden_core::stream::StreamReport;
use wden_core::train::GradReport;

pub const VERSION: u32 = 1;

pub fn stream_json(r: &StreamReport) -> Value {
    json!({
        "v": VERSION,
        "frame_size_ms": r.frame_size_ms,
        "model_frame_ms": r.model_frame_ms,
        "stride_ms": r.stride_ms,
        "lookahead_ms": r.lookahead_ms,
        "frames": r.frame_times.len(),
        "mean_frame_time_s": r.mean_frame_time,
        "p95_frame_time_s": r.p95_frame_time,
        "rtf": r.rtf,
    })
}

pub fn stream_text(r: &StreamReport) -> String {
    format!(
        "frame {:.2} ms (model {:.2} ms + lookahead {:.2} ms), stride {:.2} ms\n\
         {} frames, mean {:.3} ms, p95 {:.3} ms, RTF {:.3}",
        r.frame_size_ms,
        r.model_frame_ms,
        r.lookahead_ms,
        r.stride_ms,
        r.frame_times.len(),
        1e3 * r.mean_frame_time,
        1e3 * r.p95_frame_time,
        r.rtf
    )
}

pub fn loss_json(r: &LossReport) -> Value {
    let res: Vec<Value> = r
        .resolutions
        .iter()
        .map(|x| {
            json!({
                "n_fft": x.config.n_fft,
                "hop": x.config.hop,
                "win_length": x.config.win_length,
                "sc": x.sc,
                "mag": x.mag,
            })
        })
        .collect();
    json!({ "v": VERSION, "l1": r.l1, "stft_weight": r.stft_weight, "resolutions": res, "total": r.total })
}

pub fn loss_text(r: &LossReport) -> String {
    let mut s = format!("l1 {:.6e}\n", r.l1);
    for x in &r.resolutions {
        s.push_str(&format!(
            "stft {}/{}/{}: sc {:.6e} mag {:.6e}\n",
            x.config.n_fft, x.config.hop, x.config.win_length, x.sc, x.mag
        ));
    }
    s.push_str(&format!(
        "total {:.6e} (stft weight {})",
        r.total, r.stft_weight
    ));
    s
}

pub fn grad_json(r: &GradReport) -> Value {
    let t: Vec<Value> = r
        .tensors
        .iter()
        .map(|t| json!({ "name": t.name, "checked": t.checked, "rel_err": t.rel_err }))
        .collect();
    json!({ "v": VERSION, "loss": r.loss, "max_rel_err": r.max_rel_err, "passed": r.passed, "min_rel_magnitude": r.min_rel_magnitude, "tensors": t })
}

pub fn grad_text(r: &GradReport) -> String {
    let mut s = String::new();
    for t in &r.tensors {
        s.push_str(&format!(
            "{:<28} {:>5} {:.3e}\n",
            t.name, t.checked, t.rel_err
        ));
    }
    s.push_str(&format!(
        "smallest output STFT bin {:.3e} of the median\n",
        r.min_rel_magnitude
    ));
    s.push_str(&format!(
        "max rel err {:.3e}: {}",
        r.max_rel_err,
        if r.passed { "pass" } else { "FAIL" }
    ));
    s
}
