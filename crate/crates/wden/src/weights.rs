//! The `WDEN1` weight container.
//!
//! ```text
//! "WDEN1"                      5 bytes
//! header length                u32, little-endian
//! header                       UTF-8 `key=value` lines
//! payload                      f32, little-endian, tensors in manifest order
//! ```
//!
//! Header keys are `depth`, `hidden`, `kernel`, `stride`, `resample`,
//! `causal`, `normalize`, `floor` and `sample_rate`, then one line per
//! tensor: `tensor=<name> <d0>x<d1>x<d2> <byte offset into the payload>`.

use std::path::Path;

use wden_core::{DemucsConfig, ModelParams};

use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"WDEN1";

fn header(config: &DemucsConfig, params: &ModelParams) -> String {
    let mut h = format!(
        "depth={}\nhidden={}\nkernel={}\nstride={}\nresample={}\ncausal={}\nnormalize={}\nfloor={:?}\nsample_rate={}\n",
        config.depth,
        config.hidden,
        config.kernel,
        config.stride,
        config.resample,
        config.causal,
        config.normalize,
        config.floor,
        config.sample_rate
    );
    let mut offset = 0;
    for (name, t) in params.named() {
        let [a, b, c] = t.shape();
        h.push_str(&format!("tensor={name} {a}x{b}x{c} {offset}\n"));
        offset += 4 * t.numel();
    }
    h
}

/// Serializes `params` to bytes. Values are rounded to `f32`.
pub fn to_bytes(config: &DemucsConfig, params: &ModelParams) -> Result<Vec<u8>> {
    params.check(config)?;
    let h = header(config, params);
    let mut out = Vec::with_capacity(9 + h.len() + 4 * params.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(h.len() as u32).to_le_bytes());
    out.extend_from_slice(h.as_bytes());
    for (_, t) in params.named() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_params(
    path: impl AsRef<Path>,
    config: &DemucsConfig,
    params: &ModelParams,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(config, params)?;
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_shape(s: &str) -> Option<[usize; 3]> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|d| d.parse().ok())
        .collect::<Option<_>>()?;
    dims.try_into().ok()
}

/// Parses a container. `origin` only labels errors.
pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<(DemucsConfig, ModelParams)> {
    let bad = |msg: String| Error::format(origin, msg);
    if bytes.len() < 9 || &bytes[..5] != MAGIC {
        return Err(bad("not a WDEN1 weight file (bad magic)".into()));
    }
    let hlen = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let text = bytes
        .get(9..9 + hlen)
        .ok_or_else(|| bad(format!("header of {hlen} bytes is truncated")))?;
    let text = std::str::from_utf8(text).map_err(|_| bad("header is not UTF-8".into()))?;

    let mut config = DemucsConfig::reference(0);
    let mut tensors = Vec::new();
    let mut seen = Vec::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line '{line}'")))?;
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| bad(format!("{key} = '{value}' is not a count")))
        };
        let flag = || {
            value
                .parse::<bool>()
                .map_err(|_| bad(format!("{key} = '{value}' is not a boolean")))
        };
        match key {
            "depth" => config.depth = count()?,
            "hidden" => config.hidden = count()?,
            "kernel" => config.kernel = count()?,
            "stride" => config.stride = count()?,
            "resample" => config.resample = count()?,
            "causal" => config.causal = flag()?,
            "normalize" => config.normalize = flag()?,
            "floor" => {
                config.floor = value
                    .parse()
                    .map_err(|_| bad(format!("floor = '{value}'")))?
            }
            "sample_rate" => {
                config.sample_rate = value
                    .parse()
                    .map_err(|_| bad(format!("sample_rate = '{value}'")))?
            }
            "tensor" => {
                let f: Vec<&str> = value.split(' ').collect();
                let (name, shape, offset) = match f.as_slice() {
                    [n, s, o] => (*n, parse_shape(s), o.parse::<usize>().ok()),
                    _ => return Err(bad(format!("malformed tensor line '{line}'"))),
                };
                let shape = shape.ok_or_else(|| bad(format!("tensor {name}: malformed shape")))?;
                let offset =
                    offset.ok_or_else(|| bad(format!("tensor {name}: malformed offset")))?;
                tensors.push((name.to_string(), shape, offset));
                continue;
            }
            other => return Err(bad(format!("unknown header key '{other}'"))),
        }
        seen.push(key);
    }
    for key in ["depth", "hidden", "kernel", "stride", "resample", "causal"] {
        if !seen.contains(&key) {
            return Err(bad(format!("header lacks '{key}'")));
        }
    }
    config
        .validate()
        .map_err(|e| bad(format!("embedded config is invalid: {e}")))?;

    let manifest = ModelParams::manifest(&config)?;
    if manifest.len() != tensors.len() {
        return Err(bad(format!(
            "header lists {} tensors, the config needs {}",
            tensors.len(),
            manifest.len()
        )));
    }
    let mut expected_offset = 0;
    for ((name, shape), (got, got_shape, offset)) in manifest.iter().zip(&tensors) {
        if name != got {
            return Err(bad(format!("tensor {got} found where {name} belongs")));
        }
        if shape != got_shape {
            return Err(bad(format!(
                "tensor {name} has shape {got_shape:?}, the config needs {shape:?}"
            )));
        }
        if *offset != expected_offset {
            return Err(bad(format!(
                "tensor {name} starts at byte {offset}, expected {expected_offset}"
            )));
        }
        expected_offset += 4 * shape.iter().product::<usize>();
    }
    let payload = &bytes[9 + hlen..];
    if payload.len() != expected_offset {
        return Err(bad(format!(
            "payload is {} bytes, the manifest needs {expected_offset}",
            payload.len()
        )));
    }

    let mut params = ModelParams::zeros(&config)?;
    let mut floats = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))));
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = floats.next().expect("length checked");
        }
    }
    Ok((config, params))
}

/// Loads a container; with `expected` set, the embedded config must match it.
pub fn load_params(
    path: impl AsRef<Path>,
    expected: Option<&DemucsConfig>,
) -> Result<(DemucsConfig, ModelParams)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (config, params) = from_bytes(&bytes, path)?;
    if let Some(want) = expected {
        if *want != config {
            return Err(Error::format(
                path,
                format!("file holds a model for {config:?}, which is inconsistent with the requested {want:?}"),
            ));
        }
    }
    Ok((config, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use wden_core::model::init_params;

    #[test]
    fn round_trip_is_bitwise() {
        let config = DemucsConfig {
            causal: false,
            ..DemucsConfig::toy()
        };
        let params = init_params(&config, 3).unwrap();
        let bytes = to_bytes(&config, &params).unwrap();
        let (c, p) = from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(c, config);
        assert_eq!(p, params);
        assert_eq!(to_bytes(&c, &p).unwrap(), bytes);
    }

    #[test]
    fn detects_corruption() {
        let config = DemucsConfig::toy();
        let params = init_params(&config, 3).unwrap();
        let bytes = to_bytes(&config, &params).unwrap();
        let origin = Path::new("mem");

        let mut wrong_magic = bytes.clone();
        wrong_magic[4] = b'2';
        assert!(from_bytes(&wrong_magic, origin)
            .unwrap_err()
            .to_string()
            .contains("magic"));

        let truncated = &bytes[..bytes.len() - 4];
        assert!(from_bytes(truncated, origin)
            .unwrap_err()
            .to_string()
            .contains("payload"));

        let text = String::from_utf8_lossy(&bytes).into_owned();
        let needle = "tensor=encoder.1.conv.weight 8x4x8";
        assert!(text.contains(needle));
        let mut shape_bad = bytes.clone();
        let at = text.find(needle).unwrap() + needle.len() - 1;
        shape_bad[at] = b'7';
        let err = from_bytes(&shape_bad, origin).unwrap_err().to_string();
        assert!(err.contains("encoder.1.conv.weight"), "{err}");
    }

    #[test]
    fn hidden_size_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h48.wden");
        let c48 = DemucsConfig {
            depth: 2,
            ..DemucsConfig::reference(48)
        };
        save_params(&path, &c48, &ModelParams::zeros(&c48).unwrap()).unwrap();
        let c64 = DemucsConfig { hidden: 64, ..c48 };
        let err = load_params(&path, Some(&c64)).unwrap_err().to_string();
        assert!(err.contains("inconsistent"), "{err}");
        assert!(load_params(&path, Some(&c48)).is_ok());
    }
}
