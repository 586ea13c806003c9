//! The `L,H,K,S,U,causal` model description used on the command line.

use wden_core::DemucsConfig;

use crate::{Error, Result};

/// Parses `L,H,K,S,U,causal`, where the last field is `causal` or
/// `noncausal` (also `true` / `false`). An optional seventh field `nonorm`
/// turns input normalization off.
pub fn parse_config(s: &str) -> Result<DemucsConfig> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if !(6..=7).contains(&parts.len()) {
        return Err(Error::Usage(format!(
            "config '{s}' must look like L,H,K,S,U,causal"
        )));
    }
    let num = |i: usize, what: &str| -> Result<usize> {
        parts[i].parse().map_err(|_| {
            Error::Usage(format!(
                "config field {what} = '{}' is not a count",
                parts[i]
            ))
        })
    };
    let causal = match parts[5] {
        "causal" | "true" => true,
        "noncausal" | "false" => false,
        other => return Err(Error::Usage(format!("config field causal = '{other}'"))),
    };
    let normalize = match parts.get(6) {
        None => true,
        Some(&"nonorm") => false,
        Some(other) => return Err(Error::Usage(format!("unknown config flag '{other}'"))),
    };
    let config = DemucsConfig {
        depth: num(0, "L")?,
        hidden: num(1, "H")?,
        kernel: num(2, "K")?,
        stride: num(3, "S")?,
        resample: num(4, "U")?,
        causal,
        normalize,
        ..DemucsConfig::reference(48)
    };
    config.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(config)
}

pub fn format_config(c: &DemucsConfig) -> String {
    let mut s = format!(
        "{},{},{},{},{},{}",
        c.depth,
        c.hidden,
        c.kernel,
        c.stride,
        c.resample,
        if c.causal { "causal" } else { "noncausal" }
    );
    if !c.normalize {
        s.push_str(",nonorm");
    }
    s
}
