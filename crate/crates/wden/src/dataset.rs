//! A directory of noisy/clean pairs: `root/noisy/*.wav` and
//! `root/clean/*.wav`, matched by file name. The noise is `noisy − clean`.

use std::path::{Path, PathBuf};

use wden_core::augment::PairBatch;
use wden_core::Tensor;

use crate::wav::read_wav;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct PairDataset {
    root: PathBuf,
    names: Vec<String>,
}

/// One loaded pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub name: String,
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
    pub sample_rate: u32,
}

impl PairDataset {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let noisy = root.join("noisy");
        let entries = std::fs::read_dir(&noisy).map_err(|source| Error::Io {
            path: noisy.clone(),
            source,
        })?;
        let mut names = Vec::new();
        for e in entries {
            let e = e.map_err(|source| Error::Io {
                path: noisy.clone(),
                source,
            })?;
            let name = e.file_name().to_string_lossy().into_owned();
            if !name.ends_with(".wav") {
                continue;
            }
            if !root.join("clean").join(&name).is_file() {
                return Err(Error::format(e.path(), "no clean partner"));
            }
            names.push(name);
        }
        if names.is_empty() {
            return Err(Error::format(&noisy, "no .wav files"));
        }
        names.sort();
        Ok(Self { root, names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn load(&self, i: usize) -> Result<Pair> {
        let name = &self.names[i];
        let noisy_path = self.root.join("noisy").join(name);
        let (noisy, rate) = read_wav(&noisy_path)?;
        let (clean, clean_rate) = read_wav(self.root.join("clean").join(name))?;
        if clean.len() != noisy.len() || clean_rate != rate {
            return Err(Error::format(
                noisy_path,
                format!(
                    "clean partner has {} samples at {clean_rate} Hz, noisy has {} at {rate} Hz",
                    clean.len(),
                    noisy.len()
                ),
            ));
        }
        let noise = noisy.iter().zip(&clean).map(|(x, y)| x - y).collect();
        Ok(Pair {
            name: name.clone(),
            clean,
            noise,
            sample_rate: rate,
        })
    }

    /// Every pair cropped to the shortest one, as a training batch.
    pub fn batch(&self) -> Result<PairBatch> {
        let pairs = (0..self.len())
            .map(|i| self.load(i))
            .collect::<Result<Vec<_>>>()?;
        let len = pairs.iter().map(|p| p.clean.len()).min().unwrap_or(0);
        let clean: Vec<Vec<f64>> = pairs.iter().map(|p| p.clean[..len].to_vec()).collect();
        let noise: Vec<Vec<f64>> = pairs.iter().map(|p| p.noise[..len].to_vec()).collect();
        Ok(PairBatch::new(
            Tensor::from_signals(&clean)?,
            Tensor::from_signals(&noise)?,
        )?)
    }
}
