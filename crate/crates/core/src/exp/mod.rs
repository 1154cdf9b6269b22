//! Experiment plumbing shared by every module: configuration files, seed
//! derivation, the action registry and CSV output with provenance headers.
//!
//! A run expands the sweep grid into points and each point into `repeat`
//! replicates. Replicate `r` of every point draws from stream `r` of the
//! root seed (see [`derive_seed`]), so sweep points share random numbers.
//! Output goes to one directory per unit (`point-<k>/`, `rep-<r>/`, or the
//! output directory itself for a single unit) with an `index.csv` when
//! there is more than one unit, and a `manifest.json` at the top.

mod config;
mod registry;
mod runners;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{parse_config, parse_config_for, ConfigError, ExperimentConfig, Module};
pub use registry::{actions, schema, Fallback, Kind, ParamSpec, Params};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed of stream `counter` under `root`: the first output of ChaCha8
/// seeded with `seed_from_u64(root)` after `set_stream(counter)`.
pub fn derive_seed(root: u64, counter: u64) -> u64 {
    trial_rng(root, counter).next_u64()
}

/// The generator behind [`derive_seed`].
pub fn trial_rng(root: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(counter);
    rng
}

/// One output file of a unit, before the provenance header is added.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    /// Column header of a CSV file; `None` for other text.
    pub columns: Option<String>,
    pub body: String,
}

impl Artifact {
    pub fn csv(name: &str, columns: &str) -> Self {
        Self {
            name: name.to_string(),
            columns: Some(columns.to_string()),
            body: String::new(),
        }
    }

    pub fn text(name: &str, body: String) -> Self {
        Self {
            name: name.to_string(),
            columns: None,
            body,
        }
    }

    pub fn row(&mut self, line: impl std::fmt::Display) {
        let _ = writeln!(self.body, "{line}");
    }

    fn render(&self, header: &str) -> String {
        let mut out = String::from(header);
        if let Some(columns) = &self.columns {
            out.push_str(columns);
            out.push('\n');
        }
        out.push_str(&self.body);
        out
    }
}

/// Header lines shared by every file of one unit: version, config hash
/// and seeds, then the unit's resolved configuration as comments.
fn header(config: &ExperimentConfig, unit: &Unit) -> String {
    let mut resolved = config.clone();
    resolved.sweep.clear();
    resolved.repeat = 1;
    resolved.out = None;
    resolved.params = unit.params.clone();
    let mut out = format!(
        "# spdyn {VERSION} config={} seed={} stream={} unit_seed={}\n",
        config.hash(),
        config.seed,
        unit.rep,
        unit.seed
    );
    for line in resolved.to_text().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out
}

/// Strips the leading `#` header lines of an output file.
pub fn strip_header(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, tail)| tail);
    }
    rest
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time: f64,
    pub files: Vec<ManifestFile>,
}

impl RunManifest {
    /// `(path, sha256)` pairs; equal for equal (config, seed).
    pub fn file_hashes(&self) -> Vec<(&str, &str)> {
        self.files
            .iter()
            .map(|f| (f.path.as_str(), f.sha256.as_str()))
            .collect()
    }
}

struct Unit {
    point: usize,
    rep: usize,
    seed: u64,
    params: Vec<(String, toml::Value)>,
    dir: PathBuf,
}

fn units(config: &ExperimentConfig) -> Vec<Unit> {
    let grid = config.grid();
    let specs = config.schema();
    let swept = !config.sweep.is_empty();
    let repeated = config.repeat > 1;
    let mut out = Vec::with_capacity(grid.len() * config.repeat);
    for (point, given) in grid.iter().enumerate() {
        // Resolved values in schema order, derived ones left out.
        let resolved = Params::resolve(specs, given);
        let params = specs
            .iter()
            .filter_map(|s| resolved.value(s.key).map(|v| (s.key.to_string(), v.clone())))
            .collect::<Vec<_>>();
        for rep in 0..config.repeat {
            let mut dir = PathBuf::new();
            if swept {
                dir.push(format!("point-{point:03}"));
            }
            if repeated {
                dir.push(format!("rep-{rep}"));
            }
            out.push(Unit {
                point,
                rep,
                seed: derive_seed(config.seed, rep as u64),
                params: params.clone(),
                dir,
            });
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(contents.as_bytes())))
}

/// Runs every unit on a pool of `jobs` threads, then writes all files
/// from the calling thread in unit order and returns the manifest.
pub fn run(config: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<RunManifest> {
    let started = Instant::now();
    let units = units(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start {jobs} workers: {e}")))?;
    let results: Vec<Result<Vec<Artifact>>> = pool.install(|| {
        units
            .par_iter()
            .map(|u| {
                let params = Params::resolve(config.schema(), &u.params);
                runners::dispatch(config.module, &config.action, &params, u.seed).map_err(|e| Error::InExperiment {
                    context: format!(
                        "{} {} {} (point {}, replicate {})",
                        config.id,
                        config.module.as_str(),
                        config.action,
                        u.point,
                        u.rep
                    ),
                    source: Box::new(e),
                })
            })
            .collect()
    });

    let mut files = Vec::new();
    let mut record = |rel: PathBuf, contents: &str| -> Result<()> {
        let sha256 = write_file(&out_dir.join(&rel), contents)?;
        files.push(ManifestFile {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256,
        });
        Ok(())
    };
    for (unit, result) in units.iter().zip(results) {
        let head = header(config, unit);
        for artifact in result? {
            record(unit.dir.join(&artifact.name), &artifact.render(&head))?;
        }
    }
    if units.len() > 1 {
        let mut index = Artifact::csv("index.csv", &index_columns(config));
        for u in &units {
            let mut line = format!("{},{}", u.point, u.rep);
            for (key, _) in &config.sweep {
                let v = u
                    .params
                    .iter()
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.to_string())
                    .unwrap_or_default();
                let _ = write!(line, ",{}", v.replace(',', ";"));
            }
            let _ = write!(line, ",{},{}", u.seed, u.dir.to_string_lossy().replace('\\', "/"));
            index.row(line);
        }
        let head = format!("# spdyn {VERSION} config={} seed={}\n", config.hash(), config.seed);
        record(PathBuf::from("index.csv"), &index.render(&head))?;
    }

    let manifest = RunManifest {
        config_hash: config.hash(),
        seed: config.seed,
        version: VERSION.to_string(),
        wall_time: started.elapsed().as_secs_f64(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out_dir.join("manifest.json"), &(json + "\n"))?;
    Ok(manifest)
}

fn index_columns(config: &ExperimentConfig) -> String {
    let mut cols = String::from("point,rep");
    for (key, _) in &config.sweep {
        cols.push(',');
        cols.push_str(key);
    }
    cols.push_str(",seed,dir");
    cols
}
