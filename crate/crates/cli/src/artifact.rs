//! On-disk artifact shapes shared by the subcommands: the achieving-config
//! dump (read back by `simulate --rates-from`), the experiment config, and
//! the run manifest. The manifest is written last, so its presence marks a
//! completed run.

use crate::Failure;
use mtrd_core::{
    Alphabet, Channel, DistortionMeasure, JointPmf, ReconMap, RegionFrontier, SourceModel,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Human-readable name for a terminal-subset bitmask: "1", "2", "1_2".
pub fn subset_label(mask: u32) -> String {
    let mut parts = Vec::new();
    for t in 0..32 {
        if mask >> t & 1 == 1 {
            parts.push((t + 1).to_string());
        }
    }
    parts.join("_")
}

#[derive(Serialize, Deserialize)]
pub struct ChannelDoc {
    pub output_size: usize,
    /// rows[x][z] = P(z | x), one row per input symbol.
    pub rows: Vec<Vec<f64>>,
}

impl ChannelDoc {
    pub fn from_channel(ch: &Channel) -> ChannelDoc {
        ChannelDoc {
            output_size: ch.output().len(),
            rows: (0..ch.input().len())
                .map(|x| ch.row(x).expect("search channels are fully defined").to_vec())
                .collect(),
        }
    }

    pub fn to_channel(&self, input: &Alphabet) -> Result<Channel, Failure> {
        Channel::new(
            input.clone(),
            Alphabet::indexed(self.output_size),
            self.rows.clone(),
        )
        .map_err(Failure::Core)
    }
}

#[derive(Serialize, Deserialize)]
pub struct ReconDoc {
    pub y_size: usize,
    /// One entry per (side, outputs) cell; null where the decoder can never
    /// land.
    pub cells: Vec<Option<usize>>,
}

impl ReconDoc {
    pub fn from_recon(r: &ReconMap) -> ReconDoc {
        ReconDoc {
            y_size: r.y_size,
            cells: (0..r.len()).map(|c| r.get(c)).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct CornerDoc {
    /// Nats per symbol, one per terminal.
    pub rates: Vec<f64>,
    /// Rate-sum lower bound per terminal subset.
    pub bounds: BTreeMap<String, f64>,
    /// Expected distortion achieved per measure.
    pub distortions: Vec<f64>,
    pub channels: Vec<ChannelDoc>,
    pub recons: Vec<ReconDoc>,
}

#[derive(Serialize, Deserialize)]
pub struct AchievingDoc {
    pub terminals: Vec<String>,
    pub side: Option<String>,
    /// Least bound seen per subset across all kept corners.
    pub subset_bounds: BTreeMap<String, f64>,
    pub corners: Vec<CornerDoc>,
}

impl AchievingDoc {
    pub fn build(
        frontier: &RegionFrontier,
        components: &[(&JointPmf, f64)],
        x_vars: &[&str],
        side: Option<&str>,
        measures: &[DistortionMeasure],
    ) -> Result<AchievingDoc, Failure> {
        let mut corners = Vec::with_capacity(frontier.corners.len());
        for corner in &frontier.corners {
            let recons =
                mtrd_core::corner_recons(components, x_vars, side, measures, &corner.channels)?;
            corners.push(CornerDoc {
                rates: corner.rates.clone(),
                bounds: corner
                    .bounds
                    .iter()
                    .map(|(&m, &v)| (subset_label(m), v))
                    .collect(),
                distortions: corner.distortions.clone(),
                channels: corner.channels.iter().map(ChannelDoc::from_channel).collect(),
                recons: recons.iter().map(ReconDoc::from_recon).collect(),
            });
        }
        Ok(AchievingDoc {
            terminals: x_vars.iter().map(|s| s.to_string()).collect(),
            side: side.map(str::to_string),
            subset_bounds: frontier
                .subset_bounds
                .iter()
                .map(|(&m, &v)| (subset_label(m), v))
                .collect(),
            corners,
        })
    }

    pub fn load(path: &Path) -> Result<AchievingDoc, Failure> {
        parse_json_file(path)
    }

    /// Corner with the least sum rate (what a replay wants by default).
    pub fn min_sum_corner(&self) -> Result<&CornerDoc, Failure> {
        self.corners
            .iter()
            .min_by(|a, b| {
                a.rates
                    .iter()
                    .sum::<f64>()
                    .total_cmp(&b.rates.iter().sum::<f64>())
            })
            .ok_or_else(|| Failure::Input("achieving config has no corners".into()))
    }
}

// ---------------------------------------------------------------------------
// Experiment config
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(untagged)]
pub enum ChannelsDoc {
    /// "identity": noiseless copy per terminal.
    Named(String),
    /// Explicit per-terminal rows.
    Inline(Vec<ChannelDoc>),
    /// Pull channels from a frontier run.
    Replay {
        file: String,
        /// Corner index; least-sum-rate corner when omitted.
        corner: Option<usize>,
    },
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum TargetDoc {
    /// Reproduce one terminal exactly-or-not (0/1 loss) at mean level `distortion`.
    Hamming { terminal: usize, distortion: f64 },
    /// Explicit table, flattened x-major then y.
    Table {
        table: Vec<f64>,
        y_size: usize,
        distortion: f64,
    },
}

#[derive(Deserialize)]
pub struct SlacksDoc {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

#[derive(Deserialize)]
pub struct ExperimentDoc {
    /// Source model JSON, relative to this config file.
    pub model: String,
    /// May be omitted when --rates-from supplies replay channels.
    pub channels: Option<ChannelsDoc>,
    /// Nats per symbol per terminal; may come from --rates/--rates-from instead.
    pub rates: Option<Vec<f64>>,
    pub targets: Vec<TargetDoc>,
    pub n_grid: Vec<u32>,
    pub trials: u64,
    pub seed: u64,
    pub slacks: Option<SlacksDoc>,
    pub enforce_slack_relation: Option<bool>,
    pub tuple_cap: Option<u64>,
}

impl ExperimentDoc {
    pub fn load(path: &Path) -> Result<ExperimentDoc, Failure> {
        parse_json_file(path)
    }
}

pub fn parse_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Failure::Input(format!(
            "{} at `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

/// Resolve a path mentioned inside a config file relative to that file.
pub fn sibling(config: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn load_model(path: &Path) -> Result<SourceModel, Failure> {
    SourceModel::from_path(path).map_err(Failure::Core)
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct Manifest {
    /// The exact invocation.
    pub command: Vec<String>,
    pub config_path: String,
    pub seed: u64,
    pub tool_version: String,
    /// Every artifact this run wrote, relative to the out dir.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub struct ManifestBuilder {
    argv: Vec<String>,
    config_path: String,
    seed: u64,
    outputs: Vec<String>,
    started: std::time::Instant,
}

impl ManifestBuilder {
    pub fn new(argv: &[String], config_path: &Path, seed: u64) -> ManifestBuilder {
        ManifestBuilder {
            argv: argv.to_vec(),
            config_path: config_path.display().to_string(),
            seed,
            outputs: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn add(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Write manifest.json. Call only after every other artifact is on disk.
    pub fn finish(self, out_dir: &Path) -> Result<(), Failure> {
        let doc = Manifest {
            command: self.argv,
            config_path: self.config_path,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        crate::emit::write_json(&out_dir.join("manifest.json"), &doc)
    }
}
