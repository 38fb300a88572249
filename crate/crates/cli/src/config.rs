//! Experiment configuration: built-in defaults, then `RLNC_SEED`, then the
//! config file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use rlnc_core::simnet::{ProcessingBudget, SweepBase, SweepCell, SweepGrid};
use rlnc_core::switch::SwitchMode;
use rlnc_core::MulAlgorithm;
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "RLNC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(alias = "cod")]
    Encode,
    #[value(alias = "recod")]
    Recode,
}

impl From<ModeArg> for SwitchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Encode => SwitchMode::Encode,
            ModeArg::Recode => SwitchMode::Recode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Peasant,
    LogTable,
}

impl From<AlgorithmArg> for MulAlgorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Peasant => MulAlgorithm::Peasant,
            AlgorithmArg::LogTable => MulAlgorithm::LogTable,
        }
    }
}

/// Every setting an experiment depends on. Echoed verbatim into outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed of a single run; first seed of a sweep.
    pub seed: u64,
    /// Sweep seeds are `seed .. seed + seeds`.
    pub seeds: u64,
    pub generation_size: usize,
    pub symbols_per_packet: usize,
    pub symbol_size: usize,
    pub mode: SwitchMode,
    pub loss: f64,
    pub ack_loss: f64,
    pub delay: u64,
    pub switches: usize,
    pub generations: u32,
    pub gap: u64,
    /// Each fill emits `generation_size + replica_extra` packets.
    pub replica_extra: usize,
    /// Extra coded packets per generation from a pre-coding sender.
    pub redundancy: usize,
    pub max_generations: usize,
    pub mul_algorithm: MulAlgorithm,
    pub coeff_seed: u64,
    /// Per-switch work units per tick; 0 disables the budget.
    pub work_per_tick: u64,
    pub queue_capacity: usize,
    pub grid_generation_sizes: Vec<usize>,
    pub grid_symbols_per_packet: Vec<usize>,
    pub grid_modes: Vec<SwitchMode>,
    pub grid_losses: Vec<f64>,
    pub iterations: u64,
    pub format: Format,
    /// Not echoed into outputs.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            seeds: 10,
            generation_size: 8,
            symbols_per_packet: 4,
            symbol_size: 1,
            mode: SwitchMode::Encode,
            loss: 0.01,
            ack_loss: 0.0,
            delay: 1,
            switches: 1,
            generations: 30,
            gap: 1,
            replica_extra: 0,
            redundancy: 0,
            max_generations: 64,
            mul_algorithm: MulAlgorithm::LogTable,
            coeff_seed: 0,
            work_per_tick: 64,
            queue_capacity: 8,
            grid_generation_sizes: vec![4, 8, 16, 32],
            grid_symbols_per_packet: vec![2, 4],
            grid_modes: vec![SwitchMode::Encode, SwitchMode::Recode],
            grid_losses: vec![0.01],
            iterations: 1_000_000,
            format: Format::Csv,
            out: None,
        }
    }
}

/// Flags mirroring the config keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub seeds: Option<u64>,
    #[arg(long, global = true)]
    pub generation_size: Option<usize>,
    #[arg(long, global = true)]
    pub symbols_per_packet: Option<usize>,
    #[arg(long, global = true)]
    pub symbol_size: Option<usize>,
    #[arg(long, global = true)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true)]
    pub loss: Option<f64>,
    #[arg(long, global = true)]
    pub ack_loss: Option<f64>,
    #[arg(long, global = true)]
    pub delay: Option<u64>,
    #[arg(long, global = true)]
    pub switches: Option<usize>,
    #[arg(long, global = true)]
    pub generations: Option<u32>,
    #[arg(long, global = true)]
    pub gap: Option<u64>,
    #[arg(long, global = true)]
    pub replica_extra: Option<usize>,
    #[arg(long, global = true)]
    pub redundancy: Option<usize>,
    #[arg(long, global = true)]
    pub max_generations: Option<usize>,
    #[arg(long, global = true)]
    pub mul_algorithm: Option<AlgorithmArg>,
    #[arg(long, global = true)]
    pub coeff_seed: Option<u64>,
    #[arg(long, global = true)]
    pub work_per_tick: Option<u64>,
    #[arg(long, global = true)]
    pub queue_capacity: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub grid_generation_sizes: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub grid_symbols_per_packet: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub grid_modes: Option<Vec<ModeArg>>,
    #[arg(long, global = true, value_delimiter = ',', num_args = 0..)]
    pub grid_losses: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub iterations: Option<u64>,
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident, $($field:ident),+) => {
        $(if let Some(v) = $ov.$field.clone() { $cfg.$field = v.into(); })+
    };
}

impl ExperimentConfig {
    pub fn resolve(overrides: &Overrides, env_seed: Option<String>) -> Result<Self> {
        let mut base = ExperimentConfig::default();
        if let Some(s) = env_seed {
            base.seed = s
                .trim()
                .parse()
                .map_err(|e| anyhow!("{SEED_ENV}={s:?} is not a valid seed: {e}"))?;
        }
        let mut cfg = match &overrides.config {
            Some(path) => base.merge_file(path)?,
            None => base,
        };
        let ov = overrides;
        apply!(
            cfg,
            ov,
            seed,
            seeds,
            generation_size,
            symbols_per_packet,
            symbol_size,
            loss,
            ack_loss,
            delay,
            switches,
            generations,
            gap,
            replica_extra,
            redundancy,
            max_generations,
            coeff_seed,
            work_per_tick,
            queue_capacity,
            grid_generation_sizes,
            grid_symbols_per_packet,
            grid_losses,
            iterations,
            format
        );
        if let Some(m) = ov.mode {
            cfg.mode = m.into();
        }
        if let Some(a) = ov.mul_algorithm {
            cfg.mul_algorithm = a.into();
        }
        if let Some(modes) = &ov.grid_modes {
            cfg.grid_modes = modes.iter().map(|&m| m.into()).collect();
        }
        if ov.out.is_some() {
            cfg.out = ov.out.clone();
        }
        Ok(cfg)
    }

    fn merge_file(self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
        let file: toml::Table =
            toml::from_str(&text).with_context(|| format!("cannot parse config file {}", path.display()))?;
        let mut merged = toml::Table::try_from(&self).expect("config serializes to a table");
        merged.extend(file);
        toml::Value::Table(merged)
            .try_into()
            .with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn budget(&self) -> Option<ProcessingBudget> {
        (self.work_per_tick > 0).then_some(ProcessingBudget {
            work_per_tick: self.work_per_tick,
            queue_capacity: self.queue_capacity,
        })
    }

    pub fn sweep_base(&self) -> SweepBase {
        SweepBase {
            switches: self.switches,
            budget: self.budget(),
            delay: self.delay,
            ack_loss: self.ack_loss,
            replica_extra: self.replica_extra,
            max_generations: self.max_generations,
            generations: self.generations,
            gap: self.gap,
            symbol_size: self.symbol_size,
            mul_algorithm: self.mul_algorithm,
            coeff_seed: self.coeff_seed,
        }
    }

    pub fn cell(&self) -> SweepCell {
        SweepCell {
            generation_size: self.generation_size,
            symbols_per_packet: self.symbols_per_packet,
            mode: self.mode,
            loss: self.loss,
        }
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            generation_sizes: self.grid_generation_sizes.clone(),
            symbols_per_packet: self.grid_symbols_per_packet.clone(),
            modes: self.grid_modes.clone(),
            losses: self.grid_losses.clone(),
        }
    }

    pub fn seed_list(&self) -> Result<Vec<u64>> {
        if self.seeds == 0 {
            bail!("seeds must be at least 1");
        }
        let end = self
            .seed
            .checked_add(self.seeds)
            .ok_or_else(|| anyhow!("seed range {} + {} overflows", self.seed, self.seeds))?;
        Ok((self.seed..end).collect())
    }
}
