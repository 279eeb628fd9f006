//! Run configuration: one TOML file per run, strict about unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shockfront::pde::SimConfig;
use shockfront::reduced::{FastProbeOptions, SlowOptions};
use shockfront::riccati::RiccatiOptions;
use shockfront::wave::BvpOptions;
use shockfront::winding::{ContourOptions, LocalizeOptions};
use shockfront::ModelParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Wave,
    Essential,
    Evans,
    Winding,
    Fast,
    Slow,
    Simulate,
    ReproduceAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Wave => "wave",
            Command::Essential => "essential",
            Command::Evans => "evans",
            Command::Winding => "winding",
            Command::Fast => "fast",
            Command::Slow => "slow",
            Command::Simulate => "simulate",
            Command::ReproduceAll => "reproduce-all",
        }
    }
}

/// Format of plot-data files (borders, contours, paths, snapshots).
/// Reports and eigenvalue lists are always JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: Format,
    /// Worker cap for parallel λ evaluation.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub wave: WaveSection,
    #[serde(default)]
    pub essential: EssentialSection,
    #[serde(default)]
    pub evans: EvansSection,
    #[serde(default)]
    pub winding: WindingSection,
    #[serde(default)]
    pub fast: FastSection,
    #[serde(default)]
    pub slow: SlowSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveSection {
    pub eps: f64,
    /// Bracket for the singular wavespeed.
    pub c_bracket: (f64, f64),
    pub bvp: BvpOptions,
    /// Wave file read by downstream stages; defaults to `<output_dir>/wave.csv`.
    pub file: Option<PathBuf>,
}

impl Default for WaveSection {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            c_bracket: (0.17, 0.22),
            bvp: BvpOptions::default(),
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EssentialSection {
    /// Overrides the model ε for the borders; 1e-5 makes the region picture legible.
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub k_range: (f64, f64),
    pub n: usize,
    /// λ values (re, im) to classify.
    pub probes: Vec<[f64; 2]>,
}

impl Default for EssentialSection {
    fn default() -> Self {
        Self {
            eps: Some(1e-5),
            c: Some(0.19681),
            k_range: (-12.0, 12.0),
            n: 2401,
            probes: vec![[1.0, 0.0], [-2.5, 0.0], [-3.0, 2.0], [-3.0, -2.0], [-6.0, 0.0]],
        }
    }
}

fn contour_riccati() -> RiccatiOptions {
    RiccatiOptions {
        rtol: 1e-8,
        atol: 1e-10,
        ..RiccatiOptions::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvansSection {
    /// λ values (re, im) at which to evaluate E_T.
    pub lambdas: Vec<[f64; 2]>,
    pub riccati: RiccatiOptions,
}

impl Default for EvansSection {
    fn default() -> Self {
        Self {
            lambdas: vec![[0.0, 0.0], [-0.8, 0.0], [0.5, 0.0], [0.0, 1.0]],
            riccati: RiccatiOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContourSpec {
    Circle { center: [f64; 2], radius: f64 },
    SemicircleWithDetour { radius: f64, detour: f64 },
    Rectangle { re: (f64, f64), im: (f64, f64) },
    /// Root/pole localization over `winding.localize`.
    Localize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindingSection {
    pub contour: ContourSpec,
    pub contour_options: ContourOptions,
    pub localize: LocalizeOptions,
    pub riccati: RiccatiOptions,
}

impl Default for WindingSection {
    fn default() -> Self {
        Self {
            contour: ContourSpec::SemicircleWithDetour {
                radius: 1e5,
                detour: 1.0,
            },
            contour_options: ContourOptions::default(),
            localize: LocalizeOptions::default(),
            riccati: contour_riccati(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FastSection {
    pub interval: (f64, f64),
    pub n: usize,
    pub probe: FastProbeOptions,
    /// λ at which the fast bundles are written out as paths.
    pub path_lambda: f64,
}

impl Default for FastSection {
    fn default() -> Self {
        Self {
            interval: (0.0, 5000.0),
            n: 51,
            probe: FastProbeOptions::default(),
            path_lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlowSection {
    pub interval: (f64, f64),
    pub n: usize,
    pub options: SlowOptions,
    /// Singular wavespeed; computed from the model when absent.
    pub c0: Option<f64>,
    /// λ at which the slow bundles are written out as paths.
    pub path_lambda: f64,
}

impl Default for SlowSection {
    fn default() -> Self {
        Self {
            interval: (-2.0, 0.5),
            n: 126,
            options: SlowOptions::default(),
            c0: None,
            path_lambda: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub sim: SimConfig,
    /// Use the largest stable dt for the grid instead of `sim.dt`.
    pub auto_dt: bool,
    pub bvp: BvpOptions,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            auto_dt: true,
            bvp: BvpOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            model: ModelParams::default(),
            output_dir: default_output_dir(),
            format: Format::default(),
            threads: None,
            wave: WaveSection::default(),
            essential: EssentialSection::default(),
            evans: EvansSection::default(),
            winding: WindingSection::default(),
            fast: FastSection::default(),
            slow: SlowSection::default(),
            simulate: SimulateSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn wave_file(&self) -> PathBuf {
        self.wave.file.clone().unwrap_or_else(|| self.output_dir.join("wave.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::new(Command::ReproduceAll);
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("command = \"slow\"\n[slow]\nintervall = [0.0, 1.0]\n").unwrap_err();
        assert!(err.to_string().contains("intervall"), "{err}");
    }

    #[test]
    fn contour_kinds_parse() {
        let cfg = RunConfig::from_toml(
            "command = \"winding\"\n[winding.contour]\nkind = \"circle\"\ncenter = [0.0, 0.0]\nradius = 0.1\n",
        )
        .unwrap();
        assert_eq!(
            cfg.winding.contour,
            ContourSpec::Circle {
                center: [0.0, 0.0],
                radius: 0.1
            }
        );
    }
}
