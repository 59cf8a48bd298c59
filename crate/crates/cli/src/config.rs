//! Run configuration: command-line flags layered over a flat TOML file layered
//! over built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hardhat_core::backend::{OracleConfig, PromptOverride, ScoreDist};
use hardhat_core::metrics::{ThresholdGrid, DEFAULT_IOU_CUT};
use hardhat_core::pipelines::{PipelineConfig, StagePrompts, StageThresholds};
use hardhat_core::Strategy;
use serde::{Deserialize, Serialize};

use crate::cli::RunArgs;

/// Keys accepted in a `--config` file. Every key mirrors a command-line flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<OneOrMany>,
    pub strategy: Option<String>,
    pub backend: Option<String>,
    pub image_root: Option<OneOrMany>,
    pub grid: Option<String>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub iou_cut: Option<f64>,
    pub crop_padding: Option<f64>,
    pub person_threshold: Option<f64>,
    pub head_threshold: Option<f64>,
    pub helmet_threshold: Option<f64>,
    pub person_prompt: Option<String>,
    pub head_prompt: Option<String>,
    pub helmet_prompt: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<PathBuf> {
        match self {
            OneOrMany::One(p) => vec![p],
            OneOrMany::Many(v) => v,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Which detector answers the pipeline queries.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Oracle(OracleSettings),
    Fixture(PathBuf),
    Remote(String),
}

/// Oracle parameters given on the command line. Unset values fall back to the
/// oracle defaults; an unset seed falls back to the run seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleSettings {
    pub miss: Option<f64>,
    pub fp: Option<f64>,
    pub jitter: Option<f64>,
    pub seed: Option<u64>,
    pub visibility: Option<f64>,
    pub tp_score: Option<f64>,
    /// `miss.<prompt>=p` entries.
    pub prompt_miss: BTreeMap<String, f64>,
}

impl OracleSettings {
    pub fn to_config(&self, run_seed: u64) -> OracleConfig {
        let mut c = OracleConfig::default();
        if let Some(v) = self.miss {
            c.miss_rate = v;
        }
        if let Some(v) = self.fp {
            c.fp_rate = v;
        }
        if let Some(v) = self.jitter {
            c.jitter = v;
        }
        if let Some(v) = self.visibility {
            c.visibility = v;
        }
        if let Some(v) = self.tp_score {
            c.score_model.tp = ScoreDist::Fixed { value: v };
        }
        c.seed = self.seed.unwrap_or(run_seed);
        for (prompt, &m) in &self.prompt_miss {
            c.prompt_overrides.insert(
                prompt.clone(),
                PromptOverride {
                    miss_rate: Some(m),
                    tp_score: None,
                },
            );
        }
        c
    }
}

impl FromStr for BackendSpec {
    type Err = anyhow::Error;

    /// `oracle[:key=value,...]`, `fixture:PATH` or `remote:URL`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "oracle" => {
                let mut o = OracleSettings::default();
                for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let (k, v) = pair
                        .split_once('=')
                        .ok_or_else(|| anyhow!("oracle option {pair:?} is not key=value"))?;
                    let num = || -> Result<f64> {
                        v.parse()
                            .with_context(|| format!("oracle option {k}: {v:?} is not a number"))
                    };
                    match k {
                        "miss" => o.miss = Some(num()?),
                        "fp" => o.fp = Some(num()?),
                        "jitter" => o.jitter = Some(num()?),
                        "visibility" => o.visibility = Some(num()?),
                        "tp_score" => o.tp_score = Some(num()?),
                        "seed" => o.seed = Some(v.parse().with_context(|| format!("seed {v:?}"))?),
                        _ => match k.strip_prefix("miss.") {
                            Some(prompt) if !prompt.is_empty() => {
                                o.prompt_miss.insert(prompt.to_string(), num()?);
                            }
                            _ => bail!("unknown oracle option {k:?}"),
                        },
                    }
                }
                Ok(BackendSpec::Oracle(o))
            }
            "fixture" if !rest.is_empty() => Ok(BackendSpec::Fixture(PathBuf::from(rest))),
            "remote" if !rest.is_empty() => Ok(BackendSpec::Remote(rest.to_string())),
            _ => bail!(
                "cannot parse backend {s:?}; expected oracle[:k=v,...], fixture:PATH or remote:URL"
            ),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Oracle(o) => {
                let mut parts = Vec::new();
                let mut push = |k: &str, v: Option<String>| {
                    if let Some(v) = v {
                        parts.push(format!("{k}={v}"));
                    }
                };
                push("miss", o.miss.map(|v| v.to_string()));
                push("fp", o.fp.map(|v| v.to_string()));
                push("jitter", o.jitter.map(|v| v.to_string()));
                push("seed", o.seed.map(|v| v.to_string()));
                push("visibility", o.visibility.map(|v| v.to_string()));
                push("tp_score", o.tp_score.map(|v| v.to_string()));
                for (p, m) in &o.prompt_miss {
                    parts.push(format!("miss.{p}={m}"));
                }
                if parts.is_empty() {
                    write!(f, "oracle")
                } else {
                    write!(f, "oracle:{}", parts.join(","))
                }
            }
            BackendSpec::Fixture(p) => write!(f, "fixture:{}", p.display()),
            BackendSpec::Remote(u) => write!(f, "remote:{u}"),
        }
    }
}

/// Fully resolved settings of a detection run. Written to `run_config.json`
/// and embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub manifests: Vec<PathBuf>,
    pub strategies: Vec<Strategy>,
    pub backend: String,
    /// Effective oracle parameters, present for the oracle backend only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    pub grid: ThresholdGrid,
    pub threshold: f64,
    pub seed: u64,
    pub workers: usize,
    pub iou_cut: f64,
    pub crop_padding: f64,
    pub stage_thresholds: StageThresholds,
    pub prompts: StagePrompts,
    pub image_roots: Vec<PathBuf>,
}

pub struct Resolved {
    pub config: RunConfig,
    pub backend: BackendSpec,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_THRESHOLD: f64 = 0.1;

pub fn parse_strategies(s: &str) -> Result<Vec<Strategy>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Strategy::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let st: Strategy = part.parse().map_err(|e: String| anyhow!(e))?;
        if !out.contains(&st) {
            out.push(st);
        }
    }
    if out.is_empty() {
        bail!("no strategy given");
    }
    Ok(out)
}

impl RunArgs {
    /// Merges flags over the config file over defaults.
    pub fn resolve(&self, command: &str) -> Result<Resolved> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };

        let manifests = if !self.manifest.is_empty() {
            self.manifest.clone()
        } else {
            file.manifest.map(OneOrMany::into_vec).unwrap_or_default()
        };
        if manifests.is_empty() {
            bail!("no manifest given; pass --manifest or set `manifest` in the config file");
        }
        let strategies = parse_strategies(
            self.strategy
                .as_deref()
                .or(file.strategy.as_deref())
                .unwrap_or("all"),
        )?;
        let backend_text = self
            .backend
            .clone()
            .or(file.backend)
            .unwrap_or_else(|| "oracle".to_string());
        let backend: BackendSpec = backend_text.parse()?;
        let grid: ThresholdGrid = match self.grid.as_deref().or(file.grid.as_deref()) {
            Some(g) => g.parse()?,
            None => ThresholdGrid::default(),
        };
        let seed = self.seed.or(file.seed).unwrap_or(0);
        let workers = self
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            bail!("--workers must be at least 1");
        }
        let threshold = self
            .threshold
            .or(file.threshold)
            .unwrap_or(DEFAULT_THRESHOLD);
        let iou_cut = self.iou_cut.or(file.iou_cut).unwrap_or(DEFAULT_IOU_CUT);
        if !(iou_cut > 0.0 && iou_cut <= 1.0) {
            bail!("--iou-cut {iou_cut} outside (0, 1]");
        }
        let crop_padding = self.crop_padding.or(file.crop_padding).unwrap_or(0.0);
        let stage_thresholds = StageThresholds {
            person: self.person_threshold.or(file.person_threshold),
            head: self.head_threshold.or(file.head_threshold),
            helmet: self.helmet_threshold.or(file.helmet_threshold),
        };
        let defaults = StagePrompts::default();
        let prompts = StagePrompts {
            person: self
                .person_prompt
                .clone()
                .or(file.person_prompt)
                .unwrap_or(defaults.person),
            head: self
                .head_prompt
                .clone()
                .or(file.head_prompt)
                .unwrap_or(defaults.head),
            helmet: self
                .helmet_prompt
                .clone()
                .or(file.helmet_prompt)
                .unwrap_or(defaults.helmet),
        };
        let image_roots = if !self.image_root.is_empty() {
            self.image_root.clone()
        } else {
            file.image_root.map(OneOrMany::into_vec).unwrap_or_default()
        };
        let out = self.out.clone().or(file.out);

        let oracle = match &backend {
            BackendSpec::Oracle(o) => {
                let c = o.to_config(seed);
                c.validate()?;
                Some(c)
            }
            _ => None,
        };

        let config = RunConfig {
            command: command.to_string(),
            manifests,
            strategies,
            backend: backend.to_string(),
            oracle,
            grid,
            threshold,
            seed,
            workers,
            iou_cut,
            crop_padding,
            stage_thresholds,
            prompts,
            image_roots,
        };
        for &s in &config.strategies {
            config.pipeline(s).validate()?;
        }
        Ok(Resolved {
            config,
            backend,
            out,
        })
    }
}

impl RunConfig {
    pub fn pipeline(&self, strategy: Strategy) -> PipelineConfig {
        PipelineConfig {
            strategy,
            threshold: self.threshold,
            stage_thresholds: self.stage_thresholds,
            prompts: self.prompts.clone(),
            crop_padding: self.crop_padding,
        }
    }

    /// The settings that determine results. Worker count is left out since it
    /// does not affect output.
    pub fn report_view(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("run config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("workers");
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_spec_round_trip() {
        let spec: BackendSpec = "oracle:miss=0.2,fp=0.5,seed=7,miss.head=0.4"
            .parse()
            .unwrap();
        let BackendSpec::Oracle(o) = &spec else {
            panic!("not an oracle")
        };
        assert_eq!(o.miss, Some(0.2));
        assert_eq!(o.prompt_miss.get("head"), Some(&0.4));
        assert_eq!(
            spec.to_string(),
            "oracle:miss=0.2,fp=0.5,seed=7,miss.head=0.4"
        );
        assert_eq!(spec.to_string().parse::<BackendSpec>().unwrap(), spec);
        let c = o.to_config(99);
        assert_eq!(c.seed, 7);
        assert_eq!(c.prompt_overrides["head"].miss_rate, Some(0.4));
    }

    #[test]
    fn backend_spec_errors() {
        assert!("oracle:miss".parse::<BackendSpec>().is_err());
        assert!("oracle:bogus=1".parse::<BackendSpec>().is_err());
        assert!("fixture:".parse::<BackendSpec>().is_err());
        assert!("grpc:x".parse::<BackendSpec>().is_err());
        assert_eq!(
            "remote:http://localhost:8000"
                .parse::<BackendSpec>()
                .unwrap(),
            BackendSpec::Remote("http://localhost:8000".into())
        );
        assert_eq!(
            "oracle".parse::<BackendSpec>().unwrap(),
            BackendSpec::Oracle(OracleSettings::default())
        );
    }

    #[test]
    fn strategy_lists() {
        assert_eq!(parse_strategies("all").unwrap(), Strategy::ALL.to_vec());
        assert_eq!(
            parse_strategies("cascaded,direct,direct").unwrap(),
            vec![Strategy::Cascaded, Strategy::Direct]
        );
        assert!(parse_strategies("diagonal").is_err());
    }

    #[test]
    fn flags_override_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(
            &cfg,
            "manifest = [\"a.jsonl\", \"b.jsonl\"]\nstrategy = \"nested\"\nseed = 5\nworkers = 3\ngrid = \"0.1,0.2\"\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(cfg.clone()),
            seed: Some(11),
            ..RunArgs::default()
        };
        let r = args.resolve("sweep").unwrap();
        assert_eq!(r.config.seed, 11);
        assert_eq!(r.config.workers, 3);
        assert_eq!(r.config.strategies, vec![Strategy::Nested]);
        assert_eq!(r.config.grid.values(), &[0.1, 0.2]);
        assert_eq!(r.config.manifests.len(), 2);
        assert_eq!(r.config.threshold, DEFAULT_THRESHOLD);
        assert_eq!(r.config.oracle.as_ref().unwrap().seed, 11);

        std::fs::write(&cfg, "manifests = \"typo.jsonl\"\n").unwrap();
        assert!(args.resolve("sweep").is_err());
    }
}
