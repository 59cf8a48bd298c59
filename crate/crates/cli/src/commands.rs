use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hardhat_core::backend::{
    DetectorBackend, Fixture, FixtureBackend, ImageStore, OracleBackend, RecordingBackend,
    RemoteBackend, RemoteConfig,
};
use hardhat_core::dataset::{
    assemble_manifest, load_sources, read_manifest, table1_expectations, table1_view, verify_stats,
    write_manifest, DatasetManifest, DatasetSources, ExpectedCounts, ManifestStats, Source,
};
use hardhat_core::metrics::{score_runs, sweep, PRPoint, SweepOptions};
use hardhat_core::pipelines::run_all;
use hardhat_core::report::{ap_table_markdown, pr_curves_csv, SweepReport};
use hardhat_core::{ClassLabel, RemapMode, Strategy};
use serde::Serialize;

use crate::cli::{BuildArgs, OverlayArgs, RunArgs, VerifyArgs};
use crate::config::{BackendSpec, Resolved, RunConfig};
use crate::overlay;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How a command ended when it did not hit an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Checks ran but something did not match.
    ValidationFailed,
    /// The detector failed part-way; partial results were written.
    BackendFailed,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn prepare_out(out: Option<&PathBuf>) -> Result<PathBuf> {
    let out = out
        .cloned()
        .context("no output directory; pass --out or set `out` in the config file")?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

fn load_expected(spec: &str) -> Result<ExpectedCounts> {
    if spec.eq_ignore_ascii_case("table1") {
        return Ok(table1_expectations());
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing expected counts in {spec}"))
}

fn stats_table(stats: &ManifestStats) -> String {
    let sources: Vec<Source> = stats.per_source.keys().copied().collect();
    let mut out = String::from("| Ground Truth Data |");
    for s in &sources {
        out.push_str(&format!(" {} |", s.id_prefix()));
    }
    out.push_str(" Total |\n|---|");
    out.push_str(&"---:|".repeat(sources.len() + 1));
    out.push('\n');
    let order = [
        ClassLabel::HeadWithHelmet,
        ClassLabel::Helmet,
        ClassLabel::Head,
        ClassLabel::Person,
    ];
    for label in order {
        out.push_str(&format!("| {} |", label.display_name()));
        for s in &sources {
            let n = stats.per_source[s]
                .per_class
                .get(&label)
                .copied()
                .unwrap_or(0);
            out.push_str(&format!(" {n} |"));
        }
        out.push_str(&format!(" {} |\n", stats.count(label)));
    }
    out.push_str("| Total |");
    for s in &sources {
        let n: u64 = stats.per_source[s].per_class.values().sum();
        out.push_str(&format!(" {n} |"));
    }
    out.push_str(&format!(" {} |\n| Images |", stats.total));
    for s in &sources {
        out.push_str(&format!(" {} |", stats.per_source[s].images));
    }
    out.push_str(&format!(" {} |\n", stats.images));
    out
}

pub fn build_dataset(args: &BuildArgs) -> Result<Outcome> {
    if args.hard_hat_workers.is_none() && args.shel5k.is_none() {
        bail!("give at least one of --hard-hat-workers and --shel5k");
    }
    let expected = args.expect.as_deref().map(load_expected).transpose()?;
    let sources = DatasetSources {
        hard_hat_workers: args.hard_hat_workers.clone(),
        shel5k: args.shel5k.clone(),
    };
    let images = load_sources(&sources)?;
    let cascaded = assemble_manifest(&images, RemapMode::Cascaded);
    let direct = assemble_manifest(&images, RemapMode::DirectNested);
    let view = table1_view(&cascaded.stats, &direct.stats);

    let out = prepare_out(Some(&args.out))?;
    for m in [&cascaded, &direct] {
        let path = out.join(format!("{}.jsonl", m.mode.as_str()));
        let file =
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_manifest(m, std::io::BufWriter::new(file))?;
        log::info!("wrote {} ({} images)", path.display(), m.images.len());
    }
    write_json(
        &out.join("stats.json"),
        &serde_json::json!({
            "cascaded": cascaded.stats,
            "direct_nested": direct.stats,
            "table1_view": view,
        }),
    )?;
    let table = stats_table(&view);
    fs::write(out.join("stats.md"), &table)?;
    write_json(
        &out.join("run_config.json"),
        &serde_json::json!({
            "command": "build-dataset",
            "hard_hat_workers": args.hard_hat_workers,
            "shel5k": args.shel5k,
            "expect": args.expect,
        }),
    )?;
    println!("{table}");

    if let Some(exp) = expected {
        let report = verify_stats(&view, &exp);
        println!("{}", report.render());
        if !report.passed() {
            eprintln!("dataset statistics do not match the expected counts");
            return Ok(Outcome::ValidationFailed);
        }
    }
    Ok(Outcome::Ok)
}

fn load_manifests(paths: &[PathBuf]) -> Result<BTreeMap<RemapMode, DatasetManifest>> {
    let mut by_mode = BTreeMap::new();
    for path in paths {
        let m =
            read_manifest(path).with_context(|| format!("reading manifest {}", path.display()))?;
        if by_mode.contains_key(&m.mode) {
            bail!("more than one {} manifest given", m.mode.as_str());
        }
        by_mode.insert(m.mode, m);
    }
    Ok(by_mode)
}

fn manifest_for(
    manifests: &BTreeMap<RemapMode, DatasetManifest>,
    strategy: Strategy,
) -> Result<&DatasetManifest> {
    let mode = strategy.manifest_mode();
    manifests.get(&mode).with_context(|| {
        format!(
            "the {strategy} strategy needs a {} manifest; none was given",
            mode.as_str()
        )
    })
}

fn make_backend(
    resolved: &Resolved,
    manifest: &DatasetManifest,
) -> Result<Box<dyn DetectorBackend>> {
    Ok(match &resolved.backend {
        BackendSpec::Oracle(_) => {
            let cfg = resolved
                .config
                .oracle
                .clone()
                .expect("oracle settings resolved");
            Box::new(OracleBackend::new(cfg, &manifest.images)?)
        }
        BackendSpec::Fixture(path) => Box::new(
            FixtureBackend::load(path)
                .with_context(|| format!("loading fixture {}", path.display()))?,
        ),
        BackendSpec::Remote(url) => {
            let store = ImageStore::resolve(&manifest.images, &resolved.config.image_roots);
            if store.len() < manifest.images.len() {
                log::warn!(
                    "{} of {} images not found under the image roots",
                    manifest.images.len() - store.len(),
                    manifest.images.len()
                );
            }
            Box::new(RemoteBackend::new(RemoteConfig::new(url.clone()), store)?)
        }
    })
}

fn options(config: &RunConfig) -> SweepOptions {
    SweepOptions {
        grid: config.grid.clone(),
        iou_cut: config.iou_cut,
        workers: config.workers,
    }
}

pub fn sweep_cmd(args: &RunArgs) -> Result<Outcome> {
    let resolved = args.resolve("sweep")?;
    let config = &resolved.config;
    let manifests = load_manifests(&config.manifests)?;
    for &s in &config.strategies {
        manifest_for(&manifests, s)?;
    }
    let out = prepare_out(resolved.out.as_ref())?;
    write_json(&out.join("run_config.json"), config)?;

    let mut reports = Vec::new();
    let mut outcome = Outcome::Ok;
    for &strategy in &config.strategies {
        let manifest = manifest_for(&manifests, strategy)?;
        let backend = make_backend(&resolved, manifest)?;
        log::info!(
            "sweeping {strategy} over {} images with {}",
            manifest.images.len(),
            backend.descriptor()
        );
        let report = sweep(
            manifest,
            &backend,
            &config.pipeline(strategy),
            &options(config),
        )?;
        let complete = report.complete;
        reports.push(report);
        if !complete {
            outcome = Outcome::BackendFailed;
            break;
        }
    }

    let doc = SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        run_config: config.report_view(),
        reports,
    };
    write_json(&out.join("report.json"), &doc)?;
    fs::write(out.join("pr_curves.csv"), pr_curves_csv(&doc.reports))?;
    let table = ap_table_markdown(&doc.reports);
    fs::write(out.join("ap_table.md"), &table)?;
    println!("{table}");
    if outcome == Outcome::BackendFailed {
        eprintln!(
            "sweep incomplete: backend failure; partial results written to {}",
            out.display()
        );
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct RunSummary {
    strategy: Strategy,
    threshold: f64,
    images: usize,
    classes: BTreeMap<ClassLabel, PRPoint>,
}

pub fn run_cmd(args: &RunArgs) -> Result<Outcome> {
    let resolved = args.resolve("run")?;
    let config = &resolved.config;
    let manifests = load_manifests(&config.manifests)?;
    let out = prepare_out(resolved.out.as_ref())?;
    write_json(&out.join("run_config.json"), config)?;

    let mut summaries = Vec::new();
    for &strategy in &config.strategies {
        let manifest = manifest_for(&manifests, strategy)?;
        if manifest.images.is_empty() {
            bail!("no images in manifest");
        }
        let backend = make_backend(&resolved, manifest)?;
        let runs = run_all(
            &manifest.images,
            &backend,
            &config.pipeline(strategy),
            config.workers,
        )?;
        let path = out.join(format!("{}_predictions.jsonl", strategy.as_str()));
        let mut text = String::new();
        for run in &runs {
            text.push_str(&serde_json::to_string(run)?);
            text.push('\n');
        }
        fs::write(&path, text)?;
        let counts = score_runs(manifest, &runs, strategy, config.iou_cut);
        let classes = counts
            .into_iter()
            .map(|(c, n)| (c, PRPoint::from_counts(config.threshold, n)))
            .collect::<BTreeMap<_, _>>();
        for (c, p) in &classes {
            println!(
                "{strategy:>8} {:<18} precision {:.4} recall {:.4}",
                c.display_name(),
                p.precision,
                p.recall
            );
        }
        summaries.push(RunSummary {
            strategy,
            threshold: config.threshold,
            images: runs.len(),
            classes,
        });
    }
    write_json(&out.join("summary.json"), &summaries)?;
    Ok(Outcome::Ok)
}

pub fn record_fixture_cmd(args: &RunArgs) -> Result<Outcome> {
    let resolved = args.resolve("record-fixture")?;
    let config = &resolved.config;
    let manifests = load_manifests(&config.manifests)?;
    for &s in &config.strategies {
        manifest_for(&manifests, s)?;
    }
    let out = prepare_out(resolved.out.as_ref())?;
    write_json(&out.join("run_config.json"), config)?;

    let mut fixture = Fixture::default();
    for &strategy in &config.strategies {
        let manifest = manifest_for(&manifests, strategy)?;
        let recorder = RecordingBackend::new(make_backend(&resolved, manifest)?);
        let report = sweep(
            manifest,
            &recorder,
            &config.pipeline(strategy),
            &options(config),
        )?;
        if !report.complete {
            eprintln!(
                "recording aborted: {}; no fixture written",
                report.error.unwrap_or_default()
            );
            return Ok(Outcome::BackendFailed);
        }
        for record in recorder.into_fixture().records() {
            fixture.insert(record.clone())?;
        }
    }
    let path = out.join("fixture.jsonl");
    fixture.save(&path)?;
    println!("recorded {} queries to {}", fixture.len(), path.display());
    Ok(Outcome::Ok)
}

pub fn overlay_cmd(args: &OverlayArgs) -> Result<Outcome> {
    let resolved = args.run.resolve("overlay")?;
    let config = &resolved.config;
    let manifests = load_manifests(&config.manifests)?;
    let out = prepare_out(resolved.out.as_ref())?;
    write_json(&out.join("run_config.json"), config)?;

    for &strategy in &config.strategies {
        let manifest = manifest_for(&manifests, strategy)?;
        let backend = make_backend(&resolved, manifest)?;
        let runs = run_all(
            &manifest.images,
            &backend,
            &config.pipeline(strategy),
            config.workers,
        )?;
        let dir = out.join(strategy.as_str());
        fs::create_dir_all(&dir)?;
        let written = overlay::write_overlays(
            manifest,
            &runs,
            strategy,
            config.iou_cut,
            &config.image_roots,
            &dir,
            args.only_mismatches,
        )?;
        println!("{strategy}: wrote {written} overlays to {}", dir.display());
    }
    Ok(Outcome::Ok)
}

pub fn verify_cmd(args: &VerifyArgs) -> Result<Outcome> {
    if args.manifest.is_empty() && args.report.is_none() {
        bail!("nothing to verify; pass --manifest and/or --report");
    }
    let mut ok = true;
    if !args.manifest.is_empty() {
        let manifests = load_manifests(&args.manifest)?;
        let stats = match (
            manifests.get(&RemapMode::Cascaded),
            manifests.get(&RemapMode::DirectNested),
        ) {
            (Some(c), Some(d)) => table1_view(&c.stats, &d.stats),
            (Some(m), None) | (None, Some(m)) => m.stats.clone(),
            (None, None) => unreachable!("at least one manifest loaded"),
        };
        println!("{}", stats_table(&stats));
        if let Some(spec) = &args.expect {
            let report = verify_stats(&stats, &load_expected(spec)?);
            println!("{}", report.render());
            ok &= report.passed();
        }
    }
    if let Some(path) = &args.report {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let doc: SweepReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        for r in &doc.reports {
            let points_ok =
                !r.complete || r.classes.values().all(|c| c.points.len() == r.grid.len());
            let good = r.consistent() && points_ok;
            println!(
                "{:>8}: {}",
                r.strategy.as_str(),
                if good { "consistent" } else { "INCONSISTENT" }
            );
            ok &= good;
        }
        if !doc.complete() {
            println!("report is incomplete");
            ok = false;
        }
    }
    Ok(if ok {
        Outcome::Ok
    } else {
        Outcome::ValidationFailed
    })
}
