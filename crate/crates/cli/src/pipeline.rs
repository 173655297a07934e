//! Stages shared by the subcommands and the end-to-end pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use coacs_core::coacs::OuterRecord;
use coacs_core::io::{read_mask, read_real, write_complex, write_mask, write_real};
use coacs_core::phasing::{EnsembleResult, PhaseConfig};
use coacs_core::simulate::{sample_pattern, simulate_truth, SimConfig, Truth};
use coacs_core::{autocorr_support, heal, phase_ensemble, HealConfig, HealOutput, RealGrid, SupportMask};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::manifest::{prepare_output, RunManifest};
use crate::preview::{render_preview, Scaling};
use crate::report::{write_shells, write_table, VariantScores, HEALED_DIRECT, HEALED_PHASED, RAW_PHASED};

pub const TRUTH_FILE: &str = "truth.grid";
pub const PROJECTION_FILE: &str = "projection.grid";
pub const BEAMSTOP_FILE: &str = "beamstop.mask";
pub const TABLE_FILE: &str = "scores.csv";
pub const SHELLS_FILE: &str = "shells.csv";

pub fn pattern_file(k: usize) -> String {
    format!("pattern_{k}.grid")
}

pub fn healed_file(k: usize) -> String {
    format!("healed_{k}.grid")
}

pub fn raw_phased_dir(k: usize) -> String {
    format!("raw_phased_{k}")
}

pub fn healed_phased_dir(k: usize) -> String {
    format!("healed_phased_{k}")
}

/// Writes the noise-free truth and all sampled patterns into `out`.
pub fn simulate_into(cfg: &SimConfig, out: &Path) -> Result<(Truth, Vec<RealGrid>)> {
    let truth = simulate_truth(cfg)?;
    write_real(&out.join(TRUTH_FILE), &truth.intensity)?;
    write_real(&out.join(PROJECTION_FILE), &truth.projection)?;
    write_mask(&out.join(BEAMSTOP_FILE), &truth.beamstop)?;
    let mut patterns = Vec::with_capacity(cfg.patterns);
    for k in 0..cfg.patterns {
        let counts = sample_pattern(cfg, &truth, k)?;
        write_real(&out.join(pattern_file(k)), &counts)?;
        patterns.push(counts);
    }
    Ok((truth, patterns))
}

pub fn write_heal_log(path: &Path, log: &[OuterRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Heals `counts` with the autocorrelation support of a centered square of
/// `support_side`; writes `healed.grid` (unwindowed), `healed_windowed.grid`
/// and `heal_log.csv` into `dir` (with `suffix` before the extension).
pub fn heal_into(
    counts: &RealGrid,
    beamstop: &SupportMask,
    support_side: usize,
    cfg: &HealConfig,
    dir: &Path,
    suffix: &str,
) -> Result<HealOutput> {
    let support = SupportMask::centered_square(counts.n(), support_side)?;
    let acs = autocorr_support(&support)?;
    let out = heal(counts, beamstop, &acs, cfg)?;
    write_real(&dir.join(format!("healed{suffix}.grid")), &out.unwindowed)?;
    write_real(&dir.join(format!("healed_windowed{suffix}.grid")), &out.windowed)?;
    write_heal_log(&dir.join(format!("heal_log{suffix}.csv")), &out.log)?;
    Ok(out)
}

/// Runs the phasing ensemble and writes `object.grid`, `amplitudes.grid`
/// and `errors.csv` into `dir`.
pub fn phase_into(amplitudes: &RealGrid, free: &SupportMask, cfg: &PhaseConfig, dir: &Path) -> Result<EnsembleResult> {
    fs::create_dir_all(dir)?;
    let ens = phase_ensemble(amplitudes, free, cfg)?;
    write_complex(&dir.join("object.grid"), &ens.object)?;
    write_real(&dir.join("amplitudes.grid"), &ens.amplitudes)?;
    let mut w = csv::Writer::from_path(dir.join("errors.csv"))?;
    w.write_record(["rank", "seed", "real_space_error", "averaged"])?;
    for (rank, r) in ens.results.iter().enumerate() {
        w.write_record([
            rank.to_string(),
            r.seed.to_string(),
            format!("{:.9e}", r.real_space_error),
            (rank < cfg.keep_best).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(ens)
}

/// Amplitudes of measured counts, `sqrt(B / r)`.
pub fn count_amplitudes(counts: &RealGrid, r: f64) -> RealGrid {
    counts.map(|k| (k / r).max(0.0).sqrt())
}

/// Scores the three variants of a pipeline run directory.
pub fn evaluate_run(dir: &Path, shells: Option<usize>) -> Result<Vec<VariantScores>> {
    let truth = read_real(&dir.join(TRUTH_FILE))?.amplitudes();
    let mut raw = Vec::new();
    let mut healed_phased = Vec::new();
    let mut direct = Vec::new();
    let mut k = 0;
    while dir.join(pattern_file(k)).exists() {
        raw.push((k, read_real(&dir.join(raw_phased_dir(k)).join("amplitudes.grid"))?));
        healed_phased.push((k, read_real(&dir.join(healed_phased_dir(k)).join("amplitudes.grid"))?));
        direct.push((k, read_real(&dir.join(healed_file(k)))?.amplitudes()));
        k += 1;
    }
    if k == 0 {
        bail!("no patterns found in {}", dir.display());
    }
    Ok(vec![
        VariantScores::compute(RAW_PHASED, &truth, &raw, shells)?,
        VariantScores::compute(HEALED_PHASED, &truth, &healed_phased, shells)?,
        VariantScores::compute(HEALED_DIRECT, &truth, &direct, shells)?,
    ])
}

pub fn write_evaluation(dir: &Path, scores: &[VariantScores]) -> Result<()> {
    write_table(&dir.join(TABLE_FILE), scores)?;
    write_shells(&dir.join(SHELLS_FILE), scores)
}

struct PatternRun {
    heal: HealOutput,
    seconds: [f64; 3],
}

fn run_pattern(cfg: &PipelineConfig, counts: &RealGrid, beamstop: &SupportMask, k: usize, out: &Path) -> Result<PatternRun> {
    let t = Instant::now();
    let healed = heal_into(counts, beamstop, cfg.phase.support_side, &cfg.heal, out, &format!("_{k}"))
        .with_context(|| format!("stage heal, pattern {k}"))?;
    let heal_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let raw = count_amplitudes(counts, cfg.simulate.quantum_efficiency);
    phase_into(&raw, beamstop, &cfg.phase, &out.join(raw_phased_dir(k)))
        .with_context(|| format!("stage phase (raw), pattern {k}"))?;
    let raw_s = t.elapsed().as_secs_f64();

    // healing fills the beamstop, so every pixel is constrained
    let t = Instant::now();
    let free = SupportMask::empty(counts.n());
    phase_into(&healed.unwindowed.amplitudes(), &free, &cfg.phase, &out.join(healed_phased_dir(k)))
        .with_context(|| format!("stage phase (healed), pattern {k}"))?;
    let healed_s = t.elapsed().as_secs_f64();
    info!("pattern {k}: heal {heal_s:.1}s, phase raw {raw_s:.1}s, phase healed {healed_s:.1}s");
    Ok(PatternRun {
        heal: healed,
        seconds: [heal_s, raw_s, healed_s],
    })
}

#[derive(Clone, Debug)]
pub struct PipelineSummary {
    pub scores: Vec<VariantScores>,
    pub heal_logs: Vec<Vec<OuterRecord>>,
    pub endpoint_increases: usize,
    pub heal_warnings: Vec<String>,
    pub manifest: PathBuf,
}

/// simulate → heal → phase (raw and healed) → evaluate → previews → manifest.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path, force: bool) -> Result<PipelineSummary> {
    cfg.validate()?;
    prepare_output(out, force)?;
    let mut manifest = RunManifest::new("pipeline", cfg)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;

    let (truth, patterns) = manifest
        .time("simulate", None, || simulate_into(&cfg.simulate, out))
        .context("stage simulate")?;
    manifest
        .seeds
        .insert("patterns".into(), (0..cfg.simulate.patterns).map(|k| cfg.simulate.pattern_seed(k)).collect());
    manifest.seeds.insert(
        "phasing".into(),
        (0..cfg.phase.replicates).map(|i| cfg.phase.seed.wrapping_add(i as u64)).collect(),
    );

    let runs = patterns
        .par_iter()
        .enumerate()
        .map(|(k, counts)| run_pattern(cfg, counts, &truth.beamstop, k, out))
        .collect::<Result<Vec<_>>>()?;
    for (k, run) in runs.iter().enumerate() {
        for (stage, s) in ["heal", "phase-raw", "phase-healed"].iter().zip(run.seconds) {
            manifest.record(stage, Some(k), s);
        }
    }

    let scores = manifest
        .time("evaluate", None, || evaluate_run(out, cfg.evaluate.shells))
        .context("stage evaluate")?;
    write_evaluation(out, &scores)?;

    let previews = out.join("previews");
    fs::create_dir_all(&previews)?;
    render_preview(&truth.intensity, Scaling::Log, &previews.join("truth.pgm"))?;
    render_preview(&truth.projection, Scaling::Linear, &previews.join("projection.pgm"))?;
    render_preview(&patterns[0], Scaling::Log, &previews.join("pattern_0.pgm"))?;
    render_preview(&runs[0].heal.windowed, Scaling::DerootedWindow, &previews.join("healed_0.pgm"))?;

    let manifest_path = manifest.write(out)?;
    Ok(PipelineSummary {
        scores,
        endpoint_increases: runs.iter().map(|r| r.heal.endpoint_increases()).sum(),
        heal_warnings: runs.iter().flat_map(|r| r.heal.warnings.clone()).collect(),
        heal_logs: runs.into_iter().map(|r| r.heal.log).collect(),
        manifest: manifest_path,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Amplitudes,
    Intensities,
}

/// Everything `heal` needs; stored in its manifest for replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HealJob {
    pub pattern: PathBuf,
    pub beamstop: Option<PathBuf>,
    pub support_side: usize,
    pub heal: HealConfig,
}

impl HealJob {
    pub fn run(&self, out: &Path, force: bool) -> Result<HealOutput> {
        let counts = read_real(&self.pattern)?;
        let beamstop = match &self.beamstop {
            Some(p) => read_mask(p)?,
            None => SupportMask::empty(counts.n()),
        };
        prepare_output(out, force)?;
        let mut manifest = RunManifest::new("heal", self)?;
        manifest.add_input(&self.pattern)?;
        if let Some(p) = &self.beamstop {
            manifest.add_input(p)?;
        }
        let healed = manifest
            .time("heal", None, || heal_into(&counts, &beamstop, self.support_side, &self.heal, out, ""))
            .context("stage heal")?;
        manifest.write(out)?;
        Ok(healed)
    }
}

/// Everything `phase` needs; stored in its manifest for replay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseJob {
    pub input: PathBuf,
    pub kind: InputKind,
    pub free_mask: Option<PathBuf>,
    pub phase: PhaseConfig,
}

impl PhaseJob {
    pub fn run(&self, out: &Path, force: bool) -> Result<EnsembleResult> {
        let grid = read_real(&self.input)?;
        let amplitudes = match self.kind {
            InputKind::Amplitudes => grid,
            InputKind::Intensities => grid.amplitudes(),
        };
        let free = match &self.free_mask {
            Some(p) => read_mask(p)?,
            None => SupportMask::empty(amplitudes.n()),
        };
        prepare_output(out, force)?;
        let mut manifest = RunManifest::new("phase", self)?;
        manifest.add_input(&self.input)?;
        if let Some(p) = &self.free_mask {
            manifest.add_input(p)?;
        }
        manifest
            .seeds
            .insert("phasing".into(), (0..self.phase.replicates).map(|i| self.phase.seed.wrapping_add(i as u64)).collect());
        let ens = manifest
            .time("phase", None, || phase_into(&amplitudes, &free, &self.phase, out))
            .context("stage phase")?;
        manifest.write(out)?;
        Ok(ens)
    }
}

pub fn simulate_job(cfg: &SimConfig, out: &Path, force: bool) -> Result<(Truth, Vec<RealGrid>)> {
    cfg.validate()?;
    prepare_output(out, force)?;
    let mut manifest = RunManifest::new("simulate", cfg)?;
    let result = manifest.time("simulate", None, || simulate_into(cfg, out)).context("stage simulate")?;
    manifest
        .seeds
        .insert("patterns".into(), (0..cfg.patterns).map(|k| cfg.pattern_seed(k)).collect());
    manifest.write(out)?;
    Ok(result)
}

/// Re-runs the command recorded in `manifest` into `out`, after checking
/// that its inputs are unchanged.
pub fn replay(manifest: &RunManifest, out: &Path, force: bool) -> Result<()> {
    for (path, expected) in &manifest.inputs {
        let actual = crate::manifest::digest(Path::new(path))?;
        if &actual != expected {
            bail!("input {path} changed since the recorded run");
        }
    }
    let cfg = manifest.config.clone();
    match manifest.command.as_str() {
        "simulate" => simulate_job(&serde_json::from_value(cfg)?, out, force).map(|_| ()),
        "heal" => serde_json::from_value::<HealJob>(cfg)?.run(out, force).map(|_| ()),
        "phase" => serde_json::from_value::<PhaseJob>(cfg)?.run(out, force).map(|_| ()),
        "pipeline" => run_pipeline(&serde_json::from_value(cfg)?, out, force).map(|_| ()),
        other => bail!("unknown command {other:?} in manifest"),
    }
}
