//! Scenario runs: drive simulated scans through one or two pipelines and
//! write frames, corrections, images, object lists and metric reports.

use crate::config::{ConfigError, CorrectorChoice, PipelineConfig};
use crate::engine::{Engine, EngineConfig, StepOutput};
use crate::render::{render_frame, save_png};
use crate::report::{pr_curves_csv, MetricsReport, Tally};
use dogm_core::codec::{correction_file_name, encode_correction, encode_snapshot, format_particles, snapshot_file_name};
use dogm_core::corrector::{file_corrector, label_grid, oracle_corrector, OracleNoise};
use dogm_core::eval::ApParams;
use dogm_core::{CorrectionGrid, DogmError, DogmFrame, GtFrame, TransitionMatrix};
use dogm_sim::{load_scenario, simulate, ScenarioConfig, SimFrame};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("frame {frame}: {source}")]
    Frame {
        frame: u64,
        #[source]
        source: DogmError,
    },
    #[error("{0}")]
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Run the uncorrected baseline next to the configured corrector.
    pub ab: bool,
    pub frames: Option<usize>,
    /// Per-frame step timing trace, written outside the output tree.
    pub timings: Option<PathBuf>,
}

/// How a pipeline lane persists its frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArtifactMode {
    /// Every frame as `.dogm`, plus optional `.dogc`, PNG and particle dumps.
    Full { render: bool, particles: bool },
    /// One digest line per frame and only the final snapshot.
    Digest,
}

/// Output of one pipeline lane.
struct Lane {
    name: String,
    corrector: CorrectorChoice,
    dir: PathBuf,
    mode: ArtifactMode,
    objects: BufWriter<File>,
    digests: Option<BufWriter<File>>,
    tally: Tally,
}

#[derive(Serialize)]
struct ObjectsLine<'a> {
    frame: u64,
    timestamp: f64,
    objects: &'a [dogm_core::cluster::DetectedObject],
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

impl Lane {
    fn new(name: &str, corrector: CorrectorChoice, dir: PathBuf, mode: ArtifactMode) -> Result<Self, RunError> {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let objects = create(&dir.join("objects.jsonl"))?;
        let digests = match mode {
            ArtifactMode::Digest => Some(create(&dir.join("digests.txt"))?),
            ArtifactMode::Full { .. } => None,
        };
        Ok(Self {
            name: name.to_string(),
            corrector,
            dir,
            mode,
            objects,
            digests,
            tally: Tally::default(),
        })
    }

    fn write_frame(&mut self, out: &StepOutput<'_>) -> Result<(), RunError> {
        let k = out.frame_index;
        let line = serde_json::to_string(&ObjectsLine {
            frame: k,
            timestamp: out.frame.timestamp,
            objects: &out.objects,
        })
        .expect("objects serialize");
        let objects_path = self.dir.join("objects.jsonl");
        writeln!(self.objects, "{line}").map_err(|e| io_err(&objects_path, e))?;
        let snapshot = encode_snapshot(out.frame);
        match self.mode {
            ArtifactMode::Full { render, particles } => {
                write_bytes(&self.dir.join(snapshot_file_name(k)), &snapshot)?;
                if let (CorrectorChoice::Oracle(_), Some(c)) = (&self.corrector, &out.correction) {
                    write_bytes(&self.dir.join(correction_file_name(k)), &encode_correction(&c.cells))?;
                }
                if render {
                    let path = self.dir.join(format!("frame_{k:06}.png"));
                    save_png(&path, &render_frame(out.frame, true)).map_err(|e| io_err(&path, e))?;
                }
                if particles {
                    write_bytes(
                        &self.dir.join(format!("particles_{k:06}.txt")),
                        format_particles(out.particles).as_bytes(),
                    )?;
                }
            }
            ArtifactMode::Digest => {
                let d = self.digests.as_mut().expect("digest writer");
                let line = format!(
                    "{k:06} {} {}",
                    hex::encode(Sha256::digest(&snapshot)),
                    hex::encode(Sha256::digest(line.as_bytes()))
                );
                let path = self.dir.join("digests.txt");
                writeln!(d, "{line}").map_err(|e| io_err(&path, e))?;
            }
        }
        Ok(())
    }

    fn finish(&mut self, last: Option<&DogmFrame>) -> Result<(), RunError> {
        let path = self.dir.join("objects.jsonl");
        self.objects.flush().map_err(|e| io_err(&path, e))?;
        if let Some(d) = self.digests.as_mut() {
            let path = self.dir.join("digests.txt");
            d.flush().map_err(|e| io_err(&path, e))?;
        }
        if let (ArtifactMode::Digest, Some(f)) = (self.mode, last) {
            write_bytes(&self.dir.join("final.dogm"), &encode_snapshot(f))?;
        }
        Ok(())
    }
}

/// Engine parameters for a scenario: the sensor envelope comes from the scenario.
pub fn engine_config(cfg: &PipelineConfig, scenario: &ScenarioConfig) -> Result<EngineConfig, ConfigError> {
    let mut ism = cfg.ism;
    ism.max_range = scenario.sensor.max_range;
    ism.fov = cfg.free_sweep.then_some(scenario.sensor.fov);
    let mut filter = cfg.filter;
    if let Some(s) = cfg.seed {
        filter.rng_seed = s;
    }
    let transition = TransitionMatrix::with_decay(cfg.transition_decay).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(EngineConfig {
        spec: cfg.grid.spec(),
        ism,
        filter,
        fusion: cfg.fusion,
        extract: cfg.extract,
        transition,
    })
}

/// Calls the configured corrector for one frame.
pub fn correct(
    choice: &CorrectorChoice,
    frame: &DogmFrame,
    k: u64,
    gt: &GtFrame,
    v_thresh: f64,
    seed: u64,
) -> Result<Option<CorrectionGrid>, DogmError> {
    match choice {
        CorrectorChoice::None => Ok(None),
        CorrectorChoice::Oracle(noise) => oracle_corrector(frame, &gt.boxes, v_thresh, noise, seed, k).map(Some),
        CorrectorChoice::File(pattern) => file_corrector(pattern, k, &frame.spec),
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl Iterator<Item = T>) -> Result<(), RunError> {
    let mut w = create(path)?;
    for item in items {
        let line = serde_json::to_string(&item).expect("serializable");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Runs one scenario through one lane (or baseline plus corrected lanes) and
/// returns the per-lane tallies keyed by lane name.
pub fn run_lanes(
    cfg: &PipelineConfig,
    scenario: &ScenarioConfig,
    sim: &[SimFrame],
    out_dir: &Path,
    ab: bool,
    mode: ArtifactMode,
    mut timings: Option<&mut dyn Write>,
) -> Result<BTreeMap<String, Tally>, RunError> {
    let ecfg = engine_config(cfg, scenario)?;
    let seed = ecfg.filter.rng_seed;
    let mut lanes = Vec::new();
    if ab {
        let hybrid = match &cfg.corrector {
            CorrectorChoice::None => CorrectorChoice::Oracle(OracleNoise::default()),
            c => c.clone(),
        };
        lanes.push((Engine::new(ecfg.clone()), Lane::new("baseline", CorrectorChoice::None, out_dir.join("baseline"), mode)?));
        lanes.push((Engine::new(ecfg), Lane::new("hybrid", hybrid, out_dir.join("hybrid"), mode)?));
    } else {
        let name = match &cfg.corrector {
            CorrectorChoice::None => "baseline",
            _ => "hybrid",
        };
        lanes.push((Engine::new(ecfg), Lane::new(name, cfg.corrector.clone(), out_dir.to_path_buf(), mode)?));
    }
    let v_thresh = cfg.label_speed_threshold;
    let mut last_frames: Vec<Option<DogmFrame>> = vec![None; lanes.len()];
    for (fi, f) in sim.iter().enumerate() {
        let mut truth = None;
        for (li, (engine, lane)) in lanes.iter_mut().enumerate() {
            let choice = lane.corrector.clone();
            let out = engine
                .step(&f.scan, &mut |frame, k| correct(&choice, frame, k, &f.gt, v_thresh, seed))
                .map_err(|source| RunError::Frame {
                    frame: fi as u64,
                    source,
                })?;
            let k = out.frame_index;
            // grid truth comes from labelling the first (baseline) lane's frame
            if truth.is_none() {
                truth = Some(label_grid(out.frame, &f.gt.boxes, v_thresh).states());
            }
            let pred = out.frame.argmax_grid();
            lane.tally
                .add_frame(&pred, truth.as_ref().expect("set above"), out.objects.clone(), f.gt.clone())
                .map_err(|source| RunError::Frame { frame: k, source })?;
            if let Some(w) = timings.as_deref_mut() {
                for (step, d) in &out.timings.steps {
                    let _ = writeln!(w, "{} {k} {step} {}", lane.name, d.as_micros());
                }
            }
            for (step, d) in &out.timings.steps {
                log::debug!("{} frame {k} {step} {:?}", lane.name, d);
            }
            if out.diverged {
                log::warn!("{} frame {k}: particle weights underflowed and were reset", lane.name);
            }
            let frame_copy = matches!(mode, ArtifactMode::Digest).then(|| out.frame.clone());
            lane.write_frame(&out)?;
            if frame_copy.is_some() {
                last_frames[li] = frame_copy;
            }
        }
    }
    let mut tallies = BTreeMap::new();
    for ((_, mut lane), last) in lanes.into_iter().zip(last_frames) {
        lane.finish(last.as_ref())?;
        tallies.insert(lane.name.clone(), lane.tally);
    }
    Ok(tallies)
}

/// Writes `metrics.json` and `pr_curves.csv` for the given tallies.
pub fn write_reports(out_dir: &Path, scenarios: Vec<String>, tallies: &BTreeMap<String, Tally>) -> Result<MetricsReport, RunError> {
    let params = ApParams::default();
    let mut rows = BTreeMap::new();
    let mut aps = Vec::new();
    for (name, tally) in tallies {
        let (row, ap) = tally
            .score(&params)
            .map_err(|e| RunError::Runtime(format!("scoring {name}: {e}")))?;
        rows.insert(name.clone(), row);
        aps.push((name.as_str(), ap));
    }
    let report = MetricsReport { scenarios, rows };
    write_bytes(&out_dir.join("metrics.json"), report.to_json().as_bytes())?;
    let curves: Vec<(&str, &dogm_core::eval::ApReport)> = aps.iter().map(|(n, a)| (*n, a)).collect();
    write_bytes(&out_dir.join("pr_curves.csv"), pr_curves_csv(&curves).as_bytes())?;
    Ok(report)
}

fn scenario_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
}

/// `dogm run`: simulate the configured scenario and process it.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<MetricsReport, RunError> {
    cfg.validate()?;
    let mut scenario = load_scenario(&cfg.scenario).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if let Some(s) = cfg.seed {
        scenario.seed = s;
    }
    let mut sim = simulate(&scenario).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if let Some(n) = opts.frames {
        sim.truncate(n);
    }
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_jsonl(&out.join("gt.jsonl"), sim.iter().map(|f| &f.gt))?;
    write_jsonl(&out.join("scans.jsonl"), sim.iter().map(|f| &f.scan))?;
    let mut timing_file = match &opts.timings {
        Some(p) => Some(create(p)?),
        None => None,
    };
    let mode = ArtifactMode::Full {
        render: cfg.render,
        particles: cfg.dump_particles,
    };
    let tallies = run_lanes(
        cfg,
        &scenario,
        &sim,
        out,
        opts.ab,
        mode,
        timing_file.as_mut().map(|w| w as &mut dyn Write),
    )?;
    if let Some(w) = timing_file.as_mut() {
        w.flush().map_err(|e| RunError::Runtime(format!("timings: {e}")))?;
    }
    write_reports(out, vec![scenario_name(&cfg.scenario)], &tallies)
}

/// Noise of the corrected lane in the benchmark.
pub fn bench_noise() -> OracleNoise {
    OracleNoise {
        miss_rate: 0.2,
        flip_rate: 0.0,
        confidence_beta: Some((8.0, 2.0)),
    }
}

/// `dogm bench`: the ten-scenario suite, baseline against the configured
/// corrector (the noisy oracle when none is configured). Frames are recorded
/// as digests to keep the tree small.
pub fn run_bench(cfg: &PipelineConfig, seed: u64, out: &Path, frames: Option<usize>) -> Result<MetricsReport, RunError> {
    let mut cfg = cfg.clone();
    cfg.seed = Some(seed);
    if cfg.corrector == CorrectorChoice::None {
        cfg.corrector = CorrectorChoice::Oracle(bench_noise());
    }
    let cfg = &cfg;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut names = Vec::new();
    let mut total: BTreeMap<String, Tally> = BTreeMap::new();
    for (name, scenario) in dogm_sim::benchmark_suite(seed) {
        let mut sim = simulate(&scenario).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(n) = frames {
            sim.truncate(n);
        }
        let dir = out.join(&name);
        let tallies = run_lanes(cfg, &scenario, &sim, &dir, true, ArtifactMode::Digest, None)?;
        for (lane, t) in tallies {
            total.entry(lane).or_default().extend(t);
        }
        names.push(name);
    }
    write_reports(out, names, &total)
}
