//! One pipeline instance: grid state plus particle population, advanced scan
//! by scan.

use dogm_core::cluster::{extract_objects, DetectedObject, ExtractParams};
use dogm_core::fusion::fuse_grid;
use dogm_core::ism::build_measurement_grid;
use dogm_core::particles::{cell_velocities, predict, resample, reweight, spawn};
use dogm_core::update::{apply_transition, bayes_update, realign};
use dogm_core::{
    CorrectionGrid, DogmError, DogmFrame, FilterParams, FusionParams, GridSpec, IsmParams, MeasurementGrid, Particle,
    RadarScan, TransitionMatrix,
};
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub spec: GridSpec,
    pub ism: IsmParams,
    pub filter: FilterParams,
    pub fusion: FusionParams,
    pub extract: ExtractParams,
    pub transition: TransitionMatrix,
}

/// Wall-clock time spent in each pipeline step of one frame.
#[derive(Clone, Debug, Default)]
pub struct StepTimings {
    pub steps: Vec<(&'static str, Duration)>,
}

impl StepTimings {
    fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.steps.push((name, start.elapsed()));
        out
    }
}

/// Per-frame correction source: sees the posterior and the frame index.
pub type CorrectorFn<'a> = dyn FnMut(&DogmFrame, u64) -> Result<Option<CorrectionGrid>, DogmError> + 'a;

pub struct StepOutput<'a> {
    pub frame_index: u64,
    pub frame: &'a DogmFrame,
    pub measurement: MeasurementGrid,
    pub correction: Option<CorrectionGrid>,
    pub particles: &'a [Particle],
    pub objects: Vec<DetectedObject>,
    /// Particle weights underflowed and were reset this frame.
    pub diverged: bool,
    pub timings: StepTimings,
}

pub struct Engine {
    cfg: EngineConfig,
    frame: Option<DogmFrame>,
    particles: Vec<Particle>,
    next_index: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Self {
        Self {
            cfg,
            frame: None,
            particles: Vec::new(),
            next_index: 0,
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Processes one scan. `corrector` sees the Bayesian posterior and may
    /// return a correction grid to fuse; `None` skips fusion for this frame.
    pub fn step(
        &mut self,
        scan: &RadarScan,
        corrector: &mut CorrectorFn<'_>,
    ) -> Result<StepOutput<'_>, DogmError> {
        let k = self.next_index;
        let cfg = &self.cfg;
        let mut t = StepTimings::default();

        let prior = match self.frame.take() {
            None => DogmFrame::new(cfg.spec, scan.ego_pose, scan.timestamp),
            Some(prev) => {
                let dt = scan.timestamp - prev.timestamp;
                if !(dt > 0.0) {
                    return Err(DogmError::param(
                        "scan.timestamp",
                        format!("must increase, got {} after {}", scan.timestamp, prev.timestamp),
                    ));
                }
                let aligned = t.time("realign", || realign(&prev, scan.ego_pose));
                let ego = aligned.ego();
                self.particles = t.time("predict", || {
                    predict(&self.particles, dt, &cfg.filter, &aligned.spec, ego, k)
                });
                aligned
            }
        };
        let mg = t.time("measurement_grid", || build_measurement_grid(scan, &prior.spec, &cfg.ism))?;
        let mut frame = t.time("bayes_update", || bayes_update(&prior, &mg))?;
        let correction = t.time("corrector", || corrector(&frame, k))?;
        if let Some(c) = &correction {
            frame = t.time("fuse", || fuse_grid(&frame, c, &mg.nearest_detection_distance, &cfg.fusion))?;
        }
        let births = t.time("spawn", || spawn(&frame, scan, Some(&mg), &cfg.filter, self.particles.len(), k));
        self.particles.extend(births);
        let diverged = t.time("reweight", || reweight(&mut self.particles, scan, &mg, &cfg.filter));
        self.particles = t.time("resample", || resample(&self.particles, &cfg.filter, k));
        frame = t.time("transition", || apply_transition(&frame, &cfg.transition));
        let velocity = t.time("cell_velocities", || {
            cell_velocities(&self.particles, &frame.spec, frame.ego(), cfg.filter.min_particles)
        });
        frame.velocity = velocity;
        frame.mask_velocity();
        let objects = t.time("extract", || extract_objects(&self.particles, &cfg.extract));

        self.next_index += 1;
        let frame = self.frame.insert(frame);
        Ok(StepOutput {
            frame_index: k,
            frame,
            measurement: mg,
            correction,
            particles: &self.particles,
            objects,
            diverged,
            timings: t,
        })
    }
}
