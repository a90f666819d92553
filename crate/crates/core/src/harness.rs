//! Experiment harness: one serializable config drives single runs, swarm-size
//! sweeps, and head-to-head mode comparisons, with optional JSONL/CSV output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::agent::{
    Agent, StepSchedule, DEFAULT_DEGREE, DEFAULT_PERTURBATIONS, DEFAULT_RIDGE_LAMBDA,
    DEFAULT_WINDOW,
};
use crate::awareness::{deduplicate, objective_of, DEFAULT_DEDUP_EPSILON};
use crate::baseline::semi_exhaustive_step;
use crate::constraints::{ClearanceRule, StepLimits};
use crate::coordinator::{sample_initial_poses, Engine, EngineParams, FailureWindow};
use crate::error::CoreError;
use crate::geom::{AltitudeAssignment, CameraModel, Pose};
use crate::perception::{sense_swarm, MeasurementSet, SensorNoise};
use crate::record::{count_violations, summarize, RunSummary, StepRecord, UavStepInfo, ViolationCounts};
use crate::rng::{self, Domain};
use crate::world::{drift_objects, generate_world, region_preset, Layout, World, WorldSpec};

/// Which decision layer moves the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Scalar-feedback optimization: each UAV fits a local surrogate to
    /// broadcast contribution estimates and moves to its constrained argmax.
    Proposed,
    /// Semi-exhaustive search: jointly sample candidate swarm configurations
    /// and fly the best one under a noise-free evaluation.
    Baseline,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Proposed => "proposed",
            Mode::Baseline => "baseline",
        }
    }
}

/// Complete description of an experiment. Every field has a default, so a
/// config file only needs the fields it overrides; unknown fields are
/// rejected so a typoed key cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Region preset name: "area1", "area2", or "area3".
    pub area: String,
    pub layout: Layout,
    pub n_objects: usize,
    pub n_obstacles: usize,
    /// Seed for world generation only. Run seeds drive everything else, so
    /// several seeds can replay the same world.
    pub world_seed: u64,
    pub n_uavs: usize,
    pub n_steps: u64,
    /// Run seeds consumed by `sweep` and `compare`; single runs take an
    /// explicit seed argument instead.
    pub seeds: Vec<u64>,
    pub degree: u32,
    pub window: usize,
    pub perturbations: usize,
    pub ridge_lambda: f64,
    pub schedule: StepSchedule,
    pub dedup_epsilon: f64,
    pub noise: SensorNoise,
    pub camera: CameraModel,
    pub altitudes: AltitudeAssignment,
    pub limits: StepLimits,
    pub clearance: ClearanceRule,
    /// Joint configurations evaluated per baseline step (the current
    /// configuration counts as one of them).
    pub baseline_candidates: usize,
    pub drift_sigma: f64,
    pub failures: Vec<FailureWindow>,
    pub emit_timing: bool,
    pub mode: Mode,
    /// Worker threads; 0 keeps the process-wide rayon default.
    pub threads: usize,
    /// Where record streams, summaries, and CSVs are written; in-memory
    /// only when unset.
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            area: "area1".into(),
            layout: Layout::Uniform,
            n_objects: 120,
            n_obstacles: 10,
            world_seed: 42,
            n_uavs: 4,
            n_steps: 300,
            seeds: (1..=10).collect(),
            degree: DEFAULT_DEGREE,
            window: DEFAULT_WINDOW,
            perturbations: DEFAULT_PERTURBATIONS,
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            schedule: StepSchedule::default(),
            dedup_epsilon: DEFAULT_DEDUP_EPSILON,
            noise: SensorNoise::default(),
            camera: CameraModel::default(),
            altitudes: AltitudeAssignment::default(),
            limits: StepLimits::default(),
            clearance: ClearanceRule::default(),
            baseline_candidates: 60,
            drift_sigma: 0.0,
            failures: Vec::new(),
            emit_timing: false,
            mode: Mode::Proposed,
            threads: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, CoreError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        region_preset(&self.area)?;
        if self.n_uavs == 0 {
            return Err(CoreError::InvalidConfig("n_uavs must be at least 1".into()));
        }
        // One bootstrap move plus at least one coordinated step.
        if self.n_steps < 2 {
            return Err(CoreError::InvalidConfig("n_steps must be at least 2".into()));
        }
        if self.seeds.is_empty() {
            return Err(CoreError::InvalidConfig("seeds must be non-empty".into()));
        }
        if self.degree == 0 {
            return Err(CoreError::InvalidConfig("degree must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(CoreError::InvalidConfig("window must be at least 1".into()));
        }
        if self.perturbations == 0 {
            return Err(CoreError::InvalidConfig(
                "perturbations must be at least 1".into(),
            ));
        }
        if !self.ridge_lambda.is_finite() || self.ridge_lambda < 0.0 {
            return Err(CoreError::InvalidConfig(
                "ridge_lambda must be finite and non-negative".into(),
            ));
        }
        if !self.dedup_epsilon.is_finite() || self.dedup_epsilon <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "dedup_epsilon must be finite and positive".into(),
            ));
        }
        if self.baseline_candidates == 0 {
            return Err(CoreError::InvalidConfig(
                "baseline_candidates must be at least 1".into(),
            ));
        }
        if !self.drift_sigma.is_finite() || self.drift_sigma < 0.0 {
            return Err(CoreError::InvalidConfig(
                "drift_sigma must be finite and non-negative".into(),
            ));
        }
        if self.altitudes.base_altitude <= 0.0 || self.altitudes.increment <= 0.0 {
            return Err(CoreError::InvalidConfig(
                "altitudes must be positive and strictly increasing".into(),
            ));
        }
        self.schedule.validate()?;
        self.limits.validate()?;
        self.clearance.validate()?;
        self.camera.validate()?;
        self.noise.validate()?;
        for w in &self.failures {
            if w.uav >= self.n_uavs {
                return Err(CoreError::InvalidConfig(format!(
                    "failure window names UAV {} but the swarm has {}",
                    w.uav, self.n_uavs
                )));
            }
            if w.from_step > w.to_step {
                return Err(CoreError::InvalidConfig(format!(
                    "failure window for UAV {} ends before it starts",
                    w.uav
                )));
            }
        }
        Ok(())
    }

    /// The engine-facing subset of this config.
    pub fn engine_params(&self) -> EngineParams {
        EngineParams {
            dedup_epsilon: self.dedup_epsilon,
            schedule: self.schedule,
            perturbations: self.perturbations,
            limits: self.limits,
            clearance: self.clearance,
            camera: self.camera,
            altitudes: self.altitudes,
            noise: self.noise,
            n_steps: self.n_steps,
            drift_sigma: self.drift_sigma,
            failures: self.failures.clone(),
            emit_timing: self.emit_timing,
        }
    }

    pub fn build_world(&self) -> Result<World, CoreError> {
        let spec = WorldSpec {
            region: region_preset(&self.area)?,
            n_objects: self.n_objects,
            n_obstacles: self.n_obstacles,
            layout: self.layout,
        };
        generate_world(&spec, self.world_seed)
    }
}

/// Records plus summary from one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub summary: RunSummary,
}

/// Run one simulation, invoking `on_record` with each of the
/// `n_steps + 1` records (steps `0..=n_steps`) as it is produced.
pub fn run_with(
    config: &ExperimentConfig,
    seed: u64,
    mut on_record: impl FnMut(&StepRecord) -> Result<(), CoreError>,
) -> Result<RunOutput, CoreError> {
    config.validate()?;
    let world = config.build_world()?;
    let records = match config.mode {
        Mode::Proposed => run_proposed(config, world, seed, &mut on_record)?,
        Mode::Baseline => run_baseline(config, world, seed, &mut on_record)?,
    };
    let mut summary = summarize(&records)?;
    summary.seed = Some(seed);
    Ok(RunOutput { records, summary })
}

/// Run one simulation; when the config names an output directory, stream
/// records to `<mode>-seed<seed>.jsonl` and write
/// `<mode>-seed<seed>-summary.json` beside it. The directory is created and
/// the record file opened before any simulation work, so an unwritable
/// destination fails fast.
pub fn run(config: &ExperimentConfig, seed: u64) -> Result<RunOutput, CoreError> {
    config.validate()?;
    let mut writer = match &config.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}-seed{}.jsonl", config.mode.label(), seed));
            Some(BufWriter::new(fs::File::create(path)?))
        }
        None => None,
    };
    let output = run_with(config, seed, |rec| {
        if let Some(w) = writer.as_mut() {
            serde_json::to_writer(&mut *w, rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    if let Some(mut w) = writer {
        w.flush()?;
    }
    if let Some(dir) = &config.output_dir {
        let path = dir.join(format!("{}-seed{}-summary.json", config.mode.label(), seed));
        fs::write(path, serde_json::to_string_pretty(&output.summary)?)?;
    }
    Ok(output)
}

fn run_proposed(
    config: &ExperimentConfig,
    world: World,
    seed: u64,
    on_record: &mut impl FnMut(&StepRecord) -> Result<(), CoreError>,
) -> Result<Vec<StepRecord>, CoreError> {
    let mut agents: Vec<Agent> = (0..config.n_uavs)
        .map(|i| {
            Agent::new(
                i,
                config.degree,
                config.window,
                config.ridge_lambda,
                &world.region,
            )
        })
        .collect();
    let mut engine = Engine::new(world, config.engine_params(), seed);
    let mut records = Vec::with_capacity(config.n_steps as usize + 1);

    let (mut state, first) = engine.bootstrap(&mut agents)?;
    on_record(&first)?;
    records.push(first);
    while state.step < config.n_steps {
        let (next, record) = engine.step_swarm(state, &mut agents)?;
        on_record(&record)?;
        records.push(record);
        state = next;
    }
    let last = engine.final_record(&state, &mut agents)?;
    on_record(&last)?;
    records.push(last);
    Ok(records)
}

fn run_baseline(
    config: &ExperimentConfig,
    mut world: World,
    seed: u64,
    on_record: &mut impl FnMut(&StepRecord) -> Result<(), CoreError>,
) -> Result<Vec<StepRecord>, CoreError> {
    let params = config.engine_params();
    let mut init_rng = rng::stream(seed, Domain::InitialPoses, 0, 0);
    let mut poses = sample_initial_poses(
        config.n_uavs,
        &world.region,
        &params.clearance,
        &world.obstacles,
        &params.altitudes,
        &mut init_rng,
    )?;
    let mut records = Vec::with_capacity(config.n_steps as usize + 1);

    let t0 = Instant::now();
    let measurements = sense_swarm(
        &world,
        &poses,
        &params.altitudes,
        &params.camera,
        &params.noise,
        seed,
        0,
    );
    let first = baseline_record(
        0,
        &measurements,
        &poses,
        None,
        1,
        &world,
        &params,
        config.emit_timing.then(|| t0.elapsed().as_secs_f64() * 1e3),
    );
    on_record(&first)?;
    records.push(first);

    for k in 1..=config.n_steps {
        let t0 = Instant::now();
        drift_objects(&mut world, config.drift_sigma, seed, k);
        // Same step-size timing as the proposed mode: the move arriving at
        // step k was decided at step k - 1.
        let alpha = config.schedule.alpha(k - 1);
        let (next, selection_evals) = semi_exhaustive_step(
            &world,
            &poses,
            config.baseline_candidates,
            alpha,
            &params,
            seed,
            k,
        );
        let measurements = sense_swarm(
            &world,
            &next,
            &params.altitudes,
            &params.camera,
            &params.noise,
            seed,
            k,
        );
        let record = baseline_record(
            k,
            &measurements,
            &next,
            Some(&poses),
            // The recorded cost is the candidate sweep alone; the arrival
            // measurement reuses the stay candidate's sensing geometry.
            selection_evals,
            &world,
            &params,
            config.emit_timing.then(|| t0.elapsed().as_secs_f64() * 1e3),
        );
        on_record(&record)?;
        records.push(record);
        poses = next;
    }
    Ok(records)
}

#[allow(clippy::too_many_arguments)]
fn baseline_record(
    step: u64,
    measurements: &[MeasurementSet],
    poses: &[Pose],
    prev: Option<&[Pose]>,
    objective_evaluations: usize,
    world: &World,
    params: &EngineParams,
    wall_time_ms: Option<f64>,
) -> StepRecord {
    StepRecord {
        step,
        global_objective: objective_of(measurements, params.dedup_epsilon),
        unique_objects: deduplicate(measurements, params.dedup_epsilon).len(),
        objective_evaluations,
        uavs: poses
            .iter()
            .map(|p| UavStepInfo {
                pose: *p,
                delta: None,
                local_objective: 0.0,
                chosen_index: None,
                rejected_count: None,
                failed: false,
            })
            .collect(),
        violations: count_violations(prev, poses, &world.region, &params.limits, &params.clearance),
        wall_time_ms,
    }
}

/// Rebuild a run summary from a JSONL record stream on disk.
pub fn summarize_file(path: &Path) -> Result<RunSummary, CoreError> {
    let file = fs::File::open(path)?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<StepRecord>(&line)?);
    }
    summarize(&records)
}

/// Aggregate statistics for one swarm size across the config's seeds.
#[derive(Debug, Clone, Serialize)]
pub struct SizeAggregate {
    pub n_uavs: usize,
    pub per_seed_converged: Vec<(u64, f64)>,
    pub converged_mean: f64,
    /// Population standard deviation of the per-seed converged values.
    pub converged_std: f64,
    /// Per-step mean objective across seeds, indexed by step.
    pub mean_trajectory: Vec<f64>,
    pub std_trajectory: Vec<f64>,
    /// Constraint-audit totals summed over this size's runs.
    pub violation_totals: ViolationCounts,
    /// Records audited for those totals (steps plus each run's start).
    pub records_audited: usize,
}

/// Run the configured mode for every swarm size and seed combination.
/// Writes `sweep-trajectories.csv` (long format) and `sweep-converged.csv`
/// when the config names an output directory.
pub fn sweep(config: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<SizeAggregate>, CoreError> {
    config.validate()?;
    if sizes.is_empty() {
        return Err(CoreError::InvalidConfig(
            "sweep needs at least one swarm size".into(),
        ));
    }
    if sizes.contains(&0) {
        return Err(CoreError::InvalidConfig(
            "swarm size 0 is not a swarm".into(),
        ));
    }
    let pairs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let outputs: Vec<RunOutput> = pairs
        .par_iter()
        .map(|&(n_uavs, seed)| {
            let mut c = config.clone();
            c.n_uavs = n_uavs;
            // Per-run files are noise at sweep scale; only CSVs are written.
            c.output_dir = None;
            run_with(&c, seed, |_| Ok(()))
        })
        .collect::<Result<_, _>>()?;

    let mut aggregates = Vec::with_capacity(sizes.len());
    for (si, &n_uavs) in sizes.iter().enumerate() {
        let per_size = &outputs[si * config.seeds.len()..(si + 1) * config.seeds.len()];
        let per_seed_converged: Vec<(u64, f64)> = config
            .seeds
            .iter()
            .zip(per_size)
            .map(|(&seed, out)| (seed, out.summary.converged_value))
            .collect();
        let values: Vec<f64> = per_seed_converged.iter().map(|&(_, v)| v).collect();
        let (converged_mean, converged_std) = mean_std(&values);
        let record_len = per_size[0].records.len();
        let mut mean_trajectory = Vec::with_capacity(record_len);
        let mut std_trajectory = Vec::with_capacity(record_len);
        for t in 0..record_len {
            let step_values: Vec<f64> = per_size
                .iter()
                .map(|out| out.records[t].global_objective)
                .collect();
            let (m, s) = mean_std(&step_values);
            mean_trajectory.push(m);
            std_trajectory.push(s);
        }
        let mut violation_totals = ViolationCounts::default();
        let mut records_audited = 0;
        for out in per_size {
            violation_totals += out.summary.violation_totals;
            records_audited += out.records.len();
        }
        aggregates.push(SizeAggregate {
            n_uavs,
            per_seed_converged,
            converged_mean,
            converged_std,
            mean_trajectory,
            std_trajectory,
            violation_totals,
            records_audited,
        });
    }

    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        let mut traj = String::from("n_uavs,step,mean_objective,std_objective\n");
        for agg in &aggregates {
            for (step, (m, s)) in agg
                .mean_trajectory
                .iter()
                .zip(&agg.std_trajectory)
                .enumerate()
            {
                traj.push_str(&format!("{},{},{},{}\n", agg.n_uavs, step, m, s));
            }
        }
        fs::write(dir.join("sweep-trajectories.csv"), traj)?;
        let mut conv = String::from("n_uavs,seed,converged_value\n");
        for agg in &aggregates {
            for &(seed, value) in &agg.per_seed_converged {
                conv.push_str(&format!("{},{},{}\n", agg.n_uavs, seed, value));
            }
        }
        fs::write(dir.join("sweep-converged.csv"), conv)?;
    }
    Ok(aggregates)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Converged-objective ratio measured in comparable field experiments
/// (47.64 against 50.97), for context when judging the synthetic gap
/// between the two modes.
pub const REFERENCE_CONVERGED_RATIO: f64 = 47.64 / 50.97;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub proposed: f64,
    pub baseline: f64,
    /// proposed / baseline converged values for this seed.
    pub ratio: f64,
    pub proposed_evaluations: usize,
    pub baseline_evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub mean_proposed: f64,
    pub mean_baseline: f64,
    /// Mean proposed converged value over mean baseline converged value.
    pub converged_ratio: f64,
    /// Baseline objective evaluations spent per proposed objective
    /// evaluation; the baseline's cost multiplier.
    pub evaluation_ratio: f64,
    pub reference_ratio: f64,
    /// Constraint-audit totals summed over both modes and all seeds.
    pub violation_totals: ViolationCounts,
    /// Records audited for those totals.
    pub records_audited: usize,
}

/// Run two decision modes on identical worlds and seeds and compare their
/// converged values and evaluation budgets. `mode_a` fills the proposed
/// columns. Writes `compare.json` and `compare.csv` when the config names
/// an output directory.
pub fn compare_modes(
    config: &ExperimentConfig,
    mode_a: Mode,
    mode_b: Mode,
) -> Result<ComparisonReport, CoreError> {
    config.validate()?;
    let runs: Vec<(RunSummary, RunSummary)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut ca = config.clone();
            ca.mode = mode_a;
            ca.output_dir = None;
            let mut cb = config.clone();
            cb.mode = mode_b;
            cb.output_dir = None;
            let a = run_with(&ca, seed, |_| Ok(()))?;
            let b = run_with(&cb, seed, |_| Ok(()))?;
            Ok::<_, CoreError>((a.summary, b.summary))
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<ComparisonRow> = config
        .seeds
        .iter()
        .zip(&runs)
        .map(|(&seed, (a, b))| ComparisonRow {
            seed,
            proposed: a.converged_value,
            baseline: b.converged_value,
            ratio: a.converged_value / b.converged_value,
            proposed_evaluations: a.objective_evaluations_total,
            baseline_evaluations: b.objective_evaluations_total,
        })
        .collect();
    let mean_proposed = rows.iter().map(|r| r.proposed).sum::<f64>() / rows.len() as f64;
    let mean_baseline = rows.iter().map(|r| r.baseline).sum::<f64>() / rows.len() as f64;
    let total_a: usize = rows.iter().map(|r| r.proposed_evaluations).sum();
    let total_b: usize = rows.iter().map(|r| r.baseline_evaluations).sum();
    let mut violation_totals = ViolationCounts::default();
    let mut records_audited = 0;
    for (a, b) in &runs {
        violation_totals += a.violation_totals;
        violation_totals += b.violation_totals;
        records_audited += (a.last_step + 1 + b.last_step + 1) as usize;
    }
    let report = ComparisonReport {
        rows,
        mean_proposed,
        mean_baseline,
        converged_ratio: mean_proposed / mean_baseline,
        evaluation_ratio: total_b as f64 / total_a as f64,
        reference_ratio: REFERENCE_CONVERGED_RATIO,
        violation_totals,
        records_audited,
    };

    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("compare.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
        let mut csv =
            String::from("seed,proposed,baseline,ratio,proposed_evaluations,baseline_evaluations\n");
        for r in &report.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.seed, r.proposed, r.baseline, r.ratio, r.proposed_evaluations, r.baseline_evaluations
            ));
        }
        fs::write(dir.join("compare.csv"), csv)?;
    }
    Ok(report)
}

/// Proposed mode against the semi-exhaustive baseline on the config's seeds.
pub fn compare(config: &ExperimentConfig) -> Result<ComparisonReport, CoreError> {
    compare_modes(config, Mode::Proposed, Mode::Baseline)
}

/// Run `f` on a dedicated rayon pool with `threads` workers; 0 runs it on
/// the process-wide default pool.
pub fn with_thread_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CoreError> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CoreError::InvalidConfig(format!("cannot build a {threads}-thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n_objects: 12,
            n_obstacles: 2,
            n_uavs: 2,
            n_steps: 4,
            seeds: vec![1, 2],
            baseline_candidates: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_validates_and_round_trips() {
        let config = ExperimentConfig::default();
        config.validate().unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.n_uavs, config.n_uavs);
        assert_eq!(back.area, config.area);
        assert_eq!(back.mode, config.mode);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let config = ExperimentConfig::from_json(r#"{"n_uavs": 7, "area": "area2"}"#).unwrap();
        assert_eq!(config.n_uavs, 7);
        assert_eq!(config.area, "area2");
        assert_eq!(config.n_steps, 300);
        assert_eq!(config.perturbations, DEFAULT_PERTURBATIONS);
    }

    #[test]
    fn unknown_field_is_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"n_uav": 7}"#).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases = [
            r#"{"n_uavs": 0}"#,
            r#"{"n_steps": 1}"#,
            r#"{"seeds": []}"#,
            r#"{"area": "area9"}"#,
            r#"{"dedup_epsilon": 0.0}"#,
            r#"{"baseline_candidates": 0}"#,
            r#"{"drift_sigma": -0.5}"#,
            r#"{"failures": [{"uav": 4, "from_step": 1, "to_step": 2}]}"#,
            r#"{"failures": [{"uav": 0, "from_step": 5, "to_step": 2}]}"#,
        ];
        for text in cases {
            assert!(
                ExperimentConfig::from_json(text).is_err(),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn empty_world_run_has_zero_objective_everywhere() {
        let config = ExperimentConfig {
            n_objects: 0,
            n_obstacles: 0,
            ..tiny_config()
        };
        let out = run_with(&config, 9, |_| Ok(())).unwrap();
        assert_eq!(out.records.len(), config.n_steps as usize + 1);
        for (k, rec) in out.records.iter().enumerate() {
            assert_eq!(rec.step, k as u64);
            assert_eq!(rec.global_objective, 0.0);
            assert_eq!(rec.unique_objects, 0);
        }
        assert_eq!(out.summary.converged_value, 0.0);
        assert!(out.summary.whole_run_fallback);
    }

    #[test]
    fn proposed_record_stream_structure() {
        let config = tiny_config();
        let out = run_with(&config, 3, |_| Ok(())).unwrap();
        let n = config.n_uavs;
        let records = &out.records;
        assert_eq!(records.len(), config.n_steps as usize + 1);

        // Bootstrap: one sensing pass, no decision, no deltas.
        assert_eq!(records[0].objective_evaluations, 1);
        for u in &records[0].uavs {
            assert!(u.delta.is_none());
            assert!(u.chosen_index.is_none());
        }
        // Interior steps: n swaps plus the arrival measurement, a decision
        // and a delta per UAV.
        for rec in &records[1..records.len() - 1] {
            assert_eq!(rec.objective_evaluations, n + 1);
            for u in &rec.uavs {
                assert!(u.delta.is_some());
                assert!(u.chosen_index.is_some());
                assert!(u.rejected_count.is_some());
            }
        }
        // Terminal record: deltas delivered, no decision follows.
        let last = records.last().unwrap();
        assert_eq!(last.step, config.n_steps);
        assert_eq!(last.objective_evaluations, n + 1);
        for u in &last.uavs {
            assert!(u.delta.is_some());
            assert!(u.chosen_index.is_none());
        }
    }

    #[test]
    fn baseline_record_stream_structure() {
        let config = ExperimentConfig {
            mode: Mode::Baseline,
            ..tiny_config()
        };
        let out = run_with(&config, 3, |_| Ok(())).unwrap();
        assert_eq!(out.records.len(), config.n_steps as usize + 1);
        assert_eq!(out.records[0].objective_evaluations, 1);
        for rec in &out.records[1..] {
            assert_eq!(rec.objective_evaluations, config.baseline_candidates);
            for u in &rec.uavs {
                assert!(u.delta.is_none());
                assert!(u.chosen_index.is_none());
                assert!(!u.failed);
            }
        }
        let totals = out.summary.violation_totals;
        assert_eq!(totals.total(), 0);
    }

    #[test]
    fn run_writes_jsonl_and_summary() {
        let dir = tempdir().unwrap();
        let config = ExperimentConfig {
            output_dir: Some(dir.path().to_path_buf()),
            ..tiny_config()
        };
        let out = run(&config, 5).unwrap();
        let jsonl = dir.path().join("proposed-seed5.jsonl");
        let lines = fs::read_to_string(&jsonl).unwrap();
        assert_eq!(lines.lines().count(), config.n_steps as usize + 1);

        let rebuilt = summarize_file(&jsonl).unwrap();
        assert_eq!(rebuilt.converged_value, out.summary.converged_value);
        assert_eq!(rebuilt.n_uavs, out.summary.n_uavs);

        let summary_text =
            fs::read_to_string(dir.path().join("proposed-seed5-summary.json")).unwrap();
        let stored: RunSummary = serde_json::from_str(&summary_text).unwrap();
        assert_eq!(stored.seed, Some(5));
        assert_eq!(stored.converged_value, out.summary.converged_value);
    }

    #[test]
    fn unwritable_output_dir_fails_before_simulating() {
        let dir = tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"not a directory").unwrap();
        let config = ExperimentConfig {
            // A path *through* a regular file cannot be created.
            output_dir: Some(blocker.join("sub")),
            // Large enough that accidentally running would be obvious in
            // test time.
            n_steps: 10_000,
            ..tiny_config()
        };
        let started = Instant::now();
        let err = run(&config, 1).unwrap_err();
        assert!(matches!(err, CoreError::Io(_)), "unexpected: {err:?}");
        assert!(started.elapsed().as_secs() < 5);
    }

    #[test]
    fn identical_seeds_reproduce_records_exactly() {
        let config = tiny_config();
        let a = run_with(&config, 11, |_| Ok(())).unwrap();
        let b = run_with(&config, 11, |_| Ok(())).unwrap();
        assert_eq!(
            serde_json::to_string(&a.records).unwrap(),
            serde_json::to_string(&b.records).unwrap()
        );
    }

    #[test]
    fn failure_window_freezes_the_failed_uav() {
        let config = ExperimentConfig {
            failures: vec![FailureWindow {
                uav: 0,
                from_step: 1,
                to_step: 2,
            }],
            ..tiny_config()
        };
        let out = run_with(&config, 7, |_| Ok(())).unwrap();
        let records = &out.records;
        // Decisions at steps 1 and 2 are held, freezing the pose seen at
        // records 2 and 3.
        let p1 = records[1].uavs[0].pose;
        assert_eq!(records[2].uavs[0].pose, p1);
        assert_eq!(records[3].uavs[0].pose, p1);
        assert!(records[1].uavs[0].failed);
        assert!(records[2].uavs[0].failed);
        assert!(!records[3].uavs[0].failed);
        assert!(records[1].uavs[0].delta.is_none());
        // The healthy UAV still receives contributions and decides.
        assert!(records[1].uavs[1].delta.is_some());
        assert!(records[1].uavs[1].chosen_index.is_some());
    }

    #[test]
    fn sweep_aggregates_and_writes_csvs() {
        let dir = tempdir().unwrap();
        let config = ExperimentConfig {
            output_dir: Some(dir.path().to_path_buf()),
            ..tiny_config()
        };
        let aggregates = sweep(&config, &[1, 2]).unwrap();
        assert_eq!(aggregates.len(), 2);
        for agg in &aggregates {
            assert_eq!(agg.per_seed_converged.len(), config.seeds.len());
            assert_eq!(agg.mean_trajectory.len(), config.n_steps as usize + 1);
            assert_eq!(agg.std_trajectory.len(), config.n_steps as usize + 1);
            assert!(agg.converged_std >= 0.0);
        }

        let traj = fs::read_to_string(dir.path().join("sweep-trajectories.csv")).unwrap();
        let mut lines = traj.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n_uavs,step,mean_objective,std_objective"
        );
        assert_eq!(lines.count(), 2 * (config.n_steps as usize + 1));
        let conv = fs::read_to_string(dir.path().join("sweep-converged.csv")).unwrap();
        assert_eq!(conv.lines().count(), 1 + 2 * config.seeds.len());
    }

    #[test]
    fn sweep_rejects_empty_and_zero_sizes() {
        let config = tiny_config();
        assert!(sweep(&config, &[]).is_err());
        assert!(sweep(&config, &[2, 0]).is_err());
    }

    #[test]
    fn comparing_a_mode_with_itself_gives_ratio_one() {
        let config = tiny_config();
        let report = compare_modes(&config, Mode::Proposed, Mode::Proposed).unwrap();
        for row in &report.rows {
            assert_eq!(row.proposed, row.baseline);
            assert_eq!(row.ratio, 1.0);
            assert_eq!(row.proposed_evaluations, row.baseline_evaluations);
        }
        assert_eq!(report.converged_ratio, 1.0);
        assert_eq!(report.evaluation_ratio, 1.0);
    }

    #[test]
    fn compare_writes_report_files() {
        let dir = tempdir().unwrap();
        let config = ExperimentConfig {
            output_dir: Some(dir.path().to_path_buf()),
            seeds: vec![1],
            baseline_candidates: 5,
            ..tiny_config()
        };
        let report = compare(&config).unwrap();
        assert_eq!(report.rows.len(), 1);
        // 5 baseline candidates per step vs 2 swaps + arrival for proposed.
        assert!(report.evaluation_ratio > 1.0);
        assert!((report.reference_ratio - 47.64 / 50.97).abs() < 1e-15);
        assert!(dir.path().join("compare.json").exists());
        let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn thread_pool_helper_runs_the_closure() {
        let value = with_thread_pool(2, || 21 * 2).unwrap();
        assert_eq!(value, 42);
        let default_pool = with_thread_pool(0, || "ok").unwrap();
        assert_eq!(default_pool, "ok");
    }
}
