//! Run settings: built-in defaults first, then a flat key=value config
//! file, then command-line flags; the output directory alone can also be
//! overridden by the `ONELANE_OUT_DIR` environment variable.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use onelane_core::dependence::DependentStructure;
use onelane_core::exec::ExecMode;
use onelane_core::filter::FilterConfig;
use onelane_core::hypothesis::ClutterModel;
use onelane_core::kinematics::NcvModel;
use onelane_core::simulator::{default_scenario_with_duration, Scenario};

/// Which dependence structure verifies hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Independence,
    Collision,
    Occlusion,
}

/// Every tunable knob, with the documented config key per field.
#[derive(Debug, Clone)]
pub struct Settings {
    /// `structure`: independence | collision | occlusion.
    pub structure: StructureKind,
    /// `seed`: base seed; run i uses seed + i.
    pub seed: u64,
    /// `runs`: number of Monte Carlo runs.
    pub runs: usize,
    /// `k`: maximum hypotheses kept per frame.
    pub k: usize,
    /// `tree_generations`: generations included in the exported tree.
    pub tree_generations: usize,
    /// `out_dir`: artifact root; one subdirectory per run.
    pub out_dir: PathBuf,
    /// `duration`: scenario length in frames.
    pub duration: usize,
    /// `pd`: probability of detection (tracker and simulated sensor).
    pub pd: f64,
    /// `ps`: track survival probability.
    pub ps: f64,
    /// `r_birth`: birth candidate existence probability.
    pub r_birth: f64,
    /// `gate`: coarse gate radius in meters.
    pub gate: f64,
    /// `q`: continuous process-noise intensity.
    pub q: f64,
    /// `dt`: frame period in seconds.
    pub dt: f64,
    /// `meas_sigma`: measurement noise standard deviation.
    pub meas_sigma: f64,
    /// `clutter_intensity`, `clutter_low`, `clutter_high`: bounded uniform
    /// Poisson clutter model.
    pub clutter_intensity: f64,
    pub clutter_low: f64,
    pub clutter_high: f64,
    /// `proposal_cap_factor`: per-parent proposal budget = factor × k.
    pub proposal_cap_factor: usize,
    /// `occlusion_sensor_pos`, `occlusion_shadow_halfwidth`: geometry of
    /// the occlusion structure (used only with `structure=occlusion`).
    pub occlusion_sensor_pos: f64,
    pub occlusion_shadow_halfwidth: f64,
    /// `exec`: sequential | parallel execution of per-parent work.
    pub exec: ExecMode,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            structure: StructureKind::Collision,
            seed: 1,
            runs: 1,
            k: 100,
            tree_generations: 5,
            out_dir: PathBuf::from("out"),
            duration: 70,
            pd: 0.99,
            ps: 0.999,
            r_birth: 0.5,
            gate: 20.0,
            q: 1.0,
            dt: 1.0,
            meas_sigma: 1.0,
            clutter_intensity: 5e-3,
            clutter_low: -50.0,
            clutter_high: 150.0,
            proposal_cap_factor: 50,
            occlusion_sensor_pos: -50.0,
            occlusion_shadow_halfwidth: 1.0,
            exec: ExecMode::default(),
        }
    }
}

impl Settings {
    /// Applies a flat key=value file; `#` starts a comment line.
    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value, found {raw:?}", path.display(), idx + 1);
            };
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "structure" => self.structure = parse_structure(value)?,
            "seed" => self.seed = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "tree_generations" => self.tree_generations = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "duration" => self.duration = parse(key, value)?,
            "pd" => self.pd = parse(key, value)?,
            "ps" => self.ps = parse(key, value)?,
            "r_birth" => self.r_birth = parse(key, value)?,
            "gate" => self.gate = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "meas_sigma" => self.meas_sigma = parse(key, value)?,
            "clutter_intensity" => self.clutter_intensity = parse(key, value)?,
            "clutter_low" => self.clutter_low = parse(key, value)?,
            "clutter_high" => self.clutter_high = parse(key, value)?,
            "proposal_cap_factor" => self.proposal_cap_factor = parse(key, value)?,
            "occlusion_sensor_pos" => self.occlusion_sensor_pos = parse(key, value)?,
            "occlusion_shadow_halfwidth" => self.occlusion_shadow_halfwidth = parse(key, value)?,
            "exec" => self.exec = parse_exec(value)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Basic sanity on the orchestration-level knobs; filter-level knobs
    /// are validated by the filter configuration itself.
    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            bail!("invalid value for key \"runs\": at least one run is required");
        }
        if self.duration < 1 {
            bail!("invalid value for key \"duration\": at least one frame is required");
        }
        if self.tree_generations < 1 {
            bail!(
                "invalid value for key \"tree_generations\": at least one generation is required"
            );
        }
        self.filter_config().validate().map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn dependent_structure(&self) -> DependentStructure {
        match self.structure {
            StructureKind::Independence => DependentStructure::Independence,
            StructureKind::Collision => DependentStructure::Collision,
            StructureKind::Occlusion => DependentStructure::Occlusion {
                sensor_pos: self.occlusion_sensor_pos,
                shadow_halfwidth: self.occlusion_shadow_halfwidth,
            },
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            pd: self.pd,
            ps: self.ps,
            r_birth: self.r_birth,
            clutter: ClutterModel::new(self.clutter_intensity, self.clutter_low, self.clutter_high),
            gate: self.gate,
            max_hypotheses: self.k,
            structure: self.dependent_structure(),
            ncv: NcvModel::new(self.q, self.dt, self.meas_sigma),
            proposal_cap_factor: self.proposal_cap_factor,
            exec: self.exec,
            ..FilterConfig::default()
        }
    }

    /// The simulated scenario for one run; the tracker's sensor assumptions
    /// and the simulated truth share one parameterization.
    pub fn scenario(&self, seed: u64) -> Scenario {
        let mut s = default_scenario_with_duration(seed, self.duration);
        s.dt = self.dt;
        s.pd_true = self.pd;
        s.meas_sigma_true = self.meas_sigma;
        s.clutter_true =
            ClutterModel::new(self.clutter_intensity, self.clutter_low, self.clutter_high);
        s
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow::anyhow!("invalid value for key {key:?}: {value:?} ({e})"))
}

fn parse_exec(value: &str) -> Result<ExecMode> {
    match value {
        "sequential" => Ok(ExecMode::Sequential),
        "parallel" => Ok(ExecMode::Parallel),
        other => {
            bail!("invalid value for key \"exec\": {other:?} (expected sequential or parallel)")
        }
    }
}

pub fn parse_structure(value: &str) -> Result<StructureKind> {
    match value {
        "independence" => Ok(StructureKind::Independence),
        "collision" => Ok(StructureKind::Collision),
        "occlusion" => Ok(StructureKind::Occlusion),
        other => bail!(
            "invalid value for key \"structure\": {other:?} (expected independence, collision, or occlusion)"
        ),
    }
}
