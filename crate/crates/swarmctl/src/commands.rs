//! The three run pipelines behind the CLI subcommands.

use std::path::{Path, PathBuf};

use swarm_lab::integrator::simulate;
use swarm_lab::region::{probability_grid, extract_contours, theoretical_boundary, BoundaryVariant, TrialProtocol};
use swarm_lab::{ArgConvention, Error, Result};

use crate::config::{BoundaryConfig, ModelConfig, ScenarioConfig};
use crate::output;

/// Environment variable overriding the config seed for quick experiments.
pub const SEED_ENV: &str = "SWARMCTL_SEED";

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let mut config = ScenarioConfig::from_json(&text)?;
    if let Ok(seed_text) = std::env::var(SEED_ENV) {
        let seed: u64 = seed_text
            .parse()
            .map_err(|_| Error::config(format!("{SEED_ENV} must be an unsigned integer")))?;
        config.init.with_seed(seed);
    }
    Ok(config)
}

fn out_dir(config: &ScenarioConfig, override_dir: &Option<PathBuf>) -> PathBuf {
    override_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir))
}

/// Run one scenario and write `trajectory.csv` plus `summary.json`.
pub fn cmd_simulate(config_path: &Path, out: &Option<PathBuf>) -> Result<()> {
    let config = load_config(config_path)?;
    let built = config.build()?;
    let rec = simulate(&built.model, &built.control, &built.state0, &built.sim)?;
    let dir = out_dir(&config, out);
    output::write_file(&dir.join("trajectory.csv"), &output::trajectory_csv(&rec))?;
    output::write_file(
        &dir.join("summary.json"),
        &output::RunSummary::from_record(&rec).to_json(),
    )?;
    Ok(())
}

/// Rerun the scenario once per value of the addressed numeric parameter,
/// with the same initial data, and tabulate entry times and final
/// functionals.
pub fn cmd_sweep(
    config_path: &Path,
    param: &str,
    values: &[f64],
    out: &Option<PathBuf>,
) -> Result<()> {
    let base = load_config(config_path)?;
    let base_value = serde_json::to_value(&base).map_err(|e| Error::config(e.to_string()))?;
    let dir = out_dir(&base, out);

    let mut rows = Vec::new();
    for (idx, &value) in values.iter().enumerate() {
        let patched = crate::config::set_numeric_field(&base_value, param, value)?;
        let config: ScenarioConfig =
            serde_json::from_value(patched).map_err(|e| Error::config(e.to_string()))?;
        let built = config.build()?;
        let rec = simulate(&built.model, &built.control, &built.state0, &built.sim)?;
        let final_functional = rec.final_energy().unwrap_or_else(|| rec.final_v_spread());
        rows.push(output::SweepRow {
            value,
            region_entry_time: rec.region_entry_time,
            final_functional,
        });
        output::write_file(
            &dir.join(format!("summary_{idx:03}.json")),
            &output::RunSummary::from_record(&rec).to_json(),
        )?;
    }
    output::write_file(&dir.join("sweep.csv"), &output::sweep_csv(&rows))?;
    Ok(())
}

/// Fill the Monte-Carlo probability grid and write the grid, requested
/// certified boundaries, and contour polylines.
pub fn cmd_region(config_path: &Path, jobs: Option<usize>, out: &Option<PathBuf>) -> Result<()> {
    let config = load_config(config_path)?;
    let region = config
        .region
        .as_ref()
        .ok_or_else(|| Error::config("region command needs a region block"))?;
    let model = config.build_model()?;
    let control = config.build_control()?;
    let sim = config.sim.build();
    sim.validate()?;

    if let Some(k) = jobs {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }

    let x0_axis = region.x0.build()?;
    let v0_axis = region.v0.build()?;
    let protocol = TrialProtocol {
        trials: region.trials,
        success_v: region.success_v,
        ..Default::default()
    };
    let seed = config.init.seed().unwrap_or(0);
    let grid = probability_grid(&x0_axis, &v0_axis, &model, &control, &protocol, &sim, seed)?;
    let dir = out_dir(&config, out);
    output::write_file(&dir.join("grid.csv"), &output::grid_csv(&grid))?;

    let kernel = match &config.model {
        ModelConfig::CuckerSmale { kernel, .. } => Some(kernel.build(ArgConvention::Distance)?),
        _ => None,
    };
    for boundary_cfg in &region.boundaries {
        let kernel = kernel.as_ref().ok_or_else(|| {
            Error::config("certified boundaries require an alignment (cucker_smale) model")
        })?;
        let (variant, name) = match boundary_cfg {
            BoundaryConfig::Autonomous => (BoundaryVariant::Autonomous, "autonomous".to_string()),
            BoundaryConfig::Enlarged { gamma, radius } => (
                BoundaryVariant::Enlarged {
                    gamma: *gamma,
                    radius: *radius,
                },
                format!("enlarged_r{radius}"),
            ),
        };
        let boundary = theoretical_boundary(&x0_axis, kernel, model.agent_count(), &variant)?;
        output::write_file(
            &dir.join(format!("boundary_{name}.csv")),
            &output::boundary_csv(&x0_axis, &boundary),
        )?;
    }

    let levels: Vec<(f64, Vec<swarm_lab::region::Polyline>)> = region
        .contour_levels
        .iter()
        .map(|&level| (level, extract_contours(&grid, level)))
        .collect();
    output::write_file(&dir.join("contours.csv"), &output::contours_csv(&levels))?;
    Ok(())
}
