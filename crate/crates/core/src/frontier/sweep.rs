use serde::{Deserialize, Serialize};

use crate::achievable::{achievable_tuple, solve_common_radius};
use crate::codebook::{round_composition, LayerUsage};
use crate::constellation::Constellation;
use crate::converse::converse_tuple;
use crate::error::{Error, Result};
use crate::exec::map_ordered;

use super::config::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVar {
    Radius,
    Region,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::Radius => "radius",
            SweepVar::Region => "region",
        }
    }
}

/// One evaluated code: achievable and converse values side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub sweep_var: SweepVar,
    /// Common decoding radius.
    pub r: f64,
    pub p: Vec<f64>,
    pub n: usize,
    pub sigma2: f64,
    pub delta: f64,
    /// Bits per channel use.
    pub rate: f64,
    pub b_ach: f64,
    pub b_conv: f64,
    pub eps_ach: f64,
    pub eps_conv: f64,
    /// Base-2 logarithm of the codebook size.
    pub log2_size: f64,
    pub config_digest: String,
}

/// A sweep step that produced no point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedStep {
    pub r: f64,
    pub epsilon: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub reason: String,
}

/// The constellation used at one sweep step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGeometry {
    pub r: f64,
    pub epsilon: Option<f64>,
    pub constellation: Constellation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<RegionPoint>,
    pub geometries: Vec<StepGeometry>,
    pub skipped: Vec<SkippedStep>,
    pub config_digest: String,
}

/// Achievable and converse tuples of one code, flattened into a point.
pub fn evaluate_point(
    config: &ScenarioConfig,
    sweep_var: SweepVar,
    r: f64,
    constellation: &Constellation,
    usage: &LayerUsage,
    delta: f64,
    digest: &str,
) -> Result<RegionPoint> {
    let sigma2 = config.channel.sigma2;
    let ach = achievable_tuple(constellation, usage, delta, &config.energy, sigma2)?;
    let conv = converse_tuple(constellation, usage, delta, &config.energy, sigma2)?;
    Ok(RegionPoint {
        sweep_var,
        r,
        p: usage.p.clone(),
        n: usage.n,
        sigma2,
        delta,
        rate: ach.rate,
        b_ach: ach.energy_rate,
        b_conv: conv.energy_rate,
        eps_ach: ach.eps,
        eps_conv: conv.eps_min,
        log2_size: ach.log2_size,
        config_digest: digest.to_string(),
    })
}

fn sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Geometry for a common radius, or the reason it cannot be used.
fn step_geometry(
    config: &ScenarioConfig,
    r: f64,
) -> Result<std::result::Result<Constellation, String>> {
    match config.strict_constellation_for(&vec![r; config.layers.len()]) {
        Ok(c) => Ok(Ok(c)),
        Err(e) if e.is_infeasible() => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Usage for a target frequency vector, snapped to whole counts if the
/// scenario asks for it.
fn step_usage(
    config: &ScenarioConfig,
    p: &[f64],
    constellation: &Constellation,
) -> Result<std::result::Result<LayerUsage, String>> {
    let sizes = constellation.layer_sizes();
    if config.sweep.integer_compositions {
        return match round_composition(config.channel.n, p, &sizes) {
            Ok(comp) => Ok(Ok(comp.usage())),
            Err(e) if e.is_infeasible() => Ok(Err(e.to_string())),
            Err(e) => Err(e),
        };
    }
    Ok(Ok(LayerUsage::new(config.channel.n, p.to_vec(), sizes)?))
}

struct Job<'a> {
    r: f64,
    constellation: &'a Constellation,
    usage: LayerUsage,
    delta: f64,
}

fn run_jobs(
    config: &ScenarioConfig,
    var: SweepVar,
    jobs: Vec<Job<'_>>,
    digest: &str,
) -> Result<Vec<RegionPoint>> {
    map_ordered(jobs, None, |job| {
        evaluate_point(
            config,
            var,
            job.r,
            job.constellation,
            &job.usage,
            job.delta,
            digest,
        )
    })?
    .into_iter()
    .collect()
}

/// Sweep over a common radius: one radius per step, inner amplitudes and
/// symbol counts re-derived at every step. Points are ordered by `r`, then `δ`.
pub fn sweep_radius(config: &ScenarioConfig) -> Result<SweepResult> {
    let range = config
        .sweep
        .r
        .ok_or_else(|| Error::Config("radius sweep needs sweep.r".into()))?;
    let digest = config.digest();
    let deltas = sorted(config.sweep_deltas());
    let mut geometries = Vec::new();
    let mut skipped = Vec::new();
    for r in sorted(range.values()) {
        match step_geometry(config, r)? {
            Ok(constellation) => geometries.push(StepGeometry {
                r,
                epsilon: None,
                constellation,
            }),
            Err(reason) => skipped.push(SkippedStep {
                r,
                epsilon: None,
                p: None,
                reason,
            }),
        }
    }
    let mut jobs = Vec::new();
    for step in &geometries {
        match step_usage(config, &config.p, &step.constellation)? {
            Ok(usage) => {
                for &delta in &deltas {
                    jobs.push(Job {
                        r: step.r,
                        constellation: &step.constellation,
                        usage: usage.clone(),
                        delta,
                    });
                }
            }
            Err(reason) => skipped.push(SkippedStep {
                r: step.r,
                epsilon: None,
                p: Some(config.p.clone()),
                reason,
            }),
        }
    }
    let points = run_jobs(config, SweepVar::Radius, jobs, &digest)?;
    Ok(SweepResult {
        points,
        geometries,
        skipped,
        config_digest: digest,
    })
}

/// All points of the simplex in `layers` dimensions whose coordinates are
/// multiples of `step`, largest first coordinate first.
pub fn simplex_grid(layers: usize, step: f64) -> Vec<Vec<f64>> {
    let m = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    let mut current = vec![0usize; layers];
    fn fill(c: usize, left: usize, m: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if c + 1 == current.len() {
            current[c] = left;
            out.push(current.iter().map(|&k| k as f64 / m as f64).collect());
            return;
        }
        for k in (0..=left).rev() {
            current[c] = k;
            fill(c + 1, left - k, m, current, out);
        }
    }
    if layers > 0 {
        fill(0, m, m, &mut current, &mut out);
    }
    out
}

/// Frequencies that use every symbol of the constellation equally often.
pub fn uniform_over_symbols(constellation: &Constellation) -> Vec<f64> {
    let total = constellation.len() as f64;
    constellation
        .layer_sizes()
        .iter()
        .map(|&l| l as f64 / total)
        .collect()
}

fn single_layer_code(layers: usize) -> Vec<f64> {
    let mut p = vec![0.0; layers];
    p[0] = 1.0;
    p
}

fn same_p(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Sweep over DEP targets and frequency vectors with a common
/// radius solved from each target. Each geometry evaluates the frequency
/// grid, the outer-layer-only code and the uniform-over-symbols code.
pub fn sweep_region(config: &ScenarioConfig) -> Result<SweepResult> {
    let digest = config.digest();
    let layers = config.layers.len();
    let deltas = sorted(config.sweep_deltas());
    let mut geometries = Vec::new();
    let mut skipped = Vec::new();
    for eps in sorted(config.sweep.epsilons.clone()) {
        let r = solve_common_radius(eps, &config.p, config.channel.n, config.channel.sigma2)?;
        match step_geometry(config, r)? {
            Ok(constellation) => geometries.push(StepGeometry {
                r,
                epsilon: Some(eps),
                constellation,
            }),
            Err(reason) => skipped.push(SkippedStep {
                r,
                epsilon: Some(eps),
                p: None,
                reason,
            }),
        }
    }
    let grid = simplex_grid(layers, config.sweep.p_step);
    let mut jobs = Vec::new();
    for step in &geometries {
        let mut ps = grid.clone();
        for extra in [
            single_layer_code(layers),
            uniform_over_symbols(&step.constellation),
        ] {
            if !ps.iter().any(|p| same_p(p, &extra)) {
                ps.push(extra);
            }
        }
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for p in ps {
            match step_usage(config, &p, &step.constellation)? {
                Ok(usage) => {
                    if seen.iter().any(|q| same_p(q, &usage.p)) {
                        continue;
                    }
                    seen.push(usage.p.clone());
                    for &delta in &deltas {
                        jobs.push(Job {
                            r: step.r,
                            constellation: &step.constellation,
                            usage: usage.clone(),
                            delta,
                        });
                    }
                }
                Err(reason) => skipped.push(SkippedStep {
                    r: step.r,
                    epsilon: step.epsilon,
                    p: Some(p),
                    reason,
                }),
            }
        }
    }
    let points = run_jobs(config, SweepVar::Region, jobs, &digest)?;
    Ok(SweepResult {
        points,
        geometries,
        skipped,
        config_digest: digest,
    })
}
