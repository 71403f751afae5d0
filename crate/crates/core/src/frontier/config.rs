use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::achievable::solve_common_radius;
use crate::codebook::{validate_frequencies, LayerUsage};
use crate::constellation::{
    check_peak_power, max_symbols_per_layer, strict_disjointness_oracle, ChannelParams,
    Constellation, Layer,
};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};

/// A real parameter that is either given or derived from the rest of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Derivable {
    Value(f64),
    Keyword(DerivedKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivedKeyword {
    Derived,
}

impl Derivable {
    pub const DERIVED: Derivable = Derivable::Keyword(DerivedKeyword::Derived);

    pub fn value(self) -> Option<f64> {
        match self {
            Derivable::Value(v) => Some(v),
            Derivable::Keyword(_) => None,
        }
    }
}

/// A layer's symbol count, or `"auto"` for the largest count the radius allows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymbolCount {
    Value(usize),
    Keyword(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

impl SymbolCount {
    pub const AUTO: SymbolCount = SymbolCount::Keyword(AutoKeyword::Auto);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    #[serde(rename = "A")]
    pub amplitude: Derivable,
    #[serde(rename = "L")]
    pub symbols: SymbolCount,
    pub r: Derivable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub n: usize,
    pub sigma2: f64,
    pub peak_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl RadiusRange {
    /// Evenly spaced grid including both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + span * i as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

pub const DEFAULT_P_STEP: f64 = 0.1;
pub const DEFAULT_EPSILONS: [f64; 8] = [1e-7, 1e-6, 1e-4, 2e-3, 1e-2, 5e-2, 0.2, 0.5];

fn default_p_step() -> f64 {
    DEFAULT_P_STEP
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Common decoding radius grid for radius sweeps.
    #[serde(default)]
    pub r: Option<RadiusRange>,
    /// Resolution of the layer-frequency grid for region sweeps.
    #[serde(default = "default_p_step")]
    pub p_step: f64,
    /// DEP targets for region sweeps.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    /// EOP values; empty means the scenario's `delta` alone.
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Snap every frequency vector to whole per-symbol counts before evaluating.
    #[serde(default)]
    pub integer_compositions: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            r: None,
            p_step: DEFAULT_P_STEP,
            epsilons: default_epsilons(),
            deltas: Vec::new(),
            integer_compositions: false,
        }
    }
}

/// One scenario: channel, constellation recipe, code frequencies and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub channel: ChannelConfig,
    pub layers: Vec<LayerSpec>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_probability(name: &str, v: f64, open_low: bool) -> Result<()> {
    let ok = if open_low {
        v > 0.0 && v < 1.0
    } else {
        (0.0..1.0).contains(&v)
    };
    if ok {
        Ok(())
    } else {
        Err(config_err(format!("{name} = {v} is out of range")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| config_err(format!("cannot parse scenario: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything that can be checked without building the constellation.
    pub fn validate(&self) -> Result<()> {
        ChannelParams::new(self.channel.n, self.channel.sigma2, self.channel.peak_power)?;
        if self.layers.is_empty() {
            return Err(config_err("at least one layer is required"));
        }
        if self.p.len() != self.layers.len() {
            return Err(config_err(format!(
                "{} layer frequencies for {} layers",
                self.p.len(),
                self.layers.len()
            )));
        }
        validate_frequencies(&self.p, &vec![1; self.p.len()])?;
        for (c, layer) in self.layers.iter().enumerate() {
            if let Some(a) = layer.amplitude.value() {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(config_err(format!(
                        "layer {} amplitude {a} must be positive",
                        c + 1
                    )));
                }
            }
            if let Some(r) = layer.r.value() {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(config_err(format!(
                        "layer {} radius {r} must be positive",
                        c + 1
                    )));
                }
            }
            if layer.symbols == SymbolCount::Value(0) {
                return Err(config_err(format!("layer {} has no symbols", c + 1)));
            }
        }
        check_probability("delta", self.delta, false)?;
        if let Some(eps) = self.epsilon {
            check_probability("epsilon", eps, true)?;
        }
        self.energy.validate()?;
        let sweep = &self.sweep;
        if let Some(range) = sweep.r {
            if range.steps == 0 || !(range.start > 0.0) || !(range.stop > 0.0) {
                return Err(config_err(format!("invalid radius range {range:?}")));
            }
        }
        if !(sweep.p_step > 0.0 && sweep.p_step <= 1.0) {
            return Err(config_err(format!(
                "p_step = {} must lie in (0, 1]",
                sweep.p_step
            )));
        }
        let steps = (1.0 / sweep.p_step).round();
        if ((1.0 / sweep.p_step) - steps).abs() > 1e-9 {
            return Err(config_err(format!(
                "p_step = {} must divide 1",
                sweep.p_step
            )));
        }
        for &eps in &sweep.epsilons {
            check_probability("sweep epsilon", eps, true)?;
        }
        for &delta in &sweep.deltas {
            check_probability("sweep delta", delta, false)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn channel_params(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.channel.n, self.channel.sigma2, self.channel.peak_power)
    }

    /// EOP values a sweep visits.
    pub fn sweep_deltas(&self) -> Vec<f64> {
        if self.sweep.deltas.is_empty() {
            vec![self.delta]
        } else {
            self.sweep.deltas.clone()
        }
    }

    /// Radii with every `"derived"` entry replaced by the common radius
    /// that meets `epsilon`.
    pub fn resolve_radii(&self) -> Result<Vec<f64>> {
        let mut common = None;
        self.layers
            .iter()
            .map(|layer| match layer.r.value() {
                Some(r) => Ok(r),
                None => {
                    if common.is_none() {
                        let eps = self
                            .epsilon
                            .ok_or_else(|| config_err("derived radii need an epsilon target"))?;
                        common = Some(solve_common_radius(
                            eps,
                            &self.p,
                            self.channel.n,
                            self.channel.sigma2,
                        )?);
                    }
                    Ok(common.unwrap())
                }
            })
            .collect()
    }

    /// Builds the constellation for the given radii: derived inner amplitudes
    /// sit at the tightest allowed spacing and `"auto"` counts take the
    /// largest value the radius permits. Rejects overlapping rings and peak
    /// power violations; within-ring overlaps are left to the caller.
    pub fn constellation_for(&self, radii: &[f64]) -> Result<Constellation> {
        if radii.len() != self.layers.len() {
            return Err(Error::InvalidParameter(format!(
                "{} radii for {} layers",
                radii.len(),
                self.layers.len()
            )));
        }
        let mut layers: Vec<Layer> = Vec::with_capacity(radii.len());
        for (c, (spec, &r)) in self.layers.iter().zip(radii).enumerate() {
            let amplitude = match (spec.amplitude.value(), layers.last()) {
                (Some(a), _) => a,
                (None, None) => self.channel.peak_power,
                (None, Some(outer)) => outer.amplitude - outer.radius - r,
            };
            if !(r < amplitude) {
                return Err(Error::GeometryInfeasible(format!(
                    "layer {} radius {r} does not fit inside amplitude {amplitude}",
                    c + 1
                )));
            }
            let symbols = match spec.symbols {
                SymbolCount::Value(l) => l,
                SymbolCount::Keyword(_) => max_symbols_per_layer(r, amplitude)?,
            };
            layers.push(Layer::new(amplitude, symbols, r)?);
        }
        let constellation = Constellation::checked(layers)?;
        if !check_peak_power(&constellation, self.channel.peak_power) {
            return Err(Error::GeometryInfeasible(format!(
                "outer amplitude {} exceeds the peak power {}",
                constellation.amplitudes()[0],
                self.channel.peak_power
            )));
        }
        Ok(constellation)
    }

    /// Like [`ScenarioConfig::constellation_for`] but also rejects any pair of
    /// overlapping decoding discs.
    pub fn strict_constellation_for(&self, radii: &[f64]) -> Result<Constellation> {
        let constellation = self.constellation_for(radii)?;
        let overlaps = strict_disjointness_oracle(&constellation);
        if let Some(first) = overlaps.first() {
            return Err(Error::GeometryInfeasible(format!(
                "{} overlapping decoding disc pairs, e.g. symbols {} and {} ({:.6} < {:.6})",
                overlaps.len(),
                first.a,
                first.b,
                first.distance,
                first.radii_sum
            )));
        }
        Ok(constellation)
    }

    /// The scenario's own constellation, radii resolved from the config.
    pub fn constellation(&self) -> Result<Constellation> {
        self.constellation_for(&self.resolve_radii()?)
    }

    pub fn usage(&self, constellation: &Constellation) -> Result<LayerUsage> {
        LayerUsage::new(self.channel.n, self.p.clone(), constellation.layer_sizes())
    }
}
