//! Multi-layer circular constellations.
//!
//! Layer `c` carries `L_c` symbols equally spaced on a circle of amplitude
//! `A_c`, starting on the positive real axis. Each symbol owns a closed
//! decoding disc of radius `r_c`. Layers are stored outermost first.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack under which two geometric quantities are considered equal.
/// Inner amplitudes are derived by subtraction, so tangent discs come out a
/// few ulps apart.
pub const GEOMETRY_TOL: f64 = 1e-9;

/// Flat index of a symbol in a [`Constellation`]: layer 1 symbols first, by phase.
pub type SymbolId = usize;

/// One ring of the constellation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub amplitude: f64,
    pub symbols: usize,
    pub radius: f64,
}

impl Layer {
    pub fn new(amplitude: f64, symbols: usize, radius: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "layer amplitude must be positive, got {amplitude}"
            )));
        }
        if symbols == 0 {
            return Err(Error::InvalidParameter(
                "layer must carry at least one symbol".into(),
            ));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "decoding radius must be positive, got {radius}"
            )));
        }
        if radius >= amplitude {
            return Err(Error::GeometryInfeasible(format!(
                "decoding radius {radius} must be smaller than the layer amplitude {amplitude}"
            )));
        }
        Ok(Layer {
            amplitude,
            symbols,
            radius,
        })
    }

    /// Layer holding as many symbols as the radius allows, see [`max_symbols_per_layer`].
    pub fn with_max_symbols(amplitude: f64, radius: f64) -> Result<Self> {
        let symbols = max_symbols_per_layer(radius, amplitude)?;
        Layer::new(amplitude, symbols, radius)
    }
}

/// Symbols `A·exp(i·2πℓ/L)` for `ℓ = 0..L`.
pub fn build_layer(amplitude: f64, symbols: usize) -> Result<Vec<Complex64>> {
    if !(amplitude > 0.0 && amplitude.is_finite()) || symbols == 0 {
        return Err(Error::InvalidParameter(format!(
            "layer needs a positive amplitude and symbol count, got A={amplitude}, L={symbols}"
        )));
    }
    let step = 2.0 * PI / symbols as f64;
    Ok((0..symbols)
        .map(|l| Complex64::from_polar(amplitude, step * l as f64))
        .collect())
}

/// Largest symbol count a layer of amplitude `amplitude` can carry with
/// decoding radius `radius`: `⌊π / (2·arcsin(r / 2A))⌋`.
///
/// Quotients within [`GEOMETRY_TOL`] of an integer snap to it, so that
/// `(r, A) = (2, 2)` yields exactly 3.
pub fn max_symbols_per_layer(radius: f64, amplitude: f64) -> Result<usize> {
    if !(radius > 0.0 && amplitude > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius and amplitude must be positive, got r={radius}, A={amplitude}"
        )));
    }
    let ratio = radius / (2.0 * amplitude);
    if ratio >= 1.0 {
        return Err(Error::GeometryInfeasible(format!(
            "radius {radius} is at least twice the amplitude {amplitude}"
        )));
    }
    let quotient = PI / (2.0 * ratio.asin());
    Ok(snap_floor(quotient) as usize)
}

pub(crate) fn snap_floor(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= GEOMETRY_TOL * x.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    }
}

/// Peak, noise and block-length parameters of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub n: usize,
    pub sigma2: f64,
    pub peak_power: f64,
}

impl ChannelParams {
    pub fn new(n: usize, sigma2: f64, peak_power: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length must be >= 1".into()));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        if !(peak_power > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "peak power must be positive, got {peak_power}"
            )));
        }
        Ok(ChannelParams {
            n,
            sigma2,
            peak_power,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    layers: Vec<Layer>,
    symbols: Vec<Complex64>,
    /// `offsets[c]` is the flat id of the first symbol of layer `c`.
    offsets: Vec<usize>,
}

impl Constellation {
    /// Builds the symbol set. Amplitudes must be strictly decreasing; the
    /// separation between layers is not enforced here, see [`Constellation::checked`].
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[1].amplitude >= pair[0].amplitude {
                return Err(Error::InvalidParameter(format!(
                    "layer amplitudes must be strictly decreasing, got {} then {}",
                    pair[0].amplitude, pair[1].amplitude
                )));
            }
        }
        let mut symbols = Vec::new();
        let mut offsets = Vec::with_capacity(layers.len());
        for layer in &layers {
            let layer = Layer::new(layer.amplitude, layer.symbols, layer.radius)?;
            offsets.push(symbols.len());
            symbols.extend(build_layer(layer.amplitude, layer.symbols)?);
        }
        Ok(Constellation {
            layers,
            symbols,
            offsets,
        })
    }

    /// Like [`Constellation::new`] but also rejects overlapping rings.
    pub fn checked(layers: Vec<Layer>) -> Result<Self> {
        let constellation = Constellation::new(layers)?;
        let report = check_layer_separation(&constellation);
        if !report.ok {
            let worst = report
                .pairs
                .iter()
                .map(|p| p.slack)
                .fold(f64::INFINITY, f64::min);
            return Err(Error::GeometryInfeasible(format!(
                "adjacent layers overlap (worst slack {worst})"
            )));
        }
        Ok(constellation)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.symbols).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.amplitude).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.radius).collect()
    }

    pub fn layer_offset(&self, layer: usize) -> usize {
        self.offsets[layer]
    }

    /// Layer index of a flat symbol id.
    pub fn layer_of(&self, id: SymbolId) -> usize {
        match self.offsets.binary_search(&id) {
            Ok(c) => c,
            Err(c) => c - 1,
        }
    }

    /// Returns the same geometry with every layer's decoding radius replaced.
    pub fn with_radii(&self, radii: &[f64]) -> Result<Self> {
        if radii.len() != self.layers.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} radii, got {}",
                self.layers.len(),
                radii.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .zip(radii)
            .map(|(l, &r)| Layer::new(l.amplitude, l.symbols, r))
            .collect::<Result<Vec<_>>>()?;
        Constellation::new(layers)
    }
}

/// Slack of one adjacent-layer pair: `A_{c-1} - A_c - (r_{c-1} + r_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationMargin {
    pub outer: usize,
    pub inner: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub ok: bool,
    pub pairs: Vec<SeparationMargin>,
}

/// Checks `A_{c-1} - A_c >= r_{c-1} + r_c` for every adjacent pair of layers.
pub fn check_layer_separation(constellation: &Constellation) -> SeparationReport {
    let pairs: Vec<SeparationMargin> = constellation
        .layers
        .windows(2)
        .enumerate()
        .map(|(c, w)| SeparationMargin {
            outer: c,
            inner: c + 1,
            slack: (w[0].amplitude - w[1].amplitude) - (w[0].radius + w[1].radius),
        })
        .collect();
    let ok = pairs
        .iter()
        .zip(constellation.layers.windows(2))
        .all(|(m, w)| m.slack >= -GEOMETRY_TOL * w[0].amplitude);
    SeparationReport { ok, pairs }
}

/// True iff every symbol magnitude is at most `peak_power`.
pub fn check_peak_power(constellation: &Constellation, peak_power: f64) -> bool {
    constellation
        .layers
        .first()
        .is_none_or(|outer| outer.amplitude <= peak_power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlap {
    pub a: SymbolId,
    pub b: SymbolId,
    pub distance: f64,
    pub radii_sum: f64,
}

/// Lists every pair of distinct symbols whose decoding discs overlap.
/// Tangent discs are not reported.
pub fn strict_disjointness_oracle(constellation: &Constellation) -> Vec<Overlap> {
    let radii: Vec<f64> = (0..constellation.len())
        .map(|id| constellation.layers[constellation.layer_of(id)].radius)
        .collect();
    let symbols = &constellation.symbols;
    let mut overlaps = Vec::new();
    for a in 0..symbols.len() {
        for b in a + 1..symbols.len() {
            let distance = (symbols[a] - symbols[b]).norm();
            let radii_sum = radii[a] + radii[b];
            if distance < radii_sum * (1.0 - GEOMETRY_TOL) {
                overlaps.push(Overlap {
                    a,
                    b,
                    distance,
                    radii_sum,
                });
            }
        }
    }
    overlaps
}
