//! Achievable (rate, energy rate, DEP, EOP) tuples for the circular-region code family.

use serde::{Deserialize, Serialize};

use crate::codebook::{info_rate, validate_frequencies, LayerUsage};
use crate::constellation::{max_symbols_per_layer, Constellation};
use crate::converse::probability;
use crate::energy::{expected_energy_at_amplitude, EnergyModel};
use crate::error::{Error, Result};

/// The code parameters a tuple was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n: usize,
    pub amplitudes: Vec<f64>,
    pub layer_sizes: Vec<usize>,
    pub radii: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievableTuple {
    /// Bits per channel use.
    pub rate: f64,
    pub log2_size: f64,
    /// Energy units per channel use.
    pub energy_rate: f64,
    pub eps: f64,
    pub delta: f64,
    pub provenance: Provenance,
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )))
    }
}

/// `ln Π_c (1 - e^{-r_c²/σ²})^{n·p_c}`, the log-probability that every
/// received symbol stays inside its own decoding disc.
fn log_correct_decoding(radii: &[f64], p: &[f64], n: usize, sigma2: f64) -> f64 {
    radii
        .iter()
        .zip(p)
        .filter(|(_, &pc)| pc > 0.0)
        .map(|(&r, &pc)| n as f64 * pc * (-(-r * r / sigma2).exp()).ln_1p())
        .sum()
}

/// Smallest DEP guaranteed by the decoding radii:
/// `1 - Π_c (1 - e^{-r_c²/σ²})^{n·p_c}`.
pub fn dep_bound(radii: &[f64], p: &[f64], n: usize, sigma2: f64) -> Result<f64> {
    if radii.len() != p.len() {
        return Err(Error::InvalidParameter(format!(
            "{} radii for {} layer frequencies",
            radii.len(),
            p.len()
        )));
    }
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "decoding radii must be positive, got {radii:?}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be >= 1".into()));
    }
    check_sigma2(sigma2)?;
    let layer_sizes = vec![1; p.len()];
    validate_frequencies(p, &layer_sizes)?;
    Ok(probability(
        -log_correct_decoding(radii, p, n, sigma2).exp_m1(),
    ))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "target DEP must lie strictly between 0 and 1, got {eps}"
        )))
    }
}

/// Common decoding radius meeting the DEP target with equality:
/// `r = σ·sqrt(-ln(1 - (1-ε)^{1/n}))`. Independent of `p` because `Σ p_c = 1`.
pub fn solve_common_radius(eps: f64, p: &[f64], n: usize, sigma2: f64) -> Result<f64> {
    check_eps(eps)?;
    check_sigma2(sigma2)?;
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be >= 1".into()));
    }
    validate_frequencies(p, &vec![1; p.len()])?;
    // per-symbol miss probability q with (1 - q)^n = 1 - eps
    let miss = -((-eps).ln_1p() / n as f64).exp_m1();
    let radius = (sigma2 * -miss.ln()).sqrt();
    let check = dep_bound(&vec![radius; p.len()], p, n, sigma2)?;
    if (check - eps).abs() > 1e-9 * eps.max(1e-3) {
        return Err(Error::Numeric(format!(
            "common radius {radius} reproduces DEP {check} instead of {eps}"
        )));
    }
    Ok(radius)
}

/// Radii `r_c = α·w_c` meeting the DEP target, with `α` found by bisection.
pub fn solve_radius_vector(
    eps: f64,
    weights: &[f64],
    p: &[f64],
    n: usize,
    sigma2: f64,
) -> Result<Vec<f64>> {
    check_eps(eps)?;
    if weights.len() != p.len() || weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "radius weights must be positive, one per layer, got {weights:?}"
        )));
    }
    let at = |alpha: f64| -> Result<f64> {
        let radii: Vec<f64> = weights.iter().map(|&w| alpha * w).collect();
        dep_bound(&radii, p, n, sigma2)
    };
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while at(lo)? < eps {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Numeric(
                "radius bracket collapsed toward zero".into(),
            ));
        }
    }
    while at(hi)? > eps {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numeric("radius bracket diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok(weights.iter().map(|&w| alpha * w).collect())
}

/// Energy-rate bound `(1/(1-δ))·Σ_c p_c·E_W[g(A_c + W)]`.
pub fn energy_rate_bound(
    p: &[f64],
    amplitudes: &[f64],
    delta: f64,
    model: &EnergyModel,
    sigma2: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "EOP must lie in [0, 1), got {delta}"
        )));
    }
    if p.len() != amplitudes.len() {
        return Err(Error::InvalidParameter(format!(
            "{} layer frequencies for {} amplitudes",
            p.len(),
            amplitudes.len()
        )));
    }
    validate_frequencies(p, &vec![1; p.len()])?;
    let mut mean = 0.0;
    for (&pc, &amplitude) in p.iter().zip(amplitudes) {
        if pc > 0.0 {
            mean += pc * expected_energy_at_amplitude(model, amplitude, sigma2)?;
        }
    }
    Ok(mean / (1.0 - delta))
}

/// Checks every layer's symbol count against the largest count its radius permits.
pub fn check_symbol_counts(constellation: &Constellation) -> Result<()> {
    let mut limits = Vec::with_capacity(constellation.layers().len());
    let mut violated = false;
    for layer in constellation.layers() {
        let limit = max_symbols_per_layer(layer.radius, layer.amplitude)?;
        violated |= layer.symbols > limit;
        limits.push(limit);
    }
    if violated {
        return Err(Error::GeometryInfeasible(format!(
            "layer symbol counts {:?} exceed the maxima {:?} allowed by the decoding radii",
            constellation.layer_sizes(),
            limits
        )));
    }
    Ok(())
}

/// Full achievable tuple for one code of the family.
///
/// Decoding radii are taken from the constellation's layers. `usage` may
/// carry fractional per-symbol counts; the rate then follows the
/// log-gamma continuation of the codebook size.
pub fn achievable_tuple(
    constellation: &Constellation,
    usage: &LayerUsage,
    delta: f64,
    model: &EnergyModel,
    sigma2: f64,
) -> Result<AchievableTuple> {
    if constellation.layer_sizes() != usage.layer_sizes {
        return Err(Error::InvalidParameter(format!(
            "usage layer sizes {:?} do not match the constellation {:?}",
            usage.layer_sizes,
            constellation.layer_sizes()
        )));
    }
    check_symbol_counts(constellation)?;
    let radii = constellation.radii();
    let amplitudes = constellation.amplitudes();
    let log2_size = usage.log2_size();
    Ok(AchievableTuple {
        rate: info_rate(log2_size, usage.n),
        log2_size,
        energy_rate: energy_rate_bound(&usage.p, &amplitudes, delta, model, sigma2)?,
        eps: dep_bound(&radii, &usage.p, usage.n, sigma2)?,
        delta,
        provenance: Provenance {
            n: usage.n,
            amplitudes,
            layer_sizes: usage.layer_sizes.clone(),
            radii,
            p: usage.p.clone(),
        },
    })
}
