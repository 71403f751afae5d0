//! Converse bounds for homogeneous codes over a layered constellation:
//! codebook size, energy rate, and a pairwise-confusion lower bound on DEP.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::achievable::energy_rate_bound;
use crate::codebook::{codebook_size, info_rate, CodebookSize, Composition, LayerUsage};
use crate::constellation::{Constellation, SymbolId};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};

/// Gaussian tail probability `Q(x) = P[N(0,1) > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Per-symbol code type `P_C(x) = p_c / L_c` in flat symbol order.
pub fn symbol_probabilities(usage: &LayerUsage) -> Vec<f64> {
    usage
        .p
        .iter()
        .zip(&usage.layer_sizes)
        .flat_map(|(&p, &l)| std::iter::repeat_n(p / l as f64, l))
        .collect()
}

/// Pairwise confusion tail `Q(d/√(2σ²) - σ/(√2·d)·ln(P(x')/P(x)))`.
///
/// A partner that never appears (`P(x') = 0`) cannot be confused with `x`,
/// which makes the tail exactly 0.
pub fn pairwise_tail(distance: f64, p_self: f64, p_other: f64, sigma2: f64) -> f64 {
    if p_other <= 0.0 {
        return 0.0;
    }
    let sigma = sigma2.sqrt();
    let tilt = sigma / (SQRT_2 * distance) * (p_other / p_self).ln();
    q_function(distance / (2.0 * sigma2).sqrt() - tilt)
}

/// Pairwise term `1 - Q(·)`, see [`pairwise_tail`].
pub fn pairwise_term(distance: f64, p_self: f64, p_other: f64, sigma2: f64) -> f64 {
    1.0 - pairwise_tail(distance, p_self, p_other, sigma2)
}

/// Most and least confusable partners of one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusable {
    pub symbol: SymbolId,
    /// Partner minimizing the pairwise term; this one enters the DEP bound.
    pub partner: SymbolId,
    pub distance: f64,
    pub term: f64,
    /// `1 - term`, kept separately so tiny tails survive.
    pub tail: f64,
    /// Partner maximizing the pairwise term, kept for diagnostics.
    pub argmax_partner: SymbolId,
    pub argmax_term: f64,
}

const TIE_TOL: f64 = 1e-12;

/// Clamps to `[0, 1]`, mapping `-0.0` to `0.0`.
pub(crate) fn probability(x: f64) -> f64 {
    if x > 0.0 {
        x.min(1.0)
    } else {
        0.0
    }
}

/// Searches `points \ {points[index]}` for the partner minimizing the
/// pairwise term. Ties go to the nearer partner, then to the lower id.
pub fn most_confusable(
    points: &[Complex64],
    probabilities: &[f64],
    index: usize,
    sigma2: f64,
) -> Result<Confusable> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "confusable-symbol search needs at least two symbols".into(),
        ));
    }
    if probabilities.len() != points.len() || index >= points.len() {
        return Err(Error::InvalidParameter(format!(
            "symbol {index} with {} probabilities over {} points",
            probabilities.len(),
            points.len()
        )));
    }
    let x = points[index];
    let p_self = probabilities[index];
    // the minimal term is the maximal tail
    let mut best: Option<(SymbolId, f64, f64)> = None;
    let mut worst: Option<(SymbolId, f64)> = None;
    for (j, (&other, &p_other)) in points.iter().zip(probabilities).enumerate() {
        if j == index {
            continue;
        }
        let distance = (x - other).norm();
        let tail = pairwise_tail(distance, p_self, p_other, sigma2);
        let better = match best {
            None => true,
            Some((_, d, t)) => {
                let tol = TIE_TOL * t.max(f64::MIN_POSITIVE);
                tail > t + tol || (tail >= t - tol && distance < d * (1.0 - TIE_TOL))
            }
        };
        if better {
            best = Some((j, distance, tail));
        }
        if worst.is_none_or(|(_, t)| tail < t - TIE_TOL * t) {
            worst = Some((j, tail));
        }
    }
    let (partner, distance, tail) = best.expect("at least one partner");
    let (argmax_partner, argmax_tail) = worst.expect("at least one partner");
    Ok(Confusable {
        symbol: index,
        partner,
        distance,
        term: 1.0 - tail,
        tail,
        argmax_partner,
        argmax_term: 1.0 - argmax_tail,
    })
}

/// Most confusable partner of `symbol` under the code type `probabilities`.
pub fn confusable_symbol(
    constellation: &Constellation,
    probabilities: &[f64],
    symbol: SymbolId,
    sigma2: f64,
) -> Result<Confusable> {
    most_confusable(constellation.symbols(), probabilities, symbol, sigma2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseDep {
    pub eps_min: f64,
    /// One entry per symbol with positive frequency.
    pub confusable_map: Vec<Confusable>,
}

/// DEP lower bound `1 - Π_x (1 - Q(·))^{n·P_C(x)}` over symbols with positive frequency.
pub fn converse_dep(
    constellation: &Constellation,
    usage: &LayerUsage,
    sigma2: f64,
) -> Result<ConverseDep> {
    if constellation.layer_sizes() != usage.layer_sizes {
        return Err(Error::InvalidParameter(format!(
            "usage layer sizes {:?} do not match the constellation {:?}",
            usage.layer_sizes,
            constellation.layer_sizes()
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let probabilities = symbol_probabilities(usage);
    if constellation.len() < 2 {
        // a lone symbol carries a single message and is never confused
        return Ok(ConverseDep {
            eps_min: 0.0,
            confusable_map: Vec::new(),
        });
    }
    let mut log_success = 0.0;
    let mut confusable_map = Vec::new();
    for (symbol, &prob) in probabilities.iter().enumerate() {
        if prob <= 0.0 {
            continue;
        }
        let entry = confusable_symbol(constellation, &probabilities, symbol, sigma2)?;
        log_success += usage.n as f64 * prob * (-entry.tail).ln_1p();
        confusable_map.push(entry);
    }
    Ok(ConverseDep {
        eps_min: probability(-log_success.exp_m1()),
        confusable_map,
    })
}

/// Largest codebook size of a homogeneous code with this composition.
/// Same value as [`codebook_size`].
pub fn converse_codebook_size(composition: &Composition) -> CodebookSize {
    codebook_size(composition)
}

/// Energy-rate upper bound. The expression coincides with the achievable one.
pub fn converse_energy_rate(
    p: &[f64],
    amplitudes: &[f64],
    delta: f64,
    model: &EnergyModel,
    sigma2: f64,
) -> Result<f64> {
    energy_rate_bound(p, amplitudes, delta, model, sigma2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverseTuple {
    pub log2_size: f64,
    pub rate: f64,
    pub energy_rate: f64,
    pub eps_min: f64,
    pub delta: f64,
    pub confusable_map: Vec<Confusable>,
}

pub fn converse_tuple(
    constellation: &Constellation,
    usage: &LayerUsage,
    delta: f64,
    model: &EnergyModel,
    sigma2: f64,
) -> Result<ConverseTuple> {
    let dep = converse_dep(constellation, usage, sigma2)?;
    let log2_size = usage.log2_size();
    Ok(ConverseTuple {
        log2_size,
        rate: info_rate(log2_size, usage.n),
        energy_rate: converse_energy_rate(
            &usage.p,
            &constellation.amplitudes(),
            delta,
            model,
            sigma2,
        )?,
        eps_min: dep.eps_min,
        delta,
        confusable_map: dep.confusable_map,
    })
}
