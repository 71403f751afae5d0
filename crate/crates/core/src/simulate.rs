//! Monte Carlo estimation of DEP and EOP for codes of the family.
//!
//! Every random draw is a pure function of `(seed, stream, index)`: trial `t`
//! reads its information-receiver noise from stream `4t`, its harvester noise
//! from stream `4t + 1` and, when codewords are drawn at random, its message
//! index from stream `4t + 2`. Trials are processed in fixed chunks and the
//! chunk results are reduced in order, so the worker count never changes the
//! output.

use std::f64::consts::TAU;
use std::ops::Range;

use num_bigint::{BigUint, RandBigInt};
use num_complex::Complex64;
use num_traits::One;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codebook::{codebook_size, unrank_codeword, Composition};
use crate::constellation::{
    check_layer_separation, strict_disjointness_oracle, Constellation, SymbolId,
};
use crate::energy::{eval_energy, EnergyModel};
use crate::error::{Error, Result};
use crate::exec::map_ordered;

/// Trials per work unit. Fixed so results do not depend on scheduling.
pub const CHUNK_TRIALS: u64 = 4096;

const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

const CHANNEL_INFO: u64 = 0;
const CHANNEL_ENERGY: u64 = 1;
const CHANNEL_CODEWORD: u64 = 2;

fn stream_id(trial: u64, channel: u64) -> u64 {
    (trial << 2) | channel
}

fn key_for(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn rng_at(key: [u8; 32], stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// One circularly symmetric draw with `E|N|² = sigma2`, consuming two 64-bit words.
fn draw(rng: &mut ChaCha8Rng, sigma2: f64) -> Complex64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * UNIT;
    let u2 = (rng.next_u64() >> 11) as f64 * UNIT;
    Complex64::from_polar((-sigma2 * u1.ln()).sqrt(), TAU * u2)
}

/// Reproducible source of complex AWGN samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSampler {
    pub sigma2: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseSampler {
    pub fn new(sigma2: f64, seed: u64, stream_id: u64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be finite and nonnegative, got {sigma2}"
            )));
        }
        Ok(NoiseSampler {
            sigma2,
            seed,
            stream_id,
        })
    }

    /// Draw number `index` of this stream.
    pub fn sample(&self, index: u64) -> Complex64 {
        let mut rng = rng_at(key_for(self.seed), self.stream_id);
        rng.set_word_pos(4 * index as u128);
        draw(&mut rng, self.sigma2)
    }

    /// Endless iterator over draws `0, 1, 2, ...`.
    pub fn iter(&self) -> impl Iterator<Item = Complex64> {
        let mut rng = rng_at(key_for(self.seed), self.stream_id);
        let sigma2 = self.sigma2;
        std::iter::repeat_with(move || draw(&mut rng, sigma2))
    }
}

/// The first `count` draws of the sampler's stream.
pub fn sample_noise(sampler: &NoiseSampler, count: usize) -> Result<Vec<Complex64>> {
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    Ok(sampler.iter().take(count).collect())
}

#[derive(Debug, Clone, Copy)]
struct DecodingRing {
    amplitude: f64,
    symbols: usize,
    radius2: f64,
    offset: usize,
}

/// Per-symbol circular-region detector.
#[derive(Debug, Clone)]
pub struct Decoder {
    rings: Vec<DecodingRing>,
}

impl Decoder {
    /// Refuses constellations whose decoding discs overlap.
    pub fn new(constellation: &Constellation) -> Result<Self> {
        if !check_layer_separation(constellation).ok {
            return Err(Error::GeometryInfeasible(
                "adjacent layers violate the separation condition; decoding regions overlap".into(),
            ));
        }
        let overlaps = strict_disjointness_oracle(constellation);
        if let Some(first) = overlaps.first() {
            return Err(Error::GeometryInfeasible(format!(
                "{} pairs of decoding discs overlap, e.g. symbols {} and {} at distance {} < {}",
                overlaps.len(),
                first.a,
                first.b,
                first.distance,
                first.radii_sum
            )));
        }
        let rings = constellation
            .layers()
            .iter()
            .enumerate()
            .map(|(c, layer)| DecodingRing {
                amplitude: layer.amplitude,
                symbols: layer.symbols,
                radius2: layer.radius * layer.radius,
                offset: constellation.layer_offset(c),
            })
            .collect();
        Ok(Decoder { rings })
    }

    /// The symbol whose closed decoding disc contains `y`, or `None` for an erasure.
    pub fn decode(&self, y: Complex64) -> Option<SymbolId> {
        let angle = y.im.atan2(y.re).rem_euclid(TAU);
        for ring in &self.rings {
            let step = TAU / ring.symbols as f64;
            let l = ((angle / step).round() as usize) % ring.symbols;
            let center = Complex64::from_polar(ring.amplitude, step * l as f64);
            if (y - center).norm_sqr() <= ring.radius2 {
                return Some(ring.offset + l);
            }
        }
        None
    }
}

/// Convenience wrapper building a [`Decoder`] for a single observation.
pub fn decode_symbol(y: Complex64, constellation: &Constellation) -> Result<Option<SymbolId>> {
    Ok(Decoder::new(constellation)?.decode(y))
}

/// A Bernoulli proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let value = hits as f64 / trials as f64;
        Estimate {
            value,
            standard_error: (value * (1.0 - value) / trials as f64).sqrt(),
            trials,
        }
    }

    /// Normal-approximation interval `value ± z·se`.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (
            self.value - z * self.standard_error,
            self.value + z * self.standard_error,
        )
    }
}

/// Which codeword each trial transmits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum CodewordChoice {
    /// The lexicographically first codeword.
    #[default]
    Canonical,
    /// A fresh uniform message index per trial.
    Random,
    /// A fixed message index (1-based).
    Index(BigUint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOptions {
    pub trials: u64,
    pub seed: u64,
    /// `None` uses all available cores.
    pub workers: Option<usize>,
    pub codeword: CodewordChoice,
}

impl SimOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimOptions {
            trials,
            seed,
            workers: None,
            codeword: CodewordChoice::Canonical,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers);
        self
    }

    pub fn codeword(mut self, codeword: CodewordChoice) -> Self {
        self.codeword = codeword;
        self
    }
}

fn run_chunks<T, F>(trials: u64, workers: Option<usize>, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    map_ordered(chunk_ranges(trials), workers, work)
}

fn chunk_ranges(trials: u64) -> Vec<Range<u64>> {
    (0..trials.div_ceil(CHUNK_TRIALS))
        .map(|i| i * CHUNK_TRIALS..((i + 1) * CHUNK_TRIALS).min(trials))
        .collect()
}

fn check_run(sigma2: f64, opts: &SimOptions) -> Result<()> {
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be finite and nonnegative, got {sigma2}"
        )));
    }
    Ok(())
}

/// Everything a trial needs, resolved once per run.
struct TrialSetup<'a> {
    composition: Option<&'a Composition>,
    symbols: &'a [Complex64],
    key: [u8; 32],
    sigma2: f64,
    fixed: Option<Vec<SymbolId>>,
    size: Option<BigUint>,
}

impl<'a> TrialSetup<'a> {
    fn new(
        constellation: &'a Constellation,
        composition: &'a Composition,
        sigma2: f64,
        opts: &SimOptions,
    ) -> Result<Self> {
        check_run(sigma2, opts)?;
        if constellation.layer_sizes() != composition.layer_sizes() {
            return Err(Error::InvalidParameter(format!(
                "composition layer sizes {:?} do not match the constellation {:?}",
                composition.layer_sizes(),
                constellation.layer_sizes()
            )));
        }
        let (fixed, size) = match &opts.codeword {
            CodewordChoice::Canonical => (Some(composition.canonical_codeword()), None),
            CodewordChoice::Index(index) => (Some(unrank_codeword(index, composition)?), None),
            CodewordChoice::Random => {
                let size = codebook_size(composition).exact.ok_or_else(|| {
                    Error::InvalidParameter(
                        "random codewords need an exactly representable codebook size".into(),
                    )
                })?;
                (None, Some(size))
            }
        };
        Ok(TrialSetup {
            composition: Some(composition),
            symbols: constellation.symbols(),
            key: key_for(opts.seed),
            sigma2,
            fixed,
            size,
        })
    }

    fn for_word(
        constellation: &'a Constellation,
        word: &[SymbolId],
        sigma2: f64,
        opts: &SimOptions,
    ) -> Result<Self> {
        check_run(sigma2, opts)?;
        if word.is_empty() {
            return Err(Error::InvalidParameter("empty codeword".into()));
        }
        if let Some(&s) = word.iter().find(|&&s| s >= constellation.len()) {
            return Err(Error::UnknownSymbol(s));
        }
        Ok(TrialSetup {
            composition: None,
            symbols: constellation.symbols(),
            key: key_for(opts.seed),
            sigma2,
            fixed: Some(word.to_vec()),
            size: None,
        })
    }

    fn codeword(&self, trial: u64) -> Vec<SymbolId> {
        match (&self.fixed, &self.size) {
            (Some(word), _) => word.clone(),
            (None, Some(size)) => {
                let mut rng = rng_at(self.key, stream_id(trial, CHANNEL_CODEWORD));
                let index = rng.gen_biguint_below(size) + BigUint::one();
                let composition = self.composition.expect("random mode has a composition");
                unrank_codeword(&index, composition).expect("index drawn inside the codebook")
            }
            (None, None) => unreachable!("trial setup without a codeword source"),
        }
    }

    fn decoded_correctly(&self, decoder: &Decoder, word: &[SymbolId], trial: u64) -> bool {
        let mut rng = rng_at(self.key, stream_id(trial, CHANNEL_INFO));
        word.iter().all(|&s| {
            let y = self.symbols[s] + draw(&mut rng, self.sigma2);
            decoder.decode(y) == Some(s)
        })
    }

    fn block_energy(&self, model: &EnergyModel, word: &[SymbolId], trial: u64) -> f64 {
        let mut rng = rng_at(self.key, stream_id(trial, CHANNEL_ENERGY));
        let total: f64 = word
            .iter()
            .map(|&s| eval_energy(model, self.symbols[s] + draw(&mut rng, self.sigma2)))
            .sum();
        total / word.len() as f64
    }
}

/// Message indices that trials `0..count` transmit in random-codeword mode.
pub fn random_message_indices(
    composition: &Composition,
    count: u64,
    seed: u64,
) -> Result<Vec<BigUint>> {
    let size = codebook_size(composition).exact.ok_or_else(|| {
        Error::InvalidParameter(
            "random codewords need an exactly representable codebook size".into(),
        )
    })?;
    let key = key_for(seed);
    Ok((0..count)
        .map(|t| {
            let mut rng = rng_at(key, stream_id(t, CHANNEL_CODEWORD));
            rng.gen_biguint_below(&size) + BigUint::one()
        })
        .collect())
}

/// Empirical decoding error probability; erasures count as errors.
pub fn estimate_dep(
    constellation: &Constellation,
    composition: &Composition,
    sigma2: f64,
    opts: &SimOptions,
) -> Result<Estimate> {
    let setup = TrialSetup::new(constellation, composition, sigma2, opts)?;
    let decoder = Decoder::new(constellation)?;
    let errors = run_chunks(opts.trials, opts.workers, |range| {
        range
            .filter(|&t| !setup.decoded_correctly(&decoder, &setup.codeword(t), t))
            .count() as u64
    })?;
    Ok(Estimate::from_counts(errors.iter().sum(), opts.trials))
}

/// Decoding error probability of one fixed symbol sequence, which need not
/// belong to any homogeneous code. `opts.codeword` is ignored.
pub fn estimate_word_dep(
    constellation: &Constellation,
    word: &[SymbolId],
    sigma2: f64,
    opts: &SimOptions,
) -> Result<Estimate> {
    let setup = TrialSetup::for_word(constellation, word, sigma2, opts)?;
    let decoder = Decoder::new(constellation)?;
    let errors = run_chunks(opts.trials, opts.workers, |range| {
        range
            .filter(|&t| !setup.decoded_correctly(&decoder, word, t))
            .count() as u64
    })?;
    Ok(Estimate::from_counts(errors.iter().sum(), opts.trials))
}

/// Block-average harvested energy of every trial, in trial order.
pub fn harvested_energy_samples(
    constellation: &Constellation,
    composition: &Composition,
    model: &EnergyModel,
    sigma2: f64,
    opts: &SimOptions,
) -> Result<Vec<f64>> {
    model.validate()?;
    let setup = TrialSetup::new(constellation, composition, sigma2, opts)?;
    let chunks = run_chunks(opts.trials, opts.workers, |range| {
        range
            .map(|t| setup.block_energy(model, &setup.codeword(t), t))
            .collect::<Vec<f64>>()
    })?;
    Ok(chunks.concat())
}

/// Empirical energy outage probability `Pr[ḡ(Z) < B]`.
pub fn estimate_eop(
    constellation: &Constellation,
    composition: &Composition,
    b: f64,
    model: &EnergyModel,
    sigma2: f64,
    opts: &SimOptions,
) -> Result<Estimate> {
    if !(b >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "energy target must be nonnegative, got {b}"
        )));
    }
    let samples = harvested_energy_samples(constellation, composition, model, sigma2, opts)?;
    let outages = samples.iter().filter(|&&g| g < b).count() as u64;
    Ok(Estimate::from_counts(outages, opts.trials))
}

/// Sample mean of the block-average harvested energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: u64,
}

pub fn mean_estimate(samples: &[f64]) -> MeanEstimate {
    let t = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / t;
    let var = samples.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (t - 1.0).max(1.0);
    MeanEstimate {
        mean,
        standard_error: (var / t).sqrt(),
        trials: samples.len() as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub b: f64,
    pub delta: f64,
    pub trials: u64,
    /// Set when too few trials fall on the short side of the quantile.
    pub warning: Option<String>,
}

/// Empirical `δ`-quantile of `ḡ(Z)`: the largest `B` with at most `⌊δT⌋`
/// simulated blocks strictly below it.
pub fn calibrate_b_for_delta(
    constellation: &Constellation,
    composition: &Composition,
    delta: f64,
    model: &EnergyModel,
    sigma2: f64,
    opts: &SimOptions,
) -> Result<Calibration> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "EOP target must lie strictly between 0 and 1, got {delta}"
        )));
    }
    let mut samples = harvested_energy_samples(constellation, composition, model, sigma2, opts)?;
    samples.sort_by(f64::total_cmp);
    let trials = opts.trials;
    let k = ((delta * trials as f64).floor() as usize).min(samples.len() - 1);
    let short_side = trials as f64 * delta.min(1.0 - delta);
    let warning = (short_side < 100.0).then(|| {
        format!("only {short_side:.0} of {trials} trials resolve the {delta} quantile; B is coarse")
    });
    Ok(Calibration {
        b: samples[k],
        delta,
        trials,
        warning,
    })
}

/// DEP and EOP measured on the same transmitted codewords.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointEstimate {
    pub dep: Estimate,
    pub eop: Estimate,
    pub energy: MeanEstimate,
    pub b: f64,
}

pub fn simulate_joint(
    constellation: &Constellation,
    composition: &Composition,
    b: f64,
    model: &EnergyModel,
    sigma2: f64,
    opts: &SimOptions,
) -> Result<JointEstimate> {
    model.validate()?;
    let setup = TrialSetup::new(constellation, composition, sigma2, opts)?;
    let decoder = Decoder::new(constellation)?;
    let chunks = run_chunks(opts.trials, opts.workers, |range| {
        let mut errors = 0u64;
        let mut energies = Vec::with_capacity((range.end - range.start) as usize);
        for t in range {
            let word = setup.codeword(t);
            errors += u64::from(!setup.decoded_correctly(&decoder, &word, t));
            energies.push(setup.block_energy(model, &word, t));
        }
        (errors, energies)
    })?;
    let errors = chunks.iter().map(|c| c.0).sum();
    let energies: Vec<f64> = chunks.into_iter().flat_map(|c| c.1).collect();
    let outages = energies.iter().filter(|&&g| g < b).count() as u64;
    Ok(JointEstimate {
        dep: Estimate::from_counts(errors, opts.trials),
        eop: Estimate::from_counts(outages, opts.trials),
        energy: mean_estimate(&energies),
        b,
    })
}
