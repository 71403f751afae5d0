//! Constant-composition (homogeneous) codebooks over a layered constellation.
//!
//! Every symbol of layer `c` appears exactly `k_c = n·p_c / L_c` times in
//! every codeword, so the codebook is the set of multiset permutations of one
//! canonical word. Codewords are never stored; they are produced on demand by
//! lexicographic ranking and unranking.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::constellation::{Constellation, SymbolId};
use crate::error::{Error, Result};

/// Block lengths up to this value get an exact big-integer codebook size.
pub const EXACT_SIZE_CROSSOVER: usize = 512;

const SIMPLEX_TOL: f64 = 1e-9;

pub(crate) fn validate_frequencies(p: &[f64], layer_sizes: &[usize]) -> Result<()> {
    if p.len() != layer_sizes.len() {
        return Err(Error::InvalidParameter(format!(
            "{} layer frequencies for {} layers",
            p.len(),
            layer_sizes.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::InvalidParameter("empty frequency vector".into()));
    }
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequencies must be nonnegative, got {p:?}"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidParameter(format!(
            "frequencies must sum to 1, got {sum}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidParameter("layer with zero symbols".into()));
    }
    Ok(())
}

/// Layer frequencies with possibly fractional per-symbol use counts.
///
/// This is what the rate and error bounds consume: they are smooth in
/// `n·p_c/L_c` and stay meaningful when the counts are not integers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerUsage {
    pub n: usize,
    pub p: Vec<f64>,
    pub layer_sizes: Vec<usize>,
}

impl LayerUsage {
    pub fn new(n: usize, p: Vec<f64>, layer_sizes: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length must be >= 1".into()));
        }
        validate_frequencies(&p, &layer_sizes)?;
        Ok(LayerUsage { n, p, layer_sizes })
    }

    /// `n·p_c / L_c` for every layer.
    pub fn per_symbol_uses(&self) -> Vec<f64> {
        self.p
            .iter()
            .zip(&self.layer_sizes)
            .map(|(&p, &l)| self.n as f64 * p / l as f64)
            .collect()
    }

    /// `log2( n! / Π_c Γ(n·p_c/L_c + 1)^{L_c} )`.
    ///
    /// Equals [`codebook_size`]'s `log2` whenever the uses are integers.
    pub fn log2_size(&self) -> f64 {
        let numerator = libm::lgamma(self.n as f64 + 1.0);
        let denominator: f64 = self
            .per_symbol_uses()
            .iter()
            .zip(&self.layer_sizes)
            .map(|(&k, &l)| l as f64 * libm::lgamma(k + 1.0))
            .sum();
        ((numerator - denominator) / std::f64::consts::LN_2).max(0.0)
    }

    /// True when every per-symbol use count is a whole number.
    pub fn is_integral(&self) -> bool {
        self.per_symbol_uses()
            .iter()
            .all(|&k| (k - k.round()).abs() <= SIMPLEX_TOL * k.max(1.0))
    }
}

/// Integer per-symbol use counts for a block of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Composition {
    n: usize,
    p: Vec<f64>,
    layer_sizes: Vec<usize>,
    counts: Vec<u64>,
}

impl Composition {
    /// Builds a composition from integer per-layer, per-symbol counts.
    pub fn from_counts(layer_sizes: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if layer_sizes.len() != counts.len() || layer_sizes.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} counts for {} layers",
                counts.len(),
                layer_sizes.len()
            )));
        }
        let n: u64 = layer_sizes
            .iter()
            .zip(&counts)
            .map(|(&l, &k)| l as u64 * k)
            .sum();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "composition of an empty block".into(),
            ));
        }
        let p = layer_sizes
            .iter()
            .zip(&counts)
            .map(|(&l, &k)| (l as u64 * k) as f64 / n as f64)
            .collect();
        Ok(Composition {
            n: n as usize,
            p,
            layer_sizes,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Realized layer frequencies `L_c·k_c / n`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// `k_c`: how often each symbol of layer `c` appears in a codeword.
    pub fn layer_counts(&self) -> &[u64] {
        &self.counts
    }

    /// Use count of every symbol, in flat constellation order.
    pub fn symbol_counts(&self) -> Vec<u64> {
        self.layer_sizes
            .iter()
            .zip(&self.counts)
            .flat_map(|(&l, &k)| std::iter::repeat_n(k, l))
            .collect()
    }

    pub fn alphabet_size(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    pub fn usage(&self) -> LayerUsage {
        LayerUsage {
            n: self.n,
            p: self.p.clone(),
            layer_sizes: self.layer_sizes.clone(),
        }
    }

    /// The lexicographically first codeword: every symbol repeated `k` times in id order.
    pub fn canonical_codeword(&self) -> Vec<SymbolId> {
        self.symbol_counts()
            .iter()
            .enumerate()
            .flat_map(|(s, &k)| std::iter::repeat_n(s, k as usize))
            .collect()
    }
}

/// Exact counts `k_c = n·p_c / L_c`. Fails instead of rounding.
pub fn counts_from_frequencies(n: usize, p: &[f64], layer_sizes: &[usize]) -> Result<Composition> {
    let usage = LayerUsage::new(n, p.to_vec(), layer_sizes.to_vec())?;
    let mut counts = Vec::with_capacity(p.len());
    for (layer, &k) in usage.per_symbol_uses().iter().enumerate() {
        let rounded = k.round();
        if (k - rounded).abs() > SIMPLEX_TOL * k.max(1.0) {
            let nearest = nearest_feasible(n, p, layer_sizes, 2)
                .into_iter()
                .map(|c| c.p)
                .collect();
            return Err(Error::CompositionInfeasible {
                layer,
                count: k,
                nearest,
            });
        }
        counts.push(rounded as u64);
    }
    Ok(Composition {
        n,
        p: p.to_vec(),
        layer_sizes: layer_sizes.to_vec(),
        counts,
    })
}

/// Closest integer composition to `p`.
///
/// Minimizes `Σ_c |n·p_c - L_c·k_c|` subject to `Σ_c L_c·k_c = n`, with every
/// layer of positive frequency keeping at least one use per symbol. Ties go to
/// the solution that puts more weight on lower layer indices.
pub fn round_composition(n: usize, p: &[f64], layer_sizes: &[usize]) -> Result<Composition> {
    LayerUsage::new(n, p.to_vec(), layer_sizes.to_vec())?;
    let forced: usize = p
        .iter()
        .zip(layer_sizes)
        .filter(|(&pc, _)| pc > 0.0)
        .map(|(_, &l)| l)
        .sum();
    if n < forced {
        return Err(Error::InvalidParameter(format!(
            "block length {n} is shorter than the {forced} symbols that must appear"
        )));
    }
    nearest_feasible(n, p, layer_sizes, 1)
        .into_iter()
        .next()
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no integer composition of length {n} over layer sizes {layer_sizes:?}"
            ))
        })
}

/// Up to `keep` best integer compositions, best first.
fn nearest_feasible(n: usize, p: &[f64], layer_sizes: &[usize], keep: usize) -> Vec<Composition> {
    let targets: Vec<f64> = p.iter().map(|&pc| n as f64 * pc).collect();
    let mut best: Vec<(f64, Vec<u64>)> = Vec::new();
    let mut current = vec![0u64; layer_sizes.len()];

    #[allow(clippy::too_many_arguments)]
    fn search(
        layer: usize,
        remaining: usize,
        cost: f64,
        p: &[f64],
        targets: &[f64],
        sizes: &[usize],
        current: &mut Vec<u64>,
        best: &mut Vec<(f64, Vec<u64>)>,
        keep: usize,
    ) {
        if let Some(worst) = best.get(keep - 1) {
            if cost > worst.0 + 1e-9 {
                return;
            }
        }
        let size = sizes[layer];
        let min_k = u64::from(p[layer] > 0.0);
        if layer + 1 == sizes.len() {
            if !remaining.is_multiple_of(size) {
                return;
            }
            let k = (remaining / size) as u64;
            if k < min_k {
                return;
            }
            current[layer] = k;
            let total = cost + (targets[layer] - remaining as f64).abs();
            // insertion keeps earlier (lexicographically larger) entries ahead on ties
            let pos = best
                .iter()
                .position(|(c, _)| total < c - 1e-9)
                .unwrap_or(best.len());
            if pos < keep {
                best.insert(pos, (total, current.clone()));
                best.truncate(keep);
            }
            return;
        }
        let max_k = (remaining / size) as u64;
        for k in (min_k..=max_k).rev() {
            current[layer] = k;
            let used = k as usize * size;
            search(
                layer + 1,
                remaining - used,
                cost + (targets[layer] - used as f64).abs(),
                p,
                targets,
                sizes,
                current,
                best,
                keep,
            );
        }
    }

    search(
        0,
        n,
        0.0,
        p,
        &targets,
        layer_sizes,
        &mut current,
        &mut best,
        keep,
    );
    best.into_iter()
        .filter_map(|(_, counts)| Composition::from_counts(layer_sizes.to_vec(), counts).ok())
        .collect()
}

/// Codebook size `M = n! / Π_c (k_c!)^{L_c}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookSize {
    /// Exact value, present when `n` does not exceed the crossover.
    #[serde(serialize_with = "serialize_opt_biguint")]
    pub exact: Option<BigUint>,
    pub log2: f64,
}

fn serialize_opt_biguint<S: serde::Serializer>(
    v: &Option<BigUint>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&v.to_str_radix(10)),
        None => s.serialize_none(),
    }
}

pub fn codebook_size(composition: &Composition) -> CodebookSize {
    codebook_size_with_crossover(composition, EXACT_SIZE_CROSSOVER)
}

pub fn codebook_size_with_crossover(composition: &Composition, crossover: usize) -> CodebookSize {
    let exact = (composition.n <= crossover).then(|| multinomial(&composition.symbol_counts()));
    CodebookSize {
        exact,
        log2: composition.usage().log2_size(),
    }
}

fn factorial(n: u64) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// `(Σ counts)! / Π counts!`
pub fn multinomial(counts: &[u64]) -> BigUint {
    let total: u64 = counts.iter().sum();
    let denominator = counts
        .iter()
        .fold(BigUint::one(), |acc, &k| acc * factorial(k));
    factorial(total) / denominator
}

/// Bits per channel use.
pub fn info_rate(log2_size: f64, n: usize) -> f64 {
    log2_size / n as f64
}

/// `log2` of a big integer, accurate to double precision.
pub fn log2_biguint(value: &BigUint) -> f64 {
    let bits = value.bits();
    if bits <= 64 {
        return value.to_u64().map_or(f64::NAN, |v| (v as f64).log2());
    }
    let shift = bits - 64;
    let top = (value >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).log2() + shift as f64
}

/// Index ↔ codeword bijection for one composition over one constellation.
#[derive(Debug, Clone)]
pub struct Codebook<'a> {
    constellation: &'a Constellation,
    composition: Composition,
    size: BigUint,
}

impl<'a> Codebook<'a> {
    pub fn new(constellation: &'a Constellation, composition: Composition) -> Result<Self> {
        if constellation.layer_sizes() != composition.layer_sizes {
            return Err(Error::InvalidParameter(format!(
                "composition layer sizes {:?} do not match constellation {:?}",
                composition.layer_sizes,
                constellation.layer_sizes()
            )));
        }
        let size = multinomial(&composition.symbol_counts());
        Ok(Codebook {
            constellation,
            composition,
            size,
        })
    }

    pub fn constellation(&self) -> &Constellation {
        self.constellation
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    /// Exact number of codewords.
    pub fn size(&self) -> &BigUint {
        &self.size
    }

    pub fn unrank(&self, index: &BigUint) -> Result<Vec<SymbolId>> {
        unrank_codeword(index, &self.composition)
    }

    pub fn rank(&self, codeword: &[SymbolId]) -> Result<BigUint> {
        rank_codeword(codeword, &self.composition)
    }

    /// Channel input for a codeword.
    pub fn modulate(&self, codeword: &[SymbolId]) -> Vec<num_complex::Complex64> {
        let symbols = self.constellation.symbols();
        codeword.iter().map(|&s| symbols[s]).collect()
    }
}

/// The `index`-th codeword (1-based) in lexicographic order of symbol ids.
pub fn unrank_codeword(index: &BigUint, composition: &Composition) -> Result<Vec<SymbolId>> {
    let mut counts = composition.symbol_counts();
    let mut total = multinomial(&counts);
    if index.is_zero() || *index > total {
        return Err(Error::IndexOutOfRange {
            index: index.to_string(),
            max: total.to_string(),
        });
    }
    let mut active: Vec<SymbolId> = (0..counts.len()).filter(|&s| counts[s] > 0).collect();
    let mut offset = index - 1u32;
    let mut remaining = composition.n as u64;
    let mut word = Vec::with_capacity(composition.n);
    while remaining > 0 {
        let mut chosen = None;
        for (slot, &s) in active.iter().enumerate() {
            let block = &total * counts[s] / remaining;
            if offset < block {
                chosen = Some((slot, s, block));
                break;
            }
            offset -= block;
        }
        let (slot, s, block) = chosen.expect("offset is below the remaining multinomial");
        word.push(s);
        total = block;
        counts[s] -= 1;
        remaining -= 1;
        if counts[s] == 0 {
            active.remove(slot);
        }
    }
    Ok(word)
}

/// Inverse of [`unrank_codeword`].
pub fn rank_codeword(codeword: &[SymbolId], composition: &Composition) -> Result<BigUint> {
    let mut counts = composition.symbol_counts();
    if codeword.len() != composition.n {
        return Err(Error::NotInCodebook(format!(
            "length {} instead of {}",
            codeword.len(),
            composition.n
        )));
    }
    let mut seen = vec![0u64; counts.len()];
    for &s in codeword {
        if s >= counts.len() {
            return Err(Error::UnknownSymbol(s));
        }
        seen[s] += 1;
    }
    if seen != counts {
        return Err(Error::NotInCodebook(
            "symbol counts differ from the composition".into(),
        ));
    }
    let mut total = multinomial(&counts);
    let mut remaining = composition.n as u64;
    let mut rank = BigUint::zero();
    for &s in codeword {
        for &earlier in &counts[..s] {
            if earlier > 0 {
                rank += &total * earlier / remaining;
            }
        }
        total = &total * counts[s] / remaining;
        counts[s] -= 1;
        remaining -= 1;
    }
    Ok(rank + 1u32)
}

/// Empirical distribution of symbols, kept as exact fractions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypePmf(pub BTreeMap<SymbolId, Ratio<u64>>);

impl TypePmf {
    pub fn get(&self, symbol: SymbolId) -> Ratio<u64> {
        self.0.get(&symbol).copied().unwrap_or_else(Ratio::zero)
    }

    pub fn total(&self) -> Ratio<u64> {
        self.0.values().fold(Ratio::zero(), |acc, &v| acc + v)
    }
}

fn tally(
    codeword: &[SymbolId],
    alphabet_size: usize,
    into: &mut BTreeMap<SymbolId, u64>,
) -> Result<()> {
    for &s in codeword {
        if s >= alphabet_size {
            return Err(Error::UnknownSymbol(s));
        }
        *into.entry(s).or_insert(0) += 1;
    }
    Ok(())
}

/// `P_u(x) = #{t : u_t = x} / n`.
pub fn type_of_codeword(codeword: &[SymbolId], alphabet_size: usize) -> Result<TypePmf> {
    if codeword.is_empty() {
        return Err(Error::InvalidParameter("empty codeword".into()));
    }
    let mut counts = BTreeMap::new();
    tally(codeword, alphabet_size, &mut counts)?;
    let n = codeword.len() as u64;
    Ok(TypePmf(
        counts
            .into_iter()
            .map(|(s, k)| (s, Ratio::new(k, n)))
            .collect(),
    ))
}

/// Average of the codeword types: `P_C(x) = (1/M) Σ_i P_{u(i)}(x)`.
pub fn type_of_code<W: AsRef<[SymbolId]>>(
    codewords: &[W],
    alphabet_size: usize,
) -> Result<TypePmf> {
    let first = codewords
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty code".into()))?
        .as_ref()
        .len();
    if first == 0 {
        return Err(Error::InvalidParameter("empty codeword".into()));
    }
    let mut counts = BTreeMap::new();
    for word in codewords {
        let word = word.as_ref();
        if word.len() != first {
            return Err(Error::MixedLengths(first, word.len()));
        }
        tally(word, alphabet_size, &mut counts)?;
    }
    let denominator = first as u64 * codewords.len() as u64;
    Ok(TypePmf(
        counts
            .into_iter()
            .map(|(s, k)| (s, Ratio::new(k, denominator)))
            .collect(),
    ))
}

/// True iff every codeword has exactly the type of the whole code.
pub fn is_homogeneous<W: AsRef<[SymbolId]>>(codewords: &[W]) -> bool {
    let Some(first) = codewords.first() else {
        return true;
    };
    let alphabet = codewords
        .iter()
        .flat_map(|w| w.as_ref().iter().copied())
        .max()
        .map_or(0, |m| m + 1);
    let Ok(code_type) = type_of_code(codewords, alphabet) else {
        return false;
    };
    if first.as_ref().is_empty() {
        return false;
    }
    codewords
        .iter()
        .all(|w| type_of_codeword(w.as_ref(), alphabet).is_ok_and(|t| t == code_type))
}
