//! End-to-end checks, one line of output per criterion.
//!
//! Runs without the libtest harness so the PASS/FAIL lines are always
//! printed, captured output or not.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use siet::achievable::{achievable_tuple, dep_bound};
use siet::codebook::{codebook_size, counts_from_frequencies, Composition, LayerUsage};
use siet::constellation::{
    max_symbols_per_layer, strict_disjointness_oracle, Constellation, Layer,
};
use siet::converse::{converse_dep, converse_tuple};
use siet::energy::{expected_energy_at_amplitude, EnergyModel};
use siet::frontier::config::RadiusRange;
use siet::frontier::pareto::converse_frontier;
use siet::frontier::sweep::uniform_over_symbols;
use siet::frontier::{pareto_frontier, sweep_radius, sweep_region, RegionPoint, ScenarioConfig};
use siet::simulate::{
    estimate_eop, estimate_word_dep, harvested_energy_samples, simulate_joint, CodewordChoice,
    SimOptions,
};

type Outcome = Result<String, String>;

const QUAD: EnergyModel = EnergyModel::Quadratic { kappa: 1.0 };

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ScenarioConfig::load(path).expect("bundled config loads")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("took {elapsed:.1?}, limit {limit:?}")
    })
}

/// Lexicographic successor of a sequence, in place; false after the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every vector of `len` sizes in `1..=max`.
fn size_vectors(len: usize, max: usize) -> Vec<Vec<usize>> {
    (0..len).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|v| {
                (1..=max).map(move |l| {
                    let mut w = v.clone();
                    w.push(l);
                    w
                })
            })
            .collect()
    })
}

/// Per-layer counts with `1 <= Σ L_c·k_c <= n_max`.
fn count_vectors(sizes: &[usize], n_max: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    fn go(
        c: usize,
        used: usize,
        sizes: &[usize],
        n_max: usize,
        cur: &mut Vec<u64>,
        out: &mut Vec<Vec<u64>>,
    ) {
        if c == sizes.len() {
            if used > 0 {
                out.push(cur.clone());
            }
            return;
        }
        let mut k = 0;
        while used + k * sizes[c] <= n_max {
            cur.push(k as u64);
            go(c + 1, used + k * sizes[c], sizes, n_max, cur, out);
            cur.pop();
            k += 1;
        }
    }
    go(0, 0, sizes, n_max, &mut Vec::new(), &mut out);
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut memo: HashMap<Vec<u64>, u64> = HashMap::new();
    for layers in 1..=4 {
        for sizes in size_vectors(layers, 4) {
            for counts in count_vectors(&sizes, 8) {
                let comp =
                    Composition::from_counts(sizes.clone(), counts).map_err(|e| e.to_string())?;
                let symbol_counts = comp.symbol_counts();
                let brute = *memo.entry(symbol_counts.clone()).or_insert_with(|| {
                    let mut word: Vec<usize> = symbol_counts
                        .iter()
                        .enumerate()
                        .flat_map(|(s, &k)| std::iter::repeat_n(s, k as usize))
                        .collect();
                    let mut total = 1;
                    while next_permutation(&mut word) {
                        total += 1;
                    }
                    total
                });
                let size = codebook_size(&comp)
                    .exact
                    .ok_or("no exact size for n <= 8")?;
                ensure(size == BigUint::from(brute), || {
                    format!(
                        "sizes {sizes:?} counts {:?}: {size} vs {brute}",
                        comp.layer_counts()
                    )
                })?;
                cases += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "{cases} compositions (n <= 8, up to 4 layers of up to 4 symbols) match exhaustive counts in {:.1?}",
        start.elapsed()
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    // 10 uses over 6 symbols admits no homogeneous code; any fixed word of
    // length 10 has the same error probability, so one is simulated directly.
    let c = Constellation::checked(vec![Layer::new(10.0, 6, 2.0).map_err(|e| e.to_string())?])
        .map_err(|e| e.to_string())?;
    ensure(counts_from_frequencies(10, &[1.0], &[6]).is_err(), || {
        "expected n=10, L=6 to have no integer composition".into()
    })?;
    let word: Vec<usize> = (0..10).map(|i| i % 6).collect();
    let est = estimate_word_dep(&c, &word, 1.0, &SimOptions::new(1_000_000, 2024))
        .map_err(|e| e.to_string())?;
    let expected = 1.0 - (1.0 - (-4.0f64).exp()).powi(10);
    let bound = dep_bound(&[2.0], &[1.0], 10, 1.0).map_err(|e| e.to_string())?;
    ensure(rel_diff(bound, expected) < 1e-14, || {
        format!("closed form {bound} vs {expected}")
    })?;
    let z = (est.value - expected) / est.standard_error;
    ensure(z.abs() < 4.0, || {
        format!("DEP {} vs {expected}: {z:.2} standard errors", est.value)
    })?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "DEP {:.6} ± {:.6} vs {expected:.6} ({z:+.2} SE, 1e6 trials, {:.1?})",
        est.value,
        est.standard_error,
        start.elapsed()
    ))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for sigma2 in [0.25, 1.0, 4.0] {
        for a in 0..=50 {
            let a = a as f64;
            let got = expected_energy_at_amplitude(&QUAD, a, sigma2).map_err(|e| e.to_string())?;
            let err = rel_diff(got, a * a + sigma2);
            ensure(err <= 1e-9, || {
                format!("A={a}, σ²={sigma2}: {got} vs {}", a * a + sigma2)
            })?;
            worst = worst.max(err);
        }
    }
    Ok(format!("153 cases, worst relative error {worst:.2e}"))
}

fn random_constellation(rng: &mut ChaCha8Rng) -> Constellation {
    let layers = rng.gen_range(1..=4);
    let radii: Vec<f64> = (0..layers).map(|_| rng.gen_range(0.2..2.5)).collect();
    let mut amplitude = rng.gen_range(5.0..60.0);
    let mut out = Vec::with_capacity(layers);
    for (c, &r) in radii.iter().enumerate() {
        if c > 0 {
            amplitude -= radii[c - 1] + r + rng.gen_range(0.0..3.0);
        }
        if amplitude <= r {
            break;
        }
        let max = max_symbols_per_layer(r, amplitude).unwrap();
        out.push(Layer::new(amplitude, rng.gen_range(1..=max.min(40)), r).unwrap());
    }
    Constellation::checked(out).unwrap()
}

fn random_p(rng: &mut ChaCha8Rng, layers: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..layers)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        let mut p = vec![0.0; layers];
        p[0] = 1.0;
        return p;
    }
    raw.iter().map(|x| x / total).collect()
}

fn raw_grid_eps(r: f64, n: usize, p: &[f64], sigma2: f64) -> Result<(f64, f64), String> {
    let eps_ach = dep_bound(&[r; 3], p, n, sigma2).map_err(|e| e.to_string())?;
    // Raw grid geometry: tight amplitudes, largest counts. The converse
    // ignores radii, so each is capped to keep the layer well formed.
    let layers = (0..3)
        .map(|c| {
            let a = 50.0 - 2.0 * r * c as f64;
            let l = max_symbols_per_layer(r, a)?;
            Layer::new(a, l, r.min(0.5 * a))
        })
        .collect::<siet::error::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let c = Constellation::new(layers).map_err(|e| e.to_string())?;
    let usage = LayerUsage::new(n, p.to_vec(), c.layer_sizes()).map_err(|e| e.to_string())?;
    let eps_conv = converse_dep(&c, &usage, sigma2)
        .map_err(|e| e.to_string())?
        .eps_min;
    Ok((eps_ach, eps_conv))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let c = random_constellation(&mut rng);
        let p = random_p(&mut rng, c.layers().len());
        let n = rng.gen_range(1..=200);
        let sigma2 = rng.gen_range(0.1..4.0);
        let delta = rng.gen_range(0.0..0.95);
        let model = if rng.gen_bool(0.5) {
            EnergyModel::Quadratic {
                kappa: rng.gen_range(0.1..2.0),
            }
        } else {
            EnergyModel::Saturating {
                m_max: rng.gen_range(1.0..50.0),
                a: rng.gen_range(0.0005..0.01),
                b: rng.gen_range(10.0..2000.0),
            }
        };
        let usage = LayerUsage::new(n, p, c.layer_sizes()).map_err(|e| e.to_string())?;
        let ach = achievable_tuple(&c, &usage, delta, &model, sigma2).map_err(|e| e.to_string())?;
        let conv = converse_tuple(&c, &usage, delta, &model, sigma2).map_err(|e| e.to_string())?;
        let err = rel_diff(ach.energy_rate, conv.energy_rate);
        ensure(err <= 1e-12, || {
            format!(
                "case {case}: B_ach {} vs B_conv {}",
                ach.energy_rate, conv.energy_rate
            )
        })?;
        worst = worst.max(err);
    }

    let radius_cfg = config("radius.json");
    let range: RadiusRange = radius_cfg.sweep.r.ok_or("radius_cfg has no radius range")?;
    let grid = range.values();
    let mut violations = Vec::new();
    for &r in &grid {
        let (ach, conv) = raw_grid_eps(
            r,
            radius_cfg.channel.n,
            &radius_cfg.p,
            radius_cfg.channel.sigma2,
        )?;
        if conv > ach {
            violations.push(format!("r={r}: eps_conv {conv:.3e} > eps_ach {ach:.3e}"));
        }
    }
    let swept = sweep_radius(&radius_cfg).map_err(|e| e.to_string())?;
    for pt in &swept.points {
        ensure(pt.eps_conv <= pt.eps_ach, || {
            format!(
                "emitted r={}: eps_conv {} > eps_ach {}",
                pt.r, pt.eps_conv, pt.eps_ach
            )
        })?;
    }
    ensure(violations.is_empty(), || {
        format!(
            "B_ach = B_conv on 100 random codes, eps_conv <= eps_ach at all {} emitted points, \
             but {} of {} grid radii violate it: {}",
            swept.points.len(),
            violations.len(),
            grid.len(),
            violations.join("; ")
        )
    })?;
    Ok(format!(
        "B_ach = B_conv on 100 random codes (worst {worst:.1e}); eps_conv <= eps_ach at {} grid radii and {} emitted points",
        grid.len(),
        swept.points.len()
    ))
}

fn by_delta(points: &[RegionPoint]) -> Vec<(f64, Vec<&RegionPoint>)> {
    let mut groups: Vec<(f64, Vec<&RegionPoint>)> = Vec::new();
    for pt in points {
        match groups.iter_mut().find(|(d, _)| *d == pt.delta) {
            Some((_, g)) => g.push(pt),
            None => groups.push((pt.delta, vec![pt])),
        }
    }
    groups
}

fn criterion_5() -> Outcome {
    let radius_cfg = config("radius.json");
    let swept = sweep_radius(&radius_cfg).map_err(|e| e.to_string())?;
    let groups = by_delta(&swept.points);
    ensure(groups.len() == 3, || format!("{} EOP values", groups.len()))?;
    for (delta, group) in &groups {
        let mut pts = group.clone();
        pts.sort_by(|a, b| a.eps_ach.total_cmp(&b.eps_ach));
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            ensure(lo.eps_ach < hi.eps_ach, || {
                format!("δ={delta}: equal ε at r={} and r={}", lo.r, hi.r)
            })?;
            ensure(lo.b_ach < hi.b_ach, || {
                format!(
                    "δ={delta}: B not increasing in ε between r={} and r={}",
                    lo.r, hi.r
                )
            })?;
            ensure(lo.rate <= hi.rate, || {
                format!(
                    "δ={delta}: R decreasing in ε between r={} and r={}",
                    lo.r, hi.r
                )
            })?;
        }
    }
    let (d0, base) = &groups[0];
    let mut worst: f64 = 0.0;
    for (delta, group) in &groups[1..] {
        for (a, b) in base.iter().zip(group) {
            ensure(a.r == b.r, || "δ groups are not aligned by radius".into())?;
            let err = rel_diff(b.b_ach / a.b_ach, (1.0 - d0) / (1.0 - delta));
            ensure(err <= 1e-12, || {
                format!("r={}: B ratio off by {err:e}", a.r)
            })?;
            worst = worst.max(err);
        }
    }
    Ok(format!(
        "{} radii per δ: B strictly and R weakly increasing in ε; 1/(1-δ) scaling to {worst:.1e}",
        base.len()
    ))
}

fn criterion_6() -> Outcome {
    let region_cfg = config("region.json");
    ensure(region_cfg.layers[0].amplitude.value() == Some(30.0), || {
        "A_1 is not 30".into()
    })?;
    let res = sweep_region(&region_cfg).map_err(|e| e.to_string())?;
    let best_b = res
        .points
        .iter()
        .max_by(|a, b| a.b_ach.total_cmp(&b.b_ach))
        .ok_or("empty sweep")?;
    ensure(best_b.p == [1.0, 0.0, 0.0], || {
        format!("max B at p = {:?}", best_b.p)
    })?;
    let best_r = res
        .points
        .iter()
        .max_by(|a, b| a.rate.total_cmp(&b.rate))
        .ok_or("empty sweep")?;
    let geometry = res
        .geometries
        .iter()
        .find(|g| g.r == best_r.r)
        .ok_or("max R point has no geometry")?;
    let uniform = uniform_over_symbols(&geometry.constellation);
    ensure(best_r.p == uniform, || {
        format!("max R at p = {:?}, uniform is {uniform:?}", best_r.p)
    })?;
    let ach = pareto_frontier(&res.points);
    let conv = converse_frontier(&res.points);
    ensure(ach == conv, || {
        format!("frontiers differ: {} vs {} points", ach.len(), conv.len())
    })?;
    for pt in &ach {
        ensure(pt.eps_ach > pt.eps_conv, || {
            format!(
                "R={}: eps_ach {} <= eps_conv {}",
                pt.rate, pt.eps_ach, pt.eps_conv
            )
        })?;
    }
    Ok(format!(
        "{} points over {} geometries; frontiers match on {} points with eps_ach > eps_conv",
        res.points.len(),
        res.geometries.len(),
        ach.len()
    ))
}

fn three_layers() -> (Constellation, Composition) {
    let c = Constellation::checked(vec![
        Layer::new(10.0, 4, 1.0).unwrap(),
        Layer::new(7.0, 3, 1.0).unwrap(),
        Layer::new(4.0, 2, 1.0).unwrap(),
    ])
    .unwrap();
    let comp = Composition::from_counts(vec![4, 3, 2], vec![1, 1, 1]).unwrap();
    (c, comp)
}

fn criterion_7() -> Outcome {
    let (c, comp) = three_layers();
    let err = |e: siet::error::Error| e.to_string();
    let opts = SimOptions::new(20_000, 7);
    let zero = estimate_eop(&c, &comp, 0.0, &QUAD, 4.0, &opts).map_err(err)?;
    let huge = estimate_eop(&c, &comp, 1e12, &QUAD, 4.0, &opts).map_err(err)?;
    let inf = estimate_eop(&c, &comp, f64::INFINITY, &QUAD, 4.0, &opts).map_err(err)?;
    ensure(zero.value == 0.0, || {
        format!("EOP at B=0 is {}", zero.value)
    })?;
    ensure(huge.value == 1.0 && inf.value == 1.0, || {
        format!("EOP at large B is {} / {}", huge.value, inf.value)
    })?;

    let size = codebook_size(&comp).exact.ok_or("no exact size")?;
    let indices = [
        BigUint::from(1u32),
        BigUint::from(77u32),
        BigUint::from(1000u32),
        BigUint::from(31_337u32),
        size,
    ];
    // B near the mean block energy, so the outage probability is far from 0 and 1
    let b = 68.0;
    let estimates = indices
        .iter()
        .enumerate()
        .map(|(i, idx)| {
            let opts = SimOptions::new(100_000, 700 + i as u64)
                .codeword(CodewordChoice::Index(idx.clone()));
            estimate_eop(&c, &comp, b, &QUAD, 4.0, &opts)
        })
        .collect::<siet::error::Result<Vec<_>>>()
        .map_err(err)?;
    let mut worst: f64 = 0.0;
    for a in &estimates {
        for e in &estimates {
            let joint = (a.standard_error.powi(2) + e.standard_error.powi(2)).sqrt();
            let z = (a.value - e.value).abs() / joint.max(f64::MIN_POSITIVE);
            worst = worst.max(z);
        }
    }
    ensure(worst <= 1.96, || {
        format!("codeword EOPs differ by {worst:.2} joint SE: {estimates:?}")
    })?;
    let values: Vec<String> = estimates
        .iter()
        .map(|e| format!("{:.4}", e.value))
        .collect();
    Ok(format!(
        "EOP 0 at B=0, 1 at B→∞; 5 codewords at 1e5 trials give [{}], max gap {worst:.2} joint SE",
        values.join(", ")
    ))
}

fn criterion_8() -> Outcome {
    let err = |e: siet::error::Error| e.to_string();
    let small = config("small.json");
    let c = small.constellation().map_err(err)?;
    let comp = counts_from_frequencies(small.channel.n, &small.p, &c.layer_sizes()).map_err(err)?;
    let mut checked = 0;
    for choice in [CodewordChoice::Canonical, CodewordChoice::Random] {
        let run = |workers: usize| {
            let opts = SimOptions::new(50_000, 99)
                .workers(workers)
                .codeword(choice.clone());
            let joint =
                simulate_joint(&c, &comp, 110.0, &small.energy, small.channel.sigma2, &opts)?;
            let samples =
                harvested_energy_samples(&c, &comp, &small.energy, small.channel.sigma2, &opts)?;
            Ok::<_, siet::error::Error>((joint, samples))
        };
        let (one, one_samples) = run(1).map_err(err)?;
        for workers in [4, 16] {
            let (other, other_samples) = run(workers).map_err(err)?;
            let same = one.dep.value.to_bits() == other.dep.value.to_bits()
                && one.eop.value.to_bits() == other.eop.value.to_bits()
                && one.energy.mean.to_bits() == other.energy.mean.to_bits()
                && one.energy.standard_error.to_bits() == other.energy.standard_error.to_bits()
                && one_samples.len() == other_samples.len()
                && one_samples
                    .iter()
                    .zip(&other_samples)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || {
                format!("{choice:?}: workers 1 and {workers} differ")
            })?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} runs with 4 and 16 workers bit-identical to 1 worker (canonical and random codewords)"
    ))
}

fn criterion_9() -> Outcome {
    let err = |e: siet::error::Error| e.to_string();
    let a = max_symbols_per_layer(2.0, 10.0).map_err(err)?;
    let b = max_symbols_per_layer(2.0, 2.0).map_err(err)?;
    ensure(a == 15 && b == 3, || format!("max symbols {a}, {b}"))?;
    let radius = sweep_radius(&config("radius.json")).map_err(err)?;
    let region = sweep_region(&config("region.json")).map_err(err)?;
    let mut count = 0;
    for g in radius.geometries.iter().chain(&region.geometries) {
        let overlaps = strict_disjointness_oracle(&g.constellation);
        ensure(overlaps.is_empty(), || {
            format!("r={}: {} overlapping pairs", g.r, overlaps.len())
        })?;
        count += 1;
    }
    for pt in radius.points.iter().chain(&region.points) {
        let sweep = if pt.sweep_var.as_str() == "radius" {
            &radius
        } else {
            &region
        };
        ensure(sweep.geometries.iter().any(|g| g.r == pt.r), || {
            format!("point at r={} has no checked geometry", pt.r)
        })?;
    }
    Ok(format!(
        "max symbols 15 and 3; {count} emitted geometries strictly disjoint ({} radius steps skipped as overlapping)",
        radius.skipped.len() + region.skipped.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (n, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
