//! Energy harvesting models and their expectation under complex Gaussian noise.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circularly symmetric harvest function `g(z)` with `g(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum EnergyModel {
    /// `κ·|z|²`.
    Quadratic { kappa: f64 },
    /// Logistic saturation in the received power `x = |z|²`, shifted so that
    /// `g(0) = 0`: `(Ψ(x) - M·Ω) / (1 - Ω)` with `Ψ(x) = M / (1 + e^{-a(x-b)})`
    /// and `Ω = 1 / (1 + e^{ab})`.
    Saturating { m_max: f64, a: f64, b: f64 },
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel::Quadratic { kappa: 1.0 }
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EnergyModel::Quadratic { kappa } if kappa > 0.0 && kappa.is_finite() => Ok(()),
            EnergyModel::Saturating { m_max, a, b }
                if m_max > 0.0 && a > 0.0 && b >= 0.0 && (m_max + a + b).is_finite() =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!(
                "invalid energy model parameters: {other:?}"
            ))),
        }
    }

    /// `g` as a function of the received power `|z|²`.
    pub fn of_power(&self, power: f64) -> f64 {
        match *self {
            EnergyModel::Quadratic { kappa } => kappa * power,
            EnergyModel::Saturating { m_max, a, b } => {
                let omega = logistic(-a * b);
                let psi = m_max * logistic(a * (power - b));
                ((psi - m_max * omega) / (1.0 - omega)).max(0.0)
            }
        }
    }

    /// Supremum of `g`, infinite for the quadratic model.
    pub fn ceiling(&self) -> f64 {
        match *self {
            EnergyModel::Quadratic { .. } => f64::INFINITY,
            EnergyModel::Saturating { m_max, .. } => m_max,
        }
    }
}

pub fn eval_energy(model: &EnergyModel, z: Complex64) -> f64 {
    model.of_power(z.norm_sqr())
}

/// Block average `(1/n) Σ_t g(z_t)`.
pub fn avg_energy(model: &EnergyModel, z: &[Complex64]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::InvalidParameter(
            "average energy of an empty block".into(),
        ));
    }
    Ok(z.iter().map(|&v| eval_energy(model, v)).sum::<f64>() / z.len() as f64)
}

/// Gauss–Hermite rule for weight `e^{-t²}` on the real line.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    /// Golub–Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix
    /// of the Hermite recurrence (zero diagonal, off-diagonal `sqrt(k/2)`),
    /// weights are `√π` times the squared first eigenvector components.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_NODES {
            return Err(Error::InvalidParameter(format!(
                "Gauss-Hermite order must be in 1..={MAX_NODES}, got {order}"
            )));
        }
        let n = order;
        let mut diag = vec![0.0; n];
        let mut off: Vec<f64> = (1..=n).map(|k| (k as f64 / 2.0).sqrt()).collect();
        off[n - 1] = 0.0;
        let mut first = vec![0.0; n];
        first[0] = 1.0;
        tridiagonal_ql(&mut diag, &mut off, &mut first)?;

        let mut pairs: Vec<(f64, f64)> = diag
            .into_iter()
            .zip(first)
            .map(|(x, v)| (x, PI.sqrt() * v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // the rule is symmetric; averaging mirrored entries removes eigen-solver jitter
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let j = n - 1 - i;
            nodes[i] = 0.5 * (pairs[i].0 - pairs[j].0);
            weights[i] = 0.5 * (pairs[i].1 + pairs[j].1);
        }
        Ok(HermiteRule { nodes, weights })
    }

    /// `∫ e^{-t²} f(t) dt ≈ Σ w_i f(t_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. On return `diag` holds the
/// eigenvalues and `first` the first component of each eigenvector (it must
/// start as the first row of the identity). `off[i]` couples `i` and `i + 1`.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let scale = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(Error::Numeric(format!(
                    "tridiagonal eigen-solve stalled at row {l} of {n}"
                )));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

pub const MIN_NODES: usize = 64;
pub const MAX_NODES: usize = 512;
pub const QUADRATURE_RTOL: f64 = 1e-8;

const RULE_ORDERS: [usize; 4] = [64, 128, 256, 512];
static RULES: [OnceLock<HermiteRule>; 4] = [
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
];

fn cached_rule(slot: usize) -> &'static HermiteRule {
    RULES[slot].get_or_init(|| {
        HermiteRule::new(RULE_ORDERS[slot]).expect("built-in Gauss-Hermite orders converge")
    })
}

/// `E[g(A + W)]` over a tensor rule with `order` nodes per axis, where `W` is
/// circularly symmetric complex Gaussian with total variance `sigma2`.
fn tensor_expectation(rule: &HermiteRule, model: &EnergyModel, amplitude: f64, sigma2: f64) -> f64 {
    let sigma = sigma2.sqrt();
    // real and imaginary parts have variance σ²/2, so t ↦ σ·t maps e^{-t²} onto them
    let mut total = 0.0;
    for (&ti, &wi) in rule.nodes.iter().zip(&rule.weights) {
        if wi == 0.0 {
            continue;
        }
        let re = amplitude + sigma * ti;
        let re2 = re * re;
        let inner: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&tj, &wj)| {
                let im = sigma * tj;
                wj * model.of_power(re2 + im * im)
            })
            .sum();
        total += wi * inner;
    }
    total / PI
}

/// `E_W[g(A + W)]` with `W ~ CN(0, σ²)`.
///
/// Tensor-product Gauss–Hermite over the real and imaginary noise components,
/// starting at [`MIN_NODES`] per axis and doubling until two successive
/// estimates agree to [`QUADRATURE_RTOL`].
pub fn expected_energy_at_amplitude(
    model: &EnergyModel,
    amplitude: f64,
    sigma2: f64,
) -> Result<f64> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be nonnegative, got {amplitude}"
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    model.validate()?;
    let mut previous = tensor_expectation(cached_rule(0), model, amplitude, sigma2);
    let mut history = vec![previous];
    for slot in 1..RULE_ORDERS.len() {
        let current = tensor_expectation(cached_rule(slot), model, amplitude, sigma2);
        history.push(current);
        if (current - previous).abs() <= QUADRATURE_RTOL * current.abs().max(f64::MIN_POSITIVE) {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::Numeric(format!(
        "quadrature for E[g(A+W)] did not settle (A = {amplitude}, sigma2 = {sigma2}, estimates at {RULE_ORDERS:?} nodes: {history:?})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    const QUAD: EnergyModel = EnergyModel::Quadratic { kappa: 1.0 };
    const SAT: EnergyModel = EnergyModel::Saturating {
        m_max: 20.0,
        a: 1500.0,
        b: 0.0022,
    };

    #[test]
    fn quadratic_examples() {
        assert_eq!(eval_energy(&QUAD, Complex64::new(3.0, 4.0)), 25.0);
        assert_eq!(eval_energy(&QUAD, Complex64::new(0.0, 0.0)), 0.0);
        assert_eq!(eval_energy(&SAT, Complex64::new(0.0, 0.0)), 0.0);
    }

    #[test]
    fn saturating_midpoint() {
        let (m, a, b): (f64, f64, f64) = (20.0, 1500.0, 0.0022);
        let omega = 1.0 / (1.0 + (a * b).exp());
        let z = Complex64::new(b.sqrt(), 0.0);
        assert_relative_eq!(
            eval_energy(&SAT, z),
            m * (0.5 - omega) / (1.0 - omega),
            max_relative = 1e-12
        );
        assert!(eval_energy(&SAT, Complex64::new(10.0, 0.0)) <= 20.0);
    }

    #[test]
    fn average_energy() {
        let z = [Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)];
        assert_eq!(avg_energy(&QUAD, &z).unwrap(), 12.5);
        let c = Complex64::new(0.03, 0.02);
        assert_relative_eq!(
            avg_energy(&SAT, &[c; 7]).unwrap(),
            eval_energy(&SAT, c),
            max_relative = 1e-14
        );
        assert!(avg_energy(&QUAD, &[]).is_err());
        let mut z: Vec<Complex64> = (0..9).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let before = avg_energy(&QUAD, &z).unwrap();
        z.reverse();
        z.swap(1, 5);
        assert_relative_eq!(before, avg_energy(&QUAD, &z).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn hermite_rule_moments() {
        for order in [1, 2, 5, 64, 512] {
            let rule = HermiteRule::new(order).unwrap();
            assert_relative_eq!(rule.integrate(|_| 1.0), PI.sqrt(), max_relative = 1e-12);
            if order >= 2 {
                assert_relative_eq!(
                    rule.integrate(|t| t * t),
                    PI.sqrt() / 2.0,
                    max_relative = 1e-12
                );
            }
        }
        let rule = HermiteRule::new(64).unwrap();
        assert_relative_eq!(
            rule.integrate(|t| t.cos()),
            PI.sqrt() * (-0.25f64).exp(),
            max_relative = 1e-13
        );
        assert!(HermiteRule::new(0).is_err());
    }

    #[test]
    fn quadratic_expectation_is_exact() {
        assert_relative_eq!(
            expected_energy_at_amplitude(&QUAD, 3.0, 1.0).unwrap(),
            10.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            expected_energy_at_amplitude(&QUAD, 0.0, 2.0).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        let scaled = EnergyModel::Quadratic { kappa: 2.5 };
        assert_relative_eq!(
            expected_energy_at_amplitude(&scaled, 4.0, 0.25).unwrap(),
            2.5 * 16.25,
            max_relative = 1e-12
        );
    }

    #[test]
    fn saturating_expectation_bounded() {
        for a in [0.0, 0.02, 0.04, 0.06, 1.0] {
            let e = expected_energy_at_amplitude(&SAT, a, 5e-4).unwrap();
            assert!((0.0..=20.0).contains(&e), "E = {e} at A = {a}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(expected_energy_at_amplitude(&QUAD, -1.0, 1.0).is_err());
        assert!(expected_energy_at_amplitude(&QUAD, 1.0, 0.0).is_err());
        let bad = EnergyModel::Quadratic { kappa: -1.0 };
        assert!(expected_energy_at_amplitude(&bad, 1.0, 1.0).is_err());
    }

    fn monte_carlo(
        model: &EnergyModel,
        amplitude: f64,
        sigma2: f64,
        samples: usize,
        seed: u64,
    ) -> (f64, f64) {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).unwrap();
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..samples {
            let z = Complex64::new(amplitude + normal.sample(&mut rng), normal.sample(&mut rng));
            let g = eval_energy(model, z);
            sum += g;
            sum2 += g * g;
        }
        let mean = sum / samples as f64;
        let var = sum2 / samples as f64 - mean * mean;
        (mean, (var / samples as f64).sqrt())
    }

    #[test]
    fn quadrature_agrees_with_monte_carlo() {
        for (model, amplitude, sigma2) in [
            (QUAD, 3.0, 1.0),
            (QUAD, 0.5, 4.0),
            (SAT, 0.04, 5e-4),
            (SAT, 0.05, 2e-3),
        ] {
            let exact = expected_energy_at_amplitude(&model, amplitude, sigma2).unwrap();
            let (mean, se) = monte_carlo(&model, amplitude, sigma2, 1_000_000, 17);
            assert!(
                (mean - exact).abs() <= 4.0 * se,
                "{model:?} A={amplitude}: quadrature {exact} vs MC {mean} ± {se}"
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn circular_symmetry(r in 0.0f64..0.2, phase in 0.0f64..(2.0 * PI), kappa in 0.1f64..10.0) {
                let z = Complex64::from_polar(r, phase);
                let on_axis = Complex64::new(r, 0.0);
                for model in [EnergyModel::Quadratic { kappa }, SAT] {
                    let (a, b) = (eval_energy(&model, z), eval_energy(&model, on_axis));
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
                }
            }

            #[test]
            fn expectation_nondecreasing_in_amplitude(a in 0.0f64..0.08, da in 0.0f64..0.02) {
                for (model, sigma2) in [(SAT, 5e-4), (QUAD, 1e-3)] {
                    let lo = expected_energy_at_amplitude(&model, a, sigma2).unwrap();
                    let hi = expected_energy_at_amplitude(&model, a + da, sigma2).unwrap();
                    prop_assert!(hi >= lo * (1.0 - 1e-9), "{model:?}: {lo} > {hi}");
                }
            }
        }
    }
}
