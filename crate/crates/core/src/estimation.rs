//! Least-squares estimation of total-effect contrasts on simulated data.
//!
//! Responses follow `Y = Bβ + Tτ + Lλ (+ Rρ) + ε` with iid Gaussian errors.
//! Only contrasts of total effects are identified; the estimator eliminates
//! the blocks and the joint-effect directions orthogonal to `K`, so its
//! variance is `σ² h′C⁺h` with `C` the exact total-effect information.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::information::{info_total_exact, EffectModel};
use crate::matrixkit::pinv_f64;
use crate::rational::{int, to_f64, Rational};

/// Minimum replicate count accepted by [`monte_carlo_check`].
pub const MIN_REPLICATES: usize = 1000;
const ESTIMABILITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Right-neighbor effects, M2 only.
    pub rho: Option<Vec<f64>>,
    pub sigma: f64,
    pub seed: u64,
}

impl ModelParams {
    /// Effects drawn uniformly from `[-1, 1]` using `seed`; noise uses the
    /// same seed on separate streams.
    pub fn random(d: &Design, m: EffectModel, sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let beta = draw(d.b());
        let tau = draw(d.t());
        let lambda = draw(d.t());
        let rho = (m == EffectModel::M2).then(|| draw(d.t()));
        ModelParams { beta, tau, lambda, rho, sigma, seed }
    }

    pub fn validate(&self, d: &Design, m: EffectModel) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if self.beta.len() != d.b() {
            return bad("beta length must equal b");
        }
        if self.tau.len() != d.t() || self.lambda.len() != d.t() {
            return bad("tau and lambda lengths must equal t");
        }
        match (m, &self.rho) {
            (EffectModel::M2, Some(rho)) if rho.len() == d.t() => {}
            (EffectModel::M2, _) => return bad("model m2 needs rho of length t"),
            (EffectModel::M1, Some(_)) => return bad("model m1 takes no rho"),
            (EffectModel::M1, None) => {}
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and >= 0");
        }
        Ok(())
    }

    /// Parameter vector in the column order of [`model_matrix`].
    pub fn theta(&self) -> DVector<f64> {
        let mut all = self.beta.clone();
        all.extend(&self.tau);
        all.extend(&self.lambda);
        if let Some(rho) = &self.rho {
            all.extend(rho);
        }
        DVector::from_vec(all)
    }

    /// Total effects `τ + λ (+ ρ)`.
    pub fn total_effects(&self) -> Vec<f64> {
        (0..self.tau.len())
            .map(|i| self.tau[i] + self.lambda[i] + self.rho.as_ref().map_or(0.0, |r| r[i]))
            .collect()
    }
}

/// `[B | T | L]` under M1, `[B | T | L | R]` under M2; one row per inner plot.
pub fn model_matrix(d: &Design, m: EffectModel) -> DMatrix<f64> {
    let (t, b, k) = (d.t(), d.b(), d.k());
    let cols = b + m.stack() * t;
    let mut x = DMatrix::zeros(b * k, cols);
    for u in 0..b {
        for j in 0..k {
            let row = u * k + j;
            x[(row, u)] = 1.0;
            x[(row, b + d.blocks()[u][j] - 1)] = 1.0;
            x[(row, b + t + d.left_neighbor(u, j) - 1)] = 1.0;
            if m == EffectModel::M2 {
                x[(row, b + 2 * t + d.right_neighbor(u, j) - 1)] = 1.0;
            }
        }
    }
    x
}

/// `Xθ + ε`, deterministic for a given seed.
pub fn simulate_responses(d: &Design, m: EffectModel, params: &ModelParams) -> Result<DVector<f64>> {
    simulate_on_stream(d, m, params, 0)
}

/// Same as [`simulate_responses`] but drawing noise from substream `stream`.
pub fn simulate_on_stream(d: &Design, m: EffectModel, params: &ModelParams, stream: u64) -> Result<DVector<f64>> {
    params.validate(d, m)?;
    let mean = model_matrix(d, m) * params.theta();
    Ok(add_noise(mean, params.sigma, params.seed, stream))
}

fn add_noise(mut y: DVector<f64>, sigma: f64, seed: u64, stream: u64) -> DVector<f64> {
    if sigma == 0.0 {
        return y;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // stream 0 is reserved for drawing effects in `ModelParams::random`
    rng.set_stream(stream + 1);
    for v in y.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    y
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContrastEstimate {
    pub h: Vec<f64>,
    pub estimate: f64,
    /// `h′C⁺h`; multiply by `σ²` for the variance.
    pub variance_factor: f64,
    pub estimable: bool,
}

impl ContrastEstimate {
    pub fn theoretical_variance(&self, sigma: f64) -> f64 {
        sigma * sigma * self.variance_factor
    }
}

/// Linear estimator `g′Y` of `h′φ` (or `h′ψ`) for one design and contrast.
#[derive(Clone, Debug)]
pub struct ContrastEstimator {
    weights: DVector<f64>,
    pub h: Vec<f64>,
    pub estimable: bool,
    pub variance_factor: f64,
}

impl ContrastEstimator {
    pub fn new(d: &Design, m: EffectModel, h: &[f64]) -> Result<Self> {
        let t = d.t();
        if h.len() != t {
            return Err(Error::InvalidParams(format!("contrast has {} entries, expected t={t}", h.len())));
        }
        let sum: f64 = h.iter().sum();
        let scale = h.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        if sum.abs() > 1e-12 * scale {
            return Err(Error::NotContrast(format!("{sum}")));
        }

        // A block-centered: pr⊥(B)A
        let x = model_matrix(d, m);
        let a = x.columns(d.b(), m.stack() * t).into_owned();
        let mut z = a.clone();
        let k = d.k();
        for u in 0..d.b() {
            for c in 0..z.ncols() {
                let mean: f64 = (0..k).map(|j| a[(u * k + j, c)]).sum::<f64>() / k as f64;
                for j in 0..k {
                    z[(u * k + j, c)] -= mean;
                }
            }
        }
        let c_alpha = z.transpose() * &z;
        let c_pinv = pinv_f64(&c_alpha);
        // w = K h
        let w = DVector::from_fn(m.stack() * t, |i, _| h[i % t]);
        let residual = &c_alpha * (&c_pinv * &w) - &w;
        let estimable = residual.amax() <= ESTIMABILITY_TOL * w.amax().max(1.0);

        let info = info_total_exact(d, m)?;
        let g = info.matrix.pinv();
        let h_rat: Vec<Rational> = h.iter().map(|&x| float_to_rational(x)).collect();
        let mut quad = Rational::from_integer(0.into());
        for i in 0..t {
            for j in 0..t {
                quad += &h_rat[i] * &g[(i, j)] * &h_rat[j];
            }
        }
        let variance_factor = if estimable { to_f64(&quad) } else { f64::INFINITY };
        let weights = &z * (&c_pinv * &w);
        Ok(ContrastEstimator { weights, h: h.to_vec(), estimable, variance_factor })
    }

    pub fn estimate(&self, y: &DVector<f64>) -> f64 {
        if self.estimable {
            self.weights.dot(y)
        } else {
            f64::NAN
        }
    }

    /// `g′g`: the estimator's own variance factor, computed on the float path.
    pub fn weight_norm_squared(&self) -> f64 {
        self.weights.norm_squared()
    }
}

fn float_to_rational(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(|| int(0))
}

pub fn estimate_contrast(d: &Design, m: EffectModel, y: &DVector<f64>, h: &[f64]) -> Result<ContrastEstimate> {
    if y.len() != d.b() * d.k() {
        return Err(Error::InvalidParams(format!("expected {} responses, got {}", d.b() * d.k(), y.len())));
    }
    let est = ContrastEstimator::new(d, m, h)?;
    Ok(ContrastEstimate {
        h: h.to_vec(),
        estimate: est.estimate(y),
        variance_factor: est.variance_factor,
        estimable: est.estimable,
    })
}

/// Minimum-norm total effects, centered to sum zero. Only their contrasts
/// are identified.
pub fn estimate_total_effects(d: &Design, m: EffectModel, y: &DVector<f64>) -> Result<Vec<f64>> {
    let t = d.t();
    let mut out = Vec::with_capacity(t);
    for i in 0..t {
        // e_i − mean(e)
        let h: Vec<f64> = (0..t).map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / t as f64).collect();
        let est = ContrastEstimator::new(d, m, &h)?;
        out.push(if est.estimable { est.weights.dot(y) } else { f64::NAN });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloReport {
    pub replicates: usize,
    pub mean_estimate: f64,
    pub true_value: f64,
    pub empirical_variance: f64,
    pub theoretical_variance: f64,
    /// `empirical / theoretical`; 0 when both are 0.
    pub ratio: f64,
}

/// Two-pass sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Replicates the experiment `replicates` times with fixed effects and
/// fresh noise, and compares the spread of the contrast estimates with
/// `σ² h′C⁺h`.
pub fn monte_carlo_check(
    d: &Design,
    m: EffectModel,
    h: &[f64],
    sigma: f64,
    replicates: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if replicates < MIN_REPLICATES {
        return Err(Error::InvalidParams(format!("need at least {MIN_REPLICATES} replicates, got {replicates}")));
    }
    let estimator = ContrastEstimator::new(d, m, h)?;
    if !estimator.estimable {
        return Err(Error::NotEstimable);
    }
    let params = ModelParams::random(d, m, sigma, seed);
    params.validate(d, m)?;
    let mean = model_matrix(d, m) * params.theta();
    let estimates: Vec<f64> = (0..replicates as u64)
        .map(|r| estimator.estimate(&add_noise(mean.clone(), sigma, seed, r)))
        .collect();
    let empirical = sample_variance(&estimates);
    let theoretical = sigma * sigma * estimator.variance_factor;
    let ratio = if theoretical > 0.0 { empirical / theoretical } else { 0.0 };
    let phi = params.total_effects();
    Ok(MonteCarloReport {
        replicates,
        mean_estimate: estimates.iter().sum::<f64>() / replicates as f64,
        true_value: h.iter().zip(&phi).map(|(a, b)| a * b).sum(),
        empirical_variance: empirical,
        theoretical_variance: theoretical,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::parse_design;

    fn first() -> Design {
        parse_design(include_str!("../../../fixtures/cnbd2_t5.design")).unwrap()
    }

    fn second() -> Design {
        parse_design(include_str!("../../../fixtures/cnbd2_t4.design")).unwrap()
    }

    fn gram_rank(x: &DMatrix<f64>) -> usize {
        let ev = crate::matrixkit::eig_sym(&crate::matrixkit::SymMatrix::Float(x.transpose() * x));
        let max = ev.iter().copied().fold(0.0, f64::max);
        ev.iter().filter(|&&l| l > 1e-10 * max).count()
    }

    #[test]
    fn model_matrix_shapes() {
        let x = model_matrix(&second(), EffectModel::M1);
        assert_eq!((x.nrows(), x.ncols()), (12, 12));
        for r in 0..12 {
            assert_eq!(x.row(r).sum(), 3.0);
        }
        let constant = Design::new(1, vec![vec![1, 1, 1]]).unwrap();
        let xc = model_matrix(&constant, EffectModel::M1);
        assert_eq!((xc.nrows(), xc.ncols()), (3, 3));
        assert_eq!(gram_rank(&xc), 1);
    }

    #[test]
    fn model_matrix_rank_m2() {
        let d = first();
        let x = model_matrix(&d, EffectModel::M2);
        assert_eq!((x.nrows(), x.ncols()), (20, 19));
        // blocks plus the treatment part after eliminating blocks
        let joint = crate::information::info_joint(&d, EffectModel::M2);
        assert_eq!(gram_rank(&x), 4 + joint.info.rank());
    }

    #[test]
    fn noiseless_and_deterministic() {
        let d = first();
        let p = ModelParams::random(&d, EffectModel::M1, 0.0, 7);
        let y = simulate_responses(&d, EffectModel::M1, &p).unwrap();
        assert_eq!(y, model_matrix(&d, EffectModel::M1) * p.theta());
        let noisy = ModelParams { sigma: 1.0, ..p };
        assert_eq!(
            simulate_responses(&d, EffectModel::M1, &noisy).unwrap(),
            simulate_responses(&d, EffectModel::M1, &noisy).unwrap()
        );
    }

    #[test]
    fn noise_has_unit_variance() {
        let d = Design::new(2, vec![vec![1, 2]]).unwrap();
        let p = ModelParams { beta: vec![0.0], tau: vec![0.0; 2], lambda: vec![0.0; 2], rho: None, sigma: 1.0, seed: 3 };
        let draws: Vec<f64> = (0..20000).map(|s| simulate_on_stream(&d, EffectModel::M1, &p, s).unwrap()[0]).collect();
        let v = sample_variance(&draws);
        assert!((v - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn noiseless_recovery_on_fixture() {
        let d = first();
        for m in [EffectModel::M1, EffectModel::M2] {
            let p = ModelParams::random(&d, m, 0.0, 11);
            let y = simulate_responses(&d, m, &p).unwrap();
            let h = [1.0, -1.0, 0.0, 0.5, -0.5];
            let e = estimate_contrast(&d, m, &y, &h).unwrap();
            let truth: f64 = h.iter().zip(p.total_effects()).map(|(a, b)| a * b).sum();
            assert!(e.estimable);
            assert!((e.estimate - truth).abs() < 1e-9);
        }
    }

    #[test]
    fn variance_factor_of_elementary_contrast() {
        let d = first();
        let y = DVector::zeros(20);
        let h = [1.0, -1.0, 0.0, 0.0, 0.0];
        let m1 = estimate_contrast(&d, EffectModel::M1, &y, &h).unwrap();
        assert!((m1.variance_factor - 4.0 / 3.0).abs() < 1e-12);
        assert!((m1.theoretical_variance(2.0) - 16.0 / 3.0).abs() < 1e-12);
        let m2 = estimate_contrast(&d, EffectModel::M2, &y, &h).unwrap();
        assert!((m2.variance_factor - 3.0).abs() < 1e-12);
        // the float estimator agrees with the exact information
        let est = ContrastEstimator::new(&d, EffectModel::M1, &h).unwrap();
        assert!((est.weight_norm_squared() - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn missing_treatment_is_not_estimable() {
        let d = Design::new(3, vec![vec![1, 2, 1, 2], vec![2, 1, 2, 1]]).unwrap();
        let y = DVector::zeros(8);
        let e = estimate_contrast(&d, EffectModel::M1, &y, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(!e.estimable);
        assert!(matches!(monte_carlo_check(&d, EffectModel::M1, &[-1.0, 0.0, 1.0], 1.0, 1000, 1), Err(Error::NotEstimable)));
    }

    #[test]
    fn rejects_non_contrast() {
        let d = first();
        let y = DVector::zeros(20);
        assert!(matches!(estimate_contrast(&d, EffectModel::M1, &y, &[1.0, 0.0, 0.0, 0.0, 0.0]), Err(Error::NotContrast(_))));
    }

    #[test]
    fn zero_sigma_monte_carlo() {
        let r = monte_carlo_check(&first(), EffectModel::M1, &[1.0, -1.0, 0.0, 0.0, 0.0], 0.0, 1000, 5).unwrap();
        assert_eq!(r.empirical_variance, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!((r.mean_estimate - r.true_value).abs() < 1e-9);
        assert!(monte_carlo_check(&first(), EffectModel::M1, &[1.0, -1.0, 0.0, 0.0, 0.0], 1.0, 999, 5).is_err());
    }

    #[test]
    fn params_validation() {
        let d = first();
        let mut p = ModelParams::random(&d, EffectModel::M1, 1.0, 1);
        assert!(p.validate(&d, EffectModel::M2).is_err());
        p.sigma = -1.0;
        assert!(p.validate(&d, EffectModel::M1).is_err());
    }
}
