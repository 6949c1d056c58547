//! Optimality verdicts, Φ_p criteria and efficiency factors.

use std::fmt;

use nalgebra::DMatrix;

use crate::designs::{classify, Design};
use crate::error::{Error, Result};
use crate::information::{info_total_exact, EffectModel, InfoMatrix};
use crate::matrixkit::{eig_sym, SymMatrix, RANK_CUTOFF};
use crate::rational::{int, to_f64, Rational};
use crate::sequences::{f_tilde_value, optimal_composition, upper_bound_trace, M1Composition, Composition};

/// Upper limit on blocks emitted by [`symmetric_design`].
pub const MAX_SYMMETRIC_BLOCKS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub p: f64,
    pub value: f64,
    pub alias: Option<&'static str>,
    /// Fewer than `t − 1` positive eigenvalues on the contrast space.
    pub singular: bool,
}

/// Orthonormal basis of the contrasts (columns orthogonal to `1_t`),
/// Helmert-style.
fn contrast_basis(t: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(t, t.saturating_sub(1));
    for c in 0..t.saturating_sub(1) {
        let n = (c + 1) as f64;
        let norm = (n * (n + 1.0)).sqrt();
        for r in 0..=c {
            h[(r, c)] = 1.0 / norm;
        }
        h[(c + 1, c)] = -n / norm;
    }
    h
}

/// Eigenvalues of `C` restricted to the contrast space, ascending.
pub fn contrast_eigenvalues(c: &SymMatrix) -> Vec<f64> {
    let h = contrast_basis(c.order());
    let reduced = h.transpose() * c.to_f64() * &h;
    eig_sym(&SymMatrix::Float(reduced))
}

/// `Φ_p(C) = ((t−1)⁻¹ Σ λᵢ^{−p})^{1/p}` over the contrast eigenvalues, with
/// the geometric-mean limit at `p = 0` and `1/λ_min` at `p = ∞`.
pub fn phi_p(c: &SymMatrix, p: f64) -> Result<CriterionResult> {
    if p.is_nan() || p < -1.0 {
        return Err(Error::Domain(format!("p must lie in [-1, inf], got {p}")));
    }
    if c.order() < 2 {
        return Err(Error::Domain("criteria need at least two treatments".into()));
    }
    let mut eig = contrast_eigenvalues(c);
    let max = eig.iter().copied().fold(0.0, f64::max);
    let singular = max <= 0.0 || eig.iter().any(|&l| l <= RANK_CUTOFF * max);
    for l in &mut eig {
        if *l <= RANK_CUTOFF * max {
            *l = 0.0;
        }
    }
    let n = eig.len() as f64;
    let value = if p == f64::INFINITY {
        1.0 / eig[0]
    } else if p == 0.0 {
        (-eig.iter().map(|l| l.ln()).sum::<f64>() / n).exp()
    } else {
        (eig.iter().map(|l| l.powf(-p)).sum::<f64>() / n).powf(1.0 / p)
    };
    let alias = if p == 0.0 {
        Some("D")
    } else if p == 1.0 {
        Some("A")
    } else if p == f64::INFINITY {
        Some("E")
    } else if p == -1.0 {
        Some("trace")
    } else {
        None
    };
    Ok(CriterionResult { p, value, alias, singular })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompetingClass {
    /// Designs with no treatment neighbor of itself (at distance 1, and also
    /// at distance 2 under M2).
    NoSelfNeighbor,
    Unrestricted,
}

impl fmt::Display for CompetingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompetingClass::NoSelfNeighbor => "no-self-neighbor",
            CompetingClass::Unrestricted => "unrestricted",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalityVerdict {
    pub class: CompetingClass,
    pub model: EffectModel,
    pub completely_symmetric: bool,
    pub trace: Rational,
    pub trace_bound: Rational,
    pub conclusive: bool,
    /// The bound is not known to be attainable (two-sided, unrestricted).
    pub bound_based: bool,
}

/// Largest trace over designs without self neighbors: `b(k−2)/2` under M1,
/// `b(k−3)/3` under M2.
pub fn restricted_trace_bound(b: usize, k: usize, m: EffectModel) -> Rational {
    let (b, k) = (b as i64, k as i64);
    match m {
        EffectModel::M1 => int(b * (k - 2)) / int(2),
        EffectModel::M2 => int(b * (k - 3)) / int(3),
    }
}

/// Complete symmetry plus maximal trace over the competing class.
pub fn kiefer_verdict(d: &Design, m: EffectModel, class: CompetingClass) -> Result<OptimalityVerdict> {
    let info = info_total_exact(d, m)?;
    let trace_bound = match class {
        CompetingClass::NoSelfNeighbor => {
            let report = classify(d);
            let violates = match m {
                EffectModel::M1 => !report.no_self_neighbor_d1,
                EffectModel::M2 => !(report.no_self_neighbor_d1 && report.no_self_neighbor_d2),
            };
            if violates {
                return Err(Error::ClassViolation(format!(
                    "design has a treatment neighbor of itself; not in the {class} class under {m}"
                )));
            }
            restricted_trace_bound(d.b(), d.k(), m)
        }
        CompetingClass::Unrestricted => upper_bound_trace(d.b(), d.k(), d.t(), m)?,
    };
    let completely_symmetric = info.complete_symmetry().is_some();
    let trace = info.trace();
    let conclusive = completely_symmetric && trace == trace_bound;
    Ok(OptimalityVerdict {
        class,
        model: m,
        completely_symmetric,
        trace,
        trace_bound,
        conclusive,
        bound_based: class == CompetingClass::Unrestricted && m == EffectModel::M2,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Efficiency {
    pub exact: Rational,
    /// Two decimals, half away from zero.
    pub rounded: String,
    /// `(k−2)/(2(k−√(2k)))`, M1 only.
    pub approximation: Option<f64>,
}

impl Efficiency {
    fn from_exact(exact: Rational, approximation: Option<f64>) -> Self {
        let rounded = crate::rational::format_decimal(&exact, 2);
        Efficiency { exact, rounded, approximation }
    }
}

/// Limit of the large-`k` approximation.
pub const APPROXIMATION_LIMIT: f64 = 0.5;

pub fn approximate_efficiency(k: usize) -> f64 {
    let k = k as f64;
    (k - 2.0) / (2.0 * (k - (2.0 * k).sqrt()))
}

/// `tr(C_d)` relative to the best continuous design of the same size.
pub fn efficiency(d: &Design, m: EffectModel) -> Result<Efficiency> {
    let trace = info_total_exact(d, m)?.trace();
    let bound = upper_bound_trace(d.b(), d.k(), d.t(), m)?;
    let approximation = (m == EffectModel::M1).then(|| approximate_efficiency(d.k()));
    Ok(Efficiency::from_exact(trace / bound, approximation))
}

/// Efficiency of a CNBD under M1 with enough treatments: `(k−2) / (2 f(v*))`.
pub fn cnbd_efficiency(k: usize) -> Result<Efficiency> {
    let best = optimal_composition(k, k, EffectModel::M1)?.value;
    Ok(Efficiency::from_exact(int(k as i64 - 2) / (int(2) * best), Some(approximate_efficiency(k))))
}

/// Efficiency of a CNBD2 under M2 with enough treatments:
/// `((k−3)/3) / max f̃`.
pub fn cnbd2_efficiency(k: usize) -> Result<Efficiency> {
    let best = optimal_composition(k, k, EffectModel::M2)?.value;
    let binary = f_tilde_value(k, k, 0)?;
    Ok(Efficiency::from_exact(binary / best, None))
}

/// Optimal M1 compositions for `k = 3..=16`, one row per maximizer.
pub fn table1() -> Vec<(usize, M1Composition)> {
    (3..=16)
        .flat_map(|k| {
            let comp = optimal_composition(k, k, EffectModel::M1).expect("k >= 3");
            comp.choices
                .into_iter()
                .filter_map(move |c| match c {
                    Composition::M1(x) => Some((k, x)),
                    Composition::M2(_) => None,
                })
        })
        .collect()
}

pub fn table2() -> Vec<(usize, Efficiency)> {
    (3..=15).map(|k| (k, cnbd_efficiency(k).expect("k >= 3"))).collect()
}

pub fn table3() -> Vec<(usize, Efficiency)> {
    (4..=14).map(|k| (k, cnbd2_efficiency(k).expect("k >= 4"))).collect()
}

/// A design that uses every relabeling of one optimal sequence exactly
/// once: `t!/(t − v)!` blocks for a sequence on `v` treatments.
///
/// Under M2 the result is not known to be optimal; callers should report
/// its verdict rather than rely on it.
pub fn symmetric_design(k: usize, t: usize, m: EffectModel) -> Result<Design> {
    let comp = optimal_composition(k, k.max(t).max(2), m)?;
    let choice = comp
        .choices
        .iter()
        .min_by_key(|c| c.treatments())
        .expect("at least one maximizer");
    let v = choice.treatments();
    if t < v {
        return Err(Error::Domain(format!("t = {t} is smaller than the {v} treatments of an optimal sequence")));
    }
    let mut blocks = 1usize;
    for i in 0..v {
        blocks = blocks.saturating_mul(t - i);
        if blocks > MAX_SYMMETRIC_BLOCKS {
            return Err(Error::TooLarge { blocks, limit: MAX_SYMMETRIC_BLOCKS });
        }
    }
    let base = choice.representative();
    let mut layout = Vec::with_capacity(blocks);
    let mut chosen = Vec::with_capacity(v);
    let mut used = vec![false; t + 1];
    injections(t, v, &mut chosen, &mut used, &mut |labels| {
        layout.push(base.iter().map(|&x| labels[x - 1]).collect());
    });
    Design::new(t, layout)
}

fn injections(t: usize, v: usize, chosen: &mut Vec<usize>, used: &mut [bool], emit: &mut dyn FnMut(&[usize])) {
    if chosen.len() == v {
        emit(chosen);
        return;
    }
    for label in 1..=t {
        if used[label] {
            continue;
        }
        used[label] = true;
        chosen.push(label);
        injections(t, v, chosen, used, emit);
        chosen.pop();
        used[label] = false;
    }
}

/// Average variance factor `h′C⁺h` over all elementary contrasts `eᵢ − eⱼ`.
pub fn mean_pairwise_variance(info: &InfoMatrix) -> f64 {
    let g = info.matrix.pinv();
    let t = info.order();
    let mut total = Rational::from_integer(0.into());
    let mut count = 0i64;
    for i in 0..t {
        for j in i + 1..t {
            total += &g[(i, i)] + &g[(j, j)] - &g[(i, j)] - &g[(j, i)];
            count += 1;
        }
    }
    to_f64(&(total / int(count.max(1))))
}
