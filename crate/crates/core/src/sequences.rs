//! Optimal block sequences for continuous designs.
//!
//! A block is judged by the trace of its bound, `c(s)` under M1 and `c̃(s)`
//! under M2, which depends only on the relabeling class of its sequence.
//! The best classes are described by how many treatments appear and how
//! their occurrences split; `f` and `f̃` give the attained value for each
//! such split. [`brute_force_best`] checks those characterizations by
//! enumerating every class.

use num_integer::Roots;

use crate::designs::BlockProfile;
use crate::error::{Error, Result};
use crate::information::{c_values, scaled_c_value, EffectModel};
use crate::rational::{int, Rational};

/// Largest block length the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_K: usize = 12;

/// `2k · f(v)`, an integer.
fn f_scaled(k: i64, v: i64) -> i64 {
    let q = k / v;
    2 * k * (k - 1) - k * v - 2 * (2 * k - v) * q + 2 * v * q * q
}

/// `9k · f̃(v1, v2)` for `v2 ≥ 1`, an integer.
fn f_tilde_scaled(k: i64, v1: i64, v2: i64) -> i64 {
    let q = (k - v1) / v2;
    9 * k * (k - 1) - 6 * k * v1 - 8 * k * v2 - 9 * (2 * k - 2 * v1 - v2) * q + 9 * v2 * q * q
}

/// `f(v) = −1 + k − v/2 − (2 − v/k)⌊k/v⌋ + (v/k)⌊k/v⌋²`.
pub fn f_value(k: usize, v: usize) -> Result<Rational> {
    if k < 3 || v < 1 || v > k {
        return Err(Error::Domain(format!("f(v) needs k >= 3 and 1 <= v <= k (got k={k}, v={v})")));
    }
    Ok(int(f_scaled(k as i64, v as i64)) / int(2 * k as i64))
}

/// `f̃(v1, v2)`; the all-binary point `(k, 0)` takes the value `(k − 3)/3`.
pub fn f_tilde_value(k: usize, v1: usize, v2: usize) -> Result<Rational> {
    if k < 4 {
        return Err(Error::Domain(format!("f~ needs k >= 4 (got k={k})")));
    }
    if v2 == 0 {
        return if v1 == k {
            Ok(int(k as i64 - 3) / int(3))
        } else {
            Err(Error::Domain(format!("f~({v1}, 0) is only defined for v1 = k = {k}")))
        };
    }
    if v1 + 2 * v2 > k {
        return Err(Error::Domain(format!("f~({v1}, {v2}) needs v1 + 2 v2 <= k = {k}")));
    }
    Ok(int(f_tilde_scaled(k as i64, v1 as i64, v2 as i64)) / int(9 * k as i64))
}

/// Composition of an optimal M1 sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M1Composition {
    pub v_star: usize,
    /// Treatments occurring `n_minus` times.
    pub v_minus: usize,
    /// Treatments occurring `n_plus` times.
    pub v_plus: usize,
    pub n_minus: usize,
    pub n_plus: usize,
}

impl M1Composition {
    fn new(k: usize, v: usize) -> Self {
        let q = k / v;
        M1Composition { v_star: v, v_minus: v * (q + 1) - k, v_plus: k - v * q, n_minus: q, n_plus: q + 1 }
    }
}

/// Composition of an optimal M2 sequence: `v1` singletons and `v2`
/// treatments in runs of length at least two.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct M2Composition {
    pub v1: usize,
    pub v2: usize,
    /// Run lengths of the repeated treatments, ascending.
    pub runs: Vec<usize>,
}

impl M2Composition {
    fn new(k: usize, v1: usize, v2: usize) -> Self {
        if v2 == 0 {
            return M2Composition { v1, v2, runs: Vec::new() };
        }
        let rest = k - v1;
        let q = rest / v2;
        let longer = rest - v2 * q;
        let mut runs = vec![q; v2 - longer];
        runs.extend(std::iter::repeat_n(q + 1, longer));
        M2Composition { v1, v2, runs }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Composition {
    M1(M1Composition),
    M2(M2Composition),
}

impl Composition {
    /// Runs in ascending label order, shorter runs first.
    pub fn representative(&self) -> Vec<usize> {
        let runs: Vec<usize> = match self {
            Composition::M1(c) => std::iter::repeat_n(c.n_minus, c.v_minus)
                .chain(std::iter::repeat_n(c.n_plus, c.v_plus))
                .collect(),
            Composition::M2(c) => std::iter::repeat_n(1, c.v1).chain(c.runs.iter().copied()).collect(),
        };
        runs.iter()
            .enumerate()
            .flat_map(|(label, &len)| std::iter::repeat_n(label + 1, len))
            .collect()
    }

    /// Number of distinct treatments in the sequence.
    pub fn treatments(&self) -> usize {
        match self {
            Composition::M1(c) => c.v_star,
            Composition::M2(c) => c.v1 + c.v2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalComposition {
    pub model: EffectModel,
    pub k: usize,
    pub t: usize,
    /// Every maximizer, ordered by `v*` (M1) or `(v1, v2)` (M2).
    pub choices: Vec<Composition>,
    pub value: Rational,
    /// `k − √(2k)`.
    pub sqrt_bound: f64,
}

impl OptimalComposition {
    pub fn representative(&self) -> Vec<usize> {
        self.choices[0].representative()
    }

    pub fn m1_maximizers(&self) -> Vec<usize> {
        self.choices
            .iter()
            .filter_map(|c| match c {
                Composition::M1(x) => Some(x.v_star),
                Composition::M2(_) => None,
            })
            .collect()
    }
}

pub fn optimal_composition(k: usize, t: usize, m: EffectModel) -> Result<OptimalComposition> {
    if t < 2 {
        return Err(Error::Domain(format!("optimal sequences need t >= 2 (got t={t})")));
    }
    let sqrt_bound = k as f64 - (2.0 * k as f64).sqrt();
    match m {
        EffectModel::M1 => {
            if k < 3 {
                return Err(Error::Domain(format!("model m1 needs k >= 3 (got k={k})")));
            }
            let kk = k as i64;
            let scored: Vec<(usize, i64)> = (2..=t.min(k)).map(|v| (v, f_scaled(kk, v as i64))).collect();
            let best = scored.iter().map(|&(_, s)| s).max().expect("non-empty range");
            let choices =
                scored.iter().filter(|&&(_, s)| s == best).map(|&(v, _)| Composition::M1(M1Composition::new(k, v))).collect();
            Ok(OptimalComposition { model: m, k, t, choices, value: int(best) / int(2 * kk), sqrt_bound })
        }
        EffectModel::M2 => {
            if k < 4 {
                return Err(Error::Domain(format!("model m2 needs k >= 4 (got k={k})")));
            }
            let kk = k as i64;
            // (v1, v2, 9k·f~)
            let mut scored: Vec<(usize, usize, i64)> = Vec::new();
            for v2 in 1..=k / 2 {
                for v1 in 0..=(k - 2 * v2) {
                    if v1 + v2 < 2 || v1 + v2 > t {
                        continue;
                    }
                    scored.push((v1, v2, f_tilde_scaled(kk, v1 as i64, v2 as i64)));
                }
            }
            if t >= k {
                scored.push((k, 0, 3 * kk * (kk - 3)));
            }
            scored.sort_by_key(|&(v1, v2, _)| (v1, v2));
            let best = scored.iter().map(|&(_, _, s)| s).max().expect("non-empty domain");
            let choices = scored
                .iter()
                .filter(|&&(_, _, s)| s == best)
                .map(|&(v1, v2, _)| Composition::M2(M2Composition::new(k, v1, v2)))
                .collect();
            Ok(OptimalComposition { model: m, k, t, choices, value: int(best) / int(9 * kk), sqrt_bound })
        }
    }
}

pub fn representative_sequence(c: &OptimalComposition) -> Vec<usize> {
    c.representative()
}

/// `b` times the best per-block trace.
pub fn upper_bound_trace(b: usize, k: usize, t: usize, m: EffectModel) -> Result<Rational> {
    Ok(int(b as i64) * optimal_composition(k, t, m)?.value)
}

/// `k / ⌊(1 + √(2k+1))/2⌋`, the location of the maximum of `f` on the reals.
pub fn maximizer_location(k: usize) -> Rational {
    let root = (2 * k + 1).sqrt();
    // ⌊(1 + √x)/2⌋ = ⌈⌊√x⌋/2⌉
    int(k as i64) / int(root.div_ceil(2) as i64)
}

/// Calls `visit` with every restricted growth string of length `k` using at
/// most `t` symbols (labels start at 1).
pub fn for_each_restricted_growth_string(k: usize, t: usize, mut visit: impl FnMut(&[usize])) {
    fn recurse(seq: &mut Vec<usize>, k: usize, t: usize, used: usize, visit: &mut dyn FnMut(&[usize])) {
        if seq.len() == k {
            visit(seq);
            return;
        }
        for label in 1..=(used + 1).min(t) {
            seq.push(label);
            recurse(seq, k, t, used.max(label), visit);
            seq.pop();
        }
    }
    if k == 0 || t == 0 {
        return;
    }
    let mut seq = Vec::with_capacity(k);
    recurse(&mut seq, k, t, 0, &mut visit);
}

/// Smallest canonical form over all rotations and reflections.
pub fn dihedral_class(sequence: &[usize]) -> Vec<usize> {
    let k = sequence.len();
    let mut best: Option<Vec<usize>> = None;
    for reflect in [false, true] {
        for shift in 0..k {
            let turned: Vec<usize> = (0..k)
                .map(|j| {
                    let idx = if reflect { (k + shift - j) % k } else { (shift + j) % k };
                    sequence[idx]
                })
                .collect();
            let canon = crate::designs::canonical_form(&turned);
            if best.as_ref().is_none_or(|b| canon < *b) {
                best = Some(canon);
            }
        }
    }
    best.unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteForceResult {
    pub max: Rational,
    /// Every maximizing restricted growth string, lexicographically sorted.
    pub argmax: Vec<Vec<usize>>,
    pub classes_visited: usize,
}

impl BruteForceResult {
    /// Maximizers collapsed to one representative per rotation/reflection class.
    pub fn dihedral_classes(&self) -> Vec<Vec<usize>> {
        let mut classes: Vec<Vec<usize>> = self.argmax.iter().map(|s| dihedral_class(s)).collect();
        classes.sort();
        classes.dedup();
        classes
    }
}

/// Exhaustive maximum of `c` (M1) or `c̃` (M2) over every relabeling class of
/// circular sequences of length `k` on at most `t` treatments.
pub fn brute_force_best(k: usize, t: usize, m: EffectModel) -> Result<BruteForceResult> {
    if k > BRUTE_FORCE_MAX_K {
        return Err(Error::Budget { k, max: BRUTE_FORCE_MAX_K });
    }
    if k == 0 || t == 0 {
        return Err(Error::Domain("brute force needs k >= 1 and t >= 1".into()));
    }
    let mut best: Option<i64> = None;
    let mut argmax: Vec<Vec<usize>> = Vec::new();
    let mut visited = 0usize;
    let mut counts = vec![0usize; k + 1];
    let mut denominator = 1;
    for_each_restricted_growth_string(k, t, |seq| {
        visited += 1;
        counts.iter_mut().for_each(|c| *c = 0);
        let (mut sum_m, mut sum_p) = (0, 0);
        for j in 0..k {
            let here = seq[j];
            counts[here] += 1;
            if seq[(j + 1) % k] == here {
                sum_m += 1;
            }
            if seq[(j + k - 1) % k] == seq[(j + 1) % k] {
                sum_p += 1;
            }
        }
        let sum_n2 = counts.iter().map(|c| c * c).sum();
        let (num, den) = scaled_c_value(k, sum_n2, sum_m, sum_p, m);
        denominator = den;
        match best {
            Some(b) if num < b => {}
            Some(b) if num == b => argmax.push(seq.to_vec()),
            _ => {
                best = Some(num);
                argmax.clear();
                argmax.push(seq.to_vec());
            }
        }
    });
    argmax.sort();
    let max = int(best.expect("at least one sequence")) / int(denominator);
    Ok(BruteForceResult { max, argmax, classes_visited: visited })
}

/// `c` or `c̃` of a raw sequence.
pub fn sequence_value(sequence: &[usize], m: EffectModel) -> Rational {
    let t = sequence.iter().copied().max().unwrap_or(1);
    c_values(&BlockProfile::from_sequence(sequence, t), m)
}
