//! Information matrices for joint and total effects.
//!
//! Joint effects are `α = (τ, λ)` under the one-sided model and
//! `α = (τ, λ, ρ)` under the two-sided one; total effects are `K′α` with
//! `K` a vertical stack of identities. Three routes to the total-effect
//! matrix live here:
//!
//! * the exact matrix, eliminating blocks and the directions of `α`
//!   orthogonal to `K` (a Schur complement inside the joint matrix);
//! * the upper bound `(K′K)⁻¹K′C[α]K(K′K)⁻¹`, also written out as the
//!   incidence-count formulas, whole-design or per block;
//! * closed forms for neighbor-balanced designs.
//!
//! All arithmetic is exact.

use std::fmt;

use num_traits::Zero;

use crate::designs::{BlockProfile, Design};
use crate::error::{Error, Result};
use crate::matrixkit::{complete_symmetry_exact, is_psd_exact, q_exact, RatMatrix, SymMatrix};
use crate::rational::{int, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EffectModel {
    /// Left-neighbor effects only; total effect `τ + λ`.
    M1,
    /// Left and right neighbor effects; total effect `τ + λ + ρ`.
    M2,
}

impl EffectModel {
    /// Number of `t`-blocks in `α`.
    pub fn stack(self) -> usize {
        match self {
            EffectModel::M1 => 2,
            EffectModel::M2 => 3,
        }
    }

    /// `K = 1_c ⊗ I_t`.
    pub fn k_matrix(self, t: usize) -> RatMatrix {
        let c = self.stack();
        RatMatrix::from_fn(c * t, t, |i, j| if i % t == j { int(1) } else { int(0) })
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectModel::M1 => "m1",
            EffectModel::M2 => "m2",
        }
    }
}

impl fmt::Display for EffectModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EffectModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(EffectModel::M1),
            "m2" => Ok(EffectModel::M2),
            other => Err(Error::Domain(format!("unknown model '{other}' (expected m1 or m2)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfoKind {
    Joint,
    TotalExact,
    TotalUpper,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfoMatrix {
    pub matrix: RatMatrix,
    pub kind: InfoKind,
    pub model: EffectModel,
    pub provenance: String,
}

impl InfoMatrix {
    fn new(matrix: RatMatrix, kind: InfoKind, model: EffectModel, provenance: impl Into<String>) -> Self {
        InfoMatrix { matrix, kind, model, provenance: provenance.into() }
    }

    pub fn order(&self) -> usize {
        self.matrix.rows()
    }

    pub fn trace(&self) -> Rational {
        self.matrix.trace()
    }

    pub fn rank(&self) -> usize {
        self.matrix.rank()
    }

    /// Null-space dimension beyond the constant vector (for total effects),
    /// i.e. contrasts that carry no information.
    pub fn extra_null_dimension(&self) -> usize {
        let n = self.order();
        let expected = if self.kind == InfoKind::Joint { n } else { n.saturating_sub(1) };
        expected.saturating_sub(self.rank())
    }

    pub fn annihilates_ones(&self) -> bool {
        self.matrix.row_sums().iter().all(Zero::is_zero)
    }

    /// `(a, b)` when the matrix is exactly `aI + bJ`.
    pub fn complete_symmetry(&self) -> Option<(Rational, Rational)> {
        let (flag, a, b) = complete_symmetry_exact(&self.matrix);
        flag.then_some((a, b))
    }

    pub fn as_sym(&self) -> SymMatrix {
        SymMatrix::Exact(self.matrix.clone())
    }
}

fn provenance(d: &Design) -> String {
    format!("t={} b={} k={}", d.t(), d.b(), d.k())
}

/// Joint information matrix together with its `t × t` sub-blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointInfo {
    pub info: InfoMatrix,
    t: usize,
}

impl JointInfo {
    /// Block `(r, c)`, with 0 = direct, 1 = left, 2 = right effects; e.g.
    /// `block(0, 1)` is `T′pr⊥(B)L`.
    pub fn block(&self, r: usize, c: usize) -> RatMatrix {
        self.info.matrix.submatrix(r * self.t, c * self.t, self.t, self.t)
    }
}

/// Incidence column index of plot `j` in block `i`, for effect group `g`.
fn effect_label(d: &Design, block: usize, j: usize, group: usize) -> usize {
    match group {
        0 => d.blocks()[block][j],
        1 => d.left_neighbor(block, j),
        _ => d.right_neighbor(block, j),
    }
}

/// `C[α] = A′ pr⊥(B) A`, accumulated in integers per block:
/// `A′A − k⁻¹ Σ_u s_u s_u′` with `s_u` the column sums of block `u`.
pub fn info_joint(d: &Design, m: EffectModel) -> JointInfo {
    let (t, k) = (d.t(), d.k());
    let n = m.stack() * t;
    let mut gram = vec![vec![0i64; n]; n];
    let mut outer = vec![vec![0i64; n]; n];
    for u in 0..d.b() {
        let mut sums = vec![0i64; n];
        for j in 0..k {
            let cols: Vec<usize> = (0..m.stack()).map(|g| g * t + effect_label(d, u, j, g) - 1).collect();
            for &a in &cols {
                sums[a] += 1;
                for &c in &cols {
                    gram[a][c] += 1;
                }
            }
        }
        for a in 0..n {
            if sums[a] == 0 {
                continue;
            }
            for c in 0..n {
                outer[a][c] += sums[a] * sums[c];
            }
        }
    }
    let kk = int(k as i64);
    let matrix = RatMatrix::from_fn(n, n, |a, c| int(gram[a][c]) - int(outer[a][c]) / &kk);
    JointInfo { info: InfoMatrix::new(matrix, InfoKind::Joint, m, provenance(d)), t }
}

/// `(K′K)⁺K′ = K′/c`.
fn k_pinv_t(m: EffectModel, t: usize) -> RatMatrix {
    m.k_matrix(t).transpose().scale(&(int(1) / int(m.stack() as i64)))
}

/// `pr⊥(K) = I − K(K′K)⁺K′`.
fn k_complement(m: EffectModel, t: usize) -> RatMatrix {
    let kmat = m.k_matrix(t);
    &RatMatrix::identity(m.stack() * t) - &(&kmat * &k_pinv_t(m, t))
}

fn total_upper_from_joint(joint: &JointInfo) -> RatMatrix {
    let g = k_pinv_t(joint.info.model, joint.t);
    &(&g * &joint.info.matrix) * &g.transpose()
}

/// Exact information for total effects: `C11 − C12 C22⁺ C21` with
/// `C11 = GC[α]G′`, `C12 = GC[α]M`, `C22 = MC[α]M`, `G = (K′K)⁺K′`,
/// `M = I − pr(K)`.
pub fn info_total_exact(d: &Design, m: EffectModel) -> Result<InfoMatrix> {
    if d.k() < 2 {
        return Err(Error::Domain("exact total-effect information needs k >= 2".into()));
    }
    let joint = info_joint(d, m);
    Ok(total_exact_from_joint(&joint))
}

fn total_exact_from_joint(joint: &JointInfo) -> InfoMatrix {
    let (m, t) = (joint.info.model, joint.t);
    let g = k_pinv_t(m, t);
    let mc = k_complement(m, t);
    let c = &joint.info.matrix;
    let c11 = &(&g * c) * &g.transpose();
    let c12 = &(&g * c) * &mc;
    let matrix = if c12.is_zero() {
        c11
    } else {
        let c22 = &(&mc * c) * &mc;
        &c11 - &(&(&c12 * &c22.pinv()) * &c12.transpose())
    };
    InfoMatrix::new(matrix, InfoKind::TotalExact, m, joint.info.provenance.clone())
}

/// Whole-design upper bound, or its per-block summands when `per_block`.
pub fn info_total_upper(d: &Design, m: EffectModel, per_block: bool) -> Vec<InfoMatrix> {
    if per_block {
        (0..d.b())
            .map(|u| {
                let sub = Design::new(d.t(), vec![d.blocks()[u].clone()]).expect("block of a valid design");
                let matrix = upper_formula(&sub, m);
                InfoMatrix::new(matrix, InfoKind::TotalUpper, m, format!("{} block {}", provenance(d), u + 1))
            })
            .collect()
    } else {
        vec![InfoMatrix::new(upper_formula(d, m), InfoKind::TotalUpper, m, provenance(d))]
    }
}

/// Whole-design bound computed as `(K′K)⁺K′C[α]K(K′K)⁺`.
pub fn info_total_upper_from_joint(d: &Design, m: EffectModel) -> InfoMatrix {
    let joint = info_joint(d, m);
    InfoMatrix::new(total_upper_from_joint(&joint), InfoKind::TotalUpper, m, provenance(d))
}

/// `t × t` count matrix: entry `(i, j)` counts plots whose group-`a` label is
/// `i` and group-`c` label is `j` (this is `X_a′X_c` for incidences `X`).
fn cross_counts(d: &Design, a: usize, c: usize) -> Vec<Vec<i64>> {
    let t = d.t();
    let mut out = vec![vec![0i64; t]; t];
    for u in 0..d.b() {
        for j in 0..d.k() {
            out[effect_label(d, u, j, a) - 1][effect_label(d, u, j, c) - 1] += 1;
        }
    }
    out
}

/// `T′pr⊥(B)T = diag(r) − k⁻¹ N N′` with `N` the treatment-by-block counts.
fn t_centered_t(d: &Design) -> RatMatrix {
    let t = d.t();
    let mut diag = vec![0i64; t];
    let mut nn = vec![vec![0i64; t]; t];
    for row in d.blocks() {
        let mut counts = vec![0i64; t];
        for &x in row {
            counts[x - 1] += 1;
            diag[x - 1] += 1;
        }
        for i in 0..t {
            for j in 0..t {
                nn[i][j] += counts[i] * counts[j];
            }
        }
    }
    let kk = int(d.k() as i64);
    RatMatrix::from_fn(t, t, |i, j| {
        let base = if i == j { int(diag[i]) } else { int(0) };
        base - int(nn[i][j]) / &kk
    })
}

/// Closed-form bound from the incidence counts:
/// M1: `¼{4T′pr⊥(B)T + T′L + L′T − 2T′T}`;
/// M2: `⅑{9T′pr⊥(B)T + 2(T′L + L′T) + L′R + R′L − 6T′T}`.
fn upper_formula(d: &Design, m: EffectModel) -> RatMatrix {
    let t = d.t();
    let tct = t_centered_t(d);
    let tl = cross_counts(d, 0, 1);
    let tt = cross_counts(d, 0, 0);
    match m {
        EffectModel::M1 => {
            let counts = RatMatrix::from_fn(t, t, |i, j| int(tl[i][j] + tl[j][i] - 2 * tt[i][j]));
            (&tct.scale(&int(4)) + &counts).scale(&(int(1) / int(4)))
        }
        EffectModel::M2 => {
            let lr = cross_counts(d, 1, 2);
            let counts = RatMatrix::from_fn(t, t, |i, j| {
                int(2 * (tl[i][j] + tl[j][i]) + lr[i][j] + lr[j][i] - 6 * tt[i][j])
            });
            (&tct.scale(&int(9)) + &counts).scale(&(int(1) / int(9)))
        }
    }
}

/// `C[α]` commutes with `pr(K)`: the condition under which the upper bound
/// is attained.
pub fn commutes_with_k_projector(joint: &JointInfo) -> bool {
    let (m, t) = (joint.info.model, joint.t);
    let kmat = m.k_matrix(t);
    let p = &kmat * &k_pinv_t(m, t);
    let c = &joint.info.matrix;
    &p * c == c * &p
}

/// `upper − exact`, which is always positive semidefinite.
pub fn bound_gap(d: &Design, m: EffectModel) -> Result<RatMatrix> {
    let exact = info_total_exact(d, m)?;
    let upper = &info_total_upper(d, m, false)[0];
    Ok(&upper.matrix - &exact.matrix)
}

pub fn gap_is_psd(d: &Design, m: EffectModel) -> Result<bool> {
    Ok(is_psd_exact(&bound_gap(d, m)?))
}

/// Information matrix of a neighbor-balanced design: `b(k−2)/(2(t−1)) Q_t`
/// under M1 (`3 ≤ k ≤ t`) and `b(k−3)/(3(t−1)) Q_t` under M2 (`4 ≤ k ≤ t`).
pub fn closed_form_cnbd(t: usize, b: usize, k: usize, m: EffectModel) -> Result<InfoMatrix> {
    let (lower, drop, name) = match m {
        EffectModel::M1 => (3, 2, "CNBD"),
        EffectModel::M2 => (4, 3, "CNBD2"),
    };
    if k < lower || k > t {
        return Err(Error::Domain(format!(
            "{name} closed form under {m} requires {lower} <= k <= t (got k={k}, t={t})"
        )));
    }
    let c = m.stack() as i64;
    let factor = int((b * (k - drop)) as i64) / int(c * (t as i64 - 1));
    Ok(InfoMatrix::new(q_exact(t).scale(&factor), InfoKind::TotalExact, m, format!("closed form t={t} b={b} k={k}")))
}

/// Trace of the per-block bound as a scaled integer pair `(numerator, denominator)`:
/// M1: `(k² − 2Σn² + kΣm) / (2k)`; M2: `(3k² − 9Σn² + 4kΣm + 2kΣp) / (9k)`.
pub fn scaled_c_value(k: usize, sum_n2: usize, sum_m: usize, sum_p: usize, m: EffectModel) -> (i64, i64) {
    let (k, n2, sm, sp) = (k as i64, sum_n2 as i64, sum_m as i64, sum_p as i64);
    match m {
        EffectModel::M1 => (k * k - 2 * n2 + k * sm, 2 * k),
        EffectModel::M2 => (3 * k * k - 9 * n2 + 4 * k * sm + 2 * k * sp, 9 * k),
    }
}

/// `c(s)` (M1) or `c̃(s)` (M2) for one block.
pub fn c_values(block: &BlockProfile, m: EffectModel) -> Rational {
    let (num, den) = scaled_c_value(block.k(), block.sum_n_squared(), block.sum_m(), block.sum_p(), m);
    int(num) / int(den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::parse_design;
    use crate::matrixkit::projector_exact;
    use crate::rational::rat;
    use crate::designs::incidence_matrices;

    fn first() -> Design {
        parse_design(include_str!("../../../fixtures/cnbd2_t5.design")).unwrap()
    }

    fn second() -> Design {
        parse_design(include_str!("../../../fixtures/cnbd2_t4.design")).unwrap()
    }

    /// `A′(I − pr(B))A` by explicit projection, for cross-checking.
    fn joint_by_projection(d: &Design, m: EffectModel) -> RatMatrix {
        let inc = incidence_matrices(d);
        let mut a = inc.treatment.hstack(&inc.left);
        if m == EffectModel::M2 {
            a = a.hstack(&inc.right);
        }
        let n = d.b() * d.k();
        let perp = &RatMatrix::identity(n) - &projector_exact(&inc.block);
        &(&a.transpose() * &perp) * &a
    }

    #[test]
    fn joint_single_block_matches_projection() {
        let d = Design::new(3, vec![vec![1, 2, 3]]).unwrap();
        let j = info_joint(&d, EffectModel::M1);
        assert_eq!(j.info.matrix, joint_by_projection(&d, EffectModel::M1));
        assert_eq!(j.block(0, 0), q_exact(3));
        assert_eq!(j.info.order(), 6);
    }

    #[test]
    fn joint_matches_projection_on_fixtures() {
        for d in [first(), second()] {
            for m in [EffectModel::M1, EffectModel::M2] {
                assert_eq!(info_joint(&d, m).info.matrix, joint_by_projection(&d, m));
            }
        }
    }

    #[test]
    fn joint_of_single_treatment_is_zero() {
        let d = Design::new(1, vec![vec![1, 1, 1], vec![1, 1, 1]]).unwrap();
        assert!(info_joint(&d, EffectModel::M1).info.matrix.is_zero());
        assert!(info_total_exact(&d, EffectModel::M1).unwrap().matrix.is_zero());
    }

    #[test]
    fn balanced_block_identity_on_first_fixture() {
        let j = info_joint(&first(), EffectModel::M1);
        assert_eq!(j.block(0, 0), q_exact(5).scale(&int(4)));
    }

    #[test]
    fn exact_total_on_first_fixture() {
        let d = first();
        assert_eq!(info_total_exact(&d, EffectModel::M1).unwrap().matrix, q_exact(5).scale(&rat(3, 2)));
        assert_eq!(info_total_exact(&d, EffectModel::M2).unwrap().matrix, q_exact(5).scale(&rat(2, 3)));
    }

    #[test]
    fn upper_equals_exact_on_cnbd() {
        let d = first();
        for m in [EffectModel::M1, EffectModel::M2] {
            let exact = info_total_exact(&d, m).unwrap();
            let upper = &info_total_upper(&d, m, false)[0];
            assert_eq!(exact.matrix, upper.matrix);
            assert!(commutes_with_k_projector(&info_joint(&d, m)));
        }
    }

    #[test]
    fn formula_bound_matches_joint_compression() {
        let designs = [
            first(),
            second(),
            Design::new(4, vec![vec![1, 1, 2, 3], vec![2, 4, 4, 1], vec![3, 3, 3, 2]]).unwrap(),
        ];
        for d in designs {
            for m in [EffectModel::M1, EffectModel::M2] {
                let formula = &info_total_upper(&d, m, false)[0];
                let compressed = info_total_upper_from_joint(&d, m);
                assert_eq!(formula.matrix, compressed.matrix);
            }
        }
    }

    #[test]
    fn per_block_bounds_sum_to_whole() {
        let d = Design::new(4, vec![vec![1, 1, 2, 3], vec![2, 4, 4, 1], vec![3, 3, 3, 2]]).unwrap();
        for m in [EffectModel::M1, EffectModel::M2] {
            let parts = info_total_upper(&d, m, true);
            let total = parts.iter().skip(1).fold(parts[0].matrix.clone(), |acc, p| &acc + &p.matrix);
            assert_eq!(total, info_total_upper(&d, m, false)[0].matrix);
        }
    }

    #[test]
    fn per_block_trace_of_runs() {
        let d = Design::new(3, vec![vec![1, 2, 2, 3, 3]]).unwrap();
        let parts = info_total_upper(&d, EffectModel::M1, true);
        assert_eq!(parts[0].trace(), rat(17, 10));
    }

    #[test]
    fn self_neighbor_gap_is_psd_and_nonzero() {
        let d = Design::new(3, vec![vec![1, 1, 2], vec![2, 3, 3], vec![3, 1, 2]]).unwrap();
        let gap = bound_gap(&d, EffectModel::M1).unwrap();
        assert!(!gap.is_zero());
        assert!(is_psd_exact(&gap));
        assert!(!commutes_with_k_projector(&info_joint(&d, EffectModel::M1)));
    }

    #[test]
    fn closed_forms() {
        let c1 = closed_form_cnbd(5, 4, 5, EffectModel::M1).unwrap();
        assert_eq!(c1.matrix, q_exact(5).scale(&rat(3, 2)));
        assert_eq!(c1.trace(), int(6));
        let c2 = closed_form_cnbd(5, 4, 5, EffectModel::M2).unwrap();
        assert_eq!(c2.matrix, q_exact(5).scale(&rat(2, 3)));
        assert_eq!(c2.trace(), rat(8, 3));
        let err = closed_form_cnbd(4, 4, 3, EffectModel::M2).unwrap_err();
        assert!(err.to_string().contains("4 <= k <= t"));
        assert!(closed_form_cnbd(3, 4, 4, EffectModel::M1).is_err());
    }

    #[test]
    fn c_value_examples() {
        let runs = BlockProfile::from_sequence(&[1, 2, 2, 3, 3], 3);
        assert_eq!(c_values(&runs, EffectModel::M1), rat(17, 10));
        assert_eq!(c_values(&runs, EffectModel::M2), rat(34, 45));
        for k in 3..9 {
            let seq: Vec<usize> = (1..=k).collect();
            let bp = BlockProfile::from_sequence(&seq, k);
            assert_eq!(c_values(&bp, EffectModel::M1), rat(k as i64, 2) - int(1));
        }
    }

    #[test]
    fn degenerate_design_reports_extra_null_space() {
        // treatment 3 never appears
        let d = Design::new(3, vec![vec![1, 2], vec![2, 1], vec![1, 2]]).unwrap();
        let c = info_total_exact(&d, EffectModel::M1).unwrap();
        assert!(c.annihilates_ones());
        assert!(c.extra_null_dimension() >= 1);
    }

    #[test]
    fn model_parsing() {
        assert_eq!("M1".parse::<EffectModel>().unwrap(), EffectModel::M1);
        assert!("m3".parse::<EffectModel>().is_err());
        let k = EffectModel::M2.k_matrix(3);
        assert_eq!(&k.transpose() * &k, RatMatrix::identity(3).scale(&int(3)));
    }
}
