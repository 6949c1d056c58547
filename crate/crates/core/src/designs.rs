//! Circular block designs with border plots.
//!
//! Only the inner plots are stored. The left border of a block repeats its
//! last inner plot and the right border repeats its first, so every
//! neighbor relation wraps around the block.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::matrixkit::RatMatrix;
use crate::rational::{int, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Design {
    t: usize,
    b: usize,
    k: usize,
    layout: Vec<Vec<usize>>,
}

impl Design {
    /// Builds a design from its inner plots; labels are 1-based.
    pub fn new(t: usize, layout: Vec<Vec<usize>>) -> Result<Self> {
        if t == 0 {
            return Err(Error::Domain("t must be positive".into()));
        }
        let b = layout.len();
        if b == 0 {
            return Err(Error::Domain("design needs at least one block".into()));
        }
        let k = layout[0].len();
        if k == 0 {
            return Err(Error::Domain("blocks need at least one inner plot".into()));
        }
        for (i, row) in layout.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Domain(format!("block {} has {} plots, expected {k}", i + 1, row.len())));
            }
            if let Some(&bad) = row.iter().find(|&&x| x == 0 || x > t) {
                return Err(Error::Domain(format!("label {bad} out of range 1..{t}")));
            }
        }
        Ok(Design { t, b, k, layout })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.layout
    }

    /// Treatment on plot `j` of block `i` (both 0-based), `j` taken circularly.
    /// `plot(i, -1)` is the left border and `plot(i, k)` the right border.
    pub fn plot(&self, block: usize, j: isize) -> usize {
        let k = self.k as isize;
        self.layout[block][j.rem_euclid(k) as usize]
    }

    pub fn left_neighbor(&self, block: usize, j: usize) -> usize {
        self.plot(block, j as isize - 1)
    }

    pub fn right_neighbor(&self, block: usize, j: usize) -> usize {
        self.plot(block, j as isize + 1)
    }

    /// Distinct treatments that actually appear.
    pub fn treatments_used(&self) -> usize {
        let mut seen = vec![false; self.t + 1];
        self.layout.iter().flatten().for_each(|&x| seen[x] = true);
        seen.iter().filter(|&&s| s).count()
    }

    /// Same design with treatment `i` renamed `perm[i - 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.t {
            return Err(Error::Domain("relabeling must cover every treatment".into()));
        }
        let layout = self.layout.iter().map(|row| row.iter().map(|&x| perm[x - 1]).collect()).collect();
        Design::new(self.t, layout)
    }

    pub fn permute_blocks(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.b {
            return Err(Error::Domain("block permutation has wrong length".into()));
        }
        Design::new(self.t, order.iter().map(|&i| self.layout[i].clone()).collect())
    }

    /// Renders the design in the text file format.
    pub fn to_text(&self) -> String {
        let mut out = format!("t={} b={} k={}\n", self.t, self.b, self.k);
        for row in &self.layout {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Design {
    /// Shows borders between bars, as in `5 | 1 2 3 4 5 | 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.layout.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(f, "{} | {} | {}", self.plot(i, -1), cells.join(" "), self.plot(i, self.k as isize))?;
        }
        Ok(())
    }
}

/// Parses the design file format.
///
/// Rows may optionally carry their border plots as `l | inner... | r`; the
/// borders must then agree with circularity.
pub fn parse_design(text: &str) -> Result<Design> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(Error::Parse { line: 0, message: "empty design file".into() })?;
    let (t, b, k) = parse_header(header_line, header)?;

    let mut layout = Vec::with_capacity(b);
    for (line, content) in lines {
        if layout.len() == b {
            return Err(Error::Parse { line, message: format!("more than b={b} block rows") });
        }
        layout.push(parse_row(line, content, t, k)?);
    }
    if layout.len() != b {
        return Err(Error::Parse {
            line: header_line,
            message: format!("header declares b={b} blocks but {} rows follow", layout.len()),
        });
    }
    Design::new(t, layout).map_err(|e| Error::Parse { line: header_line, message: e.to_string() })
}

fn parse_header(line: usize, header: &str) -> Result<(usize, usize, usize)> {
    let mut values: BTreeMap<&str, usize> = BTreeMap::new();
    for token in header.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected key=value in header, got '{token}'") })?;
        if !matches!(key, "t" | "b" | "k") {
            return Err(Error::Parse { line, message: format!("unknown header key '{key}'") });
        }
        let value: usize = value
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("invalid integer for {key}: '{value}'") })?;
        if value == 0 {
            return Err(Error::Parse { line, message: format!("{key} must be positive") });
        }
        if values.insert(key, value).is_some() {
            return Err(Error::Parse { line, message: format!("duplicate header key '{key}'") });
        }
    }
    match (values.get("t"), values.get("b"), values.get("k")) {
        (Some(&t), Some(&b), Some(&k)) => Ok((t, b, k)),
        _ => Err(Error::Parse { line, message: "header must be 't=<int> b=<int> k=<int>'".into() }),
    }
}

fn parse_labels(line: usize, text: &str, t: usize) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|tok| {
            let label: usize =
                tok.parse().map_err(|_| Error::Parse { line, message: format!("invalid label '{tok}'") })?;
            if label == 0 || label > t {
                return Err(Error::Parse { line, message: format!("label {label} out of range 1..{t}") });
            }
            Ok(label)
        })
        .collect()
}

fn parse_row(line: usize, content: &str, t: usize, k: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = content.split('|').collect();
    let (inner, borders) = match parts.as_slice() {
        [inner] => (parse_labels(line, inner, t)?, None),
        [left, inner, right] => {
            let left = parse_labels(line, left, t)?;
            let right = parse_labels(line, right, t)?;
            if left.len() != 1 || right.len() != 1 {
                return Err(Error::Parse { line, message: "each border must hold exactly one label".into() });
            }
            (parse_labels(line, inner, t)?, Some((left[0], right[0])))
        }
        _ => return Err(Error::Parse { line, message: "expected 'inner plots' or 'left | inner plots | right'".into() }),
    };
    if inner.len() != k {
        return Err(Error::Parse { line, message: format!("row has {} labels, expected k={k}", inner.len()) });
    }
    if let Some((left, right)) = borders {
        if left != inner[k - 1] || right != inner[0] {
            return Err(Error::Parse {
                line,
                message: format!(
                    "borders ({left}, {right}) inconsistent with circularity; expected ({}, {})",
                    inner[k - 1],
                    inner[0]
                ),
            });
        }
    }
    Ok(inner)
}

/// The 0/1 incidence matrices of a design, one row per inner plot
/// (block-major order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceSet {
    pub treatment: RatMatrix,
    pub left: RatMatrix,
    pub right: RatMatrix,
    pub block: RatMatrix,
}

pub fn incidence_matrices(d: &Design) -> IncidenceSet {
    let n = d.b * d.k;
    let mut treatment = RatMatrix::zeros(n, d.t);
    let mut left = RatMatrix::zeros(n, d.t);
    let mut right = RatMatrix::zeros(n, d.t);
    let mut block = RatMatrix::zeros(n, d.b);
    for i in 0..d.b {
        for j in 0..d.k {
            let row = i * d.k + j;
            treatment[(row, d.layout[i][j] - 1)] = Rational::one();
            left[(row, d.left_neighbor(i, j) - 1)] = Rational::one();
            right[(row, d.right_neighbor(i, j) - 1)] = Rational::one();
            block[(row, i)] = Rational::one();
        }
    }
    IncidenceSet { treatment, left, right, block }
}

impl IncidenceSet {
    /// `B′T = B′L = B′R` and `T′T = L′L = R′R`.
    pub fn circularity_holds(&self) -> bool {
        let bt = self.block.transpose();
        let b_t = &bt * &self.treatment;
        let tt = &self.treatment.transpose() * &self.treatment;
        b_t == &bt * &self.left
            && b_t == &bt * &self.right
            && tt == &self.left.transpose() * &self.left
            && tt == &self.right.transpose() * &self.right
    }

    pub fn rows_are_indicators(&self) -> bool {
        [&self.treatment, &self.left, &self.right, &self.block]
            .iter()
            .all(|m| m.row_sums().iter().all(One::is_one))
    }
}

/// Relabels a sequence by first occurrence: the restricted growth string.
pub fn canonical_form(sequence: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    sequence
        .iter()
        .map(|&x| match map.iter().find(|(from, _)| *from == x) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len() + 1;
                map.push((x, to));
                to
            }
        })
        .collect()
}

/// Circular counts for one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockProfile {
    pub sequence: Vec<usize>,
    /// Occurrences of each treatment, indexed by label − 1.
    pub n: Vec<usize>,
    /// Times each treatment sits immediately left of itself.
    pub m: Vec<usize>,
    /// Plots whose left and right neighbors are both the given treatment.
    pub p: Vec<usize>,
    pub canonical: Vec<usize>,
}

impl BlockProfile {
    pub fn from_sequence(sequence: &[usize], t: usize) -> Self {
        let k = sequence.len();
        let mut n = vec![0; t];
        let mut m = vec![0; t];
        let mut p = vec![0; t];
        for j in 0..k {
            let here = sequence[j];
            let next = sequence[(j + 1) % k];
            let prev = sequence[(j + k - 1) % k];
            n[here - 1] += 1;
            if next == here {
                m[here - 1] += 1;
            }
            if prev == next {
                p[prev - 1] += 1;
            }
        }
        BlockProfile { sequence: sequence.to_vec(), n, m, p, canonical: canonical_form(sequence) }
    }

    pub fn k(&self) -> usize {
        self.sequence.len()
    }

    pub fn sum_n_squared(&self) -> usize {
        self.n.iter().map(|x| x * x).sum()
    }

    pub fn sum_m(&self) -> usize {
        self.m.iter().sum()
    }

    pub fn sum_p(&self) -> usize {
        self.p.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceProfile {
    pub blocks: Vec<BlockProfile>,
    /// Proportion of blocks in each relabeling class, keyed by canonical form.
    pub class_histogram: BTreeMap<Vec<usize>, Rational>,
}

impl SequenceProfile {
    pub fn is_point_mass(&self) -> bool {
        self.class_histogram.len() == 1
    }
}

pub fn sequence_profile(d: &Design) -> SequenceProfile {
    let blocks: Vec<BlockProfile> = d.layout.iter().map(|row| BlockProfile::from_sequence(row, d.t)).collect();
    let mut counts: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
    for bp in &blocks {
        *counts.entry(bp.canonical.clone()).or_default() += 1;
    }
    let total = int(d.b as i64);
    let class_histogram = counts.into_iter().map(|(class, c)| (class, int(c) / &total)).collect();
    SequenceProfile { blocks, class_histogram }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassificationReport {
    pub is_binary: bool,
    pub is_balanced_block: bool,
    pub is_cnbd: bool,
    pub is_cnbd2: bool,
    pub no_self_neighbor_d1: bool,
    pub no_self_neighbor_d2: bool,
    /// `bk / (t(t−1))`; absent when `t = 1`.
    pub ell: Option<Rational>,
    pub ell_integral: bool,
}

pub fn classify(d: &Design) -> ClassificationReport {
    let (t, b, k) = (d.t, d.b, d.k);
    let ell = (t >= 2).then(|| int((b * k) as i64) / int((t * (t - 1)) as i64));
    let ell_integral = ell.as_ref().is_some_and(|l| l.is_integer());
    let ell_count = ell.as_ref().filter(|l| l.is_integer()).map(|l| l.to_integer());

    let is_binary = d.layout.iter().all(|row| {
        let mut seen = vec![false; t + 1];
        row.iter().all(|&x| !std::mem::replace(&mut seen[x], true))
    });

    let is_balanced_block = is_binary && t >= 2 && {
        let mut replication = vec![0usize; t];
        let mut concurrence = vec![vec![0usize; t]; t];
        for row in &d.layout {
            for &x in row {
                replication[x - 1] += 1;
                for &y in row {
                    if x != y {
                        concurrence[x - 1][y - 1] += 1;
                    }
                }
            }
        }
        let lambda = concurrence[0][1];
        replication.iter().all(|&r| r == replication[0])
            && (0..t).all(|i| (0..t).all(|j| i == j || concurrence[i][j] == lambda))
    };

    let mut adjacent = vec![vec![0usize; t]; t];
    let mut distance_two = vec![vec![0usize; t]; t];
    let mut self_d1 = false;
    let mut self_d2 = false;
    for i in 0..b {
        for j in 0..k {
            let here = d.layout[i][j];
            let right = d.right_neighbor(i, j);
            let left = d.left_neighbor(i, j);
            adjacent[here - 1][right - 1] += 1;
            distance_two[left - 1][right - 1] += 1;
            self_d1 |= here == right;
            self_d2 |= left == right;
        }
    }

    let balanced_pairs = |counts: &Vec<Vec<usize>>| match &ell_count {
        Some(l) => (0..t).all(|i| (0..t).all(|j| i == j || num_bigint::BigInt::from(counts[i][j]) == *l)),
        None => false,
    };

    let is_cnbd = is_balanced_block && ell_integral && balanced_pairs(&adjacent);
    let is_cnbd2 = is_cnbd && balanced_pairs(&distance_two);

    ClassificationReport {
        is_binary,
        is_balanced_block,
        is_cnbd,
        is_cnbd2,
        no_self_neighbor_d1: !self_d1,
        no_self_neighbor_d2: !self_d2,
        ell,
        ell_integral,
    }
}

impl ClassificationReport {
    pub fn ell_or_zero(&self) -> Rational {
        self.ell.clone().unwrap_or_else(Rational::zero)
    }
}
