//! Unbiased U-statistic `ED_n^k` over a cached kernel matrix.
//!
//! A permutation of the pooled rows only changes which pairs get which weight,
//! so the kernel matrix is built once and every permuted statistic is a
//! weighted sum over it. Each permutation is reduced to a [`Grouping`] (the
//! original row indices that land in the first group) and the three group sums
//! are accumulated in a canonical order with compensated summation. Two
//! permutations that induce the same grouping therefore give bit-identical
//! statistics, which keeps tie handling in the randomization distribution
//! exact.

use std::fmt;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Psi};

/// Pooled data matrix: rows `0..n` are the first sample, `n..n+m` the second.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    data: Vec<f64>,
    n: usize,
    m: usize,
    p: usize,
}

impl LabeledSample {
    /// Builds a sample from a row-major `(n+m) x p` buffer.
    pub fn from_flat(data: Vec<f64>, n: usize, m: usize, p: usize) -> Result<Self> {
        if n < 2 || m < 2 {
            return Err(Error::arg(format!("each group needs at least 2 rows (n={n}, m={m})")));
        }
        if p == 0 {
            return Err(Error::arg("dimension p must be at least 1"));
        }
        if data.len() != (n + m) * p {
            return Err(Error::Dimension(format!(
                "buffer of length {} cannot hold {} rows of dimension {p}",
                data.len(),
                n + m
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite entry at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        Ok(LabeledSample { data, n, m, p })
    }

    /// Stacks `x` on top of `y`.
    pub fn from_groups(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Self> {
        let p = x.first().or(y.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity((x.len() + y.len()) * p);
        for (i, row) in x.iter().chain(y).enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!(
                    "row {i} has length {}, expected {p}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, x.len(), y.len(), p)
    }

    /// Splits `rows` after the first `n`.
    pub fn from_rows(rows: &[Vec<f64>], n: usize) -> Result<Self> {
        if n > rows.len() {
            return Err(Error::arg(format!("n={n} exceeds the {} available rows", rows.len())));
        }
        Self::from_groups(&rows[..n], &rows[n..])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn total(&self) -> usize {
        self.n + self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    pub fn first_group(&self) -> impl Iterator<Item = &[f64]> {
        self.rows().take(self.n)
    }

    pub fn second_group(&self) -> impl Iterator<Item = &[f64]> {
        self.rows().skip(self.n)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// The sample `perm · Z`: original row `i` is moved to position `perm(i)`.
    pub fn permute_rows(&self, perm: &Permutation) -> Result<Self> {
        perm.check_len(self.total())?;
        let mut data = vec![0.0; self.data.len()];
        for (i, &target) in perm.as_slice().iter().enumerate() {
            data[target * self.p..(target + 1) * self.p].copy_from_slice(self.row(i));
        }
        Ok(LabeledSample { data, ..*self })
    }

    /// Regroups the same rows with a different split point.
    pub fn with_split(&self, n: usize) -> Result<Self> {
        let total = self.total();
        if n > total {
            return Err(Error::arg(format!("split {n} exceeds {total} rows")));
        }
        Self::from_flat(self.data.clone(), n, total - n, self.p)
    }
}

/// A bijection on `{0, .., N-1}` (zero-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(len: usize) -> Self {
        Permutation((0..len).collect())
    }

    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &v in &images {
            if v >= images.len() || std::mem::replace(&mut seen[v], true) {
                return Err(Error::arg(format!("{images:?} is not a permutation")));
            }
        }
        Ok(Permutation(images))
    }

    /// From one-based images, as written in the math notation.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::arg("one-based permutation contains 0"));
        }
        Self::new(images.iter().map(|v| v - 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub(crate) fn check_len(&self, total: usize) -> Result<()> {
        if self.len() != total {
            return Err(Error::arg(format!(
                "permutation of length {} applied to {total} rows",
                self.len()
            )));
        }
        Ok(())
    }

    /// Unranks `rank` in `0..len!` via the Lehmer code; rank 0 is the identity.
    pub fn from_rank(len: usize, mut rank: u128) -> Self {
        let mut pool: Vec<usize> = (0..len).collect();
        let mut fact: u128 = (1..len as u128).product();
        let mut out = Vec::with_capacity(len);
        for k in (1..=len).rev() {
            let idx = if k > 1 { (rank / fact) as usize } else { 0 };
            if k > 1 {
                rank %= fact;
                fact /= (k - 1) as u128;
            }
            out.push(pool.remove(idx));
        }
        Permutation(out)
    }

    /// Fisher-Yates shuffle driven by `rng`.
    pub fn random<R: rand::Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let mut v: Vec<usize> = (0..len).collect();
        v.shuffle(rng);
        Permutation(v)
    }

    pub fn grouping(&self, n: usize) -> Grouping {
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(self.len().saturating_sub(n));
        for (i, &target) in self.0.iter().enumerate() {
            if target < n {
                first.push(i);
            } else {
                second.push(i);
            }
        }
        Grouping { first, second }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| (v + 1).to_string()).collect();
        write!(f, "({})", parts.join(" "))
    }
}

/// Original row indices assigned to each group by a permutation, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grouping {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl Grouping {
    pub fn identity(n: usize, m: usize) -> Self {
        Grouping { first: (0..n).collect(), second: (n..n + m).collect() }
    }

    /// Number of original first-group rows moved into the second group.
    pub fn crossings(&self, n: usize) -> usize {
        self.second.iter().take_while(|&&i| i < n).count()
    }
}

/// Pair weights of the permuted statistic.
///
/// For a pair of original rows `(i, j)` the weight depends only on the groups
/// the permutation sends them to: `-2/(n(n-1))` within the first group,
/// `-2/(m(m-1))` within the second, `2/(nm)` across.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupWeights {
    pub within_first: f64,
    pub within_second: f64,
    pub across: f64,
}

impl GroupWeights {
    pub fn new(n: usize, m: usize) -> Self {
        let (nf, mf) = (n as f64, m as f64);
        GroupWeights {
            within_first: -2.0 / (nf * (nf - 1.0)),
            within_second: -2.0 / (mf * (mf - 1.0)),
            across: 2.0 / (nf * mf),
        }
    }

    /// Weight of the pair `(i, j)`, `i != j`, under `perm`.
    pub fn weight(&self, perm: &Permutation, n: usize, i: usize, j: usize) -> f64 {
        let (a, b) = (perm.as_slice()[i] < n, perm.as_slice()[j] < n);
        match (a, b) {
            (true, true) => self.within_first,
            (false, false) => self.within_second,
            _ => self.across,
        }
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Symmetric `N x N` matrix of `psi_bar` values for one `psi`.
///
/// Shared between kernel families with the same `psi`, so testing several
/// kernels on one dataset pays for the `O(N^2 p)` pass once per `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiBarMatrix {
    values: Vec<f64>,
    size: usize,
    psi: Psi,
}

impl PsiBarMatrix {
    pub fn build(sample: &LabeledSample, psi: Psi) -> Self {
        let size = sample.total();
        let rows: Vec<Vec<f64>> = crate::par::map_indexed(size, |i| {
            let zi = sample.row(i);
            (i + 1..size).map(|j| psi.mean(zi, sample.row(j))).collect()
        });
        let mut values = vec![0.0; size * size];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                values[i * size + j] = v;
                values[j * size + i] = v;
            }
        }
        PsiBarMatrix { values, size, psi }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn psi(&self) -> Psi {
        self.psi
    }
}

/// Cached pairwise kernel values `k(Z_i, Z_j)`; the diagonal is never read.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Vec<f64>,
    n: usize,
    m: usize,
    spec: Option<KernelSpec>,
}

impl KernelMatrix {
    pub fn from_psi_bar(psi: &PsiBarMatrix, n: usize, m: usize, spec: &KernelSpec) -> Result<Self> {
        if psi.psi != spec.psi() {
            return Err(Error::arg(format!("{spec} kernel cannot reuse a {:?} matrix", psi.psi)));
        }
        if psi.size != n + m {
            return Err(Error::Dimension(format!("matrix of size {} for n+m={}", psi.size, n + m)));
        }
        let values = psi
            .values
            .iter()
            .enumerate()
            .map(|(idx, &t)| if idx / psi.size == idx % psi.size { 0.0 } else { spec.phi(t) })
            .collect();
        Ok(KernelMatrix { values, n, m, spec: Some(*spec) })
    }

    /// Wraps an arbitrary symmetric matrix (row-major, diagonal ignored).
    pub fn from_symmetric(values: Vec<f64>, n: usize, m: usize) -> Result<Self> {
        let size = n + m;
        if n < 2 || m < 2 {
            return Err(Error::arg(format!("each group needs at least 2 rows (n={n}, m={m})")));
        }
        if values.len() != size * size {
            return Err(Error::Dimension(format!(
                "{} values for a {size}x{size} matrix",
                values.len()
            )));
        }
        for i in 0..size {
            for j in 0..i {
                let (a, b) = (values[i * size + j], values[j * size + i]);
                if a != b || !a.is_finite() {
                    return Err(Error::Data(format!("entry ({i},{j}) is not symmetric and finite")));
                }
            }
        }
        Ok(KernelMatrix { values, n, m, spec: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        self.n + self.m
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.n + self.m) + j]
    }

    /// The same matrix with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        KernelMatrix {
            values: self.values.iter().map(|v| v * c).collect(),
            spec: None,
            ..*self
        }
    }

    /// Statistic for the split described by `g`.
    pub fn statistic_for(&self, g: &Grouping) -> f64 {
        let size = self.size();
        let within = |idx: &[usize]| {
            let mut acc = CompensatedSum::default();
            for (a, &i) in idx.iter().enumerate() {
                let row = &self.values[i * size..(i + 1) * size];
                for &j in &idx[a + 1..] {
                    acc.add(row[j]);
                }
            }
            acc.value()
        };
        let s11 = within(&g.first);
        let s22 = within(&g.second);
        let mut cross = CompensatedSum::default();
        for &i in &g.first {
            let row = &self.values[i * size..(i + 1) * size];
            for &j in &g.second {
                cross.add(row[j]);
            }
        }
        let w = GroupWeights::new(self.n, self.m);
        // The within-group terms are combined first so that a block swap with
        // n == m reproduces the unpermuted value exactly.
        w.across * cross.value() + (w.within_first * s11 + w.within_second * s22)
    }
}

pub fn build_kernel_matrix(sample: &LabeledSample, spec: &KernelSpec) -> Result<KernelMatrix> {
    let psi = PsiBarMatrix::build(sample, spec.psi());
    KernelMatrix::from_psi_bar(&psi, sample.n(), sample.m(), spec)
}

/// `ED_n^k(Z)` on the unpermuted split.
pub fn ed_statistic(km: &KernelMatrix) -> f64 {
    km.statistic_for(&Grouping::identity(km.n, km.m))
}

/// `ED_n^k(Γ Z)` computed by re-weighting the cached pairs.
pub fn ed_statistic_permuted(km: &KernelMatrix, perm: &Permutation) -> Result<f64> {
    perm.check_len(km.size())?;
    Ok(km.statistic_for(&perm.grouping(km.n)))
}
