//! Sample storage and the regularized empirical risk
//! `R_n(x) = (1/n) Σ_{i<n} ℓ(y_i a_iᵀx) + (c V_n / 2) ‖x‖²`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::trace::WorkMeter;
use crate::{Error, Result};

/// Default largest dimension for which the dense Hessian is assembled.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Samples per reduction chunk. Partial sums are combined in chunk order, so
/// results do not depend on how chunks are scheduled across threads.
const CHUNK: usize = 1024;

/// An owned sample: sparse features with 0-based, strictly increasing indices
/// and a label in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub label: f64,
}

impl Sample {
    pub fn dense(features: &[f64], label: f64) -> Self {
        Sample {
            indices: (0..features.len() as u32).collect(),
            values: features.to_vec(),
            label,
        }
    }
}

/// Borrowed view of one stored sample.
#[derive(Debug, Clone, Copy)]
pub struct SampleRef<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
    pub label: f64,
}

impl SampleRef<'_> {
    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * x[j as usize])
            .sum()
    }

    /// `out += alpha * a`.
    #[inline]
    pub fn axpy(&self, alpha: f64, out: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            out[j as usize] += alpha * v;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_owned(&self) -> Sample {
        Sample {
            indices: self.indices.to_vec(),
            values: self.values.to_vec(),
            label: self.label,
        }
    }
}

/// Ordered sample store in compressed-row form. The prefix of length `n` is
/// the sample set of `R_n`, so every smaller prefix is nested in every larger one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    order_seed: u64,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, dim: usize) -> Result<Self> {
        let mut indptr = Vec::with_capacity(samples.len() + 1);
        indptr.push(0);
        let nnz = samples.iter().map(|s| s.indices.len()).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut labels = Vec::with_capacity(samples.len());
        for (i, s) in samples.into_iter().enumerate() {
            if s.label != 1.0 && s.label != -1.0 {
                return Err(Error::validation(format!("sample {i}: label {} is not ±1", s.label)));
            }
            if s.indices.len() != s.values.len() {
                return Err(Error::validation(format!("sample {i}: index/value length mismatch")));
            }
            if s.indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(format!(
                    "sample {i}: indices not strictly increasing"
                )));
            }
            if let Some(&last) = s.indices.last() {
                if last as usize >= dim {
                    return Err(Error::validation(format!(
                        "sample {i}: feature index {last} out of range for dimension {dim}"
                    )));
                }
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("sample {i}: non-finite feature value")));
            }
            indices.extend_from_slice(&s.indices);
            values.extend_from_slice(&s.values);
            labels.push(s.label);
            indptr.push(indices.len());
        }
        Ok(Dataset {
            indptr,
            indices,
            values,
            labels,
            dim,
            order_seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Seed of the permutation that produced the current order (0 = file order).
    pub fn order_seed(&self) -> u64 {
        self.order_seed
    }

    pub(crate) fn set_order_seed(&mut self, seed: u64) {
        self.order_seed = seed;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn sample(&self, i: usize) -> SampleRef<'_> {
        let r = self.indptr[i]..self.indptr[i + 1];
        SampleRef {
            indices: &self.indices[r.clone()],
            values: &self.values[r],
            label: self.labels[i],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SampleRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `max_i ‖a_i‖²` over all samples.
    pub fn max_sq_norm(&self) -> f64 {
        self.iter().map(|s| s.sq_norm()).fold(0.0, f64::max)
    }

    pub fn to_samples(&self) -> Vec<Sample> {
        self.iter().map(|s| s.to_owned()).collect()
    }

    /// Copy holding only the first `n` samples.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        let end = self.indptr[n];
        Dataset {
            indptr: self.indptr[..=n].to_vec(),
            indices: self.indices[..end].to_vec(),
            values: self.values[..end].to_vec(),
            labels: self.labels[..n].to_vec(),
            dim: self.dim,
            order_seed: self.order_seed,
        }
    }
}

/// Statistical accuracy schedule `V_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `V_n = 1/n`
    InvN,
    /// `V_n = 1/√n`
    InvSqrtN,
}

impl Schedule {
    pub fn accuracy(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Schedule::InvN => 1.0 / n,
            Schedule::InvSqrtN => 1.0 / n.sqrt(),
        }
    }
}

/// A margin loss `ℓ(s)` with `s = y aᵀx`, described by its value, first
/// derivative and curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Logistic,
}

impl Loss {
    /// `ℓ(s)`.
    #[inline]
    pub fn value(self, s: f64) -> f64 {
        match self {
            Loss::Logistic => {
                if s > 0.0 {
                    (-s).exp().ln_1p()
                } else {
                    -s + s.exp().ln_1p()
                }
            }
        }
    }

    /// `ℓ'(s)`.
    #[inline]
    pub fn deriv(self, s: f64) -> f64 {
        match self {
            Loss::Logistic => {
                if s >= 0.0 {
                    let e = (-s).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + s.exp())
                }
            }
        }
    }

    /// `ℓ''(s)`.
    #[inline]
    pub fn curvature(self, s: f64) -> f64 {
        match self {
            Loss::Logistic => {
                let e = (-s.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// Upper bound on `ℓ''`.
    pub fn max_curvature(self) -> f64 {
        match self {
            Loss::Logistic => 0.25,
        }
    }

    /// `ℓ(s) - ℓ(t)` without cancellation when `s ≈ t`.
    pub fn difference(self, s: f64, t: f64) -> f64 {
        match self {
            Loss::Logistic => {
                if s >= 0.0 && t >= 0.0 {
                    // ln((1 + e^-s) / (1 + e^-t))
                    let et = (-t).exp();
                    (et * (t - s).exp_m1() / (1.0 + et)).ln_1p()
                } else if s < 0.0 && t < 0.0 {
                    // ℓ(s) = -s + ℓ(-s)
                    (t - s) + self.difference(-s, -t)
                } else {
                    self.value(s) - self.value(t)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskConfig {
    pub c: f64,
    pub schedule: Schedule,
    pub loss: Loss,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            c: 1.0,
            schedule: Schedule::InvN,
            loss: Loss::Logistic,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::validation(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

/// `R_n` over the first `n` samples of a dataset.
#[derive(Debug, Clone, Copy)]
pub struct RiskView<'a> {
    data: &'a Dataset,
    n: usize,
    config: RiskConfig,
    meter: Option<&'a WorkMeter>,
    dense_cap: usize,
}

fn chunks(n: usize, size: usize) -> Vec<Range<usize>> {
    (0..n).step_by(size.max(1)).map(|s| s..(s + size).min(n)).collect()
}

#[cfg(feature = "parallel")]
fn map_chunks<T: Send, F: Fn(Range<usize>) -> T + Sync + Send>(ranges: Vec<Range<usize>>, f: F) -> Vec<T> {
    use rayon::prelude::*;
    ranges.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_chunks<T, F: Fn(Range<usize>) -> T>(ranges: Vec<Range<usize>>, f: F) -> Vec<T> {
    ranges.into_iter().map(f).collect()
}

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric(format!("{what} is not finite")));
    }
    Ok(())
}

impl<'a> RiskView<'a> {
    pub fn new(data: &'a Dataset, n: usize, config: RiskConfig) -> Result<Self> {
        config.validate()?;
        if n == 0 || n > data.len() {
            return Err(Error::validation(format!("prefix size {n} outside 1..={}", data.len())));
        }
        Ok(RiskView {
            data,
            n,
            config,
            meter: None,
            dense_cap: DEFAULT_DENSE_CAP,
        })
    }

    /// Attaches a work meter; every gradient evaluation charges `n` to it.
    pub fn with_meter(mut self, meter: &'a WorkMeter) -> Self {
        self.meter = Some(meter);
        self
    }

    /// Copy with the work meter detached, for diagnostics that are not part
    /// of the algorithm's cost.
    pub fn unmetered(mut self) -> Self {
        self.meter = None;
        self
    }

    pub fn with_dense_cap(mut self, cap: usize) -> Self {
        self.dense_cap = cap;
        self
    }

    /// Same dataset and configuration over a different prefix.
    pub fn resized(&self, n: usize) -> Result<RiskView<'a>> {
        let mut v = RiskView::new(self.data, n, self.config)?;
        v.meter = self.meter;
        v.dense_cap = self.dense_cap;
        Ok(v)
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn config(&self) -> &RiskConfig {
        &self.config
    }

    pub fn meter(&self) -> Option<&'a WorkMeter> {
        self.meter
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn dense_available(&self) -> bool {
        self.dim() <= self.dense_cap
    }

    /// Statistical accuracy `V_n`.
    pub fn accuracy(&self) -> f64 {
        self.config.schedule.accuracy(self.n)
    }

    /// Ridge weight `c V_n`.
    pub fn reg(&self) -> f64 {
        self.config.c * self.accuracy()
    }

    /// Gradient Lipschitz constant `M` of the per-sample losses, taken over the
    /// whole dataset so it is shared by every prefix.
    pub fn lipschitz(&self) -> f64 {
        self.data.max_sq_norm() * self.config.loss.max_curvature()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::validation(format!(
                "vector has length {}, problem dimension is {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Margins `s_i = y_i a_iᵀx` for the prefix.
    pub fn margins(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let xs = x.as_slice();
        Ok((0..self.n)
            .map(|i| {
                let s = self.data.sample(i);
                s.label * s.dot(xs)
            })
            .collect())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let xs = x.as_slice();
        let loss = self.config.loss;
        let partials = map_chunks(chunks(self.n, CHUNK), |r| {
            r.map(|i| {
                let s = self.data.sample(i);
                loss.value(s.label * s.dot(xs))
            })
            .sum::<f64>()
        });
        let total: f64 = partials.into_iter().sum();
        let v = total / self.n as f64 + 0.5 * self.reg() * x.norm_squared();
        if !v.is_finite() {
            return Err(Error::numeric("risk value is not finite"));
        }
        Ok(v)
    }

    /// `∇R_n(x)`. Charges `n` evaluated gradients to the attached meter.
    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let p = self.dim();
        let xs = x.as_slice();
        let loss = self.config.loss;
        let partials = map_chunks(chunks(self.n, CHUNK), |r| {
            let mut acc = vec![0.0; p];
            for i in r {
                let s = self.data.sample(i);
                let d = loss.deriv(s.label * s.dot(xs));
                s.axpy(d * s.label, &mut acc);
            }
            acc
        });
        let mut g = DVector::zeros(p);
        for part in partials {
            for (gj, pj) in g.iter_mut().zip(part) {
                *gj += pj;
            }
        }
        g /= self.n as f64;
        g.axpy(self.reg(), x, 1.0);
        if let Some(m) = self.meter {
            m.charge_evaluated(self.n as u64);
        }
        check_finite(&g, "gradient")?;
        Ok(g)
    }

    /// Curvature weights `w_i = ℓ''(s_i)`.
    pub fn hessian_weights(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        let loss = self.config.loss;
        Ok(self.margins(x)?.into_iter().map(|s| loss.curvature(s)).collect())
    }

    /// Dense data Hessian `∇²L_n(x) = (1/n) Σ w_i a_i a_iᵀ`, without the ridge term.
    pub fn data_hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let p = self.dim();
        if p > self.dense_cap {
            return Err(Error::Capability {
                dim: p,
                cap: self.dense_cap,
            });
        }
        let weights = self.hessian_weights(x)?;
        // At most eight partial matrices; chunking depends on n only.
        let size = CHUNK.max(self.n.div_ceil(8));
        let partials = map_chunks(chunks(self.n, size), |r| {
            // Row-major lower triangle.
            let mut h = vec![0.0; p * p];
            for i in r {
                let s = self.data.sample(i);
                let w = weights[i];
                if w == 0.0 {
                    continue;
                }
                let dense_row = s.indices.len() == p;
                for (a, (&j, &va)) in s.indices.iter().zip(s.values).enumerate() {
                    let wa = w * va;
                    let row = &mut h[j as usize * p..j as usize * p + p];
                    if dense_row {
                        for (hl, &vb) in row[..=a].iter_mut().zip(&s.values[..=a]) {
                            *hl += wa * vb;
                        }
                    } else {
                        for (&l, &vb) in s.indices[..=a].iter().zip(&s.values[..=a]) {
                            row[l as usize] += wa * vb;
                        }
                    }
                }
            }
            h
        });
        let mut lower = vec![0.0; p * p];
        for part in partials {
            for (acc, v) in lower.iter_mut().zip(part) {
                *acc += v;
            }
        }
        let inv_n = 1.0 / self.n as f64;
        let h = DMatrix::from_fn(p, p, |i, j| {
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            lower[r * p + c] * inv_n
        });
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("Hessian is not finite"));
        }
        Ok(h)
    }

    /// Matrix-free `∇²L_n(x) v`.
    pub fn data_hessian_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v)?;
        let weights = self.hessian_weights(x)?;
        Ok(self
            .apply_weighted_block(&weights, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
            .column(0)
            .into_owned())
    }

    /// `∇²L_n(x) V` for a `p x b` block, with weights from [`Self::hessian_weights`].
    pub fn apply_weighted_block(&self, weights: &[f64], block: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.dim();
        let b = block.ncols();
        // Row-major copy so each sample touches contiguous rows.
        let rows: Vec<f64> = (0..p).flat_map(|j| (0..b).map(move |c| block[(j, c)])).collect();
        let partials = map_chunks(chunks(self.n, CHUNK), |r| {
            let mut acc = vec![0.0; p * b];
            let mut t = vec![0.0; b];
            for i in r {
                let s = self.data.sample(i);
                let w = weights[i];
                if w == 0.0 {
                    continue;
                }
                t.iter_mut().for_each(|x| *x = 0.0);
                for (&j, &v) in s.indices.iter().zip(s.values) {
                    let row = &rows[j as usize * b..j as usize * b + b];
                    for (tc, &rc) in t.iter_mut().zip(row) {
                        *tc += v * rc;
                    }
                }
                for (&j, &v) in s.indices.iter().zip(s.values) {
                    let wv = w * v;
                    let out = &mut acc[j as usize * b..j as usize * b + b];
                    for (oc, &tc) in out.iter_mut().zip(&t) {
                        *oc += wv * tc;
                    }
                }
            }
            acc
        });
        let mut sum = vec![0.0; p * b];
        for part in partials {
            for (acc, v) in sum.iter_mut().zip(part) {
                *acc += v;
            }
        }
        let inv_n = 1.0 / self.n as f64;
        DMatrix::from_fn(p, b, |j, c| sum[j * b + c] * inv_n)
    }

    /// `R_n(x) - R_n(y)` accumulated from per-sample loss differences, which
    /// keeps small suboptimalities accurate.
    pub fn value_difference(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let loss = self.config.loss;
        let (xs, ys) = (x.as_slice(), y.as_slice());
        let partials = map_chunks(chunks(self.n, CHUNK), |r| {
            r.map(|i| {
                let s = self.data.sample(i);
                loss.difference(s.label * s.dot(xs), s.label * s.dot(ys))
            })
            .sum::<f64>()
        });
        let data: f64 = partials.into_iter().sum::<f64>() / self.n as f64;
        let ridge = 0.5 * self.reg() * (x - y).dot(&(x + y));
        let d = data + ridge;
        if !d.is_finite() {
            return Err(Error::numeric("risk difference is not finite"));
        }
        Ok(d)
    }
}
