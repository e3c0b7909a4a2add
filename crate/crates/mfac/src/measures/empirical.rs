//! Weighted atom lists with exponential forgetting.
//!
//! The update `μ ← (1−ρ)μ + ρ δ_x` is implemented with a global scale factor
//! so existing atom weights never need to be touched: effective weight of
//! atom `i` is `raw_i · scale`. Atoms whose effective weight falls below the
//! prune threshold are dropped in periodic sweeps which also renormalize and
//! recompute the cached moments from scratch, keeping float drift bounded.

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-8;
const PRUNE_INTERVAL: u64 = 1024;
/// Rescale raw weights before the scale factor overflows.
const RAW_LIMIT: f64 = 1e100;

/// An empirical probability measure stored as a weighted list of state atoms
/// with cached first and second moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    /// Atom coordinates, flat row-major `(n_atoms, dim)`.
    coords: Vec<T>,
    /// Raw weights; effective weight is `raw * scale`.
    raw: Vec<T>,
    scale: T,
    /// Σ raw_i x_i (per coordinate).
    sum_x: Vec<T>,
    /// Σ raw_i x_i x_j, upper triangle row-major (dim*(dim+1)/2 entries).
    sum_xx: Vec<T>,
    /// Σ raw_i.
    sum_w: T,
    prune_threshold: T,
    updates_since_prune: u64,
    /// Exact-coordinate atom lookup for merging.
    #[serde(skip)]
    index: HashMap<Vec<u64>, usize>,
}

fn key_of<T: Scalar>(x: &[T]) -> Vec<u64> {
    x.iter()
        .map(|v| v.to_f64().unwrap_or(f64::NAN).to_bits())
        .collect()
}

impl<T: Scalar> EmpiricalMeasure<T> {
    /// A single unit-weight atom at `x` (the Dirac `δ_x`).
    pub fn dirac(x: &[T]) -> Self {
        let mut m = Self::empty(x.len());
        m.insert_atom(x, T::one());
        m
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            raw: Vec::new(),
            scale: T::one(),
            sum_x: vec![T::zero(); dim],
            sum_xx: vec![T::zero(); dim * (dim + 1) / 2],
            sum_w: T::zero(),
            prune_threshold: real(DEFAULT_PRUNE_THRESHOLD),
            updates_since_prune: 0,
            index: HashMap::new(),
        }
    }

    pub fn with_prune_threshold(mut self, eps: T) -> Self {
        self.prune_threshold = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_atoms(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Iterate `(state, effective weight)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.coords
            .chunks(self.dim)
            .zip(&self.raw)
            .map(move |(x, &w)| (x, w * self.scale))
    }

    fn insert_atom(&mut self, x: &[T], eff_weight: T) {
        let raw = eff_weight / self.scale;
        let key = key_of(x);
        let idx = match self.index.get(&key) {
            Some(&i) if self.coords[i * self.dim..(i + 1) * self.dim] == *x => {
                self.raw[i] += raw;
                i
            }
            _ => {
                let i = self.raw.len();
                self.coords.extend_from_slice(x);
                self.raw.push(raw);
                self.index.insert(key, i);
                i
            }
        };
        let _ = idx;
        self.sum_w += raw;
        let mut t = 0;
        for i in 0..self.dim {
            self.sum_x[i] += raw * x[i];
            for j in i..self.dim {
                self.sum_xx[t] += raw * x[i] * x[j];
                t += 1;
            }
        }
    }

    /// `μ ← (1−ρ)μ + ρ δ_x`, the exponential-forgetting update
    /// `μ_{n+1} = μ_n − ρ (μ_n − δ_x)`.
    ///
    /// Atoms at exactly identical coordinates merge. Weights below the prune
    /// threshold are dropped (with renormalization) in amortized sweeps.
    pub fn update(&mut self, x: &[T], rho: T) -> Result<()> {
        if !(rho >= T::zero() && rho <= T::one()) {
            return Err(Error::InvalidRate(rho.to_f64().unwrap_or(f64::NAN)));
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
                context: "measure update state",
            });
        }
        if rho == T::zero() {
            return Ok(());
        }
        if rho == T::one() || self.is_empty() {
            *self = Self::empty(self.dim).with_prune_threshold(self.prune_threshold);
            self.insert_atom(x, T::one());
            return Ok(());
        }
        self.scale *= T::one() - rho;
        self.insert_atom(x, rho);
        self.updates_since_prune += 1;
        if self.updates_since_prune >= PRUNE_INTERVAL
            || self.sum_w.to_f64().map_or(true, |w| w.abs() > RAW_LIMIT)
        {
            self.prune();
        }
        Ok(())
    }

    /// Drop atoms with effective weight below the threshold, renormalize to
    /// total weight one, and rebuild the cached moments exactly.
    /// Returns the total effective weight removed.
    pub fn prune(&mut self) -> T {
        self.updates_since_prune = 0;
        let eps = self.prune_threshold;
        let dim = self.dim;
        let mut kept_coords = Vec::with_capacity(self.coords.len());
        let mut kept_raw = Vec::with_capacity(self.raw.len());
        let mut removed = T::zero();
        for (i, &w) in self.raw.iter().enumerate() {
            let eff = w * self.scale;
            if eff < eps {
                removed += eff;
            } else {
                kept_coords.extend_from_slice(&self.coords[i * dim..(i + 1) * dim]);
                kept_raw.push(eff);
            }
        }
        if kept_raw.is_empty() {
            // Degenerate: everything below threshold; keep the heaviest atom.
            if let Some((i, &w)) = self
                .raw
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            {
                kept_coords.extend_from_slice(&self.coords[i * dim..(i + 1) * dim]);
                kept_raw.push(w * self.scale);
                removed -= w * self.scale;
            }
        }
        let total: T = kept_raw.iter().copied().sum();
        self.coords = kept_coords;
        self.raw = kept_raw.iter().map(|&w| w / total).collect();
        self.scale = T::one();
        self.index = self
            .coords
            .chunks(dim)
            .enumerate()
            .map(|(i, x)| (key_of(x), i))
            .collect();
        self.sum_w = self.raw.iter().copied().sum();
        self.sum_x = vec![T::zero(); dim];
        self.sum_xx = vec![T::zero(); dim * (dim + 1) / 2];
        for (i, x) in self.coords.chunks(dim).enumerate() {
            let w = self.raw[i];
            let mut t = 0;
            for a in 0..dim {
                self.sum_x[a] += w * x[a];
                for b in a..dim {
                    self.sum_xx[t] += w * x[a] * x[b];
                    t += 1;
                }
            }
        }
        removed
    }

    /// Total effective weight (1 within float drift after every update).
    pub fn total_weight(&self) -> T {
        self.sum_w * self.scale
    }

    /// Cached weighted mean.
    pub fn mean(&self) -> Result<Vec<T>> {
        if self.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let w = self.total_weight();
        Ok(self.sum_x.iter().map(|&s| s * self.scale / w).collect())
    }

    /// Weighted covariance matrix, row-major `(dim, dim)`.
    pub fn covariance(&self) -> Result<Vec<T>> {
        if self.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let w = self.total_weight();
        let mean = self.mean()?;
        let mut cov = vec![T::zero(); self.dim * self.dim];
        let mut t = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let second = self.sum_xx[t] * self.scale / w;
                let c = second - mean[i] * mean[j];
                cov[i * self.dim + j] = c;
                cov[j * self.dim + i] = c;
                t += 1;
            }
        }
        Ok(cov)
    }

    /// Scalar variance for 1-d measures.
    pub fn variance(&self) -> Result<T> {
        Ok(self.covariance()?[0])
    }

    /// Draw an atom according to the weights.
    pub fn sample_atom<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        if self.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let u: T = rng.gen_range(T::zero()..self.total_weight());
        let mut acc = T::zero();
        for (x, w) in self.atoms() {
            acc += w;
            if u < acc {
                return Ok(x.to_vec());
            }
        }
        Ok(self.coords[(self.n_atoms() - 1) * self.dim..].to_vec())
    }

    /// CSV export: one `x1,…,xd,weight` row per atom.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.dim {
            out.push_str(&format!("x{i},"));
        }
        out.push_str("weight\n");
        for (x, w) in self.atoms() {
            for v in x {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{w}\n"));
        }
        out
    }
}
