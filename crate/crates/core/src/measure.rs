//! Empirical measures of scalar observables: sorted samples, histograms,
//! quantiles and the exact 1-Wasserstein distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over the sample range; the last bin is closed.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("histogram of an empty sample"));
        }
        if bins == 0 {
            return Err(Error::input("histogram needs at least one bin"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("histogram of non-finite samples"));
        }
        let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            let pad = if lo == 0.0 { 1e-12 } else { lo.abs() * 1e-9 };
            lo -= pad;
            hi += pad;
        }
        let width = (hi - lo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        edges[bins] = hi;
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableMeasure {
    pub name: String,
    /// Sorted ascending.
    pub samples: Vec<f64>,
    pub histogram: Histogram,
}

impl ObservableMeasure {
    pub fn new(name: &str, mut samples: Vec<f64>, bins: usize) -> Result<Self> {
        let histogram = Histogram::from_samples(&samples, bins)?;
        samples.sort_by(f64::total_cmp);
        Ok(ObservableMeasure {
            name: name.to_string(),
            samples,
            histogram,
        })
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.samples, q)
    }

    pub fn iqr(&self) -> f64 {
        self.quantile(0.75) - self.quantile(0.25)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub n_samples: usize,
    pub observables: Vec<ObservableMeasure>,
}

impl EmpiricalMeasure {
    pub fn from_columns(columns: &[(&str, Vec<f64>)], bins: usize) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::input("observable columns differ in length"));
        }
        let observables = columns
            .iter()
            .map(|(name, col)| ObservableMeasure::new(name, col.clone(), bins))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmpiricalMeasure {
            n_samples: n,
            observables,
        })
    }

    pub fn get(&self, name: &str) -> Option<&ObservableMeasure> {
        self.observables.iter().find(|o| o.name == name)
    }
}

/// Linear-interpolated quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// `int |F_a - F_b|` for the empirical CDFs of two sample sets.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("wasserstein1 of an empty measure"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::input("wasserstein1 of non-finite samples"));
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = xa[0].min(xb[0]);
    let mut dist = 0.0;
    while i < xa.len() || j < xb.len() {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        dist += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < xa.len() && xa[i] == next {
            i += 1;
        }
        while j < xb.len() && xb[j] == next {
            j += 1;
        }
        prev = next;
    }
    Ok(dist)
}
