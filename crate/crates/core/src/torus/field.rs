use crate::error::{Error, Result};

/// Real samples of a periodic function on the `N x N` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_vec(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "field length must be N^2");
        ScalarField { n, values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        ScalarField {
            n,
            values: vec![c; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        ScalarField {
            n: self.n,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> ScalarField {
        debug_assert_eq!(self.len(), other.len());
        ScalarField {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn zip_apply<F: Fn(f64, f64) -> f64>(&mut self, other: &ScalarField, f: F) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = f(*a, b);
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn add_scalar(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &ScalarField) {
        debug_assert_eq!(self.len(), x.len());
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index of the (first) maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Mean in a fixed summation order.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Supremum over samples where `mask` holds; `-inf` if the mask is empty.
    pub fn masked_sup(&self, mask: &[bool]) -> f64 {
        self.values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold(f64::NEG_INFINITY, |acc, (&v, _)| acc.max(v))
    }
}

/// A (1,1)-form represented by its density `g` in `g · i dz ^ dzbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density11 {
    dens: ScalarField,
}

impl Density11 {
    pub fn new(dens: ScalarField) -> Self {
        Density11 { dens }
    }

    /// Builds a density and checks that it defines a Kähler metric.
    pub fn metric(dens: ScalarField) -> Result<Self> {
        let d = Density11 { dens };
        d.ensure_metric()?;
        Ok(d)
    }

    pub fn dens(&self) -> &ScalarField {
        &self.dens
    }

    pub fn into_field(self) -> ScalarField {
        self.dens
    }

    pub fn ensure_metric(&self) -> Result<()> {
        let min = self.dens.inf();
        if !(min > 0.0) {
            return Err(Error::NotAMetric { min });
        }
        Ok(())
    }

    /// Pointwise trace `tr_self(other) = dens(other) / dens(self)` in complex dimension one.
    pub fn trace_of(&self, other: &Density11) -> ScalarField {
        other.dens.zip_map(&self.dens, |a, g| a / g)
    }
}
