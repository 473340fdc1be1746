//! Discrete complex calculus on the flat torus `C / (Z + tau Z)`.
//!
//! The fundamental domain is sampled on an `N x N` grid in lattice
//! coordinates `(x, y) in [0,1)^2` with `z = x + tau * y`. Sample `(i, j)` sits
//! at `(i/N, j/N)` and is stored at flat index `i * N + j`.
//!
//! Every (1,1)-form is carried as its density against `i dz ^ dzbar`, so
//! `i ddbar f` has density `Δf / 4` and `i dz ^ dzbar = 2 Im(tau) dx ^ dy`.

mod field;
mod spectral;
pub mod theta;

pub use field::{Density11, ScalarField};

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use spectral::Spectral;

/// Discretized flat torus with cached transform plans and multiplier tables.
#[derive(Clone)]
pub struct TorusDomain {
    tau: Complex64,
    n: usize,
    spectral: Arc<Spectral>,
}

impl std::fmt::Debug for TorusDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusDomain")
            .field("tau", &self.tau)
            .field("n", &self.n)
            .finish()
    }
}

/// Removes the mean, which derivatives ignore; transform roundoff scales with the input norm.
fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

impl TorusDomain {
    pub fn new(tau: Complex64, n: usize) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() {
            return Err(Error::DegenerateLattice(tau.im));
        }
        if n < 16 || n % 2 != 0 {
            return Err(Error::GridTooCoarse(n));
        }
        Ok(TorusDomain {
            tau,
            n,
            spectral: Arc::new(Spectral::new(tau, n)),
        })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Euclidean area of the fundamental domain, `Im tau`.
    pub fn area(&self) -> f64 {
        self.tau.im
    }

    /// Smallest physical grid spacing along the two lattice directions.
    pub fn spacing(&self) -> f64 {
        1.0_f64.min(self.tau.norm()) / self.n as f64
    }

    /// Lattice coordinates of sample `(i, j)`.
    pub fn lattice_coords(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 / self.n as f64, j as f64 / self.n as f64)
    }

    /// Complex coordinate `z = x + tau y` of sample `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        let (x, y) = self.lattice_coords(i, j);
        Complex64::new(x, 0.0) + self.tau * y
    }

    /// Lattice coordinates `(x, y)` of a complex point, `z = x + tau y`.
    pub fn to_lattice(&self, z: Complex64) -> (f64, f64) {
        let y = z.im / self.tau.im;
        (z.re - self.tau.re * y, y)
    }

    /// Representative of `w` modulo the lattice with both lattice coordinates in `[-1/2, 1/2)`.
    pub fn reduce(&self, w: Complex64) -> Complex64 {
        let (x, y) = self.to_lattice(w);
        let x = x - (x + 0.5).floor();
        let y = y - (y + 0.5).floor();
        Complex64::new(x, 0.0) + self.tau * y
    }

    /// Flat distance between two points on the torus.
    pub fn distance(&self, a: Complex64, b: Complex64) -> f64 {
        let w = self.reduce(a - b);
        let mut best = f64::INFINITY;
        for p in -1..=1 {
            for q in -1..=1 {
                let d = (w + Complex64::new(p as f64, 0.0) + self.tau * q as f64).norm();
                best = best.min(d);
            }
        }
        best
    }

    /// Samples `f(x, y)` given in lattice coordinates.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> ScalarField {
        let n = self.n;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = self.lattice_coords(i, j);
                values.push(f(x, y));
            }
        }
        ScalarField::from_vec(n, values)
    }

    /// Distance of every sample to the nearest of `points`.
    pub fn distance_field(&self, points: &[Complex64]) -> ScalarField {
        let n = self.n;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.point(i, j);
                let d = points
                    .iter()
                    .map(|&p| self.distance(z, p))
                    .fold(f64::INFINITY, f64::min);
                values.push(d);
            }
        }
        ScalarField::from_vec(n, values)
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Flat Laplacian with respect to `|dz|^2`, computed spectrally.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        if !f.is_finite() {
            return Err(Error::NonFinite("laplacian input"));
        }
        Ok(ScalarField::from_vec(
            self.n,
            self.spectral
                .apply_real(&centered(f.values()), Spectral::laplacian_table),
        ))
    }

    /// Density of `i ddbar f`, i.e. `Δf / 4`.
    pub fn ddbar_density(&self, f: &ScalarField) -> Result<Density11> {
        let mut lap = self.laplacian(f)?;
        lap.scale(0.25);
        Ok(Density11::new(lap))
    }

    /// `∂f/∂z` as a complex grid function.
    pub fn dz(&self, f: &ScalarField) -> Result<Vec<Complex64>> {
        self.check(f)?;
        if !f.is_finite() {
            return Err(Error::NonFinite("dz input"));
        }
        Ok(self.spectral.dz(&centered(f.values())))
    }

    /// `|∂f/∂z|^2`, a quarter of the Euclidean gradient norm squared.
    pub fn grad_sq_flat(&self, f: &ScalarField) -> Result<ScalarField> {
        let d = self.dz(f)?;
        Ok(ScalarField::from_vec(
            self.n,
            d.iter().map(|c| c.norm_sqr()).collect(),
        ))
    }

    /// `|∂f|^2` measured in the metric `g i dz ^ dzbar`, i.e. `|∂_z f|^2 / g`.
    pub fn grad_sq_metric(&self, f: &ScalarField, g: &Density11) -> Result<ScalarField> {
        self.check(g.dens())?;
        g.ensure_metric()?;
        let mut out = self.grad_sq_flat(f)?;
        out.zip_apply(g.dens(), |a, b| a / b);
        Ok(out)
    }

    /// Solves `(shift - Δ/4) v = rhs` spectrally; `shift > 0`.
    pub fn solve_shifted(&self, shift: f64, rhs: &ScalarField) -> Result<ScalarField> {
        self.check(rhs)?;
        Ok(ScalarField::from_vec(
            self.n,
            self.spectral
                .apply_real(rhs.values(), |s, idx| 1.0 / (shift - 0.25 * s.laplacian_table(idx))),
        ))
    }

    /// Largest `|k|²` on the grid, the spectral radius of `-Δ`.
    pub fn max_wavenumber_sq(&self) -> f64 {
        self.spectral.max_wavenumber_sq()
    }

    /// `∫_M w` with `i dz ^ dzbar = 2 Im(tau) dx ^ dy`.
    pub fn integrate(&self, w: &Density11) -> f64 {
        2.0 * self.area() * w.dens().mean()
    }
}
