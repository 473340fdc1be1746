use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Transform plans and Fourier multiplier tables for one grid.
///
/// Spectral arrays are stored transposed: the coefficient of
/// `exp(2πi (p x + q y))` lives at `q_index * N + p_index`.
pub(super) struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    laplacian: Vec<f64>,
    dz: Vec<Complex64>,
    work: Mutex<Workspace>,
}

/// Reused transform buffers; large fresh allocations dominate the cost otherwise.
struct Workspace {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

fn signed(idx: usize, n: usize) -> f64 {
    if idx <= n / 2 {
        idx as f64
    } else {
        idx as f64 - n as f64
    }
}

impl Spectral {
    pub(super) fn new(tau: Complex64, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let (a, b) = (tau.re, tau.im);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut laplacian = vec![0.0; n * n];
        let mut dz = vec![Complex64::new(0.0, 0.0); n * n];
        for qi in 0..n {
            for pi in 0..n {
                let (mut p, mut q) = (signed(pi, n), signed(qi, n));
                let nyquist = pi == n / 2 || qi == n / 2;
                if pi == n / 2 {
                    p = -p;
                }
                if qi == n / 2 {
                    q = -q;
                }
                // Physical wavevector of exp(2πi(p x + q y)) with X = x + a y, Y = b y.
                let kx = two_pi * p;
                let ky = two_pi * (q - p * a) / b;
                let idx = qi * n + pi;
                laplacian[idx] = -(kx * kx + ky * ky);
                if !nyquist {
                    // ∂_z = (∂_X - i ∂_Y) / 2
                    dz[idx] = Complex64::new(0.5 * ky, 0.5 * kx);
                }
            }
        }
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let zero = Complex64::new(0.0, 0.0);
        Spectral {
            n,
            fwd,
            inv,
            laplacian,
            dz,
            work: Mutex::new(Workspace {
                a: vec![zero; n * n],
                b: vec![zero; n * n],
                scratch: vec![zero; scratch_len],
            }),
        }
    }

    pub(super) fn laplacian_table(&self, idx: usize) -> f64 {
        self.laplacian[idx]
    }

    pub(super) fn max_wavenumber_sq(&self) -> f64 {
        self.laplacian.iter().fold(0.0, |m, &v| m.max(-v))
    }

    fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
        const B: usize = 16;
        for ib in (0..n).step_by(B) {
            for jb in (0..n).step_by(B) {
                for i in ib..(ib + B).min(n) {
                    for j in jb..(jb + B).min(n) {
                        dst[j * n + i] = src[i * n + j];
                    }
                }
            }
        }
    }

    /// Forward transform of `f` into `w.b` (transposed layout).
    fn forward(&self, f: &[f64], w: &mut Workspace) {
        for (c, &v) in w.a.iter_mut().zip(f) {
            *c = Complex64::new(v, 0.0);
        }
        self.fwd.process_with_scratch(&mut w.a, &mut w.scratch);
        Self::transpose(&w.a, &mut w.b, self.n);
        self.fwd.process_with_scratch(&mut w.b, &mut w.scratch);
    }

    /// Inverse transform of `w.b` into `w.a` (natural layout, unnormalized).
    fn inverse(&self, w: &mut Workspace) {
        self.inv.process_with_scratch(&mut w.b, &mut w.scratch);
        Self::transpose(&w.b, &mut w.a, self.n);
        self.inv.process_with_scratch(&mut w.a, &mut w.scratch);
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Workspace> {
        self.work.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Applies a real even multiplier and returns the real part.
    pub(super) fn apply_real<M: Fn(&Spectral, usize) -> f64>(&self, f: &[f64], mult: M) -> Vec<f64> {
        let mut guard = self.lock();
        let w = &mut *guard;
        self.forward(f, w);
        for (idx, c) in w.b.iter_mut().enumerate() {
            *c *= mult(self, idx);
        }
        self.inverse(w);
        let scale = 1.0 / (self.n * self.n) as f64;
        w.a.iter().map(|c| c.re * scale).collect()
    }

    pub(super) fn dz(&self, f: &[f64]) -> Vec<Complex64> {
        let mut guard = self.lock();
        let w = &mut *guard;
        self.forward(f, w);
        for (c, m) in w.b.iter_mut().zip(&self.dz) {
            *c *= m;
        }
        self.inverse(w);
        let scale = 1.0 / (self.n * self.n) as f64;
        w.a.iter().map(|c| c * scale).collect()
    }
}
