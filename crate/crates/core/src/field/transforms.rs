//! FFT-backed sine transforms (radial grids) and 3D transforms (box grids).

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// Orthonormal DST-I of length `n`, computed through an odd extension of length `2(n+1)`.
///
/// The matrix `S[k][m] = sqrt(2/(n+1)) sin(pi (k+1)(m+1)/(n+1))` is symmetric and
/// orthogonal, so the same plan performs the forward and the inverse transform.
#[derive(Clone)]
pub struct DstPlan {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl DstPlan {
    pub fn new(n: usize) -> Self {
        let fft = plan(2 * (n + 1), true);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        DstPlan { n, fft, buf: vec![Complex64::default(); 2 * (n + 1)], scratch }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place orthonormal DST-I of complex data (real and imaginary parts transform separately).
    pub fn apply(&mut self, x: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(x.len(), n, "DST length mismatch");
        let zero = Complex64::default();
        self.buf[0] = zero;
        self.buf[n + 1] = zero;
        for m in 0..n {
            self.buf[m + 1] = x[m];
            self.buf[2 * (n + 1) - 1 - m] = -x[m];
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = 0.5 * (2.0 / (n as f64 + 1.0)).sqrt();
        for k in 0..n {
            let z = self.buf[k + 1];
            x[k] = Complex64::new(-z.im * s, z.re * s);
        }
    }

    /// In-place orthonormal DST-I of real data.
    pub fn apply_real(&mut self, x: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n, "DST length mismatch");
        let zero = Complex64::default();
        self.buf[0] = zero;
        self.buf[n + 1] = zero;
        for m in 0..n {
            self.buf[m + 1] = Complex64::new(x[m], 0.0);
            self.buf[2 * (n + 1) - 1 - m] = Complex64::new(-x[m], 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = 0.5 * (2.0 / (n as f64 + 1.0)).sqrt();
        for k in 0..n {
            x[k] = -self.buf[k + 1].im * s;
        }
    }

    /// Two real transforms packed into one complex transform.
    pub fn apply_real_pair(&mut self, a: &mut [f64], b: &mut [f64]) {
        let n = self.n;
        assert!(a.len() == n && b.len() == n, "DST length mismatch");
        let zero = Complex64::default();
        self.buf[0] = zero;
        self.buf[n + 1] = zero;
        for m in 0..n {
            let z = Complex64::new(a[m], b[m]);
            self.buf[m + 1] = z;
            self.buf[2 * (n + 1) - 1 - m] = -z;
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = 0.5 * (2.0 / (n as f64 + 1.0)).sqrt();
        for k in 0..n {
            let z = self.buf[k + 1];
            a[k] = -z.im * s;
            b[k] = z.re * s;
        }
    }

    /// Cosine sums `y[m] = sum_k a[k] cos(pi (k+1)(m+1)/(n+1))` for complex `a`.
    pub fn cosine_sum(&mut self, a: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(a.len(), n, "cosine sum length mismatch");
        let zero = Complex64::default();
        self.buf[0] = zero;
        self.buf[n + 1] = zero;
        for k in 0..n {
            self.buf[k + 1] = a[k];
            self.buf[2 * (n + 1) - 1 - k] = a[k];
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        (0..n).map(|m| self.buf[m + 1] * 0.5).collect()
    }
}

/// Unnormalized forward / normalized inverse 3D FFT on an `n^3` array in row-major `(x, y, z)` order.
#[derive(Clone)]
pub struct Fft3Plan {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    block: Vec<Complex64>,
}

impl Fft3Plan {
    pub fn new(n: usize) -> Self {
        let fwd = plan(n, true);
        let inv = plan(n, false);
        let s = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Fft3Plan { n, fwd, inv, scratch: vec![Complex64::default(); s], block: vec![Complex64::default(); n * n] }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
        let s = 1.0 / (self.n * self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let n2 = n * n;
        assert_eq!(data.len(), n2 * n, "3D FFT length mismatch");
        let fft = if forward { self.fwd.clone() } else { self.inv.clone() };
        // z axis: contiguous lines.
        fft.process_with_scratch(data, &mut self.scratch);
        // y axis: transpose each x-slab.
        for x in 0..n {
            let slab = &mut data[x * n2..(x + 1) * n2];
            for y in 0..n {
                for z in 0..n {
                    self.block[z * n + y] = slab[y * n + z];
                }
            }
            fft.process_with_scratch(&mut self.block, &mut self.scratch);
            for y in 0..n {
                for z in 0..n {
                    slab[y * n + z] = self.block[z * n + y];
                }
            }
        }
        // x axis: for each y gather the (x, z) plane transposed.
        for y in 0..n {
            for x in 0..n {
                let row = &data[x * n2 + y * n..x * n2 + y * n + n];
                for z in 0..n {
                    self.block[z * n + x] = row[z];
                }
            }
            fft.process_with_scratch(&mut self.block, &mut self.scratch);
            for x in 0..n {
                let row = &mut data[x * n2 + y * n..x * n2 + y * n + n];
                for z in 0..n {
                    row[z] = self.block[z * n + x];
                }
            }
        }
    }
}

thread_local! {
    static DST_CACHE: RefCell<Vec<DstPlan>> = const { RefCell::new(Vec::new()) };
    static FFT3_CACHE: RefCell<Vec<Fft3Plan>> = const { RefCell::new(Vec::new()) };
}

/// Runs `f` with a cached per-thread DST plan of length `n`.
pub fn with_dst<R>(n: usize, f: impl FnOnce(&mut DstPlan) -> R) -> R {
    let mut p = DST_CACHE
        .with(|c| {
            let mut c = c.borrow_mut();
            c.iter().position(|p| p.n == n).map(|i| c.swap_remove(i))
        })
        .unwrap_or_else(|| DstPlan::new(n));
    let out = f(&mut p);
    DST_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() < 8 {
            c.push(p);
        }
    });
    out
}

/// Runs `f` with a cached per-thread 3D FFT plan of size `n^3`.
pub fn with_fft3<R>(n: usize, f: impl FnOnce(&mut Fft3Plan) -> R) -> R {
    let mut p = FFT3_CACHE
        .with(|c| {
            let mut c = c.borrow_mut();
            c.iter().position(|p| p.n == n).map(|i| c.swap_remove(i))
        })
        .unwrap_or_else(|| Fft3Plan::new(n));
    let out = f(&mut p);
    FFT3_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() < 4 {
            c.push(p);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dst_naive(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let s = (2.0 / (n as f64 + 1.0)).sqrt();
        (0..n)
            .map(|k| {
                s * (0..n)
                    .map(|m| x[m] * (std::f64::consts::PI * ((k + 1) * (m + 1)) as f64 / (n as f64 + 1.0)).sin())
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn dst_matches_naive_sum() {
        let n = 37;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let mut y = x.clone();
        DstPlan::new(n).apply_real(&mut y);
        let z = dst_naive(&x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dst_is_an_involution() {
        let n = 100;
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut y = x.clone();
        let mut p = DstPlan::new(n);
        p.apply(&mut y);
        p.apply(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn pair_transform_matches_two_single_transforms() {
        let n = 50;
        let a0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.17).sin()).collect();
        let b0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.41).cos()).collect();
        let (mut a, mut b) = (a0.clone(), b0.clone());
        let mut p = DstPlan::new(n);
        p.apply_real_pair(&mut a, &mut b);
        let (mut a1, mut b1) = (a0, b0);
        p.apply_real(&mut a1);
        p.apply_real(&mut b1);
        for i in 0..n {
            assert!((a[i] - a1[i]).abs() < 1e-13 && (b[i] - b1[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn cosine_sum_matches_naive() {
        let n = 20;
        let a: Vec<Complex64> = (0..n).map(|k| Complex64::new(1.0 / (k + 1) as f64, 0.5)).collect();
        let y = DstPlan::new(n).cosine_sum(&a);
        for m in 0..n {
            let e: Complex64 = (0..n)
                .map(|k| a[k] * (std::f64::consts::PI * ((k + 1) * (m + 1)) as f64 / (n as f64 + 1.0)).cos())
                .sum();
            assert!((e - y[m]).norm() < 1e-12);
        }
    }

    #[test]
    fn fft3_round_trip() {
        let n = 8;
        let x: Vec<Complex64> =
            (0..n * n * n).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut y = x.clone();
        let mut p = Fft3Plan::new(n);
        p.forward(&mut y);
        p.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn fft3_of_plane_wave_is_a_delta() {
        let n = 8;
        let (mx, my, mz) = (1usize, 2usize, 3usize);
        let mut x: Vec<Complex64> = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let ph = 2.0 * std::f64::consts::PI * ((mx * i + my * j + mz * k) as f64) / n as f64;
                    x.push(Complex64::new(ph.cos(), ph.sin()));
                }
            }
        }
        Fft3Plan::new(n).forward(&mut x);
        for (idx, z) in x.iter().enumerate() {
            let expect = if idx == mx * n * n + my * n + mz { (n * n * n) as f64 } else { 0.0 };
            assert!((z.re - expect).abs() < 1e-9 && z.im.abs() < 1e-9);
        }
    }
}
