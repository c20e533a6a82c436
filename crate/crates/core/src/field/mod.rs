//! Discretization substrate: radial and periodic-box grids, spectral transforms,
//! Fourier multipliers and the real inner product / symplectic pairing.
//!
//! A radial field stores samples of `u(r_m)` at the interior nodes `r_m = m dr`,
//! `m = 1..n`, `dr = R/(n+1)`. Spectral work is done on `psi = r u` in the
//! orthonormal Dirichlet sine basis with wavenumbers `xi_k = k pi / R`.
//! A box field stores samples on the periodic lattice `x_j = -L/2 + j dx`.

mod snapshot;
mod transforms;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use rustfft::num_complex::Complex64;
pub use snapshot::{decode, encode, read_snapshot, write_snapshot, Snapshot};
pub use transforms::{with_dst, with_fft3, DstPlan, Fft3Plan};

use crate::error::{Error, Result};

/// Imaginary unit.
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Radial grid for functions of `|x|` on the ball of radius `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if n < 64 {
            return Err(Error::InvalidGrid(format!("radial grid needs n >= 64, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("radius must be positive, got {r_max}")));
        }
        Ok(RadialGrid { r_max, n })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dr(&self) -> f64 {
        self.r_max / (self.n as f64 + 1.0)
    }

    /// Node `r_{m+1}` for zero-based index `m`.
    pub fn node(&self, m: usize) -> f64 {
        (m as f64 + 1.0) * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.node(m)).collect()
    }

    /// Wavenumber of zero-based sine mode `k`.
    pub fn xi(&self, k: usize) -> f64 {
        (k as f64 + 1.0) * PI / self.r_max
    }

    /// Quadrature weight `4 pi dr` of the `psi`-space sums.
    pub fn weight(&self) -> f64 {
        4.0 * PI * self.dr()
    }

    /// Same-radius grid with `n` modes; coefficient truncation or zero padding is exact resampling.
    pub fn with_modes(&self, n: usize) -> Result<Self> {
        RadialGrid::new(self.r_max, n)
    }

    /// Sine coefficients of `psi = r u` (orthonormal DST).
    pub fn coeffs(&self, u: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(u.len(), self.n);
        let dr = self.dr();
        let mut psi: Vec<Complex64> = u.iter().enumerate().map(|(m, &z)| z * ((m as f64 + 1.0) * dr)).collect();
        with_dst(self.n, |p| p.apply(&mut psi));
        psi
    }

    /// Samples `u(r_m)` from sine coefficients of `psi`.
    pub fn samples(&self, c: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(c.len(), self.n);
        let mut psi = c.to_vec();
        with_dst(self.n, |p| p.apply(&mut psi));
        let dr = self.dr();
        for (m, z) in psi.iter_mut().enumerate() {
            *z /= (m as f64 + 1.0) * dr;
        }
        psi
    }

    /// Real-valued variant of [`RadialGrid::coeffs`].
    pub fn coeffs_real(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.n);
        let dr = self.dr();
        let mut psi: Vec<f64> = u.iter().enumerate().map(|(m, &x)| x * (m as f64 + 1.0) * dr).collect();
        with_dst(self.n, |p| p.apply_real(&mut psi));
        psi
    }

    /// Real-valued variant of [`RadialGrid::samples`].
    pub fn samples_real(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n);
        let mut psi = c.to_vec();
        with_dst(self.n, |p| p.apply_real(&mut psi));
        let dr = self.dr();
        for (m, x) in psi.iter_mut().enumerate() {
            *x /= (m as f64 + 1.0) * dr;
        }
        psi
    }

    /// Value at `r = 0` via `u(0) = psi'(0)` from the sine series.
    pub fn value_at_origin(&self, c: &[f64]) -> f64 {
        let s = (2.0 / (self.n as f64 + 1.0)).sqrt();
        c.iter().enumerate().map(|(k, &ck)| s * ck * self.xi(k)).sum()
    }

    /// Evaluates the sine-series interpolant of `u` at an arbitrary radius.
    pub fn eval(&self, c: &[f64], r: f64) -> f64 {
        if r <= 0.0 {
            return self.value_at_origin(c);
        }
        let s = (2.0 / (self.n as f64 + 1.0)).sqrt();
        let psi: f64 = c.iter().enumerate().map(|(k, &ck)| ck * (self.xi(k) * r).sin()).sum();
        s * psi / r
    }

    /// Radial derivative `du/dr` at the nodes, spectrally.
    pub fn radial_derivative(&self, u: &[Complex64]) -> Vec<Complex64> {
        let c = self.coeffs(u);
        let s = (2.0 / (self.n as f64 + 1.0)).sqrt();
        let a: Vec<Complex64> = c.iter().enumerate().map(|(k, &ck)| ck * (s * self.xi(k))).collect();
        let dpsi = with_dst(self.n, |p| p.cosine_sum(&a));
        let dr = self.dr();
        (0..self.n)
            .map(|m| {
                let r = (m as f64 + 1.0) * dr;
                (dpsi[m] - u[m]) / r
            })
            .collect()
    }

    /// Multiplies each sine coefficient by `sym(xi_k^2)`.
    fn apply_symbol(&self, u: &[Complex64], sym: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        let mut c = self.coeffs(u);
        for (k, z) in c.iter_mut().enumerate() {
            let x = self.xi(k);
            *z *= sym(x * x);
        }
        self.samples(&c)
    }
}

fn pad_index(mode: i64, m: usize) -> usize {
    if mode >= 0 {
        mode as usize
    } else {
        (m as i64 + mode) as usize
    }
}

/// Periodic box `[-L/2, L/2)^3` with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    l: f64,
    n: usize,
}

impl BoxGrid {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("box grid needs n a power of two >= 4, got {n}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {l}")));
        }
        Ok(BoxGrid { l, n })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.l + j as f64 * self.dx()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n;
        [self.coord(idx / (n * n)), self.coord((idx / n) % n), self.coord(idx % n)]
    }

    /// Signed integer frequency of FFT index `j`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular wavenumber `2 pi m / L` of FFT index `j`.
    pub fn freq(&self, j: usize) -> f64 {
        2.0 * PI * self.mode(j) as f64 / self.l
    }

    /// Wavenumber used for odd (derivative) symbols; the Nyquist mode is dropped.
    pub fn freq_odd(&self, j: usize) -> f64 {
        if j == self.n / 2 {
            0.0
        } else {
            self.freq(j)
        }
    }

    /// Two-thirds rule mask value for a mode triple.
    pub fn keeps(&self, i: usize, j: usize, k: usize) -> bool {
        let cut = self.n as i64 / 3;
        self.mode(i).abs() <= cut && self.mode(j).abs() <= cut && self.mode(k).abs() <= cut
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    /// `|xi|^2` for every lattice mode in FFT order.
    pub fn xi2(&self) -> Vec<f64> {
        let n = self.n;
        let f: Vec<f64> = (0..n).map(|j| self.freq(j)).collect();
        let mut out = Vec::with_capacity(self.len());
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    out.push(f[i] * f[i] + f[j] * f[j] + f[k] * f[k]);
                }
            }
        }
        out
    }

    pub fn fft(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut a = u.to_vec();
        with_fft3(self.n, |p| p.forward(&mut a));
        a
    }

    pub fn ifft(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut u = a.to_vec();
        with_fft3(self.n, |p| p.inverse(&mut u));
        u
    }

    fn apply_symbol(&self, u: &[Complex64], sym: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        let mut a = self.fft(u);
        for (z, x2) in a.iter_mut().zip(self.xi2()) {
            *z *= sym(x2);
        }
        let mut out = a;
        with_fft3(self.n, |p| p.inverse(&mut out));
        out
    }

    /// Spectral partial derivative along `axis`.
    pub fn derivative(&self, u: &[Complex64], axis: usize) -> Vec<Complex64> {
        let n = self.n;
        let mut a = self.fft(u);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let m = [i, j, k][axis];
                    a[self.index(i, j, k)] *= I * self.freq_odd(m);
                }
            }
        }
        with_fft3(n, |p| p.inverse(&mut a));
        a
    }

    /// Zeroes the modes outside the two-thirds mask of a spectrum in FFT order.
    pub fn mask_modes(&self, a: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if !self.keeps(i, j, k) {
                        a[self.index(i, j, k)] = Complex64::default();
                    }
                }
            }
        }
    }

    fn padded_slot(&self, i: usize, j: usize, k: usize) -> usize {
        let m = 3 * self.n / 2;
        (pad_index(self.mode(i), m) * m + pad_index(self.mode(j), m)) * m + pad_index(self.mode(k), m)
    }

    /// Real samples on the `3n/2` padded grid of the masked part of spectrum `h`.
    fn pad_to_physical(&self, h: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        let m = 3 * n / 2;
        let scale = (m as f64 / n as f64).powi(3);
        let mut p = vec![Complex64::default(); m * m * m];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.keeps(i, j, k) {
                        p[self.padded_slot(i, j, k)] = h[self.index(i, j, k)] * scale;
                    }
                }
            }
        }
        with_fft3(m, |pl| pl.inverse(&mut p));
        p.iter().map(|z| z.re).collect()
    }

    /// Masked `n`-grid spectrum of samples given on the padded grid.
    fn truncate_from_physical(&self, mut prod: Vec<Complex64>) -> Vec<Complex64> {
        let n = self.n;
        let m = 3 * n / 2;
        with_fft3(m, |pl| pl.forward(&mut prod));
        let scale = (n as f64 / m as f64).powi(3);
        let mut h = vec![Complex64::default(); n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if self.keeps(i, j, k) {
                        h[self.index(i, j, k)] = prod[self.padded_slot(i, j, k)] * scale;
                    }
                }
            }
        }
        h
    }

    /// Spectrum of `Pi(a^3)` from the spectrum of a real field `a`, without aliasing.
    pub fn cube_spectral(&self, a_hat: &[Complex64]) -> Vec<Complex64> {
        let pa = self.pad_to_physical(a_hat);
        self.truncate_from_physical(pa.iter().map(|x| Complex64::new(x * x * x, 0.0)).collect())
    }

    /// Two-thirds-masked product `Pi(a b c)` computed without aliasing on a `3n/2` padded grid.
    pub fn product3(&self, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
        let spec = |u: &[f64]| self.fft(&u.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
        let pa = self.pad_to_physical(&spec(a));
        let prod: Vec<Complex64> = if std::ptr::eq(a, b) && std::ptr::eq(b, c) {
            pa.iter().map(|x| Complex64::new(x * x * x, 0.0)).collect()
        } else {
            let pb = if std::ptr::eq(a, b) { pa.clone() } else { self.pad_to_physical(&spec(b)) };
            let pc = if std::ptr::eq(b, c) { pb.clone() } else { self.pad_to_physical(&spec(c)) };
            pa.iter().zip(&pb).zip(&pc).map(|((x, y), z)| Complex64::new(x * y * z, 0.0)).collect()
        };
        drop(pa);
        let mut h = self.truncate_from_physical(prod);
        with_fft3(self.n, |pl| pl.inverse(&mut h));
        h.iter().map(|z| z.re).collect()
    }

    /// Applies the two-thirds dealiasing mask.
    pub fn dealias(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut a = self.fft(u);
        self.mask_modes(&mut a);
        with_fft3(self.n, |p| p.inverse(&mut a));
        a
    }

    /// Translates a field by `shift` through Fourier phases: returns `u(x - shift)`.
    pub fn translate(&self, u: &[Complex64], shift: [f64; 3]) -> Vec<Complex64> {
        let n = self.n;
        let mut a = self.fft(u);
        let f: Vec<f64> = (0..n).map(|j| self.freq_odd(j)).collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let ph = -(f[i] * shift[0] + f[j] * shift[1] + f[k] * shift[2]);
                    a[self.index(i, j, k)] *= Complex64::new(ph.cos(), ph.sin());
                }
            }
        }
        with_fft3(n, |p| p.inverse(&mut a));
        a
    }
}

/// A grid reference carried by every field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Grid {
    Radial(RadialGrid),
    Box(BoxGrid),
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Radial(g) => g.n(),
            Grid::Box(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Grid::Radial(_))
    }

    pub fn radial(&self) -> Option<&RadialGrid> {
        match self {
            Grid::Radial(g) => Some(g),
            Grid::Box(_) => None,
        }
    }

    pub fn boxed(&self) -> Option<&BoxGrid> {
        match self {
            Grid::Box(b) => Some(b),
            Grid::Radial(_) => None,
        }
    }

    /// Quadrature weights `w_m` with `integral f ~ sum w_m f_m`.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Grid::Radial(g) => {
                let w = g.weight();
                (0..g.n()).map(|m| w * g.node(m) * g.node(m)).collect()
            }
            Grid::Box(b) => vec![b.cell_volume(); b.len()],
        }
    }

    /// Real integral of a sampled function with the grid quadrature.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        match self {
            Grid::Radial(g) => {
                let w = g.weight();
                f.iter().enumerate().map(|(m, &v)| v * g.node(m) * g.node(m)).sum::<f64>() * w
            }
            Grid::Box(b) => f.iter().sum::<f64>() * b.cell_volume(),
        }
    }

    /// `Re integral f conj(g)` for real arrays.
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        match self {
            Grid::Radial(rg) => {
                let w = rg.weight();
                let dr = rg.dr();
                f.iter()
                    .zip(g)
                    .enumerate()
                    .map(|(m, (&a, &b))| {
                        let r = (m as f64 + 1.0) * dr;
                        a * b * r * r
                    })
                    .sum::<f64>()
                    * w
            }
            Grid::Box(b) => f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * b.cell_volume(),
        }
    }

    fn apply_symbol(&self, u: &[Complex64], sym: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        match self {
            Grid::Radial(g) => g.apply_symbol(u, sym),
            Grid::Box(b) => b.apply_symbol(u, sym),
        }
    }

    /// Applies a radial Fourier symbol `sym(|xi|^2)` to a real array.
    pub fn apply_real_symbol(&self, u: &[f64], sym: impl Fn(f64) -> f64) -> Vec<f64> {
        match self {
            Grid::Radial(g) => {
                let mut c = g.coeffs_real(u);
                for (k, z) in c.iter_mut().enumerate() {
                    let x = g.xi(k);
                    *z *= sym(x * x);
                }
                g.samples_real(&c)
            }
            Grid::Box(b) => {
                let z: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                b.apply_symbol(&z, |x2| Complex64::new(sym(x2), 0.0)).iter().map(|z| z.re).collect()
            }
        }
    }

    /// `sqrt(1 - Delta)` on a real array.
    pub fn d_real(&self, u: &[f64]) -> Vec<f64> {
        self.apply_real_symbol(u, |x2| (1.0 + x2).sqrt())
    }

    /// `(1 - Delta)^{-1/2}` on a real array.
    pub fn d_inv_real(&self, u: &[f64]) -> Vec<f64> {
        self.apply_real_symbol(u, |x2| 1.0 / (1.0 + x2).sqrt())
    }

    /// `1 - Delta` on a real array.
    pub fn helmholtz_real(&self, u: &[f64]) -> Vec<f64> {
        self.apply_real_symbol(u, |x2| 1.0 + x2)
    }

    /// `(1 - Delta)^{-1}` on a real array.
    pub fn helmholtz_inv_real(&self, u: &[f64]) -> Vec<f64> {
        self.apply_real_symbol(u, |x2| 1.0 / (1.0 + x2))
    }

    /// `integral |grad f|^2` for a real array, spectrally.
    pub fn gradient_norm2(&self, u: &[f64]) -> f64 {
        match self {
            Grid::Radial(g) => {
                let c = g.coeffs_real(u);
                g.weight() * c.iter().enumerate().map(|(k, &x)| (g.xi(k) * x).powi(2)).sum::<f64>()
            }
            Grid::Box(b) => {
                let z: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                let a = b.fft(&z);
                let s = b.cell_volume() / b.len() as f64;
                a.iter().zip(b.xi2()).map(|(z, x2)| z.norm_sqr() * x2).sum::<f64>() * s
            }
        }
    }
}

/// Fourier multiplier tags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multiplier {
    /// `sqrt(1 + |xi|^2)`
    D,
    /// `1 / sqrt(1 + |xi|^2)`
    DInv,
    /// `exp(i t sqrt(1 + |xi|^2))`
    ExpIDt(f64),
    /// `-|xi|^2`
    Laplacian,
}

impl Multiplier {
    pub fn symbol(&self, xi2: f64) -> Complex64 {
        match *self {
            Multiplier::D => Complex64::new((1.0 + xi2).sqrt(), 0.0),
            Multiplier::DInv => Complex64::new(1.0 / (1.0 + xi2).sqrt(), 0.0),
            Multiplier::ExpIDt(t) => {
                let w = (1.0 + xi2).sqrt() * t;
                Complex64::new(w.cos(), w.sin())
            }
            Multiplier::Laplacian => Complex64::new(-xi2, 0.0),
        }
    }
}

/// Pairing selector for [`pair`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Inner,
    Omega,
}

/// Complex state sampled on a radial or box grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch(format!("expected {} samples, got {}", grid.len(), data.len())));
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Field { grid, data })
    }

    /// Builds a field from data known to be finite and of the right length.
    pub(crate) fn from_raw(grid: Grid, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Field { grid, data }
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, data: vec![Complex64::default(); grid.len()] }
    }

    pub fn from_real(grid: Grid, re: &[f64]) -> Result<Self> {
        Field::new(grid, re.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// `u = D u1 + i u2` from the real components.
    pub fn from_components(grid: Grid, u1: &[f64], u2: &[f64]) -> Result<Self> {
        if u1.len() != grid.len() || u2.len() != grid.len() {
            return Err(Error::GridMismatch("component length".into()));
        }
        let d1 = grid.d_real(u1);
        Field::new(grid, d1.iter().zip(u2).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    /// Static state `(w, w_t) = (q, 0)`, i.e. `u = D q`.
    pub fn static_state(grid: Grid, q: &[f64]) -> Result<Self> {
        Field::from_components(grid, q, &vec![0.0; q.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn is_radial(&self) -> bool {
        self.grid.is_radial()
    }

    pub fn is_box(&self) -> bool {
        !self.grid.is_radial()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `u1 = D^{-1} Re u` (the field `w`).
    pub fn u1(&self) -> Vec<f64> {
        let re: Vec<f64> = self.data.iter().map(|z| z.re).collect();
        self.grid.d_inv_real(&re)
    }

    /// `u2 = Im u` (equal to `-w_t`).
    pub fn u2(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    /// Applies a Fourier multiplier.
    pub fn apply(&self, m: Multiplier) -> Field {
        Field::from_raw(self.grid, self.grid.apply_symbol(&self.data, |x2| m.symbol(x2)))
    }

    pub fn scale(&self, s: f64) -> Field {
        Field::from_raw(self.grid, self.data.iter().map(|z| z * s).collect())
    }

    pub fn scale_complex(&self, s: Complex64) -> Field {
        Field::from_raw(self.grid, self.data.iter().map(|z| z * s).collect())
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field::from_raw(self.grid, self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect()))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field::from_raw(self.grid, self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect()))
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field::from_raw(self.grid, self.data.iter().zip(&other.data).map(|(a, b)| a + b * s).collect()))
    }

    pub fn conj(&self) -> Field {
        Field::from_raw(self.grid, self.data.iter().map(|z| z.conj()).collect())
    }

    /// Discrete `L^2` norm with the grid quadrature.
    pub fn norm(&self) -> f64 {
        let w = self.grid.weights();
        self.data.iter().zip(&w).map(|(z, w)| z.norm_sqr() * w).sum::<f64>().sqrt()
    }

    /// Norm computed from transform coefficients (Parseval).
    pub fn spectral_norm(&self) -> f64 {
        match &self.grid {
            Grid::Radial(g) => {
                let c = g.coeffs(&self.data);
                (g.weight() * c.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
            }
            Grid::Box(b) => {
                let a = b.fft(&self.data);
                (b.cell_volume() / b.len() as f64 * a.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Applies a multiplier after checking that `f` lives on the caller's grid.
pub fn apply_multiplier(grid: &Grid, f: &Field, m: Multiplier) -> Result<Field> {
    if f.grid() != grid {
        return Err(Error::GridMismatch("field does not live on the requested grid".into()));
    }
    Ok(f.apply(m))
}

/// `Re integral f conj(g)` with quadrature weights.
pub fn inner(f: &Field, g: &Field) -> Result<f64> {
    f.check_same(g)?;
    let w = f.grid.weights();
    Ok(f.data.iter().zip(&g.data).zip(&w).map(|((a, b), w)| (a * b.conj()).re * w).sum())
}

/// Symplectic form `omega(f, g) = <i D^{-1} f | g>`.
pub fn omega(f: &Field, g: &Field) -> Result<f64> {
    f.check_same(g)?;
    let h = f.apply(Multiplier::DInv).scale_complex(I);
    inner(&h, g)
}

/// Pairing dispatch.
pub fn pair(f: &Field, g: &Field, form: Form) -> Result<f64> {
    match form {
        Form::Inner => inner(f, g),
        Form::Omega => omega(f, g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial() -> Grid {
        Grid::Radial(RadialGrid::new(20.0, 127).unwrap())
    }

    fn smooth(grid: &Grid, seed: f64) -> Field {
        let g = grid.radial().unwrap();
        let data = (0..g.n())
            .map(|m| {
                let r = g.node(m);
                Complex64::new((-r * r / 4.0).exp() * (1.0 + seed * r).cos(), seed * (-r * r / 3.0).exp())
            })
            .collect();
        Field::new(*grid, data).unwrap()
    }

    #[test]
    fn d_then_d_inv_is_identity() {
        let f = smooth(&radial(), 0.3);
        let g = f.apply(Multiplier::D).apply(Multiplier::DInv);
        assert!(g.sub(&f).unwrap().norm() / f.norm() < 1e-12);
    }

    #[test]
    fn exp_zero_is_identity() {
        let f = smooth(&radial(), 0.5);
        let g = f.apply(Multiplier::ExpIDt(0.0));
        assert!(g.sub(&f).unwrap().norm() / f.norm() < 1e-14);
    }

    #[test]
    fn d_on_lowest_sine_mode_is_scalar_multiplication() {
        let grid = radial();
        let g = grid.radial().unwrap();
        let r_max = g.r_max();
        let data: Vec<Complex64> = (0..g.n())
            .map(|m| {
                let r = g.node(m);
                Complex64::new((PI * r / r_max).sin() / r, 0.0)
            })
            .collect();
        let f = Field::new(grid, data).unwrap();
        let df = f.apply(Multiplier::D);
        let s = (1.0 + (PI / r_max).powi(2)).sqrt();
        assert!(df.sub(&f.scale(s)).unwrap().norm() / f.norm() < 1e-12);
    }

    #[test]
    fn parseval_radial_and_box() {
        let f = smooth(&radial(), 0.2);
        assert!((f.norm() - f.spectral_norm()).abs() / f.norm() < 1e-10);
        let b = Grid::Box(BoxGrid::new(10.0, 16).unwrap());
        let bg = b.boxed().unwrap();
        let data = (0..bg.len())
            .map(|i| {
                let p = bg.point(i);
                Complex64::new((-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp(), 0.1 * p[0].sin())
            })
            .collect();
        let f = Field::new(b, data).unwrap();
        assert!((f.norm() - f.spectral_norm()).abs() / f.norm() < 1e-10);
    }

    #[test]
    fn omega_is_antisymmetric() {
        let f = smooth(&radial(), 0.2);
        let g = smooth(&radial(), 0.7);
        assert!(omega(&f, &f).unwrap().abs() < 1e-13);
        assert!((omega(&f, &g).unwrap() + omega(&g, &f).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let f = smooth(&radial(), 0.2);
        let other = Grid::Radial(RadialGrid::new(30.0, 127).unwrap());
        assert!(apply_multiplier(&other, &f, Multiplier::D).is_err());
        let g = Field::zeros(other);
        assert!(inner(&f, &g).is_err());
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(RadialGrid::new(10.0, 10).is_err());
        assert!(RadialGrid::new(-1.0, 100).is_err());
        assert!(BoxGrid::new(10.0, 48).is_err());
    }

    #[test]
    fn radial_derivative_of_gaussian() {
        let grid = Grid::Radial(RadialGrid::new(20.0, 255).unwrap());
        let g = grid.radial().unwrap();
        let u: Vec<Complex64> = (0..g.n()).map(|m| Complex64::new((-g.node(m).powi(2)).exp(), 0.0)).collect();
        let du = g.radial_derivative(&u);
        for m in 0..g.n() {
            let r = g.node(m);
            assert!((du[m].re + 2.0 * r * (-r * r).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn origin_value_and_interpolant() {
        let grid = Grid::Radial(RadialGrid::new(20.0, 255).unwrap());
        let g = grid.radial().unwrap();
        let u: Vec<f64> = (0..g.n()).map(|m| (-g.node(m).powi(2)).exp()).collect();
        let c = g.coeffs_real(&u);
        assert!((g.value_at_origin(&c) - 1.0).abs() < 1e-10);
        assert!((g.eval(&c, 0.73) - (-0.73f64 * 0.73).exp()).abs() < 1e-10);
    }

    #[test]
    fn box_translation_by_a_grid_step() {
        let b = BoxGrid::new(8.0, 32).unwrap();
        let data: Vec<Complex64> = (0..b.len())
            .map(|i| {
                let p = b.point(i);
                Complex64::new((-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])).exp(), 0.0)
            })
            .collect();
        let t = b.translate(&data, [b.dx(), 0.0, 0.0]);
        for i in 1..b.n() {
            let a = t[b.index(i, 5, 7)];
            let e = data[b.index(i - 1, 5, 7)];
            assert!((a - e).norm() < 1e-8);
        }
    }
}
