//! Periodic differentiation and trigonometric interpolation on uniform grids.

use std::cell::RefCell;
use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT of real data.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_in_place(&mut buf);
    buf
}

pub fn forward_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// Unnormalized inverse DFT.
pub fn inverse_in_place(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

/// Signed wavenumber of DFT bin `k` for length `n`.
fn wavenumber(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// First and second derivatives of a smooth 2π-periodic function sampled at
/// `n` uniform points, by Fourier differentiation. The Nyquist mode of an
/// even-length grid is dropped for the odd derivative.
pub fn fourier_derivatives(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let spec = forward(values);
    let mut d1 = spec.clone();
    let mut d2 = spec;
    for k in 0..n {
        let w = wavenumber(k, n);
        let nyquist = n % 2 == 0 && k == n / 2;
        d1[k] = if nyquist { Complex64::new(0.0, 0.0) } else { d1[k] * Complex64::new(0.0, w) };
        d2[k] *= -w * w;
    }
    inverse_in_place(&mut d1);
    inverse_in_place(&mut d2);
    let scale = 1.0 / n as f64;
    (d1.iter().map(|c| c.re * scale).collect(), d2.iter().map(|c| c.re * scale).collect())
}

/// Fourth-order centered periodic differences on a 2π-periodic grid.
pub fn fd4_derivatives(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let h = 2.0 * PI / n as f64;
    let at = |j: isize| values[j.rem_euclid(n as isize) as usize];
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for j in 0..n as isize {
        let (m2, m1, c, p1, p2) = (at(j - 2), at(j - 1), at(j), at(j + 1), at(j + 2));
        d1[j as usize] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        d2[j as usize] = (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h);
    }
    (d1, d2)
}

/// Trigonometric interpolation of `values` (n uniform samples of a periodic
/// function) onto `m >= n` uniform samples. An even-length Nyquist
/// coefficient is split symmetrically.
pub fn interpolate(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    assert!(m >= n, "interpolation only refines");
    if m == n {
        return values.to_vec();
    }
    let spec = forward(values);
    let mut fine = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    for k in 0..n {
        let w = wavenumber(k, n);
        if n % 2 == 0 && k == half {
            fine[half] += spec[k] * 0.5;
            fine[m - half] += spec[k] * 0.5;
        } else if w >= 0.0 {
            fine[k] = spec[k];
        } else {
            fine[m - (n - k)] = spec[k];
        }
    }
    inverse_in_place(&mut fine);
    let scale = 1.0 / n as f64;
    fine.iter().map(|c| c.re * scale).collect()
}

/// Evaluates the trigonometric interpolant of `values` at an arbitrary angle.
pub fn evaluate_at(values: &[f64], phi: f64) -> f64 {
    let n = values.len();
    let spec = forward(values);
    let mut acc = 0.0;
    for k in 0..n {
        let w = wavenumber(k, n);
        let term = spec[k] * Complex64::from_polar(1.0, w * phi);
        if n % 2 == 0 && k == n / 2 {
            acc += spec[k].re * (w * phi).cos();
        } else {
            acc += term.re;
        }
    }
    acc / n as f64
}
