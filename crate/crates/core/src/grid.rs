//! Pseudo-spectral grid: the `G` interior nodes `x_j = j/(G+1)` and a
//! discrete sine transform (DST-I) between sine coefficients and node values.
//!
//! With `L = G + 1`, mode `n` sampled on the grid is `√2 sin(nπj/L)` and the
//! rows `sin(nπj/L)`, `n = 1..G`, are orthogonal with squared norm `L/2`.
//! Synthesis is therefore `u_j = √2 Σ a_n sin(nπj/L)` and analysis
//! `a_n = (√2/L) Σ_j u_j sin(nπj/L)`, the midpoint-rule approximation of
//! `⟨e_n, u⟩`. Both are exact inverses on sine polynomials of degree `≤ G`.
//!
//! Transforms with few modes are evaluated against a precomputed sine table;
//! larger ones go through a real FFT of length `2L` applied to the odd
//! extension of the data.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::spectral::FieldCoeffs;

/// Transforms touching at most this many modes use the sine table.
pub const DIRECT_MAX_MODES: usize = 24;

/// Read-only transform plan; share it across threads and give each thread
/// its own [`GridScratch`].
pub struct GridWorkspace {
    n_points: usize,
    fft: Arc<dyn RealToComplex<f64>>,
    // rows n = 1..=direct_modes, each of length n_points
    table: Vec<f64>,
    direct_modes: usize,
}

impl std::fmt::Debug for GridWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridWorkspace")
            .field("n_points", &self.n_points)
            .field("direct_modes", &self.direct_modes)
            .finish()
    }
}

/// Per-thread buffers for [`GridWorkspace`] transforms.
pub struct GridScratch {
    input: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    fft: Vec<Complex<f64>>,
}

impl GridWorkspace {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::invalid("grid_points", 0.0, "must be at least 1"));
        }
        let l = n_points + 1;
        let fft = RealFftPlanner::<f64>::new().plan_fft_forward(2 * l);
        let direct_modes = DIRECT_MAX_MODES.min(n_points);
        let mut table = Vec::with_capacity(direct_modes * n_points);
        for n in 1..=direct_modes {
            table.extend((1..=n_points).map(|j| (PI * (n * j) as f64 / l as f64).sin()));
        }
        Ok(Self {
            n_points,
            fft,
            table,
            direct_modes,
        })
    }

    /// Default oversampled size `4 · max(N, M)`.
    pub fn default_points(n_modes: usize, m_noise: usize) -> usize {
        4 * n_modes.max(m_noise)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn nodes(&self) -> Vec<f64> {
        let l = (self.n_points + 1) as f64;
        (1..=self.n_points).map(|j| j as f64 / l).collect()
    }

    pub fn scratch(&self) -> GridScratch {
        GridScratch {
            input: self.fft.make_input_vec(),
            spectrum: self.fft.make_output_vec(),
            fft: self.fft.make_scratch_vec(),
        }
    }

    fn row(&self, n: usize) -> &[f64] {
        &self.table[(n - 1) * self.n_points..n * self.n_points]
    }

    /// `Σ_j y_j sin(nπj/L)` for `n = 1..=out.len()` via the FFT of the odd extension.
    fn dst_fft(&self, y: &[f64], out: &mut [f64], s: &mut GridScratch) {
        let l = self.n_points + 1;
        let input = &mut s.input;
        input[0] = 0.0;
        input[l] = 0.0;
        input[1..=y.len()].copy_from_slice(y);
        input[y.len() + 1..l].iter_mut().for_each(|v| *v = 0.0);
        for j in 1..l {
            input[2 * l - j] = -input[j];
        }
        self.fft
            .process_with_scratch(input, &mut s.spectrum, &mut s.fft)
            .expect("buffer sizes come from the plan");
        for (o, z) in out.iter_mut().zip(&s.spectrum[1..]) {
            *o = -0.5 * z.im;
        }
    }

    /// Node values of the sine polynomial with coefficients `coeffs`.
    pub fn synthesize_into(&self, coeffs: &[f64], out: &mut [f64], s: &mut GridScratch) {
        assert!(coeffs.len() <= self.n_points, "more modes than grid points");
        assert_eq!(out.len(), self.n_points);
        if coeffs.len() <= self.direct_modes {
            out.iter_mut().for_each(|v| *v = 0.0);
            for (n, &a) in coeffs.iter().enumerate() {
                let a = SQRT_2 * a;
                for (u, &t) in out.iter_mut().zip(self.row(n + 1)) {
                    *u += a * t;
                }
            }
        } else {
            self.dst_fft(coeffs, out, s);
            out.iter_mut().for_each(|v| *v *= SQRT_2);
        }
    }

    /// First `out.len()` discrete sine coefficients of the node values `values`.
    pub fn analyze_into(&self, values: &[f64], out: &mut [f64], s: &mut GridScratch) {
        assert_eq!(values.len(), self.n_points);
        assert!(out.len() <= self.n_points, "more modes than grid points");
        let scale = SQRT_2 / (self.n_points + 1) as f64;
        if out.len() <= self.direct_modes {
            for (n, o) in out.iter_mut().enumerate() {
                *o = scale * dot(values, self.row(n + 1));
            }
        } else {
            self.dst_fft(values, out, s);
            out.iter_mut().for_each(|v| *v *= scale);
        }
    }

    pub fn synthesize(&self, field: &FieldCoeffs) -> Result<Vec<f64>> {
        if field.len() > self.n_points {
            return Err(Error::LengthMismatch {
                expected: self.n_points,
                got: field.len(),
            });
        }
        let mut out = vec![0.0; self.n_points];
        self.synthesize_into(field.as_slice(), &mut out, &mut self.scratch());
        Ok(out)
    }

    pub fn analyze(&self, values: &[f64], n_modes: usize) -> Result<FieldCoeffs> {
        if values.len() != self.n_points {
            return Err(Error::LengthMismatch {
                expected: self.n_points,
                got: values.len(),
            });
        }
        if n_modes > self.n_points {
            return Err(Error::invalid(
                "n_modes",
                n_modes as f64,
                "must not exceed the number of grid points",
            ));
        }
        let mut out = vec![0.0; n_modes];
        self.analyze_into(values, &mut out, &mut self.scratch());
        FieldCoeffs::new(out)
    }
}

/// Dot product with eight independent partial sums (fixed association order).
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let xs = x.chunks_exact(8);
    let ys = y.chunks_exact(8);
    let (xr, yr) = (xs.remainder(), ys.remainder());
    for (a, b) in xs.zip(ys) {
        for i in 0..8 {
            acc[i] += a[i] * b[i];
        }
    }
    let mut total = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (a, b) in xr.iter().zip(yr) {
        total += a * b;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eval_field;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nodes_are_interior_uniform() {
        let g = GridWorkspace::new(3).unwrap();
        assert_eq!(g.nodes(), vec![0.25, 0.5, 0.75]);
        assert!(GridWorkspace::new(0).is_err());
    }

    #[test]
    fn synthesis_matches_pointwise_evaluation() {
        for (n_points, modes) in [(40, 7), (40, 31), (100, 100)] {
            let g = GridWorkspace::new(n_points).unwrap();
            let a = FieldCoeffs::new((0..modes).map(|k| (k as f64 * 0.7).cos()).collect()).unwrap();
            let on_grid = g.synthesize(&a).unwrap();
            let direct = eval_field(&a, &g.nodes()).unwrap();
            for (u, v) in on_grid.iter().zip(&direct) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_small_example() {
        let g = GridWorkspace::new(12).unwrap();
        let a = FieldCoeffs::new(vec![1.0, 0.0, 0.0]).unwrap();
        let back = g.analyze(&g.synthesize(&a).unwrap(), 3).unwrap();
        for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        let zero = g.analyze(&[0.0; 12], 3).unwrap();
        assert_eq!(zero.as_slice(), &[0.0; 3]);
    }

    #[test]
    fn direct_and_fft_paths_agree() {
        let g = GridWorkspace::new(90).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x).exp() * x * (1.0 - x)).collect();
        let mut s = g.scratch();
        let mut direct = vec![0.0; DIRECT_MAX_MODES];
        g.analyze_into(&vals, &mut direct, &mut s);
        let mut wide = vec![0.0; 60];
        g.analyze_into(&vals, &mut wide, &mut s);
        for (a, b) in direct.iter().zip(&wide) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn length_errors() {
        let g = GridWorkspace::new(8).unwrap();
        assert!(matches!(g.analyze(&[0.0; 7], 2), Err(Error::LengthMismatch { .. })));
        assert!(g.analyze(&[0.0; 8], 9).is_err());
        assert!(g.synthesize(&FieldCoeffs::zeros(9)).is_err());
    }
}
