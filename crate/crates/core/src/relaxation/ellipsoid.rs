//! Central-cut ellipsoid method state.
//!
//! The ellipsoid is `{x : (x - c)^T P^{-1} (x - c) <= 1}`. A cut with normal
//! `a` keeps the half `{x : a^T (x - c) <= 0}`.

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    center: Vec<f64>,
    /// Shape matrix `P`, row-major.
    shape: Vec<f64>,
    iterations: usize,
}

impl EllipsoidState {
    /// Axis-aligned ellipsoid with the given semi-axes.
    pub fn new(center: Vec<f64>, semi_axes: &[f64]) -> Self {
        let n = center.len();
        assert_eq!(semi_axes.len(), n);
        let mut shape = vec![0.0; n * n];
        for (i, a) in semi_axes.iter().enumerate() {
            shape[i * n + i] = a * a;
        }
        Self {
            center,
            shape,
            iterations: 0,
        }
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn shape(&self) -> &[f64] {
        &self.shape
    }

    fn shape_times(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                self.shape[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `sqrt(d^T P d)`: half-width of the ellipsoid along `d`.
    pub fn width_along(&self, d: &[f64]) -> f64 {
        let pd = self.shape_times(d);
        pd.iter()
            .zip(d)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Central cut. Returns `sqrt(a^T P a)` before the update, or `None` when
    /// the shape matrix has degenerated along `a` and no cut was made.
    pub fn cut(&mut self, normal: &[f64]) -> Option<f64> {
        let n = self.dim();
        let pa = self.shape_times(normal);
        let apa: f64 = pa.iter().zip(normal).map(|(a, b)| a * b).sum();
        if !(apa > 0.0) || !apa.is_finite() {
            return None;
        }
        let width = apa.sqrt();
        let b: Vec<f64> = pa.iter().map(|x| x / width).collect();
        let nf = n as f64;
        for (c, bi) in self.center.iter_mut().zip(&b) {
            *c -= bi / (nf + 1.0);
        }
        if n == 1 {
            self.shape[0] *= 0.25;
        } else {
            let scale = nf * nf / (nf * nf - 1.0);
            let rank = 2.0 / (nf + 1.0);
            for i in 0..n {
                for j in 0..n {
                    let v = &mut self.shape[i * n + j];
                    *v = scale * (*v - rank * b[i] * b[j]);
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let avg = 0.5 * (self.shape[i * n + j] + self.shape[j * n + i]);
                    self.shape[i * n + j] = avg;
                    self.shape[j * n + i] = avg;
                }
            }
        }
        self.iterations += 1;
        Some(width)
    }

    /// Log-determinant of the shape matrix; `None` if it is not positive definite.
    pub fn log_det_shape(&self) -> Option<f64> {
        let n = self.dim();
        nalgebra::DMatrix::from_row_slice(n, n, &self.shape)
            .cholesky()
            .map(|c| c.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
    }
}

/// Exact change of `ln det P` produced by one central cut in dimension `n`.
pub fn log_det_ratio_per_cut(n: usize) -> f64 {
    if n == 1 {
        return 0.25f64.ln();
    }
    let nf = n as f64;
    nf * (nf * nf / (nf * nf - 1.0)).ln() + ((nf - 1.0) / (nf + 1.0)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_cut_halves_interval() {
        let mut e = EllipsoidState::new(vec![2.0], &[2.0]);
        e.cut(&[1.0]).unwrap();
        assert!((e.center()[0] - 1.0).abs() < 1e-15);
        assert!((e.width_along(&[1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn volume_contracts_by_fixed_factor() {
        let mut e = EllipsoidState::new(vec![0.0; 3], &[1.0, 2.0, 3.0]);
        let cuts = [
            [1.0, 0.0, 0.0],
            [0.3, -1.0, 2.0],
            [-1.0, 1.0, 0.5],
            [0.0, 0.0, -1.0],
        ];
        let mut prev = e.log_det_shape().unwrap();
        for a in cuts {
            e.cut(&a).unwrap();
            let now = e.log_det_shape().unwrap();
            assert!((now - prev - log_det_ratio_per_cut(3)).abs() < 1e-10);
            prev = now;
        }
    }

    #[test]
    fn kept_half_contains_the_optimum() {
        // minimize |x - t|^2 with cut normal = gradient
        let target = [0.3, -0.7];
        let mut e = EllipsoidState::new(vec![0.0, 0.0], &[2.0, 2.0]);
        for _ in 0..200 {
            let c = e.center().to_vec();
            let g = [c[0] - target[0], c[1] - target[1]];
            if e.cut(&g).is_none() {
                break;
            }
        }
        assert!((e.center()[0] - target[0]).abs() < 1e-8);
        assert!((e.center()[1] - target[1]).abs() < 1e-8);
    }
}
