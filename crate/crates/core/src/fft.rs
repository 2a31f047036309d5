//! Thin wrapper over `rustfft` for the 1D and 2D lattices used here.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

#[derive(Clone)]
struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl AxisPlan {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }
}

/// Forward/inverse transforms over a whole grid; row-major, x fastest.
#[derive(Clone)]
pub struct FftPlan {
    nx: usize,
    ny: usize,
    x: AxisPlan,
    y: Option<AxisPlan>,
}

impl FftPlan {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        match grid {
            Grid::One(g) => Self {
                nx: g.n_points,
                ny: 1,
                x: AxisPlan::new(&mut planner, g.n_points),
                y: None,
            },
            Grid::Two(g) => Self {
                nx: g.x.n_points,
                ny: g.y.n_points,
                x: AxisPlan::new(&mut planner, g.x.n_points),
                y: Some(AxisPlan::new(&mut planner, g.y.n_points)),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    /// Unnormalized forward transform, e^{-ikx} convention.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    /// Inverse transform including the 1/N factor, so `inverse(forward(v)) == v`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, false);
        let scale = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], forward: bool) {
        debug_assert_eq!(data.len(), self.len());
        let xfft = if forward { &self.x.forward } else { &self.x.inverse };
        for row in data.chunks_exact_mut(self.nx) {
            xfft.process(row);
        }
        if let Some(y) = &self.y {
            let yfft = if forward { &y.forward } else { &y.inverse };
            let mut column = vec![Complex64::new(0.0, 0.0); self.ny];
            for ix in 0..self.nx {
                for (iy, c) in column.iter_mut().enumerate() {
                    *c = data[iy * self.nx + ix];
                }
                yfft.process(&mut column);
                for (iy, c) in column.iter().enumerate() {
                    data[iy * self.nx + ix] = *c;
                }
            }
        }
    }
}
