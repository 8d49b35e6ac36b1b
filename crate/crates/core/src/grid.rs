//! Uniform rectangular sample grids with cubic-convolution interpolation.
//!
//! Axes are ordered per mode as `(x, y)`: a one-mode grid has axes `[x, y]`, a
//! two-mode grid `[x1, y1, x2, y2]`. Values are stored row-major with the last
//! axis varying fastest.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    /// Symmetric axis `[-half, half]` with `n` samples.
    pub fn symmetric(half: f64, n: usize) -> Self {
        Self { lo: -half, hi: half, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.step();
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// Trapezoid weight of node `i` (without the step factor).
    pub fn trapezoid(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5
        } else {
            1.0
        }
    }
}

/// A dense grid of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub axes: Vec<Axis>,
    pub values: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(axes: Vec<Axis>, values: Vec<T>) -> Result<Self> {
        let expected: usize = axes.iter().map(|a| a.n).product();
        if values.len() != expected {
            return Err(Error::Format(format!(
                "grid expects {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { axes, values })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.shape())
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.axes.iter().zip(point).all(|(a, &x)| a.contains(x))
    }
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

// Keys cubic convolution kernel, a = -1/2, for offsets -1, 0, 1, 2 from the left node.
fn cubic_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -0.5 * t3 + t2 - 0.5 * t,
        1.5 * t3 - 2.5 * t2 + 1.0,
        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
        0.5 * t3 - 0.5 * t2,
    ]
}

/// Interpolation stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// Keys cubic convolution over 4 nodes, clamped at the edges.
    Cubic,
    /// Lagrange polynomial through 6 nodes, shifted inward at the edges.
    Lagrange6,
}

fn lagrange6_weights(t: f64) -> [f64; 6] {
    let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
    let mut w = [0.0; 6];
    for (j, wj) in w.iter_mut().enumerate() {
        let mut v = 1.0;
        for (m, &xm) in nodes.iter().enumerate() {
            if m != j {
                v *= (t - xm) / (nodes[j] - xm);
            }
        }
        *wj = v;
    }
    w
}

impl<T> Grid<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    /// Tensor-product cubic-convolution interpolation; `None` outside the extent.
    pub fn interpolate(&self, point: &[f64]) -> Option<T> {
        self.interpolate_with(point, Stencil::Cubic)
    }

    pub fn interpolate_with(&self, point: &[f64], stencil: Stencil) -> Option<T> {
        debug_assert_eq!(point.len(), self.axes.len());
        if !self.contains(point) {
            return None;
        }
        let dims = self.axes.len();
        let width = match stencil {
            Stencil::Cubic => 4usize,
            Stencil::Lagrange6 => 6,
        };
        // First node of each axis' stencil and the weights of its `width` nodes.
        let mut first = Vec::with_capacity(dims);
        let mut weights: Vec<Vec<f64>> = Vec::with_capacity(dims);
        for (axis, &x) in self.axes.iter().zip(point) {
            let u = ((x - axis.lo) / axis.step()).clamp(0.0, (axis.n - 1) as f64);
            let i = (u.floor() as usize).min(axis.n - 2);
            match stencil {
                Stencil::Cubic => {
                    first.push(i as isize - 1);
                    weights.push(cubic_weights(u - i as f64).to_vec());
                }
                Stencil::Lagrange6 => {
                    let start = (i as isize - 2).clamp(0, axis.n as isize - 6);
                    first.push(start);
                    weights.push(lagrange6_weights(u - (start + 2) as f64).to_vec());
                }
            }
        }
        let st = self.strides();
        let mut acc = T::default();
        for combo in 0..width.pow(dims as u32) {
            let mut c = combo;
            let mut w = 1.0;
            let mut idx = 0usize;
            for d in 0..dims {
                let o = c % width;
                c /= width;
                w *= weights[d][o];
                let j = (first[d] + o as isize).clamp(0, self.axes[d].n as isize - 1) as usize;
                idx += j * st[d];
            }
            if w != 0.0 {
                acc = acc + self.values[idx] * w;
            }
        }
        Some(acc)
    }
}
