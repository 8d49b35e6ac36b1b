//! Tensor-product trapezoid quadrature on uniform planar lattices.
//!
//! Every integral is accumulated twice: on the full lattice and on the
//! sub-lattice of even-indexed nodes (twice the spacing). The difference is
//! the resolution-halving error estimate carried by coefficient tables.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::grid::Axis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice2 {
    pub x: Axis,
    pub y: Axis,
}

impl Lattice2 {
    pub fn new(x: Axis, y: Axis) -> Self {
        Self { x, y }
    }

    /// Square lattice covering `center ± half` with spacing at most `step` and an odd node count.
    pub fn centered(center: C64, half: f64, step: f64) -> Self {
        let cells = (half / step).ceil().max(16.0) as usize;
        let n = 2 * cells + 1;
        Self {
            x: Axis::new(center.re - half, center.re + half, n),
            y: Axis::new(center.im - half, center.im + half, n),
        }
    }

    /// Lattice over `[xlo, xhi] × [ylo, yhi]` with spacing at most `step` and odd node counts.
    pub fn covering(xlo: f64, xhi: f64, ylo: f64, yhi: f64, step: f64) -> Self {
        let n_for = |len: f64| 2 * ((len / (2.0 * step)).ceil().max(16.0) as usize) + 1;
        Self {
            x: Axis::new(xlo, xhi, n_for(xhi - xlo)),
            y: Axis::new(ylo, yhi, n_for(yhi - ylo)),
        }
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        C64::new(self.x.coord(i), self.y.coord(j))
    }

    pub fn len(&self) -> usize {
        self.x.n * self.y.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn coarse_weight(axis: &Axis, i: usize) -> f64 {
    if i % 2 != 0 {
        0.0
    } else if i == 0 || i + 1 == axis.n {
        0.5
    } else {
        1.0
    }
}

/// Integrates a vector-valued integrand over the lattice.
///
/// `integrand(i, j, z, out)` must write the `len` integrand components at node
/// `(i, j)` (coordinate `z`) into `out`. Returns `(fine, coarse)` sums. Rows are
/// evaluated in parallel; the final reduction runs in row order, so results do
/// not depend on scheduling.
pub fn accumulate<F>(lat: &Lattice2, len: usize, integrand: F) -> (Vec<C64>, Vec<C64>)
where
    F: Fn(usize, usize, C64, &mut [C64]) + Sync,
{
    let hx = lat.x.step();
    let hy = lat.y.step();
    let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..lat.x.n)
        .into_par_iter()
        .map(|i| {
            let mut fine = vec![C64::new(0.0, 0.0); len];
            let mut coarse = vec![C64::new(0.0, 0.0); len];
            let mut buf = vec![C64::new(0.0, 0.0); len];
            let ci = coarse_weight(&lat.x, i);
            for j in 0..lat.y.n {
                integrand(i, j, lat.point(i, j), &mut buf);
                let wf = lat.y.trapezoid(j);
                let wc = ci * coarse_weight(&lat.y, j);
                for k in 0..len {
                    fine[k] += buf[k] * wf;
                }
                if wc != 0.0 {
                    for k in 0..len {
                        coarse[k] += buf[k] * wc;
                    }
                }
            }
            let wi = lat.x.trapezoid(i) * hx * hy;
            for v in fine.iter_mut() {
                *v *= wi;
            }
            for v in coarse.iter_mut() {
                *v *= 4.0 * hx * hy;
            }
            (fine, coarse)
        })
        .collect();
    let mut fine = vec![C64::new(0.0, 0.0); len];
    let mut coarse = vec![C64::new(0.0, 0.0); len];
    for (f, c) in rows {
        for k in 0..len {
            fine[k] += f[k];
            coarse[k] += c[k];
        }
    }
    (fine, coarse)
}

/// Scalar convenience wrapper around [`accumulate`]; returns only the fine sum.
pub fn integrate<F>(lat: &Lattice2, f: F) -> C64
where
    F: Fn(C64) -> C64 + Sync,
{
    accumulate(lat, 1, |_, _, z, out| out[0] = f(z)).0[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral_and_error_estimate() {
        let lat = Lattice2::centered(C64::new(0.3, -0.2), 6.0, 0.1);
        let (fine, coarse) = accumulate(&lat, 1, |_, _, z, out| {
            out[0] = C64::new((-(z - C64::new(0.3, -0.2)).norm_sqr()).exp(), 0.0)
        });
        assert!((fine[0].re - std::f64::consts::PI).abs() < 1e-13);
        assert!((fine[0] - coarse[0]).norm() < 1e-12);
    }
}
