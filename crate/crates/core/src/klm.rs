//! KLM matrices `M_ij = e^{(ξ_iξ_j* − ξ_i*ξ_j)/2} C(ξ_i − ξ_j)` and searches for
//! point sets on which they fail to be positive semidefinite.
//!
//! The classical (Bochner) variant drops the phase. With `ξ₁ = 0` fixed, an
//! `n`-point set has `2(n−1)` real degrees of freedom per mode.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::charfn::CharacteristicFunction;
use crate::error::{Error, Result};
use crate::fock::hermitian_eigen;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Quantum,
    /// Bochner's classical condition, without the commutator phase.
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Grid,
    Random,
    CoordinateDescent,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Grid => "grid",
            Strategy::Random => "random",
            Strategy::CoordinateDescent => "cd",
        })
    }
}

/// Half-width of the box searched by the grid strategy.
pub const GRID_HALF_WIDTH: f64 = 3.0;
/// Standard deviation of randomly drawn points.
pub const RANDOM_SCALE: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct KlmMatrix {
    /// One entry per point, each with one coordinate per mode.
    pub points: Vec<Vec<C64>>,
    pub entries: DMatrix<C64>,
    pub variant: Variant,
}

impl KlmMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.entries).0[0]
    }
}

fn phase(a: &[C64], b: &[C64]) -> C64 {
    let im: f64 = a.iter().zip(b).map(|(x, y)| (x * y.conj()).im).sum();
    C64::from_polar(1.0, im)
}

/// Builds the KLM matrix of a point set.
pub fn klm_matrix(cf: &CharacteristicFunction, points: &[Vec<C64>], variant: Variant) -> Result<KlmMatrix> {
    if let Some(p) = points.iter().find(|p| p.len() != cf.modes()) {
        return Err(Error::Usage(format!("point {p:?} does not have {} mode coordinates", cf.modes())));
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(Error::Usage(format!("points {i} and {j} coincide")));
            }
        }
    }
    Ok(KlmMatrix { points: points.to_vec(), entries: raw_matrix(cf, points, variant), variant })
}

fn raw_matrix(cf: &CharacteristicFunction, points: &[Vec<C64>], variant: Variant) -> DMatrix<C64> {
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let diff: Vec<C64> = points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect();
            let mut v = cf.eval(&diff);
            if variant == Variant::Quantum {
                v *= phase(&points[i], &points[j]);
            }
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub min_eigenvalue: f64,
    pub points: Vec<Vec<C64>>,
    pub evaluations: usize,
    pub strategy: Strategy,
    pub n: usize,
}

// Free coordinates x (length 2(n−1)·modes) to a point set with ξ₁ = 0.
fn points_from(x: &[f64], n: usize, modes: usize) -> Vec<Vec<C64>> {
    let mut pts = vec![vec![C64::new(0.0, 0.0); modes]];
    for p in 0..n - 1 {
        pts.push((0..modes).map(|m| C64::new(x[2 * (p * modes + m)], x[2 * (p * modes + m) + 1])).collect());
    }
    pts
}

fn has_duplicates(pts: &[Vec<C64>]) -> bool {
    (0..pts.len()).any(|i| (i + 1..pts.len()).any(|j| pts[i] == pts[j]))
}

fn objective(cf: &CharacteristicFunction, x: &[f64], n: usize) -> f64 {
    let pts = points_from(x, n, cf.modes());
    if has_duplicates(&pts) {
        return f64::INFINITY;
    }
    hermitian_eigen(&raw_matrix(cf, &pts, Variant::Quantum)).0[0]
}

/// Evaluates candidates in parallel; the reduction keeps the first minimum in candidate order.
fn best_of(cf: &CharacteristicFunction, candidates: &[Vec<f64>], n: usize) -> Option<(f64, Vec<f64>)> {
    let values: Vec<f64> = candidates.par_iter().map(|x| objective(cf, x, n)).collect();
    let mut best: Option<(f64, usize)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    best.map(|(v, i)| (v, candidates[i].clone()))
}

fn random_candidates(rng: &mut ChaCha8Rng, count: usize, dims: usize) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, RANDOM_SCALE).expect("positive scale");
    (0..count).map(|_| (0..dims).map(|_| normal.sample(rng)).collect()).collect()
}

fn grid_candidates(budget: usize, dims: usize) -> Vec<Vec<f64>> {
    let r = ((budget as f64).powf(1.0 / dims as f64).floor() as usize).max(2);
    let coord = |i: usize| -GRID_HALF_WIDTH + 2.0 * GRID_HALF_WIDTH * i as f64 / (r - 1) as f64;
    let total = r.saturating_pow(dims as u32).min(budget);
    (0..total)
        .map(|mut c| {
            (0..dims)
                .map(|_| {
                    let v = coord(c % r);
                    c /= r;
                    v
                })
                .collect()
        })
        .collect()
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const LINE_EVALS: usize = 12;
const LINE_HALF_WIDTH: f64 = 1.5;

// Golden-section minimization of coordinate `d` around its current value.
fn line_search(cf: &CharacteristicFunction, x: &mut Vec<f64>, best: &mut f64, d: usize, n: usize) -> usize {
    let mut lo = x[d] - LINE_HALF_WIDTH;
    let mut hi = x[d] + LINE_HALF_WIDTH;
    let probe = |t: f64| {
        let mut y = x.clone();
        y[d] = t;
        objective(cf, &y, n)
    };
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let mut fa = probe(a);
    let mut fb = probe(b);
    let mut evals = 2;
    while evals < LINE_EVALS {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - GOLDEN * (hi - lo);
            fa = probe(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + GOLDEN * (hi - lo);
            fb = probe(b);
        }
        evals += 1;
    }
    let (t, f) = if fa < fb { (a, fa) } else { (b, fb) };
    if f < *best {
        *best = f;
        x[d] = t;
    }
    evals
}

/// Searches `n`-point sets for the most negative minimal eigenvalue within `budget` matrix evaluations.
pub fn klm_search(
    cf: &CharacteristicFunction,
    n: usize,
    strategy: Strategy,
    budget: usize,
    seed: u64,
) -> Result<SearchResult> {
    if n < 2 {
        return Err(Error::Usage(format!("KLM search needs at least 2 points, got {n}")));
    }
    if budget == 0 {
        return Err(Error::Usage("KLM search needs a positive budget".into()));
    }
    let dims = 2 * (n - 1) * cf.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (best, x, evaluations) = match strategy {
        Strategy::Grid => {
            let c = grid_candidates(budget, dims);
            let (v, x) = best_of(cf, &c, n).unwrap_or((f64::INFINITY, c[0].clone()));
            (v, x, c.len())
        }
        Strategy::Random => {
            let c = random_candidates(&mut rng, budget, dims);
            let (v, x) = best_of(cf, &c, n).unwrap_or((f64::INFINITY, c[0].clone()));
            (v, x, c.len())
        }
        Strategy::CoordinateDescent => {
            let seeds = (budget / 4).max(1);
            let c = random_candidates(&mut rng, seeds, dims);
            let (mut v, mut x) = best_of(cf, &c, n).unwrap_or((f64::INFINITY, c[0].clone()));
            let mut used = seeds;
            let mut d = 0;
            while used + LINE_EVALS <= budget {
                used += line_search(cf, &mut x, &mut v, d, n);
                d = (d + 1) % dims;
            }
            (v, x, used)
        }
    };
    Ok(SearchResult { min_eigenvalue: best, points: points_from(&x, n, cf.modes()), evaluations, strategy, n })
}

/// Runs searches with `n = n_start, n_start + 1, …` until a negative eigenvalue below `−tol` appears.
pub fn klm_escalate(
    cf: &CharacteristicFunction,
    n_start: usize,
    n_max: usize,
    strategy: Strategy,
    budget: usize,
    seed: u64,
    tol: f64,
) -> Result<SearchResult> {
    let mut last = None;
    for n in n_start..=n_max {
        let r = klm_search(cf, n, strategy, budget, seed)?;
        let found = r.min_eigenvalue < -tol;
        last = Some(r);
        if found {
            break;
        }
    }
    last.ok_or_else(|| Error::Usage(format!("empty point-count range {n_start}..={n_max}")))
}
