//! Special functions used by the coefficient integrals: factorials, associated
//! Laguerre polynomials, the normal-ordering kernel `S(l1, l2, x)` and
//! Gauss–Legendre nodes.

use std::sync::OnceLock;

/// Largest argument for which `n!` is finite in `f64`.
pub const MAX_FACTORIAL: usize = 170;

/// Natural log of the relative tail level treated as negligible by the quadrature planners.
pub(crate) const TAIL_LOG: f64 = 41.5;

fn factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(MAX_FACTORIAL + 1);
        t.push(1.0);
        for k in 1..=MAX_FACTORIAL {
            let prev = t[k - 1];
            t.push(prev * k as f64);
        }
        t
    })
}

/// `n!` in floating point; exact for `n <= 22`.
pub fn factorial(n: usize) -> f64 {
    assert!(n <= MAX_FACTORIAL, "factorial({n}) overflows f64");
    factorial_table()[n]
}

pub fn ln_factorial(n: usize) -> f64 {
    if n <= MAX_FACTORIAL {
        factorial_table()[n].ln()
    } else {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }
}

/// `L_0^{(alpha)}(x) ..= L_nmax^{(alpha)}(x)` by the three-term recurrence.
pub fn laguerre_upto(nmax: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax == 0 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for k in 1..nmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Associated Laguerre polynomial `L_n^{(alpha)}(x)`.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    laguerre_upto(n, alpha, x)[n]
}

/// Table `t[d][n] = L_n^{(d)}(x)` for `d <= dmax`, `n <= nmax`.
pub fn laguerre_table(nmax: usize, dmax: usize, x: f64) -> Vec<Vec<f64>> {
    (0..=dmax).map(|d| laguerre_upto(nmax, d as f64, x)).collect()
}

/// Normal-ordering kernel `S(l1, l2, x) = Σ_k (k+l1)! / ((k+l2)! k!) (-x)^k`.
///
/// Terms with `k + l2 < 0` vanish. The alternating series cancels badly once `x`
/// is a few units, so the value is obtained from Kummer's transformation
/// `1F1(a; b; -x) = e^{-x} 1F1(b-a; b; x)`: for `l1 >= l2 >= 0` this is the finite
/// form `(l1-l2)! e^{-x} L_{l1-l2}^{(l2)}(x)`, for `0 <= l1 < l2` a series of
/// positive terms. Negative `l2` is reduced through
/// `S(l1, l2, x) = (-x)^{|l2|} S(l1+|l2|, |l2|, x)`.
pub fn kernel_s(l1: usize, l2: i64, x: f64) -> f64 {
    assert!(x >= 0.0, "kernel_s requires x >= 0");
    if l2 < 0 {
        let shift = l2.unsigned_abs() as usize;
        let pre = (-x).powi(shift as i32);
        if pre == 0.0 {
            return 0.0;
        }
        return pre * kernel_s(l1 + shift, shift as i64, x);
    }
    let l2 = l2 as usize;
    if l1 >= l2 {
        let n = l1 - l2;
        factorial(n) * (-x).exp() * laguerre(n, l2 as f64, x)
    } else {
        positive_kummer_tail(l1, l2, x)
    }
}

// (l1!/l2!) e^{-x} 1F1(l2-l1; l2+1; x) for l1 < l2, summed term by term in log space.
fn positive_kummer_tail(l1: usize, l2: usize, x: f64) -> f64 {
    let a = (l2 - l1) as f64;
    let b = (l2 + 1) as f64;
    let log_pre = ln_factorial(l1) - ln_factorial(l2) - x;
    if x == 0.0 {
        return log_pre.exp();
    }
    let lx = x.ln();
    let mut log_term = 0.0;
    let mut sum = 0.0;
    let mut j = 0usize;
    loop {
        let term = (log_pre + log_term).exp();
        sum += term;
        let jf = j as f64;
        if jf > x && term <= 1e-17 * sum {
            break;
        }
        log_term += (a + jf).ln() - (b + jf).ln() - (jf + 1.0).ln() + lx;
        j += 1;
        if j > 100_000 {
            break;
        }
    }
    sum
}

/// The defining series of [`kernel_s`], summed literally with Neumaier compensation.
///
/// Summation stops once three consecutive terms fall below `1e-17` of the running
/// sum. When `l1 > 30` the terms are carried relative to the first one, whose
/// magnitude is kept as a logarithm, so nothing overflows. Accurate only while
/// the alternating terms do not cancel catastrophically (`x` of order one);
/// [`kernel_s`] is the stable evaluator.
pub fn kernel_s_series(l1: usize, l2: i64, x: f64) -> f64 {
    assert!(x >= 0.0, "kernel_s_series requires x >= 0");
    let k_start = if l2 < 0 { l2.unsigned_abs() as usize } else { 0 };
    let first_l2 = (k_start as i64 + l2) as usize;
    let log_first = ln_factorial(k_start + l1) - ln_factorial(first_l2) - ln_factorial(k_start);
    if x == 0.0 {
        return if k_start == 0 { log_first.exp() } else { 0.0 };
    }
    let (log_scale, mut term) = if l1 > 30 {
        (log_first + k_start as f64 * x.ln(), if k_start % 2 == 0 { 1.0 } else { -1.0 })
    } else {
        (0.0, log_first.exp() * (-x).powi(k_start as i32))
    };
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut small_run = 0;
    let mut k = k_start;
    loop {
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if term.abs() <= 1e-17 * (sum + comp).abs() || term == 0.0 {
            small_run += 1;
        } else {
            small_run = 0;
        }
        if small_run >= 3 && (k as f64) > x {
            break;
        }
        let kl2 = (k as i64 + l2) as usize;
        term *= -x * (k + 1 + l1) as f64 / (((kl2 + 1) * (k + 1)) as f64);
        k += 1;
        if k > k_start + 10_000 {
            break;
        }
    }
    (sum + comp) * log_scale.exp()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Radius beyond which `r^degree e^{-r^2/2}` has dropped by `e^{-TAIL_LOG}` from its peak.
pub(crate) fn damping_radius(degree: usize) -> f64 {
    let d = degree as f64;
    let f = |u: f64| if d > 0.0 { 0.5 * d * u.ln() - 0.5 * u } else { -0.5 * u };
    let u_peak = d.max(1e-12);
    let target = f(u_peak) - TAIL_LOG;
    let (mut lo, mut hi) = (u_peak, u_peak + 4.0 * TAIL_LOG + 10.0);
    while f(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.sqrt()
}

/// Radius at which a Gaussian envelope of width `sigma` carrying a polynomial of the
/// given degree is negligible.
pub(crate) fn gaussian_support(sigma: f64, degree: usize) -> f64 {
    sigma * damping_radius(degree)
}
