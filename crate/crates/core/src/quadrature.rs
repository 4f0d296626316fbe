//! Adaptive Gauss–Kronrod (G7/K15) quadrature for vector-valued integrands.
//!
//! Moments of the ad-watching distribution are needed in pairs (first and
//! second moment over the same segment), so the integrator works on
//! `[f64; K]` outputs and refines the panel whose worst component error is
//! largest. Callers split the domain at known kinks before integrating.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_panels: 400,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<const K: usize> {
    lo: f64,
    hi: f64,
    value: [f64; K],
    error: [f64; K],
    // max_k error_k, used for ordering
    worst: f64,
}

impl<const K: usize> PartialEq for Panel<K> {
    fn eq(&self, other: &Self) -> bool {
        self.worst == other.worst
    }
}
impl<const K: usize> Eq for Panel<K> {}
impl<const K: usize> PartialOrd for Panel<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Panel<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.worst.total_cmp(&other.worst)
    }
}

fn kronrod<const K: usize, F>(f: &F, lo: f64, hi: f64) -> Result<Panel<K>>
where
    F: Fn(f64) -> [f64; K],
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];

    let eval = |x: f64| -> Result<[f64; K]> {
        let y = f(x);
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand { theta: x })
        }
    };

    let mid = eval(center)?;
    for k in 0..K {
        kron[k] += WGK[7] * mid[k];
        gauss[k] += WG[3] * mid[k];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let left = eval(center - dx)?;
        let right = eval(center + dx)?;
        for k in 0..K {
            let s = left[k] + right[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }

    let mut value = [0.0; K];
    let mut error = [0.0; K];
    let mut worst: f64 = 0.0;
    for k in 0..K {
        value[k] = kron[k] * half;
        error[k] = ((kron[k] - gauss[k]) * half).abs();
        worst = worst.max(error[k]);
    }
    Ok(Panel {
        lo,
        hi,
        value,
        error,
        worst,
    })
}

/// Integrates a vector-valued function over `[lo, hi]`.
///
/// Convergence requires every component to meet
/// `err_k <= max(abs_tol, rel_tol * |I_k|)`. `lo == hi` returns zeros.
pub fn integrate<const K: usize, F>(f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<[f64; K]>
where
    F: Fn(f64) -> [f64; K],
{
    if hi == lo {
        return Ok([0.0; K]);
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Domain {
            op: "integrate",
            reason: format!("invalid interval [{lo}, {hi}]"),
        });
    }

    let first = kronrod(&f, lo, hi)?;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    let converged = |total: &[f64; K], err: &[f64; K]| {
        (0..K).all(|k| err[k] <= opts.abs_tol.max(opts.rel_tol * total[k].abs()))
    };

    while !converged(&total, &total_err) {
        if heap.len() >= opts.max_panels {
            let estimate = total_err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::QuadratureDivergence { lo, hi, estimate });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Panel can no longer be split in floating point.
            heap.push(worst);
            let estimate = total_err.iter().cloned().fold(0.0, f64::max);
            return Err(Error::QuadratureDivergence { lo, hi, estimate });
        }
        let left = kronrod(&f, worst.lo, mid)?;
        let right = kronrod(&f, mid, worst.hi)?;
        for k in 0..K {
            total[k] += left.value[k] + right.value[k] - worst.value[k];
            total_err[k] += left.error[k] + right.error[k] - worst.error[k];
        }
        heap.push(left);
        heap.push(right);
    }

    // Re-sum from the panels to shed accumulated cancellation in `total`.
    let mut sum = [0.0; K];
    for p in heap.iter() {
        for (s, v) in sum.iter_mut().zip(p.value) {
            *s += v;
        }
    }
    Ok(sum)
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|x| [f(x)], lo, hi, opts).map(|v| v[0])
}

/// Integrates over `[lo, hi]` after splitting at every interior breakpoint.
pub fn integrate_with_breaks<const K: usize, F>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<[f64; K]>
where
    F: Fn(f64) -> [f64; K],
{
    let mut points: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut acc = [0.0; K];
    let mut a = lo;
    for b in points.into_iter().chain(std::iter::once(hi)) {
        let part = integrate(&f, a, b, opts)?;
        for k in 0..K {
            acc[k] += part[k];
        }
        a = b;
    }
    Ok(acc)
}
