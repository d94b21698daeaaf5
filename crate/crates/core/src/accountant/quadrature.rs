//! Adaptive Gauss-Kronrod quadrature.
//!
//! Global adaptive 7/15-point scheme in the style of QUADPACK's QAG: the
//! interval with the largest error estimate is bisected until the summed
//! estimate falls below the requested tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    // rounding floor, 50·ε·∫|f|
    floor: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0; 15];
    fv[7] = f(center);
    for (i, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        fv[i] = f(center - dx);
        fv[14 - i] = f(center + dx);
    }
    let mut kronrod = fv[7] * WGK[7];
    let mut gauss = fv[7] * WG[3];
    let mut abs_sum = fv[7].abs() * WGK[7];
    for i in 0..7 {
        let pair = fv[i] + fv[14 - i];
        kronrod += WGK[i] * pair;
        abs_sum += WGK[i] * (fv[i].abs() + fv[14 - i].abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fv[7] - mean).abs();
    for i in 0..7 {
        asc += WGK[i] * ((fv[i] - mean).abs() + (fv[14 - i] - mean).abs());
    }
    let result_abs = abs_sum * half.abs();
    let result_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    // QUADPACK's calibrated estimate
    if result_asc != 0.0 && error != 0.0 {
        error = result_asc * (200.0 * error / result_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * result_abs;
    Segment {
        a,
        b,
        value: kronrod * half,
        error: error.max(floor),
        floor,
    }
}

/// Integrates `f` over `[points[0], points[last]]`, treating every entry of
/// `points` as a breakpoint. `points` must be sorted and hold at least two
/// values.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<Integral> {
    if points.len() < 2 || points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("quadrature breakpoints must be strictly increasing"));
    }
    let mut heap: BinaryHeap<Segment> = points.windows(2).map(|w| gk15(&f, w[0], w[1])).collect();
    let mut evaluations = 15 * heap.len();
    loop {
        // Re-summing keeps the totals free of accumulated cancellation.
        let (total, err, floor) = heap.iter().fold((0.0, 0.0, 0.0), |(v, e, r), s| {
            (v + s.value, e + s.error, r + s.floor)
        });
        if !total.is_finite() {
            return Err(Error::Numerical {
                message: "quadrature produced a non-finite value".into(),
                diagnostics: format!("intervals={} evaluations={evaluations}", heap.len()),
            });
        }
        if err <= abs_tol.max(rel_tol * total.abs()) || err <= floor * (1.0 + 1e-9) {
            return Ok(Integral {
                value: total,
                error_estimate: err,
                evaluations,
                intervals: heap.len(),
            });
        }
        if heap.len() >= max_intervals {
            return Err(Error::Numerical {
                message: "quadrature did not converge".into(),
                diagnostics: format!(
                    "value={total:e} error_estimate={err:e} rel_tol={rel_tol:e} intervals={} evaluations={evaluations}",
                    heap.len()
                ),
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(Error::Numerical {
                message: "quadrature interval collapsed below machine resolution".into(),
                diagnostics: format!("interval=[{:e}, {:e}] error={:e}", worst.a, worst.b, worst.error),
            });
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
        evaluations += 30;
    }
}
