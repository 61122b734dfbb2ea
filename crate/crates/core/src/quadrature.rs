//! Panel quadrature on the real line.

use crate::error::QuadratureFailure;
use gauss_quad::GaussLegendre;
use num_complex::Complex64 as C64;
use std::num::NonZeroUsize;

/// Gauss–Legendre nodes on [-1, 1].
#[derive(Debug, Clone)]
pub struct PanelRule {
    pairs: Vec<(f64, f64)>,
}

impl PanelRule {
    pub fn new(n: usize) -> Self {
        let n = NonZeroUsize::new(n.max(2)).expect("positive");
        let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(n).as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        PanelRule { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn map(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        self.map(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = [C64::new(0.0, 0.0); 15];
    fv[14] = f(c);
    for j in 0..7 {
        let dx = h * XGK[j];
        fv[2 * j] = f(c - dx);
        fv[2 * j + 1] = f(c + dx);
    }
    let mut k = fv[14] * WGK[7];
    let mut g = fv[14] * WG[3];
    for j in 0..7 {
        let s = fv[2 * j] + fv[2 * j + 1];
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    // QUADPACK-style scaling of the raw Kronrod-Gauss difference
    let mean = k * 0.5;
    let mut asc = (fv[14] - mean).norm() * WGK[7];
    for j in 0..7 {
        asc += ((fv[2 * j] - mean).norm() + (fv[2 * j + 1] - mean).norm()) * WGK[j];
    }
    let asc = asc * h.abs();
    let mut err = ((k - g) * h).norm();
    if asc > 0.0 && err > 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    (k * h, err)
}

struct Part {
    lo: f64,
    hi: f64,
    val: C64,
    err: f64,
}

impl PartialEq for Part {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Part {}
impl PartialOrd for Part {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Part {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive Gauss–Kronrod (7/15) for complex integrands on a finite interval,
/// starting from `pieces` equal subintervals.
pub fn adaptive<F: FnMut(f64) -> C64>(
    mut f: F,
    a: f64,
    b: f64,
    pieces: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<C64, QuadratureFailure> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let pieces = pieces.max(1);
    let max_intervals = 50_000.max(4 * pieces);
    let mut heap = std::collections::BinaryHeap::new();
    let mut total = C64::new(0.0, 0.0);
    let mut err = 0.0;
    let h = (b - a) / pieces as f64;
    for j in 0..pieces {
        let lo = a + j as f64 * h;
        let hi = if j + 1 == pieces { b } else { lo + h };
        let (val, e) = gk15(&mut f, lo, hi);
        total += val;
        err += e;
        heap.push(Part { lo, hi, val, err: e });
    }
    loop {
        if err <= abs_tol.max(rel_tol * total.norm()) {
            // re-sum to shed accumulated rounding from the running updates
            return Ok(heap.iter().map(|p| p.val).sum());
        }
        if heap.len() >= max_intervals {
            return Err(QuadratureFailure { interval: (a, b), error_estimate: err });
        }
        let p = heap.pop().expect("nonempty");
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            return Err(QuadratureFailure { interval: (a, b), error_estimate: err });
        }
        let (v1, e1) = gk15(&mut f, p.lo, mid);
        let (v2, e2) = gk15(&mut f, mid, p.hi);
        total += v1 + v2 - p.val;
        err += e1 + e2 - p.err;
        heap.push(Part { lo: p.lo, hi: mid, val: v1, err: e1 });
        heap.push(Part { lo: mid, hi: p.hi, val: v2, err: e2 });
    }
}
