//! Adaptive Gauss–Kronrod (7, 15) quadrature.

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
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Kronrod/Gauss pair on `[a, b]`. Nodes are handed to `f` as an unevaluated
/// sum `hi + lo` so integrands can use the extra bits.
fn kronrod<F: Fn(f64, f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (cs, ce) = two_sum(a, b);
    let (c, c_lo) = (0.5 * cs, 0.5 * ce);
    let (hs, he) = two_sum(b, -a);
    let (h, h_lo) = (0.5 * hs, 0.5 * he);
    let at = |sign: f64, x: f64| {
        let dx = h * x;
        let dx_lo = h.mul_add(x, -dx) + h_lo * x;
        let (hi, e) = two_sum(c, sign * dx);
        let lo = e + c_lo + sign * dx_lo;
        let (hi, lo2) = two_sum(hi, lo);
        f(hi, lo2)
    };
    let fc = f(c, c_lo);
    let mut k = Neumaier::default();
    let mut g = Neumaier::default();
    k.add(WGK[7] * fc);
    g.add(WG[3] * fc);
    for i in 0..7 {
        let s = at(-1.0, XGK[i]) + at(1.0, XGK[i]);
        k.add(WGK[i] * s);
        if i % 2 == 1 {
            g.add(WG[i / 2] * s);
        }
    }
    let kv = k.value() * h;
    let gv = g.value() * h;
    (kv, (kv - gv).abs())
}

/// Integrates `f` over `[a, b]`, starting from `panels` equal sub-intervals and
/// bisecting any panel whose Kronrod/Gauss discrepancy exceeds its share of
/// `max(abs_tol, rel_tol · |estimate|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    integrate_split(&|x: f64, _: f64| f(x), a, b, panels, rel_tol, abs_tol)
}

/// As [`integrate`], but `f(hi, lo)` receives each node as a double-double.
pub fn integrate_split<F: Fn(f64, f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut coarse = Neumaier::default();
    let mut stack: Vec<(f64, f64, f64, f64, u32)> = Vec::with_capacity(panels);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { a + width * (i + 1) as f64 };
        let (v, e) = kronrod(f, lo, hi);
        coarse.add(v);
        stack.push((lo, hi, v, e, 0));
    }
    let scale = coarse.value().abs();
    let tol = abs_tol.max(rel_tol * scale).max(f64::MIN_POSITIVE);
    let total_len = (b - a).abs();

    let mut acc = Neumaier::default();
    let mut worst = 0.0f64;
    while let Some((lo, hi, v, e, depth)) = stack.pop() {
        let share = tol * (hi - lo).abs() / total_len;
        if e <= share || e <= 64.0 * f64::EPSILON * v.abs() {
            acc.add(v);
            continue;
        }
        if depth >= MAX_DEPTH {
            worst = worst.max(e);
            acc.add(v);
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let (vl, el) = kronrod(f, lo, mid);
        let (vr, er) = kronrod(f, mid, hi);
        stack.push((lo, mid, vl, el, depth + 1));
        stack.push((mid, hi, vr, er, depth + 1));
    }
    if worst > tol {
        return Err(Error::QuadratureNotConverged {
            achieved: worst,
            requested: tol,
        });
    }
    Ok(acc.value())
}
