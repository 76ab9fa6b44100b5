//! Gauss-Kronrod quadrature with a single global error budget over many pieces.

// node and weight tables keep their published digits
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_804_939_476_142_360_184,
    0.525_532_409_916_328_985_817_739_049_189_246,
    0.796_666_477_413_626_739_591_553_936_475_830,
    0.960_289_856_497_536_231_683_560_868_569_473,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_361_982_965_150_449_277_196,
    0.313_706_645_877_887_287_337_962_201_986_601,
    0.222_381_034_453_374_470_544_355_994_426_241,
    0.101_228_536_290_376_259_152_531_354_309_962,
];

/// One Gauss-Kronrod 15-point panel: (integral, error estimate, integral of |f|).
pub fn gk15<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    let mut rabs = fc.abs() * WGK[7];
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        rk += WGK[j] * (f1 + f2);
        rabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * rk;
    let mut rasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        rasc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let result = rk * h;
    let rasc = rasc * h.abs();
    let rabs = rabs * h.abs();
    let mut err = ((rk - rg) * h).abs();
    if rasc != 0.0 && err != 0.0 {
        err = rasc * (200.0 * err / rasc).powf(1.5).min(1.0);
    }
    let eps = 50.0 * f64::EPSILON * rabs;
    if rabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) && err < eps {
        err = eps;
    }
    (result, err, rabs)
}

/// Fixed 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre8<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..4 {
        s += GL8_W[k] * (f(c - h * GL8_X[k]) + f(c + h * GL8_X[k]));
    }
    s * h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOutcome {
    pub value: f64,
    pub error: f64,
    /// Integral of the absolute integrand, used for relative tolerances and shares.
    pub abs_value: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    piece: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Integrates `f(piece, t)` over every `(piece, a, b)` with one shared error budget.
///
/// Panels with the largest error are bisected until the summed error is below
/// `max(abs_tol, rel_tol * |value|)` or `max_subdivisions` bisections have been spent.
pub fn integrate_pieces<F>(f: F, pieces: &[(usize, f64, f64)], abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> QuadOutcome
where
    F: Fn(usize, f64) -> f64,
{
    let mut heap = BinaryHeap::with_capacity(pieces.len() + 16);
    let (mut value, mut error) = (0.0, 0.0);
    for &(piece, a, b) in pieces {
        if !(b > a) {
            continue;
        }
        let (v, e, r) = gk15(|t| f(piece, t), a, b);
        value += v;
        error += e;
        heap.push(Panel { piece, a, b, value: v, error: e, abs: r });
    }
    let mut subdivisions = 0;
    let target = |value: f64| abs_tol.max(rel_tol * value.abs());
    while error > target(value) && subdivisions < max_subdivisions {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            // cannot split further in floating point; keep the panel as is
            heap.push(Panel { error: 0.0, ..p });
            error -= p.error;
            continue;
        }
        let (v1, e1, r1) = gk15(|t| f(p.piece, t), p.a, m);
        let (v2, e2, r2) = gk15(|t| f(p.piece, t), m, p.b);
        value += v1 + v2 - p.value;
        error += e1 + e2 - p.error;
        heap.push(Panel { piece: p.piece, a: p.a, b: m, value: v1, error: e1, abs: r1 });
        heap.push(Panel { piece: p.piece, a: m, b: p.b, value: v2, error: e2, abs: r2 });
        subdivisions += 1;
    }
    // re-sum to shed the drift of the running updates
    let (mut value, mut error, mut abs) = (0.0, 0.0, 0.0);
    for p in heap.iter() {
        value += p.value;
        error += p.error;
        abs += p.abs;
    }
    let converged = error <= target(value);
    QuadOutcome { value, error, abs_value: abs, subdivisions, converged }
}

/// Adaptive integral of a single function on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> QuadOutcome {
    integrate_pieces(|_, t| f(t), &[(0, a, b)], abs_tol, rel_tol, max_subdivisions)
}
