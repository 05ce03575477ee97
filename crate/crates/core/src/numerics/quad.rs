//! Adaptive Gauss-Kronrod (G7/K15) quadrature.
//!
//! The integrand is fallible so that model-evaluation errors propagate
//! out of the integrator unchanged.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::numerics::sum::NeumaierSum;

/// Kronrod abscissae on [0, 1] (symmetric); every other node from index 1 is a Gauss node.
pub(crate) const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

pub(crate) const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 Kronrod nodes mapped onto `[a, b]`, paired with their weights.
pub(crate) fn kronrod_nodes(a: f64, b: f64) -> [(f64, f64); 15] {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 15];
    for j in 0..7 {
        out[2 * j] = (center - half * XGK[j], half * WGK[j]);
        out[2 * j + 1] = (center + half * XGK[j], half * WGK[j]);
    }
    out[14] = (center, half * WGK[7]);
    out
}

/// K15 value and G7-based error from integrand values laid out as in
/// [`kronrod_nodes`], on a panel of half-width `half`.
pub(crate) fn rule_from_values(v: &[f64; 15], half: f64) -> (f64, f64) {
    let fc = v[14];
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    for j in 0..7 {
        let (f1, f2) = (v[2 * j], v[2 * j + 1]);
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((v[2 * j] - mean).abs() + (v[2 * j + 1] - mean).abs());
    }
    let h = half.abs();
    (res_k * half, rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h))
}

/// Single-panel K15 estimate with its G7-based error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

pub fn gauss_kronrod_15<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = f(center)?;
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let error = rescale_error((res_k - res_g) * half, res_abs * abs_half, res_asc * abs_half);
    if !value.is_finite() {
        return Err(Error::Overflow(format!("integrand on [{a}, {b}]")));
    }
    Ok(Panel { a, b, value, error })
}

/// Tolerances for [`integrate`]. Convergence is reached when the summed
/// error estimate is below `max(abs_tol, rel_tol * |value|)`.
#[derive(Debug, Clone, Copy)]
pub struct QuadTolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadTolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_panels: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    /// Final partition, sorted by left endpoint.
    pub panels: Vec<Panel>,
}

struct ByError(Panel);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Globally adaptive bisection on the panel with the largest error.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: Vec::new(),
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(ByError(gauss_kronrod_15(&mut f, a, b)?));

    loop {
        let (value, error) = totals(heap.iter().map(|p| &p.0));
        let target = tol.abs_tol.max(tol.rel_tol * value.abs());
        if error <= target {
            return Ok(finish(heap, value, error));
        }
        if heap.len() >= tol.max_panels {
            return Err(Error::Quadrature { a, b, error });
        }
        let worst = heap.pop().expect("non-empty heap").0;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point; accept what we have.
            heap.push(ByError(worst));
            let (value, error) = totals(heap.iter().map(|p| &p.0));
            if error <= 1e3 * target {
                return Ok(finish(heap, value, error));
            }
            return Err(Error::Quadrature { a, b, error });
        }
        heap.push(ByError(gauss_kronrod_15(&mut f, worst.a, mid)?));
        heap.push(ByError(gauss_kronrod_15(&mut f, mid, worst.b)?));
    }
}

fn totals<'a>(panels: impl Iterator<Item = &'a Panel>) -> (f64, f64) {
    let mut v = NeumaierSum::default();
    let mut e = NeumaierSum::default();
    for p in panels {
        v.add(p.value);
        e.add(p.error);
    }
    (v.total(), e.total())
}

fn finish(heap: BinaryHeap<ByError>, value: f64, error: f64) -> QuadResult {
    let mut panels: Vec<Panel> = heap.into_iter().map(|p| p.0).collect();
    panels.sort_by(|l, r| l.a.total_cmp(&r.a));
    QuadResult {
        value,
        error,
        panels,
    }
}

/// Convenience wrapper for infallible integrands.
pub fn integrate_plain<F>(mut f: F, a: f64, b: f64, tol: QuadTolerance) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), a, b, tol)
}
