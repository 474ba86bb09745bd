//! Quadrature utilities: compensated summation, Gauss–Legendre panels in
//! log space, adaptive half-line integrals with tail truncation, and Laplace
//! transforms.
//!
//! The recurring integral shapes in this crate are `dt/t`-type integrals of
//! functions that are smooth in `log t` and decay like powers at both ends.
//! All of them are computed by composite Gauss–Legendre panels on a log
//! abscissa, extended decade by decade until a panel contributes less than a
//! configured fraction of the running sum. Non-decaying panel sequences are
//! reported as divergence errors rather than silently truncated.

use crate::error::{Error, IntegralEnd, Result};

/// Kahan–Babuska compensated accumulator.
///
/// Battery aggregation must be independent of summation order between runs
/// with the same inputs; compensation keeps panel sums stable to the last bit
/// even when magnitudes vary by many orders.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// 16-point Gauss–Legendre nodes on [-1, 1].
pub const GL16_NODES: [f64; 16] = [
    -0.989_400_934_991_649_9,
    -0.944_575_023_073_232_6,
    -0.865_631_202_387_831_7,
    -0.755_404_408_355_003_0,
    -0.617_876_244_402_643_7,
    -0.458_016_777_657_227_4,
    -0.281_603_550_779_258_9,
    -0.095_012_509_837_637_44,
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003_0,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];

/// Weights matching [`GL16_NODES`].
pub const GL16_WEIGHTS: [f64; 16] = [
    0.027_152_459_411_754_094,
    0.062_253_523_938_647_89,
    0.095_158_511_682_492_78,
    0.124_628_971_255_533_87,
    0.149_595_988_816_576_73,
    0.169_156_519_395_002_54,
    0.182_603_415_044_923_59,
    0.189_450_610_455_068_5,
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_59,
    0.169_156_519_395_002_54,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_094,
];

/// One 16-point Gauss–Legendre panel for `∫_a^b f(x) dx` on a linear abscissa.
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = KahanSum::new();
    for i in 0..16 {
        acc.add(GL16_WEIGHTS[i] * f(mid + half * GL16_NODES[i]));
    }
    half * acc.value()
}

/// Quadrature configuration.
///
/// `panels_per_decade` controls accuracy (4 sub-panels per decade keep the
/// per-panel Gauss–Legendre error below ~1e-20 for exponentially weighted
/// integrands); the tail options control adaptive extension on half-lines.
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub panels_per_decade: usize,
    /// A tail panel smaller than this fraction of the running sum (twice in a
    /// row) terminates the extension.
    pub rel_tail_tol: f64,
    pub max_decades_down: usize,
    pub max_decades_up: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self {
            panels_per_decade: 4,
            rel_tail_tol: 1e-14,
            max_decades_down: 160,
            max_decades_up: 160,
        }
    }
}

impl QuadOpts {
    /// The same options with doubled panel density (for refinement checks).
    pub fn refined(self) -> Self {
        Self {
            panels_per_decade: self.panels_per_decade * 2,
            ..self
        }
    }
}

const LN10: f64 = std::f64::consts::LN_10;

/// `∫_a^b f(t) dt` for `0 < a < b`, by Gauss–Legendre panels uniform in
/// `log t` with `opts.panels_per_decade` panels per decade.
pub fn integrate_log<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: &QuadOpts) -> f64 {
    assert!(a > 0.0 && b > a, "integrate_log requires 0 < a < b");
    let xa = a.ln();
    let xb = b.ln();
    let panel_w = LN10 / opts.panels_per_decade as f64;
    let n = ((xb - xa) / panel_w).ceil().max(1.0) as usize;
    let h = (xb - xa) / n as f64;
    let g = |x: f64| {
        let t = x.exp();
        f(t) * t
    };
    let mut acc = KahanSum::new();
    for i in 0..n {
        let lo = xa + i as f64 * h;
        acc.add(gl16(&g, lo, lo + h));
    }
    acc.value()
}

/// Result of an adaptive half-line integral.
#[derive(Debug, Clone, Copy)]
pub struct TailIntegral {
    pub value: f64,
    /// Lowest abscissa actually reached.
    pub reached_lo: f64,
    /// Highest abscissa actually reached.
    pub reached_hi: f64,
}

/// `∫_0^∞ f(t) dt` by decade panels expanding downward and upward from
/// `anchor` until each tail's panel contribution falls below
/// `opts.rel_tail_tol` of the running sum (two consecutive panels), with
/// divergence detection: if the budget of decades is exhausted while panels
/// are still significant, the offending end is reported.
pub fn integrate_half_line<F: Fn(f64) -> f64>(
    f: &F,
    anchor: f64,
    opts: &QuadOpts,
) -> Result<TailIntegral> {
    assert!(anchor > 0.0, "anchor must be positive");
    let mut acc = KahanSum::new();

    // Tail extension shared by both directions. Returns the reached abscissa.
    let mut extend = |start: f64, up: bool| -> Result<f64> {
        let max_decades = if up {
            opts.max_decades_up
        } else {
            opts.max_decades_down
        };
        let mut edge = start;
        let mut small_run = 0usize;
        for _ in 0..max_decades {
            let next = if up { edge * 10.0 } else { edge / 10.0 };
            let (lo, hi) = if up { (edge, next) } else { (next, edge) };
            let panel = integrate_log(f, lo, hi, opts);
            acc.add(panel);
            edge = next;
            let scale = acc.value().abs().max(f64::MIN_POSITIVE);
            if panel.abs() <= opts.rel_tail_tol * scale {
                small_run += 1;
                if small_run >= 2 {
                    return Ok(edge);
                }
            } else {
                small_run = 0;
            }
            if !up && edge < 1e-300 {
                return Ok(edge);
            }
        }
        let end = if up {
            IntegralEnd::Infinity
        } else {
            IntegralEnd::Zero
        };
        Err(Error::Divergence {
            end,
            message: format!(
                "panel contributions not decaying after {max_decades} decades from {start:.3e}"
            ),
        })
    };

    let lo = extend(anchor, false)?;
    let hi = extend(anchor, true)?;
    Ok(TailIntegral {
        value: acc.value(),
        reached_lo: lo,
        reached_hi: hi,
    })
}

/// `∫_0^b f(t) dt` with adaptive extension toward zero only.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: &F, b: f64, opts: &QuadOpts) -> Result<f64> {
    assert!(b > 0.0);
    let mut acc = KahanSum::new();
    let mut edge = b;
    let mut small_run = 0usize;
    for _ in 0..opts.max_decades_down {
        let next = edge / 10.0;
        let panel = integrate_log(f, next, edge, opts);
        acc.add(panel);
        edge = next;
        let scale = acc.value().abs().max(f64::MIN_POSITIVE);
        if panel.abs() <= opts.rel_tail_tol * scale {
            small_run += 1;
            if small_run >= 2 {
                return Ok(acc.value());
            }
        } else {
            small_run = 0;
        }
        if edge < 1e-300 {
            return Ok(acc.value());
        }
    }
    Err(Error::Divergence {
        end: IntegralEnd::Zero,
        message: format!("panel contributions not decaying approaching zero from {b:.3e}"),
    })
}

/// `∫_a^∞ f(t) dt` with adaptive extension toward infinity only.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, opts: &QuadOpts) -> Result<f64> {
    assert!(a > 0.0);
    let mut acc = KahanSum::new();
    let mut edge = a;
    let mut small_run = 0usize;
    for _ in 0..opts.max_decades_up {
        let next = edge * 10.0;
        let panel = integrate_log(f, edge, next, opts);
        acc.add(panel);
        edge = next;
        let scale = acc.value().abs().max(f64::MIN_POSITIVE);
        if panel.abs() <= opts.rel_tail_tol * scale {
            small_run += 1;
            if small_run >= 2 {
                return Ok(acc.value());
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::Divergence {
        end: IntegralEnd::Infinity,
        message: format!("panel contributions not decaying toward infinity from {a:.3e}"),
    })
}

/// Laplace transform `L[f](λ) = ∫_0^∞ e^{-λ t} f(t) dt`, computed as
/// `(1/λ) ∫_0^∞ e^{-u} f(u/λ) du` so the exponential cutoff sits at `u ≈ 1`
/// independently of `λ`.
pub fn laplace_transform<F: Fn(f64) -> f64>(f: &F, lambda: f64, opts: &QuadOpts) -> Result<f64> {
    assert!(lambda > 0.0, "laplace_transform requires lambda > 0");
    // e^{-u} underflows at u ~ 745, so cap the upward extension there.
    let capped = QuadOpts {
        max_decades_up: opts.max_decades_up.min(4),
        ..*opts
    };
    let g = |u: f64| (-u).exp() * f(u / lambda);
    let tail = integrate_half_line(&g, 1.0, &capped)?;
    Ok(tail.value / lambda)
}
