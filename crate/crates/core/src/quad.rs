//! Numerical integration.
//!
//! Two rules cover everything in the crate:
//!
//! * [`tanh_sinh`] (double-exponential) for integrands with algebraic
//!   endpoint singularities. The integrand receives the abscissa together
//!   with its exact distances to both endpoints, so factors such as
//!   `(1 - v)^(-α)` can be evaluated without cancellation near `v = 1`.
//! * [`gauss_kronrod`] (adaptive G7/K15) for smooth, possibly oscillatory,
//!   integrands on finite intervals.
//!
//! Error estimates are the usual heuristic ones: the difference between
//! successive tanh-sinh levels, and |G7 − K15| per subinterval. Both are
//! conservative in practice but not rigorous bounds.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// tanh-sinh: finest level (step 2^-max_level). Gauss-Kronrod: maximum
    /// number of subintervals is `16 << max_level`.
    pub max_level: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_level: 9,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Result of a quadrature: value, estimated absolute error, number of
/// integrand evaluations and whether the requested tolerance was met.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            error: 0.0,
            evals: 0,
            converged: true,
        }
    }
}

// ---------------------------------------------------------------------------
// tanh-sinh

#[derive(Debug, Clone, Copy)]
struct Node {
    t: f64,
    weight: f64,
    /// 1 - |x| for the abscissa x = tanh(π/2 sinh t) in [-1, 1].
    comp: f64,
}

const MAX_TABLE_LEVEL: usize = 12;
const T_MAX: f64 = 6.2;

fn node_at(t: f64) -> Option<Node> {
    let u = FRAC_PI_2 * t.sinh();
    let comp = 2.0 / (1.0 + (2.0 * u).exp());
    if comp < 1e-305 {
        return None;
    }
    let ch = u.cosh();
    let weight = FRAC_PI_2 * t.cosh() / (ch * ch);
    Some(Node { t, weight, comp })
}

fn levels() -> &'static [Vec<Node>] {
    static TABLE: OnceLock<Vec<Vec<Node>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(MAX_TABLE_LEVEL + 1);
        let mut level0 = Vec::new();
        let mut k = 1.0;
        while k <= T_MAX {
            match node_at(k) {
                Some(n) => level0.push(n),
                None => break,
            }
            k += 1.0;
        }
        table.push(level0);
        for level in 1..=MAX_TABLE_LEVEL {
            let h = (0.5f64).powi(level as i32);
            let mut nodes = Vec::new();
            let mut j = 0usize;
            loop {
                let t = (2 * j + 1) as f64 * h;
                if t > T_MAX {
                    break;
                }
                match node_at(t) {
                    Some(n) => nodes.push(n),
                    None => break,
                }
                j += 1;
            }
            table.push(nodes);
        }
        table
    })
}

/// ∫_a^b f. The integrand is called as `f(x, x - a, b - x)`.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Estimate
where
    F: FnMut(f64, f64, f64) -> f64,
{
    tanh_sinh_pair(|x, da, db| (f(x, da, db), 0.0), a, b, opts)
}

/// Like [`tanh_sinh`] for integrands that carry their own absolute error
/// (typically an inner quadrature). The reported error adds the
/// weighted integral of the inner errors to the outer level difference.
pub fn tanh_sinh_pair<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Estimate
where
    F: FnMut(f64, f64, f64) -> (f64, f64),
{
    if a == b {
        return Estimate::exact(0.0);
    }
    if b < a {
        let mut e = tanh_sinh_core(&mut |x, da, db| f(x, db, da), b, a, opts);
        e.value = -e.value;
        return e;
    }
    tanh_sinh_core(&mut f, a, b, opts)
}

type PairFn<'a> = dyn FnMut(f64, f64, f64) -> (f64, f64) + 'a;

fn tanh_sinh_core(f: &mut PairFn<'_>, a: f64, b: f64, opts: &QuadOptions) -> Estimate {
    let width = b - a;
    let half = 0.5 * width;
    let table = levels();
    let max_level = opts.max_level.min(MAX_TABLE_LEVEL);

    let mut evals = 0usize;
    let eval_pair = |node: &Node, f: &mut PairFn<'_>| -> (f64, f64, f64) {
        // left point and right point of a symmetric pair
        let da_l = half * node.comp;
        let db_r = half * node.comp;
        let (fl, el) = f(a + da_l, da_l, width - da_l);
        let (fr, er) = f(b - db_r, width - db_r, db_r);
        let wl = guard(node.weight * fl, node.weight);
        let wr = guard(node.weight * fr, node.weight);
        (
            wl + wr,
            node.weight * (el.abs() + er.abs()),
            wl.abs() + wr.abs(),
        )
    };

    let (f0, e0) = f(a + half, half, half);
    evals += 1;
    let mut sum = FRAC_PI_2 * f0;
    let mut err_sum = FRAC_PI_2 * e0.abs();
    let mut abs_sum = sum.abs();

    // Level 0 also fixes how far out the finer levels need to go.
    let mut t_cut = 0.0;
    let mut negligible = 0;
    for node in &table[0] {
        let (s, e, a_) = eval_pair(node, f);
        evals += 2;
        sum += s;
        err_sum += e;
        abs_sum += a_;
        t_cut = node.t;
        if a_ <= 1e-22 * abs_sum.max(f64::MIN_POSITIVE) {
            negligible += 1;
            if negligible >= 2 {
                break;
            }
        } else {
            negligible = 0;
        }
    }
    t_cut += 0.5;

    let mut estimate = half * sum;
    let mut error = f64::INFINITY;
    let mut converged = false;
    let mut h = 1.0;
    for level_nodes in table.iter().take(max_level + 1).skip(1) {
        h *= 0.5;
        for node in level_nodes.iter().take_while(|n| n.t <= t_cut) {
            let (s, e, a_) = eval_pair(node, f);
            evals += 2;
            sum += s;
            err_sum += e;
            abs_sum += a_;
        }
        let next = half * h * sum;
        let roundoff = 4.0 * f64::EPSILON * half * h * abs_sum;
        error = (next - estimate).abs() + roundoff;
        estimate = next;
        if h <= 0.125 && error <= opts.target(estimate) {
            converged = true;
            break;
        }
    }
    if !estimate.is_finite() {
        converged = false;
    }
    Estimate {
        value: estimate,
        error: error + half * h * err_sum,
        evals,
        converged,
    }
}

fn guard(term: f64, weight: f64) -> f64 {
    // Far-out nodes of an integrable endpoint singularity may overflow
    // the integrand while the weight underflows; such terms are nil.
    if !term.is_finite() && weight < 1e-200 {
        0.0
    } else {
        term
    }
}

/// ∫_a^∞ f via x = a + scale·r/(1−r) and tanh-sinh on r ∈ (0, 1). The
/// integrand is called as `f(x, x - a)`. `scale` should be of the order of
/// the length scale of the integrand.
pub fn semi_infinite<F>(mut f: F, a: f64, scale: f64, opts: &QuadOptions) -> Estimate
where
    F: FnMut(f64, f64) -> f64,
{
    semi_infinite_pair(|x, d| (f(x, d), 0.0), a, scale, opts)
}

pub fn semi_infinite_pair<F>(mut f: F, a: f64, scale: f64, opts: &QuadOptions) -> Estimate
where
    F: FnMut(f64, f64) -> (f64, f64),
{
    tanh_sinh_pair(
        |_, r, one_minus_r| {
            if one_minus_r <= 0.0 {
                return (0.0, 0.0);
            }
            let d = scale * r / one_minus_r;
            let jac = scale / (one_minus_r * one_minus_r);
            let (v, e) = f(a + d, d);
            let term = v * jac;
            if !term.is_finite() && one_minus_r < 1e-150 {
                return (0.0, 0.0);
            }
            (term, e * jac)
        },
        0.0,
        1.0,
        opts,
    )
}

// ---------------------------------------------------------------------------
// adaptive Gauss-Kronrod (G7/K15)

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
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

/// Adaptive Gauss-Kronrod on a finite interval, bisecting the subinterval
/// with the largest error estimate first.
pub fn gauss_kronrod<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Estimate
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        return Estimate::exact(0.0);
    }
    let max_intervals = 16usize << opts.max_level.min(12);
    let (v0, e0) = kronrod15(&mut f, a, b);
    let mut intervals: Vec<(f64, f64, f64, f64)> = vec![(a, b, v0, e0)];
    let mut evals = 15;
    let mut total = v0;
    let mut total_err = e0;
    while total_err > opts.target(total) && intervals.len() < max_intervals {
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&mut f, lo, mid);
        let (v2, e2) = kronrod15(&mut f, mid, hi);
        evals += 30;
        total += v1 + v2 - v;
        total_err += e1 + e2 - e;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // re-sum to shed accumulated rounding from the running updates
    let value: f64 = intervals.iter().map(|i| i.2).sum();
    let error: f64 = intervals.iter().map(|i| i.3).sum();
    Estimate {
        value,
        error,
        evals,
        converged: error <= opts.target(value) && value.is_finite(),
    }
}
