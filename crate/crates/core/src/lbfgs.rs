//! Limited-memory BFGS pieces: the two-loop recursion and a strong Wolfe line search.
//!
//! The driver in [`crate::optimizer`] takes one step at a time because the
//! objective changes between iterations, so this module exposes the parts
//! rather than a closed minimization loop.

use std::collections::VecDeque;

use crate::scalar::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Curvature pairs `(s, y)` with `s = x_{k+1} - x_k`, `y = g_{k+1} - g_k`.
#[derive(Clone, Debug)]
pub struct Lbfgs<T> {
    memory: usize,
    pairs: VecDeque<(Vec<T>, Vec<T>, T)>,
}

impl<T: Real> Lbfgs<T> {
    pub fn new(memory: usize) -> Self {
        Self {
            memory: memory.max(1),
            pairs: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    /// Stores a pair. Returns false, leaving the memory untouched, when the
    /// pair fails the curvature test `s·y > eps |s| |y|`.
    pub fn push(&mut self, s: Vec<T>, y: Vec<T>) -> bool {
        let sy = dot(&s, &y);
        let scale = dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if !(sy > T::lit(1e-12) * scale) || !sy.is_finite() {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, T::one() / sy));
        true
    }

    /// Search direction `-H g` from the two-loop recursion, with the initial
    /// Hessian scaled by `s·y / y·y` of the newest pair.
    pub fn direction(&self, g: &[T]) -> Vec<T> {
        let mut q = g.to_vec();
        let mut alpha = vec![T::zero(); self.pairs.len()];
        for (k, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            alpha[k] = *rho * dot(s, &q);
            axpy(-alpha[k], y, &mut q);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in self.pairs.iter().enumerate() {
            let beta = *rho * dot(y, &q);
            axpy(alpha[k] - beta, s, &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolfeParams<T> {
    pub c1: T,
    pub c2: T,
    pub max_evals: usize,
}

impl<T: Real> Default for WolfeParams<T> {
    fn default() -> Self {
        Self {
            c1: T::lit(1e-4),
            c2: T::lit(0.9),
            max_evals: 20,
        }
    }
}

/// A point on the search ray with its value and full gradient.
#[derive(Clone, Debug)]
pub struct Probe<T, E> {
    pub alpha: T,
    pub value: T,
    pub grad: Vec<T>,
    pub x: Vec<T>,
    pub extra: E,
}

#[derive(Clone, Debug)]
pub enum SearchOutcome<T, E> {
    /// Both strong Wolfe conditions hold.
    Wolfe(Probe<T, E>),
    /// Sufficient decrease only; the evaluation budget ran out first.
    Armijo(Probe<T, E>),
    /// `dir` is not a descent direction.
    NotDescent,
    /// No probe satisfied sufficient decrease.
    Failed { evals: usize },
}

impl<T, E> SearchOutcome<T, E> {
    pub fn probe(self) -> Option<Probe<T, E>> {
        match self {
            SearchOutcome::Wolfe(p) | SearchOutcome::Armijo(p) => Some(p),
            _ => None,
        }
    }
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, clamped
/// to the inner 80% of the bracket; bisection when the cubic has no minimum.
fn cubic_step<T: Real>(a: T, fa: T, da: T, b: T, fb: T, db: T) -> T {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = (hi - lo) * T::lit(0.1);
    let d1 = da + db - T::lit(3.0) * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = (a + b) * T::half();
    if !(disc >= T::zero()) {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + T::two() * d2);
    if t.is_finite() && t > lo + margin && t < hi - margin {
        t
    } else {
        mid
    }
}

/// Strong Wolfe search along `dir` from `x` (Nocedal and Wright, algorithms
/// 3.5 and 3.6), starting at step `alpha0`.
///
/// `eval` returns the value, gradient and any by-product the caller wants
/// to keep for the accepted point.
pub fn strong_wolfe<T: Real, E: Clone>(
    x: &[T],
    f0: T,
    g0: &[T],
    dir: &[T],
    alpha0: T,
    params: WolfeParams<T>,
    mut eval: impl FnMut(&[T]) -> (T, Vec<T>, E),
) -> SearchOutcome<T, E> {
    let d0 = dot(g0, dir);
    if !(d0 < T::zero()) {
        return SearchOutcome::NotDescent;
    }
    let mut evals = 0;
    let mut probe = |alpha: T, evals: &mut usize| {
        *evals += 1;
        let mut xt = x.to_vec();
        axpy(alpha, dir, &mut xt);
        let (value, grad, extra) = eval(&xt);
        let slope = dot(&grad, dir);
        (
            Probe {
                alpha,
                value,
                grad,
                x: xt,
                extra,
            },
            slope,
        )
    };
    let armijo = |p: &Probe<T, E>| p.value.is_finite() && p.value <= f0 + params.c1 * p.alpha * d0;
    let curvature = |slope: T| slope.abs() <= -params.c2 * d0;

    let mut best: Option<Probe<T, E>> = None;
    let keep = |best: &mut Option<Probe<T, E>>, p: &Probe<T, E>| {
        if armijo(p) && best.as_ref().is_none_or(|b| p.value < b.value) {
            *best = Some(p.clone());
        }
    };

    // Bracketing phase.
    let (mut prev_alpha, mut prev_f, mut prev_slope) = (T::zero(), f0, d0);
    let mut alpha = alpha0;
    let (mut lo, mut hi);
    loop {
        let (p, slope) = probe(alpha, &mut evals);
        keep(&mut best, &p);
        if !armijo(&p) || (evals > 1 && p.value >= prev_f) {
            lo = (prev_alpha, prev_f, prev_slope);
            hi = (alpha, p.value, slope);
            break;
        }
        if curvature(slope) {
            return SearchOutcome::Wolfe(p);
        }
        if slope >= T::zero() {
            lo = (alpha, p.value, slope);
            hi = (prev_alpha, prev_f, prev_slope);
            break;
        }
        if evals >= params.max_evals {
            return SearchOutcome::Armijo(p);
        }
        prev_alpha = alpha;
        prev_f = p.value;
        prev_slope = slope;
        alpha *= T::two();
    }

    // Zoom phase; `lo` always satisfies sufficient decrease.
    while evals < params.max_evals {
        let finite = hi.1.is_finite() && hi.2.is_finite();
        let a = if finite {
            cubic_step(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2)
        } else {
            (lo.0 + hi.0) * T::half()
        };
        let (p, slope) = probe(a, &mut evals);
        keep(&mut best, &p);
        if !armijo(&p) || p.value >= lo.1 {
            hi = (a, p.value, slope);
        } else {
            if curvature(slope) {
                return SearchOutcome::Wolfe(p);
            }
            if slope * (hi.0 - lo.0) >= T::zero() {
                hi = lo;
            }
            lo = (a, p.value, slope);
        }
        if (hi.0 - lo.0).abs() <= T::epsilon() * lo.0.abs().max(T::one()) {
            break;
        }
    }
    match best {
        Some(p) => SearchOutcome::Armijo(p),
        None => SearchOutcome::Failed { evals },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>, ()) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        (f, g, ())
    }

    #[test]
    fn minimizes_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let (mut f, mut g, _) = rosenbrock(&x);
        let mut mem = Lbfgs::new(7);
        for _ in 0..200 {
            if dot(&g, &g).sqrt() < 1e-10 {
                break;
            }
            let dir = mem.direction(&g);
            let alpha0 = if mem.is_empty() { 1e-3 } else { 1.0 };
            let p = strong_wolfe(&x, f, &g, &dir, alpha0, WolfeParams::default(), rosenbrock)
                .probe()
                .unwrap();
            let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = p.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
            mem.push(s, y);
            x = p.x;
            f = p.value;
            g = p.grad;
        }
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8, "{x:?}");
    }

    #[test]
    fn quadratic_converges_in_dimension_steps() {
        // Diagonal quadratic: BFGS with exact-enough line searches ends within n + 1 steps.
        let diag = [1.0, 4.0, 9.0, 16.0];
        let quad = |x: &[f64]| {
            let f = x.iter().zip(diag).map(|(v, d)| 0.5 * d * v * v).sum::<f64>();
            (f, x.iter().zip(diag).map(|(v, d)| d * v).collect::<Vec<_>>(), ())
        };
        let params = WolfeParams {
            c2: 1e-6,
            max_evals: 60,
            ..WolfeParams::default()
        };
        let mut x = vec![1.0, 1.0, 1.0, 1.0];
        let (mut f, mut g, _) = quad(&x);
        let mut mem = Lbfgs::new(7);
        let mut steps = 0;
        while dot(&g, &g).sqrt() > 1e-9 && steps < 20 {
            let dir = mem.direction(&g);
            let p = strong_wolfe(&x, f, &g, &dir, 1.0, params, quad).probe().unwrap();
            let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = p.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
            mem.push(s, y);
            (x, f, g) = (p.x, p.value, p.grad);
            steps += 1;
        }
        assert!(steps <= 6, "{steps}");
    }

    #[test]
    fn wolfe_conditions_hold_on_accept() {
        let x = [-1.2, 1.0];
        let (f0, g0, _) = rosenbrock(&x);
        let dir: Vec<f64> = g0.iter().map(|v| -v).collect();
        let params = WolfeParams::default();
        let SearchOutcome::Wolfe(p) = strong_wolfe(&x, f0, &g0, &dir, 1.0, params, rosenbrock) else {
            panic!("no Wolfe point");
        };
        let d0 = dot(&g0, &dir);
        assert!(p.value <= f0 + params.c1 * p.alpha * d0);
        assert!(dot(&p.grad, &dir).abs() <= -params.c2 * d0);
    }

    #[test]
    fn ascent_direction_rejected() {
        let x = [0.0, 0.0];
        let (f0, g0, _) = rosenbrock(&x);
        let out = strong_wolfe(&x, f0, &g0, &g0, 1.0, WolfeParams::default(), rosenbrock);
        assert!(matches!(out, SearchOutcome::NotDescent));
    }

    #[test]
    fn push_rejects_negative_curvature() {
        let mut m = Lbfgs::<f64>::new(2);
        assert!(!m.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(m.push(vec![1.0, 0.0], vec![2.0, 0.0]));
        assert!(m.push(vec![0.0, 1.0], vec![0.0, 3.0]));
        assert!(m.push(vec![1.0, 1.0], vec![1.0, 1.0]));
        assert_eq!(m.len(), 2);
        // With s = y / d on a diagonal quadratic the direction is the Newton step.
        let mut m = Lbfgs::<f64>::new(5);
        m.push(vec![1.0, 0.0], vec![2.0, 0.0]);
        m.push(vec![0.0, 1.0], vec![0.0, 3.0]);
        let d = m.direction(&[2.0, 3.0]);
        assert!((d[0] + 1.0).abs() < 1e-12 && (d[1] + 1.0).abs() < 1e-12, "{d:?}");
    }
}
