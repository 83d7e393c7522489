//! Small derivative-free solvers used by the threshold and depth searches.

use crate::scalar::Real;

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let x = (a + b) * T::lit(0.5);
    (x, f(x))
}

/// Bisection for a sign change of `f` on `[a, b]`. Returns `None` when the
/// endpoints have the same sign.
pub fn bisect_root<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> Option<T> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return None;
    }
    for _ in 0..200 {
        let m = (a + b) * T::lit(0.5);
        if (b - a).abs() <= tol {
            return Some(m);
        }
        let fm = f(m);
        if fm == T::zero() {
            return Some(m);
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some((a + b) * T::lit(0.5))
}

/// Nelder-Mead simplex minimization in the plane.
pub fn nelder_mead_2d<T: Real>(
    f: impl Fn(T, T) -> T,
    start: (T, T),
    step: T,
    xtol: T,
    max_iter: usize,
) -> ((T, T), T) {
    let mut simplex = [
        (start, f(start.0, start.1)),
        ((start.0 + step, start.1), f(start.0 + step, start.1)),
        ((start.0, start.1 + step), f(start.0, start.1 + step)),
    ];
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| {
                (p.0 - simplex[0].0 .0)
                    .abs()
                    .max((p.1 - simplex[0].0 .1).abs())
            })
            .fold(T::zero(), T::max);
        if size <= xtol {
            break;
        }
        let c = (
            (simplex[0].0 .0 + simplex[1].0 .0) * half,
            (simplex[0].0 .1 + simplex[1].0 .1) * half,
        );
        let worst = simplex[2].0;
        let refl = (c.0 + (c.0 - worst.0), c.1 + (c.1 - worst.1));
        let fr = f(refl.0, refl.1);
        if fr < simplex[0].1 {
            let exp = (c.0 + two * (c.0 - worst.0), c.1 + two * (c.1 - worst.1));
            let fe = f(exp.0, exp.1);
            simplex[2] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[1].1 {
            simplex[2] = (refl, fr);
        } else {
            let con = (c.0 + half * (worst.0 - c.0), c.1 + half * (worst.1 - c.1));
            let fc = f(con.0, con.1);
            if fc < simplex[2].1 {
                simplex[2] = (con, fc);
            } else {
                let best = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    let p = (
                        best.0 + half * (v.0 .0 - best.0),
                        best.1 + half * (v.0 .1 - best.1),
                    );
                    *v = (p, f(p.0, p.1));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex[0]
}
