//! Bracketed root finding shared by the billiard map and the orbit solver.

/// Outcome of a bracketed solve.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Newton's method safeguarded by bisection on the bracket `[lo, hi]`.
///
/// `f` returns the function value and its derivative. The caller supplies
/// the signs at the endpoints (`f_lo_negative` is true when `f < 0` near
/// `lo`), which lets the endpoints be singular points of `f` where only the
/// one-sided limit is known. Iteration stops when `|f| <= ftol` or the
/// bracket shrinks below `xtol`.
pub fn safeguarded_newton<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    f_lo_negative: bool,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Root
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for it in 0..max_iter {
        if fx.abs() <= ftol {
            return Root { x, value: fx, iterations: it };
        }
        // shrink the bracket around x
        if (fx < 0.0) == f_lo_negative {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let newton_ok = dfx.is_finite()
            && dfx != 0.0
            && newton > lo
            && newton < hi
            && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        if newton_ok {
            dx = newton - x;
            x = newton;
        } else {
            let mid = 0.5 * (lo + hi);
            dx = mid - x;
            x = mid;
        }
        if (hi - lo).abs() <= xtol || dx.abs() <= 0.25 * xtol {
            let (v, _) = f(x);
            return Root { x, value: v, iterations: it + 1 };
        }
        let (v, dv) = f(x);
        fx = v;
        dfx = dv;
    }
    Root { x, value: fx, iterations: max_iter }
}
