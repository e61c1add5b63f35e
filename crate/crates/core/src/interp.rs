//! Four-point Lagrange interpolation on uniform nodes.

/// Weights for nodes `j-1, j, j+1, j+2` at offset `a` in `[0, 1)` past node
/// `j`. At `a == 0` the weights are exactly `(0, 1, 0, 0)`.
#[inline(always)]
pub fn cubic_weights(a: f64) -> [f64; 4] {
    let am1 = a - 1.0;
    let am2 = a - 2.0;
    let ap1 = a + 1.0;
    [
        -a * am1 * am2 / 6.0,
        ap1 * am1 * am2 / 2.0,
        -ap1 * a * am2 / 2.0,
        ap1 * a * am1 / 6.0,
    ]
}

/// Split a fractional index into the base node and in-cell offset.
#[inline(always)]
pub fn split(u: f64) -> (isize, f64) {
    let base = u.floor();
    (base as isize, u - base)
}

/// Cubic interpolant of `data` at fractional index `u`, with `outside` used
/// for every node beyond either end.
#[inline]
pub fn sample(data: &[f64], u: f64, outside: f64) -> f64 {
    let (base, a) = split(u);
    let w = cubic_weights(a);
    let n = data.len() as isize;
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let idx = base - 1 + j as isize;
        let v = if idx >= 0 && idx < n { data[idx as usize] } else { outside };
        acc += wj * v;
    }
    acc
}

/// Shift a whole array by a constant fractional number of cells:
/// `out[i] = interp(data, i - shift)` with `outside` beyond the ends.
pub fn shift_into(data: &[f64], shift: f64, outside: f64, out: &mut [f64]) {
    let (fl, a) = split(-shift);
    let w = cubic_weights(a);
    let n = data.len() as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let base = i as isize + fl;
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let idx = base - 1 + j as isize;
            let v = if idx >= 0 && idx < n { data[idx as usize] } else { outside };
            acc += wj * v;
        }
        *o = acc;
    }
}
