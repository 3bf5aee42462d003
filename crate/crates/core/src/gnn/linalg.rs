//! Row-major dense kernels.

/// `out += W x` for `W` of shape `rows x cols`.
#[inline]
pub fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out[..rows].iter_mut().zip(w.chunks_exact(cols)) {
        *o += dot4(row, x);
    }
}

/// Dot product with four independent accumulators (vectorizes; fixed order).
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ac, ar) = a.split_at(a.len() / 4 * 4);
    let (bc, br) = b.split_at(ac.len());
    for (x, y) in ac.chunks_exact(4).zip(bc.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ar.iter().zip(br) {
        s += x * y;
    }
    s
}

/// `dx += W^T dy`.
#[inline]
pub fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (g, row) in dy[..rows].iter().zip(w.chunks_exact(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (d, a) in dx[..cols].iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// `dW += dy x^T`.
#[inline]
pub fn outer_acc(dw: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.len(), rows * cols);
    for (g, row) in dy[..rows].iter().zip(dw.chunks_exact_mut(cols)) {
        if *g == 0.0 {
            continue;
        }
        for (d, a) in row.iter_mut().zip(&x[..cols]) {
            *d += g * a;
        }
    }
}

#[inline]
pub fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[inline]
pub fn tanh_in_place(x: &mut [f64]) {
    for v in x {
        *v = crate::math::tanh(*v);
    }
}
