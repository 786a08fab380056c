//! Dense row-major kernels shared by the forward and backward passes.

use super::Scalar;

/// `a[m×k] · b[k×n]`.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`.
pub fn matmul_at_b_acc<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, out: &mut [T]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// `a[m×n] · b[k×n]ᵀ`, giving `m×k`.
pub fn matmul_a_bt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            out[i * k + p] = dot(arow, brow);
        }
    }
    out
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn add_bias<T: Scalar>(x: &mut [T], bias: &[T]) {
    for row in x.chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v = *v + b;
        }
    }
}

/// Adds every row of `x` into `out`.
pub fn sum_rows_acc<T: Scalar>(x: &[T], out: &mut [T]) {
    for row in x.chunks_exact(out.len()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o = *o + v;
        }
    }
}

pub fn add_assign<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

pub const LN_EPS: f64 = 1e-5;

/// Per-row layer normalization. Returns `(output, normalized, 1/std)`.
pub fn layer_norm<T: Scalar>(x: &[T], gain: &[T], bias: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let d = gain.len();
    let rows = x.len() / d;
    let inv_d = T::c(1.0 / d as f64);
    let eps = T::c(LN_EPS);
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = vec![T::zero(); rows];
    for r in 0..rows {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().copied().fold(T::zero(), |a, v| a + v) * inv_d;
        let var = row
            .iter()
            .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
            * inv_d;
        let rs = T::one() / (var + eps).sqrt();
        rstd[r] = rs;
        for c in 0..d {
            let h = (row[c] - mean) * rs;
            xhat[r * d + c] = h;
            out[r * d + c] = h * gain[c] + bias[c];
        }
    }
    (out, xhat, rstd)
}

/// Backward of [`layer_norm`]: accumulates gain/bias gradients and returns
/// the input gradient.
pub fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    xhat: &[T],
    rstd: &[T],
    gain: &[T],
    dgain: &mut [T],
    dbias: &mut [T],
) -> Vec<T> {
    let d = gain.len();
    let inv_d = T::c(1.0 / d as f64);
    let mut dx = vec![T::zero(); dy.len()];
    for (r, &rs) in rstd.iter().enumerate() {
        let dyr = &dy[r * d..(r + 1) * d];
        let xh = &xhat[r * d..(r + 1) * d];
        let mut mean_dxhat = T::zero();
        let mut mean_dxhat_xhat = T::zero();
        for c in 0..d {
            dgain[c] = dgain[c] + dyr[c] * xh[c];
            dbias[c] = dbias[c] + dyr[c];
            let g = dyr[c] * gain[c];
            mean_dxhat = mean_dxhat + g;
            mean_dxhat_xhat = mean_dxhat_xhat + g * xh[c];
        }
        mean_dxhat = mean_dxhat * inv_d;
        mean_dxhat_xhat = mean_dxhat_xhat * inv_d;
        for c in 0..d {
            let g = dyr[c] * gain[c];
            dx[r * d + c] = rs * (g - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    dx
}

const GELU_K: f64 = 0.044_715;

fn gelu_s<T: Scalar>() -> T {
    T::c((2.0 / std::f64::consts::PI).sqrt())
}

/// Tanh approximation of GELU.
pub fn gelu<T: Scalar>(u: T) -> T {
    let half = T::c(0.5);
    let inner = gelu_s::<T>() * (u + T::c(GELU_K) * u * u * u);
    half * u * (T::one() + inner.tanh())
}

pub fn gelu_grad<T: Scalar>(u: T) -> T {
    let half = T::c(0.5);
    let s = gelu_s::<T>();
    let t = (s * (u + T::c(GELU_K) * u * u * u)).tanh();
    half * (T::one() + t) + half * u * (T::one() - t * t) * s * (T::one() + T::c(3.0 * GELU_K) * u * u)
}
