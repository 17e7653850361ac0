//! Scalar kernels shared by the tape ops and by code that runs without a tape.

/// Strided view of a row-major matrix operand.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Strides {
    pub row: usize,
    pub col: usize,
}

impl Strides {
    pub fn row_major(cols: usize) -> Self {
        Strides { row: cols, col: 1 }
    }

    pub fn transposed(self) -> Self {
        Strides {
            row: self.col,
            col: self.row,
        }
    }
}

fn extent(rows: usize, cols: usize, s: Strides) -> usize {
    (rows - 1) * s.row + (cols - 1) * s.col + 1
}

/// `c = a · b + beta · c` for an `m×k` by `k×n` product over strided views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    sa: Strides,
    b: &[f64],
    sb: Strides,
    beta: f64,
    c: &mut [f64],
    sc: Strides,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= extent(m, n, sc), "gemm output buffer too small");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                c[i * sc.row + j * sc.col] *= beta;
            }
        }
        return;
    }
    assert!(a.len() >= extent(m, k, sa), "gemm lhs buffer too small");
    assert!(b.len() >= extent(k, n, sb), "gemm rhs buffer too small");
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.row as isize,
            sa.col as isize,
            b.as_ptr(),
            sb.row as isize,
            sb.col as isize,
            beta,
            c.as_mut_ptr(),
            sc.row as isize,
            sc.col as isize,
        );
    }
}

/// Standard softmax `e^{z_i} / Σ_j e^{z_j}`, max-shifted.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Tempered softmax `e^{z_i/T} / Σ_j e^{z_j/T}`, evaluated as
/// `exp((z_i - max)/T)` so that `T = 1` reproduces [`softmax`] exactly.
pub fn softmax_tempered(z: &[f64], temperature: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    softmax_tempered_in_place(&mut out, temperature);
    out
}

pub(crate) fn softmax_tempered_in_place(row: &mut [f64], temperature: f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `log Σ_j e^{z_j/T}` computed stably, plus the max used for shifting.
pub(crate) fn log_sum_exp_tempered(row: &[f64], temperature: f64) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|&v| ((v - max) / temperature).exp()).sum();
    max / temperature + sum.ln()
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Exact (erf-based) GELU, `x Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

pub fn gelu_derivative(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_handles_transposed_views() {
        // a = [[1,2],[3,4]], b stored as [[5,6],[7,8]] but read transposed
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(
            2,
            2,
            2,
            &a,
            Strides::row_major(2),
            &b,
            Strides::row_major(2).transposed(),
            0.0,
            &mut c,
            Strides::row_major(2),
        );
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn tempered_matches_plain_at_unit_temperature() {
        let z = [0.3, -1.7, 2.25, 0.0];
        assert_eq!(softmax(&z), softmax_tempered(&z, 1.0));
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        // Φ(1) = 0.8413447460685429
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu_derivative(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let lse = log_sum_exp_tempered(&[1000.0, 1000.0], 1.0);
        assert!((lse - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
