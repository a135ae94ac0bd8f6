//! Small dense helpers: determinants and Vandermonde products.

/// Determinant of the row-major `n x n` matrix `a` by Gaussian elimination
/// with partial pivoting. `a` is overwritten.
pub fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for row in col + 1..n {
            let f = a[row * n + col] / d;
            if f != 0.0 {
                for k in col + 1..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
            }
        }
    }
    det
}

pub fn det(a: &[f64], n: usize) -> f64 {
    det_in_place(&mut a.to_vec(), n)
}

/// `prod_{i<j} (x_i - x_j)`; positive for strictly decreasing input.
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut v = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            v *= x[i] - x[j];
        }
    }
    v
}

/// Smallest adjacent gap `min |x_i - x_j|` over `i != j`.
pub fn min_gap(x: &[f64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            g = g.min((x[i] - x[j]).abs());
        }
    }
    g
}
