/// Row and column strides of a dense matrix view.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    rs: usize,
    cs: usize,
}

impl Layout {
    pub(crate) fn row_major(ld: usize) -> Self {
        Self { rs: ld, cs: 1 }
    }

    pub(crate) fn col_major(ld: usize) -> Self {
        Self { rs: 1, cs: ld }
    }

    fn extent(&self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * self.rs + (cols - 1) * self.cs + 1
        }
    }
}

/// `c = a * b + beta * c` for an `m x k` times `k x n` product.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    la: Layout,
    b: &[f64],
    lb: Layout,
    c: &mut [f64],
    lc: Layout,
    beta: f64,
) {
    assert!(a.len() >= la.extent(m, k), "gemm: lhs too short");
    assert!(b.len() >= lb.extent(k, n), "gemm: rhs too short");
    assert!(c.len() >= lc.extent(m, n), "gemm: output too short");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` cannot alias `a` or `b` because it is borrowed mutably.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            la.rs as isize,
            la.cs as isize,
            b.as_ptr(),
            lb.rs as isize,
            lb.cs as isize,
            beta,
            c.as_mut_ptr(),
            lc.rs as isize,
            lc.cs as isize,
        );
    }
}
