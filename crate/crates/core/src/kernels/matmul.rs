use std::borrow::Cow;

use super::{Backend, DenseMatrix};
use crate::error::{Error, Result};

/// Inner products are split in halves until a piece has at most this many
/// terms; a piece is then accumulated left to right starting from zero.
pub const INNER_LEAF: usize = 16;

/// `C = op(A) * op(B)` where `op` optionally transposes by index mapping.
///
/// Every entry of `C` is an inner product over `k` evaluated with one fixed
/// association tree (see [`INNER_LEAF`]). Rows of `C` are the unit of work,
/// so the result is independent of the backend's thread count.
pub fn matmul(
    a: &DenseMatrix,
    b: &DenseMatrix,
    transpose_a: bool,
    transpose_b: bool,
    backend: &Backend,
) -> Result<DenseMatrix> {
    let (m, ka) = if transpose_a {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    let (kb, n) = if transpose_b {
        (b.cols(), b.rows())
    } else {
        (b.rows(), b.cols())
    };
    if ka != kb {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: (m, ka),
            right: (kb, n),
        });
    }
    let k = ka;
    let mut c = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(c);
    }

    let op_a_row = |i: usize| -> Cow<'_, [f64]> {
        if transpose_a {
            Cow::Owned((0..k).map(|kk| a.get(kk, i)).collect())
        } else {
            Cow::Borrowed(a.row(i))
        }
    };

    if transpose_b {
        // op(B) column j is row j of B: both operands are contiguous.
        backend.for_each_chunk(c.as_mut_slice(), n, |i, out| {
            let arow = op_a_row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = tree_dot(&arow, b.row(j));
            }
        });
    } else {
        let depth = tree_depth(k);
        backend.for_each_chunk(c.as_mut_slice(), n, |i, out| {
            let arow = op_a_row(i);
            let mut scratch = vec![vec![0.0; n]; depth];
            accumulate_rows(&arow, b, 0, k, out, &mut scratch);
        });
    }
    Ok(c)
}

/// `A x` for a plain vector `x`; same association tree as [`matmul`].
pub fn matvec(a: &DenseMatrix, x: &[f64], backend: &Backend) -> Result<Vec<f64>> {
    if a.cols() != x.len() {
        return Err(Error::DimensionMismatch {
            op: "matvec",
            left: a.shape(),
            right: (x.len(), 1),
        });
    }
    let mut out = vec![0.0; a.rows()];
    backend.for_each_chunk(&mut out, 64, |chunk, slots| {
        let base = chunk * 64;
        for (r, s) in slots.iter_mut().enumerate() {
            *s = tree_dot(a.row(base + r), x);
        }
    });
    Ok(out)
}

/// Inner product of two equal-length slices with the kernel's fixed tree.
pub fn tree_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n <= INNER_LEAF {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            acc += x * y;
        }
        return acc;
    }
    let mid = n / 2;
    tree_dot(&a[..mid], &b[..mid]) + tree_dot(&a[mid..], &b[mid..])
}

fn tree_depth(k: usize) -> usize {
    let mut depth = 0;
    let mut len = k;
    while len > INNER_LEAF {
        // the right half is the longer one
        len -= len / 2;
        depth += 1;
    }
    depth
}

/// Row-accumulating form of [`tree_dot`] for every column of `B` at once:
/// `out[j] = sum_{kk in lo..hi} arow[kk] * B[kk, j]` with the identical tree.
fn accumulate_rows(
    arow: &[f64],
    b: &DenseMatrix,
    lo: usize,
    hi: usize,
    out: &mut [f64],
    scratch: &mut [Vec<f64>],
) {
    if hi - lo <= INNER_LEAF {
        out.fill(0.0);
        for (kk, &av) in arow[lo..hi].iter().enumerate() {
            for (o, bv) in out.iter_mut().zip(b.row(lo + kk)) {
                *o += av * bv;
            }
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    accumulate_rows(arow, b, lo, mid, out, scratch);
    let (tmp, rest) = scratch
        .split_first_mut()
        .expect("scratch depth covers the recursion");
    accumulate_rows(arow, b, mid, hi, tmp, rest);
    for (o, t) in out.iter_mut().zip(tmp.iter()) {
        *o += t;
    }
}
