use super::{Backend, DenseMatrix};

/// Below this length the halving recursion stays on the calling thread.
const PAR_SPLIT_MIN: usize = 1 << 14;

/// Sum by recursive halving: `sum(v) = sum(v[..n/2]) + sum(v[n/2..])`.
///
/// The association tree depends only on `v.len()`, never on the backend, so
/// every thread count yields the same bits.
pub fn tree_reduce_sum(v: &[f64], backend: &Backend) -> f64 {
    if backend.is_parallel() && v.len() > PAR_SPLIT_MIN {
        backend.install(|| par_halving_sum(v))
    } else {
        halving_sum(v)
    }
}

/// Row sums of `m`, each with the same halving tree as [`tree_reduce_sum`].
pub fn tree_sum_rows(m: &DenseMatrix, backend: &Backend) -> Vec<f64> {
    let mut out = vec![0.0; m.rows()];
    backend.for_each_chunk(&mut out, 1, |i, slot| {
        slot[0] = halving_sum(m.row(i));
    });
    out
}

pub(crate) fn halving_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let (l, r) = v.split_at(n / 2);
            halving_sum(l) + halving_sum(r)
        }
    }
}

fn par_halving_sum(v: &[f64]) -> f64 {
    if v.len() <= PAR_SPLIT_MIN {
        return halving_sum(v);
    }
    let (l, r) = v.split_at(v.len() / 2);
    let (a, b) = rayon::join(|| par_halving_sum(l), || par_halving_sum(r));
    a + b
}
