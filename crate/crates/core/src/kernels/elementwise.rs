use super::{Backend, DenseMatrix};
use crate::error::{Error, Result};

/// Entries per work item for index-partitioned maps.
const BLOCK: usize = 4096;

pub fn map<F>(a: &DenseMatrix, f: F, backend: &Backend) -> DenseMatrix
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let mut out = DenseMatrix::zeros(a.rows(), a.cols());
    let src = a.as_slice();
    backend.for_each_chunk(out.as_mut_slice(), BLOCK, |c, dst| {
        let base = c * BLOCK;
        for (o, x) in dst.iter_mut().zip(&src[base..]) {
            *o = f(*x);
        }
    });
    out
}

pub fn zip_with<F>(a: &DenseMatrix, b: &DenseMatrix, f: F, backend: &Backend) -> Result<DenseMatrix>
where
    F: Fn(f64, f64) -> f64 + Sync + Send,
{
    same_shape("zip_with", a, b)?;
    let mut out = DenseMatrix::zeros(a.rows(), a.cols());
    let (sa, sb) = (a.as_slice(), b.as_slice());
    backend.for_each_chunk(out.as_mut_slice(), BLOCK, |c, dst| {
        let base = c * BLOCK;
        for (k, o) in dst.iter_mut().enumerate() {
            *o = f(sa[base + k], sb[base + k]);
        }
    });
    Ok(out)
}

pub fn zip3_with<F>(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    f: F,
    backend: &Backend,
) -> Result<DenseMatrix>
where
    F: Fn(f64, f64, f64) -> f64 + Sync + Send,
{
    same_shape("zip3_with", a, b)?;
    same_shape("zip3_with", a, c)?;
    let mut out = DenseMatrix::zeros(a.rows(), a.cols());
    let (sa, sb, sc) = (a.as_slice(), b.as_slice(), c.as_slice());
    backend.for_each_chunk(out.as_mut_slice(), BLOCK, |blk, dst| {
        let base = blk * BLOCK;
        for (k, o) in dst.iter_mut().enumerate() {
            let i = base + k;
            *o = f(sa[i], sb[i], sc[i]);
        }
    });
    Ok(out)
}

/// Like [`zip_with`] but the map may fail; the first failing index (in
/// index order) wins, whatever the backend.
pub fn try_zip_with<F>(
    a: &DenseMatrix,
    b: &DenseMatrix,
    f: F,
    backend: &Backend,
) -> Result<DenseMatrix>
where
    F: Fn(usize, f64, f64) -> Result<f64> + Sync + Send,
{
    same_shape("try_zip_with", a, b)?;
    // NaN marks a failed slot, then the serial rescan reports the first one.
    let out = {
        let mut out = DenseMatrix::zeros(a.rows(), a.cols());
        let (sa, sb) = (a.as_slice(), b.as_slice());
        backend.for_each_chunk(out.as_mut_slice(), BLOCK, |blk, dst| {
            let base = blk * BLOCK;
            for (k, o) in dst.iter_mut().enumerate() {
                let i = base + k;
                *o = f(i, sa[i], sb[i]).unwrap_or(f64::NAN);
            }
        });
        out
    };
    if let Some(i) = out.as_slice().iter().position(|v| v.is_nan()) {
        f(i, a.as_slice()[i], b.as_slice()[i])?;
    }
    Ok(out)
}

fn same_shape(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}
