use crate::{DenseTensor, Error, Result, Shape};

/// Start offsets of `bins` contiguous bins covering `len` cells; the first
/// `len % bins` bins are one cell longer.
fn bin_edges(len: usize, bins: usize) -> Vec<usize> {
    let base = len / bins;
    let extra = len % bins;
    let mut edges = Vec::with_capacity(bins + 1);
    let mut at = 0;
    edges.push(0);
    for b in 0..bins {
        at += base + usize::from(b < extra);
        edges.push(at);
    }
    edges
}

/// Max-pools the two leading (spatial) modes to `out_h x out_w` bins.
/// Remaining modes (channels, samples) are pooled independently.
pub fn spatial_pool(x: &DenseTensor, out_h: usize, out_w: usize) -> Result<DenseTensor> {
    if x.order() < 3 {
        return Err(Error::InvalidShape(format!(
            "spatial pooling needs h x w x C input, got {}",
            x.shape()
        )));
    }
    let (h, w) = (x.dims()[0], x.dims()[1]);
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::DimensionMismatch(format!(
            "cannot pool {h}x{w} to {out_h}x{out_w}"
        )));
    }
    let rows = bin_edges(h, out_h);
    let cols = bin_edges(w, out_w);
    let rest: usize = x.dims()[2..].iter().product();
    let mut dims = x.dims().to_vec();
    dims[0] = out_h;
    dims[1] = out_w;
    let mut out = Vec::with_capacity(out_h * out_w * rest);
    let data = x.data();
    for c in 0..rest {
        let plane = &data[c * h * w..(c + 1) * h * w];
        for bj in 0..out_w {
            for bi in 0..out_h {
                let mut m = f64::NEG_INFINITY;
                for j in cols[bj]..cols[bj + 1] {
                    for i in rows[bi]..rows[bi + 1] {
                        m = m.max(plane[i + h * j]);
                    }
                }
                out.push(m);
            }
        }
    }
    // Output is mode-0-fastest: (bi, bj, c) -> bi + out_h * (bj + out_w * c).
    DenseTensor::new(Shape::new(dims)?, out)
}
