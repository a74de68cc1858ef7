//! im2col-based 2-D convolution kernels shared by strided and transposed
//! convolutions. 1-D convolutions are expressed as 2-D ones with unit height.
//!
//! Both layer kinds are described by a [`ConvGeom`] relating a "large" spatial
//! side to a "small" one: a strided convolution maps large -> small, a
//! transposed convolution maps small -> large. The weight is always viewed as a
//! `(c_small, c_large * kh * kw)` matrix.

/// Geometry of a convolution between a large and a small feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_large: usize,
    pub h_large: usize,
    pub w_large: usize,
    pub c_small: usize,
    pub h_small: usize,
    pub w_small: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub ph: usize,
    pub pw: usize,
}

impl ConvGeom {
    /// Geometry of a strided convolution applied to a `(c_in, h, w)` input.
    /// Returns `None` when the kernel does not fit.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
    ) -> Option<Self> {
        if h + 2 * ph < kh || w + 2 * pw < kw || sh == 0 || sw == 0 {
            return None;
        }
        Some(Self {
            c_large: c_in,
            h_large: h,
            w_large: w,
            c_small: c_out,
            h_small: (h + 2 * ph - kh) / sh + 1,
            w_small: (w + 2 * pw - kw) / sw + 1,
            kh,
            kw,
            sh,
            sw,
            ph,
            pw,
        })
    }

    /// Geometry of a transposed convolution applied to a `(c_in, h, w)` input.
    #[allow(clippy::too_many_arguments)]
    pub fn transposed(
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        (kh, kw): (usize, usize),
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
    ) -> Option<Self> {
        let hl = (h - 1) * sh + kh;
        let wl = (w - 1) * sw + kw;
        if hl < 2 * ph + 1 || wl < 2 * pw + 1 {
            return None;
        }
        Some(Self {
            c_large: c_out,
            h_large: hl - 2 * ph,
            w_large: wl - 2 * pw,
            c_small: c_in,
            h_small: h,
            w_small: w,
            kh,
            kw,
            sh,
            sw,
            ph,
            pw,
        })
    }

    pub fn k(&self) -> usize {
        self.c_large * self.kh * self.kw
    }

    pub fn p_small(&self) -> usize {
        self.h_small * self.w_small
    }

    pub fn p_large(&self) -> usize {
        self.h_large * self.w_large
    }

    pub fn large_len(&self) -> usize {
        self.c_large * self.p_large()
    }

    pub fn small_len(&self) -> usize {
        self.c_small * self.p_small()
    }

    /// Samples processed per gemm call, bounding the column buffer to ~32 MB.
    fn chunk(&self, n: usize) -> usize {
        let per = (self.k() * self.p_small()).max(1);
        ((1 << 22) / per).clamp(1, n.max(1))
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the buffers are at least as long as the strided views require,
    // which the debug assertion above checks.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[f64], at: bool, b: &[f64], bt: bool, c: &mut [f64], beta: f64) {
    gemm(m, k, n, a, at, b, bt, c, beta)
}

fn im2col(g: &ConvGeom, large: &[f64], n0: usize, nc: usize, cols: &mut [f64]) {
    let ps = g.p_small();
    let row_len = nc * ps;
    let big = g.large_len();
    for ci in 0..g.c_large {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let dst = &mut cols[row * row_len..(row + 1) * row_len];
                for j in 0..nc {
                    let src = &large[(n0 + j) * big + ci * g.p_large()..][..g.p_large()];
                    let d = &mut dst[j * ps..(j + 1) * ps];
                    for oy in 0..g.h_small {
                        let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                        let drow = &mut d[oy * g.w_small..(oy + 1) * g.w_small];
                        if iy < 0 || iy >= g.h_large as isize {
                            drow.fill(0.0);
                            continue;
                        }
                        let srow = &src[iy as usize * g.w_large..][..g.w_large];
                        for (ox, v) in drow.iter_mut().enumerate() {
                            let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                            *v = if ix < 0 || ix >= g.w_large as isize { 0.0 } else { srow[ix as usize] };
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add(g: &ConvGeom, cols: &[f64], n0: usize, nc: usize, large: &mut [f64]) {
    let ps = g.p_small();
    let row_len = nc * ps;
    let big = g.large_len();
    for ci in 0..g.c_large {
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let srcrow = &cols[row * row_len..(row + 1) * row_len];
                for j in 0..nc {
                    let dst = &mut large[(n0 + j) * big + ci * g.p_large()..][..g.p_large()];
                    let s = &srcrow[j * ps..(j + 1) * ps];
                    for oy in 0..g.h_small {
                        let iy = (oy * g.sh + ky) as isize - g.ph as isize;
                        if iy < 0 || iy >= g.h_large as isize {
                            continue;
                        }
                        let drow = &mut dst[iy as usize * g.w_large..][..g.w_large];
                        for ox in 0..g.w_small {
                            let ix = (ox * g.sw + kx) as isize - g.pw as isize;
                            if ix >= 0 && ix < g.w_large as isize {
                                drow[ix as usize] += s[oy * g.w_small + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// NCHW small map chunk -> `(c_small, nc * p_small)` matrix.
fn gather_small(g: &ConvGeom, small: &[f64], n0: usize, nc: usize, mat: &mut [f64]) {
    let ps = g.p_small();
    let per = g.small_len();
    for c in 0..g.c_small {
        for j in 0..nc {
            let src = &small[(n0 + j) * per + c * ps..][..ps];
            mat[c * nc * ps + j * ps..][..ps].copy_from_slice(src);
        }
    }
}

fn scatter_small(g: &ConvGeom, mat: &[f64], n0: usize, nc: usize, small: &mut [f64], add: bool) {
    let ps = g.p_small();
    let per = g.small_len();
    for c in 0..g.c_small {
        for j in 0..nc {
            let dst = &mut small[(n0 + j) * per + c * ps..][..ps];
            let src = &mat[c * nc * ps + j * ps..][..ps];
            if add {
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            } else {
                dst.copy_from_slice(src);
            }
        }
    }
}

fn add_channel_bias(out: &mut [f64], bias: &[f64], per_channel: usize) {
    let c = bias.len();
    for (i, chunk) in out.chunks_mut(per_channel).enumerate() {
        let b = bias[i % c];
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn channel_sums(grad: &[f64], c: usize, per_channel: usize, out: &mut [f64]) {
    for (i, chunk) in grad.chunks(per_channel).enumerate() {
        out[i % c] += chunk.iter().sum::<f64>();
    }
}

/// Strided convolution forward: `large` is `(n, c_large, h_large, w_large)`.
pub fn conv_forward(g: &ConvGeom, n: usize, large: &[f64], weight: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; n * g.small_len()];
    let k = g.k();
    let ps = g.p_small();
    let chunk = g.chunk(n);
    let mut cols = vec![0.0; k * chunk * ps];
    let mut mat = vec![0.0; g.c_small * chunk * ps];
    let mut n0 = 0;
    while n0 < n {
        let nc = chunk.min(n - n0);
        im2col(g, large, n0, nc, &mut cols[..k * nc * ps]);
        gemm(g.c_small, k, nc * ps, weight, false, &cols[..k * nc * ps], false, &mut mat[..g.c_small * nc * ps], 0.0);
        scatter_small(g, &mat[..g.c_small * nc * ps], n0, nc, &mut out, false);
        n0 += nc;
    }
    if let Some(b) = bias {
        add_channel_bias(&mut out, b, ps);
    }
    out
}

/// Gradients of a strided convolution. Returns (d_large, d_weight, d_bias)
/// for the requested outputs.
pub fn conv_backward(
    g: &ConvGeom,
    n: usize,
    large: &[f64],
    weight: &[f64],
    d_small: &[f64],
    want_input: bool,
    want_weight: bool,
    want_bias: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let k = g.k();
    let ps = g.p_small();
    let chunk = g.chunk(n);
    let mut d_large = want_input.then(|| vec![0.0; n * g.large_len()]);
    let mut d_weight = want_weight.then(|| vec![0.0; g.c_small * k]);
    let mut cols = vec![0.0; k * chunk * ps];
    let mut mat = vec![0.0; g.c_small * chunk * ps];
    let mut n0 = 0;
    while n0 < n {
        let nc = chunk.min(n - n0);
        let m = &mut mat[..g.c_small * nc * ps];
        gather_small(g, d_small, n0, nc, m);
        if let Some(dw) = d_weight.as_mut() {
            im2col(g, large, n0, nc, &mut cols[..k * nc * ps]);
            gemm(g.c_small, nc * ps, k, m, false, &cols[..k * nc * ps], true, dw, 1.0);
        }
        if let Some(dl) = d_large.as_mut() {
            let c = &mut cols[..k * nc * ps];
            gemm(k, g.c_small, nc * ps, weight, true, m, false, c, 0.0);
            col2im_add(g, c, n0, nc, dl);
        }
        n0 += nc;
    }
    let d_bias = want_bias.then(|| {
        let mut db = vec![0.0; g.c_small];
        channel_sums(d_small, g.c_small, ps, &mut db);
        db
    });
    (d_large, d_weight, d_bias)
}

/// Transposed convolution forward: `small` is `(n, c_small, h_small, w_small)`
/// and the result has the large shape.
pub fn conv_transpose_forward(g: &ConvGeom, n: usize, small: &[f64], weight: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
    let mut out = vec![0.0; n * g.large_len()];
    let k = g.k();
    let ps = g.p_small();
    let chunk = g.chunk(n);
    let mut cols = vec![0.0; k * chunk * ps];
    let mut mat = vec![0.0; g.c_small * chunk * ps];
    let mut n0 = 0;
    while n0 < n {
        let nc = chunk.min(n - n0);
        let m = &mut mat[..g.c_small * nc * ps];
        gather_small(g, small, n0, nc, m);
        let c = &mut cols[..k * nc * ps];
        gemm(k, g.c_small, nc * ps, weight, true, m, false, c, 0.0);
        col2im_add(g, c, n0, nc, &mut out);
        n0 += nc;
    }
    if let Some(b) = bias {
        add_channel_bias(&mut out, b, g.p_large());
    }
    out
}

/// Gradients of a transposed convolution. Returns (d_small, d_weight, d_bias).
pub fn conv_transpose_backward(
    g: &ConvGeom,
    n: usize,
    small: &[f64],
    weight: &[f64],
    d_large: &[f64],
    want_input: bool,
    want_weight: bool,
    want_bias: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let k = g.k();
    let ps = g.p_small();
    let chunk = g.chunk(n);
    let mut d_small = want_input.then(|| vec![0.0; n * g.small_len()]);
    let mut d_weight = want_weight.then(|| vec![0.0; g.c_small * k]);
    let mut cols = vec![0.0; k * chunk * ps];
    let mut mat = vec![0.0; g.c_small * chunk * ps];
    let mut n0 = 0;
    while n0 < n {
        let nc = chunk.min(n - n0);
        let c = &mut cols[..k * nc * ps];
        im2col(g, d_large, n0, nc, c);
        let m = &mut mat[..g.c_small * nc * ps];
        if let Some(dw) = d_weight.as_mut() {
            gather_small(g, small, n0, nc, m);
            gemm(g.c_small, nc * ps, k, m, false, c, true, dw, 1.0);
        }
        if let Some(ds) = d_small.as_mut() {
            gemm(g.c_small, k, nc * ps, weight, false, c, false, m, 0.0);
            scatter_small(g, m, n0, nc, ds, true);
        }
        n0 += nc;
    }
    let d_bias = want_bias.then(|| {
        let mut db = vec![0.0; g.c_large];
        channel_sums(d_large, g.c_large, g.p_large(), &mut db);
        db
    });
    (d_small, d_weight, d_bias)
}
