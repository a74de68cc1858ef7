//! Adversarial and lower-half reconstruction losses.

use serde::{Deserialize, Serialize};

use super::config::{GenAdvLoss, L1Reduction};
use crate::error::{Error, Result};
use crate::media::Frame;
use crate::nn::{Graph, Tensor, Var};

/// `sum |F_p - G_p|` over rows `H/2..H`, every column and channel.
pub fn l1_lower_half(real: &Frame, fake: &Frame) -> Result<f64> {
    if (real.height(), real.width()) != (fake.height(), fake.width()) {
        return Err(Error::Shape("frames differ in size".into()));
    }
    let (h, w) = (real.height(), real.width());
    let mut s = 0.0;
    for c in 0..3 {
        for y in h / 2..h {
            for x in 0..w {
                s += (real.get(c, y, x) as f64 - fake.get(c, y, x) as f64).abs();
            }
        }
    }
    Ok(s)
}

/// Mask `(n, c, h, w)` that is 1 on rows `h/2..h`, scaled by `scale`.
pub fn lower_half_mask(n: usize, c: usize, h: usize, w: usize, scale: f64) -> Tensor {
    let mut m = vec![0.0; n * c * h * w];
    for plane in m.chunks_exact_mut(h * w) {
        plane[(h / 2) * w..].iter_mut().for_each(|v| *v = scale);
    }
    Tensor::new(vec![n, c, h, w], m)
}

/// Lower-half L1 on a batch of frames `(n, 3, H, W)`, averaged over the `n` frames.
pub fn l1_loss_var(g: &mut Graph, fake: Var, real: Tensor, reduction: L1Reduction) -> Var {
    let s = g.shape(fake).to_vec();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let per = match reduction {
        L1Reduction::Sum => 1.0,
        L1Reduction::Mean => 1.0 / (c * (h - h / 2) * w) as f64,
    };
    let mask = lower_half_mask(n, c, h, w, per / n as f64);
    g.weighted_abs_diff(fake, real, mask)
}

/// Mean over rows of `softplus(sign * logit)`.
pub fn softplus_mean(g: &mut Graph, logits: Var, sign: f64) -> Var {
    let x = if sign < 0.0 { g.scale(logits, -1.0) } else { logits };
    let sp = g.softplus(x);
    g.mean(sp)
}

/// Discriminator objective on logits: `-log D(real) - log(1 - D(fake))`, batch means.
pub fn disc_loss_terms(g: &mut Graph, real_logits: Var, fake_logits: Var) -> (Var, Var) {
    (softplus_mean(g, real_logits, -1.0), softplus_mean(g, fake_logits, 1.0))
}

/// Generator adversarial term on fake logits.
pub fn gen_adv_var(g: &mut Graph, fake_logits: Var, kind: GenAdvLoss) -> Var {
    match kind {
        GenAdvLoss::NonSaturating => softplus_mean(g, fake_logits, -1.0),
        GenAdvLoss::Saturating => {
            let m = softplus_mean(g, fake_logits, 1.0);
            g.scale(m, -1.0)
        }
    }
}

/// `log D(real) + log(1 - D(fake))` from probabilities clipped to `[eps, 1 - eps]`.
pub fn eq1_pair(d_real: f64, d_fake: f64, eps: f64) -> f64 {
    let c = |p: f64| p.clamp(eps, 1.0 - eps);
    c(d_real).ln() + (1.0 - c(d_fake)).ln()
}

/// Generator adversarial value from a clipped fake probability.
pub fn gen_adv_value(d_fake: f64, eps: f64, kind: GenAdvLoss) -> f64 {
    let p = d_fake.clamp(eps, 1.0 - eps);
    match kind {
        GenAdvLoss::NonSaturating => -p.ln(),
        GenAdvLoss::Saturating => (1.0 - p).ln(),
    }
}

/// `L_adv + lambda * L_L1`.
pub fn assemble_total(l_adv_img: f64, l_adv_seq: f64, l_l1: f64, lambda: f64) -> f64 {
    l_adv_img + l_adv_seq + lambda * l_l1
}

/// Loss values of one training step. Adversarial values follow the Eq.-1 form
/// `log D(real) + log(1 - D(fake))`; absent terms are zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub l_adv_img: f64,
    pub l_adv_seq: f64,
    pub l_l1: f64,
    pub total: f64,
    pub g_adv_img: f64,
    pub g_adv_seq: f64,
    pub d_img_loss: f64,
    pub d_seq_loss: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.l_adv_img, self.l_adv_seq, self.l_l1, self.total, self.g_adv_img, self.g_adv_seq, self.d_img_loss, self.d_seq_loss]
            .iter()
            .all(|v| v.is_finite())
    }
}
