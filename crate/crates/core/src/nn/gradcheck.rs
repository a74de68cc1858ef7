//! Central finite-difference checks of analytic parameter gradients.

use rand::Rng;

use super::params::{ParamKind, ParamStore};

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Random `(param index, element)` picks among trainable parameters whose name starts with `prefix`.
pub fn pick_params(store: &ParamStore, prefix: &str, count: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let candidates: Vec<usize> = (0..store.len())
        .filter(|&i| {
            let p = store.by_index(i);
            p.kind == ParamKind::Trainable && p.name.starts_with(prefix)
        })
        .collect();
    assert!(!candidates.is_empty(), "no trainable parameters under '{prefix}'");
    (0..count)
        .map(|_| {
            let i = candidates[rng.random_range(0..candidates.len())];
            (i, rng.random_range(0..store.by_index(i).value.numel()))
        })
        .collect()
}

/// Compares `analytic` (indexed like `store`) with central differences of `loss`.
pub fn check<M>(
    model: &mut M,
    store: fn(&mut M) -> &mut ParamStore,
    picks: &[(usize, usize)],
    analytic: &[Option<Vec<f64>>],
    eps: f64,
    loss: impl Fn(&M) -> f64,
) -> Vec<GradCheck> {
    picks
        .iter()
        .map(|&(pi, ei)| {
            let orig = store(model).by_index(pi).value.data()[ei];
            store(model).value_mut(pi).data_mut()[ei] = orig + eps;
            let up = loss(model);
            store(model).value_mut(pi).data_mut()[ei] = orig - eps;
            let down = loss(model);
            store(model).value_mut(pi).data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[pi].as_ref().map_or(0.0, |g| g[ei]);
            GradCheck {
                name: store(model).by_index(pi).name.clone(),
                index: ei,
                analytic: a,
                numeric,
                rel_error: rel_error(a, numeric),
            }
        })
        .collect()
}
