use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{read_tensor, write_tensor, ParamKind, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction, one instance per network.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct AdamMeta {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, betas: (f64, f64)) -> Self {
        let zeros: Vec<Vec<f64>> = store
            .iter()
            .map(|p| match p.kind {
                ParamKind::Trainable => vec![0.0; p.value.numel()],
                ParamKind::Buffer => Vec::new(),
            })
            .collect();
        Self {
            lr,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Vec<f64>>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            if store.by_index(i).kind != ParamKind::Trainable {
                continue;
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = store.value_mut(i).data_mut();
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }

    pub fn save(&self, dir: &Path, prefix: &str, store: &ParamStore) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let meta = AdamMeta {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            t: self.t,
        };
        std::fs::write(dir.join(format!("{prefix}adam.json")), serde_json::to_vec_pretty(&meta)?)?;
        for (i, p) in store.iter().enumerate() {
            if p.kind == ParamKind::Trainable {
                let shape = p.value.shape().to_vec();
                write_tensor(&dir.join(format!("{prefix}{}.m.bin", p.name)), &Tensor::new(shape.clone(), self.m[i].clone()))?;
                write_tensor(&dir.join(format!("{prefix}{}.v.bin", p.name)), &Tensor::new(shape, self.v[i].clone()))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path, prefix: &str, store: &ParamStore) -> Result<Self> {
        let meta: AdamMeta = serde_json::from_slice(&std::fs::read(dir.join(format!("{prefix}adam.json")))?)?;
        let mut opt = Self::new(store, meta.lr, (meta.beta1, meta.beta2));
        opt.eps = meta.eps;
        opt.t = meta.t;
        for (i, p) in store.iter().enumerate() {
            if p.kind != ParamKind::Trainable {
                continue;
            }
            let m = read_tensor(&dir.join(format!("{prefix}{}.m.bin", p.name)))?;
            let v = read_tensor(&dir.join(format!("{prefix}{}.v.bin", p.name)))?;
            if m.numel() != p.value.numel() || v.numel() != p.value.numel() {
                return Err(Error::Shape(format!("optimizer state for {} has wrong size", p.name)));
            }
            opt.m[i] = m.into_vec();
            opt.v[i] = v.into_vec();
        }
        Ok(opt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::new(vec![2], vec![3.0, -2.0]), ParamKind::Trainable);
        let mut opt = Adam::new(&store, 0.1, (0.9, 0.999));
        for _ in 0..500 {
            let x = store.get("x").unwrap().data().to_vec();
            let g: Vec<f64> = x.iter().map(|v| 2.0 * (v - 1.0)).collect();
            opt.step(&mut store, &[Some(g)]);
        }
        for v in store.get("x").unwrap().data() {
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::new(vec![1], vec![0.0]), ParamKind::Trainable);
        let mut opt = Adam::new(&store, 0.01, (0.5, 0.999));
        opt.step(&mut store, &[Some(vec![42.0])]);
        assert!((store.get("x").unwrap().data()[0] + 0.01).abs() < 1e-9);
    }
}
