use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_mlp, Activation, BatchTargets, Dataset, Loss, MlpConfig, Network};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseConfig {
    pub latent_dim: usize,
    /// Latent draws per sample and step; the draw whose output lands closest
    /// to the sample is the one trained on. With 1 draw the loss is the plain
    /// expected reconstruction error and `g` collapses to `E[x | y]`.
    pub latent_draws: usize,
    pub mlp: MlpConfig,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig {
            latent_dim: 8,
            latent_draws: 8,
            mlp: MlpConfig {
                hidden_layers: vec![64, 64],
                activation: Activation::LeakyRelu(0.1),
                epochs: 100,
                standardize_targets: false,
                ..MlpConfig::default()
            },
        }
    }
}

/// `g(y, z) → x`, with `z` uniform on `[−1, 1]^latent_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseModel {
    network: Network,
    latent_dim: usize,
    y_mean: f64,
    y_scale: f64,
}

/// Fits `g` by minimizing `E_z ‖g(y_i, z) − x_i‖²`, drawing a fresh `z` for
/// every sample at every step.
pub fn train_inverse(ds: &Dataset, cfg: &InverseConfig) -> Result<InverseModel> {
    if cfg.latent_dim == 0 {
        return Err(Error::invalid("latent_dim must be >= 1"));
    }
    if cfg.latent_draws == 0 {
        return Err(Error::invalid("latent_draws must be >= 1"));
    }
    cfg.mlp.validate()?;
    let y = ds.regression_targets()?;
    if y.ncols() != 1 {
        return Err(Error::dims("inverse model targets", 1, y.ncols()));
    }
    let y = y.column(0);
    let y_mean = y.mean().expect("datasets are nonempty");
    let sd = y.std(0.0);
    let y_scale = if sd > 1e-12 { sd } else { 1.0 };
    let mut sizes = vec![1 + cfg.latent_dim];
    sizes.extend(&cfg.mlp.hidden_layers);
    sizes.push(ds.dim());
    let mut network = Network::new(&sizes, cfg.mlp.activation, &mut stream(cfg.mlp.seed, 0))?;
    let x = ds.inputs();
    let (width, draws) = (1 + cfg.latent_dim, cfg.latent_draws);
    fit_mlp(&mut network, &cfg.mlp, ds.len(), Loss::Mse, &mut stream(cfg.mlp.seed, 1), |net, idx, rng| {
        let mut candidates = Array2::zeros((idx.len() * draws, width));
        for (j, mut row) in candidates.rows_mut().into_iter().enumerate() {
            row[0] = (y[idx[j / draws]] - y_mean) / y_scale;
            for v in row.iter_mut().skip(1) {
                *v = rng.gen_range(-1.0..=1.0);
            }
        }
        let targets = x.select(Axis(0), idx);
        if draws == 1 {
            return (candidates, BatchTargets::Values(targets));
        }
        let out = net.forward(candidates.view());
        let picks: Vec<usize> = (0..idx.len())
            .map(|i| {
                let err = |j: usize| (&out.row(i * draws + j) - &targets.row(i)).mapv(|d| d * d).sum();
                (0..draws).min_by(|&a, &b| err(a).total_cmp(&err(b))).expect("draws >= 1") + i * draws
            })
            .collect();
        (candidates.select(Axis(0), &picks), BatchTargets::Values(targets))
    })?;
    Ok(InverseModel {
        network,
        latent_dim: cfg.latent_dim,
        y_mean,
        y_scale,
    })
}

impl InverseModel {
    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn output_dim(&self) -> usize {
        self.network.output_dim()
    }

    pub(crate) fn network(&self) -> &Network {
        &self.network
    }

    /// Network inputs `[standardized y ‖ z]` for each row of `zs`.
    pub(crate) fn inputs(&self, y: f64, zs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if zs.ncols() != self.latent_dim {
            return Err(Error::dims("latent vector", self.latent_dim, zs.ncols()));
        }
        for (i, z) in zs.rows().into_iter().enumerate() {
            if let Some((coordinate, &value)) = z.iter().enumerate().find(|(_, v)| !(-1.0..=1.0).contains(*v)) {
                log::debug!("latent row {i} leaves the prior box");
                return Err(Error::OutOfDomain {
                    coordinate,
                    value,
                    lo: -1.0,
                    hi: 1.0,
                });
            }
        }
        let mut input = Array2::zeros((zs.nrows(), 1 + self.latent_dim));
        input.column_mut(0).fill((y - self.y_mean) / self.y_scale);
        input.slice_mut(s![.., 1..]).assign(&zs);
        Ok(input)
    }

    /// Synthesizes one input per latent row.
    pub fn generate_batch(&self, y: f64, zs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.network.forward(self.inputs(y, zs)?.view()))
    }

    pub fn generate(&self, y: f64, z: &[f64]) -> Result<Vec<f64>> {
        let zs = ArrayView2::from_shape((1, z.len()), z).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(self.generate_batch(y, zs)?.row(0).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single_pair() -> Dataset {
        Dataset::regression_1d(array![[0.3, -0.2, 0.7]], vec![1.5]).unwrap()
    }

    fn cfg() -> InverseConfig {
        InverseConfig {
            latent_dim: 2,
            latent_draws: 4,
            mlp: MlpConfig {
                hidden_layers: vec![16, 16],
                activation: Activation::LeakyRelu(0.1),
                epochs: 3000,
                standardize_targets: false,
                ..MlpConfig::default()
            },
        }
    }

    #[test]
    fn single_pair_is_reproduced_for_any_latent() {
        let g = train_inverse(&single_pair(), &cfg()).unwrap();
        for z in [[-1.0, -1.0], [0.0, 0.5], [1.0, -0.3]] {
            let x = g.generate(1.5, &z).unwrap();
            let mse = x.iter().zip([0.3, -0.2, 0.7]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 3.0;
            assert!(mse <= 1e-3, "mse {mse} at {z:?}");
        }
    }

    #[test]
    fn latent_outside_box_is_rejected() {
        let g = train_inverse(&single_pair(), &cfg()).unwrap();
        assert!(matches!(g.generate(1.5, &[0.0, 1.2]), Err(Error::OutOfDomain { coordinate: 1, .. })));
        assert!(g.generate(1.5, &[0.0]).is_err());
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let a = train_inverse(&single_pair(), &cfg()).unwrap();
        let b = train_inverse(&single_pair(), &cfg()).unwrap();
        assert_eq!(a, b);
    }
}
