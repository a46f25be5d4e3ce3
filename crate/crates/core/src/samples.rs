//! Container for posterior draws shared by the samplers, diagnostics and forecasts.

use serde::{Deserialize, Serialize};

use crate::thermal::{ParamName, ThermalParams};

/// Per-draw sampler diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DrawStats {
    pub tree_depth: u32,
    pub divergent: bool,
    pub accept_stat: f64,
    pub step_size: f64,
    pub n_leapfrog: u32,
}

/// Draws in constrained space, indexed `[chain][draw][coordinate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub names: Vec<String>,
    pub draws: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub stats: Vec<Vec<DrawStats>>,
}

impl PosteriorSamples {
    pub fn new(names: Vec<String>, draws: Vec<Vec<Vec<f64>>>) -> Self {
        PosteriorSamples {
            names,
            draws,
            stats: Vec::new(),
        }
    }

    /// One chain holding one draw.
    pub fn single_draw(names: &[&str], values: &[f64]) -> Self {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![vec![values.to_vec()]],
        )
    }

    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_draws(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn total_draws(&self) -> usize {
        self.draws.iter().map(Vec::len).sum()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// All draws of one coordinate, chain by chain.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index_of(name)?;
        Some(self.draws.iter().flatten().map(|d| d[i]).collect())
    }

    /// Per-chain draws of one coordinate.
    pub fn chain_columns(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        let i = self.index_of(name)?;
        Some(
            self.draws
                .iter()
                .map(|chain| chain.iter().map(|d| d[i]).collect())
                .collect(),
        )
    }

    /// The `k`-th draw counting across chains in chain order.
    pub fn flat_draw(&self, mut k: usize) -> &[f64] {
        for chain in &self.draws {
            if k < chain.len() {
                return &chain[k];
            }
            k -= chain.len();
        }
        panic!("draw index out of range");
    }

    pub fn iter_draws(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.draws.iter().flatten()
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        let col = self.column(name)?;
        Some(col.iter().sum::<f64>() / col.len() as f64)
    }

    /// Thermal parameters of one draw; coordinates that are not thermal
    /// parameters (hyper-means, latent states) are ignored.
    pub fn thermal_params(&self, draw: &[f64]) -> ThermalParams {
        let mut p = ThermalParams::new();
        for (name, v) in self.names.iter().zip(draw) {
            if let Ok(pn) = name.parse::<ParamName>() {
                p.set(pn, *v);
            }
        }
        p
    }

    pub fn divergence_count(&self) -> usize {
        self.stats.iter().flatten().filter(|s| s.divergent).count()
    }
}
