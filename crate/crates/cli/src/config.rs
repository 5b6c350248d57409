//! The JSON run configuration.

use ftwist_core::metrics::{catalog, MetricRef, DEFAULT_BATTERY};
use ftwist_core::{catalog_entry, ProductSpec, TwistSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Text,
}

/// A product named by catalog id or described inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProductRef {
    Id(String),
    Inline(InlineProduct),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProduct {
    pub id: String,
    pub m1: MetricRef,
    pub m2: MetricRef,
    pub twist: TwistSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_override: Option<usize>,
}

impl InlineProduct {
    fn resolve(&self) -> Result<ProductSpec, CliError> {
        Ok(ProductSpec {
            id: self.id.clone(),
            m1: self.m1.resolve()?,
            m2: self.m2.resolve()?,
            twist: self.twist.clone(),
            n_override: self.n_override,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_dt() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    100
}

fn default_third_order_samples() -> usize {
    10
}

fn default_curvature_samples() -> usize {
    3
}

fn default_seed() -> u64 {
    42
}

/// Everything a command needs. Products come from `products`, from the
/// top-level `m1`/`m2`/`twist` triple, or default to the standard battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub products: Vec<ProductRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m1: Option<MetricRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m2: Option<MetricRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist: Option<TwistSpec>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_third_order_samples")]
    pub third_order_samples: usize,
    #[serde(default = "default_curvature_samples")]
    pub curvature_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<TangentPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geodesic: Option<GeodesicConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("cannot parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        let inline = [self.m1.is_some(), self.m2.is_some(), self.twist.is_some()];
        if inline.iter().any(|b| *b) && !inline.iter().all(|b| *b) {
            return Err(CliError::Config("m1, m2 and twist must be given together".into()));
        }
        if let Some(g) = &self.geodesic {
            if !(g.dt > 0.0 && g.dt.is_finite() && g.t_end >= 0.0 && g.t_end.is_finite()) {
                return Err(CliError::Config(format!("geodesic needs dt > 0 and t_end >= 0, got dt={}, t_end={}", g.dt, g.t_end)));
            }
            if g.x0.len() != g.y0.len() {
                return Err(CliError::Config("geodesic x0 and y0 differ in length".into()));
            }
        }
        self.products()?;
        Ok(())
    }

    /// Products named by this config; the default battery when none are.
    pub fn products(&self) -> Result<Vec<ProductSpec>, CliError> {
        let mut out = Vec::new();
        for p in &self.products {
            out.push(match p {
                ProductRef::Id(id) => catalog_entry(id)?,
                ProductRef::Inline(inline) => inline.resolve()?,
            });
        }
        if let (Some(m1), Some(m2), Some(twist)) = (&self.m1, &self.m2, &self.twist) {
            out.push(ProductSpec {
                id: "config".into(),
                m1: m1.resolve()?,
                m2: m2.resolve()?,
                twist: twist.clone(),
                n_override: None,
            });
        }
        for p in &out {
            p.m1.validate()?;
            p.m2.validate()?;
        }
        if out.is_empty() {
            out = catalog().into_iter().take(DEFAULT_BATTERY).collect();
        }
        Ok(out)
    }

    /// The single product for commands working at one point.
    pub fn single_product(&self) -> Result<ProductSpec, CliError> {
        let named = self.products.len() + usize::from(self.m1.is_some());
        if named != 1 {
            return Err(CliError::Config(format!("this command needs exactly one product, the config names {named}")));
        }
        Ok(self.products()?.remove(0))
    }
}
