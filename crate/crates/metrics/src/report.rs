//! Named-scalar evaluation reports with stable serial forms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, Result};

/// One evaluation's named metrics plus the provenance needed to reproduce
/// it. Keys are ordered, so the CSV and JSON forms are byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub seed: u64,
    pub config_digest: String,
    pub n_samples: usize,
    metrics: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn new(seed: u64, config_digest: impl Into<String>, n_samples: usize) -> Self {
        Self {
            seed,
            config_digest: config_digest.into(),
            n_samples,
            metrics: BTreeMap::new(),
        }
    }

    /// Records one named metric; non-finite values are rejected at the door
    /// so a report can always be serialized.
    pub fn insert(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        let name = name.into();
        if !value.is_finite() {
            return Err(MetricsError::NonFinite { what: format!("metric '{name}'") });
        }
        self.metrics.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn metrics(&self) -> &BTreeMap<String, f64> {
        &self.metrics
    }

    /// CSV header matching [`Self::csv_row`]: provenance columns first, then
    /// metric names in sorted order.
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["seed".to_string(), "config_digest".into(), "n_samples".into()];
        cols.extend(self.metrics.keys().cloned());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.seed.to_string(),
            self.config_digest.clone(),
            self.n_samples.to_string(),
        ];
        cols.extend(self.metrics.values().map(|v| format!("{v:.17e}")));
        cols.join(",")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| MetricsError::InvalidArgument { reason: format!("serialize: {e}") })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)
            .map_err(|e| MetricsError::InvalidArgument { reason: format!("parse: {e}") })?;
        if let Some((name, _)) = report.metrics.iter().find(|(_, v)| !v.is_finite()) {
            return Err(MetricsError::NonFinite { what: format!("metric '{name}'") });
        }
        Ok(report)
    }
}
