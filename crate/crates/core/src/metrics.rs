//! Percentage of energy deviated (PED) and its pooled average (APED).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|x_true - x_hat| / y_total`, or `None` when the aggregate is not positive
/// and the sample has to be skipped.
pub fn ped(x_true: f64, x_hat: f64, y_total: f64) -> Option<f64> {
    (y_total > 0.0).then(|| (x_true - x_hat).abs() / y_total)
}

/// One house's truth, estimates and total (summed over lines) aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseRecord {
    /// `truth[i][t]`, watts.
    pub truth: Vec<Vec<f64>>,
    pub estimates: Vec<Vec<f64>>,
    pub aggregate_total: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceScore {
    pub name: String,
    /// Fraction, not percent.
    pub aped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub appliances: Vec<ApplianceScore>,
    /// Mean of the per-appliance APED values.
    pub average: f64,
    /// Ticks per house, `T_h`.
    pub house_ticks: Vec<usize>,
    /// Ticks left out because the aggregate was zero.
    pub skipped: usize,
    /// Ticks contributing to every average.
    pub counted: usize,
}

impl MetricsReport {
    /// Aligned two-column table, APED in percent.
    pub fn to_table(&self) -> String {
        let width = self
            .appliances
            .iter()
            .map(|a| a.name.len())
            .chain(["Appliance".len(), "Average".len()])
            .max()
            .unwrap_or(9);
        let mut out = format!("{:<width$}  {:>8}\n", "Appliance", "APED%");
        out.push_str(&format!("{}  {}\n", "-".repeat(width), "-".repeat(8)));
        for a in &self.appliances {
            out.push_str(&format!("{:<width$}  {:>8.2}\n", a.name, a.aped * 100.0));
        }
        out.push_str(&format!("{}  {}\n", "-".repeat(width), "-".repeat(8)));
        out.push_str(&format!("{:<width$}  {:>8.2}\n", "Average", self.average * 100.0));
        out.push_str(&format!(
            "ticks: {} counted, {} skipped (zero aggregate)\n",
            self.counted, self.skipped
        ));
        out
    }
}

/// Pools PED over all ticks of all houses. Ticks with zero aggregate are
/// dropped from numerator and denominator.
pub fn aped(names: &[String], houses: &[HouseRecord]) -> Result<MetricsReport> {
    let l = names.len();
    let mut sums = vec![0.0; l];
    let mut counted = 0;
    let mut skipped = 0;
    let mut house_ticks = Vec::with_capacity(houses.len());
    for (h, house) in houses.iter().enumerate() {
        let horizon = house.aggregate_total.len();
        if house.truth.len() != l || house.estimates.len() != l {
            return Err(Error::Dimension {
                axis: "appliances per house",
                expected: l,
                found: if house.truth.len() != l { house.truth.len() } else { house.estimates.len() },
            });
        }
        for rows in [&house.truth, &house.estimates] {
            if let Some(bad) = rows.iter().find(|r| r.len() != horizon) {
                return Err(Error::InvalidInput(format!(
                    "house {h}: series of length {} against {horizon} aggregate ticks",
                    bad.len()
                )));
            }
        }
        house_ticks.push(horizon);
        for t in 0..horizon {
            let y = house.aggregate_total[t];
            if ped(0.0, 0.0, y).is_none() {
                skipped += 1;
                continue;
            }
            counted += 1;
            for i in 0..l {
                sums[i] += ped(house.truth[i][t], house.estimates[i][t], y).unwrap();
            }
        }
    }
    let appliances: Vec<ApplianceScore> = names
        .iter()
        .zip(&sums)
        .map(|(n, &s)| ApplianceScore {
            name: n.clone(),
            aped: if counted > 0 { s / counted as f64 } else { 0.0 },
        })
        .collect();
    let average = if l > 0 {
        appliances.iter().map(|a| a.aped).sum::<f64>() / l as f64
    } else {
        0.0
    };
    Ok(MetricsReport {
        appliances,
        average,
        house_ticks,
        skipped,
        counted,
    })
}
