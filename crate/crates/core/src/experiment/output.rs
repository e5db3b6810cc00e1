use std::io::Write;

use super::{ResultRow, SummaryRow};
use crate::error::Result;

pub const CSV_HEADER: [&str; 13] = [
    "scenario",
    "policy",
    "N",
    "T",
    "delta",
    "seed",
    "sensor",
    "r_target",
    "r_achieved",
    "Q",
    "W",
    "gap",
    "gap_bound",
];

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// One CSV line per sensor per row, columns as in [`CSV_HEADER`].
pub fn write_rows_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for row in rows {
        for n in 0..row.num_sensors {
            wtr.write_record([
                row.scenario.clone(),
                row.policy.to_string(),
                row.num_sensors.to_string(),
                row.slots.to_string(),
                opt(row.deltas[n]),
                row.seed.to_string(),
                (n + 1).to_string(),
                row.r_target[n].to_string(),
                row.r_achieved[n].to_string(),
                row.utilities[n].to_string(),
                row.objective.to_string(),
                row.gap.get(n).copied().map(|g| g.to_string()).unwrap_or_default(),
                opt(row.gap_bound),
            ])?;
        }
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "scenario",
        "policy",
        "N",
        "T",
        "repetitions",
        "W_mean",
        "W_min",
        "W_normalized",
    ])?;
    for row in summary {
        wtr.write_record([
            row.scenario.clone(),
            row.policy.to_string(),
            row.num_sensors.to_string(),
            row.slots.to_string(),
            row.repetitions.to_string(),
            row.objective_mean.to_string(),
            row.objective_min.to_string(),
            opt(row.objective_normalized),
        ])?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
