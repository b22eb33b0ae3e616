//! Tabular output of experiment tables.
//!
//! The CSV columns are
//! `experiment,regime,param,method,value,ci_half_width,trials,seed`, where
//! `trials` is the effective trial count and `seed` the user seed. Floats are
//! written in shortest round-trip form and infinities as `inf`, so identical
//! tables give identical bytes.

use serde::Serialize;

use crate::simulate::ExperimentTable;

pub const CSV_HEADER: [&str; 8] = [
    "experiment",
    "regime",
    "param",
    "method",
    "value",
    "ci_half_width",
    "trials",
    "seed",
];

/// Formats a float for output: `inf` for `+inf`, otherwise the shortest
/// representation that parses back to the same value.
pub fn format_float(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:?}")
    }
}

pub fn write_csv<W: std::io::Write>(table: &ExperimentTable, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &table.rows {
        w.write_record([
            table.experiment.clone(),
            row.regime.clone(),
            row.param.to_string(),
            row.method.clone(),
            format_float(row.value()),
            format_float(row.ci_half_width()),
            row.trials().to_string(),
            table.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(table: &ExperimentTable) -> String {
    let mut buf = Vec::new();
    write_csv(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

#[derive(Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    regime: &'a str,
    param: usize,
    method: &'a str,
    value: f64,
    ci_half_width: f64,
    trials: usize,
    attempted_trials: usize,
    seed: u64,
}

/// JSON array mirroring the CSV rows, with the attempted trial count added.
pub fn to_json(table: &ExperimentTable) -> serde_json::Result<String> {
    let rows: Vec<JsonRow> = table
        .rows
        .iter()
        .map(|r| JsonRow {
            experiment: &table.experiment,
            regime: &r.regime,
            param: r.param,
            method: &r.method,
            value: r.value(),
            ci_half_width: r.ci_half_width(),
            trials: r.trials(),
            attempted_trials: r.attempted_trials(),
            seed: table.seed,
        })
        .collect();
    serde_json::to_string_pretty(&rows)
}
