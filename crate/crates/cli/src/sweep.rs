//! Protocol comparison over one parameter axis.
//!
//! CSV columns, in order:
//!
//! ```text
//! protocol,<axis>,f_lb,zeta_t_ub,zeta_w_ub,delta_i,mutual_info,holevo_ub
//! ```
//!
//! `<axis>` is `distance_km`, `dimension`, `eta_det` or `mu`. Rows are grouped
//! by protocol in configuration order, then by grid value. Numbers use
//! `{:.11e}`; a protocol that certifies no noise bound reports `inf` noise,
//! `-inf` capacity and `NaN` for the information terms.

use std::io::Write;

use detdecoy::pipeline::{evaluate, Protocol, ProtocolResult};
use rayon::prelude::*;

use crate::config::{Axis, Config};
use crate::{fmt_sci, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub protocol: Protocol,
    pub axis_value: f64,
    pub result: ProtocolResult,
}

impl SweepRow {
    pub fn delta_i(&self) -> f64 {
        self.result.delta_i()
    }

    fn fields(&self) -> [f64; 7] {
        let b = &self.result.bounds;
        let (mi, chi) = self
            .result
            .capacity
            .map_or((f64::NAN, f64::NAN), |c| (c.mutual_info, c.holevo_ub));
        [
            self.axis_value,
            b.f_lb,
            b.zeta_t_ub,
            b.zeta_w_ub,
            self.delta_i(),
            mi,
            chi,
        ]
    }
}

pub fn run_sweep(config: &Config) -> Result<Vec<SweepRow>, CliError> {
    let sweep = config.sweep()?;
    let points = sweep.grid.points()?;
    let opts = config.protocol_options();
    let jobs: Vec<(Protocol, f64)> = sweep
        .protocols
        .iter()
        .flat_map(|&p| points.iter().map(move |&x| (p, x)))
        .collect();
    jobs.par_iter()
        .map(|&(protocol, x)| {
            let params = sweep.axis.apply(&config.params, x)?;
            let result = evaluate(protocol, &params, &config.noise, &opts)?;
            Ok(SweepRow {
                protocol,
                axis_value: x,
                result,
            })
        })
        .collect()
}

pub fn header(axis: Axis) -> [&'static str; 8] {
    [
        "protocol",
        axis.column(),
        "f_lb",
        "zeta_t_ub",
        "zeta_w_ub",
        "delta_i",
        "mutual_info",
        "holevo_ub",
    ]
}

pub fn write_csv<W: Write>(axis: Axis, rows: &[SweepRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(axis))?;
    for row in rows {
        let mut record = vec![row.protocol.name().to_string()];
        record.extend(row.fields().iter().map(|&x| fmt_sci(x)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep rendered as CSV text.
pub fn sweep_csv(config: &Config) -> Result<String, CliError> {
    let rows = run_sweep(config)?;
    let mut buf = Vec::new();
    write_csv(config.sweep()?.axis, &rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
