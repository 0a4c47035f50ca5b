//! Wide-format CSV run logs.
//!
//! Header: `t`, then for each agent `i`: `eta_i_1..6, nu_i_1..6, eps1_i_1..6,
//! eps2_i_1..6, tau_i_1..6, u_i_1..6, theta_i, mu_i_1..6`. Values carry 17
//! significant digits so a round trip is exact.

use std::io::{Read, Write};

use crate::sim::{RunLog, Sample};
use crate::{Error, Result, Stacked};

const GROUPS: [&str; 6] = ["eta", "nu", "eps1", "eps2", "tau", "u"];

pub fn header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        for g in GROUPS {
            h.extend((1..=6).map(|k| format!("{g}_{i}_{k}")));
        }
        h.push(format!("theta_{i}"));
        h.extend((1..=6).map(|k| format!("mu_{i}_{k}")));
    }
    h
}

fn columns_per_agent() -> usize {
    6 * GROUPS.len() + 1 + 6
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Domain(format!("csv: {e}"))
}

pub fn write_csv<W: Write>(log: &RunLog, out: W) -> Result<()> {
    let n = log.n_agents;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n)).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(1 + n * columns_per_agent());
    for s in &log.samples {
        row.clear();
        row.push(fmt(s.t));
        for i in 0..n {
            for v in [&s.eta, &s.nu, &s.eps1, &s.eps2, &s.tau, &s.u] {
                row.extend(v.rows(6 * i, 6).iter().map(|x| fmt(*x)));
            }
            row.push(fmt(s.theta[i]));
            row.extend(s.mu.rows(6 * i, 6).iter().map(|x| fmt(*x)));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Domain(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<RunLog> {
    let mut r = csv::Reader::from_reader(input);
    let head: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let per = columns_per_agent();
    if head.is_empty() || !(head.len() - 1).is_multiple_of(per) {
        return Err(Error::Domain(format!(
            "csv: unexpected column count {}",
            head.len()
        )));
    }
    let n = (head.len() - 1) / per;
    if head != header(n) {
        return Err(Error::Domain(
            "csv: header does not match the run-log schema".into(),
        ));
    }
    let mut samples = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Domain(format!("csv row {}: {e}", line + 2)))?;
        let mut groups = vec![Stacked::zeros(6 * n); GROUPS.len() + 1];
        let mut theta = Vec::with_capacity(n);
        for i in 0..n {
            let base = 1 + i * per;
            for (g, v) in groups.iter_mut().take(GROUPS.len()).enumerate() {
                v.rows_mut(6 * i, 6)
                    .copy_from_slice(&vals[base + 6 * g..base + 6 * g + 6]);
            }
            theta.push(vals[base + 36]);
            groups[6]
                .rows_mut(6 * i, 6)
                .copy_from_slice(&vals[base + 37..base + 43]);
        }
        let mut it = groups.into_iter();
        let mut next = || it.next().unwrap();
        samples.push(Sample {
            t: vals[0],
            eta: next(),
            nu: next(),
            eps1: next(),
            eps2: next(),
            tau: next(),
            u: next(),
            theta,
            mu: next(),
        });
    }
    Ok(RunLog {
        n_agents: n,
        samples,
    })
}
