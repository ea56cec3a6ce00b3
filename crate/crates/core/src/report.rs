//! CSV and fixed-width table output for evaluation reports.

use crate::error::{Error, Result};
use crate::predict::{EvaluationReport, Summary};
use std::fmt::Write as _;
use std::io::{Read, Write};

const CSV_HEADER: [&str; 18] = [
    "label",
    "mse_new",
    "mse_new_sd",
    "mse_dantzig_alpha",
    "mse_dantzig_alpha_sd",
    "mse_classic",
    "mse_classic_sd",
    "pe_full",
    "pe_full_sd",
    "pe_sub_new",
    "pe_sub_new_sd",
    "pe_sub_classic",
    "pe_sub_classic_sd",
    "wins",
    "n_replicates",
    "tau",
    "failed_attempts",
    "failed_replicates",
];

pub fn write_csv<W: Write>(reports: &[EvaluationReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        let mut rec = vec![r.label.clone()];
        for s in [
            r.mse_new,
            r.mse_dantzig_alpha,
            r.mse_classic,
            r.pe_full,
            r.pe_sub_new,
            r.pe_sub_classic,
        ] {
            rec.push(format!("{:.6e}", s.mean));
            rec.push(format!("{:.6e}", s.sd));
        }
        rec.push(r.wins.to_string());
        rec.push(r.n_replicates.to_string());
        rec.push(format!("{:.4}", r.tau));
        rec.push(r.failed_attempts.to_string());
        rec.push(r.failed_replicates.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads reports written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<EvaluationReport>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidData("not a report file: unexpected header row".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| Error::Parse {
                row,
                column: CSV_HEADER[j].into(),
                message: format!("`{}` is not a number", &rec[j]),
            })
        };
        let count = |j: usize| -> Result<usize> {
            rec[j].parse().map_err(|_| Error::Parse {
                row,
                column: CSV_HEADER[j].into(),
                message: format!("`{}` is not a count", &rec[j]),
            })
        };
        let s = |j: usize| -> Result<Summary> {
            Ok(Summary {
                mean: num(j)?,
                sd: num(j + 1)?,
            })
        };
        out.push(EvaluationReport {
            label: rec[0].to_owned(),
            mse_new: s(1)?,
            mse_dantzig_alpha: s(3)?,
            mse_classic: s(5)?,
            pe_full: s(7)?,
            pe_sub_new: s(9)?,
            pe_sub_classic: s(11)?,
            wins: count(13)?,
            n_replicates: count(14)?,
            tau: num(15)?,
            failed_attempts: count(16)?,
            failed_replicates: count(17)?,
        });
    }
    Ok(out)
}

fn cell(s: Summary) -> String {
    format!("{:.4}({:.4})", s.mean, s.sd)
}

/// Aligned text table: MSE of `θ̂` and the refit, PE of the three
/// predictors, and the win count.
pub fn format_table(reports: &[EvaluationReport]) -> String {
    let header = [
        "cell",
        "MSE theta_hat",
        "MSE theta_S",
        "PE Y_hat",
        "PE Y_hat_S",
        "PE Y_tilde_S",
        "tau",
    ];
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                cell(r.mse_new),
                cell(r.mse_classic),
                cell(r.pe_full),
                cell(r.pe_sub_new),
                cell(r.pe_sub_classic),
                format!("{}/{}", r.wins, r.n_replicates),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header.map(String::from));
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for row in &rows {
        line(&mut out, row);
    }
    let failed: usize = reports.iter().map(|r| r.failed_replicates).sum();
    if failed > 0 {
        let _ = writeln!(out, "{failed} replicate(s) failed on every attempt and are excluded");
    }
    out
}
