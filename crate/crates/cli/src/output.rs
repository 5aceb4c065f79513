//! Human and CSV renderings.
//!
//! CSV goes to stdout with a header line; the run header goes to stderr as
//! `# key=value` lines so stdout stays machine-readable.

use std::io::{self, Write};

use clap::ValueEnum;
use serde::Serialize;

use epr_core::criteria::{CriterionKind, CriterionReport};
use epr_core::grid::Party;
use epr_core::ingest::{Analysis, CountTable, TableEntropies};
use epr_core::theory::{ScanRow, Threshold, ThresholdSearch};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Csv,
}

pub struct Output {
    format: Format,
}

/// One CSV record per report. `party` is filled for single-party reports.
/// Entropy rows use `kind = entropy`, name the quantity in `direction` and
/// leave `bound`, `violated` and `significance_sigmas` empty.
#[derive(Serialize)]
struct ReportRecord<'a> {
    kind: &'a str,
    direction: &'a str,
    party: Option<&'a str>,
    value: f64,
    bound: Option<f64>,
    violated: Option<bool>,
    uncertainty: Option<f64>,
    significance_sigmas: Option<f64>,
}

impl<'a> From<&'a CriterionReport> for ReportRecord<'a> {
    fn from(r: &'a CriterionReport) -> Self {
        Self {
            kind: r.kind.as_str(),
            direction: r.direction.as_str(),
            party: r.party.map(party_label),
            value: r.value,
            bound: Some(r.bound),
            violated: Some(r.violated),
            uncertainty: r.uncertainty,
            significance_sigmas: r.significance_sigmas,
        }
    }
}

#[derive(Serialize)]
struct ThresholdRecord {
    ratio: f64,
    sigma_ratio: f64,
    variance_product: f64,
    evaluations: usize,
    bracket_lo: f64,
    bracket_hi: f64,
    tolerance: f64,
    grid_points: usize,
}

#[derive(Serialize)]
struct TableRecord {
    variable: String,
    rows: usize,
    cols: usize,
    total_counts: u64,
    step_mm: f64,
    gamma: f64,
    offset_a: f64,
    offset_b: f64,
}

fn entropy_rows(e: &TableEntropies) -> [(String, f64); 5] {
    let v = e.variable.to_string();
    [
        (format!("{v}_a"), e.h_a),
        (format!("{v}_b"), e.h_b),
        (format!("{v}_joint"), e.h_joint),
        (format!("{v}_a_given_b"), e.h_a_given_b),
        (format!("{v}_b_given_a"), e.h_b_given_a),
    ]
}

fn csv_out<T: Serialize>(records: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn party_label(p: Party) -> &'static str {
    match p {
        Party::A => "A",
        Party::B => "B",
    }
}

fn verdict(r: &CriterionReport) -> &'static str {
    match (r.kind, r.violated) {
        (CriterionKind::KeyRate, true) => "positive",
        (CriterionKind::KeyRate, false) => "none guaranteed",
        (_, true) => "VIOLATED",
        (_, false) => "satisfied",
    }
}

impl Output {
    pub fn new(format: Format) -> Self {
        Self { format }
    }

    pub fn header(&mut self, fields: &[(&str, String)]) {
        match self.format {
            Format::Human => {
                let line: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("# {}", line.join(" "));
            }
            Format::Csv => {
                for (k, v) in fields {
                    eprintln!("# {k}={v}");
                }
            }
        }
    }

    pub fn scan(&mut self, rows: &[ScanRow]) -> anyhow::Result<()> {
        if self.format == Format::Csv {
            return csv_out(rows);
        }
        let mut o = io::stdout().lock();
        writeln!(
            o,
            "{:>3}  {:>12}  {:>12}  {:>8}  {:>8}",
            "n", "var product", "entropic sum", "var EPR", "ent EPR"
        )?;
        for r in rows {
            writeln!(
                o,
                "{:>3}  {:>12.6}  {:>12.6}  {:>8}  {:>8}",
                r.n,
                r.variance_product,
                r.entropic_sum,
                if r.variance_violated { "yes" } else { "no" },
                if r.entropic_violated { "yes" } else { "no" },
            )?;
        }
        if let Some(r) = rows.first() {
            writeln!(
                o,
                "bounds: variance {} , entropic {:.10}",
                r.variance_bound, r.entropic_bound
            )?;
        }
        Ok(())
    }

    pub fn threshold(&mut self, s: &ThresholdSearch, t: &Threshold) -> anyhow::Result<()> {
        let rec = ThresholdRecord {
            ratio: t.ratio,
            sigma_ratio: t.ratio.sqrt(),
            variance_product: t.variance_product,
            evaluations: t.evaluations,
            bracket_lo: s.bracket.0,
            bracket_hi: s.bracket.1,
            tolerance: s.tolerance,
            grid_points: s.grid.points,
        };
        if self.format == Format::Csv {
            return csv_out([rec]);
        }
        println!(
            "variance criterion violated for sigma_minus^2/sigma_plus^2 > {:.4} \
             (sigma_minus/sigma_plus > {:.4}); product there {:.6}, {} grid evaluations",
            rec.ratio, rec.sigma_ratio, rec.variance_product, rec.evaluations
        );
        Ok(())
    }

    pub fn reports(&mut self, reports: &[CriterionReport]) -> anyhow::Result<()> {
        if self.format == Format::Csv {
            return csv_out(reports.iter().map(ReportRecord::from));
        }
        let mut o = io::stdout().lock();
        for r in reports {
            let unc = match (r.uncertainty, r.significance_sigmas) {
                (Some(u), Some(s)) => format!(" ± {u:.4} ({s:+.1} sigma)"),
                (Some(u), None) => format!(" ± {u:.4}"),
                _ => String::new(),
            };
            let direction = match r.party {
                Some(p) => format!("{} {}", r.direction.as_str(), party_label(p)),
                None => r.direction.as_str().to_string(),
            };
            writeln!(
                o,
                "{:<13} {:<14} {:>10.6}{unc}  bound {:.6}  {}",
                r.kind.as_str(),
                direction,
                r.value,
                r.bound,
                verdict(r)
            )?;
        }
        Ok(())
    }

    pub fn analysis(&mut self, a: &Analysis) -> anyhow::Result<()> {
        let entropies: Vec<(String, f64)> = entropy_rows(&a.breakdown.x)
            .into_iter()
            .chain(entropy_rows(&a.breakdown.p))
            .collect();
        if self.format == Format::Csv {
            let mut recs: Vec<ReportRecord> = a.reports.iter().map(ReportRecord::from).collect();
            recs.extend(entropies.iter().map(|(k, v)| ReportRecord {
                kind: "entropy",
                direction: k,
                party: None,
                value: *v,
                bound: None,
                violated: None,
                uncertainty: None,
                significance_sigmas: None,
            }));
            return csv_out(recs);
        }
        println!("total counts: x {} , p {}", a.total_x, a.total_p);
        self.reports(&a.reports)?;
        println!("differential entropies (nats):");
        for (k, v) in &entropies {
            println!("  h({k}) = {v:.6}");
        }
        Ok(())
    }

    pub fn simulated(&mut self, tx: &CountTable, tp: &CountTable) -> anyhow::Result<()> {
        let recs: Vec<TableRecord> = [tx, tp]
            .iter()
            .map(|t| TableRecord {
                variable: t.meta.variable.to_string(),
                rows: t.counts.nrows(),
                cols: t.counts.ncols(),
                total_counts: t.total(),
                step_mm: t.meta.step_mm,
                gamma: t.meta.gamma,
                offset_a: t.meta.offset_a,
                offset_b: t.meta.offset_b,
            })
            .collect();
        if self.format == Format::Csv {
            return csv_out(recs);
        }
        for r in recs {
            println!(
                "{} table: {}x{} cells, {} counts, step {} mm, gamma {}",
                r.variable, r.rows, r.cols, r.total_counts, r.step_mm, r.gamma
            );
        }
        Ok(())
    }
}
