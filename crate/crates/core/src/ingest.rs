//! Adverse-event incidence tables: parsing, validation and zero-row filtering.
//!
//! The CSV layout is one PT column followed by one column per arm. Arm sizes
//! travel either in the header (`Active|N=63`) or in a second header line
//! starting with `#N`:
//!
//! ```text
//! pt,Active|N=63,Placebo|N=62
//! Vomiting,41,12
//! ```

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Result, ShieldError};

/// Subject counts per Preferred Term and treatment arm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceTable {
    pt_names: Vec<String>,
    arm_names: Vec<String>,
    n_subjects: Vec<u64>,
    /// Row-major m×k.
    counts: Vec<u64>,
}

impl IncidenceTable {
    /// Builds a table from rows of counts, checking every invariant except
    /// the "no all-zero rows" one, which [`filter_zero_rows`] establishes.
    pub fn new(
        pt_names: Vec<String>,
        arm_names: Vec<String>,
        n_subjects: Vec<u64>,
        rows: Vec<Vec<u64>>,
    ) -> Result<Self> {
        let k = arm_names.len();
        if k == 0 {
            return Err(ShieldError::Schema("at least one arm is required".into()));
        }
        if n_subjects.len() != k {
            return Err(ShieldError::Schema(format!(
                "{} arm sizes given for {} arms",
                n_subjects.len(),
                k
            )));
        }
        if let Some(j) = n_subjects.iter().position(|&n| n == 0) {
            return Err(ShieldError::Schema(format!(
                "arm `{}` has no subjects at risk",
                arm_names[j]
            )));
        }
        if rows.len() != pt_names.len() {
            return Err(ShieldError::Schema(format!(
                "{} count rows for {} terms",
                rows.len(),
                pt_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for arm in &arm_names {
            if !seen.insert(arm.as_str()) {
                return Err(ShieldError::Schema(format!("duplicate arm `{arm}`")));
            }
        }
        let pt_names: Vec<String> = pt_names.into_iter().map(|s| s.trim().to_string()).collect();
        let mut seen = HashSet::new();
        for pt in &pt_names {
            if pt.is_empty() {
                return Err(ShieldError::Schema("empty preferred term".into()));
            }
            if !seen.insert(pt.as_str()) {
                return Err(ShieldError::DuplicateTerm { term: pt.clone() });
            }
        }
        let mut counts = Vec::with_capacity(rows.len() * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(ShieldError::Schema(format!(
                    "row `{}` has {} counts, expected {k}",
                    pt_names[i],
                    row.len()
                )));
            }
            for (j, &c) in row.iter().enumerate() {
                if c > n_subjects[j] {
                    return Err(ShieldError::InvalidCount {
                        line: i as u64 + 1,
                        column: arm_names[j].clone(),
                        value: c.to_string(),
                        reason: format!("exceeds arm size {}", n_subjects[j]),
                    });
                }
            }
            counts.extend_from_slice(row);
        }
        Ok(Self {
            pt_names,
            arm_names,
            n_subjects,
            counts,
        })
    }

    /// Number of Preferred Terms (m).
    pub fn num_terms(&self) -> usize {
        self.pt_names.len()
    }

    /// Number of arms (k).
    pub fn num_arms(&self) -> usize {
        self.arm_names.len()
    }

    pub fn pt_names(&self) -> &[String] {
        &self.pt_names
    }

    pub fn arm_names(&self) -> &[String] {
        &self.arm_names
    }

    /// Subjects at risk per arm (N_j).
    pub fn n_subjects(&self) -> &[u64] {
        &self.n_subjects
    }

    pub fn count(&self, term: usize, arm: usize) -> u64 {
        self.counts[term * self.num_arms() + arm]
    }

    pub fn row(&self, term: usize) -> &[u64] {
        let k = self.num_arms();
        &self.counts[term * k..(term + 1) * k]
    }

    /// Total subjects with the event across arms (T_i).
    pub fn row_total(&self, term: usize) -> u64 {
        self.row(term).iter().sum()
    }

    /// Total subjects at risk (N_tot).
    pub fn total_subjects(&self) -> u64 {
        self.n_subjects.iter().sum()
    }

    /// Keeps rows for which `keep(index)` holds, preserving order.
    pub fn retain_terms(&self, keep: impl Fn(usize) -> bool) -> IncidenceTable {
        let k = self.num_arms();
        let mut pt_names = Vec::new();
        let mut counts = Vec::new();
        for i in 0..self.num_terms() {
            if keep(i) {
                pt_names.push(self.pt_names[i].clone());
                counts.extend_from_slice(&self.counts[i * k..(i + 1) * k]);
            }
        }
        IncidenceTable {
            pt_names,
            arm_names: self.arm_names.clone(),
            n_subjects: self.n_subjects.clone(),
            counts,
        }
    }
}

/// Drops terms with no events in any arm. Order is preserved.
pub fn filter_zero_rows(table: &IncidenceTable) -> Result<IncidenceTable> {
    let filtered = table.retain_terms(|i| table.row_total(i) > 0);
    if filtered.num_terms() == 0 {
        return Err(ShieldError::EmptyTable);
    }
    Ok(filtered)
}

/// Per-arm incidence proportions c_ij / N_j, row-major m×k.
pub fn proportions(table: &IncidenceTable) -> Vec<Vec<f64>> {
    (0..table.num_terms())
        .map(|i| {
            table
                .row(i)
                .iter()
                .zip(table.n_subjects())
                .map(|(&c, &n)| c as f64 / n as f64)
                .collect()
        })
        .collect()
}

fn split_arm_header(cell: &str) -> (String, Option<&str>) {
    match cell.rfind("|N=") {
        Some(pos) => (cell[..pos].trim().to_string(), Some(cell[pos + 3..].trim())),
        None => (cell.trim().to_string(), None),
    }
}

fn parse_arm_size(arm: &str, raw: &str, line: u64) -> Result<u64> {
    match raw.parse::<u64>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(ShieldError::Schema(format!(
            "line {line}: arm `{arm}` has invalid subject total `{raw}`"
        ))),
    }
}

/// Parses an incidence CSV. `arm_spec` selects and orders arms by name; an
/// empty spec keeps every arm in file order.
pub fn parse_incidence_csv<R: Read>(source: R, arm_spec: &[String]) -> Result<IncidenceTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(ShieldError::Schema("input is empty".into())),
    };
    if header.len() < 2 {
        return Err(ShieldError::Schema(
            "header needs a term column and at least one arm column".into(),
        ));
    }
    let mut file_arms = Vec::with_capacity(header.len() - 1);
    let mut header_sizes = Vec::with_capacity(header.len() - 1);
    for cell in header.iter().skip(1) {
        let (name, size) = split_arm_header(cell);
        if name.is_empty() {
            return Err(ShieldError::Schema("empty arm name in header".into()));
        }
        header_sizes.push(size.map(str::to_string));
        file_arms.push(name);
    }

    let mut pending = None;
    let mut file_sizes: Vec<u64> = Vec::with_capacity(file_arms.len());
    if let Some(rec) = records.next() {
        let rec = rec?;
        let line = rec.position().map_or(2, |p| p.line());
        if rec.get(0) == Some("#N") {
            if rec.len() != header.len() {
                return Err(ShieldError::Schema(format!(
                    "line {line}: `#N` row has {} fields, header has {}",
                    rec.len(),
                    header.len()
                )));
            }
            for (j, raw) in rec.iter().skip(1).enumerate() {
                file_sizes.push(parse_arm_size(&file_arms[j], raw, line)?);
            }
        } else {
            pending = Some(rec);
        }
    }
    if file_sizes.is_empty() {
        for (j, size) in header_sizes.iter().enumerate() {
            match size {
                Some(raw) => file_sizes.push(parse_arm_size(&file_arms[j], raw, 1)?),
                None => {
                    return Err(ShieldError::Schema(format!(
                        "arm `{}` has no subject total (use `{}|N=<int>` or a `#N` row)",
                        file_arms[j], file_arms[j]
                    )))
                }
            }
        }
    }

    let selection: Vec<usize> = if arm_spec.is_empty() {
        let mut seen = HashSet::new();
        for arm in &file_arms {
            if !seen.insert(arm.as_str()) {
                return Err(ShieldError::Schema(format!("duplicate arm `{arm}`")));
            }
        }
        (0..file_arms.len()).collect()
    } else {
        arm_spec
            .iter()
            .map(|want| {
                file_arms
                    .iter()
                    .position(|a| a == want.trim())
                    .ok_or_else(|| ShieldError::Schema(format!("missing arm column `{want}`")))
            })
            .collect::<Result<_>>()?
    };

    let mut pt_names = Vec::new();
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in pending.into_iter().map(Ok).chain(records) {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(ShieldError::Schema(format!(
                "line {line}: {} fields, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let pt = rec[0].trim().to_string();
        if pt.is_empty() {
            return Err(ShieldError::Schema(format!(
                "line {line}: empty preferred term"
            )));
        }
        if !seen.insert(pt.clone()) {
            return Err(ShieldError::DuplicateTerm { term: pt });
        }
        let mut row = Vec::with_capacity(selection.len());
        for &j in &selection {
            let raw = &rec[j + 1];
            let bad = |reason: &str| ShieldError::InvalidCount {
                line,
                column: file_arms[j].clone(),
                value: raw.to_string(),
                reason: reason.to_string(),
            };
            let value: i64 = raw.parse().map_err(|_| bad("not an integer"))?;
            if value < 0 {
                return Err(bad("negative"));
            }
            let value = value as u64;
            if value > file_sizes[j] {
                return Err(bad(&format!("exceeds arm size {}", file_sizes[j])));
            }
            row.push(value);
        }
        pt_names.push(pt);
        rows.push(row);
    }

    IncidenceTable::new(
        pt_names,
        selection.iter().map(|&j| file_arms[j].clone()).collect(),
        selection.iter().map(|&j| file_sizes[j]).collect(),
        rows,
    )
}

/// Writes `table` in the header-embedded arm size layout.
pub fn write_incidence_csv<W: Write>(table: &IncidenceTable, sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let mut header = vec!["pt".to_string()];
    header.extend(
        table
            .arm_names()
            .iter()
            .zip(table.n_subjects())
            .map(|(a, n)| format!("{a}|N={n}")),
    );
    writer.write_record(&header)?;
    for i in 0..table.num_terms() {
        let mut rec = vec![table.pt_names()[i].clone()];
        rec.extend(table.row(i).iter().map(u64::to_string));
        writer.write_record(&rec)?;
    }
    writer
        .flush()
        .map_err(|e| ShieldError::io("flushing incidence csv", e))
}
