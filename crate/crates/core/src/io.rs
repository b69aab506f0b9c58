//! Pool files (one JSON object per line) and report documents.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::allocate::AllocationKind;
use crate::error::{Error, Result};
use crate::model::{PooledItem, PrevalenceEstimate, Stratification, StratumSummary};
use crate::recall::{ConfusionCounts, RecallReport, TransparencyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestSummary {
    pub total: u64,
    pub labeled: u64,
    pub filtered: u64,
}

/// Parse a pool from any line-oriented reader. Blank lines are skipped but
/// still counted for line numbers.
pub fn read_pool<R: BufRead>(reader: R) -> Result<(Vec<PooledItem>, IngestSummary)> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    let mut summary = IngestSummary::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let item: PooledItem =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        item.validate().map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert(item.id.clone()) {
            return Err(parse_err(format!("duplicate id {:?}", item.id)));
        }
        summary.total += 1;
        summary.labeled += u64::from(item.label.is_some());
        summary.filtered += u64::from(item.filtered == Some(true));
        items.push(item);
    }
    if items.is_empty() {
        return Err(Error::invalid("pool file contains no items"));
    }
    Ok((items, summary))
}

pub fn ingest_pool(path: impl AsRef<Path>) -> Result<(Vec<PooledItem>, IngestSummary)> {
    let file = File::open(path.as_ref())?;
    let (items, summary) = read_pool(BufReader::new(file))?;
    log::info!(
        "ingested {} items ({} labelled, {} filtered) from {}",
        summary.total,
        summary.labeled,
        summary.filtered,
        path.as_ref().display()
    );
    Ok((items, summary))
}

pub fn write_pool_to<W: Write>(items: &[PooledItem], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pool(items: &[PooledItem], path: impl AsRef<Path>) -> Result<()> {
    write_pool_to(items, File::create(path)?)
}

/// Read a whole file, or standard input for `-`.
pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut s)?;
    } else {
        File::open(path)?.read_to_string(&mut s)?;
    }
    Ok(s)
}

/// One row of a report's per-stratum table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub stratum: usize,
    pub score_low: f64,
    pub score_high: f64,
    pub population: u64,
    pub annotated: u64,
    pub positives: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTable {
    pub rows: Vec<StratumRow>,
    pub total_population: u64,
    pub total_annotated: u64,
    pub total_positives: u64,
}

impl StratumTable {
    pub fn from_stratification(strat: &Stratification) -> Self {
        StratumTable {
            rows: strat
                .strata
                .iter()
                .map(|s| StratumRow {
                    stratum: s.index,
                    score_low: s.score_low,
                    score_high: s.score_high,
                    population: s.population,
                    annotated: s.annotated,
                    positives: s.positives,
                })
                .collect(),
            total_population: strat.total_size,
            total_annotated: strat.total_annotated(),
            total_positives: strat.total_positives(),
        }
    }

    /// Rebuild the stratification the table was written from.
    pub fn to_stratification(&self) -> Result<Stratification> {
        if self.rows.is_empty() {
            return Err(Error::invalid("stratum table has no rows"));
        }
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(Error::Inconsistent(problems));
        }
        let mut boundaries = vec![self.rows[0].score_low];
        boundaries.extend(self.rows.iter().map(|r| r.score_high));
        if boundaries[0] != 0.0
            || *boundaries.last().unwrap() != 1.0
            || boundaries.windows(2).any(|w| w[0] >= w[1])
            || self.rows.windows(2).any(|w| w[0].score_high != w[1].score_low)
        {
            return Err(Error::invalid("stratum table boundaries do not tile [0, 1]"));
        }
        Ok(Stratification {
            boundaries,
            strata: self
                .rows
                .iter()
                .enumerate()
                .map(|(h, r)| StratumSummary {
                    index: h + 1,
                    population: r.population,
                    score_low: r.score_low,
                    score_high: r.score_high,
                    annotated: r.annotated,
                    positives: r.positives,
                })
                .collect(),
            total_size: self.total_population,
        })
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let sum = |f: fn(&StratumRow) -> u64| self.rows.iter().map(f).sum::<u64>();
        for (name, total, rows) in [
            ("population", self.total_population, sum(|r| r.population)),
            ("annotated", self.total_annotated, sum(|r| r.annotated)),
            ("positives", self.total_positives, sum(|r| r.positives)),
        ] {
            if total != rows {
                out.push(format!("per-stratum {name} sums to {rows}, total says {total}"));
            }
        }
        for r in &self.rows {
            if !(r.positives <= r.annotated && r.annotated <= r.population) {
                out.push(format!("stratum {} has inconsistent counts", r.stratum));
            }
        }
        out
    }
}

/// How annotations were spread over the strata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub kind: AllocationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    pub realized: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<u64>>,
    /// 1-based strata annotated in full before reaching their target.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exhausted: Vec<usize>,
}

/// The document written by the `estimate`, `pilot`, `recall` and `report`
/// commands. `generated_at` is the only field that changes between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub generated_at: String,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<ConfusionCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transparency: Option<TransparencyReport>,
    #[serde(default)]
    pub estimates: Vec<PrevalenceEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<RecallReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<StratumTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationRecord>,
}

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

impl ReportFile {
    pub fn new(config: serde_json::Value, seeds: Vec<u64>) -> Self {
        ReportFile {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seeds,
            config,
            counts: None,
            transparency: None,
            estimates: Vec::new(),
            recall: None,
            strata: None,
            allocation: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Some(t) = &self.strata {
            problems.extend(t.problems());
            for e in &self.estimates {
                if e.n_total != t.total_annotated && e.method != crate::model::EstimationMethod::Random {
                    problems.push(format!(
                        "estimate uses {} annotations but the strata record {}",
                        e.n_total, t.total_annotated
                    ));
                }
            }
        }
        if let (Some(a), Some(t)) = (&self.allocation, &self.strata) {
            if a.realized.len() != t.rows.len() {
                problems.push("allocation and stratum table differ in length".to_string());
            } else if a.realized.iter().zip(&t.rows).any(|(&n, r)| n != r.annotated) {
                problems.push("allocation disagrees with the per-stratum annotations".to_string());
            }
        }
        for e in &self.estimates {
            if !(e.ci_low <= e.point && e.point <= e.ci_high) {
                problems.push(format!("estimate {} lies outside its interval", e.point));
            }
        }
        if let Some(r) = &self.recall {
            if !(r.recall_ci[0] <= r.recall_point && r.recall_point <= r.recall_ci[1]) {
                problems.push("recall point outside its interval".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Inconsistent(problems))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stratify::bin_quantile;
    use std::io::Cursor;

    #[test]
    fn three_valid_lines() {
        let text = r#"{"id":"a","score":0.1,"label":0}
{"id":"b","score":0.9,"label":1,"filtered":true}

{"id":"c","score":0.5}
"#;
        let (items, s) = read_pool(Cursor::new(text)).unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(s, IngestSummary { total: 3, labeled: 2, filtered: 1 });
        assert_eq!(items[1].label, Some(true));
    }

    #[test]
    fn rejections_name_the_line() {
        let bad_score = "{\"id\":\"a\",\"score\":0.1}\n{\"id\":\"b\",\"score\":1.5}\n";
        match read_pool(Cursor::new(bad_score)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let dup = "{\"id\":\"a\",\"score\":0.1}\n\n{\"id\":\"a\",\"score\":0.2}\n";
        assert!(matches!(read_pool(Cursor::new(dup)), Err(Error::Parse { line: 3, .. })));
        let junk = "{\"id\":\"a\",\"score\":0.1}\nnot json\n";
        assert!(matches!(read_pool(Cursor::new(junk)), Err(Error::Parse { line: 2, .. })));
        let missing = "{\"score\":0.1}\n";
        assert!(matches!(read_pool(Cursor::new(missing)), Err(Error::Parse { line: 1, .. })));
        assert!(read_pool(Cursor::new("")).is_err());
        assert!(read_pool(Cursor::new("\n\n")).is_err());
    }

    #[test]
    fn round_trip_through_bytes() {
        let items = vec![
            PooledItem::labeled("x", 0.25, true),
            PooledItem::new("y", 1.0),
            PooledItem { filtered: Some(false), ..PooledItem::labeled("z", 0.0, false) },
        ];
        let mut buf = Vec::new();
        write_pool_to(&items, &mut buf).unwrap();
        assert_eq!(read_pool(Cursor::new(buf)).unwrap().0, items);
    }

    #[test]
    fn report_table_consistency() {
        let pool: Vec<_> = (0..40)
            .map(|i| PooledItem::labeled(format!("i{i}"), i as f64 / 40.0, i % 7 == 0))
            .collect();
        let strat = bin_quantile(&pool, 4).unwrap().with_true_labels(&pool).unwrap();
        let mut r = ReportFile::new(serde_json::json!({}), vec![1]);
        r.strata = Some(StratumTable::from_stratification(&strat));
        r.validate().unwrap();
        assert_eq!(r.strata.as_ref().unwrap().to_stratification().unwrap(), strat);
        r.strata.as_mut().unwrap().rows[0].positives += 1;
        assert!(matches!(r.validate(), Err(Error::Inconsistent(_))));
    }
}
