use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use coverlock_core::model::coverage_floor_for;
use coverlock_core::ProblemInstance;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    schema: Option<u32>,
    values: Vec<f64>,
    costs: Vec<f64>,
    budget: Option<f64>,
    coverage_floor: Option<usize>,
    budget_per_capita: Option<f64>,
    coverage_share: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    value: f64,
    cost: f64,
}

/// Totals given on the command line for CSV instances.
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvTotals {
    pub budget: Option<f64>,
    pub coverage: Option<usize>,
}

/// A parsed instance plus a note on any per-capita conversion.
pub struct Loaded {
    pub instance: ProblemInstance,
    pub conversion: Option<String>,
}

pub fn load_instance(path: &Path, totals: CsvTotals) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_csv(&text, totals)
    } else {
        parse_json(&text)
    }
}

pub fn parse_json(text: &str) -> Result<Loaded> {
    let f: InstanceFile = serde_json::from_str(text).context("malformed instance JSON")?;
    if let Some(s) = f.schema {
        if s != 1 {
            bail!("unsupported instance schema {s}");
        }
    }
    match (f.budget, f.coverage_floor, f.budget_per_capita, f.coverage_share) {
        (Some(budget), Some(floor), None, None) => Ok(Loaded {
            instance: ProblemInstance::new(f.values, f.costs, budget, floor)?,
            conversion: None,
        }),
        (None, None, Some(per_capita), Some(share)) => {
            let n = f.values.len();
            let budget = n as f64 * per_capita;
            let floor = coverage_floor_for(n, share);
            let note = format!(
                "per-capita input: budget {per_capita} x {n} = {budget}, coverage ceil({share} x {n}) = {floor}"
            );
            Ok(Loaded {
                instance: ProblemInstance::from_per_capita(f.values, f.costs, per_capita, share)?,
                conversion: Some(note),
            })
        }
        _ => bail!(
            "instance needs either budget and coverage_floor or budget_per_capita and coverage_share"
        ),
    }
}

pub fn parse_csv(text: &str, totals: CsvTotals) -> Result<Loaded> {
    let (Some(budget), Some(coverage)) = (totals.budget, totals.coverage) else {
        bail!("CSV instances need --budget and --coverage");
    };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().context("reading CSV header")?.clone();
    if headers.iter().collect::<Vec<_>>() != ["value", "cost"] {
        bail!("CSV header must be `value,cost`");
    }
    let mut values = Vec::new();
    let mut costs = Vec::new();
    for (line, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row.with_context(|| format!("CSV record {}", line + 1))?;
        values.push(row.value);
        costs.push(row.cost);
    }
    Ok(Loaded {
        instance: ProblemInstance::new(values, costs, budget, coverage)?,
        conversion: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let t = r#"{"schema":1,"values":[1,2],"costs":[1,1],"budget":2.0,"coverage_floor":1}"#;
        let l = parse_json(t).unwrap();
        assert_eq!(l.instance.coverage_floor(), 1);
        assert!(l.conversion.is_none());
        let t =
            r#"{"values":[1,2,3],"costs":[1,1,1],"budget_per_capita":2.0,"coverage_share":0.33}"#;
        let l = parse_json(t).unwrap();
        assert_eq!(l.instance.budget(), 6.0);
        assert_eq!(l.instance.coverage_floor(), 1);
        assert!(l.conversion.is_some());
    }

    #[test]
    fn json_rejections() {
        assert!(parse_json("{").is_err());
        assert!(parse_json(r#"{"values":[1],"costs":[1],"budget":1}"#).is_err());
        assert!(parse_json(
            r#"{"schema":2,"values":[1],"costs":[1],"budget":1,"coverage_floor":0}"#
        )
        .is_err());
        assert!(
            parse_json(r#"{"values":[1],"costs":[1],"budget":1,"coverage_floor":0,"x":1}"#)
                .is_err()
        );
        assert!(
            parse_json(r#"{"values":[1],"costs":[-1],"budget":1,"coverage_floor":0}"#).is_err()
        );
    }

    #[test]
    fn csv_form() {
        let totals = CsvTotals {
            budget: Some(3.0),
            coverage: Some(1),
        };
        let l = parse_csv("value,cost\n1.5,2\n-1,1\n", totals).unwrap();
        assert_eq!(l.instance.values(), &[1.5, -1.0]);
        assert!(parse_csv("value,cost\n1,2\n", CsvTotals::default()).is_err());
        assert!(parse_csv("cost,value\n1,2\n", totals).is_err());
        assert!(parse_csv("value,cost\n1,x\n", totals).is_err());
    }
}
