use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use super::{DatasetError, LabeledDataset, Row, UNTARGETED};
use crate::features::FEATURE_NAMES;

/// Maximum distinct values of a one-hot encoded column.
pub const MAX_CATEGORIES: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnTarget {
    /// Numeric column copied into the named internal feature.
    Feature(String),
    /// Categorical column expanded into one indicator per distinct value.
    OneHot,
    Ignore,
}

#[derive(Debug, Clone, Default)]
pub struct ImportOptions {
    /// External column name and what to do with it. Unlisted columns are
    /// ignored.
    pub column_map: Vec<(String, ColumnTarget)>,
    pub label_column: String,
    /// Labels counted as monitored sites. `None` marks every labeled row as
    /// targeted.
    pub targeted_labels: Option<BTreeSet<String>>,
}

/// Import a third-party flow CSV, keeping the mapped subset of columns.
///
/// Numeric cells that do not parse to a finite number become missing.
/// Internal features keep the schema order; one-hot columns follow, named
/// `column=value`.
pub fn import_external_csv<R: Read>(
    input: R,
    options: &ImportOptions,
) -> Result<LabeledDataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.iter().all(String::is_empty) {
        return Err(DatasetError::EmptyFile);
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name.trim())
            .ok_or_else(|| DatasetError::HeaderMismatch(format!("column {name:?} not in header")))
    };
    let label_idx = find(&options.label_column)?;

    let mut numeric: BTreeMap<usize, usize> = BTreeMap::new(); // schema position -> column
    let mut categorical: Vec<(String, usize)> = Vec::new();
    for (name, target) in &options.column_map {
        match target {
            ColumnTarget::Ignore => {}
            ColumnTarget::Feature(internal) => {
                let col = find(name)?;
                let pos = FEATURE_NAMES
                    .iter()
                    .position(|f| f == internal)
                    .ok_or_else(|| {
                        DatasetError::HeaderMismatch(format!("unknown internal feature {internal:?}"))
                    })?;
                if numeric.insert(pos, col).is_some() {
                    return Err(DatasetError::HeaderMismatch(format!(
                        "internal feature {internal:?} mapped twice"
                    )));
                }
            }
            ColumnTarget::OneHot => categorical.push((name.trim().to_string(), find(name)?)),
        }
    }

    let records: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>()?;
    if records.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    let field = |rec: &csv::StringRecord, col: usize| rec.get(col).unwrap_or("").trim().to_string();

    let mut categories: Vec<Vec<String>> = Vec::new();
    for (name, col) in &categorical {
        let values: BTreeSet<String> = records
            .iter()
            .map(|r| field(r, *col))
            .filter(|v| !v.is_empty())
            .collect();
        if values.len() > MAX_CATEGORIES {
            return Err(DatasetError::TooManyCategories {
                column: name.clone(),
                count: values.len(),
                limit: MAX_CATEGORIES,
            });
        }
        categories.push(values.into_iter().collect());
    }

    let mut feature_names: Vec<String> =
        numeric.keys().map(|&p| FEATURE_NAMES[p].to_string()).collect();
    for ((name, _), values) in categorical.iter().zip(&categories) {
        feature_names.extend(values.iter().map(|v| format!("{name}={v}")));
    }

    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let mut features: Vec<Option<f64>> = numeric
            .values()
            .map(|&col| field(rec, col).parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect();
        for ((_, col), values) in categorical.iter().zip(&categories) {
            let v = field(rec, *col);
            if v.is_empty() {
                features.extend(std::iter::repeat_n(None, values.len()));
            } else {
                features.extend(values.iter().map(|c| Some(if *c == v { 1.0 } else { 0.0 })));
            }
        }
        let label = field(rec, label_idx);
        if label.is_empty() {
            return Err(DatasetError::InvalidRow {
                row: i + 1,
                reason: format!("empty label column {:?}", options.label_column),
            });
        }
        let targeted = !label.eq_ignore_ascii_case(UNTARGETED)
            && options
                .targeted_labels
                .as_ref()
                .is_none_or(|set| set.contains(&label));
        rows.push(if targeted {
            Row::targeted(features, label)
        } else {
            Row::untargeted(features)
        });
    }
    LabeledDataset::new(feature_names, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryLabel;

    fn wide_csv(n_cols: usize, rows: &[Vec<String>]) -> String {
        let mut s: Vec<String> = (0..n_cols - 1).map(|i| format!("col{i}")).collect();
        s.push("L7Protocol".into());
        let mut out = s.join(",") + "\n";
        for r in rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    #[test]
    fn selects_eight_of_eighty_seven() {
        let row: Vec<String> = (0..86).map(|i| i.to_string()).chain(["YOUTUBE".into()]).collect();
        let csv = wide_csv(87, &[row.clone(), row]);
        let column_map = FEATURE_NAMES
            .iter()
            .enumerate()
            .map(|(i, f)| (format!("col{}", i * 10), ColumnTarget::Feature(f.to_string())))
            .collect();
        let ds = import_external_csv(
            csv.as_bytes(),
            &ImportOptions {
                column_map,
                label_column: "L7Protocol".into(),
                targeted_labels: None,
            },
        )
        .unwrap();
        assert_eq!(ds.n_features(), 8);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.rows[0].features[3], Some(30.0));
        assert_eq!(ds.rows[0].site.as_deref(), Some("YOUTUBE"));
    }

    #[test]
    fn header_only_is_empty() {
        let opts = ImportOptions {
            column_map: vec![],
            label_column: "L7Protocol".into(),
            targeted_labels: None,
        };
        assert!(matches!(
            import_external_csv("a,L7Protocol\n".as_bytes(), &opts),
            Err(DatasetError::EmptyFile)
        ));
        assert!(matches!(
            import_external_csv("".as_bytes(), &opts),
            Err(DatasetError::EmptyFile)
        ));
    }

    #[test]
    fn unparseable_cells_become_missing() {
        let text = " Flow Duration, Flow Bytes/s,Label\n1.5,N/A,GOOGLE\n2,Infinity,AMAZON\n3,12.5,GOOGLE\n";
        let ds = import_external_csv(
            text.as_bytes(),
            &ImportOptions {
                column_map: vec![
                    ("Flow Duration".into(), ColumnTarget::Feature("flow_duration".into())),
                    ("Flow Bytes/s".into(), ColumnTarget::Feature("flow_bytes_per_s".into())),
                ],
                label_column: "Label".into(),
                targeted_labels: Some(["GOOGLE".to_string()].into()),
            },
        )
        .unwrap();
        assert_eq!(ds.feature_names, vec!["flow_duration", "flow_bytes_per_s"]);
        assert_eq!(ds.rows[0].features, vec![Some(1.5), None]);
        assert_eq!(ds.rows[1].features, vec![Some(2.0), None]);
        assert_eq!(ds.rows[1].binary, BinaryLabel::Untargeted);
        assert_eq!(ds.rows[2].features, vec![Some(3.0), Some(12.5)]);
    }

    #[test]
    fn unknown_column_is_header_mismatch() {
        let opts = ImportOptions {
            column_map: vec![("nope".into(), ColumnTarget::Feature("flow_duration".into()))],
            label_column: "Label".into(),
            targeted_labels: None,
        };
        assert!(matches!(
            import_external_csv("a,Label\n1,x\n".as_bytes(), &opts),
            Err(DatasetError::HeaderMismatch(_))
        ));
    }

    #[test]
    fn one_hot_encoding_and_cap() {
        let text = "proto,Label\n6,a\n17,b\n6,a\n";
        let ds = import_external_csv(
            text.as_bytes(),
            &ImportOptions {
                column_map: vec![("proto".into(), ColumnTarget::OneHot)],
                label_column: "Label".into(),
                targeted_labels: None,
            },
        )
        .unwrap();
        assert_eq!(ds.feature_names, vec!["proto=17", "proto=6"]);
        assert_eq!(ds.rows[0].features, vec![Some(0.0), Some(1.0)]);

        let mut text = String::from("proto,Label\n");
        for i in 0..33 {
            text.push_str(&format!("{i},a\n"));
        }
        assert!(matches!(
            import_external_csv(
                text.as_bytes(),
                &ImportOptions {
                    column_map: vec![("proto".into(), ColumnTarget::OneHot)],
                    label_column: "Label".into(),
                    targeted_labels: None,
                },
            ),
            Err(DatasetError::TooManyCategories { count: 33, .. })
        ));
    }
}
