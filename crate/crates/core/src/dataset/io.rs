use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BinaryLabel, DatasetError, LabeledDataset, Partition, Row};
use crate::features::{FeatureVector, FEATURE_NAMES};

pub const DATASET_LABEL_COLUMNS: [&str; 2] = ["binary_label", "site_label"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write the dataset as CSV: feature columns, then `binary_label` and
/// `site_label`. Missing cells are empty fields; numbers are written at
/// full round-trip precision.
pub fn write_dataset_csv<W: Write>(out: W, ds: &LabeledDataset) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = ds
        .feature_names
        .iter()
        .map(String::as_str)
        .chain(DATASET_LABEL_COLUMNS)
        .collect();
    w.write_record(&header)?;
    for r in &ds.rows {
        let mut rec: Vec<String> = r.features.iter().map(|v| cell(*v)).collect();
        rec.push(r.binary.as_str().to_string());
        rec.push(r.site.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Write unlabeled feature vectors in the dataset layout with blank label
/// columns.
pub fn write_features_csv<W: Write>(out: W, features: &[FeatureVector]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_NAMES.iter().chain(DATASET_LABEL_COLUMNS.iter()))?;
    for fv in features {
        let mut rec: Vec<String> = fv.to_row().into_iter().map(cell).collect();
        rec.push(String::new());
        rec.push(String::new());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

struct RawTable {
    feature_names: Vec<String>,
    features: Vec<Vec<Option<f64>>>,
    labels: Vec<(String, String)>,
}

fn read_table<R: Read>(input: R) -> Result<RawTable, DatasetError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let n = header.len();
    if n < 2 || header[n - 2..] != DATASET_LABEL_COLUMNS {
        return Err(DatasetError::HeaderMismatch(format!(
            "last two columns must be {DATASET_LABEL_COLUMNS:?}, header is {header:?}"
        )));
    }
    let d = n - 2;
    let mut table = RawTable {
        feature_names: header[..d].to_vec(),
        features: Vec::new(),
        labels: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let feats = (0..d)
            .map(|j| {
                let s = rec[j].trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Some)
                    .ok_or_else(|| DatasetError::InvalidRow {
                        row: i + 1,
                        reason: format!("column {:?}: not a number: {s:?}", table.feature_names[j]),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.features.push(feats);
        table
            .labels
            .push((rec[d].trim().to_string(), rec[d + 1].trim().to_string()));
    }
    Ok(table)
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<LabeledDataset, DatasetError> {
    let table = read_table(input)?;
    let rows = table
        .features
        .into_iter()
        .zip(table.labels)
        .enumerate()
        .map(|(i, (features, (binary, site)))| {
            let binary: BinaryLabel = binary
                .parse()
                .map_err(|reason| DatasetError::InvalidRow { row: i + 1, reason })?;
            Ok(Row {
                features,
                binary,
                site: (!site.is_empty()).then_some(site),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    LabeledDataset::new(table.feature_names, rows)
}

/// Feature cells of a dataset-layout CSV, ignoring any labels.
pub fn read_feature_rows<R: Read>(
    input: R,
) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>), DatasetError> {
    let table = read_table(input)?;
    Ok((table.feature_names, table.features))
}

/// Write one CSV per partition (`train.csv`, `validation.csv`, `test.csv`).
pub fn write_split_dir(dir: &Path, ds: &LabeledDataset) -> Result<(), DatasetError> {
    if ds.split.is_none() {
        return Err(DatasetError::InvalidRatios("dataset has no split".into()));
    }
    std::fs::create_dir_all(dir)?;
    for p in Partition::ALL {
        let file = BufWriter::new(File::create(dir.join(p.file_name()))?);
        write_dataset_csv(file, &ds.partition(p))?;
    }
    Ok(())
}

/// Read a directory written by [`write_split_dir`] back into one split
/// dataset (train rows first, then validation, then test).
pub fn read_split_dir(dir: &Path) -> Result<LabeledDataset, DatasetError> {
    let mut merged: Option<LabeledDataset> = None;
    let mut assignment = Vec::new();
    for p in Partition::ALL {
        let part = read_dataset_csv(BufReader::new(File::open(dir.join(p.file_name()))?))?;
        assignment.extend(std::iter::repeat_n(p, part.len()));
        match &mut merged {
            None => merged = Some(part),
            Some(m) => {
                if m.feature_names != part.feature_names {
                    return Err(DatasetError::HeaderMismatch(format!(
                        "{} has different feature columns",
                        p.file_name()
                    )));
                }
                m.rows.extend(part.rows);
            }
        }
    }
    let mut ds = merged.expect("three partitions read");
    ds.split = Some(assignment);
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_header_matches_schema() {
        let ds = LabeledDataset::with_flow_schema(vec![Row::targeted(
            FeatureVector::from_counts(0.0, 1, 0, 60, 0).to_row(),
            "siteA",
        )])
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "flow_duration,fwd_packets,bwd_packets,fwd_length,bwd_length,flow_bytes_per_s,flow_packets_per_s,avg_packet_size,binary_label,site_label"
        );
        assert_eq!(lines.next().unwrap(), "0,1,0,60,0,,,60,targeted,siteA");
        let back = read_dataset_csv(text.as_bytes()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn values_round_trip_exactly() {
        let v = 0.1f64 + 0.2;
        let ds = LabeledDataset::new(
            vec!["x".into()],
            vec![Row::untargeted(vec![Some(v)]), Row::untargeted(vec![Some(1e-300)])],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds).unwrap();
        assert_eq!(read_dataset_csv(&buf[..]).unwrap(), ds);
    }

    #[test]
    fn bad_label_column() {
        let text = "x,binary_label,site_label\n1,maybe,\n";
        assert!(matches!(
            read_dataset_csv(text.as_bytes()),
            Err(DatasetError::InvalidRow { row: 1, .. })
        ));
        let text = "x,label\n1,targeted\n";
        assert!(matches!(
            read_dataset_csv(text.as_bytes()),
            Err(DatasetError::HeaderMismatch(_))
        ));
    }

    #[test]
    fn split_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = LabeledDataset::new(
            vec!["x".into()],
            (0..6).map(|i| Row::untargeted(vec![Some(i as f64)])).collect(),
        )
        .unwrap();
        ds.split = Some(vec![
            Partition::Train,
            Partition::Test,
            Partition::Train,
            Partition::Validation,
            Partition::Train,
            Partition::Test,
        ]);
        write_split_dir(dir.path(), &ds).unwrap();
        let back = read_split_dir(dir.path()).unwrap();
        assert_eq!(back.partition(Partition::Train), ds.partition(Partition::Train));
        assert_eq!(back.partition(Partition::Test), ds.partition(Partition::Test));
        assert_eq!(back.len(), 6);
    }
}
