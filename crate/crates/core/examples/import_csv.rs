//! Import a flow CSV exported by another tool, mapping its columns onto
//! the internal feature names and one-hot encoding a categorical column.
//!
//! ```text
//! cargo run --example import_csv
//! ```

use std::collections::BTreeSet;

use wfkit::dataset::{import_external_csv, ColumnTarget, ImportOptions, Task};

const EXPORT: &str = "\
Flow Duration,Tot Fwd Pkts,Tot Bwd Pkts,TotLen Fwd Pkts,TotLen Bwd Pkts,Protocol,Label
1.911063,109,0,7953,0,TCP,news.example
0.138093,7,3,957,410,TCP,mail.example
0.096231,5,2,2397,120,UDP,other
0.131105,6,,938,200,TCP,news.example
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let feature = |external: &str, internal: &str| (external.to_string(), ColumnTarget::Feature(internal.into()));
    let options = ImportOptions {
        column_map: vec![
            feature("Flow Duration", "flow_duration"),
            feature("Tot Fwd Pkts", "fwd_packets"),
            feature("Tot Bwd Pkts", "bwd_packets"),
            feature("TotLen Fwd Pkts", "fwd_length"),
            feature("TotLen Bwd Pkts", "bwd_length"),
            ("Protocol".to_string(), ColumnTarget::OneHot),
        ],
        label_column: "Label".into(),
        targeted_labels: Some(BTreeSet::from(["news.example".to_string(), "mail.example".to_string()])),
    };
    let ds = import_external_csv(EXPORT.as_bytes(), &options)?;
    println!("columns: {}", ds.feature_names.join(", "));
    for row in &ds.rows {
        println!("{:<14} {:?}", row.label(Task::Multiclass), row.features);
    }
    Ok(())
}
