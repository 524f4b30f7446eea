//! Confusion matrix and the three averaging modes on a small hand-made
//! prediction set.
//!
//! ```text
//! cargo run --example metrics
//! ```

use wfkit::eval::{compute_metrics, Averaging};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = ["a", "a", "a", "a", "b", "b", "c", "c", "c", "c"];
    let pred = ["a", "a", "b", "a", "b", "c", "c", "c", "a", "c"];

    for averaging in [Averaging::Binary { positive: "a".into() }, Averaging::Macro, Averaging::Weighted] {
        let m = compute_metrics(&truth, &pred, averaging.clone())?;
        println!(
            "{:<30} accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
            format!("{averaging:?}"),
            m.accuracy,
            m.precision,
            m.recall,
            m.f1
        );
    }

    let m = compute_metrics(&truth, &pred, Averaging::Weighted)?;
    println!("\nconfusion (rows = truth, columns = prediction), classes {:?}", m.confusion.classes);
    for row in &m.confusion.counts {
        println!("  {row:?}");
    }
    for c in &m.per_class {
        println!("  {:<2} precision {:.3} recall {:.3} f1 {:.3} support {}", c.class, c.precision, c.recall, c.f1, c.support);
    }
    Ok(())
}
