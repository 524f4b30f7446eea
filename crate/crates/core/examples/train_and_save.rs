//! Train each of the seven classifiers on a synthetic closed world, save it
//! as a JSON document, reload it and check the predictions agree.
//!
//! ```text
//! cargo run --release --example train_and_save
//! ```

use wfkit::dataset::{split, Partition, Ratios, Task};
use wfkit::learners::{fit, ClassifierSpec, ModelKind, TrainedModel};
use wfkit::synth::{closed_world_profiles, generate_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_dataset(&closed_world_profiles(6, 0), 100, 3.0, None, 5)?;
    let data = split(&data, Ratios::new(0.7, 0.15, 0.15)?, Task::Multiclass, 5)?;
    let (train, test) = (data.partition(Partition::Train), data.partition(Partition::Test));

    for kind in ModelKind::ALL {
        let spec = ClassifierSpec::new(kind, 5);
        let model = fit(&spec, &train, Task::Multiclass)?;
        let bytes = model.save();
        let reloaded = TrainedModel::load(&bytes)?;
        let predicted = reloaded.predict_dataset(&test)?;
        assert_eq!(predicted, model.predict_dataset(&test)?);
        let correct = predicted.iter().zip(test.labels(Task::Multiclass)).filter(|(p, t)| p.as_str() == *t).count();
        println!(
            "{:<5} {:>7} byte document, test accuracy {:.3}",
            kind.display_name(),
            bytes.len(),
            correct as f64 / test.len() as f64
        );
    }
    Ok(())
}
