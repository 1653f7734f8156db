use std::path::Path;

use gradflow::graph::load_dataset_dir;
use gradflow::model::ModelConfig;
use gradflow::train::{train, TrainConfig};

#[test]
fn one_layer_cora_train_accuracy_rises_early() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cora");
    if !dir.exists() {
        eprintln!("skipping: {} not present", dir.display());
        return;
    }
    // Raw binary bag-of-words features.
    let g = load_dataset_dir(&dir, true).unwrap();
    let model = ModelConfig::new(1, g.features().cols(), g.num_classes());
    let mut cfg = TrainConfig::new(model, 0.01, 11);
    cfg.early_stop = false;
    let out = train(&g, &cfg).unwrap();
    let acc: Vec<f64> = out.log.epochs.iter().map(|e| e.train_acc).collect();
    assert_eq!(acc.len(), 11);
    for w in acc.windows(2) {
        assert!(w[1] > w[0], "train accuracy {acc:?}");
    }
}
