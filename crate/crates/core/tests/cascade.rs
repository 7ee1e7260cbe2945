mod common;

use std::collections::HashSet;

use common::{flip_per_blob, noisy_blob_hp, two_blobs};
use ndarray::Array2;
use sscc::cascade::{fit, load_model, model_from_json, model_to_json, save_model, Hyperparameters, LeafReason};
use sscc::{CascadeTree64, Dataset64, Error, Outcome};

fn clean_hp() -> Hyperparameters {
    Hyperparameters { seed: 3, ..Hyperparameters::default() }
}

fn assert_structure(tree: &CascadeTree64, n_rows: usize) {
    tree.validate().unwrap();
    assert_eq!(tree.n_accounted(), n_rows);
    for node in &tree.nodes {
        assert!(node.k <= node.labels_present.len().max(1));
        assert_eq!(node.children.len(), node.k);
    }
}

#[test]
fn separated_blobs_give_two_pure_classes() {
    let data = two_blobs(30, 3, 10.0, 1);
    let (tree, report) = fit(&data, &clean_hp()).unwrap();
    assert_structure(&tree, 60);
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree.depth(), 0);
    assert_eq!(tree.classes.len(), 2);
    assert_eq!(tree.root().completeness, 1.0);
    assert!(tree.removed.is_empty());
    assert!(report.warnings.is_empty());
    for class in &tree.classes {
        assert_eq!(class.reason, LeafReason::CemThreshold);
        assert_eq!(class.size(), 30);
        assert_eq!(class.composition[class.dominant_label], 30);
    }
}

#[test]
fn per_blob_flips_are_removed() {
    let clean = two_blobs(50, 2, 10.0, 7);
    let (noisy, flipped) = flip_per_blob(&clean, 50, 5, 7);
    let (tree, _) = fit(&noisy, &noisy_blob_hp(7)).unwrap();
    assert_structure(&tree, 100);
    let removed = tree.removed_row_ids();
    let flipped: HashSet<u64> = flipped.into_iter().collect();
    assert_eq!(removed, flipped);
    assert!(tree.removed.iter().all(|r| r.cem < 0.05));
}

#[test]
fn three_labels_over_nested_structure_stay_consistent() {
    // blob 1 holds labels 1 and 2 side by side, so a second level may be needed
    let mut x = Array2::zeros((60, 2));
    let mut labels = Vec::new();
    for i in 0..60 {
        let j = (i % 20) as f64 * 0.05;
        let (a, b, l) = match i / 20 {
            0 => (0.0, 0.0, 0),
            1 => (20.0, 0.0, 1),
            _ => (20.0, 3.0, 2),
        };
        x[[i, 0]] = a + j;
        x[[i, 1]] = b + j;
        labels.push(l);
    }
    let data = Dataset64::from_parts(x, labels).unwrap();
    let (tree, _) = fit(&data, &clean_hp()).unwrap();
    assert_structure(&tree, 60);
    let of = tree.class_of_row();
    for (i, &id) in data.row_ids().iter().enumerate() {
        let class = &tree.classes[of[&id]];
        assert_eq!(class.dominant_label, data.labels()[i]);
    }
}

#[test]
fn save_and_load_are_bit_exact() {
    let clean = two_blobs(40, 4, 6.0, 2);
    let (noisy, _) = flip_per_blob(&clean, 40, 4, 2);
    let (tree, _) = fit(&noisy, &noisy_blob_hp(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&tree, &path).unwrap();
    let back: CascadeTree64 = load_model(&path).unwrap();
    assert_eq!(back, tree);
    assert_eq!(model_to_json(&back), model_to_json(&tree));
    for (a, b) in back.nodes.iter().zip(&tree.nodes) {
        for (x, y) in a.centers.iter().zip(b.centers.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn damaged_models_are_rejected() {
    let (tree, _) = fit(&two_blobs(20, 2, 10.0, 4), &clean_hp()).unwrap();
    let text = model_to_json(&tree);

    let truncated = &text[..text.len() / 2];
    assert!(matches!(model_from_json::<f64>(truncated), Err(Error::CorruptModel(_))));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["version"] = 99.into();
    assert!(matches!(
        model_from_json::<f64>(&v.to_string()),
        Err(Error::SchemaVersion { found: 99, .. })
    ));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["nodes"][0]["children"].as_array_mut().unwrap().pop();
    assert!(matches!(model_from_json::<f64>(&v.to_string()), Err(Error::Invariant(_))));

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["surprise"] = 1.into();
    assert!(matches!(model_from_json::<f64>(&v.to_string()), Err(Error::CorruptModel(_))));
}

#[test]
fn fitting_is_deterministic() {
    let clean = two_blobs(30, 5, 4.0, 9);
    let (noisy, _) = flip_per_blob(&clean, 30, 3, 9);
    let hp = Hyperparameters { subset_budget: 12, ..noisy_blob_hp(11) };
    let (a, ra) = fit(&noisy, &hp).unwrap();
    let (b, rb) = fit(&noisy, &hp).unwrap();
    assert_eq!(model_to_json(&a), model_to_json(&b));
    assert_eq!(ra.to_json(), rb.to_json());
}

#[test]
fn single_label_data_makes_one_class_with_a_warning() {
    let data = two_blobs(10, 2, 5.0, 1).with_labels(vec![0; 20]).unwrap();
    let (tree, report) = fit(&data, &clean_hp()).unwrap();
    assert_eq!(tree.classes.len(), 1);
    assert_eq!(tree.root().k, 1);
    assert_eq!(tree.root().children, vec![Outcome::Leaf { class_id: 0 }]);
    assert_eq!(report.warnings.len(), 1);
}

#[test]
fn unseparable_labels_collapse_the_root() {
    // alternating labels on one blob: no clustering reaches the threshold
    let data = two_blobs(20, 2, 0.0, 5);
    let labels = (0..40).map(|i| i % 2).collect();
    let data = data.with_labels(labels).unwrap();
    let hp = Hyperparameters { lambda_cs: 0.99, ..clean_hp() };
    let (tree, report) = fit(&data, &hp).unwrap();
    assert_structure(&tree, 40);
    assert_eq!(tree.classes.len(), 1);
    assert_eq!(tree.classes[0].reason, LeafReason::LowCompleteness);
    assert!(report.nodes[0].cs_max < 0.99);
}

#[test]
fn bad_inputs_are_errors() {
    let tiny = Dataset64::from_parts(ndarray::array![[0.0], [1.0]], vec![0, 1]).unwrap();
    assert!(matches!(fit(&tiny, &clean_hp()), Err(Error::InvalidArgument(_))));
    let data = two_blobs(10, 2, 5.0, 1);
    let hp = Hyperparameters { lambda_ol: 0.95, ..clean_hp() };
    assert!(matches!(fit(&data, &hp), Err(Error::InvalidArgument(_))));
    let hp = Hyperparameters { subset_min_size: 3, ..clean_hp() };
    assert!(fit(&data, &hp).is_err());
}

#[test]
fn f32_fit_matches_f64_on_easy_data() {
    let d64 = two_blobs(20, 2, 10.0, 3);
    let d32 = sscc::Dataset32::from_parts(d64.features().mapv(|v| v as f32), d64.labels().to_vec()).unwrap();
    let (a, _) = fit(&d64, &clean_hp()).unwrap();
    let (b, _) = fit(&d32, &clean_hp()).unwrap();
    assert_eq!(a.classes, b.classes);
}
