use proptest::prelude::*;

use svdd::archive::{Tensor, TensorArchive};
use svdd::data::{ClipRecord, Label, Manifest, Partition, Variant};
use svdd::encoder::{attention_weights, scaled_dot_attention, AttentionParams, Matrix};
use svdd::eval::{compute_eer, ScoredTrial};
use svdd::features::filterbank::Filterbank;

fn trials(bona: &[f64], fake: &[f64]) -> Vec<ScoredTrial> {
    bona.iter()
        .map(|&s| ScoredTrial::new("b", Label::Bonafide, s).unwrap())
        .chain(fake.iter().map(|&s| ScoredTrial::new("d", Label::Deepfake, s).unwrap()))
        .collect()
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    // Coarse grid so ties show up.
    prop::collection::vec((0u32..=50).prop_map(|v| v as f64 / 50.0), 1..60)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f32..3.0, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn eer_invariant_under_monotone_transform(bona in scores(), fake in scores()) {
        let base = compute_eer(&trials(&bona, &fake)).unwrap().eer;
        let f = |s: f64| s.powi(3) * 0.5 + 0.25;
        let b2: Vec<f64> = bona.iter().map(|&s| f(s)).collect();
        let f2: Vec<f64> = fake.iter().map(|&s| f(s)).collect();
        let moved = compute_eer(&trials(&b2, &f2)).unwrap().eer;
        prop_assert!((base - moved).abs() < 1e-12, "{base} vs {moved}");
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn eer_label_swap_symmetry(bona in scores(), fake in scores()) {
        let base = compute_eer(&trials(&bona, &fake)).unwrap().eer;
        let b2: Vec<f64> = fake.iter().map(|&s| 1.0 - s).collect();
        let f2: Vec<f64> = bona.iter().map(|&s| 1.0 - s).collect();
        let swapped = compute_eer(&trials(&b2, &f2)).unwrap().eer;
        prop_assert!((base - swapped).abs() < 1e-12, "{base} vs {swapped}");
    }

    #[test]
    fn eer_at_most_half_when_classes_are_ordered(bona in scores(), gap in 0.0f64..0.5) {
        let fake: Vec<f64> = bona.iter().map(|&s| (s - gap).max(0.0)).collect();
        prop_assert!(compute_eer(&trials(&bona, &fake)).unwrap().eer <= 0.5 + 1e-12);
    }

    #[test]
    fn attention_rows_are_distributions(
        (t, d) in (1usize..8, 1usize..16),
        seed in any::<u64>(),
    ) {
        let q = Matrix::from_fn(t, d, |r, c| ((seed as usize + r * 31 + c * 7) % 13) as f32 / 4.0 - 1.5);
        let k = Matrix::from_fn(t, d, |r, c| ((seed as usize + r * 17 + c * 5) % 11) as f32 / 3.0 - 1.8);
        let w = attention_weights(&q, &k).unwrap();
        for r in 0..t {
            let sum: f32 = w.row(r).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-5);
            prop_assert!(w.row(r).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn attention_commutes_with_value_translation(
        q in matrix(5, 4), k in matrix(5, 4), v in matrix(5, 3),
        shift in prop::collection::vec(-2.0f32..2.0, 3),
    ) {
        let base = scaled_dot_attention(&AttentionParams::new(q.clone(), k.clone(), v.clone()).unwrap()).unwrap();
        let mut v2 = v.clone();
        v2.add_row_vector(&shift);
        let moved = scaled_dot_attention(&AttentionParams::new(q, k, v2).unwrap()).unwrap();
        for r in 0..5 {
            for c in 0..3 {
                prop_assert!((moved.at(r, c) - base.at(r, c) - shift[c]).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn filterbank_is_linear_and_non_negative(
        power in prop::collection::vec(0.0f64..10.0, 201),
        scale in 0.0f64..5.0,
    ) {
        for fb in [Filterbank::mel(16000, 400, 80, 0.0, 8000.0), Filterbank::linear(16000, 400, 40)] {
            let a = fb.apply(&power);
            let scaled: Vec<f64> = power.iter().map(|p| p * scale).collect();
            let b = fb.apply(&scaled);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(*x >= 0.0);
                prop_assert!((x * scale - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn manifest_round_trip(
        rows in prop::collection::vec(
            ("[a-z0-9_]{1,8}", any::<bool>(), 0usize..6, "[a-z]{1,4}", prop::option::of("[a-z0-9]{1,5}")),
            1..20,
        )
    ) {
        let records: Vec<ClipRecord> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (id, bona, p, singer, codec))| ClipRecord {
                clip_id: format!("{id}{i}"),
                path: format!("/audio/{id}.wav").into(),
                label: if bona { Label::Bonafide } else { Label::Deepfake },
                singer_id: singer,
                language: "en".into(),
                partition: Partition::ALL[p],
                variant: if bona { Variant::Vocals } else { Variant::Mixture },
                codec,
            })
            .collect();
        let m = Manifest::new(records).unwrap();
        let bytes = m.to_csv_bytes().unwrap();
        prop_assert_eq!(Manifest::from_reader(bytes.as_slice(), None).unwrap(), m);
    }

    #[test]
    fn archive_round_trip(
        tensors in prop::collection::btree_map("[a-z.]{1,12}", prop::collection::vec(-1e6f32..1e6, 1..40), 1..6)
    ) {
        let mut a = TensorArchive::new();
        for (name, data) in &tensors {
            a.insert(name.clone(), Tensor::new(vec![data.len()], data.clone()).unwrap());
        }
        let back = TensorArchive::from_bytes(&a.to_bytes().unwrap()).unwrap();
        for (name, data) in &tensors {
            prop_assert_eq!(&back.get(name).unwrap().data, data);
        }
    }
}
