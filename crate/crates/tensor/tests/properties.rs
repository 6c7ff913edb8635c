use ipp_tensor::checkpoint::{read_checkpoint, write_checkpoint};
use ipp_tensor::{masked_bounded_softmax, ParamStore, Tensor};
use proptest::prelude::*;

proptest! {
    #[test]
    fn bounded_softmax_is_a_distribution(
        logits in prop::collection::vec(-30.0f64..30.0, 6),
        mask in prop::collection::vec(any::<bool>(), 6),
        eps in 0.0f64..=1.0,
    ) {
        prop_assume!(mask.iter().any(|&m| m));
        let p = masked_bounded_softmax(&logits, &mask, eps).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, m) in p.iter().zip(&mask) {
            prop_assert!(*x >= 0.0);
            if !m {
                prop_assert_eq!(*x, 0.0);
            }
        }
        let valid = mask.iter().filter(|&&m| m).count() as f64;
        for (x, m) in p.iter().zip(&mask) {
            if *m {
                prop_assert!(*x >= eps / valid - 1e-15);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(
        a in prop::collection::vec(any::<f64>(), 1..20),
        b in prop::collection::vec(-1e300f64..1e300, 6),
    ) {
        let mut store = ParamStore::new();
        store.add("first", Tensor::from_vec(&[a.len()], a.clone()).unwrap());
        store.add("second.weight", Tensor::from_vec(&[2, 3], b.clone()).unwrap());
        let meta = vec![("planes".to_string(), "x,y".to_string())];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &store, &meta).unwrap();
        let (loaded, meta2) = read_checkpoint(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(meta2, meta);
        for id in store.ids() {
            prop_assert_eq!(store.name(id), loaded.name(id));
            prop_assert_eq!(store.value(id).shape(), loaded.value(id).shape());
            let x: Vec<u64> = store.value(id).data().iter().map(|v| v.to_bits()).collect();
            let y: Vec<u64> = loaded.value(id).data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(x, y);
        }
    }
}
