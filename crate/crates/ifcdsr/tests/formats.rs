use proptest::prelude::*;

use ifcdsr::{catalog_file, checkpoint, embeddings, interactions};
use ifcdsr_core::catalog::{Domain, ItemCatalog, KeyedRows};
use ifcdsr_core::model::{Architecture, Model, ModelConfig};
use ifcdsr_core::seqdata::RawInteraction;

fn keyed_rows() -> impl Strategy<Value = KeyedRows> {
    (1usize..6).prop_flat_map(|dim| {
        proptest::collection::btree_map("[a-z0-9_]{1,12}", proptest::collection::vec(-1e6f32..1e6, dim), 0..12)
            .prop_map(move |m| KeyedRows { dim, rows: m.into_iter().collect() })
    })
}

fn catalog_strategy() -> impl Strategy<Value = ItemCatalog> {
    proptest::collection::btree_map("[a-z]{1,6}", any::<bool>(), 1..20).prop_map(|m| {
        ItemCatalog::from_entries(m.into_iter().map(|(k, x)| (k, if x { Domain::X } else { Domain::Y }))).unwrap()
    })
}

proptest! {
    #[test]
    fn binary_embeddings_round_trip(rows in keyed_rows()) {
        let bytes = embeddings::encode_binary(&rows).unwrap();
        prop_assert!(bytes.starts_with(embeddings::MAGIC));
        prop_assert_eq!(embeddings::decode(&bytes).unwrap(), rows);
    }

    #[test]
    fn text_embeddings_round_trip(rows in keyed_rows()) {
        prop_assume!(!rows.rows.is_empty());
        let text = embeddings::encode_text(&rows);
        prop_assert_eq!(embeddings::decode(text.as_bytes()).unwrap(), rows);
    }

    #[test]
    fn truncated_binary_is_rejected(rows in keyed_rows(), cut in 1usize..64) {
        let bytes = embeddings::encode_binary(&rows).unwrap();
        prop_assume!(cut < bytes.len());
        prop_assert!(embeddings::decode(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn catalogs_round_trip(c in catalog_strategy()) {
        let text = catalog_file::render(&c);
        let back = catalog_file::parse(&text).unwrap();
        prop_assert_eq!(catalog_file::render(&back), text);
    }

    #[test]
    fn interaction_logs_round_trip(rows in proptest::collection::vec(("[a-z]{1,5}", "[a-z0-9]{1,5}", -1000i64..1000, any::<bool>()), 0..30)) {
        let records: Vec<RawInteraction> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (u, k, t, x))| RawInteraction { line: i + 1, user: u, item_key: k, timestamp: t, domain: if x { Domain::X } else { Domain::Y } })
            .collect();
        let back = interactions::parse(&interactions::render_records(&records)).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>(), fusion in any::<bool>(), multi in any::<bool>(), scale in -2.0f64..2.0) {
        let catalog = ItemCatalog::from_entries([("a", Domain::X), ("b", Domain::X), ("p", Domain::Y)]).unwrap();
        let cfg = ModelConfig {
            q: 4,
            e: 6,
            max_len: 3,
            layers: 2,
            heads: 2,
            temperature: 0.7,
            learnable_scale: true,
            arch: Architecture { image_fusion: fusion, multiple_attention: multi },
        };
        let mut model = Model::init(cfg, catalog.len(), seed).unwrap();
        model.params.logit_scale.set(0, 0, scale);
        let bytes = checkpoint::encode(&model, &catalog);
        let ck = checkpoint::decode(&bytes).unwrap();
        prop_assert_eq!(&ck.model, &model);
        prop_assert!(ck.check_catalog(&catalog).is_ok());
        prop_assert_eq!(checkpoint::encode(&ck.model, &catalog), bytes);
    }
}
