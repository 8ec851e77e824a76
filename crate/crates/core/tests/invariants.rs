mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tra_core::bounds::am_gm_holds;
use tra_core::cart::{prune_at, train_tree, train_tree_with_stats, ccp_grid, TrainConfig};
use tra_core::eval::{functional_equivalence, DEFAULT_PIECE_CAP};
use tra_core::generate::gen_random_tree;
use tra_core::model::boxes_to_tree;
use tra_core::{ForestModel, Label, Model, Point};

use common::{all_points, mixed_schemas, random_region, small_schemas};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_pieces_partition_the_region(schema_ix in 0usize..6, seed in any::<u64>()) {
        let schema = &small_schemas()[schema_ix];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let region = random_region(schema, &mut rng);
        let x = region.sample(schema, &mut rng);
        let cf = region.sample(schema, &mut rng);
        prop_assume!(x != cf);
        let out = region.split(schema, &x, &cf).unwrap();
        prop_assert!(out.pieces[0].contains(schema, &x));
        prop_assert!(out.pieces.last().unwrap().contains(schema, &cf));
        prop_assert_eq!(out.pieces.len(), out.records.len() + 1);
        let total: u128 = out.pieces.iter().map(|p| p.grid_volume()).sum();
        prop_assert_eq!(total, region.grid_volume());
        for (i, a) in out.pieces.iter().enumerate() {
            prop_assert!(!a.is_empty());
            prop_assert!(a.is_subset_of(&region));
            for b in &out.pieces[i + 1..] {
                prop_assert!(a.intersect(b).is_none());
            }
        }
        prop_assert!(region.contains(schema, &region.center(schema).unwrap()));
    }

    #[test]
    fn leaf_boxes_rebuild_the_tree(schema_ix in 0usize..6, depth in 0u32..5, seed in any::<u64>()) {
        let schema = &small_schemas()[schema_ix];
        let t = gen_random_tree(schema, depth, 3, seed).unwrap();
        let rebuilt = boxes_to_tree(schema, &t.leaf_regions(schema)).unwrap();
        for p in all_points(schema) {
            prop_assert_eq!(t.predict(&p), rebuilt.predict(&p));
        }
        let stats = t.stats();
        prop_assert_eq!(stats.s.iter().sum::<u64>(), stats.n);
        prop_assert_eq!(stats.leaf_count, stats.node_count - stats.leaf_count + 1);
    }

    #[test]
    fn equivalence_agrees_with_enumeration(schema_ix in 0usize..6, seed in any::<u64>()) {
        let schema = &small_schemas()[schema_ix];
        let f: Model = gen_random_tree(schema, 3, 2, seed).unwrap().into();
        let g: Model = if seed % 3 == 0 {
            f.clone()
        } else {
            gen_random_tree(schema, 3, 2, seed / 2).unwrap().into()
        };
        let eq = functional_equivalence(schema, &f, &g, DEFAULT_PIECE_CAP).unwrap();
        let differs = all_points(schema).into_iter().find(|p| f.predict(p) != g.predict(p));
        prop_assert_eq!(eq.equivalent, differs.is_none());
        if let Some(w) = eq.witness {
            prop_assert_ne!(f.predict(&w), g.predict(&w));
        }
    }

    #[test]
    fn forest_votes_ignore_tree_order(seed in any::<u64>()) {
        let schema = &mixed_schemas()[2];
        let trees: Vec<_> = (0..4).map(|k| gen_random_tree(schema, 3, 3, seed ^ k).unwrap()).collect();
        let mut reversed = trees.clone();
        reversed.reverse();
        let a = ForestModel::new(trees).unwrap();
        let b = ForestModel::new(reversed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let p = schema.full_region().sample(schema, &mut rng);
            prop_assert_eq!(a.predict(&p), b.predict(&p));
        }
    }

    #[test]
    fn am_gm_for_random_split_counts(s in proptest::collection::vec(0u64..50, 1..9)) {
        prop_assert!(am_gm_holds(&s));
    }

    #[test]
    fn cart_fits_distinct_points(seed in any::<u64>(), n in 1usize..60) {
        let schema = &mixed_schemas()[3];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points: Vec<Point> = tra_core::generate::uniform_points(schema, n, &mut rng);
        points.sort();
        points.dedup();
        let labels: Vec<Label> = points.iter().map(|p| Label(p.coords().iter().sum::<u32>() % 3)).collect();
        let trained = train_tree_with_stats(&points, &labels, &TrainConfig::default()).unwrap();
        prop_assert!(points.iter().zip(&labels).all(|(p, l)| trained.tree.predict(p) == *l));
        let mut previous = usize::MAX;
        for alpha in ccp_grid() {
            let size = prune_at(&trained, alpha).node_count();
            prop_assert!(size <= previous);
            previous = size;
        }
        let again = train_tree(&points, &labels, &TrainConfig::default()).unwrap();
        prop_assert_eq!(again, trained.tree);
    }
}
